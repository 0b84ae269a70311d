import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ququart.errors import DomainError, ZeroVector
from ququart.states import (
    PureQuquart,
    coherency_from_pure,
    fidelity,
    information_loss,
    normalize,
    parameter_count,
    parse_state,
    random_state,
)

finite = st.floats(-10, 10, allow_nan=False)
amplitudes = st.lists(st.builds(complex, finite, finite), min_size=4, max_size=4).filter(
    lambda v: sum(abs(a) ** 2 for a in v) > 1e-6
)


@pytest.mark.parametrize(
    "raw, expected",
    [
        ((2, 0, 0, 0), (1, 0, 0, 0)),
        ((0, 0, 0, 1j), (0, 0, 0, 1)),
        ((1, 0, 0, 1), (1 / math.sqrt(2), 0, 0, 1 / math.sqrt(2))),
    ],
)
def test_normalize_examples(raw, expected):
    assert np.allclose(normalize(raw).vector, expected, atol=1e-15)


def test_normalize_zero_vector():
    with pytest.raises(ZeroVector):
        normalize([0, 0, 0, 0])


def test_constructor_rejects_unnormalized():
    with pytest.raises(DomainError):
        PureQuquart((1, 1, 0, 0))


@given(amplitudes)
def test_normalize_is_canonical_and_proportional(raw):
    s = normalize(raw)
    v = s.vector
    assert abs(np.vdot(v, v).real - 1) < 1e-12
    lead = next(a for a in v if abs(a) > 1e-9)
    assert lead.imag == 0 and lead.real > 0
    r = np.asarray(raw, dtype=complex)
    # proportional: |<raw|s>| = |raw|
    assert abs(abs(np.vdot(r, v)) - np.linalg.norm(r)) < 1e-9 * np.linalg.norm(r)


def test_coherency_examples():
    assert np.allclose(coherency_from_pure(normalize([1, 0, 0, 0])).k, np.diag([1, 0, 0, 0]))
    m = coherency_from_pure(normalize([1, 0, 0, 1])).moments
    assert m["A"] == pytest.approx(0.5) and m["D"] == pytest.approx(0.5)
    assert m["G"] == pytest.approx(0.5)
    for key in "BCEFIKL":
        assert abs(m[key]) < 1e-15


def test_coherency_matches_elementwise_loop(rng):
    s = random_state(rng)
    c = s.c
    k = coherency_from_pure(s).k
    for i in range(4):
        for j in range(4):
            assert k[i, j] == pytest.approx(c[i].conjugate() * c[j], abs=1e-15)
    assert coherency_from_pure(s).moments["E"] == pytest.approx(c[0].conjugate() * c[1])


@given(amplitudes)
def test_coherency_invariants(raw):
    cm = coherency_from_pure(normalize(raw))
    assert cm.is_hermitian(1e-12)
    assert abs(np.trace(cm.k) - 1) < 1e-12
    ev = cm.eigenvalues()
    assert ev.min() >= -1e-10
    assert ev[-2] <= 1e-10


@given(amplitudes, st.floats(1e-3, 1e3))
def test_coherency_scale_invariant(raw, scale):
    a = coherency_from_pure(normalize(raw)).k
    b = coherency_from_pure(normalize([scale * z for z in raw])).k
    assert np.allclose(a, b, atol=1e-12)


def test_fidelity_examples(rng):
    a = random_state(rng)
    assert fidelity(a, a) == pytest.approx(1.0)
    assert fidelity(normalize([1, 0, 0, 0]), normalize([0, 0, 0, 1])) == 0.0
    rotated = a.vector * cmath.exp(0.7j)
    assert fidelity(a, rotated) == pytest.approx(1.0)


@given(amplitudes, amplitudes, st.floats(0, 2 * math.pi))
def test_fidelity_symmetric_and_gauge_invariant(ra, rb, phi):
    a, b = normalize(ra), normalize(rb)
    assert fidelity(a, b) == pytest.approx(fidelity(b, a), abs=1e-12)
    phased = normalize([cmath.exp(1j * phi) * z for z in ra])
    assert fidelity(phased, b) == pytest.approx(fidelity(a, b), abs=1e-12)
    assert 0.0 <= fidelity(a, b) <= 1.0


@pytest.mark.parametrize("f, loss", [(0.999, 3.0), (0.9, 1.0), (0.0, 0.0)])
def test_information_loss_examples(f, loss):
    assert information_loss(f) == pytest.approx(loss, abs=1e-12)


@pytest.mark.parametrize("f", [1.0, 1.5, -0.1])
def test_information_loss_domain(f):
    with pytest.raises(DomainError):
        information_loss(f)


@settings(max_examples=200)
@given(st.floats(0, 0.999999), st.floats(0, 0.999999))
def test_information_loss_increasing(a, b):
    a, b = sorted((a, b))
    assert information_loss(a) <= information_loss(b)
    if b - a > 1e-9:
        assert information_loss(a) < information_loss(b)


@pytest.mark.parametrize("d, kind, n", [(4, "pure", 6), (4, "mixed", 15), (2, "pure", 2)])
def test_parameter_count(d, kind, n):
    assert parameter_count(d, kind) == n


def test_parameter_count_domain():
    with pytest.raises(DomainError):
        parameter_count(1, "pure")


def test_json_round_trip(rng):
    s = random_state(rng)
    data = json.loads(s.to_json())
    assert data["basis"] == "HH,HV,VH,VV"
    assert len(data["amplitudes"]) == 4 and all(len(p) == 2 for p in data["amplitudes"])
    assert np.allclose(PureQuquart.from_json(s.to_json()).vector, s.vector, atol=1e-15)


def test_parse_state():
    assert np.allclose(parse_state("0, 0, 0, 1j").vector, [0, 0, 0, 1])
    with pytest.raises(DomainError):
        parse_state("1,2,3")
    with pytest.raises(DomainError):
        parse_state("1,x,0,0")
