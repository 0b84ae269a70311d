"""Pure ququart states, coherency matrices and quality metrics.

Amplitudes are stored in the basis order (HsHi, HsVi, VsHi, VsVi); the first
index is the signal photon, the second the idler.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, ZeroVector

BASIS = ("HH", "HV", "VH", "VV")
_GAUGE_EPS = 1e-9


@dataclass(frozen=True)
class PureQuquart:
    """Normalized biphoton polarization state in canonical global-phase gauge.

    Build instances with :func:`normalize`; the constructor validates but does
    not rescale or rephase.
    """

    c: tuple[complex, complex, complex, complex]

    def __post_init__(self):
        if len(self.c) != 4:
            raise DomainError(f"a ququart has 4 amplitudes, got {len(self.c)}")
        object.__setattr__(self, "c", tuple(complex(a) for a in self.c))
        norm = sum(abs(a) ** 2 for a in self.c)
        if abs(norm - 1.0) > 1e-10:
            raise DomainError(f"amplitudes not normalized (sum |c|^2 = {norm})")

    @property
    def vector(self) -> np.ndarray:
        return np.array(self.c, dtype=complex)

    def to_dict(self) -> dict:
        return {
            "basis": ",".join(BASIS),
            "amplitudes": [[a.real, a.imag] for a in self.c],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "PureQuquart":
        basis = data.get("basis", ",".join(BASIS))
        if basis.replace(" ", "") != ",".join(BASIS):
            raise DomainError(f"unsupported basis order {basis!r}")
        amps = data["amplitudes"]
        return normalize([complex(re, im) for re, im in amps])

    @classmethod
    def from_json(cls, text: str) -> "PureQuquart":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CoherencyMatrix:
    """4x4 matrix of fourth-order field moments; equals the polarization density matrix."""

    k: np.ndarray

    def __post_init__(self):
        k = np.array(self.k, dtype=complex)
        if k.shape != (4, 4):
            raise DomainError(f"coherency matrix must be 4x4, got {k.shape}")
        k.setflags(write=False)
        object.__setattr__(self, "k", k)

    @property
    def moments(self) -> dict[str, complex]:
        """Named moments A..L in the upper triangle (A, B, C, D on the diagonal)."""
        k = self.k
        return {
            "A": k[0, 0], "B": k[1, 1], "C": k[2, 2], "D": k[3, 3],
            "E": k[0, 1], "F": k[0, 2], "G": k[0, 3],
            "I": k[1, 2], "K": k[1, 3], "L": k[2, 3],
        }

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return bool(np.allclose(self.k, self.k.conj().T, atol=tol, rtol=0))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.k)


def normalize(raw: Iterable[complex]) -> PureQuquart:
    """Scale ``raw`` to unit norm and fix the global phase.

    The first amplitude with modulus above 1e-9 is rotated onto the
    non-negative real axis.
    """
    v = np.asarray(list(raw), dtype=complex)
    if v.shape != (4,):
        raise DomainError(f"expected 4 amplitudes, got shape {v.shape}")
    norm2 = float(np.vdot(v, v).real)
    if not norm2 > 1e-300:
        raise ZeroVector("cannot normalize a zero vector")
    v = v / math.sqrt(norm2)
    idx = int(np.argmax(np.abs(v) > _GAUGE_EPS))
    lead = v[idx]
    v = v * (abs(lead) / lead)
    # rephasing leaves rounding noise in the imaginary part of the gauge entry
    v[idx] = abs(lead)
    return PureQuquart(tuple(complex(a) for a in v))


def coherency_from_pure(s: PureQuquart) -> CoherencyMatrix:
    """Entry (i, j) is conj(c_i) * c_j, e.g. E = conj(c1) c2 sits at row 1, column 2."""
    c = s.vector
    return CoherencyMatrix(np.outer(c.conj(), c))


def fidelity(a: PureQuquart | Sequence[complex], b: PureQuquart | Sequence[complex]) -> float:
    """Overlap |<a|b>|^2 of two normalized states."""
    va = a.vector if isinstance(a, PureQuquart) else np.asarray(a, dtype=complex)
    vb = b.vector if isinstance(b, PureQuquart) else np.asarray(b, dtype=complex)
    f = abs(np.vdot(va, vb)) ** 2
    return float(min(max(f, 0.0), 1.0))


def information_loss(mean_fidelity: float) -> float:
    """log10(1 / (1 - F)); 3 corresponds to a mean fidelity of 0.999."""
    f = float(mean_fidelity)
    if not 0.0 <= f < 1.0:
        raise DomainError(f"information loss needs 0 <= F < 1, got {f}")
    return math.log10(1.0 / (1.0 - f))


def parameter_count(d: int, kind: str = "pure") -> int:
    """Number of real parameters of a d-level state (normalization excluded)."""
    if d < 2:
        raise DomainError(f"dimension must be >= 2, got {d}")
    if kind == "pure":
        return 2 * d - 2
    if kind == "mixed":
        return d * d - 1
    raise DomainError(f"kind must be 'pure' or 'mixed', got {kind!r}")


def basis_state(index: int) -> PureQuquart:
    v = [0j] * 4
    v[index] = 1.0
    return normalize(v)


def random_state(rng: np.random.Generator) -> PureQuquart:
    """Haar-random pure ququart."""
    v = rng.normal(size=4) + 1j * rng.normal(size=4)
    return normalize(v)


def parse_state(text: str) -> PureQuquart:
    """Parse ``"a,b,c,d"`` of Python complex literals, e.g. ``"0.7071,0,0,0.7071j"``."""
    parts = [p.strip().replace(" ", "") for p in text.split(",")]
    if len(parts) != 4:
        raise DomainError(f"state needs 4 comma-separated amplitudes, got {len(parts)}")
    try:
        return normalize([complex(p) for p in parts])
    except ValueError as exc:
        if isinstance(exc, (DomainError, ZeroVector)):
            raise
        raise DomainError(f"malformed amplitude in {text!r}") from exc
