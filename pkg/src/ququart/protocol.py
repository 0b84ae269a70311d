"""Measurement schedules, the instrumental matrix and completeness diagnostics.

Plate order: light passes Wp1 (``plate1``, angle theta_k) first and Wp2
(``plate2``, angle theta_l) second, then a beamsplitter with a vertical
polarizer in each arm. The amplitude of setting j is

    M_j = 1/2 <VsVi| G(delta_2, theta_l) G(delta_1, theta_k) |c> = X_j . c

where 1/2 is the beamsplitter factor. The closed form for X_j written with
alpha/beta products (:func:`row_closed_form`) is the complex conjugate of this
row; it is kept only as a cross-check.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateInput, DomainError, IndexOutOfRange
from .optics import (
    LAMBDA_IDLER_NM,
    LAMBDA_SIGNAL_NM,
    DispersionModel,
    Waveplate,
    biphoton_transform,
    optical_phase,
    transmission_reflection,
)

PLATE1_ANGLES_DEG = (0.0, 15.0, 30.0, 45.0)
PLATE2_ANGLES_DEG = tuple(float(a) for a in range(0, 360, 10))
STANDARD_SCHEDULE = "standard-144"
DEFAULT_REL_THRESHOLD = 1e-10


def standard_settings() -> tuple[tuple[float, float], ...]:
    """Wp1-major product of the Wp1 and Wp2 angle lists, in radians."""
    return tuple(
        (math.radians(a), math.radians(b)) for a in PLATE1_ANGLES_DEG for b in PLATE2_ANGLES_DEG
    )


@dataclass(frozen=True)
class ProtocolSpec:
    plate1: Waveplate
    plate2: Waveplate
    settings: tuple[tuple[float, float], ...]
    wavelengths: tuple[float, float] = (LAMBDA_SIGNAL_NM, LAMBDA_IDLER_NM)
    dispersion: DispersionModel = field(default_factory=DispersionModel.quartz)
    schedule_name: str | None = None

    def __post_init__(self):
        settings = tuple((float(a), float(b)) for a, b in self.settings)
        if not settings:
            raise DomainError("protocol needs at least one setting")
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))
        for lam in self.wavelengths:
            self.dispersion.check_wavelength(lam)

    @property
    def m(self) -> int:
        return len(self.settings)

    def phases(self) -> tuple[float, float, float, float]:
        """(delta_1s, delta_1i, delta_2s, delta_2i)."""
        lam_s, lam_i = self.wavelengths
        h1, h2 = self.plate1.thickness_mm, self.plate2.thickness_mm
        d = self.dispersion
        return (
            optical_phase(h1, lam_s, d),
            optical_phase(h1, lam_i, d),
            optical_phase(h2, lam_s, d),
            optical_phase(h2, lam_i, d),
        )

    def settings_deg(self) -> list[tuple[float, float]]:
        return [(round(math.degrees(a), 12), round(math.degrees(b), 12)) for a, b in self.settings]

    def to_dict(self) -> dict:
        schedule = self.schedule_name if self.schedule_name else [list(s) for s in self.settings_deg()]
        return {
            "plate1_mm": self.plate1.thickness_mm,
            "plate2_mm": self.plate2.thickness_mm,
            "lambda_s_nm": self.wavelengths[0],
            "lambda_i_nm": self.wavelengths[1],
            "dispersion": self.dispersion.to_config(),
            "schedule": schedule,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def spec_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict) -> "ProtocolSpec":
        try:
            h1 = float(data["plate1_mm"])
            h2 = float(data["plate2_mm"])
        except KeyError as exc:
            raise DomainError(f"protocol config is missing {exc.args[0]!r}") from None
        schedule = data.get("schedule", STANDARD_SCHEDULE)
        if schedule == STANDARD_SCHEDULE:
            settings, name = standard_settings(), STANDARD_SCHEDULE
        elif isinstance(schedule, str):
            raise DomainError(f"unknown schedule {schedule!r}")
        else:
            settings = tuple((math.radians(a), math.radians(b)) for a, b in schedule)
            name = None
        return cls(
            Waveplate(h1, "Wp1"),
            Waveplate(h2, "Wp2"),
            settings,
            (float(data.get("lambda_s_nm", LAMBDA_SIGNAL_NM)), float(data.get("lambda_i_nm", LAMBDA_IDLER_NM))),
            DispersionModel.from_config(data.get("dispersion")),
            name,
        )

    @classmethod
    def from_json(cls, text: str) -> "ProtocolSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class InstrumentMatrix:
    x: np.ndarray
    spec: ProtocolSpec | None = None

    def __post_init__(self):
        x = np.array(self.x, dtype=complex)
        if x.ndim != 2 or x.shape[1] != 4:
            raise DomainError(f"instrument matrix must be m x 4, got {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def m(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class CompletenessReport:
    singular_values: tuple[float, ...]
    rank: int
    ratio: float
    complete: bool

    CSV_HEADER = ",".join([f"sigma_{i:02d}" for i in range(1, 17)] + ["rank", "ratio", "complete"])

    def to_csv(self) -> str:
        sv = list(self.singular_values) + [0.0] * (16 - len(self.singular_values))
        cells = [repr(float(s)) for s in sv] + [str(self.rank), repr(float(self.ratio)), str(self.complete).lower()]
        return self.CSV_HEADER + "\n" + ",".join(cells) + "\n"


def standard_protocol(
    plate1: Waveplate,
    plate2: Waveplate,
    wavelengths: tuple[float, float] = (LAMBDA_SIGNAL_NM, LAMBDA_IDLER_NM),
    dispersion: DispersionModel | None = None,
) -> ProtocolSpec:
    """144 settings: Wp1 at 0/15/30/45 deg, Wp2 through a full turn in 10 deg steps."""
    return ProtocolSpec(
        plate1,
        plate2,
        standard_settings(),
        wavelengths,
        dispersion or DispersionModel.quartz(),
        STANDARD_SCHEDULE,
    )


def _projected_rows(d1s, d1i, d2s, d2i, theta_k, theta_l):
    """Rows 1/2 <V|J2 J1| (x) <V|J2 J1| for broadcastable phase and angle arrays.

    Returns an array of shape broadcast(...) + (4,).
    """
    factors = []
    for d1, d2 in ((d1s, d2s), (d1i, d2i)):
        t1, r1 = transmission_reflection(d1, theta_k)
        t2, r2 = transmission_reflection(d2, theta_l)
        # <V| J2 = (-r2*, t2*); then times J1 = [[t1, r1], [-r1*, t1*]]
        h = -np.conj(r2) * t1 - np.conj(t2) * np.conj(r1)
        v = -np.conj(r2) * r1 + np.conj(t2) * np.conj(t1)
        factors.append((h, v))
    (hs, vs), (hi, vi) = factors
    return 0.5 * np.stack(np.broadcast_arrays(hs * hi, hs * vi, vs * hi, vs * vi), axis=-1)


def row(spec: ProtocolSpec, j: int) -> np.ndarray:
    """Row j of X by explicit 4x4 matrix products."""
    if not 0 <= j < spec.m:
        raise IndexOutOfRange(f"setting index {j} outside [0, {spec.m})")
    d1s, d1i, d2s, d2i = spec.phases()
    theta_k, theta_l = spec.settings[j]
    g = biphoton_transform(d2s, d2i, theta_l) @ biphoton_transform(d1s, d1i, theta_k)
    return 0.5 * g[3, :]


def row_closed_form(spec: ProtocolSpec, j: int) -> np.ndarray:
    """Row j from the alpha/beta product formula, taken literally.

    alpha = -t1* r2 - r1 t2,  beta = -r1* r2 + t1 t2,
    X_j = 1/2 (a_s a_i, a_s b_i, b_s a_i, b_s b_i).

    This equals ``row(spec, j).conj()``.
    """
    if not 0 <= j < spec.m:
        raise IndexOutOfRange(f"setting index {j} outside [0, {spec.m})")
    d1s, d1i, d2s, d2i = spec.phases()
    theta_k, theta_l = spec.settings[j]
    ab = []
    for d1, d2 in ((d1s, d2s), (d1i, d2i)):
        t1, r1 = (complex(z) for z in transmission_reflection(d1, theta_k))
        t2, r2 = (complex(z) for z in transmission_reflection(d2, theta_l))
        ab.append((-t1.conjugate() * r2 - r1 * t2, -r1.conjugate() * r2 + t1 * t2))
    (a_s, b_s), (a_i, b_i) = ab
    return 0.5 * np.array([a_s * a_i, a_s * b_i, b_s * a_i, b_s * b_i])


def instrument_matrix(spec: ProtocolSpec) -> InstrumentMatrix:
    d1s, d1i, d2s, d2i = spec.phases()
    angles = np.array(spec.settings)
    x = _projected_rows(d1s, d1i, d2s, d2i, angles[:, 0], angles[:, 1])
    return InstrumentMatrix(x, spec)


def b_matrix(x: InstrumentMatrix | np.ndarray) -> np.ndarray:
    """m x 16 matrix with rows kron(X_j, conj(X_j)); column 4a + b holds X_ja conj(X_jb)."""
    xs = x.x if isinstance(x, InstrumentMatrix) else np.asarray(x, dtype=complex)
    return (xs[..., :, None] * xs.conj()[..., None, :]).reshape(xs.shape[:-1] + (16,))


def _report(sv: np.ndarray, rel_threshold: float) -> CompletenessReport:
    sv = np.sort(np.asarray(sv, dtype=float))[::-1]
    if sv.size == 0 or sv[0] == 0.0:
        raise DegenerateInput("B matrix is identically zero")
    rank = int(np.count_nonzero(sv > rel_threshold * sv[0]))
    complete = rank == 16
    ratio = float(sv[15] / sv[0]) if complete else 0.0
    padded = np.zeros(16)
    padded[: min(16, sv.size)] = sv[:16]
    return CompletenessReport(tuple(float(s) for s in padded), rank, ratio, complete)


def completeness(b: np.ndarray, rel_threshold: float = DEFAULT_REL_THRESHOLD) -> CompletenessReport:
    """Singular-value diagnostics of B; ratio is sigma_16 / sigma_1 for a complete protocol."""
    b = np.asarray(b, dtype=complex)
    if not np.any(b):
        raise DegenerateInput("B matrix is identically zero")
    return _report(np.linalg.svd(b, compute_uv=False), rel_threshold)


def ratio_batch(
    h1_mm: float,
    h2_mm: Sequence[float],
    settings: Sequence[tuple[float, float]],
    wavelengths: tuple[float, float],
    dispersion: DispersionModel,
    rel_threshold: float = DEFAULT_REL_THRESHOLD,
) -> np.ndarray:
    """Completeness ratio for one Wp1 thickness against many Wp2 thicknesses."""
    lam_s, lam_i = wavelengths
    h2 = np.asarray(h2_mm, dtype=float)
    angles = np.asarray(settings, dtype=float)
    d1s = optical_phase(h1_mm, lam_s, dispersion)
    d1i = optical_phase(h1_mm, lam_i, dispersion)
    d2s = optical_phase(h2, lam_s, dispersion)
    d2i = optical_phase(h2, lam_i, dispersion)
    x = _projected_rows(
        d1s, d1i, d2s[:, None], d2i[:, None], angles[None, :, 0], angles[None, :, 1]
    )
    sv = np.linalg.svd(b_matrix(x), compute_uv=False)
    out = np.zeros(len(h2))
    for n, s in enumerate(sv):
        if s[0] > 0:
            out[n] = _report(s, rel_threshold).ratio
    return out
