"""Birefringent retardant plates acting on biphoton polarization states.

A plate of thickness h imposes the phase

    delta = pi * dn(lambda) * h / lambda,     dn = n_o - n_e,

i.e. half of the full retardation, so that delta = pi/2 is a half-wave plate.
delta is never folded modulo pi.

The default dispersion model is crystalline quartz with the two-term Sellmeier
fits of G. Ghosh, Opt. Commun. 163, 95-102 (1999), valid 198-2050 nm at room
temperature:

    n^2 = A + B l^2 / (l^2 - C) + D l^2 / (l^2 - E),     l in micrometres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .states import PureQuquart, normalize

LAMBDA_SIGNAL_NM = 702.0
LAMBDA_IDLER_NM = 605.0
LAMBDA_PUMP_NM = 325.0

PREPARATION_PLATE_MM = 0.441

# (A, B, C [um^2], D, E [um^2])
_QUARTZ_ORDINARY = (1.28604141, 1.07044083, 1.00585997e-2, 1.10202242, 100.0)
_QUARTZ_EXTRAORDINARY = (1.28851804, 1.09509924, 1.02101864e-2, 1.15662475, 100.0)


def _sellmeier(coeffs, lam_um):
    a, b, c, d, e = coeffs
    l2 = lam_um * lam_um
    return np.sqrt(a + b * l2 / (l2 - c) + d * l2 / (l2 - e))


@dataclass(frozen=True)
class DispersionModel:
    """Map from wavelength (nm) to birefringence n_o - n_e.

    Use :meth:`quartz` or :meth:`fixed` rather than the constructor.
    """

    name: str
    delta_n_value: float = 0.0
    valid_nm: tuple[float, float] = field(default=(198.0, 2050.0))

    @classmethod
    def quartz(cls) -> "DispersionModel":
        return cls("quartz-sellmeier")

    @classmethod
    def fixed(cls, delta_n: float) -> "DispersionModel":
        return cls("fixed-delta-n", float(delta_n), (1e-9, math.inf))

    @classmethod
    def from_config(cls, cfg: dict | None) -> "DispersionModel":
        if not cfg:
            return cls.quartz()
        name = cfg.get("model", "quartz-sellmeier")
        if name == "quartz-sellmeier":
            return cls.quartz()
        if name == "fixed-delta-n":
            if "delta_n" not in cfg:
                raise DomainError("fixed-delta-n model needs a 'delta_n' value")
            return cls.fixed(cfg["delta_n"])
        raise DomainError(f"unknown dispersion model {name!r}")

    def to_config(self) -> dict:
        if self.name == "fixed-delta-n":
            return {"model": self.name, "delta_n": self.delta_n_value}
        return {"model": self.name}

    def check_wavelength(self, lam_nm: float) -> None:
        lo, hi = self.valid_nm
        if not lo <= lam_nm <= hi:
            raise DomainError(
                f"wavelength {lam_nm} nm outside {self.name} range [{lo}, {hi}] nm"
            )

    def delta_n(self, lam_nm: float) -> float:
        self.check_wavelength(lam_nm)
        if self.name == "fixed-delta-n":
            return self.delta_n_value
        lam_um = lam_nm / 1000.0
        return float(
            _sellmeier(_QUARTZ_ORDINARY, lam_um) - _sellmeier(_QUARTZ_EXTRAORDINARY, lam_um)
        )


@dataclass(frozen=True)
class Waveplate:
    thickness_mm: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not 0.0 < self.thickness_mm < 100.0:
            raise DomainError(f"plate thickness must be in (0, 100) mm, got {self.thickness_mm}")


def optical_phase(h_mm, lam_nm: float, model: DispersionModel):
    """Phase delta in radians of an ``h_mm`` plate at wavelength ``lam_nm``.

    ``h_mm`` may be an array; the result then has the same shape.
    """
    h = np.asarray(h_mm, dtype=float)
    if np.any(h <= 0):
        raise DomainError(f"thickness must be positive, got {h_mm}")
    dn = model.delta_n(lam_nm)
    # h [mm] / lambda [nm] -> factor 1e6
    delta = math.pi * dn * h * 1e6 / lam_nm
    return float(delta) if delta.ndim == 0 else delta


def transmission_reflection(delta, theta):
    """Effective transmission t and reflection r; broadcasts over arrays."""
    delta = np.asarray(delta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s = np.sin(delta)
    t = np.cos(delta) + 1j * s * np.cos(2 * theta)
    r = 1j * s * np.sin(2 * theta)
    return t, r


def jones_su2(delta: float, theta: float) -> np.ndarray:
    """SU(2) matrix [[t, r], [-r*, t*]] of a plate with phase delta at angle theta."""
    t, r = transmission_reflection(delta, theta)
    t, r = complex(t), complex(r)
    return np.array([[t, r], [-r.conjugate(), t.conjugate()]])


def biphoton_transform(delta_s: float, delta_i: float, theta: float) -> np.ndarray:
    """4x4 action of one plate on both photons (same orientation, per-colour phase)."""
    return np.kron(jones_su2(delta_s, theta), jones_su2(delta_i, theta))


def prepare_product_state(
    h_mm: float = PREPARATION_PLATE_MM,
    alpha: float = 0.0,
    lam_s_nm: float = LAMBDA_SIGNAL_NM,
    lam_i_nm: float = LAMBDA_IDLER_NM,
    model: DispersionModel | None = None,
) -> PureQuquart:
    """Send |VsVi> through a plate of thickness ``h_mm`` oriented at ``alpha`` radians."""
    model = model or DispersionModel.quartz()
    g = biphoton_transform(
        optical_phase(h_mm, lam_s_nm, model),
        optical_phase(h_mm, lam_i_nm, model),
        alpha,
    )
    return normalize(g[:, 3])
