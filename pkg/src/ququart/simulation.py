"""Virtual coincidence-counting experiments.

Each setting j is an independent Poisson channel with mean
``intensity * |X_j . c|^2``. Draws use a counter-based stream keyed by
(seed, j), so a dataset does not depend on the order in which settings are
sampled.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AlreadyCorrected, DegenerateState, DomainError
from .protocol import InstrumentMatrix, ProtocolSpec, instrument_matrix
from .states import PureQuquart

COINCIDENCE_WINDOW_S = 3e-9
COUNTS_CSV_HEADER = "setting_index,theta1_deg,theta2_deg,count"


@dataclass(frozen=True, eq=False)
class CountsDataset:
    counts: np.ndarray
    total_events: int
    spec_ref: str | None = None
    seed: int | None = None
    corrected: bool = False

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1:
            raise DomainError("counts must be one-dimensional")
        if np.any(counts < 0):
            raise DomainError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __eq__(self, other):
        if not isinstance(other, CountsDataset):
            return NotImplemented
        return self.metadata() == other.metadata() and np.array_equal(self.counts, other.counts)

    @property
    def m(self) -> int:
        return int(self.counts.size)

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "total_events": self.total_events,
            "spec_hash": self.spec_ref,
            "corrected": self.corrected,
            "settings": self.m,
        }

    def to_csv(self, spec: ProtocolSpec) -> str:
        if spec.m != self.m:
            raise DomainError(f"dataset has {self.m} settings, protocol has {spec.m}")
        lines = [COUNTS_CSV_HEADER]
        for j, ((a, b), k) in enumerate(zip(spec.settings_deg(), self.counts)):
            lines.append(f"{j},{a:g},{b:g},{int(k)}")
        return "\n".join(lines) + "\n"


def read_counts_csv(text: str) -> np.ndarray:
    """Counts column of a counts CSV, ordered by setting index."""
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    if not lines or lines[0].strip() != COUNTS_CSV_HEADER:
        raise DomainError(f"counts CSV must start with header {COUNTS_CSV_HEADER!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 4:
            raise DomainError(f"malformed counts row {ln!r}")
        rows.append((int(parts[0]), float(parts[3])))
    rows.sort()
    if [j for j, _ in rows] != list(range(len(rows))):
        raise DomainError("setting indices must be 0..m-1 without gaps")
    return np.array([k for _, k in rows])


def _setting_rng(seed: int, j: int) -> np.random.Generator:
    # j goes in the high counter word; draws advance the low word, so streams never overlap
    return np.random.Generator(np.random.Philox(key=int(seed) % 2**64, counter=[0, 0, 0, j]))


def expected_rates(x: InstrumentMatrix | np.ndarray, s: PureQuquart | np.ndarray, intensity: float) -> np.ndarray:
    """Mean counts per setting, ``intensity * |X_j c|^2``."""
    if not intensity > 0:
        raise DomainError(f"intensity must be positive, got {intensity}")
    xs = x.x if isinstance(x, InstrumentMatrix) else np.asarray(x, dtype=complex)
    c = s.vector if isinstance(s, PureQuquart) else np.asarray(s, dtype=complex)
    return intensity * np.abs(xs @ c) ** 2


def sample_counts(
    rates: Sequence[float],
    seed: int,
    spec_ref: str | None = None,
    total_events: int | None = None,
) -> CountsDataset:
    rates = np.asarray(rates, dtype=float)
    if np.any(rates < 0) or not np.all(np.isfinite(rates)):
        raise DomainError("rates must be finite and non-negative")
    counts = np.array(
        [_setting_rng(seed, j).poisson(lam) for j, lam in enumerate(rates)], dtype=np.int64
    )
    if total_events is None:
        total_events = int(round(rates.sum()))
    return CountsDataset(counts, total_events, spec_ref, seed)


def accidental_rate(n1: float, n2: float, window_s: float = COINCIDENCE_WINDOW_S) -> float:
    """Random coincidence rate <N1><N2>T of two uncorrelated detectors."""
    if n1 < 0 or n2 < 0 or window_s < 0:
        raise DomainError("singles rates and window must be non-negative")
    return n1 * n2 * window_s


def subtract_accidentals(
    raw: CountsDataset, n1: float, n2: float, window_s: float, exposure_s: float
) -> CountsDataset:
    """Remove the expected accidental count per setting, clamping at zero."""
    if raw.corrected:
        raise AlreadyCorrected("dataset already has accidentals removed")
    if not exposure_s > 0:
        raise DomainError(f"exposure must be positive, got {exposure_s}")
    acc = int(round(accidental_rate(n1, n2, window_s) * exposure_s))
    counts = np.maximum(raw.counts - acc, 0)
    return CountsDataset(counts, raw.total_events, raw.spec_ref, raw.seed, corrected=True)


def run_virtual_experiment(
    true_state: PureQuquart,
    spec: ProtocolSpec | InstrumentMatrix,
    total_events: int,
    seed: int,
) -> CountsDataset:
    """Poisson counts whose expected total is ``total_events``."""
    if total_events <= 0:
        raise DomainError(f"total_events must be positive, got {total_events}")
    if isinstance(spec, ProtocolSpec):
        x, ref = instrument_matrix(spec), spec.spec_hash()
    else:
        x, ref = spec, spec.spec.spec_hash() if spec.spec is not None else None
    p = np.abs(x.x @ true_state.vector) ** 2
    if not p.sum() > 0:
        raise DegenerateState("true state gives zero rate on every setting")
    rates = p * (total_events / p.sum())
    return sample_counts(rates, seed, ref, total_events)


def sidecar_json(ds: CountsDataset) -> str:
    return json.dumps(ds.metadata(), indent=2, sort_keys=True)
