"""Grid scans over the two plate thicknesses ("navigation maps").

Grid coordinates are ``round(min + i * step, 9)`` so that points shared by a
grid and its half-step refinement are bitwise equal.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError, EmptyGrid
from .optics import LAMBDA_IDLER_NM, LAMBDA_SIGNAL_NM, DispersionModel, Waveplate
from .protocol import ProtocolSpec, instrument_matrix, ratio_batch, standard_settings
from .reconstruction import MLEOptions, mle_reconstruct, trial_seed
from .simulation import run_virtual_experiment
from .states import PureQuquart, basis_state, fidelity, information_loss

MAP_H1_RANGE = (0.8, 1.0, 0.002)
MAP_H2_RANGE = (0.5, 1.0, 0.002)
LOSS_STEP_MM = 0.02
LOSS_TRIALS = 25
GRID_CSV_HEADER = "h1_mm,h2_mm,value"


def grid_axis(rng: Sequence[float]) -> np.ndarray:
    lo, hi, step = (float(v) for v in rng)
    if not step > 0 or not math.isfinite(step):
        raise DomainError(f"step must be positive, got {step}")
    if hi < lo:
        raise DomainError(f"range max {hi} below min {lo}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(n), 9)


@dataclass(frozen=True)
class ScanGrid:
    h1_range: tuple[float, float, float]
    h2_range: tuple[float, float, float]
    values: np.ndarray
    kind: str
    metadata: dict = field(default_factory=dict)

    @property
    def h1(self) -> np.ndarray:
        return grid_axis(self.h1_range)

    @property
    def h2(self) -> np.ndarray:
        return grid_axis(self.h2_range)

    def to_csv(self) -> str:
        lines = [GRID_CSV_HEADER]
        for i, a in enumerate(self.h1):
            for j, b in enumerate(self.h2):
                lines.append(f"{a:.6g},{b:.6g},{float(self.values[i, j])!r}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        meta = {
            "kind": self.kind,
            "h1_range": list(self.h1_range),
            "h2_range": list(self.h2_range),
            "shape": list(self.values.shape),
            **self.metadata,
        }
        return json.dumps(meta, indent=2, sort_keys=True)


def _map_rows(fn, n_rows: int, threads: int) -> list:
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, range(n_rows)))
    return [fn(i) for i in range(n_rows)]


def scan_ratio(
    h1_range=MAP_H1_RANGE,
    h2_range=MAP_H2_RANGE,
    settings=None,
    wavelengths=(LAMBDA_SIGNAL_NM, LAMBDA_IDLER_NM),
    dispersion: DispersionModel | None = None,
    threads: int = 1,
) -> ScanGrid:
    """Completeness ratio on every (Wp1, Wp2) thickness pair."""
    dispersion = dispersion or DispersionModel.quartz()
    settings = standard_settings() if settings is None else tuple(settings)
    h1, h2 = grid_axis(h1_range), grid_axis(h2_range)

    def one_row(i):
        return ratio_batch(h1[i], h2, settings, wavelengths, dispersion)

    values = np.array(_map_rows(one_row, len(h1), threads))
    meta = {"dispersion": dispersion.to_config(), "wavelengths_nm": list(wavelengths), "settings": len(settings)}
    return ScanGrid(tuple(h1_range), tuple(h2_range), values, "ratio", meta)


def scan_info_loss(
    h1_range=(MAP_H1_RANGE[0], MAP_H1_RANGE[1], LOSS_STEP_MM),
    h2_range=(MAP_H2_RANGE[0], MAP_H2_RANGE[1], LOSS_STEP_MM),
    settings=None,
    true_state: PureQuquart | None = None,
    total_events: int = 32_000,
    n_trials: int = LOSS_TRIALS,
    seed: int = 0,
    wavelengths=(LAMBDA_SIGNAL_NM, LAMBDA_IDLER_NM),
    dispersion: DispersionModel | None = None,
    options: MLEOptions | None = None,
    threads: int = 1,
) -> ScanGrid:
    """Information loss of the mean fidelity over ``n_trials`` reconstructions per cell.

    Cell seeds are derived from (seed, i, j, trial), so values do not depend on
    ``threads``. A cell whose mean fidelity rounds to 1 reports ``inf``.
    """
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    dispersion = dispersion or DispersionModel.quartz()
    settings = standard_settings() if settings is None else tuple(settings)
    state = true_state or basis_state(3)
    base = options or MLEOptions()
    h1, h2 = grid_axis(h1_range), grid_axis(h2_range)

    def cell(i, j):
        spec = ProtocolSpec(Waveplate(h1[i]), Waveplate(h2[j]), settings, wavelengths, dispersion)
        x = instrument_matrix(spec)
        fids = []
        for t in range(n_trials):
            s = trial_seed(seed, i, j, t)
            ds = run_virtual_experiment(state, x, total_events, s)
            res = mle_reconstruct(x, ds.counts, MLEOptions(**{**base.__dict__, "seed": s}))
            fids.append(fidelity(res.estimate, state))
        mean_f = float(np.mean(fids))
        return information_loss(mean_f) if mean_f < 1.0 else math.inf

    def one_row(i):
        return [cell(i, j) for j in range(len(h2))]

    values = np.array(_map_rows(one_row, len(h1), threads), dtype=float)
    meta = {
        "dispersion": dispersion.to_config(),
        "wavelengths_nm": list(wavelengths),
        "settings": len(settings),
        "state": state.to_dict(),
        "events": total_events,
        "trials": n_trials,
        "seed": seed,
    }
    return ScanGrid(tuple(h1_range), tuple(h2_range), values, "info_loss", meta)


def find_optimum(grid: ScanGrid) -> tuple[float, float, float]:
    """(h1, h2, value) of the largest cell; ties go to the smallest (i, j)."""
    v = np.asarray(grid.values)
    if v.size == 0:
        raise EmptyGrid("grid has no cells")
    # argmax returns the first occurrence in row-major order
    flat = int(np.argmax(v))
    i, j = divmod(flat, v.shape[1])
    return float(grid.h1[i]), float(grid.h2[j]), float(v[i, j])
