"""Maximum-likelihood reconstruction of pure ququarts from coincidence counts.

Counts are modelled as independent Poisson variables with means
``lambda_j = I |X_j c|^2``. The intensity I is profiled out
(I* = sum k / sum |X_j c|^2), which leaves a scale- and phase-invariant
function of c. Its stationarity condition is the quasi-linear equation

    Gamma(c) c = (N / sum p) S c,   Gamma(c) = X^H diag(k / p) X,   S = X^H X,

solved by the fixed-point map c <- normalize(S^-1 Gamma(c) c) with an adaptive
relaxation step. Every accepted step increases the likelihood; when no relaxed
fixed-point step does, a backtracking gradient step on the sphere is used.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, NoCounts
from .protocol import InstrumentMatrix, ProtocolSpec, b_matrix, instrument_matrix
from .simulation import run_virtual_experiment
from .states import PureQuquart, basis_state, fidelity, normalize, random_state

_EXCEEDANCE_LEVEL = 0.005


@dataclass(frozen=True)
class MLEOptions:
    seed: int = 0
    n_random_starts: int = 4
    basis_starts: bool = True
    linear_start: bool = True
    initial: PureQuquart | None = None
    max_iter: int = 10_000
    tol: float = 1e-10
    # lambda_j floor relative to intensity inside Gamma
    rate_floor: float = 1e-30


@dataclass(frozen=True)
class ReconstructionResult:
    estimate: PureQuquart
    log_likelihood: float
    iterations: int
    converged: bool
    restarts_used: int
    intensity: float = 0.0
    identifiable: bool = True

    def to_dict(self, reference: PureQuquart | None = None) -> dict:
        out = {
            "amplitudes": self.estimate.to_dict()["amplitudes"],
            "basis": self.estimate.to_dict()["basis"],
            "log_likelihood": self.log_likelihood,
            "intensity": self.intensity,
            "iterations": self.iterations,
            "converged": self.converged,
            "restarts_used": self.restarts_used,
            "identifiable": self.identifiable,
        }
        if reference is not None:
            out["fidelity"] = fidelity(self.estimate, reference)
            out["reference"] = reference.to_dict()["amplitudes"]
        return out


@dataclass(frozen=True)
class LossDistribution:
    samples: np.ndarray
    summary: dict = field(default_factory=dict)

    @classmethod
    def from_samples(cls, samples) -> "LossDistribution":
        s = np.clip(np.asarray(samples, dtype=float), 0.0, 1.0)
        q05, q50, q95 = np.quantile(s, [0.05, 0.5, 0.95])
        summary = {
            "n": int(s.size),
            "mean": float(s.mean()),
            "median": float(q50),
            "q05": float(q05),
            "q50": float(q50),
            "q95": float(q95),
            "fraction_above_0.005": float(np.mean(s > _EXCEEDANCE_LEVEL)),
        }
        return cls(s, summary)

    def to_csv(self) -> str:
        return "one_minus_fidelity\n" + "".join(f"{v!r}\n" for v in self.samples.tolist())


def _as_arrays(x, counts):
    xs = x.x if isinstance(x, InstrumentMatrix) else np.asarray(x, dtype=complex)
    k = np.asarray(counts, dtype=float)
    if k.shape != (xs.shape[0],):
        raise DomainError(f"{k.size} counts for {xs.shape[0]} settings")
    return xs, k


def log_likelihood(x, counts, c, intensity: float) -> float:
    """Poisson log-likelihood sum_j k_j ln(lambda_j) - lambda_j (without ln k_j!)."""
    xs, k = _as_arrays(x, counts)
    v = c.vector if isinstance(c, PureQuquart) else np.asarray(c, dtype=complex)
    lam = intensity * np.abs(xs @ v) ** 2
    pos = k > 0
    if np.any(lam[pos] <= 0):
        return -math.inf
    return float(np.sum(k[pos] * np.log(lam[pos])) - lam.sum())


def log_likelihood_gradient(x, counts, c, intensity: float) -> np.ndarray:
    """Gradient with respect to (Re c, Im c), returned as an 8-vector."""
    xs, k = _as_arrays(x, counts)
    v = np.asarray(c.vector if isinstance(c, PureQuquart) else c, dtype=complex)
    amp = xs @ v
    lam = intensity * np.abs(amp) ** 2
    g = 2.0 * intensity * (xs.conj().T @ ((k / lam - 1.0) * amp))
    return np.concatenate([g.real, g.imag])


class _Problem:
    """Profiled likelihood and fixed-point machinery for one dataset."""

    def __init__(self, xs: np.ndarray, k: np.ndarray, rate_floor: float):
        self.x = xs
        self.k = k
        self.n = float(k.sum())
        self.pos = k > 0
        self.floor = rate_floor
        s = xs.conj().T @ xs
        self.s_inv = np.linalg.pinv(s, rcond=1e-12, hermitian=True)

    def value(self, v: np.ndarray) -> float:
        p = np.abs(self.x @ v) ** 2
        total = p.sum()
        if total <= 0 or np.any(p[self.pos] <= 0):
            return -math.inf
        return float(np.sum(self.k[self.pos] * np.log(p[self.pos])) - self.n * math.log(total))

    def fixed_point(self, v: np.ndarray) -> np.ndarray:
        amp = self.x @ v
        p = np.abs(amp) ** 2
        p = np.maximum(p, self.floor * p.sum())
        w = self.s_inv @ (self.x.conj().T @ ((self.k / p) * amp))
        return w / np.linalg.norm(w)

    def gradient(self, v: np.ndarray) -> np.ndarray:
        """Wirtinger gradient d/dc* of the profiled likelihood (tangent to the sphere)."""
        amp = self.x @ v
        p = np.abs(amp) ** 2
        p = np.maximum(p, self.floor * p.sum())
        w = self.k / p - self.n / p.sum()
        return self.x.conj().T @ (w * amp)

    def intensity(self, v: np.ndarray) -> float:
        return self.n / float(np.sum(np.abs(self.x @ v) ** 2))


def _align(w: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate w's global phase to best match v."""
    ov = np.vdot(w, v)
    return w if ov == 0 else w * (ov / abs(ov))


def _fp_step(prob: _Problem, v: np.ndarray) -> np.ndarray:
    return _align(prob.fixed_point(v), v)


def _ascend(prob: _Problem, v0: np.ndarray, max_iter: int, tol: float, trace: list | None = None):
    """Monotone ascent from v0; returns (v, value, iterations, converged).

    Each iteration tries a squared-extrapolation (SQUAREM) step built from two
    fixed-point applications, then the plain fixed-point step with halving,
    then a backtracking gradient step. The first candidate that does not lower
    the likelihood is taken. ``trace`` collects the objective after every
    iteration when given.
    """
    v = v0 / np.linalg.norm(v0)
    f = prob.value(v)
    if trace is not None:
        trace.append(f)
    for it in range(1, max_iter + 1):
        v1 = _fp_step(prob, v)
        v2 = _fp_step(prob, v1)
        r = v1 - v
        q = v2 - v1 - r
        new_v, new_f = None, f
        nq = np.linalg.norm(q)
        if nq > 0:
            a = -np.linalg.norm(r) / nq
            if a < -1.0:
                cand = v - 2 * a * r + a * a * q
                cand = _fp_step(prob, cand / np.linalg.norm(cand))
                fc = prob.value(cand)
                if fc >= f:
                    new_v, new_f = cand, fc
        if new_v is None:
            for cand in (v2, v1):
                fc = prob.value(cand)
                if fc >= f:
                    new_v, new_f = cand, fc
                    break
        if new_v is None:
            d = v1 - v
            t = 0.5
            while t >= 1e-4:
                cand = v + t * d
                cand /= np.linalg.norm(cand)
                fc = prob.value(cand)
                if fc >= f:
                    new_v, new_f = cand, fc
                    break
                t *= 0.5
        if new_v is None:
            g = prob.gradient(v)
            eta = 1.0 / max(np.linalg.norm(g), 1e-300)
            while eta > 1e-16:
                cand = v + eta * g
                cand /= np.linalg.norm(cand)
                fc = prob.value(cand)
                if fc >= f:
                    new_v, new_f = cand, fc
                    break
                eta *= 0.5
        if new_v is None:
            return v, f, it, True
        change = new_f - f
        v, f = new_v, new_f
        if trace is not None:
            trace.append(f)
        if change <= tol * max(abs(f), 1.0):
            return v, f, it, True
    return v, f, max_iter, False


def linear_inversion(xs: np.ndarray, k: np.ndarray) -> np.ndarray | None:
    """Leading eigenvector of the least-squares solution of B vec(rho) = k.

    Entry (a, b) of the solved matrix estimates c_a conj(c_b). Returns None when
    B is rank deficient.
    """
    b = b_matrix(xs)
    sol, _, rank, _ = np.linalg.lstsq(b, k / max(k.sum(), 1.0), rcond=1e-10)
    if rank < 16:
        return None
    rho = sol.reshape(4, 4)
    rho = 0.5 * (rho + rho.conj().T)
    _, vecs = np.linalg.eigh(rho)
    return vecs[:, -1]


def _starts(opts: MLEOptions, xs: np.ndarray, k: np.ndarray) -> list[np.ndarray]:
    starts = []
    if opts.initial is not None:
        starts.append(opts.initial.vector)
    if opts.linear_start:
        lin = linear_inversion(xs, k)
        if lin is not None:
            starts.append(lin)
    if opts.basis_starts:
        starts.extend(basis_state(n).vector for n in range(4))
    rng = np.random.default_rng(opts.seed)
    starts.extend(random_state(rng).vector for _ in range(opts.n_random_starts))
    if not starts:
        raise DomainError("MLE needs at least one starting point")
    return starts


def mle_reconstruct(x, counts, options: MLEOptions | None = None) -> ReconstructionResult:
    """Multi-start maximum-likelihood pure-state estimate."""
    opts = options or MLEOptions()
    xs, k = _as_arrays(x, counts)
    if np.any(k < 0):
        raise DomainError("counts must be non-negative")
    if not np.any(k > 0):
        raise NoCounts("all counts are zero")

    sv = np.linalg.svd(b_matrix(xs), compute_uv=False)
    identifiable = sv.size >= 16 and sv[0] > 0 and sv[15] > 1e-10 * sv[0]
    if not identifiable:
        warnings.warn("protocol is incomplete; the estimate is not unique", RuntimeWarning)

    prob = _Problem(xs, k, opts.rate_floor)
    best = None
    total_iter = 0
    used = 0
    for v0 in _starts(opts, xs, k):
        used += 1
        v, f, iters, conv = _ascend(prob, v0, opts.max_iter, opts.tol)
        total_iter += iters
        if best is None or f > best[1]:
            best = (v, f, iters, conv)
    v, _, iters, conv = best
    estimate = normalize(v)
    intensity = prob.intensity(estimate.vector)
    return ReconstructionResult(
        estimate=estimate,
        log_likelihood=log_likelihood(xs, k, estimate, intensity),
        iterations=total_iter,
        converged=bool(conv),
        restarts_used=used,
        intensity=intensity,
        identifiable=bool(identifiable),
    )


def trial_seed(seed: int, *index: int) -> int:
    """Independent 63-bit seed for sub-task ``index`` of a seeded run."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in index))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _one_trial(true_state, x, total_events, seed, options):
    ds = run_virtual_experiment(true_state, x, total_events, seed)
    opts = MLEOptions(**{**options.__dict__, "seed": seed})
    res = mle_reconstruct(x, ds.counts, opts)
    return 1.0 - fidelity(res.estimate, true_state)


def loss_distribution(
    true_state: PureQuquart,
    spec: ProtocolSpec | InstrumentMatrix,
    total_events: int,
    n_trials: int,
    seed: int,
    options: MLEOptions | None = None,
    threads: int = 1,
) -> LossDistribution:
    """1 - F over ``n_trials`` independent simulate-and-reconstruct runs."""
    if n_trials < 1:
        raise DomainError("n_trials must be >= 1")
    x = instrument_matrix(spec) if isinstance(spec, ProtocolSpec) else spec
    opts = options or MLEOptions()
    seeds = [trial_seed(seed, t) for t in range(n_trials)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            losses = list(pool.map(lambda s: _one_trial(true_state, x, total_events, s, opts), seeds))
    else:
        losses = [_one_trial(true_state, x, total_events, s, opts) for s in seeds]
    return LossDistribution.from_samples(losses)
