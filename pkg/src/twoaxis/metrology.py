"""Phase channel, two-axis single-shot estimation, and Monte Carlo imprecision.

Random streams
--------------
Every random number comes from ``trial_stream(master_seed, trial, shot)``,
a PCG64 generator seeded by ``SeedSequence(master_seed, spawn_key=(trial, shot))``.
SeedSequence hashes the key into the generator state, so each (trial, shot)
pair owns an independent stream no matter which thread evaluates it or in
what order.  Shot indices:

    0  the true phase, uniform on [0, 2 pi)
    1  the J_x shot
    2  the J_z shot
    3  replacement estimate for a degenerate (0, 0) outcome pair

The streams depend only on (master_seed, trial), never on N or t_s, so runs
that share a seed use common random numbers.
"""
from __future__ import annotations

import functools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .spin import DickeState, rotate, rotate_batch
from .squeezing import PreparedState, prepare_cached

__all__ = [
    "ExperimentConfig",
    "TrialRecord",
    "TrialBatch",
    "ImprecisionResult",
    "apply_channel",
    "estimate",
    "circular_error",
    "trial_stream",
    "trial_uniforms",
    "simulate_trials",
    "summarize",
    "run_experiment",
    "default_workers",
]

TWO_PI = 2.0 * math.pi
REPETITIONS = 2
BLOCK = 256  # trials per batched block; fixed so results never depend on workers

SHOT_PHI, SHOT_X, SHOT_Z, SHOT_FALLBACK = range(4)


def default_workers() -> int:
    env = os.environ.get("TWOAXIS_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExperimentConfig:
    n_spins: int
    t_s: float
    trials: int = 1000
    master_seed: int = 0
    repetitions: int = REPETITIONS

    def __post_init__(self):
        if self.n_spins < 3:
            raise ValueError(f"n_spins must be >= 3, got {self.n_spins}")
        if not (self.t_s >= 0 and math.isfinite(self.t_s)):
            raise ValueError(f"t_s must be finite and non-negative, got {self.t_s}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")
        if self.repetitions != REPETITIONS:
            raise ValueError("only R = 2 (one x shot, one z shot) is supported")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class TrialRecord:
    phi_true: float
    j_x: float
    j_z: float
    phi_est: float
    error: float
    degenerate: bool


@dataclass(frozen=True)
class TrialBatch:
    """Column-wise trial data, ordered by trial index."""

    phi_true: np.ndarray
    j_x: np.ndarray
    j_z: np.ndarray
    phi_est: np.ndarray
    error: np.ndarray
    degenerate: np.ndarray

    def records(self) -> list[TrialRecord]:
        return [
            TrialRecord(float(p), float(x), float(z), float(e), float(err), bool(d))
            for p, x, z, e, err, d in zip(self.phi_true, self.j_x, self.j_z,
                                           self.phi_est, self.error, self.degenerate)
        ]


@dataclass(frozen=True)
class ImprecisionResult:
    delta_phi: float
    stderr: float  # delta-method standard error of delta_phi
    trials_used: int
    degenerate_count: int
    n_spins: int
    t_s: float
    repetitions: int = REPETITIONS


def apply_channel(prepared: PreparedState | DickeState, phi: float) -> DickeState:
    """exp(-i phi J_y) acting on the probe."""
    state = prepared.state if isinstance(prepared, PreparedState) else prepared
    return rotate(state, "y", phi)


def estimate(j_x: float, j_z: float) -> float | None:
    """Single-shot phase from one J_x and one J_z outcome; None when both are zero."""
    if j_x == 0 and j_z == 0:
        return None
    est = math.atan2(-j_z, j_x) % TWO_PI
    return 0.0 if est >= TWO_PI else est


def circular_error(phi_true, phi_est):
    """min(|d|, 2 pi - |d|); works elementwise on arrays."""
    d = np.abs(np.asarray(phi_true, dtype=float) - np.asarray(phi_est, dtype=float)) % TWO_PI
    err = np.minimum(d, TWO_PI - d)
    return float(err) if err.ndim == 0 else err


def trial_stream(master_seed: int, trial: int, shot: int) -> np.random.Generator:
    seq = np.random.SeedSequence(master_seed, spawn_key=(trial, shot))
    return np.random.Generator(np.random.PCG64(seq))


@functools.lru_cache(maxsize=32)
def trial_uniforms(master_seed: int, trials: int) -> np.ndarray:
    """(trials, 4) array: [phi_true, u_x, u_z, u_fallback] per trial.

    phi_true is already scaled to [0, 2 pi); the rest are uniform on [0, 1).
    """
    out = np.empty((trials, 4))
    for i in range(trials):
        for shot in range(4):
            out[i, shot] = trial_stream(master_seed, i, shot).random()
    out[:, SHOT_PHI] *= TWO_PI
    out.setflags(write=False)
    return out


def _inverse_cdf(amps: np.ndarray, u: np.ndarray, outcomes: np.ndarray) -> np.ndarray:
    # columns of amps are states; same rule as spin.sample_uniform
    cdf = np.cumsum(np.abs(amps) ** 2, axis=0)
    k = np.count_nonzero(cdf <= u[None, :], axis=0)
    return outcomes[np.minimum(k, len(outcomes) - 1)]


def _shots_block(state: DickeState, phis: np.ndarray, u_x: np.ndarray, u_z: np.ndarray):
    m = state.m
    # z eigenbasis amplitudes of the channel output
    amps_z = rotate_batch(state, "y", phis)
    j_z = _inverse_cdf(amps_z, u_z, m)
    del amps_z
    # x eigenbasis: rotate the output back by pi/2 about y
    amps_x = rotate_batch(state, "y", phis - math.pi / 2)
    j_x = _inverse_cdf(amps_x, u_x, m)
    return j_x, j_z


def _estimate_many(j_x: np.ndarray, j_z: np.ndarray, u_fallback: np.ndarray):
    degenerate = (j_x == 0) & (j_z == 0)
    est = np.mod(np.arctan2(-j_z, j_x), TWO_PI)
    est[est >= TWO_PI] = 0.0
    est = np.where(degenerate, TWO_PI * u_fallback, est)
    return est, degenerate


def simulate_trials(state: DickeState, trials: int, master_seed: int,
                    workers: int | None = None) -> TrialBatch:
    """Monte Carlo of the two-shot protocol for a prepared probe state."""
    table = trial_uniforms(master_seed, trials)
    phis = table[:, SHOT_PHI]
    starts = list(range(0, trials, BLOCK))

    def block(start):
        sl = slice(start, start + BLOCK)
        return _shots_block(state, phis[sl], table[sl, SHOT_X], table[sl, SHOT_Z])

    workers = default_workers() if workers is None else max(1, workers)
    if workers == 1 or len(starts) == 1:
        parts = [block(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(block, starts))

    j_x = np.concatenate([p[0] for p in parts])
    j_z = np.concatenate([p[1] for p in parts])
    est, degenerate = _estimate_many(j_x, j_z, table[:, SHOT_FALLBACK])
    err = circular_error(phis, est)
    err = np.atleast_1d(err)
    return TrialBatch(phis.copy(), j_x, j_z, est, err, degenerate)


def summarize(batch: TrialBatch, n_spins: int, t_s: float,
              repetitions: int = REPETITIONS) -> ImprecisionResult:
    """delta_phi = sqrt(R / M * sum(err^2)), with a delta-method standard error."""
    sq = batch.error ** 2
    trials = len(sq)
    mean_sq = math.fsum(sq.tolist()) / trials
    delta_phi = math.sqrt(repetitions * mean_sq)
    if trials > 1 and delta_phi > 0:
        se_sq = repetitions * float(np.std(sq, ddof=1)) / math.sqrt(trials)
        stderr = se_sq / (2 * delta_phi)
    else:
        stderr = math.nan
    return ImprecisionResult(delta_phi, stderr, trials, int(batch.degenerate.sum()),
                             n_spins, t_s, repetitions)


def run_experiment(config: ExperimentConfig, workers: int | None = None,
                   ) -> tuple[ImprecisionResult, list[TrialRecord]]:
    """Prepare the probe, then run ``config.trials`` independent two-shot estimates."""
    prepared = prepare_cached(config.n_spins, float(config.t_s))
    batch = simulate_trials(prepared.state, config.trials, config.master_seed, workers)
    return summarize(batch, config.n_spins, config.t_s, config.repetitions), batch.records()


def imprecision(n_spins: int, t_s: float, trials: int = 1000, master_seed: int = 0,
                workers: int | None = None) -> ImprecisionResult:
    """Like run_experiment, without materializing per-trial records."""
    cfg = ExperimentConfig(n_spins, t_s, trials, master_seed)
    prepared = prepare_cached(cfg.n_spins, float(cfg.t_s))
    batch = simulate_trials(prepared.state, cfg.trials, cfg.master_seed, workers)
    return summarize(batch, cfg.n_spins, cfg.t_s)
