"""Squeezing-time search, N sweeps and power-law fits."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.ndimage import median_filter

from .metrology import imprecision
from .squeezing import prepare_cached, quantum_fisher_information

__all__ = [
    "SweepPoint",
    "PowerLawFit",
    "OptimizationResult",
    "golden_section",
    "optimize_squeezing_time",
    "count_local_minima",
    "fit_power_law",
    "sql_reference",
    "hl_reference",
    "held_out_seed",
    "sweep_point",
    "DEFAULT_N_LIST",
]

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
DEFAULT_N_LIST = (16, 32, 64, 128, 256, 512, 1024, 2048, 2480)


@dataclass(frozen=True)
class SweepPoint:
    n_spins: int
    t_s: float
    delta_phi: float
    stderr: float
    fisher: float
    degenerate_count: int

    @property
    def scaled_time(self) -> float:
        return self.t_s * self.n_spins ** (2 / 3)


@dataclass(frozen=True)
class PowerLawFit:
    """y = prefactor * N**exponent (growing) or prefactor / N**exponent (decaying)."""

    prefactor: float
    exponent: float
    stderr_prefactor: float
    stderr_exponent: float
    sample_count: int
    decaying: bool
    log_residual_rms: float

    def __call__(self, n):
        sign = -1.0 if self.decaying else 1.0
        return self.prefactor * np.asarray(n, dtype=float) ** (sign * self.exponent)


@dataclass(frozen=True)
class OptimizationResult:
    n_spins: int
    t_s: float
    delta_phi: float
    u_grid: np.ndarray = field(repr=False)
    delta_grid: np.ndarray = field(repr=False)
    evaluations: int = 0
    on_boundary: bool = False

    @property
    def scaled_time(self) -> float:
        return self.t_s * self.n_spins ** (2 / 3)

    def __iter__(self):
        # unpacks as (t_s_opt, delta_phi_opt)
        yield self.t_s
        yield self.delta_phi


def sql_reference(n_spins: int) -> float:
    return 1.0 / math.sqrt(n_spins)


def hl_reference(n_spins: int) -> float:
    return 1.0 / n_spins


def golden_section(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Minimize f on [lo, hi] until the bracket is narrower than tol.

    Returns (x_best, f_best) over every point evaluated, which is the safer
    answer when f is a noisy or piecewise-constant estimate.
    """
    seen = {}

    def ev(x):
        if x not in seen:
            seen[x] = f(x)
        return seen[x]

    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = ev(c), ev(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = ev(d)
    x = min(seen, key=lambda k: (seen[k], k))
    return x, seen[x]


def optimize_squeezing_time(n_spins: int, trials: int = 1000, master_seed: int = 0,
                            *, grid_points: int = 32, resolution: float = 0.01,
                            workers: int | None = None) -> OptimizationResult:
    """Minimize delta_phi over u = t_s N^(2/3) in [0, 2 N^(1/6)].

    Every evaluation reuses master_seed, so all points see the same phases
    and shot uniforms (common random numbers).  A coarse grid locates the
    valley; golden-section search then refines it to ``resolution`` in u.
    """
    scale = n_spins ** (2 / 3)
    u_max = 2.0 * n_spins ** (1 / 6)
    cache: dict[float, float] = {}

    def objective(u: float) -> float:
        u = float(u)
        if u not in cache:
            cache[u] = imprecision(n_spins, u / scale, trials, master_seed, workers).delta_phi
        return cache[u]

    u_grid = np.linspace(0.0, u_max, grid_points)
    delta_grid = np.array([objective(u) for u in u_grid])
    best = int(np.argmin(delta_grid))
    on_boundary = best in (0, grid_points - 1)
    if on_boundary:
        warnings.warn(f"N={n_spins}: squeezing-time minimum on the search boundary "
                      f"(u = {u_grid[best]:.3f})", RuntimeWarning, stacklevel=2)
    lo = u_grid[max(best - 1, 0)]
    hi = u_grid[min(best + 1, grid_points - 1)]
    golden_section(objective, lo, hi, resolution)
    u_best = min(cache, key=lambda k: (cache[k], k))
    return OptimizationResult(n_spins, u_best / scale, cache[u_best], u_grid, delta_grid,
                              len(cache), on_boundary)


def count_local_minima(values: Sequence[float], window: int = 3) -> int:
    """Local minima after a running median; plateaus count once, endpoints count."""
    smooth = median_filter(np.asarray(values, dtype=float), size=window, mode="nearest")
    # collapse plateaus
    keep = np.concatenate([[True], np.diff(smooth) != 0])
    s = smooth[keep]
    if len(s) == 1:
        return 1
    count = int(s[0] < s[1]) + int(s[-1] < s[-2])
    inner = (s[1:-1] < s[:-2]) & (s[1:-1] < s[2:])
    return count + int(np.count_nonzero(inner))


def fit_power_law(points: Iterable[tuple[float, float]], decaying: bool = True) -> PowerLawFit:
    """Least squares on (ln N, ln y); standard errors from the regression residuals."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need at least 3 (N, y) points")
    n, y = pts[:, 0], pts[:, 1]
    if np.any(y <= 0) or np.any(n < 1):
        raise ValueError("power-law fit needs y > 0 and N >= 1")
    if np.ptp(n) == 0:
        raise ValueError("degenerate design: all N equal")
    design = np.column_stack([np.ones_like(n), np.log(n)])
    ly = np.log(y)
    (intercept, slope), *_ = np.linalg.lstsq(design, ly, rcond=None)
    resid = ly - design @ (intercept, slope)
    dof = len(pts) - 2
    sigma2 = float(resid @ resid) / dof if dof > 0 else math.nan
    cov = sigma2 * np.linalg.inv(design.T @ design)
    a = math.exp(intercept)
    return PowerLawFit(
        prefactor=a,
        exponent=float(-slope if decaying else slope),
        # delta method for a = exp(intercept)
        stderr_prefactor=a * math.sqrt(cov[0, 0]),
        stderr_exponent=math.sqrt(cov[1, 1]),
        sample_count=len(pts),
        decaying=decaying,
        log_residual_rms=float(np.sqrt(np.mean(resid ** 2))),
    )


def held_out_seed(master_seed: int) -> int:
    """Seed for re-evaluating an optimized point on fresh random numbers."""
    state = np.random.SeedSequence(master_seed, spawn_key=(0x5EED,)).generate_state(1, np.uint64)
    return int(state[0])


def sweep_point(n_spins: int, trials: int = 1000, master_seed: int = 0,
                workers: int | None = None) -> tuple[SweepPoint, OptimizationResult]:
    """Optimize t_s for one N, then score it on held-out random numbers."""
    opt = optimize_squeezing_time(n_spins, trials, master_seed, workers=workers)
    res = imprecision(n_spins, opt.t_s, trials, held_out_seed(master_seed), workers)
    fisher = quantum_fisher_information(prepare_cached(n_spins, opt.t_s))
    point = SweepPoint(n_spins, opt.t_s, res.delta_phi, res.stderr, fisher, res.degenerate_count)
    return point, opt
