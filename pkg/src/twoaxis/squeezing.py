"""One-axis-twisted probe states and their quantum Fisher information."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

from .spin import DickeState, one_axis_twist, prepare_coherent_x, rotate, variance

__all__ = [
    "SqueezingConfig",
    "PreparedState",
    "adjustment_angle",
    "prepare",
    "prepare_cached",
    "quantum_fisher_information",
]


@dataclass(frozen=True)
class SqueezingConfig:
    n_spins: int
    t_s: float

    def __post_init__(self):
        if self.n_spins < 1:
            raise ValueError(f"n_spins must be >= 1, got {self.n_spins}")
        if not (self.t_s >= 0 and math.isfinite(self.t_s)):
            raise ValueError(f"t_s must be finite and non-negative, got {self.t_s}")


@dataclass(frozen=True)
class PreparedState:
    config: SqueezingConfig
    delta_adj: float
    state: DickeState


def adjustment_angle(n_spins: int, t_s: float) -> float:
    """Rotation about x that turns the squeezed quadrature onto the z axis.

    delta = atan2(B, A) / 2 with A = 1 - cos(2 t_s)^(N-2) and
    B = 4 sin(t_s) cos(t_s)^(N-2); zero when A = B = 0.
    """
    if n_spins < 3:
        raise ValueError(
            f"adjustment angle needs n_spins >= 3 (got {n_spins}); "
            "the cos^(N-2) terms are outside their derivation regime")
    p = n_spins - 2
    c2 = math.cos(2.0 * t_s)
    if c2 > 0:
        # 1 - cos(2t)^p without cancellation at small t; cos(2t) = 1 - 2 sin(t)^2
        a = -math.expm1(p * math.log1p(-2.0 * math.sin(t_s) ** 2))
    else:
        a = 1.0 - c2 ** p
    b = 4.0 * math.sin(t_s) * math.cos(t_s) ** p
    if a == 0.0 and b == 0.0:
        return 0.0
    return 0.5 * math.atan2(b, a)


def prepare(config: SqueezingConfig) -> PreparedState:
    """exp(+i delta J_x) exp(-i t_s J_z^2) applied to the +x coherent state."""
    delta = adjustment_angle(config.n_spins, config.t_s)
    state = prepare_coherent_x(config.n_spins)
    if config.t_s > 0:
        state = one_axis_twist(state, config.t_s)
    if delta != 0.0:
        # rotate() applies exp(-i angle J), so the angle is -delta
        state = rotate(state, "x", -delta)
    return PreparedState(config, delta, state)


@functools.lru_cache(maxsize=64)
def prepare_cached(n_spins: int, t_s: float) -> PreparedState:
    return prepare(SqueezingConfig(n_spins, float(t_s)))


def quantum_fisher_information(prepared: PreparedState) -> float:
    """Pure-state QFI for the channel generator J_y: 4 Var(J_y)."""
    return 4.0 * variance(prepared.state, "y")
