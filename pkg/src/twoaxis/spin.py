"""Collective spin j = N/2 in the Dicke basis.

Amplitudes are stored m-descending: index k = 0..N holds magnetic quantum
number m = j - k.  Rotations about x and y share a single real eigen-
decomposition of J_x (a real symmetric tridiagonal matrix), cached per N.
J_y is obtained from it by the diagonal similarity D = diag(i**k):
J_y = D J_x D^dagger.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import gammaln, xlogy

__all__ = [
    "DickeState",
    "SpinAxis",
    "MeasurementDistribution",
    "HusimiGrid",
    "NumericalInstabilityError",
    "prepare_coherent_x",
    "collective_operator_matrix",
    "one_axis_twist",
    "rotate",
    "rotate_batch",
    "expectation",
    "variance",
    "measurement_distribution",
    "sample",
    "sample_uniform",
    "husimi_values",
    "husimi_grid",
    "grid_normalization",
    "husimi_integral",
    "log_binomial",
]

NORM_TOL = 1e-10
UNITARITY_TOL = 1e-10
TWO_PI = 2.0 * math.pi


class NumericalInstabilityError(ArithmeticError):
    """The cached rotation basis is not unitary to working tolerance."""


def log_binomial(n: int, k) -> np.ndarray:
    """ln C(n, k), safe for n in the thousands."""
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DickeState:
    """Pure state in the symmetric subspace of N spin-1/2 particles."""

    n_spins: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_spins < 1:
            raise ValueError(f"n_spins must be >= 1, got {self.n_spins}")
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (self.n_spins + 1,):
            raise ValueError(
                f"expected {self.n_spins + 1} amplitudes, got shape {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def j(self) -> float:
        return self.n_spins / 2

    @property
    def m(self) -> np.ndarray:
        return magnetic_numbers(self.n_spins)

    @property
    def dim(self) -> int:
        return self.n_spins + 1

    def norm(self) -> float:
        return float(np.sqrt(np.vdot(self.amplitudes, self.amplitudes).real))

    def fidelity(self, other: "DickeState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)


@dataclass(frozen=True)
class SpinAxis:
    """Named axis 'x', 'y', 'z', or in-plane J_varphi = sin(varphi) J_x + cos(varphi) J_z."""

    name: str | None = None
    varphi: float | None = None

    def __post_init__(self):
        if (self.name is None) == (self.varphi is None):
            raise ValueError("give exactly one of name or varphi")
        if self.name is not None and self.name not in ("x", "y", "z"):
            raise ValueError(f"unknown axis {self.name!r}")
        if self.varphi is not None:
            object.__setattr__(self, "varphi", float(self.varphi) % TWO_PI)

    @classmethod
    def parse(cls, axis: "AxisLike") -> "SpinAxis":
        if isinstance(axis, SpinAxis):
            return axis
        if isinstance(axis, str):
            return cls(name=axis.lower())
        return cls(varphi=float(axis))

    @property
    def plane_angle(self) -> float | None:
        """Angle from +z toward +x in the x-z plane; None for the y axis."""
        if self.varphi is not None:
            return self.varphi
        return {"z": 0.0, "x": math.pi / 2, "y": None}[self.name]


AxisLike = Union[SpinAxis, str, float]


@dataclass(frozen=True)
class MeasurementDistribution:
    outcomes: np.ndarray
    probabilities: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.outcomes, self.probabilities))

    def second_moment(self) -> float:
        return float(np.dot(self.outcomes ** 2, self.probabilities))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.probabilities)


@dataclass(frozen=True)
class HusimiGrid:
    theta: np.ndarray
    phi: np.ndarray
    values: np.ndarray  # shape (len(theta), len(phi))
    n_spins: int

    def argmax(self) -> tuple[float, float]:
        i, k = np.unravel_index(np.argmax(self.values), self.values.shape)
        return float(self.theta[i]), float(self.phi[k])


# ---------------------------------------------------------------------------
# operators and the cached rotation basis
# ---------------------------------------------------------------------------

def magnetic_numbers(n_spins: int) -> np.ndarray:
    return n_spins / 2 - np.arange(n_spins + 1, dtype=float)


def _ladder_offdiag(n_spins: int) -> np.ndarray:
    # <m+1|J_+|m> for the m-descending ordering; entry k couples k and k+1
    j = n_spins / 2
    m = magnetic_numbers(n_spins)[1:]
    return np.sqrt(j * (j + 1) - m * (m + 1))


def collective_operator_matrix(n_spins: int, axis: AxisLike) -> np.ndarray:
    """Dense (N+1)x(N+1) matrix of J_axis in the m-descending Dicke basis."""
    if n_spins < 1:
        raise ValueError("n_spins must be >= 1")
    axis = SpinAxis.parse(axis)
    m = magnetic_numbers(n_spins)
    off = _ladder_offdiag(n_spins) / 2
    jz = np.diag(m).astype(complex)
    jx = (np.diag(off, 1) + np.diag(off, -1)).astype(complex)
    if axis.name == "z":
        return jz
    if axis.name == "x":
        return jx
    if axis.name == "y":
        return -1j * np.diag(off, 1) + 1j * np.diag(off, -1)
    return math.sin(axis.varphi) * jx + math.cos(axis.varphi) * jz


@dataclass(frozen=True)
class _RotationBasis:
    # J_x = vectors @ diag(eigenvalues) @ vectors.T
    vectors: np.ndarray
    eigenvalues: np.ndarray
    ladder_phase: np.ndarray  # diag(i**k)


@functools.lru_cache(maxsize=8)
def rotation_basis(n_spins: int) -> _RotationBasis:
    """Eigendecomposition of J_x, validated for unitarity. Cached per N."""
    dim = n_spins + 1
    lam, vecs = eigh_tridiagonal(np.zeros(dim), _ladder_offdiag(n_spins) / 2)
    exact = -magnetic_numbers(n_spins)  # ascending -j..j
    if np.max(np.abs(lam - exact)) > 1e-8:
        raise NumericalInstabilityError(
            f"J_x spectrum off by {np.max(np.abs(lam - exact)):.2e} at N={n_spins}")
    probe = np.random.default_rng(dim).standard_normal((dim, 4))
    drift = np.max(np.abs(vecs @ (vecs.T @ probe) - probe)) / np.max(np.abs(probe))
    if drift > UNITARITY_TOL:
        raise NumericalInstabilityError(
            f"rotation basis not orthogonal at N={n_spins} (drift {drift:.2e})")
    vecs.setflags(write=False)
    phase = 1j ** (np.arange(dim) % 4)
    phase.setflags(write=False)
    # exact eigenvalues keep rotate(a) . rotate(b) == rotate(a + b)
    return _RotationBasis(vecs, exact, phase)


def _real_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a real, b complex: two real GEMMs instead of one complex one.
    # .real/.imag are strided views; BLAS needs contiguous operands.
    out = (a @ np.ascontiguousarray(b.real)).astype(complex)
    out.imag = a @ np.ascontiguousarray(b.imag)
    return out


def _rotate_amplitudes(n_spins: int, amps: np.ndarray, axis: SpinAxis, angles) -> np.ndarray:
    """exp(-i angle J_axis) applied to amps.

    amps is (N+1,) or (N+1, M); angles is a scalar or a 1-d array whose
    entries pair with the output columns.  A 1-d amps with a scalar angle
    returns a 1-d result.
    """
    vector_in = amps.ndim == 1 and np.ndim(angles) == 0
    cols = amps[:, None] if amps.ndim == 1 else amps
    ang = np.atleast_1d(np.asarray(angles, dtype=float))
    m = magnetic_numbers(n_spins)

    if axis.name == "z":
        out = np.exp(-1j * np.multiply.outer(m, ang)) * cols
    elif axis.name in ("x", "y"):
        basis = rotation_basis(n_spins)
        v, lam = basis.vectors, basis.eigenvalues
        src = cols if axis.name == "x" else np.conj(basis.ladder_phase)[:, None] * cols
        coeff = np.exp(-1j * np.multiply.outer(lam, ang)) * _real_matmul(v.T, src)
        out = _real_matmul(v, coeff)
        if axis.name == "y":
            out = basis.ladder_phase[:, None] * out
    else:
        # J_varphi = R_y(varphi) J_z R_y(varphi)^dagger
        y = SpinAxis("y")
        tmp = _rotate_amplitudes(n_spins, cols, y, -axis.varphi)
        tmp = np.exp(-1j * np.multiply.outer(m, ang)) * tmp
        out = _rotate_amplitudes(n_spins, tmp, y, axis.varphi)
    return out[:, 0] if vector_in else out


# ---------------------------------------------------------------------------
# states and dynamics
# ---------------------------------------------------------------------------

def prepare_coherent_x(n_spins: int) -> DickeState:
    """All N spins along +x: c_m = 2**(-j) sqrt(C(N, j+m))."""
    if n_spins < 1:
        raise ValueError(f"n_spins must be >= 1, got {n_spins}")
    k = np.arange(n_spins + 1)
    amps = np.exp(0.5 * log_binomial(n_spins, k) - 0.5 * n_spins * math.log(2.0))
    amps /= np.linalg.norm(amps)
    return DickeState(n_spins, amps.astype(complex))


def one_axis_twist(state: DickeState, t_s: float) -> DickeState:
    """exp(-i t_s J_z^2): phase exp(-i t_s m^2) on each amplitude."""
    if t_s < 0:
        raise ValueError("t_s must be non-negative")
    m = state.m
    return DickeState(state.n_spins, np.exp(-1j * t_s * m * m) * state.amplitudes)


def rotate(state: DickeState, axis: AxisLike, angle: float) -> DickeState:
    """Apply exp(-i angle J_axis).

    With this sign, rotating the +x coherent state about y by phi gives
    <J_x> = (N/2) cos(phi) and <J_z> = -(N/2) sin(phi).
    """
    axis = SpinAxis.parse(axis)
    out = _rotate_amplitudes(state.n_spins, state.amplitudes, axis, float(angle))
    return DickeState(state.n_spins, out)


def rotate_batch(state: DickeState, axis: AxisLike, angles) -> np.ndarray:
    """Amplitudes of exp(-i a J_axis)|state> for every a; shape (N+1, len(angles))."""
    axis = SpinAxis.parse(axis)
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    return _rotate_amplitudes(state.n_spins, state.amplitudes, axis, angles)


def _apply(state: DickeState, axis: SpinAxis) -> np.ndarray:
    # J_axis |psi> using the tridiagonal structure, O(N)
    c = state.amplitudes
    m = state.m
    off = _ladder_offdiag(state.n_spins) / 2
    up = np.zeros_like(c)    # J_+ / 2
    down = np.zeros_like(c)  # J_- / 2
    up[:-1] = off * c[1:]
    down[1:] = off * c[:-1]
    if axis.name == "z":
        return m * c
    if axis.name == "x":
        return up + down
    if axis.name == "y":
        return -1j * up + 1j * down
    return math.sin(axis.varphi) * (up + down) + math.cos(axis.varphi) * m * c


def expectation(state: DickeState, axis: AxisLike) -> float:
    axis = SpinAxis.parse(axis)
    return float(np.vdot(state.amplitudes, _apply(state, axis)).real)


def variance(state: DickeState, axis: AxisLike) -> float:
    """<J^2> - <J>^2; round-off negatives down to -1e-12 are clamped to zero."""
    axis = SpinAxis.parse(axis)
    v = _apply(state, axis)
    mean = float(np.vdot(state.amplitudes, v).real)
    var = float(np.vdot(v, v).real) - mean * mean
    if var < 0:
        if var < -1e-12 * max(1.0, state.n_spins ** 2):
            raise ArithmeticError(f"negative variance {var!r}")
        var = 0.0
    return var


# ---------------------------------------------------------------------------
# measurement
# ---------------------------------------------------------------------------

def _axis_basis_amplitudes(state: DickeState, axis: SpinAxis) -> np.ndarray:
    # amplitudes <m_axis|psi>, where |m_axis> = R |m_z> and R J_z R^dagger = J_axis
    if axis.name == "z":
        return state.amplitudes
    if axis.name == "y":
        # exp(-i(-pi/2)J_x) J_z exp(i(-pi/2)J_x) = J_y
        return rotate(state, "x", math.pi / 2).amplitudes
    return rotate(state, "y", -axis.plane_angle).amplitudes


def measurement_distribution(state: DickeState, axis: AxisLike) -> MeasurementDistribution:
    """Projective J_axis statistics; outcomes listed m-descending."""
    axis = SpinAxis.parse(axis)
    probs = np.abs(_axis_basis_amplitudes(state, axis)) ** 2
    return MeasurementDistribution(state.m, probs)


def sample_uniform(dist: MeasurementDistribution, u: float) -> float:
    """Inverse CDF: the first outcome whose cumulative probability exceeds u."""
    cdf = dist.cdf()
    k = int(np.searchsorted(cdf, u, side="right"))
    return float(dist.outcomes[min(k, len(cdf) - 1)])


def sample(dist: MeasurementDistribution, rng: np.random.Generator) -> float:
    return sample_uniform(dist, rng.random())


# ---------------------------------------------------------------------------
# Husimi quasiprobability
# ---------------------------------------------------------------------------

def _coherent_magnitudes(n_spins: int, theta: np.ndarray) -> np.ndarray:
    # |<m|theta, .>| = sqrt(C(N, j-m)) cos(theta/2)^(j+m) sin(theta/2)^(j-m)
    k = np.arange(n_spins + 1, dtype=float)   # j - m
    up = n_spins - k                          # j + m
    half = np.asarray(theta, dtype=float)[:, None] / 2
    logc = (0.5 * log_binomial(n_spins, k)[None, :]
            + xlogy(up[None, :], np.abs(np.cos(half)))
            + xlogy(k[None, :], np.abs(np.sin(half))))
    return np.exp(logc)


def husimi_values(state: DickeState, theta, phi) -> np.ndarray:
    """P(theta, phi) = |<theta, phi|psi>|^2 on the outer product of theta and phi."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    mags = _coherent_magnitudes(state.n_spins, theta)
    # conj of the azimuth phase exp(-i m phi)
    phases = np.exp(1j * np.multiply.outer(state.m, phi)) * state.amplitudes[:, None]
    overlap = mags @ phases
    return np.clip(np.abs(overlap) ** 2, 0.0, 1.0)


def husimi_grid(state: DickeState, theta_count: int, phi_count: int) -> HusimiGrid:
    """Uniform grid: theta in [0, pi] inclusive, phi in [0, 2 pi) exclusive."""
    if theta_count < 2 or phi_count < 2:
        raise ValueError("grid counts must be >= 2")
    theta = np.linspace(0.0, math.pi, theta_count)
    phi = TWO_PI * np.arange(phi_count) / phi_count
    return HusimiGrid(theta, phi, husimi_values(state, theta, phi), state.n_spins)


def grid_normalization(grid: HusimiGrid) -> float:
    """(2j+1)/(4 pi) times the sphere integral of P: trapezoid in theta, periodic in phi."""
    weights = np.sin(grid.theta)
    ring = grid.values.mean(axis=1) * TWO_PI
    integral = np.trapezoid(ring * weights, grid.theta)
    return (grid.n_spins + 1) / (4 * math.pi) * float(integral)


def husimi_integral(state: DickeState) -> float:
    """Normalization integral with a quadrature that is exact for degree-N spin states.

    Gauss-Legendre in cos(theta) and an equispaced azimuth grid of 2N+2 points.
    """
    n = state.n_spins
    x, w = np.polynomial.legendre.leggauss(n // 2 + 2)
    theta = np.arccos(x)
    phi = TWO_PI * np.arange(2 * n + 2) / (2 * n + 2)
    p = husimi_values(state, theta, phi)
    integral = float(w @ p.mean(axis=1)) * TWO_PI
    return (n + 1) / (4 * math.pi) * integral
