import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twoaxis import spin
from twoaxis.spin import (
    MeasurementDistribution,
    SpinAxis,
    collective_operator_matrix,
    expectation,
    husimi_grid,
    husimi_integral,
    husimi_values,
    measurement_distribution,
    one_axis_twist,
    prepare_coherent_x,
    rotate,
    rotate_batch,
    sample,
    sample_uniform,
    variance,
)

import oracle


def test_coherent_x_small():
    np.testing.assert_allclose(prepare_coherent_x(1).amplitudes, [2 ** -0.5, 2 ** -0.5], atol=1e-15)
    np.testing.assert_allclose(prepare_coherent_x(2).amplitudes, [0.5, 2 ** -0.5, 0.5], atol=1e-15)


def test_coherent_x_moments():
    s = prepare_coherent_x(100)
    assert expectation(s, "x") == pytest.approx(50, abs=1e-9)
    assert expectation(s, "y") == pytest.approx(0, abs=1e-12)
    assert expectation(s, "z") == pytest.approx(0, abs=1e-12)
    assert variance(s, "y") == pytest.approx(25, abs=1e-9)
    assert variance(s, "z") == pytest.approx(25, abs=1e-9)
    assert variance(s, "x") == pytest.approx(0, abs=1e-9)


def test_coherent_x_large_n_no_overflow():
    s = prepare_coherent_x(2480)
    assert s.norm() == pytest.approx(1, abs=1e-12)
    assert expectation(s, "x") == pytest.approx(1240, rel=1e-10)


def test_rejects_zero_spins():
    with pytest.raises(ValueError):
        prepare_coherent_x(0)


def test_state_validation():
    with pytest.raises(ValueError):
        spin.DickeState(2, [1, 0])
    with pytest.raises(ValueError):
        spin.DickeState(1, [1, 1])


def test_operator_matrices_n1():
    np.testing.assert_allclose(collective_operator_matrix(1, "z"), np.diag([0.5, -0.5]))
    np.testing.assert_allclose(collective_operator_matrix(1, "x"), [[0, 0.5], [0.5, 0]])
    np.testing.assert_allclose(collective_operator_matrix(1, "y"), [[0, -0.5j], [0.5j, 0]])


def test_in_plane_operator():
    n, vp = 5, 0.7
    expected = math.sin(vp) * collective_operator_matrix(n, "x") + math.cos(vp) * collective_operator_matrix(n, "z")
    np.testing.assert_allclose(collective_operator_matrix(n, vp), expected)


@pytest.mark.parametrize("n", range(1, 65))
def test_commutators(n):
    jx, jy, jz = (collective_operator_matrix(n, a) for a in "xyz")
    assert np.max(np.abs(jx @ jy - jy @ jx - 1j * jz)) < 1e-10
    assert np.max(np.abs(jy @ jz - jz @ jy - 1j * jx)) < 1e-10
    assert np.max(np.abs(jz @ jx - jx @ jz - 1j * jy)) < 1e-10


def test_operators_match_tensor_product():
    n = 5
    for a in "xyz":
        full = oracle.dicke_columns(n).T @ oracle.collective(n, a) @ oracle.dicke_columns(n)
        np.testing.assert_allclose(collective_operator_matrix(n, a), full, atol=1e-12)


def test_twist_examples():
    s = prepare_coherent_x(2)
    assert one_axis_twist(s, 0.0).fidelity(s) == pytest.approx(1, abs=1e-15)
    t = 0.37
    np.testing.assert_allclose(one_axis_twist(s, t).amplitudes,
                               [0.5 * np.exp(-1j * t), 2 ** -0.5, 0.5 * np.exp(-1j * t)], atol=1e-15)
    one = prepare_coherent_x(1)
    twisted = one_axis_twist(one, 1.3)
    for a in "xyz":
        assert expectation(twisted, a) == pytest.approx(expectation(one, a), abs=1e-15)


def test_rotate_zero_is_identity():
    s = one_axis_twist(prepare_coherent_x(7), 0.2)
    for a in ("x", "y", "z", 0.4):
        np.testing.assert_allclose(rotate(s, a, 0.0).amplitudes, s.amplitudes, atol=1e-13)


def test_rotate_sign_convention_single_spin():
    r = rotate(prepare_coherent_x(1), "y", math.pi / 2)
    assert expectation(r, "z") == pytest.approx(-0.5, abs=1e-14)
    assert expectation(r, "x") == pytest.approx(0.0, abs=1e-14)


def test_rotate_matches_tensor_product_n6():
    n, phi = 6, 0.3
    r = rotate(prepare_coherent_x(n), "y", phi)
    ref = oracle.channel(oracle.plus_state(n), n, phi)
    np.testing.assert_allclose(r.amplitudes, oracle.to_dicke(ref, n), atol=1e-12)
    assert expectation(r, "x") == pytest.approx(3 * math.cos(phi), abs=1e-9)
    assert expectation(r, "z") == pytest.approx(-3 * math.sin(phi), abs=1e-9)


@pytest.mark.parametrize("axis", ["x", "y", "z", 1.1])
def test_rotate_all_axes_match_expm(axis):
    from scipy.linalg import expm
    n = 9
    s = one_axis_twist(prepare_coherent_x(n), 0.31)
    u = expm(-1j * 0.83 * collective_operator_matrix(n, axis))
    np.testing.assert_allclose(rotate(s, axis, 0.83).amplitudes, u @ s.amplitudes, atol=1e-12)


def test_rotation_composition():
    s = one_axis_twist(prepare_coherent_x(300), 0.01)
    for axis in ("x", "y", 2.0):
        two = rotate(rotate(s, axis, 0.7), axis, 1.9)
        one = rotate(s, axis, 2.6)
        assert two.fidelity(one) == pytest.approx(1, abs=1e-9)


def test_rotation_unitarity_large_n():
    n = 4096
    s = one_axis_twist(prepare_coherent_x(n), 0.4 / n ** (2 / 3))
    angles = np.random.default_rng(11).uniform(-10, 10, 1000)
    norms = np.linalg.norm(rotate_batch(s, "y", angles), axis=0)
    assert np.max(np.abs(norms - 1)) < 1e-10
    for a in angles[:5]:
        assert abs(rotate(s, "x", a).norm() - 1) < 1e-10


def test_rotate_batch_matches_rotate():
    s = one_axis_twist(prepare_coherent_x(40), 0.05)
    angles = [0.1, 2.0, -1.0]
    batch = rotate_batch(s, "y", angles)
    for k, a in enumerate(angles):
        np.testing.assert_allclose(batch[:, k], rotate(s, "y", a).amplitudes, atol=1e-13)


def test_expectation_in_plane_on_coherent_state():
    n = 20
    s = prepare_coherent_x(n)
    for vp in np.linspace(0, 2 * math.pi, 13):
        assert expectation(s, vp) == pytest.approx(n / 2 * math.sin(vp), abs=1e-10)


def test_expectation_squeezed_n4_matches_oracle():
    n = 4
    ref = oracle.squeezed(n, 0.1)
    from twoaxis.squeezing import SqueezingConfig, prepare
    s = prepare(SqueezingConfig(n, 0.1)).state
    assert expectation(s, "x") == pytest.approx(oracle.mean(ref, oracle.collective(n, "x")), abs=1e-10)


def test_single_peak_at_half_pi():
    s = prepare_coherent_x(30)
    grid = np.linspace(0, 2 * math.pi, 3600, endpoint=False)
    vals = np.array([expectation(s, vp) for vp in grid])
    assert grid[np.argmax(vals)] == pytest.approx(math.pi / 2, abs=2 * math.pi / 3600)
    assert np.count_nonzero(vals == vals.max()) == 1


def test_spin_axis_parsing():
    assert SpinAxis.parse("X") == SpinAxis("x")
    assert SpinAxis.parse(-0.5).varphi == pytest.approx(2 * math.pi - 0.5)
    with pytest.raises(ValueError):
        SpinAxis("w")
    with pytest.raises(ValueError):
        SpinAxis()


def test_distribution_examples():
    n = 10
    s = prepare_coherent_x(n)
    dx = measurement_distribution(s, "x")
    assert dx.probabilities[0] == pytest.approx(1, abs=1e-12)
    dz = measurement_distribution(s, "z")
    expected = [math.comb(n, k) / 2 ** n for k in range(n + 1)]
    np.testing.assert_allclose(dz.probabilities, expected, atol=1e-14)
    np.testing.assert_allclose(dz.outcomes, n / 2 - np.arange(n + 1))


def test_distribution_matches_tensor_product_n6():
    n = 6
    from twoaxis.squeezing import SqueezingConfig, prepare
    from twoaxis.metrology import apply_channel
    s = apply_channel(prepare(SqueezingConfig(n, 0.2)), 1.3)
    ref = oracle.channel(oracle.squeezed(n, 0.2), n, 1.3)
    for a in ("x", "z", "y", 0.9):
        op = oracle.collective(n, a) if isinstance(a, str) else oracle.in_plane(n, a)
        np.testing.assert_allclose(measurement_distribution(s, a).probabilities,
                                   oracle.distribution(ref, op, n), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), t=st.floats(0, 2), phi=st.floats(0, 2 * math.pi),
       axis=st.sampled_from(["x", "y", "z", 0.3, 2.5, 4.0]))
def test_distribution_moments_consistent(n, t, phi, axis):
    s = rotate(one_axis_twist(prepare_coherent_x(n), t), "y", phi)
    d = measurement_distribution(s, axis)
    assert d.probabilities.sum() == pytest.approx(1, abs=1e-10)
    assert d.mean() == pytest.approx(expectation(s, axis), abs=1e-8)
    assert d.second_moment() - d.mean() ** 2 == pytest.approx(variance(s, axis), abs=1e-8)


def test_variance_clamps_to_zero():
    assert variance(prepare_coherent_x(500), "x") == pytest.approx(0, abs=1e-9)
    assert variance(prepare_coherent_x(500), "x") >= 0


def test_sample_inverse_cdf():
    point = MeasurementDistribution(np.array([1.0, 0.0, -1.0]), np.array([0.0, 1.0, 0.0]))
    rng = np.random.default_rng(0)
    assert all(sample(point, rng) == 0.0 for _ in range(20))
    two = MeasurementDistribution(np.array([0.5, -0.5]), np.array([0.5, 0.5]))
    assert sample_uniform(two, 0.3) == 0.5
    assert sample_uniform(two, 0.7) == -0.5
    # zero-probability first outcome never drawn, even at u = 0
    assert sample_uniform(point, 0.0) == 0.0


def test_sample_deterministic_given_stream():
    d = measurement_distribution(prepare_coherent_x(30), "z")
    a = [sample(d, np.random.default_rng(5)) for _ in range(3)]
    assert a[0] == a[1] == a[2]


def test_sample_mean_law_of_large_numbers():
    n = 50
    d = measurement_distribution(prepare_coherent_x(n), "z")
    rng = np.random.default_rng(123)
    draws = np.array([sample(d, rng) for _ in range(100_000)])
    se = math.sqrt(n / 4) / math.sqrt(len(draws))
    assert abs(draws.mean()) < 4 * se


def test_husimi_coherent_points():
    for n in (1, 2, 7, 100):
        s = prepare_coherent_x(n)
        assert husimi_values(s, math.pi / 2, 0.0)[0, 0] == pytest.approx(1, abs=1e-12)
        # antipodal coherent states are orthogonal for every N
        assert husimi_values(s, math.pi / 2, math.pi)[0, 0] == pytest.approx(0, abs=1e-25)


def test_husimi_matches_brute_force_overlap():
    n = 5
    s = one_axis_twist(prepare_coherent_x(n), 0.4)
    theta, phi = 1.1, 2.3
    # coherent state as a product of single spins along (theta, phi)
    single = np.array([math.cos(theta / 2), math.sin(theta / 2) * np.exp(1j * phi)])
    prod = np.array([1.0 + 0j])
    for _ in range(n):
        prod = np.kron(prod, single)
    full = oracle.dicke_columns(n) @ s.amplitudes
    assert husimi_values(s, theta, phi)[0, 0] == pytest.approx(abs(np.vdot(prod, full)) ** 2, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(1, 120), t=st.floats(0, 1), phi=st.floats(0, 2 * math.pi))
def test_husimi_normalization(n, t, phi):
    s = rotate(one_axis_twist(prepare_coherent_x(n), t), "y", phi)
    assert husimi_integral(s) == pytest.approx(1, abs=1e-6)


def test_husimi_grid_bounds_and_shape():
    s = rotate(one_axis_twist(prepare_coherent_x(60), 0.03), "y", 0.4)
    g = husimi_grid(s, 31, 40)
    assert g.values.shape == (31, 40)
    assert g.values.min() >= 0 and g.values.max() <= 1
    with pytest.raises(ValueError):
        husimi_grid(s, 1, 40)


def test_husimi_grid_quadrature_181x360():
    s = rotate(one_axis_twist(prepare_coherent_x(100), 0.0186), "y", 0.5)
    assert spin.grid_normalization(husimi_grid(s, 181, 360)) == pytest.approx(1, abs=1e-4)


def test_husimi_maximum_follows_rotation():
    # the y rotation moves the peak along the x-z meridian: polar angle pi/2 + phi
    n, phi = 100, 0.5
    from twoaxis.squeezing import SqueezingConfig, prepare
    s = prepare(SqueezingConfig(n, 0.4 / n ** (2 / 3))).state
    g0 = husimi_grid(s, 361, 720)
    g1 = husimi_grid(rotate(s, "y", phi), 361, 720)
    th0, ph0 = g0.argmax()
    th1, ph1 = g1.argmax()
    assert (th0, ph0) == pytest.approx((math.pi / 2, 0.0), abs=1e-9)
    assert ph1 == pytest.approx(0.0, abs=1e-9)
    assert th1 - th0 == pytest.approx(phi, abs=math.pi / 360)
