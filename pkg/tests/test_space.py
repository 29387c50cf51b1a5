import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from entroflow.space import (
    SpaceError,
    TruncationWarning,
    UndefinedCurvatureError,
    ball_volume,
    bishop_gromov_margin,
    build_model_space,
    circle,
    cone_full_line,
    cone_half_line,
    custom,
    distortion,
    effective_curvature,
    fd_potential_derivatives,
    gaussian_weight,
    hyperbolic_zonal,
    laplacian_dist_sq_check,
    noncollapsing_ratio,
    omega_N,
    space_from_spec,
    sphere_zonal,
    volume_ratio_kappa,
)


def test_grid_and_truncation_validation():
    with pytest.raises(SpaceError) as exc:
        cone_half_line(2, 8)
    assert exc.value.key == "grid_size"
    with pytest.raises(SpaceError) as exc:
        cone_half_line(2, 64, truncation=0.0)
    assert exc.value.key == "truncation"
    with pytest.raises(SpaceError):
        cone_half_line(0.5, 64)
    with pytest.raises(SpaceError):
        sphere_zonal(3, 64, N=2)


def test_space_from_spec_keys():
    sp = space_from_spec({"preset": "cone_half_line", "N": 2, "grid_size": 101, "truncation": 5})
    assert sp.size == 101 and sp.N == 2 and math.isclose(sp.length, 5.0)
    with pytest.raises(SpaceError) as exc:
        space_from_spec({"grid_size": 64})
    assert exc.value.key == "preset"
    with pytest.raises(SpaceError) as exc:
        build_model_space("torus", 64)
    assert exc.value.key == "preset"


def test_custom_table_rejects_nonfinite_V():
    table = [[0.0, 0.0], [1.0, 0.5], [2.0, None], [3.0, 0.1]]
    with pytest.raises(SpaceError) as exc:
        custom(table, 64, 2.0)
    assert exc.value.key == "custom_V"
    with pytest.raises(SpaceError) as exc:
        custom([[0, 0], [1, 0]], 64, 2.0)
    assert exc.value.key == "custom_V"


def test_custom_quadratic_matches_gaussian_weight():
    xs = np.linspace(-4, 4, 161)
    sp = custom(np.column_stack([xs, 0.5 * xs**2]), 401, 3.0)
    ref = gaussian_weight(4.0, 401, 3.0)
    np.testing.assert_allclose(sp.V, ref.V, atol=1e-12)
    k = effective_curvature(sp).k_eff
    np.testing.assert_allclose(k[5:-5], (1 - sp.nodes**2 / 2)[5:-5], atol=1e-8)


def test_volumes_sum_to_total_measure():
    # cone [0, b] with x^{N-1}: total mass b^N / N (trapezoid error O(h^2))
    sp = cone_half_line(3, 2001, 4.0)
    assert math.isclose(sp.volumes.sum(), 4.0**3 / 3, rel_tol=1e-5)
    sph = sphere_zonal(2, 801)
    assert math.isclose(sph.volumes.sum(), 2.0, rel_tol=1e-5)
    c = circle(2 * math.pi, 64)
    assert math.isclose(c.volumes.sum(), 2 * math.pi, rel_tol=1e-14)


def test_effective_curvature_presets():
    # cone with N equal to the weight dimension is flat
    assert effective_curvature(cone_half_line(2, 201)).k_inf == 0.0
    r = effective_curvature(sphere_zonal(2, 201))
    assert r.is_constant and math.isclose(r.k_inf, 1.0, rel_tol=1e-12)
    r = effective_curvature(hyperbolic_zonal(3, 4.0, 201))
    assert math.isclose(r.k_inf, -2.0, rel_tol=1e-12)
    circ = effective_curvature(circle(2 * math.pi, 64))
    assert np.all(circ.k_eff == 0.0)
    # sphere with extra synthetic dimension: (n-1) - ... has finite infimum
    r = effective_curvature(sphere_zonal(2, 201, N=3))
    assert np.isfinite(r.k_inf)


def test_curvature_undefined_for_weighted_N1():
    with pytest.raises(UndefinedCurvatureError):
        effective_curvature(gaussian_weight(3.0, 101, 1.0))


def test_fd_potential_derivatives_are_second_order():
    errs = []
    for n in (201, 401):
        sp = gaussian_weight(3.0, n, 2.0)
        sp2 = sphere_zonal(3, n)
        d1, d2 = fd_potential_derivatives(sp2)
        mid = slice(n // 4, 3 * n // 4)
        errs.append(np.max(np.abs(d2[mid] - sp2.d2V[mid]) / (1 + np.abs(sp2.d2V[mid]))))
        g1, g2 = fd_potential_derivatives(sp)
        assert np.max(np.abs(g1 - sp.dV)[1:-1]) < 1e-9
    assert 3.0 < errs[0] / errs[1] < 5.0


def test_ball_volumes_exact_cases():
    assert math.isclose(ball_volume(cone_half_line(2, 2001), 0.0, 1.0), 0.5, rel_tol=1e-12)
    assert math.isclose(ball_volume(circle(2 * math.pi, 256), 0.3, math.pi), 2 * math.pi)
    assert math.isclose(ball_volume(cone_full_line(1, 2001), 0.0, 2.0), 4.0, rel_tol=1e-12)
    with pytest.warns(TruncationWarning):
        ball_volume(cone_half_line(2, 201, 2.0), 0.0, 3.0)


def test_volume_ratio_kappa_cone_and_line():
    est = volume_ratio_kappa(cone_half_line(2, 2001))
    assert est.converged and abs(est.kappa - 1 / (2 * math.pi)) < 1e-3
    assert math.isclose(volume_ratio_kappa(cone_full_line(1, 2001)).kappa, 1.0, rel_tol=1e-9)
    assert math.isclose(volume_ratio_kappa(cone_half_line(1, 2001)).kappa, 0.5, rel_tol=1e-9)
    assert math.isclose(omega_N(2), math.pi) and math.isclose(omega_N(3), 4 * math.pi / 3)


def test_noncollapsing_ratio_of_the_line():
    assert math.isclose(noncollapsing_ratio(cone_full_line(1, 2001)), 1.0, rel_tol=1e-6)


def test_bishop_gromov_cone_equality_sphere_strict():
    cone = cone_half_line(2, 2001)
    for r, R in ((0.5, 1), (1, 2), (2, 4)):
        assert abs(bishop_gromov_margin(cone, 0.0, r, R)) < 1e-10
    sph = sphere_zonal(2, 801)
    assert bishop_gromov_margin(sph, 0.0, 0.5, 1.0) > 1e-3


def test_laplacian_of_distance_squared_on_cone():
    assert laplacian_dist_sq_check(cone_half_line(2, 2001)) < 1e-3
    assert laplacian_dist_sq_check(circle(2 * math.pi, 256), 1.0) < 1e-9
    assert laplacian_dist_sq_check(sphere_zonal(2, 401)) > 1e-2


def test_distortion_coefficients():
    assert distortion("s", 0.0, 0.7) == pytest.approx(0.7)
    assert distortion("c", 0.0, 0.7) == pytest.approx(1.0)
    assert distortion("s", 1.0, 0.5) == pytest.approx(math.sin(0.5))
    assert distortion("c", -1.0, 0.5) == pytest.approx(math.cosh(0.5))
    assert distortion("sigma", 0.0, 1.0, 0.3) == pytest.approx(0.3)
    assert distortion("sigma", 1.0, 1.0, 0.5) == pytest.approx(math.sin(0.5) / math.sin(1.0))
    assert math.isinf(distortion("sigma", 1.0, math.pi, 0.5))
    with pytest.raises(ValueError):
        distortion("s", 1.0, -0.1)


@given(st.integers(min_value=0, max_value=2**31 - 1))
def test_laplacian_symmetric_and_mass_free(seed):
    rng = np.random.default_rng(seed)
    for sp in (circle(2 * math.pi, 48), sphere_zonal(2, 48), cone_half_line(2.5, 48, 3.0)):
        u, v = rng.normal(size=(2, sp.size))
        lhs = np.dot(sp.volumes, v * sp.apply_laplacian(u))
        rhs = np.dot(sp.volumes, u * sp.apply_laplacian(v))
        assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))
        assert abs(np.dot(sp.volumes, sp.apply_laplacian(u))) < 1e-9
        # Dirichlet form is nonnegative
        assert np.dot(sp.volumes, u * sp.apply_laplacian(u)) <= 1e-12


@given(st.floats(min_value=1.0, max_value=4.0), st.floats(min_value=2.0, max_value=5.0))
def test_ball_volume_monotone_and_bg_nonnegative_on_cones(r, N):
    sp = cone_half_line(N, 801, 10.0)
    assert ball_volume(sp, 0.0, r) <= ball_volume(sp, 0.0, 1.5 * r) + 1e-15
    # equality on a cone, up to quadrature error
    assert bishop_gromov_margin(sp, 0.0, r, 2 * r) > -1e-3 * 2**N


@given(st.floats(min_value=0.0, max_value=6.2), st.floats(min_value=0.0, max_value=6.2))
def test_circle_distance_symmetric(a, b):
    c = circle(2 * math.pi, 64)
    assert np.all(c.distance(a) <= math.pi + 1e-12)
    d_ab = min(abs(a - b), 2 * math.pi - abs(a - b))
    i = c.nearest_node(b)
    assert abs(c.distance(a)[i] - d_ab) <= c.h
