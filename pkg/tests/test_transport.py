import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from entroflow.heatflow import Density, gaussian_mixture_density, kernel_density, trig_density
from entroflow.space import circle, cone_full_line, cone_half_line
from entroflow.verify import w2_distance_1d


def _lp_w2_squared(space, a, b):
    """Discrete optimal transport between nodal masses (scipy HiGHS)."""
    x = space.nodes
    d = np.abs(x[:, None] - x[None, :])
    if space.periodic:
        d = np.minimum(d, space.length - d)
    n = x.size
    a, b = a / a.sum(), b / b.sum()
    A_eq = np.vstack([np.kron(np.eye(n), np.ones(n)), np.kron(np.ones(n), np.eye(n))])
    # one marginal constraint is redundant; keeping it trips the presolve
    res = linprog((d**2).ravel(), A_eq=A_eq[:-1], b_eq=np.concatenate([a, b])[:-1],
                  bounds=(0, None), method="highs")
    assert res.status == 0
    return res.fun


def test_line_translation_is_exact(line_space):
    a = kernel_density(line_space, 0.3, center=-1.0)
    b = kernel_density(line_space, 0.3, center=1.5)
    assert abs(w2_distance_1d(a, b) - 2.5) < 1e-10


def test_line_variance_cost_between_gaussians(line_space):
    # W2^2 between N(0, s1^2) and N(0, s2^2) is (s1 - s2)^2
    a = kernel_density(line_space, 0.25)
    b = kernel_density(line_space, 1.0)
    s1, s2 = math.sqrt(0.5), math.sqrt(2.0)
    assert abs(w2_distance_1d(a, b) ** 2 - (s1 - s2) ** 2) < 1e-8


def test_half_line_against_lp_oracle():
    sp = cone_half_line(2, 101, 6.0)
    a = kernel_density(sp, 0.3)
    b = kernel_density(sp, 0.8)
    lp = _lp_w2_squared(sp, sp.volumes * a.values, sp.volumes * b.values)
    assert abs(w2_distance_1d(a, b) ** 2 - lp) < 5e-3 * lp


@pytest.mark.parametrize("shift", [1.0, 2.5])
def test_circle_against_lp_oracle(shift):
    sp = circle(2 * math.pi, 128)
    a = kernel_density(sp, 0.05, center=0.5)
    b = trig_density(sp, [0.6], [0.2]) if shift > 2 else kernel_density(sp, 0.1, center=0.5 + shift)
    lp = _lp_w2_squared(sp, sp.volumes * a.values, sp.volumes * b.values)
    w2 = w2_distance_1d(a, b) ** 2
    assert abs(w2 - lp) < 2e-3 * lp


def test_circle_distance_bounded_by_half_length(circle_space):
    a = kernel_density(circle_space, 0.01, center=0.0)
    b = kernel_density(circle_space, 0.01, center=math.pi)
    assert w2_distance_1d(a, b) <= math.pi + 1e-9
    assert w2_distance_1d(a, a) < 1e-7


def test_rejects_unnormalised_and_mismatched(circle_space):
    a = trig_density(circle_space, [0.1])
    bad = Density(circle_space, 2 * a.values)
    with pytest.raises(ValueError):
        w2_distance_1d(a, bad)
    other = circle(2 * math.pi, 64)
    with pytest.raises(ValueError):
        w2_distance_1d(a, trig_density(other, [0.1]))


_LINE = cone_full_line(1, 801, 8.0)


@settings(max_examples=15)
@given(st.lists(st.floats(min_value=-2.0, max_value=2.0), min_size=3, max_size=3),
       st.lists(st.floats(min_value=0.3, max_value=1.0), min_size=3, max_size=3))
def test_symmetry_and_triangle_inequality(centres, widths):
    d = [gaussian_mixture_density(_LINE, [[1.0, c, w]]) for c, w in zip(centres, widths)]
    ab = w2_distance_1d(d[0], d[1])
    assert abs(ab - w2_distance_1d(d[1], d[0])) < 1e-9
    assert ab <= w2_distance_1d(d[0], d[2]) + w2_distance_1d(d[2], d[1]) + 1e-9
