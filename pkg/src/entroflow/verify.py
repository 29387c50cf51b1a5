"""Inequality and identity checks along heat flows.

Every check returns a :class:`CheckResult` whose ``worst_margin`` is the
most violating signed margin; ``status`` is ``"pass"`` when
``worst_margin >= -tolerance`` and ``"inconclusive"`` when a diagnostic
(boundary mass, derivative-route disagreement) exceeded its limit.

Margins that depend on time derivatives are evaluated at interior times
(centred 5-point stencils in log t); identity-route margins use every time.
"""

from __future__ import annotations

import csv
import math
import os
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline, PchipInterpolator
from scipy.optimize import minimize_scalar

from . import functionals as fn
from .heatflow import BOUNDARY_MASS_LIMIT, AnalyticDensity, Density, FlowResult
from .output import fmt
from .space import (WeightedSpace1D, bishop_gromov_margin, distortion,
                    laplacian_dist_sq_check, omega_N, volume_ratio_kappa)

__all__ = [
    "CheckResult",
    "Report",
    "SeriesCache",
    "check_edi",
    "check_w_monotone",
    "check_entropy_power_concavity",
    "check_niw_identity",
    "check_li_yau",
    "check_fisher_bound",
    "w2_distance_1d",
    "check_hwi_type",
    "check_eks_distortion",
    "check_stam_lsi",
    "rigidity_scan",
    "li_yau_bound",
    "fisher_bound",
    "stam_constant",
    "CHECKS",
    "run_checks",
]

TOL_MARGIN = 1e-6
TOL_IDENTITY = 1e-3
ABS_IDENTITY = 1e-4
CIRCLE_SHIFTS = 512


@dataclass
class CheckResult:
    """Outcome of one check.

    Attributes
    ----------
    name : str
    status : str
        ``pass``, ``fail`` or ``inconclusive`` (``RIGID``/``NON-RIGID`` for
        the rigidity scan).
    worst_margin : float
    worst_t, worst_x : float or None
        Location of the worst margin.
    tolerance : float
    details : dict
        Per-time arrays (``t``, ``margin``, ...) and scalar diagnostics.
    notes : list of str
    """

    name: str
    status: str
    worst_margin: float
    worst_t: Optional[float] = None
    worst_x: Optional[float] = None
    tolerance: float = TOL_MARGIN
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status in ("pass", "RIGID")

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status,
                "worst_margin": _num(self.worst_margin), "worst_t": _num(self.worst_t),
                "worst_x": _num(self.worst_x), "tolerance": _num(self.tolerance)}


def _num(x):
    if x is None:
        return None
    x = float(x)
    return x if math.isfinite(x) else None


def _status(worst, tol, inconclusive=False):
    if inconclusive:
        return "inconclusive"
    return "pass" if worst >= -tol else "fail"


class SeriesCache:
    """Thread-safe memo of :func:`functionals.evaluate_series` per flow and parameters."""

    def __init__(self):
        self._lock = threading.Lock()
        self._store = {}

    def get(self, flow, N, K=0.0, a=0.0, wang_K=None):
        key = (id(flow), float(N), float(K), float(a), None if wang_K is None else float(wang_K))
        with self._lock:
            if key in self._store:
                return self._store[key][1]
        s = fn.evaluate_series(flow, N=N, K=K, a=a, wang_K=wang_K)
        with self._lock:
            self._store[key] = (flow, s)
        return s


_DEFAULT_CACHE = SeriesCache()


def _dim(flow, N):
    if N is not None:
        return float(N)
    if flow.space is not None:
        return flow.space.N
    return float(flow.densities[0].N)


def _window(t, window):
    if window is None:
        return np.ones(t.size, dtype=bool)
    lo, hi = window
    return (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))


def _boundary_notes(flow, mask):
    bm = np.asarray(flow.diagnostics.get("boundary_mass", np.zeros(len(flow))))[mask]
    if bm.size and bm.max() > BOUNDARY_MASS_LIMIT:
        return [f"boundary mass {bm.max():.3g} exceeds {BOUNDARY_MASS_LIMIT:g}"]
    return []


def _finish_series_check(name, t, margin, mask, tol, notes, details, inconclusive=False):
    m = np.where(mask, margin, np.inf)
    if not np.any(mask):
        return CheckResult(name, "inconclusive", float("nan"), None, None, tol, details,
                           notes + ["no times inside the evaluation window"])
    k = int(np.argmin(m))
    details.setdefault("t", t)
    details.setdefault("margin", margin)
    details.setdefault("evaluated", mask)
    return CheckResult(name, _status(m[k], tol, inconclusive), float(m[k]), float(t[k]), None,
                       tol, details, notes)


def _fd_uncertain(margin, err, mask, tol):
    """True when the worst violation lies within the finite-difference error."""
    m = np.where(mask, margin, np.inf)
    if not np.any(mask):
        return False
    k = int(np.argmin(m))
    return bool(-tol - err[k] <= m[k] < -tol)


def _route_check(fd, route, mask, tol, label):
    """Relative disagreement of two derivative routes at masked times."""
    res = np.abs(fd - route) / (1 + np.abs(route))
    worst = float(np.max(res[mask])) if np.any(mask) else 0.0
    if worst > tol:
        return worst, [f"{label} routes disagree (max {worst:.2e} > {tol:g})"]
    return worst, []


# ----------------------------------------------------------------------
# Bakry-Emery type checks along one flow


def check_edi(flow: FlowResult, K: float, N: Optional[float] = None, tolerance: float = TOL_MARGIN,
              tol_deriv: float = fn.TOL_DERIV, time_window=None, series=None,
              cache: Optional[SeriesCache] = None) -> CheckResult:
    """EDI(K, N): ``H'' + (2/N) H'^2 + 2K H' <= 0`` along the flow.

    The margin uses the identity routes ``H' = I`` and ``H'' = -2 Gamma_2``;
    finite differences of H validate both routes (inconclusive on
    disagreement).
    """
    N = _dim(flow, N)
    s = series or (cache or _DEFAULT_CACHE).get(flow, N)
    t, I, g2 = s.t, s.I, s.gamma2
    margin = 2 * g2 - (2 / N) * I**2 - 2 * K * I
    mask = _window(t, time_window)
    notes = _boundary_notes(flow, mask)
    incon = bool(notes)
    details = {}
    d = s.derivatives
    if d is not None:
        im = mask & d.interior
        r1, n1 = _route_check(d.dH_fd, d.dH_id, im, tol_deriv, "H'")
        r2, n2 = _route_check(d.d2H_fd, d.d2H_id, im, tol_deriv, "H''")
        details.update(dH_route_residual=r1, d2H_route_residual=r2)
        notes += n1 + n2
        incon |= bool(n1 or n2)
    else:
        notes.append("fewer than 5 times: derivative routes not cross-checked")
    return _finish_series_check("edi", t, margin, mask, tolerance, notes, details, incon)


def _family_values(s, which, K, N, a):
    if which == "W_N":
        return s.W_N, s.dW_N_route
    if which == "W_NK":
        return s.W_NK, s.dW_NK_route
    if which == "wang":
        return fn.wang_entropy(s, K, N), fn._wang_route_derivative(s.t, s.I, -2 * s.gamma2, K, N)
    if which == "ye":
        vals = fn.ye_entropy(s, a, K, N)
        omega = s.I / 4 + a
        route = s.I + N * (-2 * s.gamma2) / (8 * omega) + N * K - 4 * a
        return vals, route
    raise ValueError(f"unknown entropy family {which!r}")


def check_w_monotone(flow: FlowResult, which: str = "W_N", K: float = 0.0,
                     N: Optional[float] = None, a: float = 0.0, tolerance: float = TOL_MARGIN,
                     tol_deriv: float = fn.TOL_DERIV, time_window=None, series=None,
                     cache: Optional[SeriesCache] = None) -> CheckResult:
    """Monotonicity of ``W_N``, ``W_NK``, Wang's ``W_K`` or Ye's ``Y_a``.

    ``margin = -dF/dt`` by finite differences at interior times, validated
    against the Gamma_2 formula route.  With fewer than 5 times the
    formula route supplies the margin.
    """
    N = _dim(flow, N)
    if which == "ye":
        if a * K > 0:
            raise ValueError("Ye's entropy requires a K <= 0")
    s = series or (cache or _DEFAULT_CACHE).get(
        flow, N, K if which in ("W_NK", "ye") else 0.0, a, K if which == "wang" else None)
    values, route = _family_values(s, which, K, N, a)
    t = s.t
    mask = _window(t, time_window)
    notes = _boundary_notes(flow, mask)
    incon = bool(notes)
    details = {"values": values, "route_derivative": route}
    if t.size >= 5:
        dF, _, gap, _ = fn.log_time_derivatives(t, values)
        interior = np.zeros(t.size, dtype=bool)
        interior[2:-2] = True
        mask = mask & interior
        res, n = _route_check(dF, route, mask, tol_deriv, f"d{which}/dt")
        if _fd_uncertain(-dF, gap, mask, tolerance):
            n.append("worst violation is within the finite-difference error")
        notes += n
        incon |= bool(n)
        details.update(fd_derivative=dF, route_residual=res)
        if which == "W_NK" and np.all(np.isfinite(s.T1)):
            details["terms_derivative"] = s.dW_NK_terms
        margin = -dF
    else:
        notes.append("fewer than 5 times: formula route used as margin")
        margin = -route
    name = {"W_N": "w_monotone", "W_NK": "w_monotone_NK", "wang": "wang_monotone",
            "ye": "ye_monotone"}[which]
    return _finish_series_check(name, t, margin, mask, tolerance, notes, details, incon)


def check_entropy_power_concavity(flow: FlowResult, K: float = 0.0, N: Optional[float] = None,
                                  tolerance: float = TOL_MARGIN, tol_deriv: float = fn.TOL_DERIV,
                                  rich_tol: float = fn.TOL_RICHARDSON, time_window=None, series=None,
                                  cache: Optional[SeriesCache] = None) -> CheckResult:
    """``P'' + 2K P' <= 0`` for the entropy power ``P = exp(2H/N)``.

    Finite differences of P give the margin at interior times; the
    identity route ``P'' = (2P/N)(H'' + 2I^2/N)`` cross-checks it.
    """
    N = _dim(flow, N)
    s = series or (cache or _DEFAULT_CACHE).get(flow, N)
    t, I = s.t, s.I
    P = s.entropy_power
    dP_id = (2 / N) * P * I
    d2P_id = (2 * P / N) * (-2 * s.gamma2 + (2 / N) * I**2)
    mask = _window(t, time_window)
    notes = _boundary_notes(flow, mask)
    incon = bool(notes)
    details = {"identity_margin": -(d2P_id + 2 * K * dP_id)}
    d = s.derivatives
    if d is not None:
        mask = mask & d.interior
        margin = -(d.d2N + 2 * K * d.dN)
        res, n = _route_check(d.d2N + 2 * K * d.dN, d2P_id + 2 * K * dP_id, mask, tol_deriv,
                              "entropy-power")
        rgap = d.gap_d2N / (1 + np.abs(d.d2N))
        if np.any(mask) and rgap[mask].max() > rich_tol:
            n.append(f"Richardson disagreement {rgap[mask].max():.2e} > {rich_tol:g}")
        if _fd_uncertain(margin, d.gap_d2N + 2 * abs(K) * d.gap_dN, mask, tolerance):
            n.append("worst violation is within the finite-difference error")
        notes += n
        incon |= bool(n)
        details["route_residual"] = res
    else:
        notes.append("fewer than 5 times: identity route used as margin")
        margin = details["identity_margin"]
    return _finish_series_check("power_concavity", t, margin, mask, tolerance, notes, details,
                                incon)


def check_niw_identity(flow: FlowResult, K: float = 0.0, N: Optional[float] = None,
                       rel_tol: float = TOL_IDENTITY, abs_tol: float = ABS_IDENTITY,
                       tol_deriv: float = fn.TOL_DERIV, time_window=None, series=None,
                       cache: Optional[SeriesCache] = None) -> CheckResult:
    """Entropy-power identity through I and dW_{N,K}/dt.

    Compares ``P''_fd + 2K P'_fd`` with :func:`functionals.niw_rhs` (the
    ``2K P'`` term vanishes at K = 0).  ``margin = -|lhs - rhs| / scale``
    with ``scale = max(|lhs|, |rhs|, abs_tol/rel_tol)``, so the check passes
    at ``rel_tol`` relative or ``abs_tol`` absolute mismatch.
    """
    N = _dim(flow, N)
    s = series or (cache or _DEFAULT_CACHE).get(flow, N, K)
    t = s.t
    d = s.derivatives
    if d is None:
        return CheckResult("niw", "inconclusive", float("nan"), None, None, rel_tol, {},
                           ["needs at least 5 times"])
    lhs = d.d2N + 2 * K * d.dN
    rhs = fn.niw_rhs(s, K, N)
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), abs_tol / rel_tol)
    margin = -np.abs(lhs - rhs) / scale
    mask = _window(t, time_window) & d.interior
    notes = _boundary_notes(flow, mask)
    res, n = _route_check(d.dW_NK, s.dW_NK_route, mask, tol_deriv, "dW_NK/dt")
    notes += n
    details = {"lhs": lhs, "rhs": rhs, "dW_route_residual": res}
    return _finish_series_check("niw", t, margin, mask, rel_tol, notes, details, bool(notes))


def li_yau_bound(t, alpha: float, K: float, N: float):
    """``(1 + K t/(2(alpha-1))) N alpha^2/(2t)``; ``N/(2t)`` for alpha = 1, K = 0."""
    t = np.asarray(t, float)
    if alpha == 1:
        if K != 0:
            raise ValueError("alpha = 1 requires K = 0")
        return N / (2 * t)
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return (1 + K * t / (2 * (alpha - 1))) * N * alpha**2 / (2 * t)


def _li_yau_grid(rho: Density, alpha: float):
    pw = fn._pointwise(rho)
    sp = rho.space
    lap = pw.fpp - pw.Vp_fp
    q = (1 - alpha) * pw.fp**2 - alpha * lap
    return q, pw.keep, np.asarray(sp.nodes)


def _li_yau_analytic(rho: AnalyticDensity, alpha: float, samples: int = 401):
    r = np.linspace(0.0, 8.0 * math.sqrt(rho.N * rho.t), samples)
    fp = rho.grad_log(r)
    lap = -1 / (2 * rho.t) - (rho.N - 1) / (2 * rho.t)
    q = (1 - alpha) * fp**2 - alpha * lap
    return q, np.ones(r.size, dtype=bool), r


def check_li_yau(flow: FlowResult, alpha: float = 1.0, K: float = 0.0, N: Optional[float] = None,
                 tolerance: float = TOL_MARGIN, band: float = 0.05, time_window=None) -> CheckResult:
    """Li-Yau gradient estimate ``sup_x(|f'|^2 - alpha d_t f) <= bound(t)``.

    ``d_t f = Delta f + |f'|^2`` is evaluated spatially; nodes in the outer
    ``band`` of truncated ends do not enter the verdict, and the check is
    inconclusive when the band holds a node that violates the bound more
    than the core does.  ``K`` is the lower-bound magnitude of RCD(-K, N).
    """
    N = _dim(flow, N)
    t = np.asarray(flow.times, float)
    bound = li_yau_bound(t, alpha, K, N)
    mask = _window(t, time_window)
    notes = _boundary_notes(flow, mask)
    incon = bool(notes)
    margins = np.full(t.size, np.inf)
    where = np.full(t.size, np.nan)
    band_viol = False
    for k, rho in enumerate(flow.densities):
        if not mask[k]:
            continue
        if isinstance(rho, AnalyticDensity):
            q, keep, x = _li_yau_analytic(rho, alpha)
            bmask = np.zeros(x.size, dtype=bool)
        else:
            q, keep, x = _li_yau_grid(rho, alpha)
            bmask = rho.space.boundary_band(band)
        m = bound[k] - q
        core = keep & ~bmask
        if not np.any(core):
            continue
        j = int(np.argmin(np.where(core, m, np.inf)))
        margins[k] = m[j]
        where[k] = x[j]
        bsel = keep & bmask
        if np.any(bsel) and np.min(m[bsel]) < min(m[j], 0.0) - tolerance:
            band_viol = True
    if band_viol:
        notes.append("boundary band holds the minimizing node")
        incon = True
    res = _finish_series_check("li_yau", t, margins, mask & np.isfinite(margins), tolerance,
                               notes, {"bound": bound, "worst_x_per_t": where}, incon)
    if res.worst_t is not None:
        res.worst_x = float(where[int(np.argmin(np.abs(t - res.worst_t)))])
    return res


def fisher_bound(t, K: float, N: float):
    """``N K/(e^{2Kt} - 1)``, or ``N/(2t)`` at K = 0."""
    t = np.asarray(t, float)
    if K == 0:
        return N / (2 * t)
    return N * K / np.expm1(2 * K * t)


def check_fisher_bound(flow: FlowResult, K: float = 0.0, N: Optional[float] = None,
                       tolerance: float = TOL_MARGIN, time_window=None, series=None,
                       cache: Optional[SeriesCache] = None) -> CheckResult:
    """Fisher information upper bound along the flow; margin = bound - I."""
    N = _dim(flow, N)
    s = series or (cache or _DEFAULT_CACHE).get(flow, N)
    b = fisher_bound(s.t, K, N)
    margin = b - s.I
    mask = _window(s.t, time_window)
    notes = _boundary_notes(flow, mask)
    return _finish_series_check("fisher_bound", s.t, margin, mask, tolerance, notes,
                                {"bound": b, "I": s.I}, bool(notes))


# ----------------------------------------------------------------------
# transport


def _cdf_model(rho: Density):
    """Monotone quantile model ``(F_knots, Q)`` of a grid density.

    The CDF at the nodes integrates a cubic spline of ``u m`` (periodic on
    the circle); the quantile is the monotone Pchip interpolant of the
    inverse pairs.
    """
    sp = rho.space
    g = np.maximum(np.asarray(rho.values, float), 0.0) * sp.weight
    x = np.asarray(sp.nodes, float)
    if sp.periodic:
        x = np.append(x, sp.length)
        g = np.append(g, g[0])
    spline = CubicSpline(x, g, bc_type="periodic" if sp.periodic else "not-a-knot")
    F = spline.antiderivative()(x)
    F = np.maximum.accumulate(F - F[0])
    F /= F[-1]
    keep = np.concatenate(([True], np.diff(F) > 1e-15))
    keep[-1] = True
    Fk, xk = F[keep], x[keep]
    if Fk[-1] <= Fk[-2]:
        Fk, xk = np.delete(Fk, -2), np.delete(xk, -2)
    Fk[-1] = 1.0
    if sp.periodic:
        # lift to three periods so the interpolant is smooth across the cut
        L = sp.length
        FL = np.concatenate((Fk[:-1] - 1, Fk[:-1], Fk + 1))
        xL = np.concatenate((xk[:-1] - L, xk[:-1], xk + L))
        return Fk, PchipInterpolator(FL, xL), True
    return Fk, PchipInterpolator(Fk, xk), False


def _quantile(model, s):
    s = np.asarray(s, float)
    return model[1](s if model[2] else np.clip(s, 0.0, 1.0))


_GL_X, _GL_W = np.polynomial.legendre.leggauss(6)


def _quantile_cost(m1, m2, shift: float = 0.0) -> float:
    """``int_0^1 |Q1(s) - Q2(s - shift)|^2 ds`` with breakpoint-merged Gauss quadrature.

    On the circle ``Q2`` is the lifted quantile, ``Q2(s + 1) = Q2(s) + L``.
    """
    bp = [m1[0]]
    for k in (-1, 0, 1, 2):
        bp.append(m2[0] + k + shift)
    b = np.unique(np.clip(np.concatenate(bp), 0.0, 1.0))
    lo, hi = b[:-1], b[1:]
    keep = hi - lo > 1e-15
    lo, hi = lo[keep], hi[keep]
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    s = mid[:, None] + half[:, None] * _GL_X[None, :]
    q1 = _quantile(m1, s)
    q2 = _quantile(m2, s - shift)
    return float(np.sum(half[:, None] * _GL_W[None, :] * (q1 - q2) ** 2))


def w2_distance_1d(rho1: Density, rho2: Density, shifts: int = CIRCLE_SHIFTS) -> float:
    """Quadratic Wasserstein distance between two densities on one space.

    Interval-type spaces use the quantile coupling; the circle minimizes the
    lifted-quantile cost over ``shifts`` cyclic shifts of the cut point and
    refines the best one with a bounded scalar search.

    Raises
    ------
    ValueError
        If the densities live on different spaces or are not normalized.
    """
    if rho1.space is not rho2.space:
        raise ValueError("densities must share one space")
    for r in (rho1, rho2):
        if abs(r.mass() - 1.0) > 1e-6:
            raise ValueError("w2_distance_1d needs normalized densities")
    m1, m2 = _cdf_model(rho1), _cdf_model(rho2)
    if not rho1.space.periodic:
        return math.sqrt(max(_quantile_cost(m1, m2), 0.0))
    grid = np.linspace(-1.0, 1.0, shifts, endpoint=False)
    costs = np.array([_quantile_cost(m1, m2, th) for th in grid])
    k = int(np.argmin(costs))
    step = grid[1] - grid[0]
    # search the offset from the best grid shift so the tolerance stays relative to it
    res = minimize_scalar(lambda z: _quantile_cost(m1, m2, grid[k] + z), bounds=(-step, step),
                          method="bounded", options={"xatol": 1e-14})
    best = min(costs[k], res.fun)
    return math.sqrt(max(best, 0.0))


def _pair_at(flow_pair, t):
    fa, fb = flow_pair
    return fa.at(t), fb.at(t)


def _fisher_checked(rho, tol):
    g, lap, gap = fn.fisher_forms(rho, tol, warn=False)
    return lap, gap > tol and max(abs(g), abs(lap)) > 1e-10


def check_hwi_type(flow_pair, t: float, tolerance: float = TOL_MARGIN,
                   tol_fisher: float = fn.TOL_FISHER) -> CheckResult:
    """``|H_a - H_b| <= max(sqrt I_a, sqrt I_b) W_2`` at time ``t``."""
    ra, rb = _pair_at(flow_pair, t)
    Ia, ba = _fisher_checked(ra, tol_fisher)
    Ib, bb = _fisher_checked(rb, tol_fisher)
    Ha, Hb = fn.shannon_entropy(ra), fn.shannon_entropy(rb)
    W = w2_distance_1d(ra, rb)
    lhs = abs(Ha - Hb)
    rhs = max(math.sqrt(max(Ia, 0)), math.sqrt(max(Ib, 0))) * W
    notes = ["Fisher forms disagree"] if (ba or bb) else []
    details = {"lhs": lhs, "rhs": rhs, "W2": W, "H": (Ha, Hb), "I": (Ia, Ib)}
    m = rhs - lhs
    return CheckResult("hwi", _status(m, tolerance, bool(notes)), float(m), float(t), None,
                       tolerance, details, notes)


def check_eks_distortion(flow_pair, t: float, K: float = 0.0, N: Optional[float] = None,
                         tolerance: float = TOL_MARGIN) -> CheckResult:
    """Entropy-power distortion inequality in both orderings of the pair.

    ``U_N(mu_1)/U_N(mu_0) <= c_{K/N}(W_2) + (1/N) s_{K/N}(W_2) sqrt(I(mu_0))``
    with ``U_N = exp(H/N)``.  Inconclusive (vacuous) when
    ``(K/N) W_2^2 >= pi^2``.
    """
    ra, rb = _pair_at(flow_pair, t)
    N = ra.space.N if N is None else float(N)
    W = w2_distance_1d(ra, rb)
    kap = K / N
    if math.isinf(distortion("sigma", kap, W, 0.5)):
        return CheckResult("eks", "inconclusive", float("nan"), float(t), None, tolerance,
                           {"W2": W}, ["vacuous: (K/N) W2^2 >= pi^2"])
    H = {id(ra): fn.shannon_entropy(ra), id(rb): fn.shannon_entropy(rb)}
    I = {id(ra): fn.fisher_information(ra), id(rb): fn.fisher_information(rb)}
    cK, sK = distortion("c", kap, W), distortion("s", kap, W)
    margins = []
    for r0, r1 in ((ra, rb), (rb, ra)):
        lhs = math.exp((H[id(r1)] - H[id(r0)]) / N)
        rhs = cK + sK * math.sqrt(max(I[id(r0)], 0.0)) / N
        margins.append(rhs - lhs)
    m = min(margins)
    return CheckResult("eks", _status(m, tolerance), float(m), float(t), None, tolerance,
                       {"W2": W, "margins": margins})


def stam_constant(N: float, kappa: float) -> float:
    """``gamma_N = 2 pi N e kappa^{2/N}``."""
    return 2 * math.pi * N * math.e * kappa ** (2 / N)


def check_stam_lsi(rho, N: Optional[float] = None, kappa: Optional[float] = None,
                   tolerance: float = TOL_MARGIN) -> CheckResult:
    """Stam-type LSI: ``-H <= (N/2) log(I/gamma_N)``; margin = RHS - LHS.

    ``kappa`` defaults to the computed asymptotic volume ratio of the
    density's space (inconclusive when that estimate did not converge).
    """
    notes = []
    if isinstance(rho, AnalyticDensity):
        N = rho.N if N is None else float(N)
        if kappa is None:
            kappa = 1.0 if rho.model == "euclidean" else 1.0 / (rho.N * omega_N(rho.N))
    else:
        N = rho.space.N if N is None else float(N)
        if kappa is None:
            est = volume_ratio_kappa(rho.space)
            kappa = est.kappa
            if not est.converged:
                notes.append(f"kappa estimate did not converge (spread {est.spread:.2e})")
    gam = stam_constant(N, kappa)
    H = fn.shannon_entropy(rho)
    I = fn.fisher_information(rho)
    margin = (N / 2) * math.log(I / gam) + H
    P = math.exp(2 * H / N)
    details = {"kappa": kappa, "gamma_N": gam, "H": H, "I": I, "I_times_P": I * P,
               "I_times_P_minus_gamma": I * P - gam}
    return CheckResult("stam_lsi", _status(margin, tolerance, bool(notes)), float(margin),
                       getattr(rho, "time_tag", None), None, tolerance, details, notes)


# ----------------------------------------------------------------------
# rigidity


RIGIDITY_TOLS = {"h_sup": 1e-3, "W_range": 2e-3, "lap_dev": 1e-3, "bg_max": 1e-4}
BG_PAIRS = ((0.5, 1.0), (1.0, 2.0), (2.0, 4.0))


def rigidity_scan(flow: FlowResult, space: Optional[WeightedSpace1D] = None,
                  N: Optional[float] = None, tolerances: Optional[dict] = None,
                  time_window=None, series=None, cache: Optional[SeriesCache] = None) -> CheckResult:
    """Rigidity signature of a kernel-started flow.

    Evaluates ``sup |N/2 - t I|``, the range of ``W_N``, the deviation of
    ``Delta d^2`` from ``2N`` and ``|Bishop-Gromov margin|`` at three radius
    pairs; ``RIGID`` when all four are within tolerance.
    """
    tols = dict(RIGIDITY_TOLS, **(tolerances or {}))
    space = flow.space if space is None else space
    N = _dim(flow, N)
    s = series or (cache or _DEFAULT_CACHE).get(flow, N)
    mask = _window(s.t, time_window)
    h = np.abs(N / 2 - s.t * s.I)
    vals = {"h_sup": float(h[mask].max()), "W_range": float(np.ptp(s.W_N[mask]))}
    notes = _boundary_notes(flow, mask)
    if space is None:
        vals["lap_dev"] = 0.0
        vals["bg_max"] = 0.0
        notes.append("closed-form model: Delta d^2 = 2N and Bishop-Gromov equality hold exactly")
    else:
        sN = space if space.N == N else space.with_N(N)
        vals["lap_dev"] = laplacian_dist_sq_check(sN, space.center)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vals["bg_max"] = float(max(abs(bishop_gromov_margin(sN, space.center, r, R))
                                       for r, R in BG_PAIRS))
    slack = {k: tols[k] - vals[k] for k in vals}
    worst_key = min(slack, key=slack.get)
    worst = slack[worst_key]
    if notes and any("boundary mass" in n for n in notes):
        status = "inconclusive"
    else:
        status = "RIGID" if worst >= 0 else "NON-RIGID"
    if status == "NON-RIGID":
        ratio = {k: vals[k] / tols[k] for k in vals}
        notes.append(f"dominant violation: {max(ratio, key=ratio.get)}")
    k = int(np.argmax(np.where(mask, h, -np.inf)))
    details = dict(vals)
    details.update(tolerances=tols, t=s.t, h=h, W_N=s.W_N, margin=tols["h_sup"] - h)
    return CheckResult("rigidity", status, float(worst), float(s.t[k]), None, 0.0, details, notes)


# ----------------------------------------------------------------------
# suites


CHECKS: dict = {
    "edi": check_edi,
    "w_monotone": check_w_monotone,
    "power_concavity": check_entropy_power_concavity,
    "niw": check_niw_identity,
    "li_yau": check_li_yau,
    "fisher_bound": check_fisher_bound,
    "stam_lsi": check_stam_lsi,
    "hwi": check_hwi_type,
    "eks": check_eks_distortion,
    "rigidity": rigidity_scan,
}


@dataclass
class Report:
    """Results of a named suite plus the run environment."""

    suite: str
    results: list
    environment: dict

    def to_dict(self) -> dict:
        return {"suite": self.suite, "results": [r.to_dict() for r in self.results],
                "environment": dict(self.environment)}

    @property
    def any_fail(self) -> bool:
        return any(r.status in ("fail", "NON-RIGID") for r in self.results)

    @property
    def any_inconclusive(self) -> bool:
        return any(r.status == "inconclusive" for r in self.results)


def thread_count(default: int = 1) -> int:
    """Worker cap from ``ENTROFLOW_THREADS`` (at least 1)."""
    try:
        return max(1, int(os.environ.get("ENTROFLOW_THREADS", default)))
    except ValueError:
        return max(1, default)


def run_checks(tasks: Sequence[Callable[[], CheckResult]], workers: Optional[int] = None) -> list:
    """Run zero-argument check callables, preserving order.

    Concurrency is capped by ``workers`` or ``ENTROFLOW_THREADS``.
    """
    workers = thread_count() if workers is None else max(1, workers)
    if workers == 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
        return list(ex.map(lambda f: f(), tasks))


def write_check_csv(result: CheckResult, path) -> None:
    """Per-time margins of a check (``t,margin``) when available."""
    t = result.details.get("t")
    m = result.details.get("margin")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "margin"))
        if t is None or m is None:
            if result.worst_t is not None:
                w.writerow((fmt(result.worst_t), fmt(result.worst_margin)))
            return
        ev = result.details.get("evaluated", np.ones(len(t), dtype=bool))
        for tk, mk, e in zip(t, m, ev):
            if e:
                w.writerow((fmt(tk), fmt(mk)))
