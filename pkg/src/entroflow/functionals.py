"""Entropy functionals of densities and heat flows.

Grid densities are integrated with the space's cell measures.  ``f = log u``
is formed with a floor of 1e-300, and nodes where ``u < 1e-14 max u`` (or
whose stencil touches such a node) are excluded from the Fisher and Gamma_2
integrals; the excluded mass is reported.  Closed-form kernels are
integrated with adaptive Gauss-Kronrod quadrature in radial form.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .heatflow import AnalyticDensity, Density, FlowResult
from .output import fmt as _fmt
from .space import UndefinedCurvatureError, WeightedSpace1D, effective_curvature

__all__ = [
    "EPS_POS",
    "EXCLUDE_REL",
    "TOL_DERIV",
    "FunctionalSeries",
    "DerivativeEstimates",
    "WNKTerms",
    "shannon_entropy",
    "fisher_information",
    "fisher_forms",
    "gamma2_integral",
    "wnk_decomposition",
    "w_entropy_N",
    "w_entropy_NK",
    "normalized_entropy",
    "normalized_entropy_NK",
    "entropy_power",
    "niw_rhs",
    "wang_entropy",
    "ye_entropy",
    "log_time_derivatives",
    "estimate_derivatives",
    "evaluate_series",
    "write_series_csv",
    "SERIES_HEADER",
]

EPS_POS = 1e-300
EXCLUDE_REL = 1e-14
TOL_DERIV = 1e-3
TOL_FISHER = 1e-3
TOL_RICHARDSON = 5e-2

SERIES_HEADER = ("t", "H", "I", "H_N", "H_NK", "entropy_power", "W_N", "W_NK", "wang_WK",
                 "ye_Ya", "gamma2", "T1", "T2", "T3", "dH_fd", "d2H_fd")


class FunctionalWarning(UserWarning):
    """Quadrature diagnostics (form disagreement, boundary-dominated integrals)."""


# ----------------------------------------------------------------------
# pointwise machinery on grids


@dataclass(frozen=True, eq=False)
class _Pointwise:
    space: WeightedSpace1D
    u: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    keep: np.ndarray
    excluded_mass: float
    # products with V' and V'' including the limits at singular nodes
    Vp_fp: np.ndarray
    Vpp_fp2: np.ndarray
    Vp2_fp2: np.ndarray

    @property
    def wu(self):
        return np.where(self.keep, self.space.volumes * self.u, 0.0)


def _pointwise(rho: Density) -> _Pointwise:
    sp = rho.space
    u = np.maximum(np.asarray(rho.values, float), 0.0)
    f = np.log(np.maximum(u, EPS_POS))
    fp, fpp = sp.derivatives(f)
    good = u >= EXCLUDE_REL * u.max()
    if sp.periodic:
        keep = good & np.roll(good, 1) & np.roll(good, -1)
    else:
        keep = good.copy()
        keep[1:] &= good[:-1]
        keep[:-1] &= good[1:]
        # one-sided stencils at regular ends reach three nodes inward
        for end, sl in ((0, slice(0, 4)), (1, slice(-4, None))):
            if sp.boundary[end] != "singular" and not np.all(good[sl]):
                keep[0 if end == 0 else -1] = False
    excluded = float(np.dot(sp.volumes[~keep], u[~keep]))
    with np.errstate(invalid="ignore"):
        Vp_fp = sp.dV * fp
        Vpp_fp2 = sp.d2V * fp**2
        Vp2_fp2 = (sp.dV * fp) ** 2
    a = sp.singular_strength
    for i in sp.singular:
        Vp_fp[i] = -a * fpp[i]
        Vpp_fp2[i] = a * fpp[i] ** 2
        Vp2_fp2[i] = a**2 * fpp[i] ** 2
    return _Pointwise(sp, u, f, fp, fpp, keep, excluded, Vp_fp, Vpp_fp2, Vp2_fp2)


def _band_fraction(pw: _Pointwise, integrand: np.ndarray) -> float:
    band = pw.space.boundary_band(0.05)
    tot = np.sum(np.abs(integrand))
    return float(np.sum(np.abs(integrand[band])) / tot) if tot > 0 else 0.0


# ----------------------------------------------------------------------
# single-density functionals


def shannon_entropy(rho) -> float:
    """``H = -int u log u dmu`` (0 log 0 = 0)."""
    if isinstance(rho, AnalyticDensity):
        return -rho.integrate(rho.log_u)
    u = np.maximum(np.asarray(rho.values, float), 0.0)
    pos = u > 0
    return float(-np.dot(rho.space.volumes[pos], u[pos] * np.log(u[pos])))


def _fisher_edge(rho: Density, pw: Optional[_Pointwise] = None) -> float:
    sp = rho.space
    pw = _pointwise(rho) if pw is None else pw
    du = sp.edge_difference(pw.u)
    df = sp.edge_difference(pw.f)
    good = pw.u >= EXCLUDE_REL * pw.u.max()
    ok = (good & np.roll(good, -1)) if sp.periodic else (good[:-1] & good[1:])
    return float(np.sum((sp.edge_weight * du * df / sp.h)[ok]))


def fisher_information(rho, form: str = "laplacian") -> float:
    """Fisher information ``int u |(log u)'|^2 dmu``.

    ``form="laplacian"`` evaluates ``-int u Delta log u dmu`` with the
    finite-volume Laplacian, written as the edge sum
    ``sum m_e (u_{i+1} - u_i)(f_{i+1} - f_i)/h``; ``form="gradient"``
    evaluates ``sum W (u')^2 / u`` with central differences.
    """
    if form not in ("laplacian", "gradient"):
        raise ValueError("form must be 'laplacian' or 'gradient'")
    if isinstance(rho, AnalyticDensity):
        if form == "gradient":
            return rho.integrate(lambda r: rho.grad_log(r) ** 2)
        N, t = rho.N, rho.t
        return -rho.integrate(lambda r: -1 / (2 * t) - (N - 1) / (2 * t) + 0 * r)
    if form == "laplacian":
        return _fisher_edge(rho)
    pw = _pointwise(rho)
    up, _ = rho.space.derivatives(pw.u)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = np.where(pw.keep & (pw.u > 0), up**2 / pw.u, 0.0)
    return float(np.dot(rho.space.volumes, integrand))


def fisher_forms(rho, tol: float = TOL_FISHER, warn: bool = True):
    """Both Fisher forms and their relative gap; warns when the gap exceeds ``tol``."""
    g = fisher_information(rho, "gradient")
    lap = fisher_information(rho, "laplacian")
    gap = abs(g - lap) / max(abs(lap), 1e-12)
    if warn and gap > tol and max(abs(g), abs(lap)) > 1e-10:
        warnings.warn(f"Fisher forms disagree (relative gap {gap:.2e})", FunctionalWarning,
                      stacklevel=2)
    return g, lap, gap


def gamma2_integral(rho, warn: bool = True) -> float:
    """``int Gamma_2(log u) u dmu`` with ``Gamma_2(f) = f''^2 + V'' f'^2``."""
    if isinstance(rho, AnalyticDensity):
        N, t = rho.N, rho.t
        # radial form: f''^2 + (N-1) (f'/r)^2 with f'/r = -1/(2t)
        return rho.integrate(lambda r: (1 + (N - 1)) / (4 * t**2) + 0 * r)
    pw = _pointwise(rho)
    integrand = np.where(pw.keep, pw.fpp**2 + pw.Vpp_fp2, 0.0) * pw.wu
    if warn and _band_fraction(pw, integrand) > 0.01:
        warnings.warn("Gamma_2 integral is boundary-dominated", FunctionalWarning, stacklevel=2)
    return float(integrand.sum())


@dataclass(frozen=True)
class WNKTerms:
    """The three integrals whose negative sum is dW_{N,K}/dt."""

    T1: float
    T2: float
    T3: float

    @property
    def total(self) -> float:
        return self.T1 + self.T2 + self.T3


def wnk_decomposition(rho, t: float, K: float, N: float) -> WNKTerms:
    """Three-term decomposition of dW_{N,K}/dt on a 1-D weighted space.

    ``T1 = 2t int (f'' + (1/t - K)/2)^2 u``,
    ``T2 = 2t int (Ric_{N,1} - K) f'^2 u`` and
    ``T3 = 2t/(N-1) int (V' f' - (N-1)(1/t - K)/2)^2 u``.

    Raises
    ------
    UndefinedCurvatureError
        For ``N = 1`` with a non-constant weight.
    """
    c = 0.5 * (1.0 / t - K)
    if isinstance(rho, AnalyticDensity):
        Nm = rho.N
        fpp = -1 / (2 * t)
        T1 = 2 * t * (fpp + c) ** 2
        # the radial cone model has Ric_{N,1} = 0 and V'f' = (Nm - 1)/(2t)
        T2 = 2 * t * (0.0 - K) * rho.integrate(lambda r: rho.grad_log(r) ** 2)
        if N == 1:
            if Nm != 1:
                raise UndefinedCurvatureError("T3 is undefined for N = 1 with a weight")
            T3 = 0.0
        else:
            T3 = 2 * t / (N - 1) * ((Nm - 1) / (2 * t) - (N - 1) * c) ** 2
        return WNKTerms(float(T1), float(T2), float(T3))
    sp = rho.space
    pw = _pointwise(rho)
    wu = pw.wu
    T1 = 2 * t * np.sum(wu * np.where(pw.keep, (pw.fpp + c) ** 2, 0.0))
    if N == 1:
        reg = sp.regular_mask
        if sp.singular or np.max(np.abs(sp.dV[reg]), initial=0.0) > 1e-12:
            raise UndefinedCurvatureError("T3 is undefined for N = 1 with a non-constant weight")
        k_fp2 = sp.d2V * pw.fp**2
        T3 = 0.0
    else:
        k_fp2 = pw.Vpp_fp2 - pw.Vp2_fp2 / (N - 1)
        if sp.k_eff_exact is not None:
            kx = np.array(effective_curvature(sp, N).k_eff)
            reg = sp.regular_mask & np.isfinite(kx)
            with np.errstate(invalid="ignore"):
                k_fp2 = np.where(reg, kx * pw.fp**2, k_fp2)
        sq = np.where(pw.keep, (pw.Vp_fp - (N - 1) * c) ** 2, 0.0)
        T3 = 2 * t / (N - 1) * np.sum(wu * sq)
    T2 = 2 * t * np.sum(wu * np.where(pw.keep, k_fp2 - K * pw.fp**2, 0.0))
    return WNKTerms(float(T1), float(T2), float(T3))


# ----------------------------------------------------------------------
# functionals of (t, H, I) series


def _arr(x):
    return np.asarray(x, dtype=float)


def normalized_entropy(t, H, N):
    """``H_N = H - (N/2)(1 + log 4 pi t)``."""
    t = _arr(t)
    return _arr(H) - (N / 2) * (1 + np.log(4 * np.pi * t))


def normalized_entropy_NK(t, H, N, K):
    """``H_{N,K} = H - (N/2) log(4 pi e t) + (N/2) K t (1 - K t / 6)``."""
    t = _arr(t)
    return _arr(H) - (N / 2) * np.log(4 * np.pi * np.e * t) + (N / 2) * K * t * (1 - K * t / 6)


def w_entropy_N(t, H, I, N):
    """``W_N = t I + H - (N/2) log(4 pi t) - N``."""
    t = _arr(t)
    return t * _arr(I) + _arr(H) - (N / 2) * np.log(4 * np.pi * t) - N


def w_entropy_NK(series, K: float, N: float):
    """``W_{N,K} = W_N + N K t - (N/4) K^2 t^2`` for a series with ``t, H, I``."""
    t = _arr(series.t)
    return w_entropy_N(t, series.H, series.I, N) + N * K * t - 0.25 * N * K**2 * t**2


def entropy_power(series, N: float):
    """Shannon entropy power ``exp(2H/N)``."""
    return np.exp(2 * _arr(series.H) / N)


def niw_rhs(series, K: float, N: float, dW_NK=None):
    """``(2 P/N) [ (2/N)(I - N(1-Kt)/(2t))^2 + dW_{N,K}/dt / t ]``.

    ``dW_NK`` defaults to the Gamma_2 route stored on the series.
    """
    t = _arr(series.t)
    I = _arr(series.I)
    P = entropy_power(series, N)
    if dW_NK is None:
        dW_NK = series.dW_NK_route
    return (2 * P / N) * ((2 / N) * (I - N * (1 - K * t) / (2 * t)) ** 2 + _arr(dW_NK) / t)


def _wang_coeffs(t, K):
    """``(e^{2kt}-1)/(2k)`` and the curvature term with ``k = -K``."""
    k = -K
    t = _arr(t)
    x = 2 * k * t
    c = np.expm1(x) / (2 * k)
    corr = np.log(x / np.expm1(x)) - np.expm1(x)
    return c, corr


def wang_entropy(series, K: float, N: float):
    """Wang's entropy with curvature lower bound ``K``.

    Evaluates ``c H' + H - (N/2) log(4 pi t) + (N/2)[log(2kt/(e^{2kt}-1))
    - (e^{2kt}-1)] - N`` with ``c = (e^{2kt}-1)/(2k)`` and ``k = -K`` (the
    formula is nonincreasing along the flow when ``Ric >= -k``).  For
    ``|K| t < 1e-6`` the value of ``W_N`` is returned.
    """
    t = _arr(series.t)
    H, I = _arr(series.H), _arr(series.I)
    W_N = w_entropy_N(t, H, I, N)
    if K == 0:
        return W_N
    small = np.abs(K) * t < 1e-6
    with np.errstate(divide="ignore", invalid="ignore"):
        c, corr = _wang_coeffs(t, K)
        val = c * I + H - (N / 2) * np.log(4 * np.pi * t) + (N / 2) * corr - N
    return np.where(small, W_N, val)


def _wang_route_derivative(t, I, d2H, K, N):
    """dW_K/dt from H' and H'' (exact differentiation of the formula)."""
    if K == 0:
        return t * d2H + 2 * I - N / (2 * t)
    k = -K
    e = np.exp(2 * k * t)
    return np.expm1(2 * k * t) / (2 * k) * d2H + (e + 1) * I - N * k * e**2 / np.expm1(2 * k * t)


def ye_entropy(series, a: float, K: float, N: float, check: bool = True):
    """Ye's entropy ``H + (N/2) log(I/4 + a) + (N K - 4 a) t``.

    Raises
    ------
    ValueError
        If ``a K > 0`` or ``omega = I/4 + a <= 0`` somewhere (``check=True``).
    """
    if check and a * K > 0:
        raise ValueError("Ye's entropy requires a K <= 0")
    t = _arr(series.t)
    omega = _arr(series.I) / 4 + a
    if check and np.any(omega <= 0):
        raise ValueError("omega = I/4 + a must be positive")
    with np.errstate(divide="ignore", invalid="ignore"):
        return _arr(series.H) + (N / 2) * np.log(np.where(omega > 0, omega, np.nan)) + (N * K - 4 * a) * t


# ----------------------------------------------------------------------
# time derivatives


def _fornberg(x0: float, xs: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights for derivatives 0..m at ``x0`` (Fornberg)."""
    n = xs.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _stencil_derivatives(s: np.ndarray, y: np.ndarray, width: int):
    n = s.size
    d1 = np.empty(n)
    d2 = np.empty(n)
    half = width // 2
    for k in range(n):
        lo = min(max(k - half, 0), n - width)
        idx = np.arange(lo, lo + width)
        w = _fornberg(s[k], s[idx], 2)
        d1[k] = w[:, 1] @ y[idx]
        d2[k] = w[:, 2] @ y[idx]
    return d1, d2


def log_time_derivatives(t: Sequence[float], y: Sequence[float]):
    """First and second t-derivatives of ``y(t)`` on a (log-spaced) grid.

    Derivatives are taken in ``s = log t`` with 5-point stencils (one-sided
    near the ends) and converted by ``y' = y_s/t``,
    ``y'' = (y_ss - y_s)/t^2``.  The 3-point estimates are returned as well;
    their gap to the 5-point values is the Richardson disagreement.

    Returns
    -------
    d1, d2 : ndarray
        5-point estimates.
    gap1, gap2 : ndarray
        ``|5-point - 3-point|`` for each derivative.
    """
    t = _arr(t)
    y = _arr(y)
    if t.size < 5:
        raise ValueError("need at least 5 time points")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("times must be positive and increasing")
    s = np.log(t)
    g1, g2 = _stencil_derivatives(s, y, 5)
    h1, h2 = _stencil_derivatives(s, y, 3)
    d1 = g1 / t
    d2 = (g2 - g1) / t**2
    e1 = h1 / t
    e2 = (h2 - h1) / t**2
    return d1, d2, np.abs(d1 - e1), np.abs(d2 - e2)


@dataclass(frozen=True, eq=False)
class DerivativeEstimates:
    """Finite-difference and identity-route derivatives of a series."""

    t: np.ndarray
    dH_fd: np.ndarray
    dH_id: np.ndarray
    d2H_fd: np.ndarray
    d2H_id: np.ndarray
    dW_N: np.ndarray
    dW_NK: np.ndarray
    dN: np.ndarray
    d2N: np.ndarray
    gap_dH: np.ndarray
    gap_d2H: np.ndarray
    gap_d2N: np.ndarray
    gap_dN: np.ndarray
    method: dict = field(default_factory=dict)

    @property
    def interior(self) -> np.ndarray:
        """Mask of times whose 5-point stencil is centred."""
        m = np.zeros(self.t.size, dtype=bool)
        m[2:-2] = True
        return m

    def dH_residual(self):
        return np.abs(self.dH_fd - self.dH_id) / (1 + np.abs(self.dH_id))

    def d2H_residual(self):
        return np.abs(self.d2H_fd - self.d2H_id) / (1 + np.abs(self.d2H_fd))

    def richardson_flag(self, tol: float = TOL_RICHARDSON) -> bool:
        """True when the 5- and 3-point estimates of H'' disagree beyond ``tol``."""
        rel = self.gap_d2H / (1 + np.abs(self.d2H_fd))
        return bool(np.any(rel[self.interior] > tol))


# ----------------------------------------------------------------------
# series


@dataclass(frozen=True, eq=False)
class FunctionalSeries:
    """Per-time functionals of one flow (see ``SERIES_HEADER`` for the CSV)."""

    t: np.ndarray
    H: np.ndarray
    I: np.ndarray
    I_gradient: np.ndarray
    gamma2: np.ndarray
    T1: np.ndarray
    T2: np.ndarray
    T3: np.ndarray
    excluded_mass: np.ndarray
    N: float
    K: float
    a: float
    wang_K: float
    derivatives: Optional[DerivativeEstimates] = None
    boundary_mass: Optional[np.ndarray] = None

    @property
    def H_N(self):
        return normalized_entropy(self.t, self.H, self.N)

    @property
    def H_NK(self):
        return normalized_entropy_NK(self.t, self.H, self.N, self.K)

    @property
    def entropy_power(self):
        return entropy_power(self, self.N)

    @property
    def W_N(self):
        return w_entropy_N(self.t, self.H, self.I, self.N)

    @property
    def W_NK(self):
        return w_entropy_NK(self, self.K, self.N)

    @property
    def wang_WK(self):
        return wang_entropy(self, self.wang_K, self.N)

    @property
    def ye_Ya(self):
        if self.a * self.K > 0:
            return np.full(self.t.size, np.nan)
        return ye_entropy(self, self.a, self.K, self.N, check=False)

    @property
    def omega(self):
        return self.I / 4 + self.a

    @property
    def dW_N_route(self):
        """Gamma_2 route: ``t H'' + 2 I - N/(2t)`` with ``H'' = -2 Gamma_2``."""
        return -2 * self.t * self.gamma2 + 2 * self.I - self.N / (2 * self.t)

    @property
    def dW_NK_route(self):
        t = self.t
        return self.dW_N_route + self.N * self.K - 0.5 * self.N * self.K**2 * t

    @property
    def dW_NK_terms(self):
        """``-(T1 + T2 + T3)``."""
        return -(self.T1 + self.T2 + self.T3)

    @property
    def fisher_gap(self):
        return np.abs(self.I_gradient - self.I) / np.maximum(np.abs(self.I), 1e-12)

    def column(self, name: str) -> np.ndarray:
        if name == "dH_fd":
            return self.derivatives.dH_fd if self.derivatives else np.full(self.t.size, np.nan)
        if name == "d2H_fd":
            return self.derivatives.d2H_fd if self.derivatives else np.full(self.t.size, np.nan)
        return np.asarray(getattr(self, name), dtype=float)


def _evaluate_one(rho, t, N, K):
    H = shannon_entropy(rho)
    if isinstance(rho, AnalyticDensity):
        I = fisher_information(rho, "laplacian")
        Ig = fisher_information(rho, "gradient")
        excl = 0.0
    else:
        pw = _pointwise(rho)
        I = _fisher_edge(rho, pw)
        up, _ = rho.space.derivatives(pw.u)
        with np.errstate(divide="ignore", invalid="ignore"):
            Ig = float(np.dot(rho.space.volumes,
                              np.where(pw.keep & (pw.u > 0), up**2 / pw.u, 0.0)))
        excl = pw.excluded_mass
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FunctionalWarning)
        g2 = gamma2_integral(rho)
    try:
        terms = wnk_decomposition(rho, t, K, N)
    except UndefinedCurvatureError:
        terms = WNKTerms(np.nan, np.nan, np.nan)
    return H, I, Ig, g2, terms.T1, terms.T2, terms.T3, excl


def evaluate_series(flow: FlowResult, N: Optional[float] = None, K: float = 0.0, a: float = 0.0,
                    wang_K: Optional[float] = None, derivatives: bool = True) -> FunctionalSeries:
    """Evaluate every functional at every stored time of ``flow``.

    Parameters
    ----------
    flow : FlowResult
    N : float, optional
        Synthetic dimension (defaults to the space's or the kernel's).
    K : float
        Curvature parameter for ``H_NK``, ``W_NK`` and the decomposition.
    a : float
        Ye's parameter.
    wang_K : float, optional
        Curvature lower bound for Wang's entropy (defaults to ``K``).
    derivatives : bool
        Populate :class:`DerivativeEstimates` (needs >= 5 times).
    """
    if N is None:
        N = flow.space.N if flow.space is not None else flow.densities[0].N
    N = float(N)
    rows = [_evaluate_one(rho, t, N, K) for rho, t in zip(flow.densities, flow.times)]
    cols = [np.array(c, dtype=float) for c in zip(*rows)]
    H, I, Ig, g2, T1, T2, T3, excl = cols
    series = FunctionalSeries(
        t=np.asarray(flow.times, float), H=H, I=I, I_gradient=Ig, gamma2=g2, T1=T1, T2=T2,
        T3=T3, excluded_mass=excl, N=N, K=float(K), a=float(a),
        wang_K=float(K if wang_K is None else wang_K),
        boundary_mass=np.asarray(flow.diagnostics.get("boundary_mass", np.zeros(len(flow))), float),
    )
    if derivatives and len(flow) >= 5:
        object.__setattr__(series, "derivatives", estimate_derivatives(series))
    return series


def estimate_derivatives(series: FunctionalSeries) -> DerivativeEstimates:
    """Finite-difference derivatives of H, W_N, W_NK and the entropy power."""
    t = series.t
    dH, d2H, g1, g2 = log_time_derivatives(t, series.H)
    dWN, _, _, _ = log_time_derivatives(t, series.W_N)
    dWNK, _, _, _ = log_time_derivatives(t, series.W_NK)
    dN, d2N, gN1, gN = log_time_derivatives(t, series.entropy_power)
    return DerivativeEstimates(
        t=t, dH_fd=dH, dH_id=series.I.copy(), d2H_fd=d2H, d2H_id=-2 * series.gamma2,
        dW_N=dWN, dW_NK=dWNK, dN=dN, d2N=d2N, gap_dH=g1, gap_d2H=g2, gap_d2N=gN,
        gap_dN=gN1,
        method={"variable": "log t", "stencil": 5, "compare_stencil": 3, "order": 4},
    )


def write_series_csv(series: FunctionalSeries, path) -> None:
    """Write the series with the documented header."""
    cols = [series.column(name) for name in SERIES_HEADER]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SERIES_HEADER)
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])
