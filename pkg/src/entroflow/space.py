"""Weighted one-dimensional model geometries.

A :class:`WeightedSpace1D` is a uniform grid on an interval, half-line,
symmetric line segment or circle, carrying the measure ``dmu = e^{-V} dx``
and a synthetic dimension ``N``.  The grid is a finite-volume
discretization: every node owns a cell whose measure is stored in
``volumes``, and neighbouring cells exchange flux through the analytic
weight at the cell interface (``edge_weight``).  Nodes where the weight
vanishes (cone vertices, sphere poles) are kept as unknowns with their
exact half-cell mass.

The module also provides curvature, ball-volume and distortion helpers
used by the verification checks.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

__all__ = [
    "WeightedSpace1D",
    "CurvatureReport",
    "KappaEstimate",
    "SpaceError",
    "UndefinedCurvatureError",
    "TruncationWarning",
    "build_model_space",
    "cone_half_line",
    "cone_full_line",
    "sphere_zonal",
    "hyperbolic_zonal",
    "gaussian_weight",
    "circle",
    "custom",
    "space_from_spec",
    "effective_curvature",
    "fd_potential_derivatives",
    "ball_volume",
    "omega_N",
    "volume_ratio_kappa",
    "noncollapsing_ratio",
    "bishop_gromov_margin",
    "laplacian_dist_sq_check",
    "distortion",
    "MIN_GRID_SIZE",
]

MIN_GRID_SIZE = 16
PRESETS = (
    "cone_half_line",
    "cone_full_line",
    "sphere_zonal",
    "hyperbolic_zonal",
    "gaussian_weight",
    "circle",
    "custom",
)


class SpaceError(ValueError):
    """Invalid space parameters.  ``key`` names the offending input field."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class UndefinedCurvatureError(ValueError):
    """Raised when Ric_{N,1} is requested for N = 1 and a non-constant weight."""


class TruncationWarning(UserWarning):
    """A ball or flow reaches the artificial truncation boundary."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class WeightedSpace1D:
    """Discretized weighted 1-D space.

    Attributes
    ----------
    kind : str
        ``"interval"``, ``"half_line"``, ``"line"`` or ``"circle"``.
    nodes : ndarray
        Grid points, uniform step ``h``.  For the circle the last node is
        ``L - h`` and ``x = L`` is identified with ``x = 0``.
    h : float
        Grid step.
    V, dV, d2V : ndarray
        Log-weight and its first two derivatives at the nodes.  At singular
        nodes ``V = +inf`` and the derivatives are ``nan``.
    weight : ndarray
        ``m = e^{-V}`` at the nodes.
    edge_weight : ndarray
        ``m`` at cell interfaces ``x_i + h/2`` (length ``n - 1``, or ``n``
        for the circle, whose last edge joins the last node to node 0).
    volumes : ndarray
        Cell measures; ``sum(volumes * u)`` approximates ``int u dmu``.
    N : float
        Synthetic dimension.
    boundary : tuple of str
        Per endpoint: ``"neumann"``, ``"periodic"`` or ``"singular"``.
    truncated : tuple of bool
        Whether each end is an artificial truncation of an unbounded domain.
    singular : tuple of int
        Indices of singular nodes (where ``m`` vanishes).
    singular_strength : float
        Coefficient ``a`` with ``V ~ -a log(dist)`` near singular nodes.
    k_eff_exact : ndarray or None
        Analytic ``V'' - V'^2/(N-1)`` for presets, ``None`` otherwise.
    center : float
        Natural base point (vertex, pole or origin).
    preset : str
        Name of the preset that built the space.
    params : dict
        Preset parameters, for reporting.
    """

    kind: str
    nodes: np.ndarray
    h: float
    V: np.ndarray
    dV: np.ndarray
    d2V: np.ndarray
    weight: np.ndarray
    edge_weight: np.ndarray
    volumes: np.ndarray
    N: float
    boundary: tuple
    truncated: tuple = (False, False)
    singular: tuple = ()
    singular_strength: float = 0.0
    k_eff_exact: Optional[np.ndarray] = None
    center: float = 0.0
    preset: str = "custom"
    params: dict = field(default_factory=dict)
    weight_fn: Optional[Callable] = field(default=None, repr=False)
    n_geom: int = 1

    # ------------------------------------------------------------------
    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def periodic(self) -> bool:
        return self.kind == "circle"

    @property
    def length(self) -> float:
        """Domain length (circumference for the circle)."""
        if self.periodic:
            return self.size * self.h
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def total_mass(self) -> float:
        return float(self.volumes.sum())

    @property
    def regular_mask(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[list(self.singular)] = False
        return mask

    def with_N(self, N: float) -> "WeightedSpace1D":
        """Return a copy with a different synthetic dimension."""
        if N < 1:
            raise SpaceError("synthetic dimension N must be >= 1", key="N")
        k = None
        if self.k_eff_exact is not None and self.weight_fn is not None:
            k = _preset_keff(self.preset, self.params, self.nodes, N)
        return replace(self, N=float(N), k_eff_exact=k)

    def distance(self, x0: float) -> np.ndarray:
        """d(x0, x_i) for all nodes (arc length on the circle)."""
        d = np.abs(self.nodes - x0)
        if self.periodic:
            L = self.length
            d = np.mod(d, L)
            d = np.minimum(d, L - d)
        return d

    def nearest_node(self, x0: float) -> int:
        return int(np.argmin(self.distance(x0)))

    def boundary_band(self, fraction: float = 0.05) -> np.ndarray:
        """Mask of nodes in the outer ``fraction`` of each truncated end."""
        band = np.zeros(self.size, dtype=bool)
        if self.periodic:
            return band
        width = fraction * self.length
        if self.truncated[0]:
            band |= self.nodes <= self.nodes[0] + width
        if self.truncated[1]:
            band |= self.nodes >= self.nodes[-1] - width
        return band

    # ------------------------------------------------------------------
    # discrete operators
    def apply_laplacian(self, u: np.ndarray) -> np.ndarray:
        """Finite-volume weighted Laplacian (divergence form, zero flux)."""
        u = np.asarray(u, dtype=float)
        flux = self.edge_flux(u)
        out = np.zeros_like(u)
        if self.periodic:
            out += flux
            out -= np.roll(flux, 1)
        else:
            out[:-1] += flux
            out[1:] -= flux
        return out / self.volumes

    def edge_flux(self, u: np.ndarray) -> np.ndarray:
        """m_{i+1/2} (u_{i+1} - u_i) / h on every edge."""
        if self.periodic:
            du = np.roll(u, -1) - u
        else:
            du = np.diff(u)
        return self.edge_weight * du / self.h

    def edge_difference(self, u: np.ndarray) -> np.ndarray:
        if self.periodic:
            return np.roll(u, -1) - u
        return np.diff(u)

    def stiffness_bands(self):
        """Diagonal and off-diagonal of the symmetric stiffness matrix ``A``.

        ``A`` satisfies ``(A u)_i = -W_i (L u)_i``; for the circle the
        off-diagonal has length ``n`` and its last entry couples node
        ``n-1`` to node 0.
        """
        c = self.edge_weight / self.h
        n = self.size
        diag = np.zeros(n)
        if self.periodic:
            diag += c + np.roll(c, 1)
        else:
            diag[:-1] += c
            diag[1:] += c
        return diag, -c

    def derivatives(self, f: np.ndarray):
        """Pointwise f' and f'' by second-order central differences.

        Singular ends use even reflection, regular ends one-sided
        second-order stencils; the circle is periodic.
        """
        f = np.asarray(f, dtype=float)
        h = self.h
        if self.periodic:
            fp = (np.roll(f, -1) - np.roll(f, 1)) / (2 * h)
            fpp = (np.roll(f, -1) - 2 * f + np.roll(f, 1)) / h**2
            return fp, fpp
        fp = np.empty_like(f)
        fpp = np.empty_like(f)
        fp[1:-1] = (f[2:] - f[:-2]) / (2 * h)
        fpp[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h**2
        for end, (i, j, s) in enumerate(((0, 1, 1), (-1, -2, -1))):
            if self.boundary[end] == "singular":
                fp[i] = 0.0
                fpp[i] = 2 * (f[j] - f[i]) / h**2
            else:
                k = np.array([i, i + s, i + 2 * s, i + 3 * s])
                fp[i] = s * (-3 * f[k[0]] + 4 * f[k[1]] - f[k[2]]) / (2 * h)
                fpp[i] = (2 * f[k[0]] - 5 * f[k[1]] + 4 * f[k[2]] - f[k[3]]) / h**2
        return fp, fpp


# ----------------------------------------------------------------------
# preset construction


def _check_grid(grid_size):
    if not isinstance(grid_size, (int, np.integer)) or grid_size < MIN_GRID_SIZE:
        raise SpaceError(f"grid_size must be an integer >= {MIN_GRID_SIZE}", key="grid_size")


def _check_N(N):
    if N is None or not np.isfinite(N) or N < 1:
        raise SpaceError("synthetic dimension N must be finite and >= 1", key="N")


def _check_trunc(b):
    if b is None or not np.isfinite(b) or b <= 0:
        raise SpaceError("truncation must be a positive number", key="truncation")


def _half_cell(m: Callable, a: float, b: float) -> float:
    val, _ = integrate.quad(m, a, b, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def _assemble(kind, x, h, V, dV, d2V, m_fn, N, boundary, truncated, singular,
              strength, k_exact, center, preset, params) -> WeightedSpace1D:
    n = x.size
    m = np.exp(-V)
    if kind == "circle":
        mids = x + h / 2
    else:
        mids = x[:-1] + h / 2
    me = m_fn(mids)
    W = h * m
    if kind != "circle":
        for end, idx in ((0, 0), (1, n - 1)):
            if boundary[end] == "singular":
                lo, hi = (x[0], x[0] + h / 2) if end == 0 else (x[-1] - h / 2, x[-1])
                W[idx] = _half_cell(m_fn, lo, hi)
            else:
                W[idx] *= 0.5
    for i in singular:
        if 0 < i < n - 1:
            W[i] = _half_cell(m_fn, x[i] - h / 2, x[i]) + _half_cell(m_fn, x[i], x[i] + h / 2)
    if np.any(~np.isfinite(W)) or np.any(W <= 0):
        raise SpaceError("weight must be positive at all non-singular nodes", key="custom_V")
    if np.any(me <= 0) or np.any(~np.isfinite(me)):
        raise SpaceError("weight must be positive between nodes", key="custom_V")
    return WeightedSpace1D(
        kind=kind, nodes=_frozen(x), h=float(h), V=_frozen(V), dV=_frozen(dV),
        d2V=_frozen(d2V), weight=_frozen(m), edge_weight=_frozen(me),
        volumes=_frozen(W), N=float(N), boundary=tuple(boundary),
        truncated=tuple(truncated), singular=tuple(int(i) for i in singular),
        singular_strength=float(strength),
        k_eff_exact=None if k_exact is None else _frozen(k_exact),
        center=float(center), preset=preset, params=dict(params), weight_fn=m_fn,
    )


def _preset_keff(preset, params, x, N):
    """Analytic V'' - V'^2/(N-1); limits at singular nodes where finite."""
    N = float(N)
    with np.errstate(divide="ignore", invalid="ignore"):
        if preset == "circle":
            return np.zeros_like(x)
        if preset == "gaussian_weight":
            if N == 1:
                return None
            return 1.0 - x**2 / (N - 1)
        if preset in ("cone_half_line", "cone_full_line"):
            a = params["N"] - 1.0
            if a == 0:
                return np.zeros_like(x)
            if N == 1:
                return None
            k = (a - a**2 / (N - 1)) / x**2
            k[x == 0] = 0.0 if np.isclose(a, N - 1) else np.copysign(np.inf, a - a**2 / (N - 1))
            return k
        if preset in ("sphere_zonal", "hyperbolic_zonal"):
            a = params["n"] - 1.0
            if N == 1:
                return None
            if preset == "sphere_zonal":
                s2, c2 = np.sin(x) ** 2, np.cos(x) ** 2
                k = (a * (N - 1) - a**2 * c2) / ((N - 1) * s2)
                pole_val = a if np.isclose(a, N - 1) else -np.inf if a > N - 1 else np.inf
            else:
                s2, c2 = np.sinh(x) ** 2, np.cosh(x) ** 2
                k = (a * (N - 1) - a**2 * c2) / ((N - 1) * s2)
                pole_val = -a if np.isclose(a, N - 1) else -np.inf if a > N - 1 else np.inf
            k[~np.isfinite(k)] = pole_val
            if np.isclose(a, N - 1):
                # the closed form collapses to a constant; avoid cancellation error
                k[:] = a if preset == "sphere_zonal" else -a
            return k
    return None


def cone_half_line(N: float, grid_size: int, truncation: float = 10.0) -> WeightedSpace1D:
    """Metric measure cone ``([0, b], x^{N-1} dx)``."""
    _check_N(N)
    _check_grid(grid_size)
    _check_trunc(truncation)
    a = N - 1.0
    x = np.linspace(0.0, truncation, grid_size)
    h = x[1] - x[0]
    with np.errstate(divide="ignore"):
        V = -a * np.log(x) if a else np.zeros_like(x)
        dV = -a / x if a else np.zeros_like(x)
        d2V = a / x**2 if a else np.zeros_like(x)
    sing = (0,) if a > 0 else ()
    if a > 0:
        V[0], dV[0], d2V[0] = np.inf, np.nan, np.nan
    m_fn = (lambda y: np.abs(y) ** a) if a else (lambda y: np.ones_like(np.asarray(y, float)))
    params = {"N": float(N), "truncation": float(truncation)}
    return _assemble(
        "half_line", x, h, V, dV, d2V, m_fn, N,
        ("singular" if a > 0 else "neumann", "neumann"), (False, True), sing, a,
        _preset_keff("cone_half_line", params, x, N), 0.0, "cone_half_line", params,
    )


def cone_full_line(N: float, grid_size: int, truncation: float = 10.0) -> WeightedSpace1D:
    """Two-sided cone ``([-b, b], |x|^{N-1} dx)``; ``N = 1`` is the line."""
    _check_N(N)
    _check_grid(grid_size)
    _check_trunc(truncation)
    if grid_size % 2 == 0:
        grid_size += 1  # keep the origin on the grid
    a = N - 1.0
    x = np.linspace(-truncation, truncation, grid_size)
    x[grid_size // 2] = 0.0
    h = x[1] - x[0]
    with np.errstate(divide="ignore"):
        V = -a * np.log(np.abs(x)) if a else np.zeros_like(x)
        dV = -a / x if a else np.zeros_like(x)
        d2V = a / x**2 if a else np.zeros_like(x)
    sing = (grid_size // 2,) if a > 0 else ()
    for i in sing:
        V[i], dV[i], d2V[i] = np.inf, np.nan, np.nan
    m_fn = (lambda y: np.abs(y) ** a) if a else (lambda y: np.ones_like(np.asarray(y, float)))
    params = {"N": float(N), "truncation": float(truncation)}
    return _assemble(
        "line", x, h, V, dV, d2V, m_fn, N, ("neumann", "neumann"), (True, True),
        sing, a, _preset_keff("cone_full_line", params, x, N), 0.0, "cone_full_line", params,
    )


def sphere_zonal(n: int, grid_size: int, N: Optional[float] = None) -> WeightedSpace1D:
    """Zonal reduction of the round sphere S^n: ``([0, pi], sin^{n-1} dtheta)``."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise SpaceError("sphere_zonal needs an integer n >= 2", key="n")
    N = float(n) if N is None else N
    _check_N(N)
    _check_grid(grid_size)
    if N < n:
        raise SpaceError("synthetic dimension must be >= n for sphere_zonal", key="N")
    a = n - 1.0
    x = np.linspace(0.0, np.pi, grid_size)
    x[-1] = np.pi
    h = x[1] - x[0]
    s = np.sin(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        V = -a * np.log(s)
        dV = -a * np.cos(x) / s
        d2V = a / s**2
    for i in (0, grid_size - 1):
        V[i], dV[i], d2V[i] = np.inf, np.nan, np.nan
    m_fn = lambda y: np.abs(np.sin(y)) ** a
    params = {"n": int(n), "N": float(N)}
    return _assemble(
        "interval", x, h, V, dV, d2V, m_fn, N, ("singular", "singular"), (False, False),
        (0, grid_size - 1), a, _preset_keff("sphere_zonal", params, x, N), 0.0,
        "sphere_zonal", params,
    )


def hyperbolic_zonal(n: int, b: float, grid_size: int, N: Optional[float] = None) -> WeightedSpace1D:
    """Radial reduction of hyperbolic space H^n: ``([0, b], sinh^{n-1} dr)``."""
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise SpaceError("hyperbolic_zonal needs an integer n >= 2", key="n")
    N = float(n) if N is None else N
    _check_N(N)
    _check_grid(grid_size)
    _check_trunc(b)
    if N < n:
        raise SpaceError("synthetic dimension must be >= n for hyperbolic_zonal", key="N")
    a = n - 1.0
    x = np.linspace(0.0, b, grid_size)
    h = x[1] - x[0]
    s = np.sinh(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        V = -a * np.log(s)
        dV = -a * np.cosh(x) / s
        d2V = a / s**2
    V[0], dV[0], d2V[0] = np.inf, np.nan, np.nan
    m_fn = lambda y: np.abs(np.sinh(y)) ** a
    params = {"n": int(n), "N": float(N), "truncation": float(b)}
    return _assemble(
        "half_line", x, h, V, dV, d2V, m_fn, N, ("singular", "neumann"), (False, True),
        (0,), a, _preset_keff("hyperbolic_zonal", params, x, N), 0.0, "hyperbolic_zonal", params,
    )


def gaussian_weight(b: float, grid_size: int, N: float) -> WeightedSpace1D:
    """Line segment ``[-b, b]`` with the Gaussian weight ``V = x^2/2``."""
    _check_N(N)
    _check_grid(grid_size)
    _check_trunc(b)
    x = np.linspace(-b, b, grid_size)
    h = x[1] - x[0]
    V = 0.5 * x**2
    params = {"N": float(N), "truncation": float(b)}
    return _assemble(
        "line", x, h, V, x.copy(), np.ones_like(x), lambda y: np.exp(-0.5 * np.asarray(y) ** 2),
        N, ("neumann", "neumann"), (True, True), (), 0.0,
        _preset_keff("gaussian_weight", params, x, N), 0.0, "gaussian_weight", params,
    )


def circle(L: float = 2 * np.pi, grid_size: int = 256, N: float = 1.0) -> WeightedSpace1D:
    """Flat circle of circumference ``L`` with ``grid_size`` distinct nodes."""
    _check_N(N)
    _check_grid(grid_size)
    if not np.isfinite(L) or L <= 0:
        raise SpaceError("circumference must be positive", key="L")
    h = L / grid_size
    x = h * np.arange(grid_size)
    z = np.zeros_like(x)
    params = {"L": float(L), "N": float(N)}
    return _assemble(
        "circle", x, h, z, z.copy(), z.copy(), lambda y: np.ones_like(np.asarray(y, float)),
        N, ("periodic", "periodic"), (False, False), (), 0.0, np.zeros_like(x), 0.0,
        "circle", params,
    )


def _second_order_fd(V: np.ndarray, h: float):
    dV = np.gradient(V, h, edge_order=2)
    d2V = np.empty_like(V)
    d2V[1:-1] = (V[2:] - 2 * V[1:-1] + V[:-2]) / h**2
    d2V[0] = (2 * V[0] - 5 * V[1] + 4 * V[2] - V[3]) / h**2
    d2V[-1] = (2 * V[-1] - 5 * V[-2] + 4 * V[-3] - V[-4]) / h**2
    return dV, d2V


def custom(table: Sequence, grid_size: int, N: float) -> WeightedSpace1D:
    """Interval space from a table of ``(x, V)`` pairs.

    The table is interpolated by a cubic spline onto ``grid_size`` uniform
    nodes spanning the table's range; V' and V'' come from central
    differences with one-sided second-order stencils at the ends.
    """
    _check_N(N)
    _check_grid(grid_size)
    try:
        arr = np.asarray(table, dtype=float)
    except (TypeError, ValueError):
        raise SpaceError("custom_V must be a list of [x, V] pairs", key="custom_V")
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 4:
        raise SpaceError("custom_V must hold at least 4 [x, V] pairs", key="custom_V")
    if not np.all(np.isfinite(arr)):
        raise SpaceError("custom_V has non-finite V (nonpositive weight)", key="custom_V")
    xs, Vs = arr[:, 0], arr[:, 1]
    if np.any(np.diff(xs) <= 0):
        raise SpaceError("custom_V x values must be strictly increasing", key="custom_V")
    spline = CubicSpline(xs, Vs)
    x = np.linspace(xs[0], xs[-1], grid_size)
    h = x[1] - x[0]
    V = spline(x)
    dV, d2V = _second_order_fd(V, h)
    m_fn = lambda y: np.exp(-spline(y))
    params = {"N": float(N), "table_size": int(arr.shape[0])}
    return _assemble(
        "interval", x, h, V, dV, d2V, m_fn, N, ("neumann", "neumann"), (False, False),
        (), 0.0, None, float(x[0]), "custom", params,
    )


def build_model_space(preset: str, grid_size: int, truncation: Optional[float] = None,
                      N: Optional[float] = None, n: Optional[int] = None,
                      L: Optional[float] = None, custom_V=None) -> WeightedSpace1D:
    """Build a preset space by name.

    Parameters
    ----------
    preset : str
        One of ``cone_half_line``, ``cone_full_line``, ``sphere_zonal``,
        ``hyperbolic_zonal``, ``gaussian_weight``, ``circle``, ``custom``.
    grid_size : int
        Number of nodes (at least 16).
    truncation : float, optional
        Truncation radius ``b`` for unbounded domains (default 10).
    N : float, optional
        Synthetic dimension.  Required for cones, the Gaussian weight and
        custom tables; defaults to ``n`` for zonal presets and 1 for the circle.
    n : int, optional
        Geometric dimension of the sphere or hyperbolic space.
    L : float, optional
        Circle circumference (default ``2*pi``).
    custom_V : list of [x, V], optional
        Log-weight table for ``custom``.
    """
    b = 10.0 if truncation is None else truncation
    if preset == "cone_half_line":
        return cone_half_line(N, grid_size, b)
    if preset == "cone_full_line":
        return cone_full_line(N, grid_size, b)
    if preset == "sphere_zonal":
        return sphere_zonal(n, grid_size, N)
    if preset == "hyperbolic_zonal":
        return hyperbolic_zonal(n, b, grid_size, N)
    if preset == "gaussian_weight":
        return gaussian_weight(b, grid_size, N)
    if preset == "circle":
        return circle(2 * np.pi if L is None else L, grid_size, 1.0 if N is None else N)
    if preset == "custom":
        if custom_V is None:
            raise SpaceError("custom preset requires custom_V", key="custom_V")
        return custom(custom_V, grid_size, N)
    raise SpaceError(f"unknown preset {preset!r}", key="preset")


def space_from_spec(spec: dict) -> WeightedSpace1D:
    """Build a space from its JSON description."""
    if not isinstance(spec, dict):
        raise SpaceError("space spec must be an object", key="space")
    if "preset" not in spec:
        raise SpaceError("missing preset", key="preset")
    if "grid_size" not in spec:
        raise SpaceError("missing grid_size", key="grid_size")
    return build_model_space(
        spec["preset"], spec["grid_size"], spec.get("truncation"), spec.get("N"),
        spec.get("n"), spec.get("L"), spec.get("custom_V"),
    )


# ----------------------------------------------------------------------
# curvature


@dataclass(frozen=True)
class CurvatureReport:
    """Pointwise Bakry-Emery curvature Ric_{N,1} and its infimum."""

    k_eff: np.ndarray
    k_inf: float
    is_constant: bool
    N: float


def fd_potential_derivatives(space: WeightedSpace1D):
    """V' and V'' recomputed from the V table by central differences.

    Singular nodes are returned as ``nan``.
    """
    V = np.array(space.V, dtype=float)
    h = space.h
    if space.periodic:
        return ((np.roll(V, -1) - np.roll(V, 1)) / (2 * h),
                (np.roll(V, -1) - 2 * V + np.roll(V, 1)) / h**2)
    dV = np.full_like(V, np.nan)
    d2V = np.full_like(V, np.nan)
    with np.errstate(invalid="ignore"):
        dV[1:-1] = (V[2:] - V[:-2]) / (2 * h)
        d2V[1:-1] = (V[2:] - 2 * V[1:-1] + V[:-2]) / h**2
    bad = ~np.isfinite(V)
    bad_nb = bad | np.roll(bad, 1) | np.roll(bad, -1)
    dV[bad_nb] = np.nan
    d2V[bad_nb] = np.nan
    return dV, d2V


def effective_curvature(space: WeightedSpace1D, N: Optional[float] = None,
                        rtol: float = 1e-6) -> CurvatureReport:
    """Compute ``Ric_{N,1} = V'' - V'^2/(N-1)`` at every node.

    Raises
    ------
    UndefinedCurvatureError
        If ``N = 1`` and ``V'`` is not identically zero.
    """
    N = space.N if N is None else float(N)
    reg = space.regular_mask
    if N == 1:
        if np.max(np.abs(space.dV[reg]), initial=0.0) > 1e-12 or space.singular:
            raise UndefinedCurvatureError("Ric_{1,1} is undefined for a non-constant weight")
        k = np.array(space.d2V, dtype=float)
    elif space.k_eff_exact is not None and N == space.N:
        k = np.array(space.k_eff_exact, dtype=float)
    elif space.weight_fn is not None and space.preset != "custom":
        k = _preset_keff(space.preset, space.params, np.asarray(space.nodes), N)
    else:
        with np.errstate(invalid="ignore"):
            k = space.d2V - space.dV**2 / (N - 1)
    vals = k[reg]
    vals = vals[np.isfinite(vals)]
    k_inf = float(vals.min()) if vals.size else float("nan")
    spread = float(vals.max() - vals.min()) if vals.size else 0.0
    const = spread <= rtol * max(1.0, abs(k_inf))
    return CurvatureReport(k_eff=_frozen(k), k_inf=k_inf, is_constant=bool(const), N=N)


# ----------------------------------------------------------------------
# volumes


def _integrate_linear(space: WeightedSpace1D, lo: float, hi: float) -> float:
    """Integral of the piecewise-linear interpolant of m over [lo, hi]."""
    x, m, h = space.nodes, space.weight, space.h
    x0 = x[0]
    lo = max(lo, x0)
    hi = min(hi, x[-1])
    if hi <= lo:
        return 0.0

    def prim(y):
        # cumulative trapezoid up to y with a partial cell
        j = min(int(np.floor((y - x0) / h)), x.size - 2)
        j = max(j, 0)
        s = y - x[j]
        slope = (m[j + 1] - m[j]) / h
        return cum[j] + m[j] * s + 0.5 * slope * s**2

    cum = np.concatenate(([0.0], np.cumsum(0.5 * h * (m[1:] + m[:-1]))))
    return float(prim(hi) - prim(lo))


def ball_volume(space: WeightedSpace1D, center: float, r: float, warn: bool = True) -> float:
    """μ(B(center, r)) by trapezoid quadrature with partial-cell correction.

    The ball is clipped to the domain; a :class:`TruncationWarning` is
    issued when it reaches a truncated end.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if space.periodic:
        L = space.length
        if 2 * r >= L:
            return space.total_mass
        # unroll the circle as a periodic line of constant-or-periodic weight
        ext = _periodic_extension(space)
        c = float(np.mod(center, L)) + L
        return _integrate_linear(ext, c - r, c + r)
    lo, hi = center - r, center + r
    if warn:
        if (space.truncated[0] and lo <= space.nodes[0]) or (space.truncated[1] and hi >= space.nodes[-1]):
            warnings.warn("ball reaches the truncation boundary", TruncationWarning, stacklevel=2)
    return _integrate_linear(space, lo, hi)


def _periodic_extension(space: WeightedSpace1D):
    """Three copies of the circle laid out on [0, 3L] (helper for balls)."""
    L = space.length
    n = space.size
    xs = np.concatenate([space.nodes + k * L for k in range(3)] + [[3 * L]])
    ms = np.concatenate([space.weight] * 3 + [[space.weight[0]]])

    class _Ext:
        nodes = xs
        weight = ms
        h = space.h

    return _Ext


def omega_N(N: float) -> float:
    """Volume of the unit ball in R^N for real N."""
    return math.pi ** (N / 2) / math.gamma(N / 2 + 1)


@dataclass(frozen=True)
class KappaEstimate:
    """Asymptotic volume ratio estimate with its convergence evidence."""

    kappa: float
    converged: bool
    radii: tuple
    ratios: tuple
    spread: float

    def __float__(self):
        return float(self.kappa)


def volume_ratio_kappa(space: WeightedSpace1D, center: Optional[float] = None,
                       tol: float = 1e-3) -> KappaEstimate:
    """Estimate κ = lim μ(B(x, r)) / (ω_N r^N).

    Ratios are evaluated at ``r_j = 0.8 b 2^{-j}``, j = 0..4, where ``b`` is
    the distance from the center to the nearest truncated end.  The two
    largest radii are Richardson-extrapolated assuming a ``1/r`` correction;
    convergence requires the three largest-radius ratios to agree to
    ``tol`` relative.
    """
    c = space.center if center is None else float(center)
    if space.periodic:
        b = space.length / 2
    else:
        b = max(space.nodes[-1] - c, c - space.nodes[0])
        if space.kind == "line":
            b = min(space.nodes[-1] - c, c - space.nodes[0])
    radii = tuple(0.8 * b * 2.0 ** (-j) for j in range(5))
    w = omega_N(space.N)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        ratios = tuple(ball_volume(space, c, r, warn=False) / (w * r**space.N) for r in radii)
    top = np.array(ratios[:3])
    spread = float((top.max() - top.min()) / abs(top[0])) if top[0] else float("inf")
    converged = spread <= tol
    kappa = ratios[0] if converged else 2 * ratios[0] - ratios[1]
    return KappaEstimate(float(kappa), bool(converged), radii, ratios, spread)


def noncollapsing_ratio(space: WeightedSpace1D, center: Optional[float] = None,
                        tol: float = 1e-3) -> float:
    """Small-radius limit of μ(B(x, r)) / (ω_N r^N).

    The ratio is sampled at ``r = 4h, 8h, 16h`` and extrapolated assuming
    an ``r^2`` correction.  A :class:`UserWarning` flags grids too coarse
    for a stable limit.
    """
    c = space.center if center is None else float(center)
    w = omega_N(space.N)
    radii = np.array([4.0, 8.0, 16.0]) * space.h
    vals = np.array([ball_volume(space, c, r, warn=False) / (w * r**space.N) for r in radii])
    est = (4 * vals[0] - vals[1]) / 3
    est2 = (4 * vals[1] - vals[2]) / 3
    if abs(est - est2) > tol * max(abs(est), 1e-300):
        warnings.warn("grid too coarse for a stable small-radius volume ratio", UserWarning,
                      stacklevel=2)
    return float(est)


def bishop_gromov_margin(space: WeightedSpace1D, center: float, r: float, R: float) -> float:
    """``(R/r)^N - μ(B_R)/μ(B_r)``; nonnegative when Bishop-Gromov holds."""
    if not 0 < r < R:
        raise ValueError("need 0 < r < R")
    return float((R / r) ** space.N - ball_volume(space, center, R) / ball_volume(space, center, r))


def laplacian_dist_sq_check(space: WeightedSpace1D, center: Optional[float] = None,
                            band: float = 0.05) -> float:
    """max |Δ d^2 - 2N| over regular nodes away from truncated ends.

    ``g = d(x, x0)^2`` is differentiated by central differences and
    ``Δg = g'' - V' g'`` uses the analytic V'.  Singular nodes (where V' is
    undefined) are excluded, as is the boundary band of truncated ends and
    the cut locus of the circle.
    """
    c = space.center if center is None else float(center)
    g = space.distance(c) ** 2
    gp, gpp = space.derivatives(g)
    lap = gpp - space.dV * gp
    keep = space.regular_mask & ~space.boundary_band(band)
    if space.periodic:
        keep &= space.distance(c) < space.length / 2 - 2 * space.h
    dev = np.abs(lap[keep] - 2 * space.N)
    return float(dev.max()) if dev.size else float("nan")


# ----------------------------------------------------------------------
# distortion coefficients


def distortion(kind: str, kappa: float, theta: float, t_param: float = 1.0) -> float:
    """Distortion coefficients ``s_kappa``, ``c_kappa`` and ``sigma_kappa^(t)``.

    Parameters
    ----------
    kind : {"s", "c", "sigma"}
    kappa : float
    theta : float
        Nonnegative distance.
    t_param : float
        Interpolation parameter in [0, 1] (used by ``sigma``).

    Returns
    -------
    float
        ``numpy.inf`` on the ``kappa theta^2 >= pi^2`` branch of ``sigma``.
    """
    if theta < 0:
        raise ValueError("theta must be nonnegative")
    if kind == "s":
        return _s(kappa, theta)
    if kind == "c":
        return _c(kappa, theta)
    if kind == "sigma":
        if not 0.0 <= t_param <= 1.0:
            raise ValueError("t_param must lie in [0, 1]")
        q = kappa * theta**2
        if q >= np.pi**2:
            return float("inf")
        if q == 0:
            return float(t_param)
        return _s(kappa, t_param * theta) / _s(kappa, theta)
    raise ValueError(f"unknown distortion kind {kind!r}")


def _s(kappa, theta):
    if kappa > 0:
        r = math.sqrt(kappa)
        return math.sin(r * theta) / r
    if kappa < 0:
        r = math.sqrt(-kappa)
        return math.sinh(r * theta) / r
    return float(theta)


def _c(kappa, theta):
    if kappa > 0:
        return math.cos(math.sqrt(kappa) * theta)
    if kappa < 0:
        return math.cosh(math.sqrt(-kappa) * theta)
    return 1.0
