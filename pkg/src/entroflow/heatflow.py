"""Heat flow on weighted 1-D spaces and closed-form kernels.

Three solvers share one discrete operator (see
:meth:`entroflow.space.WeightedSpace1D.apply_laplacian`):

* ``spectral``: eigendecomposition of the symmetrized tridiagonal
  generator and exact exponential propagation of the retained modes;
* ``cn``: Crank-Nicolson time stepping with a sparse LU factorization;
* ``closed_form``: the Euclidean Gaussian and the cone-vertex kernel,
  either as analytic radial handles or sampled onto a grid.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, sparse
from scipy.linalg import eigh, eigh_tridiagonal
from scipy.sparse.linalg import splu

from .space import TruncationWarning, WeightedSpace1D

__all__ = [
    "Density",
    "AnalyticDensity",
    "ClosedFormEuclidean",
    "SpectralBasis",
    "FlowResult",
    "FlowConfig",
    "FlowError",
    "eigendecompose",
    "propagate_spectral",
    "step_crank_nicolson",
    "cn_positivity_threshold",
    "crank_nicolson_flow",
    "heat_kernel_closed_form",
    "solve_flow",
    "kernel_density",
    "trig_density",
    "gaussian_mixture_density",
    "legendre_density",
    "uniform_density",
    "random_trig_density",
    "density_from_spec",
    "default_kernel_time",
    "stiffness_matrix",
]

BOUNDARY_FRACTION = 0.05
BOUNDARY_MASS_LIMIT = 1e-6


class FlowError(RuntimeError):
    """Numerical failure inside a solver."""


# ----------------------------------------------------------------------
# densities


@dataclass(frozen=True, eq=False)
class Density:
    """Probability density with respect to ``space``'s measure.

    Attributes
    ----------
    space : WeightedSpace1D
    values : ndarray
        Nodal values ``u(x_i)``.
    time_tag : float
        Flow time the density represents (0 for plain initial data).
    """

    space: WeightedSpace1D
    values: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.space.nodes.shape:
            raise ValueError("density values do not match the grid")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def mass(self) -> float:
        return float(np.dot(self.space.volumes, self.values))

    def normalized(self) -> "Density":
        return Density(self.space, self.values / self.mass(), self.time_tag)

    def is_normalized(self, tol: float = 1e-10) -> bool:
        return abs(self.mass() - 1.0) <= tol

    @classmethod
    def from_values(cls, space, values, time_tag: float = 0.0, normalize: bool = True):
        v = np.asarray(values, dtype=float)
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        d = cls(space, v, time_tag)
        return d.normalized() if normalize else d


@dataclass(frozen=True)
class ClosedFormEuclidean:
    """Radial model of R^N (or of the N-cone at its vertex)."""

    dim: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be >= 1")


@dataclass(frozen=True)
class AnalyticDensity:
    """Closed-form heat kernel ``u(r, t)`` in radial form.

    ``model = "euclidean"`` is the Gaussian ``e^{-r^2/4t}/(4 pi t)^{N/2}``
    on R^N with radial measure ``|S^{N-1}| r^{N-1} dr``;
    ``model = "cone_vertex"`` is ``2 e^{-r^2/4t}/((4t)^{N/2} Gamma(N/2))``
    with measure ``r^{N-1} dr``.  Both have ``log u = c(t) - r^2/4t``.
    """

    model: str
    N: float
    t: float

    def __post_init__(self):
        if self.model not in ("euclidean", "cone_vertex"):
            raise ValueError(f"unknown closed-form model {self.model!r}")
        if self.t <= 0:
            raise ValueError("t must be positive")
        if self.N < 1:
            raise ValueError("N must be >= 1")

    @property
    def time_tag(self) -> float:
        return self.t

    @property
    def space(self) -> ClosedFormEuclidean:
        return ClosedFormEuclidean(self.N)

    @property
    def log_norm(self) -> float:
        N, t = self.N, self.t
        if self.model == "euclidean":
            return -(N / 2) * math.log(4 * math.pi * t)
        return math.log(2.0) - (N / 2) * math.log(4 * t) - math.lgamma(N / 2)

    @property
    def sphere_area(self) -> float:
        if self.model == "euclidean":
            return 2 * math.pi ** (self.N / 2) / math.gamma(self.N / 2)
        return 1.0

    def log_u(self, r):
        return self.log_norm - np.asarray(r, float) ** 2 / (4 * self.t)

    def u(self, r):
        return np.exp(self.log_u(r))

    def measure(self, r):
        return self.sphere_area * np.asarray(r, float) ** (self.N - 1)

    def grad_log(self, r):
        return -np.asarray(r, float) / (2 * self.t)

    def hess_log(self, r):
        return np.full_like(np.asarray(r, float), -1 / (2 * self.t))

    def integrate(self, g, rel: float = 1e-13) -> float:
        """``int g(r) u(r) dmu`` by adaptive Gauss-Kronrod on [0, R]."""
        R = 40.0 * math.sqrt(self.t)
        f = lambda r: g(r) * self.u(r) * self.measure(r)
        pts = [k * math.sqrt(self.t) for k in (1, 2, 4, 8)]
        val, _ = integrate.quad(f, 0.0, R, points=pts, epsabs=0.0, epsrel=rel, limit=400)
        return float(val)

    def mass(self) -> float:
        return self.integrate(lambda r: 1.0)

    # closed forms
    @property
    def H_exact(self) -> float:
        return -self.log_norm + self.N / 2

    @property
    def I_exact(self) -> float:
        return self.N / (2 * self.t)

    @property
    def second_moment(self) -> float:
        return 2 * self.N * self.t

    @property
    def gamma2_exact(self) -> float:
        return self.N / (4 * self.t**2)

    def at(self, t: float) -> "AnalyticDensity":
        return AnalyticDensity(self.model, self.N, t)


def heat_kernel_closed_form(model: str, N: float, t: float) -> AnalyticDensity:
    """Closed-form kernel handle (``euclidean`` or ``cone_vertex``)."""
    return AnalyticDensity(model, float(N), float(t))


def default_kernel_time(space: WeightedSpace1D) -> float:
    """Start time ``10 h^2`` for kernel-started flows."""
    return 10.0 * space.h**2


def kernel_density(space: WeightedSpace1D, t0: Optional[float] = None,
                   center: Optional[float] = None) -> Density:
    """Grid density proportional to ``exp(-d(x, center)^2 / 4 t0)``.

    At a cone vertex this is the sampled vertex kernel; on the circle the
    periodic images are summed.  The result is normalized on the grid and
    tagged with time ``t0``.
    """
    t0 = default_kernel_time(space) if t0 is None else float(t0)
    c = space.center if center is None else float(center)
    if space.periodic:
        L = space.length
        rel = space.nodes - c
        kmax = int(math.ceil(12 * math.sqrt(t0) / L)) + 1
        vals = sum(np.exp(-(rel + k * L) ** 2 / (4 * t0)) for k in range(-kmax, kmax + 1))
    else:
        vals = np.exp(-space.distance(c) ** 2 / (4 * t0))
    return Density.from_values(space, vals, time_tag=t0)


def trig_density(space: WeightedSpace1D, cos: Sequence[float] = (), sin: Sequence[float] = ()) -> Density:
    """``1 + sum a_k cos(k w x) + sum b_k sin(k w x)`` with ``w = 2 pi / L``."""
    w = 2 * math.pi / space.length
    x = space.nodes
    vals = np.ones_like(x)
    for k, a in enumerate(cos, start=1):
        vals = vals + a * np.cos(k * w * x)
    for k, b in enumerate(sin, start=1):
        vals = vals + b * np.sin(k * w * x)
    if np.any(vals <= 0):
        raise ValueError("trigonometric coefficients produce a nonpositive density")
    return Density.from_values(space, vals)


def gaussian_mixture_density(space: WeightedSpace1D, components: Sequence[Sequence[float]]) -> Density:
    """Mixture of ``[weight, mean, variance]`` Gaussian bumps (w.r.t. dx).

    The mixture is divided by the weight ``m`` so that ``u dmu`` is the
    Gaussian mixture in ``dx``; on weighted spaces the bumps must stay away
    from singular nodes.
    """
    x = space.nodes
    dens = np.zeros_like(x)
    for w, mean, var in components:
        dens += w * np.exp(-(x - mean) ** 2 / (2 * var)) / math.sqrt(2 * math.pi * var)
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(space.weight > 0, dens / space.weight, 0.0)
    return Density.from_values(space, vals)


def legendre_density(space: WeightedSpace1D, coeffs: Sequence[float]) -> Density:
    """Zonal density ``1 + sum_l c_l P_l(cos theta)`` on a ``[0, pi]`` grid."""
    from numpy.polynomial import legendre

    c = np.concatenate(([1.0], np.asarray(coeffs, float)))
    vals = legendre.legval(np.cos(space.nodes), c)
    if np.any(vals <= 0):
        raise ValueError("Legendre coefficients produce a nonpositive density")
    return Density.from_values(space, vals)


def uniform_density(space: WeightedSpace1D) -> Density:
    return Density.from_values(space, np.ones(space.size))


def random_trig_density(space: WeightedSpace1D, seed: int = 0, modes: int = 3,
                        amplitude: float = 0.5) -> Density:
    """Positive random trigonometric density (seeded)."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, modes)
    b = rng.uniform(-1, 1, modes)
    scale = amplitude / (np.abs(a).sum() + np.abs(b).sum())
    return trig_density(space, tuple(scale * a), tuple(scale * b))


def density_from_spec(space: WeightedSpace1D, spec: Optional[dict], seed: int = 0) -> Density:
    """Initial density from its JSON description.

    Kinds: ``kernel`` (``t0``, ``center``), ``trig`` (``cos``, ``sin``),
    ``gaussian_mixture`` (``components``), ``legendre`` (``coeffs``),
    ``uniform`` and ``random`` (``modes``, ``amplitude``; uses the seed).
    """
    spec = {"kind": "kernel"} if spec is None else spec
    kind = spec.get("kind", "kernel")
    if kind == "kernel":
        return kernel_density(space, spec.get("t0"), spec.get("center"))
    if kind == "trig":
        return trig_density(space, spec.get("cos", ()), spec.get("sin", ()))
    if kind == "gaussian_mixture":
        return gaussian_mixture_density(space, spec["components"])
    if kind == "legendre":
        return legendre_density(space, spec.get("coeffs", ()))
    if kind == "uniform":
        return uniform_density(space)
    if kind == "random":
        return random_trig_density(space, seed, spec.get("modes", 3), spec.get("amplitude", 0.5))
    raise ValueError(f"unknown initial density kind {kind!r}")


# ----------------------------------------------------------------------
# flow containers


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Time-indexed densities from one heat-flow solve.

    ``diagnostics`` holds arrays ``mass_drift``, ``min_value`` and
    ``boundary_mass`` (one entry per time) plus solver-specific scalars.
    """

    times: np.ndarray
    densities: tuple
    solver: str
    diagnostics: dict = field(default_factory=dict)
    space: Optional[WeightedSpace1D] = None

    def __len__(self):
        return len(self.densities)

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > rtol * max(abs(t), 1.0):
            raise KeyError(f"time {t} is not stored in this flow")
        return k

    def at(self, t: float):
        return self.densities[self.index_of(t)]

    @property
    def is_analytic(self) -> bool:
        return self.space is None


@dataclass(frozen=True)
class FlowConfig:
    """Solver selection: ``spectral`` (``modes``), ``cn`` (``dt``) or ``closed_form``."""

    solver: str = "spectral"
    modes: Optional[int] = None
    dt: Optional[float] = None
    times: tuple = ()

    def __post_init__(self):
        if self.solver not in ("spectral", "cn", "closed_form"):
            raise ValueError(f"unknown solver {self.solver!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "FlowConfig":
        return cls(d.get("solver", "spectral"), d.get("modes"), d.get("dt"),
                   tuple(expand_times(d.get("times", ()))))


def expand_times(spec) -> list:
    """Accept an explicit list or ``{"start", "stop", "num"}`` (log-spaced)."""
    if isinstance(spec, dict):
        return list(np.geomspace(spec["start"], spec["stop"], int(spec["num"])))
    return [float(t) for t in spec]


def _diagnostics(space: WeightedSpace1D, arrays: Sequence[np.ndarray]) -> dict:
    band = space.boundary_band(BOUNDARY_FRACTION)
    W = space.volumes
    drift, mins, bmass = [], [], []
    for v in arrays:
        m = float(np.dot(W, v))
        drift.append(abs(m - 1.0))
        mins.append(float(v.min()))
        bmass.append(float(np.dot(W[band], np.maximum(v[band], 0.0)) / m) if band.any() else 0.0)
    return {"mass_drift": np.array(drift), "min_value": np.array(mins),
            "boundary_mass": np.array(bmass)}


def _finish(space, times, arrays, t_shift, solver, extra) -> FlowResult:
    diag = _diagnostics(space, arrays)
    diag.update(extra)
    dens = tuple(Density(space, np.maximum(v, 0.0), float(t)) for v, t in zip(arrays, times))
    if np.max(diag["boundary_mass"], initial=0.0) > BOUNDARY_MASS_LIMIT:
        warnings.warn(
            f"boundary-mass fraction {np.max(diag['boundary_mass']):.3g} exceeds "
            f"{BOUNDARY_MASS_LIMIT:g}; truncation contaminates the entropies",
            TruncationWarning, stacklevel=3)
    return FlowResult(np.asarray(times, float), dens, solver, diag, space)


def _check_times(times, t_start):
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("times must be a nonempty list")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    if t[0] < t_start or t[0] <= 0:
        raise ValueError("times must be positive and not earlier than the initial time tag")
    return t


# ----------------------------------------------------------------------
# spectral solver


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Leading eigenpairs of ``-L``; ``eigenvectors`` are L^2(mu)-orthonormal."""

    space: WeightedSpace1D
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def mode_count(self) -> int:
        return self.eigenvalues.size


def eigendecompose(space: WeightedSpace1D, mode_count: Optional[int] = None) -> SpectralBasis:
    """Eigenpairs of the weighted Laplacian via symmetric reduction.

    The generator ``L = -W^{-1} A`` is conjugated by ``W^{1/2}``; the
    resulting tridiagonal (periodic: cyclic) matrix is solved with LAPACK,
    and eigenvectors are mapped back as ``phi = W^{-1/2} psi``.

    Raises
    ------
    FlowError
        If the conjugated matrix is not symmetric to 1e-10 or a computed
        eigenvalue is below -1e-8.
    """
    n = space.size
    K = n // 4 if mode_count is None else int(mode_count)
    if not 1 <= K <= n - 2:
        raise ValueError("mode_count must lie in [1, grid_size - 2]")
    W = space.volumes
    diag, off = space.stiffness_bands()
    sw = np.sqrt(W)
    # residual of the conjugation: upper and lower bands of W^{1/2} L W^{-1/2}
    nxt = np.arange(off.size) + 1
    nxt[nxt == n] = 0
    if n > 1:
        upper = -(off / W[: off.size]) * sw[: off.size] / sw[nxt]
        lower = -(off / W[nxt]) * sw[nxt] / sw[: off.size]
        scale = max(np.max(np.abs(upper)), 1e-300)
        if np.max(np.abs(upper - lower)) > 1e-10 * scale:
            raise FlowError("symmetrized operator is not symmetric")
    d = diag / W
    e = off / (sw[: off.size] * sw[nxt])
    if space.periodic:
        S = np.diag(d)
        idx = np.arange(n)
        S[idx, nxt] += e
        S[nxt, idx] += e
        lam, psi = eigh(S, subset_by_index=(0, K - 1))
    else:
        lam, psi = eigh_tridiagonal(d, e, select="i", select_range=(0, K - 1))
    if lam.min() < -1e-8 * max(1.0, lam.max()):
        raise FlowError(f"negative eigenvalue {lam.min():.3e}")
    phi = psi / sw[:, None]
    lam = np.array(lam)
    lam.setflags(write=False)
    phi.setflags(write=False)
    return SpectralBasis(space, lam, phi)


def propagate_spectral(basis: SpectralBasis, rho0: Density, times: Sequence[float],
                       dropped_tol: float = 1e-8) -> FlowResult:
    """``u(t) = sum exp(-lam_k (t - t0)) <u0, phi_k> phi_k`` with ``t0 = rho0.time_tag``.

    The dropped-mode energy of ``rho0`` (relative, in L^2(mu)) is reported
    together with its bound at the first output time,
    ``dropped * exp(-2 lam_K (t_1 - t0))``; a warning is issued when that
    bound exceeds ``dropped_tol``.
    """
    space = basis.space
    t0 = rho0.time_tag
    t = _check_times(times, t0)
    W = space.volumes
    u0 = rho0.values
    c = basis.eigenvectors.T @ (W * u0)
    norm2 = float(np.dot(W, u0 * u0))
    dropped = max(norm2 - float(np.dot(c, c)), 0.0) / norm2
    lam_top = float(basis.eigenvalues[-1])
    damped = dropped * math.exp(-2 * lam_top * (t[0] - t0))
    if basis.mode_count < space.size and damped > dropped_tol:
        warnings.warn(f"dropped-mode energy {damped:.3e} exceeds {dropped_tol:g}", UserWarning,
                      stacklevel=2)
    arrays = [basis.eigenvectors @ (np.exp(-basis.eigenvalues * (tk - t0)) * c) for tk in t]
    extra = {"dropped_energy": dropped, "dropped_energy_damped": damped,
             "mode_count": basis.mode_count}
    return _finish(space, t, arrays, t0, "spectral", extra)


# ----------------------------------------------------------------------
# Crank-Nicolson


def cn_positivity_threshold(space: WeightedSpace1D) -> float:
    """Largest ``dt`` for which ``W - (dt/2) A`` has a nonnegative diagonal."""
    diag, _ = space.stiffness_bands()
    return float(np.min(2 * space.volumes / diag))


def stiffness_matrix(space: WeightedSpace1D):
    """Sparse symmetric stiffness matrix ``A`` with ``A u = -W L u``."""
    diag, off = space.stiffness_bands()
    n = space.size
    if space.periodic:
        i = np.arange(n)
        j = (i + 1) % n
        A = sparse.coo_matrix((off, (i, j)), shape=(n, n))
        A = A + A.T + sparse.diags(diag)
    else:
        A = sparse.diags([off, diag, off], [-1, 0, 1])
    return sparse.csc_matrix(A)


class _CNStepper:
    def __init__(self, space: WeightedSpace1D, dt: float):
        A = stiffness_matrix(space)
        Wm = sparse.diags(space.volumes)
        self.lhs = splu(sparse.csc_matrix(Wm + 0.5 * dt * A))
        self.rhs = sparse.csr_matrix(Wm - 0.5 * dt * A)

    def step(self, u, substeps):
        for _ in range(substeps):
            u = self.lhs.solve(self.rhs @ u)
            if not np.all(np.isfinite(u)):
                raise FlowError("Crank-Nicolson solve produced non-finite values")
        return u


def step_crank_nicolson(space: WeightedSpace1D, rho: Density, dt: float, substeps: int = 1) -> Density:
    """Advance ``rho`` by ``substeps`` Crank-Nicolson steps of size ``dt``."""
    if dt <= 0 or substeps < 1:
        raise ValueError("need dt > 0 and substeps >= 1")
    u = _CNStepper(space, dt).step(np.array(rho.values), substeps)
    return Density(space, u, rho.time_tag + dt * substeps)


def crank_nicolson_flow(space: WeightedSpace1D, rho0: Density, times: Sequence[float],
                        dt: float) -> FlowResult:
    """CN solution at each requested time.

    Each interval between output times is split into equal substeps no
    larger than ``dt``.
    """
    if dt is None or dt <= 0:
        raise ValueError("Crank-Nicolson needs dt > 0")
    t = _check_times(times, rho0.time_tag)
    steppers = {}
    u = np.array(rho0.values)
    prev = rho0.time_tag
    arrays = []
    for tk in t:
        span = tk - prev
        if span > 0:
            k = max(1, int(math.ceil(span / dt - 1e-9)))
            h = span / k
            key = round(h / dt, 12)
            if key not in steppers:
                steppers[key] = _CNStepper(space, h)
            u = steppers[key].step(u, k)
        arrays.append(u.copy())
        prev = tk
    extra = {"dt": float(dt), "positivity_dt": cn_positivity_threshold(space)}
    return _finish(space, t, arrays, rho0.time_tag, "crank_nicolson", extra)


# ----------------------------------------------------------------------
# dispatcher


def solve_flow(space: Optional[WeightedSpace1D], rho0, times: Sequence[float],
               config: Optional[FlowConfig] = None) -> FlowResult:
    """Run the configured solver.

    Parameters
    ----------
    space : WeightedSpace1D or None
        ``None`` selects the analytic closed-form mode.
    rho0 : Density or AnalyticDensity
        Initial data.  With ``closed_form`` and a grid space, the analytic
        kernel is sampled onto the grid at each time.
    times : sequence of float
        Output times (absolute; kernel densities carry their start time).
    config : FlowConfig
    """
    config = FlowConfig() if config is None else config
    if config.solver == "closed_form" or isinstance(rho0, AnalyticDensity):
        if not isinstance(rho0, AnalyticDensity):
            raise ValueError("closed_form solver needs an analytic kernel handle")
        t = _check_times(times, 0.0)
        if space is None:
            dens = tuple(rho0.at(tk) for tk in t)
            diag = {"mass_drift": np.array([abs(d.mass() - 1) for d in dens]),
                    "min_value": np.zeros(t.size), "boundary_mass": np.zeros(t.size)}
            return FlowResult(t, dens, "closed_form", diag, None)
        arrays = [np.exp(rho0.at(tk).log_u(space.distance(space.center))) for tk in t]
        arrays = [a / np.dot(space.volumes, a) for a in arrays]
        return _finish(space, t, arrays, 0.0, "closed_form", {})
    if space is None:
        raise ValueError("grid solvers need a space")
    if config.solver == "spectral":
        basis = eigendecompose(space, config.modes)
        return propagate_spectral(basis, rho0, times)
    return crank_nicolson_flow(space, rho0, times, config.dt)
