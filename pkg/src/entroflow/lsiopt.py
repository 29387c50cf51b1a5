"""Minimization of the W-entropy at fixed time (optimal log-Sobolev constant).

The density is parametrized by nodal amplitudes ``q`` with
``rho = q^2 / ||q||^2`` in ``L^2(mu)``.  On the unit sphere the objective

    F(q) = t I(rho) + H(rho),   I = 4 sum_e m_e (q_{i+1} - q_i)^2 / h

is minimized by preconditioned projected gradient descent with Armijo
backtracking and retraction by renormalization.  The reported value adds
``-(N/2) log(4 pi t) - N + N K t - N K^2 t^2 / 4`` so that it matches
``W_{N,K}``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .heatflow import BOUNDARY_MASS_LIMIT, Density, kernel_density, stiffness_matrix
from .space import WeightedSpace1D

__all__ = [
    "OptProblem",
    "OptResult",
    "ELResidual",
    "ConvergenceWarning",
    "minimize_w_entropy",
    "el_residual",
    "objective",
    "w_constant",
]

ARMIJO_C = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 60


class ConvergenceWarning(UserWarning):
    """The optimizer stopped at max_iter above the gradient tolerance."""


@dataclass
class OptProblem:
    """Fixed-time W-entropy minimization problem.

    Parameters
    ----------
    space : WeightedSpace1D
    N, K : float
    t : float
        Positive time.
    init : Density, optional
        Starting density; defaults to the heat kernel at time ``t``
        centred at ``space.center``.
    step : float
        Initial line-search step.
    max_iter : int
    grad_tol : float
        Tolerance on the relative Euler-Lagrange residual.
    el_constant : {"w", "remark"}
        Constant in the Euler-Lagrange equation: ``N (1 - K t/2)^2``
        (consistent with the functional) or ``N (1 - K/(2t))^2``.
    """

    space: WeightedSpace1D
    N: float
    K: float = 0.0
    t: float = 1.0
    init: Optional[Density] = None
    step: float = 1.0
    max_iter: int = 2000
    grad_tol: float = 1e-5
    el_constant: str = "w"

    def __post_init__(self):
        if not self.t > 0:
            raise ValueError("t must be positive")
        if self.step <= 0 or self.max_iter < 0 or self.grad_tol <= 0:
            raise ValueError("step, max_iter and grad_tol must be positive")
        if self.el_constant not in ("w", "remark"):
            raise ValueError("el_constant must be 'w' or 'remark'")
        if self.init is None:
            self.init = kernel_density(self.space, self.t, self.space.center)
        elif self.init.space is not self.space:
            raise ValueError("init lives on a different space")
        elif not self.init.is_normalized(1e-8):
            raise ValueError("init must be normalized")

    @classmethod
    def from_dict(cls, d: dict, space: WeightedSpace1D, init: Optional[Density] = None):
        keys = ("N", "K", "t", "step", "max_iter", "grad_tol", "el_constant")
        kw = {k: d[k] for k in keys if k in d}
        kw.setdefault("N", space.N)
        return cls(space=space, init=init, **kw)


@dataclass(frozen=True)
class ELResidual:
    """``L^2(mu)`` norm of the Euler-Lagrange residual, raw and relative to ``||u||``."""

    raw: float
    relative: float


@dataclass(frozen=True)
class OptResult:
    """Optimizer output; ``history`` holds the reported W value per iteration."""

    minimizer: Density
    mu_value: float
    el_residual: float
    el_residual_raw: float
    iterations: int
    converged: bool
    history: tuple = field(default_factory=tuple)
    boundary_mass: float = 0.0
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"mu": self.mu_value, "el_residual": self.el_residual,
                "el_residual_raw": self.el_residual_raw, "iters": self.iterations,
                "converged": self.converged, "boundary_mass": self.boundary_mass}


def w_constant(t: float, N: float, K: float) -> float:
    """Additive constant turning ``tI + H`` into ``W_{N,K}``."""
    return -(N / 2) * math.log(4 * math.pi * t) - N + N * K * t - N * K**2 * t**2 / 4


def _entropy_q2(W, q):
    r = q * q
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r > 0, np.log(r), 0.0)
    return -float(np.dot(W, r * lg)), lg


class _Objective:
    def __init__(self, space: WeightedSpace1D, t: float):
        self.W = space.volumes
        self.A = stiffness_matrix(space)
        self.t = t

    def value(self, q):
        H, _ = _entropy_q2(self.W, q)
        return 4 * self.t * float(q @ (self.A @ q)) + H

    def gradient(self, q):
        """W-inner-product gradient and its tangent projection."""
        _, lg = _entropy_q2(self.W, q)
        g = 8 * self.t * (self.A @ q) / self.W - 2 * q * lg - 2 * q
        g_t = g - float(np.dot(self.W, g * q)) * q
        return g, g_t


def _normalize(W, q):
    return q / math.sqrt(float(np.dot(W, q * q)))


def objective(rho: Density, t: float, N: float, K: float = 0.0) -> float:
    """Reported W value ``t I + H + const`` of a grid density."""
    obj = _Objective(rho.space, t)
    q = np.sqrt(np.maximum(rho.values, 0.0) / rho.mass())
    return obj.value(q) + w_constant(t, N, K)


def el_residual(rho: Density, mu: float, problem: OptProblem) -> ELResidual:
    """Residual of ``-4t Delta u - 2u log u - c u = mu u``, ``u = (4 pi t)^{N/4} sqrt(rho)``.

    ``c = N (1 - K t/2)^2`` by default (``N (1 - K/(2t))^2`` with
    ``el_constant="remark"``); ``Delta`` is the weighted stencil.
    """
    sp = rho.space
    t, N, K = problem.t, problem.N, problem.K
    u = (4 * math.pi * t) ** (N / 4) * np.sqrt(np.maximum(rho.values, 0.0) / rho.mass())
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = np.where(u > 0, np.log(u), 0.0)
    c = N * (1 - K * t / 2) ** 2 if problem.el_constant == "w" else N * (1 - K / (2 * t)) ** 2
    r = -4 * t * sp.apply_laplacian(u) - 2 * u * lu - c * u - mu * u
    raw = math.sqrt(float(np.dot(sp.volumes, r * r)))
    norm = math.sqrt(float(np.dot(sp.volumes, u * u)))
    return ELResidual(raw, raw / norm)


def minimize_w_entropy(problem: OptProblem) -> OptResult:
    """Minimize ``W_{N,K}(., t)`` over normalized densities on the grid.

    Returns
    -------
    OptResult
        Best iterate; ``converged`` is False (and a
        :class:`ConvergenceWarning` is issued) when ``max_iter`` was reached.
    """
    sp = problem.space
    obj = _Objective(sp, problem.t)
    W = obj.W
    const = w_constant(problem.t, problem.N, problem.K)
    # Sobolev-metric preconditioner (W + 8t A) p = W g
    pre = splu(sparse.csc_matrix(sparse.diags(W) + 8 * problem.t * obj.A))

    q = _normalize(W, np.sqrt(np.maximum(problem.init.values, 0.0)))
    F = obj.value(q)
    history = [F + const]
    alpha = problem.step
    converged = False
    it = 0
    notes = []
    for it in range(problem.max_iter + 1):
        _, g_t = obj.gradient(q)
        rel = 0.5 * math.sqrt(float(np.dot(W, g_t * g_t)))
        if rel <= problem.grad_tol:
            converged = True
            break
        if it == problem.max_iter:
            break
        p = pre.solve(W * g_t)
        p -= float(np.dot(W, p * q)) * q
        slope = float(np.dot(W, g_t * p))
        if slope <= 0:
            p, slope = g_t, float(np.dot(W, g_t * g_t))
        for _ in range(MAX_BACKTRACKS):
            q_new = _normalize(W, q - alpha * p)
            F_new = obj.value(q_new)
            if F_new <= F - ARMIJO_C * alpha * slope:
                break
            alpha *= BACKTRACK
        else:
            notes.append("line search stalled")
            break
        q, F = q_new, F_new
        history.append(F + const)
        alpha = min(2 * alpha, problem.step)
    rho = Density(sp, q * q, problem.t)
    mu = F + const
    el = el_residual(rho, mu, problem)
    band = sp.boundary_band()
    bmass = float(np.dot(sp.volumes[band], rho.values[band]))
    if bmass > BOUNDARY_MASS_LIMIT:
        notes.append(f"boundary mass {bmass:.3g} exceeds {BOUNDARY_MASS_LIMIT:g}")
    if not converged:
        warnings.warn(f"optimizer stopped after {it} iterations above grad_tol",
                      ConvergenceWarning, stacklevel=2)
    return OptResult(rho, mu, el.relative, el.raw, it, converged, tuple(history), bmass,
                     tuple(notes))
