"""Rescaled proximal alternating minimization for l1-regularized CP (LRAT).

One outer iteration updates X, Y, Z by a projected gradient step onto unit
columns and then alpha by a soft-thresholded gradient step. Every block step
uses ``1/(s L)`` with ``L = max(||M M^T||_F, 1)`` for the block's update matrix
``M``, which gives the sufficient decrease

    Psi(w_n) - Psi(w_{n+1}) >= min((s - 1)/2, 1/2) ||w_n - w_{n+1}||^2.

With ``lam = 0`` the same iteration is the modALS baseline.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cp import CpFactors, ObjectiveValue, count_nonzero, gradients, gram_product
from .tensor import as_tensor3, khatri_rao, matricize, vectorize

log = logging.getLogger(__name__)

DESCENT_SLACK = 1e-9
DEGENERATE_NORM = 1e-300
INIT_RIDGE = 1e-12


class SolverError(RuntimeError):
    pass


class DegenerateColumnError(SolverError):
    pass


class DivergenceError(SolverError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    R: int
    lam: float = 0.0
    s: float = 1.5
    iter_max: int = 10000
    conv_tol: float = 1e-10
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if int(self.R) < 1:
            raise ValueError("R must be >= 1")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        if not self.s > 1:
            raise ValueError("s must be > 1")
        if int(self.iter_max) < 1:
            raise ValueError("iter_max must be >= 1")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be > 0")
        if int(self.seed) < 0:
            raise ValueError("seed must be an unsigned integer")

    @property
    def descent_margin(self) -> float:
        return min((self.s - 1.0) / 2.0, 0.5)

    def replace(self, **kw) -> "SolverConfig":
        return replace(self, **kw)


@dataclass(frozen=True)
class StepInfo:
    objective: ObjectiveValue
    step_gap: float
    d_n: float
    e_n: float
    f_n: float
    eta_n: float


TRACE_FIELDS = ("iter", "objective", "residual_half", "step_gap", "d_n", "e_n", "f_n", "eta_n", "nnz")


@dataclass
class SolverTrace:
    initial_objective: float
    rows: list = field(default_factory=list)

    def append(self, it: int, info: StepInfo, nnz: int):
        o = info.objective
        self.rows.append(
            (it, o.total, o.residual_half, info.step_gap, info.d_n, info.e_n, info.f_n, info.eta_n, nnz)
        )

    def column(self, name: str) -> np.ndarray:
        return np.array([r[TRACE_FIELDS.index(name)] for r in self.rows])

    def objectives(self) -> np.ndarray:
        """Objective sequence including the starting point."""
        return np.concatenate([[self.initial_objective], self.column("objective")])


@dataclass
class SolveResult:
    factors: CpFactors
    estimated_rank: int
    iterations: int
    converged: bool
    objective: ObjectiveValue
    kkt_residual: float
    descent_violations: int = 0
    trace: Optional[SolverTrace] = None


def soft_threshold(v, tau: float) -> np.ndarray:
    """``sign(v) * max(|v| - tau, 0)`` with exact zeros."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) > tau, v - tau * np.sign(v), 0.0)


class _Unfolded:
    """The data tensor in every layout the step needs."""

    def __init__(self, A: np.ndarray):
        self.A = A
        self.A1 = np.ascontiguousarray(matricize(A, 1))
        self.A2 = np.ascontiguousarray(matricize(A, 2))
        self.A3 = np.ascontiguousarray(matricize(A, 3))
        self.a = vectorize(A)


def _block_step(M, Mat, Unf, scale_const, s, name):
    # M: current factor, Mat: update matrix (R x rest), Unf: matching unfolding
    G = (M @ Mat - Unf) @ Mat.T
    D = M - G / (s * scale_const)
    norms = np.linalg.norm(D, axis=0)
    if np.any(norms < DEGENERATE_NORM):
        raise DegenerateColumnError(f"degenerate column in the {name} update")
    return D / norms


def _lipschitz(alpha, P, Q):
    # ||diag(a) (P kr Q)^T (P kr Q) diag(a)||_F, floored at 1
    G = np.outer(alpha, alpha) * gram_product(P, Q)
    return max(float(np.linalg.norm(G)), 1.0)


def _step(unf: _Unfolded, f: CpFactors, lam: float, s: float):
    alpha, X, Y, Z = f.alpha, f.X, f.Y, f.Z
    a = alpha[:, None]

    d_n = _lipschitz(alpha, Z, Y)
    X1 = _block_step(X, a * khatri_rao(Z, Y).T, unf.A1, d_n, s, "X")

    e_n = _lipschitz(alpha, Z, X1)
    Y1 = _block_step(Y, a * khatri_rao(Z, X1).T, unf.A2, e_n, s, "Y")

    f_n = _lipschitz(alpha, Y1, X1)
    Z1 = _block_step(Z, a * khatri_rao(Y1, X1).T, unf.A3, f_n, s, "Z")

    # (alpha Q - a) Q^T evaluated on the mode-1 unfolding, which holds the
    # same entries as a; avoids materializing the R x IJK matrix Q
    P = khatri_rao(Z1, Y1)
    eta_n = max(float(np.linalg.norm(gram_product(X1, Y1, Z1))), 1.0)
    resid = X1 @ (alpha[:, None] * P.T) - unf.A1
    g_alpha = np.einsum("ir,ir->r", X1, resid @ P)
    beta = alpha - g_alpha / (s * eta_n)
    alpha1 = soft_threshold(beta, lam / (s * eta_n))

    resid = X1 @ (alpha1[:, None] * P.T) - unf.A1
    obj = ObjectiveValue(0.5 * float(np.vdot(resid, resid)), lam * float(np.abs(alpha1).sum()))
    gap = np.sqrt(
        np.sum((X1 - X) ** 2) + np.sum((Y1 - Y) ** 2) + np.sum((Z1 - Z) ** 2) + np.sum((alpha1 - alpha) ** 2)
    )
    new = CpFactors(alpha1, X1, Y1, Z1)
    return new, StepInfo(obj, float(gap), d_n, e_n, f_n, eta_n)


def lrat_step(A, f: CpFactors, cfg: SolverConfig):
    """One outer iteration in Gauss-Seidel order X, Y, Z, alpha."""
    A = as_tensor3(A)
    if not f.is_normalized():
        raise ValueError("factor columns must have unit norm")
    return _step(_Unfolded(A), f, cfg.lam, cfg.s)


def init_factors(A: np.ndarray, R: int, seed: int) -> CpFactors:
    """Gaussian unit-norm columns plus a least-squares fit of alpha."""
    rng = np.random.default_rng([int(seed), 1])
    I, J, K = A.shape
    X = rng.standard_normal((I, R))
    Y = rng.standard_normal((J, R))
    Z = rng.standard_normal((K, R))
    X, Y, Z = (m / np.linalg.norm(m, axis=0) for m in (X, Y, Z))
    Q = khatri_rao(khatri_rao(X, Y), Z).T
    G = Q @ Q.T
    alpha = np.zeros(R)
    if np.linalg.cond(G) < 1e12:
        alpha = np.linalg.solve(G + INIT_RIDGE * np.eye(R), Q @ vectorize(A))
    else:
        log.debug("initial Q Q^T numerically singular, starting from alpha = 0")
    return CpFactors(alpha, X, Y, Z)


def _objective(unf: _Unfolded, f: CpFactors, lam: float) -> ObjectiveValue:
    r = f.X @ (f.alpha[:, None] * khatri_rao(f.Z, f.Y).T) - unf.A1
    return ObjectiveValue(0.5 * float(np.vdot(r, r)), lam * float(np.abs(f.alpha).sum()))


def lrat_solve(A, cfg: SolverConfig, init: Optional[CpFactors] = None) -> SolveResult:
    """Run LRAT until the objective decrease drops below ``conv_tol * max(1, Psi_0)``."""
    A = as_tensor3(A)
    unf = _Unfolded(A)
    f = init if init is not None else init_factors(A, cfg.R, cfg.seed)
    if f.R != cfg.R or f.dims != A.shape:
        raise ValueError("initial factors do not match the tensor and R")
    if not f.is_normalized():
        raise ValueError("factor columns must have unit norm")

    psi = _objective(unf, f, cfg.lam).total
    tol = cfg.conv_tol * max(1.0, psi)
    trace = SolverTrace(psi) if cfg.record_trace else None
    margin = cfg.descent_margin
    converged = False
    violations = 0
    obj = None
    it = 0
    for it in range(1, cfg.iter_max + 1):
        f, info = _step(unf, f, cfg.lam, cfg.s)
        obj = info.objective
        if not np.isfinite(obj.total):
            raise DivergenceError(f"non-finite objective at iteration {it}")
        decrease = psi - obj.total
        if decrease < margin * info.step_gap**2 - DESCENT_SLACK:
            violations += 1
            log.warning("descent margin violated at iteration %d", it)
        if trace is not None:
            trace.append(it, info, count_nonzero(f.alpha))
        psi = obj.total
        if decrease < tol:
            converged = True
            break
    if obj is None:
        obj = _objective(unf, f, cfg.lam)
    return SolveResult(
        factors=f,
        estimated_rank=count_nonzero(f.alpha),
        iterations=it,
        converged=converged,
        objective=obj,
        kkt_residual=kkt_residual(A, f, cfg.lam),
        descent_violations=violations,
        trace=trace,
    )


def modals_solve(A, cfg: SolverConfig, init: Optional[CpFactors] = None) -> SolveResult:
    """LRAT with the penalty switched off."""
    return lrat_solve(A, cfg.replace(lam=0.0), init=init)


def _l1_stationarity(g, x, lam) -> np.ndarray:
    # distance of -g to lam * subdifferential of |x|, per coordinate
    return np.where(x != 0, np.abs(g + lam * np.sign(x)), np.maximum(np.abs(g) - lam, 0.0))


def kkt_residual(A, f: CpFactors, lam: float) -> float:
    """Largest violation of the first-order conditions on the unit-column manifold.

    Factor blocks: the part of each gradient column orthogonal to its factor
    column (the diagonal multiplier absorbs the parallel part). Alpha block:
    distance of ``-grad_alpha`` to ``lam * d||alpha||_1``.
    """
    G_X, G_Y, G_Z, g_alpha = gradients(A, f)
    worst = 0.0
    for G, M in ((G_X, f.X), (G_Y, f.Y), (G_Z, f.Z)):
        h = np.sum(G * M, axis=0)
        worst = max(worst, float(np.max(np.linalg.norm(G - M * h, axis=0))))
    worst = max(worst, float(np.max(_l1_stationarity(g_alpha, f.alpha, lam))))
    return worst


@dataclass(frozen=True)
class LassoProblem:
    B: np.ndarray
    b: np.ndarray
    lam: float

    def __post_init__(self):
        B = np.array(self.B, dtype=np.float64)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if B.ndim != 2 or B.shape[0] != b.shape[0]:
            raise ValueError("B must be n x R and b length n")
        if np.any(np.abs(np.linalg.norm(B, axis=0) - 1.0) > 1e-10):
            raise ValueError("columns of B must have unit norm")
        if not self.lam >= 0:
            raise ValueError("lam must be nonnegative")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)


def lasso_stationarity(p: LassoProblem, theta) -> float:
    g = p.B.T @ (p.B @ theta - p.b)
    return float(np.max(_l1_stationarity(g, theta, p.lam)))


def lasso_solve_ista(p: LassoProblem, iter_max: int = 200000, conv_tol: float = 1e-9, s: float = 1.5):
    """Proximal gradient for ``1/2 ||b - B theta||^2 + lam ||theta||_1``.

    Same step rule as the alpha block of LRAT. Stops once every coordinate of
    the optimality condition holds to ``conv_tol``. Returns
    ``(theta_hat, support)``.
    """
    BtB = p.B.T @ p.B
    Btb = p.B.T @ p.b
    L = s * max(float(np.linalg.norm(BtB)), 1.0)
    theta = np.zeros(p.B.shape[1])
    for _ in range(iter_max):
        g = BtB @ theta - Btb
        if np.max(_l1_stationarity(g, theta, p.lam)) <= conv_tol:
            break
        theta = soft_threshold(theta - g / L, p.lam / L)
    return theta, np.flatnonzero(theta)
