"""Data-driven choice of the l1 weight and the support-recovery bound behind it."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cp import q_matrix, reconstruct
from .solver import SolveResult, SolverConfig, modals_solve
from .tensor import as_tensor3


class ParamSelectError(ValueError):
    pass


@dataclass
class LambdaEstimate:
    sigma2_hat: float
    gamma_hat: float
    lambda_hat: float
    pilot_result: Optional[SolveResult] = None

    def as_dict(self) -> dict:
        return {"sigma2_hat": self.sigma2_hat, "gamma_hat": self.gamma_hat, "lambda_hat": self.lambda_hat}


@dataclass(frozen=True)
class ConsistencyDiagnostics:
    gamma: float
    incoherence_ok: bool
    mu: float
    bound: float


def lambda_formula(sigma2: float, gamma: float, R: int) -> float:
    """``(2 / gamma) * sqrt(2 sigma^2 log(200 R))``.

    This is the weight at which ``1 - 2R exp(-lam^2 gamma^2 / (8 sigma^2))``
    equals 0.99.
    """
    return (2.0 / gamma) * math.sqrt(2.0 * sigma2 * math.log(200.0 * R))


def recovery_bound(lam: float, gamma: float, sigma2: float, R: int) -> float:
    """Lower bound ``1 - 2R exp(-lam^2 gamma^2 / (8 sigma^2))`` on exact support recovery."""
    if sigma2 == 0:
        return 1.0 if lam * gamma > 0 else 1.0 - 2.0 * R
    return 1.0 - 2.0 * R * math.exp(-(lam**2) * gamma**2 / (8.0 * sigma2))


def coherence_gamma(B: np.ndarray) -> float:
    """``1 - max_{i != j} |<B_i, B_j>|`` for a design with unit-norm columns."""
    G = np.abs(B.T @ B)
    np.fill_diagonal(G, 0.0)
    return 1.0 - float(G.max())


def estimate_lambda(A, R: int, cfg: Optional[SolverConfig] = None) -> LambdaEstimate:
    """Pilot modALS fit, then plug residual variance and coherence into the formula.

    ``cfg`` supplies s, iter_max, conv_tol and seed for the pilot; its R and
    lam are ignored.
    """
    if R < 2:
        raise ParamSelectError("need R >= 2 to estimate the coherence of the pilot factors")
    A = as_tensor3(A)
    cfg = (cfg or SolverConfig(R=R)).replace(R=R, lam=0.0)
    pilot = modals_solve(A, cfg)
    resid = A - reconstruct(pilot.factors)
    sigma2 = float(np.var(resid))
    gamma = coherence_gamma(q_matrix(pilot.factors).T)
    if gamma <= 0:
        raise ParamSelectError("pilot factors coherent: two pilot components are collinear")
    return LambdaEstimate(sigma2, gamma, lambda_formula(sigma2, gamma, R), pilot)


def _inf_norm(M: np.ndarray) -> float:
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def incoherence(B: np.ndarray, S) -> float:
    """Achieved ``1 - ||B_Sc^T B_S (B_S^T B_S)^{-1}||_inf``."""
    S = np.asarray(S, dtype=int)
    Sc = np.setdiff1d(np.arange(B.shape[1]), S)
    BS = B[:, S]
    G = BS.T @ BS
    if np.linalg.matrix_rank(G) < len(S):
        raise ParamSelectError("restricted design rank-deficient")
    return 1.0 - _inf_norm(B[:, Sc].T @ BS @ np.linalg.inv(G))


def signal_floor(B: np.ndarray, S, lam: float, mu: Optional[float] = None) -> float:
    """Smallest |theta_S| for which sign consistency follows from the bound."""
    BS = B[:, np.asarray(S, dtype=int)]
    G = BS.T @ BS
    if mu is None:
        mu = float(np.linalg.eigvalsh(G)[0])
    return lam * (1.0 / (2.0 * math.sqrt(mu)) + _inf_norm(np.linalg.inv(G)))


def consistency_bound(B, S, lam: float, sigma2: float, gamma: Optional[float] = None) -> ConsistencyDiagnostics:
    """Incoherence, smallest restricted eigenvalue and recovery probability bound.

    With ``gamma=None`` the bound uses the achieved incoherence; otherwise it
    uses ``gamma`` and ``incoherence_ok`` reports whether the design meets it.
    """
    B = np.asarray(B, dtype=np.float64)
    S = np.asarray(sorted(set(int(i) for i in S)), dtype=int)
    R = B.shape[1]
    if len(S) == 0 or len(S) >= R:
        raise ParamSelectError("support must be a nonempty proper subset")
    achieved = incoherence(B, S)
    BS = B[:, S]
    mu = max(float(np.linalg.eigvalsh(BS.T @ BS)[0]), 0.0)
    if gamma is None:
        gamma, ok = achieved, achieved > 0
    else:
        ok = achieved >= gamma
    g = max(gamma, 0.0)
    return ConsistencyDiagnostics(achieved, bool(ok), mu, recovery_bound(lam, g, sigma2, R))
