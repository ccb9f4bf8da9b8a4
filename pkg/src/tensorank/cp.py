"""CP factors ``[alpha; X, Y, Z]`` and the smooth part of the objective."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import TensorError, khatri_rao, matricize, vectorize

NORM_TOL = 1e-10


@dataclass(frozen=True)
class CpFactors:
    """Coefficients ``alpha`` (length R) and factor matrices X (IxR), Y (JxR), Z (KxR).

    The unit-norm column constraint is not enforced here because finite
    difference checks and rescaling tests need off-sphere points; the solver
    checks it on entry (see :meth:`is_normalized`).
    """

    alpha: np.ndarray
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "X", "Y", "Z"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            if not np.all(np.isfinite(arr)):
                raise TensorError(f"{name} has non-finite entries")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        R = self.alpha.shape[0] if self.alpha.ndim == 1 else -1
        if R < 1:
            raise TensorError("alpha must be a nonempty vector")
        for name in ("X", "Y", "Z"):
            m = getattr(self, name)
            if m.ndim != 2 or m.shape[1] != R or m.shape[0] < 1:
                raise TensorError(f"{name} must have shape (n, {R}), got {m.shape}")

    @property
    def R(self) -> int:
        return self.alpha.shape[0]

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.X.shape[0], self.Y.shape[0], self.Z.shape[0])

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return all(
            np.all(np.abs(np.linalg.norm(m, axis=0) - 1.0) <= tol) for m in (self.X, self.Y, self.Z)
        )

    def replace(self, **kw) -> "CpFactors":
        d = dict(alpha=self.alpha, X=self.X, Y=self.Y, Z=self.Z)
        d.update(kw)
        return CpFactors(**d)


@dataclass(frozen=True)
class ObjectiveValue:
    residual_half: float
    l1_penalty: float

    @property
    def total(self) -> float:
        return self.residual_half + self.l1_penalty


def normalize_columns(M: np.ndarray) -> np.ndarray:
    return M / np.linalg.norm(M, axis=0)


def reconstruct(f: CpFactors) -> np.ndarray:
    return np.einsum("r,ir,jr,kr->ijk", f.alpha, f.X, f.Y, f.Z)


def update_matrices(f: CpFactors):
    """Return ``(U, V, W)`` with U = D (Z kr Y)^T, V = D (Z kr X)^T, W = D (Y kr X)^T.

    They satisfy ``matricize(reconstruct(f), 1) == X @ U`` and likewise for
    modes 2 and 3.
    """
    a = f.alpha[:, None]
    U = a * khatri_rao(f.Z, f.Y).T
    V = a * khatri_rao(f.Z, f.X).T
    W = a * khatri_rao(f.Y, f.X).T
    return U, V, W


def q_matrix(f: CpFactors) -> np.ndarray:
    """R x IJK matrix whose row r is the vectorized rank-one term ``x_r o y_r o z_r``."""
    return khatri_rao(khatri_rao(f.X, f.Y), f.Z).T


def gram_product(*mats: np.ndarray) -> np.ndarray:
    """Hadamard product of the Gram matrices ``M^T M``.

    ``(X kr Y)^T (X kr Y) = (X^T X) * (Y^T Y)``, so ``Q Q^T`` and ``U U^T``
    can be formed without touching the long dimension.
    """
    G = np.ones((mats[0].shape[1],) * 2)
    for m in mats:
        G = G * (m.T @ m)
    return G


def _check_dims(A: np.ndarray, f: CpFactors):
    if A.shape != f.dims:
        raise TensorError(f"tensor dims {A.shape} do not match factor dims {f.dims}")


def objective(A: np.ndarray, f: CpFactors, lam: float) -> ObjectiveValue:
    _check_dims(A, f)
    r = A - reconstruct(f)
    return ObjectiveValue(0.5 * float(np.vdot(r, r)), lam * float(np.abs(f.alpha).sum()))


def gradients(A: np.ndarray, f: CpFactors):
    """Partial gradients of ``1/2 ||A - [alpha; X, Y, Z]||^2``.

    Returns ``(G_X, G_Y, G_Z, g_alpha)`` computed from the unfolded forms
    ``(X U - A_(1)) U^T`` etc. and ``(alpha Q - a) Q^T``.
    """
    _check_dims(A, f)
    U, V, W = update_matrices(f)
    G_X = (f.X @ U - matricize(A, 1)) @ U.T
    G_Y = (f.Y @ V - matricize(A, 2)) @ V.T
    G_Z = (f.Z @ W - matricize(A, 3)) @ W.T
    Q = q_matrix(f)
    g_alpha = (f.alpha @ Q - vectorize(A)) @ Q.T
    return G_X, G_Y, G_Z, g_alpha


def count_nonzero(alpha, tol: float = 0.0) -> int:
    """Estimated rank: number of coefficients with ``|alpha_r| > tol``."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return int(np.count_nonzero(np.abs(np.asarray(alpha)) > tol))
