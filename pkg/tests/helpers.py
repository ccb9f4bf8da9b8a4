"""Independent oracles shared by the tests."""
import numpy as np

from tensorank.cp import CpFactors


def random_factors(rng, dims, R, alpha_scale=1.0):
    mats = [rng.standard_normal((n, R)) for n in dims]
    mats = [m / np.linalg.norm(m, axis=0) for m in mats]
    return CpFactors(alpha_scale * rng.standard_normal(R), *mats)


def brute_reconstruct(f):
    I, J, K = f.dims
    T = np.zeros((I, J, K))
    for r in range(f.R):
        for i in range(I):
            for j in range(J):
                for k in range(K):
                    T[i, j, k] += f.alpha[r] * f.X[i, r] * f.Y[j, r] * f.Z[k, r]
    return T


def half_residual(A, alpha, X, Y, Z):
    r = A - np.einsum("r,ir,jr,kr->ijk", alpha, X, Y, Z)
    return 0.5 * float(np.sum(r * r))


def fd_gradients(A, f, h=1e-6):
    """Central differences of the half squared residual in every coordinate."""
    blocks = [f.alpha.copy(), f.X.copy(), f.Y.copy(), f.Z.copy()]
    grads = []
    for b in range(4):
        G = np.zeros_like(blocks[b])
        for idx in np.ndindex(G.shape):
            plus = [m.copy() for m in blocks]
            minus = [m.copy() for m in blocks]
            plus[b][idx] += h
            minus[b][idx] -= h
            G[idx] = (half_residual(A, *plus) - half_residual(A, *minus)) / (2 * h)
        grads.append(G)
    g_alpha, G_X, G_Y, G_Z = grads
    return G_X, G_Y, G_Z, g_alpha
