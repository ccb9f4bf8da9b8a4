import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensorank.cp import CpFactors, count_nonzero, gradients, objective, q_matrix, reconstruct, update_matrices
from tensorank.solver import (
    DegenerateColumnError,
    LassoProblem,
    SolverConfig,
    kkt_residual,
    lasso_solve_ista,
    lasso_stationarity,
    lrat_solve,
    lrat_step,
    modals_solve,
    soft_threshold,
)
from tensorank.tensor import outer3, vectorize

from helpers import random_factors


def literal_step(A, f, lam, s):
    """One outer iteration written directly from the block formulas with Q materialized."""
    alpha, X, Y, Z = f.alpha, f.X, f.Y, f.Z
    out = {}
    for name in "XYZ":
        g = CpFactors(alpha, X, Y, Z)
        U, V, W = update_matrices(g)
        G_X, G_Y, G_Z, _ = gradients(A, g)
        M, G, cur = {"X": (U, G_X, X), "Y": (V, G_Y, Y), "Z": (W, G_Z, Z)}[name]
        L = max(np.linalg.norm(M @ M.T), 1.0)
        D = cur - G / (s * L)
        D = D / np.linalg.norm(D, axis=0)
        out[name] = L
        X, Y, Z = (D if n == name else m for n, m in zip("XYZ", (X, Y, Z)))
    g = CpFactors(alpha, X, Y, Z)
    Q = q_matrix(g)
    eta = max(np.linalg.norm(Q @ Q.T), 1.0)
    beta = alpha - (alpha @ Q - vectorize(A)) @ Q.T / (s * eta)
    tau = lam / (s * eta)
    alpha = np.sign(beta) * np.maximum(np.abs(beta) - tau, 0.0)
    return CpFactors(alpha, X, Y, Z), (out["X"], out["Y"], out["Z"], eta)


# ---------------------------------------------------------------- soft threshold

def test_soft_threshold_identity():
    v = np.array([1.0, -2.0, 0.0, 3.5])
    np.testing.assert_array_equal(soft_threshold(v, 0.0), v)


def test_soft_threshold_example():
    np.testing.assert_allclose(soft_threshold([1.2, -0.3, 0.5], 0.5), [0.7, 0.0, 0.0], atol=1e-15)
    assert soft_threshold([0.5], 0.5)[0] == 0.0


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0))
def test_soft_threshold_subgradient_optimality(seed, tau):
    v = np.random.default_rng(seed).standard_normal(8) * 2
    u = soft_threshold(v, tau)
    for ui, vi in zip(u, v):
        if ui != 0:
            assert abs((ui - vi) + tau * np.sign(ui)) <= 1e-12
        else:
            assert abs(vi) <= tau + 1e-12


def test_soft_threshold_rejects_negative_tau():
    with pytest.raises(ValueError):
        soft_threshold([1.0], -0.1)


# ---------------------------------------------------------------- single step

@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([0.0, 0.01, 0.3]))
def test_step_matches_literal_formulas(seed, lam):
    rng = np.random.default_rng(seed)
    f = random_factors(rng, (4, 3, 5), 3)
    A = rng.standard_normal((4, 3, 5))
    new, info = lrat_step(A, f, SolverConfig(R=3, lam=lam))
    ref, consts = literal_step(A, f, lam, 1.5)
    for a, b in zip((new.alpha, new.X, new.Y, new.Z), (ref.alpha, ref.X, ref.Y, ref.Z)):
        np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose((info.d_n, info.e_n, info.f_n, info.eta_n), consts, rtol=1e-12)
    assert info.objective.total == pytest.approx(objective(A, new, lam).total, rel=1e-10, abs=1e-14)


def test_exact_fit_is_fixed_point():
    f = random_factors(np.random.default_rng(1), (4, 3, 2), 3)
    new, info = lrat_step(reconstruct(f), f, SolverConfig(R=3))
    for a, b in zip((new.alpha, new.X, new.Y, new.Z), (f.alpha, f.X, f.Y, f.Z)):
        np.testing.assert_allclose(a, b, atol=1e-10)
    assert info.step_gap < 1e-10


def test_huge_lambda_zeroes_alpha():
    rng = np.random.default_rng(2)
    f = random_factors(rng, (4, 4, 4), 3)
    new, _ = lrat_step(rng.standard_normal((4, 4, 4)), f, SolverConfig(R=3, lam=1e6))
    assert np.all(new.alpha == 0)


def test_step_descent_margin_and_invariants():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((5, 5, 5))
    cfg = SolverConfig(R=4, lam=0.01)
    f = random_factors(rng, (5, 5, 5), 4)
    psi = objective(A, f, cfg.lam).total
    for _ in range(200):
        f, info = lrat_step(A, f, cfg)
        assert psi - info.objective.total >= cfg.descent_margin * info.step_gap**2 - 1e-9
        assert f.is_normalized(1e-10)
        assert min(info.d_n, info.e_n, info.f_n, info.eta_n) >= 1.0
        psi = info.objective.total


def test_step_requires_unit_columns():
    f = random_factors(np.random.default_rng(4), (3, 3, 3), 2)
    with pytest.raises(ValueError):
        lrat_step(np.zeros((3, 3, 3)), f.replace(X=2 * f.X), SolverConfig(R=2))


def test_degenerate_column_raises():
    # 1x1x1 with alpha = 1, unit factors and A = -0.5: D = 1 - (1 + 0.5)/1.5 = 0
    one = np.ones((1, 1))
    f = CpFactors(np.ones(1), one, one, one)
    with pytest.raises(DegenerateColumnError, match="degenerate column"):
        lrat_step(np.full((1, 1, 1), -0.5), f, SolverConfig(R=1))


# ---------------------------------------------------------------- full solve

def test_zero_tensor():
    res = lrat_solve(np.zeros((4, 3, 2)), SolverConfig(R=3, lam=0.1))
    assert res.estimated_rank == 0
    assert np.all(res.factors.alpha == 0)


def test_result_invariants_and_boundedness():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((5, 4, 3))
    cfg = SolverConfig(R=4, lam=0.05, record_trace=True)
    res = lrat_solve(A, cfg)
    tr = res.trace
    assert res.estimated_rank == np.count_nonzero(res.factors.alpha) <= cfg.R
    assert res.descent_violations == 0
    obj = tr.objectives()
    assert np.all(np.diff(obj) <= 1e-12)
    assert len(tr.rows) == res.iterations
    # |alpha|_1 <= Psi_0 / lam for every iterate
    assert np.all(tr.column("objective") >= 0)
    assert np.abs(res.factors.alpha).sum() <= obj[0] / cfg.lam
    assert np.all(tr.column("nnz") <= cfg.R)


def test_converged_gap_small():
    rng = np.random.default_rng(6)
    f = random_factors(rng, (5, 5, 5), 3)
    A = reconstruct(f) + 0.01 * rng.standard_normal((5, 5, 5))
    cfg = SolverConfig(R=3, lam=0.01, record_trace=True)
    res = lrat_solve(A, cfg)
    assert res.converged
    tol = cfg.conv_tol * max(1.0, res.trace.initial_objective)
    assert res.trace.column("step_gap")[-1] < np.sqrt(tol / cfg.descent_margin + 1e-9)


def test_exact_zeros_in_estimated_rank():
    rng = np.random.default_rng(7)
    A = reconstruct(random_factors(rng, (6, 6, 6), 2)) + 0.01 * rng.standard_normal((6, 6, 6))
    res = lrat_solve(A, SolverConfig(R=6, lam=0.05))
    assert count_nonzero(res.factors.alpha, 0.0) == count_nonzero(res.factors.alpha, 1e-12)


def test_rank_one_monte_carlo():
    ok = 0
    for s in range(50):
        rng = np.random.default_rng(1000 + s)
        x, y, z = (v / np.linalg.norm(v) for v in rng.standard_normal((3, 10)))
        A = rng.uniform(1, 2) * outer3(x, y, z)
        res = lrat_solve(A, SolverConfig(R=3, lam=1e-4, seed=s))
        ok += res.estimated_rank == 1 and res.objective.residual_half < 1e-6
    assert ok >= 45


def test_modals_matches_lrat_at_zero_lambda():
    A = np.random.default_rng(8).standard_normal((4, 4, 4))
    cfg = SolverConfig(R=3, iter_max=300, record_trace=True)
    a = lrat_solve(A, cfg)
    b = modals_solve(A, cfg.replace(lam=0.7))
    assert a.trace.rows == b.trace.rows
    assert np.array_equal(a.factors.alpha, b.factors.alpha)


def test_modals_residual_monotone():
    rng = np.random.default_rng(9)
    A = reconstruct(random_factors(rng, (5, 5, 5), 3))
    res = modals_solve(A, SolverConfig(R=5, record_trace=True))
    assert np.all(np.diff(res.trace.column("residual_half")) <= 1e-12)


def test_init_mismatch_rejected():
    f = random_factors(np.random.default_rng(10), (3, 3, 3), 2)
    with pytest.raises(ValueError):
        lrat_solve(np.zeros((3, 3, 3)), SolverConfig(R=3), init=f)


def test_descent_violation_is_logged(caplog, monkeypatch):
    import tensorank.solver as solver

    monkeypatch.setattr(solver, "DESCENT_SLACK", -1.0)
    with caplog.at_level(logging.WARNING, logger="tensorank.solver"):
        res = lrat_solve(np.random.default_rng(11).standard_normal((3, 3, 3)), SolverConfig(R=2, iter_max=3))
    assert res.descent_violations >= 1
    assert "descent margin" in caplog.text


@pytest.mark.parametrize(
    "kw", [dict(R=0), dict(R=2, lam=-1), dict(R=2, s=1.0), dict(R=2, iter_max=0), dict(R=2, conv_tol=0), dict(R=2, seed=-1)]
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# ---------------------------------------------------------------- KKT

def test_kkt_exact_fit():
    f = random_factors(np.random.default_rng(12), (4, 3, 2), 2)
    assert kkt_residual(reconstruct(f), f, 0.0) < 1e-12


def test_kkt_after_convergence_and_perturbation():
    rng = np.random.default_rng(0)
    A = reconstruct(random_factors(rng, (5, 5, 5), 3)) + 0.01 * rng.standard_normal((5, 5, 5))
    res = lrat_solve(A, SolverConfig(R=3, lam=0.01))
    assert res.converged
    assert res.kkt_residual < 1e-4
    bumped = res.factors.replace(alpha=res.factors.alpha + 0.1)
    assert kkt_residual(A, bumped, 0.01) > res.kkt_residual


# ---------------------------------------------------------------- lasso

def unit_design(rng, n, R):
    B = rng.standard_normal((n, R))
    return B / np.linalg.norm(B, axis=0)


def test_lasso_zero_observation():
    B = unit_design(np.random.default_rng(14), 20, 5)
    theta, support = lasso_solve_ista(LassoProblem(B, np.zeros(20), 0.1))
    assert np.all(theta == 0) and support.size == 0


def test_lasso_null_threshold():
    rng = np.random.default_rng(15)
    B = unit_design(rng, 20, 5)
    b = rng.standard_normal(20)
    lam = np.max(np.abs(B.T @ b))
    theta, _ = lasso_solve_ista(LassoProblem(B, b, lam))
    assert np.all(theta == 0)


def test_lasso_scalar():
    B = unit_design(np.random.default_rng(16), 6, 1)
    theta, support = lasso_solve_ista(LassoProblem(B, 2 * B[:, 0], 0.5))
    assert theta[0] == pytest.approx(1.5, abs=1e-8)
    assert support.tolist() == [0]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_lasso_stationarity(seed, lam):
    rng = np.random.default_rng(seed)
    p = LassoProblem(unit_design(rng, 30, 6), rng.standard_normal(30), lam)
    theta, support = lasso_solve_ista(p)
    assert lasso_stationarity(p, theta) <= 1e-6
    assert np.array_equal(support, np.flatnonzero(theta))


def test_lasso_requires_unit_columns():
    with pytest.raises(ValueError):
        LassoProblem(np.ones((3, 2)), np.zeros(3), 0.1)
