import itertools

import numpy as np
import pytest

from betfolio.kelly import bivariate_kelly
from betfolio.solver import (DomainError, InfeasibleError, SolveOptions, check_gradient,
                             maximize_concave, project_capped_simplex, solve_qp)


def test_projection_examples():
    x = np.array([0.2, 0.3])
    np.testing.assert_array_equal(project_capped_simplex(x, 1.0), x)
    np.testing.assert_allclose(project_capped_simplex([2.0, 0.0], 1.0), [1.0, 0.0])
    np.testing.assert_allclose(project_capped_simplex([0.8, 0.8], 1.0), [0.5, 0.5])
    np.testing.assert_allclose(project_capped_simplex([-1.0, 0.4], 1.0), [0.0, 0.4])


def test_projection_is_closest_feasible_point():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(0.3, 1.0, 5)
        px = project_capped_simplex(x, 0.9)
        assert np.all(px >= 0) and px.sum() <= 0.9 + 1e-12
        np.testing.assert_allclose(project_capped_simplex(px, 0.9), px, atol=1e-15)
        ys = rng.dirichlet(np.ones(5), size=1000) * rng.uniform(0, 0.9, (1000, 1))
        assert np.all(np.linalg.norm(x - px) <= np.linalg.norm(x - ys, axis=1) + 1e-12)


def test_maximize_concave_interior_quadratic():
    x0 = np.array([0.2, 0.1, 0.3])
    out = maximize_concave(lambda x: (-np.sum((x - x0) ** 2), -2 * (x - x0)), np.zeros(3), 1.0)
    assert out.converged
    np.testing.assert_allclose(out.point, x0, atol=1e-6)


def test_maximize_concave_linear_hits_cap():
    c = np.array([1.0, 2.0, 0.5])
    out = maximize_concave(lambda x: (float(c @ x), c), np.zeros(3), 0.7)
    assert out.point.sum() == pytest.approx(0.7, abs=1e-12)
    np.testing.assert_allclose(out.point, [0.0, 0.7, 0.0], atol=1e-12)
    assert out.converged


def test_maximize_concave_matches_closed_form_kelly():
    o, p = 2.5, 0.5

    def ev(x):
        s = x[0]
        g = p * np.log1p((o - 1) * s) + (1 - p) * np.log1p(-s)
        return g, np.array([p * (o - 1) / (1 + (o - 1) * s) - (1 - p) / (1 - s)])

    out = maximize_concave(ev, [0.0], 1 - 1e-6)
    assert out.point[0] == pytest.approx(bivariate_kelly(o, p), abs=1e-6)


def test_maximize_concave_monotone_and_deterministic():
    trace = []

    def ev(x):
        v = float(np.sum(np.log1p(x * np.array([1.0, 2.0, 3.0]))) - 4 * np.sum(x) ** 2)
        trace.append(v)
        return v, np.array([1.0, 2.0, 3.0]) / (1 + x * np.array([1.0, 2.0, 3.0])) - 8 * np.sum(x)

    a = maximize_concave(ev, np.zeros(3), 1.0)
    b = maximize_concave(ev, np.zeros(3), 1.0)
    np.testing.assert_array_equal(a.point, b.point)
    assert a.converged and a.kkt_residual <= 1e-7


def test_maximize_concave_start_outside_domain():
    def ev(x):
        raise DomainError("nope")

    with pytest.raises(DomainError):
        maximize_concave(ev, np.zeros(2), 1.0)


def test_non_convergence_is_flagged():
    w = np.array([1.0, 2.0, 3.0])
    ev = lambda x: (float(np.sum(np.log1p(w * x)) - 4 * np.sum(x) ** 2), w / (1 + w * x) - 8 * np.sum(x))
    out = maximize_concave(ev, np.zeros(3), 1.0, SolveOptions(max_iters=2))
    assert out.iterations == 2
    assert not out.converged and out.kkt_residual > 1e-7
    assert out.objective > 0.0


def test_qp_symmetric():
    out = solve_qp(np.eye(2), np.ones((1, 2)), [1.0])
    np.testing.assert_allclose(out.point, [0.5, 0.5], atol=1e-12)
    assert out.converged


def test_qp_infeasible():
    with pytest.raises(InfeasibleError):
        solve_qp(np.eye(2), np.ones((1, 2)), [-1.0])


def _enumerate_active_sets(Q, A, b):
    """Best feasible KKT point over every choice of free variables."""
    n = Q.shape[0]
    best = (np.inf, None)
    for k in range(1, n + 1):
        for free in itertools.combinations(range(n), k):
            free = list(free)
            Af = A[:, free]
            K = np.block([[2 * Q[np.ix_(free, free)], Af.T], [Af, np.zeros((A.shape[0],) * 2)]])
            try:
                sol = np.linalg.solve(K, np.concatenate([np.zeros(k), b]))
            except np.linalg.LinAlgError:
                continue
            x = np.zeros(n)
            x[free] = sol[:k]
            if np.all(x >= -1e-12) and np.allclose(A @ x, b, atol=1e-10):
                val = x @ Q @ x
                if val < best[0]:
                    best = (val, x)
    return best


@pytest.mark.parametrize("seed", range(12))
def test_qp_matches_active_set_enumeration(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 5)
    L = rng.normal(size=(n, n))
    Q = L @ L.T + 0.05 * np.eye(n)
    A = np.vstack([rng.uniform(-0.5, 1.5, n), np.ones(n)])
    x_feas = rng.dirichlet(np.ones(n))
    b = A @ x_feas
    out = solve_qp(Q, A, b)
    val, x = _enumerate_active_sets(Q, A, b)
    assert out.objective == pytest.approx(val, abs=1e-8)
    assert np.max(np.abs(A @ out.point - b)) <= 1e-8
    assert out.kkt_residual <= 1e-7
    nu = 2 * Q @ out.point
    lam, *_ = np.linalg.lstsq(A[:, out.point > 0].T, nu[out.point > 0], rcond=None)
    assert np.all(np.abs(out.point * (nu - A.T @ lam)) <= 1e-7)


def test_check_gradient_quadratic_and_fault_injection():
    H = np.array([[2.0, 0.5], [0.5, 1.0]])
    good = lambda x: (0.5 * x @ H @ x, H @ x)
    bad = lambda x: (0.5 * x @ H @ x, 1.1 * (H @ x))
    pt = np.array([0.3, 0.4])
    assert check_gradient(good, pt) <= 1e-9
    assert check_gradient(bad, pt) >= 0.05
