import json

import numpy as np
import pytest

from cliffpi.beltrami import (BeltramiDivergence, BeltramiProblem, InvalidProblem, contraction_bound, load_problem,
                              manufactured_q, pi_norm_estimate, residual, solve)
from cliffpi.geometry import ManifoldSpec, build_grid
from cliffpi.operators import FieldSample, sample
from cliffpi.suites import linear_monogenic, manufactured_target


@pytest.fixture(scope="module")
def grid():
    return build_grid(ManifoldSpec("euclid", 2), None, 8)


def const_q(grid, value):
    q = np.zeros((grid.size, 4))
    q[:, 0] = value
    return FieldSample(grid, q)


def phi(grid):
    return sample(grid, lambda p: linear_monogenic(p, 2), boundary=False)


def test_pi_norm_close_to_one(grid):
    assert 0.9 < pi_norm_estimate(grid) < 1.2


def test_solve_converges_geometrically(grid):
    prob = BeltramiProblem(const_q(grid, 0.3), phi(grid), 1e-10, 300)
    f, tr = solve(prob)
    assert tr.converged and tr.certified
    assert tr.decay_ratio() <= tr.contraction_bound + 0.05
    assert all(u >= 0 for u in tr.update_norms)
    assert residual(f, prob.q) <= 10 * grid.h


def test_zero_q_returns_phi(grid):
    p = phi(grid)
    f, tr = solve(BeltramiProblem(const_q(grid, 0.0), p))
    assert np.allclose(f.values, p.values)
    assert tr.contraction_bound == 0.0


def test_monotone_certification(grid):
    bounds = [contraction_bound(BeltramiProblem(const_q(grid, q), phi(grid))) for q in (0.4, 0.3, 0.2, 0.1)]
    assert all(b1 <= b0 for b0, b1 in zip(bounds, bounds[1:]))


def test_divergence_is_reported(grid):
    with pytest.raises(BeltramiDivergence) as exc:
        solve(BeltramiProblem(const_q(grid, 3.0), phi(grid), 1e-10, 200))
    assert exc.value.trace.iterations >= 5


def test_invalid_problems(grid):
    bad = sample(grid, lambda p: np.stack([p[:, 0] ** 2 * 40, 0 * p[:, 0], 0 * p[:, 0], 0 * p[:, 0]], 1))
    with pytest.raises(InvalidProblem):
        BeltramiProblem(const_q(grid, 0.1), bad)
    q = const_q(grid, 0.1)
    q.values[0, 0] = np.nan
    with pytest.raises(InvalidProblem):
        BeltramiProblem(q, phi(grid))


def test_manufactured_q_is_clipped(grid):
    fstar = sample(grid, lambda p: manufactured_target(p, 2), boundary=False)
    q = manufactured_q(fstar)
    assert np.linalg.norm(q.values, axis=1).max() <= 0.3 + 1e-12


def test_trace_csv_and_loader(tmp_path, grid):
    cfg = {"manifold": {"kind": "euclid", "n": 2}, "resolution": 8,
           "q": {"e0": "0.2", "e12": "0.1*x0"}, "phi": {"e0": "x1", "e1": "-x0"}, "tol": 1e-9}
    p = tmp_path / "prob.json"
    p.write_text(json.dumps(cfg))
    prob = load_problem(p)
    _, tr = solve(prob)
    tr.to_csv(tmp_path / "trace.csv")
    rows = (tmp_path / "trace.csv").read_text().splitlines()
    assert rows[0] == "iteration,update_norm" and len(rows) == tr.iterations + 1
