"""Fixed-point solver for Beltrami equations D f = q Dbar f."""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .algebra import tables
from .expr import multivector_field
from .geometry import DomainGrid, ManifoldSpec, build_grid, domain_from_dict
from .operators import (FieldSample, dirac_operator, inverse_apply, l2_norm, pi_adjoint_apply, pi_matrix_apply,
                        resolve_variant, sample)

log = logging.getLogger(__name__)

POWER_ITERATIONS = 50
DIVERGENCE_STEPS = 5


class BeltramiDivergence(RuntimeError):
    def __init__(self, message: str, trace: "SolveTrace"):
        super().__init__(message)
        self.trace = trace


class InvalidProblem(ValueError):
    pass


@dataclass
class BeltramiProblem:
    q: FieldSample
    phi: FieldSample
    tol: float = 1e-8
    max_iter: int = 200
    check_seed: bool = True

    def __post_init__(self):
        if self.q.grid is not self.phi.grid:
            raise InvalidProblem("q and phi must share a grid")
        if not np.all(np.isfinite(self.q.values)):
            raise InvalidProblem("q must be finite")
        if self.check_seed:
            r = seed_residual(self.phi)
            if r > 10 * self.grid.h:
                raise InvalidProblem(f"phi is not monogenic: Dirac residual {r:.3g} > 10h")

    @property
    def grid(self) -> DomainGrid:
        return self.q.grid

    @property
    def spec(self) -> ManifoldSpec:
        return self.q.grid.spec

    @property
    def q_sup(self) -> float:
        return float(np.max(np.linalg.norm(self.q.values, axis=1))) if self.q.values.size else 0.0


@dataclass
class SolveTrace:
    iterations: int = 0
    update_norms: list[float] = field(default_factory=list)
    final_residual: float = math.nan
    contraction_bound: float = math.nan
    certified: bool = False
    converged: bool = False
    metadata: dict = field(default_factory=dict)

    def decay_ratio(self) -> float:
        """Geometric-mean ratio of successive nonzero update norms."""
        u = np.array([v for v in self.update_norms if v > 0])
        if u.size < 3:
            return 0.0
        # skip the first step (from h0) and fit log-linear decay
        k = np.arange(1, u.size)
        slope = np.polyfit(k, np.log(u[1:]), 1)[0]
        return float(math.exp(slope))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "update_norm"])
            for i, v in enumerate(self.update_norms, 1):
                w.writerow([i, repr(float(v))])


def interior_l2(grid: DomainGrid, values: np.ndarray) -> float:
    return l2_norm(grid, values, grid.interior_mask(3.0))


def seed_residual(phi: FieldSample) -> float:
    D = dirac_operator(phi.grid, resolve_variant(phi.spec, "D"))
    return interior_l2(phi.grid, D.apply(phi.values))


def pi_norm_estimate(grid: DomainGrid, iterations: int = POWER_ITERATIONS, seed: int = 0) -> float:
    """Power iteration for the weighted-L2 operator norm of the discrete Pi."""
    key = ("pi_norm", iterations, seed)
    if key in grid.cache:
        return grid.cache[key]
    rng = np.random.default_rng(seed)
    N = 1 << grid.spec.n
    v = rng.normal(size=(grid.size, N))
    v /= l2_norm(grid, v)
    est = 0.0
    for _ in range(iterations):
        w = pi_adjoint_apply(grid, pi_matrix_apply(grid, v))
        est = math.sqrt(max(float(np.sum(grid.measure[:, None] * v * w)), 0.0))
        nw = l2_norm(grid, w)
        if nw == 0:
            break
        v = w / nw
    grid.cache[key] = est
    return est


def contraction_bound(problem: BeltramiProblem) -> float:
    qs = problem.q_sup
    if qs == 0:
        return 0.0
    return qs * max(pi_norm_estimate(problem.grid), 1.0)


def adjoint_gap(grid: DomainGrid, seed: int = 0) -> float:
    """Relative distance between the numerical adjoint of D and -Dbar on a bump."""
    from .fields import random_bumps

    v = random_bumps(grid, np.random.default_rng(seed), 1)[0]
    D = dirac_operator(grid, resolve_variant(grid.spec, "D"))
    Db = dirac_operator(grid, resolve_variant(grid.spec, "Dbar"))
    w = grid.measure[:, None]
    adj = D.apply(v * w, transpose=True) / w
    ref = Db.apply(v)
    m = grid.interior_mask(3.0)
    return l2_norm(grid, adj + ref, m) / l2_norm(grid, ref, m)


def residual(f: FieldSample, q: FieldSample) -> float:
    """Interior L2 norm of D f - q Dbar f."""
    if f.grid is not q.grid:
        raise ValueError("f and q live on different grids")
    grid = f.grid
    t = tables(grid.spec.n)
    D = dirac_operator(grid, resolve_variant(grid.spec, "D"))
    Db = dirac_operator(grid, resolve_variant(grid.spec, "Dbar"))
    r = D.apply(f.values) - t.gp(q.values, Db.apply(f.values))
    return interior_l2(grid, r)


def solve(problem: BeltramiProblem, h0: np.ndarray | None = None) -> tuple[FieldSample, SolveTrace]:
    """Iterate h <- q (Dbar phi + Pi h) and return f = phi + T h / c."""
    grid = problem.grid
    t = tables(grid.spec.n)
    Db = dirac_operator(grid, resolve_variant(grid.spec, "Dbar"))
    trace = SolveTrace()
    trace.contraction_bound = contraction_bound(problem)
    trace.certified = trace.contraction_bound < 1.0
    if not trace.certified:
        log.warning("no contraction certificate: bound %.3g >= 1", trace.contraction_bound)
    trace.metadata["adjoint_gap"] = adjoint_gap(grid)
    q = problem.q.values
    src = Db.apply(problem.phi.values)
    h = np.zeros_like(src) if h0 is None else np.array(h0, dtype=float)
    growth = 0
    for k in range(problem.max_iter):
        h_new = t.gp(q, src + pi_matrix_apply(grid, h))
        upd = l2_norm(grid, h_new - h)
        trace.update_norms.append(upd)
        trace.iterations = k + 1
        h = h_new
        if len(trace.update_norms) > 1 and upd > trace.update_norms[-2]:
            growth += 1
            if growth >= DIVERGENCE_STEPS:
                raise BeltramiDivergence(f"update norm grew for {DIVERGENCE_STEPS} consecutive iterations", trace)
        else:
            growth = 0
        if upd <= problem.tol:
            trace.converged = True
            break
    f = FieldSample(grid, problem.phi.values + inverse_apply(grid, h))
    trace.metadata["h"] = h
    trace.final_residual = residual(f, problem.q)
    return f, trace


def manufactured_q(f_star: FieldSample, cap: float = 0.3) -> FieldSample:
    """q* = (D f*)(Dbar f*)^{-1} cell by cell, zero where singular, clipped to |q| <= cap."""
    grid = f_star.grid
    t = tables(grid.spec.n)
    D = dirac_operator(grid, resolve_variant(grid.spec, "D"))
    Db = dirac_operator(grid, resolve_variant(grid.spec, "Dbar"))
    a = D.apply(f_star.values)
    b = Db.apply(f_star.values)
    q = np.zeros_like(a)
    for i in range(grid.size):
        # q b = a  <=>  R_b^T-style solve through the right-multiplication matrix
        R = np.stack([t.gp(t.unit(j), b[i]) for j in range(t.dim)], axis=1)
        if np.linalg.cond(R) < 1e8:
            q[i] = np.linalg.solve(R, a[i])
    norms = np.linalg.norm(q, axis=1)
    scale = np.where(norms > cap, cap / np.maximum(norms, 1e-300), 1.0)
    return FieldSample(grid, q * scale[:, None])


def load_problem(source: str | Path | dict) -> BeltramiProblem:
    """Problem from JSON: manifold, domain, resolution, q and phi blade expressions."""
    if not isinstance(source, dict):
        source = json.loads(Path(source).read_text())
    spec = ManifoldSpec(**source["manifold"])
    grid = build_grid(spec, domain_from_dict(source.get("domain"), spec), int(source.get("resolution", 16)))
    q = sample(grid, multivector_field(source["q"], spec.n), boundary=False)
    phi = sample(grid, multivector_field(source.get("phi", {"e0": "1"}), spec.n), boundary=False)
    return BeltramiProblem(q, phi, float(source.get("tol", 1e-8)), int(source.get("max_iter", 200)))
