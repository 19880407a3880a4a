"""Named verification suites and their JSON/CSV reports."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .algebra import Multivector, involution, invert_paravector, pq_split, tables
from .beltrami import BeltramiProblem, contraction_bound, manufactured_q, solve
from .fields import random_bumps, random_dirac_images, smooth_field
from .geometry import InvalidSpec, ManifoldSpec, build_grid, domain_from_dict
from .operators import (adjoint_residual, borel_pompeiu_residual, dirac_operator, lp_norm, pi_matrix_apply,
                        resolve_variant, sample)

log = logging.getLogger(__name__)

SCHEMA = 1
SUITES = ("clifford", "borel-pompeiu", "isometry", "adjoint", "spectrum", "lp-bound", "beltrami")

DEFAULTS = {
    "clifford": {"manifold": {"kind": "euclid", "n": 3}, "resolutions": [1]},
    "borel-pompeiu": {"manifold": {"kind": "euclid", "n": 2}, "resolutions": [8, 16, 32]},
    "isometry": {"manifold": {"kind": "euclid", "n": 2}, "resolutions": [8, 16, 32]},
    "adjoint": {"manifold": {"kind": "hyperbolic", "n": 2}, "resolutions": [8, 16]},
    "spectrum": {"manifold": {"kind": "rp", "n": 2, "bundle": 1}, "resolutions": [16, 32]},
    "lp-bound": {"manifold": {"kind": "hopf", "n": 2}, "resolutions": [8]},
    "beltrami": {"manifold": {"kind": "euclid", "n": 2}, "resolutions": [8, 12]},
}

DEFAULT_TOL = {
    "clifford": 1e-12, "borel-pompeiu": 0.05, "isometry": 0.05, "adjoint": 0.05,
    "spectrum": 0.05, "lp-bound": 1.05, "beltrami": 0.05,
}


class UsageError(ValueError):
    pass


@dataclass
class SuiteConfig:
    suite: str
    manifold: dict
    resolutions: list[int]
    tolerances: dict = field(default_factory=dict)
    seed: int = 0
    out: str | None = None
    format: str = "json"
    domain: dict | None = None
    samples: int | None = None

    def __post_init__(self):
        if self.suite not in SUITES:
            raise UsageError(f"unknown suite {self.suite!r}; choose from {', '.join(SUITES)}")
        if not self.resolutions or any(b <= a for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise UsageError("resolutions must be a non-empty strictly increasing list")
        if any(int(r) < 1 for r in self.resolutions):
            raise UsageError("resolutions must be positive")
        if self.format not in ("json", "csv"):
            raise UsageError("format must be json or csv")
        try:
            self.spec = ManifoldSpec(**self.manifold)
        except (InvalidSpec, TypeError) as exc:
            raise UsageError(f"invalid manifold: {exc}") from None

    @classmethod
    def from_dict(cls, suite: str, data: dict | None = None) -> SuiteConfig:
        base = json.loads(json.dumps(DEFAULTS.get(suite, {"manifold": {"kind": "euclid", "n": 2},
                                                         "resolutions": [8]})))
        data = dict(data or {})
        data.pop("suite", None)
        base.update(data)
        known = {f for f in cls.__dataclass_fields__}
        extra = set(base) - known
        if extra:
            raise UsageError(f"unknown config keys: {sorted(extra)}")
        return cls(suite=suite, **base)

    def tol(self, key: str | None = None) -> float:
        return float(self.tolerances.get(key or "default", self.tolerances.get("default", DEFAULT_TOL[self.suite])))

    def echo(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d["manifold"] = self.spec.to_dict()
        return d

    def grid(self, res: int):
        return build_grid(self.spec, domain_from_dict(self.domain, self.spec), res)


class Report:
    def __init__(self, config: SuiteConfig):
        self.config = config
        self.checks: list[dict] = []
        self.convergence: list[dict] = []
        self.tables: dict[str, list] = {}

    def check(self, name: str, value: float, bound: float, passed: bool | None = None) -> bool:
        value = float(value)
        ok = bool(value <= bound) if passed is None else bool(passed)
        if not math.isfinite(value):
            ok = False
        self.checks.append({"name": name, "value": value, "bound": float(bound), "pass": ok})
        log.info("%-48s %-4s value=%.4g bound=%.4g", name, "PASS" if ok else "FAIL", value, bound)
        return ok

    def row(self, h: float, residual: float, **extra) -> None:
        self.convergence.append({"h": float(h), "residual": float(residual), **extra})

    @property
    def passed(self) -> bool:
        return all(c["pass"] for c in self.checks)

    def to_dict(self) -> dict:
        d = {"schema": SCHEMA, "suite": self.config.suite, "config_echo": self.config.echo(),
             "checks": self.checks, "convergence": self.convergence}
        if self.tables:
            d["tables"] = self.tables
        return d


def observed_orders(hs, rs) -> list[float]:
    out = []
    for (h0, r0), (h1, r1) in zip(zip(hs, rs), zip(hs[1:], rs[1:])):
        if r0 > 0 and r1 > 0:
            out.append(math.log(r0 / r1) / math.log(h0 / h1))
        else:
            out.append(math.inf)
    return out


# -- suites ----------------------------------------------------------------

def _clifford(cfg: SuiteConfig, rep: Report) -> None:
    n = cfg.spec.n
    t = tables(n)
    rng = np.random.default_rng(cfg.seed)
    count = cfg.samples or 1000
    tol = cfg.tol()
    gen = 0.0
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            ei, ej = Multivector.blade(n, i), Multivector.blade(n, j)
            target = Multivector.scalar(n, -2.0 if i == j else 0.0)
            gen = max(gen, np.max(np.abs((ei * ej + ej * ei).coeffs - target.coeffs)))
    rep.check("generator_relations", gen, tol)
    inv = split = pinv = assoc = 0.0
    for _ in range(count):
        a = Multivector(n, rng.normal(size=t.dim))
        for kind in ("reversion", "conjugation", "bar", "hat"):
            inv = max(inv, np.max(np.abs(involution(involution(a, kind), kind).coeffs - a.coeffs)))
        P, Q, _ = pq_split(a)
        split = max(split, abs(P.norm2() + Q.norm2() - a.norm2()) / a.norm2())
        x = rng.normal(size=n + 1)
        xm = Multivector(n, t.embed(x))
        xi = invert_paravector(x)
        one = Multivector.scalar(n)
        pinv = max(pinv, np.max(np.abs((xm * xi).coeffs - one.coeffs)), np.max(np.abs((xi * xm).coeffs - one.coeffs)))
        b, c = Multivector(n, rng.normal(size=t.dim)), Multivector(n, rng.normal(size=t.dim))
        lhs, rhs = (a * b) * c, a * (b * c)
        assoc = max(assoc, np.max(np.abs(lhs.coeffs - rhs.coeffs)) / max(1.0, lhs.norm()))
    rep.check("involutions_involutive", inv, tol)
    rep.check("pq_norm_split", split, tol)
    rep.check("paravector_inverse", pinv, tol)
    rep.check("associativity_relative", assoc, tol)


def _bp(cfg: SuiteConfig, rep: Report) -> None:
    hs, rs = [], []
    for res in cfg.resolutions:
        g = cfg.grid(res)
        r = borel_pompeiu_residual(smooth_field(g, cfg.seed), cfg.tol(), max_targets=cfg.samples or 400)
        hs.append(g.h)
        rs.append(r.residual_l2)
        rep.row(g.h, r.residual_l2, residual_max=r.residual_max, resolution=res)
    rep.check("final_residual_l2", rs[-1], cfg.tol())
    if len(rs) > 1:
        orders = observed_orders(hs, rs)
        rep.check("min_observed_order", min(orders), 1.0, passed=min(orders) >= 1.0)
        rep.check("constant_C_in_Ch", max(r / h for r, h in zip(rs, hs)), math.inf)


def isometry_defects(grid, rng, count: int = 10) -> np.ndarray:
    """|<Pi f, Pi f> / <f, f> - 1| for fields f = D u with u compactly supported."""
    f, _ = random_dirac_images(grid, rng, count)
    P = pi_matrix_apply(grid, f)
    w = grid.measure[None, :, None]
    return np.abs(np.sum(w * P * P, axis=(1, 2)) / np.sum(w * f * f, axis=(1, 2)) - 1.0)


def _isometry(cfg: SuiteConfig, rep: Report) -> None:
    ds = []
    for res in cfg.resolutions:
        g = cfg.grid(res)
        d = isometry_defects(g, np.random.default_rng(cfg.seed), cfg.samples or 10)
        ds.append(float(d.max()))
        rep.row(g.h, ds[-1], mean_defect=float(d.mean()), resolution=res)
    rep.check("final_max_defect", ds[-1], cfg.tol())
    if len(ds) > 1:
        dec = all(b < a for a, b in zip(ds, ds[1:]))
        rep.check("defect_decreasing", float(dec), 1.0, passed=dec)


def orthogonality_residual(grid, rng, count: int = 20) -> float:
    """max |scalar <P f, Q(g) e_n>| / (|f| |g|) with the weighted product."""
    t = tables(grid.spec.n)
    fs = rng.normal(size=(count, grid.size, t.dim))
    gs = rng.normal(size=(count, grid.size, t.dim))
    w = grid.measure[None, :, None]
    pm = t.p_mask()
    P = fs * pm
    top = 1 << (grid.spec.n - 1)
    Q = np.zeros_like(gs)
    Q[..., :top] = gs[..., top:]
    Qe = t.gp(Q, t.en)
    val = np.abs(np.sum(w * P * Qe, axis=(1, 2)))
    nrm = np.sqrt(np.sum(w * fs ** 2, axis=(1, 2)) * np.sum(w * gs ** 2, axis=(1, 2)))
    return float(np.max(val / nrm))


def _adjoint(cfg: SuiteConfig, rep: Report) -> None:
    res_vals, hs = [], []
    for res in cfg.resolutions:
        g = cfg.grid(res)
        r = adjoint_residual(g, "D", cfg.samples or 20, cfg.seed, cfg.tol())
        res_vals.append(r.residual_max)
        hs.append(g.h)
        rep.row(g.h, r.residual_max, resolution=res)
    rep.check("final_max_adjoint_residual", res_vals[-1], cfg.tol())
    if len(res_vals) > 1:
        o = min(observed_orders(hs, res_vals))
        rep.check("min_observed_order", o, 1.0, passed=o >= 1.0)
    if cfg.spec.kind == "hyperbolic":
        g = cfg.grid(cfg.resolutions[-1])
        rep.check("orthogonality_P_Qen", orthogonality_residual(g, np.random.default_rng(cfg.seed)), 1e-10)


def _spectrum(cfg: SuiteConfig, rep: Report) -> None:
    if cfg.spec.kind != "rp" or cfg.spec.n != 2 or cfg.spec.bundle != 1:
        raise UsageError("the spectrum suite runs on rp with n = 2 and bundle 1")
    m_max = int(cfg.tolerances.get("m_max", 1))
    last = None
    for res in cfg.resolutions:
        d = spectral.spectrum_check_dirac_rp(2, m_max, res, cfg.tol())
        c = spectral.spectrum_check_cauchy_rp(2, m_max, res, cfg.tol())
        rep.row(d.report.h, d.report.residual_max, cauchy_mismatch=c.report.residual_max, resolution=res)
        last = (d, c, res)
    d, c, res = last
    rep.tables["dirac_rp"] = d.table()
    rep.tables["cauchy_rp"] = c.table()
    rep.check("dirac_eigen_mismatch", d.report.residual_max, cfg.tol())
    rep.check("cauchy_eigen_mismatch", c.report.residual_max, cfg.tol())
    prod = spectral.eigen_product_check(2, m_max, res, 0.10)
    rep.check("dirac_times_cauchy_equals_2", prod.residual_max, 0.10)


def _lp(cfg: SuiteConfig, rep: Report) -> None:
    n = cfg.spec.n
    count = cfg.samples or 50
    for res in cfg.resolutions:
        g = cfg.grid(res)
        f = random_bumps(g, np.random.default_rng(cfg.seed), count)
        P = pi_matrix_apply(g, f)
        for p in (1.5, 2.0, 3.0):
            pstar = max(p, p / (p - 1))
            ratios = [lp_norm(g, P[i], p) / lp_norm(g, f[i], p) for i in range(count)]
            rep.check(f"lp_ratio[p={p:g},res={res}]", max(ratios), (n + 1) * (pstar - 1))
            if p == 2.0:
                rep.check(f"l2_ratio[res={res}]", max(ratios), cfg.tol())
        rep.row(g.h, float(max(ratios)), resolution=res)


def _beltrami(cfg: SuiteConfig, rep: Report) -> None:
    tol_solve = float(cfg.tolerances.get("solve", 1e-9))
    margin = cfg.tol()
    for res in cfg.resolutions:
        g = cfg.grid(res)
        n = cfg.spec.n
        N = 1 << n
        qconst = np.zeros(N)
        qconst[0] = 0.3
        q = sample(g, lambda p: np.tile(qconst, (p.shape[0], 1)), boundary=False)
        phi = sample(g, lambda p: linear_monogenic(p, n), boundary=False)
        prob = BeltramiProblem(q, phi, tol_solve, 300)
        f, tr = solve(prob)
        rep.row(g.h, tr.final_residual, resolution=res, iterations=tr.iterations,
                contraction_bound=tr.contraction_bound, adjoint_gap=tr.metadata["adjoint_gap"])
        rep.check(f"contraction_bound[res={res}]", tr.contraction_bound, 1.0, passed=tr.contraction_bound < 1.0)
        rep.check(f"decay_ratio[res={res}]", tr.decay_ratio(), tr.contraction_bound + margin)
        rep.check(f"fixed_point_residual[res={res}]", tr.final_residual, 10 * g.h + tol_solve)
        h0 = np.random.default_rng(cfg.seed).normal(size=phi.values.shape)
        _, tr2 = solve(prob, h0)
        gap = float(np.max(np.abs(tr.metadata["h"] - tr2.metadata["h"])))
        rep.check(f"uniqueness[res={res}]", gap, 2 * tol_solve)
        fstar = sample(g, lambda p: manufactured_target(p, n), boundary=False)
        qs = manufactured_q(fstar)
        _, tr3 = solve(BeltramiProblem(qs, phi, tol_solve, 300))
        rep.check(f"manufactured_residual[res={res}]", tr3.final_residual, 10 * g.h)


def linear_monogenic(p: np.ndarray, n: int) -> np.ndarray:
    """phi(x) = x_1 - x_0 e_1, left monogenic for D0 in every dimension."""
    out = np.zeros((p.shape[0], 1 << n))
    out[:, 0] = p[:, 1]
    out[:, 1] = -p[:, 0]
    return out


def manufactured_target(p: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros((p.shape[0], 1 << n))
    out[:, 0] = np.exp(p[:, 0]) * np.cos(p[:, 1])
    out[:, 1] = 0.3 * p[:, -1] ** 2
    out[:, -1] = p[:, 0] * p[:, -1]
    return out


RUNNERS = {"clifford": _clifford, "borel-pompeiu": _bp, "isometry": _isometry, "adjoint": _adjoint,
           "spectrum": _spectrum, "lp-bound": _lp, "beltrami": _beltrami}


def run_suite(name: str, config: SuiteConfig | dict | None = None) -> Report:
    if name not in SUITES:
        raise UsageError(f"unknown suite {name!r}")
    cfg = config if isinstance(config, SuiteConfig) else SuiteConfig.from_dict(name, config)
    rep = Report(cfg)
    RUNNERS[name](cfg, rep)
    return rep


def render(report: Report | dict, fmt: str = "json") -> str:
    d = report.to_dict() if isinstance(report, Report) else report
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "name", "value", "bound", "pass"])
    for c in d["checks"]:
        w.writerow([d["suite"], c["name"], repr(c["value"]), repr(c["bound"]), str(c["pass"]).lower()])
    return buf.getvalue()


def emit_report(report: Report | dict, path: str | Path, fmt: str = "json") -> None:
    Path(path).write_text(render(report, fmt))
