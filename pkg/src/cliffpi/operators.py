"""Discrete Dirac, Cauchy, boundary and Pi operators on sampled fields.

Fields are real arrays of shape ``(cells, 2^n)``.  Derivatives are second-order
finite differences assembled as sparse matrices so that exact transposes are
available; volume integrals are punctured midpoint sums (the cell holding the
evaluation point is omitted).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import quadrature as quad
from .algebra import tables
from .geometry import DomainGrid, ManifoldSpec, sphere_frame
from .kernels import hopf_collapse_factor, kernel_params

log = logging.getLogger(__name__)

VARIANTS = {
    "euclid": ("D0", "D0bar"),
    "cylinder": ("D0", "D0bar"),
    "hopf": ("D0", "D0bar"),
    "sphere": ("Ds", "Dsbar"),
    "rp": ("Ds", "Dsbar"),
    "hyperbolic": ("M", "Mbar"),
}


class UnsupportedVariant(ValueError):
    pass


class MissingBoundaryData(ValueError):
    pass


@dataclass(eq=False)
class FieldSample:
    grid: DomainGrid
    values: np.ndarray
    boundary_values: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        N = 1 << self.grid.spec.n
        if self.values.shape != (self.grid.size, N):
            raise ValueError(f"values must have shape {(self.grid.size, N)}, got {self.values.shape}")
        if self.boundary_values is not None:
            self.boundary_values = np.asarray(self.boundary_values, dtype=float)
            if self.boundary_values.shape != (self.grid.face_centers.shape[0], N):
                raise ValueError("boundary values must have one row per boundary face")

    @property
    def spec(self) -> ManifoldSpec:
        return self.grid.spec

    def with_values(self, values: np.ndarray) -> FieldSample:
        return FieldSample(self.grid, values)


def sample(grid: DomainGrid, fn: Callable[[np.ndarray], np.ndarray], boundary: bool = True) -> FieldSample:
    """Evaluate ``fn(points) -> (points, 2^n)`` at cell and face centers."""
    vals = np.asarray(fn(grid.centers), dtype=float)
    bvals = None
    if boundary and grid.face_centers.shape[0]:
        bvals = np.asarray(fn(grid.face_centers), dtype=float)
    elif boundary:
        bvals = np.zeros((0, vals.shape[1]))
    return FieldSample(grid, vals, bvals)


@dataclass
class OperatorReport:
    name: str
    h: float
    residual_l2: float
    residual_max: float
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# -- finite differences ----------------------------------------------------

def diff_matrix(L: int, h: float, wrap: int = 0) -> sp.csr_matrix:
    """Second-order first-derivative matrix; one-sided ends unless wrapped."""
    if L < 3:
        raise ValueError("need at least 3 points per axis")
    main = sp.diags([-np.ones(L - 1), np.ones(L - 1)], [-1, 1], shape=(L, L), format="lil")
    if wrap:
        main[0, L - 1] = -wrap
        main[L - 1, 0] = wrap
    else:
        main[0, :3] = [-3.0, 4.0, -1.0]
        main[L - 1, L - 3:] = [1.0, -4.0, 3.0]
    return (main / (2.0 * h)).tocsr()


def _along(D: sp.csr_matrix, arr: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(arr, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    return np.moveaxis((D @ flat).reshape(moved.shape), 0, axis)


@dataclass
class _Term:
    axis: int | None
    matrix: np.ndarray  # (N, N) or (cells, N, N)
    scalar: np.ndarray | None = None  # optional (cells,) factor


class FirstOrderOperator:
    """sum_t C_t(x) d_t f + C_0(x) f with pointwise Clifford coefficients."""

    def __init__(self, grid: DomainGrid, terms: Sequence[_Term], derivs: Sequence[sp.csr_matrix]):
        self.grid = grid
        self.terms = list(terms)
        self.derivs = list(derivs)
        self.derivs_T = [D.T.tocsr() for D in derivs]

    def _coef(self, term: _Term, v: np.ndarray, transpose: bool) -> np.ndarray:
        M = term.matrix
        if M.ndim == 2:
            out = np.einsum("ji,fcj->fci" if transpose else "ij,fcj->fci", M, v)
        else:
            out = np.einsum("cji,fcj->fci" if transpose else "cij,fcj->fci", M, v)
        if term.scalar is not None:
            out = out * term.scalar[None, :, None]
        return out

    def _deriv(self, v: np.ndarray, axis: int, transpose: bool) -> np.ndarray:
        shape = v.shape
        g = v.reshape((shape[0],) + self.grid.shape + (shape[-1],))
        D = (self.derivs_T if transpose else self.derivs)[axis]
        return _along(D, g, axis + 1).reshape(shape)

    def apply(self, values: np.ndarray, transpose: bool = False) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        single = v.ndim == 2
        if single:
            v = v[None]
        out = np.zeros_like(v)
        for term in self.terms:
            if term.axis is None:
                out += self._coef(term, v, transpose)
            elif transpose:
                out += self._deriv(self._coef(term, v, True), term.axis, True)
            else:
                out += self._coef(term, self._deriv(v, term.axis, False), False)
        return out[0] if single else out


def _box_derivs(grid: DomainGrid):
    return [diff_matrix(grid.shape[a], grid.spacings[a], grid.wrap[a]) for a in range(len(grid.shape))]


def _build_dirac(grid: DomainGrid, variant: str) -> FirstOrderOperator:
    spec = grid.spec
    n = spec.n
    t = tables(n)
    allowed = VARIANTS[spec.kind]
    if variant not in allowed:
        raise UnsupportedVariant(f"{variant!r} is not defined on {spec.kind}; use one of {allowed}")
    conj = variant.endswith("bar")
    if grid.layout == "box":
        derivs = _box_derivs(grid)
        terms = []
        for a in range(n + 1):
            ea = t.unit(t.para_blades[a])
            s = -1.0 if (conj and a > 0) else 1.0
            terms.append(_Term(a, s * t.left_matrix(ea)))
        if variant.startswith("M"):
            c = (n - 1) / grid.centers[:, -1]
            terms.append(_Term(None, (-1.0 if conj else 1.0) * t.qprime_matrix(), c))
        return FirstOrderOperator(grid, terms, derivs)

    # spherical layout: D_s = x (Gamma_0 - n/2), conjugate x_bar (Gamma_0_bar - n/2)
    theta = np.repeat(grid.theta, grid.shape[1])
    phi = np.tile(grid.phi, grid.shape[0])
    x = grid.centers
    e_t, e_p = sphere_frame(theta, phi)
    grad = {0: e_t, 1: e_p / np.sin(theta)[:, None]}
    coef = {}
    for ax, g in grad.items():
        A = np.zeros((x.shape[0], t.dim))
        for j in range(1, n + 1):
            Lij = x[:, 0] * g[:, j] - x[:, j] * g[:, 0]
            A[:, t.para_blades[j]] += (-1.0 if conj else 1.0) * Lij
        for i in range(1, n + 1):
            for j in range(i + 1, n + 1):
                Lij = x[:, i] * g[:, j] - x[:, j] * g[:, i]
                bl = t.para_blades[i] | t.para_blades[j]
                # e_i e_j is the canonical blade for i < j
                A[:, bl] -= Lij
        coef[ax] = t.left_matrix(A)
    X = t.embed(x)
    if conj:
        X = t.involution(X, "bar")
    LX = t.left_matrix(X)
    terms = [
        _Term(0, LX @ coef[0]),
        _Term(1, LX @ coef[1]),
        _Term(None, -(n / 2.0) * LX),
    ]
    derivs = [diff_matrix(grid.shape[0], grid.spacings[0], 0), diff_matrix(grid.shape[1], grid.spacings[1], 1)]
    return FirstOrderOperator(grid, terms, derivs)


def dirac_operator(grid: DomainGrid, variant: str) -> FirstOrderOperator:
    key = ("dirac", variant)
    if key not in grid.cache:
        grid.cache[key] = _build_dirac(grid, variant)
    return grid.cache[key]


def resolve_variant(spec: ManifoldSpec, variant: str) -> str:
    """Map the generic names 'D' / 'Dbar' onto the geometry's operator."""
    if variant == "D":
        return VARIANTS[spec.kind][0]
    if variant == "Dbar":
        return VARIANTS[spec.kind][1]
    return variant


def apply_dirac(f: FieldSample, variant: str = "D") -> FieldSample:
    op = dirac_operator(f.grid, resolve_variant(f.spec, variant))
    return f.with_values(op.apply(f.values))


# -- Cauchy transform ------------------------------------------------------

def source_weights(grid: DomainGrid) -> np.ndarray:
    """Measure used inside the Cauchy transform (flat, doubled on rp)."""
    return grid.weights * (2.0 if grid.spec.kind == "rp" else 1.0)


def cauchy_scale(spec: ManifoldSpec) -> float:
    s = spec.normalization
    if spec.kind == "hopf":
        s *= hopf_collapse_factor(spec.n, spec.truncation)
    return 1.0 / s


def _hyperbolic_pref(spec: ManifoldSpec, pts: np.ndarray) -> np.ndarray:
    return 2.0 ** (spec.n - 1) * pts[:, -1] ** (spec.n - 1) / spec.normalization


def _conv_plan(grid: DomainGrid) -> quad.ConvolutionPlan:
    if "conv" not in grid.cache:
        spec = grid.spec
        t = tables(spec.n)
        kid, ip, expo, lattice = kernel_params(spec)

        def table_fn(offsets):
            return quad.kernel_table(kid, ip, expo, lattice, t.sign.astype(np.float64), spec.n, offsets)

        grid.cache["conv"] = quad.ConvolutionPlan(grid.shape, grid.spacings, grid.wrap, table_fn,
                                                  t.sign.astype(np.float64), float(grid.weights[0]))
    return grid.cache["conv"]


def _uses_fft(grid: DomainGrid) -> bool:
    return grid.layout == "box" and grid.spec.kind in ("euclid", "cylinder")


def _as_stack(values: np.ndarray) -> tuple[np.ndarray, bool]:
    v = np.ascontiguousarray(values, dtype=float)
    return (v[None], True) if v.ndim == 2 else (v, False)


def cauchy_matrix_apply(grid: DomainGrid, values: np.ndarray, targets: np.ndarray | None = None,
                        transpose: bool = False) -> np.ndarray:
    """Apply T (or its plain matrix transpose) to a stack of fields."""
    spec = grid.spec
    t = tables(spec.n)
    v, single = _as_stack(values)
    sign = t.sign.astype(np.float64)
    csign = t.involution_signs["conjugation"]
    if transpose and targets is not None:
        raise ValueError("transpose is defined for full-grid targets only")
    if _uses_fft(grid):
        out = _conv_plan(grid).apply(v, transpose, csign) * cauchy_scale(spec)
        if targets is not None:
            out = out[:, targets]
    elif spec.kind == "hyperbolic":
        tgt = grid.centers if targets is None else grid.centers[targets]
        ts = -_hyperbolic_pref(spec, tgt)
        out = quad.hyperbolic_volume_sum(spec.n, sign, csign, t.involution_signs["hat"],
                                         np.ascontiguousarray(tgt), ts, grid.centers, grid.weights, v, transpose)
    else:
        kid, ip, expo, lattice = kernel_params(spec)
        tgt = grid.centers if targets is None else grid.centers[targets]
        out = quad.volume_sum(kid, ip, expo, lattice, sign, csign, spec.n, np.ascontiguousarray(tgt),
                              grid.centers, source_weights(grid), v, transpose)
        out *= cauchy_scale(spec)
    return out[0] if single else out


def cauchy_transform(f: FieldSample, targets: np.ndarray | None = None) -> np.ndarray:
    """T f at the chosen cells (all cells by default)."""
    return cauchy_matrix_apply(f.grid, f.values, targets)


NEAR_FACTOR = 3.0
SUBDIVISIONS = 4


def boundary_operator(f: FieldSample, targets: np.ndarray | None = None) -> np.ndarray:
    """Boundary Cauchy integral F f at interior cells."""
    grid = f.grid
    spec = grid.spec
    if f.boundary_values is None:
        raise MissingBoundaryData("boundary values are required for the boundary operator")
    t = tables(spec.n)
    tgt = np.ascontiguousarray(grid.centers if targets is None else grid.centers[targets])
    if grid.face_centers.shape[0] == 0:
        return np.zeros((tgt.shape[0], t.dim))
    sign = t.sign.astype(np.float64)
    vals = np.ascontiguousarray(f.boundary_values[None])
    if spec.kind == "hyperbolic":
        ts = _hyperbolic_pref(spec, tgt)
        out = quad.hyperbolic_boundary_sum(spec.n, sign, t.involution_signs["hat"], tgt, ts, grid.face_centers,
                                           grid.face_normals, grid.face_weights, grid.face_tangents, vals,
                                           NEAR_FACTOR, SUBDIVISIONS)
        return out[0]
    kid, ip, expo, lattice = kernel_params(spec)
    out = quad.boundary_sum(kid, ip, expo, lattice, sign, spec.n, tgt, grid.face_centers, grid.face_normals,
                            grid.boundary_measure, grid.face_tangents, vals, NEAR_FACTOR, SUBDIVISIONS,
                            grid.layout == "sphere")
    # the kernel is written with the evaluation point first; reversing the
    # roles flips its sign, which gives the outward-normal orientation
    return -cauchy_scale(spec) * out[0]


def inverse_apply(grid: DomainGrid, values: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Right inverse of the Dirac operator: T / c."""
    return cauchy_matrix_apply(grid, values, transpose=transpose) / grid.spec.reproduction


def pi_apply(f: FieldSample) -> FieldSample:
    """Pi f = Dbar (T f / c) on the geometry of ``f``."""
    op = dirac_operator(f.grid, resolve_variant(f.spec, "Dbar"))
    return f.with_values(op.apply(inverse_apply(f.grid, f.values)))


def pi_matrix_apply(grid: DomainGrid, values: np.ndarray, transpose: bool = False) -> np.ndarray:
    op = dirac_operator(grid, resolve_variant(grid.spec, "Dbar"))
    if transpose:
        return inverse_apply(grid, op.apply(values, transpose=True), transpose=True)
    return op.apply(inverse_apply(grid, values))


def pi_adjoint_apply(grid: DomainGrid, values: np.ndarray) -> np.ndarray:
    """Adjoint of Pi in the geometry's weighted L2 product."""
    w = grid.measure
    v, single = _as_stack(values)
    out = pi_matrix_apply(grid, v * w[None, :, None], transpose=True) / w[None, :, None]
    return out[0] if single else out


# -- inner products and residuals ------------------------------------------

def inner_product(f: FieldSample, g: FieldSample) -> float:
    """Scalar part of the integral of conj(f) g over the geometry's measure."""
    if f.grid is not g.grid:
        raise ValueError("fields live on different grids")
    return float(np.sum(f.grid.measure * np.sum(f.values * g.values, axis=1)))


def l2_norm(grid: DomainGrid, values: np.ndarray, mask: np.ndarray | None = None) -> float:
    w = grid.measure
    sq = np.sum(values * values, axis=-1)
    if mask is not None:
        w, sq = w[mask], sq[..., mask]
    return float(np.sqrt(np.sum(w * sq, axis=-1)))


def lp_norm(grid: DomainGrid, values: np.ndarray, p: float) -> float:
    mag = np.sqrt(np.sum(values * values, axis=-1))
    return float(np.sum(grid.measure * mag ** p) ** (1.0 / p))


def interior_targets(grid: DomainGrid, layers: float = 3.0, max_targets: int | None = None) -> np.ndarray:
    idx = np.flatnonzero(grid.interior_mask(layers))
    if max_targets is not None and idx.size > max_targets:
        pick = np.unique(np.linspace(0, idx.size - 1, max_targets).round().astype(int))
        idx = idx[pick]
    return idx


def borel_pompeiu_residual(f: FieldSample, tol: float = 0.05, max_targets: int | None = 2000) -> OperatorReport:
    """Relative residual of ``c f = F f + T D f`` at cells at least 3h inside."""
    grid = f.grid
    c = grid.spec.reproduction
    idx = interior_targets(grid, 3.0, max_targets)
    if idx.size == 0:
        raise ValueError("grid too coarse: no cells at distance >= 3h from the boundary")
    Df = apply_dirac(f, "D")
    recon = (boundary_operator(f, idx) + cauchy_transform(Df, idx)) / c
    r = f.values[idx] - recon
    w = grid.measure[idx]
    fl2 = math.sqrt(np.sum(w * np.sum(f.values[idx] ** 2, axis=1)))
    rl2 = math.sqrt(np.sum(w * np.sum(r ** 2, axis=1))) / fl2
    fmax = np.max(np.linalg.norm(f.values[idx], axis=1))
    rmax = float(np.max(np.linalg.norm(r, axis=1)) / fmax)
    log.debug("borel-pompeiu %s h=%.4g l2=%.3g max=%.3g", grid.spec.kind, grid.h, rl2, rmax)
    return OperatorReport(f"borel_pompeiu[{grid.spec.kind}]", grid.h, rl2, rmax, tol, rl2 <= tol)


def adjoint_residual(grid: DomainGrid, variant: str = "D", pairs: int = 20, seed: int = 0,
                     tol: float = 0.05) -> OperatorReport:
    """|<D f, g> + <f, Dbar g>| / (|f| |g|) over random compactly supported pairs.

    On every geometry here the formal adjoint of the Dirac operator is minus
    its conjugate, so the report measures how far the discrete pair is from
    that identity.
    """
    from .fields import random_bumps

    spec = grid.spec
    v = resolve_variant(spec, variant)
    partner = {"D0": "D0bar", "D0bar": "D0", "Ds": "Dsbar", "Dsbar": "Ds", "M": "Mbar", "Mbar": "M"}[v]
    rng = np.random.default_rng(seed)
    fs = random_bumps(grid, rng, pairs)
    gs = random_bumps(grid, rng, pairs)
    A = dirac_operator(grid, v)
    B = dirac_operator(grid, partner)
    w = grid.measure[None, :, None]
    lhs = np.sum(w * A.apply(fs) * gs, axis=(1, 2))
    rhs = np.sum(w * fs * B.apply(gs), axis=(1, 2))
    scale = np.sqrt(np.sum(w * fs ** 2, axis=(1, 2)) * np.sum(w * gs ** 2, axis=(1, 2)))
    rel = np.abs(lhs + rhs) / scale
    return OperatorReport(f"adjoint[{spec.kind}:{v}]", grid.h, float(np.sqrt(np.mean(rel ** 2))),
                          float(rel.max()), tol, bool(rel.max() <= tol))
