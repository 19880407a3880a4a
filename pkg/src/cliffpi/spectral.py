"""Harmonic subspaces on S^2 / RP^2 and Galerkin spectra of the projective operators.

Sections of the trivial bundle over RP^2 are represented as even fields on a
full-sphere grid.  The projective Dirac operator sends them to odd fields
(sections of the twisted bundle); these are carried back to even fields by the
pointwise isometry ``v -> conj(x) v``, and the projective Cauchy transform
acts on odd fields as twice the spherical one.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .algebra import tables
from .geometry import DomainGrid, ManifoldSpec, SphereDomain, build_grid
from .operators import FieldSample, OperatorReport, cauchy_matrix_apply, dirac_operator

log = logging.getLogger(__name__)

MAX_DEGREE = 4
CELLS_PER_OSCILLATION = 10


class ResolutionTooLow(ValueError):
    pass


class IllConditioned(ValueError):
    pass


@dataclass
class SubspaceBasis:
    degree: int
    even: bool
    basis: list[FieldSample]
    labels: list[str] = field(default_factory=list)

    def matrix(self) -> np.ndarray:
        """Basis as columns ``(cells * 2^n, dim)``."""
        return np.stack([b.values.ravel() for b in self.basis], axis=1)


def sphere_grid(resolution: int) -> DomainGrid:
    return build_grid(ManifoldSpec("sphere", 2), SphereDomain(0.0, math.pi), resolution)


def harmonic_polynomials(degree: int, dim: int = 3) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Orthonormal coefficient basis of homogeneous harmonic polynomials.

    Returns the monomial exponents and a ``(monomials, 2*degree+1)`` matrix
    (for dim = 3) whose columns span the kernel of the Laplacian.
    """
    monos = [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) == degree]
    if degree < 2:
        return monos, np.eye(len(monos))
    lower = [e for e in itertools.product(range(degree - 1), repeat=dim) if sum(e) == degree - 2]
    pos = {e: i for i, e in enumerate(lower)}
    lap = np.zeros((len(lower), len(monos)))
    for j, e in enumerate(monos):
        for a in range(dim):
            if e[a] >= 2:
                t = list(e)
                t[a] -= 2
                lap[pos[tuple(t)], j] += e[a] * (e[a] - 1)
    return monos, sla.null_space(lap)


def _evaluate_poly(monos, coeffs, pts) -> np.ndarray:
    out = np.zeros(pts.shape[0])
    for e, c in zip(monos, coeffs):
        if c:
            out += c * np.prod(pts ** np.array(e), axis=1)
    return out


def _weighted_orthonormalize(cols: np.ndarray, w: np.ndarray) -> np.ndarray:
    gram = cols.T @ (w[:, None] * cols)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e10:
        raise IllConditioned(f"Gram matrix condition number {cond:.3g}")
    L = np.linalg.cholesky(gram)
    return np.linalg.solve(L, cols.T).T


def _check_resolution(grid: DomainGrid, degree: int) -> None:
    if degree and (2 * math.pi / degree) / grid.h < CELLS_PER_OSCILLATION:
        raise ResolutionTooLow(f"degree {degree} needs more than {grid.resolution} rings")


def build_subspace_basis(n: int, m: int, grid: DomainGrid | None = None, resolution: int = 32) -> SubspaceBasis:
    """Clifford-valued degree-m spherical harmonics, orthonormal in the scalar product."""
    if n != 2:
        raise ValueError("harmonic subspaces are built for n = 2")
    if not 0 <= m <= MAX_DEGREE:
        raise ValueError(f"degree must lie in 0..{MAX_DEGREE}")
    grid = sphere_grid(resolution) if grid is None else grid
    _check_resolution(grid, m)
    N = 1 << n
    monos, coeffs = harmonic_polynomials(m, n + 1)
    scalars = np.stack([_evaluate_poly(monos, c, grid.centers) for c in coeffs.T], axis=1)
    cols = []
    for b in range(N):
        for s in scalars.T:
            v = np.zeros((grid.size, N))
            v[:, b] = s
            cols.append(v.ravel())
    w = np.repeat(grid.measure, N)
    Q = _weighted_orthonormalize(np.stack(cols, axis=1), w)
    basis = [FieldSample(grid, Q[:, i].reshape(grid.size, N)) for i in range(Q.shape[1])]
    return SubspaceBasis(m, m % 2 == 0, basis)


def antipodal_index(grid: DomainGrid) -> np.ndarray:
    """Cell index of -x for every cell of a full-sphere grid."""
    r, p = grid.shape
    i, j = np.divmod(np.arange(grid.size), p)
    return (r - 1 - i) * p + (j + p // 2) % p


def even_part(grid: DomainGrid, values: np.ndarray) -> np.ndarray:
    return 0.5 * (values + values[antipodal_index(grid)])


def _gram_apply(grid: DomainGrid, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    w = np.repeat(grid.measure, A.shape[0] // grid.size)
    return A.T @ (w[:, None] * B)


def _xbar_left(grid: DomainGrid, values: np.ndarray, conj: bool) -> np.ndarray:
    t = tables(grid.spec.n)
    X = t.embed(grid.centers)
    if conj:
        X = t.involution(X, "bar")
    return t.gp(X, values)


def rp_subspace(m_max: int, resolution: int) -> tuple[DomainGrid, np.ndarray, list[int]]:
    grid = sphere_grid(resolution)
    blocks, degrees = [], []
    for k in range(0, 2 * m_max + 1, 2):
        sb = build_subspace_basis(2, k, grid)
        blocks.append(sb.matrix())
        degrees += [k] * len(sb.basis)
    return grid, np.concatenate(blocks, axis=1), degrees


def projective_dirac_matrix(grid: DomainGrid, B: np.ndarray) -> np.ndarray:
    """Galerkin matrix <b_i, conj(x) D_s b_j> on the even subspace."""
    N = 1 << grid.spec.n
    D = dirac_operator(grid, "Ds")
    fields = B.T.reshape(-1, grid.size, N)
    img = _xbar_left(grid, D.apply(fields), conj=True)
    return _gram_apply(grid, B, img.reshape(img.shape[0], -1).T)


def projective_cauchy_matrix(grid: DomainGrid, B: np.ndarray) -> np.ndarray:
    """Galerkin matrix <b_i, T_rp(x b_j)> with T_rp = 2 T_s on odd fields."""
    N = 1 << grid.spec.n
    fields = B.T.reshape(-1, grid.size, N)
    odd = _xbar_left(grid, fields, conj=False)
    img = 2.0 * cauchy_matrix_apply(grid, odd)
    return _gram_apply(grid, B, img.reshape(img.shape[0], -1).T)


@dataclass
class SpectrumReport:
    report: OperatorReport
    computed: np.ndarray
    expected: np.ndarray
    rel_error: np.ndarray

    def table(self) -> list[dict]:
        return [{"computed": float(c), "expected": float(e), "relative_error": float(r)}
                for c, e, r in zip(self.computed, self.expected, self.rel_error)]


def _match(eigs: np.ndarray, targets: np.ndarray):
    eigs = np.sort_complex(eigs.astype(complex))
    exp = np.array([targets[np.argmin(np.abs(targets - e))] for e in eigs])
    rel = np.abs(eigs - exp) / np.abs(exp)
    return eigs, exp, rel


def _real_if_close(z: np.ndarray) -> np.ndarray:
    return np.real_if_close(z, tol=1e6)


def spectrum_check_dirac_rp(n: int = 2, m_max: int = 1, resolution: int = 32, tol: float = 0.05) -> SpectrumReport:
    if n != 2 or not 0 <= m_max <= 2:
        raise ValueError("spectrum checks run at n = 2 with m_max <= 2")
    grid, B, _ = rp_subspace(m_max, resolution)
    A = projective_dirac_matrix(grid, B)
    eigs = np.linalg.eigvals(A)
    targets = np.array([s * (2 * m + n) for m in range(m_max + 1) for s in (1, -1)], dtype=float)
    c, e, r = _match(eigs, targets)
    worst = float(r.max())
    rep = OperatorReport(f"spectrum[dirac_rp,m<={m_max}]", grid.h, float(np.sqrt(np.mean(r ** 2))), worst, tol,
                         worst <= tol)
    return SpectrumReport(rep, _real_if_close(c), e, r)


def spectrum_check_cauchy_rp(n: int = 2, m_max: int = 1, resolution: int = 32, tol: float = 0.05) -> SpectrumReport:
    if n != 2 or not 0 <= m_max <= 2:
        raise ValueError("spectrum checks run at n = 2 with m_max <= 2")
    grid, B, _ = rp_subspace(m_max, resolution)
    A = projective_cauchy_matrix(grid, B)
    eigs = np.linalg.eigvals(A)
    targets = np.array([s * 2.0 / (2 * m + n) for m in range(m_max + 1) for s in (1, -1)])
    c, e, r = _match(eigs, targets)
    worst = float(r.max())
    rep = OperatorReport(f"spectrum[cauchy_rp,m<={m_max}]", grid.h, float(np.sqrt(np.mean(r ** 2))), worst, tol,
                         worst <= tol)
    return SpectrumReport(rep, _real_if_close(c), e, r)


def eigen_product_check(n: int = 2, m_max: int = 1, resolution: int = 32, tol: float = 0.10) -> OperatorReport:
    """Pair the two Galerkin spectra through shared eigenvectors and test lambda_D * lambda_T = 2."""
    grid, B, _ = rp_subspace(m_max, resolution)
    A = projective_dirac_matrix(grid, B)
    C = projective_cauchy_matrix(grid, B)
    lam, V = np.linalg.eig(A)
    # Rayleigh quotient of the Cauchy matrix along each Dirac eigenvector
    mu = np.array([(np.conj(v) @ C @ v) / (np.conj(v) @ v) for v in V.T])
    prod = np.real_if_close(lam * mu, tol=1e6)
    err = np.abs(prod - 2.0) / 2.0
    return OperatorReport(f"spectrum[product,m<={m_max}]", grid.h, float(np.sqrt(np.mean(err ** 2))),
                          float(err.max()), tol, bool(err.max() <= tol))


def pq_split_labels(grid: DomainGrid, sb: SubspaceBasis) -> SubspaceBasis:
    """Rotate a degree block into eigenvectors of conj(x) D_s and label them.

    Negative eigenvalues mark restrictions of inner monogenics (P), positive
    ones the complementary x-multiples (Q).
    """
    B = sb.matrix()
    A = projective_dirac_matrix(grid, B)
    A = 0.5 * (A + A.T)
    lam, V = np.linalg.eigh(A)
    N = 1 << grid.spec.n
    basis = [FieldSample(grid, (B @ v).reshape(grid.size, N)) for v in V.T]
    labels = [f"P_{sb.degree}" if l < 0 else f"Q_{sb.degree}" for l in lam]
    return SubspaceBasis(sb.degree, sb.even, basis, labels)


def mapping_dominance(grid: DomainGrid, m_max: int = 1) -> float:
    """Share of the projective Dirac Galerkin mass in the off-diagonal P/Q blocks."""
    blocks, labels = [], []
    for k in range(0, 2 * m_max + 1, 2):
        sb = pq_split_labels(grid, build_subspace_basis(2, k, grid))
        blocks.append(sb.matrix())
        labels += [l[0] for l in sb.labels]
    B = np.concatenate(blocks, axis=1)
    A = projective_dirac_matrix(grid, B)
    lab = np.array(labels)
    off = (lab[:, None] != lab[None, :])
    return float(np.sum(A[off] ** 2) / np.sum(A ** 2))
