"""Cauchy kernels for each geometry.

The heavy lifting lives in small numba routines that write a full multivector
(2^n coefficients) into a caller-owned buffer; quadrature loops call them
directly.  The public functions wrap one evaluation into a :class:`KernelValue`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit

from .algebra import Multivector, SingularInput, as_components, tables
from .geometry import ManifoldSpec

EUCLID, SPHERE, RP, CYLINDER, HOPF = 0, 1, 2, 3, 4
KERNEL_IDS = {"euclid": EUCLID, "sphere": SPHERE, "rp": RP, "cylinder": CYLINDER, "hopf": HOPF}


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class KernelValue:
    value: Multivector
    conj_value: Multivector
    truncation_error: float = 0.0


# -- numba primitives ------------------------------------------------------

@njit(cache=True)
def _para_kernel(u, expo, out, scale):
    """out[para] += scale * bar(u)/|u|^expo ; returns False at u = 0."""
    r2 = 0.0
    for a in range(u.shape[0]):
        r2 += u[a] * u[a]
    if r2 == 0.0:
        return False
    s = scale * r2 ** (-0.5 * expo)
    out[0] += u[0] * s
    for a in range(1, u.shape[0]):
        out[1 << (a - 1)] -= u[a] * s
    return True


@njit(cache=True)
def _gp(a, b, sign, out):
    out[:] = 0.0
    N = a.shape[0]
    for i in range(N):
        ai = a[i]
        if ai == 0.0:
            continue
        for j in range(N):
            bj = b[j]
            if bj != 0.0:
                out[i ^ j] += sign[i, j] * ai * bj


@njit(cache=True)
def _para_inverse(x, out):
    r2 = 0.0
    for a in range(x.shape[0]):
        r2 += x[a] * x[a]
    out[0] = x[0] / r2
    for a in range(1, x.shape[0]):
        out[a] = -x[a] / r2


@njit(cache=True)
def _cylinder(x, y, k, l, lattice, expo, out):
    d = x.shape[0]
    u = np.empty(d)
    sgn = 1.0
    for a in range(d):
        u[a] = x[a] - y[a]
    for j in range(k):
        m = math.floor(u[j] + 0.5)
        u[j] -= m
        if j < l and (int(m) & 1):
            sgn = -sgn
    w = np.empty(d)
    for t in range(lattice.shape[0]):
        s = sgn
        for a in range(d):
            w[a] = u[a]
        for j in range(k):
            w[j] += lattice[t, j]
            if j < l and (lattice[t, j] & 1):
                s = -s
        if not _para_kernel(w, expo, out, s):
            return False
    return True


@njit(cache=True)
def _hopf(x, y, K, expo, n, sign, out):
    d = x.shape[0]
    N = out.shape[0]
    u = np.empty(d)
    for kk in range(K + 1):
        f = 2.0 ** kk
        for a in range(d):
            u[a] = f * x[a] - f * y[a]
        if not _para_kernel(u, expo, out, 1.0):
            return False
    xi = np.empty(d)
    yi = np.empty(d)
    _para_inverse(x, xi)
    _para_inverse(y, yi)
    mid = np.zeros(N)
    for j in range(1, K + 1):
        f = 2.0 ** j
        for a in range(d):
            u[a] = f * xi[a] - f * yi[a]
        if not _para_kernel(u, expo, mid, 1.0):
            return False
    gx = np.zeros(N)
    gy = np.zeros(N)
    _para_kernel(x, expo, gx, 1.0)
    _para_kernel(y, expo, gy, 1.0)
    t1 = np.empty(N)
    t2 = np.empty(N)
    _gp(gx, mid, sign, t1)
    _gp(t1, gy, sign, t2)
    c = 2.0 ** (2 - 2 * n)
    for i in range(N):
        out[i] += c * t2[i]
    return True


@njit(cache=True)
def kernel_into(kid, x, y, n, ip, expo, lattice, sign, out):
    """Accumulate the geometry kernel K(x, y) into ``out`` (cleared first)."""
    out[:] = 0.0
    d = x.shape[0]
    if kid == 0:
        u = np.empty(d)
        for a in range(d):
            u[a] = x[a] - y[a]
        return _para_kernel(u, expo, out, 1.0)
    if kid == 1 or kid == 2:
        u = np.empty(d)
        for a in range(d):
            u[a] = x[a] - y[a]
        if not _para_kernel(u, n, out, 1.0):
            return False
        if kid == 2:
            for a in range(d):
                u[a] = -x[a] - y[a]
            s = 1.0 if ip[0] == 1 else -1.0
            if not _para_kernel(u, n, out, s):
                return False
        return True
    if kid == 3:
        return _cylinder(x, y, ip[1], ip[0], lattice, expo, out)
    return _hopf(x, y, ip[2], expo, n, sign, out)


@njit(cache=True)
def hyperbolic_EF(x, y, n, e_out, f_out):
    """Paravector components of E(x, y) and F(x, y)."""
    d = x.shape[0]
    u = np.empty(d)
    r1 = 0.0
    r2 = 0.0
    r3 = 0.0
    for a in range(d):
        u[a] = x[a] - y[a]
        r1 += u[a] * u[a]
        ya = -y[a] if a == d - 1 else y[a]
        xa = -x[a] if a == d - 1 else x[a]
        r2 += (x[a] - ya) ** 2
        r3 += (xa - y[a]) ** 2
    if r1 == 0.0:
        return False
    d1 = math.sqrt(r1) ** (n - 1)
    _para_inverse(u, e_out)
    for a in range(d):
        e_out[a] /= d1 * math.sqrt(r2) ** (n - 1)
    for a in range(d):
        u[a] = (-x[a] if a == d - 1 else x[a]) - y[a]
    _para_inverse(u, f_out)
    for a in range(d):
        f_out[a] /= d1 * math.sqrt(r3) ** (n - 1)
    return True


# -- parameter packing -----------------------------------------------------

@lru_cache(maxsize=None)
def shell_lattice(k: int, R: int) -> np.ndarray:
    """Points of Z^k with max-norm <= R, ordered shell by shell."""
    rng = np.arange(-R, R + 1)
    pts = np.array(np.meshgrid(*([rng] * k), indexing="ij")).reshape(k, -1).T
    shell = np.abs(pts).max(axis=1)
    order = np.lexsort(tuple(pts[:, ::-1].T) + (shell,))
    out = np.ascontiguousarray(pts[order].astype(np.int64))
    out.setflags(write=False)
    return out


def kernel_params(spec: ManifoldSpec, truncation: int | None = None):
    """(kid, ip, expo, lattice) tuple consumed by :func:`kernel_into`."""
    if spec.kind == "hyperbolic":
        raise ValueError("hyperbolic geometry uses the E/F kernel pair")
    R = spec.truncation if truncation is None else truncation
    kid = KERNEL_IDS[spec.kind]
    ip = np.array([spec.bundle, spec.k, R], dtype=np.int64)
    lattice = shell_lattice(spec.k, R) if spec.kind == "cylinder" else np.zeros((1, 1), dtype=np.int64)
    expo = float(spec.n if spec.kind in ("sphere", "rp") else spec.exponent)
    return kid, ip, expo, lattice


def _evaluate(spec: ManifoldSpec, x, y, truncation=None) -> np.ndarray:
    x = np.ascontiguousarray(as_components(x), dtype=float)
    y = np.ascontiguousarray(as_components(y), dtype=float)
    if x.shape != (spec.n + 1,) or y.shape != (spec.n + 1,):
        raise DomainError(f"points must have {spec.n + 1} components")
    kid, ip, expo, lattice = kernel_params(spec, truncation)
    t = tables(spec.n)
    out = np.zeros(t.dim)
    if not kernel_into(kid, x, y, spec.n, ip, expo, lattice, t.sign, out):
        raise SingularInput("kernel is singular at these points")
    return out


def _wrap(spec: ManifoldSpec, coeffs: np.ndarray, err: float) -> KernelValue:
    t = tables(spec.n)
    return KernelValue(Multivector(spec.n, coeffs), Multivector(spec.n, t.involution(coeffs, "bar")), err)


# -- public kernels --------------------------------------------------------

def G_euclid(x, y, n: int | None = None) -> KernelValue:
    x = as_components(x)
    spec = ManifoldSpec("euclid", len(x) - 1 if n is None else n)
    return _wrap(spec, _evaluate(spec, x, y), 0.0)


def G_sphere(x, y) -> KernelValue:
    x, y = as_components(x), as_components(y)
    _check_unit(x, y)
    spec = ManifoldSpec("sphere", len(x) - 1)
    return _wrap(spec, _evaluate(spec, x, y), 0.0)


def G_rp(x, y, bundle: int) -> KernelValue:
    x, y = as_components(x), as_components(y)
    _check_unit(x, y)
    spec = ManifoldSpec("rp", len(x) - 1, bundle=bundle)
    return _wrap(spec, _evaluate(spec, x, y), 0.0)


def _check_unit(*pts) -> None:
    for p in pts:
        if abs(np.linalg.norm(p) - 1.0) > 1e-9:
            raise DomainError("sphere kernels take unit vectors")


def cylinder_truncation_error(n: int, k: int, R: int, expo: int | None = None) -> float:
    """Bound on the dropped lattice tail for shells beyond max-norm R.

    After reduction the lattice part of x - y lies in [-1/2, 1/2]^k, so each
    dropped image has |w| >= s - 1/2 >= s/2 on shell s; the shell holds at most
    2k(2s+1)^{k-1} <= 2k 3^{k-1} s^{k-1} points and the sum is dominated by an
    integral from R.
    """
    # |G(w)| = |w|^{1 - exponent}
    p = (n + 1 if expo is None else expo) - 1
    if p <= k:
        return math.inf
    return 2 * k * 3 ** (k - 1) * 2.0 ** p * R ** (k - p) / (p - k)


def cot_cylinder(x, y, n: int, k: int, l: int, R: int = 10, exponent: str = "n+1") -> KernelValue:
    spec = ManifoldSpec("cylinder", n, bundle=l, k=k, truncation=R, kernel_exponent=exponent)
    coeffs = _evaluate(spec, x, y, R)
    return _wrap(spec, coeffs, cylinder_truncation_error(n, k, R, spec.exponent))


def hopf_collapse_factor(n: int, K: int) -> float:
    """Scalar factor with C(x, y) = factor * G(x - y) for the truncated sum."""
    s1 = sum(2.0 ** (-j * n) for j in range(K + 1))
    s2 = sum(2.0 ** (-j * n) for j in range(1, K + 1))
    return s1 - 2.0 ** (2 - 2 * n) * s2


def C_hopf(x, y, K: int = 20, exponent: str = "n+1") -> KernelValue:
    x, y = as_components(x), as_components(y)
    for p in (x, y):
        r = np.linalg.norm(p)
        if not 1.0 - 1e-12 <= r < 2.0:
            raise DomainError("hopf kernel points must lie in the annulus 1 <= |x| < 2")
    spec = ManifoldSpec("hopf", len(x) - 1, truncation=K, kernel_exponent=exponent)
    coeffs = _evaluate(spec, x, y, K)
    # both series decay geometrically by 2^{-p} per term
    p = spec.exponent - 1
    q = 2.0 ** (-p)
    last1 = np.linalg.norm(2.0 ** K * (x - y)) ** (-p)
    xi = x * np.r_[1, -np.ones(len(x) - 1)] / (x @ x)
    yi = y * np.r_[1, -np.ones(len(y) - 1)] / (y @ y)
    last2 = np.linalg.norm(2.0 ** K * (xi - yi)) ** (-p) * np.linalg.norm(x) ** (-p) * np.linalg.norm(y) ** (-p)
    err = (last1 + 2.0 ** (2 - 2 * spec.n) * last2) * q / (1 - q)
    return _wrap(spec, coeffs, float(err))


def EF_hyperbolic(x, y) -> tuple[KernelValue, KernelValue]:
    x = np.ascontiguousarray(as_components(x), dtype=float)
    y = np.ascontiguousarray(as_components(y), dtype=float)
    if x.shape != y.shape:
        raise DomainError("points must have matching dimension")
    if x[-1] <= 0 or y[-1] <= 0:
        raise DomainError("hyperbolic points need x_n > 0")
    n = x.size - 1
    e, f = np.zeros(n + 1), np.zeros(n + 1)
    if not hyperbolic_EF(x, y, n, e, f):
        raise SingularInput("E(x, y) is singular at x = y")
    t = tables(n)
    spec = ManifoldSpec("hyperbolic", n)
    return _wrap(spec, t.embed(e), 0.0), _wrap(spec, t.embed(f), 0.0)


def kernel(spec: ManifoldSpec, x, y) -> KernelValue:
    """Dispatch on the geometry (hyperbolic returns the E component)."""
    if spec.kind == "euclid":
        return G_euclid(x, y, spec.n)
    if spec.kind == "sphere":
        return G_sphere(x, y)
    if spec.kind == "rp":
        return G_rp(x, y, spec.bundle)
    if spec.kind == "cylinder":
        return cot_cylinder(x, y, spec.n, spec.k, spec.bundle, spec.truncation, spec.kernel_exponent)
    if spec.kind == "hopf":
        return C_hopf(x, y, spec.truncation, spec.kernel_exponent)
    return EF_hyperbolic(x, y)[0]
