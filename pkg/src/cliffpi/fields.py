"""Test fields: random compactly supported bumps and smooth analytic samples."""
from __future__ import annotations

import math

import numpy as np

from .geometry import BoxDomain, DomainGrid, sphere_point
from .operators import FieldSample, dirac_operator, resolve_variant, sample


class GridTooCoarse(ValueError):
    pass


def _bump(r2: np.ndarray) -> np.ndarray:
    return np.where(r2 < 1.0, (1.0 - np.minimum(r2, 1.0)) ** 2, 0.0)


def _box_placement(grid: DomainGrid, rng: np.random.Generator):
    lo = np.array(grid.domain.lower)
    hi = np.array(grid.domain.upper)
    side = float(np.min(hi - lo))
    margin = 1.5 * grid.h
    # as wide as the box allows: the discretisation error scales like (h / rho)^2
    rho = min(0.45 * side, 0.5 * side - margin)
    if rho < 2.0 * grid.h:
        raise GridTooCoarse("resolution too low for compactly supported test fields")
    c = rng.uniform(lo + rho + margin, hi - rho - margin)
    return c, rho


def _sphere_placement(grid: DomainGrid, rng: np.random.Generator):
    ta, tb = grid.domain.theta_min, grid.domain.theta_max
    margin = 1.5 * grid.h
    lo_edge = ta > 0
    hi_edge = tb < math.pi
    width = tb - ta
    rho = min(0.45 * width, 0.8)
    if lo_edge and hi_edge:
        rho = min(rho, 0.5 * width - margin)
    elif lo_edge or hi_edge:
        rho = min(rho, width - margin)
    if rho < 2.0 * grid.h:
        raise GridTooCoarse("resolution too low for compactly supported test fields")
    t0 = ta + (rho + margin if lo_edge else 0.0)
    t1 = tb - (rho + margin if hi_edge else 0.0)
    if t1 < t0:
        t1 = t0
    # area-uniform polar angle in [t0, t1]
    z = rng.uniform(math.cos(t1), math.cos(t0))
    theta = math.acos(z)
    c = sphere_point(theta, rng.uniform(0, 2 * math.pi))
    # chord radius equivalent to geodesic radius rho
    return c, 2.0 * math.sin(rho / 2.0)


def random_bumps(grid: DomainGrid, rng: np.random.Generator, count: int) -> np.ndarray:
    """Stack ``(count, cells, 2^n)`` of smooth fields vanishing near the boundary."""
    N = 1 << grid.spec.n
    x = grid.centers
    out = np.empty((count, grid.size, N))
    for i in range(count):
        if grid.layout == "box":
            c, rho = _box_placement(grid, rng)
        else:
            c, rho = _sphere_placement(grid, rng)
        u = (x - c) / rho
        prof = _bump(np.sum(u * u, axis=1))
        A = rng.normal(size=N)
        B = rng.normal(size=(x.shape[1], N))
        out[i] = prof[:, None] * (A[None, :] + 0.5 * u @ B)
    return out


def random_dirac_images(grid: DomainGrid, rng: np.random.Generator, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Fields ``f = D u`` with ``u`` compactly supported; returns ``(f, u)``."""
    u = random_bumps(grid, rng, count)
    D = dirac_operator(grid, resolve_variant(grid.spec, "D"))
    return D.apply(u), u


def _box_phase(grid: DomainGrid, pts: np.ndarray) -> np.ndarray:
    dom: BoxDomain = grid.domain
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    s = (pts - lo) / (hi - lo)
    freq = np.full(pts.shape[1], 0.9 * math.pi)
    for a, w in enumerate(grid.wrap):
        if w == 1:
            freq[a] = 2 * math.pi
        elif w == -1:
            freq[a] = math.pi
    return s * freq


def smooth_field(grid: DomainGrid, seed: int = 0) -> FieldSample:
    """A fixed smooth, non-monogenic field with boundary data.

    Box geometries use trigonometric blades compatible with any periodic or
    antiperiodic axis; spherical ones use ambient polynomials and
    exponentials of matching parity on rp.
    """
    rng = np.random.default_rng(seed)
    N = 1 << grid.spec.n
    d = grid.spec.n + 1
    phase = rng.uniform(0, 2 * math.pi, size=N)
    mix = rng.integers(0, 2, size=(N, d))
    mix[:, 0] = 1
    amp = rng.uniform(0.5, 1.5, size=N)
    if grid.layout == "box":
        anti = [a for a, w in enumerate(grid.wrap) if w == -1]

        def fn(p):
            s = _box_phase(grid, p)
            out = np.empty((p.shape[0], N))
            for b in range(N):
                m = mix[b].copy()
                for a in anti:
                    m[a] = 1  # an odd multiple keeps the sign flip
                arg = s @ m + phase[b]
                out[:, b] = amp[b] * np.cos(arg)
            return out
        return sample(grid, fn)

    parity = {1: 1, 2: -1}.get(grid.spec.bundle, 0) if grid.spec.kind == "rp" else 0
    W = rng.normal(size=(N, d))

    def fn(p):
        out = np.empty((p.shape[0], N))
        for b in range(N):
            lin = p @ W[b]
            if parity == 1:
                out[:, b] = amp[b] * (np.cosh(lin) + p[:, b % d] * p[:, (b + 1) % d])
            elif parity == -1:
                out[:, b] = amp[b] * (np.sinh(lin) + p[:, b % d] ** 3)
            else:
                out[:, b] = amp[b] * (np.exp(0.7 * lin) + p[:, b % d] * p[:, (b + 1) % d])
        return out
    return sample(grid, fn)
