"""Manifold descriptors, sampling grids and covering maps."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .algebra import MAX_DIM

KINDS = ("euclid", "sphere", "rp", "cylinder", "hopf", "hyperbolic")
DEFAULT_TRUNCATION = {"cylinder": 10, "hopf": 20}


class InvalidSpec(ValueError):
    pass


class DomainOutOfRange(ValueError):
    pass


def sphere_area(k: int) -> float:
    """Surface measure of the unit k-sphere S^k in R^{k+1}."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


@dataclass(frozen=True)
class ManifoldSpec:
    kind: str
    n: int
    bundle: int = 0
    k: int = 0
    truncation: int | None = None
    kernel_exponent: str = "n+1"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidSpec(f"unknown manifold kind {self.kind!r}")
        if not 1 <= self.n <= MAX_DIM:
            raise InvalidSpec(f"n must lie in 1..{MAX_DIM}")
        if self.kind == "rp" and self.bundle not in (1, 2):
            raise InvalidSpec("rp needs bundle 1 (trivial) or 2 (twisted)")
        if self.kind == "cylinder":
            if not 1 <= self.k < self.n - 1:
                raise InvalidSpec(f"cylinder needs 1 <= k < n-1, got k={self.k}, n={self.n}")
            if not 0 <= self.bundle <= self.k:
                raise InvalidSpec("cylinder bundle index l must satisfy 0 <= l <= k")
        if self.kind in ("euclid", "sphere", "hopf", "hyperbolic") and self.bundle != 0:
            raise InvalidSpec(f"{self.kind} carries only the trivial bundle")
        if self.truncation is None:
            object.__setattr__(self, "truncation", DEFAULT_TRUNCATION.get(self.kind, 0))
        elif self.kind in DEFAULT_TRUNCATION and self.truncation < 1:
            raise InvalidSpec("truncation must be a positive integer")
        if self.kernel_exponent not in ("n+1", "n"):
            raise InvalidSpec("kernel_exponent is 'n+1' or 'n'")

    @property
    def ambient_dim(self) -> int:
        return self.n + 1

    @property
    def exponent(self) -> int:
        return self.n + 1 if self.kernel_exponent == "n+1" else self.n

    @property
    def normalization(self) -> float:
        """Area constant dividing the Cauchy kernel on this geometry."""
        if self.kind in ("sphere", "rp"):
            return sphere_area(self.n - 1)
        return sphere_area(self.n)

    @property
    def reproduction(self) -> float:
        """Factor c in ``c f = F f + T D f`` (2 on real projective space)."""
        return 2.0 if self.kind == "rp" else 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "bundle": self.bundle, "k": self.k,
                "truncation": self.truncation, "kernel_exponent": self.kernel_exponent}


# -- domains ---------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or any(u <= l for l, u in zip(self.lower, self.upper)):
            raise DomainOutOfRange("box bounds must satisfy lower < upper componentwise")


@dataclass(frozen=True)
class SphereDomain:
    """Zone ``theta_min <= theta <= theta_max`` measured from the pole e_n."""

    theta_min: float = 0.0
    theta_max: float = math.pi

    def __post_init__(self):
        if not 0.0 <= self.theta_min < self.theta_max <= math.pi:
            raise DomainOutOfRange("need 0 <= theta_min < theta_max <= pi")


Domain = Union[BoxDomain, SphereDomain]


def cap(theta_max: float) -> SphereDomain:
    return SphereDomain(0.0, theta_max)


def default_domain(spec: ManifoldSpec) -> Domain:
    d = spec.n + 1
    if spec.kind == "euclid":
        return BoxDomain((0.0,) * d, (1.0,) * d)
    if spec.kind == "sphere":
        return cap(math.pi / 3)
    if spec.kind == "rp":
        return cap(math.pi / 3)
    if spec.kind == "cylinder":
        return BoxDomain((0.0,) * spec.k + (-0.5,) * (d - spec.k), (1.0,) * spec.k + (0.5,) * (d - spec.k))
    if spec.kind == "hopf":
        side = 0.6 if d == 3 else 0.8 / math.sqrt(d - 1)
        return BoxDomain((1.1,) + (-side / 2,) * (d - 1), (1.1 + side,) + (side / 2,) * (d - 1))
    return BoxDomain((0.0,) * (d - 1) + (1.0,), (1.0,) * (d - 1) + (2.0,))


# -- grids -----------------------------------------------------------------

@dataclass(eq=False)
class DomainGrid:
    spec: ManifoldSpec
    domain: Domain
    resolution: int
    layout: str  # "box" or "sphere"
    shape: tuple[int, ...]
    centers: np.ndarray
    weights: np.ndarray  # flat (Lebesgue / surface) cell measure
    face_centers: np.ndarray
    face_normals: np.ndarray
    face_weights: np.ndarray
    face_tangents: np.ndarray  # (faces, m, n+1) half-width tangent vectors
    boundary_distance: np.ndarray
    h: float
    spacings: tuple[float, ...] = ()
    wrap: tuple[int, ...] = ()  # per axis: 0 open, +1 periodic, -1 antiperiodic
    theta: np.ndarray | None = None
    phi: np.ndarray | None = None
    cache: dict = field(default_factory=dict, repr=False)

    @property
    def size(self) -> int:
        return self.centers.shape[0]

    @property
    def measure(self) -> np.ndarray:
        """Cell weights of the geometry's invariant measure."""
        return volume_weight(self.spec, self.centers, self.weights)

    @property
    def boundary_measure(self) -> np.ndarray:
        return self.face_weights * (2.0 if self.spec.kind == "rp" else 1.0)

    def interior_mask(self, layers: float = 3.0) -> np.ndarray:
        return self.boundary_distance >= layers * self.h - 1e-12


def _box_grid(spec: ManifoldSpec, dom: BoxDomain, res: int) -> DomainGrid:
    d = spec.n + 1
    if len(dom.lower) != d:
        raise DomainOutOfRange(f"box must have {d} coordinates")
    lo, hi = np.array(dom.lower), np.array(dom.upper)
    wrap = [0] * d
    if spec.kind == "cylinder":
        for j in range(spec.k):
            if lo[j] != 0.0 or hi[j] != 1.0:
                raise DomainOutOfRange("cylinder lattice axes must span the full period [0, 1)")
            wrap[j] = -1 if j < spec.bundle else 1
    if spec.kind == "hopf":
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(d, -1).T
        r = np.linalg.norm(corners, axis=1)
        near = np.linalg.norm(np.clip(0.0, lo, hi))
        if r.max() >= 2.0 or near < 1.0:
            raise DomainOutOfRange("hopf box must sit inside the annulus 1 <= |x| < 2")
    sp = (hi - lo) / res
    axes = [lo[a] + (np.arange(res) + 0.5) * sp[a] for a in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    weights = np.full(centers.shape[0], float(np.prod(sp)))
    if spec.kind == "hyperbolic" and centers[:, -1].min() < sp.max():
        raise DomainOutOfRange("hyperbolic cells need x_n >= h")

    dist = np.full(centers.shape[0], np.inf)
    fc, fn, fw, ft = [], [], [], []
    for a in range(d):
        if wrap[a]:
            continue
        dist = np.minimum(dist, np.minimum(centers[:, a] - lo[a], hi[a] - centers[:, a]))
        others = [b for b in range(d) if b != a]
        sub = np.meshgrid(*[axes[b] for b in others], indexing="ij")
        pts = np.stack([s.ravel() for s in sub], axis=-1)
        tang = np.zeros((len(others), d))
        for t, b in enumerate(others):
            tang[t, b] = sp[b] / 2
        for side, val in ((-1.0, lo[a]), (1.0, hi[a])):
            c = np.empty((pts.shape[0], d))
            c[:, others] = pts
            c[:, a] = val
            nrm = np.zeros((pts.shape[0], d))
            nrm[:, a] = side
            fc.append(c)
            fn.append(nrm)
            fw.append(np.full(pts.shape[0], float(np.prod(sp[others]))))
            ft.append(np.broadcast_to(tang, (pts.shape[0],) + tang.shape))
    if fc:
        fc, fn, fw, ft = (np.concatenate(x) for x in (fc, fn, fw, ft))
    else:
        fc = fn = np.zeros((0, d))
        fw = np.zeros(0)
        ft = np.zeros((0, d - 1, d))
    return DomainGrid(spec, dom, res, "box", (res,) * d, centers, weights, fc, fn, fw,
                      np.ascontiguousarray(ft), dist, float(sp.max()), tuple(sp), tuple(wrap))


def sphere_point(theta, phi) -> np.ndarray:
    """Unit vector in R^3 with polar axis e_2 (the last coordinate)."""
    st = np.sin(theta)
    return np.stack(np.broadcast_arrays(st * np.cos(phi), st * np.sin(phi), np.cos(theta)), axis=-1)


def sphere_frame(theta, phi) -> tuple[np.ndarray, np.ndarray]:
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    e_t = np.stack(np.broadcast_arrays(ct * cp, ct * sp, -st), axis=-1)
    e_p = np.stack(np.broadcast_arrays(-sp, cp, 0.0 * cp), axis=-1)
    return e_t, e_p


def _sphere_grid(spec: ManifoldSpec, dom: SphereDomain, res: int) -> DomainGrid:
    if spec.n != 2:
        raise InvalidSpec("spherical grids are implemented for n = 2 (the 2-sphere in R^3)")
    ta, tb = dom.theta_min, dom.theta_max
    if spec.kind == "rp" and tb >= math.pi / 2:
        raise DomainOutOfRange("rp domains live inside the open northern hemisphere")
    dt = (tb - ta) / res
    theta = ta + (np.arange(res) + 0.5) * dt
    smax = 1.0 if ta <= math.pi / 2 <= tb else max(math.sin(ta), math.sin(tb))
    nphi = max(8, 2 * math.ceil(math.pi * smax / dt))
    dp = 2 * math.pi / nphi
    phi = (np.arange(nphi) + 0.5) * dp
    T, P = np.meshgrid(theta, phi, indexing="ij")
    centers = sphere_point(T, P).reshape(-1, 3)
    weights = (np.sin(T) * dt * dp).ravel()

    dist = np.full(centers.shape[0], np.inf)
    fc, fn, fw, ft = [], [], [], []
    for edge, side, present in ((ta, -1.0, ta > 0), (tb, 1.0, tb < math.pi)):
        if not present:
            continue
        dist = np.minimum(dist, np.abs(T.ravel() - edge))
        e_t, e_p = sphere_frame(edge, phi)
        fc.append(sphere_point(edge, phi))
        fn.append(side * e_t)
        fw.append(np.full(nphi, math.sin(edge) * dp))
        ft.append((e_p * (math.sin(edge) * dp / 2))[:, None, :])
    if fc:
        fc, fn, fw, ft = (np.concatenate(x) for x in (fc, fn, fw, ft))
    else:
        fc = fn = np.zeros((0, 3))
        fw = np.zeros(0)
        ft = np.zeros((0, 1, 3))
    h = max(dt, smax * dp)
    return DomainGrid(spec, dom, res, "sphere", (res, nphi), centers, weights, fc, fn, fw,
                      np.ascontiguousarray(ft), dist, float(h), (dt, dp), (0, 1), theta, phi)


def build_grid(spec: ManifoldSpec, domain: Domain | None = None, resolution: int = 16) -> DomainGrid:
    if resolution < 2:
        raise DomainOutOfRange("resolution must be at least 2")
    domain = default_domain(spec) if domain is None else domain
    if spec.kind in ("sphere", "rp"):
        if not isinstance(domain, SphereDomain):
            raise DomainOutOfRange(f"{spec.kind} needs a SphereDomain")
        return _sphere_grid(spec, domain, resolution)
    if not isinstance(domain, BoxDomain):
        raise DomainOutOfRange(f"{spec.kind} needs a BoxDomain")
    return _box_grid(spec, domain, resolution)


# -- covering maps ---------------------------------------------------------

def project(spec: ManifoldSpec, x) -> tuple[np.ndarray, float]:
    """Fundamental-domain representative of ``x`` and the bundle sign relating them.

    The lift of a section satisfies ``f(x) = sign * f(project(x))``.
    """
    x = np.array(x, dtype=float)
    if x.shape != (spec.n + 1,):
        raise DomainOutOfRange(f"expected a point of R^{spec.n + 1}")
    kind = spec.kind
    if kind == "hopf":
        r = np.linalg.norm(x)
        if r == 0:
            raise DomainOutOfRange("the origin is not on the Hopf manifold")
        j = math.floor(math.log2(r))
        y = x * 2.0 ** (-j)
        ry = np.linalg.norm(y)
        if ry >= 2.0:
            y /= 2.0
        elif ry < 1.0:
            y *= 2.0
        return y, 1.0
    if kind == "cylinder":
        m = np.floor(x[: spec.k])
        y = x.copy()
        y[: spec.k] -= m
        y[: spec.k][y[: spec.k] >= 1.0] -= 1.0
        return y, float((-1) ** int(np.sum(m[: spec.bundle])))
    if kind in ("sphere", "rp"):
        r = np.linalg.norm(x)
        if abs(r - 1.0) > 1e-9:
            raise DomainOutOfRange("point is not on the unit sphere")
        if kind == "sphere":
            return x, 1.0
        nz = np.flatnonzero(np.abs(x[::-1]) > 0)
        last = x[::-1][nz[0]]
        if last > 0:
            return x, 1.0
        return -x, (1.0 if spec.bundle == 1 else -1.0)
    if kind == "hyperbolic" and x[-1] <= 0:
        raise DomainOutOfRange("hyperbolic points need x_n > 0")
    return x, 1.0


def _locate(grid: DomainGrid, y: np.ndarray) -> int:
    if grid.layout == "box":
        lo = np.array(grid.domain.lower)
        idx = np.floor((y - lo) / np.array(grid.spacings)).astype(int)
        if np.any(idx < 0) or np.any(idx >= grid.resolution):
            raise DomainOutOfRange("point lies outside the sampled domain")
        return int(np.ravel_multi_index(tuple(idx), grid.shape))
    theta = math.acos(max(-1.0, min(1.0, y[-1])))
    phi = math.atan2(y[1], y[0]) % (2 * math.pi)
    dt, dp = grid.spacings
    i = int((theta - grid.domain.theta_min) // dt)
    if not 0 <= i < grid.shape[0]:
        raise DomainOutOfRange("point lies outside the sampled domain")
    j = int(phi // dp) % grid.shape[1]
    return i * grid.shape[1] + j


def lift(spec: ManifoldSpec, grid: DomainGrid, values: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Evaluate the equivariant extension of cell samples anywhere on the cover."""
    values = np.asarray(values)
    if values.shape[0] != grid.size:
        raise ValueError("values must have one row per grid cell")

    def evaluate(x) -> np.ndarray:
        y, sign = project(spec, x)
        return sign * values[_locate(grid, y)]

    return evaluate


def volume_weight(spec: ManifoldSpec, center, flat_weight) -> np.ndarray:
    """Invariant-measure weight of cells with the given centers and flat measure."""
    c = np.asarray(center, dtype=float)
    w = np.asarray(flat_weight, dtype=float)
    if spec.kind == "hyperbolic":
        return w * c[..., -1] ** (1 - spec.n)
    if spec.kind == "rp":
        # pushforward of the sphere measure under the double cover
        return 2.0 * w
    return w


# -- config ----------------------------------------------------------------

def domain_from_dict(d: dict | None, spec: ManifoldSpec) -> Domain:
    if not d:
        return default_domain(spec)
    if "lower" in d:
        return BoxDomain(tuple(d["lower"]), tuple(d["upper"]))
    return SphereDomain(float(d.get("theta_min", 0.0)), float(d.get("theta_max", math.pi)))


def domain_to_dict(dom: Domain) -> dict:
    if isinstance(dom, BoxDomain):
        return {"lower": list(dom.lower), "upper": list(dom.upper)}
    return {"theta_min": dom.theta_min, "theta_max": dom.theta_max}


def load_grid_config(source: str | Path | dict) -> DomainGrid:
    """Build a grid from ``{"manifold": {...}, "domain": {...}, "resolution": r}``."""
    if not isinstance(source, dict):
        source = json.loads(Path(source).read_text())
    try:
        spec = ManifoldSpec(**source["manifold"])
    except TypeError as exc:
        raise InvalidSpec(str(exc)) from None
    return build_grid(spec, domain_from_dict(source.get("domain"), spec), int(source.get("resolution", 16)))
