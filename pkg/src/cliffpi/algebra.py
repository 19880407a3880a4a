"""Real Clifford algebra Cl_n with generators squaring to -1.

Blades are indexed by subset bitmask of {1..n}: bit ``i-1`` set means
``e_i`` is a factor, index 0 is the identity ``e_0``.  Two layers are
provided: a small immutable :class:`Multivector` value type for exact
single-element work, and array helpers (:class:`CliffordTables`) that act on
trailing coefficient axes of numpy arrays for field computations.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 8

INVOLUTIONS = ("reversion", "conjugation", "bar", "hat")


class DimensionMismatch(ValueError):
    pass


class SingularInput(ValueError):
    pass


def blade_sign(a: int, b: int) -> int:
    """Sign of the product ``e_a e_b`` of two canonical blades (bitmasks)."""
    swaps = 0
    x = a >> 1
    while x:
        swaps += bin(x & b).count("1")
        x >>= 1
    # each shared generator contracts as e_i e_i = -1
    swaps += bin(a & b).count("1")
    return -1 if swaps & 1 else 1


def paravector_blade(a: int) -> int:
    """Blade index of the paravector direction ``e_a`` (a = 0..n)."""
    return 0 if a == 0 else 1 << (a - 1)


class CliffordTables:
    """Precomputed multiplication and involution tables for one ``n``."""

    def __init__(self, n: int):
        if not 1 <= n <= MAX_DIM:
            raise ValueError(f"n must lie in 1..{MAX_DIM}, got {n}")
        self.n = n
        self.dim = N = 1 << n
        idx = np.arange(N)
        self.sign = np.array([[blade_sign(a, b) for b in range(N)] for a in range(N)], dtype=np.int8)
        self.grade = np.array([bin(i).count("1") for i in range(N)])
        r = self.grade
        rev = (-1.0) ** (r * (r - 1) // 2)
        conj = (-1.0) ** (r * (r + 1) // 2)
        self.involution_signs = {
            "reversion": rev,
            "conjugation": conj,
            "bar": rev * conj,
            "hat": np.where(idx & (1 << (n - 1)), -1.0, 1.0),
        }
        # perm[i, c] = i ^ c ; signed rows used by gp()
        self.perm = idx[:, None] ^ idx[None, :]
        self._gp_rows = self.sign[idx[:, None], self.perm].astype(float)
        self.para_blades = np.array([paravector_blade(a) for a in range(n + 1)])

    # -- array helpers -------------------------------------------------
    def gp(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Geometric product over the trailing axis, broadcasting leading axes."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        for i in range(self.dim):
            ai = a[..., i]
            if not np.any(ai):
                continue
            p = self.perm[i]
            out += ai[..., None] * (self._gp_rows[i] * b[..., p])
        return out

    def left_matrix(self, a: np.ndarray) -> np.ndarray:
        """Matrix ``L`` with ``L @ b == gp(a, b)`` (works on stacks of ``a``)."""
        a = np.asarray(a, dtype=float)
        N = self.dim
        L = np.zeros(a.shape[:-1] + (N, N))
        for i in range(N):
            for j in range(N):
                L[..., i ^ j, j] += self.sign[i, j] * a[..., i]
        return L

    def involution(self, a: np.ndarray, kind: str) -> np.ndarray:
        try:
            return np.asarray(a, dtype=float) * self.involution_signs[kind]
        except KeyError:
            raise ValueError(f"unknown involution {kind!r}") from None

    def conj(self, a: np.ndarray) -> np.ndarray:
        return self.involution(a, "conjugation")

    def hat(self, a: np.ndarray) -> np.ndarray:
        return self.involution(a, "hat")

    def embed(self, x: np.ndarray) -> np.ndarray:
        """Paravector components ``(..., n+1)`` -> multivector ``(..., 2^n)``."""
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape[:-1] + (self.dim,))
        out[..., self.para_blades] = x
        return out

    def para_part(self, a: np.ndarray) -> np.ndarray:
        return np.asarray(a)[..., self.para_blades]

    def unit(self, blade: int) -> np.ndarray:
        e = np.zeros(self.dim)
        e[blade] = 1.0
        return e

    @property
    def en(self) -> np.ndarray:
        return self.unit(1 << (self.n - 1))

    def p_mask(self) -> np.ndarray:
        return (np.arange(self.dim) & (1 << (self.n - 1))) == 0

    def qprime_matrix(self) -> np.ndarray:
        """Coefficient matrix of ``A -> -e_n Q(A) e_n``."""
        N, top = self.dim, 1 << (self.n - 1)
        Qm = np.zeros((N, N))
        for b in range(top):
            # Q(e_B e_n) = e_B, then -e_n e_B e_n = (-1)^{|B|} e_B
            Qm[b, b | top] = (-1.0) ** self.grade[b]
        return Qm

    def paravector_inverse(self, x: np.ndarray) -> np.ndarray:
        """Inverse of paravector components ``(..., n+1)`` as components."""
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        if np.any(r2 == 0):
            raise SingularInput("zero paravector has no inverse")
        y = -x / r2
        y[..., 0] = -y[..., 0]
        return y


@lru_cache(maxsize=None)
def tables(n: int) -> CliffordTables:
    return CliffordTables(n)


@dataclass(frozen=True, eq=False)
class Multivector:
    n: int
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (1 << self.n,):
            raise ValueError(f"Cl_{self.n} needs {1 << self.n} coefficients, got shape {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zero(cls, n: int) -> Multivector:
        return cls(n, np.zeros(1 << n))

    @classmethod
    def scalar(cls, n: int, value: float = 1.0) -> Multivector:
        c = np.zeros(1 << n)
        c[0] = value
        return cls(n, c)

    @classmethod
    def blade(cls, n: int, *generators: int, value: float = 1.0) -> Multivector:
        """``value * e_{i1} e_{i2} ...``; generators are 1-based and may repeat."""
        out = cls.scalar(n, value)
        for g in generators:
            if not 1 <= g <= n:
                raise ValueError(f"generator e_{g} does not exist in Cl_{n}")
            out = out * cls(n, tables(n).unit(1 << (g - 1)))
        return out

    def _check(self, other: Multivector) -> None:
        if self.n != other.n:
            raise DimensionMismatch(f"Cl_{self.n} vs Cl_{other.n}")

    def __add__(self, other: Multivector) -> Multivector:
        self._check(other)
        return Multivector(self.n, self.coeffs + other.coeffs)

    def __sub__(self, other: Multivector) -> Multivector:
        self._check(other)
        return Multivector(self.n, self.coeffs - other.coeffs)

    def __neg__(self) -> Multivector:
        return Multivector(self.n, -self.coeffs)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return gp(self, other)
        return Multivector(self.n, self.coeffs * float(other))

    def __rmul__(self, other):
        return Multivector(self.n, self.coeffs * float(other))

    def __truediv__(self, other: float) -> Multivector:
        return Multivector(self.n, self.coeffs / float(other))

    def __eq__(self, other) -> bool:
        return isinstance(other, Multivector) and self.n == other.n and np.array_equal(self.coeffs, other.coeffs)

    def allclose(self, other: Multivector, atol: float = 1e-12) -> bool:
        self._check(other)
        return bool(np.allclose(self.coeffs, other.coeffs, rtol=0, atol=atol))

    def norm2(self) -> float:
        return float(np.dot(self.coeffs, self.coeffs))

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def grades(self) -> set[int]:
        g = tables(self.n).grade
        return {int(g[i]) for i in np.flatnonzero(self.coeffs)}

    def __repr__(self) -> str:
        terms = []
        for i, c in enumerate(self.coeffs):
            if c:
                name = "e0" if i == 0 else "e" + "".join(str(b + 1) for b in range(self.n) if i >> b & 1)
                terms.append(f"{c:g}*{name}")
        return f"Multivector(n={self.n}, {' + '.join(terms) or '0'})"


@dataclass(frozen=True, eq=False)
class Paravector:
    """``x0 e0 + x1 e1 + ... + xn en``, a point of R^{n+1}."""

    components: np.ndarray

    def __post_init__(self):
        c = np.array(self.components, dtype=float).reshape(-1)
        if c.size < 2:
            raise ValueError("a paravector needs at least two components")
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    @property
    def n(self) -> int:
        return self.components.size - 1

    def embed(self) -> Multivector:
        return Multivector(self.n, tables(self.n).embed(self.components))

    def norm(self) -> float:
        return float(np.linalg.norm(self.components))

    def __repr__(self) -> str:
        return f"Paravector({self.components.tolist()})"


def as_components(x) -> np.ndarray:
    if isinstance(x, Paravector):
        return x.components
    if isinstance(x, Multivector):
        return x.coeffs[tables(x.n).para_blades]
    return np.asarray(x, dtype=float)


def gp(a: Multivector, b: Multivector) -> Multivector:
    if a.n != b.n:
        raise DimensionMismatch(f"Cl_{a.n} vs Cl_{b.n}")
    return Multivector(a.n, tables(a.n).gp(a.coeffs, b.coeffs))


def involution(a: Multivector, kind: str) -> Multivector:
    return Multivector(a.n, tables(a.n).involution(a.coeffs, kind))


def invert_paravector(x: Paravector | Sequence[float]) -> Multivector:
    """Two-sided inverse ``bar(x)/|x|^2`` of a nonzero paravector."""
    comps = as_components(x)
    n = comps.size - 1
    return Multivector(n, tables(n).embed(tables(n).paravector_inverse(comps)))


def pq_split(a: Multivector) -> tuple[Multivector, Multivector, Multivector]:
    """``a = P + Q e_n`` with P, Q free of ``e_n``; also returns ``Q' = -e_n Q e_n``."""
    t = tables(a.n)
    top = 1 << (a.n - 1)
    P = np.where(t.p_mask(), a.coeffs, 0.0)
    Q = np.zeros_like(a.coeffs)
    for b in range(top):
        # e_B e_n is already canonical since n is the largest generator
        Q[b] = a.coeffs[b | top]
    Qp = t.qprime_matrix() @ a.coeffs
    return Multivector(a.n, P), Multivector(a.n, Q), Multivector(a.n, Qp)


def e(n: int, i: int) -> Multivector:
    """Generator ``e_i`` of Cl_n, with ``e(n, 0)`` the identity."""
    return Multivector.scalar(n) if i == 0 else Multivector.blade(n, i)


def random_multivectors(n: int, count: int, rng: np.random.Generator) -> Iterable[Multivector]:
    for row in rng.normal(size=(count, 1 << n)):
        yield Multivector(n, row)
