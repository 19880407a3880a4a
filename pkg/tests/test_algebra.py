import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cliffpi.algebra import (DimensionMismatch, Multivector, Paravector, SingularInput, e, involution,
                             invert_paravector, pq_split, tables)


def oracle_blade_product(a: int, b: int, n: int) -> tuple[float, int]:
    """Multiply two blades by bubble-sorting their generator lists."""
    gens = [i for i in range(n) if a >> i & 1] + [i for i in range(n) if b >> i & 1]
    sign = 1.0
    changed = True
    while changed:
        changed = False
        for i in range(len(gens) - 1):
            if gens[i] > gens[i + 1]:
                gens[i], gens[i + 1] = gens[i + 1], gens[i]
                sign = -sign
                changed = True
    out, i = [], 0
    while i < len(gens):
        if i + 1 < len(gens) and gens[i] == gens[i + 1]:
            sign = -sign
            i += 2
        else:
            out.append(gens[i])
            i += 1
    return sign, sum(1 << g for g in out)


def oracle_gp(a: np.ndarray, b: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(1 << n)
    for i, ai in enumerate(a):
        for j, bj in enumerate(b):
            s, k = oracle_blade_product(i, j, n)
            out[k] += s * ai * bj
    return out


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_product_matches_bubble_sort_oracle(n):
    rng = np.random.default_rng(n)
    t = tables(n)
    for _ in range(1000 // 4):
        a, b = rng.normal(size=(2, t.dim))
        assert np.allclose(t.gp(a, b), oracle_gp(a, b, n), atol=1e-12)


def test_blade_table_against_oracle_n5():
    t = tables(5)
    for a in range(t.dim):
        for b in range(t.dim):
            s, k = oracle_blade_product(a, b, 5)
            assert t.sign[a, b] == s and a ^ b == k


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_generator_relations(n):
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            lhs = e(n, i) * e(n, j) + e(n, j) * e(n, i)
            assert lhs.allclose(Multivector.scalar(n, -2.0 if i == j else 0.0))


coeffs3 = arrays(np.float64, 8, elements=st.floats(-10, 10))


@given(coeffs3, coeffs3, coeffs3)
def test_associative(a, b, c):
    A, B, C = (Multivector(3, v) for v in (a, b, c))
    lhs, rhs = ((A * B) * C).coeffs, (A * (B * C)).coeffs
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@given(coeffs3, coeffs3)
def test_involution_laws(a, b):
    A, B = Multivector(3, a), Multivector(3, b)
    AB = A * B
    tol = 1e-9 * (1 + np.abs(AB.coeffs).max())
    assert involution(AB, "reversion").allclose(involution(B, "reversion") * involution(A, "reversion"), tol)
    assert involution(AB, "conjugation").allclose(involution(B, "conjugation") * involution(A, "conjugation"), tol)
    assert involution(AB, "bar").allclose(involution(A, "bar") * involution(B, "bar"), tol)
    for kind in ("reversion", "conjugation", "bar", "hat"):
        assert involution(involution(A, kind), kind) == A


@given(arrays(np.float64, 4, elements=st.floats(-5, 5)).filter(lambda x: np.linalg.norm(x) > 1e-3))
def test_paravector_inverse_matches_linear_solve(x):
    t = tables(3)
    inv = invert_paravector(Paravector(x))
    # solve L_x y = 1 through the left-multiplication matrix
    y = np.linalg.solve(t.left_matrix(t.embed(x)), t.unit(0))
    assert np.allclose(inv.coeffs, y, atol=1e-10)
    one = Paravector(x).embed() * inv
    assert one.allclose(Multivector.scalar(3), 1e-10)


def test_zero_paravector_is_singular():
    with pytest.raises(SingularInput):
        invert_paravector([0.0, 0.0, 0.0])


@given(arrays(np.float64, 16, elements=st.floats(-10, 10)))
def test_pq_split(a):
    A = Multivector(4, a)
    P, Q, Qp = pq_split(A)
    en = e(4, 4)
    assert (P + Q * en).allclose(A, 1e-12)
    assert all(c == 0 for i, c in enumerate(Q.coeffs) if i & 8)
    assert abs(P.norm2() + Q.norm2() - A.norm2()) <= 1e-9 * (1 + A.norm2())
    assert Qp.allclose(-(en * Q * en), 1e-9)


def test_left_matrix_and_transpose_is_conjugate():
    t = tables(3)
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=(2, 8))
    L = t.left_matrix(a)
    assert np.allclose(L @ b, t.gp(a, b))
    assert np.allclose(L.T, t.left_matrix(t.conj(a)))


def test_dimension_errors():
    with pytest.raises(DimensionMismatch):
        Multivector.scalar(2) * Multivector.scalar(3)
    with pytest.raises(ValueError):
        Multivector(2, np.zeros(3))
    with pytest.raises(ValueError):
        Multivector.blade(2, 3)
    with pytest.raises(ValueError):
        tables(9)


def test_multivector_is_immutable():
    m = Multivector.scalar(2)
    with pytest.raises(ValueError):
        m.coeffs[0] = 2.0
