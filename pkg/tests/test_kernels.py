import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cliffpi.algebra import Multivector, Paravector, SingularInput, involution, invert_paravector, tables
from cliffpi.geometry import ManifoldSpec
from cliffpi.kernels import (C_hopf, DomainError, EF_hyperbolic, G_euclid, G_rp, G_sphere, cot_cylinder,
                             cylinder_truncation_error, hopf_collapse_factor, kernel, kernel_into, kernel_params)


def oracle_G(u, expo):
    """bar(u) / |u|^expo built from Multivector arithmetic."""
    u = np.asarray(u, dtype=float)
    n = u.size - 1
    r = np.linalg.norm(u)
    return involution(Paravector(u).embed(), "conjugation") * (r ** -expo)


def dirac_left(fn, x, n, h=1e-5):
    """sum_a e_a d/dx_a fn(x) by central differences."""
    out = Multivector.zero(n)
    for a in range(n + 1):
        dx = np.zeros(n + 1)
        dx[a] = h
        d = (fn(x + dx) - fn(x - dx)) / (2 * h)
        ea = Multivector.scalar(n) if a == 0 else Multivector.blade(n, a)
        out = out + ea * d
    return out


def test_euclid_matches_oracle():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        for _ in range(20):
            x, y = rng.normal(size=(2, n + 1))
            assert G_euclid(x, y).value.allclose(oracle_G(x - y, n + 1), 1e-12)


def test_kernel_value_carries_bar():
    x, y = np.array([0.3, 0.2, 0.1]), np.array([-0.1, 0.4, 0.7])
    kv = G_euclid(x, y)
    assert kv.conj_value.allclose(involution(kv.value, "bar"))


@pytest.mark.parametrize("n", [2, 3])
def test_euclid_monogenic(n):
    y = np.zeros(n + 1)
    x = np.linspace(0.3, 0.8, n + 1)
    r = dirac_left(lambda p: G_euclid(p, y).value, x, n)
    assert r.norm() < 1e-6


def test_cylinder_monogenic_and_oracle():
    n, k, R = 3, 1, 4
    y = np.array([0.1, 0.2, -0.1, 0.3])
    x = np.array([0.35, -0.1, 0.2, 0.05])
    for l in (0, 1):
        direct = Multivector.zero(n)
        for m in range(-R, R + 1):
            direct = direct + oracle_G(x - y + np.array([m, 0, 0, 0]), n + 1) * ((-1) ** (m * l))
        assert cot_cylinder(x, y, n, k, l, R).value.allclose(direct, 1e-12)
        r = dirac_left(lambda p: cot_cylinder(p, y, n, k, l, R).value, x, n)
        assert r.norm() < 1e-5


def test_cylinder_error_bound_is_finite_only_for_decaying_kernels():
    assert math.isinf(cylinder_truncation_error(2, 1, 10, 2))
    assert cylinder_truncation_error(4, 1, 10) < cylinder_truncation_error(4, 1, 5)


def oracle_hopf(x, y, K, n):
    """Direct double sum written independently of the compiled kernel."""
    C1 = Multivector.zero(n)
    for j in range(K + 1):
        C1 = C1 + oracle_G(2.0 ** j * (x - y), n + 1)
    xi = invert_paravector(x).coeffs[tables(n).para_blades]
    yi = invert_paravector(y).coeffs[tables(n).para_blades]
    mid = Multivector.zero(n)
    for j in range(1, K + 1):
        mid = mid + oracle_G(2.0 ** j * (xi - yi), n + 1)
    return C1 + oracle_G(x, n + 1) * mid * oracle_G(y, n + 1) * 2.0 ** (2 - 2 * n)


def test_hopf_matches_direct_sum():
    n = 2
    x, y = np.array([1.0, 0, 0]), np.array([1.5, 0, 0])
    got = C_hopf(x, y, K=20).value
    assert got.allclose(oracle_hopf(x, y, 20, n), 1e-10)
    x, y = np.array([1.2, 0.3, -0.4]), np.array([1.1, -0.5, 0.2])
    assert C_hopf(x, y, K=12).value.allclose(oracle_hopf(x, y, 12, n), 1e-10)


def test_hopf_collapse_on_real_axis():
    # for real x, y the two series collapse onto a multiple of G(x - y)
    x, y = np.array([1.0, 0, 0]), np.array([1.5, 0, 0])
    g = G_euclid(x, y).value
    assert C_hopf(x, y, 20).value.allclose(g * hopf_collapse_factor(2, 20), 1e-12)
    assert hopf_collapse_factor(2, 60) == pytest.approx(1.25)


def test_hopf_collapse_off_axis():
    # inversion invariance of G reduces the second series to multiples of G(x - y)
    rng = np.random.default_rng(4)
    for _ in range(10):
        x = rng.normal(size=3)
        y = rng.normal(size=3)
        x *= rng.uniform(1, 2) / np.linalg.norm(x)
        y *= rng.uniform(1, 2) / np.linalg.norm(y)
        ref = G_euclid(x, y).value * hopf_collapse_factor(2, 20)
        assert C_hopf(x, y, 20).value.allclose(ref, 1e-9 * ref.norm())


def test_hopf_monogenic():
    y = np.array([1.3, 0.1, -0.2])
    x = np.array([1.2, -0.3, 0.25])
    r = dirac_left(lambda p: C_hopf(p, y, 20).value, x, 2)
    assert r.norm() < 1e-5


def _raw(spec, x, y, trunc=None):
    kid, ip, expo, lattice = kernel_params(spec, trunc)
    out = np.zeros(1 << spec.n)
    assert kernel_into(kid, np.asarray(x, float), np.asarray(y, float), spec.n, ip, expo, lattice,
                       tables(spec.n).sign, out)
    return out


@given(st.integers(-3, 3))
def test_hopf_dilation_law(j):
    spec = ManifoldSpec("hopf", 2, truncation=20)
    x, y = np.array([1.2, -0.3, 0.25]), np.array([1.3, 0.1, -0.2])
    s = 2.0 ** j
    assert np.allclose(_raw(spec, s * x, s * y) * s ** spec.n, _raw(spec, x, y), atol=1e-12)


def test_truncation_doubling_within_reported_error():
    x, y = np.array([0.3, 0.1, -0.2, 0.15]), np.array([0.1, -0.2, 0.1, 0.05])
    for l, R in itertools.product((0, 1), (5, 10, 20)):
        a, b = cot_cylinder(x, y, 3, 1, l, R), cot_cylinder(x, y, 3, 1, l, 2 * R)
        assert (a.value - b.value).norm() < a.truncation_error
    x, y = np.array([1.2, 0.3, 0.1]), np.array([1.5, -0.2, 0.3])
    for K in (5, 10, 20):
        a, b = C_hopf(x, y, K), C_hopf(x, y, 2 * K)
        assert (a.value - b.value).norm() < a.truncation_error


def test_sphere_and_rp_kernels():
    x = np.array([0.0, 0.6, 0.8])
    y = np.array([0.6, 0.0, 0.8])
    g = G_sphere(x, y).value
    assert g.allclose(oracle_G(x - y, 2), 1e-12)
    for bundle, s in ((1, 1.0), (2, -1.0)):
        r = G_rp(x, y, bundle).value
        assert r.allclose(g + oracle_G(-x - y, 2) * s, 1e-12)
        # the section law f(-x) = +/- f(x) carries over to the kernel
        assert G_rp(-x, y, bundle).value.allclose(r * s, 1e-12)
    with pytest.raises(DomainError):
        G_sphere(2 * x, y)


def test_hyperbolic_EF():
    x, y = np.array([0.2, 0.3, 1.4]), np.array([0.5, -0.1, 1.1])
    E, F = EF_hyperbolic(x, y)
    n = 2
    yh = y * np.array([1, 1, -1])
    xh = x * np.array([1, 1, -1])
    ref_E = invert_paravector(x - y) * (np.linalg.norm(x - y) ** (1 - n) * np.linalg.norm(x - yh) ** (1 - n))
    ref_F = invert_paravector(xh - y) * (np.linalg.norm(x - y) ** (1 - n) * np.linalg.norm(xh - y) ** (1 - n))
    assert E.value.allclose(ref_E, 1e-12) and F.value.allclose(ref_F, 1e-12)
    with pytest.raises(SingularInput):
        EF_hyperbolic(x, x)
    with pytest.raises(DomainError):
        EF_hyperbolic(x, np.array([0, 0, -1.0]))


def test_dispatch_and_singular():
    spec = ManifoldSpec("cylinder", 3, k=1, truncation=6)
    x, y = np.array([0.3, 0.1, -0.2, 0.15]), np.array([0.1, -0.2, 0.1, 0.05])
    assert kernel(spec, x, y).value == cot_cylinder(x, y, 3, 1, 0, 6).value
    with pytest.raises(SingularInput):
        G_euclid(x, x)
    with pytest.raises(DomainError):
        C_hopf(np.array([0.5, 0, 0]), np.array([1.5, 0, 0]))
