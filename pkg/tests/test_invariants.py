import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cliffpi.algebra import Multivector, tables
from cliffpi.fields import random_bumps, smooth_field
from cliffpi.geometry import ManifoldSpec, build_grid, cap, lift, project
from cliffpi.kernels import C_hopf, G_euclid, G_rp, cot_cylinder
from cliffpi.operators import (borel_pompeiu_residual, cauchy_matrix_apply, dirac_operator, l2_norm,
                               pi_matrix_apply)


def dirac_right(fn, y, n, h=1e-3):
    """sum_a (d/dy_a fn(y)) e_a by central differences."""
    out = Multivector.zero(n)
    for a in range(n + 1):
        dy = np.zeros(n + 1)
        dy[a] = h
        d = (fn(y + dy) - fn(y - dy)) / (2 * h)
        out = out + d * (Multivector.scalar(n) if a == 0 else Multivector.blade(n, a))
    return out


@pytest.mark.parametrize("fn,x,y", [
    (lambda x, y: G_euclid(x, y).value, np.array([0.9, 0.2, -0.3]), np.array([0.1, -0.1, 0.2])),
    (lambda x, y: cot_cylinder(x, y, 3, 1, 1, 8).value, np.array([0.3, 0.6, 0.1, 0.2]),
     np.array([-0.1, 0.0, -0.2, -0.3])),
    (lambda x, y: C_hopf(x, y, 20).value, np.array([1.1, 0.4, 0.2]), np.array([1.7, -0.3, 0.1])),
])
def test_kernels_right_monogenic_in_y(fn, x, y):
    n = x.size - 1
    assert dirac_right(lambda q: fn(x, q), y, n).norm() <= 1e-3


def test_kernel_homogeneity_slope():
    u = np.array([0.3, -0.2, 0.5])
    ts = np.array([0.5, 1.0, 2.0, 4.0])
    norms = [G_euclid(t * u, np.zeros(3)).value.norm() for t in ts]
    slope = np.polyfit(np.log(ts), np.log(norms), 1)[0]
    assert slope == pytest.approx(-2.0, abs=1e-10)


@given(st.floats(0.1, 3.0), st.floats(0.1, 6.0))
def test_rp_kernel_law_exact(theta, phi):
    x = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    y = np.array([0.0, 0.6, 0.8])
    for bundle, s in ((1, 1.0), (2, -1.0)):
        assert np.allclose(G_rp(-x, y, bundle).value.coeffs, s * G_rp(x, y, bundle).value.coeffs, atol=1e-12)


def test_project_collapses_orbits():
    rng = np.random.default_rng(0)
    spec = ManifoldSpec("cylinder", 4, k=2, bundle=1)
    hopf = ManifoldSpec("hopf", 2)
    for _ in range(100):
        x = rng.uniform(-1, 1, size=5)
        base, s0 = project(spec, x)
        for m in np.ndindex(7, 7):
            shift = np.array(m) - 3
            y, s = project(spec, x + np.r_[shift, 0, 0, 0])
            assert np.allclose(y, base, atol=1e-12)
            assert s == s0 * (-1.0) ** int(shift[0])
        z = rng.uniform(-1, 1, size=3)
        zb = project(hopf, z)[0]
        for j in range(-3, 4):
            assert np.allclose(project(hopf, z * 2.0 ** j)[0], zb, atol=1e-12)


def test_lift_reproduces_samples():
    spec = ManifoldSpec("rp", 2, bundle=2)
    g = build_grid(spec, None, 8)
    vals = np.random.default_rng(0).normal(size=(g.size, 4))
    f = lift(spec, g, vals)
    for i in (0, 7, g.size - 1):
        assert np.array_equal(f(g.centers[i]), vals[i])
        assert np.array_equal(f(-g.centers[i]), -vals[i])


def test_measure_refinement_order():
    errs = []
    hs = []
    for r in (8, 16, 32):
        g = build_grid(ManifoldSpec("sphere", 2), cap(math.pi / 3), r)
        errs.append(abs(g.weights.sum() - math.pi))
        hs.append(g.h)
    orders = np.diff(np.log(errs)) / np.diff(np.log(hs))
    assert np.all(orders >= 1.0)


@pytest.mark.parametrize("kind", ["euclid", "hopf", "hyperbolic"])
def test_operators_are_linear(kind):
    g = build_grid(ManifoldSpec(kind, 2), None, 6)
    rng = np.random.default_rng(1)
    f, h = rng.normal(size=(2, g.size, 4))
    a = 2.5
    for op in (lambda v: cauchy_matrix_apply(g, v), lambda v: dirac_operator(g, "D0" if kind != "hyperbolic"
                                                                              else "M").apply(v)):
        lhs = op(a * f + h)
        rhs = a * op(f) + op(h)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * np.abs(lhs).max())


def test_bp_constant_reported_per_geometry():
    spec = ManifoldSpec("hopf", 2)
    rs = [borel_pompeiu_residual(smooth_field(build_grid(spec, None, r)), max_targets=200) for r in (8, 16)]
    assert rs[1].residual_l2 <= 2 * rs[0].residual_l2 * rs[1].h / rs[0].h


def test_hyperbolic_M_identities_converge():
    spec = ManifoldSpec("hyperbolic", 2)
    res = {}
    for r in (8, 12):
        g = build_grid(spec, None, r)
        f = random_bumps(g, np.random.default_rng(0), 2)
        M, Mb = dirac_operator(g, "M"), dirac_operator(g, "Mbar")
        a = M.apply(pi_matrix_apply(g, f)) - Mb.apply(f)
        b = pi_matrix_apply(g, M.apply(f)) - Mb.apply(f)
        res[r] = (max(l2_norm(g, a[i]) / l2_norm(g, f[i]) for i in range(2)),
                  max(l2_norm(g, b[i]) / l2_norm(g, f[i]) for i in range(2)))
    for k in range(2):
        order = math.log(res[8][k] / res[12][k]) / math.log(12 / 8)
        assert order >= 1.0
