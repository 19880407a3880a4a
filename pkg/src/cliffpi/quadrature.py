"""Direct-summation quadrature loops (numba) and FFT convolution helpers."""
from __future__ import annotations

import math

import numpy as np
import scipy.fft as sfft
from numba import njit

from .kernels import hyperbolic_EF, kernel_into


@njit(cache=True)
def _conj(a, grade_sign, out):
    for i in range(a.shape[0]):
        out[i] = a[i] * grade_sign[i]


@njit(cache=True)
def _acc_gp(scale, a, b, sign, out):
    N = a.shape[0]
    for i in range(N):
        ai = a[i]
        if ai == 0.0:
            continue
        ai *= scale
        for j in range(N):
            bj = b[j]
            if bj != 0.0:
                out[i ^ j] += sign[i, j] * ai * bj


@njit(cache=True)
def volume_sum(kid, ip, expo, lattice, sign, conj_sign, n, targets, sources, sw, values, transpose):
    """Punctured midpoint sum of K(t, s) f(s) w(s) over sources.

    ``values`` has shape (fields, sources, N) in the forward direction and
    (fields, targets, N) when ``transpose`` is set, in which case the result
    is indexed by sources and applies the transposed operator.
    """
    F = values.shape[0]
    N = sign.shape[0]
    if transpose:
        out = np.zeros((F, sources.shape[0], N))
    else:
        out = np.zeros((F, targets.shape[0], N))
    K = np.zeros(N)
    Kc = np.zeros(N)
    for t in range(targets.shape[0]):
        x = targets[t]
        for s in range(sources.shape[0]):
            if not kernel_into(kid, x, sources[s], n, ip, expo, lattice, sign, K):
                continue
            if transpose:
                _conj(K, conj_sign, Kc)
                for f in range(F):
                    _acc_gp(sw[s], Kc, values[f, t], sign, out[f, s])
            else:
                for f in range(F):
                    _acc_gp(sw[s], K, values[f, s], sign, out[f, t])
    return out


@njit(cache=True)
def _face_points(c, tang, sub, sphere, pts, wts):
    m = tang.shape[0]
    d = c.shape[0]
    total = sub ** m
    for q in range(total):
        r = q
        for a in range(d):
            pts[q, a] = c[a]
        for i in range(m):
            ai = r % sub
            r //= sub
            off = (2.0 * ai + 1.0) / sub - 1.0
            for a in range(d):
                pts[q, a] += off * tang[i, a]
        if sphere:
            nrm = 0.0
            for a in range(d):
                nrm += pts[q, a] ** 2
            nrm = math.sqrt(nrm)
            for a in range(d):
                pts[q, a] /= nrm
        wts[q] = 1.0 / total
    return total


@njit(cache=True)
def _half_width(tang):
    hw = 0.0
    for i in range(tang.shape[0]):
        s = 0.0
        for a in range(tang.shape[1]):
            s += tang[i, a] ** 2
        hw = max(hw, math.sqrt(s))
    return hw


@njit(cache=True)
def boundary_sum(kid, ip, expo, lattice, sign, n, targets, fc, fn, fw, ft, values, near, sub, sphere):
    """Sum over faces of K(t, y) n(y) f(y) dS(y) with subdivided near faces."""
    F = values.shape[0]
    N = sign.shape[0]
    d = targets.shape[1]
    out = np.zeros((F, targets.shape[0], N))
    m = ft.shape[1]
    maxq = sub ** m
    pts = np.empty((maxq, d))
    wts = np.empty(maxq)
    K = np.zeros(N)
    Ksum = np.zeros(N)
    nv = np.zeros(N)
    Kn = np.zeros(N)
    for j in range(fc.shape[0]):
        hw = _half_width(ft[j])
        nv[:] = 0.0
        nv[0] = fn[j, 0]
        for a in range(1, d):
            nv[1 << (a - 1)] = fn[j, a]
        for t in range(targets.shape[0]):
            x = targets[t]
            dist = 0.0
            for a in range(d):
                dist += (x[a] - fc[j, a]) ** 2
            dist = math.sqrt(dist)
            Ksum[:] = 0.0
            if dist < near * 2.0 * hw:
                q = _face_points(fc[j], ft[j], sub, sphere, pts, wts)
                for p in range(q):
                    if kernel_into(kid, x, pts[p], n, ip, expo, lattice, sign, K):
                        for i in range(N):
                            Ksum[i] += wts[p] * K[i]
            else:
                if kernel_into(kid, x, fc[j], n, ip, expo, lattice, sign, K):
                    for i in range(N):
                        Ksum[i] = K[i]
            Kn[:] = 0.0
            _acc_gp(fw[j], Ksum, nv, sign, Kn)
            for f in range(F):
                _acc_gp(1.0, Kn, values[f, j], sign, out[f, t])
    return out


@njit(cache=True)
def _embed_para(p, out):
    out[:] = 0.0
    out[0] = p[0]
    for a in range(1, p.shape[0]):
        out[1 << (a - 1)] = p[a]


@njit(cache=True)
def hyperbolic_volume_sum(n, sign, conj_sign, hat_sign, targets, tscale, sources, sw, values, transpose):
    """sum_s tscale(t) w(s) [E(s, t) f(s) - F(s, t) hat f(s)]; sources play x."""
    F = values.shape[0]
    N = sign.shape[0]
    d = n + 1
    if transpose:
        out = np.zeros((F, sources.shape[0], N))
    else:
        out = np.zeros((F, targets.shape[0], N))
    e = np.empty(d)
    fk = np.empty(d)
    E = np.zeros(N)
    Fm = np.zeros(N)
    fh = np.zeros(N)
    tmp = np.zeros(N)
    for t in range(targets.shape[0]):
        y = targets[t]
        for s in range(sources.shape[0]):
            if not hyperbolic_EF(sources[s], y, n, e, fk):
                continue
            _embed_para(e, E)
            _embed_para(fk, Fm)
            sc = tscale[t] * sw[s]
            if transpose:
                _conj(E, conj_sign, tmp)
                E[:] = tmp
                _conj(Fm, conj_sign, tmp)
                Fm[:] = tmp
                for f in range(F):
                    _acc_gp(sc, E, values[f, t], sign, out[f, s])
                    tmp[:] = 0.0
                    _acc_gp(sc, Fm, values[f, t], sign, tmp)
                    for i in range(N):
                        out[f, s, i] -= hat_sign[i] * tmp[i]
            else:
                for f in range(F):
                    for i in range(N):
                        fh[i] = hat_sign[i] * values[f, s, i]
                    _acc_gp(sc, E, values[f, s], sign, out[f, t])
                    _acc_gp(-sc, Fm, fh, sign, out[f, t])
    return out


@njit(cache=True)
def hyperbolic_boundary_sum(n, sign, hat_sign, targets, tscale, fc, fn, fw, ft, values, near, sub):
    F = values.shape[0]
    N = sign.shape[0]
    d = n + 1
    out = np.zeros((F, targets.shape[0], N))
    m = ft.shape[1]
    maxq = sub ** m
    pts = np.empty((maxq, d))
    wts = np.empty(maxq)
    e = np.empty(d)
    fk = np.empty(d)
    Esum = np.zeros(N)
    Fsum = np.zeros(N)
    nv = np.zeros(N)
    nh = np.zeros(N)
    En = np.zeros(N)
    Fn = np.zeros(N)
    fh = np.zeros(N)
    for j in range(fc.shape[0]):
        hw = _half_width(ft[j])
        nv[:] = 0.0
        nv[0] = fn[j, 0]
        for a in range(1, d):
            nv[1 << (a - 1)] = fn[j, a]
        for i in range(N):
            nh[i] = hat_sign[i] * nv[i]
        for t in range(targets.shape[0]):
            y = targets[t]
            dist = 0.0
            for a in range(d):
                dist += (y[a] - fc[j, a]) ** 2
            dist = math.sqrt(dist)
            Esum[:] = 0.0
            Fsum[:] = 0.0
            if dist < near * 2.0 * hw:
                q = _face_points(fc[j], ft[j], sub, False, pts, wts)
            else:
                q = 1
                for a in range(d):
                    pts[0, a] = fc[j, a]
                wts[0] = 1.0
            for p in range(q):
                if hyperbolic_EF(pts[p], y, n, e, fk):
                    Esum[0] += wts[p] * e[0]
                    Fsum[0] += wts[p] * fk[0]
                    for a in range(1, d):
                        Esum[1 << (a - 1)] += wts[p] * e[a]
                        Fsum[1 << (a - 1)] += wts[p] * fk[a]
            En[:] = 0.0
            Fn[:] = 0.0
            sc = tscale[t] * fw[j]
            _acc_gp(sc, Esum, nv, sign, En)
            _acc_gp(sc, Fsum, nh, sign, Fn)
            for f in range(F):
                for i in range(N):
                    fh[i] = hat_sign[i] * values[f, j, i]
                _acc_gp(1.0, En, values[f, j], sign, out[f, t])
                _acc_gp(-1.0, Fn, fh, sign, out[f, t])
    return out


@njit(cache=True)
def kernel_table(kid, ip, expo, lattice, sign, n, offsets):
    """Kernel K(u, 0) at each row of ``offsets``; zero where singular."""
    N = sign.shape[0]
    out = np.zeros((offsets.shape[0], N))
    zero = np.zeros(offsets.shape[1])
    K = np.zeros(N)
    for r in range(offsets.shape[0]):
        if kernel_into(kid, offsets[r], zero, n, ip, expo, lattice, sign, K):
            out[r] = K
    return out


class ConvolutionPlan:
    """FFT evaluation of sum_s K(x_t - x_s) f_s w on a uniform box grid.

    Periodic axes use circular convolution, the others zero padding.
    """

    def __init__(self, shape, spacings, wrap, table_fn, sign, cell_weight):
        self.shape = tuple(shape)
        d = len(shape)
        self.circular = [w == 1 for w in wrap]
        self.fft_shape = tuple(s if c else 2 * s for s, c in zip(shape, self.circular))
        grids = []
        for a in range(d):
            M, L = self.fft_shape[a], shape[a]
            idx = np.arange(M)
            if not self.circular[a]:
                idx = np.where(idx < L, idx, idx - M)  # negative offsets wrap to the back
            grids.append(idx * spacings[a])
        mesh = np.meshgrid(*grids, indexing="ij")
        offsets = np.stack([m.ravel() for m in mesh], axis=-1)
        del mesh
        table = table_fn(offsets) * cell_weight
        del offsets
        self.sign = sign
        self.N = sign.shape[0]
        self.active = [i for i in range(self.N) if np.any(table[:, i])]
        self.khat = {i: sfft.rfftn(table[:, i].reshape(self.fft_shape)) for i in self.active}

    def _reflected(self, conj_sign):
        # the table is real, so reflecting every offset conjugates its spectrum
        return {i: conj_sign[i] * np.conj(k) for i, k in self.khat.items()}

    def apply(self, values: np.ndarray, transpose: bool = False, conj_sign=None) -> np.ndarray:
        """values: (fields, cells, N) -> (fields, cells, N)."""
        khat = self._reflected(conj_sign) if transpose else self.khat
        F = values.shape[0]
        out = np.zeros_like(values)
        sl = tuple(slice(0, s) for s in self.shape)
        for f in range(F):
            grid_vals = values[f].reshape(self.shape + (self.N,))
            for b in range(self.N):
                col = grid_vals[..., b]
                if not np.any(col):
                    continue
                fhat = sfft.rfftn(col, s=self.fft_shape)
                for a in self.active:
                    conv = sfft.irfftn(khat[a] * fhat, s=self.fft_shape)[sl]
                    out[f, :, a ^ b] += self.sign[a, b] * conv.ravel()
        return out
