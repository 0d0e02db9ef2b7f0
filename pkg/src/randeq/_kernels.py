"""Compiled grid kernels for the Monte Carlo likelihood estimators.

Every grid point accumulates its sample sum sequentially in a fixed order,
so results are bit-identical for any thread count. Samples are passed
transposed, shape ``(K, N)``, so each parameter slot streams contiguously.
"""

import math

import numpy as np
from numba import njit, prange

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

LINEAR, CONIC, PORTFOLIO, CONTROL, CHAR_POLY = 0, 1, 2, 3, 4


@njit(cache=True, inline="always")
def _residual(code, r, x0, x1, x2, s, n, off, k, p):
    if code == LINEAR:
        acc = s[off, n] * x0
        if k > 1:
            acc += s[off + 1, n] * x1
        if k > 2:
            acc += s[off + 2, n] * x2
        return acc
    if code == CONIC:
        return (s[off, n] * x0 * x0 + s[off + 1, n] * x0 * x1 + s[off + 2, n] * x1 * x1
                + s[off + 3, n] * x0 + s[off + 4, n] * x1)
    if code == PORTFOLIO:
        a1 = s[off, n]
        a2 = s[off + 1, n]
        a3 = s[off + 2, n]
        c3 = a3 - p[2]
        d1 = (a1 - p[0]) - c3
        d2 = (a2 - p[1]) - c3
        dx = d1 * x0 + d2 * x1
        lam = p[3]
        if r == 0:
            return (a1 - a3) - lam * c3 * d1 - lam * d1 * dx
        return (a2 - a3) - lam * c3 * d2 - lam * d2 * dx
    if code == CONTROL:
        g = p[0]
        a = p[1]
        b = p[2]
        if r == 0:
            return x0 + g * x1 + (1.0 - a) * s[off, n] + b * s[off + 1, n]
        return g * x0 + x1 - b * s[off, n] + (1.0 - a) * s[off + 1, n]
    # characteristic polynomial det(M - tI) of the symmetric 3x3 matrix
    a11 = s[off, n]
    a12 = s[off + 1, n]
    a13 = s[off + 2, n]
    a22 = s[off + 3, n]
    a23 = s[off + 4, n]
    a33 = s[off + 5, n]
    t = x0
    c2 = a11 + a22 + a33
    c1 = a11 * a22 + a11 * a33 + a22 * a33 - a12 * a12 - a13 * a13 - a23 * a23
    c0 = (a11 * a22 * a33 + 2.0 * a12 * a23 * a13 - a13 * a13 * a22
          - a11 * a23 * a23 - a12 * a12 * a33)
    return -t * t * t + c2 * t * t - c1 * t + c0


@njit(cache=True, inline="always")
def _mix_pdf(t, r, kinds, locs, inv_scales, coefs, ncomp, tau):
    # gaussian components farther than tau scales are skipped (pinhole)
    acc = 0.0
    for j in range(ncomp):
        z = (t - locs[r, j]) * inv_scales[r, j]
        if kinds[r, j] == 0:
            if abs(z) <= tau:
                acc += coefs[r, j] * math.exp(-0.5 * z * z)
        elif abs(z) <= 1.0:
            acc += coefs[r, j]
    return acc


@njit(cache=True, parallel=True)
def joint_kernel(code, params, points, samples, starts, sizes,
                 kinds, locs, inv_scales, coefs, ncomp, band_lo, band_hi, tau, out):
    n_points = points.shape[0]
    n_samples = samples.shape[1]
    n_eq = starts.shape[0]
    dim = points.shape[1]
    for ip in prange(n_points):
        x0 = points[ip, 0]
        x1 = points[ip, 1] if dim > 1 else 0.0
        x2 = points[ip, 2] if dim > 2 else 0.0
        acc = 0.0
        for n in range(n_samples):
            prod = 1.0
            for r in range(n_eq):
                m = _residual(code, r, x0, x1, x2, samples, n, starts[r], sizes[r], params)
                if m < band_lo[r] or m > band_hi[r]:
                    prod = 0.0
                    break
                f = _mix_pdf(m, r, kinds, locs, inv_scales, coefs, ncomp[r], tau)
                if f == 0.0:
                    prod = 0.0
                    break
                prod *= f
            acc += prod
        out[ip] = acc / n_samples


@njit(cache=True, parallel=True)
def partitioned_kernel(code, params, points, samples, starts, sizes,
                       kinds, locs, inv_scales, coefs, ncomp, band_lo, band_hi, tau, out):
    n_points = points.shape[0]
    n_samples = samples.shape[1]
    n_eq = starts.shape[0]
    dim = points.shape[1]
    for ip in prange(n_points):
        x0 = points[ip, 0]
        x1 = points[ip, 1] if dim > 1 else 0.0
        x2 = points[ip, 2] if dim > 2 else 0.0
        total = 1.0
        for r in range(n_eq):
            acc = 0.0
            lo = band_lo[r]
            hi = band_hi[r]
            for n in range(n_samples):
                m = _residual(code, r, x0, x1, x2, samples, n, starts[r], sizes[r], params)
                if m < lo or m > hi:
                    continue
                acc += _mix_pdf(m, r, kinds, locs, inv_scales, coefs, ncomp[r], tau)
            total *= acc / n_samples
        out[ip] = total


def pack_densities(densities, tau=math.inf):
    """Pad right-hand-side mixtures into rectangular arrays for the kernels.

    Returns kinds, locations, inverse scales, per-component pdf coefficients
    (weight over normaliser), component counts and the band ``[lo, hi]``
    per equation outside of which every component is skipped by the pinhole.
    """
    r = len(densities)
    lmax = max(d.n_components for d in densities)
    kinds = np.zeros((r, lmax), dtype=np.int64)
    locs = np.zeros((r, lmax))
    inv_scales = np.ones((r, lmax))
    coefs = np.zeros((r, lmax))
    ncomp = np.zeros(r, dtype=np.int64)
    band_lo = np.full(r, -np.inf)
    band_hi = np.full(r, np.inf)
    for i, d in enumerate(densities):
        n = d.n_components
        kinds[i, :n] = d.kinds
        locs[i, :n] = d.locations
        inv_scales[i, :n] = 1.0 / d.scales
        gauss = d.kinds == 0
        coefs[i, :n] = np.where(gauss, d.weights * _INV_SQRT_2PI / d.scales, d.weights / (2.0 * d.scales))
        ncomp[i] = n
        reach = np.where(gauss, tau * d.scales, d.scales)
        if np.all(np.isfinite(reach)):
            band_lo[i] = float(np.min(d.locations - reach))
            band_hi[i] = float(np.max(d.locations + reach))
    return kinds, locs, inv_scales, coefs, ncomp, band_lo, band_hi
