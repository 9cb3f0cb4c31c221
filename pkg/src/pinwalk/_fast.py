"""Jitted inner loops: conditioned-step samplers, renewal DP, moduli.

Everything here is a plain function of arrays and scalars so it can be
compiled with numba when available and still run (slowly) without it.
The survival tables are passed flattened: ``flat`` holds the rows back to
back, ``off[m]`` is the start of row ``m`` and ``wid[m]`` its width; row
``m`` covers lattice levels ``x = 1..wid[m]``.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit as _njit

    def _jit(f):
        return _njit(cache=True)(f)

except ImportError:  # pragma: no cover - numba is a declared dependency

    def _jit(f):
        return f


@_jit
def _hval(flat, off, wid, m, x):
    """Scaled mass of first passage to 0 in exactly m steps from level x."""
    if m == 0:
        return 1.0 if x == 0 else 0.0
    if x < 1 or x > wid[m]:
        return 0.0
    return flat[off[m] + x - 1]


@_jit
def _gval(flat, off, wid, m, x):
    """Probability of staying strictly positive for m steps from level x."""
    if x <= 0:
        return 0.0
    if m == 0:
        return 1.0
    if x > wid[m]:
        return 1.0  # boundary unreachable in m steps
    return flat[off[m] + x - 1]


@_jit
def _sample_conditioned(flat, off, wid, t, p, r, is_bulk, u, out):
    """Walk the h-transform chain for one excursion, consuming u[0..t-1]."""
    x = 0
    for j in range(t):
        m = t - j - 1  # steps remaining after this one
        if is_bulk:
            a = p * _hval(flat, off, wid, m, x + 1)
            b = r * _hval(flat, off, wid, m, x)
            c = p * _hval(flat, off, wid, m, x - 1)
        else:
            a = p * _gval(flat, off, wid, m, x + 1)
            b = r * _gval(flat, off, wid, m, x)
            c = p * _gval(flat, off, wid, m, x - 1)
        s = a + b + c
        uu = u[j] * s
        if uu < a:
            x += 1
        elif uu < a + b:
            pass
        else:
            # guard against landing on an impossible move through rounding
            if c > 0.0:
                x -= 1
            elif b > 0.0:
                pass
            else:
                x += 1
        out[j] = x
    return 0


@_jit
def _forward_partition(kren, expbeta):
    """Forward renewal table Z[j] = expbeta[j] * sum_i Z[i] kren[j-i]."""
    n = expbeta.shape[0] - 1
    z = np.zeros(n + 1)
    z[0] = 1.0
    for j in range(1, n + 1):
        s = 0.0
        for i in range(j):
            s += z[i] * kren[j - i]
        z[j] = expbeta[j] * s
    return z


@_jit
def _prev_contact(z, kren, j, u):
    """Draw the contact preceding j, with weight Z[i] kren[j-i], i < j."""
    tot = 0.0
    for i in range(j):
        tot += z[i] * kren[j - i]
    target = u * tot
    acc = 0.0
    last = 0
    for i in range(j):
        w = z[i] * kren[j - i]
        if w > 0.0:
            acc += w
            last = i
            if acc > target:
                return i
    return last


@_jit
def _interp_clamped(x, u):
    """Piecewise-linear value at real index u, clamped to its segment."""
    k = int(math.floor(u))
    n = x.shape[0]
    if k >= n - 1:
        return x[n - 1]
    fr = u - k
    val = x[k] + fr * (x[k + 1] - x[k])
    lo = x[k] if x[k] < x[k + 1] else x[k + 1]
    hi = x[k] if x[k] > x[k + 1] else x[k + 1]
    if val < lo:
        val = lo
    if val > hi:
        val = hi
    return val


@_jit
def _osc_window(x, w, a, b):
    """sup |x_t - x_s| over |t-s| <= w with s,t in the index range [a, b].

    Candidate pairs have one end at a breakpoint and the other at a
    breakpoint or at real distance exactly w; interpolated candidates are
    clamped to their segment so the sup is never overshot.
    """
    qmax = np.empty(b - a + 1, np.int64)
    qmin = np.empty(b - a + 1, np.int64)
    hmax = 0
    tmax = 0
    hmin = 0
    tmin = 0
    right = a - 1
    best = 0.0
    for i in range(a, b + 1):
        lo_i = int(math.ceil(i - w))
        hi_i = int(math.floor(i + w))
        if lo_i < a:
            lo_i = a
        if hi_i > b:
            hi_i = b
        while right < hi_i:
            right += 1
            v = x[right]
            while tmax > hmax and x[qmax[tmax - 1]] <= v:
                tmax -= 1
            qmax[tmax] = right
            tmax += 1
            while tmin > hmin and x[qmin[tmin - 1]] >= v:
                tmin -= 1
            qmin[tmin] = right
            tmin += 1
        while qmax[hmax] < lo_i:
            hmax += 1
        while qmin[hmin] < lo_i:
            hmin += 1
        xi = x[i]
        d = xi - x[qmin[hmin]]
        d2 = x[qmax[hmax]] - xi
        if d2 > d:
            d = d2
        if d > best:
            best = d
        ur = i + w
        if ur < b:
            val = _interp_clamped(x, ur)
            d = xi - val if xi > val else val - xi
            if d > best:
                best = d
        ul = i - w
        if ul > a:
            val = _interp_clamped(x, ul)
            d = xi - val if xi > val else val - xi
            if d > best:
                best = d
    return best


@_jit
def _gamma_full(x, w):
    return _osc_window(x, w, 0, x.shape[0] - 1)


@_jit
def _gamma_tilde(x, w, zeros):
    """Modulus restricted to pairs inside the closure of one excursion.

    ``zeros`` lists the breakpoint indices where the source path touches 0
    (always including index 0), ascending.
    """
    n = x.shape[0] - 1
    best = 0.0
    for k in range(zeros.shape[0] - 1):
        d = _osc_window(x, w, zeros[k], zeros[k + 1])
        if d > best:
            best = d
    last = zeros[zeros.shape[0] - 1]
    if last < n:  # trailing meander
        d = _osc_window(x, w, last, n)
        if d > best:
            best = d
    return best


@_jit
def _moduli_multi(x, ws, zeros, out_gamma, out_tilde):
    for q in range(ws.shape[0]):
        out_gamma[q] = _gamma_full(x, ws[q])
        out_tilde[q] = _gamma_tilde(x, ws[q], zeros)
    return 0
