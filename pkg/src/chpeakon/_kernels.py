"""Compiled inner loops for the exponential-kernel sums.

Every exponential below has a non-positive argument, so particle positions
of any magnitude are safe.

Within a cell of width d the profile is the exponential spline through the
two endpoint values (the solution of u - u_xx = 0 on the cell). Its mass
``u^2`` plus the cell's energy increment, distributed like the spline's
``u^2 + u_x^2``, is sampled at fixed Gauss-Legendre points. Peakon profiles
are exact under this model.
"""
import math

import numba
import numpy as np

_GX, _GW = np.polynomial.legendre.leggauss(4)
# nodes and weights on [0, 1], made exactly symmetric about 1/2
GAUSS_X = 0.5 * (_GX + 1.0)
GAUSS_X[2:] = 1.0 - GAUSS_X[1::-1]
GAUSS_W = 0.5 * _GW
GAUSS_W[2:] = GAUSS_W[1::-1]
# cells narrower than this are treated as point masses
POINT_CELL = 1e-12


@numba.njit(cache=True)
def _cell_samples(d, a, b, m, gx, gw, s_out, w_out, el, er, u2):
    """Offsets from the left node, masses and kernel factors of the cell samples.

    ``el = exp(-s)`` and ``er = exp(-(d - s))``. Points in the right half are
    measured from the right node and every sum pairs point g with G-1-g, so
    reflecting the cell (d same, (a, b) -> (-b, -a)) reproduces the samples in
    reverse order bit for bit.
    """
    G = gx.size
    if d <= POINT_CELL:
        e = math.exp(-0.5 * d)
        for g in range(G):
            s_out[g] = 0.5 * d
            w_out[g] = m * gw[g]
            el[g] = e
            er[g] = e
        return
    E = math.exp(-d)
    D = -math.expm1(-2.0 * d)
    for g in range(G):
        if 2 * g < G:
            r = gx[g] * d
            s_out[g] = r
            el[g] = math.exp(-r)
            er[g] = math.exp(-(d - r))
        else:
            r = gx[G - 1 - g] * d
            s_out[g] = d - r
            el[g] = math.exp(-(d - r))
            er[g] = math.exp(-r)
    for g in range(G):
        u = (a * (el[g] - E * er[g]) + b * (er[g] - E * el[g])) / D
        ux = (-a * (el[g] + E * er[g]) + b * (er[g] + E * el[g])) / D
        u2[g] = u * u
        w_out[g] = u * u + ux * ux
    Z = 0.0
    for g in range(G // 2):
        Z += gw[g] * (w_out[g] + w_out[G - 1 - g])
    for g in range(G):
        energy = m * w_out[g] / Z if Z > 0.0 else m
        w_out[g] = gw[g] * (energy + d * u2[g])


@numba.njit(cache=True)
def cell_samples(y, U, m, gx, gw):
    """Sample positions X and masses W, shape (n-1, G), for every cell.

    ``m`` holds the cell energy increments ``H[i+1] - H[i]``.
    """
    n = y.size
    G = gx.size
    X = np.empty((n - 1, G))
    W = np.empty((n - 1, G))
    s = np.empty(G)
    w = np.empty(G)
    el = np.empty(G)
    er = np.empty(G)
    u2 = np.empty(G)
    for i in range(n - 1):
        _cell_samples(y[i + 1] - y[i], U[i], U[i + 1], m[i], gx, gw, s, w, el, er, u2)
        for g in range(G):
            X[i, g] = y[i] + s[g]
            W[i, g] = w[g]
    return X, W


@numba.njit(cache=True)
def kernel_sums(y, U, m, gx, gw):
    """Kernel-weighted mass left of each node (A) and right of it (B).

    A[k+1] = A[k] e^{-d_k} + R_k and B[k] = B[k+1] e^{-d_k} + L_k where R_k, L_k
    are the cell masses weighted by the kernel to the right and left node.
    """
    n = y.size
    G = gx.size
    R = np.empty(n - 1)
    L = np.empty(n - 1)
    Ed = np.empty(n - 1)
    s = np.empty(G)
    w = np.empty(G)
    el = np.empty(G)
    er = np.empty(G)
    u2 = np.empty(G)
    for i in range(n - 1):
        d = y[i + 1] - y[i]
        _cell_samples(d, U[i], U[i + 1], m[i], gx, gw, s, w, el, er, u2)
        r = 0.0
        l = 0.0
        for g in range(G // 2):
            h = G - 1 - g
            r += w[g] * er[g] + w[h] * er[h]
            l += w[g] * el[g] + w[h] * el[h]
        R[i] = r
        L[i] = l
        Ed[i] = math.exp(-d)
    A = np.zeros(n)
    B = np.zeros(n)
    for k in range(n - 1):
        A[k + 1] = A[k] * Ed[k] + R[k]
    for k in range(n - 2, -1, -1):
        B[k] = B[k + 1] * Ed[k] + L[k]
    return A, B


@numba.njit(cache=True)
def rhs_arrays(y, U, m, gx, gw):
    """``P``, ``P_x`` and the nodal energy flux ``U^3 - 2 U P``."""
    A, B = kernel_sums(y, U, m, gx, gw)
    n = y.size
    P = np.empty(n)
    Px = np.empty(n)
    dH = np.empty(n)
    for k in range(n):
        P[k] = 0.25 * (A[k] + B[k])
        Px[k] = 0.25 * (B[k] - A[k])
        dH[k] = U[k] ** 3 - 2.0 * U[k] * P[k]
    return P, Px, dH


@numba.njit(cache=True)
def node_exp_sums(x, g):
    """Sums of ``g_j exp(-|x_k - x_j|)`` over ``j < k`` (left) and ``j >= k`` (right)."""
    n = x.size
    left = np.zeros(n)
    right = np.zeros(n)
    for k in range(1, n):
        left[k] = (left[k - 1] + g[k - 1]) * math.exp(-(x[k] - x[k - 1]))
    right[n - 1] = g[n - 1]
    for k in range(n - 2, -1, -1):
        right[k] = right[k + 1] * math.exp(-(x[k + 1] - x[k])) + g[k]
    return left, right


@numba.njit(cache=True)
def _pav(y):
    n = y.size
    val = np.empty(n)
    cnt = np.empty(n, np.int64)
    m = 0
    for i in range(n):
        val[m] = y[i]
        cnt[m] = 1
        m += 1
        while m > 1 and val[m - 2] > val[m - 1]:
            c = cnt[m - 2] + cnt[m - 1]
            val[m - 2] = (val[m - 2] * cnt[m - 2] + val[m - 1] * cnt[m - 1]) / c
            cnt[m - 2] = c
            m -= 1
    out = np.empty(n)
    j = 0
    for b in range(m):
        for _ in range(cnt[b]):
            out[j] = val[b]
            j += 1
    return out


@numba.njit(cache=True)
def isotonic(y):
    """L2 projection onto non-decreasing sequences (pool adjacent violators).

    Pools are averaged in opposite orders by the left-to-right and
    right-to-left passes; their mean is exactly reflection equivariant.
    """
    a = _pav(y)
    b = -_pav(-y[::-1])[::-1]
    return 0.5 * (a + b)


@numba.njit(cache=True)
def merge_collapsed(y, U):
    """Replace U by its mean on every maximal run of equal positions.

    The run is summed from both ends inwards, so a reflected run gives the
    negated mean exactly.
    """
    n = y.size
    out = U.copy()
    i = 0
    while i < n - 1:
        if y[i + 1] != y[i]:
            i += 1
            continue
        j = i
        while j < n - 1 and y[j + 1] == y[i]:
            j += 1
        s = 0.0
        lo = i
        hi = j
        while lo < hi:
            s += U[lo] + U[hi]
            lo += 1
            hi -= 1
        if lo == hi:
            s += U[lo]
        s /= j - i + 1
        for k in range(i, j + 1):
            out[k] = s
        i = j
    return out


@numba.njit(cache=True)
def limit_increments(dH, max_iter):
    """Zero negative increments, taking the deficit from the two neighbours.

    All cells are updated simultaneously, so the result is reflection
    equivariant; the total is preserved. Stops when a sweep moves nothing
    (a negative cell with no positive neighbour is left alone).
    """
    n = dH.size
    take = np.zeros(n)
    for it in range(max_iter):
        moved = False
        for i in range(n):
            take[i] = 0.0
        for i in range(n):
            if dH[i] >= 0.0:
                continue
            lo = dH[i - 1] if i > 0 and dH[i - 1] > 0.0 else 0.0
            hi = dH[i + 1] if i < n - 1 and dH[i + 1] > 0.0 else 0.0
            deficit = -dH[i]
            if lo + hi > 0.0:
                if lo > 0.0:
                    take[i - 1] += deficit * lo / (lo + hi)
                if hi > 0.0:
                    take[i + 1] += deficit * hi / (lo + hi)
                take[i] -= deficit
                moved = True
        if not moved:
            return it
        for i in range(n):
            dH[i] -= take[i]
    return max_iter
