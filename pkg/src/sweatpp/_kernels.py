"""Compiled inner loops (numba). Pure functions of their array arguments."""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def pcf_sums(points, r, bandwidth, width, height):
    """Translation-corrected Epanechnikov kernel sums over ordered pairs.

    Returns ``S[k] = sum_{i != j} k_b(r[k] - d_ij) / A(x_i - x_j)`` where
    ``A(v) = (width - |v_x|)(height - |v_y|)``. ``r`` must be increasing.
    """
    n = points.shape[0]
    m = r.shape[0]
    out = np.zeros(m)
    if m == 0:
        return out
    reach = r[m - 1] + bandwidth
    reach2 = reach * reach
    c = 3.0 / (4.0 * bandwidth)
    for i in range(n):
        xi = points[i, 0]
        yi = points[i, 1]
        for j in range(i + 1, n):
            dx = xi - points[j, 0]
            dy = yi - points[j, 1]
            d2 = dx * dx + dy * dy
            if d2 >= reach2:
                continue
            area = (width - abs(dx)) * (height - abs(dy))
            if area <= 0.0:
                continue
            d = math.sqrt(d2)
            # both orders (i, j) and (j, i)
            wgt = 2.0 / area
            lo = np.searchsorted(r, d - bandwidth, side="right")
            for k in range(lo, m):
                u = (r[k] - d) / bandwidth
                if u >= 1.0:
                    break
                out[k] += wgt * c * (1.0 - u * u)
    return out


@njit(cache=True)
def _build_cells(points, cell, ncx, ncy):
    n = points.shape[0]
    counts = np.zeros(ncx * ncy + 1, dtype=np.int64)
    idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        cx = min(max(int(points[i, 0] / cell), 0), ncx - 1)
        cy = min(max(int(points[i, 1] / cell), 0), ncy - 1)
        idx[i] = cy * ncx + cx
        counts[idx[i] + 1] += 1
    for k in range(ncx * ncy):
        counts[k + 1] += counts[k]
    order = np.empty(n, dtype=np.int64)
    fill = counts[:-1].copy()
    for i in range(n):
        order[fill[idx[i]]] = i
        fill[idx[i]] += 1
    return counts, order


@njit(cache=True)
def nn_distance(points, queries, width, height, cell):
    """Distance from each query location to the nearest of ``points``.

    Exact; uses a uniform cell grid and expands square rings of cells until
    no unvisited cell can hold a closer point.
    """
    nq = queries.shape[0]
    out = np.full(nq, np.inf)
    if points.shape[0] == 0:
        return out
    ncx = max(1, int(math.ceil(width / cell)))
    ncy = max(1, int(math.ceil(height / cell)))
    starts, order = _build_cells(points, cell, ncx, ncy)
    max_ring = max(ncx, ncy)
    for q in range(nq):
        qx = queries[q, 0]
        qy = queries[q, 1]
        cx = min(max(int(qx / cell), 0), ncx - 1)
        cy = min(max(int(qy / cell), 0), ncy - 1)
        best = np.inf
        for ring in range(max_ring + 1):
            # nearest possible distance to any cell in this ring
            if ring > 0:
                gap = (ring - 1) * cell
                if gap * gap >= best:
                    break
            for gy in range(cy - ring, cy + ring + 1):
                if gy < 0 or gy >= ncy:
                    continue
                edge_row = gy == cy - ring or gy == cy + ring
                step = 1 if edge_row else 2 * ring
                gx = cx - ring
                while gx <= cx + ring:
                    if 0 <= gx < ncx:
                        c = gy * ncx + gx
                        for t in range(starts[c], starts[c + 1]):
                            p = order[t]
                            dx = points[p, 0] - qx
                            dy = points[p, 1] - qy
                            d2 = dx * dx + dy * dy
                            if d2 < best:
                                best = d2
                    if step == 0:
                        break
                    gx += step
        out[q] = math.sqrt(best)
    return out


@njit(cache=True)
def ssi_fill(width, height, radius, max_failures, uniforms, cell):
    """Simple sequential inhibition on ``[0,width] x [0,height]``.

    ``uniforms`` supplies proposal coordinates in ``[0,1)^2`` row by row.
    Returns ``(points, used)`` where ``used`` is the number of rows consumed,
    or ``used = -1`` if ``uniforms`` ran out before ``max_failures``
    consecutive rejections (caller supplies more and retries).
    """
    ncx = max(1, int(math.ceil(width / cell)))
    ncy = max(1, int(math.ceil(height / cell)))
    cap = 16
    grid = -np.ones((ncy, ncx, cap), dtype=np.int64)
    fill = np.zeros((ncy, ncx), dtype=np.int64)
    # hard-core packing bound for the point buffer
    bound = int(4.0 * (width + radius) * (height + radius) / (radius * radius)) + 8
    pts = np.empty((bound, 2))
    n = 0
    fails = 0
    r2 = radius * radius
    reach = int(math.ceil(radius / cell))
    m = uniforms.shape[0]
    for t in range(m):
        x = uniforms[t, 0] * width
        y = uniforms[t, 1] * height
        cx = min(int(x / cell), ncx - 1)
        cy = min(int(y / cell), ncy - 1)
        ok = True
        for gy in range(max(cy - reach, 0), min(cy + reach + 1, ncy)):
            for gx in range(max(cx - reach, 0), min(cx + reach + 1, ncx)):
                for s in range(fill[gy, gx]):
                    p = grid[gy, gx, s]
                    dx = pts[p, 0] - x
                    dy = pts[p, 1] - y
                    if dx * dx + dy * dy < r2:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            pts[n, 0] = x
            pts[n, 1] = y
            s = fill[cy, cx]
            if s == cap:
                # cell holds more points than expected; grow storage
                newcap = cap * 2
                g2 = -np.ones((ncy, ncx, newcap), dtype=np.int64)
                g2[:, :, :cap] = grid
                grid = g2
                cap = newcap
            grid[cy, cx, s] = n
            fill[cy, cx] = s + 1
            n += 1
            fails = 0
        else:
            fails += 1
            if fails >= max_failures:
                return pts[:n].copy(), t + 1
    return pts[:n].copy(), -1


@njit(cache=True)
def product_limit(event_times, all_times, r):
    """Kaplan-Meier CDF at ``r``.

    ``event_times`` (uncensored failures) and ``all_times`` (every observed
    time) are sorted ascending. Tied failures are grouped: the survival
    factor at a distinct failure time ``s`` is ``1 - deaths(s) / at_risk(s)``
    with ``at_risk(s) = #{t >= s}``.
    """
    n = all_times.shape[0]
    ne = event_times.shape[0]
    m = r.shape[0]
    out = np.zeros(m)
    surv = 1.0
    i = 0
    k = 0
    a = 0
    while i < ne:
        s = event_times[i]
        while k < m and r[k] < s:
            out[k] = 1.0 - surv
            k += 1
        j = i
        while j < ne and event_times[j] == s:
            j += 1
        while a < n and all_times[a] < s:
            a += 1
        surv *= 1.0 - (j - i) / (n - a)
        i = j
    while k < m:
        out[k] = 1.0 - surv
        k += 1
    return out
