"""Optimal-assignment solvers for equal-size point sets.

Two routes:

* :func:`exact_match_cost` solves the assignment problem exactly with
  scipy's O(n^3) shortest-augmenting-path solver on the dense cost matrix.

* :func:`approx_match_cost` runs a Gauss-Seidel auction restricted to
  per-point candidate lists, with epsilon scaling.  Candidate lists are
  rebuilt on demand through a uniform-grid ring search pruned by per-cell
  price floors, so no full cost matrix is ever formed.  The result is a
  feasible matching, hence an upper bound on the optimum, and the solver
  stops as soon as either (a) a dual feasible solution certifies a relative
  gap <= epsilon, or (b) the final phase at eps_n = epsilon * LB / n
  completes, which bounds the matching cost by (1 + epsilon) * optimum via
  epsilon-complementary slackness.  LB is the sum of nearest-neighbor
  distances (tightened to the dual bound as phases complete), a valid lower
  bound on the optimum.

The auction is deterministic: no randomness, fixed iteration orders.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .errors import InvalidArgumentError, SolverFailureError

_HUGE = 1e300


@dataclass(frozen=True)
class MatchInfo:
    """Diagnostics returned alongside an assignment cost."""

    cost: float
    lower_bound: float
    certified_gap: float
    bids: int
    rescans: int
    phases: int


def exact_match_cost(X: np.ndarray, Y: np.ndarray) -> float:
    """Minimum total Euclidean cost over bijections X -> Y (exact)."""
    if X.shape[0] != Y.shape[0]:
        raise InvalidArgumentError("exact matching requires equal-size clouds")
    C = cdist(X, Y)
    rows, cols = linear_sum_assignment(C)
    return float(C[rows, cols].sum())


def _grid_geometry(Y: np.ndarray, n: int):
    lo = Y.min(axis=0)
    hi = Y.max(axis=0)
    extent = hi - lo
    span = float(max(extent.max(), 1e-12))
    target = min(max(n // 4, 8), 4096)
    live = extent > 0.05 * span
    nlive = max(int(live.sum()), 1)
    h = float((np.prod(extent[live]) / target) ** (1.0 / nlive)) if live.any() else span
    h = max(h, span / 24.0, 1e-12)
    dims = np.minimum(np.maximum((extent / h).astype(np.int64) + 1, 1), 24)
    return float(h), lo.astype(np.float64), dims


@njit(cache=True, nogil=True)
def _grid_build(Y, h, lo, dims):
    """Counting-sort points of Y into a flat uniform grid (CSR layout)."""
    n = Y.shape[0]
    ncell = dims[0] * dims[1] * dims[2]
    cell_of = np.empty(n, dtype=np.int64)
    counts = np.zeros(ncell + 1, dtype=np.int64)
    for p in range(n):
        cx = int((Y[p, 0] - lo[0]) / h)
        cy = int((Y[p, 1] - lo[1]) / h)
        cz = int((Y[p, 2] - lo[2]) / h)
        if cx < 0:
            cx = 0
        if cy < 0:
            cy = 0
        if cz < 0:
            cz = 0
        if cx >= dims[0]:
            cx = dims[0] - 1
        if cy >= dims[1]:
            cy = dims[1] - 1
        if cz >= dims[2]:
            cz = dims[2] - 1
        c = (cx * dims[1] + cy) * dims[2] + cz
        cell_of[p] = c
        counts[c + 1] += 1
    for c in range(ncell):
        counts[c + 1] += counts[c]
    start = counts
    members = np.empty(n, dtype=np.int64)
    fill = start[:-1].copy()
    for p in range(n):  # ascending p keeps within-cell order by index
        c = cell_of[p]
        members[fill[c]] = p
        fill[c] += 1
    return start, members


@njit(cache=True, nogil=True)
def _ring_offsets(dims):
    """Cell offsets sorted by Chebyshev radius, with per-ring start indices."""
    rx = dims[0] - 1
    ry = dims[1] - 1
    rz = dims[2] - 1
    rmax = max(rx, max(ry, rz))
    total = (2 * rx + 1) * (2 * ry + 1) * (2 * rz + 1)
    offs = np.empty((total, 3), dtype=np.int64)
    ring_start = np.zeros(rmax + 2, dtype=np.int64)
    idx = 0
    for r in range(rmax + 1):
        ring_start[r] = idx
        for dx in range(-min(r, rx), min(r, rx) + 1):
            for dy in range(-min(r, ry), min(r, ry) + 1):
                for dz in range(-min(r, rz), min(r, rz) + 1):
                    m = abs(dx)
                    if abs(dy) > m:
                        m = abs(dy)
                    if abs(dz) > m:
                        m = abs(dz)
                    if m == r:
                        offs[idx, 0] = dx
                        offs[idx, 1] = dy
                        offs[idx, 2] = dz
                        idx += 1
    ring_start[rmax + 1] = idx
    return offs[:idx], ring_start


@njit(cache=True, nogil=True)
def _nearest_by_distance(Q, Y, h, lo, dims, start, members, offs, ring_start,
                         out_idx, out_dist):
    """Exact nearest neighbor (pure distance) for every query via ring search."""
    for i in range(Q.shape[0]):
        qx = Q[i, 0]
        qy = Q[i, 1]
        qz = Q[i, 2]
        cx0 = min(max(int((qx - lo[0]) / h), 0), dims[0] - 1)
        cy0 = min(max(int((qy - lo[1]) / h), 0), dims[1] - 1)
        cz0 = min(max(int((qz - lo[2]) / h), 0), dims[2] - 1)
        best = _HUGE
        bj = -1
        nring = ring_start.shape[0] - 1
        for r in range(nring):
            if bj >= 0 and (r - 1) * h >= best:
                break
            for o in range(ring_start[r], ring_start[r + 1]):
                cx = cx0 + offs[o, 0]
                if cx < 0 or cx >= dims[0]:
                    continue
                cy = cy0 + offs[o, 1]
                if cy < 0 or cy >= dims[1]:
                    continue
                cz = cz0 + offs[o, 2]
                if cz < 0 or cz >= dims[2]:
                    continue
                c = (cx * dims[1] + cy) * dims[2] + cz
                for s in range(start[c], start[c + 1]):
                    p = members[s]
                    dx = qx - Y[p, 0]
                    dy = qy - Y[p, 1]
                    dz = qz - Y[p, 2]
                    d = np.sqrt(dx * dx + dy * dy + dz * dz)
                    if d < best:
                        best = d
                        bj = p
        out_idx[i] = bj
        out_dist[i] = best


@njit(cache=True, nogil=True)
def _sift_down(heap_v, hv, hj, root, size):
    while True:
        child = 2 * root + 1
        if child >= size:
            return
        if child + 1 < size and heap_v[child + 1] > heap_v[child]:
            child += 1
        if heap_v[child] <= heap_v[root]:
            return
        heap_v[root], heap_v[child] = heap_v[child], heap_v[root]
        hv[root], hv[child] = hv[child], hv[root]
        hj[root], hj[child] = hj[child], hj[root]
        root = child


@njit(cache=True, nogil=True)
def _rebuild_list(i, k, X, Y, prices, start, members, cell_pmin_snap,
                  offs, ring_start, h, lo, dims, cand_j, cand_d, beta, heap_v):
    """Rebuild bidder i's k-best candidate list under current prices.

    Ring search around the bidder's cell keeping a k-sized max-heap of
    values d + price.  A cell is skipped when its exact distance bound plus
    its snapshot price floor cannot beat the current k-th best; rings stop
    once (r-1)*h alone cannot (prices are never negative).  Snapshot floors
    only under-estimate (prices never decrease), so pruning is safe.  Sets
    beta[i] to the k-th best value: out-of-list objects can never become
    cheaper than beta[i] while prices keep rising.
    """
    qx = X[i, 0]
    qy = X[i, 1]
    qz = X[i, 2]
    cx0 = min(max(int((qx - lo[0]) / h), 0), dims[0] - 1)
    cy0 = min(max(int((qy - lo[1]) / h), 0), dims[1] - 1)
    cz0 = min(max(int((qz - lo[2]) / h), 0), dims[2] - 1)
    hv = cand_d[i]
    hj = cand_j[i]
    cnt = 0
    worst = _HUGE
    nring = ring_start.shape[0] - 1
    for r in range(nring):
        if cnt == k and (r - 1) * h >= worst:
            break
        for o in range(ring_start[r], ring_start[r + 1]):
            cx = cx0 + offs[o, 0]
            if cx < 0 or cx >= dims[0]:
                continue
            cy = cy0 + offs[o, 1]
            if cy < 0 or cy >= dims[1]:
                continue
            cz = cz0 + offs[o, 2]
            if cz < 0 or cz >= dims[2]:
                continue
            c = (cx * dims[1] + cy) * dims[2] + cz
            if start[c] == start[c + 1]:
                continue
            if cnt == k:
                x0 = lo[0] + cx * h
                y0 = lo[1] + cy * h
                z0 = lo[2] + cz * h
                ddx = 0.0
                if qx < x0:
                    ddx = x0 - qx
                elif qx > x0 + h:
                    ddx = qx - (x0 + h)
                ddy = 0.0
                if qy < y0:
                    ddy = y0 - qy
                elif qy > y0 + h:
                    ddy = qy - (y0 + h)
                ddz = 0.0
                if qz < z0:
                    ddz = z0 - qz
                elif qz > z0 + h:
                    ddz = qz - (z0 + h)
                if np.sqrt(ddx * ddx + ddy * ddy + ddz * ddz) + cell_pmin_snap[c] >= worst:
                    continue
            for s in range(start[c], start[c + 1]):
                p = members[s]
                dx = qx - Y[p, 0]
                dy = qy - Y[p, 1]
                dz = qz - Y[p, 2]
                d = np.sqrt(dx * dx + dy * dy + dz * dz)
                v = d + prices[p]
                if cnt < k:
                    heap_v[cnt] = v
                    hv[cnt] = d
                    hj[cnt] = p
                    cnt += 1
                    if cnt == k:
                        for root in range(k // 2 - 1, -1, -1):
                            _sift_down(heap_v, hv, hj, root, k)
                        worst = heap_v[0]
                elif v < worst:
                    heap_v[0] = v
                    hv[0] = d
                    hj[0] = p
                    _sift_down(heap_v, hv, hj, 0, k)
                    worst = heap_v[0]
    kcap = cand_j.shape[1]
    for s in range(cnt, kcap):
        hv[s] = _HUGE
        hj[s] = -1
    if cnt < k:
        beta[i] = _HUGE
    else:
        beta[i] = worst


@njit(cache=True, nogil=True)
def _snapshot_pmin(prices, start, members, cell_pmin_snap):
    ncell = cell_pmin_snap.shape[0]
    for c in range(ncell):
        m = _HUGE
        for s in range(start[c], start[c + 1]):
            p = prices[members[s]]
            if p < m:
                m = p
        cell_pmin_snap[c] = m if m < _HUGE else 0.0


@njit(cache=True, nogil=True)
def _best_two(i, kuse, cand_j, cand_d, prices):
    b1 = _HUGE
    b2 = _HUGE
    s1 = -1
    for s in range(kuse):
        jj = cand_j[i, s]
        if jj < 0:
            continue
        v = cand_d[i, s] + prices[jj]
        if v < b1:
            b2 = b1
            b1 = v
            s1 = s
        elif v < b2:
            b2 = v
    return b1, b2, s1


@njit(cache=True, nogil=True)
def _auction(X, Y, h, lo, dims, k0, kmax, epsilon, eps_floor, theta, max_bids,
             prices, eps_start, nn_lb):
    """Phase loop; prices may arrive warm-started and are updated in place.

    Returns (primal, lower_bound, bids, rescans, phases, terminal_eps).
    A negative primal signals non-convergence.
    """
    n = X.shape[0]
    start, members = _grid_build(Y, h, lo, dims)
    offs, ring_start = _ring_offsets(dims)
    ncell = dims[0] * dims[1] * dims[2]
    cell_pmin_snap = np.zeros(ncell, dtype=np.float64)
    _snapshot_pmin(prices, start, members, cell_pmin_snap)
    cand_j = np.empty((n, kmax), dtype=np.int64)
    cand_d = np.empty((n, kmax), dtype=np.float64)
    kcur = np.full(n, k0, dtype=np.int64)
    beta = np.empty(n, dtype=np.float64)
    heap_v = np.empty(kmax, dtype=np.float64)
    owner = np.full(n, -1, dtype=np.int64)
    assign = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)

    max_kth = 0.0
    for i in range(n):
        _rebuild_list(i, k0, X, Y, prices, start, members, cell_pmin_snap,
                      offs, ring_start, h, lo, dims, cand_j, cand_d, beta, heap_v)
        if beta[i] < _HUGE and beta[i] > max_kth:
            max_kth = beta[i]

    # epsilon-CS with the final epsilon bounds the cost overshoot by
    # n * eps_final <= epsilon * LB <= epsilon * optimum; LB starts as the
    # nearest-neighbor bound and tightens to the dual bound as phases end.
    lb_best = nn_lb
    eps_final = epsilon * lb_best / n
    if eps_final < eps_floor:
        eps_final = eps_floor
    eps = eps_start if eps_start > 0.0 else max_kth * 0.5
    if eps < eps_final:
        eps = eps_final
    n_bids = 0
    n_rescans = 0
    phases = 0
    bids_since_snap = 0
    while True:
        phases += 1
        # drop assignments violating eps-CS for the current eps; the list
        # floor beta is a lower bound on the true best, so this over-drops
        # (safe) rather than keeping violators.
        top = 0
        for i in range(n):
            if assign[i] >= 0:
                j = assign[i]
                dx = X[i, 0] - Y[j, 0]
                dy = X[i, 1] - Y[j, 1]
                dz = X[i, 2] - Y[j, 2]
                cur = np.sqrt(dx * dx + dy * dy + dz * dz) + prices[j]
                b1, b2, s1 = _best_two(i, kcur[i], cand_j, cand_d, prices)
                floor = b1 if b1 < beta[i] else beta[i]
                if cur > floor + eps:
                    owner[j] = -1
                    assign[i] = -1
                    stack[top] = i
                    top += 1
            else:
                stack[top] = i
                top += 1
        while top > 0:
            top -= 1
            i = stack[top]
            b1, b2, s1 = _best_two(i, kcur[i], cand_j, cand_d, prices)
            if b1 > beta[i]:
                # list exhausted: rebuild with doubled capacity
                n_rescans += 1
                if bids_since_snap > n:
                    _snapshot_pmin(prices, start, members, cell_pmin_snap)
                    bids_since_snap = 0
                knew = kcur[i] * 2
                if knew > kmax:
                    knew = kmax
                if knew > n:
                    knew = n
                kcur[i] = knew
                _rebuild_list(i, knew, X, Y, prices, start, members,
                              cell_pmin_snap, offs, ring_start, h, lo, dims,
                              cand_j, cand_d, beta, heap_v)
                b1, b2, s1 = _best_two(i, knew, cand_j, cand_d, prices)
            if b2 > beta[i]:
                b2 = beta[i]
            j = cand_j[i, s1]
            n_bids += 1
            bids_since_snap += 1
            if n_bids > max_bids:
                return -1.0, 0.0, n_bids, n_rescans, phases, eps
            prices[j] = b2 - cand_d[i, s1] + eps
            prev = owner[j]
            if prev >= 0:
                assign[prev] = -1
                stack[top] = prev
                top += 1
            owner[j] = i
            assign[i] = j
        # phase complete: primal cost and a certified dual lower bound
        primal = 0.0
        for i in range(n):
            j = assign[i]
            dx = X[i, 0] - Y[j, 0]
            dy = X[i, 1] - Y[j, 1]
            dz = X[i, 2] - Y[j, 2]
            primal += np.sqrt(dx * dx + dy * dy + dz * dz)
        lb = 0.0
        for i in range(n):
            b1, b2, s1 = _best_two(i, kcur[i], cand_j, cand_d, prices)
            u = b1 if b1 < beta[i] else beta[i]
            lb += u
        for j in range(n):
            lb -= prices[j]
        if lb < nn_lb:
            lb = nn_lb  # both are valid lower bounds; report the tighter
        if lb > 0.0 and primal - lb <= epsilon * lb:
            return primal, lb, n_bids, n_rescans, phases, eps
        if eps <= eps_final:
            return primal, lb, n_bids, n_rescans, phases, eps
        if lb > lb_best:
            lb_best = lb
            ef = epsilon * lb_best / n
            if ef > eps_final:
                eps_final = ef
        eps = eps / theta
        if eps < eps_final:
            eps = eps_final


def _nn_distances(Q: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h, lo, dims = _grid_geometry(Y, Y.shape[0])
    start, members = _grid_build(Y, h, lo, dims)
    offs, ring_start = _ring_offsets(dims)
    idx = np.empty(Q.shape[0], dtype=np.int64)
    dist = np.empty(Q.shape[0], dtype=np.float64)
    _nearest_by_distance(Q, Y, h, lo, dims, start, members, offs, ring_start,
                         idx, dist)
    return idx, dist


def approx_match_cost(X: np.ndarray, Y: np.ndarray, epsilon: float,
                      k: int = 16, kmax: int = 64, theta: float = 5.0,
                      with_info: bool = False):
    """Matching cost within a factor (1 + epsilon) of the optimum.

    The returned value is the cost of a feasible bijection, so it never
    undercuts the optimum; the relative overshoot is bounded by ``epsilon``
    (up to an absolute floor of 1e-12 of the coordinate spread, which covers
    degenerate zero-cost instances).
    """
    if X.shape[0] != Y.shape[0]:
        raise InvalidArgumentError("matching requires equal-size clouds")
    if not epsilon > 0:
        raise InvalidArgumentError("epsilon must be positive")
    n = X.shape[0]
    X = np.ascontiguousarray(X, dtype=np.float64)
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    # absolute floor covers degenerate zero-cost instances (X == Y)
    scale = max(float(np.ptp(X)), float(np.ptp(Y)), 1e-300)
    eps_floor = 1e-12 * scale
    _, nn_dist = _nn_distances(X, Y)
    nn_lb = float(nn_dist.sum())
    h, lo, dims = _grid_geometry(Y, n)
    max_bids = 20000 * n + 1000000
    prices = np.zeros(n, dtype=np.float64)
    primal, lb, bids, rescans, phases, eps_term = _auction(
        X, Y, h, lo, dims, min(k, n), min(max(kmax, k), n), float(epsilon),
        float(eps_floor), float(theta), max_bids, prices, 0.0, nn_lb,
    )
    if primal < 0:
        raise SolverFailureError(
            "auction assignment did not converge",
            diagnostics={"bids": int(bids), "rescans": int(rescans),
                         "phases": int(phases), "n": n},
        )
    info = MatchInfo(
        cost=float(primal),
        lower_bound=float(lb),
        certified_gap=float((primal - lb) / max(lb, 1e-300)),
        bids=int(bids),
        rescans=int(rescans),
        phases=int(phases),
    )
    if with_info:
        return float(primal), info
    return float(primal)
