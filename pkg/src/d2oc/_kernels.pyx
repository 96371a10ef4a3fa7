# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels: transportation network simplex, greedy merge, FPS.

Every function here has a line-for-line twin in ``_kernels_py``; the two
must stay in lockstep (same tie-breaking, same arithmetic order).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

ctypedef cnp.int64_t idx_t

cdef double INF = float("inf")
cdef int UP = 1
cdef int DOWN = -1


cdef inline void _add_child(idx_t* first, idx_t* nxt, idx_t* prv, idx_t p, idx_t c) noexcept nogil:
    nxt[c] = first[p]
    prv[c] = -1
    if first[p] != -1:
        prv[first[p]] = c
    first[p] = c


cdef inline void _remove_child(idx_t* first, idx_t* nxt, idx_t* prv, idx_t p, idx_t c) noexcept nogil:
    if prv[c] != -1:
        nxt[prv[c]] = nxt[c]
    else:
        first[p] = nxt[c]
    if nxt[c] != -1:
        prv[nxt[c]] = prv[c]


cdef inline double _tol(const double* cost, const double* pi, idx_t e,
                        idx_t m, idx_t n, double eps) noexcept nogil:
    cdef idx_t i = e // n
    cdef double scale = fabs(cost[e])
    if fabs(pi[i]) > scale:
        scale = fabs(pi[i])
    if fabs(pi[m + e - i * n]) > scale:
        scale = fabs(pi[m + e - i * n])
    return -eps * (scale + 1.0)


def network_simplex(double[::1] a, double[::1] b, double[:, ::1] C,
                    cand=None, double eps=1e-13, idx_t max_iter=-1,
                    bint potentials=False):
    """Primal network simplex for the balanced transportation problem.

    Strongly feasible spanning trees below an artificial root (Cunningham's
    leaving-arc rule) with block-search pricing restricted to
    the sorted candidate arc list ``cand`` (flat indices ``i * n + j``).
    When no candidate prices out, a full sweep appends every violating arc
    to the list and pivoting resumes, so the result is optimal over all arcs.

    Returns ``(flow, n_pivots)`` with ``flow`` of shape ``(m, n)``.
    """
    cdef idx_t m = a.shape[0], n = b.shape[0]
    cdef idx_t mn = m * n
    cdef idx_t nn = m + n
    cdef idx_t root = nn
    cdef idx_t n_nodes = nn + 1
    cdef idx_t n_arcs = mn + nn
    cdef idx_t i, j, e, u, v, k, x, y, p, c, top, cnt, best, q
    cdef double rc, min_rc, d, delta, art, cmax, sigma

    if C.shape[0] != m or C.shape[1] != n:
        raise ValueError("cost matrix shape does not match marginals")

    flow_a = np.zeros(n_arcs, dtype=np.float64)
    state_a = np.ones(n_arcs, dtype=np.int8)
    parent_a = np.full(n_nodes, -1, dtype=np.int64)
    pred_a = np.full(n_nodes, -1, dtype=np.int64)
    dir_a = np.zeros(n_nodes, dtype=np.int64)
    depth_a = np.zeros(n_nodes, dtype=np.int64)
    first_a = np.full(n_nodes, -1, dtype=np.int64)
    next_a = np.full(n_nodes, -1, dtype=np.int64)
    prev_a = np.full(n_nodes, -1, dtype=np.int64)
    pi_a = np.zeros(n_nodes, dtype=np.float64)
    stack_a = np.zeros(n_nodes, dtype=np.int64)
    path_a = np.zeros(n_nodes, dtype=np.int64)

    cdef double[::1] flow = flow_a
    cdef cnp.int8_t[::1] state = state_a
    cdef idx_t* parent = <idx_t*> cnp.PyArray_DATA(parent_a)
    cdef idx_t* pred = <idx_t*> cnp.PyArray_DATA(pred_a)
    cdef idx_t* pdir = <idx_t*> cnp.PyArray_DATA(dir_a)
    cdef idx_t* depth = <idx_t*> cnp.PyArray_DATA(depth_a)
    cdef idx_t* first = <idx_t*> cnp.PyArray_DATA(first_a)
    cdef idx_t* nxt = <idx_t*> cnp.PyArray_DATA(next_a)
    cdef idx_t* prv = <idx_t*> cnp.PyArray_DATA(prev_a)
    cdef double* pi = <double*> cnp.PyArray_DATA(pi_a)
    cdef idx_t* stack = <idx_t*> cnp.PyArray_DATA(stack_a)
    cdef idx_t* path = <idx_t*> cnp.PyArray_DATA(path_a)
    cdef const double* cost = &C[0, 0]

    if cand is None:
        cand_a = np.arange(mn, dtype=np.int64)
    else:
        cand_a = np.ascontiguousarray(cand, dtype=np.int64)
    ci_a = cand_a // n
    cj_a = cand_a - ci_a * n
    cdef idx_t[::1] ci = ci_a
    cdef idx_t[::1] cj = cj_a
    cdef idx_t ncand = cand_a.shape[0]
    viol_a = np.zeros(mn, dtype=np.int8)
    cdef cnp.int8_t[::1] viol = viol_a
    cdef bint any_viol

    # big-M above any tree-path cost, whatever the sign of the costs
    cmax = 0.0
    for e in range(mn):
        if fabs(cost[e]) > cmax:
            cmax = fabs(cost[e])
    art = (2.0 * cmax + 1.0) * nn

    # initial strongly feasible tree: every sink hangs below its cheapest
    # source carrying its whole demand; each source is tied to the root by
    # an artificial arc whose direction absorbs its excess (cost 0, toward
    # the root) or covers its deficit (cost art, away from the root)
    excess_a = np.asarray(a, dtype=np.float64).copy()
    cdef double[::1] excess = excess_a
    cdef idx_t src
    for u in range(m):
        parent[u] = root
        depth[u] = 1
        pred[u] = mn + u
        state[mn + u] = 0
    for j in range(n):
        src = 0
        for i in range(1, m):
            if cost[i * n + j] < cost[src * n + j]:
                src = i
        u = m + j
        e = src * n + j
        parent[u] = src
        depth[u] = 2
        pred[u] = e
        pdir[u] = DOWN
        state[e] = 0
        flow[e] = b[j]
        excess[src] -= b[j]
    for u in range(m):
        if excess[u] >= 0.0:
            pdir[u] = UP
            flow[mn + u] = excess[u]
            pi[u] = 0.0
        else:
            pdir[u] = DOWN
            flow[mn + u] = -excess[u]
            pi[u] = art
        _add_child(first, nxt, prv, root, u)
    for j in range(n):
        u = m + j
        pi[u] = pi[parent[u]] + cost[pred[u]]
        _add_child(first, nxt, prv, parent[u], u)

    cdef idx_t block = 10
    cdef idx_t next_pos = 0
    cdef idx_t n_iter = 0
    cdef idx_t e_in, s_in, t_in, join, u_out, e_out, u_in, v_in, npath
    cdef int side
    if max_iter < 0:
        max_iter = 50 * (mn + nn) + 1000

    while True:
        # libc sqrt: '**' on C ints goes through complex pow and rounds low
        if <idx_t>sqrt(<double>ncand) > 10:
            block = <idx_t>sqrt(<double>ncand)
        # block search pricing over the candidate list
        best = -1
        min_rc = 0.0
        cnt = block
        q = next_pos
        for k in range(ncand):
            i = ci[q]
            j = cj[q]
            e = i * n + j
            if state[e] == 1:
                rc = cost[e] + pi[i] - pi[m + j]
                # only arcs that violate their own tolerance are eligible,
                # so a sweep never rediscovers an arc pricing skipped
                if rc < min_rc and rc < _tol(cost, pi, e, m, n, eps):
                    min_rc = rc
                    best = e
            q += 1
            if q == ncand:
                q = 0
            cnt -= 1
            if cnt == 0:
                if best >= 0:
                    break
                cnt = block
        if best < 0:
            # full sweep: grow the candidate list with every violating arc
            any_viol = False
            for i in range(m):
                for j in range(n):
                    e = i * n + j
                    viol[e] = 0
                    if state[e] == 1:
                        rc = cost[e] + pi[i] - pi[m + j]
                        if rc < 0.0 and rc < _tol(cost, pi, e, m, n, eps):
                            viol[e] = 1
                            any_viol = True
            if not any_viol:
                break
            cand_a = np.union1d(cand_a, np.flatnonzero(viol_a)).astype(np.int64)
            ci_a = cand_a // n
            cj_a = cand_a - ci_a * n
            ci = ci_a
            cj = cj_a
            ncand = cand_a.shape[0]
            next_pos = 0
            continue
        next_pos = q
        n_iter += 1
        if n_iter > max_iter:
            raise RuntimeError("network simplex exceeded the pivot limit")

        e_in = best
        s_in = e_in // n
        t_in = m + (e_in - s_in * n)

        # join node
        u = s_in
        v = t_in
        while u != v:
            if depth[u] > depth[v]:
                u = parent[u]
            elif depth[v] > depth[u]:
                v = parent[v]
            else:
                u = parent[u]
                v = parent[v]
        join = u

        # leaving arc: last blocking arc from the apex along the cycle
        delta = INF
        u_out = -1
        side = 0
        u = s_in
        while u != join:
            if pdir[u] == UP:
                d = flow[pred[u]]
                if d < delta:
                    delta = d
                    u_out = u
                    side = 1
            u = parent[u]
        u = t_in
        while u != join:
            if pdir[u] == DOWN:
                d = flow[pred[u]]
                if d <= delta:
                    delta = d
                    u_out = u
                    side = 2
            u = parent[u]
        if side == 0:
            raise RuntimeError("unbounded pivot cycle")

        # augment
        if delta > 0.0:
            flow[e_in] += delta
            u = s_in
            while u != join:
                flow[pred[u]] -= pdir[u] * delta
                u = parent[u]
            u = t_in
            while u != join:
                flow[pred[u]] += pdir[u] * delta
                u = parent[u]
            # pin round-off on the blocking arc
            flow[pred[u_out]] = 0.0

        if side == 1:
            u_in = s_in
            v_in = t_in
        else:
            u_in = t_in
            v_in = s_in
        e_out = pred[u_out]

        # reverse the stem u_in .. u_out and hang it below v_in
        npath = 0
        x = u_in
        while True:
            path[npath] = x
            npath += 1
            if x == u_out:
                break
            x = parent[x]
        _remove_child(first, nxt, prv, parent[u_out], u_out)
        k = npath - 1
        while k > 0:
            y = path[k]
            x = path[k - 1]
            _remove_child(first, nxt, prv, y, x)
            parent[y] = x
            pred[y] = pred[x]
            pdir[y] = -pdir[x]
            _add_child(first, nxt, prv, x, y)
            k -= 1
        parent[u_in] = v_in
        pred[u_in] = e_in
        pdir[u_in] = UP if u_in == s_in else DOWN
        _add_child(first, nxt, prv, v_in, u_in)
        state[e_in] = 0
        state[e_out] = 1

        # the moved subtree keeps its internal arcs: potentials shift by a
        # constant, depths are relabelled top-down
        sigma = (pi[v_in] - pdir[u_in] * cost[e_in]) - pi[u_in]
        stack[0] = u_in
        top = 1
        while top > 0:
            top -= 1
            x = stack[top]
            depth[x] = depth[parent[x]] + 1
            pi[x] += sigma
            c = first[x]
            while c != -1:
                stack[top] = c
                top += 1
                c = nxt[c]

    residual = flow_a[mn:].sum()
    total = np.asarray(a).sum()
    if residual > 1e-9 * max(total, 1.0):
        raise RuntimeError("transportation problem infeasible")
    out = flow_a[:mn].reshape(m, n).copy()
    np.maximum(out, 0.0, out=out)
    if potentials:
        return out, n_iter, pi_a[:m].copy(), pi_a[m:nn].copy()
    return out, n_iter


def greedy_merge(double[:, ::1] pos, double[::1] w, double radius):
    """Single greedy pass in index order; returns (labels, merged positions)."""
    cdef idx_t n = pos.shape[0]
    cdef idx_t i, j
    cdef double r2 = radius * radius
    cdef double cx, cy, W, Wn, dx, dy
    labels_a = np.full(n, -1, dtype=np.int64)
    out_a = np.array(pos, dtype=np.float64, copy=True)
    cdef idx_t[::1] labels = labels_a
    cdef double[:, ::1] out = out_a
    for i in range(n):
        if labels[i] != -1:
            continue
        labels[i] = i
        cx = pos[i, 0]
        cy = pos[i, 1]
        W = w[i]
        for j in range(i + 1, n):
            if labels[j] != -1:
                continue
            dx = pos[j, 0] - cx
            dy = pos[j, 1] - cy
            if dx * dx + dy * dy <= r2:
                labels[j] = i
                Wn = W + w[j]
                if Wn > 0.0:
                    cx = (W * cx + w[j] * pos[j, 0]) / Wn
                    cy = (W * cy + w[j] * pos[j, 1]) / Wn
                W = Wn
        out[i, 0] = cx
        out[i, 1] = cy
    return labels_a, out_a


def farthest_point_order(double[:, ::1] pos, double[::1] w, idx_t target):
    """Farthest-point selection seeded at the heaviest point.

    Ties (weight for the seed, min-distance afterwards) go to the lowest
    index; a point equidistant from several survivors is assigned to the
    earliest-selected one. Returns ``(selected, assign)`` where ``assign[k]``
    is the position in ``selected`` of the survivor nearest to point ``k``.
    """
    cdef idx_t n = pos.shape[0]
    cdef idx_t i, k, s, best
    cdef double dx, dy, d2, bestd
    if target > n:
        target = n
    sel_a = np.zeros(target, dtype=np.int64)
    mind_a = np.full(n, INF, dtype=np.float64)
    assign_a = np.zeros(n, dtype=np.int64)
    cdef idx_t[::1] sel = sel_a
    cdef double[::1] mind = mind_a
    cdef idx_t[::1] assign = assign_a
    if n == 0 or target == 0:
        return sel_a, assign_a
    best = 0
    for i in range(1, n):
        if w[i] > w[best]:
            best = i
    for k in range(target):
        sel[k] = best
        s = best
        for i in range(n):
            dx = pos[i, 0] - pos[s, 0]
            dy = pos[i, 1] - pos[s, 1]
            d2 = dx * dx + dy * dy
            if d2 < mind[i]:
                mind[i] = d2
                assign[i] = k
        mind[s] = -1.0
        assign[s] = k
        if k + 1 == target:
            break
        best = -1
        bestd = -1.0
        for i in range(n):
            if mind[i] > bestd:
                bestd = mind[i]
                best = i
    return sel_a, assign_a
