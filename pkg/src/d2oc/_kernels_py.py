"""Pure-Python/numpy twins of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same pivot and tie-breaking rules, same floating-point
operation order, so both backends return identical results; this one is
just slower.
"""
import math

import numpy as np

UP = 1
DOWN = -1


def network_simplex(a, b, C, cand=None, eps=1e-13, max_iter=-1, potentials=False):
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    m, n = a.shape[0], b.shape[0]
    if C.shape != (m, n):
        raise ValueError("cost matrix shape does not match marginals")
    mn = m * n
    nn = m + n
    root = nn
    cost = C.ravel()

    flow = np.zeros(mn + nn)
    state = np.ones(mn + nn, dtype=np.int8)
    parent = [-1] * (nn + 1)
    pred = [-1] * (nn + 1)
    pdir = [0] * (nn + 1)
    depth = [0] * (nn + 1)
    children = [[] for _ in range(nn + 1)]
    pi = np.zeros(nn + 1)

    cmax = float(np.abs(cost).max()) if mn else 0.0
    art = (2.0 * cmax + 1.0) * nn
    excess = a.copy()
    for u in range(m):
        parent[u] = root
        depth[u] = 1
        pred[u] = mn + u
        state[mn + u] = 0
    for j in range(n):
        src = int(np.argmin(C[:, j]))
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
        children[root].insert(0, u)
    for j in range(n):
        u = m + j
        pi[u] = pi[parent[u]] + cost[pred[u]]
        children[parent[u]].insert(0, u)

    if cand is None:
        cand = np.arange(mn, dtype=np.int64)
    else:
        cand = np.ascontiguousarray(cand, dtype=np.int64)
    next_pos = 0
    n_iter = 0
    if max_iter < 0:
        max_iter = 50 * (mn + nn) + 1000

    while True:
        ncand = cand.shape[0]
        block = max(int(math.sqrt(ncand)), 10)
        rc_all = ((C + pi[:m, None]) - pi[None, m:nn]).ravel()
        rc = rc_all[cand]
        ci, cj = np.divmod(cand, n)
        cscale = np.maximum(np.maximum(np.abs(cost[cand]), np.abs(pi[ci])),
                            np.abs(pi[m + cj]))
        rc[(state[cand] == 0) | ~(rc < -eps * (cscale + 1.0))] = np.inf
        best, min_rc = -1, 0.0
        scanned = 0
        while scanned < ncand:
            length = min(block, ncand - scanned)
            pos = (next_pos + scanned + np.arange(length)) % ncand
            chunk = rc[pos]
            k = int(np.argmin(chunk))
            if chunk[k] < min_rc:
                min_rc = float(chunk[k])
                best = int(cand[pos[k]])
            scanned += length
            if length == block and best >= 0:
                break
        if best < 0:
            i_idx, j_idx = np.divmod(np.arange(mn), n)
            scale = np.maximum(np.maximum(np.abs(cost), np.abs(pi[i_idx])),
                               np.abs(pi[m + j_idx]))
            viol = (state[:mn] == 1) & (rc_all < -eps * (scale + 1.0))
            if not viol.any():
                break
            cand = np.union1d(cand, np.flatnonzero(viol)).astype(np.int64)
            next_pos = 0
            continue
        next_pos = (next_pos + scanned) % ncand
        n_iter += 1
        if n_iter > max_iter:
            raise RuntimeError("network simplex exceeded the pivot limit")

        e_in = best
        s_in, t_in = divmod(e_in, n)
        t_in += m

        u, v = s_in, t_in
        while u != v:
            if depth[u] > depth[v]:
                u = parent[u]
            elif depth[v] > depth[u]:
                v = parent[v]
            else:
                u, v = parent[u], parent[v]
        join = u

        delta, u_out, side = np.inf, -1, 0
        u = s_in
        while u != join:
            if pdir[u] == UP and flow[pred[u]] < delta:
                delta, u_out, side = flow[pred[u]], u, 1
            u = parent[u]
        u = t_in
        while u != join:
            if pdir[u] == DOWN and flow[pred[u]] <= delta:
                delta, u_out, side = flow[pred[u]], u, 2
            u = parent[u]
        if side == 0:
            raise RuntimeError("unbounded pivot cycle")

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
            flow[pred[u_out]] = 0.0

        u_in, v_in = (s_in, t_in) if side == 1 else (t_in, s_in)
        e_out = pred[u_out]

        path = [u_in]
        while path[-1] != u_out:
            path.append(parent[path[-1]])
        children[parent[u_out]].remove(u_out)
        for k in range(len(path) - 1, 0, -1):
            y, x = path[k], path[k - 1]
            children[y].remove(x)
            parent[y] = x
            pred[y] = pred[x]
            pdir[y] = -pdir[x]
            children[x].insert(0, y)
        parent[u_in] = v_in
        pred[u_in] = e_in
        pdir[u_in] = UP if u_in == s_in else DOWN
        children[v_in].insert(0, u_in)
        state[e_in] = 0
        state[e_out] = 1

        sigma = (pi[v_in] - pdir[u_in] * cost[e_in]) - pi[u_in]
        stack = [u_in]
        while stack:
            x = stack.pop()
            depth[x] = depth[parent[x]] + 1
            pi[x] += sigma
            # same visiting order as the linked-list walk in the compiled twin
            stack.extend(children[x])

    if flow[mn:].sum() > 1e-9 * max(a.sum(), 1.0):
        raise RuntimeError("transportation problem infeasible")
    out = flow[:mn].reshape(m, n).copy()
    np.maximum(out, 0.0, out=out)
    if potentials:
        return out, n_iter, pi[:m].copy(), pi[m:nn].copy()
    return out, n_iter


def greedy_merge(pos, w, radius):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n = pos.shape[0]
    r2 = radius * radius
    labels = np.full(n, -1, dtype=np.int64)
    out = pos.copy()
    for i in range(n):
        if labels[i] != -1:
            continue
        labels[i] = i
        cx, cy = pos[i, 0], pos[i, 1]
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
    return labels, out


def farthest_point_order(pos, w, target):
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    n = pos.shape[0]
    target = min(int(target), n)
    sel = np.zeros(target, dtype=np.int64)
    assign = np.zeros(n, dtype=np.int64)
    if n == 0 or target == 0:
        return sel, assign
    mind = np.full(n, np.inf)
    best = int(np.argmax(w))
    for k in range(target):
        sel[k] = best
        dx = pos[:, 0] - pos[best, 0]
        dy = pos[:, 1] - pos[best, 1]
        d2 = dx * dx + dy * dy
        closer = d2 < mind
        mind[closer] = d2[closer]
        assign[closer] = k
        mind[best] = -1.0
        assign[best] = k
        if k + 1 == target:
            break
        best = int(np.argmax(mind))
    return sel, assign
