"""Independent brute-force oracles used by the test suite.

These deliberately re-derive results through the most literal route
available (explicit scans, BFS, transitive closure, step-by-step simulation)
so the production implementations are checked against something that shares
no code with them.
"""

import numpy as np

from hypam import geometry as geo


def brute_force_reduce(word):
    """Word reduction by rescanning the whole word from the right each step."""
    out = []
    i = 0
    while True:
        j = max(k for k in range(len(word)) if word[k] == word[i])
        out.append(word[j])
        if j + 1 >= len(word):
            return out
        i = j + 1


def oracle_islands(fieldr, delta, t, h):
    """Connected components via explicit adjacency matrix and BFS."""
    thr = delta * t ** (2.0 / 3.0)
    idx = np.flatnonzero(fieldr.values > thr)
    pts = fieldr.sites[idx]
    n = len(idx)
    dist = np.arccosh(np.maximum(
        1.0, geo.cosh_distance(pts[:, None, :], pts[None, :, :])))
    adj = dist <= 2.0 * h
    comps = []
    seen = set()
    for i in range(n):
        if i in seen:
            continue
        stack, comp = [i], []
        while stack:
            k = stack.pop()
            if k in seen:
                continue
            seen.add(k)
            comp.append(k)
            stack.extend(int(m) for m in np.flatnonzero(adj[k]))
        comps.append(sorted(int(idx[c]) for c in comp))
    return sorted(comps)


def oracle_clusters(islands, eta, t):
    """Cluster membership via boolean transitive closure over island links."""
    link = eta * t ** (4.0 / 3.0)
    f = islands.field
    n = len(islands.islands)
    adj = np.eye(n, dtype=bool)
    for i in range(n):
        for j in range(n):
            a = f.sites[np.asarray(islands.islands[i])]
            b = f.sites[np.asarray(islands.islands[j])]
            dmin = np.min(np.arccosh(np.maximum(
                1.0, geo.cosh_distance(a[:, None, :], b[None, :, :]))))
            if dmin <= link:
                adj[i, j] = True
    for _ in range(n):
        adj = adj | (adj @ adj)
    comps = sorted(set(tuple(sorted(np.flatnonzero(adj[i]).tolist()))
                       for i in range(n)))
    return sorted(sorted(ix for g in comp for ix in islands.islands[g])
                  for comp in comps)


def sample_hitting_times(a, dt, t_max, n, rng):
    """First hitting times of level a by standard 1-D BM.

    Euler steps with Brownian-bridge crossing detection between grid points
    (crossing probability exp(-2 (a-x0)(a-x1) / dt)), which removes the
    leading discrete-monitoring bias.  Times are jittered uniformly within
    the crossing step; paths alive at t_max report +inf.
    """
    sqdt = np.sqrt(dt)
    n_steps = int(round(t_max / dt))
    x = np.zeros(n)
    times = np.full(n, np.inf)
    active = np.arange(n)
    for k in range(n_steps):
        if active.size == 0:
            break
        z = rng.standard_normal(active.size)
        x_new = x[active] + sqdt * z
        cross = x_new >= a
        below = ~cross
        p_bridge = np.exp(-2.0 * (a - x[active][below])
                          * (a - x_new[below]) / dt)
        u = rng.random(below.sum())
        bridge_hit = np.zeros(active.size, dtype=bool)
        bridge_hit[np.flatnonzero(below)[u < p_bridge]] = True
        newly = cross | bridge_hit
        jitter = rng.random(int(newly.sum()))
        times[active[newly]] = (k + jitter) * dt
        x[active] = x_new
        active = active[~newly]
    return times
