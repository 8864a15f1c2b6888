"""Independent brute-force oracles shared by the test modules."""

import itertools

import numpy as np


def walk_count(adj: dict, u: int, w: int, ell: int) -> int:
    """Number of walks of length ell from u to w, by explicit enumeration."""
    if ell == 0:
        return int(u == w)
    total = 0
    stack = [(u, 0)]
    while stack:
        v, k = stack.pop()
        if k == ell:
            total += v == w
            continue
        stack.extend((x, k + 1) for x in adj[v])
    return total


def saw_walks(adj: dict, w: int) -> list:
    """All walks from w that are self-avoiding or close a cycle of length >= 3 at their last step."""
    out = []

    def grow(walk):
        out.append(tuple(walk))
        last = walk[-1]
        for x in adj[last]:
            if x not in walk:
                grow(walk + [x])
            elif len(walk) >= 3 and x != walk[-2]:
                out.append(tuple(walk + [x]))

    grow([w])
    return out


def nb_walk_count(g, e, f, k: int) -> int:
    """Non-backtracking walks from oriented edge e to f in k steps."""
    cur = {e: 1}
    for _ in range(k):
        nxt = {}
        for (a, b), c in cur.items():
            for x in g.adjacency[b]:
                if x != a:
                    nxt[(b, x)] = nxt.get((b, x), 0) + c
        cur = nxt
    return cur.get(tuple(f), 0)


def gibbs_table(g, beta, gamma, lam, pins=None):
    """Dictionary of unnormalised weights over all configurations consistent with pins."""
    pins = pins or {}
    out = {}
    for sigma in itertools.product((-1, 1), repeat=g.n):
        if any(sigma[v] != s for v, s in pins.items()):
            continue
        wt = lam ** sum(1 for s in sigma if s == 1)
        for u, v in g.edges:
            if sigma[u] == sigma[v] == 1:
                wt *= beta
            elif sigma[u] == sigma[v] == -1:
                wt *= gamma
        out[sigma] = wt
    return out


def influence_oracle(g, beta, gamma, lam, pins=None):
    """Influence matrix by direct conditioning on the weight table (no shared code)."""
    pins = pins or {}
    free = [v for v in range(g.n) if v not in pins]
    out = np.eye(len(free))
    for i, w in enumerate(free):
        tabs = {}
        for s in (1, -1):
            tab = gibbs_table(g, beta, gamma, lam, {**pins, w: s})
            tabs[s] = tab if sum(tab.values()) > 0 else None
        if tabs[1] is None or tabs[-1] is None:
            for j, u in enumerate(free):
                if u != w:
                    out[i, j] = 0.0
            continue
        for j, u in enumerate(free):
            if u == w:
                continue
            vals = []
            for s in (1, -1):
                tab = tabs[s]
                z = sum(tab.values())
                vals.append(sum(wt for sig, wt in tab.items() if sig[u] == 1) / z)
            out[i, j] = vals[0] - vals[1]
    return out
