"""Glauber dynamics: seeded simulation and exact diagnostics on small state spaces."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .gibbs_exact import EMPTY, Boundary, GibbsError, GibbsParams, enumerate_gibbs
from .graph_core import Graph
from .spectral import jacobi_eigh

STATE_CAP = 2 ** 16
DENSE_CAP = 4096

# ---------------------------------------------------------------------------
# Counter-based generator: splitmix64 over a key built from (seed, chain, step, slot)

_G = np.uint64(0x9E3779B97F4A7C15)
_C1 = np.uint64(0xBF58476D1CE4E5B9)
_C2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _C1
    z = (z ^ (z >> np.uint64(27))) * _C2
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed: int, chain, step: int, slot: int) -> np.ndarray:
    """Uniform [0,1) draws determined only by (seed, chain, step, slot)."""
    chain = np.asarray(chain, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = _mix(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) * _G + np.uint64(1))
        z = _mix(z ^ (chain * _G + np.uint64(0x632BE59BD9B4E019)))
        z = _mix(z ^ np.uint64(((step * 4 + slot) * 0x9E3779B97F4A7C15 + 7) & 0xFFFFFFFFFFFFFFFF))
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 2 ** 53)


# ---------------------------------------------------------------------------
# Simulation


@dataclass(frozen=True)
class ChainState:
    config: np.ndarray = field(repr=False)  # +-1 per vertex
    step: int = 0
    rng_seed: int = 0
    rng_stream: int = 0  # chain id; draws are a function of (seed, stream, step)


def start_config(g: Graph, b: Boundary = EMPTY) -> np.ndarray:
    """All -1 (the empty independent set for hard-core), with pins applied."""
    x = -np.ones(g.n, dtype=np.int8)
    for v, s in b.pins:
        x[v] = s
    return x


def plus_probability(p: GibbsParams, plus_nbrs, degree):
    """Single-site conditional P(+1) given the number of +1 neighbours."""
    plus_nbrs = np.asarray(plus_nbrs, dtype=float)
    degree = np.asarray(degree, dtype=float)
    wp = p.lam * np.power(p.beta, plus_nbrs)
    wm = np.power(p.gamma, degree - plus_nbrs)
    return wp / (wp + wm)


class _Sim:
    def __init__(self, g: Graph, p: GibbsParams, b: Boundary):
        self.g, self.p = g, p
        self.free = np.array([v for v in range(g.n) if v not in b], dtype=np.int64)
        self.adj = np.zeros((g.n, g.n), dtype=np.int8)
        for u, v in g.edges:
            self.adj[u, v] = self.adj[v, u] = 1
        self.deg = self.adj.sum(axis=1)

    def step(self, cfg: np.ndarray, chains: np.ndarray, t: int, seed: int) -> None:
        if len(self.free) == 0:
            return
        u0 = counter_uniform(seed, chains, t, 0)
        u1 = counter_uniform(seed, chains, t, 1)
        v = self.free[np.minimum((u0 * len(self.free)).astype(np.int64), len(self.free) - 1)]
        plus = np.einsum("cj,cj->c", self.adj[v], (cfg == 1).astype(np.int8))
        pp = plus_probability(self.p, plus, self.deg[v])
        cfg[np.arange(len(cfg)), v] = np.where(u1 < pp, 1, -1)


def glauber_step(g: Graph, p: GibbsParams, b: Boundary, state: ChainState) -> ChainState:
    cfg = state.config.astype(np.int8).copy()[None, :]
    _Sim(g, p, b).step(cfg, np.array([state.rng_stream]), state.step, state.rng_seed)
    return ChainState(cfg[0], state.step + 1, state.rng_seed, state.rng_stream)


def run_chains(g: Graph, p: GibbsParams, b: Boundary, t: int, chains: int, seed: int,
               start: np.ndarray | None = None, checkpoints=None, callback=None) -> np.ndarray:
    """Run `chains` independent chains for t steps; returns final configurations.

    `callback(step, cfg)` is invoked after each step listed in `checkpoints`
    (and at step 0 if listed).
    """
    sim = _Sim(g, p, b)
    cfg = np.tile(start_config(g, b) if start is None else np.asarray(start, dtype=np.int8), (chains, 1))
    ids = np.arange(chains, dtype=np.uint64)
    marks = set(checkpoints or [])
    if callback and 0 in marks:
        callback(0, cfg)
    for s in range(t):
        sim.step(cfg, ids, s, seed)
        if callback and (s + 1) in marks:
            callback(s + 1, cfg)
    return cfg


# ---------------------------------------------------------------------------
# Exact transition matrix


@dataclass
class TransitionMatrix:
    states: np.ndarray = field(repr=False)  # support configurations, +-1 rows
    probs: sparse.csr_matrix = field(repr=False)
    pi: np.ndarray = field(repr=False)
    free: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def dense(self) -> np.ndarray:
        return self.probs.toarray()

    def index_of(self, config) -> int:
        return self._codes[_encode(np.asarray(config)[None, self.free])[0]]

    @property
    def _codes(self) -> dict:
        if not hasattr(self, "_code_map"):
            codes = _encode(self.states[:, self.free])
            self._code_map = {int(c): i for i, c in enumerate(codes)}
        return self._code_map

    def detailed_balance_violation(self) -> float:
        flow = sparse.diags(self.pi) @ self.probs
        diff = flow - flow.T
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def row_sum_violation(self) -> float:
        return float(np.max(np.abs(np.asarray(self.probs.sum(axis=1)).ravel() - 1.0)))

    def stationarity_violation(self) -> float:
        return float(np.max(np.abs(self.probs.T @ self.pi - self.pi)))


def _encode(bits_pm: np.ndarray) -> np.ndarray:
    bits = (bits_pm == 1).astype(np.int64)
    return (bits << np.arange(bits.shape[1], dtype=np.int64)).sum(axis=1)


def transition_matrix(g: Graph, p: GibbsParams, b: Boundary = EMPTY, cap: int = STATE_CAP) -> TransitionMatrix:
    free = np.array([v for v in range(g.n) if v not in b], dtype=np.int64)
    if len(free) > 30:
        raise GibbsError("state space too large for exact work")
    en = enumerate_gibbs(g, p, b)
    keep = en.prob > 0
    if keep.sum() > cap:
        raise GibbsError(f"support of size {int(keep.sum())} exceeds the state cap {cap}")
    states = np.where(en.spins[keep], 1, -1).astype(np.int8)
    pi = en.prob[keep]
    pi = pi / pi.sum()
    codes = _encode(states[:, free])
    lookup = {int(c): i for i, c in enumerate(codes)}
    adj = [list(g.adjacency[v]) for v in range(g.n)]
    nf = len(free)
    rows, cols, vals = [], [], []
    for i, st in enumerate(states):
        stay = 0.0
        for j, v in enumerate(free):
            plus = sum(1 for x in adj[v] if st[x] == 1)
            pp = float(plus_probability(p, plus, len(adj[v])))
            for spin, prob in ((1, pp), (-1, 1.0 - pp)):
                if prob == 0.0:
                    continue
                if st[v] == spin:
                    stay += prob / nf
                    continue
                k = lookup[int(codes[i] ^ (1 << j))]
                rows.append(i)
                cols.append(k)
                vals.append(prob / nf)
        if nf == 0:
            stay = 1.0
        rows.append(i)
        cols.append(i)
        vals.append(stay)
    n = len(states)
    P = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    tm = TransitionMatrix(states, P, pi, free)
    if tm.stationarity_violation() > 1e-10:
        raise GibbsError("stationary vector does not match the Gibbs weights")
    return tm


@dataclass
class GapReport:
    second_eig: float
    min_eig: float
    gap: float
    abs_gap: float


def spectral_gap(tm: TransitionMatrix, jacobi_limit: int = 160) -> GapReport:
    """Eigenvalues of D^(1/2) P D^(-1/2), symmetric by reversibility."""
    if tm.size > DENSE_CAP:
        raise GibbsError(f"spectral gap limited to {DENSE_CAP} states")
    d = np.sqrt(tm.pi)
    s = (d[:, None] * tm.dense()) / d[None, :]
    s = 0.5 * (s + s.T)
    if tm.size <= jacobi_limit:
        eig = jacobi_eigh(s)[0]
    else:
        eig = np.linalg.eigvalsh(s)
    if tm.size == 1:
        return GapReport(0.0, 1.0, 1.0, 1.0)
    lam2 = float(eig[-2])
    lmin = float(eig[0])
    return GapReport(lam2, lmin, 1.0 - lam2, 1.0 - max(abs(lam2), abs(lmin)))


def worst_tv(pt: np.ndarray, pi: np.ndarray) -> float:
    return float(np.max(0.5 * np.abs(pt - pi[None, :]).sum(axis=1)))


def mixing_time_exact(tm: TransitionMatrix, threshold: float = 0.25, t_max: int = 1 << 40) -> int:
    """Least t with max_x TV(P^t(x, .), pi) <= threshold, by doubling then bisection."""
    if threshold >= 1.0:
        return 0
    if tm.size > DENSE_CAP:
        raise GibbsError(f"exact mixing time limited to {DENSE_CAP} states")
    pi = tm.pi
    n = tm.size
    cur = np.eye(n)
    if worst_tv(cur, pi) <= threshold:
        return 0
    powers = [tm.dense()]  # powers[k] = P^(2^k)
    while worst_tv(powers[-1], pi) > threshold:
        if (1 << len(powers)) > t_max:
            raise GibbsError("mixing time exceeds t_max")
        powers.append(powers[-1] @ powers[-1])
    k = len(powers) - 1
    if k == 0:
        return 1
    # answer in (2^(k-1), 2^k]; build P^t from the binary expansion of t
    lo, hi = 1 << (k - 1), 1 << k

    def power(t: int) -> np.ndarray:
        out = np.eye(n)
        bit = 0
        while t:
            if t & 1:
                out = out @ powers[bit]
            t >>= 1
            bit += 1
        return out

    while hi - lo > 1:
        mid = (lo + hi) // 2
        if worst_tv(power(mid), pi) <= threshold:
            hi = mid
        else:
            lo = mid
    return hi


def exact_tv_from(tm: TransitionMatrix, start_index: int, t: int) -> float:
    x = np.zeros(tm.size)
    x[start_index] = 1.0
    PT = tm.probs.T.tocsr()
    for _ in range(t):
        x = PT @ x
    return 0.5 * float(np.abs(x - tm.pi).sum())


def exact_distribution_from(tm: TransitionMatrix, start_index: int, t: int) -> np.ndarray:
    x = np.zeros(tm.size)
    x[start_index] = 1.0
    PT = tm.probs.T.tocsr()
    for _ in range(t):
        x = PT @ x
    return x


@dataclass
class EmpiricalTV:
    t: int
    chains: int
    tv: float
    exact_tv: float
    sigma: float  # (1/2) sum_x sqrt(p_t(x)(1-p_t(x))/N)
    note: str = "histogram TV is biased upward by sampling noise of order sigma"

    @property
    def agrees(self) -> bool:
        return abs(self.tv - self.exact_tv) <= 3.0 * self.sigma + 1e-12

    def to_json(self) -> dict:
        return {"t": self.t, "chains": self.chains, "tv": self.tv, "exact_tv": self.exact_tv,
                "sigma": self.sigma, "agrees_3sigma": self.agrees, "note": self.note}


def empirical_tv(g: Graph, p: GibbsParams, b: Boundary, t: int, chains: int, seed: int,
                 tm: TransitionMatrix | None = None) -> EmpiricalTV:
    if tm is None:
        tm = transition_matrix(g, p, b)
    cfg = run_chains(g, p, b, t, chains, seed)
    return _tv_of(tm, cfg, t, chains, g, b)


def _tv_of(tm: TransitionMatrix, cfg: np.ndarray, t: int, chains: int, g: Graph, b: Boundary) -> EmpiricalTV:
    codes = _encode(cfg[:, tm.free])
    idx = np.array([tm._codes[int(c)] for c in codes])
    emp = np.bincount(idx, minlength=tm.size) / chains
    start = tm.index_of(start_config(g, b))
    pt = exact_distribution_from(tm, start, t)
    tv = 0.5 * float(np.abs(emp - tm.pi).sum())
    exact = 0.5 * float(np.abs(pt - tm.pi).sum())
    sigma = 0.5 * float(np.sum(np.sqrt(pt * (1.0 - pt) / chains)))
    return EmpiricalTV(t, chains, tv, exact, sigma)


def tv_curve(g: Graph, p: GibbsParams, b: Boundary, steps: int, chains: int, seed: int,
             points: int = 10, tm: TransitionMatrix | None = None) -> list:
    if tm is None:
        tm = transition_matrix(g, p, b)
    marks = sorted(set(int(round(x)) for x in np.linspace(0, steps, points + 1)))
    out = []

    def record(step, cfg):
        out.append(_tv_of(tm, cfg, step, chains, g, b))

    run_chains(g, p, b, steps, chains, seed, checkpoints=marks, callback=record)
    return out
