"""Exact two-spin Gibbs distributions on small graphs by enumeration.

Everything here is the ground truth the tree-based route is checked against.
Weights are handled in log space with one rescale per instance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .graph_core import Boundary, EMPTY, Graph, GraphError, pair_extension, vertex_extension
from .spectral import LabeledMatrix, symmetric_eigvals

ENUM_CAP = 22


class GibbsError(ValueError):
    pass


class EmptySupportError(GibbsError):
    pass


@dataclass(frozen=True)
class GibbsParams:
    beta: float
    gamma: float
    lam: float
    model_tag: str = "general"

    def __post_init__(self):
        if self.beta < 0 or self.gamma <= 0 or self.lam <= 0:
            raise GibbsError(f"need beta >= 0, gamma > 0, lambda > 0; got {self}")
        if self.model_tag == "ising" and not (self.beta == self.gamma and self.lam == 1.0):
            raise GibbsError("ising requires beta == gamma and lambda == 1")
        if self.model_tag == "hardcore" and not (self.beta == 0.0 and self.gamma == 1.0):
            raise GibbsError("hardcore requires beta == 0 and gamma == 1")
        if self.model_tag not in ("ising", "hardcore", "general"):
            raise GibbsError(f"unknown model tag {self.model_tag!r}")

    @classmethod
    def ising(cls, beta: float) -> "GibbsParams":
        return cls(float(beta), float(beta), 1.0, "ising")

    @classmethod
    def hardcore(cls, lam: float) -> "GibbsParams":
        return cls(0.0, 1.0, float(lam), "hardcore")

    @property
    def antiferromagnetic(self) -> bool:
        return self.beta * self.gamma < 1

    @property
    def ferromagnetic(self) -> bool:
        return self.beta * self.gamma > 1

    @property
    def hard(self) -> bool:
        return self.beta == 0.0

    def __str__(self):
        if self.model_tag == "ising":
            return f"ising(beta={self.beta:g})"
        if self.model_tag == "hardcore":
            return f"hardcore(lambda={self.lam:g})"
        return f"general(beta={self.beta:g}, gamma={self.gamma:g}, lambda={self.lam:g})"

    def to_json(self) -> dict:
        return {"model": self.model_tag, "beta": self.beta, "gamma": self.gamma, "lambda": self.lam}


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def gibbs_weight(g: Graph, p: GibbsParams, sigma) -> float:
    """lambda^{#+} beta^{#++} gamma^{#--} with 0^0 = 1."""
    s = [int(sigma[v]) for v in range(g.n)]
    plus = sum(1 for x in s if x == 1)
    pp = sum(1 for u, v in g.edges if s[u] == 1 and s[v] == 1)
    mm = sum(1 for u, v in g.edges if s[u] == -1 and s[v] == -1)
    return (p.lam ** plus) * (p.beta ** pp) * (p.gamma ** mm)


# ---------------------------------------------------------------------------
# Enumeration engine


@dataclass
class Enumeration:
    """All completions of a boundary with their normalised probabilities.

    `spins[k, v]` is True when vertex v is +1 in configuration k (all of V,
    pinned vertices included); `prob[k]` are the conditional probabilities.
    """

    graph: Graph
    params: GibbsParams
    boundary: Boundary
    free: np.ndarray
    spins: np.ndarray = field(repr=False)
    prob: np.ndarray = field(repr=False)
    log_z: float

    @property
    def Z(self) -> float:
        return math.exp(self.log_z)

    def marginals(self) -> np.ndarray:
        """P(v = +1) for every vertex of the graph."""
        return self.prob @ self.spins

    def pair_plus(self) -> np.ndarray:
        """P(u = +1, v = +1) for all pairs."""
        s = self.spins.astype(float)
        return (s * self.prob[:, None]).T @ s


def _log_weights(g: Graph, p: GibbsParams, spins: np.ndarray) -> np.ndarray:
    plus = spins.sum(axis=1)
    if g.m:
        e = np.array(g.edges)
        a, b = spins[:, e[:, 0]], spins[:, e[:, 1]]
        pp = (a & b).sum(axis=1)
        mm = (~a & ~b).sum(axis=1)
    else:
        pp = mm = np.zeros(len(spins), dtype=np.int64)
    lw = plus * math.log(p.lam)
    lw = lw + np.where(pp > 0, pp * _log(p.beta) if p.beta > 0 else -np.inf, 0.0)
    lw = lw + mm * math.log(p.gamma)
    return lw


def enumerate_gibbs(g: Graph, p: GibbsParams, b: Boundary = EMPTY, cap: int = ENUM_CAP) -> Enumeration:
    pins = b.assignment
    for v in pins:
        if not 0 <= v < g.n:
            raise GraphError(f"pinned vertex {v} not in graph")
    free = np.array([v for v in range(g.n) if v not in pins], dtype=np.int64)
    k = len(free)
    if k > cap:
        raise GibbsError(f"{k} free vertices exceeds the enumeration cap {cap}")
    codes = np.arange(2 ** k, dtype=np.int64)
    spins = np.zeros((2 ** k, g.n), dtype=bool)
    for j, v in enumerate(free):
        spins[:, v] = (codes >> j) & 1
    for v, x in pins.items():
        spins[:, v] = x == 1
    lw = _log_weights(g, p, spins)
    top = lw.max()
    if not np.isfinite(top):
        raise EmptySupportError(f"boundary {b} has empty support for {p}")
    w = np.exp(lw - top)
    total = w.sum()
    return Enumeration(g, p, b, free, spins, w / total, float(top + math.log(total)))


def partition_and_marginals(g: Graph, p: GibbsParams, b: Boundary = EMPTY, cap: int = ENUM_CAP) -> dict:
    en = enumerate_gibbs(g, p, b, cap)
    marg = en.marginals()
    return {"Z": en.Z, "log_Z": en.log_z, "marginals": {int(v): float(marg[v]) for v in range(g.n)}}


def _influence_from(en: Enumeration, rows, cols) -> np.ndarray:
    """I(w, u) = P(u+ | w+) - P(u+ | w-), zero when a conditioning event is null."""
    marg = en.marginals()
    pp = en.pair_plus()
    out = np.zeros((len(rows), len(cols)))
    for i, w in enumerate(rows):
        pw = marg[w]
        if pw <= 0.0 or pw >= 1.0:
            continue
        for j, u in enumerate(cols):
            plus = pp[w, u] / pw
            minus = (marg[u] - pp[w, u]) / (1.0 - pw)
            out[i, j] = plus - minus
    return out


def influence_matrix_exact(g: Graph, p: GibbsParams, b: Boundary = EMPTY, cap: int = ENUM_CAP) -> LabeledMatrix:
    en = enumerate_gibbs(g, p, b, cap)
    free = [int(v) for v in en.free]
    m = _influence_from(en, free, free)
    np.fill_diagonal(m, 1.0)
    return LabeledMatrix(free, free, m)


def degenerate_vertices(g: Graph, p: GibbsParams, b: Boundary = EMPTY, cap: int = ENUM_CAP, tol: float = 0.0) -> list:
    """Free vertices whose conditional marginal is 0 or 1."""
    en = enumerate_gibbs(g, p, b, cap)
    marg = en.marginals()
    return [int(v) for v in en.free if marg[v] <= tol or marg[v] >= 1.0 - tol]


# ---------------------------------------------------------------------------
# Symmetrization of the influence matrix


@dataclass
class SymmetrizeReport:
    asymmetry: float
    rho: float
    max_eig: float
    eigenvalues: np.ndarray = field(repr=False)
    degenerate: list
    ok: bool

    def to_json(self) -> dict:
        return {"asymmetry": self.asymmetry, "rho": self.rho, "max_eig": self.max_eig,
                "degenerate": self.degenerate, "ok": self.ok}


def symmetrized_spectrum(infl: np.ndarray, marg: np.ndarray) -> tuple:
    """Conjugate by diag(sqrt(mu(+) mu(-))) on the non-degenerate vertices.

    Degenerate vertices carry unit rows and zero columns in the influence
    matrix, so each contributes an eigenvalue 1 and is split off exactly.
    Returns (asymmetry, eigenvalues, degenerate positions).
    """
    var = marg * (1.0 - marg)
    good = np.flatnonzero(var > 0)
    bad = [int(i) for i in np.flatnonzero(var <= 0)]
    sub = infl[np.ix_(good, good)]
    d = np.sqrt(var[good])
    x = (d[:, None] * sub) / d[None, :]
    asym = float(np.max(np.abs(x - x.T))) if len(good) else 0.0
    eig = symmetric_eigvals(x) if len(good) else np.zeros(0)
    eig = np.concatenate([eig, np.ones(len(bad))])
    return asym, np.sort(eig), bad


def symmetrize_check(g: Graph, p: GibbsParams, b: Boundary = EMPTY, infl: LabeledMatrix | None = None,
                     cap: int = ENUM_CAP) -> SymmetrizeReport:
    en = enumerate_gibbs(g, p, b, cap)
    free = [int(v) for v in en.free]
    if infl is None:
        m = _influence_from(en, free, free)
        np.fill_diagonal(m, 1.0)
    else:
        m = infl.entries
    marg = en.marginals()[free]
    asym, eig, bad = symmetrized_spectrum(m, marg)
    rho = float(np.max(np.abs(eig))) if len(eig) else 0.0
    return SymmetrizeReport(asym, rho, float(eig.max()) if len(eig) else 0.0, eig,
                            [free[i] for i in bad], not bad)


# ---------------------------------------------------------------------------
# Marginal boundedness and total connectivity


def _partial_table(prob_tensor: np.ndarray) -> np.ndarray:
    """Extend each axis of a (2,)*n probability tensor with a summed-out third slot.

    Index 0 is spin -1, 1 is +1, 2 means unconstrained.
    """
    t = prob_tensor
    for ax in range(t.ndim):
        t = np.concatenate([t, t.sum(axis=ax, keepdims=True)], axis=ax)
    return t


def marginal_boundedness(g: Graph, p: GibbsParams, samples: int = 1000, seed: int = 0,
                         exhaustive_cap: int = 10) -> float:
    """Smallest conditional marginal over boundaries, vertices and supported spins."""
    en = enumerate_gibbs(g, p, EMPTY)
    n = g.n
    if n <= exhaustive_cap:
        # tensor axes in vertex order: spins[:, v] -> index bit
        tensor = np.zeros((2,) * n)
        idx = tuple(en.spins[:, v].astype(int) for v in range(n))
        np.add.at(tensor, idx, en.prob)
        table = _partial_table(tensor)
        best = math.inf
        for u in range(n):
            # condition on everything but u: axis u fixed to a spin vs summed
            # u unconstrained in the denominator, so every pinned set avoids u
            num = np.take(table, [0, 1], axis=u)
            den = np.take(table, [2], axis=u)
            with np.errstate(invalid="ignore", divide="ignore"):
                ratio = num / den
            mask = (den > 0) & (num > 0)
            if mask.any():
                best = min(best, float(ratio[mask].min()))
        return best
    rng = np.random.default_rng(seed)
    marg_all = en.spins
    best = math.inf
    for _ in range(samples):
        size = int(rng.integers(0, n))
        region = rng.choice(n, size=size, replace=False)
        # pick a configuration in the support and copy its spins onto the region
        k = int(rng.choice(len(en.prob), p=en.prob))
        b = Boundary(tuple((int(v), 1 if marg_all[k, v] else -1) for v in region))
        sub = enumerate_gibbs(g, p, b)
        mg = sub.marginals()[sub.free]
        vals = np.concatenate([mg, 1.0 - mg])
        vals = vals[vals > 0]
        if len(vals):
            best = min(best, float(vals.min()))
    return best


def total_connectivity_check(g: Graph, p: GibbsParams, cap: int = 10) -> bool:
    """Every conditional support (nonempty pinned set) is connected under single flips."""
    if g.n > cap:
        raise GibbsError(f"total connectivity sweep limited to {cap} vertices")
    if p.beta > 0:
        # all weights positive: each conditional support is a full subcube
        return True
    en = enumerate_gibbs(g, p, EMPTY)
    n = g.n
    support = np.zeros(2 ** n, dtype=bool)
    codes = (en.spins.astype(np.int64) << np.arange(n)).sum(axis=1)
    support[codes[en.prob > 0]] = True
    for size in range(1, n + 1):
        for region in itertools.combinations(range(n), size):
            rmask = sum(1 << v for v in region)
            free = [v for v in range(n) if not (rmask >> v) & 1]
            for tau in range(2 ** size):
                fixed = sum(1 << region[i] for i in range(size) if (tau >> i) & 1)
                states = []
                for c in range(2 ** len(free)):
                    code = fixed | sum(1 << free[i] for i in range(len(free)) if (c >> i) & 1)
                    if support[code]:
                        states.append(code)
                if len(states) <= 1:
                    continue
                sset = set(states)
                seen = {states[0]}
                stack = [states[0]]
                while stack:
                    x = stack.pop()
                    for v in free:
                        y = x ^ (1 << v)
                        if y in sset and y not in seen:
                            seen.add(y)
                            stack.append(y)
                if len(seen) != len(sset):
                    return False
    return True


# ---------------------------------------------------------------------------
# Extended influence matrix on split vertices

# split spin conventions for the other split vertices of w when ws is kept free
#   "weitz":   sigma(wx) = +1 if x < s else -1
#   "literal": sigma(wx) = +1 if w > x else -1
SPLIT_CONVENTIONS = ("weitz", "literal")
DEFAULT_SPLIT_CONVENTION = "weitz"


def split_spin(w: int, s: int, x: int, convention: str) -> int:
    if convention == "weitz":
        return 1 if x < s else -1
    if convention == "literal":
        return 1 if w > x else -1
    raise GibbsError(f"unknown split convention {convention!r}")


def split_labels(g: Graph, b: Boundary) -> list:
    """S_Lambda: all split vertices (w, s) with w free, in canonical order."""
    return [(w, s) for w in range(g.n) if w not in b for s in g.adjacency[w]]


def _lift_boundary(ext: Graph, b: Boundary) -> dict:
    return {ext.index[v]: x for v, x in b.pins}


@lru_cache(maxsize=4096)
def _vertex_ext(g: Graph, w: int):
    return vertex_extension(g, w)


@lru_cache(maxsize=4096)
def _pair_ext(g: Graph, w: int, u: int):
    return pair_extension(g, w, u)


@dataclass
class ExtendedReport:
    """H (extended influences), N (variance-ratio coefficients) and degenerate entries."""

    labels: list
    H: np.ndarray = field(repr=False)
    N: np.ndarray = field(repr=False)
    degenerate: list

    def h_matrix(self) -> LabeledMatrix:
        return LabeledMatrix(self.labels, self.labels, self.H)

    def n_matrix(self) -> LabeledMatrix:
        return LabeledMatrix(self.labels, self.labels, self.N)


def _var(m: float) -> float:
    return m * (1.0 - m)


def extended_matrices(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_SPLIT_CONVENTION,
                      literal_minus: bool = False, cap: int = ENUM_CAP) -> ExtendedReport:
    """Extended influence matrix H and coefficient matrix N by enumeration.

    With `literal_minus` the second term of H is nu_uz(-1 | ws -1) instead of
    nu_uz(+1 | ws -1).
    """
    labels = split_labels(g, b)
    pos = {lab: i for i, lab in enumerate(labels)}
    k = len(labels)
    H = np.zeros((k, k))
    N = np.zeros((k, k))
    degenerate = []
    free = [w for w in range(g.n) if w not in b]

    # zeta: the ws-extension, one enumeration per split vertex
    zeta = {}
    for w in free:
        gw, smap = _vertex_ext(g, w)
        base = _lift_boundary(gw, b)
        for s in g.adjacency[w]:
            pins = dict(base)
            for x in g.adjacency[w]:
                if x != s:
                    pins[smap[x]] = split_spin(w, s, x, convention)
            try:
                en = enumerate_gibbs(gw, p, Boundary.from_dict(pins), cap)
            except EmptySupportError:
                zeta[(w, s)] = None
                continue
            marg = en.marginals()
            zeta[(w, s)] = (marg, gw, smap)

    for w in free:
        for u in free:
            if u == w:
                continue
            gwu, maps = _pair_ext(g, w, u)
            base = _lift_boundary(gwu, b)
            for s in g.adjacency[w]:
                for z in g.adjacency[u]:
                    pins = dict(base)
                    for x in g.adjacency[w]:
                        if x != s:
                            pins[maps[w][x]] = split_spin(w, s, x, convention)
                    for x in g.adjacency[u]:
                        if x != z:
                            pins[maps[u][x]] = split_spin(u, z, x, convention)
                    i, j = pos[(w, s)], pos[(u, z)]
                    ws, uz = maps[w][s], maps[u][z]
                    try:
                        en = enumerate_gibbs(gwu, p, Boundary.from_dict(pins), cap)
                    except EmptySupportError:
                        degenerate.append(((w, s), (u, z), "empty support"))
                        continue
                    marg = en.marginals()
                    pw = marg[ws]
                    if 0.0 < pw < 1.0:
                        pp = en.pair_plus()[ws, uz]
                        plus = pp / pw
                        minus = (marg[uz] - pp) / (1.0 - pw)
                        if literal_minus:
                            minus = 1.0 - minus
                        H[i, j] = plus - minus
                    # coefficient from swapping both influences via the variance identity
                    zz = zeta.get((w, s))
                    if zz is None:
                        degenerate.append(((w, s), (u, z), "empty support"))
                        continue
                    zmarg, gw, _ = zz
                    var_u = _var(zmarg[gw.index[u]])
                    var_ws_z = _var(zmarg[gw.index[(w, s)]])
                    var_ws_n = _var(marg[ws])
                    var_uz_n = _var(marg[uz])
                    if var_u == 0.0:
                        continue
                    if var_ws_z == 0.0 or var_uz_n == 0.0:
                        degenerate.append(((w, s), (u, z), "zero marginal in denominator"))
                        continue
                    N[i, j] = (var_u / var_ws_z) * (var_ws_n / var_uz_n)
    return ExtendedReport(labels, H, N, degenerate)


def extended_influence_exact(g: Graph, p: GibbsParams, b: Boundary = EMPTY, **kw) -> LabeledMatrix:
    return extended_matrices(g, p, b, **kw).h_matrix()


def n_matrix(g: Graph, p: GibbsParams, b: Boundary = EMPTY, **kw) -> LabeledMatrix:
    return extended_matrices(g, p, b, **kw).n_matrix()


# ---------------------------------------------------------------------------
# Random boundaries


def random_boundary(g: Graph, p: GibbsParams, rng: np.random.Generator, size: int | None = None,
                    max_tries: int = 1000) -> Boundary:
    """A seeded random (Lambda, tau) with nonempty support and at least one free vertex."""
    for _ in range(max_tries):
        k = int(rng.integers(1, g.n)) if size is None else size
        region = sorted(int(v) for v in rng.choice(g.n, size=k, replace=False))
        spins = rng.choice([-1, 1], size=k)
        b = Boundary(tuple(zip(region, (int(x) for x in spins))))
        if p.hard and any(b.assignment.get(u) == 1 and b.assignment.get(v) == 1 for u, v in g.edges):
            continue
        return b
    raise GibbsError("could not draw a boundary with nonempty support")
