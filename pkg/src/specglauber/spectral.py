"""Adjacency and non-backtracking matrices, Perron eigen-data and spectral-radius bounds."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .graph_core import Graph, OrientedEdge, oriented_edges

DEFAULT_TOL = 1e-12
MAX_ITER = 1_000_000


class SpectralError(ValueError):
    pass


class ReducibleError(SpectralError):
    def __init__(self, components):
        self.components = components
        super().__init__(f"matrix is reducible: {len(components)} strongly connected components")


class ConvergenceError(SpectralError):
    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"power iteration did not converge: residual {residual:.3e} after {iterations} steps")


def _label_str(lab) -> str:
    if isinstance(lab, OrientedEdge):
        return f"{lab.tail}->{lab.head}"
    if isinstance(lab, tuple):
        return "".join(str(x) for x in lab) if all(len(str(x)) == 1 for x in lab) else ",".join(map(str, lab))
    return str(lab)


@dataclass(frozen=True)
class LabeledMatrix:
    row_labels: tuple
    col_labels: tuple
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        a = np.asarray(self.entries)
        if a.shape != (len(self.row_labels), len(self.col_labels)):
            raise SpectralError(f"entries shape {a.shape} does not match labels")
        object.__setattr__(self, "entries", a)

    @cached_property
    def row_index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.row_labels)}

    @cached_property
    def col_index(self) -> dict:
        return {lab: i for i, lab in enumerate(self.col_labels)}

    def __getitem__(self, key):
        r, c = key
        return self.entries[self.row_index[r], self.col_index[c]]

    @property
    def shape(self):
        return self.entries.shape

    def to_json(self) -> dict:
        return {
            "row_labels": [_label_str(x) for x in self.row_labels],
            "col_labels": [_label_str(x) for x in self.col_labels],
            "entries": self.entries.tolist(),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow([""] + [_label_str(x) for x in self.col_labels])
        for lab, row in zip(self.row_labels, self.entries):
            w.writerow([_label_str(lab)] + [repr(float(x)) for x in row])
        return buf.getvalue()


@dataclass(frozen=True)
class SpectralResult:
    radius: float
    right_vec: np.ndarray = field(repr=False)
    left_vec: np.ndarray = field(repr=False)
    residual: float
    iterations: int


# ---------------------------------------------------------------------------
# Matrices


def adjacency_matrix(g: Graph) -> LabeledMatrix:
    a = np.zeros((g.n, g.n))
    for u, v in g.edges:
        a[u, v] = a[v, u] = 1.0
    labels = tuple(range(g.n))
    return LabeledMatrix(labels, labels, a)


def hashimoto_matrix(g: Graph) -> LabeledMatrix:
    M = oriented_edges(g)
    idx = {e: i for i, e in enumerate(M)}
    h = np.zeros((len(M), len(M)))
    for e in M:
        for x in g.adjacency[e.head]:
            if x != e.tail:
                h[idx[e], idx[OrientedEdge(e.head, x)]] = 1.0
    return LabeledMatrix(M, M, h)


def reversal_permutation(edges: Sequence[OrientedEdge]) -> np.ndarray:
    idx = {e: i for i, e in enumerate(edges)}
    return np.array([idx[e.reverse()] for e in edges])


# ---------------------------------------------------------------------------
# Strong connectivity


def strong_components(adj: np.ndarray) -> list:
    """Tarjan's algorithm on the support digraph of a square matrix (iterative)."""
    n = adj.shape[0]
    succ = [np.flatnonzero(adj[i]).tolist() for i in range(n)]
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack, comps = [], []
    counter = 0
    for start in range(n):
        if index[start] >= 0:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack[start] = True
        while work:
            v, i = work[-1]
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                x = succ[v][i]
                if index[x] < 0:
                    index[x] = low[x] = counter
                    counter += 1
                    stack.append(x)
                    on_stack[x] = True
                    work.append((x, 0))
                elif on_stack[x]:
                    low[v] = min(low[v], index[x])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        x = stack.pop()
                        on_stack[x] = False
                        comp.append(x)
                        if x == v:
                            break
                    comps.append(sorted(comp))
    return comps


def is_irreducible(a: np.ndarray) -> bool:
    return a.shape[0] > 0 and len(strong_components(a != 0)) == 1


# ---------------------------------------------------------------------------
# Eigen-solvers


def _power(a: np.ndarray, shift: float, tol: float, max_iter: int):
    """Dominant positive eigenpair of a non-negative irreducible matrix.

    Iterates on B = (a + shift*I), periodically replacing B by a normalised B^2
    so that slowly separating spectra still converge in few steps.
    """
    n = a.shape[0]
    b = a + shift * np.eye(n)
    x = np.full(n, 1.0 / n)
    it = 0
    res = math.inf
    check_every = 32
    while it < max_iter:
        for _ in range(check_every):
            y = b @ x
            x = y / y.sum()
            it += 1
        ax = a @ x
        r = ax.sum() / x.sum()
        res = float(np.max(np.abs(ax - r * x)))
        if res <= tol:
            return float(r), x, res, it
        b = b @ b
        b /= b.max()
    raise ConvergenceError(res, it)


def perron(m: LabeledMatrix | np.ndarray, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
           shift: float | None = None) -> SpectralResult:
    a = np.asarray(m.entries if isinstance(m, LabeledMatrix) else m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise SpectralError("perron needs a square matrix")
    if np.any(a < 0):
        raise SpectralError("perron needs a non-negative matrix")
    comps = strong_components(a != 0)
    if len(comps) != 1:
        raise ReducibleError(comps)
    if shift is None:
        shift = float(a.sum(axis=1).max())
    r, right, res_r, it_r = _power(a, shift, tol, max_iter)
    _, left, res_l, it_l = _power(a.T, shift, tol, max_iter)
    return SpectralResult(r, right, left, max(res_r, res_l), it_r + it_l)


def _round_robin(n: int):
    """Pairings of a round-robin tournament on n players (n even); n-1 rounds."""
    idx = list(range(n))
    rounds = []
    for _ in range(n - 1):
        rounds.append((np.array(idx[: n // 2]), np.array(idx[n // 2:][::-1])))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = 1e-14, max_sweeps: int = 100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Rotations on disjoint index pairs commute, so each round of a round-robin
    ordering is applied as one vectorized update. Returns (eigenvalues
    ascending, eigenvectors as columns).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    m = n + (n % 2)
    if m > n:  # pad with a decoupled dummy index
        a = np.pad(a, ((0, 1), (0, 1)))
    v = np.eye(m)
    scale = max(np.abs(a).max(), 1e-300) if n else 1.0
    rounds = _round_robin(m) if m >= 2 else []
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= tol * scale:
            break
        for p, q in rounds:
            apq = a[p, q]
            live = np.abs(apq) > 1e-300
            if not live.any():
                continue
            p, q, apq = p[live], q[live], apq[live]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            big = np.abs(theta) > 1e150
            th = np.where(big, 1.0, theta)
            t = np.where(big, 0.5 / np.where(big, theta, 1.0),
                         np.sign(th) / (np.abs(th) + np.sqrt(th * th + 1.0)))
            t = np.where(theta == 0, 1.0, t)
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            ap, aq = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * ap - s * aq
            a[:, q] = s * ap + c * aq
            rp, rq = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            vp, vq = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vp - s * vq
            v[:, q] = s * vp + c * vq
    a, v = a[:n, :n], v[:n, :n]
    w = np.diag(a).copy()
    order = np.argsort(w)
    return w[order], v[:, order]


def symmetric_eigvals(a: np.ndarray, jacobi_limit: int = 160) -> np.ndarray:
    """Eigenvalues of a symmetric matrix; Jacobi up to `jacobi_limit`, LAPACK beyond."""
    a = 0.5 * (a + a.T)
    if a.shape[0] <= jacobi_limit:
        return jacobi_eigh(a)[0]
    return np.linalg.eigvalsh(a)


# ---------------------------------------------------------------------------
# Non-backtracking diagnostics


def hashimoto_irreducible(g: Graph) -> bool:
    if g.m == 0:
        return False
    return is_irreducible(hashimoto_matrix(g).entries)


def _hashimoto_perron(g: Graph, tol: float):
    h = hashimoto_matrix(g)
    if not is_irreducible(h.entries):
        raise ReducibleError(strong_components(h.entries != 0))
    return h, perron(h, tol)


def weak_normality(g: Graph, tol: float = DEFAULT_TOL) -> float:
    """c_hat = max_e psi_1(e)/kappa_1(e), both Perron vectors of H_G in unit 1-norm."""
    _, res = _hashimoto_perron(g, tol)
    return float(np.max(res.left_vec / res.right_vec))


def check_pt_invariance(g: Graph, k_max: int = 6) -> bool:
    h = hashimoto_matrix(g)
    hk = h.entries.astype(np.int64)
    base = hk.copy()
    perm = reversal_permutation(h.row_labels)
    for k in range(1, k_max + 1):
        if k > 1:
            hk = hk @ base
        if not np.array_equal(hk, hk.T[np.ix_(perm, perm)]):
            return False
    return True


@dataclass
class EigenRelationReport:
    theta: float
    reversal_violation: float  # max |kappa(e) - psi(e^-1)|
    continuation_violation: float  # max |sum_{v != w} kappa(uv) - theta kappa(wu)|
    tol: float

    @property
    def max_violation(self) -> float:
        return max(self.reversal_violation, self.continuation_violation)

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol


def check_eigenvector_relations(g: Graph, tol: float = 1e-8) -> EigenRelationReport:
    h, res = _hashimoto_perron(g, DEFAULT_TOL)
    kappa, psi = res.right_vec, res.left_vec
    edges = h.row_labels
    perm = reversal_permutation(edges)
    rev = float(np.max(np.abs(kappa - psi[perm])))
    idx = h.row_index
    cont = 0.0
    for i, e in enumerate(edges):
        w, u = e
        total = sum(kappa[idx[OrientedEdge(u, v)]] for v in g.adjacency[u] if v != w)
        cont = max(cont, abs(total - res.radius * kappa[i]))
    return EigenRelationReport(res.radius, rev, cont, tol)


@dataclass
class BacktrackEdge:
    edge: OrientedEdge
    ell: int | None  # least power with H^ell(e, e^-1) > 0, None if none within L
    ratio: float  # kappa(e^-1) / kappa(e)
    slack_stated: float | None  # theta^(ell-1) - ratio
    slack_path: float | None  # theta^ell - ratio


@dataclass
class BacktrackReport:
    theta: float
    L: int
    edges: list

    @property
    def min_slack_stated(self) -> float:
        vals = [e.slack_stated for e in self.edges if e.slack_stated is not None]
        return min(vals) if vals else math.inf

    @property
    def min_slack_path(self) -> float:
        vals = [e.slack_path for e in self.edges if e.slack_path is not None]
        return min(vals) if vals else math.inf

    @property
    def missing(self) -> list:
        return [e.edge for e in self.edges if e.ell is None]


def backtrack_bound(g: Graph, L: int | None = None) -> BacktrackReport:
    """Per-edge return lengths and the bound kappa(e^-1) <= theta^(ell-1) kappa(e).

    Both the stated exponent ell-1 and the exponent ell that a path of ell
    non-backtracking steps directly gives are reported.
    """
    h, res = _hashimoto_perron(g, DEFAULT_TOL)
    theta = res.radius
    kappa = res.right_vec
    edges = h.row_labels
    if L is None:
        L = 2 * len(edges)
    perm = reversal_permutation(edges)
    a = (h.entries > 0)
    reach = a.copy()
    least = [None] * len(edges)
    for ell in range(1, L + 1):
        for i in range(len(edges)):
            if least[i] is None and reach[i, perm[i]]:
                least[i] = ell
        if all(x is not None for x in least):
            break
        reach = (reach.astype(np.int64) @ a.astype(np.int64)) > 0
    out = []
    for i, e in enumerate(edges):
        ratio = float(kappa[perm[i]] / kappa[i])
        ell = least[i]
        if ell is None:
            out.append(BacktrackEdge(e, None, ratio, None, None))
        else:
            out.append(BacktrackEdge(e, ell, ratio, theta ** (ell - 1) - ratio, theta ** ell - ratio))
    return BacktrackReport(theta, L, out)


# ---------------------------------------------------------------------------
# Closed-form bounds


def planar_rho_bound(delta: int) -> float:
    """Spectral-radius bound for planar graphs of maximum degree delta.

    The large-degree case uses sqrt(8*delta - 16) + 2*sqrt(3).
    """
    if delta < 1:
        raise SpectralError("delta must be at least 1")
    if delta <= 5:
        return float(delta)
    if delta <= 36:
        return math.sqrt(12 * delta - 36)
    return math.sqrt(8 * delta - 16) + 2 * math.sqrt(3)


def genus_offset(genus: int) -> int:
    if genus <= 1:
        return 10
    if genus <= 3:
        return 12
    if genus <= 5:
        return 2 * genus + 6
    return 2 * genus + 4


def genus_rho_bound(delta: int, genus: int) -> float | None:
    d = genus_offset(genus)
    if delta < d + 2:
        return None
    return math.sqrt(8 * (delta - d)) + d


def spectral_radius(a: np.ndarray) -> float:
    """Spectral radius of a non-negative matrix: largest Perron root over strong components."""
    a = np.asarray(a, dtype=float)
    best = 0.0
    for comp in strong_components(a):
        idx = np.asarray(comp)
        sub = a[np.ix_(idx, idx)]
        if len(idx) == 1:
            best = max(best, float(sub[0, 0]))
        else:
            best = max(best, perron(sub).radius)
    return best
