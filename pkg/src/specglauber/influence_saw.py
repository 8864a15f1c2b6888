"""Influences through trees of self-avoiding walks, the walk-count matrices and bound checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .gibbs_exact import (EMPTY, Boundary, GibbsParams, enumerate_gibbs, extended_matrices,
                          influence_matrix_exact, marginal_boundedness, split_labels,
                          symmetrized_spectrum)
from .graph_core import DEFAULT_CONVENTION, Graph, OrientedEdge, SawTree, oriented_edges, saw_tree
from .spectral import (LabeledMatrix, adjacency_matrix, hashimoto_matrix,
                       is_irreducible, perron, spectral_radius,
                       symmetric_eigvals)
from .tree_recursion import (_log_factor, delta_contraction_sup, h_deriv, hc_potential_params,
                             potential_premise_check, verify_potential)

INF = math.inf
IDENTITY_TOL = 1e-9
INEQ_RTOL = 1e-7


# ---------------------------------------------------------------------------
# Boundary preprocessing


def effective_boundary(g: Graph, p: GibbsParams, b: Boundary) -> Boundary:
    """With hard constraints (beta = 0) every neighbour of a vertex pinned +1 is forced to -1.

    Pinning those neighbours explicitly is equivalent and keeps infinite
    log-ratios out of the dynamic program.
    """
    if p.beta > 0:
        return b
    pins = b.assignment
    forced = {}
    for v, x in pins.items():
        if x == 1:
            for u in g.adjacency[v]:
                if u not in pins:
                    forced[u] = -1
    return b.extend(forced) if forced else b


@lru_cache(maxsize=8192)
def _tree(g: Graph, w: int, b: Boundary, convention: str) -> SawTree:
    return saw_tree(g, w, b, convention)


# ---------------------------------------------------------------------------
# Weights


@dataclass
class SawWeights:
    tree: SawTree
    log_ratio: np.ndarray = field(repr=False)  # per node, extended real
    edge_weight: np.ndarray = field(repr=False)  # weight of the edge parent -> node; 0 at the root
    path_product: np.ndarray = field(repr=False)  # product of weights from the root

    @property
    def edge_weights(self) -> dict:
        par = self.tree.arrays["parent"]
        return {(int(par[i]), i): float(self.edge_weight[i]) for i in range(1, len(par))}

    @property
    def root_marginal(self) -> float:
        """P(root = +1) under the tree distribution, equal to the graph marginal."""
        y = self.log_ratio[self.tree.root]
        if y == INF:
            return 1.0
        if y == -INF:
            return 0.0
        return 1.0 / (1.0 + math.exp(-y))


def saw_weights(tree: SawTree, p: GibbsParams) -> SawWeights:
    arr = tree.arrays
    parent, fixed, levels = arr["parent"], arr["fixed"], arr["levels"]
    k = len(parent)
    acc = np.full(k, math.log(p.lam))
    logr = np.empty(k)
    for nodes in reversed(levels):
        fx = fixed[nodes]
        logr[nodes] = np.where(fx == 1, INF, np.where(fx == -1, -INF, acc[nodes]))
        if nodes[0] != tree.root:
            np.add.at(acc, parent[nodes], _log_factor(logr[nodes], p))
    weight = np.zeros(k)
    free_edge = (parent >= 0) & (fixed == 0)
    free_edge[free_edge] &= fixed[parent[free_edge]] == 0
    weight[free_edge] = h_deriv(logr[free_edge], p)
    prod = np.zeros(k)
    prod[tree.root] = 1.0
    for nodes in levels[1:]:
        prod[nodes] = prod[parent[nodes]] * weight[nodes]
    return SawWeights(tree, logr, weight, prod)


def _root_data(g: Graph, p: GibbsParams, b: Boundary, convention: str):
    """Per free vertex: (tree, weights) under the effective boundary, or None if forced."""
    eff = effective_boundary(g, p, b)
    out = {}
    for w in range(g.n):
        if w in b:
            continue
        if w in eff:
            out[w] = None
            continue
        t = _tree(g, w, eff, convention)
        out[w] = (t, saw_weights(t, p))
    return out


def influence_saw(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> LabeledMatrix:
    """Influence matrix as sums of weighted root-to-copy paths in the SAW trees."""
    free = [v for v in range(g.n) if v not in b]
    pos = np.full(g.n, -1)
    pos[free] = np.arange(len(free))
    m = np.zeros((len(free), len(free)))
    for w, data in _root_data(g, p, b, convention).items():
        i = pos[w]
        if data is None:
            m[i, i] = 1.0
            continue
        t, sw = data
        row = np.bincount(t.arrays["vertex"], weights=sw.path_product, minlength=g.n)
        m[i] = row[free]
    return LabeledMatrix(free, free, m)


def saw_marginals(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> np.ndarray:
    """P(v = +1) for free vertices from the root log-ratios."""
    out = []
    for w, data in _root_data(g, p, b, convention).items():
        out.append(0.0 if data is None else data[1].root_marginal)
    return np.array(out)


# ---------------------------------------------------------------------------
# Oriented-edge matrices


def m_lambda(g: Graph, b: Boundary) -> list:
    return [e for e in oriented_edges(g) if e.tail not in b and e.head not in b]


def s_ell_matrices(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> dict:
    """{ell: S_ell} on M_Lambda, for 1 <= ell <= n-1."""
    labels = m_lambda(g, b)
    pos = {e: i for i, e in enumerate(labels)}
    out = {ell: np.zeros((len(labels), len(labels))) for ell in range(1, max(g.n, 2))}
    for w, data in _root_data(g, p, b, convention).items():
        if data is None:
            continue
        t, sw = data
        arr = t.arrays
        for node in np.flatnonzero(arr["saw"] & (arr["depth"] >= 1)):
            ws = OrientedEdge(w, int(arr["first"][node]))
            uz = OrientedEdge(int(arr["vertex"][node]), int(arr["parent_vertex"][node]))
            if ws in pos and uz in pos:
                out[int(arr["depth"][node])][pos[ws], pos[uz]] += sw.path_product[node]
    return {ell: LabeledMatrix(labels, labels, mat) for ell, mat in out.items()}


def s_ell_matrix(g: Graph, p: GibbsParams, b: Boundary, ell: int, convention: str = DEFAULT_CONVENTION) -> LabeledMatrix:
    mats = s_ell_matrices(g, p, b, convention)
    if ell in mats:
        return mats[ell]
    labels = m_lambda(g, b)
    return LabeledMatrix(labels, labels, np.zeros((len(labels), len(labels))))


def j_matrix(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> LabeledMatrix:
    """Sum over all copies of uz in T(ws) of the root-to-copy path weight."""
    labels = m_lambda(g, b)
    pos = {e: i for i, e in enumerate(labels)}
    mat = np.zeros((len(labels), len(labels)))
    for w, data in _root_data(g, p, b, convention).items():
        if data is None:
            continue
        t, sw = data
        arr = t.arrays
        for node in np.flatnonzero(arr["depth"] >= 1):
            u = int(arr["vertex"][node])
            if u == w:
                continue
            ws = OrientedEdge(w, int(arr["first"][node]))
            uz = OrientedEdge(u, int(arr["parent_vertex"][node]))
            if ws in pos and uz in pos:
                mat[pos[ws], pos[uz]] += sw.path_product[node]
    return LabeledMatrix(labels, labels, mat)


@lru_cache(maxsize=1024)
def walk_counts(g: Graph, region: frozenset) -> tuple:
    """|C(uz, ell)| for all ws, uz in M_Lambda: self-avoiding walks w,s,...,z,u of length ell
    that avoid Lambda. Returns (labels, counts[ell, ws, uz]) with ell = 0..n-1."""
    labels = [e for e in oriented_edges(g) if e.tail not in region and e.head not in region]
    pos = {e: i for i, e in enumerate(labels)}
    counts = np.zeros((max(g.n, 2), len(labels), len(labels)), dtype=np.int64)
    b = Boundary(tuple((v, -1) for v in sorted(region)))
    for w in range(g.n):
        if w in region:
            continue
        t = _tree(g, w, b, DEFAULT_CONVENTION)
        arr = t.arrays
        sel = np.flatnonzero(arr["saw"] & (arr["fixed"] == 0) & (arr["depth"] >= 1))
        for node in sel:
            ws = OrientedEdge(w, int(arr["first"][node]))
            uz = OrientedEdge(int(arr["vertex"][node]), int(arr["parent_vertex"][node]))
            counts[int(arr["depth"][node]), pos[ws], pos[uz]] += 1
    return labels, counts


def e_matrix(g: Graph, b: Boundary, delta: float, ell: int) -> LabeledMatrix:
    labels, counts = walk_counts(g, b.region)
    if not 1 <= ell < counts.shape[0]:
        mat = np.zeros((len(labels), len(labels)))
    else:
        mat = counts[ell] * delta ** ell
    return LabeledMatrix(labels, labels, mat)


def kc_matrices(g: Graph, b: Boundary = EMPTY, labels: list | None = None):
    """K(r, vx) = 1{r = v} and C(vx, r) = 1{v = r} for the given pair labels (default M_Lambda)."""
    free = [v for v in range(g.n) if v not in b]
    if labels is None:
        labels = m_lambda(g, b)
    fpos = {v: i for i, v in enumerate(free)}
    K = np.zeros((len(free), len(labels)))
    for j, lab in enumerate(labels):
        K[fpos[lab[0]], j] = 1.0
    return LabeledMatrix(free, labels, K), LabeledMatrix(labels, free, K.T.copy())


def weighted_inf_norm(x: LabeledMatrix | np.ndarray, d) -> float:
    """max_i sum_j |x_ij| d_j / d_i, the infinity norm of D^-1 X D."""
    a = np.asarray(x.entries if isinstance(x, LabeledMatrix) else x, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("weights must be strictly positive")
    return float(np.max(np.sum(np.abs(a) * d[None, :], axis=1) / d)) if a.size else 0.0


# ---------------------------------------------------------------------------
# Spectral quantities of a graph (cached)


@dataclass(frozen=True)
class GraphSpectra:
    rho_a: float
    theta: float | None
    c_hat: float | None
    kappa: dict | None  # right Perron vector of H_G by oriented edge
    irreducible_h: bool
    rho_h: float = 0.0  # spectral radius of H_G, defined also when reducible


@lru_cache(maxsize=1024)
def graph_spectra(g: Graph) -> GraphSpectra:
    rho = perron(adjacency_matrix(g)).radius if g.n > 1 else 0.0
    h = hashimoto_matrix(g)
    if g.m and is_irreducible(h.entries):
        res = perron(h)
        kappa = dict(zip(h.row_labels, res.right_vec))
        return GraphSpectra(rho, res.radius, float(np.max(res.left_vec / res.right_vec)), kappa, True,
                            res.radius)
    return GraphSpectra(rho, None, None, None, False, spectral_radius(h.entries) if g.m else 0.0)


def influence_radius(g: Graph, p: GibbsParams, b: Boundary = EMPTY, method: str = "exact",
                     convention: str = DEFAULT_CONVENTION) -> float:
    """Spectral radius of the influence matrix via the symmetrized form."""
    if method == "exact":
        en = enumerate_gibbs(g, p, b)
        free = [int(v) for v in en.free]
        infl = influence_matrix_exact(g, p, b).entries
        marg = en.marginals()[free]
    else:
        infl = influence_saw(g, p, b, convention).entries
        marg = saw_marginals(g, p, b, convention)
    _, eig, _ = symmetrized_spectrum(infl, marg)
    return float(np.max(np.abs(eig))) if len(eig) else 0.0


def operator_norm(a: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return math.sqrt(max(float(np.max(symmetric_eigvals(a.T @ a))), 0.0))


# ---------------------------------------------------------------------------
# Bound verification

BOUND_IDS = (
    "ADJ_CONTRACTION",   # rho(I) <= 1/eps under (1-eps)/rho(A) contraction
    "NB_CONTRACTION",    # rho(I) <= 1 + c_hat Delta / eps under (1-eps)/theta contraction
    "ADJ_POTENTIAL",     # hard-core potential bound in terms of rho(A)
    "NB_POTENTIAL",      # hard-core potential bound in terms of theta and c_hat
    "EDGE_NORM",         # ||I||_2 <= 1 + Delta sum_ell ||D^-1 E D||_inf
    "SAW_IDENTITY",      # I = Id + K J C
    "SPLIT_IDENTITY",    # I = Id + K (H o N) C
)


@dataclass
class BoundReport:
    bound_id: str
    lhs: float
    rhs: float
    status: str  # "pass" | "fail" | "skip"
    instance_echo: str
    reason: str = ""
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_json(self) -> dict:
        return {"bound_id": self.bound_id, "lhs": self.lhs, "rhs": self.rhs, "status": self.status,
                "pass": self.status == "pass", "instance": self.instance_echo, "reason": self.reason,
                "details": self.details}


def _echo(g: Graph, p: GibbsParams, b: Boundary, eps) -> str:
    return f"n={g.n} m={g.m} edges={list(g.edges)} {p} boundary={b} eps={eps}"


def _ineq(bound_id, lhs, rhs, echo, details) -> BoundReport:
    ok = lhs <= rhs * (1.0 + INEQ_RTOL) + 1e-12
    return BoundReport(bound_id, float(lhs), float(rhs), "pass" if ok else "fail", echo, "", details)


def _skip(bound_id, echo, reason, details=None) -> BoundReport:
    return BoundReport(bound_id, math.nan, math.nan, "skip", echo, reason, details or {})


def _contraction_ok(p: GibbsParams, g: Graph, delta: float) -> tuple:
    sup = delta_contraction_sup(p, g.max_degree)
    return sup <= delta * (1.0 + 1e-9) + 1e-15, sup


@lru_cache(maxsize=256)
def _potential(lam: float, max_degree: int):
    pp = hc_potential_params(lam)
    rep = verify_potential(GibbsParams.hardcore(lam), pp, max_degree, spot_checks=2000)
    return pp, rep


def saw_identity_residual(g: Graph, p: GibbsParams, b: Boundary = EMPTY, convention: str = DEFAULT_CONVENTION) -> float:
    exact = influence_matrix_exact(g, p, b).entries
    K, C = kc_matrices(g, b)
    J = j_matrix(g, p, b, convention).entries
    recon = np.eye(len(exact)) + K.entries @ J @ C.entries
    return float(np.max(np.abs(exact - recon))) if exact.size else 0.0


def split_identity_residual(g: Graph, p: GibbsParams, b: Boundary = EMPTY, **kw) -> tuple:
    exact = influence_matrix_exact(g, p, b).entries
    # vertices forced to -1 by hard constraints have unit rows in I; splitting them would
    # release the constraint on the detached copies, so they are pinned before extending
    eff = effective_boundary(g, p, b)
    ext = extended_matrices(g, p, eff, **kw)
    K, C = kc_matrices(g, b, split_labels(g, eff))
    recon = np.eye(len(exact)) + K.entries @ (ext.H * ext.N) @ C.entries
    res = float(np.max(np.abs(exact - recon))) if exact.size else 0.0
    return res, ext


def verify_bound(bound_id: str, g: Graph, p: GibbsParams, b: Boundary = EMPTY, eps: float | None = None,
                 weights: str = "phi", convention: str = DEFAULT_CONVENTION) -> BoundReport:
    if bound_id not in BOUND_IDS:
        raise ValueError(f"unknown bound id {bound_id!r}")
    echo = _echo(g, p, b, eps)
    spec = graph_spectra(g)
    Delta = g.max_degree

    if bound_id == "SAW_IDENTITY":
        r = saw_identity_residual(g, p, b, convention)
        return BoundReport(bound_id, r, IDENTITY_TOL, "pass" if r <= IDENTITY_TOL else "fail", echo)

    if bound_id == "SPLIT_IDENTITY":
        r, ext = split_identity_residual(g, p, b)
        return BoundReport(bound_id, r, IDENTITY_TOL, "pass" if r <= IDENTITY_TOL else "fail", echo,
                           details={"degenerate_entries": len(ext.degenerate)})

    if bound_id == "EDGE_NORM":
        delta = delta_contraction_sup(p, Delta)
        labels, counts = walk_counts(g, b.region)
        if weights == "phi" and spec.irreducible_h:
            d = np.array([spec.kappa[e.reverse()] for e in labels])
        else:
            d = np.ones(len(labels))
        total = sum(weighted_inf_norm(counts[ell] * delta ** ell, d) for ell in range(1, counts.shape[0]))
        lhs = operator_norm(influence_matrix_exact(g, p, b).entries)
        used = "phi" if (weights == "phi" and spec.irreducible_h) else "identity"
        return _ineq(bound_id, lhs, 1.0 + Delta * total, echo, {"delta": delta, "weights": used})

    if eps is None or not 0 < eps < 1:
        raise ValueError(f"{bound_id} needs eps in (0, 1)")

    if bound_id == "ADJ_CONTRACTION":
        rho = spec.rho_a
        if rho < 1:
            return _skip(bound_id, echo, "rho_below_one")
        delta = (1.0 - eps) / rho
        ok, sup = _contraction_ok(p, g, delta)
        if not ok:
            return _skip(bound_id, echo, "contraction_premise", {"sup_h": sup, "delta": delta})
        lhs = influence_radius(g, p, b)
        return _ineq(bound_id, lhs, 1.0 / eps, echo, {"rho_A": rho, "delta": delta, "sup_h": sup})

    if bound_id == "NB_CONTRACTION":
        if not spec.irreducible_h:
            return _skip(bound_id, echo, "reducible_hashimoto")
        theta = spec.theta
        if theta < 1:
            return _skip(bound_id, echo, "theta_below_one")
        delta = (1.0 - eps) / theta
        ok, sup = _contraction_ok(p, g, delta)
        if not ok:
            return _skip(bound_id, echo, "contraction_premise", {"sup_h": sup, "delta": delta})
        lhs = influence_radius(g, p, b)
        rhs = 1.0 + spec.c_hat * Delta / eps
        return _ineq(bound_id, lhs, rhs, echo, {"theta": theta, "c_hat": spec.c_hat, "delta": delta})

    # potential-based bounds: hard-core only
    if not (p.beta == 0.0 and p.gamma == 1.0):
        return _skip(bound_id, echo, "not_hardcore")
    if Delta < 2:
        return _skip(bound_id, echo, "max_degree_below_two")
    pp, prep = _potential(p.lam, Delta)
    if not prep.passed:
        return _skip(bound_id, echo, "potential_premise", {"witness": prep.witness})
    s = pp.s
    if bound_id == "ADJ_POTENTIAL":
        rho = spec.rho_a
        # the potential with delta0 is an (s, (1-e)/rho, zeta/rho)-potential for the
        # largest admissible e; the resulting right side is the tightest available
        e_eff = 1.0 - rho * pp.delta
        if not (rho > 1 and 0 < e_eff < 1):
            prem = potential_premise_check(p.lam, rho, 0.0, Delta) if rho > 0 else None
            return _skip(bound_id, echo, "potential_premise",
                         {"rho_A": rho, "delta0": pp.delta, "witness": prem.witness if prem else None})
        zeta = pp.c * rho
        rhs = 1.0 + zeta / (1.0 - (1.0 - e_eff) ** s) * (Delta / rho) ** (1.0 - 1.0 / s)
        lhs = influence_radius(g, p, b)
        return _ineq(bound_id, lhs, rhs, echo,
                     {"rho_A": rho, "s0": s, "delta0": pp.delta, "c0": pp.c, "eps_eff": e_eff, "zeta": zeta})

    # NB_POTENTIAL
    if not spec.irreducible_h:
        return _skip(bound_id, echo, "reducible_hashimoto")
    theta = spec.theta
    e_eff = 1.0 - theta * pp.delta
    if not (theta > 1 and 0 < e_eff < 1):
        return _skip(bound_id, echo, "potential_premise", {"theta": theta, "delta0": pp.delta})
    zeta = pp.c * theta
    bmin = marginal_boundedness(g, p)
    rhs = 1.0 + bmin ** -6 * zeta * spec.c_hat / (1.0 - (1.0 - e_eff) ** (1.0 / s)) * Delta / theta
    lhs = influence_radius(g, p, b)
    return _ineq(bound_id, lhs, rhs, echo,
                 {"theta": theta, "c_hat": spec.c_hat, "b": bmin, "s0": s, "eps_eff": e_eff, "zeta": zeta})

