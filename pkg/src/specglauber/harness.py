"""Graph corpus, experiment specifications and deterministic report assembly."""

from __future__ import annotations

import itertools
import json
import math
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .gibbs_exact import (EMPTY, Boundary, EmptySupportError, GibbsError, GibbsParams,
                          influence_matrix_exact, random_boundary, symmetrize_check)
from .glauber import spectral_gap, transition_matrix
from .graph_core import Graph, GraphError, build_graph, load_graph
from .influence_saw import BOUND_IDS, graph_spectra, influence_saw, verify_bound
from .spectral import backtrack_bound, check_eigenvector_relations, check_pt_invariance
from .tree_recursion import lambda_c, u_ising


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


# ---------------------------------------------------------------------------
# Corpus


def path(n: int) -> Graph:
    return build_graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)])


def complete(n: int) -> Graph:
    return build_graph(n, itertools.combinations(range(n), 2))


def complete_bipartite(a: int, b: int) -> Graph:
    return build_graph(a + b, [(i, a + j) for i in range(a) for j in range(b)])


def grid(r: int, c: int) -> Graph:
    edges = []
    for i in range(r):
        for j in range(c):
            v = i * c + j
            if j + 1 < c:
                edges.append((v, v + 1))
            if i + 1 < r:
                edges.append((v, v + c))
    return build_graph(r * c, edges)


def star(n: int) -> Graph:
    """Centre 0 joined to n - 1 leaves (n vertices in total)."""
    return build_graph(n, [(0, i) for i in range(1, n)])


def petersen() -> Graph:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return build_graph(10, outer + spokes + inner)


def cycle_with_chord(n: int) -> Graph:
    """Cycle on n vertices plus the chord (0, 2)."""
    if n < 4:
        raise GraphError("cycle_with_chord needs n >= 4")
    return build_graph(n, [(i, (i + 1) % n) for i in range(n)] + [(0, 2)])


def random_connected(n: int, m: int, seed: int) -> Graph:
    """Uniform random attachment tree plus m - n + 1 uniformly chosen extra edges."""
    if not n - 1 <= m <= n * (n - 1) // 2:
        raise GraphError(f"random_connected({n}, {m}) needs n-1 <= m <= n(n-1)/2")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    edges = {tuple(sorted((int(order[i]), int(order[rng.integers(0, i)])))) for i in range(1, n)}
    rest = [e for e in itertools.combinations(range(n), 2) if e not in edges]
    extra = rng.choice(len(rest), size=m - len(edges), replace=False) if m > len(edges) else []
    edges |= {rest[int(k)] for k in extra}
    return build_graph(n, sorted(edges))


FAMILIES = {
    "path": path, "cycle": cycle, "complete": complete, "complete_bipartite": complete_bipartite,
    "grid": grid, "star": star, "petersen": petersen, "cycle_with_chord": cycle_with_chord,
    "random_connected": random_connected,
}

# random members of the small corpus: (n, m, seed)
SMALL_RANDOM = [(6, 7, 0), (6, 8, 1), (7, 8, 2), (7, 9, 3), (7, 10, 4),
                (8, 9, 5), (8, 10, 6), (8, 11, 7), (6, 9, 8), (8, 12, 9)]


def _small() -> list:
    sel = [f"path({n})" for n in range(3, 9)] + [f"cycle({n})" for n in range(4, 9)]
    sel += [f"complete({n})" for n in range(3, 6)] + ["complete_bipartite(2,3)", "star(5)"]
    sel += ["grid(2,3)", "grid(3,3)", "cycle_with_chord(5)", "cycle_with_chord(6)"]
    sel += [f"random_connected({n},{m},{s})" for n, m, s in SMALL_RANDOM]
    return sel


GROUPS = {
    "small": _small,
    "all": lambda: _small() + ["petersen", "complete_bipartite(3,3)", "grid(3,4)", "cycle(10)"],
}

_CALL = re.compile(r"^\s*([a-z_]+)\s*(?:\(([^)]*)\))?\s*$")
_KN = re.compile(r"^K(\d+)(?:,(\d+))?$")


def corpus_entry(selector: str) -> tuple:
    """Resolve a single selector to (name, Graph). Also accepts K4, K2,3, C5, P4 and file paths."""
    s = selector.strip()
    m = _KN.match(s.replace("_", "").replace("{", "").replace("}", ""))
    if m:
        g = complete(int(m[1])) if m[2] is None else complete_bipartite(int(m[1]), int(m[2]))
        return s, g
    m = re.match(r"^([CP])(\d+)$", s)
    if m:
        return s, (cycle if m[1] == "C" else path)(int(m[2]))
    m = _CALL.match(s)
    if m and m[1] in FAMILIES:
        try:
            args = [int(a) for a in m[2].split(",")] if m[2] and m[2].strip() else []
            g = FAMILIES[m[1]](*args)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad corpus selector {selector!r}: {exc}") from exc
        return f"{m[1]}({','.join(map(str, args))})" if args else m[1], g
    if Path(s).exists():
        try:
            return s, load_graph(s)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{s}: {exc}") from exc
    raise ConfigError(f"unknown corpus selector {selector!r}")


def corpus(selector: str | list) -> list:
    """Graphs for a selector, a group name ('small', 'all') or a list of selectors."""
    return [g for _, g in corpus_named(selector)]


def corpus_named(selector: str | list) -> list:
    if isinstance(selector, str):
        if selector in GROUPS:
            return [corpus_entry(s) for s in GROUPS[selector]()]
        selector = [selector]
    out = []
    for s in selector:
        out.extend(corpus_named(s) if s in GROUPS else [corpus_entry(s)])
    return out


# ---------------------------------------------------------------------------
# Models


def parse_model(text: str, g: Graph | None = None, eps: float | None = None) -> GibbsParams:
    """Model strings.

    ising:B, hardcore:L, general:B,G,L are literal. Graph-dependent forms:
    ising:uA:{lo,mid,hi} and ising:uH:{lo,mid,hi} pick a point of the uniqueness
    interval for rho(A) or rho(H); hardcore:critA and hardcore:critH set
    lambda = (1 - eps) lambda_c(rho).
    """
    try:
        kind, _, rest = text.partition(":")
        parts = rest.split(":")
        if kind == "ising" and len(parts) == 1:
            return GibbsParams.ising(float(parts[0]))
        if kind == "hardcore" and parts[0] not in ("critA", "critH"):
            return GibbsParams.hardcore(float(parts[0]))
        if kind == "general":
            b, c, lam = (float(x) for x in parts[0].split(","))
            return GibbsParams(b, c, lam)
    except ValueError as exc:
        raise ConfigError(f"bad model {text!r}: {exc}") from exc
    if g is None or eps is None:
        raise ConfigError(f"model {text!r} needs a graph and eps")
    spec = graph_spectra(g)
    if kind == "ising" and len(parts) == 2 and parts[0] in ("uA", "uH") and parts[1] in ("lo", "mid", "hi"):
        rho = spec.rho_a if parts[0] == "uA" else spec.theta
        if rho is None or not rho > 1:
            raise GibbsError(f"uniqueness interval undefined for rho={rho}")
        lo, hi = u_ising(rho, eps)
        beta = {"lo": lo, "hi": hi, "mid": 0.5 * (lo + hi)}[parts[1]]
        return GibbsParams.ising(beta)
    if kind == "hardcore" and parts[0] in ("critA", "critH"):
        rho = spec.rho_a if parts[0] == "critA" else spec.theta
        if rho is None or not rho > 1:
            raise GibbsError(f"critical fugacity undefined for rho={rho}")
        return GibbsParams.hardcore((1.0 - eps) * lambda_c(rho))
    raise ConfigError(f"bad model {text!r}")


# ---------------------------------------------------------------------------
# Boundaries


@dataclass(frozen=True)
class BoundaryPlan:
    exhaustive_depth: int = 0  # all Lambda with |Lambda| <= depth
    random_count: int = 0
    include_empty: bool = True

    @classmethod
    def parse(cls, text: str) -> "BoundaryPlan":
        """'none', 'random:K', 'exhaustive:D' or 'exhaustive:D+random:K'."""
        depth = count = 0
        if text not in ("", "none"):
            for part in text.split("+"):
                kind, _, val = part.partition(":")
                if kind == "random":
                    count = int(val)
                elif kind == "exhaustive":
                    depth = int(val)
                else:
                    raise ConfigError(f"bad boundary plan {text!r}")
        return cls(depth, count)


DEFAULT_BOUNDARIES = BoundaryPlan(2, 20)


def _pin_ok(g: Graph, p: GibbsParams, b: Boundary) -> bool:
    if len(b) >= g.n:
        return False
    return not (p.hard and any(b.assignment.get(u) == 1 and b.assignment.get(v) == 1 for u, v in g.edges))


def boundaries(g: Graph, p: GibbsParams, plan: BoundaryPlan, seed: int) -> list:
    out = [EMPTY] if plan.include_empty else []
    for k in range(1, plan.exhaustive_depth + 1):
        for region in itertools.combinations(range(g.n), k):
            for spins in itertools.product((-1, 1), repeat=k):
                b = Boundary(tuple(zip(region, spins)))
                if _pin_ok(g, p, b):
                    out.append(b)
    if plan.random_count:
        rng = np.random.default_rng(seed)
        out.extend(random_boundary(g, p, rng) for _ in range(plan.random_count))
    return out


# ---------------------------------------------------------------------------
# Checks

GRAPH_SUITES = ("PT_INVARIANCE", "EIGEN_RELATIONS", "BACKTRACK", "SPECTRAL_SANITY")
MODEL_SUITES = ("DETAILED_BALANCE", "GLAUBER_GAP")
INSTANCE_SUITES = ("SAW_ORACLE", "SYMMETRIZE")
CHECKS = BOUND_IDS + GRAPH_SUITES + MODEL_SUITES + INSTANCE_SUITES
EPS_BOUNDS = ("ADJ_CONTRACTION", "NB_CONTRACTION", "ADJ_POTENTIAL", "NB_POTENTIAL")

DEFAULT_TOLERANCES = {"identity": 1e-9, "symmetrize": 1e-10, "eigen": 1e-8, "slack": 1e-9,
                      "balance": 1e-12, "rho": 1e-9}


@dataclass
class ExperimentSpec:
    graphs: list = field(default_factory=lambda: ["small"])
    models: list = field(default_factory=lambda: ["hardcore:1", "ising:0.5"])
    boundaries: BoundaryPlan = DEFAULT_BOUNDARIES
    checks: list = field(default_factory=list)
    eps: list = field(default_factory=lambda: [0.2])
    seed: int = 0
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        unknown = [c for c in self.checks if c not in CHECKS]
        if unknown:
            raise ConfigError(f"unknown checks {unknown}; known: {list(CHECKS)}")
        bad = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if bad:
            raise ConfigError(f"unknown tolerance keys {sorted(bad)}")
        if isinstance(self.boundaries, str):
            self.boundaries = BoundaryPlan.parse(self.boundaries)
        if isinstance(self.boundaries, dict):
            self.boundaries = BoundaryPlan(**self.boundaries)
        self.named_graphs = corpus_named(self.graphs)

    @property
    def tol(self) -> dict:
        return {**DEFAULT_TOLERANCES, **self.tolerances}

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentSpec":
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        return {"graphs": self.graphs, "models": self.models, "checks": list(self.checks),
                "boundaries": {"exhaustive_depth": self.boundaries.exhaustive_depth,
                               "random_count": self.boundaries.random_count,
                               "include_empty": self.boundaries.include_empty},
                "eps": self.eps, "seed": self.seed, "tolerances": self.tol}


@dataclass
class Report:
    results: list
    spec: dict
    seed: int
    timestamp: float = field(default_factory=time.time)

    @property
    def summary(self) -> dict:
        out = {"pass": 0, "fail": 0, "skip": 0}
        for r in self.results:
            out[r["status"]] += 1
        return out

    @property
    def exit_code(self) -> int:
        return 1 if self.summary["fail"] else 0

    def to_json(self, with_timestamp: bool = True) -> dict:
        env = {"version": __version__, "seed": self.seed, "tolerances": self.spec["tolerances"]}
        if with_timestamp:
            env["timestamp"] = self.timestamp
        return {"environment": env, "spec": self.spec, "summary": self.summary, "results": self.results}

    def dumps(self, with_timestamp: bool = True) -> str:
        return json.dumps(_clean(self.to_json(with_timestamp)), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        cols = ["key", "check", "status", "reason", "graph", "model", "boundary", "eps", "lhs", "rhs"]
        lines = [",".join(cols)]
        for r in self.results:
            lines.append(",".join(_csv_cell(r.get(c, "")) for c in cols))
        return "\n".join(lines) + "\n"


def _csv_cell(x) -> str:
    s = "" if x is None else (repr(x) if isinstance(x, float) else str(x))
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s


def _clean(x):
    """JSON-safe copy: non-finite floats become strings, numpy scalars become Python."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _result(check, status, lhs=math.nan, rhs=math.nan, reason="", details=None) -> dict:
    return {"check": check, "status": status, "lhs": lhs, "rhs": rhs, "reason": reason,
            "details": details or {}}


def _graph_check(check: str, g: Graph, tol: dict) -> dict:
    spec = graph_spectra(g)
    if check == "PT_INVARIANCE":
        ok = check_pt_invariance(g, 6)
        return _result(check, "pass" if ok else "fail", details={"k_max": 6})
    if not spec.irreducible_h and check in ("EIGEN_RELATIONS", "BACKTRACK"):
        return _result(check, "skip", reason="reducible_hashimoto")
    if check == "EIGEN_RELATIONS":
        rep = check_eigenvector_relations(g)
        return _result(check, "pass" if rep.max_violation <= tol["eigen"] else "fail",
                       rep.max_violation, tol["eigen"])
    if check == "BACKTRACK":
        rep = backtrack_bound(g)
        ok = rep.min_slack_stated >= -tol["slack"]
        return _result(check, "pass" if ok else "fail", -rep.min_slack_stated, tol["slack"],
                       details={"min_slack_stated": rep.min_slack_stated, "min_slack_path": rep.min_slack_path})
    # SPECTRAL_SANITY
    d = g.max_degree
    rho, theta = spec.rho_a, spec.rho_h
    ok = math.sqrt(d) - tol["rho"] <= rho <= d + tol["rho"] and theta <= rho + tol["rho"]
    if g.is_regular:
        ok = ok and abs(rho - d) <= tol["rho"] and abs(theta - (d - 1)) <= tol["rho"]
    return _result(check, "pass" if ok else "fail", rho, d, details={"rho_A": rho, "rho_H": theta})


def _model_check(check: str, g: Graph, p: GibbsParams, tol: dict) -> dict:
    try:
        tm = transition_matrix(g, p)
    except GibbsError as exc:
        return _result(check, "skip", reason="state_cap", details={"error": str(exc)})
    if check == "DETAILED_BALANCE":
        v = tm.detailed_balance_violation()
        return _result(check, "pass" if v <= tol["balance"] else "fail", v, tol["balance"],
                       details={"states": tm.size})
    try:
        gap = spectral_gap(tm)
    except GibbsError as exc:
        return _result(check, "skip", reason="state_cap", details={"error": str(exc)})
    return _result(check, "pass" if gap.gap > 0 else "fail", gap.gap, 0.0,
                   details={"second_eig": gap.second_eig, "states": tm.size})


def _instance_check(check: str, g: Graph, p: GibbsParams, b: Boundary, eps, tol: dict) -> dict:
    try:
        if check == "SAW_ORACLE":
            ex = influence_matrix_exact(g, p, b).entries
            sw = influence_saw(g, p, b).entries
            err = float(np.max(np.abs(ex - sw)))
            return _result(check, "pass" if err <= tol["identity"] else "fail", err, tol["identity"])
        if check == "SYMMETRIZE":
            rep = symmetrize_check(g, p, b)
            a = rep.asymmetry  # degenerate vertices are split off before conjugation
            return _result(check, "pass" if a <= tol["symmetrize"] else "fail", a, tol["symmetrize"],
                           details={"degenerate": len(rep.degenerate)})
        br = verify_bound(check, g, p, b, eps)
    except EmptySupportError:
        return _result(check, "skip", reason="empty_support")
    return _result(check, br.status, br.lhs, br.rhs, br.reason, br.details)


def _tasks(spec: ExperimentSpec) -> list:
    """Deterministically ordered (key, thunk) list for the experiment cross-product."""
    tol = spec.tol
    tasks = []
    for gi, (gname, g) in enumerate(spec.named_graphs):
        base = {"graph": gname}
        for check in spec.checks:
            if check in GRAPH_SUITES:
                tasks.append(((gi, check), base, lambda c=check, g=g: _graph_check(c, g, tol)))
        eps_list = spec.eps or [None]
        for mi, mtext in enumerate(spec.models):
            for ei, eps in enumerate(eps_list):
                try:
                    p = parse_model(mtext, g, eps)
                except GibbsError as exc:
                    for check in spec.checks:
                        if check not in GRAPH_SUITES:
                            tasks.append(((gi, check, mi, ei), {**base, "model": mtext, "eps": eps},
                                          lambda c=check, e=str(exc): _result(c, "skip", reason="model_undefined",
                                                                              details={"error": e})))
                    continue
                minfo = {**base, "model": str(p), "eps": eps}
                for check in spec.checks:
                    if check in MODEL_SUITES and ei == 0:
                        tasks.append(((gi, check, mi), minfo, lambda c=check, g=g, p=p: _model_check(c, g, p, tol)))
                needs = [c for c in spec.checks if c in BOUND_IDS or c in INSTANCE_SUITES]
                needs = [c for c in needs if c in EPS_BOUNDS or ei == 0]
                if not needs:
                    continue
                seed = spec.seed * 1_000_003 + gi * 1009 + mi
                for bi, b in enumerate(boundaries(g, p, spec.boundaries, seed)):
                    info = {**minfo, "boundary": str(b)}
                    for check in needs:
                        e = eps if check in EPS_BOUNDS else None
                        tasks.append(((gi, check, mi, ei, bi), {**info, "eps": e},
                                      lambda c=check, g=g, p=p, b=b, e=e: _instance_check(c, g, p, b, e, tol)))
    return tasks


def default_threads() -> int:
    env = os.environ.get("SPECGLAUBER_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"SPECGLAUBER_THREADS={env!r} is not an integer") from exc
    return 1


def run(spec: ExperimentSpec, threads: int | None = None) -> Report:
    threads = default_threads() if threads is None else max(1, threads)
    tasks = _tasks(spec)

    def go(task):
        key, info, thunk = task
        return {"key": "/".join(map(str, key)), **info, **thunk()}

    if threads == 1:
        results = [go(t) for t in tasks]
    else:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(go, tasks))  # map preserves task order
    return Report(results, spec.to_json(), spec.seed)
