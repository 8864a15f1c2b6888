"""Command line interface: spectra, influence, verify, glauber, potential, report, corpus."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .gibbs_exact import EMPTY, Boundary, GibbsError, GibbsParams, influence_matrix_exact
from .glauber import mixing_time_exact, spectral_gap, transition_matrix, tv_curve
from .graph_core import CONVENTIONS, DEFAULT_CONVENTION, GraphError, graph_to_text
from .harness import (CHECKS, BoundaryPlan, ConfigError, ExperimentSpec, _clean, corpus_entry, corpus_named,
                      default_threads, run)
from .influence_saw import BOUND_IDS, graph_spectra, influence_saw, verify_bound
from .spectral import (LabeledMatrix, adjacency_matrix, backtrack_bound, check_eigenvector_relations,
                       check_pt_invariance, hashimoto_matrix, planar_rho_bound)
from .tree_recursion import RecursionParamError, hc_potential_params, verify_potential


class _Fail(Exception):
    """A check ran and failed (exit code 1)."""


def _graph(arg: str):
    return corpus_entry(arg)[1]


def _model(args) -> GibbsParams:
    m = args.model
    if m == "hardcore":
        return GibbsParams.hardcore(args.lam if args.lam is not None else 1.0)
    if m == "ising":
        if args.beta is None:
            raise ConfigError("--model ising needs --beta")
        return GibbsParams.ising(args.beta)
    if None in (args.beta, args.gamma, args.lam):
        raise ConfigError("--model general needs --beta, --gamma and --lambda")
    return GibbsParams(args.beta, args.gamma, args.lam)


def _boundary(arg: str | None) -> Boundary:
    if not arg:
        return EMPTY
    text = Path(arg).read_text() if Path(arg).exists() else arg
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"boundary is not JSON: {exc}") from exc
    return Boundary.from_dict(obj.get("pins", obj))


def _matrix_json(m: LabeledMatrix) -> dict:
    return m.to_json()


# ---------------------------------------------------------------------------
# Subcommands


def cmd_spectra(args) -> dict:
    g = _graph(args.graph)
    sp = graph_spectra(g)
    out = {"n": g.n, "m": g.m, "max_degree": g.max_degree, "rho_A": sp.rho_a, "rho_H": sp.rho_h,
           "irreducible_H": sp.irreducible_h, "c_hat": sp.c_hat,
           "pt_invariance": check_pt_invariance(g, args.k_max),
           "planar_rho_bound": planar_rho_bound(g.max_degree) if g.max_degree >= 1 else None}
    if sp.irreducible_h:
        er = check_eigenvector_relations(g)
        bt = backtrack_bound(g)
        out["eigen_relations"] = {"reversal": er.reversal_violation, "continuation": er.continuation_violation}
        out["backtrack"] = {"L": bt.L, "min_slack_stated": bt.min_slack_stated,
                            "min_slack_path": bt.min_slack_path, "missing": [list(e) for e in bt.missing]}
    if args.matrices:
        out["A"] = _matrix_json(adjacency_matrix(g))
        out["H"] = _matrix_json(hashimoto_matrix(g))
    return out


def cmd_influence(args) -> dict:
    g, p, b = _graph(args.graph), _model(args), _boundary(args.boundary)
    out = {"model": p.to_json(), "boundary": b.to_json()}
    ex = sw = None
    if args.method in ("exact", "both"):
        ex = influence_matrix_exact(g, p, b)
        out["exact"] = _matrix_json(ex)
    if args.method in ("saw", "both"):
        sw = influence_saw(g, p, b, args.convention)
        out["saw"] = _matrix_json(sw)
    if ex is not None and sw is not None:
        res = float(np.max(np.abs(ex.entries - sw.entries))) if ex.entries.size else 0.0
        out["residual"] = res
        if res > args.tol:
            raise _Fail(out)
    if args.format == "csv":
        return (sw or ex).to_csv()
    return out


def cmd_verify(args) -> dict:
    g, p, b = _graph(args.graph), _model(args), _boundary(args.boundary)
    rep = verify_bound(args.bound, g, p, b, args.eps, args.weights, args.convention)
    out = rep.to_json()
    if rep.status == "fail":
        raise _Fail(out)
    return out


def cmd_glauber(args) -> dict:
    g, p, b = _graph(args.graph), _model(args), _boundary(args.boundary)
    tm = transition_matrix(g, p, b)
    out = {"model": p.to_json(), "boundary": b.to_json(), "states": tm.size,
           "detailed_balance": tm.detailed_balance_violation(), "gap": None, "second_eig": None, "tmix": None}
    if args.exact == "gap":
        gap = spectral_gap(tm)
        out.update(gap=gap.gap, second_eig=gap.second_eig)
    elif args.exact == "tmix":
        gap = spectral_gap(tm)
        out.update(gap=gap.gap, second_eig=gap.second_eig, tmix=mixing_time_exact(tm, args.threshold))
    curve = tv_curve(g, p, b, args.steps, args.chains, args.seed, args.points, tm)
    out["tv_curve"] = [[c.t, c.tv] for c in curve]
    out["tv_detail"] = [c.to_json() for c in curve]
    if args.format == "csv":
        lines = ["t,tv,exact_tv,sigma"] + [f"{c.t},{c.tv!r},{c.exact_tv!r},{c.sigma!r}" for c in curve]
        return "\n".join(lines) + "\n"
    return out


def cmd_potential(args) -> dict:
    if args.model != "hardcore":
        raise ConfigError("potential is defined for --model hardcore only")
    lam = args.lam if args.lam is not None else 1.0
    pp = hc_potential_params(lam)
    rep = verify_potential(GibbsParams.hardcore(lam), pp, args.delta_max, grid=args.grid, seed=args.seed,
                           tol=args.tol if args.tol_given else 1e-12)
    out = rep.to_json()
    if not rep.passed:
        raise _Fail(out)
    return out


def cmd_report(args):
    if args.spec:
        try:
            obj = json.loads(Path(args.spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{args.spec}: {exc}") from exc
        obj.setdefault("seed", args.seed)
        spec = ExperimentSpec.from_json(obj)
    else:
        spec = ExperimentSpec(graphs=args.graphs or ["small"], models=args.models or ["hardcore:1", "ising:0.5"],
                              boundaries=BoundaryPlan.parse(args.boundaries), checks=args.checks or [],
                              eps=args.eps or [0.2], seed=args.seed)
    rep = run(spec, args.threads)
    if args.format == "csv":
        text = rep.to_csv()
    else:
        text = rep.dumps(with_timestamp=not args.no_timestamp)
    return _Result(text, rep.exit_code)


def cmd_corpus(args):
    named = corpus_named(args.selector or ["small"])
    if args.format == "csv":
        return "name,n,m,max_degree\n" + "".join(f"\"{n}\",{g.n},{g.m},{g.max_degree}\n" for n, g in named)
    if args.text:
        return "".join(f"# {n}\n{graph_to_text(g)}\n" for n, g in named)
    return [{"name": n, **g.to_json()} for n, g in named]


class _Result:
    def __init__(self, text: str, code: int):
        self.text, self.code = text, code


# ---------------------------------------------------------------------------
# Parser


def _add_model(sp):
    sp.add_argument("--model", choices=("hardcore", "ising", "general"), default="hardcore")
    sp.add_argument("--beta", type=float)
    sp.add_argument("--gamma", type=float)
    sp.add_argument("--lambda", dest="lam", type=float)


GLOBAL_DEFAULTS = {"seed": 0, "tol": 1e-9, "threads": None, "out": None, "format": "json"}


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand; defaults are filled in main()
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--seed", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--threads", type=int, help="worker threads (default: $SPECGLAUBER_THREADS or 1)")
    common.add_argument("--out", help="write output to FILE instead of stdout")
    common.add_argument("--format", choices=("json", "csv"))

    ap = argparse.ArgumentParser(prog="specglauber", parents=[common],
                                 description="Spectral independence checks and Glauber dynamics.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("spectra", parents=[common], help="A_G and H_G spectra and diagnostics")
    sp.add_argument("--graph", required=True, help="file or corpus selector")
    sp.add_argument("--k-max", type=int, default=6)
    sp.add_argument("--matrices", action="store_true")
    sp.set_defaults(func=cmd_spectra)

    sp = sub.add_parser("influence", parents=[common], help="influence matrix by enumeration and/or SAW tree")
    sp.add_argument("--graph", required=True)
    _add_model(sp)
    sp.add_argument("--boundary", help='JSON {"pins": {"3": 1}} or a file holding it')
    sp.add_argument("--method", choices=("exact", "saw", "both"), default="both")
    sp.add_argument("--convention", choices=CONVENTIONS, default=DEFAULT_CONVENTION)
    sp.set_defaults(func=cmd_influence)

    sp = sub.add_parser("verify", parents=[common], help="check one bound or identity")
    sp.add_argument("--bound", required=True, choices=BOUND_IDS)
    sp.add_argument("--graph", required=True)
    _add_model(sp)
    sp.add_argument("--boundary")
    sp.add_argument("--eps", type=float)
    sp.add_argument("--weights", choices=("phi", "identity"), default="phi")
    sp.add_argument("--convention", choices=CONVENTIONS, default=DEFAULT_CONVENTION)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("glauber", parents=[common], help="simulate Glauber dynamics with exact diagnostics")
    sp.add_argument("--graph", required=True)
    _add_model(sp)
    sp.add_argument("--boundary")
    sp.add_argument("--steps", type=int, default=100)
    sp.add_argument("--chains", type=int, default=10000)
    sp.add_argument("--points", type=int, default=10, help="TV curve sample points")
    sp.add_argument("--exact", choices=("gap", "tmix", "none"), default="gap")
    sp.add_argument("--threshold", type=float, default=0.25)
    sp.set_defaults(func=cmd_glauber)

    sp = sub.add_parser("potential", parents=[common], help="verify the hard-core potential")
    sp.add_argument("--model", choices=("hardcore",), default="hardcore")
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--delta-max", type=int, required=True)
    sp.add_argument("--grid", type=int, default=4096)
    sp.set_defaults(func=cmd_potential)

    sp = sub.add_parser("report", parents=[common], help="run an experiment grid")
    sp.add_argument("--spec", help="JSON experiment specification")
    sp.add_argument("--graphs", nargs="*")
    sp.add_argument("--models", nargs="*", help="e.g. hardcore:1 ising:0.5 ising:uA:mid hardcore:critA")
    sp.add_argument("--checks", nargs="*", choices=CHECKS)
    sp.add_argument("--eps", nargs="*", type=float)
    sp.add_argument("--boundaries", default="exhaustive:2+random:20")
    sp.add_argument("--no-timestamp", action="store_true")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("corpus", parents=[common], help="list built-in graphs")
    sp.add_argument("selector", nargs="*", help="'small', 'all' or selectors such as grid(3,3)")
    sp.add_argument("--text", action="store_true", help="emit the graph text format")
    sp.set_defaults(func=cmd_corpus)
    return ap


def _emit(payload, args) -> None:
    if isinstance(payload, str):
        text = payload
    else:
        text = json.dumps(_clean(payload), indent=2, sort_keys=True) + "\n"
    if args.out:
        try:
            Path(args.out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"{args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.tol_given = hasattr(args, "tol")
    for name, value in GLOBAL_DEFAULTS.items():
        if not hasattr(args, name):
            setattr(args, name, value)
    try:
        if args.threads is None:
            args.threads = default_threads()
        payload = args.func(args)
        if isinstance(payload, _Result):
            _emit(payload.text if payload.text.endswith("\n") else payload.text + "\n", args)
            return payload.code
        _emit(payload, args)
        return 0
    except _Fail as exc:
        _emit(exc.args[0], args)
        return 1
    except (ConfigError, GraphError, GibbsError, RecursionParamError, OSError, ValueError) as exc:
        print(f"specglauber: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
