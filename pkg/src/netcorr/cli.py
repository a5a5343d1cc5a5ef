"""Command-line interface: ``netcorr test | simulate | experiment | diagnose``.

Exit codes: 0 on success, 1 for unreadable or malformed input, 2 when the
data make the requested statistic undefined.
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DegenerateDataError
from .experiments import EXPERIMENTS, QUICK, run_experiment
from .inference import TAILS, PermutationPlan, run_joincount_tests, run_moran_test, run_phi_test
from .io import ensure_dir, read_attribute, read_coordinates, read_edges, write_attributes, write_coordinates, write_edges
from .simgen import (
    CORRERR_CUTOFFS,
    SAR_CUTOFFS,
    TRANSMISSION_MARGINALS,
    categorize_by_quantiles,
    draw_labels,
    gen_correlated_error,
    gen_network,
    gen_neighbor_matrix,
    gen_sar,
    transmit_categorical,
    transmit_continuous,
    uniform_coordinates,
)
from .stats import CategoricalSample
from .weights import (
    adjacency_from_edges,
    exp_decay_weights,
    inverse_distance_weights,
    knn_weights,
    normality_diagnostics,
    weight_summary,
)
from ._seeding import derive_seed, stream

SEED_ENV = "NETCORR_SEED"
SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_IO, EXIT_DEGENERATE = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for degenerate data
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_IO, f"{self.prog}: error: {message}\n")


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


# ------------------------------------------------------------------ weights


def _add_weight_args(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("weights")
    src.add_argument("--edges", type=Path, help="edge-list file (network adjacency)")
    src.add_argument("--coords", type=Path, help="coordinate CSV (id,x,y,...)")
    kind = src.add_mutually_exclusive_group()
    kind.add_argument("--knn", type=int, metavar="K", help="k-nearest-neighbour weights from --coords")
    kind.add_argument("--idw", type=float, metavar="CAP", help="inverse-distance weights capped at CAP")
    kind.add_argument("--expdecay", type=float, metavar="Q", help="exp(-Q d/D) weights")
    src.add_argument("--symmetrize", action="store_true", help="use (W + W^T)/2")


def _build_weights(args, n: int | None):
    if (args.edges is None) == (args.coords is None):
        raise UsageError("give exactly one of --edges or --coords")
    if args.edges is not None:
        edges = read_edges(args.edges)
        if n is None:
            n = int(edges.max()) + 1 if edges.size else 0
        if edges.size and edges.max() >= n:
            raise ValueError(f"edge list refers to node {int(edges.max())} but only {n} nodes have attributes")
        W, info = adjacency_from_edges(edges, n), {"kind": "adjacency", "source": str(args.edges)}
    else:
        coords = read_coordinates(args.coords)
        if n is not None and coords.shape[0] != n:
            raise ValueError(f"{args.coords} has {coords.shape[0]} points but the attribute table has {n} nodes")
        if args.knn is not None:
            W, info = knn_weights(coords, args.knn), {"kind": "knn", "k": args.knn}
        elif args.idw is not None:
            W, info = inverse_distance_weights(coords, args.idw), {"kind": "inverse_distance", "cap": args.idw}
        elif args.expdecay is not None:
            W, info = exp_decay_weights(coords, args.expdecay), {"kind": "exp_decay", "q": args.expdecay}
        else:
            raise UsageError("--coords needs one of --knn, --idw or --expdecay")
        info["source"] = str(args.coords)
    info["symmetric_input"] = bool(W.is_symmetric)
    if args.symmetrize:
        W = W.symmetrized()
    info["symmetrized"] = bool(args.symmetrize)
    info["n"] = W.n
    info["s0"] = weight_summary(W).s0
    return W, info


# --------------------------------------------------------------------- test


def _numeric(values: list[str]):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        return None


def _resolve_type(values: list[str], stat: str | None, declared: str | None) -> str:
    nums = _numeric(values)
    if stat == "moran":
        kind = "continuous"
    elif stat in ("phi", "joincount"):
        kind = "categorical"
    elif declared is not None:
        kind = declared
    elif nums is None:
        kind = "categorical"
    elif np.all(nums == np.round(nums)):
        raise UsageError("column is integer-valued; pass --type continuous or --type categorical")
    else:
        kind = "continuous"
    if declared is not None and declared != kind:
        raise UsageError(f"--type {declared} conflicts with --stat {stat}")
    if kind == "continuous" and nums is None:
        raise ValueError("column is not numeric; a continuous statistic needs numbers")
    return kind


def _parse_proportions(text: str) -> dict:
    out = {}
    for item in text.split(","):
        if not item.strip():
            continue
        key, _, val = item.partition(":")
        out[key.strip()] = float(val)
    return out


def _categorical(values: list[str], proportions: str | None) -> CategoricalSample:
    nums = _numeric(values)
    if nums is not None and np.all(nums == np.round(nums)):
        vals = [int(v) for v in nums]
    else:
        vals = values
    if proportions is None:
        return CategoricalSample.from_values(vals)
    props = _parse_proportions(proportions)
    cats = sorted(set(vals) | {type(vals[0])(k) for k in props})
    missing = [c for c in cats if str(c) not in props]
    if missing:
        raise ValueError(f"no proportion given for categories {missing}")
    return CategoricalSample.from_values(vals, categories=cats, proportions=[props[str(c)] for c in cats])


def cmd_test(args) -> int:
    values = read_attribute(args.attr, args.col)
    kind = _resolve_type(values, args.stat, args.type)
    stat = args.stat or ("moran" if kind == "continuous" else "phi")
    W, winfo = _build_weights(args, len(values))
    seed = args.seed if args.seed is not None else _default_seed()
    plan = PermutationPlan(m=args.perms, seed=seed, tail=args.tail)
    common = dict(diagnostic_threshold=args.threshold, threads=args.threads)
    if stat == "moran":
        y = np.array([float(v) for v in values])
        results = [run_moran_test(y, W, plan, variant=args.variant, **common)]
    else:
        sample = _categorical(values, args.proportions)
        if stat == "phi":
            results = [run_phi_test(sample, W, plan, **common)]
        else:
            results = run_joincount_tests(sample, W, plan, **common)
    config = {
        "subcommand": "test",
        "stat": stat,
        "type": kind,
        "attr": str(args.attr),
        "col": args.col,
        "perms": args.perms,
        "seed": seed,
        "tail": args.tail,
        "variant": args.variant,
        "alpha": args.alpha,
        "threshold": args.threshold,
        "proportions": args.proportions,
        "format": args.format,
    }
    payload = {
        "schema_version": SCHEMA_VERSION,
        "tool": f"netcorr {__version__}",
        "config": config,
        "weights": winfo,
        "results": [r.to_dict() for r in results],
    }
    for r in payload["results"]:
        p = r["p_permutation"] if r["p_permutation"] is not None else r["p_normal"]
        r["reject"] = None if p is None else bool(p <= args.alpha)
    if args.format == "json":
        text = json.dumps(payload, indent=2) + "\n"
    else:
        text = _results_csv(payload)
    _emit(text, args.out)
    return EXIT_OK


def _results_csv(payload: dict) -> str:
    fields = ["statistic_name", "category", "n_category", "statistic", "z", "p_normal", "p_permutation", "reject",
              "n", "s0", "m_used", "seed", "tail", "skipped"]
    buf = _stdio.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in payload["results"]:
        writer.writerow({k: "" if r.get(k) is None else r.get(k) for k in fields})
    return buf.getvalue()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# ----------------------------------------------------------------- simulate


def cmd_simulate(args) -> int:
    seed = args.seed if args.seed is not None else _default_seed()
    out = ensure_dir(args.out)
    model = args.model
    echo = {"subcommand": "simulate", "model": model, "seed": seed, "n": args.n}
    if model == "sar":
        W = gen_neighbor_matrix(args.n, args.d, derive_seed(seed, 1))
        y = gen_sar(W, args.rho, derive_seed(seed, 2))
        cat = categorize_by_quantiles(y, args.cutoffs or SAR_CUTOFFS)
        write_edges(out / "graph.edges", W)
        write_attributes(out / "attributes.csv", {"y": y, "category": cat.labels})
        echo.update(d=args.d, rho=args.rho, cutoffs=list(args.cutoffs or SAR_CUTOFFS))
    elif model == "correrr":
        coords = uniform_coordinates(args.n, derive_seed(seed, 1))
        Pi = exp_decay_weights(coords, args.q) if args.q > 0 else None
        y = gen_correlated_error(Pi, derive_seed(seed, 2)) if Pi is not None else stream(derive_seed(seed, 2)).standard_normal(args.n)
        cat = categorize_by_quantiles(y, args.cutoffs or CORRERR_CUTOFFS)
        write_coordinates(out / "coords.csv", coords)
        write_attributes(out / "attributes.csv", {"y": y, "category": cat.labels})
        echo.update(q=args.q, cutoffs=list(args.cutoffs or CORRERR_CUTOFFS))
    elif model in ("transmit-cont", "transmit-cat"):
        A = gen_network(args.n, args.graph_model, derive_seed(seed, 1), k=args.k, beta=args.beta, p=args.p)
        write_edges(out / "graph.edges", A)
        echo.update(t=args.t, graph_model=args.graph_model, k=args.k, beta=args.beta, p=args.p)
        if model == "transmit-cont":
            y0 = stream(derive_seed(seed, 2)).standard_normal(args.n)
            y = transmit_continuous(y0, A, args.t, args.alpha_mix)
            write_attributes(out / "attributes.csv", {"y": y})
            echo.update(alpha_mix=args.alpha_mix)
        else:
            marg = args.marginals or list(TRANSMISSION_MARGINALS)
            labels0 = draw_labels(args.n, marg, derive_seed(seed, 2))
            labels = transmit_categorical(labels0, A, args.t, args.p_adopt, derive_seed(seed, 3))
            write_attributes(out / "attributes.csv", {"category": labels})
            echo.update(p_adopt=args.p_adopt, marginals=list(marg))
    else:  # pragma: no cover - argparse restricts choices
        raise UsageError(f"unknown model {model}")
    (out / "config.json").write_text(json.dumps(echo, indent=2, sort_keys=True) + "\n")
    print(f"wrote {model} dataset to {out}")
    return EXIT_OK


# --------------------------------------------------------------- experiment


def cmd_experiment(args) -> int:
    overrides = {}
    if args.quick:
        overrides.update(QUICK)
    for key in ("reps", "m", "n", "seed", "alpha"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if "seed" not in overrides:
        overrides["seed"] = _default_seed()
    name = args.name
    if name == "fig1":
        if args.d_values:
            overrides["d_values"] = args.d_values
        if args.rho_values:
            overrides["rho_values"] = args.rho_values
    elif name == "fig2":
        if args.q_values:
            overrides["q_values"] = args.q_values
        if args.weight_mode:
            overrides["weight_mode"] = args.weight_mode
        if args.coords is not None:
            overrides["coords"] = read_coordinates(args.coords)
    else:
        if args.t_values:
            overrides["t_values"] = args.t_values
        if name == "fig3" and args.alpha_mix is not None:
            overrides["alpha_mix"] = args.alpha_mix
        if name == "table1" and args.p_adopt is not None:
            overrides["p_adopt"] = args.p_adopt
        if args.graph_model is not None:
            overrides["graph_model"] = args.graph_model
        params = {k: getattr(args, k) for k in ("k", "beta", "p") if getattr(args, k) is not None}
        if params:
            overrides["graph_params"] = params
    report = run_experiment(name, threads=args.threads, **overrides)
    out = ensure_dir(args.out_dir)
    report.write_json(out / f"{name}.json")
    report.write_csv(out / f"{name}.csv")
    _print_summary(report)
    return EXIT_OK


def _print_summary(report) -> None:
    cols = ["setting", "coverage", "rejection_normal", "rejection_permutation", "mean_ybar"]
    present = [c for c in cols if any(c in s for s in report.settings)]
    print("\t".join(present))
    for s in report.settings:
        cells = []
        for c in present:
            v = s.get(c)
            cells.append("" if v is None else (f"{v:.4f}" if isinstance(v, float) else str(v)))
        print("\t".join(cells))


# ----------------------------------------------------------------- diagnose


def cmd_diagnose(args) -> int:
    W, winfo = _build_weights(args, None)
    diag = normality_diagnostics(W, args.threshold)
    payload = {"schema_version": SCHEMA_VERSION, "weights": winfo, "diagnostics": diag.to_dict()}
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="netcorr", description="Tests for spatial and network autocorrelation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test one variable for autocorrelation")
    t.add_argument("--attr", type=Path, required=True, help="attribute CSV with an id column")
    t.add_argument("--col", required=True, help="variable column in --attr")
    t.add_argument("--stat", choices=["moran", "phi", "joincount"])
    t.add_argument("--type", choices=["continuous", "categorical"])
    _add_weight_args(t)
    t.add_argument("--perms", type=int, default=500, help="permutation replicates (default 500)")
    t.add_argument("--seed", type=int, default=None, help=f"permutation seed (default ${SEED_ENV} or 0)")
    t.add_argument("--tail", choices=TAILS, default="upper")
    t.add_argument("--variant", choices=["randomization", "normality"], default="randomization",
                   help="null moments of Moran's I")
    t.add_argument("--proportions", help="known category proportions, e.g. 'a:0.3,b:0.7' (disables the z-test)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--threshold", type=float, default=0.1, help="ratio_max above which normality is suspect")
    t.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    t.add_argument("--format", choices=["json", "csv"], default="json")
    t.add_argument("--out", type=Path)
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="generate a dataset")
    s.add_argument("model", choices=["sar", "correrr", "transmit-cont", "transmit-cat"])
    s.add_argument("--config", type=Path, help="JSON file of option values; command-line flags take precedence")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", type=Path, default=Path("sim_out"))
    s.add_argument("--d", type=int, default=3, help="sar: mean-degree parameter")
    s.add_argument("--rho", type=float, default=0.4, help="sar: autoregressive parameter")
    s.add_argument("--q", type=float, default=50.0, help="correrr: decay parameter (0 = independent)")
    s.add_argument("--cutoffs", type=_float_list, help="quantile cutoffs for categorising")
    s.add_argument("--t", type=int, default=1, help="transmission iterations")
    s.add_argument("--alpha-mix", type=float, default=0.3)
    s.add_argument("--p-adopt", type=float, default=0.3)
    s.add_argument("--marginals", type=_float_list)
    s.add_argument("--graph-model", choices=["watts_strogatz", "erdos_renyi"], default="watts_strogatz")
    s.add_argument("--k", type=int, default=4, help="Watts-Strogatz ring degree")
    s.add_argument("--beta", type=float, default=0.1, help="Watts-Strogatz rewiring probability")
    s.add_argument("--p", type=float, default=None, help="Erdos-Renyi edge probability")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("experiment", help="run a simulation study")
    e.add_argument("name", choices=sorted(EXPERIMENTS))
    e.add_argument("--config", type=Path, help="JSON file of option values; command-line flags take precedence")
    e.add_argument("--quick", action="store_true", help=f"short profile ({QUICK['reps']} reps, {QUICK['m']} perms)")
    e.add_argument("--reps", type=int)
    e.add_argument("--perms", dest="m", type=int)
    e.add_argument("--n", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--alpha", type=float)
    e.add_argument("--d-values", type=_int_list)
    e.add_argument("--rho-values", type=_float_list)
    e.add_argument("--q-values", type=_float_list)
    e.add_argument("--weight-mode", choices=["true_pi", "estimated_w", "both"])
    e.add_argument("--coords", type=Path, help="fig2: coordinate CSV instead of synthetic locations")
    e.add_argument("--t-values", type=_int_list)
    e.add_argument("--alpha-mix", type=float)
    e.add_argument("--p-adopt", type=float)
    e.add_argument("--graph-model", choices=["watts_strogatz", "erdos_renyi"])
    e.add_argument("--k", type=int, help="Watts-Strogatz ring degree")
    e.add_argument("--beta", type=float, help="Watts-Strogatz rewiring probability")
    e.add_argument("--p", type=float, help="Erdos-Renyi edge probability")
    e.add_argument("--threads", type=int, default=None, help="worker processes (default: all cores)")
    e.add_argument("--out-dir", type=Path, default=Path("results"))
    e.set_defaults(func=cmd_experiment)

    d = sub.add_parser("diagnose", help="check the weight matrix against the normality conditions")
    _add_weight_args(d)
    d.add_argument("--threshold", type=float, default=0.1)
    d.add_argument("--out", type=Path)
    d.set_defaults(func=cmd_diagnose)
    parser.subcommands = {"test": t, "simulate": s, "experiment": e, "diagnose": d}
    return parser


def _parse(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    cfg_path = getattr(args, "config", None)
    if cfg_path is None:
        return args
    cfg = json.loads(Path(cfg_path).read_text())
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object")
    subparser = parser.subcommands[args.command]
    known = {a.dest for a in subparser._actions}
    unknown = sorted(set(k.replace("-", "_") for k in cfg) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    subparser.set_defaults(**{k.replace("-", "_"): v for k, v in cfg.items()})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _parse(parser, argv)
        return args.func(args)
    except DegenerateDataError as exc:
        print(f"netcorr: degenerate data: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"netcorr: error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
