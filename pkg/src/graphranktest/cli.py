"""Command line: ``graphranktest {test,simulate,reproduce}``.

Exit codes: 0 success (whether or not the null is rejected), 2 usage error,
3 input/schema error, 4 degenerate permutation variance, 5 k-MST ran out of
edges, 6 invalid simulation config.
"""

from __future__ import annotations

import argparse
import sys
from contextlib import nullcontext

from .files import (
    SCHEMA_VERSION,
    InputSchemaError,
    coerce_config,
    dump_json,
    read_config_file,
    read_distance_csv,
    read_input_table,
    truth_path,
    write_dataset_csv,
)
from .graph import DisconnectedGraphError
from .reproduce import EXPERIMENTS, run_experiment, write_results_csv
from .simulate import LmmConfig, generate
from .statistic import DegenerateVarianceError, graph_rank_test

EXIT_SCHEMA = 3
EXIT_DEGENERATE = 4
EXIT_DISCONNECTED = 5
EXIT_CONFIG = 6


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_test(args) -> int:
    precomputed = args.distance == "precomputed"
    if precomputed and not args.distances:
        return _fail(EXIT_SCHEMA, "--distance precomputed needs --distances PATH")
    try:
        labels, y, X = read_input_table(args.input, require_x=not precomputed)
        dm = read_distance_csv(args.distances) if precomputed else None
        if len(set(labels.tolist())) < 2:
            raise InputSchemaError("need at least 2 distinct clusters")
        result = graph_rank_test(
            None if precomputed else X,
            y,
            labels,
            distances=dm,
            graph=args.graph,
            k=args.k,
            method=args.method,
            B=args.B,
            seed=args.seed,
            diagnostics=not args.no_diagnostics,
        )
    except DegenerateVarianceError as exc:
        return _fail(EXIT_DEGENERATE, str(exc))
    except DisconnectedGraphError as exc:
        return _fail(EXIT_DISCONNECTED, str(exc))
    except (InputSchemaError, ValueError, OSError) as exc:
        return _fail(EXIT_SCHEMA, str(exc))

    payload = {"schema_version": SCHEMA_VERSION, **result.to_dict()}
    to_stdout = args.output in (None, "-")
    text = dump_json(payload, None if to_stdout else args.output)
    if to_stdout:
        sys.stdout.write(text)
    summary = f"Z_I = {result.Z:.4f}  p_asymptotic = {result.p_asymptotic:.4g}"
    if result.p_permutation is not None:
        summary += f"  p_permutation = {result.p_permutation:.4g} (B = {result.B})"
    summary += f"  [N = {result.n}, I = {result.I}, {args.graph} k = {args.k}]"
    print(summary, file=sys.stderr if to_stdout else sys.stdout)
    m = result.graph_meta["n_undirected_edges"]
    if m > result.n**1.5:
        print(
            f"hint: graph has {m} edges > N^1.5 = {result.n**1.5:.0f}; "
            "the normal approximation may be poor, consider a smaller k",
            file=sys.stderr,
        )
    if result.tie_warning:
        print("warning: ties in |y_j - y_i| were broken by observation index", file=sys.stderr)
    return 0


SIM_FLAGS = ("N", "p", "I", "tau2", "snr", "sigma_eps", "error_dist", "x_dist",
             "rho", "q", "nonlinear_model", "psi_offdiag")


def cmd_simulate(args) -> int:
    try:
        settings = {}
        if args.config:
            settings.update(coerce_config(read_config_file(args.config), LmmConfig))
        settings.update({f: getattr(args, f) for f in SIM_FLAGS if getattr(args, f) is not None})
        if args.scenario is not None:
            settings["scenario"] = args.scenario
        cfg = LmmConfig(**settings)
        ds = generate(cfg, args.seed)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    write_dataset_csv(args.output, ds.X, ds.y, ds.labels)
    truth = {"schema_version": SCHEMA_VERSION, "seed": args.seed, **ds.truth()}
    dump_json(truth, truth_path(args.output))
    print(f"wrote {args.output} and {truth_path(args.output)}")
    return 0


def cmd_reproduce(args) -> int:
    try:
        harness = {}
        if args.config:
            raw = read_config_file(args.config)
            for key in ("trials", "B", "k"):
                if key in raw:
                    harness[key] = int(raw.pop(key))
            if "alpha" in raw:
                harness["alpha"] = float(raw.pop("alpha"))
            if raw:
                raise ValueError(f"unknown reproduce config keys: {sorted(raw)}")
        for key in ("trials", "B", "k", "alpha"):
            if getattr(args, key) is not None:
                harness[key] = getattr(args, key)
        rec_ctx = open(args.records, "w", encoding="utf-8") if args.records else nullcontext()
        with rec_ctx as rec:
            header, rows = run_experiment(
                args.table, seed=args.seed, scale=args.scale, method=args.method,
                graph=args.graph, records=rec, **harness,
            )
    except (ValueError, OSError) as exc:
        return _fail(EXIT_CONFIG, str(exc))
    if args.output in (None, "-"):
        write_results_csv(sys.stdout, header, rows)
    else:
        with open(args.output, "w", newline="", encoding="utf-8") as fh:
            write_results_csv(fh, header, rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphranktest",
        description="Graph-based rank test for random effects in clustered data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test a cluster,y,x1..xp CSV for a random effect")
    t.add_argument("input", help="CSV with header cluster,y,x1,...,xp")
    t.add_argument("--graph", choices=("kmst", "knn"), default="kmst")
    t.add_argument("--k", type=int, default=20)
    t.add_argument("--method", choices=("asymptotic", "permutation", "both"), default="both")
    t.add_argument("--B", type=int, default=2000, help="number of permutations")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--distance", choices=("euclidean", "precomputed"), default="euclidean")
    t.add_argument("--distances", help="square CSV of distances (with --distance precomputed)")
    t.add_argument("--output", "-o", help="JSON output path (default: stdout)")
    t.add_argument("--no-diagnostics", action="store_true", help="skip the graph condition report")
    t.set_defaults(func=cmd_test)

    s = sub.add_parser("simulate", help="write a simulated dataset and its truth sidecar")
    s.add_argument("--scenario", type=int, choices=(1, 2, 3, 4), default=None)
    s.add_argument("--config", help="key = value file of LmmConfig fields")
    s.add_argument("--N", type=int)
    s.add_argument("--p", type=int)
    s.add_argument("--I", type=int)
    s.add_argument("--tau2", type=float)
    s.add_argument("--snr", type=float)
    s.add_argument("--sigma-eps", dest="sigma_eps", type=float)
    s.add_argument("--error-dist", dest="error_dist", choices=("normal", "t3"))
    s.add_argument("--x-dist", dest="x_dist", choices=("normal", "t3"))
    s.add_argument("--rho", type=float)
    s.add_argument("--q", type=int)
    s.add_argument("--nonlinear-model", dest="nonlinear_model",
                   choices=("none", "log-fixed", "logistic-mixed"))
    s.add_argument("--psi-offdiag", dest="psi_offdiag", choices=("literal", "scaled"))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", "-o", required=True)
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("reproduce", help="run a calibration or power table")
    r.add_argument("--table", choices=sorted(EXPERIMENTS), required=True)
    r.add_argument("--trials", type=int)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--scale", choices=("full", "desk"), default="full")
    r.add_argument("--method", choices=("asymptotic", "permutation", "both"))
    r.add_argument("--B", type=int)
    r.add_argument("--k", type=int)
    r.add_argument("--alpha", type=float)
    r.add_argument("--graph", choices=("kmst", "knn"), default="kmst")
    r.add_argument("--config", help="key = value file with trials, B, k, alpha")
    r.add_argument("--output", "-o", help="CSV output path (default: stdout)")
    r.add_argument("--records", help="JSON-lines file of per-trial results")
    r.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
