"""Experiment grids for the calibration and power tables."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace

from .simulate import LmmConfig, result_row, run_trials

TAU2_POWER = (0.5, 1.0, 1.5, 2.0)
TAU2_HIGH = (1.0, 1.5, 2.0, 2.5)

CSV_COLUMNS = [
    "scenario", "N", "p", "I", "tau2", "rho", "q", "method", "trials",
    "rejections", "power", "mc_se", "failed", "snr", "error_dist", "x_dist", "model",
]


@dataclass(frozen=True)
class Experiment:
    name: str
    grid: tuple
    trials: int
    method: str
    k: int = 20
    null: bool = False
    description: str = ""


def _t1(error_dist: str, x_dist: str) -> tuple:
    return tuple(
        LmmConfig(1, 500, p, I, snr=snr, error_dist=error_dist, x_dist=x_dist)
        for snr in (1.0, 4.0, 8.0)
        for I in (5, 10, 20)
        for p in (100, 500, 1000)
    )


EXPERIMENTS = {
    "t1": Experiment("t1", _t1("normal", "normal"), 500, "both", null=True,
                     description="type I error, normal errors"),
    "t2": Experiment("t2", _t1("t3", "t3"), 500, "both", null=True,
                     description="type I error, t3 errors and covariates"),
    "power1": Experiment(
        "power1",
        tuple(LmmConfig(1, 500, p, I, tau2=t, snr=5.0)
              for I in (5, 10) for p in (200, 500, 1000) for t in (0.0,) + TAU2_POWER),
        100, "permutation", description="scenario 1, iid random intercepts"),
    "power2": Experiment(
        "power2",
        tuple(LmmConfig(2, 500, 500, 5, tau2=t, snr=5.0, rho=r)
              for r in (0.2, 0.5, 0.7) for t in TAU2_HIGH),
        100, "permutation", description="scenario 2, correlated random intercepts"),
    "power3": Experiment(
        "power3",
        tuple(LmmConfig(3, 500, 500, 5, tau2=t, snr=5.0, q=q)
              for q in (5, 10, 20) for t in TAU2_HIGH),
        100, "permutation", description="scenario 3, random slopes"),
    "power4a": Experiment(
        "power4a",
        tuple(LmmConfig(4, 500, p, I, tau2=t, snr=4.0, nonlinear_model="log-fixed")
              for I in (5, 10) for p in (200, 500, 1000) for t in TAU2_POWER),
        100, "permutation", description="scenario 4, log|X beta| + Zu + e"),
    "power4b": Experiment(
        "power4b",
        tuple(LmmConfig(4, 500, p, I, tau2=t, snr=4.0, nonlinear_model="logistic-mixed")
              for I in (5, 10) for p in (200, 500, 1000) for t in TAU2_HIGH),
        100, "permutation", description="scenario 4, logistic mixed mean"),
    "fig2": Experiment(
        "fig2",
        tuple(LmmConfig(1, 200, 200, 4, tau2=t, snr=5.0) for t in (0.0, 4.0)),
        100, "asymptotic", k=1,
        description="within-cluster edge-ranks under null and alternative (use --records)"),
}


def desk_config(cfg: LmmConfig) -> LmmConfig:
    """Half the sample size, rounded down to a multiple of ``I``."""
    n = (cfg.N // 2) // cfg.I * cfg.I
    return replace(cfg, N=n)


def tolerance(exp: Experiment, trials: int) -> float:
    """Two binomial SEs: at the nominal 0.05 for null tables, worst case otherwise."""
    p = 0.05 if exp.null else 0.5
    return 2 * math.sqrt(p * (1 - p) / trials)


def run_experiment(
    name: str,
    *,
    trials: int | None = None,
    seed: int = 0,
    scale: str = "full",
    method: str | None = None,
    B: int = 2000,
    alpha: float = 0.05,
    graph: str = "kmst",
    k: int | None = None,
    records=None,
):
    """Run one table; returns ``(header_lines, rows)``.

    ``records``, if given, is a writable text stream receiving one JSON line
    per trial (including the per-cluster edge-rank vector).
    """
    exp = EXPERIMENTS[name]
    if scale not in ("full", "desk"):
        raise ValueError(f"scale must be 'full' or 'desk', got {scale!r}")
    n_trials = trials if trials is not None else exp.trials
    if scale == "desk" and trials is None:
        n_trials = math.ceil(n_trials / 2)
    grid = [desk_config(c) if scale == "desk" else c for c in exp.grid]
    method = method or exp.method
    k = k if k is not None else exp.k
    rows = []
    for g, cfg in enumerate(grid):
        res = run_trials(cfg, n_trials, alpha, method, seed, key=(g,), graph=graph, k=k, B=B)
        for rate in res.rates.values():
            rows.append(result_row(cfg, rate))
        if records is not None:
            for rec in res.records:
                line = {"table": name, "grid_index": g, "scenario": cfg.scenario, "N": cfg.N,
                        "p": cfg.p, "I": cfg.I, "tau2": cfg.tau2, "rho": cfg.rho, "q": cfg.q}
                line.update(rec)
                records.write(json.dumps(line) + "\n")
    header = [
        f"table={name} ({exp.description})",
        f"scale={scale} trials={n_trials} method={method} B={B} alpha={alpha} "
        f"graph={graph} k={k} seed={seed}",
        f"tolerance=+/-{tolerance(exp, n_trials):.3f} "
        + ("(2 binomial SE at alpha)" if exp.null else "(2 worst-case binomial SE)"),
    ]
    if scale == "desk":
        header.append("desk scale: N and trials halved; tolerances widen by about sqrt(2)")
    return header, rows


def write_results_csv(stream, header: list[str], rows: list[dict]):
    for line in header:
        stream.write(f"# {line}\n")
    w = csv.DictWriter(stream, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
