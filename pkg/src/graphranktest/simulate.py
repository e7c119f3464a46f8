"""Clustered data generators and Monte Carlo calibration/power harness.

Four data-generating scenarios on a balanced one-way design:

1. linear mixed model with iid random intercepts, ``u ~ N(0, tau2 I)``;
2. correlated random intercepts, ``u ~ N(0, Psi)`` with Toeplitz ``Psi``;
3. random intercepts plus random slopes on the first ``q`` covariates;
4. non-linear models, ``log|X beta| + Zu + e`` or a logistic mixed mean.

Every generator is a pure function of ``(config, seed)``; ``seed`` may be an
int or a sequence of ints (``(seed, trial)`` keys independent trials).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import expit

from .graph import DisconnectedGraphError
from .statistic import DegenerateVarianceError, graph_rank_test

ERROR_DISTS = ("normal", "t3")
X_DISTS = ("normal", "t3")
NONLINEAR_MODELS = ("none", "log-fixed", "logistic-mixed")
PSI_OFFDIAG = ("literal", "scaled")


@dataclass(frozen=True)
class LmmConfig:
    """Simulation settings.

    ``psi_offdiag`` chooses the off-diagonal of the random-effect covariance:
    ``"literal"`` uses ``rho**|i-j|``, ``"scaled"`` uses ``tau2 * rho**|i-j|``.
    ``error_dist="t3"`` draws t(3) errors rescaled to variance ``sigma_eps**2``.
    """

    scenario: int = 1
    N: int = 500
    p: int = 100
    I: int = 5
    tau2: float = 0.0
    snr: float = 1.0
    sigma_eps: float = 1.0
    error_dist: str = "normal"
    x_dist: str = "normal"
    rho: float = 0.0
    q: int = 0
    nonlinear_model: str = "none"
    psi_offdiag: str = "literal"
    beta: tuple | None = None

    def __post_init__(self):
        if self.scenario not in (1, 2, 3, 4):
            raise ValueError(f"scenario must be 1-4, got {self.scenario}")
        if self.N < 4 or self.p < 1 or self.I < 1:
            raise ValueError(f"need N >= 4, p >= 1, I >= 1 (got N={self.N}, p={self.p}, I={self.I})")
        if self.N % self.I:
            raise ValueError(f"balanced design needs N divisible by I (N={self.N}, I={self.I})")
        if self.tau2 < 0 or self.snr < 0:
            raise ValueError("tau2 and snr must be nonnegative")
        if self.sigma_eps <= 0:
            raise ValueError("sigma_eps must be positive")
        if not 0 <= self.rho < 1:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if self.q < 0:
            raise ValueError("q must be nonnegative")
        if self.error_dist not in ERROR_DISTS:
            raise ValueError(f"error_dist must be one of {ERROR_DISTS}")
        if self.x_dist not in X_DISTS:
            raise ValueError(f"x_dist must be one of {X_DISTS}")
        if self.nonlinear_model not in NONLINEAR_MODELS:
            raise ValueError(f"nonlinear_model must be one of {NONLINEAR_MODELS}")
        if self.psi_offdiag not in PSI_OFFDIAG:
            raise ValueError(f"psi_offdiag must be one of {PSI_OFFDIAG}")
        if self.scenario == 4 and self.nonlinear_model == "none":
            raise ValueError("scenario 4 needs nonlinear_model 'log-fixed' or 'logistic-mixed'")
        if self.scenario != 4 and self.nonlinear_model != "none":
            raise ValueError("nonlinear_model is only used by scenario 4")
        if self.scenario == 3 and self.q >= self.p:
            raise ValueError(f"q = {self.q} random slopes need q < p = {self.p}")
        if self.beta is not None and len(self.beta) != self.p:
            raise ValueError(f"fixed beta has length {len(self.beta)}, expected p = {self.p}")

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["beta"] is not None:
            d["beta"] = list(d["beta"])
        return d


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    labels: np.ndarray
    config: LmmConfig
    u: np.ndarray
    beta: np.ndarray
    psi: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def truth(self) -> dict:
        out = {"config": self.config.to_dict(), "u": self.u.tolist(), "beta": self.beta.tolist()}
        if self.psi is not None:
            out["psi"] = self.psi.tolist()
        out.update(self.extra)
        return out


def scale_beta_to_snr(raw_beta, snr: float, sigma_eps: float = 1.0) -> np.ndarray:
    """Rescale ``raw_beta`` so that ``beta @ beta / sigma_eps**2 == snr``."""
    raw = np.asarray(raw_beta, dtype=float)
    if snr == 0:
        return np.zeros_like(raw)
    norm2 = raw @ raw
    if norm2 == 0:
        raise ValueError("cannot rescale an all-zero beta to a positive SNR")
    return raw * math.sqrt(snr * sigma_eps**2 / norm2)


def toeplitz_psi(dim: int, tau2: float, rho: float, offdiag: str = "literal") -> np.ndarray:
    """Random-effect covariance: ``tau2`` on the diagonal, ``rho**|i-j|`` off it."""
    lag = np.abs(np.subtract.outer(np.arange(dim), np.arange(dim)))
    psi = rho**lag.astype(float)
    if offdiag == "scaled":
        psi = tau2 * psi
    np.fill_diagonal(psi, tau2)
    return psi


def _psi_factor(psi: np.ndarray, tau2: float, rho: float) -> np.ndarray:
    if not psi.any():
        return np.zeros_like(psi)
    try:
        return np.linalg.cholesky(psi)
    except np.linalg.LinAlgError:
        raise ValueError(
            f"random-effect covariance is not positive definite for (tau2, rho) = ({tau2}, {rho})"
        ) from None


def balanced_labels(N: int, I: int) -> np.ndarray:
    return np.repeat(np.arange(I), N // I)


def design_matrix(X, labels, q: int = 0) -> np.ndarray:
    """Block-diagonal random-effect design ``N x I(q+1)``.

    Cluster ``s`` gets columns ``[1 | X[:, :q]]`` restricted to its rows.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    n_clusters = int(labels.max()) + 1
    block = np.column_stack([np.ones(len(X)), X[:, :q]])
    Z = np.zeros((len(X), n_clusters * (q + 1)))
    for s in range(n_clusters):
        rows = labels == s
        Z[rows, s * (q + 1) : (s + 1) * (q + 1)] = block[rows]
    return Z


def _draw_x(cfg: LmmConfig, rng) -> np.ndarray:
    if cfg.x_dist == "t3":
        return rng.standard_t(3, size=(cfg.N, cfg.p))
    return rng.standard_normal((cfg.N, cfg.p))


def _draw_beta(cfg: LmmConfig, rng) -> np.ndarray:
    if cfg.beta is not None:
        return np.asarray(cfg.beta, dtype=float)
    return scale_beta_to_snr(rng.uniform(-1.0, 1.0, cfg.p), cfg.snr, cfg.sigma_eps)


def _draw_errors(cfg: LmmConfig, rng) -> np.ndarray:
    if cfg.error_dist == "t3":
        # t(3) has variance 3
        return cfg.sigma_eps * rng.standard_t(3, size=cfg.N) / math.sqrt(3.0)
    return cfg.sigma_eps * rng.standard_normal(cfg.N)


def gen_scenario1(cfg: LmmConfig, seed) -> Dataset:
    """Linear mixed model with iid random intercepts."""
    rng = np.random.default_rng(seed)
    X = _draw_x(cfg, rng)
    beta = _draw_beta(cfg, rng)
    u = math.sqrt(cfg.tau2) * rng.standard_normal(cfg.I)
    eps = _draw_errors(cfg, rng)
    labels = balanced_labels(cfg.N, cfg.I)
    y = X @ beta + u[labels] + eps
    return Dataset(X, y, labels, cfg, u, beta)


def gen_scenario2(cfg: LmmConfig, seed) -> Dataset:
    """Random intercepts correlated across clusters (Toeplitz in cluster index)."""
    psi = toeplitz_psi(cfg.I, cfg.tau2, cfg.rho, cfg.psi_offdiag)
    L = _psi_factor(psi, cfg.tau2, cfg.rho)
    rng = np.random.default_rng(seed)
    X = _draw_x(cfg, rng)
    beta = _draw_beta(cfg, rng)
    u = L @ rng.standard_normal(cfg.I)
    eps = _draw_errors(cfg, rng)
    labels = balanced_labels(cfg.N, cfg.I)
    y = X @ beta + u[labels] + eps
    return Dataset(X, y, labels, cfg, u, beta, psi=psi)


def gen_scenario3(cfg: LmmConfig, seed) -> Dataset:
    """Per-cluster random intercept and random slopes on the first ``q`` columns."""
    dim = cfg.q + 1
    psi = toeplitz_psi(dim, cfg.tau2, cfg.rho, cfg.psi_offdiag)
    L = _psi_factor(psi, cfg.tau2, cfg.rho)
    rng = np.random.default_rng(seed)
    X = _draw_x(cfg, rng)
    beta = _draw_beta(cfg, rng)
    u = rng.standard_normal((cfg.I, dim)) @ L.T
    eps = _draw_errors(cfg, rng)
    labels = balanced_labels(cfg.N, cfg.I)
    Z = design_matrix(X, labels, cfg.q)
    y = X @ beta + Z @ u.ravel() + eps
    return Dataset(X, y, labels, cfg, u, beta, psi=psi)


def gen_scenario4(cfg: LmmConfig, seed) -> Dataset:
    """Non-linear mixed models.

    ``log-fixed``: ``y = log|X beta| + u[c] + e``.
    ``logistic-mixed``: ``y = (1 + u[c]) / (1 + exp(-(x beta + u[c]))) + e``.
    """
    rng = np.random.default_rng(seed)
    X = _draw_x(cfg, rng)
    beta = _draw_beta(cfg, rng)
    lin = X @ beta
    redraws = 0
    if cfg.nonlinear_model == "log-fixed":
        while np.abs(lin).min() < 1e-300:
            if cfg.beta is not None or cfg.snr == 0:
                raise ValueError("log|X beta| undefined: linear predictor has an exact zero")
            beta = _draw_beta(cfg, rng)
            lin = X @ beta
            redraws += 1
    u = math.sqrt(cfg.tau2) * rng.standard_normal(cfg.I)
    eps = _draw_errors(cfg, rng)
    labels = balanced_labels(cfg.N, cfg.I)
    ur = u[labels]
    if cfg.nonlinear_model == "log-fixed":
        mean = np.log(np.abs(lin)) + ur
    else:
        mean = (1.0 + ur) * expit(lin + ur)
    extra = {"beta_redraws": redraws} if redraws else {}
    return Dataset(X, mean + eps, labels, cfg, u, beta, extra=extra)


GENERATORS = {1: gen_scenario1, 2: gen_scenario2, 3: gen_scenario3, 4: gen_scenario4}


def generate(cfg: LmmConfig, seed) -> Dataset:
    return GENERATORS[cfg.scenario](cfg, seed)


@dataclass(frozen=True)
class RejectionRate:
    method: str
    trials: int
    rejections: int
    failed: int = 0

    @property
    def rate(self) -> float:
        return self.rejections / self.trials if self.trials else float("nan")

    @property
    def mc_se(self) -> float:
        r = self.rate
        return math.sqrt(r * (1 - r) / self.trials) if self.trials else float("nan")


@dataclass
class ExperimentResult:
    config: LmmConfig
    rates: dict
    records: list


def _methods(method: str) -> tuple[str, ...]:
    if method == "both":
        return ("permutation", "asymptotic")
    if method in ("asymptotic", "permutation"):
        return (method,)
    raise ValueError(f"unknown method {method!r}")


def run_trials(
    cfg: LmmConfig,
    trials: int,
    alpha: float = 0.05,
    method: str = "asymptotic",
    seed: int = 0,
    *,
    key: tuple = (),
    graph: str = "kmst",
    k: int = 20,
    B: int = 2000,
) -> ExperimentResult:
    """Generate-then-test ``trials`` times; trial ``t`` is seeded by ``(seed, *key, t)``.

    Trials are independent, so their order does not matter. A dataset on
    which the test cannot run (degenerate permutation variance, or a k-MST
    that runs out of edges) is recorded with its status and counts as not
    rejected.
    """
    methods = _methods(method)
    records = []
    for t in range(trials):
        trial_seed = (seed, *key, t)
        ds = generate(cfg, trial_seed)
        rec = {"trial": t}
        try:
            res = graph_rank_test(
                ds.X, ds.y, ds.labels, graph=graph, k=k,
                method="both" if "permutation" in methods else "asymptotic",
                B=B, seed=trial_seed,
            )
        except (DegenerateVarianceError, DisconnectedGraphError) as exc:
            status = "degenerate" if isinstance(exc, DegenerateVarianceError) else "disconnected"
            rec.update(status=status, T=None, V=None, Z=None, p_asymptotic=None, p_permutation=None)
            records.append(rec)
            continue
        rec.update(
            status="ok",
            T=res.T.tolist(),
            V=res.V,
            Z=res.Z,
            p_asymptotic=res.p_asymptotic,
            p_permutation=res.p_permutation,
        )
        records.append(rec)
    rates = {}
    for m in methods:
        field_name = f"p_{m}"
        hits = sum(1 for r in records if r[field_name] is not None and r[field_name] <= alpha)
        failed = sum(1 for r in records if r["status"] != "ok")
        rates[m] = RejectionRate(m, trials, hits, failed)
    return ExperimentResult(cfg, rates, records)


def run_calibration(cfg: LmmConfig, trials: int, alpha: float = 0.05, method: str = "asymptotic", seed: int = 0, **kw) -> ExperimentResult:
    """Type I error: rejection rates on null data (``tau2 == 0``)."""
    if cfg.tau2 != 0:
        raise ValueError("calibration runs need tau2 = 0")
    return run_trials(cfg, trials, alpha, method, seed, **kw)


def run_power(
    grid,
    trials: int,
    alpha: float = 0.05,
    method: str = "permutation",
    seed: int = 0,
    **kw,
) -> list[dict]:
    """Rejection proportions over a grid of configs, one row per (config, method)."""
    rows = []
    for g, cfg in enumerate(grid):
        res = run_trials(cfg, trials, alpha, method, seed, key=(g,), **kw)
        for rate in res.rates.values():
            rows.append(result_row(cfg, rate))
    return rows


def result_row(cfg: LmmConfig, rate: RejectionRate) -> dict:
    model = cfg.nonlinear_model if cfg.scenario == 4 else "linear"
    return {
        "scenario": cfg.scenario,
        "N": cfg.N,
        "p": cfg.p,
        "I": cfg.I,
        "tau2": cfg.tau2,
        "rho": cfg.rho,
        "q": cfg.q,
        "method": rate.method,
        "trials": rate.trials,
        "rejections": rate.rejections,
        "power": rate.rate,
        "mc_se": rate.mc_se,
        "failed": rate.failed,
        "snr": cfg.snr,
        "error_dist": cfg.error_dist,
        "x_dist": cfg.x_dist,
        "model": model,
    }


def with_overrides(cfg: LmmConfig, **changes) -> LmmConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})
