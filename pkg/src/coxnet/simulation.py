"""Synthetic Cox data and the replication experiments.

Design ``paper`` has ten standard-normal covariates with x3 = x2, x7 = x6 and
x4 = 2 x1 + x2/2 + x3/2.  Event times come from inverse-transform sampling
with unit baseline hazard, ``T = -log(U) / exp(x'b)``; censoring times are
uniform on ``(0, c)`` with ``c`` solved so the expected censored fraction
hits the target.

Every random draw comes from a Philox stream keyed by ``(seed, replicate,
stream)``, so a replicate's data do not depend on which other replicates ran
or in what order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._parallel import ordered_map
from .diagnostics import grouping_bound, grouping_distance, identified_covariance, sparsity_report
from .model_selection import CvConfig, cross_validated_fit
from .penalty import DEFAULT_GAMMA, adaptive_weights
from .solver import FitConfig, fit_adaptive_elastic_net, prepare
from .survival_core import SurvivalDataset

PAPER_BETA = (-1.0, 2.0, 2.0, 0.0, 0.5, 1.0, 1.0, 0.0, 0.0, 0.0)
PAPER_LAMBDA2 = 1.0 / 3.0
DESIGNS = ("paper", "independent", "custom")
METHODS = ("Lasso", "ALasso", "EN", "AEN")
TABLE4_GRID_RATIO = 1e-4

_DESIGN_STREAM = 0
_SURVIVAL_STREAM = 1


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    seed: int = 0
    beta_true: tuple = PAPER_BETA
    censor_rate_target: float = 0.2
    design: str = "paper"
    correlation: tuple | None = None  # custom design: p x p correlation matrix
    group_correlation: float = 1.0  # paper design: corr(x2, x3) and corr(x6, x7)

    def __post_init__(self):
        object.__setattr__(self, "beta_true", tuple(float(b) for b in self.beta_true))
        if self.correlation is not None:
            object.__setattr__(self, "correlation", tuple(tuple(map(float, r)) for r in self.correlation))
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}, got {self.design!r}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 <= self.censor_rate_target < 1:
            raise ValueError("censor_rate_target must be in [0, 1)")
        if self.design == "paper" and len(self.beta_true) != 10:
            raise ValueError("the paper design has 10 covariates; beta_true must have length 10")
        if self.design == "custom":
            if self.correlation is None:
                raise ValueError("custom design needs a correlation matrix")
            if len(self.correlation) != len(self.beta_true):
                raise ValueError("correlation matrix and beta_true dimensions differ")
        if not -1 <= self.group_correlation <= 1:
            raise ValueError("group_correlation must be in [-1, 1]")

    @property
    def p(self) -> int:
        return len(self.beta_true)

    @property
    def true_active(self) -> tuple:
        return tuple(k for k, b in enumerate(self.beta_true) if b != 0)

    def replace(self, **changes) -> "SimConfig":
        kw = asdict(self)
        kw.update(changes)
        return SimConfig(**kw)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta_true"] = list(self.beta_true)
        if self.correlation is not None:
            d["correlation"] = [list(r) for r in self.correlation]
        return d


def stream(seed: int, replicate: int, which: int, *extra: int) -> np.random.Generator:
    key = [int(seed), int(replicate), int(which), *map(int, extra)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def generate_design(cfg: SimConfig, replicate: int = 0) -> np.ndarray:
    rng = stream(cfg.seed, replicate, _DESIGN_STREAM)
    n = cfg.n
    if cfg.design == "independent":
        return rng.standard_normal((n, cfg.p))
    if cfg.design == "custom":
        L = np.linalg.cholesky(np.asarray(cfg.correlation))
        return rng.standard_normal((n, cfg.p)) @ L.T
    base = rng.standard_normal((n, 7))
    X = np.empty((n, 10))
    for j, col in enumerate((0, 1, 4, 5, 7, 8, 9)):
        X[:, col] = base[:, j]
    rho = cfg.group_correlation
    if rho == 1.0:
        X[:, 2] = X[:, 1]
        X[:, 6] = X[:, 5]
    else:
        extra = rng.standard_normal((n, 2))
        s = np.sqrt(1.0 - rho * rho)
        X[:, 2] = rho * X[:, 1] + s * extra[:, 0]
        X[:, 6] = rho * X[:, 5] + s * extra[:, 1]
    # parenthesized so that with x3 = x2 the sum is exactly 2 x1 + x2
    X[:, 3] = 2.0 * X[:, 0] + (0.5 * X[:, 1] + 0.5 * X[:, 2])
    return X


def expected_censor_fraction(rates, c: float) -> float:
    """Mean over records of P(C < T) for T ~ Exp(rate) and C ~ U(0, c)."""
    with np.errstate(over="ignore"):  # rc = inf gives fraction 0, the right limit
        rc = np.asarray(rates) * c
    small = rc < 1e-8
    frac = np.where(small, 1.0 - rc / 2.0, -np.expm1(-rc) / np.where(small, 1.0, rc))
    return float(np.mean(frac))


def calibrate_censoring(rates, target: float) -> float:
    """Upper limit ``c`` of the uniform censoring law giving censored fraction ``target``."""
    if target <= 0:
        return np.inf
    f = lambda logc: expected_censor_fraction(rates, np.exp(logc)) - target  # noqa: E731
    # e^700 is near the top of the double range; a target this close to 0 means no censoring
    lo, hi = -700.0, 50.0
    while hi < 700.0 and f(hi) > 0:
        hi = min(hi + 50.0, 700.0)
    if f(hi) > 0:
        return np.inf
    return float(np.exp(brentq(f, lo, hi, xtol=1e-14)))


def generate_survival(cfg: SimConfig, design, replicate: int = 0) -> SurvivalDataset:
    X = np.asarray(design, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("design must be a non-empty 2-d matrix")
    if X.shape[1] != cfg.p:
        raise ValueError(f"design has {X.shape[1]} columns, beta_true has {cfg.p}")
    n = X.shape[0]
    rate = np.exp(X @ np.asarray(cfg.beta_true))
    c = calibrate_censoring(rate, cfg.censor_rate_target)
    # a dataset needs one event: redraw from fresh substreams until it has one
    attempt = 0
    while True:
        rng = stream(cfg.seed, replicate, _SURVIVAL_STREAM, *([attempt] if attempt else []))
        u = np.clip(rng.random(n), np.finfo(float).tiny, None)
        v = rng.random(n)
        T = -np.log(u) / rate
        if not np.isfinite(c):
            time, status = T, np.ones(n)
            break
        C = c * v
        time, status = np.minimum(T, C), (T <= C).astype(float)
        if status.any():
            break
        attempt += 1
    return SurvivalDataset(time, status, X, tuple(f"x{k + 1}" for k in range(cfg.p)))


def simulate(cfg: SimConfig, replicate: int = 0) -> SurvivalDataset:
    return generate_survival(cfg, generate_design(cfg, replicate), replicate)


# ---------------------------------------------------------------------------
# coefficient table (four methods, CV-selected lambda1)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Table4Report:
    methods: tuple
    feature_names: tuple
    coefficients: np.ndarray  # (methods, p), original scale
    coefficients_std: np.ndarray
    lambda1: dict
    lambda2: dict
    grouping: dict  # method -> list of GroupingReport dicts
    zero_max: dict  # method -> max |b_k| over the true zero set
    config: dict = field(default_factory=dict)

    def row(self, method: str) -> np.ndarray:
        return self.coefficients[self.methods.index(method)]

    def to_dict(self) -> dict:
        return {
            "methods": list(self.methods),
            "feature_names": list(self.feature_names),
            "coefficients": {m: self.coefficients[i].tolist() for i, m in enumerate(self.methods)},
            "coefficients_std": {m: self.coefficients_std[i].tolist() for i, m in enumerate(self.methods)},
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "grouping": self.grouping,
            "zero_max": self.zero_max,
            "config": self.config,
        }

    def to_csv(self) -> str:
        lines = ["method," + ",".join(self.feature_names)]
        for i, m in enumerate(self.methods):
            lines.append(m + "," + ",".join(repr(float(b)) for b in self.coefficients[i]))
        return "\n".join(lines) + "\n"


def _duplicate_pairs(cfg):
    return [(1, 2), (5, 6)] if cfg.design == "paper" else []


def run_table4(
    cfg: SimConfig,
    cv_cfg: CvConfig | None = None,
    fit_cfg: FitConfig | None = None,
    lambda2: float = PAPER_LAMBDA2,
    gamma: float = DEFAULT_GAMMA,
    epsilon: float | None = None,
    replicate: int = 0,
) -> Table4Report:
    """Fit Lasso, adaptive Lasso, elastic net and adaptive elastic net with CV'd lambda1.

    Adaptive Lasso weights come from the CV'd Lasso fit; adaptive elastic net
    weights from the CV'd elastic net fit.  All four share one fold assignment.
    The default grid reaches down to ``1e-4 * lambda_max``: with gamma = 3 the
    adaptive weights span many decades, and a shallower grid leaves the CV
    optimum pinned at its lower edge.
    """
    cv_cfg = CvConfig(seed=cfg.seed, grid_ratio=TABLE4_GRID_RATIO) if cv_cfg is None else cv_cfg
    fit_cfg = FitConfig() if fit_cfg is None else fit_cfg
    d = simulate(cfg, replicate)
    prep = prepare(d, fit_cfg.standardize)
    eps = 1.0 / d.n if epsilon is None else epsilon

    def cv(weights, l2):
        return cross_validated_fit(prep, weights, replace_l2(cv_cfg, l2), fit_cfg)

    fits, lam1, lam2, weights_used = {}, {}, {}, {}
    rep, fits["Lasso"] = cv(None, 0.0)
    w_alasso = adaptive_weights(fits["Lasso"].beta_std, gamma, eps)
    rep_a, fits["ALasso"] = cv(w_alasso, 0.0)
    rep_en, fits["EN"] = cv(None, lambda2)
    w_aen = adaptive_weights(fits["EN"].beta_std, gamma, eps)
    rep_aen, fits["AEN"] = cv(w_aen, lambda2)
    for m, r in zip(METHODS, (rep, rep_a, rep_en, rep_aen)):
        lam1[m], lam2[m] = r.best_lambda1, r.best_lambda2
    weights_used = {"ALasso": w_alasso, "AEN": w_aen}

    zero_set = [k for k, b in enumerate(cfg.beta_true) if b == 0]
    grouping, zero_max = {}, {}
    for m in METHODS:
        f = fits[m]
        reps = []
        for a, b in _duplicate_pairs(cfg):
            if f.spec.lambda2 > 0:
                reps.append(grouping_bound(d, f, f.spec, a, b).to_dict())
            else:
                reps.append({"pair": [a, b], "distance": grouping_distance(f, a, b), "bound": None})
        grouping[m] = reps
        zero_max[m] = float(np.max(np.abs(f.beta[zero_set]))) if zero_set else 0.0
    return Table4Report(
        methods=METHODS,
        feature_names=d.feature_names,
        coefficients=np.array([fits[m].beta for m in METHODS]),
        coefficients_std=np.array([fits[m].beta_std for m in METHODS]),
        lambda1=lam1,
        lambda2=lam2,
        grouping=grouping,
        zero_max=zero_max,
        config={
            "sim": cfg.to_dict(),
            "cv": cv_cfg.to_dict(),
            "fit": fit_cfg.to_dict(),
            "lambda2": lambda2,
            "gamma": gamma,
            "epsilon": eps,
            "replicate": replicate,
            "weights": {k: v.tolist() for k, v in weights_used.items()},
            "converged": {m: fits[m].converged for m in METHODS},
        },
    )


def replace_l2(cv_cfg: CvConfig, l2: float) -> CvConfig:
    return CvConfig(cv_cfg.k_folds, cv_cfg.seed, (l2,), cv_cfg.grid_size, cv_cfg.grid_ratio)


# ---------------------------------------------------------------------------
# oracle-property Monte Carlo
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleSchedule:
    """Penalty levels as functions of n: ``coef * n ** power``.

    The defaults shrink every penalty at rate 1/n.  Then sqrt(n) * lambda -> 0,
    so neither the L1 nor the ridge term biases the sqrt(n)-scaled active
    estimates.  Meanwhile lambda1* times an adaptive weight of order
    n^(gamma/2) still grows faster than the O(n^-1/2) score of a truly zero
    coefficient, which is what forces the zeros.
    """

    lambda1_en: tuple = (1.0, -1.0)
    lambda1_star: tuple = (1.0, -1.0)
    lambda2: tuple = (1.0 / 3.0, -1.0)
    gamma: float = DEFAULT_GAMMA

    def at(self, n: int) -> dict:
        f = lambda cp: float(cp[0] * n ** cp[1])  # noqa: E731
        return {"lambda1_en": f(self.lambda1_en), "lambda1_star": f(self.lambda1_star),
                "lambda2": f(self.lambda2), "gamma": self.gamma}

    def to_dict(self) -> dict:
        return {"lambda1_en": list(self.lambda1_en), "lambda1_star": list(self.lambda1_star),
                "lambda2": list(self.lambda2), "gamma": self.gamma}


def identified_groups(cfg: SimConfig) -> list:
    """Active coefficients grouped so that each group sum is identified."""
    active = cfg.true_active
    if cfg.design == "paper" and cfg.group_correlation == 1.0:
        groups, seen = [], set()
        for k in active:
            if k in seen:
                continue
            g = [k] + [b for a, b in _duplicate_pairs(cfg) if a == k and b in active]
            seen.update(g)
            groups.append(g)
        return groups
    return [[k] for k in active]


@dataclass(frozen=True, eq=False)
class OracleReport:
    replicates: int
    n: int
    beta_hat: np.ndarray  # (replicates, p), original scale
    sparsity: np.ndarray  # bool per replicate: zero set estimated exactly zero
    recovered: np.ndarray  # bool per replicate: estimated support equals the true one
    groups: list
    estimates: np.ndarray  # (replicates, groups): identified estimates
    asymptotic_sd: np.ndarray  # (replicates, groups): sqrt diag of inverse (1/n) information
    converged: np.ndarray
    config: dict = field(default_factory=dict)

    @property
    def sparsity_fraction(self) -> float:
        return float(np.mean(self.sparsity))

    @property
    def true_values(self) -> np.ndarray:
        b = np.asarray(self.config["sim"]["beta_true"])
        return np.array([b[g].sum() for g in self.groups])

    @property
    def empirical_sd(self) -> np.ndarray:
        return np.sqrt(self.n) * np.std(self.estimates, axis=0, ddof=1)

    @property
    def mean_asymptotic_sd(self) -> np.ndarray:
        return np.mean(self.asymptotic_sd, axis=0)

    @property
    def sd_ratio(self) -> np.ndarray:
        return self.empirical_sd / self.mean_asymptotic_sd

    def to_dict(self) -> dict:
        return {
            "replicates": self.replicates,
            "n": self.n,
            "sparsity_recovery_fraction": self.sparsity_fraction,
            "support_recovery_fraction": float(np.mean(self.recovered)),
            "converged_fraction": float(np.mean(self.converged)),
            "groups": [list(map(int, g)) for g in self.groups],
            "true_values": self.true_values.tolist(),
            "mean_estimate": np.mean(self.estimates, axis=0).tolist(),
            "empirical_sd": self.empirical_sd.tolist(),
            "asymptotic_sd": self.mean_asymptotic_sd.tolist(),
            "sd_ratio": self.sd_ratio.tolist(),
            "per_replicate": {
                "beta_hat": self.beta_hat.tolist(),
                "sparsity": self.sparsity.astype(bool).tolist(),
            },
            "config": self.config,
        }


def _oracle_replicate(cfg, r, schedule, fit_cfg, cv_cfg):
    d = simulate(cfg, r)
    lam = schedule.at(d.n)
    if cv_cfg is None:
        fit = fit_adaptive_elastic_net(
            d, lam["lambda1_en"], lam["lambda2"], lam["lambda1_star"], lam["gamma"], cfg=fit_cfg
        ).aen_stage
    else:
        prep = prepare(d, fit_cfg.standardize)
        c = replace_l2(cv_cfg, lam["lambda2"])
        _, en = cross_validated_fit(prep, None, c, fit_cfg)
        w = adaptive_weights(en.beta_std, lam["gamma"], 1.0 / d.n)
        _, fit = cross_validated_fit(prep, w, c, fit_cfg)
    groups = identified_groups(cfg)
    zero = [k for k in range(cfg.p) if k not in cfg.true_active]
    sparse = bool(np.all(fit.beta_std[zero] == 0))
    rec = sparsity_report(fit, cfg.true_active)["recovered"]
    est = np.array([fit.beta[g].sum() for g in groups])
    cov = identified_covariance(d, fit.beta, groups)
    return fit.beta, sparse, rec, est, np.sqrt(np.diag(cov)), fit.converged


def run_oracle_monte_carlo(
    cfg: SimConfig,
    replicates: int = 100,
    schedule: OracleSchedule | None = None,
    fit_cfg: FitConfig | None = None,
    cv_cfg: CvConfig | None = None,
) -> OracleReport:
    """Adaptive elastic net over seeded replicates: sparsity and sqrt(n) spread.

    Penalties follow ``schedule`` unless ``cv_cfg`` is given, in which case
    lambda1 (both stages) is chosen by CV in every replicate.
    """
    if replicates < 2:
        raise ValueError("replicates must be >= 2")
    schedule = OracleSchedule() if schedule is None else schedule
    fit_cfg = FitConfig() if fit_cfg is None else fit_cfg
    rows = ordered_map(lambda r: _oracle_replicate(cfg, r, schedule, fit_cfg, cv_cfg), range(replicates))
    beta, sparse, rec, est, asd, conv = (np.array(x) for x in zip(*rows))
    return OracleReport(
        replicates=replicates,
        n=cfg.n,
        beta_hat=beta,
        sparsity=sparse,
        recovered=rec,
        groups=identified_groups(cfg),
        estimates=est,
        asymptotic_sd=asd,
        converged=conv,
        config={
            "sim": cfg.to_dict(),
            "schedule": schedule.to_dict(),
            "penalties": schedule.at(cfg.n),
            "fit": fit_cfg.to_dict(),
            "cv": None if cv_cfg is None else cv_cfg.to_dict(),
        },
    )


# ---------------------------------------------------------------------------
# grouping experiment
# ---------------------------------------------------------------------------


def run_grouping_experiment(
    cfg: SimConfig,
    correlations=(0.9, 0.99, 1.0),
    replicates: int = 20,
    lambda1: float = 0.01,
    lambda2: float = PAPER_LAMBDA2,
    fit_cfg: FitConfig | None = None,
) -> dict:
    """Elastic-net grouping distance for (x2, x3) as their correlation varies.

    Replicate ``r`` uses the same base draws at every correlation, so the
    curves are compared on matched seeds.
    """
    from .penalty import PenaltySpec
    from .solver import fit_penalized_cox

    if cfg.design != "paper":
        raise ValueError("the grouping experiment uses the paper design")
    fit_cfg = FitConfig() if fit_cfg is None else fit_cfg
    out = {}
    for rho in correlations:
        c = cfg.replace(group_correlation=float(rho))

        def one(r, c=c):
            d = simulate(c, r)
            spec = PenaltySpec.elastic_net(c.p, lambda1, lambda2)
            f = fit_penalized_cox(d, spec, fit_cfg)
            return grouping_bound(d, f, spec, 1, 2).to_dict()

        reps = ordered_map(one, range(replicates))
        dist = [g["distance"] for g in reps]
        out[repr(float(rho))] = {"median_distance": float(np.median(dist)), "replicates": reps}
    return {
        "correlations": [float(r) for r in correlations],
        "results": out,
        "config": {"sim": cfg.to_dict(), "lambda1": lambda1, "lambda2": lambda2,
                   "replicates": replicates, "fit": fit_cfg.to_dict()},
    }
