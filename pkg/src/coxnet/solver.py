"""Penalized Cox fits: proximal Newton outer loop with coordinate-descent inner loop.

Each outer iteration replaces the smooth loss by its second-order expansion
(score and observed information at the current iterate) and minimizes
model + penalty by cyclic coordinate descent with closed-form soft-threshold
updates.  The outer step is halved whenever the true objective would
increase, so accepted iterates never go uphill.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .partial_likelihood import (
    LikelihoodContext,
    neg_log_partial_likelihood,
    score,
    score_and_information,
)
from .penalty import DEFAULT_GAMMA, PenaltySpec, ZeroFirstStageError, adaptive_weights, penalty_value
from .survival_core import (
    StandardizationInfo,
    SurvivalDataset,
    destandardize_coefficients,
    standardize,
    validate_dataset,
)

log = logging.getLogger(__name__)

# |eta| beyond this with no penalty at all means the likelihood has no finite maximizer
_SEPARATION_ETA = 300.0


class SeparationError(ArithmeticError):
    """The unpenalized objective decreases without bound along some direction."""


@dataclass(frozen=True)
class FitConfig:
    """Solver controls.

    ``beta0`` is a warm start on the fitting scale (standardized when
    ``standardize`` is true).  ``coordinate_seed`` switches the fixed ascending
    coordinate order to a seeded random permutation.
    """

    tol: float = 1e-8
    max_outer: int = 100
    max_inner: int = 1000
    standardize: bool = True
    beta0: tuple | None = None
    coordinate_seed: int | None = None

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.beta0 is not None:
            object.__setattr__(self, "beta0", tuple(float(b) for b in np.ravel(self.beta0)))

    def replace(self, **changes) -> "FitConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return FitConfig(**kw)

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


@dataclass(frozen=True, eq=False)
class FitResult:
    beta: np.ndarray
    beta_std: np.ndarray
    objective: float
    outer_iterations: int
    inner_iterations: int
    converged: bool
    kkt_residual: float
    active_set: tuple
    spec: PenaltySpec
    standardization: StandardizationInfo
    objective_trace: tuple = field(default=(), repr=False)
    excluded: tuple = ()

    def to_dict(self, feature_names=None) -> dict:
        out = {
            "beta": self.beta.tolist(),
            "beta_std": self.beta_std.tolist(),
            "objective": self.objective,
            "iterations": {"outer": self.outer_iterations, "inner": self.inner_iterations},
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "active_set": list(self.active_set),
            "penalty": self.spec.to_dict(),
            "standardization": {
                "means": self.standardization.means.tolist(),
                "scales": self.standardization.scales.tolist(),
            },
        }
        if feature_names is not None:
            out["feature_names"] = list(feature_names)
        if self.excluded:
            out["excluded"] = list(self.excluded)
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "FitResult":
        """Inverse of :meth:`to_dict` (the objective trace is not serialized)."""
        pen = obj["penalty"]
        beta_std = np.asarray(obj["beta_std"], dtype=np.float64)
        return cls(
            beta=np.asarray(obj["beta"], dtype=np.float64),
            beta_std=beta_std,
            objective=float(obj["objective"]),
            outer_iterations=int(obj["iterations"]["outer"]),
            inner_iterations=int(obj["iterations"]["inner"]),
            converged=bool(obj["converged"]),
            kkt_residual=float(obj["kkt_residual"]),
            active_set=tuple(int(k) for k in obj["active_set"]),
            spec=PenaltySpec(pen["lambda1"], pen["lambda2"], pen["weights"], pen["gamma"]),
            standardization=StandardizationInfo(
                np.asarray(obj["standardization"]["means"]), np.asarray(obj["standardization"]["scales"])
            ),
            excluded=tuple(obj.get("excluded", ())),
        )


@dataclass(frozen=True, eq=False)
class AenFit:
    en_stage: FitResult
    weights: np.ndarray
    aen_stage: FitResult
    spec_en: PenaltySpec
    spec_aen: PenaltySpec
    epsilon: float
    epsilon_binding: tuple = ()

    def to_dict(self) -> dict:
        return {
            "en_stage": self.en_stage.to_dict(),
            "weights": self.weights.tolist(),
            "aen_stage": self.aen_stage.to_dict(),
            "epsilon": self.epsilon,
            "epsilon_binding": list(self.epsilon_binding),
        }


@dataclass(frozen=True, eq=False)
class Prepared:
    """A validated dataset on its fitting scale, with kernel-ready arrays."""

    ctx: LikelihoodContext
    info: StandardizationInfo

    @property
    def dataset(self) -> SurvivalDataset:
        return self.ctx.dataset


def prepare(d: SurvivalDataset, do_standardize: bool = True) -> Prepared:
    validate_dataset(d)
    if do_standardize:
        ds, info = standardize(d)
    else:
        ds, info = d, StandardizationInfo.identity(d.p)
    return Prepared(LikelihoodContext.from_dataset(ds), info)


# ---------------------------------------------------------------------------
# objective and optimality checks
# ---------------------------------------------------------------------------


def objective_value(ctx: LikelihoodContext, beta, spec: PenaltySpec) -> float:
    return neg_log_partial_likelihood(ctx, beta) + penalty_value(beta, spec)


def _smooth_gradient(ctx, beta):
    return -score(ctx, beta) * ctx.scale


def _kkt_from_gradient(g, beta, spec, excluded=()):
    l1w = spec.lambda1 * spec.weights
    viol = np.where(
        beta != 0,
        np.abs(g + l1w * np.sign(beta) + 2.0 * spec.lambda2 * beta),
        np.maximum(np.abs(g) - l1w, 0.0),
    )
    if len(excluded):
        viol[list(excluded)] = 0.0
    return float(np.max(viol)) if viol.size else 0.0


def check_kkt(d, beta, spec: PenaltySpec, excluded=()) -> float:
    """Largest violation of the subgradient stationarity conditions at ``beta``.

    ``d`` may be a :class:`SurvivalDataset` or a prepared
    :class:`LikelihoodContext`; ``beta`` must be on the scale of its covariates.
    """
    ctx = d if isinstance(d, LikelihoodContext) else LikelihoodContext.from_dataset(d)
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (ctx.p,) or spec.p != ctx.p:
        raise ValueError(f"dimension mismatch: beta {beta.shape}, weights {spec.p}, p={ctx.p}")
    return _kkt_from_gradient(_smooth_gradient(ctx, beta), beta, spec, excluded)


def compute_lambda_max(d, weights=None) -> float:
    """Smallest lambda1 at which beta = 0 satisfies the stationarity conditions."""
    ctx = d if isinstance(d, LikelihoodContext) else LikelihoodContext.from_dataset(d)
    weights = np.ones(ctx.p) if weights is None else np.asarray(weights, dtype=np.float64)
    g0 = _smooth_gradient(ctx, np.zeros(ctx.p))
    return float(np.max(np.abs(g0) / weights))


# ---------------------------------------------------------------------------
# core solver
# ---------------------------------------------------------------------------


def _solve(ctx: LikelihoodContext, spec: PenaltySpec, cfg: FitConfig, beta_init, excluded=()):
    kb = _kernels.backend
    p = ctx.p
    inv_n = ctx.scale
    if spec.p != p:
        raise ValueError(f"dimension mismatch: {spec.p} penalty weights for {p} covariates")
    excluded = tuple(sorted(set(int(k) for k in excluded)))
    free = np.array([k for k in range(p) if k not in excluded], dtype=np.int64)
    if cfg.coordinate_seed is not None:
        free = np.random.default_rng(cfg.coordinate_seed).permutation(free)

    beta = np.array(beta_init, dtype=np.float64)
    beta[list(excluded)] = 0.0
    l1w = spec.lambda1 * spec.weights
    l2 = spec.lambda2
    inner_tol = cfg.tol * 1e-2
    unpenalized = spec.lambda1 == 0.0 and l2 == 0.0

    F = objective_value(ctx, beta, spec)
    trace = [F]
    n_inner = 0
    converged = False
    kkt = np.inf
    outer = 0
    for outer in range(1, cfg.max_outer + 1):
        U, info = score_and_information(ctx, beta)
        H = np.ascontiguousarray(info * inv_n)
        v = -U * inv_n
        cand = beta.copy()
        n_inner += kb.cd_sweeps(H, v, cand, l1w, l2, free, cfg.max_inner, inner_tol)

        step = cand - beta
        t = 1.0
        accepted = None
        for _ in range(60):
            trial = cand if t == 1.0 else beta + t * step
            try:
                F_trial = objective_value(ctx, trial, spec)
            except ArithmeticError:
                F_trial = np.inf
            if F_trial <= F + 1e-13:
                accepted = trial
                break
            t *= 0.5
        if accepted is None:
            change = 0.0
        else:
            change = float(np.max(np.abs(accepted - beta))) if p else 0.0
            beta = accepted
            F = F_trial
            trace.append(F)

        if unpenalized and np.max(np.abs(ctx.X_sorted @ beta)) > _SEPARATION_ETA:
            raise SeparationError(
                "partial likelihood is unbounded (data are separable along some direction); "
                "use a positive penalty (lambda1 > 0 or lambda2 > 0)"
            )
        if change < cfg.tol:
            kkt = check_kkt(ctx, beta, spec, excluded)
            if kkt <= 10 * cfg.tol:
                converged = True
                break
            if accepted is None:
                break
    if not np.isfinite(kkt):
        kkt = check_kkt(ctx, beta, spec, excluded)
    if unpenalized and np.any(beta != 0) and _decreases_along_ray(ctx, beta, spec, F):
        raise SeparationError(
            "partial likelihood has no finite maximizer (the loss keeps decreasing along the "
            "fitted direction); use a positive penalty (lambda1 > 0 or lambda2 > 0)"
        )
    return beta, {
        "objective": F,
        "outer": outer,
        "inner": n_inner,
        "converged": converged,
        "kkt": kkt,
        "trace": tuple(trace),
    }


def _decreases_along_ray(ctx, beta, spec, F):
    # a strictly convex loss with an attained minimum rises when beta is doubled
    try:
        return objective_value(ctx, 2.0 * beta, spec) <= F
    except ArithmeticError:
        return True


def _zero_is_optimal(ctx, spec, excluded):
    # same arithmetic as compute_lambda_max, so lambda1 = lambda_max exits at zero
    ratio = np.abs(_smooth_gradient(ctx, np.zeros(ctx.p))) / spec.weights
    if len(excluded):
        ratio[list(excluded)] = 0.0
    return bool(np.all(ratio <= spec.lambda1))


def fit_prepared(
    prep: Prepared, spec: PenaltySpec, cfg: FitConfig | None = None, beta_init=None, excluded=()
) -> FitResult:
    """Fit on an already validated and (optionally) standardized dataset."""
    cfg = FitConfig() if cfg is None else cfg
    ctx = prep.ctx
    if beta_init is None:
        beta_init = np.zeros(ctx.p) if cfg.beta0 is None else np.asarray(cfg.beta0, dtype=np.float64)
    if spec.lambda1 > 0 and _zero_is_optimal(ctx, spec, excluded):
        beta = np.zeros(ctx.p)
        F = objective_value(ctx, beta, spec)
        res = {"objective": F, "outer": 0, "inner": 0, "converged": True, "kkt": 0.0, "trace": (F,)}
    else:
        beta, res = _solve(ctx, spec, cfg, beta_init, excluded)
    if not res["converged"]:
        log.warning("fit did not converge: kkt residual %.3g after %d outer iterations",
                    res["kkt"], res["outer"])
    return FitResult(
        beta=destandardize_coefficients(beta, prep.info),
        beta_std=beta,
        objective=objective_value(ctx, beta, spec),
        outer_iterations=res["outer"],
        inner_iterations=res["inner"],
        converged=res["converged"],
        kkt_residual=res["kkt"],
        active_set=tuple(int(k) for k in np.flatnonzero(beta)),
        spec=spec,
        standardization=prep.info,
        objective_trace=res["trace"],
        excluded=tuple(excluded),
    )


def fit_penalized_cox(d: SurvivalDataset, spec: PenaltySpec, cfg: FitConfig | None = None) -> FitResult:
    """Minimize (1/n)(-log partial likelihood) + weighted elastic-net penalty.

    The penalty applies to standardized coefficients when ``cfg.standardize``
    is true; ``FitResult.beta`` is always on the original covariate scale.
    A run that hits the iteration caps returns ``converged=False``.
    """
    cfg = FitConfig() if cfg is None else cfg
    return fit_prepared(prepare(d, cfg.standardize), spec, cfg)


def regularization_path(
    d,
    lambda2: float,
    weights=None,
    grid_size: int = 50,
    grid_ratio: float = 0.01,
    cfg: FitConfig | None = None,
    lambdas=None,
) -> list[tuple[float, FitResult]]:
    """Warm-started fits over a log-spaced lambda1 grid from lambda_max downwards.

    ``d`` may be a raw dataset or a :class:`Prepared` one.  An explicit
    ``lambdas`` sequence (descending) overrides the generated grid.
    """
    cfg = FitConfig() if cfg is None else cfg
    prep = d if isinstance(d, Prepared) else prepare(d, cfg.standardize)
    p = prep.ctx.p
    weights = np.ones(p) if weights is None else np.asarray(weights, dtype=np.float64)
    if lambdas is None:
        if grid_size < 2:
            raise ValueError("grid_size must be >= 2")
        if not 0 < grid_ratio < 1:
            raise ValueError("grid_ratio must be in (0, 1)")
        lam_max = compute_lambda_max(prep.ctx, weights)
        lambdas = lam_max * np.geomspace(1.0, grid_ratio, grid_size)
    out = []
    beta = np.zeros(p) if cfg.beta0 is None else np.asarray(cfg.beta0, dtype=np.float64)
    for lam in lambdas:
        spec = PenaltySpec(float(lam), lambda2, weights)
        fit = fit_prepared(prep, spec, cfg, beta_init=beta)
        beta = fit.beta_std
        out.append((float(lam), fit))
    return out


def fit_adaptive_elastic_net(
    d,
    lambda1_en: float,
    lambda2: float,
    lambda1_star: float,
    gamma: float = DEFAULT_GAMMA,
    epsilon: float | None = None,
    cfg: FitConfig | None = None,
    exclude_zero: bool = False,
) -> AenFit:
    """Two-stage fit: elastic net, then adaptive elastic net with |b_EN|^-gamma weights.

    ``epsilon`` defaults to 1/n.  With ``epsilon=0`` a zero first-stage
    coefficient raises :class:`ZeroFirstStageError` unless ``exclude_zero``,
    in which case that coefficient is held at zero in the second stage.
    """
    cfg = FitConfig() if cfg is None else cfg
    prep = d if isinstance(d, Prepared) else prepare(d, cfg.standardize)
    p = prep.ctx.p
    epsilon = 1.0 / prep.ctx.n if epsilon is None else float(epsilon)
    spec_en = PenaltySpec(lambda1_en, lambda2, np.ones(p), gamma)
    en = fit_prepared(prep, spec_en, cfg)
    zero = np.flatnonzero(en.beta_std == 0)
    excluded = ()
    if epsilon == 0 and zero.size and exclude_zero:
        excluded = tuple(int(k) for k in zero)
        b = en.beta_std.copy()
        b[zero] = 1.0
        weights = adaptive_weights(b, gamma, 0.0)
    else:
        weights = adaptive_weights(en.beta_std, gamma, epsilon)
    spec_aen = PenaltySpec(lambda1_star, lambda2, weights, gamma)
    aen = fit_prepared(prep, spec_aen, cfg, beta_init=en.beta_std, excluded=excluded)
    return AenFit(
        en_stage=en,
        weights=weights,
        aen_stage=aen,
        spec_en=spec_en,
        spec_aen=spec_aen,
        epsilon=epsilon,
        epsilon_binding=tuple(int(k) for k in zero) if epsilon > 0 else excluded,
    )


__all__ = [
    "AenFit",
    "FitConfig",
    "FitResult",
    "Prepared",
    "SeparationError",
    "ZeroFirstStageError",
    "check_kkt",
    "compute_lambda_max",
    "fit_adaptive_elastic_net",
    "fit_penalized_cox",
    "fit_prepared",
    "objective_value",
    "prepare",
    "regularization_path",
]
