"""K-fold cross-validation of lambda1 (and optionally lambda2) by partial likelihood.

A fold's score is the cross-validated partial likelihood contribution
``l_full(b_-k) - l_-k(b_-k)``: the full-data log partial likelihood minus the
training-data one, both evaluated at the coefficients fitted without fold k.
Scoring the held-out records on their own would give tiny, truncated risk sets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._parallel import ordered_map
from .partial_likelihood import LikelihoodContext
from .penalty import PenaltySpec
from .solver import FitConfig, FitResult, Prepared, compute_lambda_max, fit_prepared, prepare
from .survival_core import SurvivalDataset, validate_dataset


class CrossValidationError(ValueError):
    pass


@dataclass(frozen=True)
class CvConfig:
    k_folds: int = 5
    seed: int = 0
    lambda2_grid: tuple = (0.0,)
    grid_size: int = 50
    grid_ratio: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "lambda2_grid", tuple(float(x) for x in self.lambda2_grid))
        if self.k_folds < 2:
            raise CrossValidationError("k_folds must be >= 2")
        if self.grid_size < 2:
            raise CrossValidationError("grid_size must be >= 2")
        if not 0 < self.grid_ratio < 1:
            raise CrossValidationError("grid_ratio must be in (0, 1)")
        if not self.lambda2_grid or any(not (x >= 0) for x in self.lambda2_grid):
            raise CrossValidationError("lambda2_grid must hold non-negative values")

    def to_dict(self) -> dict:
        return {
            "k_folds": self.k_folds,
            "seed": self.seed,
            "lambda2_grid": list(self.lambda2_grid),
            "grid_size": self.grid_size,
            "grid_ratio": self.grid_ratio,
        }


@dataclass(frozen=True, eq=False)
class CvReport:
    lambda2_grid: np.ndarray
    lambda1_grid: np.ndarray
    mean_score: np.ndarray  # (len(lambda2_grid), len(lambda1_grid)); nan where every fold failed
    se_score: np.ndarray
    best_lambda2: float
    best_lambda1: float
    best_index: tuple
    fold_assignment: np.ndarray

    def to_dict(self) -> dict:
        def clean(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]

        return {
            "lambda2_grid": self.lambda2_grid.tolist(),
            "lambda1_grid": self.lambda1_grid.tolist(),
            "mean_score": clean(self.mean_score),
            "se_score": clean(self.se_score),
            "best": {"lambda2": self.best_lambda2, "lambda1": self.best_lambda1},
            "fold_assignment": self.fold_assignment.tolist(),
        }


def _rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 0x5EED])))


def kfold_split(d: SurvivalDataset, cfg: CvConfig) -> np.ndarray:
    """Fold label per record, stratified by status and deterministic in ``cfg.seed``.

    Events are shuffled and dealt round-robin, then censored records continue
    the deal, so fold sizes differ by at most one and event counts likewise.
    """
    status = np.asarray(d.status)
    events = np.flatnonzero(status == 1)
    if cfg.k_folds > events.size:
        raise CrossValidationError(
            f"{events.size} events cannot be spread over {cfg.k_folds} folds"
        )
    rng = _rng(cfg.seed)
    censored = np.flatnonzero(status != 1)
    ev = rng.permutation(events)
    ce = rng.permutation(censored)
    folds = np.empty(d.n, dtype=np.int64)
    folds[ev] = np.arange(ev.size) % cfg.k_folds
    folds[ce] = (np.arange(ce.size) + ev.size) % cfg.k_folds
    return folds


def _log_pl(ctx: LikelihoodContext, beta) -> float:
    eta = ctx.linear_predictor(beta)
    return -_kernels.backend.cox_loss(eta, ctx.status_sorted, ctx.index.group_start)


def cv_score(d: SurvivalDataset, fold, beta_minus) -> float:
    """l_full(beta) - l_minus(beta), unscaled, for the records in ``fold`` held out.

    ``fold`` is a sequence of record indices or a boolean mask over records.
    """
    mask = np.zeros(d.n, dtype=bool)
    fold = np.asarray(fold)
    if fold.dtype == bool:
        mask |= fold
    elif fold.size:
        mask[fold.astype(np.int64)] = True
    if not mask.any():
        return 0.0
    full = LikelihoodContext.from_dataset(d)
    rest = ~mask
    l_minus = _log_pl(LikelihoodContext.from_dataset(d.subset(rest)), beta_minus) if rest.any() else 0.0
    return _log_pl(full, beta_minus) - l_minus


def _fold_path(full_ctx, train_prep, lambdas, lambda2, weights, fit_cfg):
    """Warm-started training path; returns cv score per grid point (nan on failure)."""
    scores = np.full(len(lambdas), np.nan)
    beta = np.zeros(full_ctx.p)
    for i, lam in enumerate(lambdas):
        try:
            fit = fit_prepared(train_prep, PenaltySpec(lam, lambda2, weights), fit_cfg, beta_init=beta)
        except ArithmeticError:
            continue
        beta = fit.beta_std
        scores[i] = _log_pl(full_ctx, beta) - _log_pl(train_prep.ctx, beta)
    return scores


def select_lambda(d, weights=None, cfg: CvConfig | None = None, fit_cfg: FitConfig | None = None) -> CvReport:
    """Cross-validate the lambda1 grid (for each lambda2 in ``cfg.lambda2_grid``).

    The grid runs log-spaced from lambda_max (computed on the full data with
    ``weights``) down to ``grid_ratio * lambda_max``.  Covariates are
    standardized once on the full data when ``fit_cfg.standardize``; fold fits
    reuse that scale.  The best point maximizes the mean fold score, ties going
    to the larger lambda1.
    """
    cfg = CvConfig() if cfg is None else cfg
    fit_cfg = FitConfig() if fit_cfg is None else fit_cfg
    prep = d if isinstance(d, Prepared) else prepare(d, fit_cfg.standardize)
    ds = prep.dataset
    p = ds.p
    weights = np.ones(p) if weights is None else np.asarray(weights, dtype=np.float64)
    folds = kfold_split(ds, cfg)
    lam_max = compute_lambda_max(prep.ctx, weights)
    if lam_max == 0.0:
        lam_max = 1.0
    lambdas = lam_max * np.geomspace(1.0, cfg.grid_ratio, cfg.grid_size)
    inner_cfg = fit_cfg.replace(standardize=False, beta0=None)

    train = []
    for k in range(cfg.k_folds):
        sub = ds.subset(folds != k)
        validate_dataset(sub)
        train.append(Prepared(LikelihoodContext.from_dataset(sub), prep.info))

    jobs = [(j, k) for j in range(len(cfg.lambda2_grid)) for k in range(cfg.k_folds)]
    results = ordered_map(
        lambda jk: _fold_path(prep.ctx, train[jk[1]], lambdas, cfg.lambda2_grid[jk[0]], weights, inner_cfg),
        jobs,
    )
    per = np.array(results).reshape(len(cfg.lambda2_grid), cfg.k_folds, len(lambdas))
    if np.all(np.isnan(per)):
        raise CrossValidationError("every fold fit failed")
    ok = ~np.isnan(per)
    cnt = ok.sum(axis=1)
    mean = np.where(cnt > 0, np.nansum(per, axis=1) / np.maximum(cnt, 1), np.nan)
    dev = np.where(ok, per - mean[:, None, :], 0.0)
    var = (dev**2).sum(axis=1) / np.maximum(cnt - 1, 1)
    se = np.where(cnt > 1, np.sqrt(var / np.maximum(cnt, 1)), np.nan)
    masked = np.where(np.isnan(mean), -np.inf, mean)
    j, i = np.unravel_index(int(np.argmax(masked)), masked.shape)
    return CvReport(
        lambda2_grid=np.array(cfg.lambda2_grid),
        lambda1_grid=lambdas,
        mean_score=mean,
        se_score=se,
        best_lambda2=float(cfg.lambda2_grid[j]),
        best_lambda1=float(lambdas[i]),
        best_index=(int(j), int(i)),
        fold_assignment=folds,
    )


def cross_validated_fit(d, weights=None, cfg: CvConfig | None = None, fit_cfg: FitConfig | None = None):
    """Select lambda by CV, then refit on the full data along the same warm-started grid.

    Returns ``(report, fit)``.
    """
    fit_cfg = FitConfig() if fit_cfg is None else fit_cfg
    prep = d if isinstance(d, Prepared) else prepare(d, fit_cfg.standardize)
    report = select_lambda(prep, weights, cfg, fit_cfg)
    p = prep.ctx.p
    weights = np.ones(p) if weights is None else np.asarray(weights, dtype=np.float64)
    j, i = report.best_index
    beta = np.zeros(p)
    fit: FitResult | None = None
    for lam in report.lambda1_grid[: i + 1]:
        fit = fit_prepared(prep, PenaltySpec(lam, report.best_lambda2, weights), fit_cfg, beta_init=beta)
        beta = fit.beta_std
    return report, fit
