"""Cox partial likelihood, score, observed information and Schoenfeld residuals.

Ties follow the Breslow convention.  All sums run over sorted times in a single
O(n p) pass (O(n p^2) for the information) with log-sum-exp stabilization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .survival_core import RiskSetIndex, SurvivalDataset, build_risk_sets


class LikelihoodOverflowError(ArithmeticError):
    """The linear predictor is not finite, so the likelihood cannot be evaluated."""


@dataclass(frozen=True, eq=False)
class LikelihoodContext:
    """A dataset, its risk-set index and the 1/n loss scaling.

    Build with :meth:`from_dataset`; the sorted copies of the data used by the
    kernels are derived once here.
    """

    dataset: SurvivalDataset
    index: RiskSetIndex
    scale: float
    X_sorted: np.ndarray = field(repr=False)
    XT_sorted: np.ndarray = field(repr=False)
    status_sorted: np.ndarray = field(repr=False)

    @classmethod
    def from_dataset(cls, d: SurvivalDataset, index: RiskSetIndex | None = None):
        index = build_risk_sets(d) if index is None else index
        Xs = np.ascontiguousarray(d.X[index.order])
        return cls(
            dataset=d,
            index=index,
            scale=1.0 / d.n,
            X_sorted=Xs,
            XT_sorted=np.ascontiguousarray(Xs.T),
            status_sorted=np.ascontiguousarray(d.status[index.order], dtype=np.float64),
        )

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def p(self) -> int:
        return self.dataset.p

    def linear_predictor(self, beta) -> np.ndarray:
        """Sorted-order linear predictor; raises on dimension or overflow problems."""
        beta = np.asarray(beta, dtype=np.float64)
        if beta.shape != (self.p,):
            raise ValueError(f"dimension mismatch: beta has shape {beta.shape}, expected ({self.p},)")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        with np.errstate(over="ignore", invalid="ignore"):
            eta = self.X_sorted @ beta
        if not np.all(np.isfinite(eta)):
            raise LikelihoodOverflowError("linear predictor overflowed; coefficients are too large")
        return eta


def _checked(value):
    if not np.all(np.isfinite(value)):
        raise LikelihoodOverflowError("partial likelihood evaluation overflowed")
    return value


def neg_log_partial_likelihood(ctx: LikelihoodContext, beta) -> float:
    """(1/n) * (-log partial likelihood) at ``beta``."""
    eta = ctx.linear_predictor(beta)
    kb = _kernels.backend
    total = kb.cox_loss(eta, ctx.status_sorted, ctx.index.group_start)
    return float(_checked(total * ctx.scale))


def _moments(ctx, beta, want_info):
    eta = ctx.linear_predictor(beta)
    kb = _kernels.backend
    U, info, resid = kb.risk_moments(
        ctx.X_sorted, eta, ctx.status_sorted, ctx.index.group_start, ctx.index.group_end, want_info
    )
    return _checked(U), _checked(info), _checked(resid)


def score(ctx: LikelihoodContext, beta) -> np.ndarray:
    """Gradient U(beta) of the unscaled log partial likelihood."""
    return _moments(ctx, beta, False)[0]


def observed_information(ctx: LikelihoodContext, beta) -> np.ndarray:
    """Unscaled observed information: sum over events of the risk-set covariance."""
    info = _moments(ctx, beta, True)[1]
    return 0.5 * (info + info.T)


def schoenfeld_residuals(ctx: LikelihoodContext, beta) -> np.ndarray:
    """One row per event (ascending time), covariate minus its risk-set weighted mean."""
    return _moments(ctx, beta, False)[2]


def score_and_information(ctx: LikelihoodContext, beta):
    U, info, _ = _moments(ctx, beta, True)
    return U, 0.5 * (info + info.T)
