"""Grouping-effect distance and bound, Fisher information, asymptotic covariance, sparsity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .partial_likelihood import LikelihoodContext, observed_information, schoenfeld_residuals
from .penalty import PenaltySpec
from .solver import FitResult
from .survival_core import SurvivalDataset


class SingularInformationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class GroupingReport:
    pair: tuple
    distance: float
    bound: float | None
    correlation: float
    hypothesis_met: bool
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "pair": list(self.pair),
            "distance": self.distance,
            "bound": self.bound,
            "correlation": self.correlation,
            "hypothesis_met": self.hypothesis_met,
            "note": self.note,
        }


def _check_pair(p, a, b):
    for k in (a, b):
        if not 0 <= k < p:
            raise IndexError(f"covariate index {k} out of range for p={p}")
    if a == b:
        raise ValueError("grouping needs two distinct covariates")


def grouping_distance(fit: FitResult, a: int, b: int) -> float:
    """|b_a - b_b| on the standardized scale."""
    _check_pair(fit.beta_std.shape[0], a, b)
    return float(abs(fit.beta_std[a] - fit.beta_std[b]))


def _fitting_scale(d: SurvivalDataset, fit: FitResult) -> SurvivalDataset:
    info = fit.standardization
    return d.with_covariates((d.X - info.means) / info.scales)


def grouping_bound(d: SurvivalDataset, fit: FitResult, spec: PenaltySpec, a: int, b: int) -> GroupingReport:
    """Distance between two coefficients and its upper bound from the stationarity conditions.

    bound = sum_events |r_a - r_b| / (2 n lambda2) + lambda1 |w_b - w_a| / (2 lambda2),
    with Schoenfeld residuals r at the fitted coefficients.  The bound is only
    valid when both estimates are nonzero with the same sign; otherwise it is
    omitted and ``hypothesis_met`` is false.
    """
    _check_pair(d.p, a, b)
    if spec.lambda2 <= 0:
        raise ValueError("bound requires lambda2 > 0")
    dist = grouping_distance(fit, a, b)
    xa, xb = d.X[:, a], d.X[:, b]
    if np.std(xa) > 0 and np.std(xb) > 0:
        corr = float(np.corrcoef(xa, xb)[0, 1])
    else:
        corr = float("nan")
    ba, bb = fit.beta_std[a], fit.beta_std[b]
    if not ba * bb > 0:
        return GroupingReport((a, b), dist, None, corr, False,
                              "hypothesis not met: estimates must be nonzero with equal signs")
    ds = _fitting_scale(d, fit)
    r = schoenfeld_residuals(LikelihoodContext.from_dataset(ds), fit.beta_std)
    w = spec.weights
    bound = (np.sum(np.abs(r[:, a] - r[:, b])) / (2.0 * ds.n * spec.lambda2)
             + spec.lambda1 * abs(w[b] - w[a]) / (2.0 * spec.lambda2))
    return GroupingReport((a, b), dist, float(bound), corr, True)


def estimated_fisher_information(d: SurvivalDataset, beta) -> np.ndarray:
    """(1/n) times the observed information at ``beta``."""
    ctx = LikelihoodContext.from_dataset(d)
    return observed_information(ctx, beta) * ctx.scale


def _invert_named(M, names):
    M = 0.5 * (M + M.T)
    evals, evecs = np.linalg.eigh(M)
    top = max(abs(evals[-1]), 1e-300) if evals.size else 1.0
    if evals.size and evals[0] <= 1e-10 * top:
        v = evecs[:, 0]
        dep = [names[k] for k in np.flatnonzero(np.abs(v) > 1e-6)]
        raise SingularInformationError(
            f"information submatrix is singular; linearly dependent columns: {dep}. "
            "Reparameterize duplicated columns by their identified sum (one "
            "representative column per group) before inverting."
        )
    return (evecs / evals) @ evecs.T


def asymptotic_covariance(d: SurvivalDataset, fit: FitResult):
    """Inverse of the active-set block of (1/n) * observed information at ``fit.beta``.

    Returns ``(cov, names)`` with rows/columns labelled by covariate name.
    """
    active = list(fit.active_set)
    if not active:
        raise ValueError("active set is empty; nothing to invert")
    info = estimated_fisher_information(d, fit.beta)
    names = [d.feature_names[k] for k in active]
    cov = _invert_named(info[np.ix_(active, active)], names)
    return 0.5 * (cov + cov.T), names


def identified_covariance(d: SurvivalDataset, beta, groups) -> np.ndarray:
    """Asymptotic covariance of group sums when each group's columns are exact copies.

    ``groups`` is a list of index lists; the first index of each group stands in
    for the whole group, whose identified coefficient is the sum over the group.
    """
    reps = [g[0] for g in groups]
    info = estimated_fisher_information(d, beta)
    names = [d.feature_names[k] for k in reps]
    cov = _invert_named(info[np.ix_(reps, reps)], names)
    return 0.5 * (cov + cov.T)


def sparsity_report(fit: FitResult, true_active=None) -> dict:
    beta = fit.beta_std
    active = [int(k) for k in np.flatnonzero(beta != 0)]
    zero = [int(k) for k in np.flatnonzero(beta == 0)]
    out = {"active_set": active, "zero_set": zero}
    if true_active is not None:
        truth = set(int(k) for k in true_active)
        est = set(active)
        out.update(
            recovered=est == truth,
            false_inclusions=sorted(est - truth),
            false_exclusions=sorted(truth - est),
        )
    return out
