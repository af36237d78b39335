"""Right-censored survival data: containers, validation, standardization, risk sets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np


class DataValidationError(ValueError):
    """Raised when a survival dataset violates one of its invariants."""


class SurvivalRecord(NamedTuple):
    time: float
    status: int
    covariates: tuple


def _frozen(a, dtype=np.float64):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SurvivalDataset:
    """Observed times, event indicators and a covariate matrix.

    Arrays are copied and made read-only on construction.  Only shapes are
    checked here; :func:`validate_dataset` enforces the remaining invariants
    so that degenerate inputs (e.g. a single record) can still be evaluated.
    """

    time: np.ndarray
    status: np.ndarray
    X: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        time = _frozen(self.time)
        status = _frozen(self.status)
        X = np.array(self.X, dtype=np.float64, copy=True)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if time.size != 1 else X.reshape(1, -1)
        if time.ndim != 1 or status.ndim != 1 or X.ndim != 2:
            raise DataValidationError("time and status must be 1-d, covariates 2-d")
        if not (time.shape[0] == status.shape[0] == X.shape[0]):
            raise DataValidationError(
                f"dimension mismatch: {time.shape[0]} times, {status.shape[0]} "
                f"statuses, {X.shape[0]} covariate rows"
            )
        X.setflags(write=False)
        names = tuple(self.feature_names) or tuple(f"x{k + 1}" for k in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise DataValidationError(
                f"{len(names)} feature names for {X.shape[1]} covariate columns"
            )
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "status", status)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def records(self) -> list[SurvivalRecord]:
        return [
            SurvivalRecord(float(t), int(s), tuple(map(float, x)))
            for t, s, x in zip(self.time, self.status, self.X)
        ]

    @classmethod
    def from_records(cls, records: Sequence, feature_names: Sequence[str] = ()):
        records = list(records)
        if not records:
            raise DataValidationError("no records")
        dims = {len(r[2]) for r in records}
        if len(dims) != 1:
            for i, r in enumerate(records):
                if len(r[2]) != len(records[0][2]):
                    raise DataValidationError(
                        f"record {i}: {len(r[2])} covariates, expected {len(records[0][2])}"
                    )
        return cls(
            time=[r[0] for r in records],
            status=[r[1] for r in records],
            X=[list(r[2]) for r in records],
            feature_names=tuple(feature_names),
        )

    def subset(self, rows) -> "SurvivalDataset":
        rows = np.asarray(rows)
        return SurvivalDataset(self.time[rows], self.status[rows], self.X[rows], self.feature_names)

    def with_covariates(self, X, feature_names=None) -> "SurvivalDataset":
        return SurvivalDataset(
            self.time, self.status, X, self.feature_names if feature_names is None else feature_names
        )

    def fingerprint(self) -> str:
        """SHA-256 of the numeric content (times, statuses, covariates, names)."""
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.time).tobytes())
        h.update(np.ascontiguousarray(self.status).tobytes())
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update("\x1f".join(self.feature_names).encode())
        return h.hexdigest()


def validate_dataset(d: SurvivalDataset) -> SurvivalDataset:
    """Check every dataset invariant and return ``d`` unchanged.

    Raises
    ------
    DataValidationError
        On the first violated invariant, naming the offending record index.
    """
    if d.n < 2:
        raise DataValidationError(f"need at least 2 records, got {d.n}")
    if len(set(d.feature_names)) != len(d.feature_names):
        raise DataValidationError("feature names must be unique")
    for i, t in enumerate(d.time):
        if not np.isfinite(t):
            raise DataValidationError(f"record {i}: non-finite time {t!r}")
        if t <= 0:
            raise DataValidationError(f"record {i}: time must be > 0, got {t!r}")
    for i, s in enumerate(d.status):
        if s not in (0.0, 1.0):
            raise DataValidationError(f"record {i}: status must be 0 or 1, got {s!r}")
    bad = np.argwhere(~np.isfinite(d.X))
    if bad.size:
        i, k = bad[0]
        raise DataValidationError(
            f"record {i}: non-finite covariate {d.feature_names[k]!r} = {d.X[i, k]!r}"
        )
    if not np.any(d.status == 1):
        raise DataValidationError("no events: every record is censored")
    return d


@dataclass(frozen=True, eq=False)
class StandardizationInfo:
    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        scales = _frozen(self.scales)
        if np.any(~(scales > 0)):
            raise DataValidationError("standardization scales must be strictly positive")
        object.__setattr__(self, "means", _frozen(self.means))
        object.__setattr__(self, "scales", scales)

    @classmethod
    def identity(cls, p: int) -> "StandardizationInfo":
        return cls(np.zeros(p), np.ones(p))


def standardize(d: SurvivalDataset) -> tuple[SurvivalDataset, StandardizationInfo]:
    """Center each covariate and scale it to unit standard deviation (divisor n)."""
    X = d.X
    means = X.mean(axis=0)
    centered = X - means
    scales = np.sqrt(np.mean(centered**2, axis=0))
    for k in range(d.p):
        spread = np.max(np.abs(X[:, k])) if d.n else 0.0
        if scales[k] <= 1e-14 * max(1.0, spread):
            raise DataValidationError(
                f"covariate {d.feature_names[k]!r} is constant and cannot be standardized"
            )
    Z = centered / scales
    # one correction pass pins mean and sd to rounding level
    Z = Z - Z.mean(axis=0)
    Z = Z / np.sqrt(np.mean(Z**2, axis=0))
    return d.with_covariates(Z), StandardizationInfo(means, scales)


def destandardize_coefficients(beta_std, info: StandardizationInfo) -> np.ndarray:
    beta_std = np.asarray(beta_std, dtype=np.float64)
    if beta_std.shape != info.scales.shape:
        raise ValueError(
            f"length mismatch: {beta_std.shape[0]} coefficients, {info.scales.shape[0]} scales"
        )
    return beta_std / info.scales


@dataclass(frozen=True, eq=False)
class RiskSetIndex:
    """Sorted-time structure for Breslow risk sets.

    Attributes
    ----------
    order : permutation sorting records by ascending time (stable).
    event_positions : sorted positions of the events.
    risk_set_start : for each event, the first sorted position of its risk set.
    group_start, group_end : per sorted position, the half-open tie group
        ``[group_start, group_end)`` sharing that time.
    """

    order: np.ndarray
    event_positions: np.ndarray
    risk_set_start: np.ndarray
    group_start: np.ndarray
    group_end: np.ndarray

    @property
    def n_events(self) -> int:
        return int(self.event_positions.shape[0])

    def risk_set(self, event: int) -> np.ndarray:
        """Original record indices in the risk set of the ``event``-th event."""
        return self.order[self.risk_set_start[event]:]


def build_risk_sets(d: SurvivalDataset) -> RiskSetIndex:
    order = np.argsort(d.time, kind="stable")
    t = d.time[order]
    n = t.shape[0]
    new_group = np.ones(n, dtype=bool)
    new_group[1:] = t[1:] != t[:-1]
    starts = np.flatnonzero(new_group)
    ends = np.append(starts[1:], n)
    sizes = ends - starts
    group_start = np.repeat(starts, sizes).astype(np.int64)
    group_end = np.repeat(ends, sizes).astype(np.int64)
    event_positions = np.flatnonzero(d.status[order] == 1).astype(np.int64)
    return RiskSetIndex(
        order=_frozen(order, np.int64),
        event_positions=_frozen(event_positions, np.int64),
        risk_set_start=_frozen(group_start[event_positions], np.int64),
        group_start=_frozen(group_start, np.int64),
        group_end=_frozen(group_end, np.int64),
    )
