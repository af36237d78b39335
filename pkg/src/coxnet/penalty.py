"""Weighted elastic-net penalty, adaptive weights and the scalar soft-threshold."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_GAMMA = 3.0


class ZeroFirstStageError(ValueError):
    """An adaptive weight is undefined because a first-stage coefficient is exactly zero."""


@dataclass(frozen=True, eq=False)
class PenaltySpec:
    """lambda1 * sum(w_k |b_k|) + lambda2 * sum(b_k^2).

    ``gamma`` is carried along for provenance only; it does not enter
    :func:`penalty_value`.
    """

    lambda1: float
    lambda2: float
    weights: np.ndarray
    gamma: float = DEFAULT_GAMMA

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not (np.isfinite(self.lambda1) and self.lambda1 >= 0):
            raise ValueError(f"lambda1 must be finite and >= 0, got {self.lambda1}")
        if not (np.isfinite(self.lambda2) and self.lambda2 >= 0):
            raise ValueError(f"lambda2 must be finite and >= 0, got {self.lambda2}")
        if not (self.gamma > 0):
            raise ValueError(f"gamma must be > 0, got {self.gamma}")
        if w.size == 0 or np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("every penalty weight must be finite and > 0")

    @property
    def p(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def elastic_net(cls, p: int, lambda1: float, lambda2: float, gamma: float = DEFAULT_GAMMA):
        return cls(lambda1, lambda2, np.ones(p), gamma)

    def replace(self, **changes) -> "PenaltySpec":
        kw = dict(lambda1=self.lambda1, lambda2=self.lambda2, weights=self.weights, gamma=self.gamma)
        kw.update(changes)
        return PenaltySpec(**kw)

    def to_dict(self) -> dict:
        return {
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "weights": self.weights.tolist(),
            "gamma": self.gamma,
        }


def penalty_value(beta, spec: PenaltySpec) -> float:
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != spec.weights.shape:
        raise ValueError(
            f"dimension mismatch: {beta.shape[0] if beta.ndim else 1} coefficients, "
            f"{spec.p} weights"
        )
    return float(spec.lambda1 * np.sum(spec.weights * np.abs(beta)) + spec.lambda2 * np.sum(beta**2))


def adaptive_weights(beta_en, gamma: float = DEFAULT_GAMMA, epsilon: float = 0.0) -> np.ndarray:
    """Weights (|b_k| + epsilon) ** -gamma from a first-stage estimate."""
    beta_en = np.abs(np.asarray(beta_en, dtype=np.float64))
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    if epsilon == 0 and np.any(beta_en == 0):
        zeros = np.flatnonzero(beta_en == 0).tolist()
        raise ZeroFirstStageError(
            f"adaptive weight |b_k|^-gamma is undefined for zero first-stage coefficients "
            f"at {zeros}; supply epsilon > 0 or exclude those variables"
        )
    with np.errstate(over="ignore"):
        w = (beta_en + epsilon) ** (-gamma)
    if np.any(~np.isfinite(w)):
        raise ZeroFirstStageError("adaptive weight overflowed; increase epsilon")
    return w


def soft_threshold(z: float, t: float) -> float:
    if t < 0:
        raise ValueError("threshold must be >= 0")
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0
