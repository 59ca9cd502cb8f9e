"""Pointwise-effect error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import LengthMismatch, ValidationError


def _pair(true_tau, est_tau) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(true_tau, dtype=float).reshape(-1)
    e = np.asarray(est_tau, dtype=float).reshape(-1)
    if t.shape[0] != e.shape[0]:
        raise LengthMismatch(f"true has {t.shape[0]} entries, estimate has {e.shape[0]}")
    if t.shape[0] == 0:
        raise LengthMismatch("metric inputs are empty")
    return t, e


def pehe(true_tau, est_tau) -> float:
    """Root-mean-square error of the pointwise effect estimates."""
    t, e = _pair(true_tau, est_tau)
    diff = t - e
    return float(np.sqrt(diff @ diff / diff.shape[0]))


def ate_error(true_tau, est_tau) -> float:
    """Absolute difference between the average true and estimated effects."""
    t, e = _pair(true_tau, est_tau)
    return float(abs(t.mean() - e.mean()))


@dataclass(frozen=True)
class MetricReport:
    pehe: float
    ate_error: float
    n_eval: int
    method: str
    config_fingerprint: str = ""

    def __post_init__(self):
        if not (self.pehe >= 0 and self.ate_error >= 0):
            raise ValidationError("metrics must be non-negative")

    @classmethod
    def evaluate(cls, true_tau, est_tau, method: str, config_fingerprint: str = "") -> "MetricReport":
        t, e = _pair(true_tau, est_tau)
        return cls(pehe(t, e), ate_error(t, e), t.shape[0], method, config_fingerprint)
