"""Stratum-wise conditional means and the per-step confounding bias.

For every short-term step ``t`` and arm ``a`` one model is fitted on the
experimental rows and one on the observational rows; two more models fit the
long-term outcome on the observational arms. The confounding bias at step
``t`` is the gap between the experimental and observational treatment
contrasts::

    omega_t(x) = [mu_E_t(1,x) - mu_E_t(0,x)] - [mu_O_t(1,x) - mu_O_t(0,x)]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from . import regress
from .data import EXPERIMENTAL, OBSERVATIONAL, CombinedDataset
from .errors import DimensionMismatch, EmptyStratum, IndexOutOfRange
from .regress import RegressorSpec


class ConditionalMean(Protocol):
    d: int

    def predict(self, x) -> np.ndarray: ...


ArmPair = tuple[ConditionalMean, ConditionalMean]


@dataclass(frozen=True, eq=False)
class NuisanceSet:
    """Fitted stratum models.

    ``mu_S_E[t-1][a]`` estimates E[S_t | A=a, X, G=E]; ``mu_S_O`` likewise on
    the observational group; ``mu_Y_O[a]`` estimates E[Y | A=a, X, G=O].
    """

    mu_S_E: tuple[ArmPair, ...]
    mu_S_O: tuple[ArmPair, ...]
    mu_Y_O: ArmPair
    d: int

    def __post_init__(self):
        if len(self.mu_S_E) != len(self.mu_S_O) or not self.mu_S_E:
            raise DimensionMismatch("experimental and observational step grids must have equal, non-zero length")
        models = [m for pair in (*self.mu_S_E, *self.mu_S_O, self.mu_Y_O) for m in pair]
        if any(m.d != self.d for m in models):
            raise DimensionMismatch(f"every nuisance model must take {self.d}-dimensional inputs")

    @property
    def T(self) -> int:
        return len(self.mu_S_E)

    def swapped(self) -> "NuisanceSet":
        """Exchange the experimental and observational short-term grids."""
        return NuisanceSet(self.mu_S_O, self.mu_S_E, self.mu_Y_O, self.d)


def _stratum(dataset: CombinedDataset, group: str, arm: int) -> np.ndarray:
    m = dataset.mask(group, arm)
    if not m.any():
        raise EmptyStratum(group, arm)
    return m


def fit_nuisances(dataset: CombinedDataset, spec: RegressorSpec) -> NuisanceSet:
    """Fit all ``4T + 2`` stratum regressions (one model per group, arm and target)."""
    masks = {(g, a): _stratum(dataset, g, a) for g in (EXPERIMENTAL, OBSERVATIONAL) for a in (0, 1)}

    def grid(group: str) -> tuple[ArmPair, ...]:
        return tuple(
            tuple(regress.fit(spec, dataset.x[masks[group, a]], dataset.s[masks[group, a], t]) for a in (0, 1))
            for t in range(dataset.T)
        )

    mu_y = tuple(
        regress.fit(spec, dataset.x[masks[OBSERVATIONAL, a]], dataset.y[masks[OBSERVATIONAL, a]]) for a in (0, 1)
    )
    return NuisanceSet(grid(EXPERIMENTAL), grid(OBSERVATIONAL), mu_y, dataset.d)


def _points(nuisances: NuisanceSet, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1) if nuisances.d == 1 else x.reshape(1, -1)
    if x.shape[1] != nuisances.d:
        raise DimensionMismatch(f"expected covariates of dimension {nuisances.d}, got {x.shape[1]}")
    return x


def _check_step(nuisances: NuisanceSet, t: int) -> None:
    if not 1 <= t <= nuisances.T:
        raise IndexOutOfRange(f"step {t} outside 1..{nuisances.T}")


def bias_at(nuisances: NuisanceSet, t: int, x) -> np.ndarray:
    """Vectorised ``omega_t`` at each row of ``x``."""
    _check_step(nuisances, t)
    x = _points(nuisances, x)
    e0, e1 = nuisances.mu_S_E[t - 1]
    o0, o1 = nuisances.mu_S_O[t - 1]
    # difference of contrasts, so swapping the groups negates the result exactly
    return (e1.predict(x) - e0.predict(x)) - (o1.predict(x) - o0.predict(x))


def confounding_bias(nuisances: NuisanceSet, t: int, x) -> float:
    """``omega_t`` at a single covariate vector."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(bias_at(nuisances, t, x)[0])


def bias_matrix(nuisances: NuisanceSet, x, steps: Sequence[int] | None = None) -> np.ndarray:
    """``(m, len(steps))`` matrix of biases, all steps by default."""
    steps = range(1, nuisances.T + 1) if steps is None else steps
    x = _points(nuisances, x)
    return np.column_stack([bias_at(nuisances, t, x) for t in steps])


def outcome_difference_at(nuisances: NuisanceSet, x) -> np.ndarray:
    x = _points(nuisances, x)
    y0, y1 = nuisances.mu_Y_O
    return y1.predict(x) - y0.predict(x)


def observed_outcome_difference(nuisances: NuisanceSet, x) -> float:
    """Observational long-term contrast ``mu_Y_O(1,x) - mu_Y_O(0,x)`` at one point."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(outcome_difference_at(nuisances, x)[0])
