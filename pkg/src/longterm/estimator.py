"""Heterogeneous long-term effect estimators.

``estimate_fcaecb`` extrapolates the short-term confounding bias through a
fitted one-step transition ``f``::

    tau(x) = [mu_Y_O(1,x) - mu_Y_O(0,x)] + f(x)**mu * omega_T(x)

``estimate_caecb`` adds a single short-term bias instead (the special case
``f == 1`` applied to one chosen step). The two T-learners are reference
points: one ignores confounding, the other uses experimental long-term
outcomes that only a simulator can provide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from . import regress
from .data import EXPERIMENTAL, OBSERVATIONAL, CombinedDataset, select_time_subset, split_halves, subset_geometry
from .dynamics import DEFAULT_GUARD, BiasTransition, build_panel, fit_transition
from .errors import (
    DimensionMismatch,
    EmptyStratum,
    IndexOutOfRange,
    MissingExperimentalOutcome,
    NoValidCandidate,
    ValidationError,
)
from .nuisance import NuisanceSet, bias_at, fit_nuisances
from .regress import FittedModel, RegressorSpec

FCAECB = "fcaecb"
CAECB = "caecb"
TLEARNER_OBS = "tlearner-obs"
TLEARNER_EXP = "tlearner-exp"

StepChoice = Union[str, int]
Horizon = Union[None, str, Sequence[int], Sequence[Sequence[int]]]


@dataclass(frozen=True)
class HorizonChoice:
    kept_steps: tuple[int, ...]
    effective_T: int
    effective_mu: int

    def __post_init__(self):
        if self.effective_T < 2 or self.effective_mu < 1:
            raise ValidationError("a horizon choice needs T' >= 2 and mu' >= 1")

    @property
    def score(self) -> float:
        return self.effective_mu / math.sqrt(self.effective_T - 1)


def horizon_for(steps: Sequence[int], long_index: int, T_available: int | None = None) -> HorizonChoice:
    steps = tuple(int(t) for t in steps)
    if T_available is not None and steps and (steps[0] < 1 or steps[-1] > T_available):
        raise ValidationError(f"steps {steps} fall outside 1..{T_available}")
    _, T_new, mu_new = subset_geometry(steps, long_index)
    return HorizonChoice(steps, T_new, mu_new)


def candidate_subsets(T_available: int, long_index: int) -> list[tuple[int, ...]]:
    """Every equally spaced subset of ``1..T_available`` with at least two steps
    from which ``long_index`` is reachable in whole steps, ordered by
    (start, spacing, length)."""
    out = []
    for start in range(1, T_available + 1):
        for spacing in range(1, T_available):
            for count in range(2, T_available + 1):
                last = start + spacing * (count - 1)
                if last > T_available:
                    break
                if (long_index - last) > 0 and (long_index - last) % spacing == 0:
                    out.append(tuple(range(start, last + 1, spacing)))
    return out


def select_horizon(T_available: int, long_index: int, candidates: Sequence[Sequence[int]]) -> HorizonChoice:
    """Pick the subset with the smallest ``mu' / sqrt(T' - 1)``.

    Ties prefer the smaller ``mu'``, then the larger ``T'``, then the earlier
    candidate.
    """
    choices = []
    for steps in candidates:
        if len(steps) < 2:
            continue
        choices.append(horizon_for(steps, long_index, T_available))
    if not choices:
        raise NoValidCandidate("no candidate subset with at least two steps")
    return min(choices, key=lambda c: (c.score, c.effective_mu, -c.effective_T))


def resolve_step(T: int, choice: StepChoice, seed: int = 0) -> int:
    """Map ``first``/``middle``/``last``/``random`` or an explicit 1-based step to an index."""
    if isinstance(choice, str):
        key = choice.lower()
        if key == "first":
            return 1
        if key == "middle":
            return math.ceil(T / 2)
        if key == "last":
            return T
        if key == "random":
            return int(np.random.default_rng(seed).integers(1, T + 1))
        if key.isdigit():
            choice = int(key)
        else:
            raise ValidationError(f"unknown step choice {choice!r}")
    t = int(choice)
    if not 1 <= t <= T:
        raise IndexOutOfRange(f"step {t} outside 1..{T}")
    return t


@dataclass(frozen=True, eq=False)
class TauModel:
    """A fitted effect estimate ``tau_hat(x)`` plus how it was obtained.

    ``outcome_models`` are the per-arm long-term models (observational for
    every method except the idealised one). ``step`` is the bias step added by
    CAECB; ``mu`` is the extrapolation exponent for FCAECB. ``splitting`` is
    the split seed or None.
    """

    method: str
    outcome_models: tuple[FittedModel, FittedModel]
    d: int
    nuisances: NuisanceSet | None = None
    transition: BiasTransition | None = None
    horizon: HorizonChoice | None = None
    mu: int | None = None
    step: int | None = None
    splitting: int | None = None

    def __post_init__(self):
        if (self.method == FCAECB) != (self.transition is not None):
            raise ValidationError("a transition is required for FCAECB and only for FCAECB")

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if self.d == 1 else x.reshape(1, -1)
        if x.shape[1] != self.d:
            raise DimensionMismatch(f"expected covariates of dimension {self.d}, got {x.shape[1]}")
        m0, m1 = self.outcome_models
        tau = m1.predict(x) - m0.predict(x)
        if self.method == FCAECB:
            tau = tau + self.transition.power(x, self.mu) * bias_at(self.nuisances, self.nuisances.T, x)
        elif self.method == CAECB:
            tau = tau + bias_at(self.nuisances, self.step, x)
        return tau


def predict_tau(model: TauModel, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != model.d:
        raise DimensionMismatch(f"expected a covariate vector of length {model.d}, got {x.shape[0]}")
    return float(model.predict(x.reshape(1, -1))[0])


def _eval_covariates(ds: CombinedDataset, population: str) -> np.ndarray:
    if population == "observational":
        return ds.x[ds.group == OBSERVATIONAL]
    if population == "pooled":
        return ds.x
    raise ValidationError(f"eval population must be 'observational' or 'pooled', got {population!r}")


def _resolve_horizon(ds: CombinedDataset, horizon: Horizon) -> HorizonChoice | None:
    if horizon is None or (isinstance(horizon, str) and horizon == "all"):
        return None
    if isinstance(horizon, str):
        if horizon != "auto":
            raise ValidationError(f"horizon must be 'all', 'auto' or a step list, got {horizon!r}")
        return select_horizon(ds.T, ds.long_index, candidate_subsets(ds.T, ds.long_index))
    horizon = list(horizon)
    if horizon and isinstance(horizon[0], (list, tuple)):
        return select_horizon(ds.T, ds.long_index, horizon)
    return horizon_for(horizon, ds.long_index, ds.T)


def estimate_fcaecb(
    dataset: CombinedDataset,
    nuisance_spec: RegressorSpec,
    transition_spec: RegressorSpec,
    *,
    splitting: bool = False,
    seed: int = 0,
    guard_epsilon: float = DEFAULT_GUARD,
    horizon: Horizon = None,
    refit_full: bool = False,
    eval_population: str = "observational",
    nuisances: NuisanceSet | None = None,
) -> TauModel:
    """Fit the sequential-bias estimator.

    Args:
        dataset: merged sample with ``T >= 2``.
        nuisance_spec: learner for the ``4T + 2`` conditional means.
        transition_spec: learner family for ``f``.
        splitting: fit nuisances on one stratified half and the transition on
            the other half's covariates.
        seed: split seed.
        guard_epsilon: near-zero bias threshold (k-NN transitions only).
        horizon: ``None``/``"all"`` uses every step; ``"auto"`` searches all
            equally spaced subsets; a step list fixes the subset; a list of
            step lists restricts the search to those candidates.
        refit_full: with splitting, refit the nuisances on the full sample
            for the final formula.
        eval_population: covariates on which the bias panel is built,
            ``"observational"`` or ``"pooled"``.
        nuisances: pre-fitted full-sample nuisances to reuse (only valid
            without splitting and without a step subset).
    """
    choice = _resolve_horizon(dataset, horizon)
    ds = dataset if choice is None else select_time_subset(dataset, choice.kept_steps)
    if ds.T < 2:
        raise ValidationError("FCAECB needs at least two short-term steps")
    if choice is None:
        choice = HorizonChoice(tuple(range(1, ds.T + 1)), ds.T, ds.mu)
    if nuisances is not None and (splitting or ds is not dataset):
        raise ValidationError("pre-fitted nuisances can only be reused without splitting or step subsets")

    if splitting:
        pair = split_halves(ds, seed)
        nuis = fit_nuisances(pair.part_a, nuisance_spec)
        points = _eval_covariates(pair.part_b, eval_population)
        source = f"split seed={seed}: nuisances on part_a, panel on part_b ({eval_population})"
    else:
        ds.check_positivity()
        nuis = nuisances if nuisances is not None else fit_nuisances(ds, nuisance_spec)
        points = _eval_covariates(ds, eval_population)
        source = f"full sample ({eval_population})"

    panel = build_panel(nuis, points, source)
    transition = fit_transition(panel, transition_spec, guard_epsilon)
    final = fit_nuisances(ds, nuisance_spec) if (splitting and refit_full) else nuis
    return TauModel(
        FCAECB,
        final.mu_Y_O,
        ds.d,
        nuisances=final,
        transition=transition,
        horizon=choice,
        mu=ds.mu,
        splitting=seed if splitting else None,
    )


def with_transition(model: TauModel, transition: BiasTransition) -> TauModel:
    """Copy of an FCAECB model with a different transition."""
    return TauModel(
        model.method, model.outcome_models, model.d, model.nuisances, transition, model.horizon, model.mu,
        model.step, model.splitting,
    )


def constant_transition(value: float, d: int) -> BiasTransition:
    """A transition that is exactly ``value`` everywhere (degree-1 polynomial)."""
    coef = np.zeros(1 + d)
    coef[0] = value
    model = FittedModel(RegressorSpec.ols(1), d, coef=coef)
    return BiasTransition(model, 0.0, 0, {"constant": value})


def estimate_caecb(
    dataset: CombinedDataset,
    s_index: StepChoice,
    spec: RegressorSpec,
    *,
    seed: int = 0,
    nuisances: NuisanceSet | None = None,
) -> TauModel:
    """Single-step equi-bias estimator; ``s_index`` is first/middle/last/random or a step."""
    step = resolve_step(dataset.T, s_index, seed)
    if nuisances is None:
        dataset.check_positivity()
        nuisances = fit_nuisances(dataset, spec)
    return TauModel(CAECB, nuisances.mu_Y_O, dataset.d, nuisances=nuisances, step=step)


def _arm_models(x: np.ndarray, y: np.ndarray, a: np.ndarray, group: str, spec: RegressorSpec):
    models = []
    for arm in (0, 1):
        m = a == arm
        if not m.any():
            raise EmptyStratum(group, arm)
        models.append(regress.fit(spec, x[m], y[m]))
    return tuple(models)


def estimate_tlearner_obs(dataset: CombinedDataset, spec: RegressorSpec) -> TauModel:
    """Per-arm regressions of the observational long-term outcome, no bias correction."""
    o = dataset.group == OBSERVATIONAL
    models = _arm_models(dataset.x[o], dataset.y[o], dataset.a[o], OBSERVATIONAL, spec)
    return TauModel(TLEARNER_OBS, models, dataset.d)


def estimate_tlearner_exp_idealized(
    dataset: CombinedDataset, experimental_y, spec: RegressorSpec
) -> TauModel:
    """Per-arm regressions of the experimental long-term outcome.

    ``experimental_y`` holds the (normally unobservable) long-term outcome of
    each experimental row, in dataset order; only a simulator can supply it.
    """
    e = dataset.group == EXPERIMENTAL
    if experimental_y is None:
        raise MissingExperimentalOutcome("experimental long-term outcomes are required")
    y = np.asarray(experimental_y, dtype=float).reshape(-1)
    if y.shape[0] != int(e.sum()) or not np.isfinite(y).all():
        raise MissingExperimentalOutcome(
            f"need {int(e.sum())} finite experimental long-term outcomes, got {y.shape[0]}"
        )
    models = _arm_models(dataset.x[e], y, dataset.a[e], EXPERIMENTAL, spec)
    return TauModel(TLEARNER_EXP, models, dataset.d)
