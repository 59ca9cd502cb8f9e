"""Bias panels, the one-step bias transition ``f`` and its short-horizon R^2 check.

The transition is fitted by minimising

    sum_t sum_i (omega_{t+1}(x_i) - f(x_i) * omega_t(x_i))^2

over the chosen learner family. For polynomial families this is an ordinary
least-squares problem whose design rows are the basis vectors scaled by
``omega_t(x_i)``. The k-NN family has no global design, so it smooths the
pointwise ratio ``omega_{t+1} / omega_t`` with weights ``omega_t^2``, which
minimises the same objective locally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import regress
from .errors import AllPairsDegenerate, ValidationError, ZeroVariance
from .nuisance import NuisanceSet, bias_matrix
from .regress import FittedModel, RegressorSpec

DEFAULT_GUARD = 1e-6


@dataclass(frozen=True, eq=False)
class BiasPanel:
    """``biases[i, t-1]`` is the estimated bias at step ``t`` for ``eval_points[i]``."""

    eval_points: np.ndarray
    biases: np.ndarray
    source: str = ""

    def __post_init__(self):
        pts = np.asarray(self.eval_points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        b = np.asarray(self.biases, dtype=float)
        if b.ndim != 2 or b.shape[0] != pts.shape[0]:
            raise ValidationError("biases must be an (n_eval, T) matrix matching eval_points")
        if b.shape[1] < 2:
            raise ValidationError("a bias panel needs at least two steps")
        if not np.isfinite(b).all():
            raise ValidationError("bias panel contains non-finite entries")
        object.__setattr__(self, "eval_points", pts)
        object.__setattr__(self, "biases", b)

    @property
    def T(self) -> int:
        return self.biases.shape[1]

    @property
    def n_eval(self) -> int:
        return self.biases.shape[0]


@dataclass(frozen=True, eq=False)
class BiasTransition:
    model: FittedModel
    guard_epsilon: float
    pairs_used: int
    diagnostics: dict = field(default_factory=dict)

    def __call__(self, x) -> np.ndarray:
        return self.model.predict(x)

    def power(self, x, mu: int) -> np.ndarray:
        return _int_power(self.model.predict(x), mu)


def build_panel(nuisances: NuisanceSet, eval_points, source: str = "") -> BiasPanel:
    pts = np.asarray(eval_points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1) if nuisances.d == 1 else pts.reshape(1, -1)
    if pts.shape[0] == 0:
        raise ValidationError("eval_points is empty")
    return BiasPanel(pts, bias_matrix(nuisances, pts), source)


def _pairs(panel: BiasPanel, transitions: Sequence[int]):
    x = np.vstack([panel.eval_points] * len(transitions))
    cur = np.concatenate([panel.biases[:, t - 1] for t in transitions])
    nxt = np.concatenate([panel.biases[:, t] for t in transitions])
    return x, cur, nxt


def fit_transition(
    panel: BiasPanel,
    spec: RegressorSpec,
    guard_epsilon: float = DEFAULT_GUARD,
    transitions: Sequence[int] | None = None,
) -> BiasTransition:
    """Fit ``f`` on the pairs ``t -> t+1`` for ``t`` in ``transitions`` (default: all)."""
    if guard_epsilon < 0:
        raise ValidationError("guard_epsilon must be non-negative")
    if transitions is None:
        transitions = range(1, panel.T)
    transitions = list(transitions)
    if not transitions or min(transitions) < 1 or max(transitions) > panel.T - 1:
        raise ValidationError(f"transitions must be a non-empty subset of 1..{panel.T - 1}")
    x, cur, nxt = _pairs(panel, transitions)
    total = cur.shape[0]
    near_zero = int((np.abs(cur) <= guard_epsilon).sum())

    if spec.is_polynomial:
        model = regress.fit(spec, x, nxt, multipliers=cur)
        used, dropped = total, 0
        degenerate = not np.any(cur)
        resid = nxt - model.predict(x) * cur
    else:
        keep = np.abs(cur) > guard_epsilon
        if not keep.any():
            raise AllPairsDegenerate(
                f"all {total} bias pairs are within {guard_epsilon} of zero; the transition is unidentified"
            )
        model = regress.fit(spec, x[keep], nxt[keep] / cur[keep], weights=cur[keep] ** 2)
        used, dropped = int(keep.sum()), int(total - keep.sum())
        degenerate = False
        resid = nxt[keep] - model.predict(x[keep]) * cur[keep]

    diagnostics = {
        "residual_sse": float(resid @ resid),
        "dropped_pairs": dropped,
        "near_zero_pairs": near_zero,
        "ridge_fallback": bool(model.ridge_fallback),
        "degenerate": bool(degenerate),
        "transitions": tuple(transitions),
    }
    return BiasTransition(model, guard_epsilon, used, diagnostics)


def _int_power(base: np.ndarray, mu: int) -> np.ndarray:
    if int(mu) != mu or mu < 1:
        raise ValidationError(f"mu must be a positive integer, got {mu}")
    out = np.array(base, dtype=float, copy=True)
    for _ in range(int(mu) - 1):
        out = out * base
    return out


def transition_power(transition: BiasTransition, x, mu: int) -> float:
    """``f(x) ** mu`` at a single point, by repeated multiplication."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return float(transition.power(x, mu)[0])


@dataclass(frozen=True)
class AssumptionTestResult:
    r2: float
    train_transitions: tuple[int, ...]
    test_transition: int
    pairs_used: int
    dropped_pairs: int
    residual_sse: float
    held_out_sse: float
    held_out_sst: float


def assumption_test(
    panel: BiasPanel, spec: RegressorSpec, guard_epsilon: float = DEFAULT_GUARD
) -> AssumptionTestResult:
    """Fit ``f`` on transitions ``1..T-2`` and score it on ``T-1 -> T``."""
    if panel.T < 3:
        raise ValidationError(f"the assumption test needs T >= 3 short-term steps, got {panel.T}")
    train = list(range(1, panel.T - 1))
    tr = fit_transition(panel, spec, guard_epsilon, transitions=train)
    prev = panel.biases[:, -2]
    last = panel.biases[:, -1]
    resid = last - tr(panel.eval_points) * prev
    sse = float(resid @ resid)
    centred = last - last.mean()
    sst = float(centred @ centred)
    if sst == 0.0:
        raise ZeroVariance("held-out bias column is constant; R^2 is undefined")
    return AssumptionTestResult(
        r2=1.0 - sse / sst,
        train_transitions=tuple(train),
        test_transition=panel.T - 1,
        pairs_used=tr.pairs_used,
        dropped_pairs=tr.diagnostics["dropped_pairs"],
        residual_sse=tr.diagnostics["residual_sse"],
        held_out_sse=sse,
        held_out_sst=sst,
    )


def assumption_r2(panel: BiasPanel, spec: RegressorSpec, guard_epsilon: float = DEFAULT_GUARD) -> float:
    """Held-out R^2 of the fitted transition on the last observed step pair."""
    return assumption_test(panel, spec, guard_epsilon).r2
