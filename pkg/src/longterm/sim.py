"""Synthetic benchmark generator with analytic ground truth, and an exact
discrete population oracle for the identification formulas.

Generator
---------
Treatment is drawn per group (``P(A=1|E) = 0.4``, ``P(A=1|O) = 0.6``). Each
covariate/latent pair is bivariate normal: in the experiment ``X ~ N((2A-1)/2, 1)``
independent of ``U ~ N(0, 1)``; in the observational group
``X ~ N((1-2A)/2, 1)`` and ``corr(X, U) = strength * (A - 0.5)``. Outcomes follow

    S_t = A + 0.1*A*X + X + U + (S_1 + ... + S_{t-1}) + eps_t

so ``S_t = 2**(t-1) * (A + 0.1*A*X + X + U) + noise``. Hence
``tau(x) = 2**(L-1) * (1 + 0.1*x)`` and ``omega_t(x) = -strength * 2**(t-1) * x``
with ``L = T + mu``. With ``d > 1`` every coordinate gets its own (X_j, U_j)
pair and the outcome uses their sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import EXPERIMENTAL, OBSERVATIONAL, CombinedDataset, write_csv
from .errors import DimensionMismatch, OracleSpecViolatesAssumption, ValidationError
from .dynamics import build_panel, fit_transition
from .estimator import FCAECB, HorizonChoice, TauModel
from .nuisance import NuisanceSet
from .regress import RegressorSpec

NO_BREAK = "none"
ADDITIVE_SHIFT = "additive_shift"
TERMINAL_SHIFT = "terminal_shift"


@dataclass(frozen=True)
class BiasBreak:
    """Optional violation of the multiplicative bias recursion.

    ``additive_shift`` makes the population bias follow
    ``omega_{t+1} = 2 * omega_t + c`` at every step; ``terminal_shift`` adds
    ``c`` to the long-term bias only, leaving every short-term step intact.
    Both act as an extra latent confounder: observational treated units get a
    baseline shift on both potential outcomes, so ``tau`` is unchanged.
    """

    kind: str = NO_BREAK
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in (NO_BREAK, ADDITIVE_SHIFT, TERMINAL_SHIFT):
            raise ValidationError(f"unknown bias break {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "BiasBreak":
        text = text.strip().lower()
        if text == NO_BREAK:
            return cls()
        kind, _, value = text.partition(":")
        try:
            return cls(kind, float(value))
        except ValueError:
            raise ValidationError(f"cannot parse bias break {text!r} (use none, additive_shift:C or terminal_shift:C)") from None

    def shift(self, L: int) -> np.ndarray:
        """Baseline shift of observational treated units at steps ``1..L``."""
        h = np.zeros(L)
        if self.kind == ADDITIVE_SHIFT:
            h = -(2.0 ** np.arange(L) - 1.0) * self.c
        elif self.kind == TERMINAL_SHIFT:
            h[-1] = -self.c
        return h

    def __str__(self) -> str:
        return NO_BREAK if self.kind == NO_BREAK else f"{self.kind}:{self.c!r}"


@dataclass(frozen=True)
class SimConfig:
    n_e: int = 2000
    n_o: int = 4000
    T_total: int = 6
    mu: int = 3
    seed: int = 0
    noise_sd: float = 1.0
    p_treat_E: float = 0.4
    p_treat_O: float = 0.6
    confounding_strength: float = 1.0
    bias_break: BiasBreak = field(default_factory=BiasBreak)
    d: int = 1

    def __post_init__(self):
        if self.n_e < 1 or self.n_o < 1:
            raise ValidationError("n_e and n_o must be >= 1")
        if self.T_total < 2:
            raise ValidationError("T_total must be >= 2")
        if self.mu < 1:
            raise ValidationError("mu must be >= 1")
        if self.noise_sd < 0:
            raise ValidationError("noise_sd must be >= 0")
        if not (0 < self.p_treat_E < 1 and 0 < self.p_treat_O < 1):
            raise ValidationError("treatment probabilities must lie strictly between 0 and 1")
        if abs(self.confounding_strength) > 2:
            # corr(X, U) = strength * (A - 0.5) must stay in [-1, 1]
            raise ValidationError("|confounding_strength| must be <= 2")
        if self.d < 1:
            raise ValidationError("d must be >= 1")

    @property
    def long_index(self) -> int:
        return self.T_total + self.mu


@dataclass(frozen=True, eq=False)
class TruthTable:
    """Ground truth on the observational rows (in dataset order).

    ``true_bias[i, t-1]`` is the population bias at step ``t`` for
    ``eval_points[i]``, for ``t = 1..T+mu``. ``experimental_y`` is the
    long-term outcome of every experimental row, hidden from the dataset.
    """

    eval_points: np.ndarray
    true_tau: np.ndarray
    true_bias: np.ndarray
    experimental_y: np.ndarray


def true_tau(config: SimConfig, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != config.d:
        raise DimensionMismatch(f"expected a covariate vector of length {config.d}")
    return float(2.0 ** (config.long_index - 1) * (1.0 + 0.1 * x.sum()))


def true_bias(config: SimConfig, t: int, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    base = -config.confounding_strength * 2.0 ** (t - 1) * x.sum()
    return float(base - config.bias_break.shift(config.long_index)[t - 1])


def _draw_group(ss: np.random.SeedSequence, n: int, group: str, cfg: SimConfig):
    # one stream per variable and one array call each, so a larger n extends
    # rather than reshuffles the sample
    sa, sxu, seps = (np.random.default_rng(s) for s in ss.spawn(3))
    d, L = cfg.d, cfg.long_index
    p = cfg.p_treat_E if group == EXPERIMENTAL else cfg.p_treat_O
    a = (sa.random(n) < p).astype(float)
    z = sxu.standard_normal((n, 2 * d))
    z_x, z_u = z[:, :d], z[:, d:]
    if group == EXPERIMENTAL:
        x = ((2 * a - 1) / 2)[:, None] + z_x
        u = z_u
    else:
        r = (cfg.confounding_strength * (a - 0.5))[:, None]
        x = ((1 - 2 * a) / 2)[:, None] + z_x
        u = r * z_x + np.sqrt(1.0 - r**2) * z_u
    base = a + 0.1 * a * x.sum(axis=1) + x.sum(axis=1) + u.sum(axis=1)
    eps = seps.standard_normal((n, L)) * cfg.noise_sd
    s = np.empty((n, L))
    running = np.zeros(n)
    for t in range(L):
        s[:, t] = base + running + eps[:, t]
        running += s[:, t]
    if group == OBSERVATIONAL and cfg.bias_break.kind != NO_BREAK:
        s[a == 1] += cfg.bias_break.shift(L)
    return a.astype(int), x, s


def generate(config: SimConfig) -> tuple[CombinedDataset, TruthTable]:
    """Draw one replicate; bit-reproducible for a given config (including seed)."""
    ss_e, ss_o = np.random.SeedSequence(config.seed).spawn(2)
    a_e, x_e, s_e = _draw_group(ss_e, config.n_e, EXPERIMENTAL, config)
    a_o, x_o, s_o = _draw_group(ss_o, config.n_o, OBSERVATIONAL, config)
    T, L = config.T_total, config.long_index
    ds = CombinedDataset(
        group=np.array([EXPERIMENTAL] * config.n_e + [OBSERVATIONAL] * config.n_o),
        a=np.concatenate([a_e, a_o]),
        x=np.vstack([x_e, x_o]),
        s=np.vstack([s_e[:, :T], s_o[:, :T]]),
        y=np.concatenate([np.full(config.n_e, np.nan), s_o[:, L - 1]]),
        mu=config.mu,
    )
    xs = x_o.sum(axis=1)
    steps = 2.0 ** np.arange(L)
    bias = -config.confounding_strength * xs[:, None] * steps[None, :] - config.bias_break.shift(L)[None, :]
    truth = TruthTable(
        eval_points=x_o,
        true_tau=2.0 ** (L - 1) * (1.0 + 0.1 * xs),
        true_bias=bias,
        experimental_y=s_e[:, L - 1].copy(),
    )
    return ds, truth


def write_truth_csv(truth: TruthTable, path: str | Path) -> None:
    d = truth.eval_points.shape[1]
    L = truth.true_bias.shape[1]
    header = [f"x_{j}" for j in range(1, d + 1)] + ["tau_true"] + [f"omega_{t}" for t in range(1, L + 1)]
    lines = [",".join(header)]
    for i in range(truth.true_tau.shape[0]):
        row = list(truth.eval_points[i]) + [truth.true_tau[i]] + list(truth.true_bias[i])
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_simulation(config: SimConfig, out_dir: str | Path) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds, truth = generate(config)
    write_csv(ds, out / "data.csv")
    write_truth_csv(truth, out / "truth.csv")
    return out / "data.csv", out / "truth.csv"


# --- exact discrete population oracle -------------------------------------

_G = {EXPERIMENTAL: 0, OBSERVATIONAL: 1}


@dataclass(frozen=True, eq=False)
class OracleLaw:
    """A finite joint law of (G, X, U, A) with deterministic outcome tables.

    Attributes:
        x_values: ``(nx, d)`` covariate grid.
        u_values: ``(nu,)`` latent grid (labels only; outcomes are tabulated).
        p_gx: ``(2, nx)`` joint mass of (G, X); row 0 is E, row 1 is O.
        p_u: ``(2, nx, nu)`` conditional mass of U given (X, G).
        p_a1: ``(2, nx, nu)`` probability of A = 1 given (X, U, G).
        outcomes: ``(L, 2, nx, nu)`` outcome ``m_t(a, x, u)`` for ``t = 1..L``.
        T: number of short-term steps; the long-term outcome is step ``L = T + mu``.
        f_star: ``(nx,)`` claimed bias transition, or None.
    """

    x_values: np.ndarray
    u_values: np.ndarray
    p_gx: np.ndarray
    p_u: np.ndarray
    p_a1: np.ndarray
    outcomes: np.ndarray
    T: int
    f_star: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.outcomes.shape[0]

    @property
    def mu(self) -> int:
        return self.L - self.T

    def p_u_given_a(self, g: int, a: int) -> np.ndarray:
        """``(nx, nu)`` mass of U given (X, A=a, G=g)."""
        pa = self.p_a1[g] if a == 1 else 1.0 - self.p_a1[g]
        joint = self.p_u[g] * pa
        return joint / joint.sum(axis=1, keepdims=True)

    def cond_mean(self, g: int, t: int, a: int) -> np.ndarray:
        """E[S_t | A=a, X, G=g] on the grid (``t`` is 1-based)."""
        return (self.outcomes[t - 1, a] * self.p_u_given_a(g, a)).sum(axis=1)


@dataclass(frozen=True, eq=False)
class OracleReport:
    omega: np.ndarray  # (L, nx)
    tau: np.ndarray
    outcome_difference: np.ndarray
    multistep_rhs: np.ndarray | None
    single_step_rhs: np.ndarray
    recursion_max_error: float | None
    multistep_max_error: float | None
    single_step_max_error: float


def _check_law(law: OracleLaw, require_fcaecb: bool, tol: float) -> None:
    nx = law.x_values.shape[0]
    shapes_ok = (
        law.p_gx.shape == (2, nx)
        and law.p_u.shape == (2, nx, law.u_values.shape[0])
        and law.p_a1.shape == law.p_u.shape
        and law.outcomes.shape[1:] == (2, nx, law.u_values.shape[0])
        and 1 <= law.T < law.L
    )
    if not shapes_ok:
        raise ValidationError("oracle law arrays have inconsistent shapes")
    if (law.p_gx < 0).any() or abs(law.p_gx.sum() - 1) > tol:
        raise ValidationError("p_gx must be a probability table")
    if (law.p_u < 0).any() or np.abs(law.p_u.sum(axis=2) - 1).max() > tol:
        raise ValidationError("p_u must be a conditional probability table")

    for xi in range(nx):
        for g, name in ((0, EXPERIMENTAL), (1, OBSERVATIONAL)):
            if law.p_gx[g, xi] <= 0:
                raise OracleSpecViolatesAssumption("Positivity", f"P(G={name}, X=x[{xi}]) = 0")
            pa1 = float(law.p_u[g, xi] @ law.p_a1[g, xi])
            if not 0 < pa1 < 1:
                raise OracleSpecViolatesAssumption("Positivity", f"P(A=1 | X=x[{xi}], G={name}) = {pa1}")
        support = law.p_u[0, xi] > 0
        pe = law.p_a1[0, xi][support]
        if pe.size and np.ptp(pe) > tol:
            raise OracleSpecViolatesAssumption("Experimental randomization", f"P(A=1 | X=x[{xi}], U, G=E) varies with U")
        if np.abs(law.p_u[0, xi] - law.p_u[1, xi]).max() > tol:
            raise OracleSpecViolatesAssumption("Data combination", f"U | X=x[{xi}] differs between groups")

    if require_fcaecb:
        if law.f_star is None:
            raise ValidationError("require_fcaecb needs f_star")
        p0 = law.p_u_given_a(1, 0)
        p1 = law.p_u_given_a(1, 1)
        for t in range(1, law.L):
            for a in (0, 1):
                b_now = (law.outcomes[t - 1, a] * (p0 - p1)).sum(axis=1)
                b_next = (law.outcomes[t, a] * (p0 - p1)).sum(axis=1)
                gap = np.abs(b_next - law.f_star * b_now)
                scale = 1.0 + np.abs(b_next)
                if (gap > tol * scale).any():
                    xi = int(np.argmax(gap))
                    raise OracleSpecViolatesAssumption("FCAECB", f"step {t}->{t + 1}, a={a}, x[{xi}]")


def population_oracle(law: OracleLaw, require_fcaecb: bool = True, tol: float = 1e-12) -> OracleReport:
    """Evaluate every conditional mean exactly and compare both identification formulas with the truth."""
    _check_law(law, require_fcaecb, tol)
    E, O = 0, 1
    omega = np.array(
        [
            law.cond_mean(E, t, 1) - law.cond_mean(E, t, 0) + law.cond_mean(O, t, 0) - law.cond_mean(O, t, 1)
            for t in range(1, law.L + 1)
        ]
    )
    p_x = law.p_gx.sum(axis=0)
    p_u_x = (law.p_gx[:, :, None] * law.p_u).sum(axis=0) / p_x[:, None]
    tau = ((law.outcomes[-1, 1] - law.outcomes[-1, 0]) * p_u_x).sum(axis=1)
    obs_diff = law.cond_mean(O, law.L, 1) - law.cond_mean(O, law.L, 0)
    omega_T = omega[law.T - 1]
    thm1 = obs_diff + omega_T

    prop1 = thm2 = thm2_err = None
    if law.f_star is not None:
        prop1 = float(np.abs(omega[1:] - law.f_star[None, :] * omega[:-1]).max())
        thm2 = obs_diff + law.f_star**law.mu * omega_T
        thm2_err = float(np.abs(thm2 - tau).max())
    return OracleReport(
        omega=omega,
        tau=tau,
        outcome_difference=obs_diff,
        multistep_rhs=thm2,
        single_step_rhs=thm1,
        recursion_max_error=prop1,
        multistep_max_error=thm2_err,
        single_step_max_error=float(np.abs(thm1 - tau).max()),
    )


def make_oracle_law(
    f_star,
    T: int,
    mu: int,
    seed: int = 0,
    nx: int = 2,
    nu: int = 2,
    break_c: float = 0.0,
) -> OracleLaw:
    """Random law that satisfies the data-combination assumptions and the
    bias recursion with transition ``f_star`` (a constant or one value per grid point).

    Outcomes are ``m_t(a, x, u) = base_t(a, x) + g_t(x) * u`` with
    ``g_{t+1} = f_star * g_t``, so the arm-wise bias obeys the recursion
    exactly. ``break_c`` adds ``break_c`` to the long-term outcome of units at
    the last latent level, violating the recursion at the final step only.
    """
    rng = np.random.default_rng(seed)
    L = T + mu
    f = np.broadcast_to(np.asarray(f_star, dtype=float), (nx,)).copy()
    x_values = np.arange(nx, dtype=float).reshape(-1, 1) - (nx - 1) / 2
    u_values = np.linspace(-1.0, 1.0, nu)
    p_gx = rng.uniform(0.5, 1.5, size=(2, nx))
    p_gx /= p_gx.sum()
    pu = rng.uniform(0.5, 1.5, size=(nx, nu))
    pu /= pu.sum(axis=1, keepdims=True)
    p_u = np.stack([pu, pu])
    p_a1 = np.empty((2, nx, nu))
    p_a1[0] = rng.uniform(0.2, 0.8, size=(nx, 1))
    p_a1[1] = rng.uniform(0.1, 0.9, size=(nx, nu))
    base = rng.normal(size=(L, 2, nx))
    g = np.empty((L, nx))
    g[0] = rng.uniform(0.5, 1.5, size=nx) * rng.choice([-1.0, 1.0], size=nx)
    for t in range(1, L):
        g[t] = f * g[t - 1]
    outcomes = base[:, :, :, None] + g[:, None, :, None] * u_values[None, None, None, :]
    if break_c:
        outcomes[-1, :, :, -1] += break_c
    return OracleLaw(x_values, u_values, p_gx, p_u, p_a1, outcomes, T, f)


@dataclass(frozen=True, eq=False)
class TableModel:
    """Exact conditional mean on a finite covariate grid."""

    x_values: np.ndarray
    values: np.ndarray

    @property
    def d(self) -> int:
        return self.x_values.shape[1]

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.d)
        hit = np.all(np.isclose(x[:, None, :], self.x_values[None, :, :], rtol=0, atol=1e-12), axis=2)
        if not hit.any(axis=1).all():
            raise ValidationError("table model evaluated off its covariate grid")
        return self.values[hit.argmax(axis=1)]


def oracle_nuisances(law: OracleLaw) -> NuisanceSet:
    """Nuisance set whose models return the exact population conditional means."""
    xs = law.x_values

    def pair(g: int, t: int):
        return (TableModel(xs, law.cond_mean(g, t, 0)), TableModel(xs, law.cond_mean(g, t, 1)))

    return NuisanceSet(
        mu_S_E=tuple(pair(0, t) for t in range(1, law.T + 1)),
        mu_S_O=tuple(pair(1, t) for t in range(1, law.T + 1)),
        mu_Y_O=pair(1, law.L),
        d=xs.shape[1],
    )


def oracle_tau_model(law: OracleLaw, transition_spec=None):
    """FCAECB model assembled from exact nuisances, with ``f`` fitted on the
    exact bias panel over the covariate grid."""
    nuis = oracle_nuisances(law)
    spec = transition_spec or RegressorSpec.ols(1)
    panel = build_panel(nuis, law.x_values, "population oracle")
    tr = fit_transition(panel, spec)
    horizon = HorizonChoice(tuple(range(1, law.T + 1)), law.T, law.mu) if law.T >= 2 else None
    return TauModel(FCAECB, nuis.mu_Y_O, nuis.d, nuisances=nuis, transition=tr, horizon=horizon, mu=law.mu)


def unconfounded(config: SimConfig) -> SimConfig:
    """Same config with the latent confounding switched off."""
    return replace(config, confounding_strength=0.0)


__all__ = [
    "ADDITIVE_SHIFT",
    "BiasBreak",
    "NO_BREAK",
    "OracleLaw",
    "OracleReport",
    "SimConfig",
    "TERMINAL_SHIFT",
    "TableModel",
    "TruthTable",
    "generate",
    "make_oracle_law",
    "oracle_nuisances",
    "oracle_tau_model",
    "population_oracle",
    "true_bias",
    "true_tau",
    "unconfounded",
    "write_simulation",
    "write_truth_csv",
]

