"""Flat ``key = value`` benchmark configuration files.

Lines starting with ``#`` and trailing ``# ...`` comments are ignored. List
values are comma separated; a step subset is written ``1/3/5`` or ``1..6``.
Unknown or repeated keys are an error.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..errors import ConfigError, ValidationError
from ..regress import RegressorSpec
from ..sim import BiasBreak, SimConfig

METHODS = (
    "fcaecb",
    "caecb-first",
    "caecb-middle",
    "caecb-last",
    "caecb-random",
    "tlearner-obs",
    "tlearner-exp",
)


def parse_steps(text: str) -> tuple[int, ...]:
    """``"1/3/5"``, ``"1,3,5"`` or ``"1..6"`` to a tuple of steps."""
    text = text.strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            steps = tuple(range(int(lo), int(hi) + 1))
        else:
            steps = tuple(int(v) for v in text.replace("/", ",").split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"cannot parse step list {text!r}") from None
    if not steps:
        raise ConfigError(f"empty step list {text!r}")
    return steps


def format_steps(steps) -> str:
    return "/".join(str(s) for s in steps)


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _opt_int(text: str) -> int | None:
    return None if text.lower() in ("", "none") else int(text)


def _horizon(text: str):
    low = text.lower()
    return low if low in ("all", "auto") else parse_steps(text)


def _methods(text: str) -> tuple[str, ...]:
    out = tuple(v.strip().lower() for v in text.split(",") if v.strip())
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise ConfigError(f"unknown methods {bad} (choose from {', '.join(METHODS)})")
    return out


@dataclass(frozen=True)
class BenchConfig:
    """Everything a sweep needs: base simulation cell, estimator options and grid."""

    n_e: int = 2000
    n_o: int = 4000
    T_total: int = 6
    mu: int = 3
    noise_sd: float = 1.0
    p_treat_E: float = 0.4
    p_treat_O: float = 0.6
    confounding_strength: float = 1.0
    bias_break: BiasBreak = field(default_factory=BiasBreak)
    d: int = 1

    nuisance: RegressorSpec = field(default_factory=RegressorSpec)
    transition: RegressorSpec = field(default_factory=RegressorSpec)
    splitting: bool = False
    guard_epsilon: float = 1e-6
    horizon: object = "all"
    refit_full: bool = False
    eval_population: str = "observational"

    replicates: int = 50
    base_seed: int = 0
    methods: tuple[str, ...] = ("fcaecb", "tlearner-obs")
    sweep_mu: tuple[int, ...] = ()
    sweep_T: tuple[int, ...] = ()
    sweep_ne: tuple[int, ...] = ()
    ne_ratio: float = 2.0
    sweep_long_index: int | None = None
    sweep_horizon: tuple[tuple[int, ...], ...] = ()
    workers: int = 1
    failure_threshold: float = 0.1

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not 0 <= self.failure_threshold <= 1:
            raise ConfigError("failure_threshold must lie in [0, 1]")
        if self.sweep_long_index is not None and self.sweep_mu:
            raise ConfigError("sweep_long_index fixes mu = long_index - T; it cannot be combined with sweep_mu")
        if self.eval_population not in ("observational", "pooled"):
            raise ConfigError("eval_population must be observational or pooled")
        self.sim_config(self.base_seed)

    def sim_config(self, seed: int, **overrides) -> SimConfig:
        kw = {f: getattr(self, f) for f in _SIM_KEYS}
        kw.update(overrides)
        try:
            return SimConfig(seed=seed, **kw)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from None

    def canonical(self) -> str:
        """Stable text form, one ``key = value`` per line in field order."""
        return "".join(f"{f.name} = {_render(getattr(self, f.name))}\n" for f in fields(self))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


_SIM_KEYS = ("n_e", "n_o", "T_total", "mu", "noise_sd", "p_treat_E", "p_treat_O", "confounding_strength", "bias_break", "d")

_PARSERS = {
    "n_e": int,
    "n_o": int,
    "T_total": int,
    "mu": int,
    "noise_sd": float,
    "p_treat_E": float,
    "p_treat_O": float,
    "confounding_strength": float,
    "bias_break": BiasBreak.parse,
    "d": int,
    "nuisance": RegressorSpec.parse,
    "transition": RegressorSpec.parse,
    "splitting": _bool,
    "guard_epsilon": float,
    "horizon": _horizon,
    "refit_full": _bool,
    "eval_population": str.lower,
    "replicates": int,
    "base_seed": int,
    "methods": _methods,
    "sweep_mu": _ints,
    "sweep_T": _ints,
    "sweep_ne": _ints,
    "ne_ratio": float,
    "sweep_long_index": _opt_int,
    "sweep_horizon": lambda v: tuple(parse_steps(s) for s in v.split(",") if s.strip()),
    "workers": int,
    "failure_threshold": float,
}
# the simulator's own seed key is accepted as a synonym for the first replicate seed
_ALIASES = {"seed": "base_seed"}


def _render(value) -> str:
    if isinstance(value, tuple):
        return ",".join(format_steps(v) if isinstance(v, tuple) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, source: str = "<config>") -> BenchConfig:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = _ALIASES.get(key, key)
        if key not in _PARSERS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: key {key!r} given twice")
        try:
            values[key] = _PARSERS[key](value)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key!r}: {exc}") from None
    return BenchConfig(**values)


def load_config(path: str | Path) -> BenchConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))


def with_overrides(config: BenchConfig, **kw) -> BenchConfig:
    return replace(config, **kw)
