"""Replicated generate -> estimate -> score runs and grid sweeps.

Every replicate of a cell uses seed ``base_seed + r``. Work units are keyed
by (cell, seed) and results are collected in submission order, so the output
is identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from pathlib import Path

import numpy as np

from ..errors import LongTermError
from ..estimator import estimate_caecb, estimate_fcaecb, estimate_tlearner_exp_idealized, estimate_tlearner_obs
from ..nuisance import fit_nuisances
from ..sim import SimConfig, generate
from .config import BenchConfig, format_steps
from .metrics import MetricReport

RESULTS_HEADER = ("axis_mu", "axis_T", "axis_ne", "method", "metric", "mean", "sd", "se", "R")
LOG_HEADER = ("axis_mu", "axis_T", "axis_ne", "method", "seed", "pehe", "ate_error", "error")
METRICS = ("pehe", "ate_error")


@dataclass(frozen=True)
class Cell:
    mu: int
    T: int
    n_e: int
    n_o: int


@dataclass(frozen=True)
class ReplicateRecord:
    cell: Cell
    method: str
    seed: int
    pehe: float = math.nan
    ate_error: float = math.nan
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error


@dataclass(frozen=True)
class CellSummary:
    cell: Cell
    method: str
    metric: str
    mean: float
    sd: float
    se: float
    R: int
    failures: int
    degenerate: bool
    aborted: bool


@dataclass(frozen=True)
class SweepResult:
    summaries: tuple[CellSummary, ...]
    log: tuple[ReplicateRecord, ...] = field(repr=False)

    @property
    def failures(self) -> tuple[ReplicateRecord, ...]:
        return tuple(r for r in self.log if not r.ok)

    def summary(self, method: str, metric: str = "pehe", **axes) -> CellSummary:
        """The unique summary matching ``method``, ``metric`` and any ``mu``/``T``/``n_e`` given."""
        hits = [
            s
            for s in self.summaries
            if s.method == method and s.metric == metric and all(getattr(s.cell, k) == v for k, v in axes.items())
        ]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} summaries match {method}/{metric} {axes}")
        return hits[0]


def method_tags(config: BenchConfig) -> tuple[str, ...]:
    """Expand ``fcaecb`` into one tag per horizon subset when a horizon sweep is set."""
    tags = []
    for m in config.methods:
        if m != "fcaecb":
            tags.append(m)
        elif config.sweep_horizon:
            tags.extend(f"fcaecb:{format_steps(s)}" for s in config.sweep_horizon)
        elif config.horizon == "all":
            tags.append("fcaecb")
        elif config.horizon == "auto":
            tags.append("fcaecb:auto")
        else:
            tags.append(f"fcaecb:{format_steps(config.horizon)}")
    return tuple(tags)


def _horizon_of(tag: str):
    _, _, rest = tag.partition(":")
    if not rest:
        return "all"
    if rest == "auto":
        return "auto"
    return tuple(int(s) for s in rest.split("/"))


def _estimate(tag: str, ds, truth, options: BenchConfig, seed: int, shared):
    if tag.startswith("fcaecb"):
        horizon = _horizon_of(tag)
        reuse = shared() if (horizon == "all" and not options.splitting) else None
        return estimate_fcaecb(
            ds,
            options.nuisance,
            options.transition,
            splitting=options.splitting,
            seed=seed,
            guard_epsilon=options.guard_epsilon,
            horizon=horizon,
            refit_full=options.refit_full,
            eval_population=options.eval_population,
            nuisances=reuse,
        )
    if tag.startswith("caecb-"):
        return estimate_caecb(ds, tag.split("-", 1)[1], options.nuisance, seed=seed, nuisances=shared())
    if tag == "tlearner-obs":
        return estimate_tlearner_obs(ds, options.nuisance)
    if tag == "tlearner-exp":
        return estimate_tlearner_exp_idealized(ds, truth.experimental_y, options.nuisance)
    raise ValueError(f"unknown method tag {tag!r}")


def run_one(sim: SimConfig, tags, options: BenchConfig, cell: Cell | None = None) -> list[ReplicateRecord]:
    """One replicate: draw a sample, fit every method and score it on the observational rows."""
    cell = cell or Cell(sim.mu, sim.T_total, sim.n_e, sim.n_o)
    ds, truth = generate(sim)
    cache = {}

    def shared():
        if "nuis" not in cache:
            ds.check_positivity()
            cache["nuis"] = fit_nuisances(ds, options.nuisance)
        return cache["nuis"]

    fingerprint = options.fingerprint()
    out = []
    for tag in tags:
        try:
            model = _estimate(tag, ds, truth, options, sim.seed, shared)
            rep = MetricReport.evaluate(truth.true_tau, model.predict(truth.eval_points), tag, fingerprint)
            out.append(ReplicateRecord(cell, tag, sim.seed, rep.pehe, rep.ate_error))
        except (LongTermError, np.linalg.LinAlgError, ArithmeticError) as exc:
            out.append(ReplicateRecord(cell, tag, sim.seed, error=f"{type(exc).__name__}: {exc}"))
    return out


def _task(args) -> list[ReplicateRecord]:
    sim, tags, options, cell = args
    return run_one(sim, tags, options, cell)


def _execute(tasks: list, workers: int) -> list[ReplicateRecord]:
    if workers <= 1 or len(tasks) <= 1:
        results = [_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [rec for chunk in results for rec in chunk]


def aggregate(records, cell: Cell, method: str, metric: str, replicates: int, failure_threshold: float) -> CellSummary:
    """Mean, SD (ddof 1) and standard error over the successful replicates of one cell."""
    recs = [r for r in records if r.cell == cell and r.method == method]
    good = np.array([getattr(r, metric) for r in recs if r.ok], dtype=float)
    failures = len(recs) - good.shape[0]
    aborted = good.shape[0] == 0 or failures > failure_threshold * replicates
    if aborted:
        return CellSummary(cell, method, metric, math.nan, math.nan, math.nan, int(good.shape[0]), failures, False, True)
    n = good.shape[0]
    mean = float(good.mean())
    sd = float(good.std(ddof=1)) if n > 1 else 0.0
    return CellSummary(cell, method, metric, mean, sd, sd / math.sqrt(n), n, failures, n == 1, False)


def cells_for(config: BenchConfig) -> list[Cell]:
    mus = config.sweep_mu or (config.mu,)
    Ts = config.sweep_T or (config.T_total,)
    nes = config.sweep_ne or (config.n_e,)
    cells = []
    for mu, T, n_e in product(mus, Ts, nes):
        if config.sweep_long_index is not None:
            mu = config.sweep_long_index - T
        n_o = int(round(config.ne_ratio * n_e)) if config.sweep_ne else config.n_o
        cells.append(Cell(mu, T, n_e, n_o))
    return cells


def _summarise(config: BenchConfig, cells, tags, log) -> SweepResult:
    summaries = tuple(
        aggregate(log, cell, tag, metric, config.replicates, config.failure_threshold)
        for cell in cells
        for tag in tags
        for metric in METRICS
    )
    return SweepResult(summaries, tuple(log))


def run_replicated(
    sim: SimConfig,
    methods,
    R: int,
    base_seed: int = 0,
    options: BenchConfig | None = None,
    workers: int = 1,
) -> SweepResult:
    """``R`` replicates of one cell with seeds ``base_seed .. base_seed + R - 1``.

    ``options`` supplies estimator settings and the failure threshold; the
    simulation cell itself comes from ``sim`` (its own seed is ignored).
    """
    options = options or BenchConfig()
    options = replace(options, replicates=R, base_seed=base_seed, methods=tuple(methods))
    cell = Cell(sim.mu, sim.T_total, sim.n_e, sim.n_o)
    tags = method_tags(options)
    tasks = [(_reseed(sim, base_seed + r), tags, options, cell) for r in range(R)]
    return _summarise(options, [cell], tags, _execute(tasks, workers))


def _reseed(sim: SimConfig, seed: int) -> SimConfig:
    return replace(sim, seed=seed)


def run_sweep(config: BenchConfig, workers: int | None = None) -> SweepResult:
    """Run every grid cell of ``config`` and aggregate per (cell, method, metric)."""
    cells = cells_for(config)
    tags = method_tags(config)
    tasks = [
        (config.sim_config(config.base_seed + r, mu=c.mu, T_total=c.T, n_e=c.n_e, n_o=c.n_o), tags, config, c)
        for c in cells
        for r in range(config.replicates)
    ]
    return _summarise(config, cells, tags, _execute(tasks, config.workers if workers is None else workers))


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, float) else str(v)


def results_csv(result: SweepResult) -> str:
    lines = [",".join(RESULTS_HEADER)]
    for s in result.summaries:
        row = (s.cell.mu, s.cell.T, s.cell.n_e, s.method, s.metric, s.mean, s.sd, s.se, s.R)
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_results(result: SweepResult, path: str | Path) -> None:
    Path(path).write_text(results_csv(result))


def write_log(result: SweepResult, path: str | Path) -> None:
    """Per-replicate log, failures included, for re-aggregation and audit."""
    lines = [",".join(LOG_HEADER)]
    for r in result.log:
        err = r.error.replace(",", ";").replace("\n", " ")
        row = (r.cell.mu, r.cell.T, r.cell.n_e, r.method, r.seed, r.pehe, r.ate_error, err)
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")
