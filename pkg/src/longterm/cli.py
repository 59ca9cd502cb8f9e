"""Command-line entry point: ``longterm {simulate,estimate,assumption-test,bench}``.

Exit codes: 0 success, 2 invalid input, 3 estimation failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench.config import load_config, parse_steps
from .bench.sweep import run_sweep, write_log, write_results
from .data import OBSERVATIONAL, DataSchema, load_csv
from .dynamics import DEFAULT_GUARD, assumption_test, build_panel
from .errors import EstimationError, ValidationError
from .estimator import estimate_caecb, estimate_fcaecb, estimate_tlearner_obs
from .nuisance import fit_nuisances
from .regress import RegressorSpec
from .sim import write_simulation

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ESTIMATION = 3


def _spec(text: str) -> RegressorSpec:
    try:
        return RegressorSpec.parse(text)
    except ValidationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on or off")
    return text == "on"


def _horizon(text: str):
    return text if text in ("auto", "all") else parse_steps(text)


def _step(text: str):
    return int(text) if text.isdigit() else text


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    data, truth = write_simulation(cfg.sim_config(cfg.base_seed), args.out_dir)
    print(f"wrote {data} and {truth}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    ds = load_csv(args.data, DataSchema(mu=args.mu))
    if args.method == "fcaecb":
        model = estimate_fcaecb(
            ds,
            args.nuisance,
            args.transition,
            splitting=args.splitting,
            seed=args.seed,
            guard_epsilon=args.guard_epsilon,
            horizon=args.horizon,
        )
    elif args.method == "caecb":
        model = estimate_caecb(ds, args.step, args.nuisance, seed=args.seed)
    else:
        model = estimate_tlearner_obs(ds, args.nuisance)
    tau = model.predict(ds.x)
    header = [f"x_{j}" for j in range(1, ds.d + 1)] + ["tau_hat"]
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in (*ds.x[i], tau[i])) for i in range(ds.n)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    if model.horizon is not None:
        h = model.horizon
        print(f"steps={'/'.join(map(str, h.kept_steps))} T'={h.effective_T} mu'={h.effective_mu} score={h.score:.6g}")
    print(f"wrote {ds.n} rows to {args.out}")
    return EXIT_OK


def cmd_assumption_test(args) -> int:
    ds = load_csv(args.data, DataSchema(mu=args.mu))
    nuis = fit_nuisances(ds, args.nuisance)
    panel = build_panel(nuis, ds.x[ds.group == OBSERVATIONAL], "full sample (observational)")
    res = assumption_test(panel, args.transition, args.guard_epsilon)
    print(f"r2 = {res.r2:.6f}")
    print(f"train_transitions = {','.join(map(str, res.train_transitions))}")
    print(f"test_transition = {res.test_transition}->{res.test_transition + 1}")
    print(f"pairs_used = {res.pairs_used}")
    print(f"dropped_pairs = {res.dropped_pairs}")
    print(f"train_residual_sse = {res.residual_sse:.6g}")
    print(f"held_out_sse = {res.held_out_sse:.6g}")
    print(f"held_out_sst = {res.held_out_sst:.6g}")
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = load_config(args.config)
    result = run_sweep(cfg, workers=args.workers)
    write_results(result, args.out)
    if args.log:
        write_log(result, args.log)
    for f in result.failures:
        print(f"replicate failed: mu={f.cell.mu} T={f.cell.T} n_e={f.cell.n_e} {f.method} seed={f.seed}: {f.error}", file=sys.stderr)
    aborted = [s for s in result.summaries if s.aborted]
    for s in aborted:
        print(f"cell aborted: mu={s.cell.mu} T={s.cell.T} n_e={s.cell.n_e} {s.method} ({s.failures} failures)", file=sys.stderr)
    print(f"wrote {len(result.summaries)} rows to {args.out}")
    return EXIT_ESTIMATION if aborted else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="longterm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="draw one synthetic dataset and its ground truth")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="fit an estimator and write per-row effect estimates")
    e.add_argument("--data", required=True)
    e.add_argument("--method", choices=("fcaecb", "caecb", "tlearner-obs"), default="fcaecb")
    e.add_argument("--nuisance", type=_spec, default=RegressorSpec.ols(1))
    e.add_argument("--transition", type=_spec, default=RegressorSpec.ols(1))
    e.add_argument("--splitting", type=_on_off, default=False)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--horizon", type=_horizon, default="all", help="auto, all or a step list such as 1,3,5")
    e.add_argument("--step", type=_step, default="last", help="caecb step: first, middle, last, random or an index")
    e.add_argument("--guard-epsilon", type=float, default=DEFAULT_GUARD)
    e.add_argument("--mu", type=int, required=True, help="gap between the last short-term step and the outcome")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    a = sub.add_parser("assumption-test", help="held-out R^2 of the bias transition")
    a.add_argument("--data", required=True)
    a.add_argument("--nuisance", type=_spec, default=RegressorSpec.ols(1))
    a.add_argument("--transition", type=_spec, default=RegressorSpec.ols(1))
    a.add_argument("--guard-epsilon", type=float, default=DEFAULT_GUARD)
    a.add_argument("--mu", type=int, required=True)
    a.set_defaults(func=cmd_assumption_test)

    b = sub.add_parser("bench", help="run a replicated sweep from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--log", help="optional per-replicate log CSV")
    b.add_argument("--workers", type=int, default=None, help="override the config worker count")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except EstimationError as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
