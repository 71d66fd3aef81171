"""Command-line front end: analysis, sweeps, simulation campaigns, monitoring.

Every command writes tidy CSV plus a JSON manifest that records the fully
resolved inputs (flags override config-file values override defaults), enough
to reproduce each output byte-for-byte.  The environment variable
MZ_LAB_THREADS caps parallelism across sweep grid points and simulation seeds.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, detection, simulator, transitions, utility
from .params import (
    GameParams,
    ValidationError,
    load_config,
    params_from_config,
    rescale_to_unit_sigma,
)
from .race import Population

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_VALIDATION = 2

_PARAM_KEYS = ("H", "alpha", "mu", "delta", "gamma", "sigma")


def _thread_cap(n_jobs: int) -> int:
    raw = os.environ.get("MZ_LAB_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = 0
    if cap < 1:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def _parallel_map(fn, items: list):
    cap = _thread_cap(len(items))
    if cap <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=cap) as pool:
        return list(pool.map(fn, items))


def _resolve_params(args: argparse.Namespace) -> GameParams:
    values: dict[str, float] = {}
    if args.config:
        values.update(load_config(args.config))
    for key in _PARAM_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    params = params_from_config(values)
    return rescale_to_unit_sigma(params)


def _params_dict(params: GameParams, original_sigma: float) -> dict[str, float]:
    return {
        "H": params.H,
        "alpha": params.alpha,
        "mu": params.mu,
        "delta": params.delta,
        "gamma": params.gamma,
        "sigma": 1.0,
        "sigma_scale": original_sigma,
    }


def _write_manifest(
    out_dir: Path, command: str, resolved: dict, outputs: list[str]
) -> Path:
    manifest = {
        "command": command,
        "resolved": resolved,
        "outputs": sorted(outputs),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / f"{command}_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def args_from_manifest(path: str | Path) -> list[str]:
    """Reconstruct the argv that reproduces a recorded run (same --out)."""
    manifest = json.loads(Path(path).read_text())
    resolved = manifest["resolved"]
    argv = [manifest["command"]]
    for key, value in resolved.items():
        if key in ("sigma_scale", "outputs"):
            continue
        if value is None:
            continue
        if key == "seeds":
            argv += ["--seeds", ",".join(str(s) for s in value)]
        else:
            argv += [f"--{key}", str(value)]
    argv += ["--out", str(Path(path).parent)]
    return argv


def _write_csv(path: Path, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _add_param_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value parameter file")
    parser.add_argument("--H", type=int, help="number of traders (>= 3)")
    parser.add_argument("--alpha", type=float, help="news arrival rate")
    parser.add_argument("--mu", type=float, help="liquidity-trader arrival rate")
    parser.add_argument("--delta", type=float, help="exchange latency")
    parser.add_argument("--gamma", type=float, help="risk-aversion factor")
    parser.add_argument("--sigma", type=float, help="jump size (rescaled to 1)")
    parser.add_argument("--out", default=".", help="output directory")


def _out_dir(args: argparse.Namespace) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _parse_seeds(raw: str) -> list[int]:
    try:
        return [int(s) for s in raw.split(",") if s.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"invalid seed list {raw!r}") from exc


def _parse_grid(spec: str) -> list[float]:
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValidationError(f"grid must be start:stop:step (got {spec!r})")
        try:
            start, stop, step = (float(x) for x in parts)
        except ValueError as exc:
            raise ValidationError(f"invalid grid {spec!r}") from exc
        if step <= 0:
            raise ValidationError(f"grid step must be positive (got {step})")
        values = []
        k = 0
        while True:
            value = start + k * step
            if value > stop + step * 1e-9:
                break
            values.append(value)
            k += 1
        return values
    try:
        return [float(x) for x in spec.split(",") if x.strip() != ""]
    except ValueError as exc:
        raise ValidationError(f"invalid grid {spec!r}") from exc


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    original_sigma = args.sigma if args.sigma is not None else 1.0
    params = _resolve_params(args)
    out = _out_dir(args)
    th = transitions.thresholds(params)
    regime = transitions.optimal_sniping(params)
    sure = transitions.indifference_at(1.0, params)
    report = {
        "params": _params_dict(params, original_sigma),
        "gamma_probabilistic": th.to_probabilistic,
        "gamma_no_sniping": th.to_no_sniping,
        "regime": regime.kind,
        "p_star": regime.p_star,
        "s_star": regime.s_star,
        "u_sure": sure.u_star,
        "u_opt": regime.u_star,
        "bandit_zero_spread": utility.bandit_zero_crossing(params),
    }
    (out / "analysis.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    utility.write_payoff_table_csv(str(out / "payoff_table.csv"), params)
    resolved = dict(_params_dict(params, original_sigma))
    _write_manifest(out, "analyze", resolved, ["analysis.json", "payoff_table.csv"])
    for key in (
        "gamma_probabilistic",
        "gamma_no_sniping",
        "regime",
        "p_star",
        "s_star",
        "u_sure",
        "u_opt",
        "bandit_zero_spread",
    ):
        print(f"{key} = {report[key]}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_gamma_row(payload):
    params, gamma = payload
    return transitions.regime_sweep([gamma], params)[0]


def _sweep_param_row(payload):
    params, variable, value = payload
    kwargs = {
        "H": params.H,
        "alpha": params.alpha,
        "mu": params.mu,
        "delta": params.delta,
        "gamma": params.gamma,
        "sigma": params.sigma,
    }
    kwargs[variable] = int(value) if variable == "H" else value
    try:
        trial = GameParams(**kwargs)
    except ValidationError as exc:
        return {"_skip": f"{variable}={value}: {exc}"}
    th = transitions.thresholds(trial)
    row = transitions.regime_sweep([trial.gamma], trial)[0]
    return {
        variable: kwargs[variable],
        "gamma_probabilistic": th.to_probabilistic,
        "gamma_no_sniping": th.to_no_sniping,
        "regime": row["regime"],
        "p_star": row["p_star"],
        "s_star": row["s_star"],
        "u_sure": row["u_sure"],
        "u_opt": row["u_opt"],
    }


def _sweep_p_row(payload):
    params, p = payload
    point = transitions.indifference_at(p, params)
    return {"p": p, "s_star": point.s_star, "u_star": point.u_star}


def cmd_sweep(args: argparse.Namespace) -> int:
    original_sigma = args.sigma if args.sigma is not None else 1.0
    params = _resolve_params(args)
    out = _out_dir(args)
    grid = _parse_grid(args.grid)
    if not grid:
        raise ValidationError("empty sweep grid")
    variable = args.variable
    if variable == "gamma":
        bad = [g for g in grid if g < 1]
        if bad:
            print(f"note: skipping gamma values < 1: {bad}", file=sys.stderr)
        grid = [g for g in grid if g >= 1]
        rows = _parallel_map(_sweep_gamma_row, [(params, g) for g in grid])
        fields = ["gamma", "regime", "p_star", "s_star", "u_sure", "u_opt"]
    elif variable == "p":
        bad = [p for p in grid if not 0 <= p <= 1]
        if bad:
            print(f"note: skipping p values outside [0, 1]: {bad}", file=sys.stderr)
        grid = [p for p in grid if 0 <= p <= 1]
        rows = _parallel_map(_sweep_p_row, [(params, p) for p in grid])
        fields = ["p", "s_star", "u_star"]
    elif variable in ("alpha", "mu", "delta", "H"):
        rows = _parallel_map(
            _sweep_param_row, [(params, variable, v) for v in grid]
        )
        kept = []
        for row in rows:
            if "_skip" in row:
                print(f"note: skipping {row['_skip']}", file=sys.stderr)
            else:
                kept.append(row)
        rows = kept
        fields = [
            variable,
            "gamma_probabilistic",
            "gamma_no_sniping",
            "regime",
            "p_star",
            "s_star",
            "u_sure",
            "u_opt",
        ]
    else:
        raise ValidationError(f"unknown sweep variable {variable!r}")
    if not rows:
        raise ValidationError("sweep grid is empty after validity filtering")
    name = f"sweep_{variable}.csv"
    _write_csv(out / name, fields, rows)
    resolved = dict(_params_dict(params, original_sigma))
    resolved["variable"] = variable
    resolved["grid"] = args.grid
    _write_manifest(out, "sweep", resolved, [name])
    print(f"wrote {out / name} ({len(rows)} rows)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _auto_play(params: GameParams, p_flag, spread_flag) -> tuple[float, float]:
    """Fill in sniping probability and spread from the optimal regime."""
    if p_flag is not None and spread_flag is not None:
        return p_flag, spread_flag
    regime = transitions.optimal_sniping(params)
    p = regime.p_star
    if p is None:
        p = 1.0 if regime.kind == transitions.SURE else 0.0
    s = regime.s_star
    return (p_flag if p_flag is not None else p,
            spread_flag if spread_flag is not None else s)


def _simulate_one(payload):
    agents, params, stages, seed = payload
    return simulator.run_repeated(agents, params, stages, seed)


def cmd_simulate(args: argparse.Namespace) -> int:
    original_sigma = args.sigma if args.sigma is not None else 1.0
    params = _resolve_params(args)
    out = _out_dir(args)
    pop = Population(trustworthy=args.ht, deceptive=args.hd)
    if pop.total != params.H:
        raise ValidationError(
            f"population ht+hd={pop.total} does not match H={params.H}"
        )
    p, spread = _auto_play(params, args.p, args.spread)
    seeds = _parse_seeds(args.seeds)
    if not seeds:
        raise ValidationError("need at least one seed")
    agents = simulator.compliance_roster(pop, p, spread)
    runs = _parallel_map(
        _simulate_one, [(agents, params, args.stages, seed) for seed in seeds]
    )
    outputs = []
    summary_rows = []
    analytic = {
        simulator.TRUSTWORTHY: simulator.analytic_mean_utility(
            simulator.TRUSTWORTHY, p, spread, pop, params
        ),
        simulator.DECEPTIVE: (
            simulator.analytic_mean_utility(
                simulator.DECEPTIVE, p, spread, pop, params
            )
            if pop.deceptive
            else None
        ),
    }
    for seed, run in zip(seeds, runs):
        name = f"stream_seed{seed}.csv"
        simulator.write_stream_csv(str(out / name), run)
        outputs.append(name)
        means = run.utilities.mean(axis=0)
        errs = run.utilities.std(axis=0, ddof=1) / np.sqrt(run.stats.n_stages)
        for agent in agents:
            cls = (
                simulator.TRUSTWORTHY
                if agent.agent_id < pop.trustworthy
                else simulator.DECEPTIVE
            )
            summary_rows.append(
                {
                    "seed": seed,
                    "agent_id": agent.agent_id,
                    "class": cls,
                    "stages": args.stages,
                    "mean_utility": float(means[agent.agent_id]),
                    "std_error": float(errs[agent.agent_id]),
                    "race_wins": int(run.stats.race_wins[agent.agent_id]),
                    "analytic_mean": analytic[cls],
                }
            )
    summary_rows.sort(key=lambda r: (r["seed"], r["agent_id"]))
    _write_csv(
        out / "summary.csv",
        [
            "seed",
            "agent_id",
            "class",
            "stages",
            "mean_utility",
            "std_error",
            "race_wins",
            "analytic_mean",
        ],
        summary_rows,
    )
    outputs.append("summary.csv")
    resolved = dict(_params_dict(params, original_sigma))
    resolved.update(
        {"ht": pop.trustworthy, "hd": pop.deceptive, "p": p, "spread": spread,
         "stages": args.stages, "seeds": seeds}
    )
    _write_manifest(out, "simulate", resolved, outputs)
    print(f"wrote {len(outputs)} files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# monitor
# ---------------------------------------------------------------------------


def cmd_monitor(args: argparse.Namespace) -> int:
    original_sigma = args.sigma if args.sigma is not None else 1.0
    params = _resolve_params(args)
    out = _out_dir(args)
    assumed = args.assumed_hd
    if not 1 <= assumed <= params.H - 1:
        raise ValidationError(
            f"assumed_hd must lie in [1, H-1] (got {assumed})"
        )
    p, spread = _auto_play(params, args.p, args.spread)
    pop0 = Population(trustworthy=params.H, deceptive=0)
    pop1 = Population(trustworthy=params.H - assumed, deceptive=assumed)
    dist0 = detection.utility_distribution(params, p, pop0, spread)
    dist1 = detection.utility_distribution(params, p, pop1, spread)
    resolved = dict(_params_dict(params, original_sigma))
    resolved.update({"err1": args.err1, "err2": args.err2,
                     "assumed_hd": assumed, "p": p, "spread": spread})
    if args.stream:
        stream = simulator.read_stream_csv(args.stream, args.agent)
        resolved.update({"stream": args.stream, "agent": args.agent})
    else:
        seeds = _parse_seeds(args.seeds)
        pop = Population(trustworthy=args.ht, deceptive=args.hd)
        if pop.total != params.H:
            raise ValidationError(
                f"population ht+hd={pop.total} does not match H={params.H}"
            )
        agents = simulator.compliance_roster(pop, p, spread)
        run = simulator.run_repeated(agents, params, args.stages, seeds[0])
        stream = [float(u) for u in run.utilities[:, args.agent]]
        resolved.update(
            {"ht": pop.trustworthy, "hd": pop.deceptive, "stages": args.stages,
             "seeds": seeds[:1], "agent": args.agent}
        )
    result = detection.monitor_stream(stream, dist0, dist1, args.err1, args.err2)
    detection.write_trajectory_csv(str(out / "trajectory.csv"), result)
    _write_manifest(out, "monitor", resolved, ["trajectory.csv"])
    print(f"decision = {result.decision}")
    print(f"stopped_at = {result.stopped_at}")
    print(f"statistic = {result.statistic}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sniplab",
        description="equilibria, sweeps, simulations and compliance monitoring "
        "for the stale-quote sniping game",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analyze = sub.add_parser("analyze", help="thresholds and optimal regime")
    _add_param_flags(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_sweep = sub.add_parser("sweep", help="sweep one variable, emit tidy CSV")
    _add_param_flags(p_sweep)
    p_sweep.add_argument(
        "--variable",
        required=True,
        choices=["gamma", "alpha", "mu", "delta", "H", "p"],
    )
    p_sweep.add_argument(
        "--grid", required=True, help="start:stop:step or comma list"
    )
    p_sweep.set_defaults(func=cmd_sweep)

    p_sim = sub.add_parser("simulate", help="repeated-game Monte Carlo runs")
    _add_param_flags(p_sim)
    p_sim.add_argument("--ht", type=int, required=True, help="trustworthy agents")
    p_sim.add_argument("--hd", type=int, default=0, help="deceptive agents")
    p_sim.add_argument("--p", type=float, help="trustworthy sniping probability "
                       "(default: optimal)")
    p_sim.add_argument("--spread", type=float, help="posted spread (default: optimal)")
    p_sim.add_argument("--stages", type=int, default=10000)
    p_sim.add_argument("--seeds", default="1", help="comma-separated seeds")
    p_sim.set_defaults(func=cmd_simulate)

    p_mon = sub.add_parser("monitor", help="SPRT compliance monitoring")
    _add_param_flags(p_mon)
    p_mon.add_argument("--stream", help="utility-stream CSV from simulate")
    p_mon.add_argument("--agent", type=int, default=0, help="monitored agent id")
    p_mon.add_argument("--ht", type=int, help="inline simulation: trustworthy agents")
    p_mon.add_argument("--hd", type=int, default=0)
    p_mon.add_argument("--p", type=float, help="trustworthy sniping probability "
                       "(default: optimal)")
    p_mon.add_argument("--spread", type=float)
    p_mon.add_argument("--stages", type=int, default=10000)
    p_mon.add_argument("--seeds", default="1")
    p_mon.add_argument("--err1", type=float, default=0.05, help="type-I rate")
    p_mon.add_argument("--err2", type=float, default=0.05, help="type-II rate")
    p_mon.add_argument("--assumed-hd", dest="assumed_hd", type=int, default=1,
                       help="deceptive count posited under H1")
    p_mon.set_defaults(func=cmd_monitor)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "monitor" and not args.stream and args.ht is None:
        parser.error("monitor needs --stream or --ht for an inline simulation")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - runtime failures get exit code 1
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
