"""Command-line interface: simulate, sweep, bench and validate."""

from __future__ import annotations

import argparse
import json
import statistics
import sys
import time
from dataclasses import replace

import numpy as np

from .config import SimConfig, parse_config
from .errors import RailsimError
from .integrate import Scenario, integrate_fixed
from .model import N_STATES
from .oracle import (MEASURE_TIME, amplitude_from_series,
                     transient_settle_comparison)
from .output import (KMH_PER_MS, emit_plot, write_sweep_csv,
                     write_timeseries_csv)
from .parallel import make_plan, run_parallel
from .track import excitation_frequency

_ZERO_STATE = (0.0,) * N_STATES


def _scenario(cfg: SimConfig) -> Scenario:
    return Scenario(params=cfg.vehicle, profile=cfg.track)


def _run_engine(cfg: SimConfig, engine: str):
    t0, t1 = cfg.t_span
    scenario = _scenario(cfg)
    stride = cfg.output.sample_stride
    if engine == "seq":
        return integrate_fixed(_ZERO_STATE, t0, t1, cfg.step, scenario, stride), None
    series, stats = run_parallel(_ZERO_STATE, t0, t1, cfg.step,
                                 cfg.plan.build(), scenario, stride)
    return series, stats


def cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    series, stats = _run_engine(cfg, args.engine)
    csv_path = args.out or cfg.output.csv_path
    write_timeseries_csv(series, csv_path)
    print(f"wrote {len(series)} samples to {csv_path} (engine={args.engine})")
    if stats is not None:
        for w in stats.warnings:
            print(f"warning: {w}", file=sys.stderr)
    kind = args.plot or cfg.output.plot
    if kind:
        script = str(csv_path) + f".{kind}.gp"
        emit_plot(series, csv_path, script, kind)
        print(f"wrote plot script {script}")
    return 0


def _parse_speeds(raw: str) -> list[float]:
    items = [s.strip() for s in raw.split(",") if s.strip()]
    speeds = [float(s) for s in items]
    if any(v <= 0 for v in speeds):
        raise RailsimError(f"speeds must be positive km/h values, got {raw!r}")
    return speeds


def sweep_rows(cfg: SimConfig, speeds_kmh: list[float]) -> list[dict]:
    """Per-speed equivalence check, tail amplitudes and oracle error."""
    rows = []
    t0, t1 = cfg.t_span
    for kmh in speeds_kmh:
        v_ms = kmh / KMH_PER_MS
        profile = replace(cfg.track, speed=v_ms)
        scenario = Scenario(params=cfg.vehicle, profile=profile)
        row: dict = {"speed_kmh": kmh, "speed_ms": v_ms,
                     "omega": excitation_frequency(profile)}
        try:
            seq = integrate_fixed(_ZERO_STATE, t0, t1, cfg.step, scenario)
            par, _ = run_parallel(_ZERO_STATE, t0, t1, cfg.step,
                                  cfg.plan.build(), scenario)
            row["par_seq_max_diff"] = float(np.max(np.abs(seq.states - par.states)))

            rel, _peaks, series = transient_settle_comparison(scenario, h=cfg.step)
            labels = ("amp_z1", "amp_z1dot", "amp_z2", "amp_z2dot",
                      "amp_zk", "amp_zkdot", "amp_phi", "amp_phidot")
            for comp, label in enumerate(labels):
                est = amplitude_from_series(series, comp, MEASURE_TIME, profile)
                row[label] = est.peak
            row["oracle_rel_err"] = float(np.max(rel))
            row["status"] = "ok"
        except Exception as exc:  # noqa: BLE001 - row marked, sweep continues
            row["status"] = f"error: {exc}"
        rows.append(row)
    return rows


def cmd_sweep(args) -> int:
    cfg = parse_config(args.config)
    speeds = _parse_speeds(args.speeds)
    rows = sweep_rows(cfg, speeds)
    out = args.out or cfg.output.csv_path
    write_sweep_csv(rows, out)
    failures = [r for r in rows if r["status"] != "ok"]
    print(f"wrote {len(rows)} sweep rows to {out} ({len(failures)} failed)")
    for r in failures:
        print(f"  speed {r['speed_kmh']} km/h: {r['status']}", file=sys.stderr)
    return 1 if failures else 0


def _bench_roster(cfg: SimConfig):
    roster = [(cfg.plan.name, cfg.plan.workers)]
    for entry in (("body", 1), ("body", 2), ("body", 4), ("interleaved", 4)):
        if entry not in roster:
            roster.append(entry)
    return roster


def bench_report(cfg: SimConfig, repetitions: int) -> dict:
    """Wall times for the sequential engine and each plan, with medians."""
    if repetitions < 1:
        raise RailsimError("repetitions must be >= 1")
    t0, t1 = cfg.t_span
    scenario = _scenario(cfg)

    seq_samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        integrate_fixed(_ZERO_STATE, t0, t1, cfg.step, scenario)
        seq_samples.append(time.perf_counter() - start)

    plans = []
    for name, workers in _bench_roster(cfg):
        plan = make_plan(name, workers,
                         cores=tuple(range(workers)) if cfg.plan.pin_cores else None,
                         priority_hint="elevated" if cfg.plan.elevate_priority else "normal")
        samples = []
        last_stats = None
        for _ in range(repetitions):
            _series, stats = run_parallel(_ZERO_STATE, t0, t1, cfg.step,
                                          plan, scenario)
            samples.append(stats.wall_time)
            last_stats = stats
        per_worker = []
        for w in last_stats.workers:
            wall = last_stats.wall_time
            per_worker.append({
                "worker": w.worker_id,
                "components": list(w.components),
                "busy_s": w.busy_time,
                "wait_s": w.rendezvous_wait_time,
                "busy_fraction": w.busy_time / wall if wall > 0 else 0.0,
                "wait_fraction": w.rendezvous_wait_time / wall if wall > 0 else 0.0,
                "steps": w.steps,
                "stage_rendezvous": w.stage_rendezvous_count,
                "pinning": None if w.pin is None else {
                    "core_requested": w.pin.core_requested,
                    "core_granted": w.pin.core_granted,
                    "core_detail": w.pin.core_detail,
                    "priority_requested": w.pin.priority_requested,
                    "priority_granted": w.pin.priority_granted,
                    "priority_detail": w.pin.priority_detail,
                },
            })
        plans.append({
            "name": name,
            "workers": workers,
            "samples_s": samples,
            "median_s": statistics.median(samples),
            "rendezvous_impl": last_stats.rendezvous_impl,
            "cache_line_size": last_stats.cache_line_size,
            "worker_creations": last_stats.creation_count,
            "per_worker": per_worker,
            "warnings": last_stats.warnings,
        })

    return {
        "clock": "time.perf_counter",
        "repetitions": repetitions,
        "t_span": list(cfg.t_span),
        "step": cfg.step,
        "sequential": {"samples_s": seq_samples,
                       "median_s": statistics.median(seq_samples)},
        "plans": plans,
    }


def cmd_bench(args) -> int:
    cfg = parse_config(args.config)
    report = bench_report(cfg, args.reps)
    text = json.dumps(report, indent=2)
    print(text)
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="") as fh:
            fh.write(text + "\n")
    return 0


def cmd_validate(args) -> int:
    from . import acceptance

    cfg = parse_config(args.config)
    numbers = args.criterion or None
    results = acceptance.run_criteria(numbers=numbers, vehicle=cfg.vehicle,
                                      track=cfg.track, stream=print)
    return 0 if all(r.passed for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="railsim",
        description="Vertical-dynamics simulator for a rail wagon on two bogies")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one scenario and write a CSV")
    p.add_argument("--config", required=True, help="JSON config file")
    p.add_argument("--engine", choices=("seq", "par"), default="seq")
    p.add_argument("--plot", choices=("timeseries", "phase"))
    p.add_argument("--out", help="override the CSV path from the config")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="summary row per running speed")
    p.add_argument("--config", required=True)
    p.add_argument("--speeds", required=True,
                   help="comma-separated speeds in km/h, e.g. 20,60,100")
    p.add_argument("--out", help="override the CSV path from the config")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="time the engines and report worker stats")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--out", help="also write the JSON report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("validate", help="run the built-in verification suite")
    p.add_argument("--config", required=True)
    p.add_argument("--criterion", type=int, action="append",
                   help="run only this criterion number (repeatable)")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RailsimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
