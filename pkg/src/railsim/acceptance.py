"""Built-in verification suite behind ``railsim validate``.

Each criterion runs a pinned scenario with a pinned tolerance and reports
one pass/fail line.  The pytest acceptance module drives the same functions,
so the CLI and the test suite cannot drift apart.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import time
from dataclasses import dataclass, replace

import numpy as np

from .cli import main as cli_main
from .integrate import Scenario, StepControl, integrate_adaptive, integrate_fixed
from .model import VehicleParams, mechanical_energy, ForcingSample
from .oracle import transient_settle_comparison
from .parallel import make_plan, run_parallel
from .track import TrackProfile, excitation_frequency

NOMINAL_SPAN = (0.0, 10.0)
NOMINAL_STEP = 1e-3
SWEEP_SPEEDS_KMH = (20.0, 40.0, 60.0, 80.0, 100.0, 120.0, 140.0, 150.0)
_ZERO8 = (0.0,) * 8


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"criterion {self.number}: {status} - {self.name} ({self.detail})"


def _series_equal_bits(a, b) -> bool:
    return (a.times.tobytes() == b.times.tobytes()
            and a.states.tobytes() == b.states.tobytes()
            and a.forcings.tobytes() == b.forcings.tobytes())


def criterion_parallel_equivalence(vehicle: VehicleParams,
                                   track: TrackProfile) -> CriterionResult:
    """1: every plan/worker-count reproduces the sequential RK4 bit for bit."""
    scenario = Scenario(vehicle, track)
    t0, t1 = NOMINAL_SPAN
    reference = integrate_fixed(_ZERO8, t0, t1, NOMINAL_STEP, scenario)
    worst_diff = 0.0
    slowest = 0.0
    failures = []
    for name in ("body", "interleaved"):
        for workers in (1, 2, 4):
            series, stats = run_parallel(_ZERO8, t0, t1, NOMINAL_STEP,
                                         make_plan(name, workers), scenario)
            slowest = max(slowest, stats.wall_time)
            if not _series_equal_bits(series, reference):
                diff = float(np.max(np.abs(series.states - reference.states)))
                worst_diff = max(worst_diff, diff)
                failures.append(f"{name}:{workers} diff={diff:.3e}")
            if stats.wall_time >= 5.0:
                failures.append(f"{name}:{workers} took {stats.wall_time:.2f} s")
    detail = (f"6 runs bit-identical to sequential RK4, slowest {slowest:.2f} s"
              if not failures else "; ".join(failures))
    return CriterionResult(1, "parallel/sequential equivalence",
                           not failures, detail)


def criterion_solver_cross_validation(vehicle: VehicleParams,
                                      track: TrackProfile) -> CriterionResult:
    """2: RK4 (h=1e-3) and adaptive RK45 (1e-9/1e-6) agree to 1e-6 at t=10 s."""
    scenario = Scenario(vehicle, track)
    t0, t1 = NOMINAL_SPAN
    fixed = integrate_fixed(_ZERO8, t0, t1, NOMINAL_STEP, scenario)
    ctrl = StepControl(abs_tol=1e-9, rel_tol=1e-6)
    adaptive = integrate_adaptive(_ZERO8, t0, t1, ctrl, scenario)
    diff = float(np.max(np.abs(fixed.states[-1] - adaptive.states[-1])))
    return CriterionResult(2, "fixed-step vs adaptive cross-validation",
                           diff <= 1e-6, f"max component diff {diff:.3e} <= 1e-06")


def criterion_frequency_oracle(vehicle: VehicleParams,
                               track: TrackProfile) -> CriterionResult:
    """3: settled tails match the closed-form steady state within 1 percent."""
    start = time.perf_counter()
    worst = 0.0
    worst_speed = None
    for kmh in SWEEP_SPEEDS_KMH:
        profile = replace(track, speed=kmh / 3.6)
        rel, _peaks, _series = transient_settle_comparison(
            Scenario(vehicle, profile), h=NOMINAL_STEP)
        speed_worst = float(np.max(rel))
        if speed_worst > worst:
            worst = speed_worst
            worst_speed = kmh
    elapsed = time.perf_counter() - start
    passed = worst <= 0.01 and elapsed < 120.0
    return CriterionResult(
        3, "frequency-domain oracle across the speed sweep", passed,
        f"worst relative error {worst:.4%} (at {worst_speed} km/h) <= 1%, "
        f"{elapsed:.1f} s < 120 s")


def criterion_excitation_frequency(vehicle: VehicleParams,
                                   track: TrackProfile) -> CriterionResult:
    """4: V=20 m/s and L=25 m give w = 5.0265 +- 0.001 rad/s."""
    w = excitation_frequency(TrackProfile(wavelength=25.0, speed=20.0))
    err = abs(w - 5.0265)
    return CriterionResult(4, "excitation frequency", err <= 1e-3,
                           f"w = {w:.6f} rad/s, |w - 5.0265| = {err:.2e} <= 1e-3")


def criterion_free_decay(vehicle: VehicleParams,
                         track: TrackProfile) -> CriterionResult:
    """5: free motion loses mechanical energy monotonically and decays."""
    quiet = replace(track, amp1=0.0, amp2=0.0)
    scenario = Scenario(vehicle, quiet)
    x0 = (0.01, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    series = integrate_fixed(x0, 0.0, 30.0, NOMINAL_STEP, scenario)
    zero = ForcingSample.zero()
    energy = np.array([mechanical_energy(s, zero, vehicle)
                       for s in series.states])
    increases = np.diff(energy)
    max_increase = float(increases.max()) if len(increases) else 0.0
    ratio = float(energy[-1] / energy[0])
    passed = max_increase <= 1e-9 and ratio <= 1e-6
    return CriterionResult(
        5, "stability: monotone energy decay from x1=0.01 m", passed,
        f"E(0)={energy[0]:.4f} kJ, max per-step increase {max_increase:.2e} <= 1e-9, "
        f"E(30)/E(0)={ratio:.2e} <= 1e-6")


def criterion_rk4_order(vehicle: VehicleParams,
                        track: TrackProfile) -> CriterionResult:
    """6: halving h cuts the global error by a 4th-order factor (12..20)."""
    scenario = Scenario(vehicle, track)
    t0, t1 = NOMINAL_SPAN
    ctrl = StepControl(abs_tol=1e-13, rel_tol=1e-10, h_min=1e-12)
    reference = integrate_adaptive(_ZERO8, t0, t1, ctrl, scenario).states[-1]
    coarse = integrate_fixed(_ZERO8, t0, t1, 1e-3, scenario).states[-1]
    fine = integrate_fixed(_ZERO8, t0, t1, 5e-4, scenario).states[-1]
    err_coarse = float(np.linalg.norm(coarse - reference))
    err_fine = float(np.linalg.norm(fine - reference))
    ratio = err_coarse / err_fine if err_fine > 0 else math.inf
    passed = 12.0 <= ratio <= 20.0
    return CriterionResult(
        6, "RK4 convergence order", passed,
        f"error {err_coarse:.3e} -> {err_fine:.3e}, ratio {ratio:.2f} in [12, 20]")


def criterion_parallel_accounting(vehicle: VehicleParams,
                                  track: TrackProfile) -> CriterionResult:
    """7: stats accounting, padded layout and single worker creation hold."""
    scenario = Scenario(vehicle, track)
    series, stats = run_parallel(_ZERO8, 0.0, 1.0, NOMINAL_STEP,
                                 make_plan("body", 4), scenario,
                                 debug_isolation=True)
    n_steps = 1000
    problems = []
    for w in stats.workers:
        if w.busy_time + w.rendezvous_wait_time > stats.wall_time + 1e-3:
            problems.append(f"worker {w.worker_id}: busy+wait exceeds wall")
        if w.steps != n_steps:
            problems.append(f"worker {w.worker_id}: steps {w.steps} != {n_steps}")
        if w.stage_rendezvous_count != 4 * n_steps:
            problems.append(
                f"worker {w.worker_id}: rendezvous {w.stage_rendezvous_count} "
                f"!= 4*{n_steps}")
    addresses = sorted(stats.slot_addresses)
    line = stats.cache_line_size
    if any(b - a < line for a, b in zip(addresses, addresses[1:])):
        problems.append("padded slots share a cache line")
    if stats.creation_count != 4:
        problems.append(f"created {stats.creation_count} workers, expected 4")
    if stats.isolation_violations:
        problems.append(f"isolation violations: {stats.isolation_violations[:4]}")
    detail = ("busy+wait <= wall for 4 workers, 4000 rendezvous each, "
              f"slots {line} B apart, one creation per worker, no stray writes"
              if not problems else "; ".join(problems))
    return CriterionResult(7, "parallel accounting and padded layout",
                           not problems, detail)


def criterion_csv_determinism(vehicle: VehicleParams,
                              track: TrackProfile) -> CriterionResult:
    """8: repeated commands with a fixed config write byte-identical CSVs."""
    problems = []
    with tempfile.TemporaryDirectory(prefix="railsim-accept-") as tmp:
        cfg_path = os.path.join(tmp, "config.json")
        with open(cfg_path, "w", encoding="ascii") as fh:
            json.dump({"t_span": [0.0, 2.0]}, fh)

        def read(path):
            with open(path, "rb") as f:
                return f.read()

        for engine in ("seq", "par"):
            paths = [os.path.join(tmp, f"{engine}_{i}.csv") for i in (1, 2)]
            for p in paths:
                code = cli_main(["simulate", "--config", cfg_path,
                                 "--engine", engine, "--out", p])
                if code != 0:
                    problems.append(f"simulate --engine {engine} exited {code}")
            if read(paths[0]) != read(paths[1]):
                problems.append(f"simulate --engine {engine} CSVs differ")

        paths = [os.path.join(tmp, f"sweep_{i}.csv") for i in (1, 2)]
        for p in paths:
            code = cli_main(["sweep", "--config", cfg_path,
                             "--speeds", "72", "--out", p])
            if code != 0:
                problems.append(f"sweep exited {code}")
        if read(paths[0]) != read(paths[1]):
            problems.append("sweep CSVs differ")

    detail = ("simulate (both engines) and sweep each byte-identical "
              "across consecutive runs" if not problems else "; ".join(problems))
    return CriterionResult(8, "CSV determinism", not problems, detail)


CRITERIA = (
    criterion_parallel_equivalence,
    criterion_solver_cross_validation,
    criterion_frequency_oracle,
    criterion_excitation_frequency,
    criterion_free_decay,
    criterion_rk4_order,
    criterion_parallel_accounting,
    criterion_csv_determinism,
)


def run_criteria(numbers=None, vehicle: VehicleParams | None = None,
                 track: TrackProfile | None = None,
                 stream=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default) and return their results."""
    vehicle = vehicle if vehicle is not None else VehicleParams()
    track = track if track is not None else TrackProfile()
    results = []
    for i, fn in enumerate(CRITERIA, start=1):
        if numbers is not None and i not in numbers:
            continue
        result = fn(vehicle, track)
        results.append(result)
        if stream is not None:
            stream(result.line())
    return results
