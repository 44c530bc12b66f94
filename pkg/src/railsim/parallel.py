"""Barrier-synchronized multi-worker RK4 engine.

Each worker owns a disjoint group of state components.  A step runs as four
phases: the worker evaluates the stage derivative and the next stage state
for its own components only, publishes them to a shared cache-line-padded
buffer, and then all workers rendezvous before anyone reads peer components
for the next stage.  Parallelism changes scheduling only, never dataflow:
the arithmetic per component is the same expression, in the same order, as
the sequential fixed-step path, so the returned trajectory is bit-identical
to :func:`railsim.integrate.integrate_fixed`.

Workers are created once per run, optionally pinned to cores and raised in
scheduling priority (both advisory: denial is recorded and the run carries
on), and joined after the final step.

The default rendezvous is a raw-futex broadcast barrier (one wake syscall
releases all waiters), which keeps the per-step cost low even when workers
outnumber cores; platforms without futex fall back to ``threading.Barrier``.
"""

from __future__ import annotations

import ctypes
import itertools
import math
import os
import platform
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationDivergedError, InvalidPlanError
from .integrate import Scenario, TimeSeries, _checked_x0, sample_rows, step_schedule
from .model import N_STATES, component_functions

DEFAULT_CACHE_LINE = 64
CACHE_LINE_ENV = "RAILSIM_CACHE_LINE"

SUPPORTED_WORKER_COUNTS = (1, 2, 4, 8)

# Component groups per plan name and worker count (0-based state indices).
# "body": each worker owns the displacement/velocity pair of one body.
# "interleaved": displacement equations and velocity equations split across
# workers in stride-4 pairs; kept as the alternative decomposition.
_PLAN_GROUPS = {
    "body": {
        1: ((0, 1, 2, 3, 4, 5, 6, 7),),
        2: ((0, 1, 2, 3), (4, 5, 6, 7)),
        4: ((0, 1), (2, 3), (4, 5), (6, 7)),
        8: ((0,), (1,), (2,), (3,), (4,), (5,), (6,), (7,)),
    },
    "interleaved": {
        1: ((0, 1, 2, 3, 4, 5, 6, 7),),
        2: ((0, 2, 4, 6), (1, 3, 5, 7)),
        4: ((0, 4), (1, 5), (2, 6), (3, 7)),
        8: ((0,), (1,), (2,), (3,), (4,), (5,), (6,), (7,)),
    },
}

PLAN_NAMES = tuple(_PLAN_GROUPS)


@dataclass(frozen=True)
class WorkerPlan:
    """Assignment of state-component groups to workers."""

    name: str
    groups: tuple[tuple[int, ...], ...]
    core_assignment: tuple[int, ...] | None = None
    priority_hint: str = "normal"   # "normal" | "elevated"

    def __post_init__(self):
        seen: set[int] = set()
        for g in self.groups:
            for c in g:
                if c in seen:
                    raise InvalidPlanError(f"component {c} assigned twice")
                seen.add(c)
        if seen != set(range(N_STATES)):
            raise InvalidPlanError(
                f"groups must cover all {N_STATES} components, got {sorted(seen)}")
        if self.core_assignment is not None:
            if len(self.core_assignment) != len(self.groups):
                raise InvalidPlanError("need one core id per worker")
            if len(set(self.core_assignment)) != len(self.core_assignment):
                raise InvalidPlanError("core ids must be distinct")
        if self.priority_hint not in ("normal", "elevated"):
            raise InvalidPlanError(f"unknown priority hint {self.priority_hint!r}")

    @property
    def worker_count(self) -> int:
        return len(self.groups)


def make_plan(name: str, worker_count: int, cores=None,
              priority_hint: str = "normal") -> WorkerPlan:
    """Named plan for a supported worker count (1, 2, 4 or 8)."""
    if name not in _PLAN_GROUPS:
        raise InvalidPlanError(f"unknown plan name {name!r}; know {PLAN_NAMES}")
    if worker_count not in SUPPORTED_WORKER_COUNTS:
        raise InvalidPlanError(
            f"unsupported worker count {worker_count}; supported {SUPPORTED_WORKER_COUNTS}")
    groups = _PLAN_GROUPS[name][worker_count]
    core_assignment = tuple(cores) if cores is not None else None
    return WorkerPlan(name=name, groups=groups, core_assignment=core_assignment,
                      priority_hint=priority_hint)


def default_plan(worker_count: int) -> WorkerPlan:
    """Body-wise grouping: one second-order equation per worker at count 4."""
    return make_plan("body", worker_count)


# ---------------------------------------------------------------------------
# padded shared state

def resolve_cache_line_size(line_size=None) -> int:
    """Effective padding granularity; the env var overrides the default."""
    if line_size is None:
        raw = os.environ.get(CACHE_LINE_ENV)
        line_size = int(raw) if raw else DEFAULT_CACHE_LINE
    line_size = int(line_size)
    if line_size < 8 or line_size % 8 != 0 or line_size > 1 << 20:
        raise ValueError(
            f"cache line size must be a multiple of 8 in [8, 1MiB], got {line_size}")
    return line_size


class PaddedStateBuffer:
    """Shared float slots pitched one cache line apart.

    Slot i lives at byte offset ``i * line_size`` of one contiguous
    allocation, so no two slots share a cache line and cross-worker traffic
    cannot false-share.  Slots are exposed as a strided numpy view.
    """

    def __init__(self, n_slots: int, line_size=None):
        self.line_size = resolve_cache_line_size(line_size)
        self._pitch = self.line_size // 8
        self._base = np.zeros(n_slots * self._pitch, dtype=np.float64)
        self.n_slots = n_slots
        self.slots = self._base[:: self._pitch]

    def view(self, start: int, count: int) -> np.ndarray:
        """Strided view of ``count`` consecutive slots."""
        return self.slots[start:start + count]

    def slot_address(self, index: int) -> int:
        return self._base.ctypes.data + index * self.line_size

    def slot_addresses(self) -> list[int]:
        return [self.slot_address(i) for i in range(self.n_slots)]


class _GuardedView:
    """Write wrapper that records stores outside the owner's component set."""

    __slots__ = ("_view", "_owned", "_offset", "_worker", "_violations")

    def __init__(self, view, owned, offset, worker_id, violations):
        self._view = view
        self._owned = frozenset(owned)
        self._offset = offset
        self._worker = worker_id
        self._violations = violations

    def __setitem__(self, index, value):
        if index not in self._owned:
            self._violations.append(
                (self._worker, self._offset + index))
        self._view[index] = value


# ---------------------------------------------------------------------------
# rendezvous primitives

class _Aborted(Exception):
    """Internal: a peer broke the rendezvous; unwind quietly."""


_FUTEX_SYSCALL_NR = {"x86_64": 202, "aarch64": 98, "arm64": 98}
_FUTEX_WAIT = 0
_FUTEX_WAKE = 1
_FUTEX_PRIVATE = 128
_BROKEN_PHASE = 0x7FFFFFF0


def _futex_available() -> bool:
    return (os.name == "posix" and platform.system() == "Linux"
            and platform.machine() in _FUTEX_SYSCALL_NR)


class FutexRendezvous:
    """Cyclic all-worker barrier built on one futex word.

    The last arriver of each cycle bumps a generation counter and issues a
    single broadcast wake; earlier arrivers sleep on the word.  ``abort``
    forces the generation far ahead so every current and future waiter falls
    through immediately with ``broken`` set.
    """

    name = "futex"

    def __init__(self, parties: int):
        self._n = parties
        self._arrivals = itertools.count()
        self._phase = (ctypes.c_int32 * 1)(0)
        self._addr = ctypes.addressof(self._phase)
        self.broken = False
        libc = ctypes.CDLL(None, use_errno=True)
        self._syscall = libc.syscall
        self._syscall.restype = ctypes.c_long
        self._syscall.argtypes = [ctypes.c_long] * 7
        self._nr = _FUTEX_SYSCALL_NR[platform.machine()]

    def wait(self, worker_id: int) -> None:
        n = self._n
        cycle, rem = divmod(next(self._arrivals), n)
        phase = self._phase
        if rem == n - 1:
            if phase[0] < _BROKEN_PHASE:
                phase[0] = cycle + 1
            if n > 1:
                self._syscall(self._nr, self._addr,
                              _FUTEX_WAKE | _FUTEX_PRIVATE, 0x7FFFFFFF, 0, 0, 0)
        else:
            goal = cycle + 1
            addr = self._addr
            nr = self._nr
            syscall = self._syscall
            while phase[0] < goal:
                # kernel re-checks *addr == cycle before sleeping, so a wake
                # between the Python check and the syscall cannot be lost
                syscall(nr, addr, _FUTEX_WAIT | _FUTEX_PRIVATE, phase[0], 0, 0, 0)

    def abort(self) -> None:
        self.broken = True
        self._phase[0] = _BROKEN_PHASE
        self._syscall(self._nr, self._addr,
                      _FUTEX_WAKE | _FUTEX_PRIVATE, 0x7FFFFFFF, 0, 0, 0)


class BarrierRendezvous:
    """Portable fallback on :class:`threading.Barrier`."""

    name = "threading.Barrier"

    def __init__(self, parties: int):
        self._barrier = threading.Barrier(parties)
        self.broken = False

    def wait(self, worker_id: int) -> None:
        try:
            self._barrier.wait()
        except threading.BrokenBarrierError:
            pass

    def abort(self) -> None:
        self.broken = True
        self._barrier.abort()


def _make_rendezvous(parties: int):
    if _futex_available():
        return FutexRendezvous(parties)
    return BarrierRendezvous(parties)


# ---------------------------------------------------------------------------
# pinning and priority

@dataclass(frozen=True)
class PinOutcome:
    """What the OS granted for one worker's affinity/priority requests."""

    core_requested: int | None
    core_granted: bool
    core_detail: str
    priority_requested: bool
    priority_granted: bool
    priority_detail: str

    @property
    def warnings(self) -> list[str]:
        out = []
        if self.core_requested is not None and not self.core_granted:
            out.append(f"pinning denied: {self.core_detail}")
        if self.priority_requested and not self.priority_granted:
            out.append(f"priority elevation denied: {self.priority_detail}")
        return out


def pin_and_prioritize(core_id: int | None, elevate: bool) -> PinOutcome:
    """Pin the calling thread to ``core_id`` and/or raise its priority.

    Both requests are best-effort; denials are reported, never raised, and
    the simulation proceeds unpinned.
    """
    if core_id is None:
        core_granted, core_detail = False, "not requested"
    elif not hasattr(os, "sched_setaffinity"):
        core_granted, core_detail = False, "platform lacks thread affinity control"
    elif core_id < 0 or core_id >= (os.cpu_count() or 1):
        core_granted = False
        core_detail = f"core {core_id} out of range (0..{(os.cpu_count() or 1) - 1})"
    else:
        try:
            os.sched_setaffinity(0, {core_id})
            got = os.sched_getaffinity(0)
            core_granted = got == {core_id}
            core_detail = f"affinity now {sorted(got)}"
        except OSError as exc:
            core_granted, core_detail = False, f"OS refused: {exc}"

    if not elevate:
        priority_granted, priority_detail = False, "not requested"
    else:
        try:
            niceness = os.nice(-1)
            priority_granted = True
            priority_detail = f"niceness now {niceness}"
        except OSError as exc:
            priority_granted, priority_detail = False, f"OS refused: {exc}"

    return PinOutcome(core_requested=core_id, core_granted=core_granted,
                      core_detail=core_detail, priority_requested=elevate,
                      priority_granted=priority_granted,
                      priority_detail=priority_detail)


# ---------------------------------------------------------------------------
# statistics

@dataclass
class WorkerStats:
    """Timing and accounting for one worker over a run."""

    worker_id: int
    components: tuple[int, ...]
    busy_time: float = 0.0
    rendezvous_wait_time: float = 0.0
    steps: int = 0
    stage_rendezvous_count: int = 0
    pin: PinOutcome | None = None


@dataclass
class ParallelStats:
    """Per-run accounting of the multi-worker engine."""

    plan_name: str
    worker_count: int
    workers: list[WorkerStats]
    wall_time: float
    creation_count: int
    rendezvous_impl: str
    cache_line_size: int
    slot_addresses: list[int]
    warnings: list[str] = field(default_factory=list)
    isolation_violations: list[tuple[int, int]] | None = None
    clock_source: str = "time.perf_counter"


# ---------------------------------------------------------------------------
# the engine

def run_parallel(x0, t0: float, t1: float, h: float, plan: WorkerPlan,
                 scenario: Scenario, sample_stride: int = 1,
                 debug_isolation: bool = False) -> tuple[TimeSeries, ParallelStats]:
    """Fixed-step RK4 across pinned workers; bit-identical to the sequential path.

    Returns the sampled trajectory plus per-worker busy/wait accounting.
    ``debug_isolation`` routes worker stores through an ownership check and
    reports violations in the stats (there should be none).
    """
    x_init = _checked_x0(x0)
    schedule = step_schedule(t0, t1, h)
    n_steps = len(schedule)
    rows, n_samples = sample_rows(n_steps, sample_stride)
    funcs = component_functions(scenario.params)
    n_workers = plan.worker_count

    # preparation stage: forcing precomputed per step at the three distinct
    # stage times, shared read-only by every worker
    table = []
    for ts, tm, te, hi in schedule:
        fs = scenario.forcing(ts)
        fm = scenario.forcing(tm)
        fe = scenario.forcing(te)
        table.append((fs.eta, fs.eta_rate, fm.eta, fm.eta_rate,
                      fe.eta, fe.eta_rate))

    buf = PaddedStateBuffer(3 * N_STATES)
    x_slots = buf.view(0, N_STATES)
    stage_a = buf.view(N_STATES, N_STATES)
    stage_b = buf.view(2 * N_STATES, N_STATES)
    x_slots[:] = x_init

    out_states = np.empty((n_samples, N_STATES))
    out_states[0] = x_init

    stage_rv = _make_rendezvous(n_workers)
    step_rv = _make_rendezvous(n_workers)
    errors: list[tuple[int, BaseException]] = []
    warnings: list[str] = []
    violations: list[tuple[int, int]] | None = [] if debug_isolation else None
    stats = [WorkerStats(worker_id=w, components=plan.groups[w])
             for w in range(n_workers)]

    def work(wid: int, own: tuple[int, ...]) -> None:
        ws = stats[wid]
        try:
            core = plan.core_assignment[wid] if plan.core_assignment else None
            pin = pin_and_prioritize(core, plan.priority_hint == "elevated")
            ws.pin = pin
            warnings.extend(f"worker {wid}: {w}" for w in pin.warnings)

            if violations is None:
                x_w, a_w, b_w = x_slots, stage_a, stage_b
            else:
                x_w = _GuardedView(x_slots, own, 0, wid, violations)
                a_w = _GuardedView(stage_a, own, N_STATES, wid, violations)
                b_w = _GuardedView(stage_b, own, 2 * N_STATES, wid, violations)

            perf = time.perf_counter
            isfinite = math.isfinite
            own_funcs = [funcs[c] for c in own]
            enum_own = list(enumerate(own))
            busy = 0.0
            waited = 0.0
            rendezvous = 0
            last_exit = perf()

            for i in range(n_steps):
                e0, r0, em, rm, ee, re = table[i]
                hi = schedule[i][3]
                half = 0.5 * hi
                row = rows[i]

                y = x_slots.tolist()
                k1 = [f(y, e0, r0) for f in own_funcs]
                for j, c in enum_own:
                    a_w[c] = y[c] + half * k1[j]
                tb = perf(); stage_rv.wait(wid); ta = perf()
                busy += tb - last_exit; waited += ta - tb; last_exit = ta
                rendezvous += 1
                if stage_rv.broken:
                    raise _Aborted

                y2 = stage_a.tolist()
                k2 = [f(y2, em, rm) for f in own_funcs]
                for j, c in enum_own:
                    b_w[c] = y[c] + half * k2[j]
                tb = perf(); stage_rv.wait(wid); ta = perf()
                busy += tb - last_exit; waited += ta - tb; last_exit = ta
                rendezvous += 1
                if stage_rv.broken:
                    raise _Aborted

                y3 = stage_b.tolist()
                k3 = [f(y3, em, rm) for f in own_funcs]
                for j, c in enum_own:
                    a_w[c] = y[c] + hi * k3[j]
                tb = perf(); stage_rv.wait(wid); ta = perf()
                busy += tb - last_exit; waited += ta - tb; last_exit = ta
                rendezvous += 1
                if stage_rv.broken:
                    raise _Aborted

                y4 = stage_a.tolist()
                k4 = [f(y4, ee, re) for f in own_funcs]
                for j, c in enum_own:
                    v = y[c] + hi * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0
                    if not isfinite(v):
                        raise IntegrationDivergedError(
                            f"solution diverged at step {i} (t={schedule[i][2]!r})",
                            step_index=i, time=schedule[i][2])
                    x_w[c] = v
                    if row >= 0:
                        out_states[row, c] = v
                tb = perf(); step_rv.wait(wid); ta = perf()
                busy += tb - last_exit; waited += ta - tb; last_exit = ta
                rendezvous += 1
                if step_rv.broken:
                    raise _Aborted

                ws.steps = i + 1
            ws.busy_time = busy
            ws.rendezvous_wait_time = waited
            ws.stage_rendezvous_count = rendezvous
        except _Aborted:
            pass
        except BaseException as exc:  # noqa: BLE001 - forwarded to the caller
            errors.append((wid, exc))
            stage_rv.abort()
            step_rv.abort()

    threads = [threading.Thread(target=work, args=(w, plan.groups[w]),
                                name=f"railsim-worker-{w}")
               for w in range(n_workers)]
    creation_count = len(threads)
    t_start = time.perf_counter()
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    wall = time.perf_counter() - t_start

    if errors:
        raise errors[0][1]

    times = np.empty(n_samples)
    forcings = np.empty((n_samples, N_STATES))
    times[0] = t0
    forcings[0] = table[0][0] + table[0][1]
    for i, r in enumerate(rows):
        if r >= 0:
            times[r] = schedule[i][2]
            forcings[r] = table[i][4] + table[i][5]

    series = TimeSeries(times, out_states, forcings, sample_stride=sample_stride)
    pstats = ParallelStats(
        plan_name=plan.name,
        worker_count=n_workers,
        workers=stats,
        wall_time=wall,
        creation_count=creation_count,
        rendezvous_impl=stage_rv.name,
        cache_line_size=buf.line_size,
        slot_addresses=buf.slot_addresses(),
        warnings=warnings,
        isolation_violations=violations,
    )
    return series, pstats
