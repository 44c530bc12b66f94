"""Sequential time-domain solvers.

Two integrators share the package: a classic fixed-step RK4 whose per-step
arithmetic defines the reference semantics that the parallel engine must
reproduce bit for bit, and an embedded Dormand-Prince 5(4) adaptive pair
used for cross-validation.

Float determinism matters here: the fixed-step path evaluates each state
component through the closures from :func:`railsim.model.component_functions`
with a pinned order of operations, so repeated runs and the multi-worker
engine produce byte-identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import IntegrationDivergedError, StepSizeUnderflowError
from .model import (ForcingSample, N_STATES, VehicleParams,
                    component_functions)
from .track import TrackProfile, wheel_delays, wheel_forcing

_ZERO_FORCING = ForcingSample.zero()


@dataclass(frozen=True)
class Scenario:
    """Vehicle plus track context handed to the integrators.

    A zero-amplitude profile or a standing vehicle (speed 0) produces
    identically zero forcing; delays are undefined in the latter case, so
    no delayed evaluation is attempted.
    """

    params: VehicleParams
    profile: TrackProfile

    @cached_property
    def _delays(self):
        if self.profile.speed <= 0 or (self.profile.amp1 == 0 and self.profile.amp2 == 0):
            return None
        return wheel_delays(self.params, self.profile)

    def forcing(self, t: float) -> ForcingSample:
        if self._delays is None:
            return _ZERO_FORCING
        return wheel_forcing(t, self.profile, self._delays)


@dataclass(frozen=True)
class StepControl:
    """Tolerances and step bounds for the adaptive integrator."""

    abs_tol: float = 1e-9
    rel_tol: float = 1e-6
    h_init: float = 1e-3      # s
    h_min: float = 1e-10      # s
    h_max: float = 1.0        # s
    safety_factor: float = 0.9
    shrink_limit: float = 0.2
    growth_limit: float = 5.0

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be > 0")
        if not (0 < self.h_min <= self.h_init <= self.h_max):
            raise ValueError("need 0 < h_min <= h_init <= h_max")
        if not (0 < self.shrink_limit < 1 < self.growth_limit):
            raise ValueError("need 0 < shrink_limit < 1 < growth_limit")
        if not (0 < self.safety_factor < 1):
            raise ValueError("safety_factor must lie in (0, 1)")


@dataclass
class TimeSeries:
    """Sampled trajectory: times, states and the forcing at each sample.

    ``states`` is (n, 8) in the layout of :mod:`railsim.model`; ``forcings``
    is (n, 8) holding the four wheel displacements followed by their rates.
    ``error_norms`` is filled by the adaptive integrator only (one accepted
    error norm per step).
    """

    times: np.ndarray
    states: np.ndarray
    forcings: np.ndarray
    sample_stride: int = 1
    error_norms: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.forcings = np.asarray(self.forcings, dtype=float)
        n = len(self.times)
        if self.states.shape != (n, N_STATES) or self.forcings.shape != (n, N_STATES):
            raise ValueError("times/states/forcings lengths disagree")
        if n > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)


def step_schedule(t0: float, t1: float, h: float):
    """Fixed-step schedule ``[(t_start, t_mid, t_end, h_i), ...]``.

    All steps have nominal size h except the last, which is shortened so
    that the final ``t_end`` equals t1 exactly.  Both engines consume this
    schedule, which pins down every stage time bit for bit.
    """
    if not (t1 > t0):
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"need h > 0, got {h!r}")
    n = max(1, int(math.ceil((t1 - t0) / h)))
    # ceil can overshoot by one when (t1-t0)/h rounds just above an integer
    if n > 1 and t0 + (n - 1) * h >= t1:
        n -= 1
    steps = []
    for i in range(n):
        ts = t0 + i * h
        te = t1 if i == n - 1 else t0 + (i + 1) * h
        hi = te - ts
        steps.append((ts, ts + 0.5 * hi, te, hi))
    return steps


def sample_rows(n_steps: int, stride: int):
    """Map step index -> output row (-1 when unsampled); row 0 is t0."""
    if stride < 1:
        raise ValueError("sample_stride must be >= 1")
    rows = [-1] * n_steps
    row = 1
    for i in range(n_steps):
        if (i + 1) % stride == 0 or i == n_steps - 1:
            rows[i] = row
            row += 1
    return rows, row


def rk4_step(f, t: float, x, h: float):
    """One classic four-stage Runge-Kutta step of ``x' = f(t, x)``.

    The combination ``x + h*(k1 + 2*k2 + 2*k3 + k4)/6`` is evaluated in
    exactly this order; :func:`integrate_fixed` and the parallel engine
    repeat the same per-component expressions.
    """
    if not (h > 0):
        raise ValueError(f"need h > 0, got {h!r}")
    xa = np.asarray(x, dtype=float)
    half = 0.5 * h
    k1 = np.asarray(f(t, xa), dtype=float)
    k2 = np.asarray(f(t + half, xa + half * k1), dtype=float)
    k3 = np.asarray(f(t + half, xa + half * k2), dtype=float)
    k4 = np.asarray(f(t + h, xa + h * k3), dtype=float)
    out = xa + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    if not np.all(np.isfinite(out)):
        raise IntegrationDivergedError(f"non-finite stage at t={t!r}", time=t)
    if np.ndim(x) == 0:
        return float(out)
    return out


def _checked_x0(x0):
    x = [float(v) for v in x0]
    if len(x) != N_STATES:
        raise ValueError(f"initial state must have {N_STATES} components")
    for v in x:
        if not math.isfinite(v):
            raise IntegrationDivergedError(f"non-finite initial state component {v!r}")
    return x


def integrate_fixed(x0, t0: float, t1: float, h: float, scenario: Scenario,
                    sample_stride: int = 1) -> TimeSeries:
    """Fixed-step RK4 trajectory of the vehicle over [t0, t1].

    Forcing is evaluated analytically at every stage time; samples are
    recorded every ``sample_stride`` steps plus the final state, which lands
    exactly on t1.
    """
    x = _checked_x0(x0)
    schedule = step_schedule(t0, t1, h)
    rows, n_samples = sample_rows(len(schedule), sample_stride)
    funcs = component_functions(scenario.params)
    rng8 = range(N_STATES)
    isfinite = math.isfinite

    times = np.empty(n_samples)
    states = np.empty((n_samples, N_STATES))
    forcings = np.empty((n_samples, N_STATES))
    f0 = scenario.forcing(t0)
    times[0] = t0
    states[0] = x
    forcings[0] = f0.eta + f0.eta_rate

    for i, (ts, tm, te, hi) in enumerate(schedule):
        fs = scenario.forcing(ts)
        fm = scenario.forcing(tm)
        fe = scenario.forcing(te)
        e0, r0 = fs.eta, fs.eta_rate
        em, rm = fm.eta, fm.eta_rate
        ee, re = fe.eta, fe.eta_rate
        half = 0.5 * hi

        k1 = [d(x, e0, r0) for d in funcs]
        y = [x[j] + half * k1[j] for j in rng8]
        k2 = [d(y, em, rm) for d in funcs]
        y = [x[j] + half * k2[j] for j in rng8]
        k3 = [d(y, em, rm) for d in funcs]
        y = [x[j] + hi * k3[j] for j in rng8]
        k4 = [d(y, ee, re) for d in funcs]
        x = [x[j] + hi * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]) / 6.0
             for j in rng8]

        for v in x:
            if not isfinite(v):
                raise IntegrationDivergedError(
                    f"solution diverged at step {i} (t={te!r})",
                    step_index=i, time=te)
        r = rows[i]
        if r >= 0:
            times[r] = te
            states[r] = x
            forcings[r] = ee + re

    return TimeSeries(times, states, forcings, sample_stride=sample_stride)


# Dormand-Prince 5(4) tableau.  The fifth-order weights are row 7; the
# error weights are the difference against the embedded fourth-order row.
_DP_C = (0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0)
_DP_A = (
    (),
    (1.0 / 5.0,),
    (3.0 / 40.0, 9.0 / 40.0),
    (44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0),
    (19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0),
    (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
     -5103.0 / 18656.0),
    (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0,
     11.0 / 84.0),
)
_DP_B5 = (35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0,
          -2187.0 / 6784.0, 11.0 / 84.0, 0.0)
_DP_ERR = (71.0 / 57600.0, 0.0, -71.0 / 16695.0, 71.0 / 1920.0,
           -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)


def adaptive_rk45(f, x0, t0: float, t1: float, ctrl: StepControl):
    """Generic Dormand-Prince 5(4) driver for ``x' = f(t, x)``.

    Returns ``(times, states, error_norms)`` at the accepted steps, starting
    from t0.  The error norm is ``max_i |err_i| / (abs_tol + rel_tol*|x_i|)``
    and a step is accepted when it is <= 1.
    """
    if not (t1 > t0):
        raise ValueError(f"need t1 > t0, got [{t0}, {t1}]")
    x = [float(v) for v in x0]
    ndim = len(x)
    rng = range(ndim)
    t = t0
    h = min(ctrl.h_init, t1 - t0)
    times = [t0]
    states = [list(x)]
    norms = []

    while t < t1:
        if t + h >= t1:
            h_step = t1 - t
            te = t1
        else:
            h_step = h
            te = t + h
        if h_step <= 0:
            break

        k = [[0.0] * ndim for _ in range(7)]
        k[0] = list(f(t, x))
        ok = True
        for s in range(1, 7):
            a_row = _DP_A[s]
            y = [x[j] + h_step * sum(a_row[m] * k[m][j] for m in range(s))
                 for j in rng]
            if not all(math.isfinite(v) for v in y):
                ok = False
                break
            k[s] = list(f(t + _DP_C[s] * h_step, y))

        if ok:
            x_new = [x[j] + h_step * (_DP_B5[0] * k[0][j] + _DP_B5[2] * k[2][j]
                                      + _DP_B5[3] * k[3][j] + _DP_B5[4] * k[4][j]
                                      + _DP_B5[5] * k[5][j])
                     for j in rng]
            norm = 0.0
            for j in rng:
                err = h_step * (_DP_ERR[0] * k[0][j] + _DP_ERR[2] * k[2][j]
                                + _DP_ERR[3] * k[3][j] + _DP_ERR[4] * k[4][j]
                                + _DP_ERR[5] * k[5][j] + _DP_ERR[6] * k[6][j])
                scale = ctrl.abs_tol + ctrl.rel_tol * abs(x[j])
                ratio = abs(err) / scale
                if ratio > norm:
                    norm = ratio
            ok = all(math.isfinite(v) for v in x_new) and math.isfinite(norm)

        if ok and norm <= 1.0:
            t = te
            x = x_new
            times.append(t)
            states.append(list(x))
            norms.append(norm)
            if norm == 0.0:
                factor = ctrl.growth_limit
            else:
                factor = ctrl.safety_factor * (1.0 / norm) ** 0.2
                factor = min(ctrl.growth_limit, max(ctrl.shrink_limit, factor))
            h = min(ctrl.h_max, h_step * factor)
        else:
            if ok:
                factor = ctrl.safety_factor * (1.0 / norm) ** 0.2
                factor = min(1.0, max(ctrl.shrink_limit, factor))
            else:
                factor = ctrl.shrink_limit
            h = h_step * factor
            if h < ctrl.h_min:
                raise StepSizeUnderflowError(
                    f"step size underflow at t={t!r}: h={h!r} < h_min={ctrl.h_min!r}"
                    f" (last error norm {norm if ok else 'non-finite'})")

    return (np.asarray(times), np.asarray(states), np.asarray(norms))


def integrate_adaptive(x0, t0: float, t1: float, ctrl: StepControl,
                       scenario: Scenario) -> TimeSeries:
    """Adaptive trajectory of the vehicle; samples at every accepted step."""
    x = _checked_x0(x0)
    funcs = component_functions(scenario.params)

    def f(t, y):
        fs = scenario.forcing(t)
        eta, rate = fs.eta, fs.eta_rate
        return [d(y, eta, rate) for d in funcs]

    times, states, norms = adaptive_rk45(f, x, t0, t1, ctrl)
    forcings = np.empty((len(times), N_STATES))
    for i, t in enumerate(times):
        fs = scenario.forcing(float(t))
        forcings[i] = fs.eta + fs.eta_rate
    return TimeSeries(times, states, forcings, sample_stride=1,
                      error_norms=norms)
