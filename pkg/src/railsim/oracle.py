"""Independent frequency-domain oracle for the simulated trajectories.

The vehicle model is linear and time-invariant, and the track excitation is
a sum of two harmonics with per-wheel phase lags, so the exact steady-state
response is available in closed form: per forcing frequency w, solve
``(i*w*I - A) X = B U`` for the complex state phasor X and superpose the
real parts.  Long simulations must converge to this trajectory once the
transient has decayed, which makes the closed form a machine-checkable
replacement for eyeballing plots.

The small complex solves go through a local Gaussian elimination with
partial pivoting rather than a library routine, keeping the oracle's whole
computation path independent of the time steppers it validates.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (InsufficientWindowError, InvalidProfileError,
                     SingularMatrixError, UndampedResonanceError)
from .integrate import Scenario, TimeSeries, integrate_fixed
from .model import VehicleParams
from .track import TrackProfile, WheelDelays, excitation_frequency, wheel_delays

MAX_SOLVE_SIZE = 16
_PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class StateSpace:
    """First-order form ``x' = A x + B u`` of the vehicle model.

    The input vector is ``u = (eta1..eta4, eta1'..eta4')``.  Rows 0, 2, 4
    and 6 of A are velocity selectors and the matching rows of B are zero.
    """

    a: np.ndarray  # 8x8
    b: np.ndarray  # 8x8


def build_state_space(params: VehicleParams) -> StateSpace:
    """Hand-assembled A and B; cross-checked against the derivative closures."""
    m1, m2, c1, c2, b1, b2, a2, j2 = params.coefficients()

    a = np.zeros((8, 8))
    a[0, 1] = 1.0
    a[2, 3] = 1.0
    a[4, 5] = 1.0
    a[6, 7] = 1.0

    a[1, 0] = -(2.0 * c1 + c2) / m1
    a[1, 1] = -(2.0 * b1 + b2) / m1
    a[1, 4] = c2 / m1
    a[1, 5] = b2 / m1
    a[1, 6] = a2 * c2 / m1
    a[1, 7] = a2 * b2 / m1

    a[3, 2] = -(2.0 * c1 + c2) / m1
    a[3, 3] = -(2.0 * b1 + b2) / m1
    a[3, 4] = c2 / m1
    a[3, 5] = b2 / m1
    a[3, 6] = -a2 * c2 / m1
    a[3, 7] = -a2 * b2 / m1

    a[5, 0] = c2 / m2
    a[5, 1] = b2 / m2
    a[5, 2] = c2 / m2
    a[5, 3] = b2 / m2
    a[5, 4] = -2.0 * c2 / m2
    a[5, 5] = -2.0 * b2 / m2

    a[7, 0] = a2 * c2 / j2
    a[7, 1] = a2 * b2 / j2
    a[7, 2] = -a2 * c2 / j2
    a[7, 3] = -a2 * b2 / j2
    a[7, 6] = -2.0 * a2 * a2 * c2 / j2
    a[7, 7] = -2.0 * a2 * a2 * b2 / j2

    b = np.zeros((8, 8))
    b[1, 0] = b[1, 1] = c1 / m1
    b[1, 4] = b[1, 5] = b1 / m1
    b[3, 2] = b[3, 3] = c1 / m1
    b[3, 6] = b[3, 7] = b1 / m1

    return StateSpace(a=a, b=b)


def complex_solve(m, rhs) -> np.ndarray:
    """Solve ``M y = rhs`` for small complex systems (n <= 16).

    Gaussian elimination with partial pivoting by modulus; a pivot below
    1e-300 raises :class:`SingularMatrixError`.
    """
    a = np.array(m, dtype=complex)
    y = np.array(rhs, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_SOLVE_SIZE:
        raise ValueError(f"solver is limited to n <= {MAX_SOLVE_SIZE}, got {n}")
    if y.shape != (n,):
        raise ValueError(f"rhs must have shape ({n},), got {y.shape}")

    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot_row, col]) < _PIVOT_FLOOR:
            raise SingularMatrixError(f"pivot below {_PIVOT_FLOOR} in column {col}")
        if pivot_row != col:
            a[[col, pivot_row]] = a[[pivot_row, col]]
            y[[col, pivot_row]] = y[[pivot_row, col]]
        for row in range(col + 1, n):
            factor = a[row, col] / a[col, col]
            if factor != 0:
                a[row, col + 1:] -= factor * a[col, col + 1:]
                y[row] -= factor * y[col]

    for row in range(n - 1, -1, -1):
        y[row] = (y[row] - np.dot(a[row, row + 1:], y[row + 1:])) / a[row, row]
    return y


@dataclass(frozen=True)
class HarmonicComponent:
    """One forcing harmonic as complex channel amplitudes.

    The physical input is ``u(t) = Re(amplitudes * exp(i*w*t))`` per channel;
    the per-wheel transport delay appears as the phase ``exp(-i*w*tau)`` and
    each rate channel is ``i*w`` times its displacement channel.
    """

    angular_frequency: float
    amplitudes: np.ndarray  # 8 complex channels: eta1..eta4, eta1'..eta4'


def harmonic_components(profile: TrackProfile,
                        delays: WheelDelays) -> tuple[HarmonicComponent, HarmonicComponent]:
    """The two track harmonics (w and 3w) as phasor inputs."""
    w = excitation_frequency(profile)
    out = []
    for amp, omega in ((profile.amp1, w), (profile.amp2, 3.0 * w)):
        channels = np.zeros(8, dtype=complex)
        for j, tau in enumerate(delays.tau):
            # amp*sin(omega*(t - tau)) == Re(-i*amp*exp(-i*omega*tau) * e^{i*omega*t})
            channels[j] = -1j * amp * cmath.exp(-1j * omega * tau)
            channels[4 + j] = 1j * omega * channels[j]
        out.append(HarmonicComponent(angular_frequency=omega, amplitudes=channels))
    return tuple(out)


@dataclass(frozen=True)
class SteadyStateResponse:
    """Closed-form periodic trajectory as per-harmonic state phasors."""

    harmonics: tuple[tuple[float, np.ndarray], ...]

    def evaluate(self, times) -> np.ndarray:
        """Real steady-state states at the given times, shape (n, 8)."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.zeros((len(t), 8))
        for omega, phasor in self.harmonics:
            out += np.real(np.exp(1j * omega * t)[:, None] * phasor[None, :])
        return out

    def amplitude_bound(self, component: int) -> float:
        """Upper bound sum of harmonic magnitudes for one state component."""
        return float(sum(abs(ph[component]) for _, ph in self.harmonics))


def steady_state_response(ss: StateSpace,
                          components) -> SteadyStateResponse:
    """Exact periodic response ``X(w) = (i*w*I - A)^{-1} B U(w)`` per harmonic."""
    eye = np.eye(8)
    solved = []
    for hc in components:
        m = 1j * hc.angular_frequency * eye - ss.a
        rhs = ss.b @ hc.amplitudes
        try:
            x = complex_solve(m, rhs)
        except SingularMatrixError as exc:
            raise UndampedResonanceError(
                f"resolvent singular at w={hc.angular_frequency}: {exc}") from exc
        solved.append((float(hc.angular_frequency), x))
    return SteadyStateResponse(harmonics=tuple(solved))


# Default windows for steady-state validation: the slowest free mode of the
# nominal vehicle decays at ~1.75 1/s, so 50 s leaves a transient below
# 1e-30 of its initial size; 10 s of measurement covers at least two
# fundamental periods for every speed above ~16 km/h.
SETTLE_TIME = 50.0   # s
MEASURE_TIME = 10.0  # s


def transient_settle_comparison(scenario, h: float = 1e-3,
                                settle: float = SETTLE_TIME,
                                measure: float = MEASURE_TIME):
    """Simulate from rest, drop the settle window, compare the tail pointwise.

    Returns ``(rel_errors, peaks, series)`` where ``rel_errors[i]`` is the
    worst absolute deviation of state i from the closed-form steady state
    over the tail, normalized by that state's closed-form peak amplitude.
    """
    series = integrate_fixed([0.0] * 8, 0.0, settle + measure, h, scenario)
    delays = wheel_delays(scenario.params, scenario.profile)
    components = harmonic_components(scenario.profile, delays)
    ss = steady_state_response(build_state_space(scenario.params), components)

    mask = series.times >= settle
    tail_times = series.times[mask]
    reference = ss.evaluate(tail_times)
    deviation = np.abs(series.states[mask] - reference)
    peaks = np.max(np.abs(reference), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(peaks > 0, deviation.max(axis=0) / peaks,
                       np.where(deviation.max(axis=0) > 0, np.inf, 0.0))
    return rel, peaks, series


@dataclass(frozen=True)
class AmplitudeEstimate:
    """Peak and single-frequency amplitudes of one sampled state component."""

    peak: float
    at_fundamental: float
    at_third_harmonic: float

    @property
    def dominant(self) -> float:
        return max(self.at_fundamental, self.at_third_harmonic)


def amplitude_from_series(series: TimeSeries, component: int, window: float,
                          profile: TrackProfile) -> AmplitudeEstimate:
    """Amplitudes of a state component over the trailing ``window`` seconds.

    The peak is ``max |x - mean|``; the harmonic amplitudes come from
    projecting the windowed signal onto ``exp(-i*w*t)`` at w and 3w.  The
    window must span at least two fundamental periods and lie inside the
    sampled time range.
    """
    w = excitation_frequency(profile)
    if w <= 0:
        raise InvalidProfileError("zero excitation frequency: no harmonic to project on")
    period = 2.0 * math.pi / w
    t = series.times
    span = float(t[-1] - t[0])
    if window > span:
        raise InsufficientWindowError(
            f"window {window} s exceeds sampled span {span} s")
    if window < 2.0 * period:
        raise InsufficientWindowError(
            f"window {window} s is shorter than two fundamental periods ({2 * period} s)")

    mask = t >= t[-1] - window
    tw = t[mask]
    x = series.states[mask, component]
    x = x - x.mean()
    peak = float(np.max(np.abs(x)))

    length = float(tw[-1] - tw[0])
    amps = []
    for omega in (w, 3.0 * w):
        proj = np.trapezoid(x * np.exp(-1j * omega * tw), tw) * 2.0 / length
        amps.append(float(abs(proj)))
    return AmplitudeEstimate(peak=peak, at_fundamental=amps[0],
                             at_third_harmonic=amps[1])
