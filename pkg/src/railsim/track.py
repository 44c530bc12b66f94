"""Harmonic track irregularity and per-wheel transport delays.

The rail surface height is a two-harmonic sine of the distance travelled,
expressed in time through the running speed:

    eta(t) = amp1*sin(w*t) + amp2*sin(3*w*t),   w = 2*pi*V/L

Trailing wheels meet the same irregularity later; wheel i sees
``eta(t - tau_i)`` with delays fixed by the axle geometry and the speed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DelaysUndefinedError, InvalidProfileError
from .model import ForcingSample, VehicleParams


@dataclass(frozen=True)
class TrackProfile:
    """Two-harmonic vertical rail irregularity met at constant speed."""

    amp1: float = 0.005       # m, fundamental amplitude
    amp2: float = 0.002       # m, third-harmonic amplitude
    wavelength: float = 25.0  # m
    speed: float = 20.0       # m/s

    def __post_init__(self):
        if not (math.isfinite(self.wavelength) and self.wavelength > 0):
            raise InvalidProfileError(f"wavelength must be > 0, got {self.wavelength!r}")
        if not (math.isfinite(self.speed) and self.speed >= 0):
            raise InvalidProfileError(f"speed must be >= 0, got {self.speed!r}")
        for name in ("amp1", "amp2"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise InvalidProfileError(f"{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class WheelDelays:
    """Transport delays (s) of the four wheelsets, leading wheel first."""

    tau: tuple[float, float, float, float]


def excitation_frequency(profile: TrackProfile) -> float:
    """Angular frequency ``2*pi*V/L`` of the fundamental, in rad/s."""
    if profile.wavelength <= 0:
        raise InvalidProfileError("wavelength must be > 0")
    return 2.0 * math.pi * profile.speed / profile.wavelength


def profile_height(t: float, profile: TrackProfile) -> float:
    """Rail surface height at time t, in m.  Defined for all real t."""
    w = excitation_frequency(profile)
    return profile.amp1 * math.sin(w * t) + profile.amp2 * math.sin(3.0 * w * t)


def profile_rate(t: float, profile: TrackProfile) -> float:
    """Analytic time derivative of :func:`profile_height`, in m/s."""
    w = excitation_frequency(profile)
    return (profile.amp1 * w * math.cos(w * t)
            + 3.0 * profile.amp2 * w * math.cos(3.0 * w * t))


def wheel_delays(params: VehicleParams, profile: TrackProfile) -> WheelDelays:
    """Per-wheel delays ``(0, 2*a_b/V, 2*a_k/V, 2*(a_k+a_b)/V)``.

    Undefined for a standing vehicle; callers must substitute zero forcing
    when the speed is zero.
    """
    v = profile.speed
    if v <= 0:
        raise DelaysUndefinedError("transport delays are undefined at zero speed")
    a_k = params.wagon_half_base
    a_b = params.bogie_half_base
    return WheelDelays((0.0, 2.0 * a_b / v, 2.0 * a_k / v, 2.0 * (a_k + a_b) / v))


def wheel_forcing(t: float, profile: TrackProfile, delays: WheelDelays) -> ForcingSample:
    """Excitation sample under all four wheels at time t."""
    t1, t2, t3, t4 = (t - delays.tau[0], t - delays.tau[1],
                      t - delays.tau[2], t - delays.tau[3])
    eta = (profile_height(t1, profile), profile_height(t2, profile),
           profile_height(t3, profile), profile_height(t4, profile))
    rate = (profile_rate(t1, profile), profile_rate(t2, profile),
            profile_rate(t3, profile), profile_rate(t4, profile))
    return ForcingSample(eta, rate)
