"""Vertical dynamics of a rail wagon riding on two bogies.

The vehicle is modelled as three lumped masses: two bogies, each coupled to
the rail through a primary spring/damper pair per wheelset, and the wagon
body, coupled to each bogie through a secondary spring/damper pair.  The
wagon body has two degrees of freedom (bounce and pitch), each bogie one,
giving an 8-component first-order state.

Unit system: tonne / kilonewton / metre / second.  This is self-consistent
(1 kN accelerates 1 t at 1 m/s^2), so the customary parameter values can be
used verbatim and energies come out in kJ.

State layout, fixed across every solver in this package::

    index 0  z1      bogie-1 vertical displacement      [m]
    index 1  z1dot   bogie-1 vertical velocity          [m/s]
    index 2  z2      bogie-2 vertical displacement      [m]
    index 3  z2dot   bogie-2 vertical velocity          [m/s]
    index 4  zk      wagon-body bounce displacement     [m]
    index 5  zkdot   wagon-body bounce velocity         [m/s]
    index 6  phi     wagon-body pitch angle             [rad]
    index 7  phidot  wagon-body pitch rate              [rad/s]

Bogie 1 sits at +a_k from the body centre, bogie 2 at -a_k, so the
secondary-suspension compressions are ``zk + a_k*phi - z1`` and
``zk - a_k*phi - z2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonFiniteInputError

N_STATES = 8
STATE_LABELS = ("z1", "z1dot", "z2", "z2dot", "zk", "zkdot", "phi", "phidot")


@dataclass(frozen=True)
class VehicleParams:
    """Masses, geometry and suspension rates of the wagon/two-bogie system.

    Defaults are the nominal freight-wagon values used throughout the test
    suite.  All masses, stiffnesses and half-bases must be strictly
    positive; dampings must be non-negative.
    """

    wagon_mass: float = 57.0          # t
    wagon_inertia: float = 70.0       # t*m^2 (pitch)
    bogie_mass: float = 9.0           # t
    wagon_half_base: float = 3.725    # m (body centre to bogie pivot)
    bogie_half_base: float = 1.5      # m (bogie pivot to wheelset)
    primary_stiffness: float = 3040.0    # kN/m (bogie-rail, per wheelset)
    primary_damping: float = 30.0        # kN*s/m
    secondary_stiffness: float = 2660.0  # kN/m (wagon-bogie, per bogie)
    secondary_damping: float = 100.0     # kN*s/m
    # Swap the roles of the two damping values in the equations of motion.
    # The default pairs each spring with its own damper (primary damping on
    # the rail coupling, secondary on the body coupling); the swapped
    # variant is kept purely for comparison runs.
    literal_damper_aliases: bool = False

    def __post_init__(self):
        for name in ("wagon_mass", "wagon_inertia", "bogie_mass",
                     "wagon_half_base", "bogie_half_base",
                     "primary_stiffness", "secondary_stiffness"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")
        for name in ("primary_damping", "secondary_damping"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {value!r}")

    def coefficients(self) -> tuple[float, float, float, float, float, float, float, float]:
        """Effective equation coefficients ``(m1, m2, c1, c2, b1, b2, a2, j2)``.

        ``m1/c1/b1`` act on the bogie-rail couplings, ``m2/c2/b2/a2/j2`` on
        the body and its couplings.  ``literal_damper_aliases`` exchanges
        b1 and b2 only.
        """
        b1, b2 = self.primary_damping, self.secondary_damping
        if self.literal_damper_aliases:
            b1, b2 = b2, b1
        return (
            float(self.bogie_mass),
            float(self.wagon_mass),
            float(self.primary_stiffness),
            float(self.secondary_stiffness),
            float(b1),
            float(b2),
            float(self.wagon_half_base),
            float(self.wagon_inertia),
        )


@dataclass(frozen=True)
class ForcingSample:
    """Rail-surface excitation under the four wheelsets at one instant.

    ``eta`` holds the four vertical displacements [m] and ``eta_rate`` their
    time derivatives [m/s], ordered front-bogie-front, front-bogie-rear,
    rear-bogie-front, rear-bogie-rear.
    """

    eta: tuple[float, float, float, float]
    eta_rate: tuple[float, float, float, float]

    @staticmethod
    def zero() -> "ForcingSample":
        return ForcingSample((0.0, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class SystemMatrices:
    """Second-order matrix form ``I q'' + D q' + S q = F u``.

    Generalized coordinates are ``q = (z1, z2, zk, phi)``.  ``force_map``
    is the 4x8 matrix mapping the input vector
    ``u = (eta1..eta4, eta1'..eta4')`` onto generalized forces.
    """

    inertia: np.ndarray      # 4x4, diagonal
    dissipative: np.ndarray  # 4x4, symmetric
    stiffness: np.ndarray    # 4x4, symmetric
    force_map: np.ndarray    # 4x8


@lru_cache(maxsize=32)
def _cached_component_functions(coeffs):
    m1, m2, c1, c2, b1, b2, a2, j2 = coeffs

    # One closure per state component.  The parallel engine evaluates these
    # per component on worker threads while the sequential path evaluates all
    # eight; keeping a single set of expressions is what makes the two
    # engines bit-identical.
    def d1(y, eta, rate):
        return y[1]

    def d2(y, eta, rate):
        return (b1 * (rate[0] + rate[1] - 2.0 * y[1])
                + c1 * (eta[0] + eta[1] - 2.0 * y[0])
                + b2 * (y[5] - y[1] + a2 * y[7])
                + c2 * (y[4] - y[0] + a2 * y[6])) / m1

    def d3(y, eta, rate):
        return y[3]

    def d4(y, eta, rate):
        return (b1 * (rate[2] + rate[3] - 2.0 * y[3])
                + c1 * (eta[2] + eta[3] - 2.0 * y[2])
                + b2 * (y[5] - y[3] - a2 * y[7])
                + c2 * (y[4] - y[2] - a2 * y[6])) / m1

    def d5(y, eta, rate):
        return y[5]

    def d6(y, eta, rate):
        return (b2 * (y[1] + y[3] - 2.0 * y[5])
                + c2 * (y[0] + y[2] - 2.0 * y[4])) / m2

    def d7(y, eta, rate):
        return y[7]

    def d8(y, eta, rate):
        return a2 / j2 * (b2 * (y[1] - y[3] - 2.0 * y[7] * a2)
                          + c2 * (y[0] - y[2] - 2.0 * y[6] * a2))

    return (d1, d2, d3, d4, d5, d6, d7, d8)


def component_functions(params: VehicleParams):
    """The eight per-component derivative closures for ``params``.

    Each closure has signature ``f(y, eta, eta_rate) -> float`` where ``y``
    indexes like the state layout and ``eta``/``eta_rate`` are 4-tuples.
    """
    return _cached_component_functions(params.coefficients())


def _require_finite(values, what):
    for v in values:
        if not math.isfinite(v):
            raise NonFiniteInputError(f"non-finite value in {what}: {v!r}")


def derivative(state, forcing: ForcingSample, params: VehicleParams) -> np.ndarray:
    """Time derivative of the 8-component state under the given forcing.

    Raises :class:`NonFiniteInputError` on NaN/inf inputs rather than
    propagating them.
    """
    y = [float(v) for v in state]
    if len(y) != N_STATES:
        raise ValueError(f"state must have {N_STATES} components, got {len(y)}")
    _require_finite(y, "state")
    eta = tuple(float(v) for v in forcing.eta)
    rate = tuple(float(v) for v in forcing.eta_rate)
    _require_finite(eta + rate, "forcing")
    funcs = component_functions(params)
    return np.array([f(y, eta, rate) for f in funcs], dtype=float)


def assemble_matrices(params: VehicleParams) -> SystemMatrices:
    """Second-order matrices equivalent to :func:`derivative`.

    Reducing ``I q'' + D q' + S q = F u`` to first order with
    ``q = (z1, z2, zk, phi)`` reproduces the state derivative.
    """
    m1, m2, c1, c2, b1, b2, a2, j2 = params.coefficients()

    inertia = np.diag([m1, m1, m2, j2])

    dissipative = np.array([
        [2.0 * b1 + b2, 0.0,            -b2,       -b2 * a2],
        [0.0,           2.0 * b1 + b2,  -b2,        b2 * a2],
        [-b2,           -b2,            2.0 * b2,   0.0],
        [-b2 * a2,      b2 * a2,        0.0,        2.0 * b2 * a2 * a2],
    ])

    stiffness = np.array([
        [2.0 * c1 + c2, 0.0,            -c2,       -c2 * a2],
        [0.0,           2.0 * c1 + c2,  -c2,        c2 * a2],
        [-c2,           -c2,            2.0 * c2,   0.0],
        [-c2 * a2,      c2 * a2,        0.0,        2.0 * c2 * a2 * a2],
    ])

    force_map = np.zeros((4, 8))
    force_map[0, 0] = force_map[0, 1] = c1
    force_map[0, 4] = force_map[0, 5] = b1
    force_map[1, 2] = force_map[1, 3] = c1
    force_map[1, 6] = force_map[1, 7] = b1

    return SystemMatrices(inertia=inertia, dissipative=dissipative,
                          stiffness=stiffness, force_map=force_map)


def mechanical_energy(state, forcing: ForcingSample, params: VehicleParams) -> float:
    """Kinetic plus elastic energy of the suspension system, in kJ.

    Spring energies are measured from the instantaneous rail excitation, so
    for free motion (zero forcing) this is the usual Lyapunov functional of
    the damped system.
    """
    y = [float(v) for v in state]
    if len(y) != N_STATES:
        raise ValueError(f"state must have {N_STATES} components, got {len(y)}")
    _require_finite(y, "state")
    eta = tuple(float(v) for v in forcing.eta)
    _require_finite(eta, "forcing")

    m1, m2, c1, c2, b1, b2, a2, j2 = params.coefficients()
    kinetic = (0.5 * m1 * (y[1] * y[1] + y[3] * y[3])
               + 0.5 * m2 * y[5] * y[5]
               + 0.5 * j2 * y[7] * y[7])
    primary = 0.5 * c1 * ((eta[0] - y[0]) ** 2 + (eta[1] - y[0]) ** 2
                          + (eta[2] - y[2]) ** 2 + (eta[3] - y[2]) ** 2)
    secondary = 0.5 * c2 * ((y[4] + a2 * y[6] - y[0]) ** 2
                            + (y[4] - a2 * y[6] - y[2]) ** 2)
    return kinetic + primary + secondary


def free_dissipation_rate(state, params: VehicleParams) -> float:
    """Analytic dE/dt along free motion (zero forcing); always <= 0.

    Equals minus the power absorbed by the dampers:
    ``-(b1*(2*z1dot^2 + 2*z2dot^2) + b2*(rel1^2 + rel2^2))`` where ``rel``
    are the secondary-suspension relative velocities.
    """
    y = [float(v) for v in state]
    _require_finite(y, "state")
    m1, m2, c1, c2, b1, b2, a2, j2 = params.coefficients()
    rel1 = y[5] + a2 * y[7] - y[1]
    rel2 = y[5] - a2 * y[7] - y[3]
    return -(b1 * (2.0 * y[1] * y[1] + 2.0 * y[3] * y[3])
             + b2 * (rel1 * rel1 + rel2 * rel2))
