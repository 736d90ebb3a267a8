"""Built-in benchmark systems.

Each constructor returns a fresh ``DynamicalSystem``.  Default epsilons are
the closeness targets used with the small pre-trained networks; the tighter
values associated with the wide three-hidden-layer networks are kept in
``LARGE_NET_EPSILON``.
"""

from __future__ import annotations

import math

from ..errors import ConfigError
from ..geometry import Hyperrectangle
from .expr import cbrt, cos, exp, sin, sqrt, var
from .system import CONTINUOUS, DISCRETE, DynamicalSystem

PI = math.pi

# Parameters of the low-thrust spacecraft model (normalized units).
SPACECRAFT_MU = 1.0
SPACECRAFT_M0 = 1.0
SPACECRAFT_VEX = 2.0

# Parameters of the discrete quadratic map.
QUADRATIC_MU = -0.05
QUADRATIC_LAMBDA = -1.0
QUADRATIC_DT = 0.02

VAN_DER_POL_MU = 1.0


def water_tank() -> DynamicalSystem:
    x = var(0)
    return DynamicalSystem(
        "water_tank", 1, [1.5 - sqrt(x)],
        Hyperrectangle.from_bounds([0.1], [10.0]),
        default_epsilon=0.097,
    )


def jet_engine() -> DynamicalSystem:
    x, y = var(0), var(1)
    return DynamicalSystem(
        "jet_engine", 2,
        [-y - 1.5 * x ** 2 - 0.5 * x ** 3 - 0.1, 3.0 * x - y],
        Hyperrectangle.from_bounds([-1.0, -1.0], [1.0, 1.0]),
        default_epsilon=0.039,
    )


def steam_governor() -> DynamicalSystem:
    x, y, z = var(0), var(1), var(2)
    return DynamicalSystem(
        "steam_governor", 3,
        [
            y,
            0.5 * z ** 2 * sin(2.0 * x) - sin(x) - 3.0 * y,
            -(cos(x) - 1.0),
        ],
        Hyperrectangle.from_bounds([-1.0] * 3, [1.0] * 3),
        default_epsilon=0.105,
    )


def exponential() -> DynamicalSystem:
    x, y = var(0), var(1)
    return DynamicalSystem(
        "exponential", 2,
        [-sin(exp(y ** 3 + 1.0)) - y ** 2, -x],
        Hyperrectangle.from_bounds([-1.0, -1.0], [1.0, 1.0]),
        default_epsilon=0.112,
    )


def nl1() -> DynamicalSystem:
    x, y = var(0), var(1)
    return DynamicalSystem(
        "nl1", 2,
        [y, sqrt(x)],
        Hyperrectangle.from_bounds([0.0, -1.0], [1.0, 1.0]),
        default_epsilon=0.11,
    )


def nl2() -> DynamicalSystem:
    x, y = var(0), var(1)
    return DynamicalSystem(
        "nl2", 2,
        [x ** 2 + y, cbrt(x ** 2) - x],
        Hyperrectangle.from_bounds([-1.0, -1.0], [1.0, 1.0]),
        default_epsilon=0.081,
    )


def van_der_pol() -> DynamicalSystem:
    x, y = var(0), var(1)
    mu = VAN_DER_POL_MU
    return DynamicalSystem(
        "van_der_pol", 2,
        [y, mu * (1.0 - x ** 2) * y - x],
        Hyperrectangle.from_bounds([-3.0, -3.0], [3.0, 3.0]),
        default_epsilon=0.25,
    )


def sine_2d() -> DynamicalSystem:
    x, y = var(0), var(1)
    return DynamicalSystem(
        "sine_2d", 2,
        [sin(0.5 * y), -sin(1.0 * x)],
        Hyperrectangle.from_bounds([-PI, -PI], [PI, PI]),
        default_epsilon=0.02,
    )


def nonlinear_oscillator() -> DynamicalSystem:
    x = var(0)
    return DynamicalSystem(
        "nonlinear_oscillator", 1,
        [-x - 0.5 * x ** 3 + 0.3 * sin(x)],
        Hyperrectangle.from_bounds([-3.0], [3.0]),
        default_epsilon=0.165,
    )


def lorenz() -> DynamicalSystem:
    x, y, z = var(0), var(1), var(2)
    return DynamicalSystem(
        "lorenz", 3,
        [
            10.0 * (y - x),
            x * (28.0 - z) - y,
            x * y - (8.0 / 3.0) * z,
        ],
        Hyperrectangle.from_bounds([-30.0, -30.0, 0.0], [30.0, 30.0, 60.0]),
        default_epsilon=0.6,
    )


def lorenz_reduced_domain() -> Hyperrectangle:
    """Smaller input region used by the teacher/student compression run."""
    return Hyperrectangle.from_bounds([-5.0, -5.0, 0.0], [5.0, 5.0, 10.0])


def spacecraft() -> DynamicalSystem:
    # state: r, theta, v_r, v_theta, dm; controls: T, alpha
    r, th, vr, vt, dm, T, al = (var(i) for i in range(7))
    mu, m0, vex = SPACECRAFT_MU, SPACECRAFT_M0, SPACECRAFT_VEX
    mass = m0 + dm
    return DynamicalSystem(
        "spacecraft", 7,
        [
            vr,
            vt / r,
            -mu / r ** 2 + vt ** 2 / r + T * cos(al) / mass,
            -vr * vt / r + T * sin(al) / mass,
            -T / vex,
        ],
        Hyperrectangle.from_bounds(
            [0.9, -PI, -0.2, 0.8, -0.2, 0.0, -PI],
            [1.1, PI, 0.2, 1.2, 0.0, 0.1, PI],
        ),
        default_epsilon=0.12,
    )


def quadratic() -> DynamicalSystem:
    """One step of the closed-form discrete quadratic map."""
    return quadratic_step_map(1)


def quadratic_step_map(steps: int, dt: float = QUADRATIC_DT,
                       mu: float = QUADRATIC_MU,
                       lam: float = QUADRATIC_LAMBDA) -> DynamicalSystem:
    """The exact ``steps``-step map of the quadratic system.

    The flow is solvable in closed form, so the multi-step map is again a
    quadratic expression in the initial state:

        x1(t) = x1 exp(mu t)
        x2(t) = (x2 + b x1^2) exp(lam t) - b x1^2 exp(2 mu t),  b = lam/(2 mu - lam)

    evaluated at t = steps * dt.  ``steps = 0`` yields the identity map.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if abs(2.0 * mu - lam) < 1e-12:
        raise ValueError(
            "closed form requires 2*mu != lambda (resonant case unsupported)"
        )
    x1, x2 = var(0), var(1)
    t = steps * dt
    b = lam / (2.0 * mu - lam)
    e_mu = math.exp(mu * t)
    e_lam = math.exp(lam * t)
    e_2mu = math.exp(2.0 * mu * t)
    out1 = e_mu * x1
    out2 = e_lam * x2 + (b * (e_lam - e_2mu)) * x1 ** 2
    return DynamicalSystem(
        f"quadratic_{steps}step" if steps != 1 else "quadratic",
        2, [out1, out2],
        Hyperrectangle.from_bounds([-0.5, -0.5], [0.5, 0.5]),
        default_epsilon=0.1,
        time_kind=DISCRETE,
    )


_BUILDERS = {
    "water_tank": water_tank,
    "jet_engine": jet_engine,
    "steam_governor": steam_governor,
    "exponential": exponential,
    "nl1": nl1,
    "nl2": nl2,
    "van_der_pol": van_der_pol,
    "sine_2d": sine_2d,
    "nonlinear_oscillator": nonlinear_oscillator,
    "lorenz": lorenz,
    "spacecraft": spacecraft,
    "quadratic": quadratic,
}

# Closeness targets paired with the wide retrained networks.
LARGE_NET_EPSILON = {
    "water_tank": 0.007,
    "jet_engine": 0.012,
    "steam_governor": 0.06,
    "exponential": 0.04,
    "nl1": 0.03,
    "nl2": 0.02,
}


def builtin_systems() -> dict:
    """Fresh instances of every built-in system, keyed by canonical name."""
    return {name: build() for name, build in _BUILDERS.items()}


def _canon(name: str) -> str:
    return name.replace("_", "").replace("-", "").lower()


_CANON = {_canon(k): k for k in _BUILDERS}


def get_system(name: str) -> DynamicalSystem:
    """Look up a built-in system; accepts CamelCase and snake_case names."""
    key = _CANON.get(_canon(name))
    if key is None:
        known = ", ".join(sorted(_BUILDERS))
        raise ConfigError(f"unknown system {name!r}; built-ins: {known}")
    return _BUILDERS[key]()
