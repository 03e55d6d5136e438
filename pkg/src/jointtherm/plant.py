"""Synthetic first-order thermal plant for robot joint motors.

Each joint is a lumped RC element heated by Joule losses proportional to the
squared joint torque::

    C dT/dt = k tau^2 - (T - T_amb) / R

With torque held constant over a sample interval the ODE has a closed-form
solution, so the simulator steps exactly instead of approximating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, RejectedInputError

N_JOINTS = 7

PROFILE_KINDS = ("step", "trapezoid", "random_walk", "sinusoid", "composite")


@dataclass(frozen=True)
class ThermalPlantParams:
    """Lumped thermal parameters of one joint motor.

    Attributes
    ----------
    thermal_resistance : float
        Winding-to-ambient resistance R [K/W].
    thermal_capacitance : float
        Heat capacity C [J/K].
    heating_coefficient : float
        Joule gain k [W/(N m)^2].
    ambient_temperature : float
        T_amb [degC].
    """

    thermal_resistance: float
    thermal_capacitance: float
    heating_coefficient: float
    ambient_temperature: float = 22.0

    def __post_init__(self):
        if not self.thermal_resistance > 0:
            raise ConfigurationError("thermal_resistance must be > 0")
        if not self.thermal_capacitance > 0:
            raise ConfigurationError("thermal_capacitance must be > 0")
        if not self.heating_coefficient >= 0:
            raise ConfigurationError("heating_coefficient must be >= 0")
        if not np.isfinite(self.ambient_temperature):
            raise ConfigurationError("ambient_temperature must be finite")

    @property
    def time_constant(self):
        return self.thermal_resistance * self.thermal_capacitance


@dataclass(frozen=True)
class TorqueTrace:
    """Sampled joint torques, shape (n_samples, n_joints) in N m.

    ``breaks`` lists the sample indices where any joint of a composite
    profile switched regime; it is empty for the single-regime kinds.
    """

    dt: float
    values: np.ndarray
    breaks: tuple = field(default=())

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be > 0, got {self.dt}")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ConfigurationError("torque values must be (n_samples, n_joints)")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    @property
    def n_joints(self):
        return self.values.shape[1]

    @property
    def time(self):
        return np.arange(len(self)) * self.dt


@dataclass(frozen=True)
class TemperatureTrace:
    """Sampled joint temperatures, shape (n_samples, n_joints) in degC."""

    dt: float
    values: np.ndarray

    def __len__(self):
        return self.values.shape[0]

    @property
    def time(self):
        return np.arange(len(self)) * self.dt


# Joints 2 and 4 carry the largest loads and heat the most; the rest stay
# within a couple of degrees. Time constants are short enough that a 10 min
# trajectory shows both heating and cooling.
_DEFAULT_TIME_CONSTANTS = (60.0, 90.0, 60.0, 80.0, 45.0, 45.0, 40.0)  # s
_DEFAULT_RISE_AT_AMPLITUDE = (1.5, 6.0, 1.5, 5.0, 1.0, 1.0, 0.8)  # degC
DEFAULT_TORQUE_AMPLITUDE = np.array([8.0, 20.0, 8.0, 14.0, 4.0, 4.0, 3.0])  # N m
_DEFAULT_RESISTANCE = 1.5


def default_joint_params(ambient_temperature=22.0):
    """Per-joint plant parameters for the synthetic 7-joint arm.

    The heating coefficient is chosen so that holding each joint at its
    default torque amplitude settles ``_DEFAULT_RISE_AT_AMPLITUDE`` above
    ambient.
    """
    params = []
    for tc, rise, amp in zip(_DEFAULT_TIME_CONSTANTS, _DEFAULT_RISE_AT_AMPLITUDE,
                             DEFAULT_TORQUE_AMPLITUDE):
        r = _DEFAULT_RESISTANCE
        params.append(ThermalPlantParams(
            thermal_resistance=r,
            thermal_capacitance=tc / r,
            heating_coefficient=rise / (r * amp ** 2),
            ambient_temperature=ambient_temperature,
        ))
    return tuple(params)


def steady_state_temperature(params, torque):
    """Equilibrium temperature under constant torque, T_amb + R k tau^2."""
    torque = np.asarray(torque, dtype=float)
    return (params.ambient_temperature
            + params.thermal_resistance * params.heating_coefficient * torque ** 2)


def _as_param_list(params, n_joints):
    if isinstance(params, ThermalPlantParams):
        return [params] * n_joints
    params = list(params)
    if len(params) != n_joints:
        raise ConfigurationError(
            f"got {len(params)} plant parameter sets for {n_joints} joints")
    return params


def simulate_plant(params, torques, T0=None):
    """Integrate the joint temperatures driven by a torque trace.

    Torque is treated as piecewise constant over each sample interval, so
    every step is the exact solution
    ``T[k+1] = T_eq + (T[k] - T_eq) exp(-dt / (R C))``.

    Parameters
    ----------
    params : ThermalPlantParams or sequence of them
        One set per joint; a single set is shared by all joints.
    torques : TorqueTrace
    T0 : float or array_like, optional
        Initial temperature per joint. Defaults to ambient.

    Returns
    -------
    TemperatureTrace
        Same length as ``torques``; sample 0 is ``T0``.
    """
    if not torques.dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {torques.dt}")
    tau = torques.values
    n, n_joints = tau.shape
    if n == 0:
        raise ConfigurationError("torque trace is empty")
    if not np.all(np.isfinite(tau)):
        bad = int(np.argwhere(~np.isfinite(tau))[0, 0])
        raise RejectedInputError(f"non-finite torque at sample {bad}")

    plist = _as_param_list(params, n_joints)
    R = np.array([p.thermal_resistance for p in plist])
    C = np.array([p.thermal_capacitance for p in plist])
    k = np.array([p.heating_coefficient for p in plist])
    amb = np.array([p.ambient_temperature for p in plist])

    decay = np.exp(-torques.dt / (R * C))
    T_eq = amb + R * k * tau ** 2

    out = np.empty((n, n_joints))
    out[0] = amb if T0 is None else np.broadcast_to(np.asarray(T0, dtype=float), (n_joints,))
    for i in range(n - 1):
        out[i + 1] = T_eq[i] + (out[i] - T_eq[i]) * decay
    return TemperatureTrace(dt=torques.dt, values=out)


def _resolve_amplitude(amplitude, n_joints):
    if amplitude is None:
        amplitude = DEFAULT_TORQUE_AMPLITUDE if n_joints == N_JOINTS else 1.0
    amp = np.broadcast_to(np.asarray(amplitude, dtype=float), (n_joints,)).copy()
    if not np.all(np.isfinite(amp)):
        raise ConfigurationError("amplitude must be finite")
    return amp


def _step(n, dt, amp, rng, step_time):
    t = np.arange(n) * dt
    return np.where(t[:, None] >= step_time, amp[None, :], 0.0)


def _trapezoid(n, dt, amp, rng):
    # ramp up, hold, ramp down, with per-joint random timing
    t = np.arange(n) * dt
    T = n * dt
    out = np.zeros((n, amp.size))
    for j in range(amp.size):
        a, b, c, d = np.sort(rng.uniform(0.0, T, size=4))
        up = np.clip((t - a) / max(b - a, dt), 0.0, 1.0)
        down = np.clip((d - t) / max(d - c, dt), 0.0, 1.0)
        out[:, j] = amp[j] * np.minimum(up, down) * rng.choice([-1.0, 1.0])
    return out


def _random_walk(n, dt, amp, rng):
    steps = rng.normal(0.0, 0.08, size=(n, amp.size)) * np.sqrt(dt)
    x = np.zeros((n, amp.size))
    level = rng.uniform(-0.5, 0.5, size=amp.size)
    for i in range(n):
        level = np.clip(level + steps[i], -1.0, 1.0)
        x[i] = level
    return x * amp


def _sinusoid(n, dt, amp, rng):
    t = np.arange(n) * dt
    out = np.zeros((n, amp.size))
    for j in range(amp.size):
        n_comp = rng.integers(2, 5)
        periods = rng.uniform(8.0, 120.0, size=n_comp)
        phases = rng.uniform(0.0, 2 * np.pi, size=n_comp)
        weights = rng.dirichlet(np.ones(n_comp))
        offset = rng.uniform(-0.3, 0.3)
        wave = sum(w * np.sin(2 * np.pi * t / p + ph)
                   for w, p, ph in zip(weights, periods, phases))
        out[:, j] = amp[j] * np.clip(offset + 0.8 * wave, -1.0, 1.0)
    return out


def _hold(n, dt, amp, rng):
    level = rng.uniform(-1.0, 1.0, size=amp.size)
    return np.broadcast_to(level * amp, (n, amp.size)).copy()


def _rest(n, dt, amp, rng):
    return np.zeros((n, amp.size))


_COMPOSITE_REGIMES = {
    "hold": _hold,
    "trapezoid": _trapezoid,
    "random_walk": _random_walk,
    "sinusoid": _sinusoid,
    "rest": _rest,
}


def _composite(n, dt, amp, rng):
    # each joint switches regimes on its own schedule, so torque levels are
    # not locked together across joints
    names = list(_COMPOSITE_REGIMES)
    lo = max(1, int(round(0.08 * n)))
    hi = max(lo + 1, int(round(0.25 * n)))
    out = np.zeros((n, amp.size))
    breaks = set()
    for j in range(amp.size):
        start, prev = 0, None
        while start < n:
            length = int(rng.integers(lo, hi))
            stop = min(n, start + length)
            # avoid a useless sliver at the end
            if n - stop < lo:
                stop = n
            choices = [k for k in names if k != prev]
            name = choices[int(rng.integers(len(choices)))]
            out[start:stop, j] = _COMPOSITE_REGIMES[name](stop - start, dt, amp[j:j + 1], rng)[:, 0]
            if start > 0:
                breaks.add(start)
            start, prev = stop, name
    return out, tuple(sorted(breaks))


def generate_torque_profile(kind="composite", seed=0, duration=600.0, dt=1.0,
                            amplitude=None, n_joints=N_JOINTS, step_time=None):
    """Generate a deterministic synthetic torque profile.

    Parameters
    ----------
    kind : {"step", "trapezoid", "random_walk", "sinusoid", "composite"}
        ``composite`` switches between hold, ramp, random-walk, sinusoid and
        rest regimes at random instants.
    seed : int
        Fully determines the trace.
    duration, dt : float
        Seconds; ``round(duration / dt)`` samples are produced.
    amplitude : float or array_like, optional
        Peak torque per joint [N m]. Defaults to :data:`DEFAULT_TORQUE_AMPLITUDE`.
    step_time : float, optional
        Step instant for ``kind="step"``; defaults to a quarter of the duration.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be > 0, got {dt}")
    if not duration > dt:
        raise ConfigurationError(f"duration must exceed dt, got {duration} <= {dt}")
    if kind not in PROFILE_KINDS:
        raise ConfigurationError(f"unknown profile kind {kind!r}; expected one of {PROFILE_KINDS}")
    n = int(round(duration / dt))
    amp = _resolve_amplitude(amplitude, n_joints)
    rng = np.random.default_rng(seed)

    breaks = ()
    if kind == "step":
        values = _step(n, dt, amp, rng, duration / 4 if step_time is None else step_time)
    elif kind == "trapezoid":
        values = _trapezoid(n, dt, amp, rng)
    elif kind == "random_walk":
        values = _random_walk(n, dt, amp, rng)
    elif kind == "sinusoid":
        values = _sinusoid(n, dt, amp, rng)
    else:
        values, breaks = _composite(n, dt, amp, rng)
    return TorqueTrace(dt=dt, values=values, breaks=breaks)


# N m per A at the joint output (motor constant times gear ratio); only used
# to synthesize the current channel.
_TORQUE_PER_AMP = np.array([11.0, 11.0, 11.0, 11.0, 7.6, 7.6, 7.6])


def simulate_run(seed, kind="composite", duration=600.0, dt=1.0, params=None,
                 amplitude=None, T0=None):
    """Synthesize one full telemetry run.

    Torque drives the thermal plant. Current is torque divided by a fixed
    per-joint constant. Position and velocity come from an independent smooth
    random path: they fill the telemetry schema but carry no thermal
    information.

    Returns
    -------
    dict
        ``time``, ``position``, ``velocity``, ``torque``, ``current`` and
        ``temperature`` arrays, each (n_samples, 7) except ``time``.
    """
    params = default_joint_params() if params is None else params
    torques = generate_torque_profile(kind, seed, duration, dt, amplitude)
    temps = simulate_plant(params, torques, T0)
    n, j = torques.values.shape

    rng = np.random.default_rng([seed, 1])
    t = torques.time
    periods = rng.uniform(20.0, 90.0, size=j)
    phases = rng.uniform(0.0, 2 * np.pi, size=j)
    spans = rng.uniform(0.3, 1.2, size=j)
    position = spans * np.sin(2 * np.pi * t[:, None] / periods + phases)
    velocity = spans * (2 * np.pi / periods) * np.cos(2 * np.pi * t[:, None] / periods + phases)
    tpa = _TORQUE_PER_AMP if j == N_JOINTS else np.ones(j)
    return {
        "time": t,
        "position": position,
        "velocity": velocity,
        "torque": torques.values,
        "current": torques.values / tpa,
        "temperature": temps.values,
    }
