"""Extended balloon model of the neuro-vascular coupling.

Integrates the four-state system (flow-inducing signal, normalized inflow,
venous volume, deoxyhemoglobin) and derives the BOLD response (BRF) and the
perfusion response (PRF, inflow minus baseline) to an impulse of neural
activity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

DEFAULT_STEP = 0.05  # RK4 step (s); fine enough for the smooth responses here


class NonPositiveVolume(ArithmeticError):
    """Venous volume reached nu <= 0, where nu**(1/w_tilde) is undefined."""


class InvalidGrid(ValueError):
    """Stimulus samples are inconsistent with the requested duration/step."""


@dataclass(frozen=True)
class PhysioParams:
    """Balloon-model constants plus scanner-dependent BOLD constants.

    Defaults are the classical values of Friston et al. for the extended
    model.  The scanner constants follow the 1.5T calibration
    ``k1 = 7*e0``, ``k2 = 2``, ``k3 = 2*e0 - 0.2`` unless given explicitly.

    eta       neuronal efficacy (dimensionless)
    tau_psi   signal decay time constant (s)
    tau_f     auto-regulatory feedback time constant (s)
    tau_m     mean transit time (s)
    w_tilde   windkessel (Grubb) exponent, 0 < w_tilde <= 1
    e0        resting oxygen extraction fraction, 0 < e0 < 1
    v0        resting blood volume fraction, 0 < v0 < 1
    """

    eta: float = 0.5
    tau_psi: float = 1.25
    tau_f: float = 2.5
    tau_m: float = 1.0
    w_tilde: float = 0.2
    e0: float = 0.8
    v0: float = 0.02
    k1: float | None = None
    k2: float | None = None
    k3: float | None = None

    def __post_init__(self):
        for name in ("tau_psi", "tau_f", "tau_m"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0.0 < self.e0 < 1.0:
            raise ValueError(f"e0 must lie in (0, 1), got {self.e0}")
        if not 0.0 < self.w_tilde <= 1.0:
            raise ValueError(f"w_tilde must lie in (0, 1], got {self.w_tilde}")
        if not 0.0 < self.v0 < 1.0:
            raise ValueError(f"v0 must lie in (0, 1), got {self.v0}")
        if not np.isfinite(self.eta):
            raise ValueError("eta must be finite")
        if self.k1 is None:
            object.__setattr__(self, "k1", 7.0 * self.e0)
        if self.k2 is None:
            object.__setattr__(self, "k2", 2.0)
        if self.k3 is None:
            object.__setattr__(self, "k3", 2.0 * self.e0 - 0.2)


@dataclass(frozen=True)
class StateTrajectory:
    """Solution of the balloon system on a uniform time grid."""

    times: np.ndarray
    psi: np.ndarray
    f_in: np.ndarray
    nu: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        n = self.times.size
        for name in ("psi", "f_in", "nu", "xi"):
            if getattr(self, name).size != n:
                raise ValueError(f"{name} must have {n} samples")

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class ResponseFunction:
    """A sampled response curve (BRF or PRF) on a uniform dt grid.

    Holds ``length + 1`` samples of percent signal change.
    """

    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if not self.dt > 0.0:
            raise ValueError("dt must be strictly positive")
        if values.ndim != 1 or values.size < 3:
            raise ValueError("a response needs at least 3 samples")

    @property
    def length(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) * self.dt


def _derivatives(state, u, p: PhysioParams):
    psi, f_in, nu, xi = state
    if nu <= 0.0:
        raise NonPositiveVolume(f"volume reached nu = {nu:g}")
    nu_out = nu ** (1.0 / p.w_tilde)
    extraction = (1.0 - (1.0 - p.e0) ** (1.0 / f_in)) / p.e0
    return (
        p.eta * u - psi / p.tau_psi - (f_in - 1.0) / p.tau_f,
        psi,
        (f_in - nu_out) / p.tau_m,
        (f_in * extraction - xi * nu_out / nu) / p.tau_m,
    )


def integrate_balloon(params: PhysioParams, stimulus, duration: float,
                      step: float = DEFAULT_STEP,
                      initial_psi: float = 0.0) -> StateTrajectory:
    """Integrate the balloon system with a fixed-step 4th-order Runge-Kutta.

    ``stimulus`` is the neural input u(t) sampled on the step grid
    (``round(duration/step) + 1`` values) or None for u = 0.  The input is
    held constant over each step.  ``initial_psi`` offsets the flow-inducing
    signal at t = 0, which realizes an impulse input exactly.
    """
    if not step > 0.0:
        raise InvalidGrid("step must be strictly positive")
    n_steps = int(round(duration / step))
    if n_steps < 1 or abs(n_steps * step - duration) > 1e-9 * max(1.0, abs(duration)):
        raise InvalidGrid(f"duration {duration} is not a multiple of step {step}")
    if stimulus is None:
        u = np.zeros(n_steps + 1)
    else:
        u = np.asarray(stimulus, dtype=float)
        if u.shape != (n_steps + 1,):
            raise InvalidGrid(
                f"stimulus needs {n_steps + 1} samples on the step grid, got {u.shape}")

    out = np.empty((4, n_steps + 1))
    state = (float(initial_psi), 1.0, 1.0, 1.0)
    out[:, 0] = state
    h = step
    for k in range(n_steps):
        uk = u[k]
        d1 = _derivatives(state, uk, params)
        s2 = tuple(x + 0.5 * h * d for x, d in zip(state, d1))
        d2 = _derivatives(s2, uk, params)
        s3 = tuple(x + 0.5 * h * d for x, d in zip(state, d2))
        d3 = _derivatives(s3, uk, params)
        s4 = tuple(x + h * d for x, d in zip(state, d3))
        d4 = _derivatives(s4, uk, params)
        state = tuple(
            x + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d)
            for x, a, b, c, d in zip(state, d1, d2, d3, d4)
        )
        out[:, k + 1] = state

    times = np.arange(n_steps + 1) * step
    return StateTrajectory(times=times, psi=out[0], f_in=out[1], nu=out[2], xi=out[3])


def bold_from_states(traj: StateTrajectory, params: PhysioParams,
                     dt: float | None = None,
                     length: int | None = None) -> ResponseFunction:
    """BOLD signal change from a state trajectory.

    Evaluates ``v0*(k1*(1-xi) + k2*(1-xi/nu) + k3*(1-nu))`` pointwise; when
    ``dt``/``length`` are given the curve is resampled onto that grid by
    linear interpolation.
    """
    if np.any(traj.nu == 0.0):
        raise ZeroDivisionError("volume sample is exactly zero")
    bold = params.v0 * (
        params.k1 * (1.0 - traj.xi)
        + params.k2 * (1.0 - traj.xi / traj.nu)
        + params.k3 * (1.0 - traj.nu)
    )
    if dt is None:
        return ResponseFunction(dt=traj.step, values=bold)
    if length is None:
        raise ValueError("length is required when resampling to dt")
    target = np.arange(length + 1) * dt
    if target[-1] > traj.times[-1] + 1e-9:
        raise InvalidGrid("trajectory is shorter than the requested grid")
    return ResponseFunction(dt=dt, values=np.interp(target, traj.times, bold))


def generate_responses(params: PhysioParams, dt: float, length: int,
                       step: float = DEFAULT_STEP):
    """BRF and PRF impulse responses sampled on a dt grid of length+1 points.

    The impulse is realized as the jump psi(0+) = eta with u = 0 afterwards,
    so both curves start at exactly 0.  Returns ``(brf, prf)``.
    """
    if not dt > 0.0:
        raise ValueError("dt must be strictly positive")
    if length < 2:
        raise ValueError("length must be at least 2")
    duration = length * dt
    traj = integrate_balloon(params, None, duration, step=step,
                             initial_psi=params.eta)
    brf = bold_from_states(traj, params, dt=dt, length=length)
    target = np.arange(length + 1) * dt
    prf = ResponseFunction(dt=dt,
                           values=np.interp(target, traj.times, traj.f_in - 1.0))
    return brf, prf


def write_curve_csv(path, response: ResponseFunction) -> None:
    """Export a response curve as CSV with header ``t,value``."""
    lines = ["t,value"]
    for t, v in zip(response.times, response.values):
        lines.append(f"{t:.12g},{v:.12g}")
    Path(path).write_text("\n".join(lines) + "\n")
