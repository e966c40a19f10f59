"""Discrete differential operators, smoothness covariances, and the linear
map between the BOLD and perfusion impulse responses.

Linearizing the balloon system around rest yields a square operator that
sends the BRF onto the PRF, built from two resolvents of a discrete
first-derivative operator.  Both responses are pinned to 0 at their
endpoints, so every matrix here acts on the length-1 interior samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .balloon import PhysioParams, ResponseFunction

CONDITION_LIMIT = 1e12


class SingularOperator(np.linalg.LinAlgError):
    """The operator system matrix is numerically singular."""


class GridMismatch(ValueError):
    """Response sampling grid does not match the operator grid."""


def first_diff_matrix(length: int, dt: float) -> np.ndarray:
    """Backward first-difference operator on the interior samples (1/s).

    Lower-bidiagonal (length-1)x(length-1): 1/dt on the diagonal, -1/dt on
    the subdiagonal.  The implicit sample before the first interior one is
    the pinned zero endpoint.
    """
    k = length - 1
    return (np.eye(k) - np.eye(k, k=-1)) / dt


@dataclass(frozen=True)
class FirstDiffOperator:
    matrix: np.ndarray
    dt: float


def centered_diff_matrix(length: int, dt: float) -> np.ndarray:
    """Centered first-difference operator on the interior samples (1/s).

    Skew-symmetric with zero-boundary truncation, so every shifted system
    (D + c*I) with c > 0 stays invertible.  Used to build the response
    operator: the linearized flow->BOLD transfer function has a zero in the
    right half-plane, so a one-sided stencil would make the BOLD->flow
    direction exponentially unstable.
    """
    k = length - 1
    return (np.eye(k, k=1) - np.eye(k, k=-1)) / (2.0 * dt)


def second_diff_matrix(length: int, dt: float) -> np.ndarray:
    """Truncated second-difference operator: [1, -2, 1]/dt**2 rows with the
    out-of-range neighbors dropped (zero boundary)."""
    k = length - 1
    return (np.eye(k, k=1) - 2.0 * np.eye(k) + np.eye(k, k=-1)) / dt**2


@dataclass(frozen=True)
class SmoothnessPrior:
    """Second-derivative smoothness covariance for a response prior."""

    d2: np.ndarray
    sigma: np.ndarray
    dt: float


def smoothness_prior(length: int, dt: float) -> SmoothnessPrior:
    """Covariance penalizing the squared second derivative of the response.

    sigma = (d2' d2)^-1 with d2 the truncated [1, -2, 1]/dt**2 operator, so
    the net scaling in terms of the unit stencil is dt**4.
    """
    d2 = second_diff_matrix(length, dt)
    sigma = np.linalg.inv(d2.T @ d2)
    sigma = 0.5 * (sigma + sigma.T)
    return SmoothnessPrior(d2=d2, sigma=sigma, dt=dt)


@dataclass(frozen=True)
class OmegaOperator:
    """Linear map sending the interior BRF samples onto the PRF samples.

    ``resolvent_a`` and ``resolvent_b`` are the inverses of the shifted
    first-difference operators (D + I/(w_tilde*tau_m)) and (D + I/tau_m);
    ``gamma`` is the linearized oxygen-extraction slope.
    """

    gamma: float
    resolvent_a: np.ndarray
    resolvent_b: np.ndarray
    omega: np.ndarray
    omega_inv: np.ndarray
    dt: float

    @property
    def length(self) -> int:
        return self.omega.shape[0] + 1


def extraction_slope(params: PhysioParams) -> float:
    """gamma = (1 + (1-e0)*ln(1-e0)/e0) / tau_m."""
    return (1.0 + (1.0 - params.e0) * math.log(1.0 - params.e0) / params.e0) / params.tau_m


def build_omega(params: PhysioParams, dt: float, length: int) -> OmegaOperator:
    """Build the BRF->PRF operator on a dt grid with length+1 samples."""
    if length < 3:
        raise ValueError("length must be at least 3")
    if not dt > 0.0:
        raise ValueError("dt must be strictly positive")
    diff = centered_diff_matrix(length, dt)
    eye = np.eye(length - 1)
    res_a = np.linalg.inv(diff + eye / (params.w_tilde * params.tau_m))
    res_b = np.linalg.inv(diff + eye / params.tau_m)
    gamma = extraction_slope(params)
    k12 = params.k1 + params.k2
    bracket = (
        -k12 * gamma * res_b
        + k12 * (1.0 - params.w_tilde) / (params.w_tilde * params.tau_m**2) * (res_b @ res_a)
        - (params.k3 - params.k2) / params.tau_m * res_a
    )
    if np.linalg.cond(bracket) > CONDITION_LIMIT:
        raise SingularOperator("operator system matrix is numerically singular")
    omega = np.linalg.inv(bracket) / params.v0
    omega_inv = params.v0 * bracket
    return OmegaOperator(gamma=gamma, resolvent_a=res_a, resolvent_b=res_b,
                         omega=omega, omega_inv=omega_inv, dt=dt)


def _check_grid(op: OmegaOperator, response: ResponseFunction) -> None:
    if response.values.size != op.omega.shape[0] + 2:
        raise GridMismatch(
            f"response has {response.values.size} samples, operator expects "
            f"{op.omega.shape[0] + 2}")
    if abs(response.dt - op.dt) > 1e-9 * op.dt:
        raise GridMismatch(f"response dt {response.dt} != operator dt {op.dt}")


def apply_omega(op: OmegaOperator, brf: ResponseFunction) -> ResponseFunction:
    """PRF predicted from a BRF: interior samples mapped, endpoints pinned 0."""
    _check_grid(op, brf)
    out = np.zeros_like(brf.values)
    out[1:-1] = op.omega @ brf.values[1:-1]
    return ResponseFunction(dt=brf.dt, values=out)


def apply_omega_inverse(op: OmegaOperator, prf: ResponseFunction) -> ResponseFunction:
    """BRF predicted from a PRF (inverse map)."""
    _check_grid(op, prf)
    out = np.zeros_like(prf.values)
    out[1:-1] = op.omega_inv @ prf.values[1:-1]
    return ResponseFunction(dt=prf.dt, values=out)


def write_matrix_csv(path, matrix: np.ndarray) -> None:
    """Export a dense matrix as row-major CSV."""
    lines = [",".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(matrix)]
    Path(path).write_text("\n".join(lines) + "\n")
