"""Experimental paradigm and the per-parcel design structure.

Turns per-condition stimulus onsets into binary lagged-onset matrices on the
response sampling grid, the +-1/2 control/tag alternation of consecutive
scans, and an orthonormal polynomial drift basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class InvalidParadigm(ValueError):
    """Paradigm fields are inconsistent or degenerate."""


@dataclass(frozen=True)
class Paradigm:
    """Event-related paradigm for one acquisition run.

    onsets           per-condition stimulus times (s)
    tr               repetition time (s); scan n is acquired at n*tr
    n_scans          number of scans
    dt               response sampling period (s); must divide tr
    response_length  responses carry response_length + 1 samples on the
                     dt grid
    """

    onsets: tuple[tuple[float, ...], ...]
    tr: float
    n_scans: int
    dt: float
    response_length: int

    def __post_init__(self):
        onsets = tuple(tuple(float(t) for t in cond) for cond in self.onsets)
        object.__setattr__(self, "onsets", onsets)
        if not self.tr > 0.0 or not self.dt > 0.0:
            raise InvalidParadigm("tr and dt must be strictly positive")
        if self.n_scans < 1:
            raise InvalidParadigm("n_scans must be at least 1")
        if self.response_length < 2:
            raise InvalidParadigm("response_length must be at least 2")
        if not onsets:
            raise InvalidParadigm("at least one condition is required")
        ratio = self.tr / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise InvalidParadigm(f"dt {self.dt} does not divide tr {self.tr}")
        span = self.n_scans * self.tr
        for m, cond in enumerate(onsets):
            if not cond:
                raise InvalidParadigm(f"condition {m} has no onsets")
            for t in cond:
                if not np.isfinite(t) or t < 0.0 or t >= span:
                    raise InvalidParadigm(
                        f"onset {t} of condition {m} outside [0, {span})")

    @property
    def n_conditions(self) -> int:
        return len(self.onsets)

    @property
    def bins_per_scan(self) -> int:
        return int(round(self.tr / self.dt))

    @property
    def scan_times(self) -> np.ndarray:
        return np.arange(self.n_scans) * self.tr


@dataclass(frozen=True)
class DesignSet:
    """Design structure shared by all voxels of a parcel.

    stim_matrices  one (n_scans, response_length+1) binary matrix per
                   condition; entry [n, f] flags a stimulus in the dt bin
                   at time n*tr - f*dt
    ct_signs       +1/2 for even (control) scans, -1/2 for odd (tag) scans
    drift_basis    (n_scans, order) orthonormal low-frequency basis
    """

    stim_matrices: tuple[np.ndarray, ...]
    ct_signs: np.ndarray
    drift_basis: np.ndarray

    @property
    def n_scans(self) -> int:
        return self.ct_signs.size

    @property
    def drift_order(self) -> int:
        return self.drift_basis.shape[1]

    def ct_matrix(self) -> np.ndarray:
        return np.diag(self.ct_signs)


def onset_bins(onsets, dt: float) -> list[int]:
    """Nearest-dt-bin index per onset; exact half-bin ties round down."""
    return sorted({int(math.ceil(t / dt - 0.5 - 1e-12)) for t in onsets})


def drift_basis(n_scans: int, order: int = 4) -> np.ndarray:
    """Orthonormalized polynomial basis of degree < order."""
    if order < 1 or order > n_scans:
        raise InvalidParadigm(f"drift order {order} not in [1, {n_scans}]")
    t = np.linspace(-1.0, 1.0, n_scans)
    vand = np.vander(t, order, increasing=True)
    q, r = np.linalg.qr(vand)
    return q * np.sign(np.diag(r))


def build_design(paradigm: Paradigm, drift_order: int = 4) -> DesignSet:
    """Assemble the stimulus, control/tag, and drift structure."""
    n = paradigm.n_scans
    width = paradigm.response_length + 1
    per_scan = paradigm.bins_per_scan
    mats = []
    for cond in paradigm.onsets:
        x = np.zeros((n, width))
        for k in onset_bins(cond, paradigm.dt):
            # scan n sees the stimulus at lag f when n*per_scan == k + f
            for f in range(width):
                scan, rem = divmod(k + f, per_scan)
                if rem == 0 and scan < n:
                    x[scan, f] = 1.0
        mats.append(x)
    signs = np.where(np.arange(n) % 2 == 0, 0.5, -0.5)
    return DesignSet(stim_matrices=tuple(mats), ct_signs=signs,
                     drift_basis=drift_basis(n, drift_order))


_DEFAULT_ONSET_SEED = 604


def default_paradigm(n_scans: int = 325, tr: float = 1.0, dt: float = 0.5,
                     response_length: int = 50, n_conditions: int = 2,
                     mean_isi: float = 5.03) -> Paradigm:
    """Bundled fast event-related paradigm.

    A fixed jittered event train (exact mean ISI) alternating randomly
    between conditions; deterministic regardless of caller seeds.
    """
    span = n_scans * tr
    count = int((span - 5.0) // mean_isi)
    if count < 2 * n_conditions:
        raise InvalidParadigm("paradigm too short for the requested conditions")
    rng = np.random.default_rng(_DEFAULT_ONSET_SEED)
    isis = rng.uniform(0.55 * mean_isi, 1.45 * mean_isi, size=count - 1)
    isis *= mean_isi / isis.mean()
    times = np.concatenate([[2.0], 2.0 + np.cumsum(isis)])
    conds = rng.integers(0, n_conditions, size=count)
    # ensure every condition occurs at least twice
    for m in range(n_conditions):
        conds[2 * m] = m
        conds[2 * m + 1] = m
    onsets = tuple(tuple(times[conds == m]) for m in range(n_conditions))
    return Paradigm(onsets=onsets, tr=tr, n_scans=n_scans, dt=dt,
                    response_length=response_length)
