"""Fit drivers for the three inference variants and their artifacts.

* ``basic``        joint Gibbs fit with independent smoothness priors on
                   both responses;
* ``physio-1step`` joint fit where the PRF prior is centered on the image
                   of the current BRF under the response operator (the BRF
                   conditional then also sees that link, which is what lets
                   a noisy perfusion component contaminate it);
* ``physio-2step`` hemodynamics-only fit, residual computation, then a
                   perfusion-only fit on the residuals with the operator
                   image of the first-stage BRF as prior mean.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .balloon import PhysioParams, ResponseFunction, generate_responses
from .linop import OmegaOperator, build_omega, smoothness_prior
from .sampler import (ChainResult, LatentState, ParcelModel, PriorConfig,
                      ResolvedPriors, run_chain)
from .simulate import (DimensionMismatch, ParcelDataset, bold_component,
                       drift_component, unit_shape)

METHODS = ("basic", "physio-1step", "physio-2step")


@dataclass
class ChainConfig:
    """Sweep counts for one Gibbs chain."""

    iterations: int = 1000
    burn_in: int = 300
    log_every: int = 100


@dataclass
class PosteriorSummary:
    """Posterior means, activation probability maps, and chain traces."""

    variant: str
    brf: ResponseFunction
    prf: ResponseFunction
    bold_levels: np.ndarray
    perf_levels: np.ndarray
    ppm: np.ndarray
    drift_coeffs: np.ndarray
    baselines: np.ndarray
    traces: dict
    iterations: int
    burn_in: int
    seed: int
    ppm_perfusion: np.ndarray | None = None


@dataclass
class M1Result:
    """Hemodynamics-stage estimates: BRF, BOLD levels, drift."""

    brf: ResponseFunction
    bold_levels: np.ndarray
    drift_coeffs: np.ndarray
    summary: PosteriorSummary


@dataclass
class ResidualSeries:
    """Per-voxel residuals after removing the hemodynamic and drift parts."""

    values: np.ndarray
    dataset: ParcelDataset


def _full_curve(interior: np.ndarray, dt: float) -> ResponseFunction:
    values = np.zeros(interior.size + 2)
    values[1:-1] = interior
    return ResponseFunction(dt=dt, values=values)


def _response_seeds(priors: PriorConfig, paradigm):
    """Deterministic initial response shapes from the physiological model."""
    physio = priors.physio if priors.physio is not None else PhysioParams()
    brf, _ = generate_responses(physio, paradigm.dt, paradigm.response_length)
    return unit_shape(brf.values)[1:-1], physio


def _resolve_joint(priors: PriorConfig, paradigm) -> ResolvedPriors:
    length, dt = paradigm.response_length, paradigm.dt
    brf_init, physio = _response_seeds(priors, paradigm)
    omega_op = build_omega(physio, dt, length)
    sigma_h = priors.sigma_h if priors.sigma_h is not None \
        else smoothness_prior(length, dt).sigma
    sigma_g = priors.sigma_g if priors.sigma_g is not None \
        else smoothness_prior(length, dt).sigma
    prec_h = np.linalg.inv(sigma_h) / priors.v_h
    prec_g = np.linalg.inv(sigma_g) / priors.v_g
    linked = priors.variant == "physio_1step"
    prf_init = omega_op.omega @ brf_init
    if not linked:
        prf_init = unit_shape(prf_init)
    resolved = ResolvedPriors(
        config=priors,
        brf_prec=0.5 * (prec_h + prec_h.T),
        prf_prec=0.5 * (prec_g + prec_g.T),
        omega=omega_op.omega,
        link_prf_prior=linked,
        couple_brf=linked,
        renorm_prf=not linked,
        brf_init=brf_init,
        prf_init=prf_init)
    if linked:
        resolved.coupling_proj = omega_op.omega.T @ resolved.prf_prec
        coupling = resolved.coupling_proj @ omega_op.omega
        resolved.coupling_prec = 0.5 * (coupling + coupling.T)
    return resolved


def _summary_from_chain(chain: ChainResult, variant: str, dt: float,
                        seed: int) -> PosteriorSummary:
    return PosteriorSummary(
        variant=variant,
        brf=_full_curve(chain.brf, dt),
        prf=_full_curve(chain.prf, dt),
        bold_levels=chain.bold_levels,
        perf_levels=chain.perf_levels,
        ppm=chain.ppm,
        drift_coeffs=chain.drift_coeffs,
        baselines=chain.baselines,
        traces=chain.traces,
        iterations=chain.iterations,
        burn_in=chain.burn_in,
        seed=int(seed))


def fit_joint(dataset: ParcelDataset, priors: PriorConfig,
              config: ChainConfig | None = None, seed: int = 0) -> PosteriorSummary:
    """Joint fit of all components; variants 'basic' and 'physio_1step'."""
    if priors.variant not in ("basic", "physio_1step"):
        raise ValueError("fit_joint handles the basic and physio_1step variants")
    config = config or ChainConfig()
    model = ParcelModel(dataset.y, dataset.design, dataset.paradigm,
                        dataset.grid_shape)
    resolved = _resolve_joint(priors, dataset.paradigm)
    chain = run_chain(model, resolved, config.iterations, config.burn_in,
                      seed, log_every=config.log_every)
    return _summary_from_chain(chain, priors.variant, dataset.paradigm.dt, seed)


def fit_m1(dataset: ParcelDataset, priors: PriorConfig,
           config: ChainConfig | None = None, seed: int = 0,
           model_baseline: bool = True) -> M1Result:
    """Hemodynamics stage: the event-related perfusion term stays in the
    noise; the response and levels sampled are BOLD-side only.

    ``model_baseline`` keeps the sign-alternating perfusion baseline as a
    nuisance regressor during this stage (its estimate is discarded; the
    residuals below keep the full perfusion signal).  Absorbing it into the
    noise instead makes low-noise label updates latch onto the alternation.
    """
    config = config or ChainConfig()
    paradigm = dataset.paradigm
    model = ParcelModel(dataset.y, dataset.design, paradigm,
                        dataset.grid_shape, has_perfusion=False,
                        has_baseline=model_baseline)
    brf_init, _ = _response_seeds(priors, paradigm)
    sigma_h = priors.sigma_h if priors.sigma_h is not None \
        else smoothness_prior(paradigm.response_length, paradigm.dt).sigma
    prec_h = np.linalg.inv(sigma_h) / priors.v_h
    resolved = ResolvedPriors(config=priors,
                              brf_prec=0.5 * (prec_h + prec_h.T),
                              brf_init=brf_init)
    chain = run_chain(model, resolved, config.iterations, config.burn_in,
                      seed, log_every=config.log_every)
    summary = _summary_from_chain(chain, "m1", paradigm.dt, seed)
    return M1Result(brf=summary.brf, bold_levels=summary.bold_levels,
                    drift_coeffs=summary.drift_coeffs, summary=summary)


def compute_residuals(dataset: ParcelDataset, m1: M1Result) -> ResidualSeries:
    """Remove the estimated hemodynamic and drift parts from the series."""
    if m1.bold_levels.shape != (dataset.n_voxels, dataset.paradigm.n_conditions):
        raise DimensionMismatch("M1 level estimates do not match the dataset")
    if m1.brf.values.size != dataset.paradigm.response_length + 1:
        raise DimensionMismatch("M1 response length does not match the dataset")
    resid = dataset.y - bold_component(dataset.design, m1.brf.values,
                                       m1.bold_levels)
    resid = resid - drift_component(dataset.design, m1.drift_coeffs)
    return ResidualSeries(values=resid, dataset=dataset)


def fit_m2(residuals: ResidualSeries, brf_hat: ResponseFunction,
           omega: OmegaOperator, priors: PriorConfig,
           config: ChainConfig | None = None, seed: int = 0) -> PosteriorSummary:
    """Perfusion stage on the residual series.

    The PRF prior is N(omega @ brf_hat, v_g * I) on the interior samples.
    """
    config = config or ChainConfig()
    dataset = residuals.dataset
    paradigm = dataset.paradigm
    if omega.length != paradigm.response_length or \
            abs(omega.dt - paradigm.dt) > 1e-9 * paradigm.dt:
        raise DimensionMismatch("operator grid does not match the dataset")
    if brf_hat.values.size != paradigm.response_length + 1:
        raise DimensionMismatch("BRF estimate does not match the response grid")
    model = ParcelModel(residuals.values, dataset.design, paradigm,
                        dataset.grid_shape, has_bold=False, has_drift=False)
    anchor = omega.omega @ brf_hat.values[1:-1]
    k = paradigm.response_length - 1
    sigma_g = priors.sigma_g if priors.sigma_g is not None else np.eye(k)
    prec_g = np.linalg.inv(sigma_g) / priors.v_g
    resolved = ResolvedPriors(config=priors,
                              prf_prec=0.5 * (prec_g + prec_g.T),
                              omega=omega.omega,
                              prf_anchor=anchor,
                              prf_init=anchor.copy())
    chain = run_chain(model, resolved, config.iterations, config.burn_in,
                      seed, log_every=config.log_every)
    return _summary_from_chain(chain, "m2", paradigm.dt, seed)


def fit_physio_2step(dataset: ParcelDataset, priors: PriorConfig,
                     config: ChainConfig | None = None,
                     seed: int = 0) -> PosteriorSummary:
    """Two-stage physiological fit: hemodynamics, residuals, perfusion."""
    config = config or ChainConfig()
    paradigm = dataset.paradigm
    m1 = fit_m1(dataset, priors, config, seed)
    residuals = compute_residuals(dataset, m1)
    _, physio = _response_seeds(priors, paradigm)
    omega = build_omega(physio, paradigm.dt, paradigm.response_length)
    m2 = fit_m2(residuals, m1.brf, omega, priors, config, seed + 1)
    merged = PosteriorSummary(
        variant="physio_2step",
        brf=m1.brf,
        prf=m2.prf,
        bold_levels=m1.bold_levels,
        perf_levels=m2.perf_levels,
        ppm=m1.summary.ppm,
        drift_coeffs=m1.drift_coeffs,
        baselines=m2.baselines,
        traces={"m1_" + k: v for k, v in m1.summary.traces.items()}
        | {"m2_" + k: v for k, v in m2.traces.items()},
        iterations=config.iterations,
        burn_in=config.burn_in,
        seed=int(seed),
        ppm_perfusion=m2.ppm)
    return merged


def fit_method(method: str, dataset: ParcelDataset, priors: PriorConfig,
               config: ChainConfig | None = None, seed: int = 0) -> PosteriorSummary:
    """Dispatch on the public method names."""
    if method == "basic":
        return fit_joint(dataset, _with_variant(priors, "basic"), config, seed)
    if method == "physio-1step":
        return fit_joint(dataset, _with_variant(priors, "physio_1step"),
                         config, seed)
    if method == "physio-2step":
        return fit_physio_2step(dataset, _with_variant(priors, "physio_2step"),
                                config, seed)
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def _with_variant(priors: PriorConfig, variant: str) -> PriorConfig:
    if priors.variant == variant:
        return priors
    return PriorConfig(
        v_h=priors.v_h, v_g=priors.v_g, ising_beta=priors.ising_beta,
        active_mean_loc=priors.active_mean_loc,
        active_mean_var=priors.active_mean_var,
        var_shape=priors.var_shape, var_scale=priors.var_scale,
        variant=variant, sigma_h=priors.sigma_h, sigma_g=priors.sigma_g,
        physio=priors.physio)


# -- summary persistence -------------------------------------------------------

def _write_matrix(path: Path, arr: np.ndarray) -> None:
    lines = [",".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(arr)]
    path.write_text("\n".join(lines) + "\n")


def _write_curve(path: Path, curve: ResponseFunction) -> None:
    lines = ["t,value"]
    for t, v in zip(curve.times, curve.values):
        lines.append(f"{t:.17g},{v:.17g}")
    path.write_text("\n".join(lines) + "\n")


def save_summary(directory, summary: PosteriorSummary) -> None:
    """Persist a fit as ``summary.json`` plus CSV arrays."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    scalars = {
        "variant": summary.variant,
        "iterations": summary.iterations,
        "burn_in": summary.burn_in,
        "seed": summary.seed,
    }
    for key, trace in summary.traces.items():
        arr = np.asarray(trace, dtype=float)
        if arr.size:
            scalars[f"mean_{key}"] = arr.reshape(arr.shape[0], -1).mean(0).tolist()
    (directory / "summary.json").write_text(json.dumps(scalars, indent=1))
    _write_curve(directory / "h.csv", summary.brf)
    _write_curve(directory / "g.csv", summary.prf)
    _write_matrix(directory / "a.csv", summary.bold_levels)
    _write_matrix(directory / "c.csv", summary.perf_levels)
    _write_matrix(directory / "ppm_q.csv", summary.ppm)
    _write_matrix(directory / "alpha.csv", summary.baselines.reshape(-1, 1))
    _write_matrix(directory / "ell.csv", summary.drift_coeffs)
    if summary.ppm_perfusion is not None:
        _write_matrix(directory / "ppm_q_perfusion.csv", summary.ppm_perfusion)
