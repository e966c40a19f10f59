"""Gibbs sampler for the joint detection-estimation model of ASL series.

Every update draws from an exact full conditional:

* response shapes (BRF/PRF interior samples): Gaussian, precision built
  from the per-voxel stimulus regressors plus the prior precision;
* activation labels: collapsed Bernoulli conditional (response levels
  integrated out analytically) combined with a 4-neighborhood Ising prior,
  scanned in a two-color checkerboard schedule;
* BOLD/perfusion response levels: class-conditional Gaussian (bivariate
  when both components are active);
* drift, perfusion baseline and all variances: conjugate Gaussian /
  inverse-gamma steps (Jeffreys priors for the variances).

The BRF is renormalized to unit Euclidean norm after each draw with the
compensating rescale of its response levels, which leaves the likelihood
invariant and pins down the shape/magnitude split.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import expit

from .balloon import PhysioParams
from .design import DesignSet, Paradigm

logger = logging.getLogger(__name__)

VARIANTS = ("basic", "physio_1step", "physio_2step")

NOISE_FLOOR = 1e-12
NUISANCE_FLOOR = 1e-12
MIXTURE_VAR_FLOOR = 1e-8
NOISE_CEILING = 1e6


class SingularPrecision(np.linalg.LinAlgError):
    """A full-conditional precision matrix is numerically singular."""


class ChainDiverged(RuntimeError):
    """The sampled noise variance exceeded the divergence ceiling."""


@dataclass
class PriorConfig:
    """Prior layer of the model; fields shared by every fit variant.

    ``sigma_h``/``sigma_g`` override the response prior covariances on the
    interior grid (defaults: second-derivative smoothness; identity for the
    perfusion prior of the residual-stage fit).  ``physio`` parametrizes the
    response operator used by the physiological variants.
    """

    v_h: float = 0.1
    v_g: float = 0.1
    ising_beta: float = 0.7
    active_mean_loc: float = 1.0
    active_mean_var: float = 10.0
    var_shape: float = 2.1
    var_scale: float = 0.5
    variant: str = "basic"
    sigma_h: np.ndarray | None = None
    sigma_g: np.ndarray | None = None
    physio: PhysioParams | None = None

    def __post_init__(self):
        if self.v_h <= 0.0 or self.v_g <= 0.0:
            raise ValueError("v_h and v_g must be strictly positive")
        if self.ising_beta < 0.0:
            raise ValueError("ising_beta must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")


@dataclass
class MixtureParams:
    """Two-class Gaussian mixture of response levels, one set per condition.

    The inactive class has mean 0 by construction.
    """

    mu_active: np.ndarray
    var_active: np.ndarray
    var_inactive: np.ndarray

    @classmethod
    def vague(cls, n_conditions: int, mu: float = 1.0):
        return cls(mu_active=np.full(n_conditions, mu),
                   var_active=np.ones(n_conditions),
                   var_inactive=np.ones(n_conditions))

    def copy(self):
        return MixtureParams(self.mu_active.copy(), self.var_active.copy(),
                             self.var_inactive.copy())

    def mean(self, cls_idx: int, m: int) -> float:
        return float(self.mu_active[m]) if cls_idx == 1 else 0.0

    def var(self, cls_idx: int, m: int) -> float:
        return float(self.var_active[m] if cls_idx == 1 else self.var_inactive[m])


@dataclass
class LatentState:
    """All sampled unknowns of one chain."""

    brf: np.ndarray           # (K,) interior BRF samples
    prf: np.ndarray           # (K,) interior PRF samples
    bold_levels: np.ndarray   # (J, M)
    perf_levels: np.ndarray   # (J, M)
    labels: np.ndarray        # (J, M) in {0, 1}
    drift_coeffs: np.ndarray  # (J, O)
    baselines: np.ndarray     # (J,)
    noise_var: float
    drift_var: float
    baseline_var: float
    bold_mix: MixtureParams
    perf_mix: MixtureParams

    def copy(self):
        return LatentState(
            brf=self.brf.copy(), prf=self.prf.copy(),
            bold_levels=self.bold_levels.copy(),
            perf_levels=self.perf_levels.copy(),
            labels=self.labels.copy(),
            drift_coeffs=self.drift_coeffs.copy(),
            baselines=self.baselines.copy(),
            noise_var=self.noise_var, drift_var=self.drift_var,
            baseline_var=self.baseline_var,
            bold_mix=self.bold_mix.copy(), perf_mix=self.perf_mix.copy())


@dataclass
class ResolvedPriors:
    """Prior pieces resolved onto the interior response grid."""

    config: PriorConfig
    brf_prec: np.ndarray | None = None   # prior precision incl. 1/v_h
    prf_prec: np.ndarray | None = None   # prior precision incl. 1/v_g
    omega: np.ndarray | None = None      # interior BRF->PRF operator
    prf_anchor: np.ndarray | None = None  # fixed prior mean for the PRF
    link_prf_prior: bool = False         # prior mean of PRF is omega @ brf
    couple_brf: bool = False             # BRF conditional sees the link term
    renorm_prf: bool = False
    brf_init: np.ndarray | None = None
    prf_init: np.ndarray | None = None
    coupling_prec: np.ndarray | None = None
    coupling_proj: np.ndarray | None = None

    @property
    def ising_beta(self) -> float:
        return self.config.ising_beta


class ParcelModel:
    """Design tensors and component layout for one parcel fit."""

    def __init__(self, y, design: DesignSet, paradigm: Paradigm, grid_shape,
                 has_bold=True, has_perfusion=True, has_drift=True,
                 has_baseline=True):
        self.y = np.asarray(y, dtype=float)
        self.design = design
        self.paradigm = paradigm
        self.grid_shape = tuple(grid_shape)
        self.has_bold = has_bold
        self.has_perfusion = has_perfusion
        self.has_drift = has_drift
        self.has_baseline = has_baseline

        self.n_scans, self.n_vox = self.y.shape
        self.n_cond = paradigm.n_conditions
        self.k = paradigm.response_length - 1
        self.x_int = [x[:, 1:-1] for x in design.stim_matrices]
        self.wx_int = [design.ct_signs[:, None] * x for x in self.x_int]
        self.cross = [[xi.T @ xj for xj in self.x_int] for xi in self.x_int]
        self.drift = design.drift_basis
        self.ct = design.ct_signs

        gh, gw = self.grid_shape
        if gh * gw != self.n_vox:
            raise ValueError("grid shape does not match the voxel count")
        iy, ix = np.divmod(np.arange(self.n_vox), gw)
        parity = (iy + ix) % 2
        self.color_masks = (parity == 0, parity == 1)
        ones = np.ones((gh, gw))
        self.degree = self._neighbor_sum(ones).ravel()

    @staticmethod
    def _neighbor_sum(grid2d: np.ndarray) -> np.ndarray:
        total = np.zeros_like(grid2d)
        total[1:, :] += grid2d[:-1, :]
        total[:-1, :] += grid2d[1:, :]
        total[:, 1:] += grid2d[:, :-1]
        total[:, :-1] += grid2d[:, 1:]
        return total

    def neighbor_active(self, labels_col: np.ndarray) -> np.ndarray:
        grid2d = labels_col.reshape(self.grid_shape).astype(float)
        return self._neighbor_sum(grid2d).ravel()


def _signal(model: ParcelModel, state: LatentState,
            include=("bold", "perfusion", "drift", "baseline")) -> np.ndarray:
    y = np.zeros_like(model.y)
    if model.has_bold and "bold" in include:
        regs = np.stack([x @ state.brf for x in model.x_int], axis=1)
        y += regs @ state.bold_levels.T
    if model.has_perfusion and "perfusion" in include:
        regs = np.stack([wx @ state.prf for wx in model.wx_int], axis=1)
        y += regs @ state.perf_levels.T
    if model.has_drift and "drift" in include:
        y += model.drift @ state.drift_coeffs.T
    if model.has_baseline and "baseline" in include:
        y += np.outer(model.ct, state.baselines)
    return y


def model_signal(model: ParcelModel, state: LatentState) -> np.ndarray:
    """Noise-free model prediction under the current state."""
    return _signal(model, state)


def _draw_canonical(prec: np.ndarray, lin: np.ndarray, rng) -> np.ndarray:
    """Draw from N(prec^-1 lin, prec^-1) via a Cholesky factor."""
    chol = np.linalg.cholesky(prec)
    mean = solve_triangular(chol.T, solve_triangular(chol, lin, lower=True),
                            lower=False)
    noise = solve_triangular(chol.T, rng.standard_normal(lin.size), lower=False)
    return mean + noise


def _unit_with_sign(vec: np.ndarray):
    """Unit-normalize with a positive dominant lobe; returns (vec, scale).

    ``scale`` is the factor that must multiply the paired response levels to
    keep their product with the response invariant.
    """
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        return vec, 1.0
    out = vec / norm
    if out[np.argmax(np.abs(out))] < 0.0:
        out = -out
        norm = -norm
    return out, norm


def sample_response(kind: str, state: LatentState, model: ParcelModel,
                    priors: ResolvedPriors, rng, renormalize: bool = True):
    """Draw the BRF (kind='brf') or PRF (kind='prf') full conditional.

    Falls back to a pure prior draw when the conditional precision is
    numerically singular; raises SingularPrecision when even the prior
    precision cannot be factorized.
    """
    v_b = state.noise_var
    if kind == "brf":
        resid = model.y - _signal(model, state,
                                  include=("perfusion", "drift", "baseline"))
        levels = state.bold_levels
        prior_prec = priors.brf_prec
        prior_lin = np.zeros(model.k)
        gram = levels.T @ levels
        prec = prior_prec.copy()
        lin = np.zeros(model.k)
        for m in range(model.n_cond):
            lin += model.x_int[m].T @ (resid @ levels[:, m])
            for m2 in range(model.n_cond):
                prec += (gram[m, m2] / v_b) * model.cross[m][m2]
        lin /= v_b
        if priors.couple_brf:
            prec = prec + priors.coupling_prec
            prior_prec = prior_prec + priors.coupling_prec
            prior_lin = prior_lin + priors.coupling_proj @ state.prf
            lin = lin + priors.coupling_proj @ state.prf
    elif kind == "prf":
        resid = model.y - _signal(model, state,
                                  include=("bold", "drift", "baseline"))
        levels = state.perf_levels
        prior_prec = priors.prf_prec
        gram = levels.T @ levels
        prec = prior_prec.copy()
        lin = np.zeros(model.k)
        for m in range(model.n_cond):
            lin += model.x_int[m].T @ (model.ct * (resid @ levels[:, m]))
            for m2 in range(model.n_cond):
                prec += (gram[m, m2] / (4.0 * v_b)) * model.cross[m][m2]
        lin /= v_b
        anchor = priors.prf_anchor
        if anchor is None and priors.link_prf_prior:
            anchor = priors.omega @ state.brf
        prior_lin = np.zeros(model.k)
        if anchor is not None:
            prior_lin = priors.prf_prec @ anchor
            lin = lin + prior_lin
    else:
        raise ValueError("kind must be 'brf' or 'prf'")

    try:
        draw = _draw_canonical(prec, lin, rng)
    except np.linalg.LinAlgError:
        try:
            draw = _draw_canonical(prior_prec, prior_lin, rng)
        except np.linalg.LinAlgError as exc:
            raise SingularPrecision(f"{kind} conditional is singular") from exc

    if kind == "brf":
        if renormalize:
            draw, scale = _unit_with_sign(draw)
            state.bold_levels = state.bold_levels * scale
        state.brf = draw
    else:
        if renormalize and priors.renorm_prf:
            draw, scale = _unit_with_sign(draw)
            state.perf_levels = state.perf_levels * scale
        state.prf = draw
    return draw


def _chol2x2(c11, c12, c22):
    l11 = math.sqrt(c11)
    l21 = c12 / l11
    l22 = math.sqrt(max(c22 - l21 * l21, 0.0))
    return l11, l21, l22


def _inv_gamma(shape: float, scale: float, rng) -> float:
    """One inverse-gamma draw; scale 0 collapses to 0."""
    return float(scale / rng.gamma(shape))


def sample_levels_and_labels(state: LatentState, model: ParcelModel,
                             priors: ResolvedPriors, rng,
                             update_mixture: bool = True) -> None:
    """Blocked update of (labels, response levels) plus mixture parameters.

    Per condition: labels are drawn from their collapsed conditional (own
    response levels integrated out) on a checkerboard schedule, then the
    levels are redrawn from their class-conditional Gaussian.  All
    probability arithmetic stays in the log domain.  ``update_mixture=False``
    freezes the mixture hyper-parameters (useful for frozen-conditional
    checks).
    """
    v_b = state.noise_var
    has_a, has_c = model.has_bold, model.has_perfusion
    n_vox = model.n_vox
    base = model.y - _signal(model, state, include=("drift", "baseline"))
    u_bold = [x @ state.brf for x in model.x_int] if has_a else None
    u_perf = [wx @ state.prf for wx in model.wx_int] if has_c else None

    for m in range(model.n_cond):
        resid = base.copy()
        for m2 in range(model.n_cond):
            if m2 == m:
                continue
            if has_a:
                resid -= np.outer(u_bold[m2], state.bold_levels[:, m2])
            if has_c:
                resid -= np.outer(u_perf[m2], state.perf_levels[:, m2])

        if has_a:
            da = u_bold[m] @ resid
            na2 = float(u_bold[m] @ u_bold[m])
        if has_c:
            dc = u_perf[m] @ resid
            nc2 = float(u_perf[m] @ u_perf[m])
        if has_a and has_c:
            nac = float(u_bold[m] @ u_perf[m])

        stats = []
        loglik = []
        for cls in (0, 1):
            if has_a:
                mu_a = state.bold_mix.mean(cls, m)
                va = state.bold_mix.var(cls, m)
            if has_c:
                mu_c = state.perf_mix.mean(cls, m)
                vc = state.perf_mix.var(cls, m)
            if has_a and has_c:
                m11 = na2 / v_b + 1.0 / va
                m22 = nc2 / v_b + 1.0 / vc
                m12 = nac / v_b
                det = m11 * m22 - m12 * m12
                b1 = da / v_b + mu_a / va
                b2 = dc / v_b + mu_c / vc
                quad = (m22 * b1 * b1 - 2.0 * m12 * b1 * b2 + m11 * b2 * b2) / det
                ll = 0.5 * quad - 0.5 * math.log(det * va * vc) \
                    - 0.5 * (mu_a * mu_a / va + mu_c * mu_c / vc)
                stats.append((m11, m22, m12, det, b1, b2))
            elif has_a:
                lam = na2 / v_b + 1.0 / va
                b1 = da / v_b + mu_a / va
                ll = 0.5 * b1 * b1 / lam - 0.5 * math.log(lam * va) \
                    - 0.5 * mu_a * mu_a / va
                stats.append((lam, b1))
            else:
                lam = nc2 / v_b + 1.0 / vc
                b2 = dc / v_b + mu_c / vc
                ll = 0.5 * b2 * b2 / lam - 0.5 * math.log(lam * vc) \
                    - 0.5 * mu_c * mu_c / vc
                stats.append((lam, b2))
            loglik.append(ll)
        delta = loglik[1] - loglik[0]

        labels_col = state.labels[:, m].copy()
        for mask in model.color_masks:
            n_active = model.neighbor_active(labels_col)
            logit = priors.ising_beta * (2.0 * n_active - model.degree) + delta
            flips = rng.random(n_vox) < expit(logit)
            labels_col[mask] = flips[mask].astype(int)
        state.labels[:, m] = labels_col
        chosen = labels_col == 1

        if has_a and has_c:
            z = rng.standard_normal((2, n_vox))
            draws = []
            for cls in (0, 1):
                m11, m22, m12, det, b1, b2 = stats[cls]
                mean_a = (m22 * b1 - m12 * b2) / det
                mean_c = (m11 * b2 - m12 * b1) / det
                l11, l21, l22 = _chol2x2(m22 / det, -m12 / det, m11 / det)
                draws.append((mean_a + l11 * z[0],
                              mean_c + l21 * z[0] + l22 * z[1]))
            state.bold_levels[:, m] = np.where(chosen, draws[1][0], draws[0][0])
            state.perf_levels[:, m] = np.where(chosen, draws[1][1], draws[0][1])
        elif has_a:
            z = rng.standard_normal(n_vox)
            draws = []
            for cls in (0, 1):
                lam, b1 = stats[cls]
                draws.append(b1 / lam + z / math.sqrt(lam))
            state.bold_levels[:, m] = np.where(chosen, draws[1], draws[0])
        else:
            z = rng.standard_normal(n_vox)
            draws = []
            for cls in (0, 1):
                lam, b2 = stats[cls]
                draws.append(b2 / lam + z / math.sqrt(lam))
            state.perf_levels[:, m] = np.where(chosen, draws[1], draws[0])

    if not update_mixture:
        return
    for m in range(model.n_cond):
        if has_a:
            _update_mixture(state.bold_levels[:, m], state.labels[:, m],
                            state.bold_mix, m, priors.config, rng)
        if has_c:
            _update_mixture(state.perf_levels[:, m], state.labels[:, m],
                            state.perf_mix, m, priors.config, rng)


def _update_mixture(values, labels_col, mix: MixtureParams, m: int,
                    config: PriorConfig, rng) -> None:
    active = labels_col == 1
    n1 = int(active.sum())
    n0 = values.size - n1
    var_a = float(mix.var_active[m])
    prec = n1 / var_a + 1.0 / config.active_mean_var
    mean = (float(values[active].sum()) / var_a
            + config.active_mean_loc / config.active_mean_var) / prec
    mu1 = rng.normal(mean, math.sqrt(1.0 / prec))
    mix.mu_active[m] = mu1
    ss1 = float(((values[active] - mu1) ** 2).sum())
    mix.var_active[m] = max(
        _inv_gamma(config.var_shape + 0.5 * n1, config.var_scale + 0.5 * ss1, rng),
        MIXTURE_VAR_FLOOR)
    ss0 = float((values[~active] ** 2).sum())
    mix.var_inactive[m] = max(
        _inv_gamma(config.var_shape + 0.5 * n0, config.var_scale + 0.5 * ss0, rng),
        MIXTURE_VAR_FLOOR)


def sample_nuisance(state: LatentState, model: ParcelModel,
                    priors: ResolvedPriors, rng) -> None:
    """Drift coefficients, perfusion baselines, and all variances."""
    v_b = state.noise_var
    n_vox = model.n_vox
    if model.has_drift:
        resid = model.y - _signal(model, state,
                                  include=("bold", "perfusion", "baseline"))
        lam = 1.0 / v_b + 1.0 / state.drift_var
        mean = (model.drift.T @ resid) / (v_b * lam)
        state.drift_coeffs = (mean + rng.standard_normal(mean.shape)
                              / math.sqrt(lam)).T
        ss = float((state.drift_coeffs ** 2).sum())
        state.drift_var = max(
            _inv_gamma(0.5 * state.drift_coeffs.size, 0.5 * ss, rng),
            NUISANCE_FLOOR)
    if model.has_baseline:
        resid = model.y - _signal(model, state,
                                  include=("bold", "perfusion", "drift"))
        lam = 0.25 * model.n_scans / v_b + 1.0 / state.baseline_var
        mean = (model.ct @ resid) / (v_b * lam)
        state.baselines = mean + rng.standard_normal(n_vox) / math.sqrt(lam)
        ss = float((state.baselines ** 2).sum())
        state.baseline_var = max(_inv_gamma(0.5 * n_vox, 0.5 * ss, rng),
                                 NUISANCE_FLOOR)
    resid = model.y - _signal(model, state)
    ss = float((resid ** 2).sum())
    state.noise_var = max(
        _inv_gamma(0.5 * resid.size, 0.5 * ss, rng), NOISE_FLOOR)


def initialize_state(model: ParcelModel, priors: ResolvedPriors) -> LatentState:
    """Deterministic warm start from per-voxel least squares."""
    n_cond, n_vox = model.n_cond, model.n_vox
    order = model.drift.shape[1]
    k = model.k
    brf0 = priors.brf_init if (model.has_bold and priors.brf_init is not None) \
        else np.zeros(k)
    prf0 = priors.prf_init if (model.has_perfusion and priors.prf_init is not None) \
        else np.zeros(k)

    cols = []
    if model.has_bold:
        cols += [x @ brf0 for x in model.x_int]
    if model.has_perfusion:
        cols += [wx @ prf0 for wx in model.wx_int]
    if model.has_drift:
        cols += [model.drift[:, o] for o in range(order)]
    if model.has_baseline:
        cols += [model.ct]
    design = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(design, model.y, rcond=None)
    pos = 0
    bold_levels = np.zeros((n_vox, n_cond))
    perf_levels = np.zeros((n_vox, n_cond))
    drift_coeffs = np.zeros((n_vox, order))
    baselines = np.zeros(n_vox)
    if model.has_bold:
        bold_levels = coef[pos:pos + n_cond].T.copy()
        pos += n_cond
    if model.has_perfusion:
        perf_levels = coef[pos:pos + n_cond].T.copy()
        pos += n_cond
    if model.has_drift:
        drift_coeffs = coef[pos:pos + order].T.copy()
        pos += order
    if model.has_baseline:
        baselines = coef[pos].copy()

    source = bold_levels if model.has_bold else perf_levels
    labels = np.zeros((n_vox, n_cond), dtype=int)
    for m in range(n_cond):
        ref = float(np.percentile(source[:, m], 95))
        if ref > 0.0:
            labels[:, m] = (source[:, m] > 0.5 * ref).astype(int)

    def init_mix(levels):
        mix = MixtureParams.vague(n_cond)
        for m in range(n_cond):
            active = labels[:, m] == 1
            if active.any():
                mix.mu_active[m] = float(levels[active, m].mean())
                mix.var_active[m] = max(float(levels[active, m].var()), 0.01)
            if (~active).any():
                mix.var_inactive[m] = max(float(levels[~active, m].var()), 0.01)
        return mix

    resid = model.y - design @ coef
    noise_var = max(float((resid ** 2).mean()), 1e-6)
    drift_var = max(float((drift_coeffs ** 2).mean()), 1e-3) \
        if model.has_drift else 1.0
    baseline_var = max(float((baselines ** 2).mean()), 1e-3) \
        if model.has_baseline else 1.0

    return LatentState(
        brf=brf0.copy(), prf=prf0.copy(),
        bold_levels=bold_levels, perf_levels=perf_levels, labels=labels,
        drift_coeffs=drift_coeffs, baselines=baselines,
        noise_var=noise_var, drift_var=drift_var, baseline_var=baseline_var,
        bold_mix=init_mix(bold_levels), perf_mix=init_mix(perf_levels))


@dataclass
class ChainResult:
    """Posterior means over the retained sweeps plus scalar traces."""

    brf: np.ndarray
    prf: np.ndarray
    bold_levels: np.ndarray
    perf_levels: np.ndarray
    ppm: np.ndarray
    drift_coeffs: np.ndarray
    baselines: np.ndarray
    traces: dict
    iterations: int
    burn_in: int


def run_chain(model: ParcelModel, priors: ResolvedPriors, iterations: int,
              burn_in: int, seed, init_state: LatentState | None = None,
              log_every: int = 100) -> ChainResult:
    """Run the Gibbs sweep; deterministic given (model, priors, seed)."""
    if not 0 <= burn_in < iterations:
        raise ValueError("need 0 <= burn_in < iterations")
    rng = np.random.default_rng(seed)
    state = init_state.copy() if init_state is not None \
        else initialize_state(model, priors)

    sums = {
        "brf": np.zeros(model.k), "prf": np.zeros(model.k),
        "bold_levels": np.zeros_like(state.bold_levels),
        "perf_levels": np.zeros_like(state.perf_levels),
        "ppm": np.zeros_like(state.labels, dtype=float),
        "drift_coeffs": np.zeros_like(state.drift_coeffs),
        "baselines": np.zeros_like(state.baselines),
    }
    traces = {"noise_var": [], "drift_var": [], "baseline_var": [],
              "bold_mix_mean": [], "perf_mix_mean": []}

    for sweep in range(iterations):
        if model.has_bold:
            sample_response("brf", state, model, priors, rng)
        if model.has_perfusion:
            sample_response("prf", state, model, priors, rng)
        sample_levels_and_labels(state, model, priors, rng)
        sample_nuisance(state, model, priors, rng)
        if state.noise_var > NOISE_CEILING:
            raise ChainDiverged(f"noise variance reached {state.noise_var:g}")

        traces["noise_var"].append(state.noise_var)
        traces["drift_var"].append(state.drift_var)
        traces["baseline_var"].append(state.baseline_var)
        traces["bold_mix_mean"].append(state.bold_mix.mu_active.copy())
        traces["perf_mix_mean"].append(state.perf_mix.mu_active.copy())

        if sweep >= burn_in:
            sums["brf"] += state.brf
            sums["prf"] += state.prf
            sums["bold_levels"] += state.bold_levels
            sums["perf_levels"] += state.perf_levels
            sums["ppm"] += state.labels
            sums["drift_coeffs"] += state.drift_coeffs
            sums["baselines"] += state.baselines

        if log_every and (sweep + 1) % log_every == 0:
            logger.info("sweep %d/%d noise_var=%.5g", sweep + 1, iterations,
                        state.noise_var)

    n_keep = iterations - burn_in
    traces = {key: np.array(val) for key, val in traces.items()}
    return ChainResult(
        brf=sums["brf"] / n_keep, prf=sums["prf"] / n_keep,
        bold_levels=sums["bold_levels"] / n_keep,
        perf_levels=sums["perf_levels"] / n_keep,
        ppm=sums["ppm"] / n_keep,
        drift_coeffs=sums["drift_coeffs"] / n_keep,
        baselines=sums["baselines"] / n_keep,
        traces=traces, iterations=iterations, burn_in=burn_in)
