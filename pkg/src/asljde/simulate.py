"""Synthetic ASL dataset generation for one parcel.

Implements the additive forward model: per-voxel BOLD component (stimulus
matrices times the BRF, scaled by BOLD response levels), perfusion component
(sign-alternated through the control/tag structure, scaled by perfusion
response levels), polynomial drift, perfusion baseline, and white noise.
Datasets round-trip bit-exactly through the on-disk directory format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .balloon import PhysioParams, ResponseFunction, generate_responses
from .design import DesignSet, Paradigm, build_design

COMPONENTS = ("bold", "perfusion", "drift", "baseline", "noise")


class DimensionMismatch(ValueError):
    """Array shapes are inconsistent with the paradigm or voxel grid."""


@dataclass
class TruthConfig:
    """Ground-truth generation law for synthetic datasets.

    Second moments are variances.  Active response levels are drawn from
    the active class; inactive voxels draw from the matching zero-mean
    class.  ``label_maps`` overrides the bundled activation maps.
    """

    grid_shape: tuple[int, int] = (20, 20)
    label_maps: tuple[np.ndarray, ...] | None = None
    bold_active_mean: float = 2.2
    bold_active_var: float = 0.3
    bold_inactive_var: float = 0.3
    perf_active_mean: float = 0.48
    perf_active_var: float = 0.1
    perf_inactive_var: float = 0.1
    drift_var: float = 10.0
    drift_order: int = 4
    baseline_var: float = 0.5
    noise_var: float = 7.0


@dataclass
class GroundTruth:
    """Everything the generator drew: labels, levels, nuisance, responses."""

    labels: np.ndarray        # (J, M) in {0, 1}
    bold_levels: np.ndarray   # (J, M)
    perf_levels: np.ndarray   # (J, M)
    drift_coeffs: np.ndarray  # (J, O)
    baselines: np.ndarray     # (J,)
    brf: ResponseFunction
    prf: ResponseFunction
    noise_var: float


@dataclass
class ParcelDataset:
    """Observed time series plus the design they were acquired under."""

    y: np.ndarray             # (n_scans, J)
    design: DesignSet
    paradigm: Paradigm
    grid_shape: tuple[int, int]

    def __post_init__(self):
        gh, gw = self.grid_shape
        expected = (self.paradigm.n_scans, gh * gw)
        if self.y.shape != expected:
            raise DimensionMismatch(f"y has shape {self.y.shape}, expected {expected}")

    @property
    def n_voxels(self) -> int:
        return self.y.shape[1]


def _load_asset(name: str) -> np.ndarray:
    text = resources.files("asljde").joinpath("assets", name).read_text()
    return np.array([[int(v) for v in line.split(",")]
                     for line in text.strip().splitlines()])


def _scale_map(base: np.ndarray, shape) -> np.ndarray:
    gh, gw = shape
    rows = (np.arange(gh) * base.shape[0]) // gh
    cols = (np.arange(gw) * base.shape[1]) // gw
    return base[np.ix_(rows, cols)]


def default_label_maps(grid_shape, n_conditions: int = 2):
    """Bundled house/square activation maps, resampled off the 20x20 grid."""
    bases = (_load_asset("labels_house.csv"), _load_asset("labels_square.csv"))
    maps = []
    for m in range(n_conditions):
        base = bases[m % len(bases)]
        if base.shape == tuple(grid_shape):
            maps.append(base.copy())
        else:
            maps.append(_scale_map(base, grid_shape))
    return tuple(maps)


def unit_shape(values: np.ndarray) -> np.ndarray:
    """Rescale to unit Euclidean norm with a positive dominant lobe."""
    values = np.asarray(values, dtype=float)
    norm = np.linalg.norm(values)
    if norm == 0.0:
        return values.copy()
    out = values / norm
    if out[np.argmax(np.abs(out))] < 0.0:
        out = -out
    return out


def bold_component(design: DesignSet, brf_values, bold_levels) -> np.ndarray:
    """Stacked task-related BOLD term for all voxels."""
    regs = np.stack([x @ brf_values for x in design.stim_matrices], axis=1)
    return regs @ bold_levels.T


def perfusion_component(design: DesignSet, prf_values, perf_levels) -> np.ndarray:
    """Task-related perfusion term, sign-alternated by the control/tag signs."""
    regs = np.stack([design.ct_signs * (x @ prf_values)
                     for x in design.stim_matrices], axis=1)
    return regs @ perf_levels.T


def drift_component(design: DesignSet, drift_coeffs) -> np.ndarray:
    return design.drift_basis @ drift_coeffs.T


def baseline_component(design: DesignSet, baselines) -> np.ndarray:
    return np.outer(design.ct_signs, baselines)


def assemble_signal(design: DesignSet, truth: GroundTruth, noise=None,
                    components=COMPONENTS) -> np.ndarray:
    """Sum the requested model components in a fixed order.

    The accumulation order is part of the contract: simulating single
    components and summing the results reproduces the full signal
    bit-for-bit.
    """
    unknown = set(components) - set(COMPONENTS)
    if unknown:
        raise ValueError(f"unknown components: {sorted(unknown)}")
    y = np.zeros((design.n_scans, truth.bold_levels.shape[0]))
    if "bold" in components:
        y += bold_component(design, truth.brf.values, truth.bold_levels)
    if "perfusion" in components:
        y += perfusion_component(design, truth.prf.values, truth.perf_levels)
    if "drift" in components:
        y += drift_component(design, truth.drift_coeffs)
    if "baseline" in components:
        y += baseline_component(design, truth.baselines)
    if "noise" in components and noise is not None:
        y += noise
    return y


def simulate_dataset(paradigm: Paradigm, truth_config: TruthConfig | None = None,
                     physio: PhysioParams | None = None, seed: int = 0,
                     components=COMPONENTS):
    """Draw a synthetic parcel dataset; returns ``(dataset, truth)``.

    Fully reproducible from ``seed``; the random draws do not depend on the
    ``components`` selection, which only masks terms of the assembled sum.
    """
    cfg = truth_config if truth_config is not None else TruthConfig()
    physio = physio if physio is not None else PhysioParams()
    design = build_design(paradigm, drift_order=cfg.drift_order)
    gh, gw = cfg.grid_shape
    n_vox = gh * gw
    n_cond = paradigm.n_conditions

    maps = cfg.label_maps
    if maps is None:
        maps = default_label_maps(cfg.grid_shape, n_cond)
    if len(maps) != n_cond:
        raise DimensionMismatch(f"need {n_cond} label maps, got {len(maps)}")
    cols = []
    for mp in maps:
        arr = np.asarray(mp)
        if arr.shape != (gh, gw):
            raise DimensionMismatch(
                f"label map shape {arr.shape} != grid {cfg.grid_shape}")
        cols.append(arr.reshape(n_vox))
    labels = np.stack(cols, axis=1).astype(int)

    rng = np.random.default_rng(seed)
    z_bold = rng.standard_normal((n_vox, n_cond))
    z_perf = rng.standard_normal((n_vox, n_cond))
    drift_coeffs = np.sqrt(cfg.drift_var) * rng.standard_normal((n_vox, cfg.drift_order))
    baselines = np.sqrt(cfg.baseline_var) * rng.standard_normal(n_vox)
    noise = np.sqrt(cfg.noise_var) * rng.standard_normal((paradigm.n_scans, n_vox))

    active = labels == 1
    bold_levels = np.where(
        active,
        cfg.bold_active_mean + np.sqrt(cfg.bold_active_var) * z_bold,
        np.sqrt(cfg.bold_inactive_var) * z_bold)
    perf_levels = np.where(
        active,
        cfg.perf_active_mean + np.sqrt(cfg.perf_active_var) * z_perf,
        np.sqrt(cfg.perf_inactive_var) * z_perf)

    brf, prf = generate_responses(physio, paradigm.dt, paradigm.response_length)
    truth = GroundTruth(
        labels=labels, bold_levels=bold_levels, perf_levels=perf_levels,
        drift_coeffs=drift_coeffs, baselines=baselines,
        brf=ResponseFunction(brf.dt, unit_shape(brf.values)),
        prf=ResponseFunction(prf.dt, unit_shape(prf.values)),
        noise_var=cfg.noise_var)

    y = assemble_signal(design, truth, noise=noise, components=components)
    dataset = ParcelDataset(y=y, design=design, paradigm=paradigm,
                            grid_shape=(gh, gw))
    return dataset, truth


# -- on-disk dataset directory ------------------------------------------------

def _write_matrix(path: Path, arr: np.ndarray) -> None:
    lines = [",".join(f"{v:.17g}" for v in row) for row in np.atleast_2d(arr)]
    path.write_text("\n".join(lines) + "\n")


def _read_matrix(path: Path) -> np.ndarray:
    rows = [[float(v) for v in line.split(",")]
            for line in path.read_text().strip().splitlines()]
    return np.array(rows)


def save_dataset(directory, dataset: ParcelDataset, truth: GroundTruth) -> None:
    """Write ``Y.csv``, per-condition ``labels_<m>.csv``, ``truth.json`` and
    ``paradigm.json``; the layout round-trips bit-exactly."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _write_matrix(directory / "Y.csv", dataset.y)
    gh, gw = dataset.grid_shape
    for m in range(truth.labels.shape[1]):
        lines = [",".join(str(int(v)) for v in row)
                 for row in truth.labels[:, m].reshape(gh, gw)]
        (directory / f"labels_{m}.csv").write_text("\n".join(lines) + "\n")
    para = dataset.paradigm
    (directory / "paradigm.json").write_text(json.dumps({
        "onsets": [list(c) for c in para.onsets],
        "tr": para.tr,
        "n_scans": para.n_scans,
        "dt": para.dt,
        "response_length": para.response_length,
        "grid_shape": list(dataset.grid_shape),
        "drift_order": dataset.design.drift_order,
    }, indent=1))
    (directory / "truth.json").write_text(json.dumps({
        "bold_levels": truth.bold_levels.tolist(),
        "perf_levels": truth.perf_levels.tolist(),
        "drift_coeffs": truth.drift_coeffs.tolist(),
        "baselines": truth.baselines.tolist(),
        "brf": {"dt": truth.brf.dt, "values": truth.brf.values.tolist()},
        "prf": {"dt": truth.prf.dt, "values": truth.prf.values.tolist()},
        "noise_var": truth.noise_var,
    }, indent=1))


def load_dataset(directory):
    """Load a dataset directory; returns ``(dataset, truth)``."""
    directory = Path(directory)
    meta = json.loads((directory / "paradigm.json").read_text())
    paradigm = Paradigm(
        onsets=tuple(tuple(c) for c in meta["onsets"]),
        tr=meta["tr"], n_scans=meta["n_scans"], dt=meta["dt"],
        response_length=meta["response_length"])
    design = build_design(paradigm, drift_order=meta.get("drift_order", 4))
    grid_shape = tuple(meta["grid_shape"])
    y = _read_matrix(directory / "Y.csv")
    tr = json.loads((directory / "truth.json").read_text())
    labels = np.stack(
        [np.array([[int(v) for v in line.split(",")] for line in
                   (directory / f"labels_{m}.csv").read_text().strip().splitlines()]
                  ).reshape(grid_shape[0] * grid_shape[1])
         for m in range(paradigm.n_conditions)], axis=1)
    truth = GroundTruth(
        labels=labels,
        bold_levels=np.array(tr["bold_levels"]),
        perf_levels=np.array(tr["perf_levels"]),
        drift_coeffs=np.array(tr["drift_coeffs"]),
        baselines=np.array(tr["baselines"]),
        brf=ResponseFunction(tr["brf"]["dt"], np.array(tr["brf"]["values"])),
        prf=ResponseFunction(tr["prf"]["dt"], np.array(tr["prf"]["values"])),
        noise_var=tr["noise_var"])
    dataset = ParcelDataset(y=y, design=design, paradigm=paradigm,
                            grid_shape=grid_shape)
    return dataset, truth
