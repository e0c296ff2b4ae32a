"""Monte-Carlo experiment runner: SNR, mismatch and occlusion sweeps, CRLB
validation and objective heatmaps.

Seeding uses common random numbers: trial ``t`` draws its waveform, noise,
channel perturbation and imperfect-model phases from child streams of
``SeedSequence([seed, t])``, independently of the sweep point. Points of a
sweep therefore differ only through the swept quantity, and ``eps = 0`` /
``beta = 1`` reproduce the unperturbed run bit for bit.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import scipy

from .baselines import (
    MfpChannelModel,
    gccphat_objective_batch,
    mfp3_objective_batch,
    phat_weights,
)
from .channel import (
    ChannelCoefficients,
    FrequencyRecord,
    perturb_mismatch,
    perturb_occlusion,
    physical_channel,
    random_channel,
    synthesize,
    synthesize_superposition,
)
from .crlb import PositionBound, fisher_information, position_crlb
from .geometry import Scenario, ScenarioError, as_point
from .sbl import sbl_objective_batch
from .search import (
    EstimationFailure,
    LocalizationResult,
    RefineOptions,
    SearchGrid,
    evaluate_grid,
    localize,
)
from .waveform import (
    NoiseModel,
    NoiseSamples,
    Waveform,
    make_cn_waveform,
    make_flat_waveform,
    make_gaussian_pulse,
)

log = logging.getLogger(__name__)

ESTIMATORS = ("sbl", "mfp3", "mfp3-imperfect", "gccphat")
SWEEP_VARIABLES = ("snr", "epsilon", "beta", "none")


class ConfigError(ValueError):
    """Invalid experiment configuration."""


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class WaveformSpec:
    kind: str = "cn"  # flat | cn | gaussian-pulse
    redraw: bool = True  # fresh draw per trial; otherwise one draw from ``seed``
    seed: int = 0
    center_time: float | None = None  # gaussian-pulse only
    width: float | None = None


@dataclass(frozen=True)
class ChannelSpec:
    kind: str = "physical"  # physical | random
    mode: str = "cn"  # random channel construction: cn | perturbed
    seed: int = 0


@dataclass(frozen=True)
class NoiseSpec:
    """``convention="A"``: every receiver gets ``||s||^2 / SNR``.
    ``convention="B"``: receiver l gets ``P_s ||b_l||^2 / SNR`` with
    ``P_s = ||s||^2 / N`` and ``b_l`` the unperturbed channel."""

    convention: str = "B"
    snr_db: float = 10.0
    file: str | None = None


@dataclass(frozen=True)
class SweepSpec:
    variable: str = "none"
    values: tuple = ()
    occluded: tuple = ()  # 0-based receiver indices for the beta sweep


@dataclass(frozen=True)
class HeatmapSpec:
    plane_z: float | None = None  # defaults to the source depth
    steps: tuple | None = None  # (dx, dy); defaults to the grid steps
    trial: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    scenario: Scenario
    source: np.ndarray
    grid: SearchGrid
    waveform: WaveformSpec = field(default_factory=WaveformSpec)
    channel: ChannelSpec = field(default_factory=ChannelSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    estimators: tuple = ("sbl",)
    refine: RefineOptions = field(default_factory=RefineOptions)
    trials: int = 100
    seed: int = 0
    confidence: float = 0.95
    planar: bool = False
    heatmap: HeatmapSpec = field(default_factory=HeatmapSpec)
    threads: int = 1

    def __post_init__(self):
        src = as_point(self.source)
        object.__setattr__(self, "source", src)
        try:
            self.scenario.validate_source(src)
        except ScenarioError as exc:
            raise ConfigError(str(exc)) from exc
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.threads < 1:
            raise ConfigError("threads must be at least 1")
        for e in self.estimators:
            if e not in ESTIMATORS:
                raise ConfigError(f"unknown estimator {e!r}; choose from {ESTIMATORS}")
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        if self.waveform.kind not in ("flat", "cn", "gaussian-pulse"):
            raise ConfigError(f"unknown waveform kind {self.waveform.kind!r}")
        if self.waveform.kind == "gaussian-pulse" and (
            self.waveform.center_time is None or self.waveform.width is None
        ):
            raise ConfigError("gaussian-pulse needs center_time and width")
        if self.channel.kind not in ("physical", "random"):
            raise ConfigError(f"unknown channel kind {self.channel.kind!r}")
        if self.channel.mode not in ("cn", "perturbed"):
            raise ConfigError(f"unknown random channel mode {self.channel.mode!r}")
        if self.noise.convention not in ("A", "B"):
            raise ConfigError("noise convention must be 'A' or 'B'")
        sw = self.sweep
        if sw.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {sw.variable!r}")
        if sw.variable != "none" and not sw.values:
            raise ConfigError("sweep values are required")
        if sw.variable in ("epsilon", "beta"):
            bad = [v for v in sw.values if not 0.0 <= v <= 1.0]
            if bad:
                raise ConfigError(f"{sw.variable} values must lie in [0, 1], got {bad}")
        if sw.variable == "beta":
            L = self.scenario.n_receivers
            bad = [i for i in sw.occluded if not 0 <= i < L]
            if bad or not sw.occluded:
                raise ConfigError(f"occluded receivers must be a non-empty subset of 1..{L}")
        if ("gccphat" in self.estimators) and self.scenario.n_receivers < 2:
            raise ConfigError("GCC-PHAT needs at least two receivers")
        if self.grid.lower[2] < 0 or self.grid.upper[2] > self.scenario.bottom_depth:
            raise ConfigError("grid extends outside the water column")
        if not 0 < self.confidence < 1:
            raise ConfigError("confidence must lie in (0, 1)")

    @property
    def sweep_points(self) -> tuple:
        if self.sweep.variable == "none":
            return (None,)
        return tuple(float(v) for v in self.sweep.values)

    def to_dict(self) -> dict:
        """JSON-friendly echo of the resolved configuration."""
        sc = self.scenario
        g = self.grid
        return {
            "name": self.name,
            "seed": int(self.seed),
            "trials": int(self.trials),
            "scenario": {
                "receivers": sc.receivers.tolist(),
                "bottom_depth": sc.bottom_depth,
                "sound_speed": sc.sound_speed,
                "sample_period": sc.sample_period,
                "sample_count": sc.sample_count,
                "bottom_reflection": sc.bottom_reflection,
            },
            "source": self.source.tolist(),
            "waveform": asdict(self.waveform),
            "channel": asdict(self.channel),
            "noise": asdict(self.noise),
            "sweep": {
                "variable": self.sweep.variable,
                "values": [float(v) for v in self.sweep.values],
                "occluded": [int(i) + 1 for i in self.sweep.occluded],
            },
            "estimators": list(self.estimators),
            "grid": {
                "lower": g.lower.tolist(),
                "upper": g.upper.tolist(),
                "steps": None if g.steps is None else g.steps.tolist(),
            },
            "refine": asdict(self.refine),
            "crlb": {"confidence": self.confidence, "planar": self.planar},
            "heatmap": {
                "plane_z": self.heatmap.plane_z,
                "steps": None if self.heatmap.steps is None else list(self.heatmap.steps),
                "trial": self.heatmap.trial,
            },
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# ------------------------------------------------------------- trial setup


def trial_streams(seed: int, trial: int) -> dict:
    """Independent child seed sequences for one trial."""
    children = np.random.SeedSequence([int(seed), int(trial)]).spawn(4)
    return dict(zip(("waveform", "noise", "perturbation", "model"), children))


def make_waveform(config: ExperimentConfig, trial_seed=None) -> Waveform:
    spec = config.waveform
    sc = config.scenario
    seed = trial_seed if (spec.redraw and trial_seed is not None) else spec.seed
    if spec.kind == "flat":
        return make_flat_waveform(sc.sample_count, seed)
    if spec.kind == "cn":
        return make_cn_waveform(sc.sample_count, seed)
    return make_gaussian_pulse(sc.sample_count, sc.sample_period, spec.center_time, spec.width)


def nominal_channel(config: ExperimentConfig) -> ChannelCoefficients:
    spec = config.channel
    if spec.kind == "physical":
        return physical_channel(config.scenario, config.source)
    return random_channel(config.scenario.n_receivers, spec.seed, spec.mode)


def noise_variances(convention: str, snr_db: float, waveform: Waveform, B) -> np.ndarray:
    B = B.B if isinstance(B, ChannelCoefficients) else np.asarray(B)
    snr = 10.0 ** (snr_db / 10.0)
    energy = float(np.sum(np.abs(waveform.coefficients) ** 2))
    if convention == "A":
        return np.full(B.shape[1], energy / snr)
    if convention == "B":
        power = energy / waveform.coefficients.size
        return power * np.sum(np.abs(B) ** 2, axis=0) / snr
    raise ConfigError(f"unknown SNR convention {convention!r}")


def _noise_samples(config: ExperimentConfig):
    if config.noise.file is None:
        return None
    return NoiseSamples.from_file(config.noise.file)


def build_record(config: ExperimentConfig, value, trial: int, samples=None) -> tuple[FrequencyRecord, dict]:
    """Synthesize the measurements of one (sweep point, trial) work unit."""
    streams = trial_streams(config.seed, trial)
    s = make_waveform(config, streams["waveform"])
    B0 = nominal_channel(config)
    var_snr = config.noise.snr_db if config.sweep.variable != "snr" else value
    var = noise_variances(config.noise.convention, var_snr, s, B0)
    if config.sweep.variable == "epsilon":
        B = perturb_mismatch(B0, value, streams["perturbation"])
    elif config.sweep.variable == "beta":
        B = perturb_occlusion(B0, value, config.sweep.occluded, streams["perturbation"])
    else:
        B = B0
    if samples is not None:
        noise = NoiseModel(var, "external-samples", samples)
    else:
        noise = NoiseModel(var)
    rec = synthesize(config.scenario, config.source, B, s, noise, seed=streams["noise"], trial=trial)
    return rec, streams


def objective_function(name: str, x, scenario: Scenario, model_seed=None):
    """Batched objective ``f(points) -> values`` for a named estimator.

    Only the measurements and the scenario are visible here.
    """
    x = np.asarray(x)
    if name == "sbl":
        return lambda p: sbl_objective_batch(x, scenario, p)
    if name == "mfp3":
        model = MfpChannelModel()
        return lambda p: mfp3_objective_batch(x, scenario, p, model)
    if name == "mfp3-imperfect":
        model = MfpChannelModel.imperfect(scenario.n_receivers, model_seed)
        return lambda p: mfp3_objective_batch(x, scenario, p, model)
    if name == "gccphat":
        w = phat_weights(x)
        return lambda p: gccphat_objective_batch(x, scenario, p, w)
    raise ConfigError(f"unknown estimator {name!r}")


def run_estimator(
    name: str,
    x,
    scenario: Scenario,
    grid: SearchGrid,
    refine: RefineOptions | None = None,
    model_seed=None,
    keep_map: bool = False,
) -> LocalizationResult:
    grid.check_depth(scenario.bottom_depth)
    return localize(objective_function(name, x, scenario, model_seed), grid, refine, keep_map)


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class TrialResult:
    value: float | None
    estimator: str
    trial: int
    estimate: tuple | None
    grid_maximizer: tuple | None
    objective: float | None
    miss: float | None
    iterations: int = 0
    converged: bool = True
    n_skipped: int = 0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


def miss_distance(estimate, truth, planar: bool = False) -> float:
    d = np.asarray(estimate, dtype=float) - np.asarray(truth, dtype=float)
    if planar:
        d = d[:2]
    return float(np.sqrt(np.sum(d * d)))


def rms_with_stderr(misses) -> tuple[float, float]:
    """RMS of the miss distances and its delta-method standard error."""
    m = np.asarray(misses, dtype=float)
    if m.size == 0:
        return math.nan, math.nan
    sq = m * m
    rms = float(np.sqrt(sq.mean()))
    if m.size < 2 or rms == 0:
        return rms, 0.0
    se_mse = float(sq.std(ddof=1) / np.sqrt(m.size))
    return rms, se_mse / (2 * rms)


@dataclass
class ExperimentReport:
    kind: str
    config: ExperimentConfig
    trials: list
    extra: dict = field(default_factory=dict)

    def summary(self) -> list:
        rows = []
        for value in self.config.sweep_points:
            for est in self.config.estimators:
                sel = sorted(
                    (r for r in self.trials if r.value == value and r.estimator == est),
                    key=lambda r: r.trial,
                )
                ok = [r.miss for r in sel if not r.failed]
                rms, se = rms_with_stderr(ok)
                rows.append(
                    {
                        "variable": self.config.sweep.variable,
                        "value": value,
                        "estimator": est,
                        "trials": len(sel),
                        "successes": len(ok),
                        "failures": len(sel) - len(ok),
                        "rms": rms,
                        "rms_stderr": se,
                    }
                )
        return rows

    def rms(self, estimator: str, value=None) -> float:
        for row in self.summary():
            if row["estimator"] == estimator and row["value"] == value:
                return row["rms"]
        raise KeyError((estimator, value))

    def row(self, estimator: str, value=None) -> dict:
        for row in self.summary():
            if row["estimator"] == estimator and row["value"] == value:
                return row
        raise KeyError((estimator, value))

    def write(self, out_dir) -> list:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        path = out / "summary.csv"
        _write_csv(
            path,
            ["variable", "value", "estimator", "trials", "successes", "failures", "rms", "rms_stderr"],
            [
                [r["variable"], _fmt(r["value"]), r["estimator"], r["trials"], r["successes"],
                 r["failures"], _fmt(r["rms"]), _fmt(r["rms_stderr"])]
                for r in self.summary()
            ],
        )
        written.append(path.name)
        path = out / "trials.csv"
        rows = []
        for r in sorted(self.trials, key=_trial_key):
            est = r.estimate or (math.nan,) * 3
            gm = r.grid_maximizer or (math.nan,) * 3
            rows.append(
                [_fmt(r.value), r.estimator, r.trial, *map(_fmt, est), *map(_fmt, gm),
                 _fmt(r.objective), _fmt(r.miss), r.iterations, int(r.converged),
                 r.n_skipped, r.error or ""]
            )
        _write_csv(
            path,
            ["value", "estimator", "trial", "x", "y", "z", "grid_x", "grid_y", "grid_z",
             "objective", "miss", "iterations", "converged", "skipped", "error"],
            rows,
        )
        written.append(path.name)
        path = out / "trials.json"
        _write_json(path, [asdict(r) for r in sorted(self.trials, key=_trial_key)])
        written.append(path.name)
        if self.extra:
            path = out / f"{self.kind}.json"
            _write_json(path, self.extra)
            written.append(path.name)
        path = out / "manifest.json"
        _write_json(path, manifest(self.kind, self.config, written))
        written.append(path.name)
        return written


def _trial_key(r: TrialResult):
    return (-math.inf if r.value is None else r.value, r.estimator, r.trial)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _write_json(path: Path, data) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def manifest(kind: str, config: ExperimentConfig, outputs) -> dict:
    from . import __version__

    return {
        "command": kind,
        "config": config.to_dict(),
        "config_sha256": config.digest(),
        "seed": int(config.seed),
        "outputs": sorted(outputs),
        "versions": {
            "uwsbl": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }


# ------------------------------------------------------------------ sweeps


def _run_unit(config: ExperimentConfig, value, trial: int, estimators, samples=None) -> list:
    planar = config.grid.lower[2] == config.grid.upper[2]
    try:
        rec, streams = build_record(config, value, trial, samples)
    except Exception as exc:  # synthesis failures count against every estimator
        log.warning("trial %d at %s: synthesis failed: %s", trial, value, exc)
        return [TrialResult(value, e, trial, None, None, None, None, error=str(exc)) for e in estimators]
    out = []
    for est in estimators:
        try:
            res = run_estimator(est, rec.x, config.scenario, config.grid, config.refine, streams["model"])
        except (EstimationFailure, np.linalg.LinAlgError, ValueError) as exc:
            log.warning("trial %d at %s: %s failed: %s", trial, value, est, exc)
            out.append(TrialResult(value, est, trial, None, None, None, None, error=str(exc)))
            continue
        out.append(
            TrialResult(
                value=value,
                estimator=est,
                trial=trial,
                estimate=tuple(float(v) for v in res.estimate),
                grid_maximizer=tuple(float(v) for v in res.grid_maximizer),
                objective=float(res.objective_at_estimate),
                miss=miss_distance(res.estimate, config.source, planar),
                iterations=res.iterations,
                converged=res.converged,
                n_skipped=res.n_skipped,
            )
        )
    return out


def _unit_worker(args):
    config, value, trial, estimators = args
    return _run_unit(config, value, trial, estimators, _noise_samples(config))


def run_trials(config: ExperimentConfig, estimators=None) -> list:
    """All (sweep point, trial) work units, in a deterministic order."""
    estimators = tuple(config.estimators if estimators is None else estimators)
    units = [(v, t) for v in config.sweep_points for t in range(config.trials)]
    if config.threads > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            chunks = pool.map(_unit_worker, [(config, v, t, estimators) for v, t in units])
            results = [r for chunk in chunks for r in chunk]
    else:
        samples = _noise_samples(config)
        results = [r for v, t in units for r in _run_unit(config, v, t, estimators, samples)]
    return sorted(results, key=_trial_key)


def _require_sweep(config: ExperimentConfig, variable: str) -> None:
    if config.sweep.variable != variable:
        raise ConfigError(f"this experiment needs sweep.variable = {variable!r}, got {config.sweep.variable!r}")


def run_snr_sweep(config: ExperimentConfig) -> ExperimentReport:
    _require_sweep(config, "snr")
    return ExperimentReport("snr-sweep", config, run_trials(config))


def run_mismatch_sweep(config: ExperimentConfig) -> ExperimentReport:
    _require_sweep(config, "epsilon")
    return ExperimentReport("mismatch-sweep", config, run_trials(config))


def run_occlusion_sweep(config: ExperimentConfig) -> ExperimentReport:
    _require_sweep(config, "beta")
    return ExperimentReport("occlusion-sweep", config, run_trials(config))


def crlb_bound(config: ExperimentConfig) -> PositionBound:
    """Position bound for the configured (fixed) waveform and nominal channel."""
    if config.waveform.kind != "flat" or config.waveform.redraw:
        raise ConfigError("CRLB validation needs a fixed flat waveform (waveform.redraw = false)")
    s = make_waveform(config)
    B = nominal_channel(config)
    var = noise_variances(config.noise.convention, config.noise.snr_db, s, B)
    fim = fisher_information(config.scenario, config.source, B, s, var)
    return position_crlb(fim, config.source, config.confidence)


def run_crlb_validation(config: ExperimentConfig) -> ExperimentReport:
    """SBL estimates against the CRLB confidence ellipsoid."""
    if config.sweep.variable != "none":
        raise ConfigError("CRLB validation runs at a single operating point (sweep.variable = 'none')")
    bound = crlb_bound(config)
    trials = run_trials(config, ("sbl",))
    dims = (0, 1) if config.planar else (0, 1, 2)
    ok = [r for r in trials if not r.failed]
    est = np.array([r.estimate for r in ok]).reshape(-1, 3)
    inside = bound.contains(est, dims) if len(est) else np.zeros(0, bool)
    vec, semi = bound.ellipsoid(dims)
    rms, se = rms_with_stderr([r.miss for r in ok])
    extra = {
        "confidence": config.confidence,
        "dims": list(dims),
        "covariance": bound.covariance,
        "trace": bound.trace,
        "sqrt_trace": math.sqrt(bound.trace),
        "center": bound.center,
        "axes": vec,
        "semi_axes": semi,
        "coverage": float(np.mean(inside)) if len(inside) else math.nan,
        "inside": [bool(v) for v in inside],
        "successes": len(ok),
        "failures": len(trials) - len(ok),
        "rms": rms,
        "rms_stderr": se,
        "rms_over_sqrt_trace": rms / math.sqrt(bound.trace),
    }
    cfg = config if config.estimators == ("sbl",) else _with_estimators(config, ("sbl",))
    return ExperimentReport("crlb-validate", cfg, trials, extra)


def _with_estimators(config: ExperimentConfig, estimators) -> ExperimentConfig:
    from dataclasses import replace

    return replace(config, estimators=tuple(estimators))


# ----------------------------------------------------------------- heatmaps


@dataclass
class ObjectiveMap:
    estimator: str
    xs: np.ndarray
    ys: np.ndarray
    z: float
    values: np.ndarray  # (len(xs), len(ys)); NaN at skipped points

    @property
    def maximizer(self) -> tuple:
        i = int(np.nanargmax(self.values))
        ix, iy = np.unravel_index(i, self.values.shape)
        return float(self.xs[ix]), float(self.ys[iy]), float(self.z)

    def write_csv(self, path) -> None:
        rows = [
            [_fmt(float(x)), _fmt(float(y)), _fmt(float(self.z)), _fmt(float(v))]
            for (x, y), v in zip(
                np.stack(np.meshgrid(self.xs, self.ys, indexing="ij"), -1).reshape(-1, 2),
                self.values.ravel(),
            )
        ]
        _write_csv(Path(path), ["x", "y", "z", "value"], rows)


def plane_grid(grid: SearchGrid, plane_z: float, steps=None) -> SearchGrid:
    """Fixed-depth slice of ``grid`` (optionally with different x/y steps)."""
    st = grid.steps if steps is None else np.array([steps[0], steps[1], 1.0])
    if st is None:
        raise ConfigError("heatmaps need a lattice grid")
    return SearchGrid([grid.lower[0], grid.lower[1], plane_z], [grid.upper[0], grid.upper[1], plane_z], st)


def render_heatmap(
    x,
    scenario: Scenario,
    estimator: str,
    plane_z: float,
    grid: SearchGrid,
    model_seed=None,
    path=None,
) -> ObjectiveMap:
    """Objective values over the fixed-depth plane ``z = plane_z``."""
    if not 0 <= plane_z <= scenario.bottom_depth:
        raise ConfigError(f"plane z = {plane_z} outside the water column")
    g = grid if grid.lower[2] == grid.upper[2] == plane_z else plane_grid(grid, plane_z)
    values = evaluate_grid(objective_function(estimator, x, scenario, model_seed), g)
    xs, ys, _ = g.axes
    m = ObjectiveMap(estimator, xs, ys, float(plane_z), values.reshape(len(xs), len(ys)))
    if path is not None:
        m.write_csv(path)
    return m


def run_heatmaps(config: ExperimentConfig, out_dir=None) -> dict:
    """One record (trial ``heatmap.trial`` of the first sweep point) mapped by every estimator."""
    value = config.sweep_points[0]
    rec, streams = build_record(config, value, config.heatmap.trial, _noise_samples(config))
    z = config.source[2] if config.heatmap.plane_z is None else config.heatmap.plane_z
    g = plane_grid(config.grid, z, config.heatmap.steps)
    maps = {}
    info = {"plane_z": float(z), "value": value, "trial": config.heatmap.trial, "maps": {}}
    written = []
    for est in config.estimators:
        path = None
        if out_dir is not None:
            Path(out_dir).mkdir(parents=True, exist_ok=True)
            path = Path(out_dir) / f"heatmap_{est}.csv"
            written.append(path.name)
        m = render_heatmap(rec.x, config.scenario, est, z, g, streams["model"], path)
        maps[est] = m
        info["maps"][est] = {"maximizer": list(m.maximizer), "max": float(np.nanmax(m.values))}
    if out_dir is not None:
        _write_json(Path(out_dir) / "heatmap.json", info)
        written.append("heatmap.json")
        _write_json(Path(out_dir) / "manifest.json", manifest("heatmap", config, written))
    return maps


# ------------------------------------------------------- invisibility case


def invisibility_record(
    scenario: Scenario,
    source,
    waveform: Waveform,
    noise: NoiseModel | None = None,
    seed=None,
) -> FrequencyRecord:
    """Two sources mirrored about mid-depth, same waveform, direct paths
    blocked at every receiver. Requires ``kappa_b = 1`` and all receivers at
    depth ``h / 2``; then the reflected arrivals of the two sources cancel."""
    h = scenario.bottom_depth
    if scenario.bottom_reflection != 1.0:
        raise ScenarioError("the cancelling construction needs bottom_reflection = 1")
    if not np.allclose(scenario.receivers[:, 2], h / 2, rtol=0, atol=1e-12 * h):
        raise ScenarioError("the cancelling construction needs every receiver at depth h/2")
    p = as_point(source)
    q = np.array([p[0], p[1], h - p[2]])
    every = range(scenario.n_receivers)
    channels = [perturb_occlusion(physical_channel(scenario, pt), 0.0, every) for pt in (p, q)]
    return synthesize_superposition(scenario, [p, q], channels, waveform, noise, seed)
