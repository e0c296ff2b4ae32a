"""TOML experiment configuration.

Example::

    name = "shallow-line-array"
    seed = 1
    trials = 100

    [scenario]
    receivers = [[150, -250, 10], [50, -250, 15], [-50, -250, 20], [-150, -250, 25]]
    bottom_depth = 100.0
    sound_speed = 1535.0
    sample_period = 0.001
    sample_count = 100
    bottom_reflection = 0.85

    [source]
    position = [100.5976, 250.5837, 30.1131]

    [waveform]
    kind = "cn"          # flat | cn | gaussian-pulse
    redraw = true        # new draw per trial; false keeps the draw from `seed`

    [channel]
    kind = "physical"    # physical | random
    mode = "cn"          # random only: cn | perturbed
    seed = 0

    [noise]
    convention = "B"     # A: sigma2 = ||s||^2/SNR; B: sigma2_l = P_s ||b_l||^2 / SNR
    snr_db = 10.0
    # file = "noise.bin"  # interleaved re/im float64 (binary or .csv/.txt)

    [sweep]
    variable = "snr"     # snr | epsilon | beta | none
    values = [-10, 0, 10, 20]
    occluded = [2, 3]    # 1-based receiver numbers, beta sweep only

    [estimators]
    names = ["sbl", "mfp3", "gccphat"]   # also "mfp3-imperfect"

    [grid]
    lower = [70.0, 220.0, 0.0]
    upper = [130.0, 280.0, 100.0]
    steps = [2.5, 5.0, 5.0]

    [refine]
    enabled = true
    xatol = 1e-6
    max_iter = 200
    n_starts = 1

    [crlb]
    confidence = 0.95
    planar = false

    [heatmap]
    plane_z = 30.1131
    steps = [0.5, 0.5]
    trial = 0
"""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from .experiments import (
    ChannelSpec,
    ConfigError,
    ExperimentConfig,
    HeatmapSpec,
    NoiseSpec,
    SweepSpec,
    WaveformSpec,
)
from .geometry import Scenario, ScenarioError
from .search import RefineOptions, SearchGrid

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_SECTIONS = {
    "": {"name", "seed", "trials", "threads", "scenario", "source", "waveform", "channel", "noise",
         "sweep", "estimators", "grid", "refine", "crlb", "heatmap"},
    "scenario": {"receivers", "bottom_depth", "sound_speed", "sample_period", "sample_count",
                 "bottom_reflection"},
    "source": {"position"},
    "waveform": {"kind", "redraw", "seed", "center_time", "width"},
    "channel": {"kind", "mode", "seed"},
    "noise": {"convention", "snr_db", "file"},
    "sweep": {"variable", "values", "occluded"},
    "estimators": {"names"},
    "grid": {"lower", "upper", "steps"},
    "refine": {"enabled", "xatol", "fatol", "max_iter", "n_starts", "initial_step"},
    "crlb": {"confidence", "planar"},
    "heatmap": {"plane_z", "steps", "trial"},
}


def parse_toml(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        # the decoder message carries "(at line L, column C)"
        raise ConfigError(f"{source}: malformed config: {exc}") from exc


def _check_keys(data: dict, section: str) -> None:
    unknown = set(data) - _SECTIONS[section]
    if unknown:
        where = f"[{section}]" if section else "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _section(data: dict, name: str, required: bool = False) -> dict:
    sec = data.get(name)
    if sec is None:
        if required:
            raise ConfigError(f"missing [{name}] section")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    _check_keys(sec, name)
    return sec


def _get(sec: dict, key: str, where: str, kind=float, default=None, required=False):
    if key not in sec:
        if required:
            raise ConfigError(f"missing {where}.{key}")
        return default
    val = sec[key]
    try:
        if kind is bool:
            if not isinstance(val, bool):
                raise TypeError
            return val
        if kind is int and (isinstance(val, bool) or int(val) != val):
            raise TypeError
        return kind(val)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected {kind.__name__}, got {val!r}") from None


def _vector(sec: dict, key: str, where: str, length: int | None = None, required=True):
    if key not in sec:
        if required:
            raise ConfigError(f"missing {where}.{key}")
        return None
    try:
        arr = np.asarray(sec[key], dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}.{key}: expected numbers, got {sec[key]!r}") from None
    if length is not None and arr.shape != (length,):
        raise ConfigError(f"{where}.{key}: expected {length} numbers, got {sec[key]!r}")
    return arr


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a parsed TOML document and build an :class:`ExperimentConfig`."""
    _check_keys(data, "")
    sc = _section(data, "scenario", required=True)
    rx = sc.get("receivers")
    if rx is None:
        raise ConfigError("missing scenario.receivers")
    try:
        scenario = Scenario(
            receivers=np.asarray(rx, dtype=float),
            bottom_depth=_get(sc, "bottom_depth", "scenario", required=True),
            sound_speed=_get(sc, "sound_speed", "scenario", required=True),
            sample_period=_get(sc, "sample_period", "scenario", required=True),
            sample_count=_get(sc, "sample_count", "scenario", int, required=True),
            bottom_reflection=_get(sc, "bottom_reflection", "scenario", default=1.0),
        )
    except (ScenarioError, ValueError) as exc:
        raise ConfigError(f"[scenario]: {exc}") from exc

    src = _vector(_section(data, "source", required=True), "position", "source", 3)

    wf = _section(data, "waveform")
    waveform = WaveformSpec(
        kind=_get(wf, "kind", "waveform", str, "cn"),
        redraw=_get(wf, "redraw", "waveform", bool, True),
        seed=_get(wf, "seed", "waveform", int, 0),
        center_time=_get(wf, "center_time", "waveform"),
        width=_get(wf, "width", "waveform"),
    )
    ch = _section(data, "channel")
    channel = ChannelSpec(
        kind=_get(ch, "kind", "channel", str, "physical"),
        mode=_get(ch, "mode", "channel", str, "cn"),
        seed=_get(ch, "seed", "channel", int, 0),
    )
    nz = _section(data, "noise")
    nfile = _get(nz, "file", "noise", str)
    if nfile is not None and base_dir is not None and not Path(nfile).is_absolute():
        nfile = str(Path(base_dir) / nfile)
    noise = NoiseSpec(
        convention=_get(nz, "convention", "noise", str, "B"),
        snr_db=_get(nz, "snr_db", "noise", float, 10.0),
        file=nfile,
    )
    sw = _section(data, "sweep")
    values = _vector(sw, "values", "sweep", required=False)
    occluded = sw.get("occluded", [])
    if any(isinstance(i, bool) or int(i) != i for i in occluded):
        raise ConfigError(f"sweep.occluded: expected receiver numbers, got {occluded!r}")
    sweep = SweepSpec(
        variable=_get(sw, "variable", "sweep", str, "none"),
        values=() if values is None else tuple(float(v) for v in values),
        occluded=tuple(int(i) - 1 for i in occluded),
    )
    est = _section(data, "estimators")
    names = est.get("names", ["sbl"])
    if not isinstance(names, list) or not all(isinstance(n, str) for n in names):
        raise ConfigError("estimators.names must be a list of strings")

    gr = _section(data, "grid", required=True)
    try:
        grid = SearchGrid(
            _vector(gr, "lower", "grid", 3), _vector(gr, "upper", "grid", 3), _vector(gr, "steps", "grid", 3)
        )
    except ValueError as exc:
        raise ConfigError(f"[grid]: {exc}") from exc

    rf = _section(data, "refine")
    refine = RefineOptions(
        enabled=_get(rf, "enabled", "refine", bool, True),
        xatol=_get(rf, "xatol", "refine", float, 1e-6),
        fatol=_get(rf, "fatol", "refine", float, 0.0),
        max_iter=_get(rf, "max_iter", "refine", int, 200),
        n_starts=_get(rf, "n_starts", "refine", int, 1),
        initial_step=_get(rf, "initial_step", "refine"),
    )
    if refine.max_iter < 1 or refine.n_starts < 1 or refine.xatol <= 0:
        raise ConfigError("refine: max_iter and n_starts must be >= 1 and xatol > 0")
    cr = _section(data, "crlb")
    hm = _section(data, "heatmap")
    hsteps = _vector(hm, "steps", "heatmap", 2, required=False)
    heatmap = HeatmapSpec(
        plane_z=_get(hm, "plane_z", "heatmap"),
        steps=None if hsteps is None else tuple(float(v) for v in hsteps),
        trial=_get(hm, "trial", "heatmap", int, 0),
    )
    return ExperimentConfig(
        name=_get(data, "name", "config", str, "experiment"),
        scenario=scenario,
        source=src,
        grid=grid,
        waveform=waveform,
        channel=channel,
        noise=noise,
        sweep=sweep,
        estimators=tuple(names),
        refine=refine,
        trials=_get(data, "trials", "config", int, 100),
        seed=_get(data, "seed", "config", int, 0),
        confidence=_get(cr, "confidence", "crlb", float, 0.95),
        planar=_get(cr, "planar", "crlb", bool, False),
        heatmap=heatmap,
        threads=_get(data, "threads", "config", int, 1),
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(parse_toml(text, str(path)), path.parent)
