import csv
import json
import math
from dataclasses import replace

import numpy as np
import pytest

from uwsbl import NoiseModel, Scenario, ScenarioError, make_cn_waveform, make_flat_waveform, physical_channel, synthesize
from uwsbl.cli import main
from uwsbl.config import config_from_dict, load_config, parse_toml
from uwsbl.experiments import (
    ConfigError,
    SweepSpec,
    build_record,
    invisibility_record,
    miss_distance,
    render_heatmap,
    rms_with_stderr,
    run_estimator,
    run_heatmaps,
    run_mismatch_sweep,
    run_occlusion_sweep,
    run_snr_sweep,
    run_trials,
)
from uwsbl.search import SearchGrid

from conftest import CONFIGS, LINE_SOURCE, line_array_scenario

SMALL = """
name = "small"
seed = 3
trials = 3

[scenario]
receivers = [[150, -250, 10], [50, -250, 15], [-50, -250, 20], [-150, -250, 25]]
bottom_depth = 100.0
sound_speed = 1535.0
sample_period = 0.001
sample_count = 32
bottom_reflection = 0.85

[source]
position = [100.5976, 250.5837, 30.1131]

[waveform]
kind = "cn"

[noise]
convention = "B"
snr_db = 10.0

[sweep]
variable = "{variable}"
values = {values}
{extra}

[estimators]
names = ["sbl", "mfp3", "gccphat"]

[grid]
lower = [90.0, 240.0, 20.0]
upper = [110.0, 260.0, 40.0]
steps = [5.0, 5.0, 5.0]

[refine]
max_iter = 40
"""


def small_text(variable="snr", values="[0.0, 10.0]", extra=""):
    return SMALL.format(variable=variable, values=values, extra=extra)


def small_config(**kw):
    return config_from_dict(parse_toml(small_text(**kw)))


@pytest.fixture
def small_file(tmp_path):
    path = tmp_path / "small.toml"
    path.write_text(small_text())
    return path


def test_malformed_config_reports_line():
    with pytest.raises(ConfigError, match="line"):
        parse_toml("name = 'x'\n[scenario\nbottom_depth = 1\n")


@pytest.mark.parametrize(
    "old, new",
    [
        ("sample_count = 32", "sample_count = 32\nsample_cont = 4"),
        ("position = [100.5976, 250.5837, 30.1131]", "position = [100.5976, 250.5837, 130.0]"),
        ("sound_speed = 1535.0", "sound_speed = -1.0"),
        ('names = ["sbl", "mfp3", "gccphat"]', 'names = ["music"]'),
        ("upper = [110.0, 260.0, 40.0]", "upper = [110.0, 260.0, 140.0]"),
        ("steps = [5.0, 5.0, 5.0]", "steps = [5.0, 5.0]"),
    ],
)
def test_invalid_config_rejected(old, new):
    text = small_text()
    assert old in text
    with pytest.raises(ConfigError):
        config_from_dict(parse_toml(text.replace(old, new)))


def test_beta_sweep_validation():
    with pytest.raises(ConfigError):
        small_config(variable="beta", values="[0.0, 1.0]", extra="occluded = [5]")
    with pytest.raises(ConfigError):
        small_config(variable="epsilon", values="[0.0, 1.5]")
    cfg = small_config(variable="beta", values="[0.0]", extra="occluded = [2, 3]")
    assert cfg.sweep.occluded == (1, 2)


def test_shipped_configs_load():
    names = sorted(p.name for p in CONFIGS.glob("*.toml"))
    assert len(names) >= 5
    for p in CONFIGS.glob("*.toml"):
        load_config(p)


def test_cli_exit_codes(tmp_path, small_file, capsys):
    out = tmp_path / "out"
    assert main(["snr-sweep", "--config", str(small_file), "--out", str(out), "--trials", "1"]) == 0
    assert {"summary.csv", "trials.csv", "trials.json", "manifest.json"} <= {p.name for p in out.iterdir()}
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 3 and man["config"]["trials"] == 1 and "numpy" in man["versions"]

    bad = tmp_path / "bad.toml"
    bad.write_text(small_text().replace("30.1131]", "130.0]"))
    assert main(["snr-sweep", "--config", str(bad), "--out", str(out)]) == 2
    assert "configuration error" in capsys.readouterr().err

    assert main(["mismatch-sweep", "--config", str(small_file), "--out", str(out)]) == 2
    missing = tmp_path / "absent.bin"
    assert main(["snr-sweep", "--config", str(small_file), "--out", str(out), "--noise-file", str(missing)]) == 1


def test_cli_selftest():
    assert main(["selftest", "--cases", "3"]) == 0


def test_in_process_runs_are_byte_identical(tmp_path):
    cfg = replace(small_config(), trials=2)
    for name in ("a", "b"):
        run_snr_sweep(cfg).write(tmp_path / name)
    for f in ("summary.csv", "trials.csv", "trials.json", "manifest.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_threads_do_not_change_results():
    cfg = replace(small_config(), trials=2, estimators=("sbl",))
    assert run_trials(cfg) == run_trials(replace(cfg, threads=2))


def test_neutral_perturbations_reproduce_unperturbed_records():
    base = small_config(variable="none", values="[]")
    eps = small_config(variable="epsilon", values="[0.0]")
    beta = small_config(variable="beta", values="[1.0]", extra="occluded = [2, 3]")
    for t in range(3):
        x0 = build_record(base, None, t)[0].x
        np.testing.assert_array_equal(build_record(eps, 0.0, t)[0].x, x0)
        np.testing.assert_array_equal(build_record(beta, 1.0, t)[0].x, x0)
    a = run_mismatch_sweep(replace(eps, trials=2, estimators=("sbl",)))
    b = run_occlusion_sweep(replace(beta, trials=2, estimators=("sbl",)))
    assert [r.estimate for r in a.trials] == [r.estimate for r in b.trials]


def test_summary_rms_recomputed_from_trials(tmp_path):
    rep = run_snr_sweep(replace(small_config(), trials=3))
    rep.write(tmp_path)
    trials = json.loads((tmp_path / "trials.json").read_text())
    with open(tmp_path / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    for row in rows:
        misses = [t["miss"] for t in trials if t["estimator"] == row["estimator"] and t["value"] == float(row["value"])]
        assert len(misses) == 3
        assert float(row["rms"]) == pytest.approx(math.sqrt(sum(m * m for m in misses) / 3), rel=1e-12)


def test_rms_and_standard_error():
    m = np.array([1.0, 2.0, 2.0, 3.0])
    rms, se = rms_with_stderr(m)
    assert rms == pytest.approx(math.sqrt(18 / 4))
    sq = m ** 2
    assert se == pytest.approx(np.std(sq, ddof=1) / 2 / (2 * rms))
    assert math.isnan(rms_with_stderr([])[0])
    assert rms_with_stderr([2.0]) == (2.0, 0.0)
    assert miss_distance([3, 4, 12], [0, 0, 0]) == 13.0
    assert miss_distance([3, 4, 12], [0, 0, 0], planar=True) == 5.0


def test_estimators_receive_no_truth():
    import inspect

    params = inspect.signature(run_estimator).parameters
    assert not {"source", "truth", "position"} & set(params)


def noiseless_line_record(kind=make_flat_waveform):
    sc = line_array_scenario(N=64)
    return sc, synthesize(sc, LINE_SOURCE, physical_channel(sc, LINE_SOURCE), kind(64, 2))


@pytest.mark.parametrize("est", ["sbl", "mfp3"])
def test_noiseless_heatmap_peaks_at_truth_and_ignores_scale(est):
    sc, rec = noiseless_line_record()
    grid = SearchGrid.around(LINE_SOURCE, [10, 10, 0], [1, 1, 1])
    m = render_heatmap(rec.x, sc, est, LINE_SOURCE[2], grid)
    np.testing.assert_allclose(m.maximizer, LINE_SOURCE, atol=1e-9)
    m2 = render_heatmap((0.3 + 2j) * rec.x, sc, est, LINE_SOURCE[2], grid)
    assert m2.maximizer == m.maximizer


def test_imperfect_model_heatmap_displaced():
    sc, rec = noiseless_line_record()
    grid = SearchGrid.around(LINE_SOURCE, [20, 20, 0], [1, 1, 1])
    m = render_heatmap(rec.x, sc, "mfp3-imperfect", LINE_SOURCE[2], grid, model_seed=5)
    assert np.linalg.norm(np.subtract(m.maximizer, LINE_SOURCE)) > 1.0


def test_heatmap_rejects_plane_outside_water():
    sc, rec = noiseless_line_record()
    grid = SearchGrid.around(LINE_SOURCE, [4, 4, 0], [1, 1, 1])
    with pytest.raises(ConfigError):
        render_heatmap(rec.x, sc, "sbl", 120.0, grid)


def test_run_heatmaps_writes_maps(tmp_path):
    cfg = small_config(variable="none", values="[]")
    maps = run_heatmaps(cfg, tmp_path)
    assert set(maps) == {"sbl", "mfp3", "gccphat"}
    info = json.loads((tmp_path / "heatmap.json").read_text())
    assert info["plane_z"] == pytest.approx(30.1131)
    with open(tmp_path / "heatmap_sbl.csv") as fh:
        assert len(list(csv.DictReader(fh))) == maps["sbl"].values.size


def invisibility_scenario(kappa_b=1.0, depth=50.0):
    rx = [[150, -250, depth], [50, -250, depth], [-50, -250, depth], [-150, -250, depth]]
    return Scenario(rx, 100.0, 1535.0, 1e-3, 64, kappa_b)


@pytest.mark.parametrize("make", [make_flat_waveform, make_cn_waveform])
def test_invisibility_record_cancels(make):
    sc = invisibility_scenario()
    rec = invisibility_record(sc, LINE_SOURCE, make(64, 1))
    assert np.max(np.abs(rec.x)) <= 1e-10


def test_invisibility_requires_construction():
    with pytest.raises(ScenarioError):
        invisibility_record(invisibility_scenario(kappa_b=0.9), LINE_SOURCE, make_flat_waveform(64, 1))
    with pytest.raises(ScenarioError):
        invisibility_record(invisibility_scenario(depth=40.0), LINE_SOURCE, make_flat_waveform(64, 1))


def test_invisibility_with_noise_is_pure_noise():
    sc = invisibility_scenario()
    noise = NoiseModel([0.1] * 4)
    rec = invisibility_record(sc, LINE_SOURCE, make_flat_waveform(64, 1), noise, seed=9)
    from uwsbl import draw_noise

    np.testing.assert_allclose(rec.x, draw_noise(noise, 64, 4, seed=9), atol=1e-10)


def test_external_noise_file_run(tmp_path):
    rng = np.random.default_rng(1)
    path = tmp_path / "noise.bin"
    rng.normal(size=2 * 32 * 4 * 3).astype("<f8").tofile(path)
    cfg = replace(small_config(), trials=3)
    from uwsbl.experiments import NoiseSpec, _noise_samples

    ext = replace(cfg, noise=NoiseSpec("B", 10.0, str(path)))
    a = build_record(cfg, 10.0, 1)[0].x
    b = build_record(ext, 10.0, 1, _noise_samples(ext))[0].x
    assert np.max(np.abs(a - b)) > 0.1 * np.max(np.abs(a))
    rep = run_snr_sweep(replace(ext, estimators=("sbl",)))
    assert all(not r.failed for r in rep.trials)
    too_many = replace(ext, trials=4, estimators=("sbl",))
    rep = run_snr_sweep(too_many)
    assert sum(r.failed for r in rep.trials) == 2  # trial 3 at both SNR points has no samples left
