import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwsbl import NoiseModel, Waveform, draw_noise, make_cn_waveform, make_flat_waveform, make_gaussian_pulse
from uwsbl.waveform import NoiseIngestionError, NoiseSamples, PulseTruncationError, flatness_deviation, pulse_time_samples

from oracles import naive_dft


def test_flat_waveform_n4():
    s = make_flat_waveform(4, 0).coefficients
    np.testing.assert_allclose(np.abs(s), 0.5, rtol=1e-15)
    assert s[0] == 0.5


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 512), st.integers(0, 2**32 - 1))
def test_flat_waveform_properties(N, seed):
    w = make_flat_waveform(N, seed)
    s = w.coefficients
    np.testing.assert_allclose(np.abs(s), 1 / math.sqrt(N), rtol=1e-14)
    assert np.angle(s[0]) == 0.0
    assert np.linalg.norm(s) == pytest.approx(1.0, abs=1e-12)
    dev = flatness_deviation(w)
    assert dev.eps_max <= 1e-12
    np.testing.assert_array_equal(make_flat_waveform(N, seed).coefficients, s)


def test_flat_waveform_rejects_short():
    with pytest.raises(ValueError):
        make_flat_waveform(1)


def test_cn_second_moment():
    rng = np.random.default_rng(3)
    N = 8
    acc = np.zeros(N)
    n = 100_000 // N
    for _ in range(n):
        acc += np.abs(make_cn_waveform(N, rng).coefficients) ** 2 * N
    # 1e5 coefficients in total
    assert np.mean(acc / n) == pytest.approx(1.0, abs=0.01)


def test_cn_single_bin_is_unit_phase():
    s = make_cn_waveform(1, 9).coefficients
    assert abs(s[0]) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 256), st.integers(0, 2**32 - 1))
def test_cn_normalized_and_not_flat(N, seed):
    w = make_cn_waveform(N, seed)
    assert np.linalg.norm(w.coefficients) == pytest.approx(1.0, abs=1e-12)
    dev = flatness_deviation(w)
    assert dev.eps_max > 0
    # P_s (I + Sigma_eps) = Diag(|s|^2)
    np.testing.assert_allclose(dev.power * (1 + dev.diagonal), np.abs(w.coefficients) ** 2, rtol=1e-12)
    assert dev.power == pytest.approx(1 / N, rel=1e-12)


def test_pulse_parseval_against_direct_sum():
    N, T = 64, 1e-3
    w = make_gaussian_pulse(N, T, 0.032, 0.004)
    t = pulse_time_samples(w)
    assert np.sum(np.abs(t) ** 2) == pytest.approx(1.0, abs=1e-12)
    assert np.sum(np.abs(w.coefficients) ** 2) == pytest.approx(1.0, abs=1e-12)
    ref = naive_dft(t) / math.sqrt(N)
    np.testing.assert_allclose(w.coefficients, ref, atol=1e-12)


def test_pulse_shift_theorem():
    N, T = 128, 1e-3
    m = 5
    a = make_gaussian_pulse(N, T, 0.050, 0.005).coefficients
    b = make_gaussian_pulse(N, T, 0.050 + m * T, 0.005).coefficients
    omega = 2 * np.pi * np.arange(N) / (N * T)
    np.testing.assert_allclose(b, a * np.exp(-1j * omega * m * T), atol=1e-10)


def test_wide_pulse_concentrates_at_dc():
    N, T = 64, 1e-3
    w = make_gaussian_pulse(N, T, 0.0315, 10.0, check_truncation=False)
    s = np.abs(w.coefficients) ** 2
    assert s[0] > 0.999


def test_pulse_truncation_error():
    with pytest.raises(PulseTruncationError):
        make_gaussian_pulse(64, 1e-3, 0.002, 0.004)
    with pytest.raises(ValueError):
        make_gaussian_pulse(64, 1e-3, 0.03, 0.0)


def test_zero_variance_noise_is_zero():
    v = draw_noise(NoiseModel([0.0, 0.0]), 16, 2, seed=1)
    assert v.shape == (2, 16)
    assert not np.any(v)


def test_noise_statistics():
    v = draw_noise(NoiseModel([0.1, 0.1]), 50_000, 2, seed=4)
    z = v.ravel()
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.1, abs=0.002)
    assert abs(np.corrcoef(z.real, z.imag)[0, 1]) < 0.01
    assert abs(np.corrcoef(v[0].real, v[1].real)[0, 1]) < 0.01
    c = np.vdot(v[0], v[1]) / np.sqrt(np.vdot(v[0], v[0]).real * np.vdot(v[1], v[1]).real)
    assert abs(c) < 0.01


def test_noise_reproducible():
    m = NoiseModel([0.3, 0.1, 0.2])
    np.testing.assert_array_equal(draw_noise(m, 8, 3, seed=11), draw_noise(m, 8, 3, seed=11))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel([-1.0])
    with pytest.raises(ValueError):
        NoiseModel([1.0], source="external-samples")
    with pytest.raises(ValueError):
        Waveform([1, 2], kind="chirp")


@pytest.mark.parametrize("suffix", [".bin", ".csv"])
def test_external_noise_file(tmp_path, suffix):
    rng = np.random.default_rng(0)
    vals = rng.normal(3.0, 2.0, 2 * 200)
    path = tmp_path / f"noise{suffix}"
    if suffix == ".bin":
        vals.astype("<f8").tofile(path)
    else:
        path.write_text("\n".join(f"{float(a)!r},{float(b)!r}" for a, b in zip(vals[0::2], vals[1::2])))
    ns = NoiseSamples.from_file(path)
    assert np.mean(np.abs(ns.samples) ** 2) == pytest.approx(1.0, rel=1e-12)
    assert abs(ns.samples.mean()) < 1e-12
    assert ns.n_blocks(10, 4) == 5
    m = NoiseModel([0.25] * 4, "external-samples", ns)
    v0 = draw_noise(m, 10, 4, trial=0)
    v1 = draw_noise(m, 10, 4, trial=1)
    assert not np.allclose(v0, v1)
    # block 0 is the first 40 samples, transformed per receiver and scaled by sigma
    ref = 0.5 * np.fft.fft(ns.samples[:40].reshape(4, 10), axis=1, norm="ortho")
    np.testing.assert_allclose(v0, ref, rtol=1e-13)
    with pytest.raises(NoiseIngestionError):
        draw_noise(m, 10, 4, trial=5)


def test_external_noise_odd_count(tmp_path):
    path = tmp_path / "odd.txt"
    path.write_text("1 2 3")
    with pytest.raises(NoiseIngestionError):
        NoiseSamples.from_file(path)
