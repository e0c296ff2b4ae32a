"""Source waveforms (DFT domain) and additive noise."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import erf

WAVEFORM_KINDS = ("flat", "cn", "gaussian-pulse", "external")


class PulseTruncationError(ValueError):
    pass


class NoiseIngestionError(ValueError):
    pass


@dataclass(frozen=True)
class Waveform:
    """Normalized-DFT coefficients of the emitted signal."""

    coefficients: np.ndarray
    kind: str = "external"

    def __post_init__(self):
        s = np.asarray(self.coefficients, dtype=complex).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "coefficients", s)
        if self.kind not in WAVEFORM_KINDS:
            raise ValueError(f"unknown waveform kind {self.kind!r}")

    def __len__(self):
        return self.coefficients.size

    def normalized(self) -> "Waveform":
        s = self.coefficients
        return Waveform(s / np.linalg.norm(s), self.kind)


@dataclass(frozen=True)
class SpectralFlatnessDeviation:
    """Decomposition ``|s|^2 = power * (1 + diagonal)``."""

    diagonal: np.ndarray
    eps_max: float
    power: float


def flatness_deviation(waveform: Waveform) -> SpectralFlatnessDeviation:
    s = waveform.coefficients
    mag2 = np.abs(s) ** 2
    power = float(np.sum(mag2) / s.size)
    diag = mag2 / power - 1.0
    return SpectralFlatnessDeviation(diag, float(np.max(np.abs(diag))), power)


def make_flat_waveform(N: int, seed=None) -> Waveform:
    """Unit-norm waveform with constant spectral magnitude and random phases.

    The phase of bin 0 is the reference and is fixed to zero.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2 * np.pi, N)
    phases[0] = 0.0
    return Waveform(np.exp(1j * phases) / math.sqrt(N), "flat")


def make_cn_waveform(N: int, seed=None) -> Waveform:
    """Standard circularly-symmetric complex normal draw, scaled to unit norm."""
    if N < 1:
        raise ValueError("N must be positive")
    rng = np.random.default_rng(seed)
    s = (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / math.sqrt(2)
    return Waveform(s / np.linalg.norm(s), "cn")


def make_gaussian_pulse(
    N: int,
    sample_period: float,
    center_time: float,
    width: float,
    check_truncation: bool = True,
) -> Waveform:
    """Baseband Gaussian envelope ``exp(-(t - t0)^2 / (2 width^2))`` sampled at
    ``t = n * T_s``, transformed with the unitary DFT and normalized.

    Raises :class:`PulseTruncationError` if more than 1e-6 of the pulse energy
    falls outside the observation window ``[0, (N - 1) T_s]``.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    if check_truncation:
        # |g|^2 is a Gaussian with standard deviation width / sqrt(2)
        sd = width / math.sqrt(2)
        end = (N - 1) * sample_period
        inside = 0.5 * (erf((end - center_time) / (sd * math.sqrt(2)))
                        - erf((0.0 - center_time) / (sd * math.sqrt(2))))
        if 1.0 - inside > 1e-6:
            raise PulseTruncationError(
                f"{1.0 - inside:.3g} of the pulse energy lies outside the window"
            )
    t = np.arange(N) * sample_period
    g = np.exp(-((t - center_time) ** 2) / (2 * width ** 2))
    g = g / np.linalg.norm(g)
    return Waveform(np.fft.fft(g, norm="ortho"), "gaussian-pulse")


def pulse_time_samples(waveform: Waveform) -> np.ndarray:
    return np.fft.ifft(waveform.coefficients, norm="ortho")


# --------------------------------------------------------------------- noise


@dataclass(frozen=True)
class NoiseModel:
    """Per-receiver noise variances and where the noise comes from.

    ``source`` is ``"synthetic-cn"`` or ``"external-samples"``; the latter needs
    ``samples`` (a :class:`NoiseSamples`).
    """

    variances: np.ndarray
    source: str = "synthetic-cn"
    samples: "NoiseSamples | None" = None

    def __post_init__(self):
        v = np.atleast_1d(np.asarray(self.variances, dtype=float))
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("noise variances must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)
        if self.source not in ("synthetic-cn", "external-samples"):
            raise ValueError(f"unknown noise source {self.source!r}")
        if self.source == "external-samples" and self.samples is None:
            raise ValueError("external-samples noise requires a NoiseSamples object")


class NoiseSamples:
    """Recorded complex noise, normalized to unit variance.

    Files hold interleaved real/imaginary float64 values, either raw binary
    (native little-endian) or text/CSV (one or more numbers per line,
    comma or whitespace separated). Successive trials read consecutive
    non-overlapping blocks of ``N * L`` complex samples.
    """

    def __init__(self, samples):
        z = np.asarray(samples, dtype=complex).ravel()
        if z.size == 0:
            raise NoiseIngestionError("empty noise record")
        z = z - z.mean()
        var = np.mean(np.abs(z) ** 2)
        if var == 0:
            raise NoiseIngestionError("noise record has zero variance")
        self.samples = z / math.sqrt(var)

    @classmethod
    def from_file(cls, path) -> "NoiseSamples":
        path = Path(path)
        if path.suffix.lower() in (".csv", ".txt"):
            text = path.read_text().replace(",", " ")
            vals = np.array(text.split(), dtype=float)
        else:
            vals = np.fromfile(path, dtype="<f8")
        if vals.size % 2:
            raise NoiseIngestionError(f"{path}: odd number of values, expected re/im pairs")
        return cls(vals[0::2] + 1j * vals[1::2])

    def n_blocks(self, N: int, L: int) -> int:
        return self.samples.size // (N * L)

    def block(self, trial: int, N: int, L: int) -> np.ndarray:
        """Unit-variance frequency-domain noise for one trial, shape (L, N)."""
        n = N * L
        start = trial * n
        if start + n > self.samples.size:
            raise NoiseIngestionError(
                f"noise record holds {self.samples.size} samples; trial {trial} "
                f"needs samples [{start}, {start + n})"
            )
        v = self.samples[start:start + n].reshape(L, N)
        return np.fft.fft(v, axis=1, norm="ortho")


def draw_noise(model: NoiseModel, N: int, L: int, seed=None, trial: int = 0) -> np.ndarray:
    """Frequency-domain noise realizations, one row per receiver (L, N)."""
    sigma = np.sqrt(np.broadcast_to(model.variances, (L,)))[:, None]
    if model.source == "external-samples":
        return sigma * model.samples.block(trial, N, L)
    rng = np.random.default_rng(seed)
    v = (rng.standard_normal((L, N)) + 1j * rng.standard_normal((L, N))) / math.sqrt(2)
    return sigma * v
