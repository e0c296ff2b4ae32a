"""Attenuation coefficients, perturbation models and forward synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import Scenario, as_point, ray_geometry, steering_matrices
from .waveform import NoiseModel, Waveform, draw_noise


@dataclass(frozen=True)
class ChannelCoefficients:
    """3 x L complex attenuation matrix; column l is receiver l.

    ``draws`` keeps any random quantities used to build the matrix (perturbation
    magnitudes and phases) so that a trial can be audited afterwards.
    """

    B: np.ndarray
    draws: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=complex)
        if B.ndim != 2 or B.shape[0] != 3:
            raise ValueError(f"B must be 3 x L, got {B.shape}")
        if not np.all(np.isfinite(B)):
            raise ValueError("channel coefficients must be finite")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def n_receivers(self) -> int:
        return self.B.shape[1]


def _coeffs(B) -> np.ndarray:
    return B.B if isinstance(B, ChannelCoefficients) else np.asarray(B, dtype=complex)


def physical_channel(scenario: Scenario, source, bottom_reflection=None) -> ChannelCoefficients:
    """Spherical-spreading coefficients: ``1/R1``, ``-1/R2``, ``kappa_b/R3``."""
    kb = scenario.bottom_reflection if bottom_reflection is None else bottom_reflection
    R = ray_geometry(scenario, source).distances
    return ChannelCoefficients(np.stack([1 / R[0], -1 / R[1], kb / R[2]]).astype(complex))


def random_channel(L: int, seed=None, mode: str = "cn") -> ChannelCoefficients:
    """Random coefficients with unit second moment.

    ``mode="cn"`` draws i.i.d. CN(0, 1). ``mode="perturbed"`` draws
    ``u * (1 + w)`` with ``u`` a uniform unit phasor and ``w ~ CN(0, 0.01)``,
    rescaled by ``1/sqrt(1.01)`` so that ``E|b|^2 = 1``.
    """
    if L < 1:
        raise ValueError("L must be positive")
    rng = np.random.default_rng(seed)
    if mode == "cn":
        B = (rng.standard_normal((3, L)) + 1j * rng.standard_normal((3, L))) / math.sqrt(2)
    elif mode == "perturbed":
        u = np.exp(2j * np.pi * rng.uniform(size=(3, L)))
        w = 0.1 * (rng.standard_normal((3, L)) + 1j * rng.standard_normal((3, L))) / math.sqrt(2)
        B = u * (1 + w) / math.sqrt(1.01)
    else:
        raise ValueError(f"unknown random channel mode {mode!r}")
    return ChannelCoefficients(B, {"mode": mode})


def perturb_mismatch(B, eps: float, seed=None) -> ChannelCoefficients:
    """``b(eps) = (1 - eps * gamma) * b * exp(2j pi eps phi)``,
    ``gamma ~ U(0, 0.5)``, ``phi ~ U(0, 1)`` drawn per entry."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    B = _coeffs(B)
    rng = np.random.default_rng(seed)
    gamma = rng.uniform(0.0, 0.5, B.shape)
    phi = rng.uniform(0.0, 1.0, B.shape)
    out = (1 - eps * gamma) * B * np.exp(2j * np.pi * eps * phi)
    return ChannelCoefficients(out, {"eps": eps, "gamma": gamma, "phi": phi})


def perturb_occlusion(B, beta: float, occluded, seed=None) -> ChannelCoefficients:
    """Attenuate the direct-path coefficient of the ``occluded`` receivers
    (0-based indices): ``b_1l(beta) = beta * b_1l * exp(2j pi (1 - beta) phi_l)``."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"beta must lie in [0, 1], got {beta}")
    B = _coeffs(B)
    L = B.shape[1]
    idx = np.asarray(sorted(set(int(i) for i in occluded)), dtype=int)
    if idx.size and (idx.min() < 0 or idx.max() >= L):
        raise IndexError(f"occluded receiver indices {idx.tolist()} out of range for L={L}")
    rng = np.random.default_rng(seed)
    phi = rng.uniform(0.0, 1.0, L)
    out = B.copy()
    out[0, idx] = beta * B[0, idx] * np.exp(2j * np.pi * (1 - beta) * phi[idx])
    return ChannelCoefficients(out, {"beta": beta, "occluded": idx.tolist(), "phi": phi})


def transfer_functions(scenario: Scenario, source, B) -> np.ndarray:
    """Per-bin channel responses ``D_l @ b_l`` as an (L, N) array."""
    D = steering_matrices(scenario, source)
    return np.einsum("lnr,rl->ln", D, _coeffs(B))


def noiseless_signal(scenario: Scenario, source, B, waveform) -> np.ndarray:
    s = waveform.coefficients if isinstance(waveform, Waveform) else np.asarray(waveform)
    B = _coeffs(B)
    if s.size != scenario.sample_count:
        raise ValueError(f"waveform has {s.size} bins, scenario expects {scenario.sample_count}")
    if B.shape[1] != scenario.n_receivers:
        raise ValueError(f"B has {B.shape[1]} columns, scenario has {scenario.n_receivers} receivers")
    return s[None, :] * transfer_functions(scenario, source, B)


@dataclass(frozen=True)
class FrequencyRecord:
    """Synthesized measurements plus the ground truth that generated them.

    Estimators are only ever handed ``record.x``; everything else is kept for
    scoring and auditing.
    """

    x: np.ndarray  # (L, N)
    scenario: Scenario
    source: np.ndarray | list
    channel: ChannelCoefficients | list
    waveform: Waveform
    noise: NoiseModel | None
    noise_realization: np.ndarray | None = None

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.x) ** 2))


def synthesize(
    scenario: Scenario,
    source,
    B,
    waveform: Waveform,
    noise: NoiseModel | None = None,
    seed=None,
    trial: int = 0,
) -> FrequencyRecord:
    """``x_l[k] = s[k] * (D_l b_l)[k] + v_l[k]`` for one source."""
    return synthesize_superposition(scenario, [source], [B], waveform, noise, seed, trial)


def synthesize_superposition(
    scenario: Scenario,
    sources,
    channels,
    waveform: Waveform,
    noise: NoiseModel | None = None,
    seed=None,
    trial: int = 0,
) -> FrequencyRecord:
    """Several sources emitting the same waveform, each through its own channel."""
    if len(sources) != len(channels):
        raise ValueError("one channel per source required")
    channels = [B if isinstance(B, ChannelCoefficients) else ChannelCoefficients(B) for B in channels]
    x = np.zeros((scenario.n_receivers, scenario.sample_count), dtype=complex)
    for p, B in zip(sources, channels):
        x += noiseless_signal(scenario, p, B, waveform)
    v = None
    if noise is not None:
        v = draw_noise(noise, scenario.sample_count, scenario.n_receivers, seed, trial)
        x = x + v
    x.setflags(write=False)
    single = len(sources) == 1
    return FrequencyRecord(
        x=x,
        scenario=scenario,
        source=as_point(sources[0]) if single else [as_point(p) for p in sources],
        channel=(channels[0] if single else list(channels)),
        waveform=waveform,
        noise=noise,
        noise_realization=v,
    )
