"""Reference localizers: known-channel matched field processing (MFP3) and
steered-response power with PHAT weighting over the direct-path delays."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .geometry import Scenario, as_point, ray_distances, steering_from_delays
from .search import LocalizationResult, RefineOptions, SearchGrid, localize


@dataclass(frozen=True)
class MfpChannelModel:
    """How MFP3 predicts the channel at a hypothesized position.

    Coefficients follow the spherical-spreading model with ``bottom_reflection``
    (``None`` = the scenario value). If ``phases`` (3 x L, radians) is given,
    the model keeps only the predicted magnitudes and substitutes these
    phases; this is the imperfect-knowledge variant.
    """

    bottom_reflection: float | None = None
    phases: np.ndarray | None = None

    @classmethod
    def imperfect(cls, L: int, seed=None, bottom_reflection=None) -> "MfpChannelModel":
        rng = np.random.default_rng(seed)
        return cls(bottom_reflection, rng.uniform(0.0, 2 * np.pi, (3, L)))

    def coefficients(self, scenario: Scenario, R: np.ndarray) -> np.ndarray:
        """Predicted (..., 3, L) coefficients from (..., 3, L) path lengths."""
        kb = scenario.bottom_reflection if self.bottom_reflection is None else self.bottom_reflection
        B = np.stack([1 / R[..., 0, :], -1 / R[..., 1, :], kb / R[..., 2, :]], axis=-2)
        if self.phases is None:
            return B.astype(complex)
        return np.abs(B) * np.exp(1j * np.asarray(self.phases))


PERFECT = MfpChannelModel()


def predicted_responses(scenario: Scenario, points, model: MfpChannelModel = PERFECT) -> np.ndarray:
    """Per-bin channel vectors for each candidate, shape (P, L, N)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    R = ray_distances(scenario, pts)
    D = steering_from_delays(scenario, R / scenario.sound_speed)  # (P, L, N, 3)
    B = model.coefficients(scenario, R)  # (P, 3, L)
    return np.matmul(D, np.swapaxes(B, -1, -2)[..., None])[..., 0]


def mfp3_objective_batch(x, scenario: Scenario, points, model: MfpChannelModel = PERFECT) -> np.ndarray:
    """``sum_k |x[k]^H h_k|^2 / ||h_k||^2``; NaN where some ``h_k`` vanishes."""
    x = np.asarray(x)
    H = predicted_responses(scenario, points, model)
    num = np.abs(np.einsum("ln,pln->pn", x.conj(), H)) ** 2
    den = np.einsum("pln,pln->pn", H.conj(), H).real
    bad = np.any(den <= 0, axis=-1)
    val = np.sum(num / np.where(den > 0, den, 1.0), axis=-1)
    val[bad] = np.nan
    return val


def mfp3_objective(x, scenario: Scenario, candidate, model: MfpChannelModel = PERFECT) -> float:
    return float(mfp3_objective_batch(x, scenario, as_point(candidate)[None, :], model)[0])


def mfp3_localize(
    x,
    scenario: Scenario,
    grid: SearchGrid,
    model: MfpChannelModel = PERFECT,
    refine: RefineOptions | None = None,
    keep_map: bool = False,
) -> LocalizationResult:
    x = np.asarray(x)
    grid.check_depth(scenario.bottom_depth)
    return localize(lambda p: mfp3_objective_batch(x, scenario, p, model), grid, refine, keep_map)


def phat_weights(x) -> dict:
    """Unit-modulus cross-spectra ``x_a conj(x_b) / |x_a conj(x_b)|`` for every
    receiver pair a < b; bins with a zero product get weight 0."""
    x = np.asarray(x)
    if x.shape[0] < 2:
        raise ValueError("GCC-PHAT needs at least two receivers")
    out = {}
    for a, b in itertools.combinations(range(x.shape[0]), 2):
        cross = x[a] * x[b].conj()
        mag = np.abs(cross)
        out[(a, b)] = np.where(mag > 0, cross / np.where(mag > 0, mag, 1.0), 0.0)
    return out


def gccphat_objective_batch(x, scenario: Scenario, points, weights: dict | None = None) -> np.ndarray:
    """Steered PHAT power: ``sum_{a<b} Re sum_k w_ab[k] exp(j w_k (tau_a - tau_b))``
    with direct-path delays only."""
    w = phat_weights(x) if weights is None else weights
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    tau = ray_distances(scenario, pts)[:, 0, :] / scenario.sound_speed  # (P, L)
    omega = scenario.omega
    total = np.zeros(len(pts))
    for (a, b), wab in w.items():
        lag = tau[:, a] - tau[:, b]
        total += np.real(np.exp(1j * np.outer(lag, omega)) @ wab)
    return total


def gccphat_objective(x, scenario: Scenario, candidate) -> float:
    return float(gccphat_objective_batch(x, scenario, as_point(candidate)[None, :])[0])


def gccphat_localize(
    x,
    scenario: Scenario,
    grid: SearchGrid,
    refine: RefineOptions | None = None,
    keep_map: bool = False,
) -> LocalizationResult:
    w = phat_weights(x)
    grid.check_depth(scenario.bottom_depth)
    return localize(lambda p: gccphat_objective_batch(x, scenario, p, w), grid, refine, keep_map)
