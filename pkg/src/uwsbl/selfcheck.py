"""Built-in consistency checks run by ``uwsbl selftest``.

* the reduced 3L x 3L eigenvalue agrees with the dense N x N one;
* analytic mean derivatives agree with central finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import random_channel, synthesize
from .crlb import finite_difference_derivatives, mean_derivatives
from .geometry import Scenario
from .sbl import dense_q_matrix, sbl_objective
from .waveform import NoiseModel, make_cn_waveform, make_flat_waveform


@dataclass(frozen=True)
class CheckResult:
    name: str
    worst: float
    tolerance: float
    cases: int

    @property
    def passed(self) -> bool:
        return bool(self.worst <= self.tolerance)


def random_scenario(rng: np.random.Generator, N: int, L: int, h: float | None = None) -> Scenario:
    """Receivers scattered over a few hundred meters in a random-depth channel."""
    h = float(rng.uniform(40, 200)) if h is None else h
    rx = np.column_stack(
        [rng.uniform(-300, 300, L), rng.uniform(-300, 300, L), rng.uniform(0.05 * h, 0.95 * h, L)]
    )
    return Scenario(
        receivers=rx,
        bottom_depth=h,
        sound_speed=float(rng.uniform(1450, 1550)),
        sample_period=float(rng.choice([5e-4, 1e-3])),
        sample_count=N,
        bottom_reflection=float(rng.uniform(0, 1)),
    )


def random_source(rng: np.random.Generator, scenario: Scenario) -> np.ndarray:
    h = scenario.bottom_depth
    return np.array([rng.uniform(-300, 300), rng.uniform(-300, 300), rng.uniform(0.05 * h, 0.95 * h)])


def check_reduction(cases: int = 100, seed: int = 0, n_range=(16, 128), l_range=(2, 6)) -> CheckResult:
    """Relative gap between the reduced and dense largest eigenvalues."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        N = int(rng.integers(n_range[0], n_range[1] + 1))
        L = int(rng.integers(l_range[0], l_range[1] + 1))
        sc = random_scenario(rng, N, L)
        src = random_source(rng, sc)
        s = make_cn_waveform(N, rng)
        rec = synthesize(sc, src, random_channel(L, rng), s, NoiseModel(np.full(L, 0.1)), seed=rng)
        cand = random_source(rng, sc)
        reduced = sbl_objective(rec.x, sc, cand)
        dense = np.linalg.eigvalsh(dense_q_matrix(rec.x, sc, cand))[-1]
        worst = max(worst, abs(reduced - dense) / abs(dense))
    return CheckResult("reduced-vs-dense eigenvalue", worst, 1e-9, cases)


def check_derivatives(cases: int = 100, seed: int = 0, n_range=(8, 40), l_range=(2, 5)) -> CheckResult:
    """Worst relative error of analytic vs finite-difference mean derivatives."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        N = int(rng.integers(n_range[0], n_range[1] + 1))
        L = int(rng.integers(l_range[0], l_range[1] + 1))
        sc = random_scenario(rng, N, L)
        src = random_source(rng, sc)
        B = random_channel(L, rng)
        s = make_flat_waveform(N, rng)
        A = mean_derivatives(sc, src, B, s)
        F = finite_difference_derivatives(sc, src, B, s)
        err = np.linalg.norm(A - F, axis=1) / np.linalg.norm(A, axis=1)
        worst = max(worst, float(err.max()))
    return CheckResult("analytic-vs-finite-difference derivatives", worst, 1e-6, cases)


def run_all(cases: int = 20, seed: int = 0) -> list:
    return [check_reduction(cases, seed), check_derivatives(cases, seed)]
