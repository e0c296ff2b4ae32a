"""Deterministic-signal Cramer-Rao bound for a spectrally flat waveform.

Unknowns, in this order::

    theta = [x, y, z,                       # source position (3)
             phi[1], ..., phi[N-1],         # waveform phases, bin 0 is the reference (N-1)
             Re b_11, Re b_21, ..., Re b_3L,  # column-major vec of Re(B) (3L)
             Im b_11, ..., Im b_3L,         # (3L)
             sigma2_1, ..., sigma2_L]       # noise variances (L)

The mean of the stacked measurements ``[x_1; ...; x_L]`` is ``H s`` with
``H_l = Diag(D_l b_l)`` and ``s[k] = exp(j phi[k]) / sqrt(N)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2

from .channel import ChannelCoefficients, noiseless_signal
from .geometry import Scenario, as_point, delay_gradients, steering_matrices
from .waveform import Waveform, flatness_deviation

COND_LIMIT = 1e12
FLAT_TOL = 1e-9


class UnsupportedWaveformError(ValueError):
    """The bound is only derived for spectrally flat waveforms."""


class NonIdentifiableError(np.linalg.LinAlgError):
    """Singular or ill-conditioned Fisher information."""


def parameter_count(N: int, L: int) -> int:
    return 3 + (N - 1) + 6 * L + L


def signal_parameter_count(N: int, L: int) -> int:
    return 3 + (N - 1) + 6 * L


def parameter_names(N: int, L: int) -> list[str]:
    names = ["x", "y", "z"] + [f"phi[{k}]" for k in range(1, N)]
    for part in ("re", "im"):
        names += [f"{part}_b[{r},{l}]" for l in range(L) for r in range(3)]
    return names + [f"sigma2[{l}]" for l in range(L)]


def _check_flat(waveform: Waveform) -> np.ndarray:
    s = waveform.coefficients
    dev = flatness_deviation(waveform)
    if dev.eps_max > FLAT_TOL:
        raise UnsupportedWaveformError(
            f"waveform is not spectrally flat (eps_max = {dev.eps_max:.3g})"
        )
    return s


def _coeffs(B) -> np.ndarray:
    return B.B if isinstance(B, ChannelCoefficients) else np.asarray(B, dtype=complex)


def flat_waveform_from_phases(phases, N: int) -> Waveform:
    """Unit-norm flat waveform from the N-1 free phases (bin 0 phase is zero)."""
    phi = np.concatenate([[0.0], np.asarray(phases, dtype=float)])
    return Waveform(np.exp(1j * phi) / np.sqrt(N), "flat")


def mean_vector(scenario: Scenario, source, B, waveform) -> np.ndarray:
    """Stacked noiseless measurements ``H s`` (length N L)."""
    return noiseless_signal(scenario, source, B, waveform).ravel()


def mean_from_theta(scenario: Scenario, theta) -> np.ndarray:
    """``H s`` as a function of the signal parameters (noise entries ignored)."""
    N, L = scenario.sample_count, scenario.n_receivers
    theta = np.asarray(theta, dtype=float)
    p = theta[:3]
    phi = theta[3:3 + N - 1]
    off = 3 + N - 1
    re = theta[off:off + 3 * L].reshape(L, 3).T
    im = theta[off + 3 * L:off + 6 * L].reshape(L, 3).T
    return mean_vector(scenario, p, re + 1j * im, flat_waveform_from_phases(phi, N))


def theta_vector(scenario: Scenario, source, B, waveform, variances=None) -> np.ndarray:
    s = _check_flat(waveform)
    B = _coeffs(B)
    L = B.shape[1]
    var = np.zeros(L) if variances is None else np.broadcast_to(np.asarray(variances, float), (L,))
    return np.concatenate(
        [as_point(source), np.angle(s[1:]), B.real.T.ravel(), B.imag.T.ravel(), var]
    )


def mean_derivatives(scenario: Scenario, source, B, waveform) -> np.ndarray:
    """Analytic derivatives of ``H s`` w.r.t. every signal parameter.

    :returns: complex array of shape (K_signal, N L); row i is d(Hs)/d theta_i
    """
    s = _check_flat(waveform)
    B = _coeffs(B)
    N, L = scenario.sample_count, scenario.n_receivers
    D = steering_matrices(scenario, source)  # (L, N, 3)
    h = np.einsum("lnr,rl->ln", D, B)  # per-bin channel, (L, N)
    omega = scenario.omega
    grad_tau = delay_gradients(scenario, source)  # (3 coords, 3 rays, L)

    rows = np.zeros((signal_parameter_count(N, L), L, N), dtype=complex)
    # d D[k, r] / d p_i = -j w_k D[k, r] d tau_r / d p_i
    for i in range(3):
        dh = np.einsum("lnr,rl->ln", -1j * omega[None, :, None] * D * grad_tau[i].T[:, None, :], B)
        rows[i] = dh * s
    # d s[k] / d phi[k] = j s[k]
    for k in range(1, N):
        rows[3 + k - 1, :, k] = 1j * s[k] * h[:, k]
    off = 3 + N - 1
    for l in range(L):
        for r in range(3):
            col = D[l, :, r] * s
            rows[off + 3 * l + r, l] = col
            rows[off + 3 * L + 3 * l + r, l] = 1j * col
    return rows.reshape(len(rows), L * N)


def finite_difference_derivatives(
    scenario: Scenario,
    source,
    B,
    waveform,
    position_step: float = 1e-4,
    phase_step: float = 1e-6,
    coeff_step: float = 1e-6,
) -> np.ndarray:
    """Central-difference counterpart of :func:`mean_derivatives`."""
    N, L = scenario.sample_count, scenario.n_receivers
    theta = theta_vector(scenario, source, B, waveform)[: signal_parameter_count(N, L)]
    steps = np.concatenate(
        [np.full(3, position_step), np.full(N - 1, phase_step), np.full(6 * L, coeff_step)]
    )
    out = np.empty((len(theta), N * L), dtype=complex)
    for i, d in enumerate(steps):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += d
        tm[i] -= d
        out[i] = (mean_from_theta(scenario, tp) - mean_from_theta(scenario, tm)) / (2 * d)
    return out


@dataclass(frozen=True)
class FisherInformation:
    """Full Fisher information matrix in the documented parameter order.

    The noise-variance block is stored as ``N * I``; it decouples from the
    signal block (zero cross terms) and never enters the position bound.
    """

    J: np.ndarray
    n_signal: int
    sample_count: int
    n_receivers: int

    @property
    def signal_block(self) -> np.ndarray:
        return self.J[: self.n_signal, : self.n_signal]

    @property
    def noise_block(self) -> np.ndarray:
        return self.J[self.n_signal:, self.n_signal:]

    @property
    def cross_block(self) -> np.ndarray:
        return self.J[: self.n_signal, self.n_signal:]


def fisher_information(scenario: Scenario, source, B, waveform, variances) -> FisherInformation:
    """``J_ij = 2 Re{ dmu_i^H (Diag(1/sigma2) kron I_N) dmu_j }`` for the signal
    parameters; zero signal/noise cross terms."""
    N, L = scenario.sample_count, scenario.n_receivers
    var = np.broadcast_to(np.asarray(variances, dtype=float), (L,))
    if np.any(var <= 0):
        raise ValueError("noise variances must be positive")
    A = mean_derivatives(scenario, source, B, waveform)  # (K, NL)
    w = np.repeat(1.0 / var, N)
    Js = 2 * np.real((A.conj() * w) @ A.T)
    Js = 0.5 * (Js + Js.T)
    K = parameter_count(N, L)
    J = np.zeros((K, K))
    ks = len(Js)
    J[:ks, :ks] = Js
    J[ks:, ks:] = N * np.eye(L)
    return FisherInformation(J, ks, N, L)


@dataclass(frozen=True)
class PositionBound:
    """Position block of the CRLB and the implied confidence ellipsoid."""

    covariance: np.ndarray  # 3 x 3
    center: np.ndarray
    confidence: float = 0.95

    @property
    def trace(self) -> float:
        return float(np.trace(self.covariance))

    def _block(self, dims):
        return self.covariance[np.ix_(dims, dims)]

    def ellipsoid(self, dims=(0, 1, 2)):
        """Principal axes (columns) and semi-axis lengths of the confidence region
        over the selected coordinates, at the chi-square quantile with
        ``len(dims)`` degrees of freedom."""
        dims = list(dims)
        q = chi2.ppf(self.confidence, len(dims))
        ev, vec = np.linalg.eigh(self._block(dims))
        return vec, np.sqrt(q * ev)

    def mahalanobis2(self, points, dims=(0, 1, 2)) -> np.ndarray:
        dims = list(dims)
        d = np.atleast_2d(np.asarray(points, dtype=float))[:, dims] - self.center[dims]
        return np.einsum("pi,ij,pj->p", d, np.linalg.inv(self._block(dims)), d)

    def contains(self, points, dims=(0, 1, 2)) -> np.ndarray:
        return self.mahalanobis2(points, dims) <= chi2.ppf(self.confidence, len(dims))

    def volume(self, dims=(0, 1, 2)) -> float:
        from math import gamma, pi

        _, semi = self.ellipsoid(dims)
        n = len(semi)
        return float(pi ** (n / 2) / gamma(n / 2 + 1) * np.prod(semi))


def position_crlb(fim: FisherInformation, center=None, confidence: float = 0.95) -> PositionBound:
    """Invert the signal block and keep the leading 3 x 3 position block."""
    Js = fim.signal_block
    ev = np.linalg.eigvalsh(Js)
    if ev[0] <= ev[-1] / COND_LIMIT:
        raise NonIdentifiableError(
            f"Fisher information is singular or ill-conditioned "
            f"(eigenvalue ratio {ev[0] / ev[-1]:.3g})"
        )
    C = np.linalg.inv(Js)[:3, :3]
    C = 0.5 * (C + C.T)
    c = np.zeros(3) if center is None else as_point(center)
    return PositionBound(C, c, confidence)
