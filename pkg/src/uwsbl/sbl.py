"""Semi-blind localization: largest eigenvalue of the reduced 3L x 3L matrix.

For a candidate position the objective is ``lambda_max(U^H U)`` with
``U = [X_1 conj(D_1) G_1^{-1}, ..., X_L conj(D_L) G_L^{-1}]`` and
``D_l^T conj(D_l) = G_l^H G_l`` (Cholesky). ``U^H U`` shares its nonzero
spectrum with the N x N matrix ``U U^H`` (see :func:`dense_q_matrix`), so the
cost per candidate is O(N L^2) instead of O(N^2).
"""
from __future__ import annotations

import numpy as np

from .channel import ChannelCoefficients
from .geometry import (
    DegenerateGeometryError,
    Scenario,
    as_point,
    phasor_powers,
    ray_distances,
    steering_gram,
    steering_matrices,
)
from .search import LocalizationResult, RefineOptions, SearchGrid, localize

COND_LIMIT = 1e12
# complex entries of the (P, 3L, N) work array per batch (~64 MB)
BATCH_ENTRIES = 1 << 22


def _measurements(x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ValueError(f"measurements must be an (L, N) array, got {x.shape}")
    return x


def _gram_batch(scenario: Scenario, R: np.ndarray):
    """Steering Gram matrices and a degeneracy mask from (P, 3, L) path lengths."""
    gram = steering_gram(scenario, R / scenario.sound_speed)  # (P, L, 3, 3)
    ev = np.linalg.eigvalsh(gram)  # ascending
    bad = np.any(ev[..., 0] <= ev[..., -1] / COND_LIMIT, axis=-1) | np.any(R[:, 0] == 0, axis=-1)
    return gram, bad


def reduced_q_batch(x, scenario: Scenario, points) -> tuple[np.ndarray, np.ndarray]:
    """Reduced matrices ``U^H U`` for a batch of candidates.

    Computed as ``G^{-H} (V^H V) G^{-1}`` with ``V = [X_1 conj(D_1), ..., X_L conj(D_L)]``
    and ``G = blockdiag(Gamma_l)``, so the only O(N) work is building ``V`` and
    one (3L x N) by (N x 3L) product per candidate.

    :returns: ``(Qt, bad)`` with Qt of shape (P, 3L, 3L) and a boolean mask of
        degenerate candidates (their Qt entries are meaningless)
    """
    x = _measurements(x)
    L, N = x.shape
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    P = len(pts)
    R = ray_distances(scenario, pts)  # (P, 3, L)
    gram, bad = _gram_batch(scenario, R)
    if np.any(bad):
        gram = gram.copy()
        gram[bad] = np.eye(3)
    # gram = C C^H, so Gamma = C^H and Gamma^{-H} = C^{-1}
    cinv = np.linalg.inv(np.linalg.cholesky(gram))  # (P, L, 3, 3)
    # rows (l, r) of W hold x_l[k] exp(+1j w_k tau_rl) = (X_l conj(D_l))[k, r]
    tau = np.swapaxes(R, -1, -2) / scenario.sound_speed  # (P, L, 3)
    W = phasor_powers(scenario.omega[1] * tau, N) * x[None, :, None, :]
    W = W.reshape(P, 3 * L, N)
    A = np.matmul(W.conj(), np.swapaxes(W, -1, -2))  # V^H V
    G = np.zeros((P, 3 * L, 3 * L), dtype=complex)
    for l in range(L):
        G[:, 3 * l:3 * l + 3, 3 * l:3 * l + 3] = cinv[:, l]
    Qt = np.matmul(np.matmul(G, A), G.conj().swapaxes(-1, -2))
    return Qt, bad


def _lambda_max_power(Q: np.ndarray, iters: int = 500, tol: float = 1e-13) -> np.ndarray:
    v = np.ones(Q.shape[:-1], dtype=complex)
    lam = np.zeros(Q.shape[0])
    for _ in range(iters):
        w = np.einsum("pij,pj->pi", Q, v)
        nrm = np.linalg.norm(w, axis=-1)
        new = nrm / np.maximum(np.linalg.norm(v, axis=-1), 1e-300)
        v = w / np.maximum(nrm, 1e-300)[:, None]
        if np.all(np.abs(new - lam) <= tol * np.maximum(new, 1e-300)):
            lam = new
            break
        lam = new
    return lam


def sbl_objective_batch(x, scenario: Scenario, points, method: str = "eigh") -> np.ndarray:
    """SBL objective at each of the (P, 3) ``points``; NaN where degenerate."""
    x = _measurements(x)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    chunk = max(1, BATCH_ENTRIES // x.size)
    if len(pts) > chunk:
        return np.concatenate(
            [sbl_objective_batch(x, scenario, pts[i:i + chunk], method) for i in range(0, len(pts), chunk)]
        )
    Qt, bad = reduced_q_batch(x, scenario, pts)
    if method == "eigh":
        lam = np.linalg.eigvalsh(Qt)[:, -1]
    elif method == "power":
        lam = _lambda_max_power(Qt)
    else:
        raise ValueError(f"unknown eigenvalue method {method!r}")
    lam = np.maximum(lam, 0.0)
    lam[bad] = np.nan
    return lam


def sbl_objective(x, scenario: Scenario, candidate, method: str = "eigh") -> float:
    """``lambda_max`` of the reduced SBL matrix at one candidate (NaN if degenerate)."""
    return float(sbl_objective_batch(x, scenario, as_point(candidate)[None, :], method)[0])


def reduced_q_matrix(x, scenario: Scenario, candidate) -> np.ndarray:
    Qt, bad = reduced_q_batch(x, scenario, as_point(candidate)[None, :])
    if bad[0]:
        return np.full_like(Qt[0], np.nan)
    return Qt[0]


def dense_q_matrix(x, scenario: Scenario, candidate, weights=None) -> np.ndarray:
    """Explicit N x N matrix ``sum_l X_l conj(D_l) (D_l^T W conj(D_l))^{-1} (X_l conj(D_l))^H``.

    ``weights`` is the diagonal of ``W`` (defaults to ones). With
    ``weights = |s|^2`` this is the concentrated cost matrix whose Rayleigh
    quotient at ``s`` is the quantity maximized over the waveform. Reference
    implementation, O(N^2) memory.
    """
    x = _measurements(x)
    D = steering_matrices(scenario, candidate)
    N = x.shape[1]
    w = np.ones(N) if weights is None else np.asarray(weights, dtype=float)
    Q = np.zeros((N, N), dtype=complex)
    for xl, Dl in zip(x, D):
        A = xl[:, None] * Dl.conj()  # X_l conj(D_l)
        M = Dl.T @ (w[:, None] * Dl.conj())
        Q += A @ np.linalg.solve(M, A.conj().T)
    return 0.5 * (Q + Q.conj().T)


def estimate_channel_given(x, scenario: Scenario, candidate, waveform) -> ChannelCoefficients:
    """Per-receiver least-squares channel for known waveform and position."""
    x = _measurements(x)
    s = getattr(waveform, "coefficients", waveform)
    s = np.asarray(s, dtype=complex)
    D = steering_matrices(scenario, candidate)
    B = np.empty((3, x.shape[0]), dtype=complex)
    for l, (xl, Dl) in enumerate(zip(x, D)):
        A = s[:, None] * Dl
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= sv[0] / COND_LIMIT:
            raise DegenerateGeometryError(f"rank-deficient design for receiver {l}")
        B[:, l] = np.linalg.lstsq(A, xl, rcond=None)[0]
    return ChannelCoefficients(B)


def sbl_localize(
    x,
    scenario: Scenario,
    grid: SearchGrid,
    refine: RefineOptions | None = None,
    keep_map: bool = False,
    method: str = "eigh",
) -> LocalizationResult:
    """Grid search over ``grid`` followed by bounded local refinement."""
    x = _measurements(x)
    grid.check_depth(scenario.bottom_depth)
    return localize(lambda p: sbl_objective_batch(x, scenario, p, method), grid, refine, keep_map)
