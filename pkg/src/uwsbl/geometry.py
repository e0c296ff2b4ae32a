"""Three-ray path geometry, delays and steering matrices.

Coordinates are in meters with ``z`` the depth (positive downward, surface at
``z = 0`` and a flat bottom at ``z = h``). Ray index 0 is the direct path,
1 the surface bounce and 2 the bottom bounce.

Steering convention: ``D[l][k, r] = exp(-1j * omega[k] * tau[r, l])`` so that
the noiseless received spectrum is ``x_l = s * (D_l @ b_l)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

N_RAYS = 3


class DegenerateGeometryError(ValueError):
    """Raised when a source/receiver configuration has no usable ray geometry."""


class ScenarioError(ValueError):
    """Invalid physical scenario (bad depth, speed, receiver layout...)."""


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not np.all(np.isfinite([self.x, self.y, self.z])):
            raise ValueError(f"non-finite position {self}")

    @classmethod
    def from_array(cls, a) -> "Position":
        a = np.asarray(a, dtype=float).reshape(3)
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


def as_point(p) -> np.ndarray:
    """Return ``p`` (a :class:`Position` or length-3 sequence) as a float array."""
    if isinstance(p, Position):
        return p.as_array()
    a = np.asarray(p, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class Scenario:
    """Environment and array description.

    :param receivers: (L, 3) receiver positions
    :param bottom_depth: water depth h [m]
    :param sound_speed: c [m/s]
    :param sample_period: T_s [s]
    :param sample_count: N, number of DFT bins
    :param bottom_reflection: kappa_b in [0, 1]
    """

    receivers: np.ndarray
    bottom_depth: float
    sound_speed: float
    sample_period: float
    sample_count: int
    bottom_reflection: float = 1.0
    omega: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rx = np.array(self.receivers, dtype=float)
        if rx.ndim == 1:
            rx = rx.reshape(1, -1)
        if rx.ndim != 2 or rx.shape[1] != 3 or rx.shape[0] < 1:
            raise ScenarioError(f"receivers must be an (L, 3) array, got {rx.shape}")
        if not np.all(np.isfinite(rx)):
            raise ScenarioError("receiver coordinates must be finite")
        h = float(self.bottom_depth)
        if not h > 0:
            raise ScenarioError(f"bottom_depth must be positive, got {h}")
        if not float(self.sound_speed) > 0:
            raise ScenarioError("sound_speed must be positive")
        if not float(self.sample_period) > 0:
            raise ScenarioError("sample_period must be positive")
        n = int(self.sample_count)
        if n != self.sample_count or n < 2:
            raise ScenarioError(f"sample_count must be an integer >= 2, got {self.sample_count}")
        kb = float(self.bottom_reflection)
        if not 0.0 <= kb <= 1.0:
            raise ScenarioError(f"bottom_reflection must lie in [0, 1], got {kb}")
        if np.any(rx[:, 2] < 0) or np.any(rx[:, 2] > h):
            raise ScenarioError("receiver depths must lie in [0, bottom_depth]")
        if len(rx) > 1:
            diff = rx[:, None, :] - rx[None, :, :]
            d = np.sqrt((diff ** 2).sum(-1)) + np.eye(len(rx))
            if np.any(d == 0):
                raise ScenarioError("receiver positions must be pairwise distinct")
        rx.setflags(write=False)
        omega = 2 * np.pi * np.arange(n) / (n * float(self.sample_period))
        omega.setflags(write=False)
        object.__setattr__(self, "receivers", rx)
        object.__setattr__(self, "bottom_depth", h)
        object.__setattr__(self, "sound_speed", float(self.sound_speed))
        object.__setattr__(self, "sample_period", float(self.sample_period))
        object.__setattr__(self, "sample_count", n)
        object.__setattr__(self, "bottom_reflection", kb)
        object.__setattr__(self, "omega", omega)

    @property
    def n_receivers(self) -> int:
        return self.receivers.shape[0]

    def validate_source(self, p) -> np.ndarray:
        """Check that ``p`` lies in the water column; return it as an array."""
        p = as_point(p)
        if not 0.0 <= p[2] <= self.bottom_depth:
            raise ScenarioError(
                f"source depth {p[2]} outside the water column [0, {self.bottom_depth}]"
            )
        return p


@dataclass(frozen=True)
class RayGeometry:
    distances: np.ndarray  # (3, L)
    delays: np.ndarray  # (3, L)


def ray_distances(scenario: Scenario, points) -> np.ndarray:
    """Path lengths of the three rays for one or many source positions.

    :param points: (..., 3) array of candidate source positions
    :returns: (..., 3, L) array of distances
    """
    p = np.asarray(points, dtype=float)
    rx = scenario.receivers
    dx = p[..., None, 0] - rx[:, 0]
    dy = p[..., None, 1] - rx[:, 1]
    rho2 = dx * dx + dy * dy
    zp = p[..., None, 2]
    zl = rx[:, 2]
    h = scenario.bottom_depth
    return np.sqrt(
        np.stack(
            [
                rho2 + (zp - zl) ** 2,
                rho2 + (zp + zl) ** 2,
                rho2 + (2 * h - zp - zl) ** 2,
            ],
            axis=-2,
        )
    )


def ray_geometry(scenario: Scenario, source) -> RayGeometry:
    """Distances and delays of the direct, surface and bottom rays."""
    p = as_point(source)
    R = ray_distances(scenario, p)
    if np.any(R[0] == 0):
        raise DegenerateGeometryError("source coincides with a receiver")
    return RayGeometry(distances=R, delays=R / scenario.sound_speed)


def delay_gradients(scenario: Scenario, source) -> np.ndarray:
    """Partial derivatives of every ray delay w.r.t. the source coordinates.

    :returns: (3 coords, 3 rays, L) array, ``[i, r, l] = d tau_rl / d p_i``
    """
    p = as_point(source)
    R = ray_geometry(scenario, p).distances
    rx = scenario.receivers
    c = scenario.sound_speed
    h = scenario.bottom_depth
    dx = p[0] - rx[:, 0]
    dy = p[1] - rx[:, 1]
    g = np.empty((3, N_RAYS, len(rx)))
    g[0] = dx / (c * R)
    g[1] = dy / (c * R)
    g[2, 0] = (p[2] - rx[:, 2]) / (c * R[0])
    g[2, 1] = (p[2] + rx[:, 2]) / (c * R[1])
    g[2, 2] = (p[2] + rx[:, 2] - 2 * h) / (c * R[2])
    return g


def _phasor_powers(theta: np.ndarray, n: int) -> np.ndarray:
    """``exp(1j * theta * k)`` for k = 0..n-1 along a new last axis.

    Written as an outer product of two short exp tables (k = a*m + j), which
    costs about 2*sqrt(n) complex exponentials per entry of ``theta`` instead of n.
    """
    a = max(1, int(np.ceil(np.sqrt(n))))
    m = -(-n // a)
    fine = np.exp(1j * theta[..., None] * np.arange(a))
    coarse = np.exp(1j * theta[..., None] * (a * np.arange(m)))
    out = coarse[..., :, None] * fine[..., None, :]
    return out.reshape(*theta.shape, m * a)[..., :n]


def steering_from_delays(scenario: Scenario, delays: np.ndarray) -> np.ndarray:
    """Steering matrices from a (..., 3, L) delay array; returns (..., L, N, 3)."""
    tau = np.swapaxes(np.asarray(delays, dtype=float), -1, -2)  # (..., L, 3)
    theta = -scenario.omega[1] * tau
    return np.swapaxes(_phasor_powers(theta, scenario.sample_count), -1, -2)


def phasor_powers(theta, n: int) -> np.ndarray:
    """Public alias of the fast ``exp(1j * theta * k)``, k = 0..n-1, table."""
    return _phasor_powers(np.asarray(theta, dtype=float), n)


def steering_gram(scenario: Scenario, delays: np.ndarray) -> np.ndarray:
    """``D_l^T conj(D_l)`` for every receiver without forming ``D_l``.

    Entry (r, q) is ``sum_k exp(-1j * k * t)`` with ``t = omega_1 (tau_r - tau_q)``,
    i.e. ``exp(-1j (N-1) t / 2) sin(N t / 2) / sin(t / 2)`` (a Dirichlet kernel).

    :param delays: (..., 3, L) delays
    :returns: (..., L, 3, 3) Hermitian matrices with ``N`` on the diagonal
    """
    tau = np.swapaxes(np.asarray(delays, dtype=float), -1, -2)  # (..., L, 3)
    n = scenario.sample_count
    t = scenario.omega[1] * (tau[..., :, None] - tau[..., None, :])
    half = np.sin(t / 2)
    small = np.abs(half) < 1e-300
    ratio = np.sin(n * t / 2) / np.where(small, 1.0, half)
    # at t = 2 pi m every term of the sum is 1
    ratio = np.where(small, n * np.cos((n - 1) * t / 2), ratio)
    return np.exp(-0.5j * (n - 1) * t) * ratio


def steering_matrices(scenario: Scenario, source) -> np.ndarray:
    """Per-receiver N x 3 steering matrices stacked as an (L, N, 3) array."""
    return steering_from_delays(scenario, ray_geometry(scenario, source).delays)


def mirror_depths(scenario: Scenario, source) -> tuple[Scenario, np.ndarray]:
    """Reflect the source and every receiver through mid-depth (z -> h - z)."""
    p = as_point(source).copy()
    h = scenario.bottom_depth
    rx = scenario.receivers.copy()
    rx[:, 2] = h - rx[:, 2]
    p[2] = h - p[2]
    mirrored = Scenario(
        receivers=rx,
        bottom_depth=h,
        sound_speed=scenario.sound_speed,
        sample_period=scenario.sample_period,
        sample_count=scenario.sample_count,
        bottom_reflection=scenario.bottom_reflection,
    )
    return mirrored, p
