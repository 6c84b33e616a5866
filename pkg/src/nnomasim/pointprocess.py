"""Sampling of the clustered network geometry.

Base stations form a homogeneous Poisson point process inside the sampling
window; each carries ``k_users`` candidate users placed uniformly in a disk
around it.  The cell-edge user sits at the origin and is not a parameter.

Randomness is counter-based (Philox) and split per trial: trial ``t`` of a
run with seed ``s`` always consumes the stream keyed ``(s, t)``, so results
do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .config import SystemConfig


def trial_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based random stream for one trial (splittable by key)."""
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


class StreamPool:
    """Reusable generator that re-keys per trial without entropy syscalls.

    ``stream(seed, index)`` yields the exact same stream as
    ``trial_stream(seed, index)`` (asserted by the test suite) but reuses
    one Philox instance, which keeps tight trial loops cheap.
    """

    def __init__(self):
        self._bitgen = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        self._gen = np.random.Generator(self._bitgen)
        self._state = {
            "bit_generator": "Philox",
            "state": {"counter": np.zeros(4, dtype=np.uint64),
                      "key": np.zeros(2, dtype=np.uint64)},
            "buffer": np.zeros(4, dtype=np.uint64),
            "buffer_pos": 4,
            "has_uint32": 0,
            "uinteger": 0,
        }

    def stream(self, seed: int, index: int) -> np.random.Generator:
        key = self._state["state"]["key"]
        key[0] = seed
        key[1] = index
        self._bitgen.state = self._state
        return self._gen


def _disk_polar(radius: float, count: int, rng: np.random.Generator):
    """Radii and angles of ``count`` points uniform in a disk.

    Inverse-CDF sampling (r = R*sqrt(u)) rather than rejection, so the
    stream consumption is deterministic.
    """
    r = radius * np.sqrt(rng.random(count))
    theta = (2.0 * np.pi) * rng.random(count)
    return r, theta


def sample_uniform_disk(radius: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. points uniform in the origin-centred disk, as (n, 2)."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    if count < 0:
        raise ValueError(f"count must be non-negative, got {count!r}")
    r, theta = _disk_polar(radius, count, rng)
    return np.column_stack((r * np.cos(theta), r * np.sin(theta)))


def sample_hppp(lam: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """One draw of a homogeneous Poisson process in a disk, as (n, 2).

    The count is Poisson(lam * pi * radius^2); positions are i.i.d. uniform.
    """
    if lam < 0:
        raise ValueError(f"density must be non-negative, got {lam!r}")
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius!r}")
    n = rng.poisson(lam * np.pi * radius * radius)
    return sample_uniform_disk(radius, int(n), rng)


@dataclass
class ClusterDraw:
    """One base station and the offsets of its candidate users."""

    bs_position: np.ndarray   # (2,)
    user_offsets: np.ndarray  # (k_users, 2), relative to the BS


@dataclass
class NetworkGeometry:
    """One sampled network realization.

    The cell-edge user is implicitly at the origin.  Offsets are kept in
    polar form (the decoding chain only ever converts the selected user of
    each cluster); the Cartesian view is materialised on first access.
    """

    bs_xy: np.ndarray        # (n, 2) base-station positions
    bs_r: np.ndarray         # (n,) distances to the origin
    offsets_r: np.ndarray    # (n, k) user offset norms
    offsets_ang: np.ndarray  # (n, k) user offset angles

    _offsets_xy: np.ndarray | None = None

    @property
    def n_clusters(self) -> int:
        return self.bs_xy.shape[0]

    @property
    def k_users(self) -> int:
        return self.offsets_r.shape[1]

    @property
    def offsets_xy(self) -> np.ndarray:
        """(n, k, 2) user offsets relative to their base station."""
        if self._offsets_xy is None:
            xy = np.empty(self.offsets_r.shape + (2,))
            xy[..., 0] = self.offsets_r * np.cos(self.offsets_ang)
            xy[..., 1] = self.offsets_r * np.sin(self.offsets_ang)
            self._offsets_xy = xy
        return self._offsets_xy

    def cluster(self, i: int) -> ClusterDraw:
        return ClusterDraw(bs_position=self.bs_xy[i], user_offsets=self.offsets_xy[i])


def sample_geometry(cfg: SystemConfig, rng: np.random.Generator) -> NetworkGeometry:
    """Sample one full realization: parents plus ``k_users`` offsets each.

    Draw order (fixed; part of the reproducibility contract): parent count,
    then one uniform block laid out as parent radii, parent angles, offset
    radii, offset angles.
    """
    n = int(rng.poisson(cfg.lambda_c * np.pi * cfg.sim_radius ** 2))
    k = cfg.k_users
    u = rng.random(2 * n + 2 * n * k)
    bs_rad = cfg.sim_radius * np.sqrt(u[:n])
    bs_ang = (2.0 * np.pi) * u[n:2 * n]
    off_rad = cfg.radius_cluster * np.sqrt(u[2 * n:2 * n + n * k].reshape(n, k))
    off_ang = (2.0 * np.pi) * u[2 * n + n * k:].reshape(n, k)

    bs_xy = np.empty((n, 2))
    bs_xy[:, 0] = bs_rad * np.cos(bs_ang)
    bs_xy[:, 1] = bs_rad * np.sin(bs_ang)
    return NetworkGeometry(bs_xy=bs_xy, bs_r=bs_rad,
                           offsets_r=off_rad, offsets_ang=off_ang)


def write_geometry_csv(geometry: NetworkGeometry, path) -> None:
    """Dump one realization as (cluster_id, role, x, y) for visual checks."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "role", "x", "y"])
        writer.writerow([-1, "comp_user", 0.0, 0.0])
        for i in range(geometry.n_clusters):
            writer.writerow([i, "bs", repr(float(geometry.bs_xy[i, 0])),
                             repr(float(geometry.bs_xy[i, 1]))])
            for k in range(geometry.k_users):
                x = float(geometry.bs_xy[i, 0] + geometry.offsets_xy[i, k, 0])
                y = float(geometry.bs_xy[i, 1] + geometry.offsets_xy[i, k, 1])
                writer.writerow([i, f"user_{k}", repr(x), repr(y)])
