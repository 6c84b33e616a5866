"""Fading, path loss, composite channel gains and user selection.

Rayleigh fading is represented directly by its squared magnitude (unit-mean
exponential); no consumer in this package needs the phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SystemConfig
from .pointprocess import NetworkGeometry

# Path-loss regularisation: L(r) is evaluated at max(r, R_MIN).  The raw
# r^alpha model explodes at r = 0, which has probability zero but does occur
# in floating point; 0.1 m is far below any geometry scale used here.
R_MIN = 0.1  # m


def _pow(x, expo: float):
    # integer exponents by repeated squaring; r^4 dominates the hot loops
    # and generic float pow is several times slower
    if expo == 1.0:
        return x
    if expo == 2.0:
        return x * x
    if expo == 3.0:
        return x * x * x
    if expo == 4.0:
        x2 = x * x
        return x2 * x2
    return x ** expo


def path_loss(r, alpha: float):
    """Distance-power law r^alpha, regularised near r = 0."""
    return _pow(np.maximum(r, R_MIN), alpha)


def path_loss_sq(r2, alpha: float):
    """Same as :func:`path_loss` but takes squared distances (saves a sqrt)."""
    return _pow(np.maximum(r2, R_MIN * R_MIN), 0.5 * alpha)


@dataclass(frozen=True)
class CompositeGain:
    """Fading power divided by path loss, with the distance it came from."""

    value: float
    distance: float


def composite_gain(h2, r, alpha: float):
    """Composite channel gain h^2 / L(r)."""
    return h2 / path_loss(r, alpha)


def select_noma_user(gains) -> int:
    """Index of the largest composite gain; ties go to the lowest index.

    Accepts plain gain values or :class:`CompositeGain` records.
    """
    values = [g.value if isinstance(g, CompositeGain) else g for g in gains]
    if len(values) == 0:
        raise ValueError("cannot select from an empty gain sequence")
    return int(np.argmax(values))


def select_users(intra: np.ndarray, offsets_r: np.ndarray, alpha: float):
    """Per-cluster user selection by largest composite gain.

    Parameters are (n, k) arrays of intra-cluster fading powers and offset
    norms.  Returns (selected index, selected gain) per cluster; argmax
    breaks exact ties towards the lower index.
    """
    gains = intra / path_loss(offsets_r, alpha)
    idx = np.argmax(gains, axis=1)
    rows = np.arange(gains.shape[0])
    return idx, gains[rows, idx]


@dataclass
class FadingMatrix:
    """Every fading power one realization's decoding chain touches.

    ``decoders`` indexes the clusters whose base stations act as receivers;
    cross-fading is drawn only for (decoder, cluster) pairs, which keeps the
    per-trial cost linear in the cluster count.
    """

    decoders: np.ndarray  # (m,) cluster indices of the decoding BSs
    intra: np.ndarray     # (n, k) gains BS_i <- own candidate users
    cross: np.ndarray     # (m, n) gains decoder i <- selected user of cluster j
    comp: np.ndarray      # (m,) gains decoder i <- cell-edge user


def draw_fading(geometry: NetworkGeometry, decoders: np.ndarray,
                rng: np.random.Generator) -> FadingMatrix:
    """Draw all fading powers for the given decoder set.

    One exponential block, laid out (and consumed) as: intra-cluster gains,
    cross gains, edge-user gains.
    """
    decoders = np.asarray(decoders, dtype=np.int64)
    n = geometry.n_clusters
    k = geometry.k_users
    m = decoders.shape[0]
    block = rng.standard_exponential(n * k + m * n + m)
    intra = block[:n * k].reshape(n, k)
    cross = block[n * k:n * k + m * n].reshape(m, n)
    comp = block[n * k + m * n:]
    return FadingMatrix(decoders=decoders, intra=intra, cross=cross, comp=comp)
