"""Monte Carlo engines for every transmission scheme.

Estimators and their conventions:

* cluster-user outage: one decoder chosen uniformly among the stations in
  the cooperation disk per realization (i.i.d. samples, binomial errors);
  realizations with an empty disk are redrawn.
* edge-user outage (fixed rates): all stations in the disk decode; the
  network side cancels the cluster signals of the successful ones; empty
  disks and failed best-station decoding both count as outage.
* ergodic rates: cluster rates are adaptive, so every station in the disk
  is a valid CoMP contributor; the edge-user rate sees interference only
  from clusters outside the disk.  Empty disks contribute zero sum/edge
  rate; the typical-user rate is conditioned on a non-empty disk.
* nearest-station scheme: the single station closest to the origin decodes,
  wherever it is; nothing is cancelled network-side.
* orthogonal baseline: the edge user transmits alone (noise-limited), the
  disk stations (or just the nearest one) receive.

Determinism: trial ``t`` always consumes the counter-based stream keyed
``(seed, t)``; accumulation happens in fixed chunks of ``CHUNK_TRIALS``
reduced in index order, so results are bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import FadingMatrix, draw_fading, path_loss, path_loss_sq, select_users
from .config import DerivedConstants, SystemConfig, derive_constants
from .pointprocess import NetworkGeometry, StreamPool, sample_geometry, _disk_polar

CHUNK_TRIALS = 1024  # fixed: chunk boundaries are part of the determinism contract
RESAMPLE_LIMIT = 100_000

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Empirical mean with its standard error and reproduction metadata."""

    mean: float
    std_error: float
    trials: int
    seed: int


@dataclass
class DecodingOutcome:
    """Per-realization result of the general decoding chain."""

    decoders: np.ndarray        # (m,) cluster indices acting as receivers
    sinr_noma: np.ndarray       # (m,) cluster-user decoding SINR per receiver
    qualified: np.ndarray       # (m,) bool, SINR >= threshold
    comp_signal: np.ndarray     # (m,) edge-user received power term
    inter_full: np.ndarray      # (m,) aggregate cluster interference
    inter_residual: np.ndarray  # (m,) interference left after cancellation
    sinr_comp: np.ndarray       # (m,) edge-user SINR per receiver
    comp_sinr_best: float | None  # best qualified edge-user SINR, if any

    @property
    def noma_rates(self) -> np.ndarray:
        return np.log1p(self.sinr_noma) / _LN2

    @property
    def comp_rate(self) -> float | None:
        if self.comp_sinr_best is None:
            return None
        return math.log1p(self.comp_sinr_best) / _LN2


def evaluate_realization(cfg: SystemConfig, geometry: NetworkGeometry,
                         fading: FadingMatrix,
                         constants: DerivedConstants | None = None,
                         eps_noma: float | None = None) -> DecodingOutcome:
    """Run the decoding chain of one realization for the given receivers.

    Every receiver first decodes its own cluster user against the edge-user
    signal plus all other clusters' selected users; receivers that succeed
    form the cancellation set, whose cluster signals are removed from the
    edge-user decoding step.  ``eps_noma=0`` reproduces the adaptive-rate
    regime in which every receiver qualifies.
    """
    dc = constants if constants is not None else derive_constants(cfg)
    eps_i = dc.eps_noma if eps_noma is None else float(eps_noma)
    inv_rho = 1.0 / dc.rho
    dec = fading.decoders
    m = dec.shape[0]
    n = geometry.n_clusters

    if m == 0:
        empty = np.empty(0)
        return DecodingOutcome(decoders=dec, sinr_noma=empty,
                               qualified=np.empty(0, dtype=bool),
                               comp_signal=empty, inter_full=empty,
                               inter_residual=empty, sinr_comp=empty,
                               comp_sinr_best=None)

    sel_idx, z = select_users(fading.intra, geometry.offsets_r, cfg.alpha)
    rows = np.arange(n)
    sel_r = geometry.offsets_r[rows, sel_idx]
    sel_ang = geometry.offsets_ang[rows, sel_idx]
    user_x = geometry.bs_xy[:, 0] + sel_r * np.cos(sel_ang)
    user_y = geometry.bs_xy[:, 1] + sel_r * np.sin(sel_ang)

    dx = user_x[np.newaxis, :] - geometry.bs_xy[dec, 0][:, np.newaxis]
    dy = user_y[np.newaxis, :] - geometry.bs_xy[dec, 1][:, np.newaxis]
    d2 = dx * dx + dy * dy
    contrib = fading.cross / path_loss_sq(d2, cfg.alpha)
    contrib[np.arange(m), dec] = 0.0  # a receiver's own user is not interference
    inter_full = contrib.sum(axis=1)

    comp_signal = cfg.power_ratio * fading.comp / path_loss(geometry.bs_r[dec], cfg.alpha)
    sinr_noma = z[dec] / (comp_signal + inter_full + inv_rho)
    qualified = sinr_noma >= eps_i

    cancel = dec[qualified]
    if cancel.size:
        reduction = contrib[:, cancel].sum(axis=1)
    else:
        reduction = 0.0
    inter_residual = np.maximum(inter_full - reduction, 0.0)
    sinr_comp = comp_signal / (inter_residual + inv_rho)
    best = float(np.max(sinr_comp[qualified])) if qualified.any() else None

    return DecodingOutcome(decoders=dec, sinr_noma=sinr_noma, qualified=qualified,
                           comp_signal=comp_signal, inter_full=inter_full,
                           inter_residual=inter_residual, sinr_comp=sinr_comp,
                           comp_sinr_best=best)


# ---------------------------------------------------------------------------
# per-trial samplers
# ---------------------------------------------------------------------------

def _geometry_with_disk(cfg, rng):
    """Sample realizations until the cooperation disk holds a station."""
    for _ in range(RESAMPLE_LIMIT):
        geom = sample_geometry(cfg, rng)
        in_disk = np.flatnonzero(geom.bs_r <= cfg.radius_comp)
        if in_disk.size:
            return geom, in_disk
    raise RuntimeError("no station fell inside the cooperation disk after "
                       f"{RESAMPLE_LIMIT} draws; check lambda_c and radius_comp")


def _trial_noma_outage(cfg, dc, rng):
    geom, in_disk = _geometry_with_disk(cfg, rng)
    pick = in_disk[rng.integers(in_disk.size)]
    fading = draw_fading(geom, np.array([pick]), rng)
    out = evaluate_realization(cfg, geom, fading, constants=dc)
    return (1.0 if out.sinr_noma[0] < dc.eps_noma else 0.0,)


def _trial_comp_outage(cfg, dc, rng):
    geom = sample_geometry(cfg, rng)
    in_disk = np.flatnonzero(geom.bs_r <= cfg.radius_comp)
    if in_disk.size == 0:
        return (1.0, 0.0, 0.0)
    fading = draw_fading(geom, in_disk, rng)
    out = evaluate_realization(cfg, geom, fading, constants=dc)
    n_q = int(np.count_nonzero(out.qualified))
    failed = n_q == 0 or out.comp_sinr_best < dc.eps_comp
    return (1.0 if failed else 0.0, n_q / in_disk.size, 1.0)


def _trial_ergodic(cfg, dc, rng):
    geom = sample_geometry(cfg, rng)
    in_disk = np.flatnonzero(geom.bs_r <= cfg.radius_comp)
    if in_disk.size:
        fading = draw_fading(geom, in_disk, rng)
        out = evaluate_realization(cfg, geom, fading, constants=dc, eps_noma=0.0)
        rates = out.noma_rates
        sum_rate = float(rates.sum())
        comp_rate = out.comp_rate
        user_rate = float(rates[rng.integers(in_disk.size)])
    else:
        sum_rate = 0.0
        comp_rate = 0.0
        geom, in_disk = _geometry_with_disk(cfg, rng)
        pick = in_disk[rng.integers(in_disk.size)]
        fading = draw_fading(geom, np.array([pick]), rng)
        out = evaluate_realization(cfg, geom, fading, constants=dc, eps_noma=0.0)
        user_rate = float(out.noma_rates[0])
    return (user_rate, sum_rate, comp_rate)


def _trial_fixed_rate_throughput(cfg, dc, rng):
    geom = sample_geometry(cfg, rng)
    in_disk = np.flatnonzero(geom.bs_r <= cfg.radius_comp)
    if in_disk.size == 0:
        return (0.0,)
    fading = draw_fading(geom, in_disk, rng)
    out = evaluate_realization(cfg, geom, fading, constants=dc)
    n_q = int(np.count_nonzero(out.qualified))
    comp_ok = out.comp_sinr_best is not None and out.comp_sinr_best >= dc.eps_comp
    return (n_q * cfg.rate_noma + (cfg.rate_comp if comp_ok else 0.0),)


def _trial_nearest(cfg, dc, rng):
    for _ in range(RESAMPLE_LIMIT):
        geom = sample_geometry(cfg, rng)
        if geom.n_clusters:
            break
    else:
        raise RuntimeError("empty sampling window; raise sim_radius or lambda_c")
    nearest = int(np.argmin(geom.bs_r))
    fading = draw_fading(geom, np.array([nearest]), rng)
    out = evaluate_realization(cfg, geom, fading, constants=dc)
    noma_ok = bool(out.sinr_noma[0] >= dc.eps_noma)
    # nothing is cancelled in this scheme: the edge-user step sees the full
    # cluster interference
    comp_snr = out.comp_signal[0] / (out.inter_full[0] + 1.0 / dc.rho)
    comp_ok = noma_ok and bool(comp_snr >= dc.eps_comp)
    sum_rate = (cfg.rate_noma if noma_ok else 0.0) + (cfg.rate_comp if comp_ok else 0.0)
    violation = 1.0 if (comp_ok and not noma_ok) else 0.0
    return (0.0 if noma_ok else 1.0, 0.0 if comp_ok else 1.0, sum_rate, violation)


def _trial_oma(cfg, dc, rng):
    # the edge user transmits alone; only parent positions and edge fadings
    # are needed
    n = int(rng.poisson(cfg.lambda_c * np.pi * cfg.sim_radius ** 2))
    bs_r, _ = _disk_polar(cfg.sim_radius, n, rng)
    r_in = bs_r[bs_r <= cfg.radius_comp]
    if r_in.size == 0:
        return (1.0, 0.0, 1.0)
    h = rng.standard_exponential(r_in.size)
    snr = cfg.power_ratio * dc.rho * h / path_loss(r_in, cfg.alpha)
    best = float(snr.max())
    nearest_snr = float(snr[np.argmin(r_in)])
    return (1.0 if best < dc.eps_comp else 0.0,
            math.log1p(best) / _LN2,
            1.0 if nearest_snr < dc.eps_comp else 0.0)


_TRIAL_FNS = {
    "noma_outage": (_trial_noma_outage, 1),
    "comp_outage": (_trial_comp_outage, 3),
    "ergodic": (_trial_ergodic, 3),
    "throughput": (_trial_fixed_rate_throughput, 1),
    "nearest": (_trial_nearest, 4),
    "oma": (_trial_oma, 3),
}


def _chunk_noma_outage(cfg, dc, seed, start, count, pool):
    """Chunk-vectorised twin of :func:`_trial_noma_outage`.

    Consumes exactly the same per-trial streams and draw order as the
    object path (sample_geometry / draw_fading), then evaluates the whole
    chunk in one vectorised pass; the SINRs agree with the per-trial path
    to summation rounding.  This is the hottest loop in the package.
    """
    k = cfg.k_users
    rw = cfg.sim_radius
    lam_area = cfg.lambda_c * np.pi * rw * rw
    two_pi = 2.0 * np.pi
    counts = np.empty(count, np.int64)
    picks_local = np.empty(count, np.int64)
    u_blocks = []
    e_blocks = []
    bsr_blocks = []
    for i in range(count):
        rng = pool.stream(seed, start + i)
        for _ in range(RESAMPLE_LIMIT):
            n = int(rng.poisson(lam_area))
            u = rng.random(2 * n + 2 * n * k)
            bs_r = rw * np.sqrt(u[:n])
            inside = np.flatnonzero(bs_r <= cfg.radius_comp)
            if inside.size:
                break
        else:
            raise RuntimeError("no station fell inside the cooperation disk "
                               f"after {RESAMPLE_LIMIT} draws")
        picks_local[i] = inside[rng.integers(inside.size)]
        e_blocks.append(rng.standard_exponential(n * k + n + 1))
        counts[i] = n
        u_blocks.append(u)
        bsr_blocks.append(bs_r)

    starts = np.zeros(count, np.int64)
    np.cumsum(counts[:-1], out=starts[1:])
    total = int(starts[-1] + counts[-1])
    ns = counts.tolist()
    bs_r = np.concatenate(bsr_blocks)
    bs_ang_u = np.concatenate([u[n:2 * n] for u, n in zip(u_blocks, ns)])
    off_u = np.concatenate(
        [u[2 * n:2 * n + n * k] for u, n in zip(u_blocks, ns)]).reshape(total, k)
    ang_u = np.concatenate(
        [u[2 * n + n * k:] for u, n in zip(u_blocks, ns)]).reshape(total, k)
    intra = np.concatenate([e[:n * k] for e, n in zip(e_blocks, ns)]).reshape(total, k)
    cross = np.concatenate([e[n * k:n * k + n] for e, n in zip(e_blocks, ns)])
    comp_h = np.array([e[-1] for e in e_blocks])

    gains = intra / path_loss(cfg.radius_cluster * np.sqrt(off_u), cfg.alpha)
    sel = np.argmax(gains, axis=1)
    rows = np.arange(total)
    z = gains[rows, sel]
    sel_r = cfg.radius_cluster * np.sqrt(off_u[rows, sel])
    sel_ang = two_pi * ang_u[rows, sel]
    theta = two_pi * bs_ang_u
    bx = bs_r * np.cos(theta)
    by = bs_r * np.sin(theta)
    ux = bx + sel_r * np.cos(sel_ang)
    uy = by + sel_r * np.sin(sel_ang)

    pick = starts + picks_local
    dx = ux - np.repeat(bx[pick], counts)
    dy = uy - np.repeat(by[pick], counts)
    contrib = cross / path_loss_sq(dx * dx + dy * dy, cfg.alpha)
    contrib[pick] = 0.0
    inter = np.add.reduceat(contrib, starts)
    comp_sig = cfg.power_ratio * comp_h / path_loss(bs_r[pick], cfg.alpha)
    sinr = z[pick] / (comp_sig + inter + 1.0 / dc.rho)
    outages = float(np.count_nonzero(sinr < dc.eps_noma))
    return np.array([outages]), np.array([outages]), count


_CHUNK_FNS = {
    "noma_outage": _chunk_noma_outage,
}


# ---------------------------------------------------------------------------
# chunked deterministic accumulation
# ---------------------------------------------------------------------------

def _chunk_sums(args):
    engine, cfg, seed, start, count = args
    fn, width = _TRIAL_FNS[engine]
    dc = derive_constants(cfg)
    pool = StreamPool()
    chunk_fn = _CHUNK_FNS.get(engine)
    if chunk_fn is not None:
        return chunk_fn(cfg, dc, seed, start, count, pool)
    buf = np.empty((count, width))
    for i in range(count):
        buf[i] = fn(cfg, dc, pool.stream(seed, start + i))
    return buf.sum(axis=0), (buf * buf).sum(axis=0), count


def _accumulate(engine: str, cfg: SystemConfig, trials: int, seed: int,
                workers: int = 1):
    """Sum per-trial outputs over fixed chunks, reduced in chunk order."""
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials!r}")
    width = _TRIAL_FNS[engine][1]
    tasks = [(engine, cfg, seed, start, min(CHUNK_TRIALS, trials - start))
             for start in range(0, trials, CHUNK_TRIALS)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_chunk_sums, tasks,
                                  chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        parts = [_chunk_sums(task) for task in tasks]
    sums = np.array([math.fsum(float(p[0][j]) for p in parts) for j in range(width)])
    sumsq = np.array([math.fsum(float(p[1][j]) for p in parts) for j in range(width)])
    return sums, sumsq, trials


def _binomial(successes: float, n: int, seed: int) -> MonteCarloEstimate:
    p = successes / n
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n)
    return MonteCarloEstimate(mean=p, std_error=se, trials=n, seed=seed)


def _sample_mean(total: float, total_sq: float, n: int, seed: int) -> MonteCarloEstimate:
    mean = total / n
    var = max(total_sq - n * mean * mean, 0.0) / max(n - 1, 1)
    return MonteCarloEstimate(mean=mean, std_error=math.sqrt(var / n),
                              trials=n, seed=seed)


# ---------------------------------------------------------------------------
# public engines
# ---------------------------------------------------------------------------

def simulate_noma_outage(cfg: SystemConfig, trials: int, seed: int,
                         workers: int = 1) -> MonteCarloEstimate:
    """Outage probability of the cluster user at a disk-typical station."""
    sums, _, n = _accumulate("noma_outage", cfg, trials, seed, workers)
    return _binomial(sums[0], n, seed)


def simulate_comp_outage(cfg: SystemConfig, trials: int, seed: int,
                         workers: int = 1) -> MonteCarloEstimate:
    """Outage probability of the edge user under fixed cluster rates."""
    sums, _, n = _accumulate("comp_outage", cfg, trials, seed, workers)
    return _binomial(sums[0], n, seed)


@dataclass(frozen=True)
class ErgodicRates:
    noma_user_rate: MonteCarloEstimate
    noma_sum_rate: MonteCarloEstimate
    comp_rate: MonteCarloEstimate


def simulate_ergodic_rates(cfg: SystemConfig, trials: int, seed: int,
                           workers: int = 1) -> ErgodicRates:
    """Adaptive-rate ergodic metrics (per user, disk sum, edge user)."""
    sums, sumsq, n = _accumulate("ergodic", cfg, trials, seed, workers)
    return ErgodicRates(
        noma_user_rate=_sample_mean(sums[0], sumsq[0], n, seed),
        noma_sum_rate=_sample_mean(sums[1], sumsq[1], n, seed),
        comp_rate=_sample_mean(sums[2], sumsq[2], n, seed),
    )


def simulate_fixed_rate_throughput(cfg: SystemConfig, trials: int, seed: int,
                                   workers: int = 1) -> MonteCarloEstimate:
    """Outage sum rate: successfully decoded targets summed per realization."""
    sums, sumsq, n = _accumulate("throughput", cfg, trials, seed, workers)
    return _sample_mean(sums[0], sumsq[0], n, seed)


@dataclass(frozen=True)
class NearestOutcome:
    noma_outage: MonteCarloEstimate
    comp_outage: MonteCarloEstimate
    outage_sum_rate: MonteCarloEstimate
    ordering_violations: int  # realizations where the edge user succeeded
    #                           while its station's cluster user failed


def simulate_nearest_scheme(cfg: SystemConfig, trials: int, seed: int,
                            workers: int = 1) -> NearestOutcome:
    """Outage metrics when only the station nearest the origin serves."""
    sums, sumsq, n = _accumulate("nearest", cfg, trials, seed, workers)
    return NearestOutcome(
        noma_outage=_binomial(sums[0], n, seed),
        comp_outage=_binomial(sums[1], n, seed),
        outage_sum_rate=_sample_mean(sums[2], sumsq[2], n, seed),
        ordering_violations=int(round(sums[3])),
    )


@dataclass(frozen=True)
class OmaBaselines:
    comp_outage_oma: MonteCarloEstimate
    comp_rate_oma: MonteCarloEstimate
    nearest_outage_oma: MonteCarloEstimate


def simulate_oma_baselines(cfg: SystemConfig, trials: int, seed: int,
                           workers: int = 1) -> OmaBaselines:
    """Noise-limited orthogonal baseline: the edge user transmits alone."""
    sums, sumsq, n = _accumulate("oma", cfg, trials, seed, workers)
    return OmaBaselines(
        comp_outage_oma=_binomial(sums[0], n, seed),
        comp_rate_oma=_sample_mean(sums[1], sumsq[1], n, seed),
        nearest_outage_oma=_binomial(sums[2], n, seed),
    )
