"""Closed-form outage and rate evaluation.

The composite channel gain of an unordered cluster user is represented as a
finite exponential mixture (Chebyshev-node expansion of the disk average of
the fading CDF).  Feeding that mixture through the interference Laplace
transforms yields closed forms for

* the cluster-user outage probability (disk-averaged over decoder sites),
* its ergodic rate (semi-infinite integral of the outage complement),
* the ergodic sum rate across the cooperation disk,
* outage probabilities of the nearest-station variant (exponent 4 only).

Raw mixture-based probabilities can leak slightly outside [0, 1]; public
functions clamp, the ``*_raw`` variants expose the approximation quality.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.integrate import IntegrationWarning, quad

from .config import SystemConfig, derive_constants

COMPOSITION_LIMIT = 10 ** 7  # refuse enumerations larger than this

_LN2 = math.log(2.0)


class UnsupportedExponentError(ValueError):
    """A closed form is only available for path-loss exponent 4."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, value=None, error_estimate=None):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


def _clamp01(x: float) -> float:
    return min(1.0, max(0.0, x))


# ---------------------------------------------------------------------------
# special functions
# ---------------------------------------------------------------------------

def beta_fn(a: float, b: float) -> float:
    """Euler beta function via log-gamma."""
    if a <= 0 or b <= 0:
        raise ValueError(f"beta_fn requires positive arguments, got ({a!r}, {b!r})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def hyp2f1_special(alpha: float, x):
    """Gauss hypergeometric 2F1(1, 1+2/a; 2+2/a; x) for x <= 0.

    This single parameter pattern is the disk average of the edge-user
    interference attenuation.  At alpha = 4 it reduces to an elementary
    arctan form (series below |x| = 1/2 to avoid the cancellation in
    1 - arctan(t)/t); other exponents go through scipy.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr > 0):
        raise ValueError("hyp2f1_special is only defined for x <= 0")
    if alpha == 4.0:
        big_x = -arr
        out = np.empty_like(big_x)
        small = big_x < 0.5
        if np.any(small):
            xs = -big_x[small]
            acc = np.zeros_like(xs)
            power = np.ones_like(xs)
            for k in range(64):
                acc += 3.0 / (3.0 + 2.0 * k) * power
                power *= xs
            out[small] = acc
        if np.any(~small):
            xb = big_x[~small]
            t = np.sqrt(xb)
            out[~small] = 3.0 * (1.0 - np.arctan(t) / t) / xb
        return out if out.ndim else float(out)
    result = special.hyp2f1(1.0, 1.0 + 2.0 / alpha, 2.0 + 2.0 / alpha, arr)
    return result if np.ndim(x) else float(result)


# ---------------------------------------------------------------------------
# composite-gain CDF (exponential mixture and exact integral)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GainBasis:
    """Exponential-mixture representation of the unordered gain CDF.

    ``ext_weights``/``ext_rates`` prepend the constant term (weight 1,
    rate 0) with the mixture weights negated, which is the arrangement the
    multinomial expansion of the K-th order statistic consumes.
    """

    order: int
    nodes: np.ndarray        # (N,) Chebyshev nodes in (-1, 1)
    weights: np.ndarray      # (N,) positive mixture weights, sum ~ 1
    rates: np.ndarray        # (N,) exponential decay rates
    ext_weights: np.ndarray  # (N+1,) [1, -w_1, ..., -w_N]
    ext_rates: np.ndarray    # (N+1,) [0, c_1, ..., c_N]


def gain_basis(cfg: SystemConfig) -> GainBasis:
    n = np.arange(1, cfg.cheb_order + 1)
    nodes = np.cos((2.0 * n - 1.0) / (2.0 * cfg.cheb_order) * np.pi)
    weights = np.pi / (2.0 * cfg.cheb_order) * np.sqrt(1.0 - nodes ** 2) * (nodes + 1.0)
    radii = 0.5 * cfg.radius_cluster * (nodes + 1.0)
    rates = radii ** cfg.alpha
    ext_weights = np.concatenate(([1.0], -weights))
    ext_rates = np.concatenate(([0.0], rates))
    return GainBasis(order=cfg.cheb_order, nodes=nodes, weights=weights,
                     rates=rates, ext_weights=ext_weights, ext_rates=ext_rates)


def gain_cdf_raw(z, basis: GainBasis):
    """Mixture CDF without clamping (may exceed [0, 1] by the mixture defect)."""
    z = np.asarray(z, dtype=float)
    out = np.tensordot(1.0 - np.exp(-np.multiply.outer(z, basis.rates)),
                       basis.weights, axes=([-1], [0]))
    return out if out.ndim else float(out)


def gain_cdf(z, basis: GainBasis):
    """Mixture CDF of the unordered composite gain, clamped to [0, 1]."""
    return np.clip(gain_cdf_raw(z, basis), 0.0, 1.0)


def gain_pdf(z, basis: GainBasis):
    """Mixture density of the unordered composite gain."""
    z = np.asarray(z, dtype=float)
    out = np.tensordot(np.exp(-np.multiply.outer(z, basis.rates)),
                       basis.weights * basis.rates, axes=([-1], [0]))
    return out if out.ndim else float(out)


def gain_cdf_exact(z, cfg: SystemConfig, n_nodes: int = 512):
    """Exact unordered-gain CDF by quadrature of its defining disk average.

    F(z) = integral over the cluster disk of (1 - exp(-r^alpha z)) with the
    radial density 2r/Rc^2; evaluated with Gauss-Legendre in u = r^2.
    """
    z = np.asarray(z, dtype=float)
    u_nodes, u_weights = np.polynomial.legendre.leggauss(n_nodes)
    r2 = cfg.radius_cluster ** 2
    u = 0.5 * r2 * (u_nodes + 1.0)          # map [-1, 1] -> [0, Rc^2]
    w = 0.5 * u_weights                      # jacobian folded with 1/Rc^2
    vals = 1.0 - np.exp(-np.multiply.outer(z, u ** (0.5 * cfg.alpha)))
    out = np.tensordot(vals, w, axes=([-1], [0]))
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# interference Laplace transforms
# ---------------------------------------------------------------------------

def _inter_exponent(s, cfg: SystemConfig):
    """Positive exponent of the plane-interference Laplace transform."""
    s = np.asarray(s, dtype=float)
    return (2.0 * np.pi * cfg.lambda_c / cfg.alpha
            * s ** (2.0 / cfg.alpha)
            * beta_fn(2.0 / cfg.alpha, (cfg.alpha - 2.0) / cfg.alpha))


def laplace_comp(s, dist: float, cfg: SystemConfig):
    """Laplace transform of the edge-user interference at distance ``dist``."""
    if dist <= 0:
        raise ValueError(f"dist must be positive, got {dist!r}")
    s = np.asarray(s, dtype=float)
    out = 1.0 / (1.0 + s * cfg.power_ratio * dist ** (-cfg.alpha))
    return out if out.ndim else float(out)


def laplace_inter(s, cfg: SystemConfig):
    """Laplace transform of the aggregate cluster-user interference.

    Exact for selection-independent marks on the full plane; requires
    alpha > 2 (enforced by SystemConfig).
    """
    out = np.exp(-_inter_exponent(s, cfg))
    return out if out.ndim else float(out)


def _exclusion_exponent(s, d, lam: float):
    """Exponent credit for interferers excluded from the near zone.

    Valid at alpha = 4; vanishes at s = 0 or d = 0.
    """
    s = np.asarray(s, dtype=float)
    d = np.asarray(d, dtype=float)
    s_safe = np.where(s > 0.0, s, 1.0)
    inner = np.sqrt(-0.5 + 0.5 * np.sqrt(1.0 + 16.0 * d ** 4 / s_safe))
    term = 0.5 * np.pi * lam * np.sqrt(s) * np.arctan(inner)
    return np.where(s > 0.0, term, 0.0)


def laplace_inter_nearest(s, d, cfg: SystemConfig):
    """Cluster-interference Laplace transform with the near zone emptied.

    Models the interference seen by the station closest to the origin: no
    interfering cluster head lies within distance ``d`` of the origin.  The
    offset of the interfering user relative to its own station is neglected,
    consistent with stations being far apart relative to cluster radii.
    """
    _require_alpha4(cfg, "laplace_inter_nearest")
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("s must be non-negative")
    out = np.exp(-_inter_exponent(s_arr, cfg)
                 + _exclusion_exponent(s_arr, d, cfg.lambda_c))
    return out if out.ndim else float(out)


def _require_alpha4(cfg: SystemConfig, what: str):
    if cfg.alpha != 4.0:
        raise UnsupportedExponentError(
            f"{what} has a closed form only for alpha = 4, got {cfg.alpha}")


# ---------------------------------------------------------------------------
# multinomial compositions of the order-statistic expansion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Composition:
    """One term of the multinomial expansion of the K-th order statistic."""

    counts: tuple            # (N+1,) non-negative ints summing to K
    coefficient: int         # exact multinomial coefficient
    mu: float | None = None  # sum of counts[1:] * mixture rates, if rates given


def _gen_compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _gen_compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=64)
def _composition_arrays(k: int, order: int):
    """All (order+1)-part compositions of k except (k, 0, ..., 0).

    Returns (counts matrix, exact multinomial coefficients).  Guarded
    against runaway enumeration.
    """
    if k < 1 or order < 1:
        raise ValueError("need k >= 1 and order >= 1")
    total = math.comb(k + order, order)
    if total > COMPOSITION_LIMIT:
        raise ValueError(
            f"composition enumeration C({k + order},{order}) = {total} "
            f"exceeds the limit {COMPOSITION_LIMIT}")
    rows = [c for c in _gen_compositions(k, order + 1) if c[0] != k]
    counts = np.array(rows, dtype=np.int64)
    fact_k = math.factorial(k)
    coeffs = np.array(
        [fact_k // math.prod(math.factorial(c) for c in row) for row in rows],
        dtype=np.int64)
    return counts, coeffs


def enumerate_compositions(k: int, order: int, ext_rates=None) -> list[Composition]:
    """Materialise the expansion terms; ``ext_rates`` fills in ``mu``."""
    counts, coeffs = _composition_arrays(k, order)
    if ext_rates is not None:
        rates = np.asarray(ext_rates, dtype=float)
        mus = counts @ rates
    else:
        mus = [None] * len(coeffs)
    return [Composition(counts=tuple(int(v) for v in row),
                        coefficient=int(c), mu=(float(m) if m is not None else None))
            for row, c, m in zip(counts, coeffs, mus)]


@dataclass(frozen=True)
class _TermTable:
    """Per-composition constants shared by every closed form."""

    mu: np.ndarray    # (M,) mixture-rate sums, strictly positive
    base: np.ndarray  # (M,) coefficient times the signed weight product


def _term_table(cfg: SystemConfig, basis: GainBasis | None = None) -> _TermTable:
    basis = gain_basis(cfg) if basis is None else basis
    counts, coeffs = _composition_arrays(cfg.k_users, cfg.cheb_order)
    tail = counts[:, 1:]
    mu = tail @ basis.rates
    # prod over n>=1 of (-w_n)^{k_n}: sign from the total tail count,
    # magnitude in log space.
    sign = np.where((cfg.k_users - counts[:, 0]) % 2 == 0, 1.0, -1.0)
    log_mag = tail @ np.log(basis.weights)
    base = coeffs.astype(float) * sign * np.exp(log_mag)
    # every retained composition has at least one n>=1 count, so mu > 0 and
    # divisions by mu are safe
    assert np.all(mu > 0.0)
    return _TermTable(mu=mu, base=base)


# ---------------------------------------------------------------------------
# quadrature plumbing
# ---------------------------------------------------------------------------

def _integrate_half_line(fn, scale: float = 1.0, epsrel: float = 1e-6,
                         limit: int = 200) -> float:
    """Adaptive integral of ``fn`` over (0, inf) via x = scale * t/(1-t)."""

    def mapped(t):
        if t >= 1.0:
            return 0.0
        x = scale * t / (1.0 - t)
        return fn(x) * scale / (1.0 - t) ** 2

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        value, err = quad(mapped, 0.0, 1.0, epsabs=1e-12, epsrel=epsrel,
                          limit=limit)
    trouble = [w for w in caught if issubclass(w.category, IntegrationWarning)]
    if trouble:
        raise QuadratureError(
            f"half-line quadrature did not converge: {trouble[0].message} "
            f"(value ~ {value}, error estimate {err})",
            value=value, error_estimate=err)
    return value


# ---------------------------------------------------------------------------
# closed forms: general scheme
# ---------------------------------------------------------------------------

def _disk_mean_attenuation(b, cfg: SystemConfig):
    """Average of 1/(1 + b / r^alpha) over decoder sites uniform in the disk.

    Equals 2 R^a / (b (2+a)) * 2F1(1, 1+2/a; 2+2/a; -R^a / b); exactly 1 at
    b = 0.
    """
    b = np.asarray(b, dtype=float)
    b_safe = np.where(b > 0.0, b, 1.0)
    ra = cfg.radius_comp ** cfg.alpha
    value = (2.0 * ra / (b_safe * (2.0 + cfg.alpha))
             * hyp2f1_special(cfg.alpha, -ra / b_safe))
    return np.where(b > 0.0, value, 1.0)


def _outage_complement_terms(cfg: SystemConfig, tbl: _TermTable, rho: float,
                             eps) -> np.ndarray:
    """Signed expansion terms of the decoder outage at threshold ``eps``."""
    s = tbl.mu * eps
    return (tbl.base
            * np.exp(-s / rho)
            * np.exp(-_inter_exponent(s, cfg))
            * _disk_mean_attenuation(cfg.power_ratio * s, cfg))


def noma_outage_approx_raw(cfg: SystemConfig, eps: float | None = None) -> float:
    """Unclamped closed-form outage of a disk-typical cluster user."""
    dc = derive_constants(cfg)
    eps = dc.eps_noma if eps is None else float(eps)
    if eps < 0:
        raise ValueError(f"threshold must be non-negative, got {eps!r}")
    tbl = _term_table(cfg)
    terms = _outage_complement_terms(cfg, tbl, dc.rho, eps)
    return 1.0 + math.fsum(terms.tolist())


def noma_outage_approx(cfg: SystemConfig, eps: float | None = None) -> float:
    """Closed-form outage probability of a disk-typical cluster user.

    Decoder sites are averaged uniformly over the cooperation disk; the
    result is clamped to [0, 1] (see :func:`noma_outage_approx_raw` for the
    approximation defect).
    """
    return _clamp01(noma_outage_approx_raw(cfg, eps))


def noma_ergodic_rate_approx(cfg: SystemConfig, epsrel: float = 1e-6,
                             limit: int = 200) -> float:
    """Closed-form ergodic rate of a disk-typical cluster user [BPCU].

    Integrates the outage complement against 1/((1+x) ln 2) over the
    positive half line.
    """
    dc = derive_constants(cfg)
    tbl = _term_table(cfg)

    def integrand(x):
        terms = _outage_complement_terms(cfg, tbl, dc.rho, x)
        return -math.fsum(terms.tolist()) / ((1.0 + x) * _LN2)

    return _integrate_half_line(integrand, scale=1.0, epsrel=epsrel, limit=limit)


def noma_sum_rate_from_average(cfg: SystemConfig, r_ave: float) -> float:
    """Ergodic sum rate across the cooperation disk from the per-user rate.

    The expected number of stations in the disk is lambda * pi * R^2.
    """
    if r_ave < 0:
        raise ValueError(f"r_ave must be non-negative, got {r_ave!r}")
    return math.pi * cfg.lambda_c * cfg.radius_comp ** 2 * r_ave


# ---------------------------------------------------------------------------
# closed forms: nearest-station scheme (alpha = 4)
# ---------------------------------------------------------------------------

def _nearest_distance_scale(cfg: SystemConfig) -> float:
    return 1.0 / math.sqrt(math.pi * cfg.lambda_c)


def nearest_noma_outage_approx_raw(cfg: SystemConfig, epsrel: float = 1e-6,
                                   limit: int = 200) -> float:
    """Unclamped cluster-user outage when only the nearest station decodes."""
    _require_alpha4(cfg, "nearest_noma_outage_approx")
    dc = derive_constants(cfg)
    tbl = _term_table(cfg)
    lam = cfg.lambda_c
    phi = cfg.power_ratio
    s = tbl.mu * dc.eps_noma
    prefactor = tbl.base * np.exp(-s / dc.rho) * np.exp(-_inter_exponent(s, cfg))

    def integrand(d):
        d4 = d ** 4
        weights = (np.exp(_exclusion_exponent(s, d, lam))
                   * d4 / (d4 + phi * s))
        density = 2.0 * lam * np.pi * d * math.exp(-lam * np.pi * d * d)
        return math.fsum((prefactor * weights).tolist()) * density

    integral = _integrate_half_line(integrand, scale=_nearest_distance_scale(cfg),
                                    epsrel=epsrel, limit=limit)
    return 1.0 + integral


def nearest_noma_outage_approx(cfg: SystemConfig, epsrel: float = 1e-6,
                               limit: int = 200) -> float:
    """Outage of the nearest station's cluster user, clamped to [0, 1]."""
    return _clamp01(nearest_noma_outage_approx_raw(cfg, epsrel=epsrel, limit=limit))


def nearest_comp_outage_approx_raw(cfg: SystemConfig, epsrel: float = 1e-6,
                                   limit: int = 200) -> float:
    """Unclamped edge-user outage when only the nearest station serves it."""
    _require_alpha4(cfg, "nearest_comp_outage_approx")
    dc = derive_constants(cfg)
    tbl = _term_table(cfg)
    lam = cfg.lambda_c
    phi = cfg.power_ratio
    eps0 = dc.eps_comp
    s1 = tbl.mu * dc.eps_noma
    prefactor = tbl.base * np.exp(-s1 / dc.rho)

    def integrand(d):
        d4 = d ** 4
        denom = phi * s1 + d4
        xi = s1 + eps0 * denom / phi
        exponent = (-_inter_exponent(xi, cfg)
                    + _exclusion_exponent(xi, d, lam)
                    - eps0 * denom / (phi * dc.rho))
        weights = np.exp(exponent) * 2.0 * np.pi * lam * d ** 5 / denom
        return math.fsum((prefactor * weights).tolist()) * math.exp(-lam * np.pi * d * d)

    integral = _integrate_half_line(integrand, scale=_nearest_distance_scale(cfg),
                                    epsrel=epsrel, limit=limit)
    return 1.0 + integral


def nearest_comp_outage_approx(cfg: SystemConfig, epsrel: float = 1e-6,
                               limit: int = 200) -> float:
    """Outage of the edge user under the nearest-station scheme, in [0, 1]."""
    return _clamp01(nearest_comp_outage_approx_raw(cfg, epsrel=epsrel, limit=limit))
