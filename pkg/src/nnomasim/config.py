"""System parameters and derived constants for the uplink CoMP-NOMA model.

Everything is SI internally: metres, watts, hertz, W/Hz, points per m^2.
dBm values only exist at the CLI boundary and are converted with
``dbm_to_watts`` before a :class:`SystemConfig` is built.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 2.99792458e8  # m/s

# Minimum window size for interferer sampling; below this the truncated
# far-field contribution is no longer negligible against thermal noise.
MIN_SIM_RADIUS = 2000.0  # m
SIM_RADIUS_FACTOR = 5.0  # default window = this multiple of radius_comp


class ConfigError(ValueError):
    """A SystemConfig field violates its constraints."""


@dataclass(frozen=True)
class SystemConfig:
    """Physical and protocol parameters of one network scenario.

    Immutable; safe to share across workers.  ``sim_radius`` is the only
    simulation-side knob: interfering clusters are sampled inside a disk of
    this radius around the cell-edge user, everything else is physics.
    """

    lambda_c: float              # base-station density [1/m^2]
    radius_cluster: float        # cluster disk radius around each BS [m]
    radius_comp: float           # cooperation disk radius around the origin [m]
    k_users: int                 # candidate users per cluster
    power_noma: float            # cluster-user transmit power [W]
    power_ratio: float           # edge-user power divided by cluster-user power
    rate_noma: float             # cluster-user target rate [bits per channel use]
    rate_comp: float             # edge-user target rate [bits per channel use]
    alpha: float = 4.0           # path-loss exponent (> 2)
    carrier_freq: float = 2e9    # [Hz]
    bandwidth: float = 1e7       # [Hz]
    noise_density: float = 1e-20  # thermal noise density [W/Hz] (-170 dBm/Hz)
    cheb_order: int = 20         # order of the exponential-mixture gain CDF
    sim_radius: float | None = None  # interferer sampling window [m]

    def __post_init__(self):
        if self.sim_radius is None:
            default = max(SIM_RADIUS_FACTOR * self.radius_comp, MIN_SIM_RADIUS)
            object.__setattr__(self, "sim_radius", default)
        self._validate()

    def _validate(self):
        positive = (
            "lambda_c", "radius_cluster", "radius_comp", "power_noma",
            "power_ratio", "carrier_freq", "bandwidth", "noise_density",
            "sim_radius",
        )
        for name in positive:
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{name} must be a finite positive number, got {value!r}")
        for name in ("rate_noma", "rate_comp"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value >= 0):
                raise ConfigError(f"{name} must be finite and non-negative, got {value!r}")
        if not (isinstance(self.k_users, int) and self.k_users >= 1):
            raise ConfigError(f"k_users must be an integer >= 1, got {self.k_users!r}")
        if not (isinstance(self.cheb_order, int) and self.cheb_order >= 1):
            raise ConfigError(f"cheb_order must be an integer >= 1, got {self.cheb_order!r}")
        if not (math.isfinite(self.alpha) and self.alpha > 2):
            raise ConfigError(f"alpha must be > 2 (got {self.alpha!r}); "
                              "the interference integrals diverge otherwise")
        if self.sim_radius < self.radius_comp:
            raise ConfigError(
                f"sim_radius ({self.sim_radius}) must cover the cooperation disk "
                f"(radius_comp = {self.radius_comp})")

    def replace(self, **changes) -> "SystemConfig":
        """Return a copy with the given fields changed (revalidated)."""
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class DerivedConstants:
    """Constants computed from a SystemConfig; never mutated independently."""

    eta: float       # free-space scale c^2 / (16 pi^2 f_c^2)
    sigma2: float    # noise power [W]
    rho: float       # transmit-SNR scale eta * P / sigma^2
    eps_noma: float  # SINR threshold 2^rate_noma - 1
    eps_comp: float  # SINR threshold 2^rate_comp - 1


def derive_constants(cfg: SystemConfig) -> DerivedConstants:
    """Compute the derived constants for ``cfg``.

    Pure function: identical inputs give bit-identical outputs.
    """
    eta = SPEED_OF_LIGHT ** 2 / (16.0 * math.pi ** 2 * cfg.carrier_freq ** 2)
    sigma2 = cfg.noise_density * cfg.bandwidth
    rho = eta * cfg.power_noma / sigma2
    eps_noma = math.pow(2.0, cfg.rate_noma) - 1.0
    eps_comp = math.pow(2.0, cfg.rate_comp) - 1.0
    return DerivedConstants(eta=eta, sigma2=sigma2, rho=rho,
                            eps_noma=eps_noma, eps_comp=eps_comp)


def dbm_to_watts(dbm: float) -> float:
    return 1e-3 * 10.0 ** (dbm / 10.0)


def watts_to_dbm(watts: float) -> float:
    if watts <= 0:
        raise ValueError(f"power must be positive, got {watts!r}")
    return 10.0 * math.log10(watts / 1e-3)


_FIELD_TYPES = {f.name: (int if f.name in ("k_users", "cheb_order") else float)
                for f in dataclasses.fields(SystemConfig)}


def _parse_value(key: str, raw: str):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    caster = _FIELD_TYPES[key]
    try:
        if caster is int:
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {raw!r}") from exc


def load_config_file(path) -> dict:
    """Parse a flat ``key = value`` text file into a field mapping.

    Blank lines and ``#`` comments are skipped.  Unknown keys are errors.
    """
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            if key in values:
                raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = _parse_value(key, raw)
    return values


def parse_override(text: str) -> tuple[str, object]:
    """Parse one ``key=value`` CLI override."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = (part.strip() for part in text.split("=", 1))
    return key, _parse_value(key, raw)


def build_config(values: dict) -> SystemConfig:
    """Build a SystemConfig from a field mapping (e.g. a parsed file)."""
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return SystemConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def config_fingerprint(cfg: SystemConfig) -> str:
    """Short stable hash of every field; lands in every emitted CSV row."""
    payload = ",".join(
        f"{f.name}={getattr(cfg, f.name)!r}" for f in dataclasses.fields(SystemConfig)
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:12]
