"""Uplink coordinated-multipoint NOMA: simulation and closed-form analysis."""

from .config import (
    ConfigError,
    DerivedConstants,
    SystemConfig,
    build_config,
    config_fingerprint,
    dbm_to_watts,
    derive_constants,
    load_config_file,
    watts_to_dbm,
)
from .pointprocess import (
    ClusterDraw,
    NetworkGeometry,
    sample_geometry,
    sample_hppp,
    sample_uniform_disk,
    trial_stream,
    write_geometry_csv,
)
from .channel import (
    CompositeGain,
    FadingMatrix,
    composite_gain,
    draw_fading,
    path_loss,
    select_noma_user,
    select_users,
)
from .analytic import (
    Composition,
    GainBasis,
    QuadratureError,
    UnsupportedExponentError,
    beta_fn,
    enumerate_compositions,
    gain_basis,
    gain_cdf,
    gain_cdf_exact,
    gain_pdf,
    hyp2f1_special,
    laplace_comp,
    laplace_inter,
    laplace_inter_nearest,
    nearest_comp_outage_approx,
    nearest_noma_outage_approx,
    noma_ergodic_rate_approx,
    noma_outage_approx,
    noma_outage_approx_raw,
    noma_sum_rate_from_average,
)
from .simulate import (
    DecodingOutcome,
    ErgodicRates,
    MonteCarloEstimate,
    NearestOutcome,
    OmaBaselines,
    evaluate_realization,
    simulate_comp_outage,
    simulate_ergodic_rates,
    simulate_fixed_rate_throughput,
    simulate_nearest_scheme,
    simulate_noma_outage,
    simulate_oma_baselines,
)

__version__ = "0.1.0"
