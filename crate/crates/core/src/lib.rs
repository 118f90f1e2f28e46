//! Beam-squint modeling for ultra-wideband massive MIMO arrays, and a lens
//! antenna subarray (LAS) transceiver that splits the band into analog
//! subbands and re-steers each one by switching feed ports under the lenses.
//!
//! The crate is organized bottom-up:
//!
//! - [`array`]: array geometry, steering vectors, squinted beam direction and
//!   spatial-wideband channel generation.
//! - [`subband`]: half-power beamwidth, filter-count sizing and the
//!   subcarrier-to-subband partition.
//! - [`las`]: phase-shifter precoder, lens beam quantization, selection
//!   matrix, composite RF precoder and beam gain.
//! - [`search`]: per-subband antenna-selection search (exhaustive and
//!   threshold-based) with evaluation counters.
//! - [`metrics`]: gain-vs-frequency sweeps, power consumption and Monte-Carlo
//!   capacity.
//!
//! All frequencies passed around internally are baseband offsets from the
//! carrier; the absolute frequency is `carrier + offset`.

pub mod array;
pub mod error;
pub mod las;
pub mod metrics;
mod numeric;
pub mod search;
pub mod subband;

pub use array::{
    complex_normal, draw_channel, effective_direction, effective_steering, generate_channel,
    ideal_steering, squint_steering, ArrayConfig, ChannelRealization, Path, PathParams,
    SteeringKind, SteeringVector, RNG_NAME, SPEED_OF_LIGHT,
};
pub use error::{Error, Result};
pub use las::{
    beam_gain, lens_beam_angle, nearest_beam, ps_precoder, rf_precoder, selection_matrix,
    LensSelection, RfPrecoder, SelectionMatrix,
};
pub use metrics::{
    capacity, gain_sweep, power_baselines, power_consumption, rate, realization_seed,
    CapacityConfig, CapacityPoint, CapacityTable, GainMode, GainPoint, PowerBaselines,
    PowerBreakdown, PowerModel, RateNormalization,
};
pub use search::{
    effective_beam_direction, exhaustive_search, exhaustive_search_all, middle_out_order,
    threshold_search, BeamDirection, SearchContext, SearchMethod, SearchResult, ShellWalk,
    SubbandOutcome, ThresholdPolicy, EXHAUSTIVE_LIMIT,
};
pub use subband::{
    filter_bound, half_power_beamwidth, half_power_beamwidth_approx, min_filters,
    within_band_squint, SubbandPlan,
};
