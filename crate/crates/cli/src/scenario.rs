//! Scenario files: TOML with one section per subsystem. Every key is
//! optional; missing keys take the reference configuration (M = 128,
//! N_L = 4, f_c = 60 GHz, W = 5 GHz, N = 2048, N_F = 16, θ̂ = π/4).

use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use squint_core::{
    min_filters, ArrayConfig, CapacityConfig, PowerModel, RateNormalization, SearchContext,
    SubbandPlan, ThresholdPolicy,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub target_angle_rad: f64,
    pub array: ArraySection,
    pub subband: SubbandSection,
    pub search: SearchSection,
    pub power: PowerSection,
    pub capacity: CapacitySection,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            seed: 0,
            output_dir: PathBuf::from("out"),
            target_angle_rad: FRAC_PI_4,
            array: ArraySection::default(),
            subband: SubbandSection::default(),
            search: SearchSection::default(),
            power: PowerSection::default(),
            capacity: CapacitySection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub antennas: usize,
    pub lenses: usize,
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub subcarriers: usize,
    /// Element spacing; half a carrier wavelength when absent.
    pub spacing_m: Option<f64>,
}

impl Default for ArraySection {
    fn default() -> Self {
        ArraySection {
            antennas: 128,
            lenses: 4,
            carrier_hz: 60e9,
            bandwidth_hz: 5e9,
            subcarriers: 2048,
            spacing_m: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Keyword {
    Auto,
}

/// `filters = "auto"` sizes the filter bank from the beamwidth; an integer
/// fixes it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FilterSpec {
    Count(usize),
    Keyword(Keyword),
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FilterSpec::Count(n) => write!(f, "{n}"),
            FilterSpec::Keyword(Keyword::Auto) => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SubbandSection {
    pub filters: FilterSpec,
}

impl Default for SubbandSection {
    fn default() -> Self {
        SubbandSection {
            filters: FilterSpec::Count(16),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Threshold,
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSection {
    pub method: Method,
    /// Threshold at the carrier; half the beamwidth when absent.
    pub threshold_base_rad: Option<f64>,
    /// Per-subband evaluation cap; `P^N_L` when absent.
    pub max_evaluations: Option<u64>,
    /// Coarse-grid decimation for exhaustive runs.
    pub grid_decimation: usize,
    /// Exclude tuples already assigned to earlier subbands.
    pub remove_used: bool,
}

impl Default for SearchSection {
    fn default() -> Self {
        SearchSection {
            method: Method::Threshold,
            threshold_base_rad: None,
            max_evaluations: None,
            grid_decimation: 1,
            remove_used: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub tx_power_w: f64,
    pub pa_efficiency: f64,
    pub switch_loss_per_stage_db: f64,
    /// Total filter insertion loss; 1 dB per filter when absent.
    pub filter_loss_db: Option<f64>,
    pub phase_shifter_w: f64,
    pub rf_chain_w: f64,
    pub spmt_switch_w: f64,
    pub rf_chains: usize,
    /// Antenna counts for the power comparison, at the scenario's N_L.
    pub sweep_antennas: Vec<usize>,
}

impl Default for PowerSection {
    fn default() -> Self {
        let m = PowerModel::default();
        PowerSection {
            tx_power_w: m.tx_power,
            pa_efficiency: m.pa_efficiency,
            switch_loss_per_stage_db: m.switch_loss_per_stage_db,
            filter_loss_db: m.filter_loss_db,
            phase_shifter_w: m.phase_shifter,
            rf_chain_w: m.rf_chain,
            spmt_switch_w: m.spmt_switch,
            rf_chains: m.rf_chains,
            sweep_antennas: vec![64, 128, 256],
        }
    }
}

impl PowerSection {
    pub fn model(&self) -> PowerModel {
        PowerModel {
            tx_power: self.tx_power_w,
            pa_efficiency: self.pa_efficiency,
            switch_loss_per_stage_db: self.switch_loss_per_stage_db,
            filter_loss_db: self.filter_loss_db,
            phase_shifter: self.phase_shifter_w,
            rf_chain: self.rf_chain_w,
            spmt_switch: self.spmt_switch_w,
            rf_chains: self.rf_chains,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacitySection {
    pub snr_db: Vec<f64>,
    pub realizations: usize,
    pub normalization: RateNormalization,
    /// `[N_L, N_F]` pairs evaluated by the capacity experiment.
    pub sweep: Vec<[usize; 2]>,
}

impl Default for CapacitySection {
    fn default() -> Self {
        CapacitySection {
            snr_db: (-2..=6).map(|i| i as f64 * 5.0).collect(),
            realizations: 100,
            normalization: RateNormalization::Paper,
            sweep: vec![[4, 4], [4, 8], [4, 16], [2, 16]],
        }
    }
}

impl CapacitySection {
    pub fn config(&self, seed: u64) -> CapacityConfig {
        CapacityConfig {
            seed,
            realizations: self.realizations,
            normalization: self.normalization,
            ..CapacityConfig::from_db(&self.snr_db)
        }
    }
}

/// A scenario checked against every constraint of the core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub cfg: ArrayConfig,
    pub ctx: SearchContext,
    pub plan: SubbandPlan,
    /// Raw filter-count bound; `None` when every count satisfies it.
    pub filter_bound: Option<f64>,
    pub auto_filters: usize,
    pub policy: ThresholdPolicy,
    pub power: PowerModel,
    pub capacity: CapacityConfig,
}

fn at<T, E: fmt::Display>(path: &str, r: std::result::Result<T, E>) -> Result<T> {
    r.map_err(|e| anyhow!("{path}: {e}"))
}

pub fn array_config(a: &ArraySection, antennas: usize, lenses: usize) -> Result<ArrayConfig> {
    let cfg = at(
        "array",
        ArrayConfig::new(
            antennas,
            lenses,
            a.carrier_hz,
            a.bandwidth_hz,
            a.subcarriers,
        ),
    )?;
    match a.spacing_m {
        Some(d) => at("array.spacing_m", cfg.with_spacing(d)),
        None => Ok(cfg),
    }
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing scenario {}", path.display()))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let cfg = array_config(&self.array, self.array.antennas, self.array.lenses)?;
        let theta = self.target_angle_rad;
        if !(theta.abs() <= FRAC_PI_4) {
            return Err(anyhow!(
                "target_angle_rad: {theta} is outside the lens scan range [-π/4, π/4]"
            ));
        }
        let ctx = at("target_angle_rad", SearchContext::new(&cfg, theta))?;
        let filter_bound = squint_core::filter_bound(&cfg, ctx.beamwidth());
        let auto_filters = at("subband.filters", min_filters(&cfg, ctx.beamwidth()))?;
        let filters = match self.subband.filters {
            FilterSpec::Count(n) => n,
            FilterSpec::Keyword(Keyword::Auto) => auto_filters,
        };
        let plan = at("subband.filters", SubbandPlan::new(&cfg, filters))?;

        let mut policy = ThresholdPolicy::from_beamwidth(ctx.beamwidth());
        if let Some(b) = self.search.threshold_base_rad {
            if !(b.is_finite() && b > 0.0) {
                return Err(anyhow!(
                    "search.threshold_base_rad: must be positive, got {b}"
                ));
            }
            policy.base = b;
        }
        if self.search.max_evaluations == Some(0) {
            return Err(anyhow!("search.max_evaluations: must be at least 1"));
        }
        policy.max_evaluations = self.search.max_evaluations;
        if self.search.grid_decimation == 0 {
            return Err(anyhow!("search.grid_decimation: must be at least 1"));
        }

        let power = self.power.model();
        at("power", power.validate())?;
        for &m in &self.power.sweep_antennas {
            array_config(&self.array, m, self.array.lenses)
                .map_err(|e| anyhow!("power.sweep_antennas: M = {m}: {e}"))?;
        }

        let capacity = self.capacity.config(self.seed);
        at("capacity", capacity.validate())?;
        for &[nl, nf] in &self.capacity.sweep {
            let c = array_config(&self.array, self.array.antennas, nl)
                .map_err(|e| anyhow!("capacity.sweep: N_L = {nl}: {e}"))?;
            SubbandPlan::new(&c, nf).map_err(|e| anyhow!("capacity.sweep: N_F = {nf}: {e}"))?;
        }

        Ok(Resolved {
            scenario: self.clone(),
            cfg,
            ctx,
            plan,
            filter_bound,
            auto_filters,
            policy,
            power,
            capacity,
        })
    }
}
