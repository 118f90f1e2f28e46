//! Evaluation quantities: beam gain across the band, RF front-end power
//! consumption, and Monte-Carlo link capacity.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::array::{complex_normal, seeded_rng, ArrayConfig, PathResponses, RNG_NAME};
use crate::error::{Error, Result};
use crate::las::{beam_gain, rf_precoder, LensSelection, RfPrecoder};
use crate::search::SearchResult;
use crate::subband::SubbandPlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GainMode {
    /// Frequency-independent steering toward the target.
    Ideal,
    /// One selection, matched at the carrier, used across the whole band.
    FullSquint,
    /// The per-subband selection of a search result.
    Compensated,
}

impl GainMode {
    pub fn label(self) -> &'static str {
        match self {
            GainMode::Ideal => "ideal",
            GainMode::FullSquint => "full-squint",
            GainMode::Compensated => "compensated",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainPoint {
    pub subcarrier: usize,
    /// `δf_k / (W/2)`.
    pub normalized_freq: f64,
    pub gain_db: f64,
    pub mode: GainMode,
}

fn to_db(amplitude: f64) -> f64 {
    20.0 * amplitude.log10()
}

/// `|g(θ̂, δf_k)|` in dB on every subcarrier.
pub fn gain_sweep(
    cfg: &ArrayConfig,
    plan: &SubbandPlan,
    target: f64,
    mode: GainMode,
    solution: Option<&SearchResult>,
) -> Result<Vec<GainPoint>> {
    let precoders: Vec<RfPrecoder> = match mode {
        GainMode::Ideal => Vec::new(),
        GainMode::FullSquint => {
            vec![rf_precoder(
                cfg,
                target,
                &LensSelection::nearest(cfg, 0, target),
            )?]
        }
        GainMode::Compensated => {
            let sol = solution.ok_or_else(|| {
                Error::Config("compensated gain sweep needs a search result".into())
            })?;
            check_solution(cfg, plan, sol)?;
            sol.outcomes
                .iter()
                .map(|o| rf_precoder(cfg, target, &o.selection))
                .collect::<Result<_>>()?
        }
    };
    let half = cfg.bandwidth() / 2.0;
    Ok((0..cfg.fft_size())
        .map(|k| {
            let df = cfg.subcarrier_offset(k);
            let amplitude = match mode {
                GainMode::Ideal => 1.0,
                GainMode::FullSquint => beam_gain(cfg, &precoders[0], target, df).norm(),
                GainMode::Compensated => {
                    beam_gain(cfg, &precoders[plan.subband_of(k)], target, df).norm()
                }
            };
            GainPoint {
                subcarrier: k,
                normalized_freq: df / half,
                gain_db: to_db(amplitude),
                mode,
            }
        })
        .collect())
}

fn check_solution(cfg: &ArrayConfig, plan: &SubbandPlan, sol: &SearchResult) -> Result<()> {
    if sol.outcomes.len() != plan.filters {
        return Err(Error::Mismatch(format!(
            "search result has {} subbands, plan has {}",
            sol.outcomes.len(),
            plan.filters
        )));
    }
    if plan.block * plan.filters != cfg.fft_size() {
        return Err(Error::Mismatch(
            "subband plan does not match the array".into(),
        ));
    }
    Ok(())
}

/// RF front-end power parameters; powers in W, losses in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerModel {
    pub tx_power: f64,
    pub pa_efficiency: f64,
    pub switch_loss_per_stage_db: f64,
    /// Total filter insertion loss; `None` means 1 dB per filter.
    pub filter_loss_db: Option<f64>,
    pub phase_shifter: f64,
    pub rf_chain: f64,
    pub spmt_switch: f64,
    pub rf_chains: usize,
}

impl Default for PowerModel {
    fn default() -> Self {
        PowerModel {
            tx_power: 1.0,
            pa_efficiency: 0.2,
            switch_loss_per_stage_db: 1.0,
            filter_loss_db: None,
            phase_shifter: 0.030,
            rf_chain: 0.220,
            spmt_switch: 0.010,
            rf_chains: 1,
        }
    }
}

impl PowerModel {
    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("tx_power", self.tx_power),
            ("switch_loss_per_stage_db", self.switch_loss_per_stage_db),
            ("filter_loss_db", self.filter_loss_db.unwrap_or(0.0)),
            ("phase_shifter", self.phase_shifter),
            ("rf_chain", self.rf_chain),
            ("spmt_switch", self.spmt_switch),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(name, v, 0.0, f64::INFINITY));
            }
        }
        if !(self.pa_efficiency > 0.0 && self.pa_efficiency <= 1.0) {
            return Err(Error::domain("pa_efficiency", self.pa_efficiency, 0.0, 1.0));
        }
        if self.rf_chains == 0 {
            return Err(Error::Config("rf_chains must be at least 1".into()));
        }
        Ok(())
    }

    pub fn filter_loss(&self, filters: usize) -> f64 {
        self.filter_loss_db.unwrap_or(filters as f64)
    }
}

fn efficiency(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerBreakdown {
    /// SPMT stages per port selector, `⌈log2 P⌉`.
    pub switch_stages: u32,
    pub switch_efficiency: f64,
    pub filter_efficiency: f64,
    pub amplifier: f64,
    pub phase_shifters: f64,
    pub switches: f64,
    pub rf_chains: f64,
    pub total: f64,
    pub warnings: Vec<String>,
}

/// `P_x/(η_PA η_SW η_filter) + N_RF N_L P_PS + N_RF P_SW + N_RF P_RF` with
/// `P_SW = ⌈log2 P⌉ · N_L · N_F · P_SPMT`.
pub fn power_consumption(
    model: &PowerModel,
    cfg: &ArrayConfig,
    plan: &SubbandPlan,
) -> Result<PowerBreakdown> {
    model.validate()?;
    let p = cfg.per_lens();
    let mut warnings = Vec::new();
    if !p.is_power_of_two() {
        warnings.push(format!(
            "P = {p} is not a power of two; switch stages rounded up to {}",
            p.next_power_of_two().trailing_zeros()
        ));
    }
    let stages = p.next_power_of_two().trailing_zeros();
    let nrf = model.rf_chains as f64;
    let eta_sw = efficiency(stages as f64 * model.switch_loss_per_stage_db);
    let eta_f = efficiency(model.filter_loss(plan.filters));
    let amplifier = model.tx_power / (model.pa_efficiency * eta_sw * eta_f);
    let phase_shifters = nrf * cfg.lenses() as f64 * model.phase_shifter;
    let switches =
        nrf * stages as f64 * cfg.lenses() as f64 * plan.filters as f64 * model.spmt_switch;
    let rf_chains = nrf * model.rf_chain;
    Ok(PowerBreakdown {
        switch_stages: stages,
        switch_efficiency: eta_sw,
        filter_efficiency: eta_f,
        amplifier,
        phase_shifters,
        switches,
        rf_chains,
        total: amplifier + phase_shifters + switches + rf_chains,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerBaselines {
    /// Fully connected phased array: `P_x/η_PA + N_RF M P_PS + N_RF P_RF`.
    pub conventional: f64,
    /// Subband filters with per-lens phase shifters and no port switching.
    pub filter_ps: f64,
}

pub fn power_baselines(
    model: &PowerModel,
    cfg: &ArrayConfig,
    plan: &SubbandPlan,
) -> Result<PowerBaselines> {
    model.validate()?;
    let nrf = model.rf_chains as f64;
    let rf = nrf * model.rf_chain;
    let conventional = model.tx_power / model.pa_efficiency
        + nrf * cfg.antennas() as f64 * model.phase_shifter
        + rf;
    let eta_f = efficiency(model.filter_loss(plan.filters));
    let filter_ps = model.tx_power / (model.pa_efficiency * eta_f)
        + nrf * cfg.lenses() as f64 * model.phase_shifter
        + rf;
    Ok(PowerBaselines {
        conventional,
        filter_ps,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateNormalization {
    /// `W · Σ_k`.
    Paper,
    /// `(W/N) · Σ_k`.
    PerSubcarrier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CapacityConfig {
    /// Linear SNR values `γ`.
    pub snr: Vec<f64>,
    pub realizations: usize,
    pub seed: u64,
    pub normalization: RateNormalization,
}

impl Default for CapacityConfig {
    /// `γ` from -10 dB to 30 dB in 5 dB steps, 100 realizations.
    fn default() -> Self {
        CapacityConfig {
            snr: (-2..=6).map(|i| 10f64.powf(i as f64 * 0.5)).collect(),
            realizations: 100,
            seed: 0,
            normalization: RateNormalization::Paper,
        }
    }
}

impl CapacityConfig {
    pub fn from_db(snr_db: &[f64]) -> Self {
        CapacityConfig {
            snr: snr_db.iter().map(|d| 10f64.powf(d / 10.0)).collect(),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if let Some(&g) = self.snr.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::domain("snr", g, 0.0, f64::INFINITY));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub snr: f64,
    pub snr_db: f64,
    /// Mean over realizations.
    pub capacity: f64,
    /// Standard error of the mean.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapacityTable {
    pub normalization: RateNormalization,
    pub realizations: usize,
    pub seed: u64,
    pub rng: &'static str,
    pub points: Vec<CapacityPoint>,
}

/// Seed of realization `r`.
pub fn realization_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Rate `Σ_k log2(1 + γ |h(f_k)·f_RF(k')|²)` scaled by the normalization,
/// for precomputed received samples `h(f_k)·f_RF(k')`.
pub fn rate(samples: &[Complex64], snr: f64, bandwidth: f64, norm: RateNormalization) -> f64 {
    let sum: f64 = samples
        .iter()
        .map(|s| (snr * s.norm_sqr()).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2;
    match norm {
        RateNormalization::Paper => bandwidth * sum,
        RateNormalization::PerSubcarrier => bandwidth / samples.len() as f64 * sum,
    }
}

fn summarize(per_realization: &[Vec<f64>], cc: &CapacityConfig) -> Vec<CapacityPoint> {
    let n = per_realization.len() as f64;
    cc.snr
        .iter()
        .enumerate()
        .map(|(i, &snr)| {
            let mean = per_realization.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = if per_realization.len() > 1 {
                per_realization
                    .iter()
                    .map(|r| (r[i] - mean).powi(2))
                    .sum::<f64>()
                    / (n - 1.0)
            } else {
                0.0
            };
            CapacityPoint {
                snr,
                snr_db: 10.0 * snr.log10(),
                capacity: mean,
                std_error: (var / n).sqrt(),
            }
        })
        .collect()
}

/// Monte-Carlo capacity of the subband-matched precoders over a single path
/// toward the target with CN(0, 1) gain. Realization `r` draws its gain from
/// its own stream seeded with `seed + r`.
pub fn capacity(
    cfg: &ArrayConfig,
    plan: &SubbandPlan,
    solution: &SearchResult,
    target: f64,
    cc: &CapacityConfig,
) -> Result<CapacityTable> {
    cc.validate()?;
    check_solution(cfg, plan, solution)?;
    let precoders: Vec<RfPrecoder> = solution
        .outcomes
        .iter()
        .map(|o| rf_precoder(cfg, target, &o.selection))
        .collect::<Result<_>>()?;
    let unit = PathResponses::new(cfg, &[(target, 0.0)])?;
    // With one path every realization is the unit response scaled by α̃.
    let unit_cfr = unit.combine(&[Complex64::new(1.0, 0.0)]);
    let unit_samples: Vec<Complex64> = unit_cfr
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let f = &precoders[plan.subband_of(k)].weights;
            h.iter().zip(f).map(|(h, f)| h * f).sum()
        })
        .collect();

    let per_realization: Vec<Vec<f64>> = (0..cc.realizations)
        .into_par_iter()
        .map(|r| {
            let alpha = complex_normal(&mut seeded_rng(realization_seed(cc.seed, r)));
            let samples: Vec<Complex64> = unit_samples.iter().map(|s| alpha * s).collect();
            cc.snr
                .iter()
                .map(|&g| rate(&samples, g, cfg.bandwidth(), cc.normalization))
                .collect()
        })
        .collect();

    Ok(CapacityTable {
        normalization: cc.normalization,
        realizations: cc.realizations,
        seed: cc.seed,
        rng: RNG_NAME,
        points: summarize(&per_realization, cc),
    })
}
