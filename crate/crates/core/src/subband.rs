//! Half-power beamwidth, analog filter-count sizing and the partition of
//! subcarriers into contiguous subbands.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use serde::Serialize;

use crate::array::{effective_direction, ArrayConfig};
use crate::error::{Error, Result};
use crate::las::{lens_beam_angle, nearest_beam, GainKernel};
use crate::numeric::{argmax, bisect, parabolic_offset};

/// Partition of the `N` subcarriers into `N_F` equal contiguous blocks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubbandPlan {
    pub filters: usize,
    /// Subband bandwidth `W_b = W / N_F` (Hz).
    pub subband_width: f64,
    /// Baseband center offset of each subband (Hz).
    pub centers: Vec<f64>,
    /// `[low, high]` baseband edges of each subband (Hz).
    pub edges: Vec<[f64; 2]>,
    /// Subcarriers per subband, `N / N_F`.
    pub block: usize,
}

impl SubbandPlan {
    pub fn new(cfg: &ArrayConfig, filters: usize) -> Result<Self> {
        if filters == 0 {
            return Err(Error::Config("filter count must be positive".into()));
        }
        if cfg.fft_size() % filters != 0 {
            return Err(Error::Config(format!(
                "N = {} is not divisible by N_F = {}",
                cfg.fft_size(),
                filters
            )));
        }
        let block = cfg.fft_size() / filters;
        let width = cfg.bandwidth() / filters as f64;
        let half = (filters as f64 - 1.0) / 2.0;
        let centers: Vec<f64> = (0..filters)
            .map(|k| (k as f64 - half) * block as f64 * cfg.subcarrier_spacing())
            .collect();
        let edges = centers
            .iter()
            .map(|c| [c - width / 2.0, c + width / 2.0])
            .collect();
        Ok(SubbandPlan {
            filters,
            subband_width: width,
            centers,
            edges,
            block,
        })
    }

    /// Subband (0-based) carrying subcarrier `k` (0-based).
    pub fn subband_of(&self, k: usize) -> usize {
        k / self.block
    }

    /// Subcarrier indices of subband `k`.
    pub fn subcarriers(&self, subband: usize) -> std::ops::Range<usize> {
        subband * self.block..(subband + 1) * self.block
    }

    pub fn center(&self, subband: usize) -> Result<f64> {
        self.centers.get(subband).copied().ok_or(Error::Index {
            name: "subband",
            index: subband,
            len: self.filters,
        })
    }
}

/// Closed-form `0.886·λ_c / (M d cos θ̂)` beamwidth, for cross-checking only.
pub fn half_power_beamwidth_approx(cfg: &ArrayConfig, target: f64) -> f64 {
    0.886 * cfg.wavelength() / (cfg.antennas() as f64 * cfg.spacing() * target.cos())
}

/// Width between the two -3 dB points around the main lobe of the
/// squint-free LAS pattern steered to `target`, with every lens feeding the
/// port nearest `target`.
pub fn half_power_beamwidth(cfg: &ArrayConfig, target: f64) -> Result<f64> {
    if cfg.antennas() < 2 {
        return Err(Error::Degenerate(
            "a single antenna has no half-power beamwidth".into(),
        ));
    }
    if !(target.abs() <= FRAC_PI_4) {
        return Err(Error::domain("target angle", target, -FRAC_PI_4, FRAC_PI_4));
    }
    let kernel = GainKernel::new(cfg, target);
    let port = nearest_beam(cfg.per_lens(), target);
    let lens_sin = lens_beam_angle(cfg.per_lens(), port)?.sin();
    let sines = vec![lens_sin; cfg.lenses()];
    let power = |theta: f64| kernel.gain(&sines, theta, 0.0).norm_sqr();

    let approx = half_power_beamwidth_approx(cfg, target);
    let step = approx / 64.0;
    let lo = (target - 2.0 * approx).max(-FRAC_PI_2);
    let hi = (target + 2.0 * approx).min(FRAC_PI_2);
    let samples = ((hi - lo) / step).ceil() as usize + 1;
    let grid: Vec<f64> = (0..samples)
        .map(|i| (lo + i as f64 * step).min(hi))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&t| power(t)).collect();
    let i = argmax(&values);
    let mut peak = grid[i];
    if i > 0 && i + 1 < grid.len() {
        peak += parabolic_offset(values[i - 1], values[i], values[i + 1], step);
    }
    let peak_power = power(peak).max(values[i]);
    if peak_power <= 0.0 {
        return Err(Error::Degenerate("pattern has no main lobe".into()));
    }
    let below = |theta: f64| power(theta) - 0.5 * peak_power;

    let crossing = |direction: f64| -> Result<f64> {
        let mut inner = peak;
        loop {
            let outer = inner + direction * step;
            if outer.abs() > FRAC_PI_2 {
                let edge = direction * FRAC_PI_2;
                if below(edge) < 0.0 {
                    return Ok(bisect(&below, inner, edge, 1e-13));
                }
                return Err(Error::Degenerate(format!(
                    "no -3 dB crossing on the {} side of {peak:.6} rad",
                    if direction < 0.0 { "lower" } else { "upper" }
                )));
            }
            if below(outer) < 0.0 {
                return Ok(bisect(&below, inner, outer, 1e-13));
            }
            inner = outer;
        }
    };
    let left = crossing(-1.0)?;
    let right = crossing(1.0)?;
    Ok(right - left)
}

/// Lower bound on the filter count for a tolerable in-subband squint of
/// `Ω_3dB/8` at the maximum scan angle π/4:
/// `W sin(π/4 - Ω/8) / (√2 f_c (1 - √2 sin(π/4 - Ω/8)))`.
/// `None` when the bound is vacuous.
pub fn filter_bound(cfg: &ArrayConfig, beamwidth: f64) -> Option<f64> {
    let s = (FRAC_PI_4 - beamwidth / 8.0).sin();
    let denom = SQRT_2 * cfg.carrier() * (1.0 - SQRT_2 * s);
    let bound = cfg.bandwidth() * s / denom;
    (denom > 0.0 && bound.is_finite() && bound > 0.0).then_some(bound)
}

/// Smallest divisor of `N` that satisfies [`filter_bound`]; `N` itself when
/// no divisor does.
pub fn min_filters(cfg: &ArrayConfig, beamwidth: f64) -> Result<usize> {
    if !(beamwidth > 0.0) {
        return Err(Error::domain("beamwidth", beamwidth, 0.0, f64::INFINITY));
    }
    let Some(bound) = filter_bound(cfg, beamwidth) else {
        return Ok(1);
    };
    let n = cfg.fft_size();
    Ok((1..=n)
        .find(|&d| n % d == 0 && d as f64 >= bound)
        .unwrap_or(n))
}

/// Largest beam-direction spread between the center of subband `subband`
/// and either of its edges.
pub fn within_band_squint(
    plan: &SubbandPlan,
    cfg: &ArrayConfig,
    target: f64,
    subband: usize,
) -> Result<f64> {
    let center = plan.center(subband)?;
    let mid = effective_direction(target, center, cfg.carrier())?;
    let mut worst: f64 = 0.0;
    for edge in plan.edges[subband] {
        let d = effective_direction(target, edge, cfg.carrier())?;
        worst = worst.max((d - mid).abs());
    }
    Ok(worst)
}
