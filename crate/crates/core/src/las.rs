//! Lens-antenna-subarray transceiver: phase-shifter precoder, lens beam
//! quantization, antenna selection and the composite RF precoder.
//!
//! The lens is treated as an ideal phase aperture. Feeding port `p` of lens
//! `n` imposes the progressive phase of beam direction `θ⁽ⁿ⁾(p)` across all
//! `P` elements of that lens, so every entry of the RF precoder is populated.
//!
//! Beam gain is the transmit array factor `a(θ, δf)ᵀ f_RF / √M`: the same
//! `h(f)·f_RF` product that drives the capacity computation, normalized so
//! that a perfectly matched beam has unit magnitude.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, SteeringVector};
use crate::error::{Error, Result};

fn check_scan_angle(theta: f64) -> Result<()> {
    if !(theta.abs() <= FRAC_PI_4) {
        return Err(Error::domain("target angle", theta, -FRAC_PI_4, FRAC_PI_4));
    }
    Ok(())
}

/// Direction of the beam produced by feeding port `p` of a `P`-port lens:
/// `π/4 - p/(P-1)·π/2`. A single-port lens only radiates broadside.
pub fn lens_beam_angle(per_lens: usize, p: usize) -> Result<f64> {
    if p >= per_lens {
        return Err(Error::Index {
            name: "lens port",
            index: p,
            len: per_lens,
        });
    }
    if per_lens == 1 {
        return Ok(0.0);
    }
    Ok(FRAC_PI_4 - (p as f64 / (per_lens - 1) as f64) * FRAC_PI_2)
}

/// Port whose beam is closest to `theta`; ties go to the lower index.
pub fn nearest_beam(per_lens: usize, theta: f64) -> usize {
    if per_lens <= 1 {
        return 0;
    }
    let pos = (FRAC_PI_4 - theta) / FRAC_PI_2 * (per_lens - 1) as f64;
    let floor = pos.floor();
    let idx = if pos - floor <= 0.5 {
        floor
    } else {
        floor + 1.0
    };
    idx.clamp(0.0, (per_lens - 1) as f64) as usize
}

/// Phase-shifter precoder `f_PS`: entry `n` is
/// `exp(+j2π (d_L/λ_c) n sin θ̂) / √N_L`.
pub fn ps_precoder(cfg: &ArrayConfig, target: f64) -> Result<Vec<Complex64>> {
    check_scan_angle(target)?;
    let scale = 1.0 / (cfg.lenses() as f64).sqrt();
    let step = 2.0 * PI * cfg.lens_spacing() / cfg.wavelength() * target.sin();
    Ok((0..cfg.lenses())
        .map(|n| Complex64::from_polar(scale, step * n as f64))
        .collect())
}

/// One active port per lens for a given subband.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LensSelection {
    pub subband: usize,
    indices: Vec<usize>,
}

impl LensSelection {
    pub fn new(cfg: &ArrayConfig, subband: usize, indices: Vec<usize>) -> Result<Self> {
        if indices.len() != cfg.lenses() {
            return Err(Error::Mismatch(format!(
                "selection has {} entries for {} lenses",
                indices.len(),
                cfg.lenses()
            )));
        }
        if let Some(&bad) = indices.iter().find(|&&p| p >= cfg.per_lens()) {
            return Err(Error::Index {
                name: "lens port",
                index: bad,
                len: cfg.per_lens(),
            });
        }
        Ok(LensSelection { subband, indices })
    }

    /// Every lens feeding the port nearest to `theta`.
    pub fn nearest(cfg: &ArrayConfig, subband: usize, theta: f64) -> Self {
        LensSelection {
            subband,
            indices: vec![nearest_beam(cfg.per_lens(), theta); cfg.lenses()],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Beam direction `θ⁽ⁿ⁾` of each lens.
    pub fn angles(&self, per_lens: usize) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&p| lens_beam_angle(per_lens, p).expect("indices validated at construction"))
            .collect()
    }
}

/// Block-diagonal `M × N_L` 0/1 matrix `F_LAS`, stored by its ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionMatrix {
    pub rows: usize,
    pub cols: usize,
    /// `(row, col)` of each unit entry; one per column.
    pub ones: Vec<(usize, usize)>,
}

impl SelectionMatrix {
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.cols]; self.rows];
        for &(r, c) in &self.ones {
            dense[r][c] = 1.0;
        }
        dense
    }

    /// `F_LAS · x` for a length-`N_L` vector.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::Mismatch(format!(
                "vector of length {} applied to {} columns",
                x.len(),
                self.cols
            )));
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.rows];
        for &(r, c) in &self.ones {
            out[r] += x[c];
        }
        Ok(out)
    }
}

pub fn selection_matrix(cfg: &ArrayConfig, sel: &LensSelection) -> SelectionMatrix {
    let p = cfg.per_lens();
    SelectionMatrix {
        rows: cfg.antennas(),
        cols: cfg.lenses(),
        ones: sel
            .indices()
            .iter()
            .enumerate()
            .map(|(n, &pn)| (p * n + pn, n))
            .collect(),
    }
}

/// Composite RF precoder for one subband.
#[derive(Debug, Clone, PartialEq)]
pub struct RfPrecoder {
    pub weights: Vec<Complex64>,
    pub norm_factor: f64,
    pub target: f64,
    pub lens_angles: Vec<f64>,
}

impl RfPrecoder {
    /// Array factor `a(θ, δf)ᵀ f_RF / √M` for a steering vector of matching size.
    pub fn response(&self, steering: &SteeringVector) -> Result<Complex64> {
        if steering.len() != self.weights.len() {
            return Err(Error::Mismatch(format!(
                "steering vector of length {} for a {}-antenna precoder",
                steering.len(),
                self.weights.len()
            )));
        }
        let sum: Complex64 = steering
            .weights
            .iter()
            .zip(&self.weights)
            .map(|(a, f)| a * f)
            .sum();
        Ok(sum / (self.weights.len() as f64).sqrt())
    }
}

/// Entry `Pn + p` is
/// `exp(+j2π(d/λ_c)·Pn·sin θ̂) · exp(-j2π(d/λ_c)·((P-1)/2 - p)·sin θ⁽ⁿ⁾) / √(N_L P)`.
pub fn rf_precoder(cfg: &ArrayConfig, target: f64, sel: &LensSelection) -> Result<RfPrecoder> {
    check_scan_angle(target)?;
    if sel.indices().len() != cfg.lenses() {
        return Err(Error::Mismatch(
            "selection does not match lens count".into(),
        ));
    }
    let p_count = cfg.per_lens();
    let norm_factor = 1.0 / (cfg.antennas() as f64).sqrt();
    let kappa = 2.0 * PI * cfg.spacing() / cfg.wavelength();
    let center = (p_count as f64 - 1.0) / 2.0;
    let lens_angles = sel.angles(p_count);
    let mut weights = Vec::with_capacity(cfg.antennas());
    for (n, angle) in lens_angles.iter().enumerate() {
        let ps = kappa * (p_count * n) as f64 * target.sin();
        for p in 0..p_count {
            let lens = -kappa * (center - p as f64) * angle.sin();
            weights.push(Complex64::from_polar(norm_factor, ps + lens));
        }
    }
    Ok(RfPrecoder {
        weights,
        norm_factor,
        target,
        lens_angles,
    })
}

/// Evaluates the beam-gain double sum lens by lens. Shared by the direct
/// evaluation and by the cached search tables so both produce identical bits.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GainKernel {
    per_lens: usize,
    kappa: f64,
    carrier: f64,
    center: f64,
    inv_m: f64,
    target_sin: f64,
}

impl GainKernel {
    pub(crate) fn new(cfg: &ArrayConfig, target: f64) -> Self {
        GainKernel {
            per_lens: cfg.per_lens(),
            kappa: 2.0 * PI * cfg.spacing() / cfg.wavelength(),
            carrier: cfg.carrier(),
            center: (cfg.per_lens() as f64 - 1.0) / 2.0,
            inv_m: 1.0 / cfg.antennas() as f64,
            target_sin: target.sin(),
        }
    }

    /// `(1 + δf/f_c)·sin θ`, the only place θ and δf enter the sum.
    #[inline]
    pub(crate) fn scaled_sin(&self, theta: f64, delta_f: f64) -> f64 {
        (1.0 + delta_f / self.carrier) * theta.sin()
    }

    /// `Σ_p` of the double sum for lens `n`, unnormalized.
    pub(crate) fn lens_partial(&self, n: usize, lens_sin: f64, scaled_sin: f64) -> Complex64 {
        let base = (self.per_lens * n) as f64;
        let ps = self.kappa * base * self.target_sin;
        (0..self.per_lens)
            .map(|p| {
                let steer = -self.kappa * (base + p as f64) * scaled_sin;
                let lens = -self.kappa * (self.center - p as f64) * lens_sin;
                Complex64::cis(steer + ps + lens)
            })
            .sum()
    }

    #[inline]
    pub(crate) fn normalize(&self, sum: Complex64) -> Complex64 {
        sum * self.inv_m
    }

    /// Gain of an arbitrary set of lens beam sines.
    pub(crate) fn gain(&self, lens_sines: &[f64], theta: f64, delta_f: f64) -> Complex64 {
        let u = self.scaled_sin(theta, delta_f);
        let sum = lens_sines
            .iter()
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (n, &s)| {
                acc + self.lens_partial(n, s, u)
            });
        self.normalize(sum)
    }
}

/// Beam gain of `precoder` toward `theta` at offset `delta_f`, evaluated as
/// the double sum over lenses and their elements
/// `(1/(N_L P)) Σ_n Σ_p exp(-j2π(d/c)(Pn+p)(f_c+δf) sin θ)
///   · exp(+j2π(d/λ_c) Pn sin θ̂) · exp(-j2π(d/λ_c)((P-1)/2 - p) sin θ⁽ⁿ⁾)`.
/// Its magnitude never exceeds 1.
pub fn beam_gain(cfg: &ArrayConfig, precoder: &RfPrecoder, theta: f64, delta_f: f64) -> Complex64 {
    let kernel = GainKernel::new(cfg, precoder.target);
    let sines: Vec<f64> = precoder.lens_angles.iter().map(|a| a.sin()).collect();
    kernel.gain(&sines, theta, delta_f)
}
