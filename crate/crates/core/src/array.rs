//! Array geometry, steering vectors and the spatial-wideband channel.
//!
//! Antennas are indexed from 0. Every frequency argument is a baseband
//! offset `δf` from the carrier, so the squint-inducing term of element `m`
//! is `exp(-j 2π m δf d sin θ / c)` and vanishes at the carrier.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Propagation speed in free space (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Name of the pseudo-random generator used for every random draw.
pub const RNG_NAME: &str = "ChaCha8Rng (rand_chacha), seeded with seed_from_u64";

/// Geometry and signaling constants of a lens-antenna-subarray ULA.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArrayConfig {
    antennas: usize,
    lenses: usize,
    spacing: f64,
    carrier: f64,
    bandwidth: f64,
    fft_size: usize,
}

impl ArrayConfig {
    /// Builds a configuration with half-wavelength element spacing.
    pub fn new(
        antennas: usize,
        lenses: usize,
        carrier: f64,
        bandwidth: f64,
        fft_size: usize,
    ) -> Result<Self> {
        if !(carrier.is_finite() && carrier > 0.0) {
            return Err(Error::Config(format!(
                "carrier frequency must be positive, got {carrier}"
            )));
        }
        let cfg = ArrayConfig {
            antennas,
            lenses,
            spacing: SPEED_OF_LIGHT / (2.0 * carrier),
            carrier,
            bandwidth,
            fft_size,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the inter-element spacing (meters).
    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        self.spacing = spacing;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.antennas == 0 || self.lenses == 0 {
            return Err(Error::Config(
                "antenna and lens counts must be positive".into(),
            ));
        }
        if self.antennas % self.lenses != 0 {
            return Err(Error::Config(format!(
                "M = {} is not divisible by N_L = {}",
                self.antennas, self.lenses
            )));
        }
        if self.fft_size == 0 {
            return Err(Error::Config("FFT size must be positive".into()));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(Error::Config(format!(
                "element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.bandwidth.is_finite() && self.bandwidth >= 0.0) {
            return Err(Error::Config(format!(
                "bandwidth must be non-negative, got {}",
                self.bandwidth
            )));
        }
        // |δf| <= W/2 must stay below the carrier for the squint formula.
        if self.bandwidth / 2.0 >= self.carrier {
            return Err(Error::Config(format!(
                "half bandwidth {} Hz must be below the carrier {} Hz",
                self.bandwidth / 2.0,
                self.carrier
            )));
        }
        Ok(())
    }

    /// Total antenna count `M`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Lens count `N_L`.
    pub fn lenses(&self) -> usize {
        self.lenses
    }

    /// Antennas per lens `P = M / N_L`.
    pub fn per_lens(&self) -> usize {
        self.antennas / self.lenses
    }

    /// Inter-element spacing `d` in meters.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Inter-lens spacing `d_L = P·d` in meters.
    pub fn lens_spacing(&self) -> f64 {
        self.per_lens() as f64 * self.spacing
    }

    pub fn carrier(&self) -> f64 {
        self.carrier
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    /// Subcarrier spacing `Δf = W / N`.
    pub fn subcarrier_spacing(&self) -> f64 {
        self.bandwidth / self.fft_size as f64
    }

    /// Carrier wavelength `λ_c`.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier
    }

    /// Baseband offset of subcarrier `k` (0-based): `(k - (N-1)/2)·Δf`.
    pub fn subcarrier_offset(&self, k: usize) -> f64 {
        (k as f64 - (self.fft_size as f64 - 1.0) / 2.0) * self.subcarrier_spacing()
    }

    /// Same geometry with a different antenna or lens count.
    pub fn resized(&self, antennas: usize, lenses: usize) -> Result<Self> {
        let cfg = ArrayConfig {
            antennas,
            lenses,
            ..self.clone()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub(crate) fn check_offset(&self, delta_f: f64) -> Result<()> {
        let edge = self.bandwidth / 2.0;
        // One ulp of slack so that the band edge itself is accepted.
        if !(delta_f.abs() <= edge * (1.0 + f64::EPSILON)) {
            return Err(Error::domain("frequency offset", delta_f, -edge, edge));
        }
        Ok(())
    }
}

impl Default for ArrayConfig {
    /// M = 128, N_L = 4, f_c = 60 GHz, W = 5 GHz, N = 2048, d = λ_c/2.
    fn default() -> Self {
        ArrayConfig::new(128, 4, 60e9, 5e9, 2048).expect("default configuration is valid")
    }
}

pub(crate) fn check_angle(name: &'static str, theta: f64) -> Result<()> {
    if !(-FRAC_PI_2..FRAC_PI_2).contains(&theta) {
        return Err(Error::domain(name, theta, -FRAC_PI_2, FRAC_PI_2));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SteeringKind {
    Ideal,
    Squint,
    Effective,
}

/// Unit-modulus per-antenna phase profile.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub weights: Vec<Complex64>,
    pub kind: SteeringKind,
    pub frequency_offset: f64,
}

impl SteeringVector {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Conjugate inner product `selfᴴ · other`.
    pub fn inner(&self, other: &SteeringVector) -> Complex64 {
        self.weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

fn progressive(antennas: usize, phase_step: f64) -> Vec<Complex64> {
    (0..antennas)
        .map(|m| Complex64::cis(-phase_step * m as f64))
        .collect()
}

/// Frequency-flat steering vector: entry `m` is `exp(-j2π m d sin θ / λ_c)`.
pub fn ideal_steering(cfg: &ArrayConfig, theta: f64) -> Result<SteeringVector> {
    check_angle("steering angle", theta)?;
    let step = 2.0 * PI * cfg.spacing() * theta.sin() / cfg.wavelength();
    Ok(SteeringVector {
        weights: progressive(cfg.antennas(), step),
        kind: SteeringKind::Ideal,
        frequency_offset: 0.0,
    })
}

/// Squint-inducing vector: entry `m` is `exp(-j2π m δf d sin θ / c)`.
pub fn squint_steering(cfg: &ArrayConfig, theta: f64, delta_f: f64) -> Result<SteeringVector> {
    check_angle("steering angle", theta)?;
    cfg.check_offset(delta_f)?;
    let step = 2.0 * PI * delta_f * cfg.spacing() * theta.sin() / SPEED_OF_LIGHT;
    Ok(SteeringVector {
        weights: progressive(cfg.antennas(), step),
        kind: SteeringKind::Squint,
        frequency_offset: delta_f,
    })
}

/// Hadamard product of the ideal and squint vectors, `a(θ, δf)`.
pub fn effective_steering(cfg: &ArrayConfig, theta: f64, delta_f: f64) -> Result<SteeringVector> {
    let ideal = ideal_steering(cfg, theta)?;
    let squint = squint_steering(cfg, theta, delta_f)?;
    if ideal.len() != squint.len() {
        return Err(Error::Mismatch(
            "ideal and squint vectors differ in length".into(),
        ));
    }
    let weights = ideal
        .weights
        .iter()
        .zip(&squint.weights)
        .map(|(a, b)| a * b)
        .collect();
    Ok(SteeringVector {
        weights,
        kind: SteeringKind::Effective,
        frequency_offset: delta_f,
    })
}

/// Direction a beam steered to `theta` actually points at offset `delta_f`:
/// `asin(sin θ / (1 + δf / f_c))`.
pub fn effective_direction(theta: f64, delta_f: f64, carrier: f64) -> Result<f64> {
    if !(delta_f.abs() < carrier) {
        return Err(Error::domain(
            "frequency offset",
            delta_f,
            -carrier,
            carrier,
        ));
    }
    let arg = theta.sin() / (1.0 + delta_f / carrier);
    if !(-1.0..=1.0).contains(&arg) {
        return Err(Error::domain("asin argument", arg, -1.0, 1.0));
    }
    Ok(arg.asin())
}

/// One propagation path with its equivalent baseband gain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub gain: Complex64,
    pub angle: f64,
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    paths: Vec<Path>,
    max_delay: f64,
}

impl PathParams {
    pub fn new(paths: Vec<Path>, max_delay: f64) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::Config("at least one path is required".into()));
        }
        if !(max_delay.is_finite() && max_delay >= 0.0) {
            return Err(Error::Config(format!(
                "maximum delay must be non-negative, got {max_delay}"
            )));
        }
        for p in &paths {
            check_angle("path angle", p.angle)?;
            if !(0.0..=max_delay).contains(&p.delay) {
                return Err(Error::domain("path delay", p.delay, 0.0, max_delay));
            }
        }
        Ok(PathParams { paths, max_delay })
    }

    /// Paths at the given `(angle, delay)` pairs with gains drawn from CN(0, 1).
    pub fn with_random_gains<R: Rng + ?Sized>(
        geometry: &[(f64, f64)],
        max_delay: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let paths = geometry
            .iter()
            .map(|&(angle, delay)| Path {
                gain: complex_normal(rng),
                angle,
                delay,
            })
            .collect();
        PathParams::new(paths, max_delay)
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn max_delay(&self) -> f64 {
        self.max_delay
    }
}

/// Draws a circularly-symmetric complex normal sample with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

/// Seeded generator used by every stochastic routine in the crate.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Per-subcarrier channel frequency response vectors `h(f_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub paths: PathParams,
    /// `cfr[k][m]`: response of antenna `m` at subcarrier `k`.
    pub cfr: Vec<Vec<Complex64>>,
    /// Seed the path gains were drawn with, if they were drawn.
    pub rng_seed: Option<u64>,
}

impl ChannelRealization {
    /// Received sample for subcarrier `k` and transmit weights `f`: `h(f_k)·f`.
    pub fn response(&self, k: usize, weights: &[Complex64]) -> Complex64 {
        self.cfr[k].iter().zip(weights).map(|(h, f)| h * f).sum()
    }
}

/// Unit-gain path responses `a(θ_ℓ, δf_k)·exp(-j2π δf_k τ_ℓ)`, cached so that
/// Monte-Carlo realizations only rescale them by fresh gains.
#[derive(Debug, Clone)]
pub(crate) struct PathResponses {
    /// `unit[ℓ][k][m]`
    unit: Vec<Vec<Vec<Complex64>>>,
}

impl PathResponses {
    pub(crate) fn new(cfg: &ArrayConfig, geometry: &[(f64, f64)]) -> Result<Self> {
        let unit = geometry
            .iter()
            .map(|&(angle, delay)| {
                (0..cfg.fft_size())
                    .map(|k| {
                        let df = cfg.subcarrier_offset(k);
                        let a = effective_steering(cfg, angle, df)?;
                        let rot = Complex64::cis(-2.0 * PI * df * delay);
                        Ok(a.weights.into_iter().map(|w| w * rot).collect())
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PathResponses { unit })
    }

    pub(crate) fn combine(&self, gains: &[Complex64]) -> Vec<Vec<Complex64>> {
        let subcarriers = self.unit[0].len();
        (0..subcarriers)
            .map(|k| {
                let mut h = vec![Complex64::new(0.0, 0.0); self.unit[0][k].len()];
                for (unit, g) in self.unit.iter().zip(gains) {
                    for (hm, um) in h.iter_mut().zip(&unit[k]) {
                        *hm += g * um;
                    }
                }
                h
            })
            .collect()
    }
}

/// Evaluates `h(f_k) = Σ_ℓ α̃_ℓ a(θ_ℓ, δf_k) exp(-j2π δf_k τ_ℓ)` on every
/// subcarrier. `rng_seed` records the seed the gains were drawn with.
pub fn generate_channel(
    cfg: &ArrayConfig,
    paths: PathParams,
    rng_seed: Option<u64>,
) -> Result<ChannelRealization> {
    let geometry: Vec<_> = paths.paths().iter().map(|p| (p.angle, p.delay)).collect();
    let gains: Vec<_> = paths.paths().iter().map(|p| p.gain).collect();
    let cfr = PathResponses::new(cfg, &geometry)?.combine(&gains);
    Ok(ChannelRealization {
        paths,
        cfr,
        rng_seed,
    })
}

/// Draws CN(0, 1) gains for the given path geometry from `seed` and builds
/// the channel.
pub fn draw_channel(
    cfg: &ArrayConfig,
    geometry: &[(f64, f64)],
    max_delay: f64,
    seed: u64,
) -> Result<ChannelRealization> {
    let mut rng = seeded_rng(seed);
    let paths = PathParams::with_random_gains(geometry, max_delay, &mut rng)?;
    generate_channel(cfg, paths, Some(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn cfg(m: usize) -> ArrayConfig {
        ArrayConfig::new(m, 1, 60e9, 5e9, 64).unwrap()
    }

    fn wrap(x: f64) -> f64 {
        (x + PI).rem_euclid(2.0 * PI) - PI
    }

    #[test]
    fn config_invariants() {
        let c = ArrayConfig::default();
        assert_eq!(c.per_lens() * c.lenses(), c.antennas());
        assert!((c.spacing() - SPEED_OF_LIGHT / 120e9).abs() < 1e-18);
        assert!((c.subcarrier_spacing() * c.fft_size() as f64 - c.bandwidth()).abs() < 1e-3);
        assert!((c.lens_spacing() - 32.0 * c.spacing()).abs() < 1e-15);
        assert!(ArrayConfig::new(100, 3, 60e9, 5e9, 2048).is_err());
        assert!(ArrayConfig::new(128, 4, 60e9, 130e9, 2048).is_err());
    }

    #[test]
    fn subcarrier_offsets_are_symmetric() {
        let c = ArrayConfig::default();
        let n = c.fft_size();
        for k in 0..n {
            assert!((c.subcarrier_offset(k) + c.subcarrier_offset(n - 1 - k)).abs() < 1e-3);
        }
        assert!(c.subcarrier_offset(n - 1) < c.bandwidth() / 2.0);
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = ideal_steering(&cfg(4), 0.0).unwrap();
        assert!(a
            .weights
            .iter()
            .all(|w| (w - Complex64::new(1.0, 0.0)).norm() < 1e-15));
        assert_eq!(a.kind, SteeringKind::Ideal);
    }

    #[test]
    fn endfire_half_wavelength() {
        let theta = FRAC_PI_2 - 1e-9;
        let a = ideal_steering(&cfg(2), theta).unwrap();
        assert!((a.weights[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-6);
    }

    #[test]
    fn ideal_phase_progression_at_45_degrees() {
        let a = ideal_steering(&cfg(8), FRAC_PI_4).unwrap();
        for (m, w) in a.weights.iter().enumerate() {
            let expected = -2.221_441_469_079_183 * m as f64;
            assert!(wrap(w.arg() - expected).abs() < 1e-9, "m={m}");
        }
    }

    #[test]
    fn out_of_range_angle_is_rejected() {
        assert!(ideal_steering(&cfg(4), FRAC_PI_2).is_err());
        assert!(ideal_steering(&cfg(4), -2.0).is_err());
        assert!(squint_steering(&cfg(4), 0.1, 2.6e9).is_err());
    }

    #[test]
    fn squint_examples() {
        let c = cfg(2);
        let a = squint_steering(&c, 0.7, 0.0).unwrap();
        assert!(a.weights.iter().all(|w| (w - 1.0).norm() < 1e-15));
        let b = squint_steering(&c, 0.0, 2.5e9).unwrap();
        assert!(b.weights.iter().all(|w| (w - 1.0).norm() < 1e-15));
        let s = squint_steering(&c, FRAC_PI_4, 2.5e9).unwrap();
        assert!((s.weights[1].arg() - (-0.092_560_061_211_632_61)).abs() < 1e-12);
    }

    #[test]
    fn effective_examples() {
        let c = ArrayConfig::new(4, 1, 60e9, 5e9, 64).unwrap();
        let ideal = ideal_steering(&c, 0.3).unwrap();
        let eff = effective_steering(&c, 0.3, 0.0).unwrap();
        assert_eq!(ideal.weights, eff.weights);

        let flat = effective_steering(&c, 0.0, 2.5e9).unwrap();
        assert!(flat.weights.iter().all(|w| (w - 1.0).norm() < 1e-15));

        let e = effective_steering(&c, FRAC_PI_4, 2.5e9).unwrap();
        for (m, w) in e.weights.iter().enumerate() {
            let expected = -PI * m as f64 * FRAC_PI_4.sin() * (1.0 + 2.5 / 60.0);
            assert!(wrap(w.arg() - expected).abs() < 1e-9);
        }
    }

    #[test]
    fn effective_direction_examples() {
        assert!((effective_direction(FRAC_PI_4, 0.0, 60e9).unwrap() - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(effective_direction(0.0, 1e9, 60e9).unwrap(), 0.0);
        let up = effective_direction(FRAC_PI_4, 2.5e9, 60e9).unwrap();
        let down = effective_direction(FRAC_PI_4, -2.5e9, 60e9).unwrap();
        assert!((up - 0.746_157_894_390_237_7).abs() < 1e-12);
        assert!((down - 0.829_880_257_162_926_5).abs() < 1e-12);
        assert!(effective_direction(0.3, 70e9, 60e9).is_err());
    }

    #[test]
    fn single_broadside_path_is_flat() {
        let c = ArrayConfig::new(8, 2, 60e9, 5e9, 16).unwrap();
        let paths = PathParams::new(
            vec![Path {
                gain: Complex64::new(1.0, 0.0),
                angle: 0.0,
                delay: 0.0,
            }],
            0.0,
        )
        .unwrap();
        let ch = generate_channel(&c, paths, None).unwrap();
        assert_eq!(ch.cfr.len(), 16);
        for h in &ch.cfr {
            assert!(h.iter().all(|x| (x - 1.0).norm() < 1e-12));
        }
    }

    #[test]
    fn empty_path_list_is_rejected() {
        assert!(PathParams::new(vec![], 1e-9).is_err());
        let bad = Path {
            gain: Complex64::new(1.0, 0.0),
            angle: 0.0,
            delay: 2e-9,
        };
        assert!(PathParams::new(vec![bad], 1e-9).is_err());
    }

    #[test]
    fn center_subcarrier_matches_ideal_steering() {
        // Odd N puts a subcarrier exactly on the carrier.
        let c = ArrayConfig::new(8, 2, 60e9, 5e9, 15).unwrap();
        let paths = PathParams::new(
            vec![Path {
                gain: Complex64::new(1.0, 0.0),
                angle: FRAC_PI_4,
                delay: 0.0,
            }],
            0.0,
        )
        .unwrap();
        let ch = generate_channel(&c, paths, None).unwrap();
        let ideal = ideal_steering(&c, FRAC_PI_4).unwrap();
        assert_eq!(c.subcarrier_offset(7), 0.0);
        for (h, a) in ch.cfr[7].iter().zip(&ideal.weights) {
            assert!((h - a).norm() < 1e-12);
        }
    }

    #[test]
    fn identical_seeds_are_bit_identical() {
        let c = ArrayConfig::new(16, 4, 60e9, 5e9, 32).unwrap();
        let geo = [(0.3, 1e-9), (-0.5, 4e-9)];
        let a = draw_channel(&c, &geo, 5e-9, 99).unwrap();
        let b = draw_channel(&c, &geo, 5e-9, 99).unwrap();
        let d = draw_channel(&c, &geo, 5e-9, 100).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.cfr, d.cfr);
        assert_eq!(a.rng_seed, Some(99));
    }
}
