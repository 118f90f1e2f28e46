//! Per-subband antenna-selection search.
//!
//! The realized beam direction `θ_LAS` of a candidate selection is the
//! argmax of `|g(θ, δf)|` over `[-π/2, π/2]`: a coarse grid with spacing
//! `Ω_3dB/16`, then a fine grid (spacing `Ω_3dB/256`) over the two coarse
//! cells around the coarse peak, then a parabolic vertex step.
//!
//! Because the refined peak never leaves those two cells, the coarse
//! deviation minus one coarse step is a lower bound on the final deviation.
//! Both searches use that bound to skip refinements that cannot matter; the
//! results are identical to refining every candidate.

use std::collections::HashSet;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::array::{check_angle, ArrayConfig};
use crate::error::{Error, Result};
use crate::las::{
    lens_beam_angle, nearest_beam, rf_precoder, GainKernel, LensSelection, RfPrecoder,
};
use crate::numeric::{argmax, parabolic_offset};
use crate::subband::{half_power_beamwidth, half_power_beamwidth_approx, SubbandPlan};

/// Exhaustive searches above this many candidates must be forced.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

const COARSE_DIVISOR: f64 = 16.0;
const FINE_DIVISOR: f64 = 256.0;
const CHUNK: usize = 4096;

/// Acceptance rule of the threshold search:
/// `|θ̂ - θ_LAS| ≤ base · (1 + |δf| / f_c)`, with `base = Ω_3dB / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdPolicy {
    pub base: f64,
    /// Per-subband evaluation cap; `None` means `P^N_L`.
    pub max_evaluations: Option<u64>,
}

impl ThresholdPolicy {
    pub fn from_beamwidth(beamwidth: f64) -> Self {
        ThresholdPolicy {
            base: beamwidth / 2.0,
            max_evaluations: None,
        }
    }

    pub fn threshold(&self, delta_f: f64, carrier: f64) -> f64 {
        self.base * (1.0 + delta_f.abs() / carrier)
    }
}

/// Peak of a beam pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamDirection {
    pub angle: f64,
    pub peak_gain: f64,
    /// The pattern is constant; `angle` is the target by convention.
    pub flat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMethod {
    Exhaustive,
    Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubbandOutcome {
    /// 0-based subband index.
    pub subband: usize,
    pub center_offset: f64,
    pub selection: LensSelection,
    pub theta_las: f64,
    pub deviation: f64,
    pub peak_gain: f64,
    pub evaluations: u64,
    pub threshold: Option<f64>,
    pub accepted_by_threshold: bool,
    /// Threshold search stopped without an acceptable selection and kept the
    /// best one it saw.
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchResult {
    pub method: SearchMethod,
    /// Outcomes indexed by subband.
    pub outcomes: Vec<SubbandOutcome>,
    /// Order in which subbands were processed.
    pub order: Vec<usize>,
}

impl SearchResult {
    /// One RF precoder per subband.
    pub fn precoders(&self, ctx: &SearchContext) -> Result<Vec<RfPrecoder>> {
        self.outcomes
            .iter()
            .map(|o| rf_precoder(&ctx.cfg, ctx.target, &o.selection))
            .collect()
    }

    pub fn total_evaluations(&self) -> u64 {
        self.outcomes.iter().map(|o| o.evaluations).sum()
    }
}

/// Read-only state shared by every candidate evaluation for one target.
#[derive(Debug, Clone)]
pub struct SearchContext {
    cfg: ArrayConfig,
    target: f64,
    beamwidth: f64,
    kernel: GainKernel,
    grid: Vec<f64>,
    coarse_step: f64,
    fine_per_cell: usize,
    port_sines: Vec<f64>,
}

impl SearchContext {
    /// Uses the numeric half-power beamwidth of the pattern toward `target`,
    /// or the closed form when the pattern has no -3 dB crossings.
    pub fn new(cfg: &ArrayConfig, target: f64) -> Result<Self> {
        let beamwidth = match half_power_beamwidth(cfg, target) {
            Ok(w) => w,
            Err(Error::Degenerate(_)) => half_power_beamwidth_approx(cfg, target),
            Err(e) => return Err(e),
        };
        Self::with_beamwidth(cfg, target, beamwidth)
    }

    pub fn with_beamwidth(cfg: &ArrayConfig, target: f64, beamwidth: f64) -> Result<Self> {
        check_angle("target angle", target)?;
        if !(beamwidth.is_finite() && beamwidth > 0.0) {
            return Err(Error::domain("beamwidth", beamwidth, 0.0, f64::INFINITY));
        }
        let p = cfg.per_lens();
        let port_sines = (0..p)
            .map(|q| lens_beam_angle(p, q).map(f64::sin))
            .collect::<Result<Vec<_>>>()?;
        let mut ctx = SearchContext {
            cfg: cfg.clone(),
            target,
            beamwidth,
            kernel: GainKernel::new(cfg, target),
            grid: Vec::new(),
            coarse_step: 0.0,
            fine_per_cell: 0,
            port_sines,
        };
        ctx.build_grid(1);
        Ok(ctx)
    }

    /// Coarsens the scan grid by `factor` (for cheap full-scale exhaustive
    /// runs). The fine resolution stays at `Ω_3dB/256`.
    pub fn with_grid_decimation(mut self, factor: usize) -> Self {
        self.build_grid(factor.max(1));
        self
    }

    fn build_grid(&mut self, decimation: usize) {
        let target_step = self.beamwidth / COARSE_DIVISOR * decimation as f64;
        let span = 2.0 * FRAC_PI_2;
        let cells = (span / target_step).ceil().max(2.0) as usize;
        let step = span / cells as f64;
        self.grid = (0..=cells).map(|i| -FRAC_PI_2 + i as f64 * step).collect();
        self.grid[cells] = FRAC_PI_2;
        self.coarse_step = step;
        self.fine_per_cell = (step / (self.beamwidth / FINE_DIVISOR)).ceil().max(1.0) as usize;
    }

    pub fn config(&self) -> &ArrayConfig {
        &self.cfg
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn beamwidth(&self) -> f64 {
        self.beamwidth
    }

    pub fn coarse_step(&self) -> f64 {
        self.coarse_step
    }

    /// Final angular resolution of `θ_LAS` before the parabolic step.
    pub fn fine_step(&self) -> f64 {
        self.coarse_step / self.fine_per_cell as f64
    }

    /// `Φ_init`: every lens on the port nearest the target.
    pub fn initial_selection(&self) -> Vec<usize> {
        vec![nearest_beam(self.cfg.per_lens(), self.target); self.cfg.lenses()]
    }

    /// `P^N_L`, saturating.
    pub fn candidate_count(&self) -> u64 {
        (self.cfg.per_lens() as u64).saturating_pow(self.cfg.lenses() as u32)
    }

    fn sines(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&q| self.port_sines[q]).collect()
    }

    fn validate(&self, indices: &[usize]) -> Result<()> {
        LensSelection::new(&self.cfg, 0, indices.to_vec()).map(|_| ())
    }

    /// Peak direction of `indices` at `delta_f`, every grid point evaluated
    /// directly from the double sum.
    pub fn beam_direction(&self, indices: &[usize], delta_f: f64) -> Result<BeamDirection> {
        self.validate(indices)?;
        self.cfg.check_offset(delta_f)?;
        let sines = self.sines(indices);
        let power: Vec<f64> = self
            .grid
            .iter()
            .map(|&t| self.kernel.gain(&sines, t, delta_f).norm_sqr())
            .collect();
        Ok(self.refine(&sines, delta_f, &power))
    }

    fn coarse_peak(&self, power: &[f64]) -> Option<usize> {
        let i = argmax(power);
        let min = power.iter().cloned().fold(f64::INFINITY, f64::min);
        // Relative flatness guard; only a single-element array gets here.
        (power[i] - min > 1e-12 * power[i].max(f64::MIN_POSITIVE)).then_some(i)
    }

    fn refine(&self, sines: &[f64], delta_f: f64, power: &[f64]) -> BeamDirection {
        let Some(i) = self.coarse_peak(power) else {
            return BeamDirection {
                angle: self.target,
                peak_gain: power[0].sqrt(),
                flat: true,
            };
        };
        let lo = self.grid[i.saturating_sub(1)];
        let hi = self.grid[(i + 1).min(self.grid.len() - 1)];
        let cells = ((hi - lo) / self.coarse_step).round().max(1.0) as usize * self.fine_per_cell;
        let h = (hi - lo) / cells as f64;
        let fine: Vec<f64> = (0..=cells)
            .map(|j| {
                let t = if j == cells { hi } else { lo + j as f64 * h };
                self.kernel.gain(sines, t, delta_f).norm_sqr()
            })
            .collect();
        let j = argmax(&fine);
        let mut angle = if j == cells { hi } else { lo + j as f64 * h };
        if j > 0 && j < cells {
            angle += parabolic_offset(fine[j - 1], fine[j], fine[j + 1], h);
        }
        let angle = angle.clamp(lo, hi);
        let peak = self
            .kernel
            .gain(sines, angle, delta_f)
            .norm_sqr()
            .max(fine[j]);
        BeamDirection {
            angle,
            peak_gain: peak.sqrt(),
            flat: false,
        }
    }

    fn table(&self, delta_f: f64) -> PatternTable {
        let lenses = self.cfg.lenses();
        let ports = self.cfg.per_lens();
        let scaled: Vec<f64> = self
            .grid
            .iter()
            .map(|&t| self.kernel.scaled_sin(t, delta_f))
            .collect();
        let rows: Vec<Vec<Complex64>> = (0..lenses * ports)
            .into_par_iter()
            .map(|row| {
                let (n, q) = (row / ports, row % ports);
                scaled
                    .iter()
                    .map(|&u| self.kernel.lens_partial(n, self.port_sines[q], u))
                    .collect()
            })
            .collect();
        PatternTable {
            rows,
            ports,
            points: self.grid.len(),
        }
    }

    /// Coarse pass for one candidate from the cached table.
    fn coarse(&self, table: &PatternTable, indices: &[usize], scratch: &mut Vec<f64>) -> Coarse {
        table.power(&self.kernel, indices, scratch);
        match self.coarse_peak(scratch) {
            Some(i) => Coarse {
                peak: Some(i),
                lower_bound: ((self.grid[i] - self.target).abs() - self.coarse_step).max(0.0),
            },
            None => Coarse {
                peak: None,
                lower_bound: 0.0,
            },
        }
    }

    fn evaluate(
        &self,
        table: &PatternTable,
        indices: &[usize],
        delta_f: f64,
        refine_below: f64,
        scratch: &mut Vec<f64>,
    ) -> Option<BeamDirection> {
        let c = self.coarse(table, indices, scratch);
        if c.peak.is_some() && c.lower_bound > refine_below {
            return None;
        }
        Some(self.refine(&self.sines(indices), delta_f, scratch))
    }
}

struct Coarse {
    peak: Option<usize>,
    lower_bound: f64,
}

/// Per-lens partial sums over the coarse grid, `rows[n·P + q][i]`.
struct PatternTable {
    rows: Vec<Vec<Complex64>>,
    ports: usize,
    points: usize,
}

impl PatternTable {
    fn power(&self, kernel: &GainKernel, indices: &[usize], out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.points).map(|i| {
            let sum = indices
                .iter()
                .enumerate()
                .fold(Complex64::new(0.0, 0.0), |acc, (n, &q)| {
                    acc + self.rows[n * self.ports + q][i]
                });
            kernel.normalize(sum).norm_sqr()
        }));
    }
}

/// Lexicographic rank of a tuple in `{0..P-1}^{N_L}`.
fn rank(indices: &[usize], ports: usize) -> u64 {
    indices
        .iter()
        .fold(0u64, |acc, &q| acc * ports as u64 + q as u64)
}

fn unrank(mut r: u64, ports: usize, out: &mut [usize]) {
    for slot in out.iter_mut().rev() {
        *slot = (r % ports as u64) as usize;
        r /= ports as u64;
    }
}

fn used_ranks(used: &HashSet<Vec<usize>>, cfg: &ArrayConfig) -> HashSet<u64> {
    used.iter()
        .filter(|t| t.len() == cfg.lenses() && t.iter().all(|&q| q < cfg.per_lens()))
        .map(|t| rank(t, cfg.per_lens()))
        .collect()
}

#[derive(Clone, Copy)]
struct Best {
    deviation: f64,
    rank: u64,
    dir: BeamDirection,
}

fn better(a: Option<Best>, b: Option<Best>) -> Option<Best> {
    match (a, b) {
        (Some(x), Some(y)) => {
            if (y.deviation, y.rank) < (x.deviation, x.rank) {
                Some(y)
            } else {
                Some(x)
            }
        }
        (x, None) => x,
        (None, y) => y,
    }
}

/// Realized beam direction of `sel` at `delta_f`, computing the half-power
/// beamwidth for `target` first. Reuse a [`SearchContext`] for repeated calls.
pub fn effective_beam_direction(
    cfg: &ArrayConfig,
    target: f64,
    sel: &LensSelection,
    delta_f: f64,
) -> Result<BeamDirection> {
    SearchContext::new(cfg, target)?.beam_direction(sel.indices(), delta_f)
}

/// Examines every tuple not in `used` for subband `subband` and keeps the
/// one with the smallest deviation; ties go to the lexicographically smallest.
pub fn exhaustive_search(
    ctx: &SearchContext,
    plan: &SubbandPlan,
    subband: usize,
    used: &HashSet<Vec<usize>>,
    force: bool,
) -> Result<SubbandOutcome> {
    let total = ctx.candidate_count();
    if total > EXHAUSTIVE_LIMIT && !force {
        return Err(Error::SearchTooLarge {
            candidates: total,
            limit: EXHAUSTIVE_LIMIT,
        });
    }
    let delta_f = plan.center(subband)?;
    let used = used_ranks(used, &ctx.cfg);
    let evaluations = total - used.len() as u64;
    if evaluations == 0 {
        return Err(Error::Exhausted(total, subband));
    }
    let table = ctx.table(delta_f);
    let lenses = ctx.cfg.lenses();
    let ports = ctx.cfg.per_lens();
    let chunks = total.div_ceil(CHUNK as u64);

    let best = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut scratch = Vec::with_capacity(ctx.grid.len());
            let mut tuple = vec![0; lenses];
            let mut best: Option<Best> = None;
            let end = ((c + 1) * CHUNK as u64).min(total);
            for r in c * CHUNK as u64..end {
                if used.contains(&r) {
                    continue;
                }
                unrank(r, ports, &mut tuple);
                let bound = best.map_or(f64::INFINITY, |b| b.deviation);
                let Some(dir) = ctx.evaluate(&table, &tuple, delta_f, bound, &mut scratch) else {
                    continue;
                };
                let deviation = (ctx.target - dir.angle).abs();
                if deviation < bound {
                    best = Some(Best {
                        deviation,
                        rank: r,
                        dir,
                    });
                }
            }
            best
        })
        .reduce(|| None, better)
        .expect("at least one unused candidate");

    let mut tuple = vec![0; lenses];
    unrank(best.rank, ports, &mut tuple);
    Ok(SubbandOutcome {
        subband,
        center_offset: delta_f,
        selection: LensSelection::new(&ctx.cfg, subband, tuple)?,
        theta_las: best.dir.angle,
        deviation: best.deviation,
        peak_gain: best.dir.peak_gain,
        evaluations,
        threshold: None,
        accepted_by_threshold: false,
        fallback: false,
    })
}

/// Exhaustive search over every subband in ascending order. With
/// `remove_used`, each assigned tuple is excluded from later subbands, so
/// subband `k` (1-based) examines `P^N_L - k + 1` candidates.
pub fn exhaustive_search_all(
    ctx: &SearchContext,
    plan: &SubbandPlan,
    remove_used: bool,
    force: bool,
) -> Result<SearchResult> {
    let mut used = HashSet::new();
    let mut outcomes = Vec::with_capacity(plan.filters);
    for k in 0..plan.filters {
        let outcome = exhaustive_search(ctx, plan, k, &used, force)?;
        if remove_used {
            used.insert(outcome.selection.indices().to_vec());
        }
        outcomes.push(outcome);
    }
    Ok(SearchResult {
        method: SearchMethod::Exhaustive,
        outcomes,
        order: (0..plan.filters).collect(),
    })
}

/// Middle-out subband order: `N_F/2, N_F/2+1, N_F/2-1, …` (1-based), returned
/// 0-based. Odd counts start from the true middle.
pub fn middle_out_order(filters: usize) -> Vec<usize> {
    let start = filters.div_ceil(2).max(1) - 1;
    let mut order = vec![start];
    for step in 1..filters {
        for k in [start + step, start.wrapping_sub(step)] {
            if k < filters {
                order.push(k);
            }
        }
    }
    order
}

/// Enumerates `{0..P-1}^{N_L}` in shells of increasing ℓ1 distance from
/// `center`, lexicographically within each shell.
pub struct ShellWalk {
    center: Vec<usize>,
    ports: usize,
    /// `reach[n]`: largest ℓ1 distance positions `n..` can contribute.
    reach: Vec<usize>,
    radius: usize,
}

impl ShellWalk {
    pub fn new(center: Vec<usize>, ports: usize) -> Self {
        let mut reach = vec![0; center.len() + 1];
        for n in (0..center.len()).rev() {
            reach[n] = reach[n + 1] + center[n].max(ports - 1 - center[n]);
        }
        ShellWalk {
            center,
            ports,
            reach,
            radius: 0,
        }
    }

    fn fill(
        &self,
        pos: usize,
        remaining: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        let c = self.center[pos];
        if pos + 1 == self.center.len() {
            if remaining <= c {
                prefix.push(c - remaining);
                out.push(prefix.clone());
                prefix.pop();
            }
            if remaining > 0 && c + remaining < self.ports {
                prefix.push(c + remaining);
                out.push(prefix.clone());
                prefix.pop();
            }
            return;
        }
        for q in 0..self.ports {
            let d = q.abs_diff(c);
            if d <= remaining && remaining - d <= self.reach[pos + 1] {
                prefix.push(q);
                self.fill(pos + 1, remaining - d, prefix, out);
                prefix.pop();
            }
        }
    }
}

impl Iterator for ShellWalk {
    type Item = Vec<Vec<usize>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.center.is_empty() || self.radius > self.reach[0] {
            return None;
        }
        let mut out = Vec::new();
        self.fill(0, self.radius, &mut Vec::new(), &mut out);
        self.radius += 1;
        Some(out)
    }
}

/// Threshold-based precoding: subbands are processed middle-out; each one
/// walks candidates outward from `Φ_init`, skips tuples already assigned to
/// earlier subbands, and stops at the first whose deviation satisfies the
/// scaled threshold. Without one (or at the evaluation cap), the best tuple
/// seen is kept and flagged as a fallback.
pub fn threshold_search(
    ctx: &SearchContext,
    plan: &SubbandPlan,
    policy: &ThresholdPolicy,
) -> Result<SearchResult> {
    let ports = ctx.cfg.per_lens();
    let cap = policy
        .max_evaluations
        .unwrap_or_else(|| ctx.candidate_count())
        .max(1);
    let order = middle_out_order(plan.filters);
    let mut used: HashSet<u64> = HashSet::new();
    let mut outcomes: Vec<Option<SubbandOutcome>> = vec![None; plan.filters];

    for &k in &order {
        let delta_f = plan.center(k)?;
        let limit = policy.threshold(delta_f, ctx.cfg.carrier());
        let table = ctx.table(delta_f);
        let mut evaluations = 0u64;
        let mut best: Option<Best> = None;
        let mut accepted: Option<Best> = None;

        'walk: for shell in ShellWalk::new(ctx.initial_selection(), ports) {
            let fresh: Vec<(u64, Vec<usize>)> = shell
                .into_iter()
                .map(|t| (rank(&t, ports), t))
                .filter(|(r, _)| !used.contains(r))
                .collect();
            for batch in fresh.chunks(CHUNK) {
                let room = (cap - evaluations) as usize;
                let batch = &batch[..batch.len().min(room)];
                // A candidate needs refining if it might be accepted or might
                // beat the best seen before this batch.
                let refine_below = limit.max(best.map_or(f64::INFINITY, |b| b.deviation));
                let dirs: Vec<Option<BeamDirection>> = batch
                    .par_iter()
                    .map_init(Vec::new, |scratch, (_, t)| {
                        ctx.evaluate(&table, t, delta_f, refine_below, scratch)
                    })
                    .collect();
                for ((r, _), dir) in batch.iter().zip(dirs) {
                    evaluations += 1;
                    let Some(dir) = dir else { continue };
                    let cand = Best {
                        deviation: (ctx.target - dir.angle).abs(),
                        rank: *r,
                        dir,
                    };
                    if best.is_none_or(|b| cand.deviation < b.deviation) {
                        best = Some(cand);
                    }
                    if cand.deviation <= limit {
                        accepted = Some(cand);
                        break 'walk;
                    }
                }
                if evaluations >= cap {
                    break 'walk;
                }
            }
        }

        let chosen = accepted
            .or(best)
            .ok_or(Error::Exhausted(ctx.candidate_count(), k))?;
        used.insert(chosen.rank);
        let mut tuple = vec![0; ctx.cfg.lenses()];
        unrank(chosen.rank, ports, &mut tuple);
        outcomes[k] = Some(SubbandOutcome {
            subband: k,
            center_offset: delta_f,
            selection: LensSelection::new(&ctx.cfg, k, tuple)?,
            theta_las: chosen.dir.angle,
            deviation: chosen.deviation,
            peak_gain: chosen.dir.peak_gain,
            evaluations,
            threshold: Some(limit),
            accepted_by_threshold: accepted.is_some(),
            fallback: accepted.is_none(),
        });
    }

    Ok(SearchResult {
        method: SearchMethod::Threshold,
        outcomes: outcomes
            .into_iter()
            .map(|o| o.expect("every subband visited"))
            .collect(),
        order,
    })
}
