//! Experiment orchestration and artifact writers.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use squint_core::{
    capacity, exhaustive_search_all, gain_sweep, power_baselines, power_consumption,
    threshold_search, CapacityPoint, GainMode, PowerBreakdown, RateNormalization, SearchContext,
    SearchMethod, SearchResult, SubbandPlan, RNG_NAME,
};

use crate::scenario::{array_config, Method, Resolved, Scenario};

/// Exhaustive passes in the complexity experiment above this many tuples per
/// subband run only with `force_exhaustive`.
pub const UNFORCED_EXHAUSTIVE: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Gain,
    Complexity,
    Power,
    Capacity,
    All,
}

impl Experiment {
    fn includes(self, other: Experiment) -> bool {
        self == other || self == Experiment::All
    }
}

impl FromStr for Experiment {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gain" => Experiment::Gain,
            "complexity" => Experiment::Complexity,
            "power" => Experiment::Power,
            "capacity" => Experiment::Capacity,
            "all" => Experiment::All,
            _ => {
                bail!("unknown experiment {s:?}; expected gain, complexity, power, capacity or all")
            }
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub force_exhaustive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceEntry {
    /// 1-based.
    pub subband: usize,
    pub center_offset_hz: f64,
    pub selection: Vec<usize>,
    pub theta_las_rad: f64,
    pub deviation_rad: f64,
    pub threshold_rad: Option<f64>,
    pub evaluations: u64,
    pub accepted_by_threshold: bool,
    pub fallback: bool,
    pub peak_gain: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchTrace {
    pub method: SearchMethod,
    /// 1-based processing order.
    pub order: Vec<usize>,
    pub total_evaluations: u64,
    pub fallbacks: usize,
    pub subbands: Vec<TraceEntry>,
}

impl SearchTrace {
    fn new(r: &SearchResult) -> Self {
        SearchTrace {
            method: r.method,
            order: r.order.iter().map(|k| k + 1).collect(),
            total_evaluations: r.total_evaluations(),
            fallbacks: r.outcomes.iter().filter(|o| o.fallback).count(),
            subbands: r
                .outcomes
                .iter()
                .map(|o| TraceEntry {
                    subband: o.subband + 1,
                    center_offset_hz: o.center_offset,
                    selection: o.selection.indices().to_vec(),
                    theta_las_rad: o.theta_las,
                    deviation_rad: o.deviation,
                    threshold_rad: o.threshold,
                    evaluations: o.evaluations,
                    accepted_by_threshold: o.accepted_by_threshold,
                    fallback: o.fallback,
                    peak_gain: o.peak_gain,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SubbandReport {
    pub beamwidth_rad: f64,
    pub filter_bound: Option<f64>,
    pub filters_auto: usize,
    pub filters_used: usize,
    pub subband_width_hz: f64,
    pub subcarriers_per_subband: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityReport {
    pub threshold: SearchTrace,
    pub exhaustive: Option<SearchTrace>,
    pub exhaustive_grid_decimation: usize,
    pub exhaustive_skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    #[serde(rename = "M")]
    pub antennas: usize,
    pub design: &'static str,
    pub watts: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerReport {
    pub rows: Vec<PowerRow>,
    pub breakdown: Vec<(usize, PowerBreakdown)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityCurve {
    #[serde(rename = "N_L")]
    pub lenses: usize,
    #[serde(rename = "N_F")]
    pub filters: usize,
    pub search_fallbacks: usize,
    pub search_evaluations: u64,
    pub points: Vec<CapacityPoint>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CapacityReport {
    pub normalization: RateNormalization,
    pub realizations: usize,
    pub seed: u64,
    pub curves: Vec<CapacityCurve>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: &'static str,
    pub experiment: Experiment,
    pub seed: u64,
    pub rng: &'static str,
    pub scenario: Scenario,
    pub subband: SubbandReport,
    pub search: Option<SearchTrace>,
    pub complexity: Option<ComplexityReport>,
    pub power: Option<PowerReport>,
    pub capacity: Option<CapacityReport>,
    pub warnings: Vec<String>,
    pub files: Vec<PathBuf>,
    pub wall_clock_s: f64,
}

#[derive(Serialize)]
struct GainRow<'a> {
    normalized_freq: f64,
    gain_db: f64,
    mode: &'a str,
}

#[derive(Serialize)]
struct CapacityRow {
    snr_db: f64,
    bits_per_s: f64,
    #[serde(rename = "N_F")]
    filters: usize,
    #[serde(rename = "N_L")]
    lenses: usize,
}

#[derive(Serialize)]
struct ComplexityRow {
    subband: usize,
    method: SearchMethod,
    evaluations: u64,
    fallback: bool,
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn search(
    ctx: &SearchContext,
    plan: &SubbandPlan,
    r: &Resolved,
    method: Method,
    force: bool,
) -> Result<SearchResult> {
    Ok(match method {
        Method::Threshold => threshold_search(ctx, plan, &r.policy)?,
        Method::Exhaustive => {
            let ctx = ctx
                .clone()
                .with_grid_decimation(r.scenario.search.grid_decimation);
            exhaustive_search_all(&ctx, plan, r.scenario.search.remove_used, force)?
        }
    })
}

/// Runs `experiment` and writes its artifacts into `out`.
pub fn run_experiment(
    r: &Resolved,
    experiment: Experiment,
    opts: &RunOptions,
    out: &Path,
) -> Result<RunReport> {
    let start = Instant::now();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let s = &r.scenario;
    let target = s.target_angle_rad;
    let mut files = Vec::new();
    let mut warnings = Vec::new();

    let needs_solution = experiment.includes(Experiment::Gain)
        || experiment.includes(Experiment::Capacity)
        || experiment.includes(Experiment::Complexity);
    let solution = if needs_solution {
        Some(search(&r.ctx, &r.plan, r, s.search.method, opts.force_exhaustive).context("search")?)
    } else {
        None
    };
    if let Some(sol) = &solution {
        for o in sol.outcomes.iter().filter(|o| o.fallback) {
            warnings.push(format!(
                "subband {}: no selection met the threshold; kept the best of {} evaluated",
                o.subband + 1,
                o.evaluations
            ));
        }
    }

    if experiment.includes(Experiment::Gain) {
        let sol = solution.as_ref().expect("search ran");
        let mut rows = Vec::with_capacity(3 * r.cfg.fft_size());
        for mode in [GainMode::Ideal, GainMode::FullSquint, GainMode::Compensated] {
            let pts = gain_sweep(&r.cfg, &r.plan, target, mode, Some(sol)).context("gain sweep")?;
            rows.extend(pts.into_iter().map(|p| GainRow {
                normalized_freq: p.normalized_freq,
                gain_db: p.gain_db,
                mode: mode.label(),
            }));
        }
        let path = out.join("gain_sweep.csv");
        write_csv(&path, rows)?;
        files.push(path);
    }

    let complexity = if experiment.includes(Experiment::Complexity) {
        let sol = solution.as_ref().expect("search ran");
        let threshold = match sol.method {
            SearchMethod::Threshold => sol.clone(),
            SearchMethod::Exhaustive => search(&r.ctx, &r.plan, r, Method::Threshold, false)?,
        };
        let candidates = r.ctx.candidate_count();
        let (exhaustive, skipped) = if sol.method == SearchMethod::Exhaustive {
            (Some(sol.clone()), None)
        } else if candidates > UNFORCED_EXHAUSTIVE && !opts.force_exhaustive {
            (
                None,
                Some(format!(
                    "{candidates} candidates per subband; pass --force-exhaustive"
                )),
            )
        } else {
            let res = search(
                &r.ctx,
                &r.plan,
                r,
                Method::Exhaustive,
                opts.force_exhaustive,
            )
            .context("exhaustive search")?;
            (Some(res), None)
        };
        if let Some(reason) = &skipped {
            warnings.push(format!("exhaustive search skipped: {reason}"));
        }
        let mut rows: Vec<ComplexityRow> = Vec::new();
        for res in std::iter::once(&threshold).chain(exhaustive.as_ref()) {
            rows.extend(res.outcomes.iter().map(|o| ComplexityRow {
                subband: o.subband + 1,
                method: res.method,
                evaluations: o.evaluations,
                fallback: o.fallback,
            }));
        }
        let path = out.join("complexity.csv");
        write_csv(&path, rows)?;
        files.push(path);
        Some(ComplexityReport {
            threshold: SearchTrace::new(&threshold),
            exhaustive: exhaustive.as_ref().map(SearchTrace::new),
            exhaustive_grid_decimation: s.search.grid_decimation,
            exhaustive_skipped: skipped,
        })
    } else {
        None
    };

    let power = if experiment.includes(Experiment::Power) {
        let mut rows = Vec::new();
        let mut breakdown = Vec::new();
        for &m in &s.power.sweep_antennas {
            let cfg = array_config(&s.array, m, s.array.lenses)?;
            let plan = SubbandPlan::new(&cfg, r.plan.filters)?;
            let b = power_consumption(&r.power, &cfg, &plan)?;
            let base = power_baselines(&r.power, &cfg, &plan)?;
            for w in &b.warnings {
                warnings.push(format!("power, M = {m}: {w}"));
            }
            rows.push(PowerRow {
                antennas: m,
                design: "proposed",
                watts: b.total,
            });
            rows.push(PowerRow {
                antennas: m,
                design: "conventional",
                watts: base.conventional,
            });
            rows.push(PowerRow {
                antennas: m,
                design: "filter-ps",
                watts: base.filter_ps,
            });
            breakdown.push((m, b));
        }
        let path = out.join("power.csv");
        write_csv(&path, &rows)?;
        files.push(path);
        Some(PowerReport { rows, breakdown })
    } else {
        None
    };

    let capacity_report = if experiment.includes(Experiment::Capacity) {
        let sol = solution.as_ref().expect("search ran");
        let mut curves = Vec::new();
        for &[nl, nf] in &s.capacity.sweep {
            let cfg = array_config(&s.array, s.array.antennas, nl)?;
            let plan = SubbandPlan::new(&cfg, nf)?;
            let res = if nl == r.cfg.lenses() && nf == r.plan.filters {
                sol.clone()
            } else {
                let ctx = SearchContext::new(&cfg, target)?;
                let mut sub = r.clone();
                sub.policy.base = if s.search.threshold_base_rad.is_some() {
                    r.policy.base
                } else {
                    ctx.beamwidth() / 2.0
                };
                search(&ctx, &plan, &sub, s.search.method, opts.force_exhaustive)
                    .with_context(|| format!("search for N_L = {nl}, N_F = {nf}"))?
            };
            let table = capacity(&cfg, &plan, &res, target, &r.capacity).context("capacity")?;
            curves.push(CapacityCurve {
                lenses: nl,
                filters: nf,
                search_fallbacks: res.outcomes.iter().filter(|o| o.fallback).count(),
                search_evaluations: res.total_evaluations(),
                points: table.points,
            });
        }
        let rows: Vec<CapacityRow> = curves
            .iter()
            .flat_map(|c| {
                c.points.iter().map(|p| CapacityRow {
                    snr_db: p.snr_db,
                    bits_per_s: p.capacity,
                    filters: c.filters,
                    lenses: c.lenses,
                })
            })
            .collect();
        let path = out.join("capacity.csv");
        write_csv(&path, rows)?;
        files.push(path);
        Some(CapacityReport {
            normalization: r.capacity.normalization,
            realizations: r.capacity.realizations,
            seed: r.capacity.seed,
            curves,
        })
    } else {
        None
    };

    let mut report = RunReport {
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        seed: s.seed,
        rng: RNG_NAME,
        scenario: s.clone(),
        subband: SubbandReport {
            beamwidth_rad: r.ctx.beamwidth(),
            filter_bound: r.filter_bound,
            filters_auto: r.auto_filters,
            filters_used: r.plan.filters,
            subband_width_hz: r.plan.subband_width,
            subcarriers_per_subband: r.plan.block,
        },
        search: solution.as_ref().map(SearchTrace::new),
        complexity,
        power,
        capacity: capacity_report,
        warnings,
        files,
        wall_clock_s: 0.0,
    };
    let path = out.join("report.json");
    report.files.push(path.clone());
    report.wall_clock_s = start.elapsed().as_secs_f64();
    fs::write(&path, serde_json::to_string_pretty(&report)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(report)
}

/// Human-readable subband plan.
pub fn describe_plan(r: &Resolved) -> String {
    let mut s = String::new();
    let bound = r.filter_bound.map_or_else(
        || "none (any count suffices)".to_string(),
        |b| format!("{b:.3}"),
    );
    s += &format!("half-power beamwidth: {:.6} rad\n", r.ctx.beamwidth());
    s += &format!(
        "filter-count bound:   {bound} (smallest valid divisor: {})\n",
        r.auto_filters
    );
    s += &format!(
        "filters used:         {} ({})\n",
        r.plan.filters, r.scenario.subband.filters
    );
    s += &format!(
        "subband width:        {:.6e} Hz, {} subcarriers each\n",
        r.plan.subband_width, r.plan.block
    );
    s += "subband  center_hz        low_hz           high_hz\n";
    for (k, (c, e)) in r.plan.centers.iter().zip(&r.plan.edges).enumerate() {
        s += &format!(
            "{:>7}  {:>+15.6e}  {:>+15.6e}  {:>+15.6e}\n",
            k + 1,
            c,
            e[0],
            e[1]
        );
    }
    s
}

pub fn load(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<Resolved> {
    let mut s = Scenario::load(path)?;
    if let Some(seed) = seed {
        s.seed = seed;
    }
    if let Some(out) = out {
        s.output_dir = out;
    }
    s.resolve()
        .map_err(|e| anyhow!("invalid scenario {}: {e}", path.display()))
}
