//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::collections::HashSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use squint_core::*;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn db(x: f64) -> f64 {
    20.0 * x.log10()
}

/// Reference configuration shared by several criteria.
struct Reference {
    cfg: ArrayConfig,
    plan: SubbandPlan,
    ctx: SearchContext,
    solution: SearchResult,
    elapsed: Duration,
}

fn reference() -> Reference {
    let cfg = ArrayConfig::default();
    let plan = SubbandPlan::new(&cfg, 16).unwrap();
    let start = Instant::now();
    let ctx = SearchContext::new(&cfg, FRAC_PI_4).unwrap();
    let solution = threshold_search(
        &ctx,
        &plan,
        &ThresholdPolicy::from_beamwidth(ctx.beamwidth()),
    )
    .unwrap();
    Reference {
        cfg,
        plan,
        ctx,
        solution,
        elapsed: start.elapsed(),
    }
}

fn within_3db(r: &Reference) -> Verdict {
    const FLOOR_DB: f64 = -3.5;
    let precoders = r.solution.precoders(&r.ctx).unwrap();
    let gains: Vec<f64> = (0..r.plan.filters)
        .map(|k| {
            let g = beam_gain(&r.cfg, &precoders[k], FRAC_PI_4, r.plan.centers[k]);
            db(g.norm())
        })
        .collect();
    let (worst_k, worst) =
        gains.iter().enumerate().fold(
            (0, f64::INFINITY),
            |a, (k, &g)| if g < a.1 { (k, g) } else { a },
        );
    let below = gains.iter().filter(|&&g| g < FLOOR_DB).count();
    let fast = r.elapsed <= Duration::from_secs(600);
    verdict(
        below == 0 && fast,
        format!(
            "{below}/16 subband centers below {FLOOR_DB} dB; worst {worst:.2} dB at subband {}; search took {:.1} s",
            worst_k + 1,
            r.elapsed.as_secs_f64()
        ),
    )
}

fn complexity(r: &Reference) -> Verdict {
    const THRESHOLD_LIMIT: u64 = 10_000;
    const DECIMATION: usize = 4;
    let over: Vec<(usize, u64)> = r
        .solution
        .outcomes
        .iter()
        .filter(|o| o.evaluations > THRESHOLD_LIMIT)
        .map(|o| (o.subband + 1, o.evaluations))
        .collect();
    let max_threshold = r
        .solution
        .outcomes
        .iter()
        .map(|o| o.evaluations)
        .max()
        .unwrap();

    let ctx = r.ctx.clone().with_grid_decimation(DECIMATION);
    let start = Instant::now();
    let ex = exhaustive_search_all(&ctx, &r.plan, true, true).unwrap();
    let total = 32u64.pow(4);
    let counts_ok = ex
        .outcomes
        .iter()
        .enumerate()
        .all(|(i, o)| o.evaluations == total - i as u64);
    verdict(
        over.is_empty() && counts_ok,
        format!(
            "threshold max {max_threshold} evaluations/subband, over {THRESHOLD_LIMIT}: {over:?}; exhaustive counts 32^4-k'+1 {} (grid decimation {DECIMATION}, {:.0} s)",
            if counts_ok { "match" } else { "MISMATCH" },
            start.elapsed().as_secs_f64()
        ),
    )
}

/// Lexicographic sweep of every tuple with the direct (untabled) evaluator.
fn brute_force(
    ctx: &SearchContext,
    df: f64,
    used: &HashSet<Vec<usize>>,
) -> Option<(Vec<usize>, f64, u64)> {
    let (p, nl) = (ctx.config().per_lens(), ctx.config().lenses());
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut count = 0u64;
    for r in 0..p.pow(nl as u32) {
        let t: Vec<usize> = (0..nl)
            .map(|n| r / p.pow((nl - 1 - n) as u32) % p)
            .collect();
        if used.contains(&t) {
            continue;
        }
        count += 1;
        let dev = (ctx.target() - ctx.beam_direction(&t, df).unwrap().angle).abs();
        if best.as_ref().is_none_or(|b| dev < b.1) {
            best = Some((t, dev));
        }
    }
    best.map(|(t, d)| (t, d, count))
}

fn small_oracle() -> Verdict {
    let start = Instant::now();
    let mut cases = 0;
    let mut mismatches = Vec::new();
    let mut violations = 0;
    for p in 2..=6usize {
        for nl in 1..=2usize {
            for target in [0.0, 0.2, FRAC_PI_4] {
                let cfg = ArrayConfig::new(p * nl, nl, 60e9, 5e9, 64).unwrap();
                let ctx = SearchContext::new(&cfg, target).unwrap();
                let filters = if p.pow(nl as u32) >= 4 { 4 } else { 2 };
                let plan = SubbandPlan::new(&cfg, filters).unwrap();
                let ex = exhaustive_search_all(&ctx, &plan, true, false).unwrap();
                let mut used = HashSet::new();
                for o in &ex.outcomes {
                    let (t, dev, count) =
                        brute_force(&ctx, plan.centers[o.subband], &used).unwrap();
                    if o.selection.indices() != t || o.deviation != dev || o.evaluations != count {
                        mismatches
                            .push(format!("P={p} N_L={nl} θ̂={target:.3} k'={}", o.subband + 1));
                    }
                    used.insert(t);
                }
                let th = threshold_search(
                    &ctx,
                    &plan,
                    &ThresholdPolicy::from_beamwidth(ctx.beamwidth()),
                )
                .unwrap();
                violations += th
                    .outcomes
                    .iter()
                    .filter(|o| o.accepted_by_threshold && o.deviation > o.threshold.unwrap())
                    .count();
                cases += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        mismatches.is_empty() && violations == 0 && secs <= 60.0,
        format!(
            "{cases} instances, {} exhaustive mismatches {mismatches:?}, {violations} threshold violations, {secs:.1} s",
            mismatches.len()
        ),
    )
}

fn squint_oracle() -> Verdict {
    const GRID: f64 = 1e-4;
    const TOL: f64 = 1e-3;
    let cfg = ArrayConfig::new(64, 1, 60e9, 5e9, 64).unwrap();
    let w = cfg.bandwidth();
    let mut worst: f64 = 0.0;
    for target in [0.1, 0.4, FRAC_PI_4] {
        let ideal = ideal_steering(&cfg, target).unwrap();
        for df in [-w / 2.0, -w / 4.0, w / 4.0, w / 2.0] {
            let n = (std::f64::consts::PI / GRID) as usize;
            let mut best = (0.0, -1.0);
            for i in 0..n {
                let t = -FRAC_PI_2 + i as f64 * GRID;
                let v = ideal
                    .inner(&effective_steering(&cfg, t, df).unwrap())
                    .norm();
                if v > best.1 {
                    best = (t, v);
                }
            }
            let formula = effective_direction(target, df, cfg.carrier()).unwrap();
            worst = worst.max((best.0 - formula).abs());
        }
    }
    verdict(
        worst <= TOL,
        format!("max |argmax - formula| = {worst:.2e} rad (tolerance {TOL:.0e})"),
    )
}

fn broadside() -> Verdict {
    let cfg = ArrayConfig::default();
    let plan = SubbandPlan::new(&cfg, 16).unwrap();
    let ctx = SearchContext::new(&cfg, 0.0).unwrap();
    let res = threshold_search(
        &ctx,
        &plan,
        &ThresholdPolicy::from_beamwidth(ctx.beamwidth()),
    )
    .unwrap();
    // "Zero" means below the fine angular resolution of the peak search.
    let zero = ctx.fine_step();
    let max_dev = res.outcomes.iter().map(|o| o.deviation).fold(0.0, f64::max);
    let first = &res.outcomes[res.order[0]];
    let first_ok = first.evaluations == 1 && first.selection.indices() == ctx.initial_selection();
    let sweep = gain_sweep(&cfg, &plan, 0.0, GainMode::Compensated, Some(&res)).unwrap();
    let (lo, hi) = sweep
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
            (a.min(p.gain_db), b.max(p.gain_db))
        });
    let spread = hi - lo;
    verdict(
        max_dev <= zero && first_ok && spread < 0.1,
        format!(
            "max deviation {max_dev:.2e} rad (zero tolerance {zero:.1e}); first subband {} accepted {:?} after {} evaluation(s); compensated spread {spread:.3} dB (limit 0.1)",
            first.subband + 1,
            first.selection.indices(),
            first.evaluations
        ),
    )
}

fn fig3_property() -> Verdict {
    let cfg = ArrayConfig::default();
    let omega = half_power_beamwidth(&cfg, FRAC_PI_4).unwrap();
    let filters = min_filters(&cfg, omega).unwrap();
    let plan = SubbandPlan::new(&cfg, filters).unwrap();
    let mut worst: f64 = 0.0;
    let mut worst_ratio_local: f64 = 0.0;
    let steps = (FRAC_PI_2 / 0.01).floor() as usize;
    let angles = (0..=steps)
        .map(|i| -FRAC_PI_4 + i as f64 * 0.01)
        .chain([FRAC_PI_4]);
    for theta in angles {
        let local = half_power_beamwidth(&cfg, theta).unwrap();
        for k in 0..plan.filters {
            let s = within_band_squint(&plan, &cfg, theta, k).unwrap();
            worst = worst.max(s);
            worst_ratio_local = worst_ratio_local.max(s / (local / 8.0));
        }
    }
    verdict(
        worst <= omega / 8.0,
        format!(
            "auto N_F = {filters}; max within-band squint {worst:.3e} rad vs Ω_3dB/8 = {:.3e} rad; worst ratio to the local Ω_3dB(θ̂)/8 {worst_ratio_local:.3}",
            omega / 8.0
        ),
    )
}

fn gain_ordering(r: &Reference) -> Verdict {
    const SLACK: f64 = 0.1;
    let sweep = |mode, sol| gain_sweep(&r.cfg, &r.plan, FRAC_PI_4, mode, sol).unwrap();
    let ideal = sweep(GainMode::Ideal, None);
    let comp = sweep(GainMode::Compensated, Some(&r.solution));
    let full = sweep(GainMode::FullSquint, None);
    let mut upper = 0;
    let mut lower = 0;
    let mut worst_lower: (usize, f64) = (0, 0.0);
    for k in 0..ideal.len() {
        if comp[k].gain_db > ideal[k].gain_db + SLACK {
            upper += 1;
        }
        let gap = full[k].gain_db - comp[k].gain_db;
        if gap > SLACK {
            lower += 1;
            if gap > worst_lower.1 {
                worst_lower = (k, gap);
            }
        }
    }
    let edge = full[0].gain_db.min(full[full.len() - 1].gain_db);
    verdict(
        upper == 0 && lower == 0 && edge < -3.0,
        format!(
            "{upper} subcarriers with compensated > ideal, {lower} with full-squint > compensated (worst by {:.2} dB at subcarrier {}); full-squint band-edge gain {edge:.2} dB",
            worst_lower.1, worst_lower.0
        ),
    )
}

fn power_ordering() -> Verdict {
    let model = PowerModel::default();
    let mut ok = true;
    let mut parts = Vec::new();
    for m in [64, 128, 256] {
        let cfg = ArrayConfig::new(m, 4, 60e9, 5e9, 2048).unwrap();
        let plan = SubbandPlan::new(&cfg, 16).unwrap();
        let p = power_consumption(&model, &cfg, &plan).unwrap().total;
        let b = power_baselines(&model, &cfg, &plan).unwrap();
        ok &= p < b.conventional && p < b.filter_ps;
        parts.push(format!(
            "M={m}: proposed {p:.2} W, conventional {:.2} W, filter+PS {:.2} W",
            b.conventional, b.filter_ps
        ));
    }
    verdict(ok, parts.join("; "))
}

fn capacity_trends(r: &Reference) -> Verdict {
    let cc = CapacityConfig {
        realizations: 100,
        seed: 2024,
        ..Default::default()
    };
    let curve = |nl: usize, nf: usize| {
        let cfg = ArrayConfig::new(128, nl, 60e9, 5e9, 2048).unwrap();
        let plan = SubbandPlan::new(&cfg, nf).unwrap();
        let sol = if nl == 4 && nf == 16 {
            r.solution.clone()
        } else {
            let ctx = SearchContext::new(&cfg, FRAC_PI_4).unwrap();
            threshold_search(
                &ctx,
                &plan,
                &ThresholdPolicy::from_beamwidth(ctx.beamwidth()),
            )
            .unwrap()
        };
        capacity(&cfg, &plan, &sol, FRAC_PI_4, &cc).unwrap()
    };
    let mut drops = Vec::new();
    let mut check = |label: &str, a: &CapacityTable, b: &CapacityTable| {
        for (p, q) in a.points.iter().zip(&b.points) {
            let se = p.std_error.max(q.std_error);
            if q.capacity < p.capacity - se {
                drops.push(format!(
                    "{label} at {:.0} dB: {:.4e} -> {:.4e} (SE {:.2e})",
                    p.snr_db, p.capacity, q.capacity, se
                ));
            }
        }
    };
    let f4 = curve(4, 4);
    let f8 = curve(4, 8);
    let f16 = curve(4, 16);
    let l2 = curve(2, 16);
    check("N_F 4->8", &f4, &f8);
    check("N_F 8->16", &f8, &f16);
    check("N_L 2->4", &l2, &f16);
    let n = drops.len();
    let shown: Vec<_> = drops.into_iter().take(3).collect();
    verdict(
        n == 0,
        format!("{n} decreases beyond one standard error: {shown:?}"),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("scenario.toml");
    std::fs::write(&scenario, "seed = 11\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_squint"))
            .args(["run", "--experiment", "all", "--scenario"])
            .arg(&scenario)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
        out
    };
    let a = run("a");
    let b = run("b");
    let mut differing = Vec::new();
    let files = [
        "gain_sweep.csv",
        "complexity.csv",
        "power.csv",
        "capacity.csv",
    ];
    for f in files {
        if std::fs::read(a.join(f)).unwrap() != std::fs::read(b.join(f)).unwrap() {
            differing.push(f);
        }
    }
    verdict(
        differing.is_empty(),
        format!("{} CSVs compared, differing: {differing:?}", files.len()),
    )
}

fn main() -> ExitCode {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, v: Verdict| {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {n:>2} {tag} {name}: {}", v.detail);
        if !v.pass {
            failed += 1;
        }
    };
    let r = reference();
    report(1, "within-3dB compensation", within_3db(&r));
    report(2, "complexity separation", complexity(&r));
    report(3, "small-instance oracle", small_oracle());
    report(4, "squint-formula oracle", squint_oracle());
    report(5, "broadside invariance", broadside());
    report(6, "within-band squint tolerance", fig3_property());
    report(7, "gain ordering", gain_ordering(&r));
    report(8, "power ordering", power_ordering());
    report(9, "capacity trends", capacity_trends(&r));
    report(10, "determinism", determinism());
    println!("{} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
