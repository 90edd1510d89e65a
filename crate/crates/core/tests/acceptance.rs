//! Acceptance suite. Runs every criterion, prints one `[PASS]`/`[FAIL]` line
//! each, and exits non-zero if any failed. Wall-clock budgets count toward
//! the verdict.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use aew_core::aggregate::{self, WeightVector};
use aew_core::data::Label::{self, Neg, Pos};
use aew_core::grids::{lambda_grid, sigma_lambda_grid};
use aew_core::harness::{self, run_rate_experiment, ExperimentConfig, PipelineTag};
use aew_core::quadrature::DEFAULT_TOL;
use aew_core::risk::{empirical_hinge_risk, excess_hinge_risk, expected_risk};
use aew_core::svm::{solve_dual, solve_dual_traced};
use aew_core::{
    Dataset, DomainBox, DyadicPartitionRule, Error, KernelSpec, PredictionRule, SolverOptions, SyntheticDist,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn label(b: bool) -> Label {
    if b {
        Pos
    } else {
        Neg
    }
}

fn random_tables<R: Rng>(rng: &mut R, n: usize, m: usize) -> (Dataset, Vec<PredictionRule>) {
    let pairs: Vec<(f64, Label)> = (0..n).map(|i| (i as f64, label(rng.gen_bool(0.5)))).collect();
    let data = Dataset::from_pairs(&pairs).unwrap();
    let xs: Vec<[f64; 1]> = (0..n).map(|i| [i as f64]).collect();
    let rules = (0..m)
        .map(|_| {
            let p = rng.gen_range(0.05..0.95);
            PredictionRule::table(xs.iter().map(|x| (&x[..], label(rng.gen_bool(p)))), Pos)
        })
        .collect();
    (data, rules)
}

// 1. Exact oracle inequality for the empirical hinge risk.
fn criterion_1() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for inst in 0..1000 {
        let m = rng.gen_range(2..=64);
        let n = rng.gen_range(1..=512);
        let (d, rules) = random_tables(&mut rng, n, m);
        let agg = aggregate::aew_aggregate(&rules, &d).map_err(|e| e.to_string())?;
        let a = empirical_hinge_risk(&agg, &d).unwrap();
        let min = aggregate::hinge_risks(&rules, &d).unwrap().into_iter().fold(f64::INFINITY, f64::min);
        let slack = min + (m as f64).ln() / n as f64 - a;
        worst = worst.min(slack);
        ensure(slack >= -1e-10, || format!("instance {inst} (M={m}, n={n}): slack {slack:e}"))?;
    }
    Ok(format!("1000 instances, smallest slack {worst:.3e}"))
}

/// Simplex membership, and the order of weights reverses the order of risks
/// (ties in risk give equal weights; weights flushed to zero are exempt).
fn check_weights(w: &WeightVector, risks: &[f64], what: &str) -> Result<(), String> {
    let s: f64 = w.as_slice().iter().sum();
    ensure((s - 1.0).abs() <= 1e-12 && w.as_slice().iter().all(|v| *v >= 0.0), || {
        format!("{what}: not on the simplex (sum {s})")
    })?;
    let mut order: Vec<usize> = (0..risks.len()).collect();
    order.sort_by(|&a, &b| risks[a].total_cmp(&risks[b]));
    for pair in order.windows(2) {
        let (j, k) = (pair[0], pair[1]);
        let ok = if risks[j] == risks[k] { w[j] == w[k] } else { w[j] > w[k] || w[k] == 0.0 };
        ensure(ok, || format!("{what}: risks {} < {} but weights {} vs {}", risks[j], risks[k], w[j], w[k]))?;
    }
    Ok(())
}

// 2. Weight vectors from every AEW code path.
fn criterion_2() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut count = 0;
    for _ in 0..400 {
        let n = rng.gen_range(1..=200);
        let m = rng.gen_range(1..=40);
        let (d, rules) = random_tables(&mut rng, n, m);
        let risks = aggregate::hinge_risks(&rules, &d).unwrap();
        check_weights(&aggregate::aew_weights(&rules, &d).unwrap(), &risks, "aew")?;
        check_weights(
            &aggregate::phi_weights(&rules, &d, &aggregate::ConvexLoss::Hinge).unwrap(),
            &risks,
            "phi(hinge)",
        )?;
        check_weights(&aggregate::agreement_weights(&rules, &d).unwrap(), &risks, "agreement")?;
        for w in [aggregate::recursive_weights(&rules, &d).unwrap(), aggregate::erm_aggregate(&rules, &d).unwrap().weights().clone()] {
            let s: f64 = w.as_slice().iter().sum();
            ensure((s - 1.0).abs() <= 1e-12, || format!("recursive/erm weights sum to {s}"))?;
        }
        count += 5;
    }
    let dist = SyntheticDist::new(1.0).unwrap();
    let dom = DomainBox::interval(-1.0, 1.0);
    for seed in 0..20 {
        let data = dist.sample(rng.gen_range(16..400), seed).unwrap();
        let (_, hold, _) = harness::split(&data, 1.0).unwrap();
        let run = harness::pipeline_sieve(&data, 1.0, None, &dom).unwrap();
        let risks = aggregate::hinge_risks(run.model.rules(), &hold).unwrap();
        check_weights(run.model.weights(), &risks, "sieve pipeline")?;
        count += 1;
    }
    Ok(format!("{count} weight vectors"))
}

// 3. Dual solver against independent oracles.
fn criterion_3() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let opts = SolverOptions::default();
    let mut worst_small = 0.0f64;
    let mut worst_large = 0.0f64;
    let mut worst_step = 0.0f64;
    let mut check_trace = |trace: &[f64]| -> Result<(), String> {
        for w in trace.windows(2) {
            worst_step = worst_step.min(w[1] - w[0]);
            ensure(w[1] - w[0] >= -1e-12, || format!("objective decreased by {:e}", w[0] - w[1]))?;
        }
        Ok(())
    };
    for inst in 0..200 {
        let n = rng.gen_range(1..=6);
        let dim = rng.gen_range(1..=2);
        let d = random_dataset(&mut rng, n, dim);
        let sigma = rng.gen_range(0.3..4.0);
        let lambda = 10f64.powf(rng.gen_range(-2.0..0.5));
        let (m, trace) = solve_dual_traced(&d, KernelSpec::new(sigma).unwrap(), lambda, &opts).unwrap();
        check_trace(&trace)?;
        let (_, exact) = svm_dual_by_faces(&d, sigma, lambda);
        let gap = (m.dual_value() - exact).abs();
        worst_small = worst_small.max(gap);
        ensure(gap <= 1e-5, || format!("n<=6 instance {inst}: {} vs {exact}", m.dual_value()))?;
        if n <= 2 {
            let g = svm_dual_by_grid(&d, sigma, lambda, 1000);
            ensure((m.dual_value() - g).abs() <= 1e-5, || format!("grid search instance {inst}: {} vs {g}", m.dual_value()))?;
        }
    }
    for inst in 0..50 {
        let n = rng.gen_range(1..=20);
        let dim = rng.gen_range(1..=2);
        let d = random_dataset(&mut rng, n, dim);
        let sigma = rng.gen_range(0.3..4.0);
        let lambda = 10f64.powf(rng.gen_range(-2.0..0.5));
        let (m, trace) = solve_dual_traced(&d, KernelSpec::new(sigma).unwrap(), lambda, &opts).unwrap();
        check_trace(&trace)?;
        let (_, v, r) = svm_dual_by_projected_gradient(&d, sigma, lambda, 1e-10);
        ensure(r <= 1e-8, || format!("n<=20 instance {inst}: oracle stalled at {r:e}"))?;
        let gap = (m.dual_value() - v).abs();
        worst_large = worst_large.max(gap);
        ensure(gap <= 1e-6, || format!("n<=20 instance {inst}: {} vs {v}", m.dual_value()))?;
    }
    Ok(format!(
        "max gap {worst_small:.1e} (n<=6), {worst_large:.1e} (n<=20); worst step {worst_step:.1e}"
    ))
}

// 4. The two-point instance.
fn criterion_4() -> Check {
    let d = Dataset::from_pairs(&[(0.0, Pos), (1.0, Neg)]).unwrap();
    let m = solve_dual(&d, KernelSpec::new(1.0).unwrap(), 0.25, &SolverOptions::default()).unwrap();
    let c = m.coeffs();
    let want = 2.0 + 2.0 * (-1.0f64).exp();
    ensure((c[0] - 1.0).abs() <= 1e-8 && (c[1] + 1.0).abs() <= 1e-8, || format!("coefficients {c:?}"))?;
    ensure((m.dual_value() - want).abs() <= 1e-8, || format!("dual value {}", m.dual_value()))?;
    ensure(m.converged(), || "solver reports non-convergence".into())?;
    Ok(format!("C = ({}, {}), value {:.10}", c[0], c[1], m.dual_value()))
}

/// Composite Simpson rule.
fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    let h = (b - a) / intervals as f64;
    let mut s = f(a) + f(b);
    for i in 1..intervals {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

// 5. Margin family: CDF, sampling, Bayes risk.
fn criterion_5() -> Check {
    let mut worst_cdf = 0.0f64;
    let mut worst_z = 0.0f64;
    for (i, alpha) in [0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let dist = SyntheticDist::new(alpha).unwrap();
        for k in 1..=100 {
            let t = k as f64 / 100.0;
            let root = if t >= 1.0 { 1.0 } else { bisect(|x| 2.0 * dist.eta(x) - 1.0 - t, 0.0, 1.0) };
            let cdf = dist.margin_cdf(t);
            let err = (cdf - t.powf(alpha)).abs().max((cdf - root).abs());
            worst_cdf = worst_cdf.max(err);
            ensure(err <= 1e-12, || format!("α={alpha}, t={t}: cdf {cdf}"))?;
        }
        let n = 1_000_000;
        let sample = dist.sample(n, 500 + i as u64).unwrap();
        let mut margins: Vec<f64> = sample.iter().map(|s| (2.0 * dist.eta(s.x[0]) - 1.0).abs()).collect();
        margins.sort_by(f64::total_cmp);
        for k in 1..10 {
            let t = k as f64 / 10.0;
            let p = t.powf(alpha);
            let emp = margins.partition_point(|&m| m <= t) as f64 / n as f64;
            let z = (emp - p).abs() / (p * (1.0 - p) / n as f64).sqrt();
            worst_z = worst_z.max(z);
            ensure(z <= 3.0, || format!("α={alpha}, t={t}: empirical {emp} vs {p} ({z:.2}σ)"))?;
        }
        // R* = 2 ∫_0^1 (1 − x^{1/α})/2 · 1/2 dx, with x = u^{2α} making the integrand polynomial.
        let q = 0.5 * simpson(|u| (1.0 - u * u) * 2.0 * alpha * u.powf(2.0 * alpha - 1.0), 0.0, 1.0, 20_000);
        let closed = 0.5 - alpha / (2.0 * (alpha + 1.0));
        ensure((q - closed).abs() <= 1e-10, || format!("α={alpha}: Simpson {q} vs {closed}"))?;
        ensure((dist.bayes_risk() - closed).abs() <= 1e-10, || format!("α={alpha}: bayes_risk {}", dist.bayes_risk()))?;
        let r = expected_risk(&dist.bayes_rule(), &dist).unwrap();
        ensure((r - closed).abs() <= 1e-10, || format!("α={alpha}: quadrature risk {r} vs {closed}"))?;
    }
    Ok(format!("max CDF error {worst_cdf:.1e}, max |z| {worst_z:.2}"))
}

fn summary_line(res: &aew_core::ExperimentResult, n: usize) -> (f64, f64) {
    let s = res.size_summary(n).expect("size present");
    (s.mean_excess, s.mean_min_member_excess)
}

// 6. Population oracle-inequality shape for two pipelines.
fn criterion_6() -> Check {
    let mut parts = Vec::new();
    for tag in [PipelineTag::Sieve, PipelineTag::SvmLambda] {
        let cfg = ExperimentConfig::new(tag, 1.0, vec![1024], 50, 6);
        let res = run_rate_experiment(&cfg).map_err(|e| e.to_string())?;
        let (agg, min) = summary_line(&res, 1024);
        ensure(agg <= 2.0 * min + 0.05, || format!("{}: {agg} > 2·{min} + 0.05", tag.as_str()))?;
        parts.push(format!("{} {agg:.4} vs bound {:.4}", tag.as_str(), 2.0 * min + 0.05));
    }
    Ok(parts.join("; "))
}

fn random_dyadic<R: Rng>(rng: &mut R) -> PredictionRule {
    let depth = rng.gen_range(0..=5);
    let labels = (0..1 << depth).map(|_| label(rng.gen_bool(0.5))).collect();
    PredictionRule::Dyadic(
        DyadicPartitionRule::from_labels(depth, DomainBox::interval(-1.0, 1.0), labels).unwrap().into(),
    )
}

// 7. Recursive aggregate: incremental vs recomputed, and the population identity.
fn criterion_7() -> Check {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut worst_w = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=120);
        let m = rng.gen_range(1..=30);
        let (d, rules) = random_tables(&mut rng, n, m);
        let inc = aggregate::recursive_weights(&rules, &d).unwrap();
        let mut avg = vec![0.0; m];
        for k in 1..=n {
            let w = aggregate::aew_weights(&rules, &d.prefix(k).unwrap()).unwrap();
            for (a, v) in avg.iter_mut().zip(w.as_slice()) {
                *a += v / n as f64;
            }
        }
        for (a, b) in inc.as_slice().iter().zip(&avg) {
            worst_w = worst_w.max((a - b).abs());
        }
        ensure(worst_w <= 1e-12, || format!("incremental weights differ by {worst_w:e}"))?;
    }
    let mut worst_h = 0.0f64;
    for _ in 0..20 {
        let alpha = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let dist = SyntheticDist::new(alpha).unwrap();
        let n = rng.gen_range(2..=30);
        let d = dist.sample(n, rng.gen()).unwrap();
        let rules: Vec<PredictionRule> = (0..rng.gen_range(2..=8)).map(|_| random_dyadic(&mut rng)).collect();
        let rec = aggregate::recursive_aggregate(&rules, &d).unwrap();
        let lhs = excess_hinge_risk(&rec, &dist).unwrap();
        let mut rhs = 0.0;
        for k in 1..=n {
            let a = aggregate::aew_aggregate(&rules, &d.prefix(k).unwrap()).unwrap();
            rhs += excess_hinge_risk(&a, &dist).unwrap() / n as f64;
        }
        worst_h = worst_h.max((lhs - rhs).abs());
        ensure((lhs - rhs).abs() <= 2.0 * DEFAULT_TOL, || format!("α={alpha}, n={n}: {lhs} vs {rhs}"))?;
    }
    Ok(format!("weight gap {worst_w:.1e}, hinge identity gap {worst_h:.1e}"))
}

// 8. Rate direction of the sieve pipeline.
fn criterion_8() -> Check {
    let sizes = vec![256, 512, 1024, 2048, 4096];
    let cfg = ExperimentConfig::new(PipelineTag::Sieve, 1.0, sizes, 50, 8);
    let res = run_rate_experiment(&cfg).map_err(|e| e.to_string())?;
    let slope = res.summary.slope.ok_or("no slope")?;
    let per = &res.summary.per_n;
    for w in per.windows(2) {
        let se = (w[0].stderr_excess.powi(2) + w[1].stderr_excess.powi(2)).sqrt();
        ensure(w[1].mean_excess <= w[0].mean_excess + se, || {
            format!("mean at n={} ({}) exceeds n={} ({}) by more than {se}", w[1].n, w[1].mean_excess, w[0].n, w[0].mean_excess)
        })?;
    }
    ensure(slope < -0.4, || format!("slope {slope}"))?;
    let means: Vec<String> = per.iter().map(|s| format!("{:.4}", s.mean_excess)).collect();
    Ok(format!("slope {slope:.3}, means [{}]", means.join(", ")))
}

// 9. Grid cardinalities and endpoints.
fn criterion_9() -> Check {
    let ls = [2usize, 10, 37, 100, 148, 256, 500, 1000, 2000, 4096];
    let b0s = [0.2, 0.4, 0.5, 0.6, 0.75];
    let mut combos = 0;
    for (i, &l) in ls.iter().enumerate() {
        for (j, &b0) in b0s.iter().enumerate() {
            let d0 = 1 + (i + j) % 3;
            combos += 1;
            let lf = l as f64;
            let delta = lf.powf(b0);
            let lg = lambda_grid(l, b0).map_err(|e| e.to_string())?;
            let kmax = (1.5 * delta).floor() as usize;
            ensure(lg.len() == kmax + 1, || format!("l={l} b0={b0}: {} λ entries", lg.len()))?;
            let first = lg.entries[0].lambda;
            let last = lg.entries[kmax].lambda;
            ensure(first == lf.powf(-0.5), || format!("l={l} b0={b0}: λ_0 = {first}"))?;
            ensure(last == lf.powf(-(0.5 + kmax as f64 / delta)), || format!("l={l} b0={b0}: λ_K = {last}"))?;
            ensure(lg.entries.windows(2).all(|w| w[1].lambda < w[0].lambda), || "λ grid not decreasing".into())?;

            let p1 = 2 * delta.floor() as usize;
            let p2 = (delta / 2.0).floor() as usize;
            match sigma_lambda_grid(l, b0, d0) {
                Err(Error::EmptyGrid(_)) => ensure(p2 == 0, || format!("l={l} b0={b0}: unexpected empty grid"))?,
                Err(e) => return Err(e.to_string()),
                Ok(g) => {
                    ensure(g.len() == p1 * p2, || format!("l={l} b0={b0}: {} pairs, want {}", g.len(), p1 * p2))?;
                    let (a, z) = (&g.entries[0], &g.entries[g.len() - 1]);
                    ensure((a.p1, a.p2, z.p1, z.p2) == (1, 1, p1, p2), || "provenance endpoints".into())?;
                    let s0 = lf.powf(1.0 / (2.0 * delta) / d0 as f64);
                    let l0 = lf.powf(-(1.0 / delta + 0.5));
                    let s1 = lf.powf(p1 as f64 / (2.0 * delta) / d0 as f64);
                    let l1 = lf.powf(-(p2 as f64 / delta + 0.5));
                    ensure((a.sigma, a.lambda, z.sigma, z.lambda) == (s0, l0, s1, l1), || {
                        format!("l={l} b0={b0} d0={d0}: endpoints {:?} {:?}", (a.sigma, a.lambda), (z.sigma, z.lambda))
                    })?;
                }
            }
        }
    }
    let g = lambda_grid(100, 0.5).unwrap();
    ensure(g.len() == 16, || format!("worked λ grid has {} entries", g.len()))?;
    ensure((g.entries[0].lambda - 0.1).abs() < 1e-15 && (g.entries[15].lambda - 1e-4).abs() < 1e-18, || {
        "worked λ endpoints".into()
    })?;
    let s = sigma_lambda_grid(100, 0.5, 1).unwrap();
    ensure(s.len() == 100, || format!("worked (σ, λ) grid has {} pairs", s.len()))?;
    let e = &s.entries[0];
    ensure((e.sigma - 100f64.powf(0.05)).abs() < 1e-14 && (e.lambda - 100f64.powf(-0.6)).abs() < 1e-15, || {
        format!("worked pair {:?}", (e.sigma, e.lambda))
    })?;
    ensure((e.sigma - 1.2589).abs() < 1e-4 && (e.lambda - 0.0631).abs() < 1e-4, || "worked pair rounding".into())?;
    Ok(format!("{combos} combinations plus the worked l=100 grids"))
}

// 10. Output bytes do not depend on the worker count.
fn criterion_10() -> Check {
    let configs = [
        ExperimentConfig::new(PipelineTag::Sieve, 1.0, vec![64, 128, 256], 12, 10),
        ExperimentConfig::new(PipelineTag::SplitAverage, 2.0, vec![64, 128], 6, 11),
        ExperimentConfig::new(PipelineTag::SvmLambda, 1.0, vec![64, 96], 4, 12),
    ];
    let mut bytes = 0;
    for cfg in &configs {
        let run = |threads: usize| -> Result<String, String> {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| e.to_string())?;
            pool.install(|| run_rate_experiment(cfg)).and_then(|r| r.csv_string()).map_err(|e| e.to_string())
        };
        let (one, eight) = (run(1)?, run(8)?);
        ensure(one == eight, || format!("{}: CSV differs between 1 and 8 threads", cfg.pipeline.as_str()))?;
        bytes += one.len();
    }
    Ok(format!("{bytes} identical CSV bytes across 1 and 8 threads"))
}

type Criterion = (usize, fn() -> Check, u64);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, criterion_1, 10),
        (2, criterion_2, 5),
        (3, criterion_3, 120),
        (4, criterion_4, 1),
        (5, criterion_5, 30),
        (6, criterion_6, 600),
        (7, criterion_7, 60),
        (8, criterion_8, 1800),
        (9, criterion_9, 1),
        (10, criterion_10, 600),
    ];
    let filter: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, f, budget) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > Duration::from_secs(budget) => {
                Err(format!("{msg}; took {:.1}s, budget {budget}s", elapsed.as_secs_f64()))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!("[PASS] criterion {id}: {msg} ({:.2}s)", elapsed.as_secs_f64()),
            Err(msg) => {
                failed += 1;
                println!("[FAIL] criterion {id}: {msg} ({:.2}s)", elapsed.as_secs_f64());
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
