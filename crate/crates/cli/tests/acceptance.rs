//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails. `ACCEPTANCE_ONLY=1,5` restricts the run.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::{dot, matvec, random_dataset, rng, simpson_split, to_rows};
use rand::Rng;
use ssanova::kernels::{gram_matrix, EffectKernel, PenaltyKernel, UnivariateKernel};
use ssanova::simulation::{
    benchmark_effects, run_ci_study, run_test_study, CiStudyConfig, CiStudyResult, StudySettings, TestStudyConfig,
    DEFAULT_GRID_RESOLUTION, DEFAULT_REPLICATES,
};
use ssanova::solver::{fit_at_lambda, smoother_matrix};
use ssanova::spectral::EffectEigensystem;
use ssanova::{Effect, ModelSpec, PenaltySystem};

const SEED: u64 = 20_240_601;
const ALPHA: f64 = 0.05;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn settings(replicates: usize) -> StudySettings {
    StudySettings {
        seed: SEED,
        replicates,
        alpha: ALPHA,
        gcv_gamma: ssanova::design::DEFAULT_GCV_GAMMA,
        lambda_grid: None,
    }
}

fn main_effects() -> Vec<Effect> {
    benchmark_effects().into_iter().filter(|e| e.order() == 1).collect()
}

fn interactions() -> Vec<Effect> {
    benchmark_effects().into_iter().filter(|e| e.order() == 2).collect()
}

fn penalized() -> Vec<Effect> {
    benchmark_effects().into_iter().filter(|e| !e.is_intercept()).collect()
}

fn objective(k: &[Vec<f64>], y: &[f64], f0: f64, c: &[f64], lambda: f64) -> f64 {
    let kc = matvec(k, c);
    let n = y.len() as f64;
    y.iter().zip(&kc).map(|(a, b)| (a - f0 - b).powi(2)).sum::<f64>() / n + lambda * dot(c, &kc)
}

fn optimality() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = f64::INFINITY;
    for inst in 0..20 {
        let n = r.random_range(5..=30);
        let d = r.random_range(1..=3);
        let m = r.random_range(2..=3);
        let lambda = 10f64.powf(r.random_range(-6.0..-1.0));
        let data = random_dataset(500 + inst, n, d);
        let spec = ModelSpec::all_up_to(d, d).with_order(m);
        let fit = fit_at_lambda(&spec, &data, lambda).unwrap();
        let k = to_rows(&gram_matrix(&PenaltyKernel::new(&spec.effects, m).unwrap(), data.x().as_ref()).unwrap());
        let best = objective(&k, data.y(), fit.intercept(), fit.coefficients(), lambda);
        for _ in 0..1000 {
            let scale = 10f64.powf(r.random_range(-3.0..0.0));
            let f0 = fit.intercept() + scale * (r.random::<f64>() - 0.5);
            let c: Vec<f64> = fit
                .coefficients()
                .iter()
                .map(|c| c + scale * (r.random::<f64>() - 0.5))
                .collect();
            worst = worst.min(objective(&k, data.y(), f0, &c, lambda) - best);
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst >= 0.0 && elapsed < Duration::from_secs(30),
        format!("min margin {worst:.3e}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn smoother_identities() -> Outcome {
    let (mut fitted, mut sym, mut ones) = (0f64, 0f64, 0f64);
    let cases = [(1, 25, 1, 2, 1e-3), (2, 40, 2, 3, 1e-5), (3, 60, 3, 3, 1e-2), (4, 30, 3, 2, 1e-7)];
    for (seed, n, d, m, lambda) in cases {
        let data = random_dataset(seed, n, d);
        let spec = ModelSpec::all_up_to(d, d.min(2)).with_order(m);
        let fit = fit_at_lambda(&spec, &data, lambda).unwrap();
        let a = to_rows(&smoother_matrix(&spec, &data, lambda).unwrap());
        for (p, q) in matvec(&a, data.y()).iter().zip(fit.fitted_values()) {
            fitted = fitted.max((p - q).abs());
        }
        for i in 0..n {
            ones = ones.max((a[i].iter().sum::<f64>() - 1.0).abs());
            for j in 0..n {
                sym = sym.max((a[i][j] - a[j][i]).abs());
            }
        }
    }
    Outcome::new(
        fitted <= 1e-8 && sym <= 1e-10 && ones <= 1e-10,
        format!("|fitted - Ay| {fitted:.1e}, asymmetry {sym:.1e}, |A1 - 1| {ones:.1e}"),
    )
}

fn spectral_identities() -> Outcome {
    let (mut ortho, mut trace, mut mercer) = (0f64, 0f64, 0f64);
    for (n, seed) in [(10, 1), (50, 2), (150, 3)] {
        let data = random_dataset(seed, n, 3);
        let spec = ModelSpec::all_up_to(3, 3);
        let system = PenaltySystem::from_dataset(&spec, &data).unwrap();
        for e in spec.penalized_effects() {
            let eig = EffectEigensystem::from_system(&system, e).unwrap();
            let psi = eig.psi();
            for a in 0..eig.rank() {
                for b in 0..eig.rank() {
                    let ip: f64 = (0..n).map(|i| psi[(i, a)] * psi[(i, b)]).sum::<f64>() / n as f64;
                    ortho = ortho.max((ip - if a == b { 1.0 } else { 0.0 }).abs());
                }
            }
            let k = gram_matrix(&EffectKernel::new(e.clone(), 3).unwrap(), data.x().as_ref()).unwrap();
            let tr: f64 = (0..n).map(|i| k[(i, i)]).sum::<f64>() / n as f64;
            trace = trace.max((eig.eigenvalues().iter().sum::<f64>() - tr).abs());
            let mu = eig.eigenvalues();
            for i in 0..n {
                for j in 0..n {
                    let rec: f64 = (0..n).map(|v| mu[v] * psi[(i, v)] * psi[(j, v)]).sum::<f64>() / n as f64;
                    mercer = mercer.max((rec - k[(i, j)] / n as f64).abs());
                }
            }
        }
    }
    Outcome::new(
        ortho <= 1e-8 && trace <= 1e-10 && mercer <= 1e-8,
        format!("orthonormality {ortho:.1e}, trace {trace:.1e}, Mercer {mercer:.1e}"),
    )
}

fn product_integral(k: &UnivariateKernel, s: &Effect, t: &Effect, a: &[f64], b: &[f64]) -> f64 {
    (0..3)
        .map(|j| match (s.indices().contains(&j), t.indices().contains(&j)) {
            (true, true) => simpson_split(|x| k.eval(a[j], x).unwrap() * k.eval(b[j], x).unwrap(), &[a[j], b[j]], 400),
            (true, false) => simpson_split(|x| k.eval(a[j], x).unwrap(), &[a[j]], 400),
            (false, true) => simpson_split(|x| k.eval(b[j], x).unwrap(), &[b[j]], 400),
            (false, false) => 1.0,
        })
        .product()
}

fn orthogonality() -> Outcome {
    let k = UnivariateKernel::new(3).unwrap();
    let effects: Vec<Effect> = Effect::all_up_to(3, 3).into_iter().skip(1).collect();
    let mut r = rng(4);
    let mut worst = 0f64;
    for _ in 0..50 {
        let s = &effects[r.random_range(0..effects.len())];
        let t = loop {
            let t = &effects[r.random_range(0..effects.len())];
            if t != s {
                break t;
            }
        };
        let a: Vec<f64> = (0..3).map(|_| r.random()).collect();
        let b: Vec<f64> = (0..3).map(|_| r.random()).collect();
        worst = worst.max(product_integral(&k, s, t, &a, &b).abs());
    }
    Outcome::new(worst <= 1e-6, format!("max |integral| {worst:.1e} over 50 pairs"))
}

fn ci_study(n: usize, replicates: usize, interval: Vec<Effect>) -> CiStudyResult {
    run_ci_study(&CiStudyConfig {
        sample_sizes: vec![n],
        grid_resolution: DEFAULT_GRID_RESOLUTION,
        interval_effects: Some(interval),
        settings: settings(replicates),
    })
    .unwrap()
}

fn summary<'a>(study: &'a CiStudyResult, e: &Effect) -> &'a ssanova::simulation::CiSummary {
    study.summaries.iter().find(|s| &s.effect == e).unwrap()
}

fn coverage(study: &CiStudyResult) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for e in main_effects() {
        let s = summary(study, &e);
        let c = s.ssaec_coverage.unwrap();
        pass &= (0.88..=0.99).contains(&c);
        parts.push(format!("{e}: {c:.3}"));
    }
    Outcome::new(pass, format!("ssaec coverage {}", parts.join(", ")))
}

fn interval_ordering() -> Outcome {
    let study = ci_study(500, DEFAULT_REPLICATES, interactions());
    let mut pass = true;
    let mut parts = Vec::new();
    for e in interactions() {
        let s = summary(&study, &e);
        let (f, b) = (s.ssaec_length.unwrap(), s.ssaebc_length.unwrap());
        pass &= f < b;
        parts.push(format!("{e}: {f:.4} vs {b:.4}"));
    }
    Outcome::new(pass, format!("mean half-width ssaec vs ssaebc {}", parts.join(", ")))
}

fn size() -> Outcome {
    let study = run_test_study(&TestStudyConfig {
        sample_sizes: vec![500],
        rho: vec![0.0],
        targets: penalized(),
        settings: settings(DEFAULT_REPLICATES),
    })
    .unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for s in &study.summaries {
        pass &= (0.02..=0.10).contains(&s.rejection_rate);
        parts.push(format!("{}: {:.3}", s.target, s.rejection_rate));
    }
    Outcome::new(pass, format!("rejection rate {}", parts.join(", ")))
}

fn power() -> Outcome {
    let rho = [0.3, 0.4, 0.5];
    let study = run_test_study(&TestStudyConfig {
        sample_sizes: vec![750],
        rho: rho.to_vec(),
        targets: penalized(),
        settings: settings(DEFAULT_REPLICATES),
    })
    .unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for t in penalized() {
        let rows: Vec<_> = rho.iter().map(|&r| study.summary(750, &t, r).unwrap()).collect();
        for w in rows.windows(2) {
            let slack = 2.0 * (w[0].standard_error.powi(2) + w[1].standard_error.powi(2)).sqrt();
            pass &= w[1].rejection_rate >= w[0].rejection_rate - slack;
        }
        let rates: Vec<String> = rows.iter().map(|s| format!("{:.3}", s.rejection_rate)).collect();
        parts.push(format!("{t}: {}", rates.join("/")));
    }
    Outcome::new(pass, format!("power at rho 0.3/0.4/0.5 {}", parts.join(", ")))
}

fn rmise(large: &CiStudyResult) -> Outcome {
    let small = ci_study(250, 50, Vec::new());
    let med = |study: &CiStudyResult, e: &Effect| summary(study, e).median_rmise;
    let mut decreasing = true;
    let mut parts = Vec::new();
    for e in benchmark_effects() {
        let (a, b) = (med(&small, &e), med(large, &e));
        decreasing &= b < a;
        parts.push(format!("{e}: {a:.4} -> {b:.4}"));
    }
    let intercept = med(large, &Effect::intercept());
    let mains: Vec<f64> = main_effects().iter().map(|e| med(large, e)).collect();
    let inters: Vec<f64> = interactions().iter().map(|e| med(large, e)).collect();
    let max_main = mains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min_main = mains.iter().copied().fold(f64::INFINITY, f64::min);
    let min_inter = inters.iter().copied().fold(f64::INFINITY, f64::min);
    let ordered = intercept < min_main && max_main < min_inter;
    Outcome::new(
        decreasing && ordered,
        format!(
            "median RMISE n=250 -> n=1000 {}; decreasing {decreasing}; ordering at n=1000 {ordered} \
             (intercept {intercept:.4}, main max {max_main:.4}, interaction min {min_inter:.4})",
            parts.join(", ")
        ),
    )
}

fn variance(study: &CiStudyResult) -> Outcome {
    let s2 = &study.sigma2[&1000];
    let inside = s2.iter().filter(|v| (0.8..=1.2).contains(*v)).count();
    let frac = inside as f64 / s2.len() as f64;
    Outcome::new(frac >= 0.95, format!("{inside}/{} replicates in [0.8, 1.2]", s2.len()))
}

fn cli(args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_ssanova"))
        .args(args)
        .env_remove("SSANOVA_SEED")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out.stdout
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("synthetic.csv");
    let data = data.to_str().unwrap();
    cli(&["generate", "--n", "300", "--seed", "11", "--out", data]);
    let model = ["--input", data, "--response", "y", "--covariates", "x1,x2,x3"];
    let runs: [Vec<&str>; 3] = [
        [&["fit"][..], &model[..]].concat(),
        [&["test"][..], &model[..], &["--group", "1;2"][..]].concat(),
        [&["ci"][..], &model[..], &["--ci-effects", "0;1;1,2", "--grid", "10"][..]].concat(),
    ];
    let mut identical = true;
    for args in &runs {
        let a = cli(args);
        let b = cli(args);
        identical &= !a.is_empty() && a == b;
    }
    Outcome::new(
        identical,
        "fit/test/ci on a seeded synthetic CSV re-run bit-identically; \
         real-data tables and external-package comparisons are excluded",
    )
}

fn main() -> ExitCode {
    let only: Option<Vec<usize>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: usize| only.as_ref().is_none_or(|o| o.contains(&k));
    let mut failed = 0;
    let mut report = |k: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        if !wanted(k) {
            return;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "criterion {k:>2} {name:<22} {verdict}  {} [{:.1} s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    };
    report(1, "optimality", &mut optimality);
    report(2, "smoother identities", &mut smoother_identities);
    report(3, "spectral identities", &mut spectral_identities);
    report(4, "orthogonality", &mut orthogonality);
    let large = if [5, 9, 10].iter().any(|&k| wanted(k)) {
        let start = Instant::now();
        let study = ci_study(1000, DEFAULT_REPLICATES, main_effects());
        println!(
            "shared interval study for criteria 5, 9, 10: n=1000, {DEFAULT_REPLICATES} replicates [{:.1} s]",
            start.elapsed().as_secs_f64()
        );
        Some(study)
    } else {
        None
    };
    if let Some(study) = &large {
        report(5, "coverage", &mut || coverage(study));
    }
    report(6, "interval ordering", &mut interval_ordering);
    report(7, "size", &mut size);
    report(8, "power", &mut power);
    if let Some(study) = &large {
        report(9, "RMISE", &mut || rmise(study));
        report(10, "variance estimate", &mut || variance(study));
    }
    report(11, "CLI end-to-end", &mut end_to_end);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
