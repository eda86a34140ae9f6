//! Monte-Carlo harness for the three-covariate benchmark model.
//!
//! Covariates are uniform on `[0,1]^3`, noise is standard normal and the
//! mean is `0.35 + sum_S rho_S g_S(x_S)` over the six main and two-way
//! effects. Replicate `r` of sample size `n` draws from
//! `ChaCha8Rng::seed_from_u64(root)` on stream `(n << 32) | r`: first the
//! `n x 3` design row by row, then the `n` noise values. Every scenario
//! sharing `(root, n, r)` therefore sees the same design and noise, which is
//! what lets one eigendecomposition serve all effect sizes and targets.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{Dataset, LambdaPolicy, ModelSpec, DEFAULT_ALPHA, DEFAULT_GCV_GAMMA};
use crate::effect::Effect;
use crate::error::{Error, Result};
use crate::inference::{bayesian_ci, intercept_ci, pointwise_ci, wald_test, IntervalMethod};
use crate::quadrature::{uniform_grid, TensorRule, GAUSS_NODES};
use crate::solver::{FittedModel, PenaltySystem};
use crate::spectral::EffectEigensystem;

pub const DIM: usize = 3;
pub const ORDER: usize = 3;
pub const TRUE_INTERCEPT: f64 = 0.35;
pub const NOISE_SD: f64 = 1.0;
pub const DEFAULT_REPLICATES: usize = 300;
pub const DEFAULT_GRID_RESOLUTION: usize = 40;

/// `{}`, `{1}`, `{2}`, `{3}`, `{1,2}`, `{1,3}`, `{2,3}`.
pub fn benchmark_effects() -> Vec<Effect> {
    Effect::all_up_to(DIM, 2)
}

fn g1(x: f64) -> f64 {
    3.063 * x * x - 2.144 * x + 0.051
}

fn g2(x: f64) -> f64 {
    4.202 * (-x).exp() - 5.883 * x * x + 8.236 * x - 4.813
}

fn g3(x: f64) -> f64 {
    0.407 * (0.667 * x * x - 1.333 * x + 0.767).ln() + 3.052 * x * x - 3.052 * x + 1.052
}

fn g12(a: f64, b: f64) -> f64 {
    -11.502 * a * a * b + 11.502 * a * b * b + 5.751 * a * a - 5.751 * b * b - 3.834 * a + 3.834 * b
}

fn g13(a: f64, c: f64) -> f64 {
    -7.484 * a * a * c + 8.315 * a * c * c - 3.881 * a * c + 3.742 * a * a - 4.158 * c * c - 0.832 * a
        + 4.435 * c
        - 0.832
}

fn g23(b: f64, c: f64) -> f64 {
    -1.353 * b * b * c * c - 6.226 * b * b * c + 8.933 * b * c * c + 1.805 * b * c + 3.564 * b * b
        - 4.015 * c * c
        - 3.880 * b
        + 1.173 * c
        + 0.752
}

/// Unscaled benchmark effect `g_S` at the effect's own coordinates `x_S`.
pub fn true_effect(effect: &Effect, x: &[f64]) -> Result<f64> {
    if x.len() != effect.order() {
        return Err(Error::Argument(format!(
            "effect {effect} takes {} coordinates, got {}",
            effect.order(),
            x.len()
        )));
    }
    Ok(match effect.indices() {
        [] => TRUE_INTERCEPT,
        [0] => g1(x[0]),
        [1] => g2(x[0]),
        [2] => g3(x[0]),
        [0, 1] => g12(x[0], x[1]),
        [0, 2] => g13(x[0], x[1]),
        [1, 2] => g23(x[0], x[1]),
        _ => return Err(Error::Spec(format!("effect {effect} is not part of the benchmark model"))),
    })
}

/// Benchmark mean function with per-effect sizes `rho_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueModel {
    /// `rho_S` for each non-intercept effect.
    pub rho: BTreeMap<Effect, f64>,
    pub sigma: f64,
}

impl Default for TrueModel {
    fn default() -> Self {
        Self::full()
    }
}

impl TrueModel {
    /// Every effect at full size.
    pub fn full() -> Self {
        TrueModel {
            rho: benchmark_effects()
                .into_iter()
                .filter(|e| !e.is_intercept())
                .map(|e| (e, 1.0))
                .collect(),
            sigma: NOISE_SD,
        }
    }

    pub fn with_rho(mut self, effect: &Effect, rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::Argument(format!("effect size {rho} must lie in [0, 1]")));
        }
        match self.rho.get_mut(effect) {
            Some(r) => *r = rho,
            None => return Err(Error::Spec(format!("effect {effect} has no size in the benchmark model"))),
        }
        Ok(self)
    }

    /// Model fitted to benchmark data: every benchmark effect, `m = 3`.
    pub fn spec() -> ModelSpec {
        ModelSpec::new(DIM, benchmark_effects()).with_order(ORDER)
    }

    /// `f_S(x_S) = rho_S g_S(x_S)`; the intercept is `0.35`.
    pub fn effect_value(&self, effect: &Effect, x_s: &[f64]) -> Result<f64> {
        let rho = if effect.is_intercept() {
            1.0
        } else {
            *self
                .rho
                .get(effect)
                .ok_or_else(|| Error::Spec(format!("effect {effect} is not part of the benchmark model")))?
        };
        Ok(rho * true_effect(effect, x_s)?)
    }

    /// `f(x)` for a full covariate row.
    pub fn mean(&self, row: &[f64]) -> f64 {
        let mut total = TRUE_INTERCEPT;
        for (effect, &rho) in &self.rho {
            if rho != 0.0 {
                total += rho * true_effect(effect, &effect.project(row)).expect("benchmark effect");
            }
        }
        total
    }
}

/// Design and noise for one replicate.
#[derive(Debug, Clone)]
pub struct Draw {
    pub x: Mat<f64>,
    pub noise: Vec<f64>,
}

impl Draw {
    pub fn sample(rng: &mut impl Rng, n: usize) -> Self {
        let mut cells = vec![0.0; n * DIM];
        for v in cells.iter_mut() {
            *v = rng.random::<f64>();
        }
        let x = Mat::from_fn(n, DIM, |i, j| cells[i * DIM + j]);
        let noise = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        Draw { x, noise }
    }

    pub fn response(&self, model: &TrueModel) -> Vec<f64> {
        (0..self.x.nrows())
            .map(|i| {
                let row: Vec<f64> = (0..DIM).map(|j| self.x[(i, j)]).collect();
                model.mean(&row) + model.sigma * self.noise[i]
            })
            .collect()
    }
}

/// Random stream of replicate `r` at sample size `n`.
pub fn replicate_rng(root: u64, n: usize, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((n as u64) << 32) | r as u64);
    rng
}

/// One dataset from the benchmark model, deterministic in `seed`.
pub fn generate_replicate(model: &TrueModel, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::Argument(format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = Draw::sample(&mut rng, n);
    let y = draw.response(model);
    Dataset::from_unit(draw.x, y)
}

/// Settings shared by both studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub seed: u64,
    pub replicates: usize,
    pub alpha: f64,
    pub gcv_gamma: f64,
    /// `None` uses the default grid for each `n`.
    pub lambda_grid: Option<Vec<f64>>,
}

impl Default for StudySettings {
    fn default() -> Self {
        StudySettings {
            seed: 1,
            replicates: DEFAULT_REPLICATES,
            alpha: DEFAULT_ALPHA,
            gcv_gamma: DEFAULT_GCV_GAMMA,
            lambda_grid: None,
        }
    }
}

impl StudySettings {
    fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::Argument("replicates must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        Self::spec_for(self).validate()?;
        Ok(())
    }

    fn spec_for(&self) -> ModelSpec {
        TrueModel::spec()
            .with_gamma(self.gcv_gamma)
            .with_alpha(self.alpha)
            .with_lambda(LambdaPolicy::Gcv {
                grid: self.lambda_grid.clone(),
            })
    }
}

fn fit_replicate(system: &Arc<PenaltySystem>, y: &[f64]) -> Result<FittedModel> {
    let (lambda, _) = system.select_lambda(y)?;
    system.fit_spectral(y, lambda)
}

/// Evaluation grid of an effect: `k` uniform points per axis, last axis fastest.
pub fn effect_grid(effect: &Effect, k: usize) -> Mat<f64> {
    let axis = uniform_grid(k);
    let dim = effect.order();
    let count = k.pow(dim as u32);
    Mat::from_fn(count, dim, |i, j| {
        let stride = k.pow((dim - 1 - j) as u32);
        axis[(i / stride) % k]
    })
}

fn quadrature_points(dim: usize) -> (Mat<f64>, Vec<f64>) {
    let rule = TensorRule::gauss(dim, GAUSS_NODES);
    let pts = Mat::from_fn(rule.points.len(), dim, |i, j| rule.points[i][j]);
    (pts, rule.weights)
}

/// `sqrt(integral (f_S - f*_S)^2)` by tensor Gauss-Legendre quadrature; the
/// absolute error for the intercept.
pub fn effect_rmise(fit: &FittedModel, model: &TrueModel, effect: &Effect) -> Result<f64> {
    if effect.is_intercept() {
        return Ok((fit.intercept() - TRUE_INTERCEPT).abs());
    }
    let (pts, weights) = quadrature_points(effect.order());
    let est = fit.eval_effect(effect, pts.as_ref())?;
    let mut ise = 0.0;
    for (i, (e, w)) in est.iter().zip(&weights).enumerate() {
        let coords: Vec<f64> = (0..pts.ncols()).map(|j| pts[(i, j)]).collect();
        ise += w * (e - model.effect_value(effect, &coords)?).powi(2);
    }
    Ok(ise.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiStudyConfig {
    pub sample_sizes: Vec<usize>,
    /// Points per axis of the evaluation grid.
    pub grid_resolution: usize,
    /// Effects receiving intervals; `None` means all benchmark effects.
    pub interval_effects: Option<Vec<Effect>>,
    pub settings: StudySettings,
}

impl Default for CiStudyConfig {
    fn default() -> Self {
        CiStudyConfig {
            sample_sizes: vec![250, 500, 1000],
            grid_resolution: DEFAULT_GRID_RESOLUTION,
            interval_effects: None,
            settings: StudySettings::default(),
        }
    }
}

/// One effect in one replicate of the interval study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiRecord {
    pub n: usize,
    pub replicate: usize,
    pub effect: Effect,
    pub lambda: f64,
    pub sigma2: f64,
    pub rmise: f64,
    /// Mean half-width over the grid, or empty when no interval was built.
    pub ssaec_length: Option<f64>,
    pub ssaebc_length: Option<f64>,
    pub ssaec_coverage: Option<f64>,
    pub ssaebc_coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiSummary {
    pub n: usize,
    pub effect: Effect,
    pub replicates: usize,
    pub median_rmise: f64,
    pub mean_rmise: f64,
    pub ssaec_length: Option<f64>,
    pub ssaebc_length: Option<f64>,
    /// Half the gap between the `alpha/2` and `1 - alpha/2` quantiles of the
    /// estimate across replicates, averaged over the grid.
    pub empirical_length: Option<f64>,
    pub ssaec_coverage: Option<f64>,
    pub ssaec_coverage_se: Option<f64>,
    pub ssaebc_coverage: Option<f64>,
    pub ssaebc_coverage_se: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CiStudyResult {
    pub config: CiStudyConfig,
    pub summaries: Vec<CiSummary>,
    pub records: Vec<CiRecord>,
    /// `sigma2_hat` per replicate, per sample size.
    pub sigma2: BTreeMap<usize, Vec<f64>>,
}

struct CiReplicate {
    records: Vec<CiRecord>,
    estimates: Vec<Vec<f64>>,
    sigma2: f64,
}

/// Type-7 empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn run_ci_study(config: &CiStudyConfig) -> Result<CiStudyResult> {
    config.settings.validate()?;
    if config.grid_resolution < 2 {
        return Err(Error::Argument("grid resolution must be at least 2".into()));
    }
    let spec = config.settings.spec_for();
    let model = TrueModel::full();
    let all = benchmark_effects();
    let interval: Vec<Effect> = match &config.interval_effects {
        Some(list) => {
            for e in list {
                if !all.contains(e) {
                    return Err(Error::Spec(format!("effect {e} is not part of the benchmark model")));
                }
            }
            all.iter().filter(|e| list.contains(e)).cloned().collect()
        }
        None => all.clone(),
    };
    let grids: Vec<Mat<f64>> = interval
        .iter()
        .map(|e| effect_grid(e, config.grid_resolution))
        .collect();
    let truths: Vec<Vec<f64>> = interval
        .iter()
        .zip(&grids)
        .map(|(e, g)| {
            (0..g.nrows())
                .map(|i| {
                    let coords: Vec<f64> = (0..g.ncols()).map(|j| g[(i, j)]).collect();
                    model.effect_value(e, &coords)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let alpha = config.settings.alpha;

    let mut summaries = Vec::new();
    let mut records = Vec::new();
    let mut sigma2 = BTreeMap::new();
    for &n in &config.sample_sizes {
        if n < 2 {
            return Err(Error::Argument(format!("need n >= 2, got {n}")));
        }
        let reps: Vec<CiReplicate> = (0..config.settings.replicates)
            .into_par_iter()
            .map(|r| -> Result<CiReplicate> {
                let draw = Draw::sample(&mut replicate_rng(config.settings.seed, n, r), n);
                let y = draw.response(&model);
                let system = Arc::new(PenaltySystem::new(&spec, &draw.x)?);
                let fit = fit_replicate(&system, &y)?;
                let s2 = fit.sigma2_hat()?;
                let mut recs = Vec::with_capacity(all.len());
                let mut estimates = Vec::with_capacity(interval.len());
                for effect in &all {
                    let mut rec = CiRecord {
                        n,
                        replicate: r,
                        effect: effect.clone(),
                        lambda: fit.lambda(),
                        sigma2: s2,
                        rmise: effect_rmise(&fit, &model, effect)?,
                        ssaec_length: None,
                        ssaebc_length: None,
                        ssaec_coverage: None,
                        ssaebc_coverage: None,
                    };
                    if let Some(k) = interval.iter().position(|e| e == effect) {
                        let (freq, bayes) = if effect.is_intercept() {
                            (
                                intercept_ci(&fit, IntervalMethod::Frequentist, alpha)?,
                                intercept_ci(&fit, IntervalMethod::Bayesian, alpha)?,
                            )
                        } else {
                            let eig = EffectEigensystem::from_system(&system, effect)?;
                            (
                                pointwise_ci(&fit, &eig, grids[k].as_ref(), alpha)?,
                                bayesian_ci(&fit, effect, grids[k].as_ref(), alpha)?,
                            )
                        };
                        let frac = |c: Vec<bool>| c.iter().filter(|&&b| b).count() as f64 / c.len() as f64;
                        rec.ssaec_length = Some(freq.mean_half_width());
                        rec.ssaebc_length = Some(bayes.mean_half_width());
                        rec.ssaec_coverage = Some(frac(freq.covers(&truths[k])));
                        rec.ssaebc_coverage = Some(frac(bayes.covers(&truths[k])));
                        estimates.push(freq.estimate);
                    }
                    recs.push(rec);
                }
                Ok(CiReplicate {
                    records: recs,
                    estimates,
                    sigma2: s2,
                })
            })
            .collect::<Result<_>>()?;

        for effect in &all {
            let of_effect: Vec<&CiRecord> = reps
                .iter()
                .flat_map(|r| r.records.iter().filter(|c| &c.effect == effect))
                .collect();
            let rmise: Vec<f64> = of_effect.iter().map(|c| c.rmise).collect();
            let collect = |f: fn(&CiRecord) -> Option<f64>| -> Option<Vec<f64>> {
                of_effect.iter().map(|c| f(c)).collect()
            };
            let lengths = collect(|c| c.ssaec_length);
            let blengths = collect(|c| c.ssaebc_length);
            let cov = collect(|c| c.ssaec_coverage).map(|v| mean_and_se(&v));
            let bcov = collect(|c| c.ssaebc_coverage).map(|v| mean_and_se(&v));
            let empirical_length = interval.iter().position(|e| e == effect).map(|k| {
                let q = reps[0].estimates[k].len();
                (0..q)
                    .map(|j| {
                        let mut vals: Vec<f64> = reps.iter().map(|r| r.estimates[k][j]).collect();
                        vals.sort_by(f64::total_cmp);
                        (quantile_sorted(&vals, 1.0 - alpha / 2.0) - quantile_sorted(&vals, alpha / 2.0)) / 2.0
                    })
                    .sum::<f64>()
                    / q as f64
            });
            summaries.push(CiSummary {
                n,
                effect: effect.clone(),
                replicates: reps.len(),
                median_rmise: median(&rmise),
                mean_rmise: rmise.iter().sum::<f64>() / rmise.len() as f64,
                ssaec_length: lengths.map(|v| mean_and_se(&v).0),
                ssaebc_length: blengths.map(|v| mean_and_se(&v).0),
                empirical_length,
                ssaec_coverage: cov.map(|c| c.0),
                ssaec_coverage_se: cov.map(|c| c.1),
                ssaebc_coverage: bcov.map(|c| c.0),
                ssaebc_coverage_se: bcov.map(|c| c.1),
            });
        }
        sigma2.insert(n, reps.iter().map(|r| r.sigma2).collect());
        records.extend(reps.into_iter().flat_map(|r| r.records));
    }
    Ok(CiStudyResult {
        config: config.clone(),
        summaries,
        records,
        sigma2,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStudyConfig {
    pub sample_sizes: Vec<usize>,
    /// Sizes of the tested effect; `0` gives the null.
    pub rho: Vec<f64>,
    /// Effects tested one at a time, the others kept at full size.
    pub targets: Vec<Effect>,
    pub settings: StudySettings,
}

impl Default for TestStudyConfig {
    fn default() -> Self {
        TestStudyConfig {
            sample_sizes: vec![500],
            rho: vec![0.0, 0.3, 0.4, 0.5],
            targets: benchmark_effects().into_iter().filter(|e| !e.is_intercept()).collect(),
            settings: StudySettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub n: usize,
    pub replicate: usize,
    pub target: Effect,
    pub rho: f64,
    pub lambda: f64,
    pub sigma2: f64,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub n: usize,
    pub target: Effect,
    pub rho: f64,
    pub replicates: usize,
    pub rejection_rate: f64,
    /// Binomial Monte-Carlo standard error of the rate.
    pub standard_error: f64,
    pub mean_statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestStudyResult {
    pub config: TestStudyConfig,
    pub summaries: Vec<TestSummary>,
    pub records: Vec<TestRecord>,
}

impl TestStudyResult {
    pub fn summary(&self, n: usize, target: &Effect, rho: f64) -> Option<&TestSummary> {
        self.summaries
            .iter()
            .find(|s| s.n == n && &s.target == target && s.rho == rho)
    }
}

pub fn run_test_study(config: &TestStudyConfig) -> Result<TestStudyResult> {
    config.settings.validate()?;
    let spec = config.settings.spec_for();
    let base = TrueModel::full();
    if config.targets.is_empty() || config.rho.is_empty() {
        return Err(Error::Argument("test study needs at least one target and one rho".into()));
    }
    let mut models = Vec::new();
    for target in &config.targets {
        if target.is_intercept() {
            return Err(Error::Spec("the intercept cannot be a test target".into()));
        }
        for &rho in &config.rho {
            models.push((target.clone(), rho, base.clone().with_rho(target, rho)?));
        }
    }
    let alpha = config.settings.alpha;
    let mut records = Vec::new();
    let mut summaries = Vec::new();
    for &n in &config.sample_sizes {
        if n < 2 {
            return Err(Error::Argument(format!("need n >= 2, got {n}")));
        }
        let reps: Vec<Vec<TestRecord>> = (0..config.settings.replicates)
            .into_par_iter()
            .map(|r| -> Result<Vec<TestRecord>> {
                let draw = Draw::sample(&mut replicate_rng(config.settings.seed, n, r), n);
                let system = Arc::new(PenaltySystem::new(&spec, &draw.x)?);
                let eigs: Vec<EffectEigensystem> = config
                    .targets
                    .iter()
                    .map(|t| EffectEigensystem::from_system(&system, t))
                    .collect::<Result<_>>()?;
                let mut out = Vec::with_capacity(models.len());
                for (target, rho, model) in &models {
                    let y = draw.response(model);
                    let fit = fit_replicate(&system, &y)?;
                    let k = config.targets.iter().position(|t| t == target).expect("target");
                    let report = wald_test(&fit, &eigs[k], alpha)?;
                    out.push(TestRecord {
                        n,
                        replicate: r,
                        target: target.clone(),
                        rho: *rho,
                        lambda: fit.lambda(),
                        sigma2: report.components.sigma2,
                        statistic: report.statistic,
                        p_value: report.p_value,
                        reject: report.reject,
                    });
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        for (target, rho, _) in &models {
            let rows: Vec<&TestRecord> = reps
                .iter()
                .flatten()
                .filter(|t| &t.target == target && t.rho == *rho)
                .collect();
            let k = rows.len() as f64;
            let rate = rows.iter().filter(|t| t.reject).count() as f64 / k;
            summaries.push(TestSummary {
                n,
                target: target.clone(),
                rho: *rho,
                replicates: rows.len(),
                rejection_rate: rate,
                standard_error: (rate * (1.0 - rate) / k).sqrt(),
                mean_statistic: rows.iter().map(|t| t.statistic).sum::<f64>() / k,
            });
        }
        records.extend(reps.into_iter().flatten());
    }
    Ok(TestStudyResult {
        config: config.clone(),
        summaries,
        records,
    })
}

/// Writes one CSV row per record.
pub fn write_records<T: Serialize>(path: impl AsRef<Path>, records: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
