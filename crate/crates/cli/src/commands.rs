use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context};
use faer::Mat;
use rayon::prelude::*;
use serde::Serialize;
use ssanova::design::{default_lambda_grid, load_csv, ColumnScale};
use ssanova::effect::parse_effect_list;
use ssanova::inference::{
    bayesian_ci, effect_sq_norm, intercept_ci, pointwise_ci, wald_test_group, EffectNorm, IntervalBand,
    IntervalMethod, TestReport,
};
use ssanova::quadrature::uniform_grid;
use ssanova::simulation::{
    generate_replicate, run_ci_study, run_test_study, write_records, CiStudyConfig, CiSummary, StudySettings,
    TestStudyConfig, TestSummary, TrueModel,
};
use ssanova::solver::{FittedModel, GcvTrace, SolveMethod};
use ssanova::spectral::EffectEigensystem;
use ssanova::{Dataset, Effect, LambdaPolicy, ModelSpec, PenaltySystem};

use crate::config::{parse_selection, Command, MethodChoice, RunConfig, Study, SCHEMA_VERSION};
use crate::output::{emit_json, write_atomic};

/// Loads the data and resolves the spec, filling the default lambda grid
/// into `config` so the report records what was used.
fn prepare(config: &mut RunConfig) -> anyhow::Result<(Dataset, ModelSpec)> {
    let input = config.input.clone().context("missing --input")?;
    let response = config.response.clone().context("missing --response")?;
    let data = load_csv(&input, &response, &config.covariates)?;
    if let Some(LambdaPolicy::Gcv { grid: None }) = &config.lambda {
        config.lambda = Some(LambdaPolicy::Gcv {
            grid: Some(default_lambda_grid(data.n(), config.order)),
        });
    }
    let spec = ModelSpec::new(data.d(), config.effect_list()?)
        .with_order(config.order)
        .with_gamma(config.gamma)
        .with_alpha(config.alpha.unwrap_or(ssanova::design::DEFAULT_ALPHA))
        .with_lambda(config.lambda.clone().unwrap_or_default());
    let spec = ssanova::design::validate_spec(&spec, &data)?;
    Ok((data, spec))
}

fn fit_spec(spec: &ModelSpec, data: &Dataset) -> anyhow::Result<(Arc<PenaltySystem>, FittedModel, Option<GcvTrace>)> {
    let system = Arc::new(PenaltySystem::from_dataset(spec, data)?);
    let (lambda, trace) = system.select_lambda(data.y())?;
    let fit = system.fit(data.y(), lambda)?;
    Ok((system, fit, trace))
}

#[derive(Debug, Serialize)]
pub struct DataSummary {
    pub n: usize,
    pub d: usize,
    pub response: String,
    pub covariates: Vec<String>,
    pub scaling: Vec<ColumnScale>,
    pub warnings: Vec<String>,
}

fn data_summary(data: &Dataset) -> DataSummary {
    DataSummary {
        n: data.n(),
        d: data.d(),
        response: data.response_name().to_string(),
        covariates: data.covariate_names().to_vec(),
        scaling: data.scaling().to_vec(),
        warnings: data.warnings().to_vec(),
    }
}

#[derive(Debug, Serialize)]
pub struct FitSummary {
    pub lambda: f64,
    pub intercept: f64,
    pub sigma2: f64,
    pub smoother_trace: f64,
    pub solve_method: SolveMethod,
    pub gcv: Option<GcvTrace>,
}

fn fit_summary(fit: &FittedModel, gcv: Option<GcvTrace>) -> anyhow::Result<FitSummary> {
    Ok(FitSummary {
        lambda: fit.lambda(),
        intercept: fit.intercept(),
        sigma2: fit.sigma2_hat()?,
        smoother_trace: fit.smoother_trace(),
        solve_method: fit.method(),
        gcv,
    })
}

#[derive(Debug, Serialize)]
pub struct EffectCurve {
    pub effect: Effect,
    pub covariates: Vec<String>,
    /// Evaluation points in the original covariate units.
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub data: DataSummary,
    pub fit: FitSummary,
    pub effect_norms: Vec<EffectNorm>,
    pub curves: Vec<EffectCurve>,
}

/// Uniform grid over the effect's unit cube, last axis fastest.
fn unit_grid(effect: &Effect, k: usize) -> Mat<f64> {
    let axis = uniform_grid(k);
    let dim = effect.order();
    let count = k.pow(dim as u32);
    Mat::from_fn(count, dim, |i, j| axis[(i / k.pow((dim - 1 - j) as u32)) % k])
}

fn raw_points(effect: &Effect, unit: &Mat<f64>, data: &Dataset) -> Vec<Vec<f64>> {
    (0..unit.nrows())
        .map(|i| {
            effect
                .indices()
                .iter()
                .enumerate()
                .map(|(k, &col)| data.scaling()[col].unscale(unit[(i, k)]))
                .collect()
        })
        .collect()
}

fn names(effect: &Effect, data: &Dataset) -> Vec<String> {
    effect.indices().iter().map(|&j| data.covariate_names()[j].clone()).collect()
}

fn check_grid_points(k: usize) -> anyhow::Result<()> {
    if k < 2 {
        bail!(ssanova::Error::Argument(format!("--grid must be at least 2, got {k}")));
    }
    Ok(())
}

pub fn cmd_fit(mut config: RunConfig) -> anyhow::Result<()> {
    let k = config.grid.unwrap_or(crate::config::DEFAULT_CURVE_POINTS);
    check_grid_points(k)?;
    let (data, spec) = prepare(&mut config)?;
    let (_, fit, gcv) = fit_spec(&spec, &data)?;
    let effects: Vec<Effect> = spec.penalized_effects().cloned().collect();
    let effect_norms = effects
        .par_iter()
        .map(|e| effect_sq_norm(&fit, e))
        .collect::<Result<Vec<_>, _>>()?;
    let curves = effects
        .par_iter()
        .map(|e| -> anyhow::Result<EffectCurve> {
            let unit = unit_grid(e, k);
            Ok(EffectCurve {
                effect: e.clone(),
                covariates: names(e, &data),
                points: raw_points(e, &unit, &data),
                values: fit.eval_effect(e, unit.as_ref())?,
            })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let report = FitReport {
        schema_version: SCHEMA_VERSION.into(),
        data: data_summary(&data),
        fit: fit_summary(&fit, gcv)?,
        effect_norms,
        curves,
        config,
    };
    emit_json(report.config.out.as_deref(), &report)
}

#[derive(Debug, Serialize)]
pub struct TestRecord {
    /// Tested effects in CLI syntax.
    pub label: String,
    pub kind: &'static str,
    #[serde(flatten)]
    pub report: TestReport,
}

#[derive(Debug, Serialize)]
pub struct RefitReport {
    pub effects: String,
    pub fit: FitSummary,
    pub tests: Vec<TestRecord>,
}

#[derive(Debug, Serialize)]
pub struct TestCommandReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub data: DataSummary,
    pub fit: FitSummary,
    pub tests: Vec<TestRecord>,
    pub refit: Option<RefitReport>,
}

fn label(effects: &[Effect]) -> String {
    ssanova::effect::format_effect_list(effects)
}

fn run_tests(
    system: &PenaltySystem,
    fit: &FittedModel,
    spec: &ModelSpec,
    groups: &[Vec<Effect>],
    alpha: f64,
) -> anyhow::Result<Vec<TestRecord>> {
    let effects: Vec<Effect> = spec.penalized_effects().cloned().collect();
    let eigs = effects
        .par_iter()
        .map(|e| EffectEigensystem::from_system(system, e))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for eig in &eigs {
        out.push(TestRecord {
            label: label(std::slice::from_ref(eig.effect())),
            kind: "single",
            report: wald_test_group(fit, &[eig], alpha)?,
        });
    }
    for group in groups {
        let members: Vec<&EffectEigensystem> = group
            .iter()
            .map(|g| {
                eigs.iter()
                    .find(|e| e.effect() == g)
                    .ok_or_else(|| ssanova::Error::Spec(format!("group member {g} is not part of the model")))
            })
            .collect::<Result<_, _>>()?;
        out.push(TestRecord {
            label: label(group),
            kind: "group",
            report: wald_test_group(fit, &members, alpha)?,
        });
    }
    Ok(out)
}

pub fn cmd_test(mut config: RunConfig) -> anyhow::Result<()> {
    let (data, spec) = prepare(&mut config)?;
    let alpha = spec.alpha;
    let (system, fit, gcv) = fit_spec(&spec, &data)?;
    let all: Vec<Effect> = spec.penalized_effects().cloned().collect();
    let mut groups: Vec<Vec<Effect>> = Vec::new();
    for g in &config.groups {
        let members: Vec<Effect> = parse_effect_list(g)?.into_iter().filter(|e| !e.is_intercept()).collect();
        if members.is_empty() {
            bail!(ssanova::Error::Argument(format!("group `{g}` names no effects")));
        }
        groups.push(members);
    }
    if all.len() > 1 && !groups.contains(&all) {
        groups.push(all.clone());
    }
    let tests = run_tests(&system, &fit, &spec, &groups, alpha)?;
    let refit = if config.refit {
        let keep: Vec<Effect> = tests
            .iter()
            .filter(|t| t.kind == "single" && t.report.reject)
            .flat_map(|t| t.report.effects.clone())
            .collect();
        let mut effects = vec![Effect::intercept()];
        effects.extend(keep.iter().cloned());
        let reduced = ModelSpec::new(data.d(), effects)
            .with_order(spec.order)
            .with_gamma(spec.gcv_gamma)
            .with_alpha(alpha)
            .with_lambda(spec.lambda_policy.clone());
        let (rsys, rfit, rgcv) = fit_spec(&reduced, &data)?;
        let rtests = if keep.is_empty() {
            Vec::new()
        } else {
            run_tests(&rsys, &rfit, &reduced, &[], alpha)?
        };
        Some(RefitReport {
            effects: label(&keep),
            fit: fit_summary(&rfit, rgcv)?,
            tests: rtests,
        })
    } else {
        None
    };
    let report = TestCommandReport {
        schema_version: SCHEMA_VERSION.into(),
        data: data_summary(&data),
        fit: fit_summary(&fit, gcv)?,
        tests,
        refit,
        config,
    };
    if report.config.out.is_some() {
        print_test_table(&report.tests);
    }
    emit_json(report.config.out.as_deref(), &report)
}

fn print_test_table(tests: &[TestRecord]) {
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:>10} {:>12} {:>7}", "effects", "T", "p-value", "reject");
    for t in tests {
        let _ = writeln!(
            s,
            "{:<16} {:>10.3} {:>12.4e} {:>7}",
            t.label, t.report.statistic, t.report.p_value, t.report.reject
        );
    }
    print!("{s}");
}

#[derive(Debug, Serialize)]
pub struct BandRecord {
    pub covariates: Vec<String>,
    /// Points in the original covariate units.
    pub raw_points: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(flatten)]
    pub band: IntervalBand,
}

#[derive(Debug, Serialize)]
pub struct CiCommandReport {
    pub schema_version: String,
    pub config: RunConfig,
    pub data: DataSummary,
    pub fit: FitSummary,
    pub bands: Vec<BandRecord>,
}

pub fn cmd_ci(mut config: RunConfig) -> anyhow::Result<()> {
    let k = config.grid.unwrap_or(crate::config::DEFAULT_CURVE_POINTS);
    check_grid_points(k)?;
    let (data, spec) = prepare(&mut config)?;
    let alpha = spec.alpha;
    let (system, fit, gcv) = fit_spec(&spec, &data)?;
    let selected: Vec<Effect> = match &config.ci_effects {
        Some(s) => parse_selection(s)?,
        None => spec.effects.clone(),
    };
    for e in &selected {
        if !spec.contains(e) {
            bail!(ssanova::Error::Spec(format!("effect {e} is not part of the model")));
        }
    }
    let methods: Vec<IntervalMethod> = match config.method.unwrap_or(MethodChoice::Both) {
        MethodChoice::Frequentist => vec![IntervalMethod::Frequentist],
        MethodChoice::Bayesian => vec![IntervalMethod::Bayesian],
        MethodChoice::Both => vec![IntervalMethod::Frequentist, IntervalMethod::Bayesian],
    };
    let bands: Vec<Vec<BandRecord>> = selected
        .par_iter()
        .map(|e| -> anyhow::Result<Vec<BandRecord>> {
            let unit = unit_grid(e, k);
            let raw = raw_points(e, &unit, &data);
            let eig = if e.is_intercept() || !methods.contains(&IntervalMethod::Frequentist) {
                None
            } else {
                Some(EffectEigensystem::from_system(&system, e)?)
            };
            methods
                .iter()
                .map(|&m| {
                    let band = match (m, e.is_intercept()) {
                        (_, true) => intercept_ci(&fit, m, alpha)?,
                        (IntervalMethod::Frequentist, false) => {
                            pointwise_ci(&fit, eig.as_ref().expect("eigensystem"), unit.as_ref(), alpha)?
                        }
                        (IntervalMethod::Bayesian, false) => bayesian_ci(&fit, e, unit.as_ref(), alpha)?,
                    };
                    Ok(BandRecord {
                        covariates: names(e, &data),
                        raw_points: if e.is_intercept() { vec![Vec::new()] } else { raw.clone() },
                        lower: band.lower(),
                        upper: band.upper(),
                        band,
                    })
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;
    let report = CiCommandReport {
        schema_version: SCHEMA_VERSION.into(),
        data: data_summary(&data),
        fit: fit_summary(&fit, gcv)?,
        bands: bands.into_iter().flatten().collect(),
        config,
    };
    emit_json(report.config.out.as_deref(), &report)
}

#[derive(Debug, Serialize)]
pub struct SimulationSummary<T: Serialize> {
    pub schema_version: String,
    pub config: RunConfig,
    pub summaries: Vec<T>,
}

fn settings(config: &RunConfig) -> StudySettings {
    StudySettings {
        seed: config.seed.unwrap_or(crate::config::DEFAULT_SEED),
        replicates: config.replicates.unwrap_or(ssanova::simulation::DEFAULT_REPLICATES),
        alpha: config.alpha.unwrap_or(ssanova::design::DEFAULT_ALPHA),
        gcv_gamma: config.gamma,
        lambda_grid: match &config.lambda {
            Some(LambdaPolicy::Gcv { grid }) => grid.clone(),
            _ => None,
        },
    }
}

fn write_study<R: Serialize, S: Serialize>(dir: &Path, records: &[R], summary: &S) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let tmp = dir.join(format!(".records.csv.{}.tmp", std::process::id()));
    write_records(&tmp, records)?;
    std::fs::rename(&tmp, dir.join("records.csv"))?;
    let json = serde_json::to_vec_pretty(summary)?;
    write_atomic(&dir.join("summary.json"), &json)?;
    Ok(())
}

pub fn cmd_simulate(config: RunConfig) -> anyhow::Result<()> {
    let dir = config.out.clone().context("missing --out")?;
    let settings = settings(&config);
    match config.study.context("missing --study")? {
        Study::Ci => {
            let cfg = CiStudyConfig {
                sample_sizes: config.sample_sizes.clone(),
                grid_resolution: config.grid.unwrap_or(ssanova::simulation::DEFAULT_GRID_RESOLUTION),
                interval_effects: config.ci_effects.as_deref().map(parse_selection).transpose()?,
                settings,
            };
            let result = run_ci_study(&cfg)?;
            print_ci_table(&result.summaries);
            let summary = SimulationSummary {
                schema_version: SCHEMA_VERSION.into(),
                config,
                summaries: result.summaries,
            };
            write_study(&dir, &result.records, &summary)
        }
        Study::Test => {
            let targets: Vec<Effect> = parse_effect_list(config.targets.as_deref().unwrap_or(""))?
                .into_iter()
                .filter(|e| !e.is_intercept())
                .collect();
            let cfg = TestStudyConfig {
                sample_sizes: config.sample_sizes.clone(),
                rho: config.rho.clone(),
                targets,
                settings,
            };
            let result = run_test_study(&cfg)?;
            print_test_study_table(&result.summaries);
            let summary = SimulationSummary {
                schema_version: SCHEMA_VERSION.into(),
                config,
                summaries: result.summaries,
            };
            write_study(&dir, &result.records, &summary)
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

fn print_ci_table(rows: &[CiSummary]) {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:<8} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9}",
        "n", "effect", "rmise", "ssaec", "ssaebc", "empir.", "cov", "cov(b)"
    );
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:<8} {:>10.4} {:>9} {:>9} {:>9} {:>9} {:>9}",
            r.n,
            r.effect.to_string(),
            r.median_rmise,
            opt(r.ssaec_length),
            opt(r.ssaebc_length),
            opt(r.empirical_length),
            opt(r.ssaec_coverage),
            opt(r.ssaebc_coverage)
        );
    }
    print!("{s}");
}

fn print_test_study_table(rows: &[TestSummary]) {
    let mut s = String::new();
    let _ = writeln!(s, "{:>6} {:<8} {:>5} {:>9} {:>8}", "n", "target", "rho", "rejects", "mc se");
    for r in rows {
        let _ = writeln!(
            s,
            "{:>6} {:<8} {:>5.2} {:>9.4} {:>8.4}",
            r.n,
            r.target.to_string(),
            r.rho,
            r.rejection_rate,
            r.standard_error
        );
    }
    print!("{s}");
}

pub fn cmd_generate(config: RunConfig) -> anyhow::Result<()> {
    let n = *config.sample_sizes.first().context("missing --n")?;
    let mut model = TrueModel::full();
    for item in &config.effect_sizes {
        let (effect, rho) = item
            .split_once('=')
            .ok_or_else(|| ssanova::Error::Argument(format!("effect size `{item}` is not EFFECT=RHO")))?;
        let effect: Effect = effect.parse()?;
        let rho: f64 = rho
            .trim()
            .parse()
            .map_err(|_| ssanova::Error::Argument(format!("bad effect size `{rho}`")))?;
        model = model.with_rho(&effect, rho)?;
    }
    let data = generate_replicate(&model, n, config.seed.unwrap_or(crate::config::DEFAULT_SEED))?;
    let mut s = String::from("x1,x2,x3,y\n");
    for i in 0..n {
        let x = data.x();
        let _ = writeln!(s, "{},{},{},{}", x[(i, 0)], x[(i, 1)], x[(i, 2)], data.y()[i]);
    }
    match &config.out {
        Some(p) => write_atomic(p, s.as_bytes()),
        None => {
            print!("{s}");
            Ok(())
        }
    }
}

pub fn dispatch(config: RunConfig) -> anyhow::Result<()> {
    match config.command {
        Command::Fit => cmd_fit(config),
        Command::Test => cmd_test(config),
        Command::Ci => cmd_ci(config),
        Command::Simulate => cmd_simulate(config),
        Command::Generate => cmd_generate(config),
    }
}
