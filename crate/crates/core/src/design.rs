//! Data ingestion, scaling to the unit cube, and model-structure validation.

use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::effect::Effect;
use crate::error::{Error, Result};
use crate::kernels::{DEFAULT_ORDER, MAX_ORDER, MIN_ORDER};

pub const DEFAULT_GCV_GAMMA: f64 = 1.4;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_GRID_POINTS: usize = 40;
pub const DEFAULT_GRID_LOW: f64 = 1e-8;
pub const DEFAULT_GRID_HIGH: f64 = 1e2;

/// Kolmogorov-Smirnov distance from uniform above which a warning is raised.
pub const UNIFORMITY_WARN_DISTANCE: f64 = 0.2;

/// How the smoothing parameter is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaPolicy {
    Fixed { lambda: f64 },
    /// GCV over `grid`, or over [`default_lambda_grid`] when absent.
    Gcv { grid: Option<Vec<f64>> },
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Gcv { grid: None }
    }
}

/// 40 log-spaced values spanning `[1e-8, 1e2] * n^(-2m/(2m+1))`.
pub fn default_lambda_grid(n: usize, order: usize) -> Vec<f64> {
    let anchor = (n as f64).powf(-(2.0 * order as f64) / (2.0 * order as f64 + 1.0));
    log_grid(DEFAULT_GRID_LOW * anchor, DEFAULT_GRID_HIGH * anchor, DEFAULT_GRID_POINTS)
}

/// `count` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Model structure: order, effect collection and tuning policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub d: usize,
    pub order: usize,
    pub effects: Vec<Effect>,
    pub lambda_policy: LambdaPolicy,
    pub gcv_gamma: f64,
    pub alpha: f64,
}

impl ModelSpec {
    /// Spec with default order, GCV tuning, gamma and alpha. The intercept
    /// is added if `effects` lacks it.
    pub fn new(d: usize, effects: Vec<Effect>) -> Self {
        let mut effects = effects;
        if !effects.iter().any(Effect::is_intercept) {
            effects.insert(0, Effect::intercept());
        }
        ModelSpec {
            d,
            order: DEFAULT_ORDER,
            effects,
            lambda_policy: LambdaPolicy::default(),
            gcv_gamma: DEFAULT_GCV_GAMMA,
            alpha: DEFAULT_ALPHA,
        }
    }

    /// Intercept, all main effects and all interactions up to `max_order`.
    pub fn all_up_to(d: usize, max_order: usize) -> Self {
        ModelSpec::new(d, Effect::all_up_to(d, max_order))
    }

    pub fn with_order(mut self, order: usize) -> Self {
        self.order = order;
        self
    }

    pub fn with_lambda(mut self, policy: LambdaPolicy) -> Self {
        self.lambda_policy = policy;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gcv_gamma = gamma;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    /// Non-intercept effects, in spec order.
    pub fn penalized_effects(&self) -> impl Iterator<Item = &Effect> {
        self.effects.iter().filter(|e| !e.is_intercept())
    }

    pub fn contains(&self, effect: &Effect) -> bool {
        self.effects.contains(effect)
    }

    /// Checks the structure and returns it with effects sorted by
    /// `(|S|, lexicographic)`. Idempotent.
    pub fn validate(&self) -> Result<ModelSpec> {
        if self.d == 0 {
            return Err(Error::Spec("model needs at least one covariate".into()));
        }
        if !(MIN_ORDER..=MAX_ORDER).contains(&self.order) {
            return Err(Error::Spec(format!(
                "order m = {} outside supported range {MIN_ORDER}..={MAX_ORDER}",
                self.order
            )));
        }
        if !self.effects.iter().any(Effect::is_intercept) {
            return Err(Error::Spec("effect collection must contain the intercept {}".into()));
        }
        for e in &self.effects {
            if let Some(&j) = e.indices().iter().find(|&&j| j >= self.d) {
                return Err(Error::Spec(format!(
                    "effect {e} references covariate {} but d = {}",
                    j + 1,
                    self.d
                )));
            }
        }
        let mut effects = self.effects.clone();
        effects.sort();
        if let Some(w) = effects.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::Spec(format!("effect {} listed twice", w[0])));
        }
        if !(self.gcv_gamma > 1.0) || !self.gcv_gamma.is_finite() {
            return Err(Error::Spec(format!("GCV gamma must exceed 1, got {}", self.gcv_gamma)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Spec(format!("alpha must lie in (0,1), got {}", self.alpha)));
        }
        match &self.lambda_policy {
            LambdaPolicy::Fixed { lambda } => {
                if !(*lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::Spec(format!("fixed lambda must be positive, got {lambda}")));
                }
            }
            LambdaPolicy::Gcv { grid: Some(grid) } => check_grid(grid)?,
            LambdaPolicy::Gcv { grid: None } => {}
        }
        Ok(ModelSpec {
            effects,
            ..self.clone()
        })
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Spec("lambda grid is empty".into()));
    }
    if grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(Error::Spec("lambda grid values must be positive and finite".into()));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Spec("lambda grid must be strictly ascending".into()));
    }
    Ok(())
}

/// Validates `spec` against the data's dimension and returns it normalized.
pub fn validate_spec(spec: &ModelSpec, data: &Dataset) -> Result<ModelSpec> {
    if spec.d != data.d() {
        return Err(Error::Spec(format!(
            "spec declares d = {} but data has {} covariates",
            spec.d,
            data.d()
        )));
    }
    spec.validate()
}

/// Min-max map of one raw covariate column onto `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnScale {
    pub min: f64,
    pub max: f64,
}

impl ColumnScale {
    pub fn identity() -> Self {
        ColumnScale { min: 0.0, max: 1.0 }
    }

    pub fn scale(&self, raw: f64) -> f64 {
        ((raw - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }

    pub fn unscale(&self, unit: f64) -> f64 {
        self.min + unit * (self.max - self.min)
    }
}

/// Covariates scaled to `[0,1]^d` plus the response.
#[derive(Debug, Clone)]
pub struct Dataset {
    x: Mat<f64>,
    y: Vec<f64>,
    covariate_names: Vec<String>,
    response_name: String,
    scaling: Vec<ColumnScale>,
    warnings: Vec<String>,
}

impl Dataset {
    /// Covariates already on the unit cube; the scaling record is the identity.
    pub fn from_unit(x: Mat<f64>, y: Vec<f64>) -> Result<Self> {
        let names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let scaling = vec![ColumnScale::identity(); x.ncols()];
        Self::assemble(x, y, names, "y".into(), scaling)
    }

    /// Raw covariate columns, min-max scaled onto `[0,1]`.
    pub fn from_raw(
        covariate_names: Vec<String>,
        columns: Vec<Vec<f64>>,
        response_name: String,
        y: Vec<f64>,
    ) -> Result<Self> {
        let n = y.len();
        if columns.len() != covariate_names.len() {
            return Err(Error::Schema("one name per covariate column is required".into()));
        }
        let mut scaling = Vec::with_capacity(columns.len());
        for (name, col) in covariate_names.iter().zip(&columns) {
            if col.len() != n {
                return Err(Error::Schema(format!("covariate `{name}` has {} values, expected {n}", col.len())));
            }
            if let Some(v) = col.iter().find(|v| !v.is_finite()) {
                return Err(Error::Data(format!("covariate `{name}` holds non-finite value {v}")));
            }
            let min = col.iter().copied().fold(f64::INFINITY, f64::min);
            let max = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if n >= 2 && max <= min {
                return Err(Error::DegenerateData(format!("covariate `{name}` is constant")));
            }
            scaling.push(ColumnScale { min, max });
        }
        let x = Mat::from_fn(n, columns.len(), |i, j| scaling[j].scale(columns[j][i]));
        Self::assemble(x, y, covariate_names, response_name, scaling)
    }

    fn assemble(
        x: Mat<f64>,
        y: Vec<f64>,
        covariate_names: Vec<String>,
        response_name: String,
        scaling: Vec<ColumnScale>,
    ) -> Result<Self> {
        let n = y.len();
        if x.nrows() != n {
            return Err(Error::Schema(format!("{} covariate rows but {n} responses", x.nrows())));
        }
        if n < 2 {
            return Err(Error::DegenerateData(format!("need at least 2 observations, got {n}")));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response holds non-finite value {v}")));
        }
        for j in 0..x.ncols() {
            for i in 0..n {
                let v = x[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Data(format!("covariate {} row {} is not finite", j + 1, i + 1)));
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Argument(format!(
                        "covariate {} row {} = {v} outside [0,1]",
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let mut warnings = Vec::new();
        for j in 0..x.ncols() {
            let col: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
            let dist = ks_distance_from_uniform(&col);
            if dist > UNIFORMITY_WARN_DISTANCE {
                warnings.push(format!(
                    "covariate `{}` departs from uniform after scaling (KS distance {dist:.3})",
                    covariate_names[j]
                ));
            }
        }
        Ok(Dataset {
            x,
            y,
            covariate_names,
            response_name,
            scaling,
            warnings,
        })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &Mat<f64> {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn response_name(&self) -> &str {
        &self.response_name
    }

    pub fn scaling(&self) -> &[ColumnScale] {
        &self.scaling
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Same covariates with a different response.
    pub fn with_response(&self, y: Vec<f64>) -> Result<Dataset> {
        if y.len() != self.n() {
            return Err(Error::Schema(format!("response has {} values, expected {}", y.len(), self.n())));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response holds non-finite value {v}")));
        }
        Ok(Dataset { y, ..self.clone() })
    }
}

/// Kolmogorov-Smirnov distance between the empirical CDF of `values` and U(0,1).
pub fn ks_distance_from_uniform(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| ((i as f64 + 1.0) / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Reads a comma-separated file with a header row.
///
/// Covariates are min-max scaled; rows with an empty cell are rejected.
pub fn load_csv(path: impl AsRef<Path>, response: &str, covariates: &[String]) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let locate = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` not found in {}", path.display())))
    };
    let response_idx = locate(response)?;
    let covariate_idx = covariates.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
    if covariates.is_empty() {
        return Err(Error::Schema("at least one covariate column is required".into()));
    }

    let mut y = Vec::new();
    let mut columns = vec![Vec::new(); covariates.len()];
    for (k, record) in reader.records().enumerate() {
        let record = record?;
        let row = k + 1;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            if raw.is_empty() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: "missing value".into(),
                });
            }
            let v: f64 = raw.parse().map_err(|_| Error::Parse {
                row,
                column: name.to_string(),
                message: format!("`{raw}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: name.to_string(),
                    message: format!("`{raw}` is not finite"),
                });
            }
            Ok(v)
        };
        y.push(cell(response_idx, response)?);
        for (c, (&idx, name)) in covariate_idx.iter().zip(covariates).enumerate() {
            columns[c].push(cell(idx, name)?);
        }
    }
    if y.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "need at least 2 data rows, {} has {}",
            path.display(),
            y.len()
        )));
    }
    Dataset::from_raw(covariates.to_vec(), columns, response.to_string(), y)
}
