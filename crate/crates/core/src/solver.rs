//! Penalized least-squares fitting.
//!
//! For a fixed `lambda` the intercept and representer coefficients solve
//!
//! ```text
//! min_{f0, c}  |y - 1 f0 - K c|^2 / n + lambda c' K c
//! ```
//!
//! with `K` the penalty Gram matrix. Writing `M = K + n lambda I`, the
//! minimizer is `f0 = 1'M^{-1}y / 1'M^{-1}1` and `c = M^{-1}(y - 1 f0)`, which
//! is the closed form with the `1'K M^{-1}` terms simplified through
//! `K M^{-1} = I - n lambda M^{-1}`.
//!
//! Two solve paths are offered: [`PenaltySystem::fit`] factors `M` with a
//! Cholesky decomposition (falling back to LBLT), and
//! [`PenaltySystem::fit_spectral`] reuses one eigendecomposition of `K` for
//! any `lambda` and response, which is what GCV and the Monte-Carlo harness
//! use.

use std::sync::{Arc, OnceLock};

use faer::linalg::solvers::{Lblt, Llt, Solve};
use faer::{Col, Mat, MatRef, Side};
use serde::{Deserialize, Serialize};

use crate::design::{check_grid, default_lambda_grid, Dataset, LambdaPolicy, ModelSpec};
use crate::effect::Effect;
use crate::error::{Error, Result};
use crate::kernels::{EffectKernel, GramSet, UnivariateKernel};

/// Eigendecomposition of the penalty Gram matrix, eigenvalues ascending and
/// clamped at zero.
#[derive(Debug)]
pub struct PenaltySpectrum {
    values: Vec<f64>,
    vectors: Mat<f64>,
    ones: Vec<f64>,
}

impl PenaltySpectrum {
    fn new(gram: &Mat<f64>) -> Result<Self> {
        let eig = gram
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("penalty eigendecomposition failed: {e:?}")))?;
        let values: Vec<f64> = (0..gram.nrows())
            .map(|i| eig.S()[i].max(0.0))
            .collect();
        let vectors = eig.U().to_owned();
        let n = gram.nrows();
        let ones = project(&vectors, &vec![1.0; n]);
        Ok(PenaltySpectrum { values, vectors, ones })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }
}

fn project(u: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let col = Col::<f64>::from_fn(v.len(), |i| v[i]);
    let out = u.transpose() * &col;
    (0..out.nrows()).map(|i| out[i]).collect()
}

fn matvec(a: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let col = Col::<f64>::from_fn(v.len(), |i| v[i]);
    let out = a * &col;
    (0..out.nrows()).map(|i| out[i]).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Design-dependent state shared by every fit on one covariate matrix:
/// the validated spec, the Gram matrices and (lazily) the penalty spectrum.
#[derive(Debug)]
pub struct PenaltySystem {
    spec: ModelSpec,
    x: Mat<f64>,
    kernel: UnivariateKernel,
    grams: GramSet,
    spectrum: OnceLock<PenaltySpectrum>,
    eigenvalues: OnceLock<Vec<f64>>,
}

impl PenaltySystem {
    pub fn new(spec: &ModelSpec, x: &Mat<f64>) -> Result<Self> {
        let spec = spec.validate()?;
        if spec.d != x.ncols() {
            return Err(Error::Spec(format!(
                "spec declares d = {} but the design has {} columns",
                spec.d,
                x.ncols()
            )));
        }
        let kernel = UnivariateKernel::new(spec.order)?;
        let effects: Vec<Effect> = spec.penalized_effects().cloned().collect();
        let grams = GramSet::build(&kernel, &effects, x.as_ref())?;
        Ok(PenaltySystem {
            spec,
            x: x.clone(),
            kernel,
            grams,
            spectrum: OnceLock::new(),
            eigenvalues: OnceLock::new(),
        })
    }

    pub fn from_dataset(spec: &ModelSpec, data: &Dataset) -> Result<Self> {
        Self::new(spec, data.x())
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn x(&self) -> &Mat<f64> {
        &self.x
    }

    pub fn kernel(&self) -> &UnivariateKernel {
        &self.kernel
    }

    pub fn grams(&self) -> &GramSet {
        &self.grams
    }

    /// Design coordinates of `effect` as an `n x |S|` matrix.
    pub fn effect_coordinates(&self, effect: &Effect) -> Mat<f64> {
        let idx = effect.indices();
        Mat::from_fn(self.n(), idx.len(), |i, k| self.x[(i, idx[k])])
    }

    pub fn effect_kernel(&self, effect: &Effect) -> Result<EffectKernel> {
        if !self.spec.contains(effect) {
            return Err(Error::Spec(format!("effect {effect} is not part of the model")));
        }
        EffectKernel::with_kernel(effect.clone(), self.kernel.clone())
    }

    /// `sum_i c_i K_S(X_iS, x)` at each row `x` of `points` (`q x |S|`).
    pub fn evaluate(&self, effect: &Effect, coefficients: &[f64], points: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if coefficients.len() != self.n() {
            return Err(Error::Argument(format!(
                "{} coefficients for {} observations",
                coefficients.len(),
                self.n()
            )));
        }
        let kernel = self.effect_kernel(effect)?;
        let coords = self.effect_coordinates(effect);
        let c = Col::<f64>::from_fn(self.n(), |i| coefficients[i]);
        let mut values = Vec::with_capacity(points.nrows());
        let mut start = 0;
        while start < points.nrows() {
            let len = EVAL_CHUNK.min(points.nrows() - start);
            let cross = kernel.cross_matrix(coords.as_ref(), points.subrows(start, len))?;
            let out = cross.transpose() * &c;
            values.extend((0..len).map(|i| out[i]));
            start += len;
        }
        Ok(values)
    }

    pub fn spectrum(&self) -> Result<&PenaltySpectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = PenaltySpectrum::new(self.grams.penalty())?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    fn penalty_eigenvalues(&self) -> Result<&[f64]> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s.values());
        }
        if let Some(v) = self.eigenvalues.get() {
            return Ok(v);
        }
        let vals = self
            .grams
            .penalty()
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| Error::Numerical(format!("penalty eigenvalues failed: {e:?}")))?;
        let vals: Vec<f64> = vals.into_iter().map(|v| v.max(0.0)).collect();
        Ok(self.eigenvalues.get_or_init(|| vals))
    }

    fn check_response(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::Schema(format!(
                "response has {} values, design has {} rows",
                y.len(),
                self.n()
            )));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("response holds non-finite value {v}")));
        }
        Ok(())
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::Numerical(format!(
                "lambda = {lambda} does not make the penalized system positive definite"
            )));
        }
        Ok(())
    }

    fn trace_from(&self, shift: f64, v: &[f64]) -> Result<f64> {
        let ridge: f64 = self.penalty_eigenvalues()?.iter().map(|&e| e / (e + shift)).sum();
        Ok(ridge + shift * dot(v, v) / v.iter().sum::<f64>())
    }

    /// Closed-form fit at `lambda`, solving with a Cholesky factorization of
    /// `K + n lambda I` (LBLT if Cholesky breaks down).
    pub fn fit(self: &Arc<Self>, y: &[f64], lambda: f64) -> Result<FittedModel> {
        self.check_response(y)?;
        Self::check_lambda(lambda)?;
        let n = self.n();
        let shift = n as f64 * lambda;
        let mut m = self.grams.penalty().clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        let factor = match m.llt(Side::Lower) {
            Ok(llt) => Factor::Cholesky(llt),
            Err(_) => Factor::Indefinite(m.lblt(Side::Lower)),
        };
        let mean = y.iter().sum::<f64>() / n as f64;
        let rhs = Mat::<f64>::from_fn(n, 2, |i, j| if j == 0 { y[i] - mean } else { 1.0 });
        let sol = factor.solve(rhs);
        if sol.col(1).iter().chain(sol.col(0).iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("penalized system solve produced non-finite values".into()));
        }
        let u: Vec<f64> = sol.col(0).iter().copied().collect();
        let v: Vec<f64> = sol.col(1).iter().copied().collect();
        let trace = self.trace_from(shift, &v)?;
        self.assemble(y, lambda, mean, &u, &v, trace, factor)
    }

    /// Same estimator as [`PenaltySystem::fit`] computed from the penalty
    /// eigendecomposition; `O(n^2)` per call once the spectrum exists.
    pub fn fit_spectral(self: &Arc<Self>, y: &[f64], lambda: f64) -> Result<FittedModel> {
        self.check_response(y)?;
        Self::check_lambda(lambda)?;
        let n = self.n();
        let shift = n as f64 * lambda;
        let spec = self.spectrum()?;
        let mean = y.iter().sum::<f64>() / n as f64;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        let yt = project(&spec.vectors, &centered);
        let scale: Vec<f64> = spec.values.iter().map(|&e| 1.0 / (e + shift)).collect();
        let ut: Vec<f64> = yt.iter().zip(&scale).map(|(a, s)| a * s).collect();
        let vt: Vec<f64> = spec.ones.iter().zip(&scale).map(|(a, s)| a * s).collect();
        let u = matvec(&spec.vectors, &ut);
        let v = matvec(&spec.vectors, &vt);
        let ridge: f64 = spec.values.iter().map(|&e| e / (e + shift)).sum();
        let trace = ridge + shift * dot(&vt, &vt) / dot(&spec.ones, &vt);
        self.assemble(y, lambda, mean, &u, &v, trace, Factor::Spectral { shift })
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        self: &Arc<Self>,
        y: &[f64],
        lambda: f64,
        mean: f64,
        u: &[f64],
        v: &[f64],
        trace: f64,
        factor: Factor,
    ) -> Result<FittedModel> {
        let n = self.n();
        let shift = n as f64 * lambda;
        let ones_v: f64 = v.iter().sum();
        // n - 1'K M^{-1} 1 = n lambda 1'M^{-1}1
        let denom = shift * ones_v;
        if !(denom > 1e-10 * n as f64) {
            return Err(Error::DegenerateFit(format!(
                "intercept denominator {denom:.3e} is not positive"
            )));
        }
        let offset = u.iter().sum::<f64>() / ones_v;
        let intercept = mean + offset;
        let coefficients: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - offset * b).collect();
        let kc = matvec(self.grams.penalty(), &coefficients);
        let fitted: Vec<f64> = kc.iter().map(|k| intercept + k).collect();
        let rss = y.iter().zip(&fitted).map(|(a, b)| (a - b).powi(2)).sum();
        Ok(FittedModel {
            system: Arc::clone(self),
            y: y.to_vec(),
            intercept,
            coefficients,
            lambda,
            fitted,
            trace,
            rss,
            ones_quadratic: ones_v,
            factor: Arc::new(factor),
        })
    }

    /// Dense smoother matrix `A(lambda)` with `A y` the fitted values.
    pub fn smoother_matrix(&self, lambda: f64) -> Result<Mat<f64>> {
        Self::check_lambda(lambda)?;
        let n = self.n();
        let shift = n as f64 * lambda;
        let mut m = self.grams.penalty().clone();
        for i in 0..n {
            m[(i, i)] += shift;
        }
        let factor = match m.llt(Side::Lower) {
            Ok(llt) => Factor::Cholesky(llt),
            Err(_) => Factor::Indefinite(m.lblt(Side::Lower)),
        };
        let minv = factor.solve(Mat::<f64>::identity(n, n));
        let v: Vec<f64> = (0..n).map(|i| (0..n).map(|j| minv[(i, j)]).sum()).collect();
        let ones_v: f64 = v.iter().sum();
        if !(shift * ones_v > 1e-10 * n as f64) {
            return Err(Error::DegenerateFit("intercept denominator is not positive".into()));
        }
        // A = I - t M^{-1} + t v v' / 1'v
        Ok(Mat::from_fn(n, n, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - shift * minv[(i, j)] + shift * v[i] * v[j] / ones_v
        }))
    }

    /// GCV score over `grid` from one eigendecomposition of the penalty Gram.
    ///
    /// Points where `tr(I - gamma A) <= 0` score `+inf` and are listed in
    /// [`GcvTrace::skipped`]. Ties go to the larger lambda.
    pub fn gcv(&self, y: &[f64], grid: &[f64], gamma: f64) -> Result<GcvTrace> {
        self.check_response(y)?;
        check_grid(grid)?;
        let n = self.n();
        let nf = n as f64;
        let spec = self.spectrum()?;
        let mean = y.iter().sum::<f64>() / nf;
        let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
        // The intercept is unpenalized, so centering y leaves (I - A) y unchanged.
        let yt = project(&spec.vectors, &centered);
        let yy = dot(&centered, &centered) / nf;

        let mut scores = Vec::with_capacity(grid.len());
        let mut traces = Vec::with_capacity(grid.len());
        let mut skipped = Vec::new();
        for (k, &lambda) in grid.iter().enumerate() {
            let t = nf * lambda;
            // g_i = 1 - h_i, w~ = g o 1~
            let g: Vec<f64> = spec.values.iter().map(|&e| t / (e + t)).collect();
            let wt: Vec<f64> = g.iter().zip(&spec.ones).map(|(a, b)| a * b).collect();
            let delta = dot(&wt, &spec.ones);
            let wy = dot(&wt, &yt);
            let rss: f64 = g
                .iter()
                .zip(&yt)
                .zip(&wt)
                .map(|((gi, yi), wi)| (gi * yi - wi * wy / delta).powi(2))
                .sum();
            let trace = g.iter().map(|gi| 1.0 - gi).sum::<f64>() + dot(&wt, &wt) / delta;
            traces.push(trace);
            let free = (nf - gamma * trace) / nf;
            if !(free > 0.0) || !(delta > 0.0) {
                scores.push(f64::INFINITY);
                skipped.push(k);
                continue;
            }
            scores.push((rss / nf) / (free * free));
        }
        let tie = 1e-20 * yy.max(f64::MIN_POSITIVE);
        let mut argmin: Option<usize> = None;
        for (k, &s) in scores.iter().enumerate() {
            if !s.is_finite() {
                continue;
            }
            match argmin {
                None => argmin = Some(k),
                Some(b) => {
                    let best = scores[b];
                    if s <= best + 1e-10 * best + tie {
                        argmin = Some(k);
                    }
                }
            }
        }
        let argmin = argmin.ok_or_else(|| {
            Error::Numerical("GCV is infinite at every grid point; widen the lambda grid".into())
        })?;
        Ok(GcvTrace {
            grid: grid.to_vec(),
            scores,
            traces,
            argmin,
            gamma,
            skipped,
        })
    }

    /// Lambda per the spec's policy; the GCV trace when one was computed.
    pub fn select_lambda(&self, y: &[f64]) -> Result<(f64, Option<GcvTrace>)> {
        match &self.spec.lambda_policy {
            LambdaPolicy::Fixed { lambda } => Ok((*lambda, None)),
            LambdaPolicy::Gcv { grid } => {
                let grid = grid
                    .clone()
                    .unwrap_or_else(|| default_lambda_grid(self.n(), self.spec.order));
                let trace = self.gcv(y, &grid, self.spec.gcv_gamma)?;
                Ok((trace.lambda(), Some(trace)))
            }
        }
    }
}

/// GCV scores over a lambda grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GcvTrace {
    pub grid: Vec<f64>,
    /// `+inf` where the point was skipped.
    pub scores: Vec<f64>,
    /// `tr A(lambda)` per grid point.
    pub traces: Vec<f64>,
    pub argmin: usize,
    pub gamma: f64,
    pub skipped: Vec<usize>,
}

impl GcvTrace {
    pub fn lambda(&self) -> f64 {
        self.grid[self.argmin]
    }

    pub fn is_interior(&self) -> bool {
        self.argmin > 0 && self.argmin + 1 < self.grid.len()
    }
}

enum Factor {
    Cholesky(Llt<f64>),
    Indefinite(Lblt<f64>),
    Spectral { shift: f64 },
}

impl std::fmt::Debug for Factor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Factor::Cholesky(_) => "Cholesky",
            Factor::Indefinite(_) => "Indefinite",
            Factor::Spectral { .. } => "Spectral",
        })
    }
}

impl Factor {
    fn solve(&self, mut rhs: Mat<f64>) -> Mat<f64> {
        match self {
            Factor::Cholesky(f) => {
                f.solve_in_place(rhs.as_mut());
                rhs
            }
            Factor::Indefinite(f) => {
                f.solve_in_place(rhs.as_mut());
                rhs
            }
            Factor::Spectral { .. } => unreachable!("spectral solves go through the system"),
        }
    }
}

/// Evaluation points per kernel cross-matrix block.
const EVAL_CHUNK: usize = 2048;

/// Which factorization produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Cholesky,
    Indefinite,
    Spectral,
}

/// A fitted model at one lambda. Immutable.
#[derive(Debug, Clone)]
pub struct FittedModel {
    system: Arc<PenaltySystem>,
    y: Vec<f64>,
    intercept: f64,
    coefficients: Vec<f64>,
    lambda: f64,
    fitted: Vec<f64>,
    trace: f64,
    rss: f64,
    ones_quadratic: f64,
    factor: Arc<Factor>,
}

impl FittedModel {
    pub fn system(&self) -> &Arc<PenaltySystem> {
        &self.system
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.system.spec
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn fitted_values(&self) -> &[f64] {
        &self.fitted
    }

    /// `tr A(lambda)`, the effective degrees of freedom.
    pub fn smoother_trace(&self) -> f64 {
        self.trace
    }

    pub fn residual_sum_of_squares(&self) -> f64 {
        self.rss
    }

    pub fn method(&self) -> SolveMethod {
        match *self.factor {
            Factor::Cholesky(_) => SolveMethod::Cholesky,
            Factor::Indefinite(_) => SolveMethod::Indefinite,
            Factor::Spectral { .. } => SolveMethod::Spectral,
        }
    }

    /// `y'(I - A)^2 y / tr(I - A)`.
    pub fn sigma2_hat(&self) -> Result<f64> {
        let free = self.n() as f64 - self.trace;
        if !(free > 1e-10) {
            return Err(Error::DegenerateFreedom(format!(
                "tr(I - A) = {free:.3e}; the fit interpolates the data"
            )));
        }
        Ok((self.rss / free).max(0.0))
    }

    /// `|y - 1 f0 - K c|^2 / n + lambda c'K c` at the fitted coefficients.
    pub fn objective(&self) -> f64 {
        penalized_objective(
            self.system.grams.penalty(),
            &self.y,
            self.intercept,
            &self.coefficients,
            self.lambda,
        )
    }

    /// Solves `(K + n lambda I) X = rhs`.
    pub fn solve(&self, rhs: Mat<f64>) -> Mat<f64> {
        match *self.factor {
            Factor::Spectral { shift } => {
                let spec = self
                    .system
                    .spectrum
                    .get()
                    .expect("spectral fits keep their spectrum");
                let mut t = spec.vectors.transpose() * &rhs;
                for i in 0..t.nrows() {
                    let s = 1.0 / (spec.values[i] + shift);
                    for j in 0..t.ncols() {
                        t[(i, j)] *= s;
                    }
                }
                &spec.vectors * &t
            }
            _ => self.factor.solve(rhs),
        }
    }

    /// `f_S` at each row of `points` (`q x |S|`); the intercept for `S = {}`.
    pub fn eval_effect(&self, effect: &Effect, points: MatRef<'_, f64>) -> Result<Vec<f64>> {
        if effect.is_intercept() {
            if !self.spec().contains(effect) {
                return Err(Error::Spec("model has no intercept".into()));
            }
            return Ok(vec![self.intercept; points.nrows()]);
        }
        self.system.evaluate(effect, &self.coefficients, points)
    }

    /// `1'(K + n lambda I)^{-1} 1`.
    pub fn ones_quadratic(&self) -> f64 {
        self.ones_quadratic
    }

    /// `k'(M^{-1} - M^{-1}11'M^{-1} / 1'M^{-1}1) k` for each column `k` of
    /// `cross`, with `M = K + n lambda I`.
    pub fn projected_quadratic(&self, cross: &Mat<f64>) -> Vec<f64> {
        let n = self.n();
        assert_eq!(cross.nrows(), n, "cross matrix must have one row per observation");
        match *self.factor {
            Factor::Spectral { shift } => {
                let spec = self
                    .system
                    .spectrum
                    .get()
                    .expect("spectral fits keep their spectrum");
                let a = spec.vectors.transpose() * cross;
                let inv: Vec<f64> = spec.values.iter().map(|&e| 1.0 / (e + shift)).collect();
                let bb: f64 = spec.ones.iter().zip(&inv).map(|(b, w)| b * b * w).sum();
                (0..cross.ncols())
                    .map(|j| {
                        let (mut aa, mut ab) = (0.0, 0.0);
                        for i in 0..n {
                            let x = a[(i, j)] * inv[i];
                            aa += x * a[(i, j)];
                            ab += x * spec.ones[i];
                        }
                        aa - ab * ab / bb
                    })
                    .collect()
            }
            _ => {
                let z = self.solve(cross.clone());
                let v = self.solve(Mat::<f64>::from_fn(n, 1, |_, _| 1.0));
                let bb: f64 = v.col(0).iter().sum();
                (0..cross.ncols())
                    .map(|j| {
                        let (mut aa, mut ab) = (0.0, 0.0);
                        for i in 0..n {
                            aa += cross[(i, j)] * z[(i, j)];
                            ab += cross[(i, j)] * v[(i, 0)];
                        }
                        aa - ab * ab / bb
                    })
                    .collect()
            }
        }
    }

    /// `f_S` at the design points.
    pub fn effect_at_design(&self, effect: &Effect) -> Result<Vec<f64>> {
        if effect.is_intercept() {
            return Ok(vec![self.intercept; self.n()]);
        }
        let gram = self
            .system
            .grams
            .effect_gram(effect)
            .ok_or_else(|| Error::Spec(format!("effect {effect} is not part of the model")))?;
        Ok(matvec(gram, &self.coefficients))
    }
}

/// The penalized least-squares objective for arbitrary `(f0, c)`.
pub fn penalized_objective(gram: &Mat<f64>, y: &[f64], intercept: f64, c: &[f64], lambda: f64) -> f64 {
    let n = y.len() as f64;
    let kc = matvec(gram, c);
    let loss: f64 = y
        .iter()
        .zip(&kc)
        .map(|(yi, k)| (yi - intercept - k).powi(2))
        .sum::<f64>()
        / n;
    loss + lambda * dot(c, &kc)
}

/// Fits `spec` to `data` at a fixed `lambda` with the factorization path.
pub fn fit_at_lambda(spec: &ModelSpec, data: &Dataset, lambda: f64) -> Result<FittedModel> {
    let system = Arc::new(PenaltySystem::from_dataset(spec, data)?);
    system.fit(data.y(), lambda)
}

/// Dense `A(lambda)` for `spec` on `data`.
pub fn smoother_matrix(spec: &ModelSpec, data: &Dataset, lambda: f64) -> Result<Mat<f64>> {
    PenaltySystem::from_dataset(spec, data)?.smoother_matrix(lambda)
}

/// Lambda minimizing GCV over `grid`, with the full trace.
pub fn gcv_select(spec: &ModelSpec, data: &Dataset, grid: &[f64]) -> Result<(f64, GcvTrace)> {
    let system = PenaltySystem::from_dataset(spec, data)?;
    let trace = system.gcv(data.y(), grid, spec.gcv_gamma)?;
    Ok((trace.lambda(), trace))
}

/// Fits following the spec's lambda policy.
pub fn fit_model(spec: &ModelSpec, data: &Dataset) -> Result<(FittedModel, Option<GcvTrace>)> {
    let system = Arc::new(PenaltySystem::from_dataset(spec, data)?);
    let (lambda, trace) = system.select_lambda(data.y())?;
    Ok((system.fit(data.y(), lambda)?, trace))
}
