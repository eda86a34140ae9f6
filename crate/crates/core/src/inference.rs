//! Effect-wise inference on a fitted model: squared effect norms, pointwise
//! confidence bands (frequentist and Gaussian-process posterior) and
//! Wald-type tests of `f_S = 0` for single effects or groups.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::effect::Effect;
use crate::error::{Error, Result};
use crate::normal::{two_sided_critical, two_sided_p};
use crate::quadrature::{ShiftedHalton, TensorRule, GAUSS_NODES, MAX_TENSOR_DIM, QMC_POINTS};
use crate::solver::{FittedModel, PenaltySystem};
use crate::spectral::EffectEigensystem;

/// Squared `(V + lambda J)` norm of an estimated effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectNorm {
    pub effect: Effect,
    /// `integral + penalty`, clamped at 0 for round-off.
    pub value: f64,
    /// Integral of `f_S^2` over the unit cube.
    pub integral: f64,
    /// `lambda c'K_S c`.
    pub penalty: f64,
    /// Standard error of the integral when quasi-Monte-Carlo was used.
    pub quadrature_error: Option<f64>,
}

fn points_matrix(points: &[Vec<f64>], dim: usize) -> Mat<f64> {
    Mat::from_fn(points.len(), dim, |i, j| points[i][j])
}

fn quadratic_form(gram: &Mat<f64>, c: &[f64]) -> f64 {
    let n = c.len();
    let mut total = 0.0;
    for j in 0..n {
        let mut s = 0.0;
        for i in 0..n {
            s += gram[(i, j)] * c[i];
        }
        total += s * c[j];
    }
    total
}

pub fn effect_sq_norm(fit: &FittedModel, effect: &Effect) -> Result<EffectNorm> {
    sq_norm_of(fit.system(), effect, fit.coefficients(), fit.lambda())
}

/// Squared norm of `sum_i c_i K_S(X_iS, .)` with penalty weight `lambda`.
pub fn sq_norm_of(system: &PenaltySystem, effect: &Effect, c: &[f64], lambda: f64) -> Result<EffectNorm> {
    if effect.is_intercept() {
        return Err(Error::Spec("the intercept has no effect norm".into()));
    }
    let gram = system
        .grams()
        .effect_gram(effect)
        .ok_or_else(|| Error::Spec(format!("effect {effect} is not part of the model")))?;
    if c.len() != gram.nrows() {
        return Err(Error::Argument(format!("{} coefficients for {} observations", c.len(), gram.nrows())));
    }
    if c.iter().all(|&v| v == 0.0) {
        return Ok(EffectNorm {
            effect: effect.clone(),
            value: 0.0,
            integral: 0.0,
            penalty: 0.0,
            quadrature_error: None,
        });
    }
    let penalty = lambda * quadratic_form(gram, c);
    let dim = effect.order();
    let (integral, quadrature_error) = if dim <= MAX_TENSOR_DIM {
        let rule = TensorRule::gauss(dim, GAUSS_NODES);
        let vals = system.evaluate(effect, c, points_matrix(&rule.points, dim).as_ref())?;
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        (rule.integrate(&sq), None)
    } else {
        let rule = ShiftedHalton::new(dim, QMC_POINTS);
        let vals = system.evaluate(effect, c, points_matrix(&rule.points, dim).as_ref())?;
        let sq: Vec<f64> = vals.iter().map(|v| v * v).collect();
        let (est, err) = rule.integrate(&sq);
        (est, Some(err))
    };
    let raw = integral + penalty;
    if raw < -1e-10 {
        return Err(Error::Numerical(format!("squared norm of {effect} is negative ({raw:.3e})")));
    }
    Ok(EffectNorm {
        effect: effect.clone(),
        value: raw.max(0.0),
        integral,
        penalty,
        quadrature_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    Frequentist,
    Bayesian,
}

/// Pointwise intervals `estimate +- half_width` for one effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBand {
    pub effect: Effect,
    pub points: Vec<Vec<f64>>,
    pub estimate: Vec<f64>,
    pub half_width: Vec<f64>,
    pub method: IntervalMethod,
    pub alpha: f64,
    /// Points whose computed variance was a small negative and was set to 0.
    pub clamped: usize,
}

impl IntervalBand {
    pub fn len(&self) -> usize {
        self.estimate.len()
    }

    pub fn is_empty(&self) -> bool {
        self.estimate.is_empty()
    }

    pub fn mean_half_width(&self) -> f64 {
        self.half_width.iter().sum::<f64>() / self.half_width.len().max(1) as f64
    }

    pub fn lower(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.half_width).map(|(e, h)| e - h).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.estimate.iter().zip(&self.half_width).map(|(e, h)| e + h).collect()
    }

    /// Whether each interval contains the matching entry of `truth`.
    pub fn covers(&self, truth: &[f64]) -> Vec<bool> {
        self.estimate
            .iter()
            .zip(&self.half_width)
            .zip(truth)
            .map(|((e, h), t)| (t - e).abs() <= *h)
            .collect()
    }
}

fn rows(points: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..points.nrows())
        .map(|i| (0..points.ncols()).map(|j| points[(i, j)]).collect())
        .collect()
}

fn estimate_from_cross(cross: &Mat<f64>, c: &[f64]) -> Vec<f64> {
    (0..cross.ncols())
        .map(|j| (0..c.len()).map(|i| cross[(i, j)] * c[i]).sum())
        .collect()
}

/// `z_{1-alpha/2} sqrt(sigma2 / n)`.
pub fn intercept_half_width(sigma2: f64, n: usize, alpha: f64) -> Result<f64> {
    Ok(two_sided_critical(alpha)? * (sigma2 / n as f64).sqrt())
}

/// Intercept interval; `f0 +- z sigma/sqrt n` or the diffuse-prior posterior.
pub fn intercept_ci(fit: &FittedModel, method: IntervalMethod, alpha: f64) -> Result<IntervalBand> {
    let z = two_sided_critical(alpha)?;
    let sigma2 = fit.sigma2_hat()?;
    let n = fit.n() as f64;
    let var = match method {
        IntervalMethod::Frequentist => sigma2 / n,
        IntervalMethod::Bayesian => sigma2 / (n * fit.lambda() * fit.ones_quadratic()),
    };
    Ok(IntervalBand {
        effect: Effect::intercept(),
        points: vec![Vec::new()],
        estimate: vec![fit.intercept()],
        half_width: vec![z * var.sqrt()],
        method,
        alpha,
        clamped: 0,
    })
}

/// Frequentist band `f_S(x) +- z sqrt(sigma^2/n sum_v psi_v(x)^2/(1 + lambda/mu_v)^2)`.
pub fn pointwise_ci(
    fit: &FittedModel,
    eig: &EffectEigensystem,
    points: MatRef<'_, f64>,
    alpha: f64,
) -> Result<IntervalBand> {
    let z = two_sided_critical(alpha)?;
    let sigma2 = fit.sigma2_hat()?;
    let cross = eig.cross(points)?;
    if cross.nrows() != fit.n() {
        return Err(Error::Argument("eigensystem and fit come from different designs".into()));
    }
    let estimate = estimate_from_cross(&cross, fit.coefficients());
    let sums = eig.variance_sum_from_cross(fit.lambda(), &cross);
    let n = fit.n() as f64;
    let half_width = sums.iter().map(|s| z * (sigma2 / n * s).sqrt()).collect();
    Ok(IntervalBand {
        effect: eig.effect().clone(),
        points: rows(points),
        estimate,
        half_width,
        method: IntervalMethod::Frequentist,
        alpha,
        clamped: 0,
    })
}

/// Gaussian-process posterior band with `sigma^2` replaced by its estimate.
pub fn bayesian_ci(fit: &FittedModel, effect: &Effect, points: MatRef<'_, f64>, alpha: f64) -> Result<IntervalBand> {
    if effect.is_intercept() {
        return intercept_ci(fit, IntervalMethod::Bayesian, alpha);
    }
    let z = two_sided_critical(alpha)?;
    let sigma2 = fit.sigma2_hat()?;
    let system = fit.system();
    let kernel = system.effect_kernel(effect)?;
    let coords = system.effect_coordinates(effect);
    let cross = kernel.cross_matrix(coords.as_ref(), points)?;
    let estimate = estimate_from_cross(&cross, fit.coefficients());
    let quad = fit.projected_quadratic(&cross);
    let prior = sigma2 / (fit.n() as f64 * fit.lambda());
    let mut clamped = 0;
    let mut half_width = Vec::with_capacity(points.nrows());
    for (j, q) in quad.iter().enumerate() {
        let row: Vec<f64> = (0..points.ncols()).map(|k| points[(j, k)]).collect();
        let diag = kernel.eval_unchecked(&row, &row);
        let var = prior * (diag - q);
        if var < -1e-10 * prior.max(1.0) * diag.max(1.0) {
            return Err(Error::Numerical(format!(
                "posterior variance of {effect} is negative ({var:.3e}) at point {j}"
            )));
        }
        if var < 0.0 {
            clamped += 1;
        }
        half_width.push(z * var.max(0.0).sqrt());
    }
    Ok(IntervalBand {
        effect: effect.clone(),
        points: rows(points),
        estimate,
        half_width,
        method: IntervalMethod::Bayesian,
        alpha,
        clamped,
    })
}

/// Inputs of the Wald statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestComponents {
    pub n: usize,
    pub lambda: f64,
    pub sigma2: f64,
    /// Summed squared effect norms.
    pub sq_norm: f64,
    /// `sigma^2 s1 / n`.
    pub centering: f64,
    pub s1: f64,
    pub s2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub effects: Vec<Effect>,
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha: f64,
    pub critical_value: f64,
    pub components: TestComponents,
    pub norms: Vec<EffectNorm>,
    /// Eigensystem ranks of the tested effects.
    pub ranks: Vec<usize>,
    /// Negative round-off eigenvalues clamped across the tested effects.
    pub clamped_eigenvalues: usize,
}

/// `n^2 (norm - sigma^2 s1/n) / sqrt(2 sigma^4 n (n-1) s2)`.
pub fn wald_statistic(n: usize, sq_norm: f64, sigma2: f64, s1: f64, s2: f64) -> Result<f64> {
    if !(s2 > 0.0) {
        return Err(Error::DegenerateSpectrum(format!("eigen-sum s2 = {s2:.3e} is not positive")));
    }
    if !(sigma2 > 0.0) {
        return Err(Error::DegenerateFreedom(
            "estimated error variance is zero; the statistic is undefined".into(),
        ));
    }
    let nf = n as f64;
    let num = nf * nf * (sq_norm - sigma2 * s1 / nf);
    let den = (2.0 * sigma2 * sigma2 * nf * (nf - 1.0) * s2).sqrt();
    Ok(num / den)
}

/// Test of `f_S = 0` for every `S` in the group at once.
pub fn wald_test_group(fit: &FittedModel, eigs: &[&EffectEigensystem], alpha: f64) -> Result<TestReport> {
    if eigs.is_empty() {
        return Err(Error::Argument("test group is empty".into()));
    }
    let critical_value = two_sided_critical(alpha)?;
    let sigma2 = fit.sigma2_hat()?;
    let lambda = fit.lambda();
    let mut norms = Vec::with_capacity(eigs.len());
    let (mut s1, mut s2) = (0.0, 0.0);
    for eig in eigs {
        if eig.n() != fit.n() {
            return Err(Error::Argument("eigensystem and fit come from different designs".into()));
        }
        if norms.iter().any(|m: &EffectNorm| &m.effect == eig.effect()) {
            return Err(Error::Argument(format!("effect {} repeated in test group", eig.effect())));
        }
        norms.push(effect_sq_norm(fit, eig.effect())?);
        let (a, b) = eig.eigen_sums(lambda);
        s1 += a;
        s2 += b;
    }
    let sq_norm: f64 = norms.iter().map(|m| m.value).sum();
    let statistic = wald_statistic(fit.n(), sq_norm, sigma2, s1, s2)?;
    let p_value = two_sided_p(statistic);
    Ok(TestReport {
        effects: eigs.iter().map(|e| e.effect().clone()).collect(),
        statistic,
        p_value,
        reject: statistic.abs() >= critical_value,
        alpha,
        critical_value,
        components: TestComponents {
            n: fit.n(),
            lambda,
            sigma2,
            sq_norm,
            centering: sigma2 * s1 / fit.n() as f64,
            s1,
            s2,
        },
        norms,
        ranks: eigs.iter().map(|e| e.rank()).collect(),
        clamped_eigenvalues: eigs.iter().map(|e| e.clamped()).sum(),
    })
}

pub fn wald_test(fit: &FittedModel, eig: &EffectEigensystem, alpha: f64) -> Result<TestReport> {
    wald_test_group(fit, &[eig], alpha)
}
