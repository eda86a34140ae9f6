//! Empirical eigensystems of effect Gram matrices.
//!
//! For an effect `S` the matrix `K_S / n` is decomposed as
//! `sum_v mu_v (psi_v / sqrt n)(psi_v / sqrt n)'`, with `psi_v` scaled so that
//! `|psi_v|^2 = n`. Eigenfunction values off the design come from the
//! Nystrom extension `psi_v(x) = sum_i psi_v(X_i) K_S(X_i, x) / (n mu_v)`,
//! which reproduces the stored table at design points.

use faer::{Mat, MatRef, Side};

use crate::effect::Effect;
use crate::error::{Error, Result};
use crate::kernels::EffectKernel;
use crate::solver::{FittedModel, PenaltySystem};

/// Eigenvalues at or below this fraction of the largest are excluded from
/// the rank.
pub const DEFAULT_RANK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EffectEigensystem {
    effect: Effect,
    kernel: EffectKernel,
    coords: Mat<f64>,
    values: Vec<f64>,
    vectors: Mat<f64>,
    rank: usize,
    clamped: usize,
    rank_tolerance: f64,
}

impl EffectEigensystem {
    /// Decomposes `gram / n` where `gram` is `K_S` on the rows of `coords`.
    pub fn new(kernel: EffectKernel, coords: Mat<f64>, gram: &Mat<f64>, rank_tolerance: f64) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 || gram.ncols() != n || coords.nrows() != n {
            return Err(Error::Argument("eigensystem needs a square Gram matrix matching the design".into()));
        }
        if !(0.0..1.0).contains(&rank_tolerance) {
            return Err(Error::Argument(format!("rank tolerance {rank_tolerance} must lie in [0, 1)")));
        }
        let scaled = Mat::from_fn(n, n, |i, j| gram[(i, j)] / n as f64);
        let eig = scaled
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Numerical(format!("eigendecomposition of {} failed: {e:?}", kernel.effect())))?;
        // faer returns ascending order
        let raw: Vec<f64> = (0..n).rev().map(|i| eig.S()[i]).collect();
        let u = eig.U();
        let vectors = Mat::from_fn(n, n, |i, j| u[(i, n - 1 - j)]);
        let clamped = raw.iter().filter(|&&v| v < 0.0).count();
        let values: Vec<f64> = raw.iter().map(|&v| v.max(0.0)).collect();
        let top = values[0];
        let rank = if top > 0.0 {
            values.iter().take_while(|&&v| v > rank_tolerance * top).count()
        } else {
            0
        };
        Ok(EffectEigensystem {
            effect: kernel.effect().clone(),
            kernel,
            coords,
            values,
            vectors,
            rank,
            clamped,
            rank_tolerance,
        })
    }

    pub fn from_system(system: &PenaltySystem, effect: &Effect) -> Result<Self> {
        Self::from_system_with_tolerance(system, effect, DEFAULT_RANK_TOLERANCE)
    }

    pub fn from_system_with_tolerance(system: &PenaltySystem, effect: &Effect, tol: f64) -> Result<Self> {
        if effect.is_intercept() {
            return Err(Error::Spec("the intercept has no eigensystem".into()));
        }
        let kernel = system.effect_kernel(effect)?;
        let gram = system
            .grams()
            .effect_gram(effect)
            .ok_or_else(|| Error::Spec(format!("effect {effect} is not part of the model")))?;
        Self::new(kernel, system.effect_coordinates(effect), gram, tol)
    }

    pub fn from_fit(fit: &FittedModel, effect: &Effect) -> Result<Self> {
        Self::from_system(fit.system(), effect)
    }

    pub fn effect(&self) -> &Effect {
        &self.effect
    }

    pub fn n(&self) -> usize {
        self.vectors.nrows()
    }

    /// All `n` eigenvalues of `K_S / n`, nonincreasing, negatives clamped to 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Number of negative round-off eigenvalues that were clamped.
    pub fn clamped(&self) -> usize {
        self.clamped
    }

    pub fn rank_tolerance(&self) -> f64 {
        self.rank_tolerance
    }

    /// Unit-norm eigenvectors, columns ordered as [`Self::eigenvalues`].
    pub fn vectors(&self) -> MatRef<'_, f64> {
        self.vectors.as_ref()
    }

    /// `psi_v(X_i)` table, `n x n`, columns with squared norm `n`.
    pub fn psi(&self) -> Mat<f64> {
        let s = (self.n() as f64).sqrt();
        Mat::from_fn(self.n(), self.n(), |i, j| s * self.vectors[(i, j)])
    }

    /// `(sum_v 1/(1 + lambda/mu_v), sum_v 1/(1 + lambda/mu_v)^2)` over `v <= r`.
    pub fn eigen_sums(&self, lambda: f64) -> (f64, f64) {
        self.values[..self.rank].iter().fold((0.0, 0.0), |(a, b), &mu| {
            let w = mu / (mu + lambda);
            (a + w, b + w * w)
        })
    }

    /// `K_S(X_i, x_j)` for the design rows against `points` (`q x |S|`).
    pub fn cross(&self, points: MatRef<'_, f64>) -> Result<Mat<f64>> {
        self.kernel.cross_matrix(self.coords.as_ref(), points)
    }

    /// Nystrom eigenfunction values, `q x r`.
    pub fn nystrom(&self, points: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let cross = self.cross(points)?;
        let proj = self.project(&cross);
        let s = (self.n() as f64).sqrt();
        Ok(Mat::from_fn(points.nrows(), self.rank, |j, v| {
            proj[(v, j)] / (s * self.values[v])
        }))
    }

    fn project(&self, cross: &Mat<f64>) -> Mat<f64> {
        let u = self.vectors.as_ref().subcols(0, self.rank);
        u.transpose() * cross
    }

    /// `sum_v psi_v(x)^2 / (1 + lambda/mu_v)^2` at each row of `points`.
    pub fn pointwise_variance_sum(&self, lambda: f64, points: MatRef<'_, f64>) -> Result<Vec<f64>> {
        let cross = self.cross(points)?;
        Ok(self.variance_sum_from_cross(lambda, &cross))
    }

    /// As [`Self::pointwise_variance_sum`] given `K_S(X_i, x_j)` already built.
    pub fn variance_sum_from_cross(&self, lambda: f64, cross: &Mat<f64>) -> Vec<f64> {
        let proj = self.project(cross);
        let n = self.n() as f64;
        // psi_v(x)^2 / (1 + lambda/mu_v)^2 = (u_v'k)^2 / (n (mu_v + lambda)^2)
        let scale: Vec<f64> = self.values[..self.rank]
            .iter()
            .map(|&mu| 1.0 / (n * (mu + lambda).powi(2)))
            .collect();
        (0..cross.ncols())
            .map(|j| (0..self.rank).map(|v| proj[(v, j)].powi(2) * scale[v]).sum())
            .collect()
    }
}
