//! Reproducing kernels of the tensor-product Sobolev space.
//!
//! The univariate kernel of order `m` on `[0,1]` is
//!
//! ```text
//! K(x, y) = sum_{l=1..m} k_l(x) k_l(y) + (-1)^(m-1) k_{2m}(|x - y|)
//! ```
//!
//! with `k_l = B_l / l!` the scaled Bernoulli polynomials. Effect kernels are
//! products of univariate kernels over the effect's coordinates and the
//! penalty kernel is the sum of all non-intercept effect kernels.

use faer::{Mat, MatRef};
use num_rational::Ratio;
use num_traits::{ToPrimitive, Zero};

use crate::effect::Effect;
use crate::error::{Error, Result};

pub const MIN_ORDER: usize = 2;
pub const MAX_ORDER: usize = 6;
pub const DEFAULT_ORDER: usize = 3;

type Rational = Ratio<i128>;

fn binomial(n: usize, k: usize) -> i128 {
    let mut acc: i128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as i128 / (i + 1) as i128;
    }
    acc
}

/// Bernoulli numbers `B_0..=B_upto` with the `B_1 = -1/2` convention.
pub fn bernoulli_numbers(upto: usize) -> Vec<Rational> {
    let mut b: Vec<Rational> = Vec::with_capacity(upto + 1);
    b.push(Rational::from_integer(1));
    for n in 1..=upto {
        let mut acc = Rational::zero();
        for (k, bk) in b.iter().enumerate() {
            acc += Rational::from_integer(binomial(n + 1, k)) * bk;
        }
        b.push(-acc / Rational::from_integer((n + 1) as i128));
    }
    b
}

/// Exact coefficients (ascending powers) of `B_l(x) / l!`.
pub fn scaled_bernoulli_coefficients(l: usize) -> Vec<Rational> {
    let numbers = bernoulli_numbers(l);
    let mut factorials = vec![1i128; l + 1];
    for i in 1..=l {
        factorials[i] = factorials[i - 1] * i as i128;
    }
    // B_l(x) = sum_j C(l, j) B_{l-j} x^j, so the x^j coefficient of B_l / l! is
    // B_{l-j} / (j! (l-j)!).
    (0..=l)
        .map(|j| numbers[l - j] / Rational::from_integer(factorials[j] * factorials[l - j]))
        .collect()
}

/// Floating-point coefficient table for the scaled Bernoulli polynomials
/// `k_1..k_{2m}`, built once from exact rationals.
#[derive(Debug, Clone)]
pub struct BernoulliBasis {
    order: usize,
    // coeffs[l] holds ascending-power coefficients of k_l; coeffs[0] is unused.
    coeffs: Vec<Vec<f64>>,
}

impl BernoulliBasis {
    pub fn new(order: usize) -> Result<Self> {
        check_order(order)?;
        let coeffs = (0..=2 * order)
            .map(|l| {
                scaled_bernoulli_coefficients(l)
                    .iter()
                    .map(|c| c.to_f64().expect("rational coefficient fits in f64"))
                    .collect()
            })
            .collect();
        Ok(BernoulliBasis { order, coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coefficients(&self, l: usize) -> &[f64] {
        &self.coeffs[l]
    }

    /// `B_l(x) / l!` for `1 <= l <= 2m` and `x` in `[0,1]`.
    pub fn kappa(&self, l: usize, x: f64) -> Result<f64> {
        if l == 0 || l > 2 * self.order {
            return Err(Error::Argument(format!(
                "Bernoulli index {l} outside 1..={} for order {}",
                2 * self.order,
                self.order
            )));
        }
        check_unit(x)?;
        Ok(self.kappa_unchecked(l, x))
    }

    #[inline]
    pub(crate) fn kappa_unchecked(&self, l: usize, x: f64) -> f64 {
        self.coeffs[l].iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }
}

fn check_order(order: usize) -> Result<()> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&order) {
        return Err(Error::Argument(format!(
            "smoothness order {order} outside supported range {MIN_ORDER}..={MAX_ORDER}"
        )));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::Data(format!("coordinate {x} is not finite")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Argument(format!("coordinate {x} outside [0,1]")));
    }
    Ok(())
}

/// Centered univariate Sobolev kernel of order `m`.
#[derive(Debug, Clone)]
pub struct UnivariateKernel {
    basis: BernoulliBasis,
    sign: f64,
}

impl UnivariateKernel {
    pub fn new(order: usize) -> Result<Self> {
        let basis = BernoulliBasis::new(order)?;
        let sign = if order % 2 == 1 { 1.0 } else { -1.0 };
        Ok(UnivariateKernel { basis, sign })
    }

    pub fn order(&self) -> usize {
        self.basis.order
    }

    pub fn basis(&self) -> &BernoulliBasis {
        &self.basis
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        check_unit(x)?;
        check_unit(y)?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64, y: f64) -> f64 {
        let m = self.basis.order;
        let mut acc = 0.0;
        for l in 1..=m {
            acc += self.basis.kappa_unchecked(l, x) * self.basis.kappa_unchecked(l, y);
        }
        acc + self.sign * self.basis.kappa_unchecked(2 * m, (x - y).abs())
    }

    /// `k_1(x)..k_m(x)`, the polynomial part of the kernel's feature map.
    fn features(&self, x: f64) -> Vec<f64> {
        (1..=self.basis.order).map(|l| self.basis.kappa_unchecked(l, x)).collect()
    }

    /// Cross matrix `K(a_i, b_j)` for two coordinate lists.
    pub(crate) fn cross(&self, a: &[f64], b: &[f64]) -> Mat<f64> {
        let m = self.basis.order;
        let fa: Vec<Vec<f64>> = a.iter().map(|&x| self.features(x)).collect();
        let fb: Vec<Vec<f64>> = b.iter().map(|&x| self.features(x)).collect();
        Mat::from_fn(a.len(), b.len(), |i, j| {
            let mut acc = 0.0;
            for l in 0..m {
                acc += fa[i][l] * fb[j][l];
            }
            acc + self.sign * self.basis.kappa_unchecked(2 * m, (a[i] - b[j]).abs())
        })
    }

    /// Symmetric Gram matrix of one coordinate list, each pair evaluated once.
    pub(crate) fn gram(&self, a: &[f64]) -> Mat<f64> {
        let m = self.basis.order;
        let n = a.len();
        let fa: Vec<Vec<f64>> = a.iter().map(|&x| self.features(x)).collect();
        let mut g = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let mut acc = 0.0;
                for l in 0..m {
                    acc += fa[i][l] * fa[j][l];
                }
                let v = acc + self.sign * self.basis.kappa_unchecked(2 * m, (a[i] - a[j]).abs());
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }
}

/// Anything that can be evaluated on pairs of full covariate rows.
pub trait RowKernel {
    /// Number of leading coordinates each row must carry, at least.
    fn min_dim(&self) -> usize;

    fn eval_rows(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Product kernel `K_S(a, b) = prod_{j in S} K(a_j, b_j)`.
#[derive(Debug, Clone)]
pub struct EffectKernel {
    effect: Effect,
    kernel: UnivariateKernel,
}

impl EffectKernel {
    pub fn new(effect: Effect, order: usize) -> Result<Self> {
        Self::with_kernel(effect, UnivariateKernel::new(order)?)
    }

    pub fn with_kernel(effect: Effect, kernel: UnivariateKernel) -> Result<Self> {
        if effect.is_intercept() {
            return Err(Error::Spec("the intercept has no effect kernel".into()));
        }
        Ok(EffectKernel { effect, kernel })
    }

    pub fn effect(&self) -> &Effect {
        &self.effect
    }

    pub fn univariate(&self) -> &UnivariateKernel {
        &self.kernel
    }

    /// Evaluates on points already restricted to the effect's coordinates.
    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let k = self.effect.order();
        if a.len() != k || b.len() != k {
            return Err(Error::Argument(format!(
                "effect {} expects {k} coordinates, got {} and {}",
                self.effect,
                a.len(),
                b.len()
            )));
        }
        a.iter()
            .zip(b)
            .try_fold(1.0, |acc, (&x, &y)| Ok(acc * self.kernel.eval(x, y)?))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .fold(1.0, |acc, (&x, &y)| acc * self.kernel.eval_unchecked(x, y))
    }

    /// `K_S(a_i, b_j)` where rows of `a` and `b` hold the effect's coordinates.
    pub fn cross_matrix(&self, a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
        let k = self.effect.order();
        if a.ncols() != k || b.ncols() != k {
            return Err(Error::Argument(format!(
                "effect {} expects {k} coordinate columns",
                self.effect
            )));
        }
        check_points(a)?;
        check_points(b)?;
        let mut out = Mat::<f64>::from_fn(a.nrows(), b.nrows(), |_, _| 1.0);
        for axis in 0..k {
            let ca: Vec<f64> = (0..a.nrows()).map(|i| a[(i, axis)]).collect();
            let cb: Vec<f64> = (0..b.nrows()).map(|i| b[(i, axis)]).collect();
            let factor = self.kernel.cross(&ca, &cb);
            hadamard_in_place(&mut out, &factor);
        }
        Ok(out)
    }
}

impl RowKernel for EffectKernel {
    fn min_dim(&self) -> usize {
        self.effect.indices().last().map_or(0, |j| j + 1)
    }

    fn eval_rows(&self, a: &[f64], b: &[f64]) -> f64 {
        self.effect
            .indices()
            .iter()
            .fold(1.0, |acc, &j| acc * self.kernel.eval_unchecked(a[j], b[j]))
    }
}

/// `K_J = sum over non-intercept effects of K_S`.
#[derive(Debug, Clone)]
pub struct PenaltyKernel {
    effects: Vec<Effect>,
    kernel: UnivariateKernel,
}

impl PenaltyKernel {
    /// The intercept, if listed, is skipped.
    pub fn new(effects: &[Effect], order: usize) -> Result<Self> {
        let effects: Vec<Effect> = effects.iter().filter(|e| !e.is_intercept()).cloned().collect();
        if effects.is_empty() {
            return Err(Error::Spec("penalty kernel needs at least one non-intercept effect".into()));
        }
        Ok(PenaltyKernel {
            effects,
            kernel: UnivariateKernel::new(order)?,
        })
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        let need = self.min_dim();
        if a.len() < need || b.len() < need {
            return Err(Error::Argument(format!(
                "penalty kernel needs rows with at least {need} coordinates"
            )));
        }
        for &x in a.iter().chain(b) {
            check_unit(x)?;
        }
        Ok(self.eval_rows(a, b))
    }
}

impl RowKernel for PenaltyKernel {
    fn min_dim(&self) -> usize {
        self.effects
            .iter()
            .filter_map(|e| e.indices().last())
            .max()
            .map_or(0, |j| j + 1)
    }

    fn eval_rows(&self, a: &[f64], b: &[f64]) -> f64 {
        self.effects
            .iter()
            .map(|e| {
                e.indices()
                    .iter()
                    .fold(1.0, |acc, &j| acc * self.kernel.eval_unchecked(a[j], b[j]))
            })
            .sum()
    }
}

fn check_points(points: MatRef<'_, f64>) -> Result<()> {
    for j in 0..points.ncols() {
        for i in 0..points.nrows() {
            let v = points[(i, j)];
            if !v.is_finite() {
                return Err(Error::Data(format!("row {i}, column {j} is not finite")));
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Argument(format!("row {i}, column {j} = {v} outside [0,1]")));
            }
        }
    }
    Ok(())
}

fn hadamard_in_place(acc: &mut Mat<f64>, factor: &Mat<f64>) {
    for j in 0..acc.ncols() {
        for i in 0..acc.nrows() {
            acc[(i, j)] *= factor[(i, j)];
        }
    }
}

/// Gram matrix of `kernel` on the rows of `points` (an `n x d` matrix).
///
/// Each unordered pair is evaluated once, so the result is exactly symmetric.
pub fn gram_matrix<K: RowKernel + ?Sized>(kernel: &K, points: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if points.ncols() < kernel.min_dim() {
        return Err(Error::Argument(format!(
            "kernel needs {} covariate columns, points have {}",
            kernel.min_dim(),
            points.ncols()
        )));
    }
    check_points(points)?;
    let n = points.nrows();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..points.ncols()).map(|j| points[(i, j)]).collect())
        .collect();
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = kernel.eval_rows(&rows[i], &rows[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// Per-effect Gram matrices on one design plus their sum, the penalty Gram.
///
/// Built from one univariate Gram per covariate, multiplied entrywise.
#[derive(Debug, Clone)]
pub struct GramSet {
    effects: Vec<Effect>,
    per_effect: Vec<Mat<f64>>,
    penalty: Mat<f64>,
}

impl GramSet {
    pub fn build(kernel: &UnivariateKernel, effects: &[Effect], x: MatRef<'_, f64>) -> Result<Self> {
        check_points(x)?;
        let effects: Vec<Effect> = effects.iter().filter(|e| !e.is_intercept()).cloned().collect();
        let n = x.nrows();
        let d = x.ncols();
        if let Some(bad) = effects.iter().find(|e| e.indices().iter().any(|&j| j >= d)) {
            return Err(Error::Spec(format!("effect {bad} references a covariate beyond d = {d}")));
        }
        let mut axes: Vec<Option<Mat<f64>>> = vec![None; d];
        for e in &effects {
            for &j in e.indices() {
                if axes[j].is_none() {
                    let col: Vec<f64> = (0..n).map(|i| x[(i, j)]).collect();
                    axes[j] = Some(kernel.gram(&col));
                }
            }
        }
        let per_effect: Vec<Mat<f64>> = effects
            .iter()
            .map(|e| {
                let mut g = Mat::<f64>::from_fn(n, n, |_, _| 1.0);
                for &j in e.indices() {
                    hadamard_in_place(&mut g, axes[j].as_ref().expect("axis gram built"));
                }
                g
            })
            .collect();
        let mut penalty = Mat::<f64>::zeros(n, n);
        for g in &per_effect {
            penalty += g;
        }
        Ok(GramSet {
            effects,
            per_effect,
            penalty,
        })
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn effect_gram(&self, effect: &Effect) -> Option<&Mat<f64>> {
        self.effects
            .iter()
            .position(|e| e == effect)
            .map(|k| &self.per_effect[k])
    }

    pub fn penalty(&self) -> &Mat<f64> {
        &self.penalty
    }

    pub fn dim(&self) -> usize {
        self.penalty.nrows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn bernoulli_numbers_match_table() {
        let b = bernoulli_numbers(12);
        assert_eq!(b[1], r(-1, 2));
        assert_eq!(b[2], r(1, 6));
        assert_eq!(b[4], r(-1, 30));
        assert_eq!(b[6], r(1, 42));
        assert_eq!(b[8], r(-1, 30));
        assert_eq!(b[10], r(5, 66));
        assert_eq!(b[12], r(-691, 2730));
        for odd in [3, 5, 7, 9, 11] {
            assert!(b[odd].is_zero());
        }
    }

    #[test]
    fn low_order_polynomials_are_standard() {
        // B_1 = x - 1/2, B_2 = x^2 - x + 1/6
        assert_eq!(scaled_bernoulli_coefficients(1), vec![r(-1, 2), r(1, 1)]);
        assert_eq!(
            scaled_bernoulli_coefficients(2),
            vec![r(1, 12), r(-1, 2), r(1, 2)]
        );
    }

    #[test]
    fn scaled_polynomials_integrate_to_zero_exactly() {
        for l in 1..=12 {
            let integral: Rational = scaled_bernoulli_coefficients(l)
                .iter()
                .enumerate()
                .map(|(j, c)| c / Rational::from_integer(j as i128 + 1))
                .sum();
            assert!(integral.is_zero(), "l = {l}");
        }
    }

    #[test]
    fn kappa_values() {
        let b = BernoulliBasis::new(2).unwrap();
        assert_eq!(b.kappa(1, 0.5).unwrap(), 0.0);
        assert!((b.kappa(2, 0.0).unwrap() - 1.0 / 12.0).abs() < 1e-15);
        assert!((b.kappa(4, 0.0).unwrap() + 1.0 / 720.0).abs() < 1e-15);
    }

    #[test]
    fn kappa_argument_errors() {
        let b = BernoulliBasis::new(2).unwrap();
        assert!(matches!(b.kappa(0, 0.5), Err(Error::Argument(_))));
        assert!(matches!(b.kappa(5, 0.5), Err(Error::Argument(_))));
        assert!(matches!(b.kappa(1, 1.5), Err(Error::Argument(_))));
        assert!(matches!(b.kappa(1, -0.1), Err(Error::Argument(_))));
        assert!(BernoulliBasis::new(1).is_err());
        assert!(BernoulliBasis::new(7).is_err());
    }

    #[test]
    fn univariate_diagonal_at_origin_order_two() {
        // 1/4 + 1/144 + 1/720 = 31/120
        let k = UnivariateKernel::new(2).unwrap();
        assert!((k.eval(0.0, 0.0).unwrap() - 31.0 / 120.0).abs() < 1e-15);
        assert_eq!(k.eval(0.3, 0.7).unwrap(), k.eval(0.7, 0.3).unwrap());
        assert!(k.eval(0.3, 1.2).is_err());
    }

    #[test]
    fn effect_kernel_products() {
        let pair = EffectKernel::new(Effect::new(vec![0, 1]).unwrap(), 2).unwrap();
        let v = pair.eval(&[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert!((v - (31.0f64 / 120.0).powi(2)).abs() < 1e-15);
        assert!(pair.eval(&[0.0], &[0.0, 0.0]).is_err());

        let single = EffectKernel::new(Effect::new(vec![0]).unwrap(), 3).unwrap();
        let uni = UnivariateKernel::new(3).unwrap();
        assert_eq!(single.eval(&[0.2], &[0.9]).unwrap(), uni.eval(0.2, 0.9).unwrap());
        assert!(EffectKernel::new(Effect::intercept(), 3).is_err());
    }

    #[test]
    fn gram_of_one_point() {
        let k = EffectKernel::new(Effect::new(vec![0]).unwrap(), 3).unwrap();
        let pts = Mat::from_fn(1, 1, |_, _| 0.4);
        let g = gram_matrix(&k, pts.as_ref()).unwrap();
        assert_eq!(g.nrows(), 1);
        assert_eq!(g[(0, 0)], k.eval(&[0.4], &[0.4]).unwrap());
    }

    #[test]
    fn gram_rejects_non_finite() {
        let k = EffectKernel::new(Effect::new(vec![0]).unwrap(), 3).unwrap();
        let pts = Mat::from_fn(2, 1, |i, _| if i == 0 { f64::NAN } else { 0.5 });
        assert!(matches!(gram_matrix(&k, pts.as_ref()), Err(Error::Data(_))));
    }

    #[test]
    fn identical_rows_give_identical_gram_rows() {
        let k = PenaltyKernel::new(&Effect::all_up_to(2, 2), 3).unwrap();
        let pts = Mat::from_fn(4, 2, |i, j| {
            let rows = [[0.1, 0.7], [0.5, 0.2], [0.1, 0.7], [0.9, 0.3]];
            rows[i][j]
        });
        let g = gram_matrix(&k, pts.as_ref()).unwrap();
        for c in 0..4 {
            assert_eq!(g[(0, c)], g[(2, c)]);
            assert_eq!(g[(c, 0)], g[(c, 2)]);
        }
    }
}
