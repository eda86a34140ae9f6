#![allow(dead_code)]

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssanova::Dataset;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut impl Rng, n: usize, d: usize) -> Mat<f64> {
    Mat::from_fn(n, d, |_, _| rng.random::<f64>())
}

pub fn random_dataset(seed: u64, n: usize, d: usize) -> Dataset {
    let mut r = rng(seed);
    let x = random_unit(&mut r, n, d);
    let y = (0..n)
        .map(|i| (4.0 * x[(i, 0)]).sin() + x[(i, d - 1)].powi(2) + 0.5 * (r.random::<f64>() - 0.5))
        .collect();
    Dataset::from_unit(x, y).unwrap()
}

/// Composite Simpson rule on `[a, b]` with `panels` (even) subintervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    assert!(panels.is_multiple_of(2));
    let h = (b - a) / panels as f64;
    let mut s = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// Simpson over `[0, 1]` split at the given interior kinks.
pub fn simpson_split(f: impl Fn(f64) -> f64, kinks: &[f64], panels: usize) -> f64 {
    let mut cuts = vec![0.0];
    let mut k: Vec<f64> = kinks.iter().copied().filter(|&x| x > 0.0 && x < 1.0).collect();
    k.sort_by(f64::total_cmp);
    cuts.extend(k);
    cuts.push(1.0);
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| simpson(&f, w[0], w[1], panels))
        .sum()
}

/// Tensor Simpson rule on `[0,1]^2`.
pub fn simpson_2d(f: impl Fn(f64, f64) -> f64, panels: usize) -> f64 {
    simpson(|x| simpson(|y| f(x, y), 0.0, 1.0, panels), 0.0, 1.0, panels)
}

/// Trapezoid rule on `[0, 1]` with `points` nodes.
pub fn trapezoid(f: impl Fn(f64) -> f64, points: usize) -> f64 {
    let h = 1.0 / (points - 1) as f64;
    let mut s = 0.5 * (f(0.0) + f(1.0));
    for k in 1..points - 1 {
        s += f(k as f64 * h);
    }
    s * h
}

/// Dense inverse by Gauss-Jordan elimination with partial pivoting.
pub fn dense_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let p = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, p);
        let piv = m[col][col];
        for v in m[col].iter_mut() {
            *v /= piv;
        }
        for r in 0..n {
            if r != col {
                let factor = m[r][col];
                if factor != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= factor * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn to_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn matvec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
