//! Integration rules on the unit cube.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Nodes per axis of the tensor Gauss-Legendre rule used for effect norms.
pub const GAUSS_NODES: usize = 24;

/// Effects of order above this are integrated by quasi-Monte-Carlo.
pub const MAX_TENSOR_DIM: usize = 3;

/// Total quasi-Monte-Carlo sample size (2^14).
pub const QMC_POINTS: usize = 1 << 14;

const QMC_SHIFTS: usize = 16;
const QMC_SEED: u64 = 0x5eed_ca11;

/// Gauss-Legendre rule on `[0,1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Newton iteration on the Legendre recurrence, mapped from `[-1,1]`.
    pub fn new(points: usize) -> Self {
        assert!(points > 0, "Gauss-Legendre rule needs at least one node");
        let n = points;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            // map to [0,1]
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Tensor product of one rule over `dim` axes; points in row-major order
/// (last axis fastest).
#[derive(Debug, Clone)]
pub struct TensorRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn gauss(dim: usize, per_axis: usize) -> Self {
        let rule = GaussLegendre::new(per_axis);
        let mut points = vec![Vec::with_capacity(dim)];
        let mut weights = vec![1.0];
        for _ in 0..dim {
            let mut np = Vec::with_capacity(points.len() * per_axis);
            let mut nw = Vec::with_capacity(points.len() * per_axis);
            for (p, w) in points.iter().zip(&weights) {
                for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
                    let mut q = p.clone();
                    q.push(x);
                    np.push(q);
                    nw.push(w * wx);
                }
            }
            points = np;
            weights = nw;
        }
        TensorRule { points, weights }
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }
}

/// Halton points with random Cranley-Patterson shifts.
///
/// `points` is split into equal batches with one shift each; the spread of
/// batch means gives the reported standard error.
#[derive(Debug, Clone)]
pub struct ShiftedHalton {
    pub points: Vec<Vec<f64>>,
    batches: usize,
}

impl ShiftedHalton {
    pub fn new(dim: usize, total: usize) -> Self {
        let per_batch = total / QMC_SHIFTS;
        let mut rng = ChaCha8Rng::seed_from_u64(QMC_SEED);
        let mut points = Vec::with_capacity(per_batch * QMC_SHIFTS);
        for _ in 0..QMC_SHIFTS {
            let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            for k in 1..=per_batch {
                let p = (0..dim)
                    .map(|a| (radical_inverse(k, PRIMES[a]) + shift[a]).fract())
                    .collect();
                points.push(p);
            }
        }
        ShiftedHalton {
            points,
            batches: QMC_SHIFTS,
        }
    }

    /// Integral estimate and its standard error.
    pub fn integrate(&self, values: &[f64]) -> (f64, f64) {
        let per = values.len() / self.batches;
        let means: Vec<f64> = values
            .chunks(per)
            .map(|c| c.iter().sum::<f64>() / c.len() as f64)
            .collect();
        let k = means.len() as f64;
        let mean = means.iter().sum::<f64>() / k;
        let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (mean, (var / k).sqrt())
    }
}

const PRIMES: [usize; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

fn radical_inverse(mut k: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut out = 0.0;
    while k > 0 {
        out += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    out
}

/// Evenly spaced points `0, 1/(k-1), ..., 1`.
pub fn uniform_grid(k: usize) -> Vec<f64> {
    match k {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..k).map(|l| l as f64 / (k - 1) as f64).collect(),
    }
}

/// All points of the product of `axis` with itself `dim` times, last axis fastest.
pub fn product_points(axis: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for _ in 0..dim {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                axis.iter().map(move |&x| {
                    let mut q = p.clone();
                    q.push(x);
                    q
                })
            })
            .collect();
    }
    pts
}
