//! Reference computations shared by the integration tests. Nothing here
//! calls into the library's numerical routines.
#![allow(dead_code)]

use ewishart::linalg::{SpdMat, SymMat};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

pub fn random_sym<R: Rng>(p: usize, rng: &mut R) -> SymMat {
    let a = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    SymMat::from_matrix((&a + a.transpose()) * 0.5).unwrap()
}

/// `A A^T / p + 0.1 I` with Gaussian `A`, then a random overall scale.
pub fn random_spd<R: Rng>(p: usize, rng: &mut R) -> SpdMat {
    let a = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let scale = rng.random_range(-1.0f64..1.0).exp();
    let m = (&a * a.transpose() / p as f64 + DMatrix::identity(p, p) * 0.1) * scale;
    SpdMat::from_matrix((&m + m.transpose()) * 0.5).unwrap()
}

/// Cyclic Jacobi rotations; eigenvalues ascending with matching columns.
pub fn jacobi_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let p = m.nrows();
    let mut a = m.clone();
    let mut v = DMatrix::<f64>::identity(p, p);
    for _ in 0..100 {
        let off: f64 = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-30 * a.norm_squared().max(1e-300) {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                if a[(i, j)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (2.0 * a[(i, j)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..p {
                    let (aki, akj) = (a[(k, i)], a[(k, j)]);
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
                for k in 0..p {
                    let (aik, ajk) = (a[(i, k)], a[(j, k)]);
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
                for k in 0..p {
                    let (vki, vkj) = (v[(k, i)], v[(k, j)]);
                    v[(k, i)] = c * vki - s * vkj;
                    v[(k, j)] = s * vki + c * vkj;
                }
            }
        }
    }
    let mut idx: Vec<usize> = (0..p).collect();
    idx.sort_by(|&x, &y| a[(x, x)].total_cmp(&a[(y, y)]));
    let vals = idx.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(p, p, |r, c| v[(r, idx[c])]);
    (vals, vecs)
}

/// Scaling and squaring with a truncated Taylor series.
pub fn expm_taylor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let p = x.nrows();
    let norm = x.norm();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let y = x / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(p, p);
    let mut sum = term.clone();
    for k in 1..30 {
        term = &term * &y / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

pub fn cholesky_lower(m: &DMatrix<f64>) -> DMatrix<f64> {
    let p = m.nrows();
    let mut l = DMatrix::<f64>::zeros(p, p);
    for j in 0..p {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        l[(j, j)] = d.sqrt();
        for i in j + 1..p {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    l
}

fn lower_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let p = l.nrows();
    let mut inv = DMatrix::<f64>::zeros(p, p);
    for c in 0..p {
        for i in 0..p {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[(i, k)] * inv[(k, c)];
            }
            inv[(i, c)] = s / l[(i, i)];
        }
    }
    inv
}

/// Eigenvalues of `G^-1 S` via `L^-1 S L^-T` with `G = L L^T`.
pub fn generalized_eigenvalues(g: &DMatrix<f64>, s: &DMatrix<f64>) -> Vec<f64> {
    let li = lower_inverse(&cholesky_lower(g));
    let m = &li * s * li.transpose();
    jacobi_eigen(&((&m + m.transpose()) * 0.5)).0
}

/// Principal square root of a matrix with positive real spectrum.
pub fn denman_beavers_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let p = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(p, p);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().unwrap();
        let zi = z.clone().try_inverse().unwrap();
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() < 1e-15 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma_lanczos(x: f64) -> f64 {
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma_lanczos(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + 7.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

pub fn permutations(z: usize) -> Vec<Vec<usize>> {
    if z == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for perm in permutations(z - 1) {
        for pos in 0..=perm.len() {
            let mut q = perm.clone();
            q.insert(pos, z);
            out.push(q);
        }
    }
    out
}

/// CDF of the density proportional to `exp(log_f(t))` on `(0, inf)`,
/// tabulated by composite Simpson on a log-spaced grid; returns
/// `(grid, cdf)` with `cdf` normalized to end at 1.
pub fn tabulated_cdf(log_f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> (Vec<f64>, Vec<f64>) {
    // Substitute t = e^x: integrand exp(log_f(e^x) + x).
    let (a, b) = (lo.ln(), hi.ln());
    let h = (b - a) / cells as f64;
    let g = |x: f64| log_f(x.exp()) + x;
    let peak = (0..=cells).map(|i| g(a + i as f64 * h)).fold(f64::NEG_INFINITY, f64::max);
    let f = |x: f64| (g(x) - peak).exp();
    let mut grid = vec![lo];
    let mut cdf = vec![0.0];
    let mut acc = 0.0;
    for i in 0..cells {
        let x0 = a + i as f64 * h;
        acc += h / 6.0 * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
        grid.push((x0 + h).exp());
        cdf.push(acc);
    }
    for c in cdf.iter_mut() {
        *c /= acc;
    }
    (grid, cdf)
}

/// Kolmogorov-Smirnov distance between sorted samples and a tabulated CDF
/// (linear interpolation in the table).
pub fn ks_statistic(sorted: &[f64], grid: &[f64], cdf: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    let mut j = 0;
    let mut worst: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        while j + 1 < grid.len() && grid[j + 1] < x {
            j += 1;
        }
        let f = if x <= grid[0] {
            0.0
        } else if j + 1 >= grid.len() {
            1.0
        } else {
            let w = (x - grid[j]) / (grid[j + 1] - grid[j]);
            cdf[j] + w * (cdf[j + 1] - cdf[j])
        };
        worst = worst.max((f - i as f64 / m).abs()).max((f - (i + 1) as f64 / m).abs());
    }
    worst
}
