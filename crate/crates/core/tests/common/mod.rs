//! Reference implementations that materialize covariances and invert them
//! explicitly. They share no numerical code with the library beyond the
//! model types.

#![allow(dead_code)]

use std::f64::consts::PI;

use mpsa::datagen::{haar_orthogonal, standard_normal};
use mpsa::mixture::{MpsaModel, PsaComponent};
use mpsa::{Composition, Matrix, PsaEstimate};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type Dense = Vec<Vec<f64>>;

pub fn dense(m: &Matrix) -> Dense {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

/// `Σ_k λ_k Q_k Q_kᵀ` by explicit sums over basis columns.
pub fn covariance(est: &PsaEstimate) -> Dense {
    let p = est.mean.len();
    let mut out = vec![vec![0.0; p]; p];
    let mut j = 0;
    for (&g, &l) in est.composition.parts().iter().zip(&est.block_eigenvalues) {
        for col in j..j + g {
            for a in 0..p {
                for b in 0..p {
                    out[a][b] += l * est.basis[(a, col)] * est.basis[(b, col)];
                }
            }
        }
        j += g;
    }
    out
}

/// Gauss–Jordan inverse with partial pivoting.
pub fn inverse(a: &Dense) -> Dense {
    let n = a.len();
    let mut m: Dense = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        for v in &mut m[col] {
            *v /= d;
        }
        for r in 0..n {
            if r != col {
                let f = m[r][col];
                if f != 0.0 {
                    for c in 0..2 * n {
                        m[r][c] -= f * m[col][c];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Log-determinant from a Cholesky factorization.
pub fn log_det(a: &Dense) -> f64 {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                l[i][i] = (a[i][i] - s).sqrt();
                acc += 2.0 * l[i][i].ln();
            } else {
                l[i][j] = (a[i][j] - s) / l[j][j];
            }
        }
    }
    acc
}

pub fn quad(inv: &Dense, v: &[f64]) -> f64 {
    let n = v.len();
    (0..n).map(|a| (0..n).map(|b| v[a] * inv[a][b] * v[b]).sum::<f64>()).sum()
}

/// `ln N(x | μ, Σ)`.
pub fn log_density(x: &[f64], mean: &[f64], cov: &Dense) -> f64 {
    let p = x.len() as f64;
    let d: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
    -0.5 * (p * (2.0 * PI).ln() + log_det(cov) + quad(&inverse(cov), &d))
}

/// `π_c N(x | μ_c, Σ_c)` for every component.
pub fn joint_densities(x: &[f64], model: &MpsaModel) -> Vec<f64> {
    model
        .components
        .iter()
        .map(|c| c.weight * log_density(x, c.mean(), &covariance(&c.estimate)).exp())
        .collect()
}

pub fn mixture_loglik(x: &Matrix, model: &MpsaModel) -> f64 {
    x.iter_rows()
        .map(|r| joint_densities(r, model).iter().sum::<f64>().ln())
        .sum()
}

/// Bayes-rule posteriors, one vector per sample.
pub fn posteriors(x: &Matrix, model: &MpsaModel) -> Vec<Vec<f64>> {
    x.iter_rows()
        .map(|r| {
            let j = joint_densities(r, model);
            let s: f64 = j.iter().sum();
            j.iter().map(|v| v / s).collect()
        })
        .collect()
}

/// `Σ_c w_c (μ_c + (I − σ² Σ_c⁻¹)(x − μ_c))`.
pub fn denoise(x: &Matrix, model: &MpsaModel, sigma2: f64) -> Vec<Vec<f64>> {
    let post = posteriors(x, model);
    x.iter_rows()
        .zip(post)
        .map(|(r, w)| {
            let p = r.len();
            let mut out = vec![0.0; p];
            for (c, comp) in model.components.iter().enumerate() {
                let inv = inverse(&covariance(&comp.estimate));
                let d: Vec<f64> = r.iter().zip(comp.mean()).map(|(a, b)| a - b).collect();
                for a in 0..p {
                    let shrunk: f64 = (0..p).map(|b| sigma2 * inv[a][b] * d[b]).sum();
                    out[a] += w[c] * (comp.mean()[a] + d[a] - shrunk);
                }
            }
            out
        })
        .collect()
}

/// Random composition of `p`.
pub fn random_composition(p: usize, rng: &mut ChaCha8Rng) -> Composition {
    let mut parts = Vec::new();
    let mut run = 1;
    for _ in 0..p - 1 {
        if rng.random::<bool>() {
            parts.push(run);
            run = 1;
        } else {
            run += 1;
        }
    }
    parts.push(run);
    Composition::new(parts).unwrap()
}

/// Random valid model with spread-out components.
pub fn random_model(p: usize, c: usize, rng: &mut ChaCha8Rng) -> MpsaModel {
    let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let components = raw
        .iter()
        .map(|w| {
            let g = random_composition(p, rng);
            let mut l = rng.random_range(0.5..3.0);
            let lambdas = (0..g.len())
                .map(|_| {
                    let v = l;
                    l *= rng.random_range(0.2..0.9);
                    v
                })
                .collect();
            PsaComponent {
                weight: w / total,
                estimate: PsaEstimate {
                    composition: g,
                    block_eigenvalues: lambdas,
                    basis: haar_orthogonal(p, rng),
                    mean: (0..p).map(|_| rng.random_range(-2.0..2.0)).collect(),
                },
            }
        })
        .collect();
    MpsaModel::new(components, 0.0).unwrap()
}

pub fn random_data(n: usize, p: usize, scale: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let v = (0..n * p).map(|_| scale * standard_normal(rng)).collect();
    Matrix::from_row_major(n, p, v).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
