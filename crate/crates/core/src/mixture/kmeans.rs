use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{FitConfig, Responsibilities};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Outcome of the best k-means restart.
#[derive(Debug, Clone)]
pub struct KMeansResult {
    /// 0-based cluster index per sample.
    pub labels: Vec<usize>,
    /// `k×p` cluster centers.
    pub centers: Matrix,
    /// Within-cluster sum of squares.
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn count_distinct(x: &Matrix, cap: usize) -> usize {
    let mut rows: Vec<&[f64]> = x.iter_rows().collect();
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut count = usize::from(!rows.is_empty());
    for w in rows.windows(2) {
        if w[0] != w[1] {
            count += 1;
            if count >= cap {
                break;
            }
        }
    }
    count
}

fn seed_plus_plus(x: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = x.rows();
    let mut centers = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centers.row_mut(0).copy_from_slice(x.row(first));
    let mut d2: Vec<f64> = x.iter_rows().map(|r| sq_dist(r, centers.row(0))).collect();
    for j in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            // Guard against rounding landing on an already chosen point.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.row_mut(j).copy_from_slice(x.row(pick));
        for (i, r) in x.iter_rows().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centers.row(j)));
        }
    }
    centers
}

fn assign(x: &Matrix, centers: &Matrix, labels: &mut [usize]) -> (bool, f64) {
    let mut changed = false;
    let mut inertia = 0.0;
    for (i, r) in x.iter_rows().enumerate() {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, c) in centers.iter_rows().enumerate() {
            let d = sq_dist(r, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        if labels[i] != best {
            labels[i] = best;
            changed = true;
        }
        inertia += best_d;
    }
    (changed, inertia)
}

fn update_centers(x: &Matrix, labels: &[usize], centers: &mut Matrix) {
    let k = centers.rows();
    let p = x.cols();
    let mut sums = Matrix::zeros(k, p);
    let mut counts = vec![0usize; k];
    for (r, &l) in x.iter_rows().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums.row_mut(l).iter_mut().zip(r) {
            *s += v;
        }
    }
    for j in 0..k {
        if counts[j] == 0 {
            // Move an empty cluster onto the point farthest from its center.
            let far = x
                .iter_rows()
                .zip(labels)
                .map(|(r, &l)| sq_dist(r, centers.row(l)))
                .enumerate()
                .fold((0, -1.0), |b, (i, d)| if d > b.1 { (i, d) } else { b })
                .0;
            centers.row_mut(j).copy_from_slice(x.row(far));
            continue;
        }
        let inv = 1.0 / counts[j] as f64;
        for (c, s) in centers.row_mut(j).iter_mut().zip(sums.row(j)) {
            *c = s * inv;
        }
    }
}

fn lloyd(x: &Matrix, k: usize, max_iter: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let mut centers = seed_plus_plus(x, k, rng);
    let mut labels = vec![usize::MAX; x.rows()];
    let (_, mut inertia) = assign(x, &centers, &mut labels);
    for _ in 0..max_iter {
        update_centers(x, &labels, &mut centers);
        let (changed, new_inertia) = assign(x, &centers, &mut labels);
        inertia = new_inertia;
        if !changed {
            break;
        }
    }
    KMeansResult {
        labels,
        centers,
        inertia,
    }
}

/// k-means++ seeding followed by Lloyd iterations; the restart with the
/// smallest inertia is kept (the earliest on ties).
pub fn kmeans(x: &Matrix, k: usize, max_iter: usize, restarts: usize, rng: &mut ChaCha8Rng) -> Result<KMeansResult> {
    if k == 0 {
        return Err(Error::input("k-means needs at least one cluster"));
    }
    if x.rows() < k {
        return Err(Error::input(format!("{} samples for {k} clusters", x.rows())));
    }
    if count_distinct(x, k) < k {
        return Err(Error::input(format!("fewer than {k} distinct samples")));
    }
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(x, k, max_iter, rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Hard responsibilities from k-means.
pub fn kmeans_init(x: &Matrix, n_components: usize, config: &FitConfig, rng: &mut ChaCha8Rng) -> Result<Responsibilities> {
    let res = kmeans(x, n_components, config.kmeans_max_iter, config.kmeans_restarts, rng)?;
    Responsibilities::from_labels(&res.labels, n_components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn two_clouds(rng: &mut ChaCha8Rng) -> (Matrix, Vec<usize>) {
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for i in 0..40 {
            let c = i % 2;
            let off = if c == 0 { -50.0 } else { 50.0 };
            rows.push(vec![off + rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
            truth.push(c);
        }
        (Matrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn single_cluster() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (x, _) = two_clouds(&mut rng);
        let r = kmeans(&x, 1, 300, 3, &mut rng).unwrap();
        assert!(r.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn separated_clouds_are_recovered() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (x, truth) = two_clouds(&mut rng);
            let r = kmeans(&x, 2, 300, 10, &mut rng).unwrap();
            let flip = r.labels[0] != truth[0];
            for (l, t) in r.labels.iter().zip(&truth) {
                assert_eq!(*l != *t, flip);
            }
        }
    }

    #[test]
    fn one_cluster_per_point() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![5.0], vec![-2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = kmeans(&x, 4, 300, 2, &mut rng).unwrap();
        assert_eq!(r.inertia, 0.0);
        let mut l = r.labels.clone();
        l.sort();
        assert_eq!(l, vec![0, 1, 2, 3]);
    }

    #[test]
    fn too_few_distinct_points() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(kmeans(&x, 2, 300, 1, &mut rng).is_err());
        assert!(kmeans(&x, 1, 300, 1, &mut rng).is_ok());
    }
}
