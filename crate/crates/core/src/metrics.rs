//! Clustering agreement, image fidelity and cross-validation folds.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

fn pairs(k: u64) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Adjusted Rand index between two labelings. Label values are arbitrary;
/// only the induced partitions matter. Two identical trivial partitions
/// score 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input(format!("label vectors differ in length ({} vs {})", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::input("label vectors are empty"));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&v| pairs(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| pairs(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| pairs(v)).sum();
    let total = pairs(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Mean squared difference of two equally long pixel arrays.
pub fn mse(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::input(format!("images differ in size ({} vs {})", x.len(), y.len())));
    }
    if x.is_empty() {
        return Err(Error::input("empty image"));
    }
    Ok(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64)
}

/// `−10 log₁₀ MSE` for pixels in `[0, 1]`; `+∞` for identical images.
pub fn psnr(x: &[f64], y: &[f64]) -> Result<f64> {
    let m = mse(x, y)?;
    Ok(if m == 0.0 { f64::INFINITY } else { -10.0 * m.log10() })
}

/// Assigns every sample to one of `k` folds so that each class is spread as
/// evenly as possible. Returns the fold index per sample.
pub fn stratified_folds(labels: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::input("cross-validation needs at least two folds"));
    }
    if labels.len() < k {
        return Err(Error::input(format!("{} samples for {k} folds", labels.len())));
    }
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for members in classes.values_mut() {
        members.shuffle(rng);
        for &i in members.iter() {
            folds[i] = next;
            next = (next + 1) % k;
        }
    }
    Ok(folds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn brute_force_ari(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut both, mut only_a, mut only_b, mut total) = (0.0, 0.0, 0.0, 0.0);
        for i in 0..n {
            for j in i + 1..n {
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                total += 1.0;
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    only_a += 1.0;
                }
                if sb {
                    only_b += 1.0;
                }
            }
        }
        if total == 0.0 {
            return 1.0;
        }
        let expected = only_a * only_b / total;
        let max = (only_a + only_b) / 2.0;
        if max == expected {
            1.0
        } else {
            (both - expected) / (max - expected)
        }
    }

    #[test]
    fn ari_examples() {
        assert_eq!(ari(&[0, 0, 1, 1], &[5, 5, 2, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[1, 1, 1, 1], &[1, 2, 3, 4]).unwrap(), 0.0);
        assert!((ari(&[1, 1, 2, 2], &[1, 2, 1, 2]).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(ari(&[3, 3, 3], &[0, 0, 0]).unwrap(), 1.0);
        assert!(ari(&[1, 2], &[1]).is_err());
    }

    #[test]
    fn psnr_examples() {
        let a = [0.2, 0.5, 0.9];
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
        let b: Vec<f64> = a.iter().map(|v| v - 0.1).collect();
        assert!((mse(&a, &b).unwrap() - 0.01).abs() < 1e-15);
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-12);
        assert_eq!(psnr(&[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn folds_are_balanced() {
        let labels: Vec<usize> = (0..100).map(|i| usize::from(i % 4 == 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let folds = stratified_folds(&labels, 5, &mut rng).unwrap();
        for f in 0..5 {
            let members: Vec<usize> = (0..100).filter(|&i| folds[i] == f).collect();
            assert_eq!(members.len(), 20);
            assert_eq!(members.iter().filter(|&&i| labels[i] == 1).count(), 5);
        }
    }

    proptest! {
        #[test]
        fn ari_matches_pair_counting(
            pairs in prop::collection::vec((0usize..4, 0usize..5), 1..30),
            perm in Just([3usize, 0, 4, 1, 2]),
        ) {
            let a: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let v = ari(&a, &b).unwrap();
            prop_assert!((v - brute_force_ari(&a, &b)).abs() <= 1e-12);
            prop_assert!((v - ari(&b, &a).unwrap()).abs() <= 1e-12);
            let relabeled: Vec<usize> = b.iter().map(|&l| perm[l]).collect();
            prop_assert!((v - ari(&a, &relabeled).unwrap()).abs() <= 1e-12);
            prop_assert!((-1.0..=1.0 + 1e-12).contains(&v));
        }

        #[test]
        fn psnr_decreases_with_mse(d1 in 0.001f64..0.5, extra in 0.001f64..0.5) {
            let x = [0.0; 4];
            let p1 = psnr(&x, &[d1; 4]).unwrap();
            let p2 = psnr(&x, &[d1 + extra; 4]).unwrap();
            prop_assert!(p2 < p1);
        }
    }
}
