mod common;

use mpsa::datagen::{add_gaussian_noise, cartoon_image};
use mpsa::denoise::{denoise_image, denoise_patches, DenoiseConfig, DenoiseMethod};
use mpsa::linalg::dot;
use mpsa::mixture::e_step;
use mpsa::{FitConfig, Strategy};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn single_component_contracts_toward_mean(seed in any::<u64>(), p in 1usize..8, sigma2 in 0.01f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(p, 1, &mut rng);
        let x = common::random_data(20, p, 3.0, &mut rng);
        let out = denoise_patches(&x, &model, sigma2).unwrap();
        let mean = model.components[0].mean();
        for (i, r) in x.iter_rows().enumerate() {
            let before: Vec<f64> = r.iter().zip(mean).map(|(a, b)| a - b).collect();
            let after: Vec<f64> = out.data.row(i).iter().zip(mean).map(|(a, b)| a - b).collect();
            prop_assert!(norm(&after) <= norm(&before) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn mixture_estimate_is_bounded_by_weighted_distances(seed in any::<u64>(), p in 1usize..8, c in 2usize..4, sigma2 in 0.01f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = common::random_model(p, c, &mut rng);
        let x = common::random_data(20, p, 3.0, &mut rng);
        let out = denoise_patches(&x, &model, sigma2).unwrap();
        let t = e_step(&x, &model).unwrap();
        for (i, r) in x.iter_rows().enumerate() {
            let mut center = vec![0.0; p];
            let mut bound = 0.0;
            for (k, comp) in model.components.iter().enumerate() {
                let w = t.get(k, i);
                for (m, v) in center.iter_mut().zip(comp.mean()) {
                    *m += w * v;
                }
                let d: Vec<f64> = r.iter().zip(comp.mean()).map(|(a, b)| a - b).collect();
                bound += w * norm(&d);
            }
            let after: Vec<f64> = out.data.row(i).iter().zip(&center).map(|(a, b)| a - b).collect();
            prop_assert!(norm(&after) <= bound * (1.0 + 1e-12) + 1e-12);
        }
    }
}

fn desk_config(method: DenoiseMethod, strategy: Strategy, c: usize) -> DenoiseConfig {
    DenoiseConfig {
        patch_size: 8,
        n_components: c,
        method,
        fit: FitConfig {
            strategy,
            ..FitConfig::default()
        },
        sigma: None,
    }
}

#[test]
fn full_gmm_degrades_with_more_components() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let clean = cartoon_image(128, 128, &mut rng);
    let noisy = add_gaussian_noise(&clean, 30.0 / 255.0, &mut rng);
    let psnr = |c| {
        denoise_image(&noisy, &desk_config(DenoiseMethod::GmmFull, Strategy::Fixed, c), Some(&clean))
            .unwrap()
            .report
            .psnr
            .unwrap()
    };
    let (few, many) = (psnr(3), psnr(20));
    assert!(many < few, "C=3: {few:.2} dB, C=20: {many:.2} dB");
}

#[test]
fn mpsa_denoising_improves_on_noisy_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let clean = cartoon_image(128, 128, &mut rng);
    let noisy = add_gaussian_noise(&clean, 30.0 / 255.0, &mut rng);
    let out = denoise_image(&noisy, &desk_config(DenoiseMethod::Mpsa, Strategy::BottomUp, 3), Some(&clean)).unwrap();
    let report = out.report;
    assert!(report.psnr.unwrap() >= report.noisy_psnr.unwrap());
    assert_eq!(report.compositions.len(), 3);
    assert!(report.sigma2 > 0.0);
}
