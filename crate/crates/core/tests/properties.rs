use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use tbma_core::amp::{denoise_jsc_block, denoise_ssc_event, BlockPrior, Gamp};
use tbma_core::codebooks::gen_orthogonal_codebooks;
use tbma_core::{
    assemble_system_matrix, encode, exact_event_posteriors, gen_gaussian_codebooks, local_estimates,
    sample_channel, sample_events, transmit, AmpSettings, Coding, ScenarioConfig,
};

fn complex() -> impl Strategy<Value = Complex64> {
    (-4.0..4.0f64, -4.0..4.0f64).prop_map(|(a, b)| Complex64::new(a, b))
}

fn block(values: usize) -> impl Strategy<Value = (Vec<Complex64>, Vec<f64>)> {
    (
        prop::collection::vec(complex(), values),
        prop::collection::vec(1e-3..10.0f64, values),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn jsc_denoiser_normalizes_and_shrinks(
        (r, tau) in (1usize..5).prop_flat_map(block),
        rho in 0.0..=1.0f64,
        v in 0.1..300.0f64,
    ) {
        let prior = BlockPrior::uniform(rho, r.len(), v).unwrap();
        let est = denoise_jsc_block(&r, &tau, &prior);
        prop_assert!((est.posterior.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for i in 0..r.len() {
            prop_assert!(est.mean[i].norm() <= r[i].norm() * (1.0 + 1e-12));
            prop_assert!(est.var[i] >= 0.0);
        }
    }

    #[test]
    fn posteriors_are_phase_invariant(
        (r, tau) in (1usize..4).prop_flat_map(block),
        theta in 0.0..std::f64::consts::TAU,
        devices in 1usize..4,
    ) {
        let prior = BlockPrior::uniform(0.2, r.len(), 2.0).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let turned: Vec<Complex64> = r.iter().map(|x| x * rot).collect();
        let a = denoise_jsc_block(&r, &tau, &prior);
        let b = denoise_jsc_block(&turned, &tau, &prior);
        for (p, q) in a.posterior.iter().zip(&b.posterior) {
            prop_assert!((p - q).abs() < 1e-12);
        }
        for (m, n) in a.mean.iter().zip(&b.mean) {
            prop_assert!((m * rot - n).norm() < 1e-9);
        }
        let blocks: Vec<&[Complex64]> = (0..devices).map(|_| r.as_slice()).collect();
        let rotated: Vec<&[Complex64]> = (0..devices).map(|_| turned.as_slice()).collect();
        let taus: Vec<&[f64]> = (0..devices).map(|_| tau.as_slice()).collect();
        let c = denoise_ssc_event(&blocks, &taus, &prior);
        let d = denoise_ssc_event(&rotated, &taus, &prior);
        for (p, q) in c.posterior.iter().zip(&d.posterior) {
            prop_assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn encoder_matches_direct_sum(
        seed in any::<u64>(),
        events in 1usize..5,
        values in 1usize..4,
        group in 1usize..4,
        ssc in any::<bool>(),
    ) {
        let coding = if ssc { Coding::Ssc } else { Coding::Jsc };
        let config = ScenarioConfig::disjoint(events, values, group, 5, 0.5, 10.0, coding).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let books = gen_gaussian_codebooks(&config, &mut rng);
        let system = assemble_system_matrix(&books, &config).unwrap();
        let xi = sample_events(&config, &mut rng);
        let h = sample_channel(&config, &mut rng);
        let est = local_estimates(&xi, &config, &mut rng);
        let au = system.apply(&encode(&xi, &est, &h, &system).unwrap().u);
        // x = sum_k sum_m h_k c_{k,m}(estimate)
        let mut direct = vec![Complex64::new(0.0, 0.0); config.codeword_len];
        for k in 0..config.devices {
            for m in 0..events {
                if !config.observes(k, m) {
                    continue;
                }
                if let Some(word) = books.codeword(k, m, est.get(k, m)) {
                    for (x, c) in direct.iter_mut().zip(word) {
                        *x += h[k] * c;
                    }
                }
            }
        }
        for (a, b) in au.iter().zip(&direct) {
            prop_assert!((a - b).norm() < 1e-10);
        }
    }
}

#[test]
fn first_pass_is_the_matched_filter() {
    let config = ScenarioConfig::disjoint(3, 2, 4, 8, 0.3, 6.0, Coding::Jsc).unwrap();
    let system = assemble_system_matrix(&gen_orthogonal_codebooks(&config).unwrap(), &config).unwrap();
    let priors = BlockPrior::for_scenario(&config).unwrap();
    let settings = AmpSettings::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let xi = sample_events(&config, &mut rng);
        let h = sample_channel(&config, &mut rng);
        let est = local_estimates(&xi, &config, &mut rng);
        let state = encode(&xi, &est, &h, &system).unwrap();
        let signal = transmit(&state, &system, config.noise_variance(), &mut rng).unwrap();
        let mut gamp = Gamp::new(&signal, &system, &priors, &settings).unwrap();
        let first = gamp.pseudo_channel();
        for col in 0..system.cols() {
            let mf: Complex64 = system
                .column(col)
                .iter()
                .zip(&signal.y)
                .map(|(a, y)| a.conj() * y)
                .sum::<Complex64>()
                / config.energy;
            assert!((first.r[col] - mf).norm() < 1e-10);
        }

        // With orthogonal columns the matched filter is a sufficient statistic:
        // the denoiser at tau = sigma^2 / E reproduces the exact posterior.
        let exact = exact_event_posteriors(&signal, &system, &config).unwrap();
        for (m, prior) in priors.iter().enumerate() {
            let start = system.event_blocks(m).next().unwrap().start;
            let r: Vec<Complex64> = (0..config.values)
                .map(|i| {
                    system
                        .column(start + i)
                        .iter()
                        .zip(&signal.y)
                        .map(|(a, y)| a.conj() * y)
                        .sum::<Complex64>()
                        / config.energy
                })
                .collect();
            let tau = vec![config.noise_variance() / config.energy; config.values];
            let post = denoise_jsc_block(&r, &tau, prior).posterior;
            for (p, q) in post.iter().zip(&exact[m]) {
                assert!((p - q).abs() < 1e-6, "{p} vs {q}");
            }
        }
    }
}
