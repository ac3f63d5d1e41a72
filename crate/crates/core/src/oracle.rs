//! Exact Bayesian reference detector by enumeration of every event-state
//! hypothesis. Only feasible for small `(R + 1)^M`.
//!
//! Given `xi`, the received vector is zero-mean complex Gaussian with
//! covariance `sigma^2 I + sum_c v_c a_c a_c^H` over the columns switched on
//! by `xi`, so each hypothesis has a closed-form marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use crate::amp::decide;
use crate::codebooks::SystemMatrix;
use crate::error::{Error, Result};
use crate::model::{Coding, EventVector, ReceivedSignal, ScenarioConfig};

pub const DEFAULT_BUDGET: u128 = 1_000_000;

/// Smallest noise variance used in the covariance; below it the Cholesky
/// factor loses positive definiteness in double precision.
const NOISE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct ExactPosterior {
    /// `M` rows of per-event marginal posteriors over `0..=R`.
    pub marginals: Vec<Vec<f64>>,
    /// Jointly most probable hypothesis (diagnostic).
    pub joint_map: EventVector,
}

/// Number of hypotheses the enumeration visits.
pub fn hypothesis_count(config: &ScenarioConfig) -> u128 {
    (config.values as u128 + 1).saturating_pow(config.events as u32)
}

pub fn check_budget(config: &ScenarioConfig, budget: u128) -> Result<()> {
    let needed = hypothesis_count(config);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    Ok(())
}

/// `log p(y | xi)` up to a constant shared by all hypotheses.
fn log_likelihood(
    y: &DVector<Complex64>,
    system: &SystemMatrix,
    sigma2: f64,
    active: &[(usize, f64)],
) -> Result<f64> {
    let n = system.rows();
    let mut cov = DMatrix::<Complex64>::identity(n, n) * Complex64::new(sigma2, 0.0);
    for &(col, v) in active {
        let a = DVector::from_column_slice(system.column(col));
        cov.gerc(Complex64::new(v, 0.0), &a, &a, Complex64::new(1.0, 0.0));
    }
    let chol = Cholesky::new(cov).ok_or(Error::NotPositiveDefinite)?;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.re.ln()).sum();
    let z = chol.l().solve_lower_triangular(y).ok_or(Error::NotPositiveDefinite)?;
    let quad: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    Ok(-quad - log_det)
}

/// Exact per-event posteriors (and the joint MAP) by full enumeration.
pub fn exact_posterior(
    signal: &ReceivedSignal,
    system: &SystemMatrix,
    config: &ScenarioConfig,
    budget: u128,
) -> Result<ExactPosterior> {
    check_budget(config, budget)?;
    if config.local_error_prob > 0.0 {
        return Err(Error::config(
            "local_error_prob",
            "the exact oracle assumes perfect local estimates",
        ));
    }
    if signal.y.len() != system.rows() || system.events() != config.events {
        return Err(Error::Dimension("signal, system matrix and config disagree".into()));
    }
    let (events, values) = (config.events, config.values);
    let groups = config.groups();
    let log_prior: Vec<f64> = config.event_prior().iter().map(|p| p.ln()).collect();
    let y = DVector::from_column_slice(&signal.y);

    let total = hypothesis_count(config) as usize;
    let mut log_weights = Vec::with_capacity(total);
    let mut state = vec![0usize; events];
    let mut active = Vec::new();
    for _ in 0..total {
        let lp: f64 = state.iter().map(|&x| log_prior[x]).sum();
        let weight = if lp == f64::NEG_INFINITY {
            lp
        } else {
            active.clear();
            for (m, &x) in state.iter().enumerate() {
                if x == 0 {
                    continue;
                }
                for block in system.event_blocks(m) {
                    let v = match config.coding {
                        Coding::Jsc => groups[m].len() as f64,
                        Coding::Ssc => 1.0,
                    };
                    active.push((block.start + x - 1, v));
                }
            }
            lp + log_likelihood(&y, system, signal.sigma2.max(NOISE_FLOOR), &active)?
        };
        log_weights.push(weight);
        // odometer increment, event 0 fastest
        for x in state.iter_mut() {
            *x += 1;
            if *x <= values {
                break;
            }
            *x = 0;
        }
    }

    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut marginals = vec![vec![0.0; values + 1]; events];
    let mut norm = 0.0;
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (h, &lw) in log_weights.iter().enumerate() {
        if lw > best.0 {
            best = (lw, h);
        }
        let w = (lw - max).exp();
        norm += w;
        let mut idx = h;
        for row in marginals.iter_mut() {
            row[idx % (values + 1)] += w;
            idx /= values + 1;
        }
    }
    for row in &mut marginals {
        for p in row.iter_mut() {
            *p /= norm;
        }
    }
    let mut idx = best.1;
    let joint = (0..events)
        .map(|_| {
            let x = idx % (values + 1);
            idx /= values + 1;
            x
        })
        .collect();
    Ok(ExactPosterior {
        marginals,
        joint_map: EventVector::new(joint, values)?,
    })
}

/// Exact per-event posterior matrix.
pub fn exact_event_posteriors(
    signal: &ReceivedSignal,
    system: &SystemMatrix,
    config: &ScenarioConfig,
) -> Result<Vec<Vec<f64>>> {
    Ok(exact_posterior(signal, system, config, DEFAULT_BUDGET)?.marginals)
}

/// Per-event marginal MAP, same tie rule as the AMP detector.
pub fn exact_map_detect(posteriors: &[Vec<f64>]) -> EventVector {
    decide(posteriors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{encode, transmit};
    use crate::codebooks::{assemble_system_matrix, gen_gaussian_codebooks, gen_orthogonal_codebooks};
    use crate::model::{local_estimates, sample_channel, sample_events};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trial(config: &ScenarioConfig, sys: &SystemMatrix, rng: &mut ChaCha8Rng) -> (EventVector, ReceivedSignal) {
        let xi = sample_events(config, rng);
        let est = local_estimates(&xi, config, rng);
        let h = sample_channel(config, rng);
        let state = encode(&xi, &est, &h, sys).unwrap();
        (xi, transmit(&state, sys, config.noise_variance(), rng).unwrap())
    }

    #[test]
    fn two_hypothesis_closed_form() {
        // M = 1, R = 1, unit-energy column a, G devices: y ~ CN(0, s2 I + G a a^H) or CN(0, s2 I).
        // Project on a: only |a^H y|^2 matters, LR = s2/(s2+G) exp(|a^H y|^2 G / (s2 (s2 + G))).
        let config = ScenarioConfig::disjoint(1, 1, 3, 4, 0.3, 5.0, Coding::Jsc).unwrap();
        let sys = assemble_system_matrix(&gen_orthogonal_codebooks(&config).unwrap(), &config).unwrap();
        let s2 = config.noise_variance();
        let g = 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let (_, signal) = trial(&config, &sys, &mut rng);
            let proj: Complex64 = sys.column(0).iter().zip(&signal.y).map(|(a, y)| a.conj() * y).sum();
            let log_lr = (s2 / (s2 + g)).ln() + proj.norm_sqr() * g / (s2 * (s2 + g));
            let log_odds = (0.3f64 / 0.7).ln() + log_lr;
            let p1 = 1.0 / (1.0 + (-log_odds).exp());
            let post = exact_event_posteriors(&signal, &sys, &config).unwrap();
            assert!((post[0][1] - p1).abs() < 1e-10, "{} vs {p1}", post[0][1]);
        }
    }

    #[test]
    fn huge_noise_returns_prior() {
        let config = ScenarioConfig::disjoint(3, 2, 2, 5, 0.3, -120.0, Coding::Ssc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sys = assemble_system_matrix(&gen_gaussian_codebooks(&config, &mut rng), &config).unwrap();
        let (_, signal) = trial(&config, &sys, &mut rng);
        let post = exact_event_posteriors(&signal, &sys, &config).unwrap();
        for row in &post {
            for (p, q) in row.iter().zip(config.event_prior()) {
                assert!((p - q).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn rows_are_normalized() {
        let config = ScenarioConfig::disjoint(3, 2, 2, 6, 0.3, 12.0, Coding::Jsc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let sys = assemble_system_matrix(&gen_gaussian_codebooks(&config, &mut rng), &config).unwrap();
            let (_, signal) = trial(&config, &sys, &mut rng);
            let post = exact_posterior(&signal, &sys, &config, DEFAULT_BUDGET).unwrap();
            for row in &post.marginals {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_free_orthogonal_is_error_free() {
        let config = ScenarioConfig::disjoint(3, 2, 2, 6, 0.3, 200.0, Coding::Jsc).unwrap();
        let sys = assemble_system_matrix(&gen_orthogonal_codebooks(&config).unwrap(), &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let (xi, signal) = trial(&config, &sys, &mut rng);
            let post = exact_event_posteriors(&signal, &sys, &config).unwrap();
            assert_eq!(exact_map_detect(&post), xi);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let config = ScenarioConfig::disjoint(12, 2, 1, 6, 0.3, 12.0, Coding::Jsc).unwrap();
        assert_eq!(hypothesis_count(&config), 531_441);
        assert!(check_budget(&config, DEFAULT_BUDGET).is_ok());
        let err = check_budget(&config, 1000).unwrap_err();
        assert!(err.to_string().contains("budget is 1000"), "{err}");
    }

    #[test]
    fn joint_map_is_a_valid_hypothesis() {
        let config = ScenarioConfig::disjoint(2, 1, 1, 8, 0.1, 12.0, Coding::Ssc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sys = assemble_system_matrix(&gen_gaussian_codebooks(&config, &mut rng), &config).unwrap();
        let (_, signal) = trial(&config, &sys, &mut rng);
        let post = exact_posterior(&signal, &sys, &config, DEFAULT_BUDGET).unwrap();
        assert_eq!(post.joint_map.len(), 2);
    }

    #[test]
    fn tiny_noise_cholesky_succeeds() {
        let config = ScenarioConfig::disjoint(3, 1, 2, 4, 0.5, 120.0, Coding::Ssc).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = assemble_system_matrix(&gen_gaussian_codebooks(&config, &mut rng), &config).unwrap();
        let (_, signal) = trial(&config, &sys, &mut rng);
        assert!(config.noise_variance() >= 1e-12);
        assert!(exact_event_posteriors(&signal, &sys, &config).is_ok());
    }
}
