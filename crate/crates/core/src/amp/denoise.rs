//! Strong-edge denoisers.
//!
//! Both denoisers see the AMP pseudo-channel `r = u + CN(0, tau)` for the
//! columns belonging to one event and return exact posteriors under the
//! hypothesis mixture: `H_0` (every column silent) or `H_r` (column `r`
//! carries a CN(0, v) coefficient, the others are silent).

use num_complex::Complex64;

use super::BlockPrior;

/// Denoised coefficients of one codebook block plus the event posterior.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockEstimate {
    pub mean: Vec<Complex64>,
    pub var: Vec<f64>,
    /// Posterior over `0..=R`.
    pub posterior: Vec<f64>,
}

/// Denoised coefficients of every block observing one event (SSC).
#[derive(Clone, Debug, PartialEq)]
pub struct EventEstimate {
    pub means: Vec<Vec<Complex64>>,
    pub vars: Vec<Vec<f64>>,
    pub posterior: Vec<f64>,
}

/// Log-likelihood ratio of "column active with CN(0, v)" against "silent"
/// for one pseudo-channel observation.
#[inline]
pub fn active_log_ratio(r: Complex64, tau: f64, v: f64) -> f64 {
    r.norm_sqr() * v / (tau * (tau + v)) - (v / tau).ln_1p()
}

/// Normalized `exp` of log weights; `-inf` entries get zero mass.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    w
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Posterior mean and variance of an entry that is active with probability `weight`.
#[inline]
fn entry_moments(weight: f64, r: Complex64, tau: f64, v: f64) -> (Complex64, f64) {
    let gain = v / (v + tau);
    let mean = r * (weight * gain);
    let second = weight * (v * tau / (v + tau) + (r * gain).norm_sqr());
    (mean, (second - mean.norm_sqr()).max(0.0))
}

/// JSC denoiser for one event block of `R` shared-codeword coefficients.
pub fn denoise_jsc_block(r: &[Complex64], tau: &[f64], prior: &BlockPrior) -> BlockEstimate {
    debug_assert_eq!(r.len(), tau.len());
    debug_assert_eq!(prior.activity.len(), r.len() + 1);
    let v = prior.variance;
    let logits: Vec<f64> = prior
        .activity
        .iter()
        .enumerate()
        .map(|(value, &p)| {
            let evidence = if value == 0 {
                0.0
            } else {
                active_log_ratio(r[value - 1], tau[value - 1], v)
            };
            p.ln() + evidence
        })
        .collect();
    let posterior = softmax(&logits);
    let (mean, var) = r
        .iter()
        .zip(tau)
        .zip(&posterior[1..])
        .map(|((&ri, &ti), &w)| entry_moments(w, ri, ti, v))
        .unzip();
    BlockEstimate { mean, var, posterior }
}

/// SSC denoiser: couples every device block of one event to the shared event state.
///
/// With `prior.local_error_prob > 0` the device evidence is marginalized over
/// the symmetric confusion between the event state and the local estimate.
pub fn denoise_ssc_event(
    r_blocks: &[&[Complex64]],
    tau_blocks: &[&[f64]],
    prior: &BlockPrior,
) -> EventEstimate {
    debug_assert_eq!(r_blocks.len(), tau_blocks.len());
    let values = prior.activity.len() - 1;
    let mut mean = vec![Complex64::new(0.0, 0.0); r_blocks.len() * values];
    let mut var = vec![0.0; r_blocks.len() * values];
    let posterior = ssc_event_into(
        |k| (r_blocks[k], tau_blocks[k]),
        r_blocks.len(),
        prior,
        &mut mean,
        &mut var,
    );
    EventEstimate {
        means: mean.chunks(values).map(<[_]>::to_vec).collect(),
        vars: var.chunks(values).map(<[_]>::to_vec).collect(),
        posterior,
    }
}

/// Allocation-light core of [`denoise_ssc_event`]: device `k`'s block is
/// `block(k)`, and its moments land in `mean`/`var` at `k * R..(k + 1) * R`.
pub(crate) fn ssc_event_into<'b>(
    block: impl Fn(usize) -> (&'b [Complex64], &'b [f64]),
    devices: usize,
    prior: &BlockPrior,
    mean: &mut [Complex64],
    var: &mut [f64],
) -> Vec<f64> {
    let v = prior.variance;
    let states = prior.activity.len();
    let values = states - 1;
    // ll[k * states + e]: log-likelihood of device k sending estimate e (0 = silent)
    let mut ll = vec![0.0; devices * states];
    for k in 0..devices {
        let (r, tau) = block(k);
        for i in 0..values {
            ll[k * states + i + 1] = active_log_ratio(r[i], tau[i], v);
        }
    }

    let p_err = prior.local_error_prob;
    let confusion = |estimate: usize, state: usize| -> f64 {
        if estimate == state {
            1.0 - p_err
        } else {
            p_err / values as f64
        }
    };

    // device evidence for each event state, after the confusion channel
    let ll_state: Option<Vec<f64>> = (p_err > 0.0).then(|| {
        (0..devices * states)
            .map(|idx| {
                let (k, state) = (idx / states, idx % states);
                let row = &ll[k * states..(k + 1) * states];
                log_sum_exp((0..states).map(|e| confusion(e, state).ln() + row[e]))
            })
            .collect()
    });
    let evidence = ll_state.as_deref().unwrap_or(&ll);

    let logits: Vec<f64> = (0..states)
        .map(|state| {
            prior.activity[state].ln() + (0..devices).map(|k| evidence[k * states + state]).sum::<f64>()
        })
        .collect();
    let posterior = softmax(&logits);

    for k in 0..devices {
        let (r, tau) = block(k);
        for i in 0..values {
            let e = i + 1;
            let weight = if p_err > 0.0 {
                // q_k(e) = sum_state pi(state) P(e | state) exp(ll_k(e) - ll'_k(state))
                (0..states)
                    .filter(|&state| posterior[state] > 0.0)
                    .map(|state| {
                        posterior[state]
                            * confusion(e, state)
                            * (ll[k * states + e] - evidence[k * states + state]).exp()
                    })
                    .sum::<f64>()
                    .min(1.0)
            } else {
                posterior[e]
            };
            let (m, s) = entry_moments(weight, r[i], tau[i], v);
            mean[k * values + i] = m;
            var[k * values + i] = s;
        }
    }
    posterior
}
