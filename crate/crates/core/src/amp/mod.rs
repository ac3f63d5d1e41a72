//! Hybrid AMP detector.
//!
//! A sum-product GAMP recursion with an AWGN output channel handles the dense
//! mixing through `A` (the weak edges). Once per iteration the resulting
//! per-column pseudo-channels are handed to a structured denoiser (the strong
//! edges) that ties each event's columns to its state `xi_m`: one block per
//! event for JSC, every observing device's block for SSC.

mod denoise;

pub use denoise::{
    active_log_ratio, denoise_jsc_block, denoise_ssc_event, softmax, BlockEstimate, EventEstimate,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::codebooks::SystemMatrix;
use crate::error::{Error, Result};
use crate::model::{Coding, EventVector, PosteriorBeliefs, ReceivedSignal, ScenarioConfig};

/// Iteration schedule. Read from the `"amp"` key of a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmpSettings {
    pub max_iters: usize,
    /// Weight of the new iterate in the damped update, in `(0, 1]`.
    pub damping: f64,
    /// Relative change of the coefficient estimate that counts as converged.
    pub tol: f64,
    pub variance_floor: f64,
}

impl Default for AmpSettings {
    fn default() -> Self {
        AmpSettings {
            max_iters: 50,
            damping: 0.7,
            tol: 1e-6,
            variance_floor: 1e-12,
        }
    }
}

impl AmpSettings {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("amp.max_iters", "must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::config("amp.damping", "must be in (0, 1]"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::config("amp.tol", "must be positive"));
        }
        if !(self.variance_floor > 0.0) {
            return Err(Error::config("amp.variance_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Prior of one event block: state probabilities over `0..=R` and the
/// variance of an active coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockPrior {
    pub activity: Vec<f64>,
    pub variance: f64,
    /// Symmetric local-estimate error probability (SSC only).
    pub local_error_prob: f64,
}

impl BlockPrior {
    /// `(1 - rho, rho/R, ..., rho/R)` with coefficient variance `v`.
    pub fn uniform(rho: f64, values: usize, variance: f64) -> Result<Self> {
        let mut activity = vec![rho / values as f64; values + 1];
        activity[0] = 1.0 - rho;
        BlockPrior::new(activity, variance)
    }

    pub fn new(activity: Vec<f64>, variance: f64) -> Result<Self> {
        let total: f64 = activity.iter().sum();
        if activity.len() < 2 || activity.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::config("rho", "block prior is not a probability vector"));
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::config("rho", format!("block prior sums to {total}")));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::config("amp", "coefficient variance must be positive"));
        }
        Ok(BlockPrior {
            activity,
            variance,
            local_error_prob: 0.0,
        })
    }

    /// Prior of event `m`: JSC coefficients are sums of `|G_m|` unit-variance
    /// fades, SSC coefficients are single fades.
    pub fn for_event(config: &ScenarioConfig, event: usize) -> Result<Self> {
        BlockPrior::with_group(config, config.groups()[event].len())
    }

    /// Priors for every event of `config`.
    pub fn for_scenario(config: &ScenarioConfig) -> Result<Vec<Self>> {
        config
            .groups()
            .iter()
            .map(|group| BlockPrior::with_group(config, group.len()))
            .collect()
    }

    fn with_group(config: &ScenarioConfig, group_len: usize) -> Result<Self> {
        let variance = match config.coding {
            Coding::Jsc => group_len as f64,
            Coding::Ssc => 1.0,
        };
        let mut prior = BlockPrior::uniform(config.rho, config.values, variance)?;
        if config.coding == Coding::Ssc {
            prior.local_error_prob = config.local_error_prob;
        }
        Ok(prior)
    }

    /// Marginal probability that a device's local estimate equals `value`.
    fn estimate_marginal(&self, value: usize) -> f64 {
        let p = self.local_error_prob;
        if p == 0.0 {
            return self.activity[value];
        }
        let others = (self.activity.len() - 1) as f64;
        self.activity
            .iter()
            .enumerate()
            .map(|(state, &a)| a * if state == value { 1.0 - p } else { p / others })
            .sum()
    }
}

/// AMP pseudo-channel `r_d = u_d + CN(0, tau_d)` for every column.
#[derive(Clone, Debug)]
pub struct PseudoChannel {
    pub r: Vec<Complex64>,
    pub tau: Vec<f64>,
}

/// Iteration state of one GAMP run.
pub struct Gamp<'a> {
    system: &'a SystemMatrix,
    signal: &'a ReceivedSignal,
    priors: &'a [BlockPrior],
    settings: &'a AmpSettings,
    abs2: Vec<f64>,
    mean: Vec<Complex64>,
    var: Vec<f64>,
    s: Vec<Complex64>,
    iteration: usize,
}

impl<'a> Gamp<'a> {
    pub fn new(
        signal: &'a ReceivedSignal,
        system: &'a SystemMatrix,
        priors: &'a [BlockPrior],
        settings: &'a AmpSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if signal.y.len() != system.rows() {
            return Err(Error::Dimension(format!(
                "y has {} samples but A has {} rows",
                signal.y.len(),
                system.rows()
            )));
        }
        if priors.len() != system.events() {
            return Err(Error::Dimension(format!(
                "{} block priors for {} events",
                priors.len(),
                system.events()
            )));
        }
        let values = system.values;
        if priors.iter().any(|p| p.activity.len() != values + 1) {
            return Err(Error::Dimension("block prior length is not R + 1".into()));
        }
        let d = system.cols();
        let mut var = vec![0.0; d];
        for (m, prior) in priors.iter().enumerate() {
            for block in system.event_blocks(m) {
                for value in 1..=values {
                    var[block.start + value - 1] = (prior.estimate_marginal(value)
                        * prior.variance)
                        .max(settings.variance_floor);
                }
            }
        }
        Ok(Gamp {
            system,
            signal,
            priors,
            settings,
            abs2: system.a.iter().map(|c| c.norm_sqr()).collect(),
            mean: vec![Complex64::new(0.0, 0.0); d],
            var,
            s: vec![Complex64::new(0.0, 0.0); system.rows()],
            iteration: 0,
        })
    }

    /// Output and input linear steps; updates the damped residual `s`.
    pub fn pseudo_channel(&mut self) -> PseudoChannel {
        let n = self.system.rows();
        let a = self.system.a.as_slice();
        let sigma2 = self.signal.sigma2;
        let floor = self.settings.variance_floor;

        let mut tau_p = vec![0.0; n];
        let mut p = vec![Complex64::new(0.0, 0.0); n];
        for (d, (&mean, &var)) in self.mean.iter().zip(&self.var).enumerate() {
            let col = &a[d * n..(d + 1) * n];
            let col2 = &self.abs2[d * n..(d + 1) * n];
            for i in 0..n {
                tau_p[i] += col2[i] * var;
                p[i] += col[i] * mean;
            }
        }
        let beta = if self.iteration == 0 { 1.0 } else { self.settings.damping };
        let mut tau_s = vec![0.0; n];
        for i in 0..n {
            let denom = tau_p[i] + sigma2;
            p[i] -= self.s[i] * tau_p[i];
            let s_new = (self.signal.y[i] - p[i]) / denom;
            self.s[i] = s_new * beta + self.s[i] * (1.0 - beta);
            tau_s[i] = 1.0 / denom;
        }

        let d = self.system.cols();
        let mut r = Vec::with_capacity(d);
        let mut tau = Vec::with_capacity(d);
        for col_idx in 0..d {
            let col = &a[col_idx * n..(col_idx + 1) * n];
            let col2 = &self.abs2[col_idx * n..(col_idx + 1) * n];
            let mut precision = 0.0;
            let mut corr = Complex64::new(0.0, 0.0);
            for i in 0..n {
                precision += col2[i] * tau_s[i];
                corr += col[i].conj() * self.s[i];
            }
            let t = (1.0 / precision).max(floor);
            tau.push(t);
            r.push(self.mean[col_idx] + corr * t);
        }
        PseudoChannel { r, tau }
    }

    /// Runs the strong-edge denoisers on a pseudo-channel.
    pub fn denoise(&self, channel: &PseudoChannel) -> (Vec<Complex64>, Vec<f64>, Vec<Vec<f64>>) {
        denoise_all(self.system, self.priors, channel)
    }

    /// One full iteration; returns the event posteriors and whether the
    /// coefficient estimate moved less than `tol`.
    pub fn step(&mut self) -> Result<(Vec<Vec<f64>>, bool)> {
        let channel = self.pseudo_channel();
        let (mean_new, var_new, posteriors) = self.denoise(&channel);
        let beta = self.settings.damping;
        let floor = self.settings.variance_floor;
        let mut diff = 0.0;
        let mut norm = 0.0;
        for d in 0..mean_new.len() {
            let m = mean_new[d] * beta + self.mean[d] * (1.0 - beta);
            diff += (m - self.mean[d]).norm_sqr();
            norm += m.norm_sqr();
            self.mean[d] = m;
            self.var[d] = (var_new[d] * beta + self.var[d] * (1.0 - beta)).max(floor);
        }
        self.iteration += 1;
        let finite = self.mean.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && self.var.iter().all(|v| v.is_finite())
            && self.s.iter().all(|c| c.re.is_finite() && c.im.is_finite())
            && posteriors.iter().flatten().all(|p| p.is_finite());
        if !finite {
            return Err(Error::Divergence {
                iteration: self.iteration,
            });
        }
        let converged = diff <= self.settings.tol * self.settings.tol * norm;
        Ok((posteriors, converged))
    }

    pub fn into_beliefs(self, event_posteriors: Vec<Vec<f64>>, converged: bool) -> PosteriorBeliefs {
        PosteriorBeliefs {
            event_posteriors,
            coeff_mean: self.mean,
            coeff_var: self.var,
            iterations_used: self.iteration,
            converged,
        }
    }
}

fn denoise_all(
    system: &SystemMatrix,
    priors: &[BlockPrior],
    channel: &PseudoChannel,
) -> (Vec<Complex64>, Vec<f64>, Vec<Vec<f64>>) {
    let values = system.values;
    let d = system.cols();
    let mut mean = vec![Complex64::new(0.0, 0.0); d];
    let mut var = vec![0.0; d];
    let mut posteriors = Vec::with_capacity(priors.len());
    let mut starts = Vec::new();
    let mut block_mean = Vec::new();
    let mut block_var = Vec::new();
    for (m, prior) in priors.iter().enumerate() {
        starts.clear();
        starts.extend(system.event_blocks(m).map(|b| b.start));
        match system.coding {
            Coding::Jsc => {
                let range = starts[0]..starts[0] + values;
                let est = denoise_jsc_block(&channel.r[range.clone()], &channel.tau[range.clone()], prior);
                mean[range.clone()].copy_from_slice(&est.mean);
                var[range].copy_from_slice(&est.var);
                posteriors.push(est.posterior);
            }
            Coding::Ssc => {
                block_mean.resize(starts.len() * values, Complex64::new(0.0, 0.0));
                block_var.resize(starts.len() * values, 0.0);
                let posterior = denoise::ssc_event_into(
                    |k| {
                        let rg = starts[k]..starts[k] + values;
                        (&channel.r[rg.clone()], &channel.tau[rg])
                    },
                    starts.len(),
                    prior,
                    &mut block_mean,
                    &mut block_var,
                );
                for (k, &start) in starts.iter().enumerate() {
                    mean[start..start + values].copy_from_slice(&block_mean[k * values..(k + 1) * values]);
                    var[start..start + values].copy_from_slice(&block_var[k * values..(k + 1) * values]);
                }
                posteriors.push(posterior);
            }
        }
    }
    (mean, var, posteriors)
}

/// Runs the damped GAMP recursion until convergence or `max_iters`.
pub fn gamp_iterate(
    signal: &ReceivedSignal,
    system: &SystemMatrix,
    priors: &[BlockPrior],
    settings: &AmpSettings,
) -> Result<PosteriorBeliefs> {
    let mut gamp = Gamp::new(signal, system, priors, settings)?;
    let mut posteriors = Vec::new();
    let mut converged = false;
    for _ in 0..settings.max_iters {
        let (post, done) = gamp.step()?;
        posteriors = post;
        if done {
            converged = true;
            break;
        }
    }
    Ok(gamp.into_beliefs(posteriors, converged))
}

/// Index of the largest entry; ties resolve to the smallest index.
pub fn argmax_first(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = i;
        }
    }
    best
}

/// Per-event MAP decision from the event posteriors.
pub fn detect(posteriors: &PosteriorBeliefs) -> EventVector {
    decide(&posteriors.event_posteriors)
}

pub(crate) fn decide(rows: &[Vec<f64>]) -> EventVector {
    let values = rows.first().map_or(0, |r| r.len().saturating_sub(1));
    EventVector::new(rows.iter().map(|row| argmax_first(row)).collect(), values)
        .expect("argmax is within the row")
}
