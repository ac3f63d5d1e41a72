//! Monte-Carlo experiment engine: single trials, error-rate estimation,
//! parameter sweeps and the AMP-vs-oracle comparison.

mod io;
pub mod seed;

pub use io::{read_rows_csv, rows_to_csv, write_atomic, write_rows_csv, RunManifest};

use std::time::Instant;

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amp::{detect, gamp_iterate, AmpSettings, BlockPrior};
use crate::channel::{encode, transmit};
use crate::codebooks::{assemble_system_matrix, gen_gaussian_codebooks, gen_orthogonal_codebooks, CodebookSet};
use crate::error::{Error, Result};
use crate::model::{local_estimates, sample_channel, sample_events, Coding, EventVector, ScenarioConfig};
use crate::oracle::{check_budget, exact_map_detect, exact_posterior};
use seed::{rng_from_seed, split_seed};

/// Largest tolerated fraction of diverged trial attempts.
pub const MAX_DIVERGENCE_RATE: f64 = 0.05;
/// Attempts per trial before giving up on re-drawing.
const MAX_ATTEMPTS: u64 = 16;
const CODEBOOK_STREAM: u64 = 0xC0DE;
const TRIAL_STREAM: u64 = 0x7A1;
const FIXED_CODEBOOK: u64 = u64::MAX;

/// Swept parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    #[serde(alias = "G")]
    GroupSize,
    #[serde(alias = "N")]
    CodewordLength,
    #[serde(alias = "rho")]
    Activation,
    SnrDb,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::GroupSize => "group_size",
            Axis::CodewordLength => "codeword_length",
            Axis::Activation => "activation",
            Axis::SnrDb => "snr_db",
        }
    }

    /// `base` moved to `value` along this axis.
    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let as_count = |field: &'static str| -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::config(field, format!("{value} is not a positive integer")))
            }
        };
        let mut config = base.clone();
        match self {
            Axis::GroupSize => return config.with_group_size(as_count("values")?),
            Axis::CodewordLength => config.codeword_len = as_count("values")?,
            Axis::Activation => config.rho = value,
            Axis::SnrDb => config.snr_db = value,
        }
        config.validated()
    }
}

/// Codeword ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodebookKind {
    /// I.i.d. CN(0, E/N) entries.
    #[default]
    Gaussian,
    /// Gaussian draws rescaled to energy exactly `E`.
    GaussianNormalized,
    /// Deterministic DFT columns (JSC only, `M * R <= N`).
    Orthogonal,
}

impl CodebookKind {
    pub fn draw<G: rand::Rng + ?Sized>(self, config: &ScenarioConfig, rng: &mut G) -> Result<CodebookSet> {
        Ok(match self {
            CodebookKind::Gaussian => gen_gaussian_codebooks(config, rng),
            CodebookKind::GaussianNormalized => {
                let mut set = gen_gaussian_codebooks(config, rng);
                set.normalize_columns();
                set
            }
            CodebookKind::Orthogonal => gen_orthogonal_codebooks(config)?,
        })
    }
}

/// When to stop adding trials at a grid point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Exactly `trials` trials.
    #[default]
    Fixed,
    /// Batches of `trials` until the 95% half-width is below
    /// `rel_halfwidth * error_rate`, or `max_trials` is reached.
    TargetRelativeCi { rel_halfwidth: f64, max_trials: u64 },
}

/// One sweep: a base scenario, an axis with its grid, and the codings to run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub base: ScenarioConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub codings: Vec<Coding>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default)]
    pub confidence: StopRule,
    #[serde(default)]
    pub amp: AmpSettings,
    #[serde(default)]
    pub codebook: CodebookKind,
    /// Reuse one codebook per grid point instead of a fresh draw per trial.
    #[serde(default)]
    pub fixed_codebook: bool,
}

impl SweepSpec {
    /// Parses a sweep document; `coding` may be omitted from the scenario
    /// fields since `codings` selects the schemes.
    pub fn from_json_value(mut value: serde_json::Value) -> Result<Self> {
        if let Some(obj) = value.as_object_mut() {
            if !obj.contains_key("coding") {
                let first = obj
                    .get("codings")
                    .and_then(|c| c.get(0))
                    .cloned()
                    .unwrap_or_else(|| serde_json::Value::String("JSC".into()));
                obj.insert("coding".into(), first);
            }
        }
        let spec: SweepSpec = serde_json::from_value(value)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("values", "must not be empty"));
        }
        if self.values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("values", "must be strictly increasing"));
        }
        if self.codings.is_empty() {
            return Err(Error::config("codings", "must not be empty"));
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if let StopRule::TargetRelativeCi {
            rel_halfwidth,
            max_trials,
        } = self.confidence
        {
            if !(rel_halfwidth > 0.0) || max_trials < self.trials {
                return Err(Error::config(
                    "confidence",
                    "needs rel_halfwidth > 0 and max_trials >= trials",
                ));
            }
        }
        self.amp.validate()?;
        for &coding in &self.codings {
            for &v in &self.values {
                self.point_config(coding, v)?;
            }
        }
        Ok(())
    }

    /// Scenario at one grid point.
    pub fn point_config(&self, coding: Coding, value: f64) -> Result<ScenarioConfig> {
        let mut base = self.base.clone();
        base.coding = coding;
        self.axis.apply(&base, value)
    }
}

/// Result of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub truth: EventVector,
    pub decision: EventVector,
    pub amp_iters: usize,
}

impl TrialOutcome {
    /// `1{xi_hat_m != xi_m}` per event.
    pub fn error_bits(&self) -> Vec<bool> {
        self.truth
            .states()
            .iter()
            .zip(self.decision.states())
            .map(|(a, b)| a != b)
            .collect()
    }
}

/// Samples events, fading and local estimates, transmits, and detects with AMP.
pub fn run_trial(
    config: &ScenarioConfig,
    codebooks: &CodebookSet,
    trial_seed: u64,
    settings: &AmpSettings,
) -> Result<TrialOutcome> {
    let mut rng = rng_from_seed(trial_seed);
    let system = assemble_system_matrix(codebooks, config)?;
    let truth = sample_events(config, &mut rng);
    let h = sample_channel(config, &mut rng);
    let estimates = local_estimates(&truth, config, &mut rng);
    let state = encode(&truth, &estimates, &h, &system)?;
    let signal = transmit(&state, &system, config.noise_variance(), &mut rng)?;
    let priors = BlockPrior::for_scenario(config)?;
    let beliefs = gamp_iterate(&signal, &system, &priors, settings)?;
    Ok(TrialOutcome {
        decision: detect(&beliefs),
        truth,
        amp_iters: beliefs.iterations_used,
    })
}

/// Identifies a grid point in CSV output.
#[derive(Clone, Debug, PartialEq)]
pub struct PointInfo {
    pub axis_value: f64,
    pub config: ScenarioConfig,
}

/// One line of sweep output.
#[allow(non_snake_case)]
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub axis_value: f64,
    pub coding: Coding,
    pub M: usize,
    pub R: usize,
    pub N: usize,
    /// Empty when groups have unequal sizes.
    pub G: Option<usize>,
    pub rho: f64,
    pub snr_db: f64,
    pub error_rate: f64,
    pub trials: u64,
    pub event_decisions: u64,
    pub ci95_halfwidth: f64,
    pub mean_amp_iters: f64,
    pub error_rate_inactive: Option<f64>,
    pub error_rate_active: Option<f64>,
    pub diverged_attempts: u64,
    /// Reported in the run manifest, not the CSV.
    #[serde(skip)]
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn errors(&self) -> u64 {
        (self.error_rate * self.event_decisions as f64).round() as u64
    }
}

/// Normal-approximation 95% half-width of a binomial proportion.
pub fn ci95_halfwidth(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    1.96 * (p * (1.0 - p) / n as f64).sqrt()
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Tally {
    trials: u64,
    errors: u64,
    decisions: u64,
    inactive_errors: u64,
    inactive: u64,
    active_errors: u64,
    active: u64,
    amp_iters: u64,
    diverged: u64,
}

impl Tally {
    fn add(&mut self, outcome: &TrialOutcome) {
        self.trials += 1;
        self.amp_iters += outcome.amp_iters as u64;
        for (&truth, wrong) in outcome.truth.states().iter().zip(outcome.error_bits()) {
            self.decisions += 1;
            self.errors += wrong as u64;
            if truth == 0 {
                self.inactive += 1;
                self.inactive_errors += wrong as u64;
            } else {
                self.active += 1;
                self.active_errors += wrong as u64;
            }
        }
    }

    fn error_rate(&self) -> f64 {
        self.errors as f64 / self.decisions as f64
    }

    fn row(&self, point: &PointInfo, wall_time_s: f64) -> ResultRow {
        let ratio = |e: u64, n: u64| (n > 0).then(|| e as f64 / n as f64);
        let p = self.error_rate();
        let c = &point.config;
        ResultRow {
            axis_value: point.axis_value,
            coding: c.coding,
            M: c.events,
            R: c.values,
            N: c.codeword_len,
            G: c.group_size(),
            rho: c.rho,
            snr_db: c.snr_db,
            error_rate: p,
            trials: self.trials,
            event_decisions: self.decisions,
            ci95_halfwidth: ci95_halfwidth(p, self.decisions),
            mean_amp_iters: self.amp_iters as f64 / self.trials as f64,
            error_rate_inactive: ratio(self.inactive_errors, self.inactive),
            error_rate_active: ratio(self.active_errors, self.active),
            diverged_attempts: self.diverged,
            wall_time_s,
        }
    }
}

/// Aggregates trial outcomes into a result row (unconditional per-event
/// error averaged over events and trials, plus activity-conditioned rates).
pub fn estimate_error_rate(outcomes: &[TrialOutcome], point: &PointInfo) -> Result<ResultRow> {
    if outcomes.is_empty() {
        return Err(Error::config("trials", "need at least one trial"));
    }
    let mut tally = Tally::default();
    for o in outcomes {
        tally.add(o);
    }
    Ok(tally.row(point, 0.0))
}

/// A trial plus the number of diverged attempts it took to produce it.
struct Attempted<T> {
    value: T,
    diverged: u64,
}

/// Runs `attempt(seed)` with re-drawn seeds while it diverges.
fn with_redraws<T>(trial_seed: u64, mut attempt: impl FnMut(u64) -> Result<T>) -> Result<Attempted<T>> {
    let mut diverged = 0;
    for a in 0..MAX_ATTEMPTS {
        let seed = if a == 0 { trial_seed } else { split_seed(trial_seed, &[a]) };
        match attempt(seed) {
            Ok(value) => return Ok(Attempted { value, diverged }),
            Err(Error::Divergence { iteration }) => {
                diverged += 1;
                warn!("trial seed {trial_seed:#x} diverged at iteration {iteration}; re-drawing");
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::DivergenceBudget {
        diverged,
        attempts: diverged,
    })
}

fn check_divergence(diverged: u64, trials: u64) -> Result<()> {
    let attempts = diverged + trials;
    if diverged as f64 > MAX_DIVERGENCE_RATE * attempts as f64 {
        return Err(Error::DivergenceBudget { diverged, attempts });
    }
    Ok(())
}

/// Everything needed to run trials at one grid point.
pub struct PointRunner<'a> {
    pub config: ScenarioConfig,
    pub settings: &'a AmpSettings,
    pub codebook: CodebookKind,
    pub fixed: Option<CodebookSet>,
    /// Seed prefix; trial `t` uses `split_seed(base_seed, [t])`.
    pub base_seed: u64,
}

impl<'a> PointRunner<'a> {
    pub fn new(
        config: ScenarioConfig,
        settings: &'a AmpSettings,
        codebook: CodebookKind,
        fixed_codebook: bool,
        base_seed: u64,
    ) -> Result<Self> {
        let fixed = if fixed_codebook || codebook == CodebookKind::Orthogonal {
            let mut rng = rng_from_seed(split_seed(base_seed, &[FIXED_CODEBOOK]));
            Some(codebook.draw(&config, &mut rng)?)
        } else {
            None
        };
        Ok(PointRunner {
            config,
            settings,
            codebook,
            fixed,
            base_seed,
        })
    }

    fn attempt(&self, seed: u64) -> Result<TrialOutcome> {
        match &self.fixed {
            Some(books) => run_trial(&self.config, books, split_seed(seed, &[TRIAL_STREAM]), self.settings),
            None => {
                let mut rng = rng_from_seed(split_seed(seed, &[CODEBOOK_STREAM]));
                let books = self.codebook.draw(&self.config, &mut rng)?;
                run_trial(&self.config, &books, split_seed(seed, &[TRIAL_STREAM]), self.settings)
            }
        }
    }

    /// Trial `index`, re-drawn on divergence.
    pub fn trial(&self, index: u64) -> Result<(TrialOutcome, u64)> {
        let r = with_redraws(split_seed(self.base_seed, &[index]), |s| self.attempt(s))?;
        Ok((r.value, r.diverged))
    }

    /// Trials `range` in parallel, results in index order.
    pub fn trials(&self, range: std::ops::Range<u64>) -> Result<Vec<(TrialOutcome, u64)>> {
        range.into_par_iter().map(|t| self.trial(t)).collect()
    }
}

fn coding_id(coding: Coding) -> u64 {
    match coding {
        Coding::Ssc => 0,
        Coding::Jsc => 1,
    }
}

fn run_point(spec: &SweepSpec, axis_index: usize, coding: Coding) -> Result<ResultRow> {
    let value = spec.values[axis_index];
    let config = spec.point_config(coding, value)?;
    let start = Instant::now();
    let runner = PointRunner::new(
        config.clone(),
        &spec.amp,
        spec.codebook,
        spec.fixed_codebook,
        split_seed(spec.master_seed, &[axis_index as u64, coding_id(coding)]),
    )?;
    let max_trials = match spec.confidence {
        StopRule::Fixed => spec.trials,
        StopRule::TargetRelativeCi { max_trials, .. } => max_trials,
    };
    let mut tally = Tally::default();
    let mut next = 0;
    while next < max_trials {
        let end = (next + spec.trials).min(max_trials);
        for (outcome, diverged) in runner.trials(next..end)? {
            tally.add(&outcome);
            tally.diverged += diverged;
        }
        next = end;
        if let StopRule::TargetRelativeCi { rel_halfwidth, .. } = spec.confidence {
            let p = tally.error_rate();
            if p > 0.0 && ci95_halfwidth(p, tally.decisions) <= rel_halfwidth * p {
                break;
            }
        }
    }
    check_divergence(tally.diverged, tally.trials)?;
    let point = PointInfo {
        axis_value: value,
        config,
    };
    let row = tally.row(&point, start.elapsed().as_secs_f64());
    debug!(
        "{} {}={} error_rate={:.3e} trials={}",
        coding,
        spec.axis.name(),
        value,
        row.error_rate,
        row.trials
    );
    Ok(row)
}

/// Runs every `(coding, axis value)` point. Rows are ordered coding-major
/// (in `spec.codings` order), then by axis value.
///
/// `workers = None` uses the global rayon pool.
pub fn run_sweep(spec: &SweepSpec, workers: Option<usize>) -> Result<Vec<ResultRow>> {
    spec.validate()?;
    let body = || -> Result<Vec<ResultRow>> {
        let mut rows = Vec::with_capacity(spec.codings.len() * spec.values.len());
        for &coding in &spec.codings {
            for i in 0..spec.values.len() {
                rows.push(run_point(spec, i, coding)?);
            }
        }
        Ok(rows)
    };
    with_workers(workers, body)
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::config("workers", e.to_string()))?
            .install(f),
        None => f(),
    }
}

/// AMP against the exact oracle on identical trials.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub trials: u64,
    pub event_decisions: u64,
    pub amp_errors: u64,
    pub oracle_errors: u64,
    pub agreements: u64,
    pub amp_error_rate: f64,
    pub oracle_error_rate: f64,
    pub agreement: f64,
    pub diverged_attempts: u64,
}

struct PairOutcome {
    truth: EventVector,
    amp: EventVector,
    oracle: EventVector,
}

/// Runs AMP and the exact-MAP oracle on the same `trials` realizations.
pub fn compare_with_oracle(
    config: &ScenarioConfig,
    settings: &AmpSettings,
    codebook: CodebookKind,
    trials: u64,
    master_seed: u64,
    budget: u128,
    workers: Option<usize>,
) -> Result<OracleComparison> {
    check_budget(config, budget)?;
    settings.validate()?;
    let priors = BlockPrior::for_scenario(config)?;
    let fixed = match codebook {
        CodebookKind::Orthogonal => Some(gen_orthogonal_codebooks(config)?),
        _ => None,
    };
    let attempt = |seed: u64| -> Result<PairOutcome> {
        let drawn;
        let books = match &fixed {
            Some(b) => b,
            None => {
                drawn = codebook.draw(config, &mut rng_from_seed(split_seed(seed, &[CODEBOOK_STREAM])))?;
                &drawn
            }
        };
        let system = assemble_system_matrix(books, config)?;
        let mut rng = rng_from_seed(split_seed(seed, &[TRIAL_STREAM]));
        let truth = sample_events(config, &mut rng);
        let h = sample_channel(config, &mut rng);
        let estimates = local_estimates(&truth, config, &mut rng);
        let state = encode(&truth, &estimates, &h, &system)?;
        let signal = transmit(&state, &system, config.noise_variance(), &mut rng)?;
        let beliefs = gamp_iterate(&signal, &system, &priors, settings)?;
        let exact = exact_posterior(&signal, &system, config, budget)?;
        Ok(PairOutcome {
            truth,
            amp: detect(&beliefs),
            oracle: exact_map_detect(&exact.marginals),
        })
    };
    let results: Vec<Attempted<PairOutcome>> = with_workers(workers, || {
        (0..trials)
            .into_par_iter()
            .map(|t| with_redraws(split_seed(master_seed, &[t]), attempt))
            .collect()
    })?;

    let mut cmp = OracleComparison {
        trials,
        event_decisions: 0,
        amp_errors: 0,
        oracle_errors: 0,
        agreements: 0,
        amp_error_rate: 0.0,
        oracle_error_rate: 0.0,
        agreement: 0.0,
        diverged_attempts: 0,
    };
    for r in &results {
        cmp.diverged_attempts += r.diverged;
        let o = &r.value;
        for m in 0..o.truth.len() {
            cmp.event_decisions += 1;
            cmp.amp_errors += (o.amp[m] != o.truth[m]) as u64;
            cmp.oracle_errors += (o.oracle[m] != o.truth[m]) as u64;
            cmp.agreements += (o.amp[m] == o.oracle[m]) as u64;
        }
    }
    check_divergence(cmp.diverged_attempts, trials)?;
    let n = cmp.event_decisions as f64;
    cmp.amp_error_rate = cmp.amp_errors as f64 / n;
    cmp.oracle_error_rate = cmp.oracle_errors as f64 / n;
    cmp.agreement = cmp.agreements as f64 / n;
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(config: ScenarioConfig) -> PointInfo {
        PointInfo {
            axis_value: 1.0,
            config,
        }
    }

    fn outcome(truth: Vec<usize>, decision: Vec<usize>) -> TrialOutcome {
        TrialOutcome {
            truth: EventVector::new(truth, 2).unwrap(),
            decision: EventVector::new(decision, 2).unwrap(),
            amp_iters: 3,
        }
    }

    #[test]
    fn all_correct_is_zero() {
        let config = ScenarioConfig::disjoint(2, 2, 1, 4, 0.1, 12.0, Coding::Jsc).unwrap();
        let row = estimate_error_rate(&[outcome(vec![0, 2], vec![0, 2])], &point(config)).unwrap();
        assert_eq!(row.error_rate, 0.0);
        assert_eq!(row.error_rate_active, Some(0.0));
        assert_eq!(row.mean_amp_iters, 3.0);
    }

    #[test]
    fn half_wrong() {
        let config = ScenarioConfig::disjoint(2, 2, 1, 4, 0.1, 12.0, Coding::Jsc).unwrap();
        let outcomes: Vec<_> = (0..50).map(|_| outcome(vec![0, 1], vec![0, 2])).collect();
        let row = estimate_error_rate(&outcomes, &point(config)).unwrap();
        assert_eq!(row.error_rate, 0.5);
        assert_eq!(row.event_decisions, 100);
        assert!((row.ci95_halfwidth - 1.96 * (0.25f64 / 100.0).sqrt()).abs() < 1e-15);
        assert_eq!(row.error_rate_inactive, Some(0.0));
        assert_eq!(row.error_rate_active, Some(1.0));
    }

    #[test]
    fn empty_outcomes_rejected() {
        let config = ScenarioConfig::disjoint(2, 2, 1, 4, 0.1, 12.0, Coding::Jsc).unwrap();
        assert!(estimate_error_rate(&[], &point(config)).is_err());
    }

    #[test]
    fn trial_is_deterministic() {
        let config = ScenarioConfig::disjoint(4, 2, 3, 8, 0.3, 12.0, Coding::Ssc).unwrap();
        let books = gen_gaussian_codebooks(&config, &mut rng_from_seed(1));
        let settings = AmpSettings::default();
        let a = run_trial(&config, &books, 77, &settings).unwrap();
        let b = run_trial(&config, &books, 77, &settings).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn axis_application() {
        let base = ScenarioConfig::disjoint(4, 1, 2, 8, 0.1, 12.0, Coding::Jsc).unwrap();
        assert_eq!(Axis::GroupSize.apply(&base, 16.0).unwrap().devices, 64);
        assert_eq!(Axis::CodewordLength.apply(&base, 6.0).unwrap().codeword_len, 6);
        assert_eq!(Axis::Activation.apply(&base, 0.3).unwrap().rho, 0.3);
        assert_eq!(Axis::SnrDb.apply(&base, 20.0).unwrap().snr_db, 20.0);
        assert!(Axis::GroupSize.apply(&base, 2.5).is_err());
    }

    #[test]
    fn spec_validation() {
        let base = ScenarioConfig::disjoint(4, 1, 2, 8, 0.1, 12.0, Coding::Jsc).unwrap();
        let mut spec = SweepSpec {
            name: None,
            base,
            axis: Axis::SnrDb,
            values: vec![4.0, 8.0],
            codings: vec![Coding::Jsc],
            trials: 1,
            master_seed: 0,
            confidence: StopRule::Fixed,
            amp: AmpSettings::default(),
            codebook: CodebookKind::Gaussian,
            fixed_codebook: false,
        };
        assert!(spec.validate().is_ok());
        spec.values = vec![8.0, 4.0];
        assert!(spec.validate().is_err());
        spec.values = vec![];
        assert!(spec.validate().is_err());
        spec.values = vec![1.0];
        spec.trials = 0;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn divergence_budget() {
        assert!(check_divergence(5, 100).is_ok());
        assert!(check_divergence(6, 100).is_err());
    }

    #[test]
    fn redraw_recovers_from_divergence() {
        let mut calls = 0;
        let r = with_redraws(5, |seed| {
            calls += 1;
            if calls < 3 {
                Err(Error::Divergence { iteration: 2 })
            } else {
                Ok(seed)
            }
        })
        .unwrap();
        assert_eq!(r.diverged, 2);
        assert_eq!(r.value, split_seed(5, &[2]));
    }
}
