//! Scenario configuration, domain types and the event/channel/sensing priors.
//!
//! Events and devices are indexed from zero. An event state of `0` means the
//! event is inactive; `1..=R` are the active values.

use std::collections::BTreeSet;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Source-channel coding scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Coding {
    /// Separate source-channel coding: a private codebook per device and event.
    #[serde(rename = "SSC", alias = "ssc")]
    Ssc,
    /// Joint source-channel coding: one codebook per event shared by its group.
    #[serde(rename = "JSC", alias = "jsc")]
    Jsc,
}

impl Coding {
    pub const ALL: [Coding; 2] = [Coding::Ssc, Coding::Jsc];

    pub fn as_str(self) -> &'static str {
        match self {
            Coding::Ssc => "SSC",
            Coding::Jsc => "JSC",
        }
    }
}

impl fmt::Display for Coding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Coding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SSC" => Ok(Coding::Ssc),
            "JSC" => Ok(Coding::Jsc),
            _ => Err(Error::config("coding", format!("expected SSC or JSC, got {s:?}"))),
        }
    }
}

/// Full description of one operating point.
///
/// Serialized field names follow the usual notation: `M` events, `R` active
/// values per event, `K` devices, `N` channel uses per codeword and `E` the
/// codeword energy budget. On input, `group_assignment` may be replaced by a
/// group size `G`, which builds `M` disjoint groups of `G` devices each.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenarioConfig")]
pub struct ScenarioConfig {
    #[serde(rename = "M")]
    pub events: usize,
    #[serde(rename = "R")]
    pub values: usize,
    #[serde(rename = "K")]
    pub devices: usize,
    /// `group_assignment[k]` is the sorted set of events observed by device `k`.
    pub group_assignment: Vec<Vec<usize>>,
    pub rho: f64,
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub codeword_len: usize,
    #[serde(rename = "E")]
    pub energy: f64,
    pub coding: Coding,
    pub local_error_prob: f64,
}

#[derive(Deserialize)]
struct RawScenarioConfig {
    #[serde(rename = "M", alias = "m")]
    events: usize,
    #[serde(rename = "R", alias = "r")]
    values: usize,
    #[serde(rename = "K", alias = "k", default)]
    devices: Option<usize>,
    #[serde(rename = "G", alias = "g", default)]
    group_size: Option<usize>,
    #[serde(default)]
    group_assignment: Option<Vec<Vec<usize>>>,
    rho: f64,
    snr_db: f64,
    #[serde(rename = "N", alias = "n")]
    codeword_len: usize,
    #[serde(rename = "E", alias = "e", default = "default_energy")]
    energy: f64,
    coding: Coding,
    #[serde(default)]
    local_error_prob: f64,
}

fn default_energy() -> f64 {
    1.0
}

impl TryFrom<RawScenarioConfig> for ScenarioConfig {
    type Error = Error;

    fn try_from(raw: RawScenarioConfig) -> Result<Self> {
        let group_assignment = match (raw.group_assignment, raw.group_size) {
            (Some(groups), _) => groups,
            (None, Some(g)) => {
                if g == 0 {
                    return Err(Error::config("G", "group size must be positive"));
                }
                disjoint_groups(raw.events, g)
            }
            (None, None) => {
                return Err(Error::config(
                    "group_assignment",
                    "either group_assignment or G must be given",
                ))
            }
        };
        let devices = raw.devices.unwrap_or(group_assignment.len());
        let config = ScenarioConfig {
            events: raw.events,
            values: raw.values,
            devices,
            group_assignment,
            rho: raw.rho,
            snr_db: raw.snr_db,
            codeword_len: raw.codeword_len,
            energy: raw.energy,
            coding: raw.coding,
            local_error_prob: raw.local_error_prob,
        };
        config.validated()
    }
}

fn disjoint_groups(events: usize, group_size: usize) -> Vec<Vec<usize>> {
    (0..events * group_size).map(|k| vec![k / group_size]).collect()
}

impl ScenarioConfig {
    /// Disjoint, equal-sized groups: `G` devices per event, `K = G * M`, `E = 1`.
    pub fn disjoint(
        events: usize,
        values: usize,
        group_size: usize,
        codeword_len: usize,
        rho: f64,
        snr_db: f64,
        coding: Coding,
    ) -> Result<Self> {
        ScenarioConfig {
            events,
            values,
            devices: events * group_size,
            group_assignment: disjoint_groups(events, group_size),
            rho,
            snr_db,
            codeword_len,
            energy: 1.0,
            coding,
            local_error_prob: 0.0,
        }
        .validated()
    }

    /// Replaces the group structure with `M` disjoint groups of size `group_size`.
    pub fn with_group_size(mut self, group_size: usize) -> Result<Self> {
        self.group_assignment = disjoint_groups(self.events, group_size);
        self.devices = self.group_assignment.len();
        self.validated()
    }

    /// Checks every invariant and canonicalizes the group sets (sorted).
    pub fn validated(mut self) -> Result<Self> {
        if self.events == 0 {
            return Err(Error::config("M", "event count must be positive"));
        }
        if self.values == 0 {
            return Err(Error::config("R", "value cardinality must be positive"));
        }
        if self.codeword_len == 0 {
            return Err(Error::config("N", "codeword length must be positive"));
        }
        if self.devices == 0 {
            return Err(Error::config("K", "device count must be positive"));
        }
        if self.group_assignment.len() != self.devices {
            return Err(Error::config(
                "group_assignment",
                format!(
                    "has {} entries but K = {}",
                    self.group_assignment.len(),
                    self.devices
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(Error::config("rho", format!("{} is not in [0, 1]", self.rho)));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::config("snr_db", "must be finite"));
        }
        if !(self.energy.is_finite() && self.energy > 0.0) {
            return Err(Error::config("E", format!("{} is not a positive energy", self.energy)));
        }
        if !(0.0..1.0).contains(&self.local_error_prob) {
            return Err(Error::config(
                "local_error_prob",
                format!("{} is not in [0, 1)", self.local_error_prob),
            ));
        }
        if self.coding == Coding::Jsc && self.local_error_prob > 0.0 {
            return Err(Error::config(
                "local_error_prob",
                "JSC detection requires perfect local estimates (local_error_prob = 0)",
            ));
        }
        let mut covered = vec![false; self.events];
        for (k, set) in self.group_assignment.iter_mut().enumerate() {
            let unique: BTreeSet<usize> = set.iter().copied().collect();
            if unique.len() != set.len() {
                return Err(Error::config(
                    "group_assignment",
                    format!("device {k} lists an event twice"),
                ));
            }
            if let Some(&m) = unique.iter().find(|&&m| m >= self.events) {
                return Err(Error::config(
                    "group_assignment",
                    format!("device {k} observes event {m}, but M = {}", self.events),
                ));
            }
            for &m in &unique {
                covered[m] = true;
            }
            *set = unique.into_iter().collect();
        }
        if let Some(m) = covered.iter().position(|c| !c) {
            return Err(Error::config(
                "group_assignment",
                format!("event {m} has no observing device"),
            ));
        }
        let sigma2 = self.noise_variance();
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::config("snr_db", "derived noise variance is not positive"));
        }
        Ok(self)
    }

    /// sigma^2 = E / 10^(snr_db / 10).
    pub fn noise_variance(&self) -> f64 {
        self.energy / 10f64.powf(self.snr_db / 10.0)
    }

    /// Devices observing each event (the groups `G_m`).
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.events];
        for (k, set) in self.group_assignment.iter().enumerate() {
            for &m in set {
                groups[m].push(k);
            }
        }
        groups
    }

    /// Common group size when every event has the same number of observers.
    pub fn group_size(&self) -> Option<usize> {
        let groups = self.groups();
        let first = groups[0].len();
        groups.iter().all(|g| g.len() == first).then_some(first)
    }

    pub fn observes(&self, device: usize, event: usize) -> bool {
        self.group_assignment[device].binary_search(&event).is_ok()
    }

    /// Dimension of the effective unknown vector under the silence convention.
    pub fn unknown_dim(&self) -> usize {
        match self.coding {
            Coding::Jsc => self.events * self.values,
            Coding::Ssc => {
                self.group_assignment.iter().map(Vec::len).sum::<usize>() * self.values
            }
        }
    }

    /// Prior over one event's state: `(1 - rho, rho/R, ..., rho/R)`.
    pub fn event_prior(&self) -> Vec<f64> {
        let mut prior = vec![self.rho / self.values as f64; self.values + 1];
        prior[0] = 1.0 - self.rho;
        prior
    }
}

/// Per-event states, each in `0..=R`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventVector(Vec<usize>);

impl EventVector {
    pub fn new(states: Vec<usize>, values: usize) -> Result<Self> {
        if let Some(&bad) = states.iter().find(|&&x| x > values) {
            return Err(Error::Dimension(format!(
                "event state {bad} outside 0..={values}"
            )));
        }
        Ok(EventVector(states))
    }

    pub fn inactive(events: usize) -> Self {
        EventVector(vec![0; events])
    }

    pub fn states(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&x| x != 0).count()
    }
}

impl std::ops::Index<usize> for EventVector {
    type Output = usize;

    fn index(&self, m: usize) -> &usize {
        &self.0[m]
    }
}

/// Local estimates `phi_m(X_k)` for every device, aligned with
/// `ScenarioConfig::group_assignment`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalEstimates {
    per_device: Vec<Vec<(usize, usize)>>,
}

impl LocalEstimates {
    /// Estimate of `event` at `device`; `0` when the device does not observe it.
    pub fn get(&self, device: usize, event: usize) -> usize {
        self.per_device[device]
            .iter()
            .find(|(m, _)| *m == event)
            .map_or(0, |&(_, r)| r)
    }

    /// `(event, estimate)` pairs for one device, in ascending event order.
    pub fn device(&self, device: usize) -> &[(usize, usize)] {
        &self.per_device[device]
    }

    pub fn devices(&self) -> usize {
        self.per_device.len()
    }
}

/// Encoded transmit state of one trial.
#[derive(Clone, Debug)]
pub struct TransmitState {
    pub h: Vec<Complex64>,
    pub estimates: LocalEstimates,
    /// Effective unknown vector, ordered like the system-matrix columns.
    pub u: Vec<Complex64>,
}

#[derive(Clone, Debug)]
pub struct ReceivedSignal {
    pub y: Vec<Complex64>,
    pub sigma2: f64,
}

/// Detector output.
#[derive(Clone, Debug)]
pub struct PosteriorBeliefs {
    /// `M` rows of `R + 1` probabilities.
    pub event_posteriors: Vec<Vec<f64>>,
    pub coeff_mean: Vec<Complex64>,
    pub coeff_var: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Draws event states: inactive with probability `1 - rho`, otherwise uniform on `1..=R`.
pub fn sample_events<G: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut G) -> EventVector {
    let states = (0..config.events)
        .map(|_| {
            if rng.random::<f64>() < config.rho {
                rng.random_range(1..=config.values)
            } else {
                0
            }
        })
        .collect();
    EventVector(states)
}

/// One circularly-symmetric complex Gaussian sample with variance `var`.
pub fn complex_normal<G: Rng + ?Sized>(rng: &mut G, var: f64) -> Complex64 {
    let scale = (var).sqrt() * FRAC_1_SQRT_2;
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// `K` i.i.d. CN(0, 1) fading coefficients.
pub fn sample_channel<G: Rng + ?Sized>(config: &ScenarioConfig, rng: &mut G) -> Vec<Complex64> {
    (0..config.devices).map(|_| complex_normal(rng, 1.0)).collect()
}

/// Local estimates under the symmetric error model: correct with probability
/// `1 - local_error_prob`, otherwise uniform over the remaining `R` values.
pub fn local_estimates<G: Rng + ?Sized>(
    events: &EventVector,
    config: &ScenarioConfig,
    rng: &mut G,
) -> LocalEstimates {
    let p = config.local_error_prob;
    let per_device = config
        .group_assignment
        .iter()
        .map(|set| {
            set.iter()
                .map(|&m| {
                    let truth = events[m];
                    if p > 0.0 && rng.random::<f64>() < p {
                        // uniform over {0..=R} \ {truth}
                        let mut wrong = rng.random_range(0..config.values);
                        if wrong >= truth {
                            wrong += 1;
                        }
                        (m, wrong)
                    } else {
                        (m, truth)
                    }
                })
                .collect()
        })
        .collect();
    LocalEstimates { per_device }
}
