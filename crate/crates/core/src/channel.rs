//! Encoding of local estimates into the effective unknown vector and the
//! block-fading AWGN channel `y = A u + w`.

use num_complex::Complex64;
use rand::Rng;

use crate::codebooks::SystemMatrix;
use crate::error::{Error, Result};
use crate::model::{complex_normal, EventVector, LocalEstimates, ReceivedSignal, TransmitState};

/// Collapses per-device indicators and fading into `u`.
///
/// JSC entry `(m, r)` is the sum of `h_k` over devices in `G_m` whose estimate is `r`.
/// SSC entry `(k, m, r)` is `h_k` when device `k` estimates `r` for event `m`.
/// Estimate `0` is silent and contributes nothing.
pub fn encode(
    events: &EventVector,
    estimates: &LocalEstimates,
    channel: &[Complex64],
    system: &SystemMatrix,
) -> Result<TransmitState> {
    if channel.len() != estimates.devices() {
        return Err(Error::Dimension(format!(
            "{} fading coefficients for {} devices",
            channel.len(),
            estimates.devices()
        )));
    }
    if events.len() != system.events() {
        return Err(Error::Dimension(format!(
            "{} events but the system matrix has {}",
            events.len(),
            system.events()
        )));
    }
    let mut u = vec![Complex64::new(0.0, 0.0); system.cols()];
    for (k, &h) in channel.iter().enumerate() {
        for &(m, r) in estimates.device(k) {
            if r == 0 {
                continue;
            }
            let col = system.column_of(k, m, r).ok_or_else(|| {
                Error::Dimension(format!("no column for device {k}, event {m}, value {r}"))
            })?;
            u[col] += h;
        }
    }
    Ok(TransmitState {
        h: channel.to_vec(),
        estimates: estimates.clone(),
        u,
    })
}

/// `y = A u + w` with `w ~ CN(0, sigma2 I)`.
pub fn transmit<G: Rng + ?Sized>(
    state: &TransmitState,
    system: &SystemMatrix,
    sigma2: f64,
    rng: &mut G,
) -> Result<ReceivedSignal> {
    if !(sigma2 > 0.0) {
        return Err(Error::config("snr_db", "noise variance must be positive"));
    }
    let mut y = system.apply(&state.u);
    for yi in &mut y {
        *yi += complex_normal(rng, sigma2);
    }
    Ok(ReceivedSignal { y, sigma2 })
}
