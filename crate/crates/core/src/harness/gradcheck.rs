//! Analytic sum-rate gradient against central finite differences of the
//! matrix-route rates.

use ndarray::Array1;
use rand::Rng;

use crate::error::{Error, Result};
use crate::holo_opt::GradientWorkspace;
use crate::precoder::{per_user_rates, zero_forcing_for_schedule};
use crate::scheduler::ScheduleVector;
use crate::surface::{effective_surface, HolographicWeights};

use super::{benchmark_rng, Scenario, SystemConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub realization: u64,
    pub elements: usize,
    /// `‖g_analytic − g_fd‖∞ / max(‖g_fd‖∞, floor)`.
    pub relative_error: f64,
    pub gradient_norm: f64,
}

pub const FD_STEP: f64 = 1e-6;

fn matrix_sum_rate(
    scenario: &Scenario<f64>,
    channels: &crate::channel::ChannelSet<f64>,
    precoder: &crate::precoder::DigitalBeamformer<f64>,
    schedule: &ScheduleVector,
    weights: &HolographicWeights<f64>,
    sigma2: f64,
) -> Result<f64> {
    let surface = effective_surface(weights, &scenario.phases)?;
    Ok(per_user_rates(channels, &surface, precoder, schedule, sigma2)
        .into_iter()
        .sum())
}

/// Checks the gradient at interior weights drawn from the realization's
/// benchmark stream, with a fixed ZF precoder for every user.
pub fn grad_check(config: &SystemConfig, snr_db: f64, realization: u64) -> Result<GradCheck> {
    let scenario = Scenario::<f64>::new(config)?;
    let channels = scenario.channels(realization)?;
    let m = channels.elements();
    let mut rng = benchmark_rng(config.seed, realization);
    let weights = HolographicWeights::new(Array1::from_shape_fn(m, |_| 0.1 + 0.8 * rng.random::<f64>()))?;
    let schedule = ScheduleVector::all(channels.users());
    let sigma2 = config.noise_variance(snr_db);
    let surface = effective_surface(&weights, &scenario.phases)?;
    let precoder = zero_forcing_for_schedule(&channels, &surface, &schedule, config.p_max)?;

    let ws = GradientWorkspace::new(&weights, &channels, &scenario.phases, &precoder, &schedule, sigma2)?;
    let analytic = ws.gradient();

    let mut err = 0.0f64;
    let mut scale = 0.0f64;
    for (i, g) in analytic.iter().enumerate() {
        let mut up = weights.as_array().clone();
        let mut down = weights.as_array().clone();
        up[i] += FD_STEP;
        down[i] -= FD_STEP;
        let r_up = matrix_sum_rate(&scenario, &channels, &precoder, &schedule, &HolographicWeights::new(up)?, sigma2)?;
        let r_down =
            matrix_sum_rate(&scenario, &channels, &precoder, &schedule, &HolographicWeights::new(down)?, sigma2)?;
        let fd = (r_up - r_down) / (2.0 * FD_STEP);
        if !fd.is_finite() || !g.is_finite() {
            return Err(Error::NumericalFailure { iteration: 0 });
        }
        err = err.max((g - fd).abs());
        scale = scale.max(fd.abs());
    }
    Ok(GradCheck {
        realization,
        elements: m,
        relative_error: err / scale.max(1e-12),
        gradient_norm: scale,
    })
}
