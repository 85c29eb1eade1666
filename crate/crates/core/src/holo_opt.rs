//! Projected gradient ascent on the holographic amplitude weights.
//!
//! With `V` and `x` frozen, every amplitude seen by user `d` from stream `j`
//! is linear in the weights:
//!
//! ```text
//! A_{d,j}(w) = Σ_m w_m · conj(h_{d,m}) · Σ_k φ_{m,k} v_{k,j}
//! ```
//!
//! so `SINR_d = |A_{d,d}|² / (σ² + Σ_{j≠d} x_j |A_{d,j}|²)` and its partial in
//! `w_m` follows from the quotient rule with
//! `∂|A|²/∂w_m = 2·Re(A · conj(∂A/∂w_m))`. The per-element partials
//! `∂A_{d,j}/∂w_m` do not depend on `w`; they are computed once per
//! workspace and reused across iterations.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::precoder::DigitalBeamformer;
use crate::scalar::{czero, Cplx, Real};
use crate::scheduler::ScheduleVector;
use crate::surface::{HolographicWeights, PhaseMatrix};

/// Step halvings attempted before a backtracking iteration gives up.
pub const MAX_HALVINGS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub learning_rate: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Halve the step (up to [`MAX_HALVINGS`] times) whenever it would
    /// lower the sum rate.
    pub backtracking: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            tolerance: 1e-5,
            max_iterations: 500,
            backtracking: true,
        }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(Error::InvalidConfig(
                "optimizer needs learning_rate > 0, tolerance > 0, max_iterations >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Frozen partials plus the amplitudes at the current weights.
#[derive(Debug, Clone)]
pub struct GradientWorkspace<T: Real> {
    users: usize,
    elements: usize,
    scheduled: Vec<bool>,
    active: Vec<usize>,
    noise_variance: T,
    /// `∂A_{d,j}/∂w_m`, stored at `(d·D + j)·M + m`.
    partials: Vec<Cplx<T>>,
    amplitudes: Array2<Cplx<T>>,
    numerators: Vec<T>,
    denominators: Vec<T>,
}

impl<T: Real> GradientWorkspace<T> {
    pub fn new(
        weights: &HolographicWeights<T>,
        channels: &ChannelSet<T>,
        phases: &PhaseMatrix<T>,
        precoder: &DigitalBeamformer<T>,
        schedule: &ScheduleVector,
        noise_variance: T,
    ) -> Result<Self> {
        let (users, elements) = (channels.users(), channels.elements());
        let feeds = phases.feeds();
        check_dim("weights vs channel length", elements, weights.len())?;
        check_dim("phase rows vs channel length", elements, phases.elements())?;
        check_dim("precoder rows vs feeds", feeds, precoder.matrix().nrows())?;
        check_dim("precoder columns vs users", users, precoder.matrix().ncols())?;
        check_dim("schedule length vs users", users, schedule.len())?;

        let phi = phases.entries();
        let v = precoder.matrix();
        let active = schedule.scheduled();
        let mut partials = vec![czero::<T>(); users * users * elements];
        for &j in &active {
            for m in 0..elements {
                let coupling = (0..feeds).fold(czero::<T>(), |acc, k| acc + phi[[m, k]] * v[[k, j]]);
                for &d in &active {
                    partials[(d * users + j) * elements + m] = channels.channel(d)[m].conj() * coupling;
                }
            }
        }
        let mut ws = Self {
            users,
            elements,
            scheduled: (0..users).map(|d| schedule.is_scheduled(d)).collect(),
            active,
            noise_variance,
            partials,
            amplitudes: Array2::from_elem((users, users), czero()),
            numerators: vec![T::zero(); users],
            denominators: vec![noise_variance; users],
        };
        ws.refresh(weights);
        Ok(ws)
    }

    /// Recomputes amplitudes, numerators and denominators at `weights`.
    pub fn refresh(&mut self, weights: &HolographicWeights<T>) {
        let w = weights.as_array();
        for &d in &self.active {
            for &j in &self.active {
                let p = self.partial_row(d, j);
                self.amplitudes[[d, j]] = p.iter().zip(w.iter()).fold(czero(), |acc, (a, &wm)| acc + *a * wm);
            }
        }
        for d in 0..self.users {
            let (num, den) = self.quotient_parts(d);
            self.numerators[d] = num;
            self.denominators[d] = den;
        }
    }

    fn quotient_parts(&self, d: usize) -> (T, T) {
        if !self.scheduled[d] {
            return (T::zero(), self.noise_variance);
        }
        let num = self.amplitudes[[d, d]].norm_sqr();
        let interference: T = self
            .active
            .iter()
            .filter(|&&j| j != d)
            .map(|&j| self.amplitudes[[d, j]].norm_sqr())
            .sum();
        (num, self.noise_variance + interference)
    }

    fn partial_row(&self, d: usize, j: usize) -> &[Cplx<T>] {
        let start = (d * self.users + j) * self.elements;
        &self.partials[start..start + self.elements]
    }

    pub fn sinr(&self, d: usize) -> T {
        self.numerators[d] / self.denominators[d]
    }

    pub fn sum_rate(&self) -> T {
        (0..self.users).map(|d| (T::one() + self.sinr(d)).log2()).sum()
    }

    /// Sum rate at other weights, leaving the workspace untouched.
    pub fn sum_rate_at(&self, weights: &HolographicWeights<T>) -> T {
        let w = weights.as_array();
        let amp = |d: usize, j: usize| {
            self.partial_row(d, j)
                .iter()
                .zip(w.iter())
                .fold(czero::<T>(), |acc, (a, &wm)| acc + *a * wm)
        };
        self.active
            .iter()
            .map(|&d| {
                let num = amp(d, d).norm_sqr();
                let den = self.noise_variance
                    + self
                        .active
                        .iter()
                        .filter(|&&j| j != d)
                        .map(|&j| amp(d, j).norm_sqr())
                        .sum::<T>();
                (T::one() + num / den).log2()
            })
            .sum()
    }

    /// `∂SINR_d/∂w_m` by the quotient rule.
    pub fn sinr_gradient(&self, d: usize, m: usize) -> T {
        if !self.scheduled[d] {
            return T::zero();
        }
        let two = T::two();
        let at = |j: usize| self.partials[(d * self.users + j) * self.elements + m];
        let d_num = two * (self.amplitudes[[d, d]] * at(d).conj()).re;
        let d_den: T = self
            .active
            .iter()
            .filter(|&&j| j != d)
            .map(|&j| two * (self.amplitudes[[d, j]] * at(j).conj()).re)
            .sum();
        let (num, den) = (self.numerators[d], self.denominators[d]);
        (d_num * den - num * d_den) / (den * den)
    }

    /// `∂R_sum/∂w_m = Σ_d (1/ln 2)·(1/(1+SINR_d))·∂SINR_d/∂w_m`.
    pub fn sum_rate_gradient(&self, m: usize) -> T {
        self.active
            .iter()
            .map(|&d| self.sinr_gradient(d, m) / ((T::one() + self.sinr(d)) * T::LN_2()))
            .sum()
    }

    pub fn gradient(&self) -> Vec<T> {
        (0..self.elements).map(|m| self.sum_rate_gradient(m)).collect()
    }
}

fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        });
    }
    Ok(())
}

/// SINR of user `d` written as an explicit function of the weights.
pub fn sinr_of_weights<T: Real>(
    d: usize,
    weights: &HolographicWeights<T>,
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    precoder: &DigitalBeamformer<T>,
    schedule: &ScheduleVector,
    noise_variance: T,
) -> Result<T> {
    let ws = GradientWorkspace::new(weights, channels, phases, precoder, schedule, noise_variance)?;
    Ok(ws.sinr(d))
}

pub fn sinr_gradient<T: Real>(d: usize, m: usize, workspace: &GradientWorkspace<T>) -> T {
    workspace.sinr_gradient(d, m)
}

pub fn sum_rate_gradient<T: Real>(m: usize, workspace: &GradientWorkspace<T>) -> T {
    workspace.sum_rate_gradient(m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry<T> {
    pub iteration: usize,
    pub sum_rate: T,
    /// Step actually taken to reach this iterate (zero for the start point).
    pub step_size: T,
}

#[derive(Debug, Clone)]
pub struct OptimizedWeights<T: Real> {
    pub weights: HolographicWeights<T>,
    pub trace: Vec<TraceEntry<T>>,
    /// False when the iteration budget ran out first.
    pub converged: bool,
}

impl<T: Real> OptimizedWeights<T> {
    pub fn initial_sum_rate(&self) -> T {
        self.trace[0].sum_rate
    }

    pub fn final_sum_rate(&self) -> T {
        self.trace[self.trace.len() - 1].sum_rate
    }

    /// CSV rows `iteration,R_sum,step_size`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iteration,R_sum,step_size\n");
        for e in &self.trace {
            out.push_str(&format!("{},{},{}\n", e.iteration, e.sum_rate.as_f64(), e.step_size.as_f64()));
        }
        out
    }
}

/// Gradient ascent with box projection, stopping once the sum rate moves
/// by less than the tolerance or the iteration budget is spent.
pub fn optimize_weights<T: Real>(
    initial: &HolographicWeights<T>,
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    precoder: &DigitalBeamformer<T>,
    schedule: &ScheduleVector,
    noise_variance: T,
    settings: &OptimizerSettings,
) -> Result<OptimizedWeights<T>> {
    settings.validate()?;
    let mut ws = GradientWorkspace::new(initial, channels, phases, precoder, schedule, noise_variance)?;
    let mut weights = initial.clone();
    let mut rate = ws.sum_rate();
    let mut trace = vec![TraceEntry {
        iteration: 0,
        sum_rate: rate,
        step_size: T::zero(),
    }];
    let tolerance = T::lit(settings.tolerance);
    let mut converged = false;

    for iteration in 1..=settings.max_iterations {
        let gradient = ws.gradient();
        if gradient.iter().any(|g| !g.is_finite()) {
            return Err(Error::NumericalFailure { iteration });
        }

        let mut step = T::lit(settings.learning_rate);
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate = weights.projected_step(&gradient, step);
            if candidate == weights {
                break;
            }
            let candidate_rate = ws.sum_rate_at(&candidate);
            if !settings.backtracking {
                if !candidate_rate.is_finite() {
                    return Err(Error::NumericalFailure { iteration });
                }
                accepted = Some((candidate, candidate_rate));
                break;
            }
            if candidate_rate >= rate {
                accepted = Some((candidate, candidate_rate));
                break;
            }
            step /= T::two();
        }

        let Some((candidate, candidate_rate)) = accepted else {
            // projected gradient vanishes, or no ascent step exists at this scale
            converged = true;
            break;
        };
        weights = candidate;
        ws.refresh(&weights);
        trace.push(TraceEntry {
            iteration,
            sum_rate: candidate_rate,
            step_size: step,
        });
        let change = (candidate_rate - rate).abs();
        rate = candidate_rate;
        if change < tolerance {
            converged = true;
            break;
        }
    }

    Ok(OptimizedWeights {
        weights,
        trace,
        converged,
    })
}
