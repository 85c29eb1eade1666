//! Greedy QoS-aware user admission with interleaved digital/holographic
//! re-optimization.
//!
//! Users are ranked by their rate with everyone active at the initial
//! beamformers (ties broken by what each user reaches on its own), then
//! admitted one at a time. Each tentative admission
//! re-optimizes the beamformers for the enlarged set and is kept only if
//! every scheduled user still meets the minimum rate. A rejected candidate
//! leaves the previous state untouched.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::holo_opt::{optimize_weights, OptimizerSettings};
use crate::precoder::{per_user_rates, zero_forcing_for_schedule, DigitalBeamformer};
use crate::scalar::Real;
use crate::surface::{effective_surface, HolographicWeights, PhaseMatrix};

/// Binary scheduling decision per user.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleVector {
    bits: Vec<bool>,
}

impl ScheduleVector {
    pub fn none(users: usize) -> Self {
        Self {
            bits: vec![false; users],
        }
    }

    pub fn all(users: usize) -> Self {
        Self {
            bits: vec![true; users],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            bits: bits.to_vec(),
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_scheduled(&self, user: usize) -> bool {
        self.bits[user]
    }

    pub fn set(&mut self, user: usize, scheduled: bool) {
        self.bits[user] = scheduled;
    }

    pub fn with(&self, user: usize) -> Self {
        let mut next = self.clone();
        next.set(user, true);
        next
    }

    /// Scheduled user indices in ascending order.
    pub fn scheduled(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(d, &on)| on.then_some(d))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// When a tentative admission is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissionRule {
    /// Every scheduled user meets the minimum rate.
    Qos,
    /// As `Qos`, and the sum rate does not fall below the kept solution's.
    #[default]
    QosAndSumRate,
}

/// How candidates with equal initial rates are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Ascending user index.
    Index,
    /// Rate reached when scheduled alone, descending; then index. The
    /// single-user solutions are reused for the first admission.
    #[default]
    SingleUserRate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulerSettings {
    pub p_max: f64,
    pub r_min: f64,
    pub noise_variance: f64,
    /// Value every holographic weight starts from.
    pub initial_weight: f64,
    /// ZF/gradient alternation rounds per tentative admission.
    pub alt_rounds: usize,
    pub admission: AdmissionRule,
    pub tie_break: TieBreak,
    pub optimizer: OptimizerSettings,
}

impl Default for SchedulerSettings {
    fn default() -> Self {
        Self {
            p_max: 1.0,
            r_min: 5.0,
            noise_variance: 1e-3,
            initial_weight: 0.5,
            alt_rounds: 3,
            admission: AdmissionRule::default(),
            tie_break: TieBreak::default(),
            optimizer: OptimizerSettings::default(),
        }
    }
}

impl SchedulerSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_max > 0.0) {
            return Err(Error::InvalidConfig("p_max must be positive".into()));
        }
        if !(self.r_min >= 0.0) {
            return Err(Error::InvalidConfig("r_min must be non-negative".into()));
        }
        if !(self.noise_variance > 0.0) || !self.noise_variance.is_finite() {
            return Err(Error::InvalidConfig("noise variance must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_weight) {
            return Err(Error::InvalidConfig("initial_weight must lie in [0, 1]".into()));
        }
        if self.alt_rounds == 0 {
            return Err(Error::InvalidConfig("alt_rounds must be at least 1".into()));
        }
        self.optimizer.validate()
    }
}

/// Why a candidate was turned away.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    /// A scheduled user fell below the minimum rate.
    Qos,
    /// The effective channel of the enlarged set is rank deficient.
    ZfInfeasible,
    /// Scheduling would exceed the number of RF chains.
    Capacity,
    /// Admission would lower the sum rate (only under [`AdmissionRule::QosAndSumRate`]).
    SumRate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOutcome<T: Real> {
    pub user: usize,
    pub rejection: Option<Rejection>,
    /// Sum rate of the kept solution after this candidate was examined.
    pub kept_sum_rate: T,
}

impl<T: Real> CandidateOutcome<T> {
    pub fn accepted(&self) -> bool {
        self.rejection.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSolution<T: Real> {
    pub schedule: ScheduleVector,
    pub weights: HolographicWeights<T>,
    pub precoder: DigitalBeamformer<T>,
    pub rates: Vec<T>,
    pub sum_rate: T,
    /// Candidate examination order, with each decision.
    pub history: Vec<CandidateOutcome<T>>,
}

impl<T: Real> JointSolution<T> {
    /// Flat record: schedule bits, per-user rates, sum rate, weights.
    pub fn to_record(&self) -> SolutionRecord {
        SolutionRecord {
            schedule: self.schedule.bits().iter().map(|&b| u8::from(b)).collect(),
            rates: self.rates.iter().map(|r| r.as_f64()).collect(),
            sum_rate: self.sum_rate.as_f64(),
            weights: self.weights.as_array().iter().map(|w| w.as_f64()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub schedule: Vec<u8>,
    pub rates: Vec<f64>,
    pub sum_rate: f64,
    pub weights: Vec<f64>,
}

/// Rates of every user with all of them active (`x = 1`).
pub fn initial_rates<T: Real>(
    channels: &ChannelSet<T>,
    surface: &ndarray::Array2<crate::scalar::Cplx<T>>,
    precoder: &DigitalBeamformer<T>,
    noise_variance: T,
) -> Vec<T> {
    let all = ScheduleVector::all(channels.users());
    per_user_rates(channels, surface, precoder, &all, noise_variance)
}

/// Beamformers produced for one tentative schedule.
#[derive(Debug, Clone)]
pub struct InnerSolution<T: Real> {
    pub weights: HolographicWeights<T>,
    pub precoder: DigitalBeamformer<T>,
    /// Sum rate after ZF at the start and after each kept round.
    pub round_sum_rates: Vec<T>,
}

/// Re-optimizes `(w, V)` for a tentative schedule.
pub trait InnerUpdate<T: Real> {
    fn update(
        &mut self,
        schedule: &ScheduleVector,
        start: &HolographicWeights<T>,
        channels: &ChannelSet<T>,
        phases: &PhaseMatrix<T>,
        settings: &SchedulerSettings,
    ) -> Result<InnerSolution<T>>;
}

/// ZF followed by gradient ascent on the weights, alternated.
#[derive(Debug, Clone, Copy, Default)]
pub struct GradientAscent;

impl<T: Real> InnerUpdate<T> for GradientAscent {
    fn update(
        &mut self,
        schedule: &ScheduleVector,
        start: &HolographicWeights<T>,
        channels: &ChannelSet<T>,
        phases: &PhaseMatrix<T>,
        settings: &SchedulerSettings,
    ) -> Result<InnerSolution<T>> {
        joint_inner_update(schedule, start, channels, phases, settings)
    }
}

fn sum_rate_of<T: Real>(
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    weights: &HolographicWeights<T>,
    precoder: &DigitalBeamformer<T>,
    schedule: &ScheduleVector,
    noise_variance: T,
) -> Result<T> {
    let surface = effective_surface(weights, phases)?;
    Ok(per_user_rates(channels, &surface, precoder, schedule, noise_variance)
        .into_iter()
        .sum())
}

/// `V ← ZF(w)`, then up to `alt_rounds` rounds of
/// `w ← gradient ascent given V; V ← ZF(w)`.
///
/// A round whose ZF-consistent sum rate is lower than the previous round's
/// (or whose ZF becomes infeasible) is discarded and the alternation stops,
/// so the returned pair is always ZF-consistent and the round sequence is
/// non-decreasing. Rounds also stop once the change drops below the
/// optimizer tolerance.
pub fn joint_inner_update<T: Real>(
    schedule: &ScheduleVector,
    start: &HolographicWeights<T>,
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    settings: &SchedulerSettings,
) -> Result<InnerSolution<T>> {
    if schedule.count() == 0 {
        return Err(Error::NoScheduledUsers);
    }
    let p_max = T::lit(settings.p_max);
    let sigma2 = T::lit(settings.noise_variance);
    let tolerance = T::lit(settings.optimizer.tolerance);

    let mut weights = start.clone();
    let mut precoder =
        zero_forcing_for_schedule(channels, &effective_surface(&weights, phases)?, schedule, p_max)?;
    let mut rate = sum_rate_of(channels, phases, &weights, &precoder, schedule, sigma2)?;
    let mut round_sum_rates = vec![rate];

    for _ in 0..settings.alt_rounds {
        let ascended = optimize_weights(
            &weights,
            channels,
            phases,
            &precoder,
            schedule,
            sigma2,
            &settings.optimizer,
        )?;
        let surface = effective_surface(&ascended.weights, phases)?;
        let next_precoder = match zero_forcing_for_schedule(channels, &surface, schedule, p_max) {
            Ok(v) => v,
            Err(Error::ZfInfeasible { .. }) => break,
            Err(e) => return Err(e),
        };
        let next_rate = sum_rate_of(channels, phases, &ascended.weights, &next_precoder, schedule, sigma2)?;
        if !(next_rate >= rate) {
            break;
        }
        let change = next_rate - rate;
        weights = ascended.weights;
        precoder = next_precoder;
        rate = next_rate;
        round_sum_rates.push(rate);
        if change < tolerance {
            break;
        }
    }

    Ok(InnerSolution {
        weights,
        precoder,
        round_sum_rates,
    })
}

/// Greedy joint scheduling with gradient-optimized holographic weights.
pub fn greedy_schedule<T: Real>(
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    settings: &SchedulerSettings,
) -> Result<JointSolution<T>> {
    greedy_schedule_with(channels, phases, settings, &mut GradientAscent)
}

/// Relative gap below which two initial rates count as tied.
pub const RATE_TIE_TOLERANCE: f64 = 1e-9;

/// Candidate order: initial rate descending, ties by ascending user index.
pub fn admission_order<T: Real>(initial: &[T]) -> Vec<usize> {
    admission_order_by(initial, &vec![T::zero(); initial.len()])
}

/// Initial rate descending, ties by `secondary` descending, then by index.
///
/// Rates within [`RATE_TIE_TOLERANCE`] of the head of a run are tied. ZF with
/// a common power scale hands every active user the same SINR, so all-active
/// initial rates usually differ only by rounding.
pub fn admission_order_by<T: Real>(initial: &[T], secondary: &[T]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..initial.len()).collect();
    order.sort_by(|&a, &b| {
        initial[b]
            .partial_cmp(&initial[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let tol = T::lit(RATE_TIE_TOLERANCE);
    let mut out = Vec::with_capacity(order.len());
    let mut start = 0;
    while start < order.len() {
        let head = initial[order[start]];
        let mut end = start + 1;
        while end < order.len() && head - initial[order[end]] <= tol * head.abs() {
            end += 1;
        }
        let mut run = order[start..end].to_vec();
        run.sort_by(|&a, &b| {
            secondary[b]
                .partial_cmp(&secondary[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        out.extend(run);
        start = end;
    }
    out
}

/// Greedy admission loop with a pluggable beamformer update.
pub fn greedy_schedule_with<T: Real, U: InnerUpdate<T> + ?Sized>(
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    settings: &SchedulerSettings,
    inner: &mut U,
) -> Result<JointSolution<T>> {
    settings.validate()?;
    let users = channels.users();
    let feeds = phases.feeds();
    let sigma2 = T::lit(settings.noise_variance);
    let r_min = T::lit(settings.r_min);

    let initial_weights = HolographicWeights::uniform(channels.elements(), T::lit(settings.initial_weight));
    let initial_surface = effective_surface(&initial_weights, phases)?;
    let initial_precoder = match zero_forcing_for_schedule(
        channels,
        &initial_surface,
        &ScheduleVector::all(users),
        T::lit(settings.p_max),
    ) {
        Ok(v) => v,
        Err(Error::ZfInfeasible { .. }) => DigitalBeamformer::zeros(feeds, users),
        Err(e) => return Err(e),
    };
    let initial = initial_rates(channels, &initial_surface, &initial_precoder, sigma2);

    // single-user solutions, each from the initial weights
    let mut probes: Vec<Option<Result<InnerSolution<T>>>> = (0..users).map(|_| None).collect();
    let mut secondary = vec![T::zero(); users];
    if settings.tie_break == TieBreak::SingleUserRate {
        for d in 0..users {
            let alone = ScheduleVector::none(users).with(d);
            match inner.update(&alone, &initial_weights, channels, phases, settings) {
                Ok(sol) => {
                    let surface = effective_surface(&sol.weights, phases)?;
                    secondary[d] = per_user_rates(channels, &surface, &sol.precoder, &alone, sigma2)[d];
                    probes[d] = Some(Ok(sol));
                }
                Err(e @ Error::ZfInfeasible { .. }) => {
                    secondary[d] = -T::one();
                    probes[d] = Some(Err(e));
                }
                Err(e) => return Err(e),
            }
        }
    }

    let mut kept = JointSolution {
        schedule: ScheduleVector::none(users),
        weights: initial_weights,
        precoder: DigitalBeamformer::zeros(feeds, users),
        rates: vec![T::zero(); users],
        sum_rate: T::zero(),
        history: Vec::with_capacity(users),
    };

    for user in admission_order_by(&initial, &secondary) {
        let rejection = if kept.schedule.count() >= feeds {
            Some(Rejection::Capacity)
        } else {
            let tentative = kept.schedule.with(user);
            let attempt = match probes[user].take() {
                Some(probe) if kept.schedule.count() == 0 => probe,
                _ => inner.update(&tentative, &kept.weights, channels, phases, settings),
            };
            match attempt {
                Err(Error::ZfInfeasible { .. }) => Some(Rejection::ZfInfeasible),
                Err(e) => return Err(e),
                Ok(solution) => {
                    let surface = effective_surface(&solution.weights, phases)?;
                    let rates = per_user_rates(channels, &surface, &solution.precoder, &tentative, sigma2);
                    let sum_rate: T = tentative.scheduled().iter().map(|&d| rates[d]).sum();
                    let qos_met = tentative.scheduled().iter().all(|&d| rates[d] >= r_min);
                    if !qos_met {
                        Some(Rejection::Qos)
                    } else if settings.admission == AdmissionRule::QosAndSumRate && sum_rate < kept.sum_rate {
                        Some(Rejection::SumRate)
                    } else {
                        kept.schedule = tentative;
                        kept.weights = solution.weights;
                        kept.precoder = solution.precoder;
                        kept.rates = rates;
                        kept.sum_rate = sum_rate;
                        None
                    }
                }
            }
        };
        kept.history.push(CandidateOutcome {
            user,
            rejection,
            kept_sum_rate: kept.sum_rate,
        });
    }
    Ok(kept)
}
