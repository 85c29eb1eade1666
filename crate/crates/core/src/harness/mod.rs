//! Monte-Carlo orchestration: per-realization runs, the random-weight
//! benchmark, sweeps over SNR and surface size, and their statistics.
//!
//! Channel draws depend only on `(seed, realization)`: realization `r` reads
//! ChaCha stream `2r` for its paths and stream `2r + 1` for any benchmark
//! weights. Both schemes and every SNR point therefore see the same
//! channels, and surfaces of different size see the same paths.

mod config;
pub mod gradcheck;
mod output;
mod stats;

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelSet};
use crate::error::{Error, Result};
use crate::precoder::{per_user_rates, zero_forcing_for_schedule};
use crate::scalar::Real;
use crate::scheduler::{
    greedy_schedule, greedy_schedule_with, InnerSolution, InnerUpdate, JointSolution, ScheduleVector,
    SchedulerSettings,
};
use crate::surface::{build_phase_matrix, effective_surface, HolographicWeights, PhaseMatrix, SurfaceGeometry};

pub use config::{Scheme, SystemConfig};
pub use output::{
    emit_outputs, parse_cdf_csv, parse_outputs, parse_stats_csv, plot_script, write_cdf_csv, write_stats_csv, OutputFormat,
    CDF_HEADER, STATS_HEADER,
};
pub use stats::{aggregate, empirical_cdf, AggregateStats, CdfKnot};

/// Outcome of one channel realization under one scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub realization: u64,
    pub scheme: Scheme,
    pub elements: usize,
    pub snr_db: f64,
    pub rates: Vec<f64>,
    pub schedule: Vec<bool>,
    pub sum_rate: f64,
    pub config_hash: u64,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for realization `r`'s channel paths.
pub fn channel_rng(seed: u64, realization: u64) -> ChaCha8Rng {
    stream_rng(seed, realization.wrapping_mul(2))
}

/// Generator for realization `r`'s benchmark weights.
pub fn benchmark_rng(seed: u64, realization: u64) -> ChaCha8Rng {
    stream_rng(seed, realization.wrapping_mul(2).wrapping_add(1))
}

/// Fixed geometry of one configuration.
#[derive(Debug, Clone)]
pub struct Scenario<T: Real> {
    pub config: SystemConfig,
    pub array: ArrayGeometry<T>,
    pub surface: SurfaceGeometry<T>,
    pub phases: PhaseMatrix<T>,
    fingerprint: u64,
}

impl<T: Real> Scenario<T> {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        config.validate()?;
        let array = ArrayGeometry::new(config.elements, config.carrier_hz, config.spacing_wavelengths)?
            .with_normalization(config.normalization);
        let surface = SurfaceGeometry::new(&array, config.feeds, config.permittivity)?;
        let phases = build_phase_matrix(&surface);
        Ok(Self {
            config: config.clone(),
            array,
            surface,
            phases,
            fingerprint: config.fingerprint(),
        })
    }

    pub fn channels(&self, realization: u64) -> Result<ChannelSet<T>> {
        let scales: Vec<T> = self.config.scale_factors.iter().map(|&f| T::lit(f)).collect();
        ChannelSet::sample(
            &mut channel_rng(self.config.seed, realization),
            &self.array,
            &scales,
            self.config.paths,
        )
    }

    pub fn solve(&self, snr_db: f64, realization: u64, scheme: Scheme) -> Result<JointSolution<T>> {
        let channels = self.channels(realization)?;
        let settings = self.config.scheduler_settings(snr_db);
        match scheme {
            Scheme::Proposed => greedy_schedule(&channels, &self.phases, &settings),
            Scheme::Benchmark => benchmark_scheme(
                &channels,
                &self.phases,
                &settings,
                &mut benchmark_rng(self.config.seed, realization),
            ),
        }
    }

    pub fn run_realization(&self, snr_db: f64, realization: u64, scheme: Scheme) -> Result<ExperimentRecord> {
        let solution = self.solve(snr_db, realization, scheme).map_err(|e| Error::Realization {
            realization,
            source: Box::new(e),
        })?;
        Ok(ExperimentRecord {
            realization,
            scheme,
            elements: self.config.elements,
            snr_db,
            rates: solution.rates.iter().map(|r| r.as_f64()).collect(),
            schedule: solution.schedule.bits().to_vec(),
            sum_rate: solution.sum_rate.as_f64(),
            config_hash: self.fingerprint,
        })
    }

    /// All realizations at one SNR point, in realization order.
    pub fn run_point(&self, snr_db: f64, scheme: Scheme) -> Result<Vec<ExperimentRecord>> {
        (0..self.config.realizations)
            .into_par_iter()
            .map(|r| self.run_realization(snr_db, r, scheme))
            .collect()
    }
}

/// One realization of `config` at `snr_db` under `config.scheme`.
pub fn run_realization(config: &SystemConfig, snr_db: f64, realization: u64) -> Result<ExperimentRecord> {
    Scenario::<f64>::new(config)?.run_realization(snr_db, realization, config.scheme)
}

/// Holographic weights drawn uniformly on `[0, 1]` for every tentative
/// admission, followed by ZF.
pub struct RandomWeights<'a, R: Rng + ?Sized> {
    pub rng: &'a mut R,
}

impl<T: Real, R: Rng + ?Sized> InnerUpdate<T> for RandomWeights<'_, R> {
    fn update(
        &mut self,
        schedule: &ScheduleVector,
        start: &HolographicWeights<T>,
        channels: &ChannelSet<T>,
        phases: &PhaseMatrix<T>,
        settings: &SchedulerSettings,
    ) -> Result<InnerSolution<T>> {
        let draws = Array1::from_shape_fn(start.len(), |_| T::lit(self.rng.random::<f64>()));
        let weights = HolographicWeights::new(draws)?;
        let surface = effective_surface(&weights, phases)?;
        let precoder = zero_forcing_for_schedule(channels, &surface, schedule, T::lit(settings.p_max))?;
        let rate = per_user_rates(channels, &surface, &precoder, schedule, T::lit(settings.noise_variance))
            .into_iter()
            .sum();
        Ok(InnerSolution {
            weights,
            precoder,
            round_sum_rates: vec![rate],
        })
    }
}

/// Greedy QoS scheduling with random instead of optimized holographic weights.
pub fn benchmark_scheme<T: Real, R: Rng + ?Sized>(
    channels: &ChannelSet<T>,
    phases: &PhaseMatrix<T>,
    settings: &SchedulerSettings,
    rng: &mut R,
) -> Result<JointSolution<T>> {
    greedy_schedule_with(channels, phases, settings, &mut RandomWeights { rng })
}

/// Aggregates plus the raw records they came from.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub stats: Vec<AggregateStats>,
    pub records: Vec<ExperimentRecord>,
}

impl Sweep {
    pub fn point(&self, scheme: Scheme, elements: usize, snr_db: f64) -> Option<&AggregateStats> {
        self.stats
            .iter()
            .find(|s| s.scheme == scheme && s.elements == elements && s.snr_db == snr_db)
    }

    pub fn records_at(&self, scheme: Scheme, elements: usize, snr_db: f64) -> Vec<&ExperimentRecord> {
        self.records
            .iter()
            .filter(|r| r.scheme == scheme && r.elements == elements && r.snr_db == snr_db)
            .collect()
    }

    fn extend(&mut self, other: Sweep) {
        self.stats.extend(other.stats);
        self.records.extend(other.records);
    }
}

fn sweep_points(config: &SystemConfig, elements: &[usize], snrs: &[f64], schemes: &[Scheme]) -> Result<Sweep> {
    let mut sweep = Sweep {
        stats: Vec::new(),
        records: Vec::new(),
    };
    for &scheme in schemes {
        for &m in elements {
            let scenario = Scenario::<f64>::new(&SystemConfig {
                elements: m,
                ..config.clone()
            })?;
            for &snr in snrs {
                let records = scenario.run_point(snr, scheme)?;
                sweep.stats.push(aggregate(&records)?);
                sweep.records.extend(records);
            }
        }
    }
    Ok(sweep)
}

/// Every SNR point of `config.snr_db` for each scheme at `config.elements`.
pub fn sweep_snr(config: &SystemConfig, schemes: &[Scheme]) -> Result<Sweep> {
    sweep_points(config, &[config.elements], &config.snr_db, schemes)
}

/// Every element count of `config.size_grid` at each of `config.size_snr_db`.
pub fn sweep_size(config: &SystemConfig, schemes: &[Scheme]) -> Result<Sweep> {
    let mut sweep = Sweep {
        stats: Vec::new(),
        records: Vec::new(),
    };
    for &snr in &config.size_snr_db {
        sweep.extend(sweep_points(config, &config.size_grid, &[snr], schemes)?);
    }
    Ok(sweep)
}

/// The `config.cdf_snr_db` points at `config.elements`.
pub fn sweep_cdf(config: &SystemConfig, schemes: &[Scheme]) -> Result<Sweep> {
    sweep_points(config, &[config.elements], &config.cdf_snr_db, schemes)
}
