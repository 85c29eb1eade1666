use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{ExperimentRecord, Scheme};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CdfKnot {
    pub sum_rate: f64,
    pub cum_frac: f64,
}

/// Per-point averages over all realizations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    pub scheme: Scheme,
    pub elements: usize,
    pub snr_db: f64,
    pub mean_rate: Vec<f64>,
    /// Fraction of realizations in which each user was scheduled.
    pub sched_freq: Vec<f64>,
    pub mean_sum_rate: f64,
    pub cdf: Vec<CdfKnot>,
}

/// Sorted sum rates with cumulative fractions `i/N`, `i = 1..=N`.
pub fn empirical_cdf(records: &[ExperimentRecord]) -> Result<Vec<CdfKnot>> {
    if records.is_empty() {
        return Err(Error::EmptyRecords);
    }
    let mut rates: Vec<f64> = records.iter().map(|r| r.sum_rate).collect();
    rates.sort_by(f64::total_cmp);
    let n = rates.len() as f64;
    Ok(rates
        .into_iter()
        .enumerate()
        .map(|(i, sum_rate)| CdfKnot {
            sum_rate,
            cum_frac: (i + 1) as f64 / n,
        })
        .collect())
}

/// Averages records that share one scheme, size and SNR point.
pub fn aggregate(records: &[ExperimentRecord]) -> Result<AggregateStats> {
    let first = records.first().ok_or(Error::EmptyRecords)?;
    let users = first.rates.len();
    let n = records.len() as f64;
    let mut mean_rate = vec![0.0; users];
    let mut sched_freq = vec![0.0; users];
    let mut mean_sum_rate = 0.0;
    for r in records {
        if r.scheme != first.scheme || r.elements != first.elements || r.snr_db != first.snr_db {
            return Err(Error::InvalidConfig("aggregating records from different points".into()));
        }
        if r.rates.len() != users || r.schedule.len() != users {
            return Err(Error::DimensionMismatch {
                context: "users per record",
                expected: users,
                actual: r.rates.len(),
            });
        }
        for d in 0..users {
            mean_rate[d] += r.rates[d];
            if r.schedule[d] {
                sched_freq[d] += 1.0;
            }
        }
        mean_sum_rate += r.sum_rate;
    }
    mean_rate.iter_mut().for_each(|x| *x /= n);
    sched_freq.iter_mut().for_each(|x| *x /= n);
    Ok(AggregateStats {
        scheme: first.scheme,
        elements: first.elements,
        snr_db: first.snr_db,
        mean_rate,
        sched_freq,
        mean_sum_rate: mean_sum_rate / n,
        cdf: empirical_cdf(records)?,
    })
}
