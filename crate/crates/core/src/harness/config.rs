use std::collections::hash_map::DefaultHasher;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{ArrayNormalization, DEFAULT_SCALE_FACTORS};
use crate::error::{Error, Result};
use crate::holo_opt::OptimizerSettings;
use crate::scheduler::{AdmissionRule, SchedulerSettings, TieBreak};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Gradient-optimized holographic weights.
    Proposed,
    /// Uniformly random holographic weights, redrawn per tentative admission.
    Benchmark,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::Benchmark => "benchmark",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(Scheme::Proposed),
            "benchmark" => Ok(Scheme::Benchmark),
            other => Err(Error::InvalidConfig(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Every scalar parameter of a scenario. Loaded from a flat TOML document;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    pub users: usize,
    /// RF chains, equal to the number of feeds.
    pub feeds: usize,
    /// Surface elements; must be a perfect square.
    pub elements: usize,
    pub p_max: f64,
    pub r_min: f64,
    pub snr_db: Vec<f64>,
    pub realizations: u64,
    pub carrier_hz: f64,
    /// Element spacing in wavelengths.
    pub spacing_wavelengths: f64,
    pub permittivity: f64,
    /// Propagation paths per user.
    pub paths: usize,
    pub scale_factors: Vec<f64>,
    /// Array response prefactor. Experiments default to the norm-preserving
    /// `1/√M`; `literal` selects `1/M`.
    pub normalization: ArrayNormalization,
    pub learning_rate: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub backtracking: bool,
    pub alt_rounds: usize,
    pub initial_weight: f64,
    pub admission: AdmissionRule,
    pub tie_break: TieBreak,
    pub seed: u64,
    pub scheme: Scheme,
    /// Element counts visited by `sweep-size`.
    pub size_grid: Vec<usize>,
    /// SNR points visited by `sweep-size`.
    pub size_snr_db: Vec<f64>,
    /// SNR points visited by `cdf`.
    pub cdf_snr_db: Vec<f64>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let optimizer = OptimizerSettings::default();
        Self {
            users: 6,
            feeds: 8,
            elements: 36,
            p_max: 1.0,
            r_min: 5.0,
            snr_db: vec![10.0, 15.0, 20.0, 25.0, 30.0, 35.0],
            realizations: 100,
            carrier_hz: 30e9,
            spacing_wavelengths: 1.0 / 3.0,
            permittivity: 3.0,
            paths: 3,
            scale_factors: DEFAULT_SCALE_FACTORS.to_vec(),
            normalization: ArrayNormalization::Unitary,
            learning_rate: optimizer.learning_rate,
            tolerance: optimizer.tolerance,
            max_iterations: optimizer.max_iterations,
            backtracking: optimizer.backtracking,
            alt_rounds: 3,
            initial_weight: 0.5,
            admission: AdmissionRule::default(),
            tie_break: TieBreak::default(),
            seed: 1,
            scheme: Scheme::Proposed,
            size_grid: vec![16, 36, 64, 100],
            size_snr_db: vec![10.0, 30.0],
            cdf_snr_db: vec![10.0, 30.0],
        }
    }
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: Self = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        crate::channel::perfect_square_side(self.elements)?;
        for &m in &self.size_grid {
            crate::channel::perfect_square_side(m)?;
        }
        if self.users == 0 {
            return fail("users must be at least 1".into());
        }
        if self.users > self.feeds {
            return fail(format!("users ({}) must not exceed feeds ({})", self.users, self.feeds));
        }
        if self.scale_factors.len() != self.users {
            return fail(format!(
                "scale_factors has {} entries for {} users",
                self.scale_factors.len(),
                self.users
            ));
        }
        if self.scale_factors.iter().any(|f| !(*f > 0.0)) {
            return fail("scale factors must be positive".into());
        }
        if self.realizations == 0 {
            return fail("realizations must be at least 1".into());
        }
        if self.paths == 0 {
            return fail("paths must be at least 1".into());
        }
        if !(self.carrier_hz > 0.0) || !(self.spacing_wavelengths > 0.0) || !(self.permittivity > 0.0) {
            return fail("carrier, spacing and permittivity must be positive".into());
        }
        if self
            .snr_db
            .iter()
            .chain(&self.size_snr_db)
            .chain(&self.cdf_snr_db)
            .any(|s| !s.is_finite())
        {
            return fail("SNR points must be finite".into());
        }
        self.scheduler_settings(0.0).validate()
    }

    pub fn optimizer_settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            learning_rate: self.learning_rate,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            backtracking: self.backtracking,
        }
    }

    /// Noise variance for a transmit SNR: `σ² = P_max / 10^(snr/10)`.
    pub fn noise_variance(&self, snr_db: f64) -> f64 {
        self.p_max / 10f64.powf(snr_db / 10.0)
    }

    pub fn scheduler_settings(&self, snr_db: f64) -> SchedulerSettings {
        SchedulerSettings {
            p_max: self.p_max,
            r_min: self.r_min,
            noise_variance: self.noise_variance(snr_db),
            initial_weight: self.initial_weight,
            alt_rounds: self.alt_rounds,
            admission: self.admission,
            tie_break: self.tie_break,
            optimizer: self.optimizer_settings(),
        }
    }

    /// Stable digest of every parameter, stamped on each record.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        serde_json::to_string(self).expect("config serializes").hash(&mut hasher);
        hasher.finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = SystemConfig::default();
        c.validate().unwrap();
        assert_eq!(c.scale_factors, vec![1.2, 1.0, 0.8, 0.6, 0.4, 0.2]);
        assert!((c.noise_variance(30.0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(SystemConfig::from_toml_str("users = 6\nbogus = 1\n").is_err());
    }

    #[test]
    fn partial_document_fills_defaults() {
        let c = SystemConfig::from_toml_str("elements = 64\nseed = 9\nscheme = \"benchmark\"\n").unwrap();
        assert_eq!(c.elements, 64);
        assert_eq!(c.seed, 9);
        assert_eq!(c.scheme, Scheme::Benchmark);
        assert_eq!(c.users, 6);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(SystemConfig::from_toml_str("elements = 35\n").is_err());
        assert!(SystemConfig::from_toml_str("users = 9\n").is_err());
        assert!(SystemConfig::from_toml_str("p_max = 0.0\n").is_err());
        assert!(SystemConfig::from_toml_str("r_min = -1.0\n").is_err());
        assert!(SystemConfig::from_toml_str("realizations = 0\n").is_err());
        assert!(SystemConfig::from_toml_str("users = 3\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let c = SystemConfig {
            elements: 64,
            snr_db: vec![12.5],
            ..Default::default()
        };
        assert_eq!(SystemConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
        assert_eq!(c.fingerprint(), c.clone().fingerprint());
        assert_ne!(c.fingerprint(), SystemConfig::default().fingerprint());
    }
}
