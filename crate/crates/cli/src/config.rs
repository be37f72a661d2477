//! Run configuration: a flat TOML file whose keys mirror the link symbols.
//!
//! Everything except the threshold and the balance weights has a default;
//! unknown keys are rejected. All quantities are SI base units.

use std::fs;
use std::path::{Path, PathBuf};

use molcom_core::{
    BalanceWeights, ChannelParams, MonteCarloConfig, OptimizerConfig, ParticleSimConfig,
    ThresholdSpec,
};
use serde::Deserialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdMode {
    Absolute,
    Fractional,
}

/// On-disk layout. Field names are the documented config keys.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default = "defaults::diffusion_coefficient")]
    diffusion_coefficient: f64,
    #[serde(default = "defaults::distance")]
    distance: f64,
    #[serde(default = "defaults::receiver_radius")]
    receiver_radius: f64,
    #[serde(default = "defaults::bit_interval")]
    bit_interval: f64,
    #[serde(default = "defaults::memory_length")]
    memory_length: usize,
    #[serde(default = "defaults::delta_t")]
    delta_t: f64,

    threshold_mode: ThresholdMode,
    threshold_value: f64,
    weight_n: f64,
    weight_p: f64,

    #[serde(default = "defaults::nm_min")]
    nm_min: f64,
    #[serde(default = "defaults::nm_max")]
    nm_max: f64,
    #[serde(default = "defaults::grid_points")]
    grid_points: usize,
    #[serde(default = "defaults::learning_rate")]
    learning_rate: f64,
    #[serde(default = "defaults::max_iterations")]
    max_iterations: usize,
    #[serde(default = "defaults::tolerance")]
    tolerance: f64,
    #[serde(default)]
    seed: u64,

    initial_n_m: Option<f64>,
    #[serde(default = "defaults::n_m")]
    n_m: f64,
    #[serde(default = "defaults::mc_bits")]
    mc_bits: u64,
    #[serde(default = "defaults::mc_chunk_size")]
    mc_chunk_size: u64,
    #[serde(default = "defaults::particle_count")]
    particle_count: u64,
    particle_horizon: Option<f64>,
    distances: Option<Vec<f64>>,
    weight_pairs: Option<Vec<[f64; 2]>>,
    output: Option<PathBuf>,
}

mod defaults {
    pub fn diffusion_coefficient() -> f64 {
        1e-9
    }
    pub fn distance() -> f64 {
        10e-6
    }
    pub fn receiver_radius() -> f64 {
        4e-6
    }
    pub fn bit_interval() -> f64 {
        1.0
    }
    pub fn memory_length() -> usize {
        4
    }
    pub fn delta_t() -> f64 {
        1e-4
    }
    pub fn nm_min() -> f64 {
        1e3
    }
    pub fn nm_max() -> f64 {
        1e5
    }
    pub fn grid_points() -> usize {
        101
    }
    // 1e7 stalls far from the optimum for BER-dominated weights.
    pub fn learning_rate() -> f64 {
        5e7
    }
    pub fn max_iterations() -> usize {
        10_000
    }
    pub fn tolerance() -> f64 {
        1e-12
    }
    pub fn n_m() -> f64 {
        1e4
    }
    pub fn mc_bits() -> u64 {
        1_000_000
    }
    pub fn mc_chunk_size() -> u64 {
        65_536
    }
    pub fn particle_count() -> u64 {
        100_000
    }
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub params: ChannelParams,
    pub memory_length: usize,
    pub threshold: ThresholdSpec,
    pub weights: BalanceWeights,
    pub nm_min: f64,
    pub nm_max: f64,
    pub grid_points: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Operating point for the Monte Carlo check.
    pub n_m: f64,
    pub monte_carlo: MonteCarloConfig,
    pub particles: ParticleSimConfig,
    /// Distances for the SNR sweep, in order.
    pub distances: Vec<f64>,
    /// `(w_n, w_p)` pairs for the balance sweep, in order.
    pub weight_pairs: Vec<BalanceWeights>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        raw.validate()
    }

    /// Replaces every seed with `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.monte_carlo.seed = seed;
        self.particles.seed = seed;
        self
    }

    pub fn grid(&self) -> Vec<f64> {
        molcom_core::tradeoff::uniform_grid(self.nm_min, self.nm_max, self.grid_points)
            .expect("grid validated at load time")
    }

    pub fn grid_step(&self) -> f64 {
        (self.nm_max - self.nm_min) / (self.grid_points - 1) as f64
    }
}

fn keyed(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("key `{key}`: {msg}"))
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(keyed(
            key,
            format_args!("must be positive and finite, got {v}"),
        ))
    }
}

impl RawConfig {
    fn validate(self) -> Result<RunConfig, CliError> {
        let channel_key = if self.receiver_radius >= self.distance {
            "receiver_radius"
        } else {
            "bit_interval"
        };
        for (key, v) in [
            ("diffusion_coefficient", self.diffusion_coefficient),
            ("distance", self.distance),
            ("receiver_radius", self.receiver_radius),
            ("bit_interval", self.bit_interval),
        ] {
            positive(key, v)?;
        }
        let params = ChannelParams::new(
            self.diffusion_coefficient,
            self.distance,
            self.receiver_radius,
            self.bit_interval,
        )
        .map_err(|e| keyed(channel_key, e))?;

        if self.memory_length > molcom_core::detection::MAX_MEMORY_LENGTH {
            return Err(keyed(
                "memory_length",
                molcom_core::Error::MemoryTooLong(self.memory_length),
            ));
        }
        let threshold = match self.threshold_mode {
            ThresholdMode::Absolute => ThresholdSpec::absolute(self.threshold_value),
            ThresholdMode::Fractional => ThresholdSpec::fractional(self.threshold_value),
        }
        .map_err(|e| keyed("threshold_value", e))?;
        let weights =
            BalanceWeights::new(self.weight_n, self.weight_p).map_err(|e| keyed("weight_n", e))?;

        positive("nm_min", self.nm_min)?;
        positive("nm_max", self.nm_max)?;
        if self.nm_max <= self.nm_min {
            return Err(keyed("nm_max", "must exceed nm_min"));
        }
        if self.grid_points < 2 {
            return Err(keyed("grid_points", "must be at least 2"));
        }
        let initial_n_m = self.initial_n_m.unwrap_or(self.nm_min);
        if !(initial_n_m >= self.nm_min && initial_n_m <= self.nm_max) {
            return Err(keyed("initial_n_m", "must lie in [nm_min, nm_max]"));
        }
        let optimizer = OptimizerConfig {
            learning_rate: positive("learning_rate", self.learning_rate)?,
            max_iterations: self.max_iterations,
            tolerance: positive("tolerance", self.tolerance)?,
            initial_n_m,
        };
        if optimizer.max_iterations == 0 {
            return Err(keyed("max_iterations", "must be at least 1"));
        }

        positive("n_m", self.n_m)?;
        let monte_carlo = MonteCarloConfig {
            bit_count: self.mc_bits,
            seed: self.seed,
            chunk_size: self.mc_chunk_size,
        };
        monte_carlo.validate().map_err(|e| keyed("mc_bits", e))?;

        let particles = ParticleSimConfig {
            molecule_count: self.particle_count,
            time_step: self.delta_t,
            horizon: self.particle_horizon.unwrap_or(2.0 * params.peak_time()),
            seed: self.seed,
        };
        particles.validate(&params).map_err(|e| {
            let key = if self.particle_count < molcom_core::simulate::MIN_WALKERS {
                "particle_count"
            } else if self.particle_horizon.is_some() && particles.horizon < self.delta_t {
                "particle_horizon"
            } else {
                "delta_t"
            };
            keyed(key, e)
        })?;

        let distances = self.distances.unwrap_or_else(|| vec![self.distance]);
        if distances.is_empty() {
            return Err(keyed("distances", "must not be empty"));
        }
        for &d in &distances {
            params.with_distance(d).map_err(|e| keyed("distances", e))?;
        }
        let weight_pairs = match self.weight_pairs {
            None => vec![weights],
            Some(pairs) if pairs.is_empty() => {
                return Err(keyed("weight_pairs", "must not be empty"))
            }
            Some(pairs) => pairs
                .iter()
                .map(|&[w_n, w_p]| BalanceWeights::new(w_n, w_p))
                .collect::<Result<_, _>>()
                .map_err(|e| keyed("weight_pairs", e))?,
        };

        Ok(RunConfig {
            params,
            memory_length: self.memory_length,
            threshold,
            weights,
            nm_min: self.nm_min,
            nm_max: self.nm_max,
            grid_points: self.grid_points,
            optimizer,
            seed: self.seed,
            n_m: self.n_m,
            monte_carlo,
            particles,
            distances,
            weight_pairs,
            output: self.output,
        })
    }
}
