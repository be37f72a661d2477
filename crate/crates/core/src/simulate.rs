//! Stochastic cross-checks of the analytical model.
//!
//! Two engines live here:
//!
//! - a Gaussian link simulator that draws random OOK bit streams, forms the
//!   sampled concentration with counting noise and ISI from the previous `L`
//!   bits, and counts threshold-decision errors;
//! - a Brownian particle simulator that releases molecules at the origin and
//!   counts how many sit inside the passive receiver sphere over time.
//!
//! Both are deterministic for a fixed seed regardless of the rayon pool
//! size: work is split into fixed units, each with its own ChaCha stream, and
//! only integer counts are reduced.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::channel::ChannelParams;
use crate::detection::{check_link, LinkConfig};
use crate::error::{Error, Result};

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Smallest bit count accepted for a BER estimate.
pub const MIN_BITS: u64 = 10_000;

/// Smallest walker population accepted by the particle simulator.
pub const MIN_WALKERS: u64 = 10_000;

const WALKERS_PER_JOB: u64 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonteCarloConfig {
    pub bit_count: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl MonteCarloConfig {
    pub fn new(bit_count: u64, seed: u64) -> Result<Self> {
        let cfg = MonteCarloConfig {
            bit_count,
            seed,
            chunk_size: 65_536,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bit_count < MIN_BITS {
            return Err(Error::InvalidConfig(format!(
                "bit_count must be at least {MIN_BITS}, got {}",
                self.bit_count
            )));
        }
        if self.chunk_size == 0 {
            return Err(Error::InvalidConfig("chunk_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Simulated error rate with its 95% Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub half_width_95: f64,
    pub errors_observed: u64,
    pub bits: u64,
}

impl BerEstimate {
    pub fn from_counts(errors: u64, bits: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(errors, bits, Z_95);
        BerEstimate {
            p_hat: errors as f64 / bits as f64,
            ci_low,
            ci_high,
            half_width_95: (ci_high - ci_low) / 2.0,
            errors_observed: errors,
            bits,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci_low <= p && p <= self.ci_high
    }
}

/// Wilson score interval for `successes` out of `trials` at quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let high = if successes == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (low, high)
}

/// Simulates `mc.bit_count` equiprobable OOK bits through the Gaussian
/// channel and counts decision errors.
///
/// Each chunk of `chunk_size` bits uses ChaCha stream `chunk_index` and draws
/// its own `L` bits of history. The sampled concentration for bit `k` is
/// Normal with mean `n_m sum_j b_{k-j} taps[j]` and variance mean / `V_R`,
/// clamped at zero, and decided as 1 iff it reaches the threshold.
pub fn simulate_link_ber(
    params: &ChannelParams,
    link: &LinkConfig,
    mc: &MonteCarloConfig,
) -> Result<BerEstimate> {
    mc.validate()?;
    let taps = params.channel_taps(link.memory_length);
    let threshold = check_link(&taps, link)?;
    let scaled: Vec<f64> = taps.taps().iter().map(|t| link.n_m * t).collect();
    let volume = params.receiver_volume();
    let chunks = mc.bit_count.div_ceil(mc.chunk_size);

    let errors = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
            rng.set_stream(chunk);
            let start = chunk * mc.chunk_size;
            let len = mc.chunk_size.min(mc.bit_count - start);
            // history[j] holds the bit sent j intervals ago
            let mut history = vec![false; scaled.len()];
            for h in history.iter_mut().skip(1) {
                *h = rng.random();
            }
            let mut errors = 0u64;
            for _ in 0..len {
                history.rotate_right(1);
                let bit: bool = rng.random();
                history[0] = bit;
                let mean: f64 = history
                    .iter()
                    .zip(&scaled)
                    .filter(|(b, _)| **b)
                    .map(|(_, s)| s)
                    .sum();
                let noise: f64 = rng.sample(StandardNormal);
                let y = if mean > 0.0 {
                    (mean + (mean / volume).sqrt() * noise).max(0.0)
                } else {
                    0.0
                };
                if !y.is_finite() {
                    return Err(Error::NonFinite(format!("simulated sample {y}")));
                }
                if (y >= threshold) != bit {
                    errors += 1;
                }
            }
            Ok(errors)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum();

    Ok(BerEstimate::from_counts(errors, mc.bit_count))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleSimConfig {
    pub molecule_count: u64,
    pub time_step: f64,
    pub horizon: f64,
    pub seed: u64,
}

impl ParticleSimConfig {
    pub fn validate(&self, params: &ChannelParams) -> Result<()> {
        if self.molecule_count < MIN_WALKERS {
            return Err(Error::InvalidConfig(format!(
                "molecule_count must be at least {MIN_WALKERS}, got {}",
                self.molecule_count
            )));
        }
        if !(self.time_step.is_finite() && self.time_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "time_step must be > 0, got {:e}",
                self.time_step
            )));
        }
        let limit = params.peak_time() / 50.0;
        if self.time_step > limit {
            return Err(Error::InvalidConfig(format!(
                "time_step {:e} s exceeds peak_time / 50 = {limit:e} s",
                self.time_step
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.time_step) {
            return Err(Error::InvalidConfig(format!(
                "horizon must be >= time_step, got {:e}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// Receiver occupancy over the whole simulated schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleRun {
    pub times: Vec<f64>,
    pub counts: Vec<u64>,
    pub molecule_count: u64,
}

impl ParticleRun {
    /// Time of the largest count after a centered moving average over
    /// `2 half_width + 1` schedule points (truncated at the ends). The
    /// earliest point wins a tie. `half_width = 0` is the raw argmax.
    pub fn empirical_peak_time(&self, half_width: usize) -> f64 {
        let n = self.counts.len();
        let mut prefix = vec![0u64; n + 1];
        for (i, &c) in self.counts.iter().enumerate() {
            prefix[i + 1] = prefix[i] + c;
        }
        let smoothed = |i: usize| {
            let lo = i.saturating_sub(half_width);
            let hi = (i + half_width + 1).min(n);
            (prefix[hi] - prefix[lo]) as f64 / (hi - lo) as f64
        };
        let mut best = 0;
        let mut best_value = smoothed(0);
        for i in 1..n {
            let v = smoothed(i);
            if v > best_value {
                best = i;
                best_value = v;
            }
        }
        self.times[best]
    }

    fn count_at(&self, t: f64) -> Option<u64> {
        self.times
            .iter()
            .position(|&s| s == t)
            .map(|i| self.counts[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianSample {
    pub time: f64,
    pub observed_count: u64,
    pub expected_count: f64,
    pub relative_deviation: f64,
}

/// Time schedule: multiples of the time step up to the horizon merged with
/// the requested sample times.
fn schedule(sim: &ParticleSimConfig, sample_times: &[f64]) -> Vec<f64> {
    let steps = (sim.horizon / sim.time_step).floor() as u64;
    let mut times: Vec<f64> = (1..=steps).map(|k| k as f64 * sim.time_step).collect();
    times.extend_from_slice(sample_times);
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

/// Simulates independent 3D random walks from the origin and counts the
/// walkers inside the receiver sphere at every scheduled time.
///
/// Walker `i` draws from ChaCha stream `i` of `seed`; increments over an
/// interval `dt` are Normal(0, 2 D dt) per axis, so arbitrary sample times
/// are hit exactly.
pub fn simulate_walkers(
    params: &ChannelParams,
    sim: &ParticleSimConfig,
    sample_times: &[f64],
) -> Result<ParticleRun> {
    sim.validate(params)?;
    if let Some(&t) = sample_times
        .iter()
        .find(|&&t| !(t > 0.0 && t <= sim.horizon))
    {
        return Err(Error::InvalidConfig(format!(
            "sample time {t:e} s outside (0, {:e}]",
            sim.horizon
        )));
    }
    let times = schedule(sim, sample_times);
    let two_d = 2.0 * params.diffusion_coefficient();
    let sigmas: Vec<f64> = std::iter::once(times[0])
        .chain(times.windows(2).map(|w| w[1] - w[0]))
        .map(|dt| (two_d * dt).sqrt())
        .collect();
    let (cx, r2) = (params.distance(), params.receiver_radius().powi(2));
    let jobs = sim.molecule_count.div_ceil(WALKERS_PER_JOB);

    let counts = (0..jobs)
        .into_par_iter()
        .map(|job| {
            let mut counts = vec![0u64; times.len()];
            let first = job * WALKERS_PER_JOB;
            let last = (first + WALKERS_PER_JOB).min(sim.molecule_count);
            for walker in first..last {
                let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
                rng.set_stream(walker);
                let (mut x, mut y, mut z) = (0.0f64, 0.0f64, 0.0f64);
                for (slot, &s) in counts.iter_mut().zip(&sigmas) {
                    x += s * rng.sample::<f64, _>(StandardNormal);
                    y += s * rng.sample::<f64, _>(StandardNormal);
                    z += s * rng.sample::<f64, _>(StandardNormal);
                    let dx = x - cx;
                    if dx * dx + y * y + z * z <= r2 {
                        *slot += 1;
                    }
                }
            }
            counts
        })
        .reduce(
            || vec![0u64; times.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );

    Ok(ParticleRun {
        times,
        counts,
        molecule_count: sim.molecule_count,
    })
}

/// Compares simulated receiver occupancy with `N h(t) V_R` at each sample time.
pub fn brownian_validate(
    params: &ChannelParams,
    sim: &ParticleSimConfig,
    sample_times: &[f64],
) -> Result<Vec<BrownianSample>> {
    let run = simulate_walkers(params, sim, sample_times)?;
    samples_from_run(params, &run, sample_times)
}

pub fn samples_from_run(
    params: &ChannelParams,
    run: &ParticleRun,
    sample_times: &[f64],
) -> Result<Vec<BrownianSample>> {
    let volume = params.receiver_volume();
    sample_times
        .iter()
        .map(|&t| {
            let observed = run.count_at(t).ok_or_else(|| {
                Error::InvalidConfig(format!("sample time {t:e} s was not simulated"))
            })?;
            let expected = run.molecule_count as f64 * params.impulse_response(t)? * volume;
            let relative_deviation = if expected > 0.0 {
                (observed as f64 - expected).abs() / expected
            } else {
                f64::INFINITY
            };
            Ok(BrownianSample {
                time: t,
                observed_count: observed,
                expected_count: expected,
                relative_deviation,
            })
        })
        .collect()
}
