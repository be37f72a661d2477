//! OOK threshold detection with inter-symbol interference.
//!
//! Under hypothesis `H1` (current bit is 1) the sampled concentration is
//! Gaussian with mean `n_m (taps[0] + sum_j b_j taps[j])`; under `H0` the
//! current-bit term is absent. In both cases the counting-noise variance is
//! the mean divided by the receiver volume. The miss and false-alarm
//! probabilities average the Gaussian tail over all `2^L` equiprobable ISI
//! patterns of the previous `L` bits.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::channel::{ChannelParams, TapVector};
use crate::error::{Error, Result};
use crate::gradient::{self, BerGradient};
use crate::sum::CompensatedSum;

/// Largest memory length accepted by the exact pattern enumeration.
pub const MAX_MEMORY_LENGTH: usize = 24;

/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::domain("x", x, "Q-function argument is NaN"));
    }
    Ok(q(x))
}

#[inline]
pub(crate) fn q(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub(crate) fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// How the decision threshold `C_Thr` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdSpec {
    /// Fixed concentration in molecules per cubic meter.
    Absolute(f64),
    /// Fraction `alpha` of the noiseless main-tap concentration,
    /// `C_Thr = alpha n_m taps[0]`.
    Fractional(f64),
}

impl ThresholdSpec {
    pub fn absolute(value: f64) -> Result<Self> {
        let spec = ThresholdSpec::Absolute(value);
        spec.validate()?;
        Ok(spec)
    }

    pub fn fractional(alpha: f64) -> Result<Self> {
        let spec = ThresholdSpec::Fractional(alpha);
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdSpec::Absolute(v) if !(v.is_finite() && v > 0.0) => Err(
                Error::InvalidThreshold(format!("absolute threshold must be > 0, got {v:e}")),
            ),
            ThresholdSpec::Fractional(a) if !(a > 0.0 && a < 1.0) => Err(Error::InvalidThreshold(
                format!("fractional threshold must lie in (0, 1), got {a}"),
            )),
            _ => Ok(()),
        }
    }

    /// Derivative of the resolved threshold with respect to `n_m`.
    pub fn slope(&self, main_tap: f64) -> f64 {
        match *self {
            ThresholdSpec::Absolute(_) => 0.0,
            ThresholdSpec::Fractional(a) => a * main_tap,
        }
    }
}

/// Resolves a threshold specification to a concentration for `n_m` released
/// molecules, rejecting thresholds at or above the peak concentration.
pub fn resolve_threshold(spec: ThresholdSpec, n_m: f64, main_tap: f64) -> Result<f64> {
    spec.validate()?;
    let threshold = match spec {
        ThresholdSpec::Absolute(v) => v,
        ThresholdSpec::Fractional(a) => a * n_m * main_tap,
    };
    let peak = n_m * main_tap;
    if threshold >= peak {
        return Err(Error::ThresholdAbovePeak { threshold, peak });
    }
    Ok(threshold)
}

/// Binary hypothesis on the current bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H0,
    H1,
}

/// Values of the previous `len` bits. Bit `j - 1` of `mask` (little-endian)
/// is the bit sent `j` intervals ago and multiplies `taps[j]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IsiPattern {
    mask: u32,
    len: u8,
}

impl IsiPattern {
    pub fn new(mask: u32, len: usize) -> Result<Self> {
        if len > MAX_MEMORY_LENGTH {
            return Err(Error::MemoryTooLong(len));
        }
        if len < 32 && mask >> len != 0 {
            return Err(Error::PatternLength {
                expected: len,
                got: 32 - mask.leading_zeros() as usize,
            });
        }
        Ok(IsiPattern {
            mask,
            len: len as u8,
        })
    }

    /// Builds a pattern from bits ordered by lag: `bits[0]` is the previous bit.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        if bits.len() > MAX_MEMORY_LENGTH {
            return Err(Error::MemoryTooLong(bits.len()));
        }
        let mask = bits
            .iter()
            .enumerate()
            .fold(0u32, |m, (i, &b)| m | (u32::from(b) << i));
        IsiPattern::new(mask, bits.len())
    }

    pub fn zeros(len: usize) -> Result<Self> {
        IsiPattern::new(0, len)
    }

    pub fn ones(len: usize) -> Result<Self> {
        let mask = if len == 0 { 0 } else { u32::MAX >> (32 - len) };
        IsiPattern::new(mask, len)
    }

    /// All `2^len` patterns in increasing mask order.
    pub fn all(len: usize) -> Result<impl Iterator<Item = IsiPattern>> {
        if len > MAX_MEMORY_LENGTH {
            return Err(Error::MemoryTooLong(len));
        }
        Ok((0..1u32 << len).map(move |mask| IsiPattern {
            mask,
            len: len as u8,
        }))
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Bit sent `lag` intervals ago, `1 <= lag <= len`.
    pub fn bit(&self, lag: usize) -> bool {
        debug_assert!((1..=self.len()).contains(&lag));
        self.mask >> (lag - 1) & 1 == 1
    }

    pub fn is_zero(&self) -> bool {
        self.mask == 0
    }
}

/// Expected concentration per released molecule for a pattern and hypothesis,
/// i.e. `[H1] taps[0] + sum_j b_j taps[j]`. Terms are added in lag order.
pub(crate) fn mean_per_molecule(taps: &[f64], pattern: IsiPattern, hypothesis: Hypothesis) -> f64 {
    let mut s = match hypothesis {
        Hypothesis::H1 => taps[0],
        Hypothesis::H0 => 0.0,
    };
    let mut m = pattern.mask;
    let mut lag = 1;
    while m != 0 {
        if m & 1 == 1 {
            s += taps[lag];
        }
        m >>= 1;
        lag += 1;
    }
    s
}

pub(crate) fn check_pattern(taps: &TapVector, pattern: IsiPattern) -> Result<()> {
    if pattern.len() != taps.memory_length() {
        return Err(Error::PatternLength {
            expected: taps.memory_length(),
            got: pattern.len(),
        });
    }
    Ok(())
}

/// Mean and variance of the sampled concentration for one ISI pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisStats {
    pub mean: f64,
    pub variance: f64,
    /// Set when the variance is zero (no molecules in flight under `H0`).
    pub degenerate: bool,
}

impl HypothesisStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Probability of deciding bit 1, `P(y >= threshold)`. A degenerate
    /// distribution decides deterministically.
    pub fn prob_decide_one(&self, threshold: f64) -> f64 {
        if self.degenerate {
            if self.mean >= threshold {
                1.0
            } else {
                0.0
            }
        } else {
            q((threshold - self.mean) / self.std_dev())
        }
    }

    /// Probability of deciding bit 0, `P(y < threshold)`, evaluated as a
    /// tail of its own so small values keep full relative precision.
    pub fn prob_decide_zero(&self, threshold: f64) -> f64 {
        if self.degenerate {
            if self.mean >= threshold {
                0.0
            } else {
                1.0
            }
        } else {
            q((self.mean - threshold) / self.std_dev())
        }
    }
}

pub fn hypothesis_stats(
    taps: &TapVector,
    n_m: f64,
    pattern: IsiPattern,
    hypothesis: Hypothesis,
    receiver_volume: f64,
) -> Result<HypothesisStats> {
    check_pattern(taps, pattern)?;
    Ok(stats_unchecked(
        taps.taps(),
        n_m,
        pattern,
        hypothesis,
        receiver_volume,
    ))
}

#[inline]
pub(crate) fn stats_unchecked(
    taps: &[f64],
    n_m: f64,
    pattern: IsiPattern,
    hypothesis: Hypothesis,
    receiver_volume: f64,
) -> HypothesisStats {
    let mean = n_m * mean_per_molecule(taps, pattern, hypothesis);
    let variance = mean / receiver_volume;
    HypothesisStats {
        mean,
        variance,
        degenerate: variance == 0.0,
    }
}

/// Operating point of the link: molecules per bit-1, ISI memory and threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkConfig {
    pub n_m: f64,
    pub memory_length: usize,
    pub threshold: ThresholdSpec,
}

impl LinkConfig {
    pub fn new(n_m: f64, memory_length: usize, threshold: ThresholdSpec) -> Result<Self> {
        let link = LinkConfig {
            n_m,
            memory_length,
            threshold,
        };
        link.validate()?;
        Ok(link)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_m.is_finite() && self.n_m > 0.0) {
            return Err(Error::domain("n_m", self.n_m, "molecule count must be > 0"));
        }
        if self.memory_length > MAX_MEMORY_LENGTH {
            return Err(Error::MemoryTooLong(self.memory_length));
        }
        self.threshold.validate()
    }
}

/// Miss, false-alarm and average error probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerResult {
    pub p_miss: f64,
    pub p_false_alarm: f64,
    pub p_error: f64,
}

impl BerResult {
    pub fn new(p_miss: f64, p_false_alarm: f64) -> Self {
        BerResult {
            p_miss,
            p_false_alarm,
            p_error: (p_miss + p_false_alarm) / 2.0,
        }
    }
}

pub(crate) fn check_link(taps: &TapVector, link: &LinkConfig) -> Result<f64> {
    link.validate()?;
    if link.memory_length != taps.memory_length() {
        return Err(Error::InvalidConfig(format!(
            "link memory length {} does not match the {} ISI taps supplied",
            link.memory_length,
            taps.memory_length()
        )));
    }
    resolve_threshold(link.threshold, link.n_m, taps.main_tap())
}

/// Exact miss and false-alarm probabilities by enumeration of all `2^L`
/// ISI patterns with equal weight.
pub fn error_probabilities(
    taps: &TapVector,
    link: &LinkConfig,
    receiver_volume: f64,
) -> Result<BerResult> {
    let threshold = check_link(taps, link)?;
    let t = taps.taps();
    let mut miss = CompensatedSum::default();
    let mut false_alarm = CompensatedSum::default();
    for pattern in IsiPattern::all(link.memory_length)? {
        let h1 = stats_unchecked(t, link.n_m, pattern, Hypothesis::H1, receiver_volume);
        let h0 = stats_unchecked(t, link.n_m, pattern, Hypothesis::H0, receiver_volume);
        miss.add(h1.prob_decide_zero(threshold));
        false_alarm.add(h0.prob_decide_one(threshold));
    }
    // 2^-L is a power of two, so the scaling is exact.
    let weight = (-(link.memory_length as f64)).exp2();
    Ok(BerResult::new(
        miss.value() * weight,
        false_alarm.value() * weight,
    ))
}

/// A fully specified link whose error probability can be evaluated as a
/// function of the molecule count alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    params: ChannelParams,
    taps: TapVector,
    threshold: ThresholdSpec,
}

impl LinkModel {
    pub fn new(
        params: ChannelParams,
        memory_length: usize,
        threshold: ThresholdSpec,
    ) -> Result<Self> {
        if memory_length > MAX_MEMORY_LENGTH {
            return Err(Error::MemoryTooLong(memory_length));
        }
        threshold.validate()?;
        Ok(LinkModel {
            params,
            taps: params.channel_taps(memory_length),
            threshold,
        })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn taps(&self) -> &TapVector {
        &self.taps
    }

    pub fn threshold(&self) -> ThresholdSpec {
        self.threshold
    }

    pub fn memory_length(&self) -> usize {
        self.taps.memory_length()
    }

    pub fn link(&self, n_m: f64) -> Result<LinkConfig> {
        LinkConfig::new(n_m, self.memory_length(), self.threshold)
    }

    pub fn ber(&self, n_m: f64) -> Result<BerResult> {
        error_probabilities(&self.taps, &self.link(n_m)?, self.params.receiver_volume())
    }

    pub fn ber_gradient(&self, n_m: f64) -> Result<BerGradient> {
        gradient::error_prob_gradients(&self.taps, &self.link(n_m)?, self.params.receiver_volume())
    }
}
