//! Molecule-budget versus BER tradeoff.
//!
//! Both objectives are min-max normalized against extrema frozen from a
//! reference grid, then combined as
//! `f(n) = w_n (n - n_min) / (n_max - n_min) + w_p (P_e(n) - pe_min) / (pe_max - pe_min)`.
//! The minimizer is found by projected gradient descent on `n` alone; `P_e`
//! is recomputed from `n` at every step. An exhaustive grid search serves as
//! the reference answer.

use rayon::prelude::*;

use crate::detection::LinkModel;
use crate::error::{Error, Result};

/// A scalar BER curve `n_m -> P_e` with its derivative.
pub trait BerCurve: Sync {
    fn p_error(&self, n_m: f64) -> Result<f64>;
    fn p_error_slope(&self, n_m: f64) -> Result<f64>;
}

impl BerCurve for LinkModel {
    fn p_error(&self, n_m: f64) -> Result<f64> {
        Ok(self.ber(n_m)?.p_error)
    }

    fn p_error_slope(&self, n_m: f64) -> Result<f64> {
        Ok(self.ber_gradient(n_m)?.d_p_error)
    }
}

/// `points` evenly spaced values from `min` to `max` inclusive. The last
/// point is exactly `max`.
pub fn uniform_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::InvalidConfig(format!(
            "grid needs at least 2 points, got {points}"
        )));
    }
    if !(min.is_finite() && max.is_finite() && min < max) {
        return Err(Error::InvalidConfig(format!(
            "grid bounds must satisfy min < max, got [{min:e}, {max:e}]"
        )));
    }
    let step = (max - min) / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| min + i as f64 * step).collect();
    grid[points - 1] = max;
    Ok(grid)
}

/// Min-max normalization. Returns the mapped series and `(min, max)`.
pub fn normalize_series(values: &[f64]) -> Result<(Vec<f64>, (f64, f64))> {
    if values.len() < 2 {
        return Err(Error::DegenerateNormalization);
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series value {v}")));
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min == max {
        return Err(Error::DegenerateNormalization);
    }
    let span = max - min;
    let mapped = values
        .iter()
        .map(|&v| ((v - min) / span).clamp(0.0, 1.0))
        .collect();
    Ok((mapped, (min, max)))
}

/// Extrema used by the normalized balance function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizationContext {
    n_min: f64,
    n_max: f64,
    pe_min: f64,
    pe_max: f64,
}

impl NormalizationContext {
    pub fn new(n_min: f64, n_max: f64, pe_min: f64, pe_max: f64) -> Result<Self> {
        if !(n_min.is_finite() && n_max.is_finite() && n_min < n_max) {
            return Err(Error::InvalidConfig(format!(
                "normalization needs n_min < n_max, got [{n_min:e}, {n_max:e}]"
            )));
        }
        if !(pe_min.is_finite() && pe_max.is_finite()) || pe_min >= pe_max {
            return Err(Error::DegenerateNormalization);
        }
        Ok(NormalizationContext {
            n_min,
            n_max,
            pe_min,
            pe_max,
        })
    }

    /// Freezes the extrema of `grid` and of the BER evaluated on it. Returns
    /// the context together with the BER series in grid order.
    pub fn from_grid<M: BerCurve + ?Sized>(grid: &[f64], model: &M) -> Result<(Self, Vec<f64>)> {
        let pe = evaluate_grid(grid, |n| model.p_error(n))?;
        let (_, (n_min, n_max)) = normalize_series(grid)?;
        let (_, (pe_min, pe_max)) = normalize_series(&pe)?;
        Ok((NormalizationContext::new(n_min, n_max, pe_min, pe_max)?, pe))
    }

    pub fn n_min(&self) -> f64 {
        self.n_min
    }

    pub fn n_max(&self) -> f64 {
        self.n_max
    }

    pub fn pe_min(&self) -> f64 {
        self.pe_min
    }

    pub fn pe_max(&self) -> f64 {
        self.pe_max
    }

    pub fn n_hat(&self, n_m: f64) -> f64 {
        (n_m - self.n_min) / (self.n_max - self.n_min)
    }

    pub fn p_hat(&self, p_error: f64) -> f64 {
        (p_error - self.pe_min) / (self.pe_max - self.pe_min)
    }

    pub fn clamp(&self, n_m: f64) -> f64 {
        n_m.clamp(self.n_min, self.n_max)
    }
}

/// Evaluates `f` on every grid point in parallel; results keep grid order.
pub(crate) fn evaluate_grid<F>(grid: &[f64], f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    grid.par_iter().map(|&n| f(n)).collect()
}

/// Objective weights, stored normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceWeights {
    w_n: f64,
    w_p: f64,
}

impl BalanceWeights {
    pub fn new(w_n: f64, w_p: f64) -> Result<Self> {
        if !(w_n.is_finite() && w_p.is_finite() && w_n >= 0.0 && w_p >= 0.0 && w_n + w_p > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "weights must be non-negative with a positive sum, got ({w_n}, {w_p})"
            )));
        }
        let total = w_n + w_p;
        Ok(BalanceWeights {
            w_n: w_n / total,
            w_p: w_p / total,
        })
    }

    pub fn w_n(&self) -> f64 {
        self.w_n
    }

    pub fn w_p(&self) -> f64 {
        self.w_p
    }
}

/// Balance value and slope at one molecule count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Balance {
    /// Point actually evaluated, after clamping into `[n_min, n_max]`.
    pub n_m: f64,
    pub p_error: f64,
    pub value: f64,
    pub slope: f64,
    /// The requested point lay outside the normalization range.
    pub clamped: bool,
}

/// Balance value only; skips the gradient enumeration.
pub fn balance_value<M: BerCurve + ?Sized>(
    n_m: f64,
    ctx: &NormalizationContext,
    w: &BalanceWeights,
    model: &M,
) -> Result<(f64, f64)> {
    let n = ctx.clamp(n_m);
    let p_error = model.p_error(n)?;
    Ok((w.w_n * ctx.n_hat(n) + w.w_p * ctx.p_hat(p_error), p_error))
}

pub fn balance_value_and_gradient<M: BerCurve + ?Sized>(
    n_m: f64,
    ctx: &NormalizationContext,
    w: &BalanceWeights,
    model: &M,
) -> Result<Balance> {
    if n_m.is_nan() {
        return Err(Error::NonFinite("balance evaluated at NaN".into()));
    }
    let n = ctx.clamp(n_m);
    let (value, p_error) = balance_value(n, ctx, w, model)?;
    let slope = w.w_n / (ctx.n_max - ctx.n_min)
        + w.w_p / (ctx.pe_max - ctx.pe_min) * model.p_error_slope(n)?;
    Ok(Balance {
        n_m: n,
        p_error,
        value,
        slope,
        clamped: n != n_m,
    })
}

pub const MIN_ORACLE_POINTS: usize = 11;

/// Exhaustive minimization over `grid`. Ties go to the smaller molecule count.
pub fn grid_search_oracle<M: BerCurve + ?Sized>(
    grid: &[f64],
    ctx: &NormalizationContext,
    w: &BalanceWeights,
    model: &M,
) -> Result<(f64, f64)> {
    if grid.len() < MIN_ORACLE_POINTS {
        return Err(Error::InvalidConfig(format!(
            "grid search needs at least {MIN_ORACLE_POINTS} points, got {}",
            grid.len()
        )));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidConfig(
            "grid must be strictly increasing".into(),
        ));
    }
    if grid[0] < ctx.n_min || grid[grid.len() - 1] > ctx.n_max {
        return Err(Error::InvalidConfig(
            "grid extends beyond the normalization range".into(),
        ));
    }
    let values = evaluate_grid(grid, |n| Ok(balance_value(n, ctx, w, model)?.0))?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v < values[best] {
            best = i;
        }
    }
    Ok((grid[best], values[best]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub initial_n_m: f64,
}

impl OptimizerConfig {
    pub fn validate(&self, ctx: &NormalizationContext) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if !(self.initial_n_m >= ctx.n_min && self.initial_n_m <= ctx.n_max) {
            return Err(Error::InvalidConfig(format!(
                "initial_n_m {:e} outside [{:e}, {:e}]",
                self.initial_n_m, ctx.n_min, ctx.n_max
            )));
        }
        Ok(())
    }
}

/// What happened at a trace point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Start,
    Step,
    /// Step that did not lower the balance value.
    Uphill,
    /// Learning rate halved; the iterate was reset to the best point so far.
    LearningRateHalved,
    /// A step would have raised the balance value and was discarded.
    Rejected,
    Converged,
    /// Projected step stuck on a bound.
    Bound,
}

impl TraceEvent {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceEvent::Start => "start",
            TraceEvent::Step => "step",
            TraceEvent::Uphill => "uphill",
            TraceEvent::LearningRateHalved => "lr_halved",
            TraceEvent::Rejected => "rejected",
            TraceEvent::Converged => "converged",
            TraceEvent::Bound => "bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub iteration: usize,
    pub n_m: f64,
    pub value: f64,
    pub learning_rate: f64,
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffResult {
    pub n_star: f64,
    pub n_star_rounded: f64,
    pub p_e_star: f64,
    pub f_star: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<TracePoint>,
}

/// Consecutive steps without a new best balance value that trigger a
/// learning-rate halving.
pub const STALL_LIMIT: usize = 5;

/// Projected gradient descent on the balance function.
///
/// Each iteration takes `n <- clamp(n - lr f'(n))` and stops once a
/// descending step changes `f` by less than the tolerance, or once the
/// projection pins the iterate on the same bound twice in a row. After
/// [`STALL_LIMIT`] consecutive steps that fail to improve on the best `f`
/// seen so far (an oscillating iterate) the learning rate is halved and the
/// iterate returns to the best point. From then on any step that would raise
/// `f` is discarded and the rate halved again.
pub fn optimize_tradeoff<M: BerCurve + ?Sized>(
    cfg: &OptimizerConfig,
    ctx: &NormalizationContext,
    w: &BalanceWeights,
    model: &M,
) -> Result<TradeoffResult> {
    cfg.validate(ctx)?;
    let mut lr = cfg.learning_rate;
    let mut cur = balance_value_and_gradient(cfg.initial_n_m, ctx, w, model)?;
    let mut best = cur;
    let mut trace = vec![TracePoint {
        iteration: 0,
        n_m: cur.n_m,
        value: cur.value,
        learning_rate: lr,
        event: TraceEvent::Start,
    }];
    let mut stalled = 0usize;
    let mut safeguarded = false;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iterations {
        iterations += 1;
        if !cur.slope.is_finite() {
            return Err(Error::NonFinite(format!(
                "balance slope {} at n_m = {:e}",
                cur.slope, cur.n_m
            )));
        }
        let target = cur.n_m - lr * cur.slope;
        if target.is_nan() {
            return Err(Error::NonFinite(format!("update from n_m = {:e}", cur.n_m)));
        }
        let next = balance_value_and_gradient(target, ctx, w, model)?;
        if !next.value.is_finite() {
            return Err(Error::NonFinite(format!(
                "balance value at n_m = {:e}",
                next.n_m
            )));
        }
        let delta = next.value - cur.value;
        let moved = next.n_m != cur.n_m;

        if safeguarded && delta > 0.0 {
            if delta < cfg.tolerance {
                converged = true;
                trace.push(point(iterations, &cur, lr, TraceEvent::Converged));
                break;
            }
            lr /= 2.0;
            trace.push(point(iterations, &cur, lr, TraceEvent::Rejected));
            continue;
        }

        if !moved {
            // Either pinned on a bound or the step vanished in rounding.
            converged = true;
            let event = if next.clamped {
                TraceEvent::Bound
            } else {
                TraceEvent::Converged
            };
            cur = next;
            trace.push(point(iterations, &cur, lr, event));
            break;
        }

        cur = next;
        let improved = cur.value < best.value;
        if improved {
            best = cur;
            stalled = 0;
        } else {
            stalled += 1;
        }
        if delta < 0.0 && -delta < cfg.tolerance {
            converged = true;
            trace.push(point(iterations, &cur, lr, TraceEvent::Converged));
            break;
        }
        let event = if delta < 0.0 {
            TraceEvent::Step
        } else {
            TraceEvent::Uphill
        };
        trace.push(point(iterations, &cur, lr, event));
        if stalled >= STALL_LIMIT {
            stalled = 0;
            safeguarded = true;
            lr /= 2.0;
            cur = best;
            trace.push(point(iterations, &cur, lr, TraceEvent::LearningRateHalved));
        }
    }

    let n_star = cur.n_m;
    Ok(TradeoffResult {
        n_star,
        n_star_rounded: n_star.round(),
        p_e_star: cur.p_error,
        f_star: cur.value,
        iterations,
        converged,
        trace,
    })
}

fn point(iteration: usize, b: &Balance, learning_rate: f64, event: TraceEvent) -> TracePoint {
    TracePoint {
        iteration,
        n_m: b.n_m,
        value: b.value,
        learning_rate,
        event,
    }
}
