//! Self-checks of the analytical model against independent references.

use molcom_core::gradient::central_difference;
use molcom_core::simulate::{samples_from_run, simulate_link_ber, simulate_walkers};
use molcom_core::{
    BerEstimate, BrownianSample, ChannelParams, LinkModel, ParticleSimConfig, Result,
};

use crate::config::RunConfig;
use crate::csv::{Cell, Table};

pub const GRADIENT_HEADER: &[&str] = &["n_m", "analytic", "finite_difference", "relative_error"];
pub const MONTECARLO_HEADER: &[&str] = &[
    "n_m",
    "bits",
    "errors_observed",
    "p_hat",
    "ci_low",
    "ci_high",
    "p_error_analytic",
];
pub const CHANNEL_HEADER: &[&str] = &[
    "time",
    "observed_count",
    "expected_count",
    "relative_deviation",
];

pub const GRADIENT_TOLERANCE: f64 = 1e-6;
/// Finite-difference step relative to `n_m`.
pub const GRADIENT_RELATIVE_STEP: f64 = 1e-4;
pub const CHANNEL_COUNT_TOLERANCE: f64 = 0.15;
pub const CHANNEL_PEAK_TOLERANCE: f64 = 0.20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ValidateKind {
    Gradient,
    Montecarlo,
    Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub passed: bool,
    pub summary: String,
    pub table: Table,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub n_m: f64,
    pub analytic: f64,
    pub numeric: f64,
    pub relative_error: f64,
}

/// Compares the analytic `dP_e/dn` with a central difference of `ln P_e`
/// scaled back by `P_e`.
///
/// Differencing the logarithm keeps the truncation error relative: `P_e`
/// falls by many decades over the grid and a plain difference loses
/// accuracy where its curvature is large compared with its slope.
pub fn gradient_check(model: &LinkModel, n_m: f64) -> Result<GradientCheck> {
    let analytic = model.ber_gradient(n_m)?.d_p_error;
    let p_error = model.ber(n_m)?.p_error;
    let h = GRADIENT_RELATIVE_STEP * n_m;
    let numeric = if p_error > 0.0 {
        p_error * central_difference(|n| Ok(model.ber(n)?.p_error.ln()), n_m, h)?
    } else {
        central_difference(|n| Ok(model.ber(n)?.p_error), n_m, h)?
    };
    let relative_error = if analytic == numeric {
        0.0
    } else {
        (analytic - numeric).abs() / analytic.abs().max(f64::MIN_POSITIVE)
    };
    Ok(GradientCheck {
        n_m,
        analytic,
        numeric,
        relative_error,
    })
}

pub fn validate_gradient(cfg: &RunConfig) -> Result<Validation> {
    let model = LinkModel::new(cfg.params, cfg.memory_length, cfg.threshold)?;
    let mut table = Table::new(GRADIENT_HEADER);
    let mut worst: f64 = 0.0;
    for n in cfg.grid() {
        let c = gradient_check(&model, n)?;
        worst = worst.max(c.relative_error);
        table.push(vec![
            n.into(),
            c.analytic.into(),
            c.numeric.into(),
            c.relative_error.into(),
        ]);
    }
    let passed = worst < GRADIENT_TOLERANCE;
    Ok(Validation {
        passed,
        summary: format!(
            "gradient: {} points, max relative error {worst:e} (limit {GRADIENT_TOLERANCE:e})",
            table.rows.len()
        ),
        table,
    })
}

pub fn validate_montecarlo(cfg: &RunConfig) -> Result<Validation> {
    let model = LinkModel::new(cfg.params, cfg.memory_length, cfg.threshold)?;
    let analytic = model.ber(cfg.n_m)?.p_error;
    let est: BerEstimate = simulate_link_ber(&cfg.params, &model.link(cfg.n_m)?, &cfg.monte_carlo)?;
    let passed = est.contains(analytic);
    let mut table = Table::new(MONTECARLO_HEADER);
    table.push(vec![
        cfg.n_m.into(),
        est.bits.into(),
        est.errors_observed.into(),
        est.p_hat.into(),
        est.ci_low.into(),
        est.ci_high.into(),
        analytic.into(),
    ]);
    Ok(Validation {
        passed,
        summary: format!(
            "montecarlo: n_m {:e}, {} bits, {} errors, p_hat {:e}, 95% CI [{:e}, {:e}], analytic {analytic:e}",
            cfg.n_m, est.bits, est.errors_observed, est.p_hat, est.ci_low, est.ci_high
        ),
        table,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCheck {
    pub samples: Vec<BrownianSample>,
    /// Sample taken at the analytic peak time.
    pub at_peak: BrownianSample,
    pub empirical_peak_time: f64,
    pub peak_time: f64,
}

impl ChannelCheck {
    pub fn peak_time_error(&self) -> f64 {
        (self.empirical_peak_time - self.peak_time).abs() / self.peak_time
    }

    pub fn passed(&self) -> bool {
        self.at_peak.relative_deviation < CHANNEL_COUNT_TOLERANCE
            && self.peak_time_error() < CHANNEL_PEAK_TOLERANCE
    }
}

/// Runs the walkers and samples at `t_p / 10`, `t_p / 2`, `t_p` and, when
/// the horizon allows, `3 t_p / 2`.
///
/// The empirical peak is the argmax of the count series after a moving
/// average over `t_p / 4`; the raw argmax of 1e5 walkers jitters by up to
/// a quarter of `t_p` between seeds. The smoothed curve of a finite sphere
/// peaks near `0.9 t_p`.
pub fn channel_check(params: &ChannelParams, sim: &ParticleSimConfig) -> Result<ChannelCheck> {
    let t_p = params.peak_time();
    let mut times = vec![t_p / 10.0, t_p / 2.0, t_p];
    if 1.5 * t_p <= sim.horizon {
        times.push(1.5 * t_p);
    }
    let run = simulate_walkers(params, sim, &times)?;
    let samples = samples_from_run(params, &run, &times)?;
    let half_width = (t_p / (8.0 * sim.time_step)).round() as usize;
    Ok(ChannelCheck {
        at_peak: samples[2],
        samples,
        empirical_peak_time: run.empirical_peak_time(half_width),
        peak_time: t_p,
    })
}

pub fn validate_channel(cfg: &RunConfig) -> Result<Validation> {
    let check = channel_check(&cfg.params, &cfg.particles)?;
    let mut table = Table::new(CHANNEL_HEADER);
    for s in &check.samples {
        table.push(vec![
            s.time.into(),
            Cell::Int(s.observed_count),
            s.expected_count.into(),
            s.relative_deviation.into(),
        ]);
    }
    Ok(Validation {
        passed: check.passed(),
        summary: format!(
            "channel: {} walkers, count at t_p {} vs expected {:.1} (deviation {:.4}, limit {CHANNEL_COUNT_TOLERANCE}), \
             empirical peak {:e} s vs t_p {:e} s (error {:.4}, limit {CHANNEL_PEAK_TOLERANCE})",
            cfg.particles.molecule_count,
            check.at_peak.observed_count,
            check.at_peak.expected_count,
            check.at_peak.relative_deviation,
            check.empirical_peak_time,
            check.peak_time,
            check.peak_time_error(),
        ),
        table,
    })
}

pub fn run_validate(kind: ValidateKind, cfg: &RunConfig) -> Result<Validation> {
    match kind {
        ValidateKind::Gradient => validate_gradient(cfg),
        ValidateKind::Montecarlo => validate_montecarlo(cfg),
        ValidateKind::Channel => validate_channel(cfg),
    }
}
