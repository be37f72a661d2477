//! Derivatives of the detection probabilities with respect to the number of
//! released molecules.
//!
//! For each ISI pattern the decision statistic is `z = (C - mu) / sigma` with
//! `mu` linear in `n_m` and `sigma = sqrt(mu / V_R)`. The chain rule gives
//!
//! ```text
//! dz/dn = (C' sigma - mu' sigma - (C - mu) sigma') / sigma^2
//! dQ/dz = -phi(z)
//! ```
//!
//! where `C'` is zero for an absolute threshold and `alpha taps[0]` for a
//! fractional one. Degenerate patterns (zero variance) contribute nothing.

use crate::channel::TapVector;
use crate::detection::{
    check_link, check_pattern, mean_per_molecule, normal_pdf, stats_unchecked, Hypothesis,
    IsiPattern, LinkConfig,
};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Derivatives of the per-pattern mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StatsGradient {
    pub d_mean: f64,
    pub d_sigma: f64,
    /// The pattern has zero variance; `d_sigma` is reported as zero.
    pub degenerate: bool,
}

pub fn stats_gradients(
    taps: &TapVector,
    n_m: f64,
    pattern: IsiPattern,
    hypothesis: Hypothesis,
    receiver_volume: f64,
) -> Result<StatsGradient> {
    check_pattern(taps, pattern)?;
    let d_mean = mean_per_molecule(taps.taps(), pattern, hypothesis);
    let stats = stats_unchecked(taps.taps(), n_m, pattern, hypothesis, receiver_volume);
    if stats.degenerate {
        return Ok(StatsGradient {
            d_mean,
            d_sigma: 0.0,
            degenerate: true,
        });
    }
    Ok(StatsGradient {
        d_mean,
        d_sigma: d_mean / (2.0 * stats.std_dev() * receiver_volume),
        degenerate: false,
    })
}

/// Derivatives of `P_M`, `P_FA` and `P_e` with respect to `n_m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerGradient {
    pub d_p_miss: f64,
    pub d_p_false_alarm: f64,
    pub d_p_error: f64,
}

pub fn error_prob_gradients(
    taps: &TapVector,
    link: &LinkConfig,
    receiver_volume: f64,
) -> Result<BerGradient> {
    let threshold = check_link(taps, link)?;
    let d_threshold = link.threshold.slope(taps.main_tap());
    let t = taps.taps();

    // d/dn of Q(z) for one pattern, or zero for a degenerate one.
    let d_tail = |pattern: IsiPattern, hypothesis: Hypothesis| -> f64 {
        let stats = stats_unchecked(t, link.n_m, pattern, hypothesis, receiver_volume);
        if stats.degenerate {
            return 0.0;
        }
        let sigma = stats.std_dev();
        let d_mean = mean_per_molecule(t, pattern, hypothesis);
        let d_sigma = d_mean / (2.0 * sigma * receiver_volume);
        let gap = threshold - stats.mean;
        let z = gap / sigma;
        let dz = (d_threshold * sigma - d_mean * sigma - gap * d_sigma) / (sigma * sigma);
        -normal_pdf(z) * dz
    };

    let mut d_miss = CompensatedSum::default();
    let mut d_false_alarm = CompensatedSum::default();
    for pattern in IsiPattern::all(link.memory_length)? {
        // P_M = 1 - mean Q(z1), P_FA = mean Q(z0)
        d_miss.add(-d_tail(pattern, Hypothesis::H1));
        d_false_alarm.add(d_tail(pattern, Hypothesis::H0));
    }
    let weight = (-(link.memory_length as f64)).exp2();
    let d_p_miss = d_miss.value() * weight;
    let d_p_false_alarm = d_false_alarm.value() * weight;
    Ok(BerGradient {
        d_p_miss,
        d_p_false_alarm,
        d_p_error: (d_p_miss + d_p_false_alarm) / 2.0,
    })
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference<F>(f: F, x: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let hi = f(x + h)?;
    let lo = f(x - h)?;
    if !(hi.is_finite() && lo.is_finite()) {
        return Err(Error::NonFinite(format!(
            "finite-difference evaluation at x = {x:e} returned {lo:e}, {hi:e}"
        )));
    }
    Ok((hi - lo) / (2.0 * h))
}

/// Relative error between an analytic derivative and the central difference
/// of `f` at `x` with step `relative_step * |x|`.
pub fn finite_difference_check<F>(f: F, analytic: f64, x: f64, relative_step: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(relative_step > 1e-8 && relative_step < 1e-2) {
        return Err(Error::domain(
            "relative_step",
            relative_step,
            "must lie in (1e-8, 1e-2)",
        ));
    }
    let h = relative_step * x.abs();
    let numeric = central_difference(f, x, h)?;
    Ok((analytic - numeric).abs() / analytic.abs().max(1e-300))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;
    use crate::detection::{hypothesis_stats, LinkModel, ThresholdSpec};
    use approx::assert_relative_eq;

    #[test]
    fn single_tap_h1_gradient() {
        let p = ChannelParams::reference();
        let v = p.receiver_volume();
        let taps = p.channel_taps(0);
        let pat = IsiPattern::zeros(0).unwrap();
        let g = stats_gradients(&taps, 1000.0, pat, Hypothesis::H1, v).unwrap();
        let s = hypothesis_stats(&taps, 1000.0, pat, Hypothesis::H1, v).unwrap();
        assert_eq!(g.d_mean, taps.main_tap());
        assert_relative_eq!(
            g.d_sigma,
            taps.main_tap() / (2.0 * s.std_dev() * v),
            max_relative = 1e-15
        );
        assert!(!g.degenerate);
    }

    #[test]
    fn degenerate_pattern_gradient_is_flagged_zero() {
        let p = ChannelParams::reference();
        let taps = p.channel_taps(3);
        let g = stats_gradients(
            &taps,
            1000.0,
            IsiPattern::zeros(3).unwrap(),
            Hypothesis::H0,
            p.receiver_volume(),
        )
        .unwrap();
        assert_eq!((g.d_mean, g.d_sigma, g.degenerate), (0.0, 0.0, true));
    }

    #[test]
    fn mean_is_linear_and_sigma_chain_holds() {
        let p = ChannelParams::reference();
        let v = p.receiver_volume();
        let taps = p.channel_taps(4);
        for mask in 1..16 {
            let pat = IsiPattern::new(mask, 4).unwrap();
            for hyp in [Hypothesis::H0, Hypothesis::H1] {
                for n in [1e3, 3.7e4, 1e5] {
                    let g = stats_gradients(&taps, n, pat, hyp, v).unwrap();
                    let s = hypothesis_stats(&taps, n, pat, hyp, v).unwrap();
                    assert_relative_eq!(n * g.d_mean, s.mean, max_relative = 1e-15);
                    // d(sigma^2)/dn = d_mean / V
                    assert_relative_eq!(
                        2.0 * s.std_dev() * g.d_sigma,
                        g.d_mean / v,
                        max_relative = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn pe_gradient_is_negative_with_isi() {
        let m = LinkModel::new(
            ChannelParams::reference(),
            4,
            ThresholdSpec::fractional(0.5).unwrap(),
        )
        .unwrap();
        let g = m.ber_gradient(2e3).unwrap();
        assert!(g.d_p_error < 0.0);
        assert_eq!(g.d_p_error, (g.d_p_miss + g.d_p_false_alarm) / 2.0);
        let err =
            finite_difference_check(|n| Ok(m.ber(n)?.p_error), g.d_p_error, 2e3, 1e-4).unwrap();
        assert!(err < 1e-6, "relative error {err:e}");
    }

    #[test]
    fn gradient_flattens_for_large_budgets() {
        let m = LinkModel::new(
            ChannelParams::reference(),
            4,
            ThresholdSpec::fractional(0.5).unwrap(),
        )
        .unwrap();
        let mags: Vec<f64> = [1e3, 3e3, 1e4, 3e4]
            .iter()
            .map(|&n| m.ber_gradient(n).unwrap().d_p_error.abs())
            .collect();
        assert!(mags.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn absolute_threshold_gradient_matches_finite_difference() {
        let m = LinkModel::new(
            ChannelParams::reference(),
            2,
            ThresholdSpec::absolute(3e16).unwrap(),
        )
        .unwrap();
        for n in [800.0, 1200.0, 2000.0] {
            let g = m.ber_gradient(n).unwrap();
            let err =
                finite_difference_check(|x| Ok(m.ber(x)?.p_error), g.d_p_error, n, 1e-5).unwrap();
            assert!(err < 1e-6, "n = {n}: relative error {err:e}");
        }
    }

    #[test]
    fn finite_difference_check_contract() {
        let affine = |x: f64| Ok(3.0 * x + 2.0);
        assert!(finite_difference_check(affine, 3.0, 10.0, 1e-4).unwrap() < 1e-10);
        assert!(matches!(
            finite_difference_check(affine, 3.0, 10.0, 0.5),
            Err(Error::Domain { .. })
        ));
        assert!(finite_difference_check(affine, 3.0, 10.0, 1e-9).is_err());
        let blowup = |x: f64| Ok(if x > 10.0 { f64::INFINITY } else { x });
        assert!(matches!(
            finite_difference_check(blowup, 1.0, 10.0, 1e-4),
            Err(Error::NonFinite(_))
        ));
    }
}
