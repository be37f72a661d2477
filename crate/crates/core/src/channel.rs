//! Free three-dimensional diffusion channel between a point transmitter and a
//! passive spherical receiver.
//!
//! A pulse of molecules released at `t = 0` produces the concentration
//! `h(t) = (4 pi D t)^(-3/2) exp(-d^2 / (4 D t))` per molecule at distance
//! `d`. The receiver samples once per bit interval at the peak time
//! `t_p = d^2 / (6 D)`, so the contribution of a bit sent `j` intervals ago is
//! `h(j T_b + t_p)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Geometry and diffusion constants of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    diffusion_coefficient: f64,
    distance: f64,
    receiver_radius: f64,
    bit_interval: f64,
}

impl ChannelParams {
    /// Validates and builds the parameter set.
    ///
    /// All four quantities must be positive and finite, the receiver sphere
    /// must not contain the transmitter, and the concentration peak must
    /// occur strictly inside the bit interval.
    pub fn new(
        diffusion_coefficient: f64,
        distance: f64,
        receiver_radius: f64,
        bit_interval: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("diffusion_coefficient", diffusion_coefficient),
            ("distance", distance),
            ("receiver_radius", receiver_radius),
            ("bit_interval", bit_interval),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidChannel(format!(
                    "{name} must be positive and finite, got {v:e}"
                )));
            }
        }
        if receiver_radius >= distance {
            return Err(Error::InvalidChannel(format!(
                "receiver_radius {receiver_radius:e} m must be smaller than distance {distance:e} m"
            )));
        }
        let params = ChannelParams {
            diffusion_coefficient,
            distance,
            receiver_radius,
            bit_interval,
        };
        let t_p = params.peak_time();
        if bit_interval <= t_p {
            return Err(Error::InvalidChannel(format!(
                "bit_interval {bit_interval:e} s must exceed the peak time {t_p:e} s"
            )));
        }
        Ok(params)
    }

    /// Reference link: D = 1e-9 m^2/s, d = 10 um, r = 4 um, T_b = 1 s.
    pub fn reference() -> Self {
        ChannelParams::new(1e-9, 10e-6, 4e-6, 1.0).expect("reference parameters are valid")
    }

    pub fn diffusion_coefficient(&self) -> f64 {
        self.diffusion_coefficient
    }

    pub fn distance(&self) -> f64 {
        self.distance
    }

    pub fn receiver_radius(&self) -> f64 {
        self.receiver_radius
    }

    pub fn bit_interval(&self) -> f64 {
        self.bit_interval
    }

    /// Returns a copy with a different transmitter-receiver distance.
    pub fn with_distance(&self, distance: f64) -> Result<Self> {
        ChannelParams::new(
            self.diffusion_coefficient,
            distance,
            self.receiver_radius,
            self.bit_interval,
        )
    }

    /// Time at which `h(t)` is maximal, `d^2 / (6 D)`.
    pub fn peak_time(&self) -> f64 {
        self.distance * self.distance / (6.0 * self.diffusion_coefficient)
    }

    /// Volume of the passive spherical receiver, `(4/3) pi r^3`.
    pub fn receiver_volume(&self) -> f64 {
        4.0 / 3.0 * PI * self.receiver_radius.powi(3)
    }

    /// Concentration per released molecule at time `t` after the release.
    pub fn impulse_response(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::domain("t", t, "impulse response needs t > 0"));
        }
        let dt = self.diffusion_coefficient * t;
        Ok((4.0 * PI * dt).powf(-1.5) * (-self.distance * self.distance / (4.0 * dt)).exp())
    }

    /// Peak time and the closed-form peak concentration
    /// `(n_m / d^3) (3 / (2 pi e))^(3/2)` for `n_m` released molecules.
    pub fn peak_metrics(&self, n_m: f64) -> Result<(f64, f64)> {
        if !(n_m.is_finite() && n_m >= 0.0) {
            return Err(Error::domain("n_m", n_m, "molecule count must be >= 0"));
        }
        let shape = (3.0 / (2.0 * PI * std::f64::consts::E)).powf(1.5);
        Ok((self.peak_time(), n_m / self.distance.powi(3) * shape))
    }

    /// Samples the impulse response at `j T_b + t_p` for `j = 0..=memory_length`.
    pub fn channel_taps(&self, memory_length: usize) -> TapVector {
        let t_p = self.peak_time();
        let taps = (0..=memory_length)
            .map(|j| {
                self.impulse_response(j as f64 * self.bit_interval + t_p)
                    .expect("sampling instants are positive")
            })
            .collect();
        TapVector {
            taps,
            sample_offset: t_p,
        }
    }

    /// Linear SNR `n_m V_R h(t)` for a sample taken at `sampling_time`.
    pub fn snr(&self, n_m: f64, sampling_time: f64) -> Result<f64> {
        if n_m == 0.0 {
            return Err(Error::NoSignal);
        }
        if !(n_m.is_finite() && n_m > 0.0) {
            return Err(Error::domain("n_m", n_m, "molecule count must be > 0"));
        }
        Ok(n_m * self.receiver_volume() * self.impulse_response(sampling_time)?)
    }

    /// SNR at the peak sampling instant.
    pub fn snr_at_peak(&self, n_m: f64) -> Result<f64> {
        self.snr(n_m, self.peak_time())
    }
}

/// Converts a linear power ratio to decibels.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Channel taps sampled at the per-bit peak instant.
///
/// `taps[0]` is the current-bit tap `h(t_p)`; `taps[j]` for `j >= 1` is the
/// residual from the bit sent `j` intervals earlier.
#[derive(Debug, Clone, PartialEq)]
pub struct TapVector {
    taps: Vec<f64>,
    sample_offset: f64,
}

impl TapVector {
    /// Wraps externally supplied taps, checking positivity, dominance of the
    /// main tap and a strictly decreasing tail.
    pub fn from_taps(taps: Vec<f64>, sample_offset: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidChannel("tap vector is empty".into()));
        }
        if let Some(bad) = taps.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidChannel(format!(
                "taps must be positive and finite, got {bad:e}"
            )));
        }
        if taps[1..].iter().any(|&t| t >= taps[0]) {
            return Err(Error::InvalidChannel("main tap must dominate".into()));
        }
        if taps[1..].windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidChannel(
                "ISI taps must be strictly decreasing".into(),
            ));
        }
        Ok(TapVector {
            taps,
            sample_offset,
        })
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn main_tap(&self) -> f64 {
        self.taps[0]
    }

    /// ISI taps `taps[1..]`.
    pub fn isi_taps(&self) -> &[f64] {
        &self.taps[1..]
    }

    pub fn memory_length(&self) -> usize {
        self.taps.len() - 1
    }

    pub fn sample_offset(&self) -> f64 {
        self.sample_offset
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    // 50-digit evaluations of the closed forms for the reference link.
    // 50-digit reference values, kept at full printed precision
    #[allow(clippy::excessive_precision)]
    const H_PEAK: f64 = 73_615_684_847_425.660_836_946_931;
    #[allow(clippy::excessive_precision)]
    const H_FIRST_ISI: f64 = 675_675_162_129.866_751_899;
    const RECEIVER_VOLUME: f64 = 2.680_825_731_063_290_2e-16;

    #[test]
    fn impulse_response_at_peak_and_first_isi_slot() {
        let p = ChannelParams::reference();
        assert_relative_eq!(p.peak_time(), 1.0 / 60.0, max_relative = 1e-15);
        let h0 = p.impulse_response(p.peak_time()).unwrap();
        assert_relative_eq!(h0, H_PEAK, max_relative = 1e-13);
        let h1 = p.impulse_response(1.0 + p.peak_time()).unwrap();
        assert_relative_eq!(h1, H_FIRST_ISI, max_relative = 1e-13);
        assert!((h1 / h0 - 0.0092).abs() < 1e-4);
    }

    #[test]
    fn impulse_response_rejects_non_positive_time() {
        let p = ChannelParams::reference();
        assert!(matches!(p.impulse_response(0.0), Err(Error::Domain { .. })));
        assert!(p.impulse_response(-1.0).is_err());
        assert!(p.impulse_response(f64::NAN).is_err());
    }

    #[test]
    fn impulse_response_decays_after_peak() {
        let p = ChannelParams::reference();
        let mut prev = p.impulse_response(p.peak_time()).unwrap();
        for k in 1..200 {
            let t = p.peak_time() * (1.0 + 0.5 * k as f64);
            let h = p.impulse_response(t).unwrap();
            assert!(h < prev);
            prev = h;
        }
        assert!(p.impulse_response(1e9).unwrap() < 1e-6 * H_PEAK);
    }

    #[test]
    fn peak_metrics_reference_values() {
        let p = ChannelParams::reference();
        let (t_p, c1) = p.peak_metrics(1.0).unwrap();
        assert!((t_p - 0.016667).abs() < 1e-6);
        assert_relative_eq!(c1, H_PEAK, max_relative = 1e-13);
        assert_eq!(p.peak_metrics(0.0).unwrap().1, 0.0);
        assert!(p.peak_metrics(-1.0).is_err());
    }

    #[test]
    fn derivative_changes_sign_at_peak() {
        let p = ChannelParams::reference();
        let t_p = p.peak_time();
        let slope = |t: f64| {
            let e = 1e-6 * t;
            p.impulse_response(t + e).unwrap() - p.impulse_response(t - e).unwrap()
        };
        assert!(slope(0.99 * t_p) > 0.0);
        assert!(slope(1.01 * t_p) < 0.0);
    }

    #[test]
    fn taps_for_reference_link() {
        let p = ChannelParams::reference();
        let taps = p.channel_taps(4);
        assert_eq!(taps.taps().len(), 5);
        assert_eq!(taps.memory_length(), 4);
        assert_relative_eq!(taps.main_tap(), H_PEAK, max_relative = 1e-13);
        assert_relative_eq!(taps.taps()[1], H_FIRST_ISI, max_relative = 1e-13);
        let t = taps.taps();
        assert!(t[1] > t[2] && t[2] > t[3] && t[3] > t[4]);
        assert_eq!(taps.sample_offset(), p.peak_time());

        let single = p.channel_taps(0);
        assert_eq!(single.taps().len(), 1);
        assert!(single.isi_taps().is_empty());
        assert_eq!(single.main_tap(), taps.main_tap());
    }

    #[test]
    fn tap_vector_validation() {
        assert!(TapVector::from_taps(vec![], 0.1).is_err());
        assert!(TapVector::from_taps(vec![1.0, 2.0], 0.1).is_err());
        assert!(TapVector::from_taps(vec![3.0, 1.0, 2.0], 0.1).is_err());
        assert!(TapVector::from_taps(vec![3.0, 0.0], 0.1).is_err());
        assert!(TapVector::from_taps(vec![3.0, 2.0, 1.0], 0.1).is_ok());
    }

    #[test]
    fn snr_reference_and_no_signal() {
        let p = ChannelParams::reference();
        assert_relative_eq!(p.receiver_volume(), RECEIVER_VOLUME, max_relative = 1e-14);
        let snr = p.snr_at_peak(1000.0).unwrap();
        assert_relative_eq!(snr, 19.735_082_214_882_467, max_relative = 1e-13);
        assert!((to_db(snr) - 12.95).abs() < 0.01);
        assert_eq!(p.snr_at_peak(0.0), Err(Error::NoSignal));
        let far = p.with_distance(20e-6).unwrap();
        assert!(far.snr_at_peak(1000.0).unwrap() < snr);
    }

    #[test]
    fn parameter_invariants() {
        assert!(ChannelParams::new(1e-9, 1e-5, 1e-5, 1.0).is_err());
        assert!(ChannelParams::new(1e-9, 1e-5, 2e-5, 1.0).is_err());
        assert!(ChannelParams::new(0.0, 1e-5, 4e-6, 1.0).is_err());
        assert!(ChannelParams::new(1e-9, 1e-5, 4e-6, f64::INFINITY).is_err());
        // t_p = 1/60 s
        assert!(ChannelParams::new(1e-9, 1e-5, 4e-6, 0.01).is_err());
    }
}
