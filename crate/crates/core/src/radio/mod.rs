//! Free-space link budget, SNR, MCS thresholds and the fitted capacity model.

mod capacity;
mod mcs;

pub use capacity::{fit_capacity_model, CapacityModel, CapacityModelSet};
pub use mcs::{
    awgn_min_snr_db, default_mcs_table, mcs_for_snr, uncoded_ber, validate_mcs_table,
    vht20_descriptors, vht20_table, BerThreshold, CodingRate, McsDescriptor, McsEntry, Modulation,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, Scalar};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("distance must be positive and finite, got {0} m")]
    NonPositiveDistance(f64),
    #[error("carrier frequency must be positive and finite, got {0} Hz")]
    NonPositiveFrequency(f64),
    #[error("no threshold for BER {ber} in MCS index {index}")]
    MissingBer { ber: f64, index: u8 },
    #[error("invalid MCS table: {0}")]
    InvalidTable(String),
    #[error("capacity fit needs at least two MCS entries, got {0}")]
    TooFewPoints(usize),
    #[error("degenerate capacity fit: all thresholds equal at BER {0}")]
    DegenerateFit(f64),
    #[error("capacity fit at BER {0} has non-positive slope")]
    NonIncreasingFit(f64),
    #[error("no capacity model for BER {0}")]
    NoModelForBer(f64),
}

/// Transmitter/receiver parameters shared by every FAP link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RadioConfig<T = f64> {
    /// dBm
    pub tx_power: T,
    /// dBi
    pub tx_gain: T,
    /// dBi
    pub rx_gain: T,
    /// Hz
    pub carrier_freq: T,
    /// dBm over one channel of `channel_bandwidth`.
    pub noise_power: T,
    /// Hz
    pub channel_bandwidth: T,
    /// Channels one FAP can aggregate (8 x 20 MHz = 160 MHz).
    pub max_channels_total: u32,
}

impl<T: Scalar> Default for RadioConfig<T> {
    fn default() -> Self {
        Self {
            tx_power: lit(16.0206),
            tx_gain: T::zero(),
            rx_gain: T::zero(),
            carrier_freq: lit(5.25e9),
            noise_power: lit(-94.0),
            channel_bandwidth: lit(20e6),
            max_channels_total: 8,
        }
    }
}

impl<T: Scalar> RadioConfig<T> {
    /// Returns one message per violated invariant.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.carrier_freq > T::zero()) || !self.carrier_freq.is_finite() {
            out.push("radio.carrier_freq: must be positive".to_string());
        }
        if !(self.channel_bandwidth > T::zero()) || !self.channel_bandwidth.is_finite() {
            out.push("radio.channel_bandwidth: must be positive".to_string());
        }
        if !(self.noise_power < self.tx_power) {
            out.push("radio.noise_power: must be below tx_power".to_string());
        }
        if self.max_channels_total == 0 {
            out.push("radio.max_channels_total: must be at least 1".to_string());
        }
        out
    }

    pub fn cast<U: Scalar>(&self) -> RadioConfig<U> {
        let c = |x: T| lit::<U>(crate::scalar::to_f64(x));
        RadioConfig {
            tx_power: c(self.tx_power),
            tx_gain: c(self.tx_gain),
            rx_gain: c(self.rx_gain),
            carrier_freq: c(self.carrier_freq),
            noise_power: c(self.noise_power),
            channel_bandwidth: c(self.channel_bandwidth),
            max_channels_total: self.max_channels_total,
        }
    }
}

/// Euclidean distance between two 3D points, meters.
pub fn distance<T: Scalar>(a: [T; 3], b: [T; 3]) -> T {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Free-space path loss in dB.
pub fn path_loss<T: Scalar>(distance: T, freq: T) -> Result<T, RadioError> {
    if !(distance > T::zero()) || !distance.is_finite() {
        return Err(RadioError::NonPositiveDistance(crate::scalar::to_f64(distance)));
    }
    if !(freq > T::zero()) || !freq.is_finite() {
        return Err(RadioError::NonPositiveFrequency(crate::scalar::to_f64(freq)));
    }
    let twenty: T = lit(20.0);
    let four_pi_over_c: T = lit(4.0 * std::f64::consts::PI / SPEED_OF_LIGHT);
    Ok(twenty * distance.log10() + twenty * freq.log10() + twenty * four_pi_over_c.log10())
}

/// Received power in dBm.
pub fn received_power<T: Scalar>(cfg: &RadioConfig<T>, distance: T) -> Result<T, RadioError> {
    let loss = path_loss(distance, cfg.carrier_freq)?;
    Ok(cfg.tx_power + cfg.tx_gain + cfg.rx_gain - loss)
}

/// SNR in dB over one channel of `cfg.channel_bandwidth`.
pub fn snr<T: Scalar>(cfg: &RadioConfig<T>, distance: T) -> Result<T, RadioError> {
    Ok(received_power(cfg, distance)? - cfg.noise_power)
}

/// SNR over a single channel spanning `channels` base channels. Transmit power
/// is fixed, noise grows with bandwidth.
pub fn snr_for_width<T: Scalar>(
    cfg: &RadioConfig<T>,
    distance: T,
    channels: u32,
) -> Result<T, RadioError> {
    let n: T = lit(f64::from(channels.max(1)));
    Ok(snr(cfg, distance)? - lit::<T>(10.0) * n.log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cfg() -> RadioConfig<f64> {
        RadioConfig::default()
    }

    #[test]
    fn path_loss_vanishes_at_reference_distance() {
        let f = 5.25e9;
        let d = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f);
        assert_abs_diff_eq!(path_loss(d, f).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn path_loss_at_20m_5ghz() {
        // 20*log10(20) + 20*log10(5.25e9) + 20*log10(4*pi/c), evaluated by hand.
        let expected = 26.020_599_913_279_625 + 194.403_186_068_119_14 - 147.552_216_778_116_64;
        assert_abs_diff_eq!(path_loss(20.0, 5.25e9).unwrap(), expected, epsilon = 1e-9);
        assert_abs_diff_eq!(path_loss(20.0, 5.25e9).unwrap(), 72.87, epsilon = 0.01);
    }

    #[test]
    fn doubling_distance_adds_6_0206_db() {
        let a = path_loss(37.0, 5.25e9).unwrap();
        let b = path_loss(74.0, 5.25e9).unwrap();
        assert_abs_diff_eq!(b - a, 20.0 * 2f64.log10(), epsilon = 1e-9);
        assert_abs_diff_eq!(b - a, 6.0206, epsilon = 1e-4);
    }

    #[test]
    fn path_loss_rejects_bad_inputs() {
        assert!(matches!(path_loss(0.0, 5e9), Err(RadioError::NonPositiveDistance(_))));
        assert!(matches!(path_loss(-3.0, 5e9), Err(RadioError::NonPositiveDistance(_))));
        assert!(matches!(path_loss(3.0, 0.0), Err(RadioError::NonPositiveFrequency(_))));
        assert!(received_power(&cfg(), 0.0).is_err());
        assert!(snr(&cfg(), f64::NAN).is_err());
    }

    #[test]
    fn received_power_identity_and_example() {
        let f = 5.25e9;
        let d0 = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * f);
        let c = RadioConfig { tx_power: 20.0, ..cfg() };
        assert_abs_diff_eq!(received_power(&c, d0).unwrap(), 20.0, epsilon = 1e-9);

        let c = RadioConfig { tx_power: 20.0, tx_gain: 3.0, rx_gain: 3.0, ..cfg() };
        let pl = path_loss(20.0, f).unwrap();
        assert_abs_diff_eq!(received_power(&c, 20.0).unwrap(), 26.0 - pl, epsilon = 1e-12);
        assert_abs_diff_eq!(received_power(&c, 20.0).unwrap(), -46.87, epsilon = 0.01);
    }

    #[test]
    fn snr_example() {
        let c = RadioConfig { tx_power: 20.0, tx_gain: 3.0, rx_gain: 3.0, ..cfg() };
        let s = snr(&c, 20.0).unwrap();
        assert_abs_diff_eq!(s, received_power(&c, 20.0).unwrap() + 94.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s, 47.13, epsilon = 0.01);

        // Noise equal to received power gives 0 dB.
        let pr = received_power(&c, 20.0).unwrap();
        let c0 = RadioConfig { noise_power: pr, ..c };
        assert_abs_diff_eq!(snr(&c0, 20.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn wide_channel_pays_noise_penalty() {
        let c = cfg();
        let s1 = snr(&c, 30.0).unwrap();
        let s8 = snr_for_width(&c, 30.0, 8).unwrap();
        assert_abs_diff_eq!(s1 - s8, 10.0 * 8f64.log10(), epsilon = 1e-12);
        assert_eq!(snr_for_width(&c, 30.0, 1).unwrap(), s1);
    }

    #[test]
    fn single_precision_agrees() {
        let c32: RadioConfig<f32> = RadioConfig::default();
        let s32 = snr(&c32, 20.0f32).unwrap();
        let s64 = snr(&cfg(), 20.0).unwrap();
        assert!((f64::from(s32) - s64).abs() < 1e-3);
    }

    #[test]
    fn default_config_is_valid() {
        assert!(cfg().violations().is_empty());
        let bad = RadioConfig { noise_power: 30.0, carrier_freq: 0.0, ..cfg() };
        assert_eq!(bad.violations().len(), 2);
    }

    proptest! {
        #[test]
        fn path_loss_is_log_linear(d in 0.01f64..1e5, e in 0.01f64..1e5) {
            let f = 5.25e9;
            let lhs = path_loss(d, f).unwrap() + path_loss(e, f).unwrap()
                - 2.0 * path_loss((d * e).sqrt(), f).unwrap();
            prop_assert!(lhs.abs() < 1e-9);
        }

        #[test]
        fn snr_strictly_decreasing(d in 0.1f64..1e4, step in 0.01f64..100.0) {
            let c = cfg();
            prop_assert!(snr(&c, d + step).unwrap() < snr(&c, d).unwrap());
        }

        #[test]
        fn channel_is_symmetric(a in prop::array::uniform3(-100f64..100.0),
                                b in prop::array::uniform3(-100f64..100.0)) {
            let d_ab = distance(a, b);
            let d_ba = distance(b, a);
            prop_assume!(d_ab > 1e-6);
            prop_assert_eq!(snr(&cfg(), d_ab).unwrap(), snr(&cfg(), d_ba).unwrap());
        }
    }
}
