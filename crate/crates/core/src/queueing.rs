//! M/D/1 delay and the inverse problem: the smallest service rate that keeps
//! the mean delay under a slice's bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{lit, to_f64, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QueueError {
    #[error("unstable queue: utilisation {rho} >= 1")]
    Unstable { rho: f64 },
    #[error("arrival rate must be non-negative, got {0}")]
    NegativeArrival(f64),
    #[error("service rate must be positive, got {0}")]
    NonPositiveService(f64),
    #[error("delay bound must be positive, got {0}")]
    NonPositiveDelay(f64),
}

/// Which mean-delay expression to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    /// Mean sojourn time: service plus mean wait.
    #[default]
    Standard,
    /// Mean wait multiplied by the service time. Kept for comparison runs.
    ScaledWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalProcess {
    #[default]
    Poisson,
}

/// Per-subarea traffic description shared by all slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    /// bits
    pub packet_size_bits: f64,
    pub arrival_process: ArrivalProcess,
    pub delay_model: DelayModel,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            packet_size_bits: 12_000.0,
            arrival_process: ArrivalProcess::Poisson,
            delay_model: DelayModel::Standard,
        }
    }
}

impl TrafficModel {
    /// Packets per second for a slice demanding `throughput` bit/s.
    pub fn arrival_rate(&self, throughput: f64) -> f64 {
        throughput / self.packet_size_bits
    }
}

fn check_rates<T: Scalar>(lambda: T, mu: T) -> Result<T, QueueError> {
    if !(lambda >= T::zero()) {
        return Err(QueueError::NegativeArrival(to_f64(lambda)));
    }
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(QueueError::NonPositiveService(to_f64(mu)));
    }
    let rho = lambda / mu;
    if rho >= T::one() {
        return Err(QueueError::Unstable { rho: to_f64(rho) });
    }
    Ok(rho)
}

/// Mean time in system for Poisson arrivals at `lambda` and deterministic
/// service at `mu` (both packet/s): `1/mu + rho / (2 mu (1 - rho))`.
pub fn md1_mean_delay<T: Scalar>(lambda: T, mu: T) -> Result<T, QueueError> {
    let rho = check_rates(lambda, mu)?;
    let two: T = lit(2.0);
    Ok(T::one() / mu + rho / (two * mu * (T::one() - rho)))
}

/// `(1/mu) * rho / (2 mu (1 - rho))`.
pub fn md1_scaled_wait<T: Scalar>(lambda: T, mu: T) -> Result<T, QueueError> {
    let rho = check_rates(lambda, mu)?;
    let two: T = lit(2.0);
    Ok(T::one() / mu * rho / (two * mu * (T::one() - rho)))
}

pub fn mean_delay<T: Scalar>(model: DelayModel, lambda: T, mu: T) -> Result<T, QueueError> {
    match model {
        DelayModel::Standard => md1_mean_delay(lambda, mu),
        DelayModel::ScaledWait => md1_scaled_wait(lambda, mu),
    }
}

/// Smallest service rate whose M/D/1 mean delay is at most `max_delay`.
///
/// Larger root of `2 H mu^2 - 2 (H lambda + 1) mu + lambda = 0`, which is
/// `1/H` at `lambda = 0`.
pub fn min_service_rate<T: Scalar>(lambda: T, max_delay: T) -> Result<T, QueueError> {
    if !(lambda >= T::zero()) {
        return Err(QueueError::NegativeArrival(to_f64(lambda)));
    }
    if !(max_delay > T::zero()) {
        return Err(QueueError::NonPositiveDelay(to_f64(max_delay)));
    }
    let h = max_delay;
    let b = h * lambda + T::one();
    let disc = b * b - lit::<T>(2.0) * h * lambda;
    Ok((b + disc.sqrt()) / (lit::<T>(2.0) * h))
}

/// As [`min_service_rate`] under the chosen delay expression.
pub fn min_service_rate_with<T: Scalar>(
    model: DelayModel,
    lambda: T,
    max_delay: T,
) -> Result<T, QueueError> {
    match model {
        DelayModel::Standard => min_service_rate(lambda, max_delay),
        DelayModel::ScaledWait => min_service_rate_scaled_wait(lambda, max_delay),
    }
}

fn min_service_rate_scaled_wait<T: Scalar>(lambda: T, max_delay: T) -> Result<T, QueueError> {
    if !(lambda >= T::zero()) {
        return Err(QueueError::NegativeArrival(to_f64(lambda)));
    }
    if !(max_delay > T::zero()) {
        return Err(QueueError::NonPositiveDelay(to_f64(max_delay)));
    }
    if lambda == T::zero() {
        return Ok(T::zero());
    }
    // lambda / (2 mu^2 (mu - lambda)) is strictly decreasing in mu > lambda.
    let delay = |mu: T| lambda / (lit::<T>(2.0) * mu * mu * (mu - lambda));
    let mut lo = lambda;
    let mut hi = lambda * lit(2.0);
    while delay(hi) > max_delay {
        hi = hi * lit(2.0);
    }
    for _ in 0..200 {
        let mid = (lo + hi) / lit(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        if delay(mid) > max_delay {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Capacity (bit/s) a subarea needs to carry `throughput` with mean delay at
/// most `max_delay`: `max(T, L * mu_min(T / L, H))`.
pub fn required_capacity<T: Scalar>(
    throughput: T,
    max_delay: T,
    packet_size_bits: T,
    model: DelayModel,
) -> Result<T, QueueError> {
    let lambda = throughput / packet_size_bits;
    let mu = min_service_rate_with(model, lambda, max_delay)?;
    Ok(throughput.max(packet_size_bits * mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn empty_queue_delay_is_service_time() {
        assert_eq!(md1_mean_delay(0.0, 2000.0).unwrap(), 1.0 / 2000.0);
    }

    #[test]
    fn half_load_example() {
        // 1/2000 + 0.5 / (2 * 2000 * 0.5) = 0.5 ms + 0.25 ms.
        assert_relative_eq!(md1_mean_delay(1000.0, 2000.0).unwrap(), 0.75e-3, max_relative = 1e-12);
    }

    #[test]
    fn saturation() {
        assert!(md1_mean_delay(1999.999, 2000.0).unwrap() > 1.0);
        assert!(matches!(md1_mean_delay(2000.0, 2000.0), Err(QueueError::Unstable { .. })));
        assert!(matches!(md1_mean_delay(3000.0, 2000.0), Err(QueueError::Unstable { .. })));
        assert!(matches!(md1_mean_delay(-1.0, 2000.0), Err(QueueError::NegativeArrival(_))));
        assert!(matches!(md1_mean_delay(1.0, 0.0), Err(QueueError::NonPositiveService(_))));
    }

    #[test]
    fn inverse_examples() {
        assert_relative_eq!(min_service_rate(0.0, 1e-3).unwrap(), 1000.0, max_relative = 1e-12);
        assert_relative_eq!(min_service_rate(1000.0, 0.75e-3).unwrap(), 2000.0, max_relative = 1e-12);
        assert!(min_service_rate(10.0, 0.0).is_err());
    }

    #[test]
    fn round_trip_on_grid() {
        for lambda in (0..=1000).map(|i| f64::from(i) * 10.0) {
            for h in [0.1e-3, 1e-3, 5e-3, 50e-3] {
                let mu = min_service_rate(lambda, h).unwrap();
                let d = md1_mean_delay(lambda, mu).unwrap();
                assert!(((d - h) / h).abs() < 1e-9, "lambda {lambda} h {h}: {d}");
            }
        }
    }

    #[test]
    fn required_capacity_examples() {
        // Approaches the throughput itself as the delay bound loosens.
        let c = required_capacity(20e6, 10.0, 12_000.0, DelayModel::Standard).unwrap();
        assert!(c >= 20e6);
        assert_relative_eq!(c, 20e6, max_relative = 1e-4);

        // Delay-bound: lambda = 333.33 pkt/s, H = 1 ms.
        let lambda: f64 = 4e6 / 12_000.0;
        let h = 1e-3;
        let b = h * lambda + 1.0;
        let mu = (b + (b * b - 2.0 * h * lambda).sqrt()) / (2.0 * h);
        let c = required_capacity(4e6, h, 12_000.0, DelayModel::Standard).unwrap();
        assert_relative_eq!(c, 12_000.0 * mu, max_relative = 1e-12);
        assert!(c > 4e6);
        assert_relative_eq!(c, 14.32e6, max_relative = 1e-3);
    }

    #[test]
    fn scaled_wait_variant() {
        let mu = min_service_rate_with(DelayModel::ScaledWait, 1000.0, 1e-6).unwrap();
        let d = md1_scaled_wait(1000.0, mu).unwrap();
        assert_relative_eq!(d, 1e-6, max_relative = 1e-9);
        assert_eq!(min_service_rate_with(DelayModel::ScaledWait, 0.0, 1e-3).unwrap(), 0.0);
        // The product form is always below the sojourn time.
        assert!(md1_scaled_wait(1000.0, 2000.0).unwrap() < md1_mean_delay(1000.0, 2000.0).unwrap());
    }

    #[test]
    fn f32_round_trip() {
        let mu = min_service_rate(1000.0f32, 1e-3f32).unwrap();
        let d = md1_mean_delay(1000.0f32, mu).unwrap();
        assert!(((d - 1e-3) / 1e-3).abs() < 1e-5);
    }

    #[test]
    fn traffic_json_keys() {
        let s = serde_json::to_string(&TrafficModel::default()).unwrap();
        assert_eq!(
            s,
            r#"{"packet_size_bits":12000.0,"arrival_process":"poisson","delay_model":"standard"}"#
        );
        let t: TrafficModel = serde_json::from_str(
            r#"{"packet_size_bits":8000.0,"arrival_process":"poisson","delay_model":"scaled_wait"}"#,
        )
        .unwrap();
        assert_eq!(t.delay_model, DelayModel::ScaledWait);
    }

    proptest! {
        #[test]
        fn delay_monotone(lambda in 0.0f64..900.0, mu in 1000.0f64..5000.0, dl in 0.1f64..50.0) {
            let d = md1_mean_delay(lambda, mu).unwrap();
            prop_assert!(md1_mean_delay(lambda + dl, mu).unwrap() > d);
            prop_assert!(md1_mean_delay(lambda, mu + dl).unwrap() < d);
        }

        #[test]
        fn min_rate_monotone(lambda in 0.0f64..1e4, h in 1e-4f64..0.1, dl in 0.1f64..100.0, dh in 1e-5f64..1e-2) {
            let mu = min_service_rate(lambda, h).unwrap();
            prop_assert!(min_service_rate(lambda + dl, h).unwrap() >= mu);
            prop_assert!(min_service_rate(lambda, h + dh).unwrap() <= mu);
        }

        #[test]
        fn required_capacity_monotone(t in 1e5f64..5e7, h in 1e-4f64..0.1, dt in 1e3f64..1e6, dh in 1e-5f64..1e-2) {
            let m = DelayModel::Standard;
            let c = required_capacity(t, h, 12_000.0, m).unwrap();
            prop_assert!(c >= t);
            prop_assert!(required_capacity(t + dt, h, 12_000.0, m).unwrap() >= c);
            prop_assert!(required_capacity(t, h + dh, 12_000.0, m).unwrap() <= c);
        }
    }
}
