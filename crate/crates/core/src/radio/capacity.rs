use serde::{Deserialize, Serialize};

use super::mcs::{ber_matches, McsEntry};
use super::RadioError;
use crate::scalar::{from_usize, to_f64, Scalar};

/// Linear SNR-to-rate regression for one BER target, clamped to the table's
/// rate range and cut off below the lowest MCS threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CapacityModel<T = f64> {
    pub ber: T,
    /// (bit/s) per dB
    pub slope: T,
    /// bit/s
    pub intercept: T,
    pub rate_floor: T,
    pub rate_ceiling: T,
    /// dB; capacity is zero below this SNR.
    pub snr_cutoff: T,
    /// Largest |fit - phy_rate| over the table points, bit/s.
    pub max_residual: T,
    /// phy_rate - fit, one per MCS entry in table order.
    pub residuals: Vec<T>,
}

impl<T: Scalar> CapacityModel<T> {
    /// Capacity of one base channel at `snr` dB, bit/s.
    pub fn capacity(&self, snr: T) -> T {
        if !(snr >= self.snr_cutoff) {
            return T::zero();
        }
        let line = self.slope * snr + self.intercept;
        if line.is_nan() {
            return self.rate_ceiling;
        }
        line.max(self.rate_floor).min(self.rate_ceiling)
    }

    /// Unclamped regression line.
    pub fn line(&self, snr: T) -> T {
        self.slope * snr + self.intercept
    }
}

/// Ordinary least squares of phy_rate against the threshold at `ber`.
pub fn fit_capacity_model<T: Scalar>(
    table: &[McsEntry<T>],
    ber: T,
) -> Result<CapacityModel<T>, RadioError> {
    if table.len() < 2 {
        return Err(RadioError::TooFewPoints(table.len()));
    }
    let mut xs = Vec::with_capacity(table.len());
    for e in table {
        xs.push(e.threshold(ber).ok_or(RadioError::MissingBer {
            ber: to_f64(ber),
            index: e.index,
        })?);
    }
    let ys: Vec<T> = table.iter().map(|e| e.phy_rate).collect();
    let n: T = from_usize(table.len());
    let x_mean = xs.iter().copied().sum::<T>() / n;
    let y_mean = ys.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        sxx = sxx + (x - x_mean) * (x - x_mean);
        sxy = sxy + (x - x_mean) * (y - y_mean);
    }
    let spread = xs.iter().fold(T::zero(), |m, &x| m.max((x - x_mean).abs()));
    if spread <= T::epsilon() * x_mean.abs().max(T::one()) {
        return Err(RadioError::DegenerateFit(to_f64(ber)));
    }
    let slope = sxy / sxx;
    if !(slope > T::zero()) {
        return Err(RadioError::NonIncreasingFit(to_f64(ber)));
    }
    let intercept = y_mean - slope * x_mean;
    let residuals: Vec<T> = xs
        .iter()
        .zip(&ys)
        .map(|(&x, &y)| y - (slope * x + intercept))
        .collect();
    let max_residual = residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    let lowest = table
        .iter()
        .zip(&xs)
        .min_by_key(|(e, _)| e.index)
        .map(|(_, &x)| x)
        .expect("non-empty");
    let ceiling = ys.iter().copied().fold(T::zero(), T::max);
    Ok(CapacityModel {
        ber,
        slope,
        intercept,
        rate_floor: T::zero(),
        rate_ceiling: ceiling,
        snr_cutoff: lowest,
        max_residual,
        residuals,
    })
}

/// One fitted model per BER target in use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct CapacityModelSet<T = f64> {
    pub models: Vec<CapacityModel<T>>,
}

impl<T: Scalar> CapacityModelSet<T> {
    pub fn fit(table: &[McsEntry<T>], bers: &[T]) -> Result<Self, RadioError> {
        let mut models: Vec<CapacityModel<T>> = Vec::new();
        for &ber in bers {
            if models.iter().any(|m| ber_matches(m.ber, ber)) {
                continue;
            }
            models.push(fit_capacity_model(table, ber)?);
        }
        Ok(Self { models })
    }

    pub fn for_ber(&self, ber: T) -> Result<&CapacityModel<T>, RadioError> {
        self.models
            .iter()
            .find(|m| ber_matches(m.ber, ber))
            .ok_or(RadioError::NoModelForBer(to_f64(ber)))
    }
}
