use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::RadioError;
use crate::scalar::{lit, to_f64, Scalar};

const DEFAULT_TABLE: &str = include_str!("../../data/mcs_vht20_lgi_1ss.json");

/// Relative tolerance when matching a requested BER against table keys.
const BER_MATCH_REL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BerThreshold<T = f64> {
    pub ber: T,
    /// Minimum SNR in dB.
    pub min_snr: T,
}

/// One row of the rate table: PHY rate and the minimum SNR per BER target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct McsEntry<T = f64> {
    pub index: u8,
    /// bit/s
    pub phy_rate: T,
    pub min_snr_by_ber: Vec<BerThreshold<T>>,
}

impl<T: Scalar> McsEntry<T> {
    pub fn threshold(&self, ber: T) -> Option<T> {
        self.min_snr_by_ber
            .iter()
            .find(|t| ber_matches(t.ber, ber))
            .map(|t| t.min_snr)
    }

    fn threshold_or_err(&self, ber: T) -> Result<T, RadioError> {
        self.threshold(ber).ok_or(RadioError::MissingBer {
            ber: to_f64(ber),
            index: self.index,
        })
    }

    pub fn cast<U: Scalar>(&self) -> McsEntry<U> {
        McsEntry {
            index: self.index,
            phy_rate: lit(to_f64(self.phy_rate)),
            min_snr_by_ber: self
                .min_snr_by_ber
                .iter()
                .map(|t| BerThreshold { ber: lit(to_f64(t.ber)), min_snr: lit(to_f64(t.min_snr)) })
                .collect(),
        }
    }
}

pub(crate) fn ber_matches<T: Scalar>(a: T, b: T) -> bool {
    let (a, b) = (to_f64(a), to_f64(b));
    (a - b).abs() <= BER_MATCH_REL * a.abs().max(b.abs())
}

/// Checks the table invariants: rates and thresholds strictly increasing with
/// index, and a stricter BER never needs a lower SNR.
pub fn validate_mcs_table<T: Scalar>(table: &[McsEntry<T>]) -> Result<(), RadioError> {
    let bad = |m: String| Err(RadioError::InvalidTable(m));
    if table.is_empty() {
        return bad("empty table".into());
    }
    for pair in table.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        if hi.index <= lo.index {
            return bad(format!("indices not increasing at {}", hi.index));
        }
        if !(hi.phy_rate > lo.phy_rate) {
            return bad(format!("phy_rate not increasing at index {}", hi.index));
        }
        for t in &lo.min_snr_by_ber {
            let upper = hi.threshold_or_err(t.ber)?;
            if !(upper > t.min_snr) {
                return bad(format!(
                    "threshold not increasing at index {} for BER {}",
                    hi.index, t.ber
                ));
            }
        }
    }
    for e in table {
        for a in &e.min_snr_by_ber {
            for b in &e.min_snr_by_ber {
                if a.ber < b.ber && !ber_matches(a.ber, b.ber) && !(a.min_snr > b.min_snr) {
                    return bad(format!(
                        "index {}: BER {} must need more SNR than BER {}",
                        e.index, a.ber, b.ber
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Highest-index entry whose threshold at `ber` is at most `snr` (inclusive).
pub fn mcs_for_snr<T: Scalar>(
    table: &[McsEntry<T>],
    snr: T,
    ber: T,
) -> Result<Option<&McsEntry<T>>, RadioError> {
    let mut best = None;
    for entry in table {
        let threshold = entry.threshold_or_err(ber)?;
        if snr >= threshold && best.is_none_or(|b: &McsEntry<T>| entry.index > b.index) {
            best = Some(entry);
        }
    }
    Ok(best)
}

/// The shipped IEEE 802.11ac table (20 MHz, 800 ns GI, one spatial stream)
/// with thresholds for BER 1e-5 and 1e-10.
pub fn default_mcs_table<T: Scalar>() -> Vec<McsEntry<T>> {
    let table: Vec<McsEntry<f64>> =
        serde_json::from_str(DEFAULT_TABLE).expect("bundled MCS table parses");
    table.iter().map(McsEntry::cast).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    Bpsk,
    Qpsk,
    Qam16,
    Qam64,
    Qam256,
}

impl Modulation {
    pub fn order(self) -> u32 {
        match self {
            Modulation::Bpsk => 2,
            Modulation::Qpsk => 4,
            Modulation::Qam16 => 16,
            Modulation::Qam64 => 64,
            Modulation::Qam256 => 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CodingRate {
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "2/3")]
    TwoThirds,
    #[serde(rename = "3/4")]
    ThreeQuarters,
    #[serde(rename = "5/6")]
    FiveSixths,
}

impl CodingRate {
    /// Fixed coding gain over the uncoded constellation, dB.
    pub fn coding_gain_db(self) -> f64 {
        match self {
            CodingRate::Half => 6.0,
            CodingRate::TwoThirds => 5.0,
            CodingRate::ThreeQuarters => 4.5,
            CodingRate::FiveSixths => 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsDescriptor {
    pub index: u8,
    pub modulation: Modulation,
    pub coding: CodingRate,
    /// bit/s
    pub phy_rate: f64,
}

/// VHT MCS 0-8, 20 MHz, 800 ns GI, 1 spatial stream.
pub fn vht20_descriptors() -> Vec<McsDescriptor> {
    use CodingRate::*;
    use Modulation::*;
    [
        (Bpsk, Half, 6.5),
        (Qpsk, Half, 13.0),
        (Qpsk, ThreeQuarters, 19.5),
        (Qam16, Half, 26.0),
        (Qam16, ThreeQuarters, 39.0),
        (Qam64, TwoThirds, 52.0),
        (Qam64, ThreeQuarters, 58.5),
        (Qam64, FiveSixths, 65.0),
        (Qam256, ThreeQuarters, 78.0),
    ]
    .into_iter()
    .enumerate()
    .map(|(i, (modulation, coding, mbps))| McsDescriptor {
        index: i as u8,
        modulation,
        coding,
        phy_rate: mbps * 1e6,
    })
    .collect()
}

fn gaussian_tail(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Uncoded Gray-coded bit error rate over AWGN at a linear SNR per symbol.
pub fn uncoded_ber(modulation: Modulation, snr_linear: f64) -> f64 {
    match modulation {
        Modulation::Bpsk => gaussian_tail((2.0 * snr_linear).sqrt()),
        m => {
            let order = f64::from(m.order());
            let bits = order.log2();
            4.0 / bits * (1.0 - 1.0 / order.sqrt())
                * gaussian_tail((3.0 * snr_linear / (order - 1.0)).sqrt())
        }
    }
}

/// SNR (dB) at which the coded link reaches `ber`.
pub fn awgn_min_snr_db(modulation: Modulation, coding: CodingRate, ber: f64) -> f64 {
    // BER is strictly decreasing in SNR; bisect on log(BER) in dB.
    let target = ber.ln();
    let f = |db: f64| uncoded_ber(modulation, 10f64.powf(db / 10.0)).ln() - target;
    let (mut lo, mut hi) = (-30.0_f64, 80.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi) - coding.coding_gain_db()
}

/// Builds the 802.11ac table with analytically derived thresholds.
pub fn vht20_table(bers: &[f64]) -> Vec<McsEntry<f64>> {
    vht20_descriptors()
        .into_iter()
        .map(|d| McsEntry {
            index: d.index,
            phy_rate: d.phy_rate,
            min_snr_by_ber: bers
                .iter()
                .map(|&ber| BerThreshold { ber, min_snr: awgn_min_snr_db(d.modulation, d.coding, ber) })
                .collect(),
        })
        .collect()
}
