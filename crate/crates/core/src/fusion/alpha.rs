//! The fusion weight alpha and its per-query computation.
//!
//! Alpha always lives on the one-decimal grid {0.0, 0.1, ..., 1.0} and is
//! stored as integer tenths, so grid values compare exactly and serialize
//! without float-noise.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::judge::EffectivenessScore;

/// Weight on the normalized dense score; `1 - alpha` weights BM25.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct AlphaValue(u8);

impl AlphaValue {
    pub const ZERO: AlphaValue = AlphaValue(0);
    pub const HALF: AlphaValue = AlphaValue(5);
    pub const ONE: AlphaValue = AlphaValue(10);

    pub fn from_tenths(tenths: u8) -> Result<Self> {
        if tenths > 10 {
            return Err(Error::InvalidInput(format!(
                "alpha tenths must be in 0..=10, got {tenths}"
            )));
        }
        Ok(AlphaValue(tenths))
    }

    /// Accepts only values on the 0.1 grid (up to float representation
    /// error).
    pub fn from_f64(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidInput(format!(
                "alpha must be in [0, 1], got {value}"
            )));
        }
        let tenths = (value * 10.0).round();
        if ((value * 10.0) - tenths).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "alpha must lie on the 0.1 grid, got {value}"
            )));
        }
        Ok(AlphaValue(tenths as u8))
    }

    pub fn tenths(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 10.0
    }

    /// All eleven grid values in ascending order.
    pub fn grid() -> [AlphaValue; 11] {
        [
            AlphaValue(0),
            AlphaValue(1),
            AlphaValue(2),
            AlphaValue(3),
            AlphaValue(4),
            AlphaValue(5),
            AlphaValue(6),
            AlphaValue(7),
            AlphaValue(8),
            AlphaValue(9),
            AlphaValue(10),
        ]
    }
}

impl TryFrom<f64> for AlphaValue {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        AlphaValue::from_f64(value)
    }
}

impl From<AlphaValue> for f64 {
    fn from(alpha: AlphaValue) -> f64 {
        alpha.value()
    }
}

impl std::fmt::Display for AlphaValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

/// Per-query fusion weight from the two effectiveness scores:
///
/// - both scores 0: neutral 0.5 (neither method showed signal);
/// - exactly one score is 5: exclusive preference, 1.0 or 0.0;
/// - otherwise the dense share `s_v / (s_v + s_b)`, rounded half away
///   from zero to one decimal.
pub fn compute_alpha(s_v: EffectivenessScore, s_b: EffectivenessScore) -> AlphaValue {
    let (v, b) = (s_v.get(), s_b.get());
    match (v, b) {
        (0, 0) => AlphaValue::HALF,
        (5, b) if b != 5 => AlphaValue::ONE,
        (v, 5) if v != 5 => AlphaValue::ZERO,
        _ => {
            let ratio = f64::from(v) / f64::from(v + b);
            // f64::round rounds half-way cases away from zero.
            AlphaValue((ratio * 10.0).round() as u8)
        }
    }
}
