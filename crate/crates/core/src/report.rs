//! Evaluated inequalities, as emitted in every JSON report.

use serde::{Deserialize, Serialize};

/// One inequality `lhs <= rhs` with a short description of where it comes
/// from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub anchor: String,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub holds: bool,
}

impl Inequality {
    /// `lhs <= rhs` up to a relative tolerance `tol`.
    pub fn new(anchor: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        let slack = rhs - lhs;
        let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
        Self {
            anchor: anchor.into(),
            lhs,
            rhs,
            slack,
            holds: slack >= -tol * scale,
        }
    }

    /// `lhs <= rhs` with no tolerance.
    pub fn exact(anchor: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Self::new(anchor, lhs, rhs, 0.0)
    }
}
