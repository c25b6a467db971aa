//! Static and dynamic trim, and trim-envelope classification.

mod cost;
mod envelope;
mod solve;

pub use cost::{channel_stats, trim_cost, trim_cost_signals, ChannelStats, TrimCostSpec};
pub use envelope::{trim_envelope, EnvelopeEntry, EnvelopeTable};
pub use solve::{dynamic_trim, equilibrium_residuals, static_trim, window_residuals};

use serde::{Deserialize, Serialize};

use crate::flightdyn::{ControlVector, TrimPoint};
use crate::vehicle::config::AircraftConfig;

/// Trimmed flight condition with its steadiness measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimSolution {
    pub speed: f64,
    pub alpha: f64,
    /// Elevator, winglets and thrust are set; the lateral channels stay zero.
    pub controls: ControlVector,
    /// Vertical speed with the largest magnitude over the check window (m/s).
    pub residual_w: f64,
    /// Pitch rate with the largest magnitude over the check window (deg/s).
    pub residual_q_deg: f64,
    pub converged: bool,
    pub cost: f64,
    /// Normalized force and moment imbalance of the steady solve: Z/W, M/(W c), X/W.
    pub equilibrium: [f64; 3],
    pub iterations: usize,
}

impl TrimSolution {
    pub fn point(&self) -> TrimPoint {
        TrimPoint { speed: self.speed, alpha: self.alpha, controls: self.controls }
    }

    pub fn elevator(&self) -> f64 {
        self.controls.0[crate::flightdyn::ELEVATOR]
    }

    pub fn morph(&self) -> f64 {
        self.controls.0[crate::flightdyn::MORPH_LEFT]
    }

    pub fn thrust(&self) -> f64 {
        self.controls.thrust()
    }

    /// Worst residual as a multiple of its tolerance.
    pub fn residual_ratio(&self, config: &AircraftConfig) -> f64 {
        let c = classify(self.residual_w, self.residual_q_deg, config);
        c.w_ratio.max(c.q_ratio)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Classification {
    pub w_ok: bool,
    pub q_ok: bool,
    pub trimmed: bool,
    pub w_ratio: f64,
    pub q_ratio: f64,
}

/// Trimmed when both residuals are within the configured tolerances.
pub fn classify(w: f64, q_deg: f64, config: &AircraftConfig) -> Classification {
    classify_with(w, q_deg, config.trim.tolerance_w, config.trim.tolerance_q_deg)
}

pub fn classify_with(w: f64, q_deg: f64, tol_w: f64, tol_q_deg: f64) -> Classification {
    let w_ratio = if w.is_finite() { w.abs() / tol_w } else { f64::INFINITY };
    let q_ratio = if q_deg.is_finite() { q_deg.abs() / tol_q_deg } else { f64::INFINITY };
    let w_ok = w_ratio <= 1.0;
    let q_ok = q_ratio <= 1.0;
    Classification { w_ok, q_ok, trimmed: w_ok && q_ok, w_ratio, q_ratio }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::config::default_config;

    #[test]
    fn reference_table_classifications() {
        let c = default_config();
        assert!(classify(0.0003, -0.0230, &c).trimmed);
        let both = classify(0.1014, 0.6148, &c);
        assert!(!both.trimmed && !both.w_ok && !both.q_ok);
        let q_only = classify(-0.0134, -1.7398, &c);
        assert!(!q_only.trimmed && q_only.w_ok && !q_only.q_ok);
    }

    #[test]
    fn non_finite_residuals_are_untrimmed() {
        let c = default_config();
        assert!(!classify(f64::NAN, 0.0, &c).trimmed);
        assert!(!classify(0.0, f64::INFINITY, &c).trimmed);
    }
}
