use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flightdyn::Trajectory;
use crate::vehicle::config::AircraftConfig;

/// Weights and window of the steadiness cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrimCostSpec {
    /// Evaluation window in trajectory time; `None` uses the whole trajectory.
    pub window: Option<(f64, f64)>,
    pub trend_z: f64,
    pub trend_theta: f64,
    pub oscillation_z: f64,
    pub oscillation_theta: f64,
    pub epsilon: f64,
}

impl Default for TrimCostSpec {
    fn default() -> Self {
        TrimCostSpec {
            window: None,
            trend_z: 2.0,
            trend_theta: 2.0,
            oscillation_z: 1.0,
            oscillation_theta: 1.0,
            epsilon: 1e-6,
        }
    }
}

impl TrimCostSpec {
    pub fn from_config(config: &AircraftConfig) -> Self {
        let t = &config.trim;
        TrimCostSpec {
            window: None,
            trend_z: t.weight_trend,
            trend_theta: t.weight_trend,
            oscillation_z: t.weight_oscillation,
            oscillation_theta: t.weight_oscillation,
            epsilon: t.epsilon,
        }
    }
}

/// Drift slope and variance of one normalized channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub slope: f64,
    pub variance: f64,
}

fn trapezoid_weights(t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let mut w = vec![0.0; n];
    for k in 0..n.saturating_sub(1) {
        let h = 0.5 * (t[k + 1] - t[k]);
        w[k] += h;
        w[k + 1] += h;
    }
    w
}

/// Normalize by the peak amplitude, then fit a weighted line and take the weighted variance.
pub fn channel_stats(t: &[f64], x: &[f64], epsilon: f64) -> Result<ChannelStats> {
    if t.len() != x.len() {
        return Err(Error::InvalidArgument(format!("{} times for {} values", t.len(), x.len())));
    }
    if t.len() < 2 || t[t.len() - 1] <= t[0] {
        return Err(Error::EmptyWindow);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let xs: Vec<f64> = x.iter().map(|v| v / (peak + epsilon)).collect();
    let w = trapezoid_weights(t);
    let total: f64 = w.iter().sum();
    let mean = |v: &dyn Fn(usize) -> f64| (0..t.len()).map(|k| w[k] * v(k)).sum::<f64>() / total;
    let tm = mean(&|k| t[k]);
    let xm = mean(&|k| xs[k]);
    let stt = mean(&|k| (t[k] - tm).powi(2));
    let stx = mean(&|k| (t[k] - tm) * (xs[k] - xm));
    let variance = mean(&|k| (xs[k] - xm).powi(2));
    Ok(ChannelStats { slope: stx / stt, variance })
}

/// Cost of raw altitude-like and pitch-like signals sampled at `t`.
pub fn trim_cost_signals(t: &[f64], z: &[f64], theta: &[f64], weights: &TrimCostSpec) -> Result<f64> {
    let sz = channel_stats(t, z, weights.epsilon)?;
    let st = channel_stats(t, theta, weights.epsilon)?;
    Ok(weights.trend_z * sz.slope.powi(2)
        + weights.oscillation_z * sz.variance
        + weights.trend_theta * st.slope.powi(2)
        + weights.oscillation_theta * st.variance)
}

/// Steadiness cost of a trajectory: z relative to the window start and pitch angle.
pub fn trim_cost(traj: &Trajectory, weights: &TrimCostSpec) -> Result<f64> {
    let (t0, t1) = weights.window.unwrap_or((0.0, traj.horizon));
    let tol = 1e-9 * traj.dt.max(1e-12);
    let samples: Vec<_> = traj.samples.iter().filter(|s| s.t >= t0 - tol && s.t <= t1 + tol).collect();
    if samples.len() < 2 || t1 <= t0 {
        return Err(Error::EmptyWindow);
    }
    let z0 = samples[0].rigid.position.z;
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let z: Vec<f64> = samples.iter().map(|s| s.rigid.position.z - z0).collect();
    let theta: Vec<f64> = samples.iter().map(|s| s.rigid.euler.y).collect();
    trim_cost_signals(&t, &z, &theta, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|k| k as f64 / n as f64).collect()
    }

    #[test]
    fn constant_channels_cost_nothing() {
        let t = grid(100);
        let j = trim_cost_signals(&t, &vec![3.0; 101], &vec![0.1; 101], &TrimCostSpec::default()).unwrap();
        assert!(j.abs() < 1e-20);
    }

    #[test]
    fn ramp_matches_integral_oracle() {
        let t = grid(4000);
        let zero = vec![0.0; t.len()];
        let s = TrimCostSpec::default();
        let j = trim_cost_signals(&t, &t, &zero, &s).unwrap();
        let k = 1.0 / (1.0 + s.epsilon);
        let oracle = 2.0 * k * k + k * k / 12.0;
        assert!((j - oracle).abs() < 1e-6, "{j} vs {oracle}");
    }

    #[test]
    fn cosine_has_variance_only() {
        let t = grid(4000);
        let z: Vec<f64> = t.iter().map(|t| (2.0 * PI * t).cos()).collect();
        let zero = vec![0.0; t.len()];
        let st = channel_stats(&t, &z, 1e-6).unwrap();
        assert!(st.slope.abs() < 1e-9);
        let j = trim_cost_signals(&t, &z, &zero, &TrimCostSpec::default()).unwrap();
        assert!((j - 0.5).abs() < 1e-5, "{j}");
    }

    #[test]
    fn scaling_changes_cost_only_through_epsilon() {
        let t = grid(200);
        let z: Vec<f64> = t.iter().map(|t| 0.3 * t + 0.05 * (7.0 * t).sin()).collect();
        let zero = vec![0.0; t.len()];
        let s = TrimCostSpec::default();
        let base = trim_cost_signals(&t, &z, &zero, &s).unwrap();
        for k in [0.01, 3.0, 1e4] {
            let zk: Vec<f64> = z.iter().map(|v| v * k).collect();
            let jk = trim_cost_signals(&t, &zk, &zero, &s).unwrap();
            assert!((jk - base).abs() < 10.0 * s.epsilon / (0.01 * 0.3) * base, "{k}: {jk} vs {base}");
        }
    }

    #[test]
    fn empty_window_is_rejected() {
        assert!(matches!(channel_stats(&[0.0], &[1.0], 1e-6), Err(Error::EmptyWindow)));
        assert!(matches!(channel_stats(&[1.0, 1.0], &[1.0, 2.0], 1e-6), Err(Error::EmptyWindow)));
    }
}
