use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flightdyn::{ControlInput, ControlVector, CHANNELS};

/// Piecewise-linear control offsets from a reference, on `N` uniformly spaced points over `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub horizon: f64,
    pub reference: ControlVector,
    pub points: Vec<[f64; CHANNELS]>,
}

impl ControlSchedule {
    /// All offsets zero: the reference held for the whole horizon.
    pub fn hold(reference: ControlVector, horizon: f64, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument(format!("a schedule needs at least 2 points, got {n}")));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("schedule horizon must be positive, got {horizon}")));
        }
        Ok(ControlSchedule { horizon, reference, points: vec![[0.0; CHANNELS]; n] })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.horizon / (self.points.len() - 1) as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.points.len() {
            self.horizon
        } else {
            k as f64 * self.spacing()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.points.len()).map(|k| self.time(k)).collect()
    }

    /// Absolute controls at point `k`.
    pub fn point(&self, k: usize) -> ControlVector {
        ControlVector(std::array::from_fn(|i| self.reference.0[i] + self.points[k][i]))
    }

    fn segment(&self, t: f64) -> (usize, f64) {
        let n = self.points.len();
        let s = (t / self.spacing()).clamp(0.0, (n - 1) as f64);
        let s = if (s - s.round()).abs() < 1e-9 { s.round() } else { s };
        let k = (s.floor() as usize).min(n - 2);
        (k, s - k as f64)
    }

    /// Interpolated controls; errors outside `[0, T]`.
    pub fn interpolate(&self, t: f64) -> Result<ControlVector> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::OutsideHorizon { t, horizon: self.horizon });
        }
        Ok(self.controls(t))
    }

    /// Slope of each channel on every segment.
    pub fn segment_rates(&self) -> Vec<[f64; CHANNELS]> {
        let h = self.spacing();
        self.points.windows(2).map(|w| std::array::from_fn(|i| (w[1][i] - w[0][i]) / h)).collect()
    }
}

impl ControlInput for ControlSchedule {
    fn controls(&self, t: f64) -> ControlVector {
        let (k, w) = self.segment(t);
        let a = &self.points[k];
        let b = &self.points[k + 1];
        ControlVector(std::array::from_fn(|i| {
            if w == 0.0 {
                self.reference.0[i] + a[i]
            } else if w == 1.0 {
                self.reference.0[i] + b[i]
            } else {
                self.reference.0[i] + a[i] + w * (b[i] - a[i])
            }
        }))
    }

    fn rates(&self, t: f64) -> [f64; CHANNELS] {
        if t >= self.horizon || t < 0.0 {
            return [0.0; CHANNELS];
        }
        let h = self.spacing();
        let k = ((t / h).floor() as usize).min(self.points.len() - 2);
        // right derivative: at a knot use the segment that starts there
        let k = if t >= self.time(k + 1) { k + 1 } else { k };
        let k = k.min(self.points.len() - 2);
        std::array::from_fn(|i| (self.points[k + 1][i] - self.points[k][i]) / h)
    }

    fn knots(&self) -> Vec<f64> {
        self.times()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp() -> ControlSchedule {
        let mut s = ControlSchedule::hold(ControlVector::default(), 1.0, 2).unwrap();
        s.points[1][0] = 2.0;
        s
    }

    #[test]
    fn midpoint_of_two_points() {
        assert!((ramp().interpolate(0.5).unwrap().0[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn control_points_are_exact() {
        let mut s = ControlSchedule::hold(ControlVector([0.1; CHANNELS]), 2.0, 25).unwrap();
        for (k, p) in s.points.iter_mut().enumerate() {
            p[3] = (k as f64 * 0.37).sin();
        }
        for k in 0..25 {
            assert_eq!(s.interpolate(s.time(k)).unwrap().0[3], 0.1 + (k as f64 * 0.37).sin());
        }
    }

    #[test]
    fn constant_points_give_constant_output() {
        let s = ControlSchedule::hold(ControlVector([0.3; CHANNELS]), 2.0, 7).unwrap();
        for k in 0..=50 {
            assert_eq!(s.controls(k as f64 * 0.04).0, [0.3; CHANNELS]);
        }
    }

    #[test]
    fn outside_horizon_is_an_error() {
        assert!(ramp().interpolate(1.0 + 1e-9).is_err());
        assert!(ramp().interpolate(-1e-9).is_err());
    }

    #[test]
    fn rates_are_right_derivatives() {
        let mut s = ControlSchedule::hold(ControlVector::default(), 2.0, 3).unwrap();
        s.points[1][0] = 1.0;
        assert_eq!(s.rates(0.0)[0], 1.0);
        assert_eq!(s.rates(0.999)[0], 1.0);
        assert_eq!(s.rates(1.0)[0], -1.0);
        assert_eq!(s.rates(2.0)[0], 0.0);
        assert_eq!(s.knots(), vec![0.0, 1.0, 2.0]);
    }
}
