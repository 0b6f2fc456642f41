//! Piecewise-constant controls on a uniform time grid.

use crate::error::{Error, Result};

/// Uniform partition of `[0, t_final]` into `intervals` subintervals,
/// each carrying `channels` control components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlGrid {
    t_final: f64,
    intervals: usize,
    channels: usize,
}

impl ControlGrid {
    pub fn new(t_final: f64, intervals: usize, channels: usize) -> Result<Self> {
        if !t_final.is_finite() || t_final <= 0.0 {
            return Err(Error::invalid("control grid", format!("t_final = {t_final} must be positive")));
        }
        if intervals == 0 {
            return Err(Error::invalid("control grid", "interval count must be at least 1"));
        }
        if channels == 0 {
            return Err(Error::invalid("control grid", "channel count must be at least 1"));
        }
        Ok(Self { t_final, intervals, channels })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Interval length.
    pub fn dt(&self) -> f64 {
        self.t_final / self.intervals as f64
    }

    /// Total number of stored control values.
    pub fn value_count(&self) -> usize {
        self.intervals * self.channels
    }
}

/// A control, stored row-major over (interval, channel).
///
/// Norms and inner products are those of the piecewise-constant representative
/// in L²: `‖u‖² = Δt · Σ_{k,j} u_{kj}²`, so values are grid-resolution
/// independent.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    grid: ControlGrid,
    values: Vec<f64>,
}

impl Control {
    pub fn zeros(grid: ControlGrid) -> Self {
        let values = vec![0.0; grid.value_count()];
        Self { grid, values }
    }

    pub fn from_values(grid: ControlGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.value_count() {
            return Err(Error::invalid(
                "control values",
                format!("expected {} values, got {}", grid.value_count(), values.len()),
            ));
        }
        Ok(Self { grid, values })
    }

    /// Constant-in-time control holding `level` (one value per channel).
    pub fn constant(grid: ControlGrid, level: &[f64]) -> Self {
        assert_eq!(level.len(), grid.channels(), "level length must match channel count");
        let mut values = Vec::with_capacity(grid.value_count());
        for _ in 0..grid.intervals() {
            values.extend_from_slice(level);
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> ControlGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Values on interval `k`.
    pub fn interval(&self, k: usize) -> &[f64] {
        let m = self.grid.channels();
        &self.values[k * m..(k + 1) * m]
    }

    pub fn value(&self, k: usize, j: usize) -> f64 {
        self.values[k * self.grid.channels() + j]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn weighted_norm(&self) -> f64 {
        self.weighted_dot(self).sqrt()
    }

    pub fn weighted_dot(&self, other: &Control) -> f64 {
        assert_eq!(self.grid, other.grid, "controls live on different grids");
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            acc += a * b;
        }
        self.grid.dt() * acc
    }

    pub fn weighted_l1(&self) -> f64 {
        self.grid.dt() * self.values.iter().map(|v| v.abs()).sum::<f64>()
    }

    /// Weighted L² distance to `other`.
    pub fn distance(&self, other: &Control) -> f64 {
        assert_eq!(self.grid, other.grid, "controls live on different grids");
        let mut acc = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            let d = a - b;
            acc += d * d;
        }
        (self.grid.dt() * acc).sqrt()
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Control) {
        assert_eq!(self.grid, x.grid, "controls live on different grids");
        for (s, v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_degenerate_shapes() {
        assert!(ControlGrid::new(0.0, 10, 1).is_err());
        assert!(ControlGrid::new(-1.0, 10, 1).is_err());
        assert!(ControlGrid::new(1.0, 0, 1).is_err());
        assert!(ControlGrid::new(1.0, 10, 0).is_err());
        assert!(ControlGrid::new(f64::NAN, 10, 1).is_err());
    }

    #[test]
    fn weighted_norm_matches_continuous_representative() {
        // u ≡ 1 on [0, 1]: ‖u‖ = 1 for any interval count.
        for q in [1, 5, 50] {
            let grid = ControlGrid::new(1.0, q, 1).unwrap();
            let u = Control::constant(grid, &[1.0]);
            assert!((u.weighted_norm() - 1.0).abs() < 1e-14);
        }
        // u ≡ 2 on [0, 3]: ‖u‖² = 4·3 = 12.
        let grid = ControlGrid::new(3.0, 7, 1).unwrap();
        let u = Control::constant(grid, &[2.0]);
        assert!((u.weighted_norm() - 12f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn axpy_and_distance() {
        let grid = ControlGrid::new(2.0, 4, 2).unwrap();
        let mut a = Control::constant(grid, &[1.0, -1.0]);
        let b = Control::constant(grid, &[0.5, 0.5]);
        a.axpy(2.0, &b);
        assert_eq!(a.value(0, 0), 2.0);
        assert_eq!(a.value(3, 1), 0.0);
        assert!((a.distance(&a)).abs() == 0.0);
    }

    #[test]
    fn from_values_checks_length() {
        let grid = ControlGrid::new(1.0, 3, 2).unwrap();
        assert!(Control::from_values(grid, vec![0.0; 5]).is_err());
        assert!(Control::from_values(grid, vec![0.0; 6]).is_ok());
    }
}
