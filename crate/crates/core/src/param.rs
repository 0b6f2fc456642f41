//! Parameter boxes: axis-aligned products of closed intervals.

use crate::error::{Error, Result};

/// The parameter set Ξ = Π_j [lo_j, hi_j], with each coordinate understood
/// as an independent uniform random variable on its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::invalid(
                "parameter box",
                format!("bound lengths differ: {} vs {}", lo.len(), hi.len()),
            ));
        }
        if lo.is_empty() {
            return Err(Error::invalid("parameter box", "dimension must be at least 1"));
        }
        for (j, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::invalid("parameter box", format!("non-finite bound at index {j}")));
            }
            if l > h {
                return Err(Error::EmptyBox { index: j, lo: l, hi: h });
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lo
    }

    pub fn upper(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        point.len() == self.dim()
            && point
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&x, (&l, &h))| x >= l && x <= h)
    }

    /// Coordinate-wise interval midpoints, i.e. E[ξ] for the uniform model.
    pub fn midpoint(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(&l, &h)| 0.5 * (l + h)).collect()
    }

    /// Affinely map a point of the unit cube into the box.
    pub fn map_from_unit(&self, unit: &[f64], out: &mut [f64]) {
        debug_assert_eq!(unit.len(), self.dim());
        for (o, ((&l, &h), &t)) in out.iter_mut().zip(self.lo.iter().zip(&self.hi).zip(unit)) {
            *o = l + (h - l) * t;
        }
    }
}
