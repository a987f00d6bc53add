//! The concave dual `D1 y^B1 + D2 y^B2 + ((c - a)/r) y` at a fixed annuity
//! income, restricted to the dual interval between two free boundaries, and
//! its Legendre inversion back to wealth.

use crate::error::Result;
use crate::numerics::{invert_dual_derivative, RootConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSlice {
    pub d1: f64,
    pub d2: f64,
    pub b1: f64,
    pub b2: f64,
    /// `(c - a)/r`
    pub slope: f64,
    /// Dual value at the upper wealth boundary (safe or purchase level).
    pub y_low: f64,
    /// Dual value at the lower wealth boundary (ruin or zero-wealth level).
    pub y_high: f64,
}

impl DualSlice {
    pub fn value(&self, y: f64) -> f64 {
        self.d1 * y.powf(self.b1) + self.d2 * y.powf(self.b2) + self.slope * y
    }

    pub fn dy(&self, y: f64) -> f64 {
        self.d1 * self.b1 * y.powf(self.b1 - 1.0)
            + self.d2 * self.b2 * y.powf(self.b2 - 1.0)
            + self.slope
    }

    pub fn dyy(&self, y: f64) -> f64 {
        self.d1 * self.b1 * (self.b1 - 1.0) * y.powf(self.b1 - 2.0)
            + self.d2 * self.b2 * (self.b2 - 1.0) * y.powf(self.b2 - 2.0)
    }

    /// Wealth range `[dy(y_high), dy(y_low)]` covered by the slice.
    pub fn wealth_range(&self) -> (f64, f64) {
        (self.dy(self.y_high), self.dy(self.y_low))
    }

    /// Maximiser `y*` of `value(y) - w y` over `[y_low, y_high]`.
    pub fn conjugate_point(&self, w: f64, cfg: &RootConfig) -> Result<f64> {
        invert_dual_derivative(|y| self.dy(y), w, self.y_low, self.y_high, cfg)
    }

    /// Convex conjugate `max_y [value(y) - w y]`, i.e. the ruin probability.
    pub fn conjugate(&self, w: f64, cfg: &RootConfig) -> Result<f64> {
        let y = self.conjugate_point(w, cfg)?;
        Ok(self.value(y) - w * y)
    }

    /// Feedback investment `-(mu - r)/sigma^2 * y * dyy(y)` at dual point `y`.
    pub fn investment_at(&self, merton_factor: f64, y: f64) -> f64 {
        -merton_factor * y * self.dyy(y)
    }
}
