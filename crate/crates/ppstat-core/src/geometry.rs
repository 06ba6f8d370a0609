//! Rectangular observation windows, edge-correction weights and torus
//! arithmetic shared by all estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A location in the plane, coordinates in metres.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    /// Euclidean distance to `other`.
    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// An axis-aligned rectangular observation window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RectWindow {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl RectWindow {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidWindow("non-finite coordinate".into()));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(Error::InvalidWindow(format!(
                "empty rectangle [{x_min},{x_max}]x[{y_min},{y_max}]"
            )));
        }
        Ok(RectWindow {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }
    pub fn y_min(&self) -> f64 {
        self.y_min
    }
    pub fn x_max(&self) -> f64 {
        self.x_max
    }
    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn min_side(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Distance from `p` to the window boundary (0 on the boundary).
    pub fn boundary_distance(&self, p: &Point) -> f64 {
        (p.x - self.x_min)
            .min(self.x_max - p.x)
            .min(p.y - self.y_min)
            .min(self.y_max - p.y)
    }

    /// Shrink the window by `r` on every side (minus sampling).
    pub fn erode(&self, r: f64) -> Result<RectWindow> {
        assert!(r >= 0.0, "erosion radius must be non-negative");
        if 2.0 * r >= self.min_side() {
            return Err(Error::ErosionEmpty(2.0 * r));
        }
        Ok(RectWindow {
            x_min: self.x_min + r,
            y_min: self.y_min + r,
            x_max: self.x_max - r,
            y_max: self.y_max - r,
        })
    }

    /// Grow the window by `r` on every side.
    pub fn dilate(&self, r: f64) -> RectWindow {
        assert!(r >= 0.0, "dilation radius must be non-negative");
        RectWindow {
            x_min: self.x_min - r,
            y_min: self.y_min - r,
            x_max: self.x_max + r,
            y_max: self.y_max + r,
        }
    }
}

/// Translation edge-correction weight |W| / |W ∩ W_{p−q}| for a pair of
/// points in `w`. Always ≥ 1, with equality iff `p == q`.
pub fn translation_weight(w: &RectWindow, p: &Point, q: &Point) -> f64 {
    let ox = w.width() - (p.x - q.x).abs();
    let oy = w.height() - (p.y - q.y).abs();
    // Cannot fire when both points lie in w.
    assert!(ox > 0.0 && oy > 0.0, "degenerate overlap");
    w.area() / (ox * oy)
}

/// Translate every point by `shift`, wrapping coordinates modulo the window
/// sides so the result stays in `w`.
pub fn torus_shift(points: &[Point], shift: &Point, w: &RectWindow) -> Vec<Point> {
    let a = w.width();
    let b = w.height();
    points
        .iter()
        .map(|p| Point {
            x: w.x_min + (p.x - w.x_min + shift.x).rem_euclid(a),
            y: w.y_min + (p.y - w.y_min + shift.y).rem_euclid(b),
        })
        .collect()
}
