//! Kernel intensity estimation with local edge correction, bandwidth
//! selection, rescaling and null-intensity construction.
//!
//! A surface stores cell-averaged intensity values. Each data point
//! contributes an isotropic Gaussian kernel divided by its mass inside the
//! window (local edge correction), and the cell values are the exact
//! integrals of that kernel over each cell divided by the cell area. Summing
//! `value * dx * dy` over the grid therefore reproduces the point count up
//! to floating-point rounding, for every bandwidth.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Point, RectWindow};
use crate::pattern::{CensusRecord, PointPattern, Status};

/// Lower bound applied when evaluating a surface, so estimator denominators
/// never divide by zero.
pub const INTENSITY_FLOOR: f64 = 1e-8;

fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Exact linear interpolation; returns `a` bit-for-bit when `a == b`.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// A gridded nonnegative intensity function on a rectangular window,
/// in points per square metre at cell centres.
#[derive(Clone, Debug, PartialEq)]
pub struct IntensitySurface {
    window: RectWindow,
    nx: usize,
    ny: usize,
    dx: f64,
    dy: f64,
    /// Row-major: index `iy * nx + ix`.
    values: Vec<f64>,
}

impl IntensitySurface {
    pub fn from_values(
        window: RectWindow,
        nx: usize,
        ny: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        assert!(nx >= 1 && ny >= 1, "grid sizes must be positive");
        if values.len() != nx * ny {
            return Err(Error::InvalidGrid(format!(
                "expected {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidGrid(
                "intensity values must be finite and non-negative".into(),
            ));
        }
        Ok(IntensitySurface {
            window,
            nx,
            ny,
            dx: window.width() / nx as f64,
            dy: window.height() / ny as f64,
            values,
        })
    }

    pub fn constant(window: RectWindow, nx: usize, ny: usize, value: f64) -> Result<Self> {
        Self::from_values(window, nx, ny, vec![value; nx * ny])
    }

    /// Sample `f(x, y)` at cell centres.
    pub fn from_fn(
        window: RectWindow,
        nx: usize,
        ny: usize,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let dx = window.width() / nx as f64;
        let dy = window.height() / ny as f64;
        let mut values = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let y = window.y_min() + (iy as f64 + 0.5) * dy;
            for ix in 0..nx {
                let x = window.x_min() + (ix as f64 + 0.5) * dx;
                values.push(f(x, y));
            }
        }
        Self::from_values(window, nx, ny, values)
    }

    pub fn window(&self) -> &RectWindow {
        &self.window
    }
    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            self.window.x_min() + (ix as f64 + 0.5) * self.dx,
            self.window.y_min() + (iy as f64 + 0.5) * self.dy,
        )
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(0.0, f64::max)
    }

    /// Grid quadrature of the surface over the window.
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx * self.dy
    }

    /// Bilinear interpolation of the four surrounding cell-centre values,
    /// clamped below at [`INTENSITY_FLOOR`]. Constant extension in the
    /// half-cell margin along the boundary.
    pub fn evaluate(&self, q: &Point) -> Result<f64> {
        if !self.window.contains(q) {
            return Err(Error::OutOfWindow);
        }
        let u = ((q.x - self.window.x_min()) / self.dx - 0.5)
            .clamp(0.0, (self.nx - 1) as f64);
        let v = ((q.y - self.window.y_min()) / self.dy - 0.5)
            .clamp(0.0, (self.ny - 1) as f64);
        let i0 = (u.floor() as usize).min(self.nx - 1);
        let j0 = (v.floor() as usize).min(self.ny - 1);
        let i1 = (i0 + 1).min(self.nx - 1);
        let j1 = (j0 + 1).min(self.ny - 1);
        let fx = u - i0 as f64;
        let fy = v - j0 as f64;
        let bottom = lerp(self.value(i0, j0), self.value(i1, j0), fx);
        let top = lerp(self.value(i0, j1), self.value(i1, j1), fx);
        Ok(lerp(bottom, top, fy).max(INTENSITY_FLOOR))
    }

    /// Multiply all values by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::from_values(
            self.window,
            self.nx,
            self.ny,
            self.values.iter().map(|v| v * c).collect(),
        )
    }

    /// Rescale so the total mass equals `n_target`.
    pub fn rescale_to_count(&self, n_target: usize) -> Result<Self> {
        let mass = self.total_mass();
        if mass <= 0.0 {
            return Err(Error::CannotRescale);
        }
        self.scaled(n_target as f64 / mass)
    }

    /// Cyclically shift the grid by whole cells: the value at `(ix, iy)`
    /// moves to `((ix + kx) mod nx, (iy + ky) mod ny)`.
    pub fn cyclic_shift(&self, kx: usize, ky: usize) -> Self {
        let mut values = vec![0.0; self.values.len()];
        for iy in 0..self.ny {
            let sy = (iy + ky) % self.ny;
            for ix in 0..self.nx {
                let sx = (ix + kx) % self.nx;
                values[sy * self.nx + sx] = self.value(ix, iy);
            }
        }
        IntensitySurface {
            values,
            ..*self
        }
    }

    /// Write the grid as `x,y,lambda` rows, x varying fastest.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,y,lambda")?;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.cell_center(ix, iy);
                writeln!(w, "{},{},{}", c.x, c.y, self.value(ix, iy))?;
            }
        }
        Ok(())
    }

    /// Read a grid written by [`IntensitySurface::to_csv`].
    pub fn from_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if i == 0 {
                if line.trim() != "x,y,lambda" {
                    return Err(Error::Schema(format!(
                        "expected header x,y,lambda, got {line:?}"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut next = |name: &str| -> Result<f64> {
                parts
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::MalformedRow {
                        row: i as u64 + 1,
                        message: format!("cannot parse {name}"),
                    })
            };
            rows.push((next("x")?, next("y")?, next("lambda")?));
        }
        if rows.is_empty() {
            return Err(Error::Schema("no grid rows".into()));
        }
        let y0 = rows[0].1;
        let nx = rows.iter().take_while(|r| r.1 == y0).count();
        if nx == 0 || rows.len() % nx != 0 {
            return Err(Error::Schema("grid is not rectangular".into()));
        }
        let ny = rows.len() / nx;
        let dx = if nx > 1 {
            rows[1].0 - rows[0].0
        } else {
            1.0
        };
        let dy = if ny > 1 {
            rows[nx].1 - rows[0].1
        } else {
            1.0
        };
        let window = RectWindow::new(
            rows[0].0 - dx / 2.0,
            rows[0].1 - dy / 2.0,
            rows[rows.len() - 1].0 + dx / 2.0,
            rows[rows.len() - 1].1 + dy / 2.0,
        )?;
        Self::from_values(window, nx, ny, rows.into_iter().map(|r| r.2).collect())
    }
}

/// Per-axis kernel masses of one data point: `f[j]` is the integral of the
/// 1-D Gaussian over cell slab `j`, evaluated from CDF differences.
fn axis_masses(coord: f64, h: f64, min: f64, max: f64, n: usize) -> Vec<f64> {
    let d = (max - min) / n as f64;
    let mut cdf = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let edge = if i == n { max } else { min + i as f64 * d };
        cdf.push(norm_cdf((edge - coord) / h));
    }
    (0..n).map(|i| (cdf[i + 1] - cdf[i]).max(0.0)).collect()
}

/// Gaussian kernel intensity estimate with local edge correction.
///
/// Each point contributes a kernel of standard deviation `h` divided by its
/// total kernel mass inside the window, so the surface integrates to the
/// point count.
pub fn kernel_intensity(
    p: &PointPattern,
    h: f64,
    nx: usize,
    ny: usize,
) -> Result<IntensitySurface> {
    if p.is_empty() {
        return Err(Error::NoPoints);
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidBandwidth);
    }
    let w = *p.window();
    let n = p.len();

    // Fixed chunking keeps the merge order (and hence the result) identical
    // for every thread count.
    let chunk = n.div_ceil(64).max(1);
    let chunks: Vec<&[Point]> = p.points().chunks(chunk).collect();
    let partials: Vec<Vec<f64>> = chunks
        .into_par_iter()
        .map(|pts| {
            let mut grid = vec![0.0; nx * ny];
            for pt in pts {
                let fx = axis_masses(pt.x, h, w.x_min(), w.x_max(), nx);
                let fy = axis_masses(pt.y, h, w.y_min(), w.y_max(), ny);
                let cx: f64 = fx.iter().sum();
                let cy: f64 = fy.iter().sum();
                let c = cx * cy;
                if c <= 0.0 {
                    continue; // kernel mass underflowed; point contributes nothing
                }
                for (jy, &my) in fy.iter().enumerate() {
                    let scale = my / c;
                    if scale == 0.0 {
                        continue;
                    }
                    let row = &mut grid[jy * nx..(jy + 1) * nx];
                    for (cell, &mx) in row.iter_mut().zip(&fx) {
                        *cell += mx * scale;
                    }
                }
            }
            grid
        })
        .collect();

    let mut mass = vec![0.0; nx * ny];
    for part in partials {
        for (acc, v) in mass.iter_mut().zip(part) {
            *acc += v;
        }
    }
    let inv_cell = 1.0 / (w.width() / nx as f64 * (w.height() / ny as f64));
    for v in mass.iter_mut() {
        *v *= inv_cell;
    }
    IntensitySurface::from_values(w, nx, ny, mass)
}

/// Cell-averaged, edge-corrected field of a single kernel, bilinearly
/// interpolated at `q`. Used to remove a point's own contribution.
fn own_field_at(pt: &Point, h: f64, s: &IntensitySurface, q: &Point) -> f64 {
    let w = s.window();
    let u = ((q.x - w.x_min()) / s.dx - 0.5).clamp(0.0, (s.nx - 1) as f64);
    let v = ((q.y - w.y_min()) / s.dy - 0.5).clamp(0.0, (s.ny - 1) as f64);
    let i0 = (u.floor() as usize).min(s.nx - 1);
    let j0 = (v.floor() as usize).min(s.ny - 1);
    let i1 = (i0 + 1).min(s.nx - 1);
    let j1 = (j0 + 1).min(s.ny - 1);
    let fx = u - i0 as f64;
    let fy = v - j0 as f64;

    let c = (norm_cdf((w.x_max() - pt.x) / h) - norm_cdf((w.x_min() - pt.x) / h))
        * (norm_cdf((w.y_max() - pt.y) / h) - norm_cdf((w.y_min() - pt.y) / h));
    if c <= 0.0 {
        return 0.0;
    }
    let cell_mass = |ix: usize, jy: usize| -> f64 {
        let x0 = w.x_min() + ix as f64 * s.dx;
        let y0 = w.y_min() + jy as f64 * s.dy;
        (norm_cdf((x0 + s.dx - pt.x) / h) - norm_cdf((x0 - pt.x) / h))
            * (norm_cdf((y0 + s.dy - pt.y) / h) - norm_cdf((y0 - pt.y) / h))
            / (c * s.dx * s.dy)
    };
    let bottom = lerp(cell_mass(i0, j0), cell_mass(i1, j0), fx);
    let top = lerp(cell_mass(i0, j1), cell_mass(i1, j1), fx);
    lerp(bottom, top, fy)
}

/// 20 logarithmically spaced bandwidth candidates between one grid cell and
/// a quarter of the shorter window side.
pub fn default_bandwidth_candidates(w: &RectWindow, nx: usize, ny: usize) -> Vec<f64> {
    let hi = w.min_side() / 4.0;
    let mut lo = (w.width() / nx as f64).max(w.height() / ny as f64);
    if lo >= hi {
        lo = hi / 16.0;
    }
    let count = 20;
    (0..count)
        .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
        .collect()
}

/// Select a bandwidth by the Cronie–van Lieshout mass criterion: minimize
/// `|sum_i 1/lambda_h(x_i) - |W||` over the candidates, ties going to the
/// smaller bandwidth.
pub fn cvl_bandwidth(
    p: &PointPattern,
    candidates: &[f64],
    nx: usize,
    ny: usize,
) -> Result<f64> {
    cvl_bandwidth_with(p, candidates, nx, ny, false)
}

/// As [`cvl_bandwidth`], with an optional leave-one-out evaluation of the
/// intensity at the data points.
pub fn cvl_bandwidth_with(
    p: &PointPattern,
    candidates: &[f64],
    nx: usize,
    ny: usize,
    leave_one_out: bool,
) -> Result<f64> {
    if candidates.is_empty() {
        return Err(Error::InvalidBandwidth);
    }
    if p.is_empty() {
        return Err(Error::NoPoints);
    }
    let area = p.window().area();
    let scores: Vec<(f64, f64)> = candidates
        .par_iter()
        .map(|&h| -> Result<(f64, f64)> {
            let surf = kernel_intensity(p, h, nx, ny)?;
            let mut t = 0.0;
            let mut degenerate = false;
            for pt in p.points() {
                let mut lam = surf.evaluate(pt)?;
                if leave_one_out {
                    lam = (lam - own_field_at(pt, h, &surf, pt)).max(INTENSITY_FLOOR);
                }
                if lam <= 0.0 {
                    degenerate = true;
                    break;
                }
                t += 1.0 / lam;
            }
            let score = if degenerate {
                f64::INFINITY
            } else {
                (t - area).abs()
            };
            Ok((score, h))
        })
        .collect::<Result<_>>()?;

    let best = scores
        .into_iter()
        .min_by(|a, b| a.partial_cmp(b).expect("scores are never NaN"))
        .expect("at least one candidate");
    Ok(best.1)
}

/// Evaluate the criterion score `|T(h) - |W||` for a single bandwidth.
pub fn cvl_score(p: &PointPattern, h: f64, nx: usize, ny: usize) -> Result<f64> {
    let surf = kernel_intensity(p, h, nx, ny)?;
    let mut t = 0.0;
    for pt in p.points() {
        t += 1.0 / surf.evaluate(pt)?;
    }
    Ok((t - p.window().area()).abs())
}

/// Build the null intensity for one species from a reference census.
///
/// Takes the species' points in the reference census, drops every tree that
/// is still alive in the latest census, smooths the remainder, and rescales
/// the surface so its mass equals the latest-census live count.
#[allow(clippy::too_many_arguments)]
pub fn null_intensity(
    reference: &[CensusRecord],
    latest: &[CensusRecord],
    window: RectWindow,
    species: &str,
    ref_census: u32,
    latest_census: u32,
    h: f64,
    nx: usize,
    ny: usize,
) -> Result<IntensitySurface> {
    let alive_now: HashSet<&str> = latest
        .iter()
        .filter(|r| {
            r.species == species && r.census_id == latest_census && r.status == Status::Alive
        })
        .map(|r| r.tree_id.as_str())
        .collect();
    let kept: Vec<Point> = reference
        .iter()
        .filter(|r| {
            r.species == species
                && r.census_id == ref_census
                && !alive_now.contains(r.tree_id.as_str())
        })
        .map(|r| Point::new(r.x, r.y))
        .collect();
    if kept.is_empty() {
        return Err(Error::NullIntensityUndefined(species.to_string()));
    }
    if alive_now.is_empty() {
        return Err(Error::NullIntensityUndefined(species.to_string()));
    }
    let trimmed = PointPattern::new(kept, window)?;
    kernel_intensity(&trimmed, h, nx, ny)?.rescale_to_count(alive_now.len())
}
