//! Inhomogeneous K-, F-, G- and J-functions and their cross versions on a
//! distance grid.
//!
//! All estimators are pure and parallelize internally over fixed chunks with
//! an ordered merge, so results are bit-identical for every thread count.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{translation_weight, Point, RectWindow};
use crate::intensity::IntensitySurface;
use crate::pattern::PointPattern;

/// J-kind values are reported as undefined where `1 - F` drops to or below
/// this cutoff.
pub const TAU_F: f64 = 0.05;

/// Increasing distance grid starting at 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RGrid {
    values: Vec<f64>,
}

impl RGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("empty distance grid".into()));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidGrid("grid must start at 0".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("non-finite distance".into()));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("grid must be strictly increasing".into()));
        }
        Ok(RGrid { values })
    }

    /// `n` equally spaced values from 0 to `r_max` inclusive.
    pub fn regular(r_max: f64, n: usize) -> Result<Self> {
        if n < 2 || !(r_max > 0.0) {
            return Err(Error::InvalidGrid(
                "need at least two grid values and a positive maximum".into(),
            ));
        }
        Self::new(
            (0..n)
                .map(|i| r_max * i as f64 / (n - 1) as f64)
                .collect(),
        )
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn max(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// First index `k` with `values[k] >= d`.
    fn first_at_least(&self, d: f64) -> usize {
        self.values.partition_point(|r| *r < d)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SummaryKind {
    K,
    F,
    G,
    J,
    KCross,
    JCross,
}

impl SummaryKind {
    pub fn label(&self) -> &'static str {
        match self {
            SummaryKind::K => "K",
            SummaryKind::F => "F",
            SummaryKind::G => "G",
            SummaryKind::J => "J",
            SummaryKind::KCross => "Kcross",
            SummaryKind::JCross => "Jcross",
        }
    }

    pub fn is_j_kind(&self) -> bool {
        matches!(self, SummaryKind::J | SummaryKind::JCross)
    }
}

/// A statistic curve on a distance grid, with its theoretical Poisson
/// reference and a per-distance defined flag.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryFunction {
    pub kind: SummaryKind,
    pub r: RGrid,
    pub value: Vec<f64>,
    pub reference: Vec<f64>,
    pub defined: Vec<bool>,
}

impl SummaryFunction {
    fn new(
        kind: SummaryKind,
        r: RGrid,
        value: Vec<f64>,
        reference: Vec<f64>,
        defined: Vec<bool>,
    ) -> Self {
        debug_assert_eq!(value.len(), r.len());
        debug_assert_eq!(reference.len(), r.len());
        debug_assert_eq!(defined.len(), r.len());
        SummaryFunction {
            kind,
            r,
            value,
            reference,
            defined,
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_grid(&self, other: &SummaryFunction) -> bool {
        self.r == other.r
    }

    /// `r,value,reference` rows; J-kind curves carry an extra `defined`
    /// column and leave the value blank where undefined.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        if self.kind.is_j_kind() {
            writeln!(w, "r,value,reference,defined")?;
        } else {
            writeln!(w, "r,value,reference")?;
        }
        for k in 0..self.len() {
            let val = if self.defined[k] {
                format!("{}", self.value[k])
            } else {
                String::new()
            };
            if self.kind.is_j_kind() {
                writeln!(
                    w,
                    "{},{},{},{}",
                    self.r.values()[k],
                    val,
                    self.reference[k],
                    u8::from(self.defined[k])
                )?;
            } else {
                writeln!(w, "{},{},{}", self.r.values()[k], val, self.reference[k])?;
            }
        }
        Ok(())
    }
}

/// Regular lattice of test locations used by the empty-space estimator.
#[derive(Clone, Debug)]
pub struct GridPoints {
    locations: Vec<Point>,
    spacing: f64,
}

impl GridPoints {
    /// Lattice with approximately the requested spacing, snapped so it tiles
    /// the window evenly.
    pub fn lattice(w: &RectWindow, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::InvalidGrid("lattice spacing must be positive".into()));
        }
        let nx = ((w.width() / spacing).round() as usize).max(1);
        let ny = ((w.height() / spacing).round() as usize).max(1);
        let sx = w.width() / nx as f64;
        let sy = w.height() / ny as f64;
        let mut locations = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                locations.push(Point::new(
                    w.x_min() + (ix as f64 + 0.5) * sx,
                    w.y_min() + (iy as f64 + 0.5) * sy,
                ));
            }
        }
        Ok(GridPoints {
            locations,
            spacing: sx.max(sy),
        })
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }
}

fn validate_grid(r: &RGrid, w: &RectWindow) -> Result<()> {
    if r.max() >= w.min_side() / 2.0 {
        return Err(Error::InvalidGrid(format!(
            "max distance {} must stay below half the shorter window side {}",
            r.max(),
            w.min_side() / 2.0
        )));
    }
    Ok(())
}

fn intensities_at(points: &[Point], lam: &IntensitySurface) -> Result<Vec<f64>> {
    points.iter().map(|p| lam.evaluate(p)).collect()
}

fn k_reference(r: &RGrid) -> Vec<f64> {
    r.values().iter().map(|v| std::f64::consts::PI * v * v).collect()
}

fn poisson_tail_reference(r: &RGrid, lam_bar: f64) -> Vec<f64> {
    // F and G of an inhomogeneous Poisson process after reweighting:
    // 1 - exp(-lam_bar * pi * r^2).
    r.values()
        .iter()
        .map(|v| 1.0 - (-lam_bar * std::f64::consts::PI * v * v).exp())
        .collect()
}

/// Split `0..n` into the fixed chunks used by the deterministic parallel
/// reductions.
fn chunk_ranges(n: usize) -> Vec<std::ops::Range<usize>> {
    if n == 0 {
        return Vec::new();
    }
    let size = n.div_ceil(64).max(1);
    (0..n.div_ceil(size))
        .map(|c| c * size..((c + 1) * size).min(n))
        .collect()
}

fn merge_bins(parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for part in parts {
        for (acc, v) in out.iter_mut().zip(part) {
            *acc += v;
        }
    }
    out
}

/// Inhomogeneous K-function with translation edge correction.
pub fn k_inhom(p: &PointPattern, lam: &IntensitySurface, r: &RGrid) -> Result<SummaryFunction> {
    let w = p.window();
    validate_grid(r, w)?;
    if p.is_empty() {
        return Err(Error::InsufficientPoints);
    }
    let pts = p.points();
    let lams = intensities_at(pts, lam)?;
    let r_max = r.max();

    let parts: Vec<Vec<f64>> = chunk_ranges(pts.len())
        .into_par_iter()
        .map(|range| {
            let mut bins = vec![0.0; r.len()];
            for i in range {
                for j in i + 1..pts.len() {
                    let d = pts[i].dist(&pts[j]);
                    if d <= r_max {
                        let weight = translation_weight(w, &pts[i], &pts[j]);
                        let idx = r.first_at_least(d);
                        bins[idx] += 2.0 * weight / (lams[i] * lams[j]);
                    }
                }
            }
            bins
        })
        .collect();

    let bins = merge_bins(parts, r.len());
    let area = w.area();
    let mut value = Vec::with_capacity(r.len());
    let mut acc = 0.0;
    for b in bins {
        acc += b;
        value.push(acc / area);
    }
    Ok(SummaryFunction::new(
        SummaryKind::K,
        r.clone(),
        value,
        k_reference(r),
        vec![true; r.len()],
    ))
}

/// K-function variant with torus distances and no edge weight. Used to check
/// that torus shifts preserve marginal structure.
pub fn k_inhom_torus(
    p: &PointPattern,
    lam: &IntensitySurface,
    r: &RGrid,
) -> Result<SummaryFunction> {
    let w = p.window();
    validate_grid(r, w)?;
    if p.is_empty() {
        return Err(Error::InsufficientPoints);
    }
    let pts = p.points();
    let lams = intensities_at(pts, lam)?;
    let (a, b) = (w.width(), w.height());
    let r_max = r.max();

    let parts: Vec<Vec<f64>> = chunk_ranges(pts.len())
        .into_par_iter()
        .map(|range| {
            let mut bins = vec![0.0; r.len()];
            for i in range {
                for j in i + 1..pts.len() {
                    let ddx = (pts[i].x - pts[j].x).abs();
                    let ddy = (pts[i].y - pts[j].y).abs();
                    let tx = ddx.min(a - ddx);
                    let ty = ddy.min(b - ddy);
                    let d = tx.hypot(ty);
                    if d <= r_max {
                        bins[r.first_at_least(d)] += 2.0 / (lams[i] * lams[j]);
                    }
                }
            }
            bins
        })
        .collect();

    let bins = merge_bins(parts, r.len());
    let area = w.area();
    let mut value = Vec::with_capacity(r.len());
    let mut acc = 0.0;
    for bin in bins {
        acc += bin;
        value.push(acc / area);
    }
    Ok(SummaryFunction::new(
        SummaryKind::K,
        r.clone(),
        value,
        k_reference(r),
        vec![true; r.len()],
    ))
}

/// Inhomogeneous cross K-function between two patterns in a common window.
pub fn k_cross_inhom(
    p1: &PointPattern,
    p2: &PointPattern,
    lam1: &IntensitySurface,
    lam2: &IntensitySurface,
    r: &RGrid,
) -> Result<SummaryFunction> {
    let w = p1.window();
    if p2.window() != w {
        return Err(Error::IncompatibleGrids);
    }
    validate_grid(r, w)?;
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::InsufficientPoints);
    }
    let (pts1, pts2) = (p1.points(), p2.points());
    let l1 = intensities_at(pts1, lam1)?;
    let l2 = intensities_at(pts2, lam2)?;
    let r_max = r.max();

    let parts: Vec<Vec<f64>> = chunk_ranges(pts1.len())
        .into_par_iter()
        .map(|range| {
            let mut bins = vec![0.0; r.len()];
            for i in range {
                for j in 0..pts2.len() {
                    let d = pts1[i].dist(&pts2[j]);
                    if d <= r_max {
                        let weight = translation_weight(w, &pts1[i], &pts2[j]);
                        bins[r.first_at_least(d)] += weight / (l1[i] * l2[j]);
                    }
                }
            }
            bins
        })
        .collect();

    let bins = merge_bins(parts, r.len());
    let area = w.area();
    let mut value = Vec::with_capacity(r.len());
    let mut acc = 0.0;
    for bin in bins {
        acc += bin;
        value.push(acc / area);
    }
    Ok(SummaryFunction::new(
        SummaryKind::KCross,
        r.clone(),
        value,
        k_reference(r),
        vec![true; r.len()],
    ))
}

/// Shared core of the F/G-type estimators: for every grid distance, average
/// over the centres still inside the eroded window the product of
/// `factors[j]` over targets within that distance.
///
/// Returns per-distance sums and participating-centre counts.
fn minus_sampling_products(
    centers: &[Point],
    targets: &[Point],
    factors: &[f64],
    exclude_same_index: bool,
    w: &RectWindow,
    r: &RGrid,
) -> (Vec<f64>, Vec<usize>) {
    let r_max = r.max();
    let rs = r.values();

    let parts: Vec<(Vec<f64>, Vec<usize>)> = chunk_ranges(centers.len())
        .into_par_iter()
        .map(|range| {
            let mut sums = vec![0.0; rs.len()];
            let mut counts = vec![0usize; rs.len()];
            let mut pairs: Vec<(f64, f64)> = Vec::new();
            for ci in range {
                let c = &centers[ci];
                let reach = w.boundary_distance(c).min(r_max);
                pairs.clear();
                for (j, t) in targets.iter().enumerate() {
                    if exclude_same_index && j == ci {
                        continue;
                    }
                    let d = c.dist(t);
                    if d <= reach {
                        pairs.push((d, factors[j]));
                    }
                }
                pairs.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                let b = w.boundary_distance(c);
                let mut prod = 1.0;
                let mut ptr = 0;
                for (k, &rk) in rs.iter().enumerate() {
                    if rk > b {
                        break;
                    }
                    while ptr < pairs.len() && pairs[ptr].0 <= rk {
                        prod *= pairs[ptr].1;
                        ptr += 1;
                    }
                    sums[k] += prod;
                    counts[k] += 1;
                }
            }
            (sums, counts)
        })
        .collect();

    let mut sums = vec![0.0; rs.len()];
    let mut counts = vec![0usize; rs.len()];
    for (s, c) in parts {
        for k in 0..rs.len() {
            sums[k] += s[k];
            counts[k] += c[k];
        }
    }
    (sums, counts)
}

fn clamp_factor(lam_bar: f64, lam: f64) -> f64 {
    (1.0 - lam_bar / lam).max(0.0)
}

/// Inhomogeneous nearest-neighbour distance distribution with minus
/// sampling. Values are undefined once no point remains in the eroded
/// window.
pub fn g_inhom(p: &PointPattern, lam: &IntensitySurface, r: &RGrid) -> Result<SummaryFunction> {
    let w = p.window();
    validate_grid(r, w)?;
    let pts = p.points();
    let lams = intensities_at(pts, lam)?;
    let lam_bar = lams.iter().cloned().fold(f64::INFINITY, f64::min);
    let factors: Vec<f64> = lams.iter().map(|&l| clamp_factor(lam_bar, l)).collect();

    let (sums, counts) = minus_sampling_products(pts, pts, &factors, true, w, r);
    let mut value = Vec::with_capacity(r.len());
    let mut defined = Vec::with_capacity(r.len());
    for k in 0..r.len() {
        if counts[k] > 0 {
            value.push(1.0 - sums[k] / counts[k] as f64);
            defined.push(true);
        } else {
            value.push(0.0);
            defined.push(false);
        }
    }
    Ok(SummaryFunction::new(
        SummaryKind::G,
        r.clone(),
        value,
        poisson_tail_reference(r, if lam_bar.is_finite() { lam_bar } else { 0.0 }),
        defined,
    ))
}

/// Inhomogeneous empty-space function over a lattice of test locations,
/// with minus sampling.
pub fn f_inhom(
    p: &PointPattern,
    lam: &IntensitySurface,
    grid: &GridPoints,
    r: &RGrid,
) -> Result<SummaryFunction> {
    let w = p.window();
    validate_grid(r, w)?;
    let pts = p.points();
    let lams = intensities_at(pts, lam)?;
    let lam_bar = lams.iter().cloned().fold(f64::INFINITY, f64::min);
    let factors: Vec<f64> = lams.iter().map(|&l| clamp_factor(lam_bar, l)).collect();

    let (sums, counts) =
        minus_sampling_products(grid.locations(), pts, &factors, false, w, r);
    let mut value = Vec::with_capacity(r.len());
    let mut defined = Vec::with_capacity(r.len());
    for k in 0..r.len() {
        if counts[k] > 0 {
            value.push(1.0 - sums[k] / counts[k] as f64);
            defined.push(true);
        } else {
            value.push(0.0);
            defined.push(false);
        }
    }
    Ok(SummaryFunction::new(
        SummaryKind::F,
        r.clone(),
        value,
        poisson_tail_reference(r, if lam_bar.is_finite() { lam_bar } else { 0.0 }),
        defined,
    ))
}

fn ratio_curve(
    kind: SummaryKind,
    one_minus_g: impl Fn(usize) -> Option<f64>,
    f: &SummaryFunction,
    r: &RGrid,
) -> SummaryFunction {
    let mut value = Vec::with_capacity(r.len());
    let mut defined = Vec::with_capacity(r.len());
    for k in 0..r.len() {
        let tail_f = 1.0 - f.value[k];
        match one_minus_g(k) {
            Some(tail_g) if f.defined[k] && tail_f > TAU_F => {
                value.push(tail_g / tail_f);
                defined.push(true);
            }
            _ => {
                value.push(0.0);
                defined.push(false);
            }
        }
    }
    SummaryFunction::new(kind, r.clone(), value, vec![1.0; r.len()], defined)
}

/// Inhomogeneous J-function: `(1 - G) / (1 - F)` where `1 - F` exceeds
/// [`TAU_F`], undefined elsewhere.
pub fn j_inhom(
    p: &PointPattern,
    lam: &IntensitySurface,
    grid: &GridPoints,
    r: &RGrid,
) -> Result<SummaryFunction> {
    let g = g_inhom(p, lam, r)?;
    let f = f_inhom(p, lam, grid, r)?;
    Ok(ratio_curve(
        SummaryKind::J,
        |k| g.defined[k].then(|| 1.0 - g.value[k]),
        &f,
        r,
    ))
}

/// Inhomogeneous cross J-function from `p1` to `p2`: the numerator averages,
/// over `p1` points in the eroded window, the product of intensity-reweighted
/// factors over `p2` points within distance r; the denominator is the
/// empty-space tail of `p2`.
pub fn j_cross_inhom(
    p1: &PointPattern,
    p2: &PointPattern,
    lam2: &IntensitySurface,
    grid: &GridPoints,
    r: &RGrid,
) -> Result<SummaryFunction> {
    let w = p1.window();
    if p2.window() != w {
        return Err(Error::IncompatibleGrids);
    }
    validate_grid(r, w)?;
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::InsufficientPoints);
    }
    let l2 = intensities_at(p2.points(), lam2)?;
    let lam_bar = l2.iter().cloned().fold(f64::INFINITY, f64::min);
    let factors: Vec<f64> = l2.iter().map(|&l| clamp_factor(lam_bar, l)).collect();

    let (sums, counts) =
        minus_sampling_products(p1.points(), p2.points(), &factors, false, w, r);
    let f2 = f_inhom(p2, lam2, grid, r)?;
    Ok(ratio_curve(
        SummaryKind::JCross,
        |k| (counts[k] > 0).then(|| sums[k] / counts[k] as f64),
        &f2,
        r,
    ))
}
