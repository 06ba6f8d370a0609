//! Pointwise envelopes, global deviation tests with rank p-values, the
//! Lotwick–Silverman torus-shift independence test, and batch screening.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{torus_shift, Point};
use crate::intensity::{
    cvl_bandwidth, default_bandwidth_candidates, kernel_intensity, IntensitySurface,
};
use crate::pattern::{species_over_threshold, MultiTypePattern, PointPattern};
use crate::simulate::{random_pairing, sample_inhom_poisson, RngSeed};
use crate::sumstats::{
    j_cross_inhom, j_inhom, k_cross_inhom, k_inhom, GridPoints, RGrid, SummaryFunction,
};

/// Pointwise simulation envelope: k-th extreme values per distance.
#[derive(Clone, Debug)]
pub struct Envelope {
    pub r: RGrid,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub observed: Vec<f64>,
    pub reference: Vec<f64>,
    pub defined: Vec<bool>,
    pub nsim: usize,
    pub k: usize,
}

impl Envelope {
    /// `r,lower,upper,observed,reference` rows; undefined distances leave
    /// the band and observed columns blank.
    pub fn to_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "r,lower,upper,observed,reference")?;
        for i in 0..self.r.len() {
            if self.defined[i] {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    self.r.values()[i],
                    self.lower[i],
                    self.upper[i],
                    self.observed[i],
                    self.reference[i]
                )?;
            } else {
                writeln!(w, "{},,,,{}", self.r.values()[i], self.reference[i])?;
            }
        }
        Ok(())
    }
}

/// Lower/upper bounds from the k-th smallest and k-th largest simulated
/// values at each distance.
pub fn pointwise_envelopes(
    observed: &SummaryFunction,
    sims: &[SummaryFunction],
    k: usize,
) -> Result<Envelope> {
    let nsim = sims.len();
    if k == 0 || nsim < 2 * k - 1 {
        return Err(Error::NotEnoughSimulations(2 * k - 1));
    }
    for s in sims {
        if !s.same_grid(observed) {
            return Err(Error::IncompatibleGrids);
        }
    }
    let n = observed.len();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut defined = vec![false; n];
    let mut buf = Vec::with_capacity(nsim);
    for i in 0..n {
        if !observed.defined[i] || sims.iter().any(|s| !s.defined[i]) {
            continue;
        }
        buf.clear();
        buf.extend(sims.iter().map(|s| s.value[i]));
        buf.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        lower[i] = buf[k - 1];
        upper[i] = buf[nsim - k];
        defined[i] = true;
    }
    Ok(Envelope {
        r: observed.r.clone(),
        lower,
        upper,
        observed: observed.value.clone(),
        reference: observed.reference.clone(),
        defined,
        nsim,
        k,
    })
}

/// Global deviation statistics on a summary curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationKind {
    Mad,
    Dclf,
    #[serde(rename = "stud")]
    StudentizedMad,
    #[serde(rename = "dq")]
    DirectionalQuantileMad,
}

impl DeviationKind {
    pub fn label(&self) -> &'static str {
        match self {
            DeviationKind::Mad => "mad",
            DeviationKind::Dclf => "dclf",
            DeviationKind::StudentizedMad => "stud",
            DeviationKind::DirectionalQuantileMad => "dq",
        }
    }

    /// The scaled kinds only exist in two-sided form.
    pub fn supports_one_sided(&self) -> bool {
        matches!(self, DeviationKind::Mad | DeviationKind::Dclf)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    #[serde(rename = "two")]
    TwoSided,
    Greater,
    Less,
}

impl Sidedness {
    pub fn label(&self) -> &'static str {
        match self {
            Sidedness::TwoSided => "two",
            Sidedness::Greater => "greater",
            Sidedness::Less => "less",
        }
    }
}

/// Whether deviations are measured from the ensemble mean or from the
/// theoretical Poisson curve.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceMode {
    SimulationMean,
    Theoretical,
}

/// Outcome of a Monte Carlo deviation test.
#[derive(Clone, Debug, Serialize)]
pub struct TestResult {
    pub kind: DeviationKind,
    pub sided: Sidedness,
    pub nsim: usize,
    pub r_range: (f64, f64),
    pub observed_t: f64,
    pub simulated_t: Vec<f64>,
    pub p_value: f64,
}

/// Rank p-value for exchangeable ensembles.
pub fn rank_p_value(observed_t: f64, simulated_t: &[f64]) -> f64 {
    let ge = simulated_t.iter().filter(|t| **t >= observed_t).count();
    (1 + ge) as f64 / (simulated_t.len() + 1) as f64
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Inputs shared by the per-curve statistic evaluations: the pool rows are
/// the observed curve (index 0) and the simulations, restricted to the
/// included distances.
struct DeviationPool {
    kind: DeviationKind,
    sided: Sidedness,
    reference: ReferenceMode,
    pool: Vec<Vec<f64>>,
    theoretical: Vec<f64>,
    weights: Vec<f64>,
    floor: f64,
}

impl DeviationPool {
    /// Deviation statistic of pool row `curve`, scored against the other
    /// rows. Scoring every curve against the rest of the pool keeps the
    /// ensemble exchangeable under the null.
    fn statistic(&self, curve: usize) -> f64 {
        let m = self.theoretical.len();
        let nsim = self.pool.len() - 1;
        let mut t = f64::NEG_INFINITY;
        let mut dclf = 0.0;
        let mut sorted_others = Vec::new();
        for k in 0..m {
            let x = self.pool[curve][k];
            let others_mean = {
                let s: f64 = self.pool.iter().map(|row| row[k]).sum();
                (s - x) / nsim as f64
            };
            let center = match self.reference {
                ReferenceMode::SimulationMean => others_mean,
                ReferenceMode::Theoretical => self.theoretical[k],
            };
            let d = x - center;
            match self.kind {
                DeviationKind::Mad => {
                    let v = match self.sided {
                        Sidedness::TwoSided => d.abs(),
                        Sidedness::Greater => d,
                        Sidedness::Less => -d,
                    };
                    t = t.max(v);
                }
                DeviationKind::Dclf => {
                    let v = match self.sided {
                        Sidedness::TwoSided => d * d,
                        Sidedness::Greater => d.max(0.0).powi(2),
                        Sidedness::Less => (-d).max(0.0).powi(2),
                    };
                    dclf += v * self.weights[k];
                }
                DeviationKind::StudentizedMad => {
                    let mut sum = 0.0;
                    let mut sum2 = 0.0;
                    for (i, row) in self.pool.iter().enumerate() {
                        if i != curve {
                            sum += row[k];
                            sum2 += row[k] * row[k];
                        }
                    }
                    let mean = sum / nsim as f64;
                    let var = ((sum2 - sum * mean) / (nsim - 1) as f64).max(0.0);
                    let sd = var.sqrt().max(self.floor);
                    t = t.max(d.abs() / sd);
                }
                DeviationKind::DirectionalQuantileMad => {
                    sorted_others.clear();
                    for (i, row) in self.pool.iter().enumerate() {
                        if i != curve {
                            sorted_others.push(row[k]);
                        }
                    }
                    sorted_others.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
                    let med = quantile(&sorted_others, 0.5);
                    let q_hi = (quantile(&sorted_others, 0.75) - med).max(self.floor);
                    let q_lo = (med - quantile(&sorted_others, 0.25)).max(self.floor);
                    let v = if d >= 0.0 { d / q_hi } else { -d / q_lo };
                    t = t.max(v);
                }
            }
        }
        if self.kind == DeviationKind::Dclf {
            dclf
        } else {
            t
        }
    }
}

/// Global deviation test of an observed curve against simulated curves.
///
/// Distances where any curve is undefined are dropped for all curves alike.
pub fn deviation(
    observed: &SummaryFunction,
    sims: &[SummaryFunction],
    kind: DeviationKind,
    sided: Sidedness,
    reference: ReferenceMode,
    r_range: (f64, f64),
) -> Result<TestResult> {
    if sims.len() < 2 {
        return Err(Error::NotEnoughSimulations(2));
    }
    if sided != Sidedness::TwoSided && !kind.supports_one_sided() {
        return Err(Error::OneSidedUnavailable);
    }
    for s in sims {
        if !s.same_grid(observed) {
            return Err(Error::IncompatibleGrids);
        }
    }
    let included: Vec<usize> = (0..observed.len())
        .filter(|&i| {
            let rv = observed.r.values()[i];
            rv >= r_range.0
                && rv <= r_range.1
                && observed.defined[i]
                && sims.iter().all(|s| s.defined[i])
        })
        .collect();
    if included.is_empty() {
        return Err(Error::EmptyRange);
    }

    // Trapezoid weights over the included subsequence, for the integrated kind.
    let rs: Vec<f64> = included.iter().map(|&i| observed.r.values()[i]).collect();
    let m = rs.len();
    let weights: Vec<f64> = if m == 1 {
        vec![1.0]
    } else {
        (0..m)
            .map(|k| {
                if k == 0 {
                    (rs[1] - rs[0]) / 2.0
                } else if k == m - 1 {
                    (rs[m - 1] - rs[m - 2]) / 2.0
                } else {
                    (rs[k + 1] - rs[k - 1]) / 2.0
                }
            })
            .collect()
    };

    let restrict =
        |f: &SummaryFunction| -> Vec<f64> { included.iter().map(|&i| f.value[i]).collect() };
    let mut pool = Vec::with_capacity(sims.len() + 1);
    pool.push(restrict(observed));
    pool.extend(sims.iter().map(restrict));
    let theoretical: Vec<f64> = included.iter().map(|&i| observed.reference[i]).collect();

    // Denominator floor from the simulation mean, fixed for every curve.
    let sim_mean_max = (0..m)
        .map(|k| {
            let s: f64 = pool[1..].iter().map(|row| row[k]).sum();
            (s / sims.len() as f64).abs()
        })
        .fold(0.0, f64::max);
    let floor = 1e-10 + 1e-6 * sim_mean_max;

    let ctx = DeviationPool {
        kind,
        sided,
        reference,
        pool,
        theoretical,
        weights,
        floor,
    };
    let observed_t = ctx.statistic(0);
    let simulated_t: Vec<f64> = (1..=sims.len()).map(|j| ctx.statistic(j)).collect();
    let p_value = rank_p_value(observed_t, &simulated_t);
    Ok(TestResult {
        kind,
        sided,
        nsim: sims.len(),
        r_range,
        observed_t,
        simulated_t,
        p_value,
    })
}

/// Statistic choice for the goodness-of-fit pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum GofStat {
    K,
    J,
}

impl GofStat {
    pub fn label(&self) -> &'static str {
        match self {
            GofStat::K => "K",
            GofStat::J => "J",
        }
    }

    /// One-sided direction sensitive to clustered alternatives.
    pub fn clustered_sidedness(&self) -> Sidedness {
        match self {
            GofStat::K => Sidedness::Greater,
            GofStat::J => Sidedness::Less,
        }
    }
}

/// Options for [`goodness_of_fit_test`].
#[derive(Clone, Debug)]
pub struct GofOptions {
    pub stat: GofStat,
    pub kind: DeviationKind,
    pub sided: Sidedness,
    pub nsim: usize,
    pub r: RGrid,
    pub r_range: (f64, f64),
    pub seed: RngSeed,
    pub reference: ReferenceMode,
    /// When set, each simulated pattern's statistic uses a fresh kernel
    /// estimate at this bandwidth instead of the null surface.
    pub reestimate_bandwidth: Option<f64>,
    /// Test-location lattice spacing for the J statistic; defaults to the
    /// null surface's cell size.
    pub lattice_spacing: Option<f64>,
}

impl GofOptions {
    pub fn new(stat: GofStat, nsim: usize, r: RGrid, seed: RngSeed) -> Self {
        let r_range = (0.0, r.max());
        GofOptions {
            stat,
            kind: DeviationKind::Mad,
            sided: stat.clustered_sidedness(),
            nsim,
            r,
            r_range,
            seed,
            reference: ReferenceMode::SimulationMean,
            reestimate_bandwidth: None,
            lattice_spacing: None,
        }
    }
}

/// A test result together with the observed and simulated curves that
/// produced it (for envelope plots).
#[derive(Clone, Debug)]
pub struct TestOutput {
    pub result: TestResult,
    pub observed_curve: SummaryFunction,
    pub simulated_curves: Vec<SummaryFunction>,
}

fn gof_curve(
    p: &PointPattern,
    lam: &IntensitySurface,
    stat: GofStat,
    grid: &GridPoints,
    r: &RGrid,
) -> Result<SummaryFunction> {
    match stat {
        GofStat::K => k_inhom(p, lam, r),
        GofStat::J => j_inhom(p, lam, grid, r),
    }
}

/// Monte Carlo goodness-of-fit test of an observed pattern against an
/// inhomogeneous Poisson null with intensity `null_lam`.
///
/// Simulated patterns are drawn from `null_lam` and, unless re-estimation is
/// requested, their statistics use the same null surface as the observed one.
pub fn goodness_of_fit_test(
    p: &PointPattern,
    null_lam: &IntensitySurface,
    opts: &GofOptions,
) -> Result<TestOutput> {
    let spacing = opts
        .lattice_spacing
        .unwrap_or_else(|| null_lam.dx().max(null_lam.dy()));
    let grid = GridPoints::lattice(p.window(), spacing)?;
    let observed_curve = gof_curve(p, null_lam, opts.stat, &grid, &opts.r)?;
    let simulated_curves: Vec<SummaryFunction> = (1..=opts.nsim as u64)
        .into_par_iter()
        .map(|j| {
            let pat = sample_inhom_poisson(null_lam, opts.seed.substream(j));
            match opts.reestimate_bandwidth {
                Some(h) => {
                    let lam = kernel_intensity(&pat, h, null_lam.nx(), null_lam.ny())?;
                    gof_curve(&pat, &lam, opts.stat, &grid, &opts.r)
                }
                None => gof_curve(&pat, null_lam, opts.stat, &grid, &opts.r),
            }
        })
        .collect::<Result<_>>()?;
    let result = deviation(
        &observed_curve,
        &simulated_curves,
        opts.kind,
        opts.sided,
        opts.reference,
        opts.r_range,
    )?;
    Ok(TestOutput {
        result,
        observed_curve,
        simulated_curves,
    })
}

/// Cross-statistic choice for the independence test.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CrossStat {
    KCross,
    JCross,
}

impl CrossStat {
    pub fn label(&self) -> &'static str {
        match self {
            CrossStat::KCross => "Kcross",
            CrossStat::JCross => "Jcross",
        }
    }
}

/// Options for [`lotwick_silverman_test`].
#[derive(Clone, Debug)]
pub struct LsOptions {
    pub stat: CrossStat,
    pub kind: DeviationKind,
    pub sided: Sidedness,
    pub nsim: usize,
    pub r: RGrid,
    pub r_range: (f64, f64),
    pub seed: RngSeed,
    pub lattice_spacing: Option<f64>,
}

impl LsOptions {
    pub fn new(stat: CrossStat, nsim: usize, r: RGrid, seed: RngSeed) -> Self {
        let r_range = (0.0, r.max());
        LsOptions {
            stat,
            kind: DeviationKind::Mad,
            sided: Sidedness::TwoSided,
            nsim,
            r,
            r_range,
            seed,
            lattice_spacing: None,
        }
    }
}

fn cross_curve(
    p1: &PointPattern,
    p2: &PointPattern,
    lam1: &IntensitySurface,
    lam2: &IntensitySurface,
    stat: CrossStat,
    grid: &GridPoints,
    r: &RGrid,
) -> Result<SummaryFunction> {
    match stat {
        CrossStat::KCross => k_cross_inhom(p1, p2, lam1, lam2, r),
        CrossStat::JCross => j_cross_inhom(p1, p2, lam2, grid, r),
    }
}

/// Lotwick–Silverman independence test: torus-shift the first pattern
/// together with its intensity surface and recompute the cross statistic.
///
/// Shifts are quantized to whole grid cells so the surface shift is an exact
/// cyclic permutation and the marginal structure is preserved bit-for-bit.
pub fn lotwick_silverman_test(
    p1: &PointPattern,
    p2: &PointPattern,
    lam1: &IntensitySurface,
    lam2: &IntensitySurface,
    opts: &LsOptions,
) -> Result<TestOutput> {
    let w = p1.window();
    if p2.window() != w || lam1.window() != w || lam2.window() != w {
        return Err(Error::IncompatibleGrids);
    }
    if p1.is_empty() || p2.is_empty() {
        return Err(Error::InsufficientPoints);
    }
    let spacing = opts
        .lattice_spacing
        .unwrap_or_else(|| lam2.dx().max(lam2.dy()));
    let grid = GridPoints::lattice(w, spacing)?;
    let observed_curve = cross_curve(p1, p2, lam1, lam2, opts.stat, &grid, &opts.r)?;
    let simulated_curves: Vec<SummaryFunction> = (1..=opts.nsim as u64)
        .into_par_iter()
        .map(|j| {
            let mut rng = opts.seed.substream(j).rng();
            // Quantized uniform shift; the zero cell would replay the
            // observed configuration, so it is redrawn.
            let (kx, ky) = if lam1.nx() * lam1.ny() <= 1 {
                (0, 0)
            } else {
                loop {
                    let kx = rand::Rng::random_range(&mut rng, 0..lam1.nx());
                    let ky = rand::Rng::random_range(&mut rng, 0..lam1.ny());
                    if kx != 0 || ky != 0 {
                        break (kx, ky);
                    }
                }
            };
            let shift = Point::new(kx as f64 * lam1.dx(), ky as f64 * lam1.dy());
            let shifted_points = torus_shift(p1.points(), &shift, w);
            let shifted_pattern = PointPattern::new(shifted_points, *w)?;
            let shifted_lam = lam1.cyclic_shift(kx, ky);
            cross_curve(
                &shifted_pattern,
                p2,
                &shifted_lam,
                lam2,
                opts.stat,
                &grid,
                &opts.r,
            )
        })
        .collect::<Result<_>>()?;
    let result = deviation(
        &observed_curve,
        &simulated_curves,
        opts.kind,
        opts.sided,
        ReferenceMode::SimulationMean,
        opts.r_range,
    )?;
    Ok(TestOutput {
        result,
        observed_curve,
        simulated_curves,
    })
}

/// Configuration shared by the screening batches.
#[derive(Clone, Debug)]
pub struct ScreenConfig {
    /// Keep species with strictly more than this many points.
    pub min_count: usize,
    pub nsim: usize,
    pub r_univariate: RGrid,
    pub r_cross: RGrid,
    pub kind: DeviationKind,
    pub grid_nx: usize,
    pub grid_ny: usize,
    /// Fixed kernel bandwidth; `None` selects per species by the
    /// Cronie–van Lieshout criterion.
    pub bandwidth: Option<f64>,
    pub seed: u64,
    pub lattice_spacing: Option<f64>,
    /// Re-estimate each simulated pattern's intensity at the species
    /// bandwidth, keeping observed and simulated statistics exchangeable
    /// when the null surface itself comes from the data.
    pub reestimate: bool,
}

/// One row of a screening table.
#[derive(Clone, Debug, Serialize)]
pub struct ScreenRow {
    pub target: String,
    pub stat: String,
    pub kind: DeviationKind,
    pub sided: Sidedness,
    pub p_value: Option<f64>,
    pub error: Option<String>,
}

/// Serialize screening rows as `species,stat,kind,sided,p_value` CSV;
/// failed rows leave the p-value blank.
pub fn screen_rows_to_csv<W: Write>(rows: &[ScreenRow], mut w: W) -> Result<()> {
    writeln!(w, "species,stat,kind,sided,p_value")?;
    for row in rows {
        let p = row.p_value.map(|p| format!("{p}")).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{}",
            row.target,
            row.stat,
            row.kind.label(),
            row.sided.label(),
            p
        )?;
    }
    Ok(())
}

pub fn screen_rows_to_json(rows: &[ScreenRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows are serializable")
}

fn sidedness_for(kind: DeviationKind, preferred: Sidedness) -> Sidedness {
    if kind.supports_one_sided() {
        preferred
    } else {
        Sidedness::TwoSided
    }
}

// Streams are spaced in blocks so batch entries never share substreams.
const STREAM_BLOCK: u64 = 1 << 32;

fn species_surface(p: &PointPattern, cfg: &ScreenConfig) -> Result<(IntensitySurface, f64)> {
    let h = match cfg.bandwidth {
        Some(h) => h,
        None => {
            let cands = default_bandwidth_candidates(p.window(), cfg.grid_nx, cfg.grid_ny);
            cvl_bandwidth(p, &cands, cfg.grid_nx, cfg.grid_ny)?
        }
    };
    Ok((kernel_intensity(p, h, cfg.grid_nx, cfg.grid_ny)?, h))
}

/// Per-species clustering screen: each qualifying species is smoothed from
/// its own pattern and tested against the inhomogeneous Poisson null with
/// the K and J statistics.
///
/// Failures are recorded as rows with an error note; the batch never aborts.
pub fn screen_species(m: &MultiTypePattern, cfg: &ScreenConfig) -> Vec<ScreenRow> {
    let species = species_over_threshold(m, cfg.min_count);
    let jobs: Vec<(usize, String)> = species.into_iter().enumerate().collect();
    let rows: Vec<Vec<ScreenRow>> = jobs
        .par_iter()
        .map(|(si, sp)| {
            let pattern = m.get(sp).expect("species listed from this pattern");
            let surface = species_surface(pattern, cfg);
            [GofStat::K, GofStat::J]
                .iter()
                .enumerate()
                .map(|(sti, &stat)| {
                    let sided = sidedness_for(cfg.kind, stat.clustered_sidedness());
                    let outcome = surface.as_ref().map_err(|e| e.to_string()).and_then(
                        |(lam, h)| {
                            let mut opts = GofOptions::new(
                                stat,
                                cfg.nsim,
                                cfg.r_univariate.clone(),
                                RngSeed::new(cfg.seed)
                                    .with_stream((*si as u64 * 2 + sti as u64) * STREAM_BLOCK),
                            );
                            opts.kind = cfg.kind;
                            opts.sided = sided;
                            opts.lattice_spacing = cfg.lattice_spacing;
                            opts.reestimate_bandwidth = cfg.reestimate.then_some(*h);
                            goodness_of_fit_test(pattern, lam, &opts).map_err(|e| e.to_string())
                        },
                    );
                    match outcome {
                        Ok(out) => ScreenRow {
                            target: sp.clone(),
                            stat: stat.label().to_string(),
                            kind: cfg.kind,
                            sided,
                            p_value: Some(out.result.p_value),
                            error: None,
                        },
                        Err(e) => ScreenRow {
                            target: sp.clone(),
                            stat: stat.label().to_string(),
                            kind: cfg.kind,
                            sided,
                            p_value: None,
                            error: Some(e),
                        },
                    }
                })
                .collect()
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Random-pairing independence screen over qualifying species: a uniform
/// perfect matching, then the Lotwick–Silverman test per pair for the cross
/// K and J statistics.
pub fn screen_pairs(
    m: &MultiTypePattern,
    cfg: &ScreenConfig,
    seed: RngSeed,
) -> Result<Vec<ScreenRow>> {
    let species = species_over_threshold(m, cfg.min_count);
    let pairs = random_pairing(&species, seed)?;

    // Each species' surface is estimated once from its own pattern.
    let surfaces: HashMap<&str, Result<IntensitySurface>> = species
        .iter()
        .map(|sp| {
            let pattern = m.get(sp).expect("species listed from this pattern");
            (sp.as_str(), species_surface(pattern, cfg).map(|(s, _)| s))
        })
        .collect();

    let jobs: Vec<(usize, (String, String))> = pairs.into_iter().enumerate().collect();
    let rows: Vec<Vec<ScreenRow>> = jobs
        .par_iter()
        .map(|(pi, (a, b))| {
            let label = format!("{a}:{b}");
            [CrossStat::KCross, CrossStat::JCross]
                .iter()
                .enumerate()
                .map(|(sti, &stat)| {
                    let sided = sidedness_for(cfg.kind, Sidedness::TwoSided);
                    let outcome = (|| -> std::result::Result<f64, String> {
                        let lam1 = surfaces[a.as_str()].as_ref().map_err(|e| e.to_string())?;
                        let lam2 = surfaces[b.as_str()].as_ref().map_err(|e| e.to_string())?;
                        let mut opts = LsOptions::new(
                            stat,
                            cfg.nsim,
                            cfg.r_cross.clone(),
                            RngSeed::new(cfg.seed)
                                .with_stream((1 + *pi as u64 * 2 + sti as u64) * STREAM_BLOCK),
                        );
                        opts.kind = cfg.kind;
                        opts.sided = sided;
                        opts.lattice_spacing = cfg.lattice_spacing;
                        let out = lotwick_silverman_test(
                            m.get(a).unwrap(),
                            m.get(b).unwrap(),
                            lam1,
                            lam2,
                            &opts,
                        )
                        .map_err(|e| e.to_string())?;
                        Ok(out.result.p_value)
                    })();
                    match outcome {
                        Ok(p) => ScreenRow {
                            target: label.clone(),
                            stat: stat.label().to_string(),
                            kind: cfg.kind,
                            sided,
                            p_value: Some(p),
                            error: None,
                        },
                        Err(e) => ScreenRow {
                            target: label.clone(),
                            stat: stat.label().to_string(),
                            kind: cfg.kind,
                            sided,
                            p_value: None,
                            error: Some(e),
                        },
                    }
                })
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}
