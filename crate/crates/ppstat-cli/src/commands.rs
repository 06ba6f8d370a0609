//! Subcommand implementations.

use std::path::{Path, PathBuf};

use serde::Serialize;

use ppstat_core::intensity::{cvl_bandwidth, default_bandwidth_candidates, kernel_intensity, null_intensity};
use ppstat_core::mctest::{
    goodness_of_fit_test, lotwick_silverman_test, pointwise_envelopes, screen_pairs,
    screen_rows_to_csv, screen_species, CrossStat, DeviationKind, GofOptions, GofStat, LsOptions,
    ScreenConfig, ScreenRow, Sidedness, TestOutput,
};
use ppstat_core::pattern::{extract_species, read_census_file, write_census, StatusFilter};
use ppstat_core::simulate::{sample_inhom_poisson, sample_thomas, RngSeed};
use ppstat_core::sumstats::{
    j_cross_inhom, j_inhom, k_cross_inhom, k_inhom, GridPoints, RGrid,
};
use ppstat_core::{CensusRecord, IntensitySurface, PointPattern, Status};

use crate::config::RunConfig;
use crate::output::write_atomic;
use crate::{svg, CliError, CommonArgs, KindArg, ProcessArg, ScreenMode, SidedArg, StatArg};

fn apply_overrides(cfg: &mut RunConfig, common: &CommonArgs) {
    if let Some(n) = common.nsim {
        cfg.nsim = n;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(h) = common.bandwidth {
        cfg.bandwidth = Some(h);
    }
}

fn load_records(common: &CommonArgs, cfg: &RunConfig) -> Result<Vec<CensusRecord>, CliError> {
    Ok(read_census_file(
        &common.census,
        &cfg.window,
        &cfg.status_map,
    )?)
}

fn species_pattern(
    records: &[CensusRecord],
    cfg: &RunConfig,
    species: &str,
    census_id: u32,
) -> Result<PointPattern, CliError> {
    let p = extract_species(records, cfg.window, species, census_id, StatusFilter::Alive)?;
    if p.is_empty() {
        return Err(ppstat_core::Error::UnknownSpecies(species.to_string()).into());
    }
    let dups = p.duplicate_coordinate_count();
    if dups > 0 {
        eprintln!("warning: {dups} duplicate coordinates for species {species}");
    }
    Ok(p)
}

fn bandwidth_for(p: &PointPattern, cfg: &RunConfig) -> Result<f64, CliError> {
    match cfg.bandwidth {
        Some(h) => Ok(h),
        None => {
            let cands = default_bandwidth_candidates(p.window(), cfg.grid_nx, cfg.grid_ny);
            Ok(cvl_bandwidth(p, &cands, cfg.grid_nx, cfg.grid_ny)?)
        }
    }
}

fn own_surface(p: &PointPattern, cfg: &RunConfig) -> Result<IntensitySurface, CliError> {
    let h = bandwidth_for(p, cfg)?;
    Ok(kernel_intensity(p, h, cfg.grid_nx, cfg.grid_ny)?)
}

fn parse_pair(pair: &str) -> Result<(String, String), CliError> {
    let parts: Vec<&str> = pair.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] if !a.is_empty() && !b.is_empty() && a != b => {
            Ok((a.to_string(), b.to_string()))
        }
        _ => Err(CliError::usage(format!(
            "--pair expects two distinct comma-separated species codes, got {pair:?}"
        ))),
    }
}

enum Target {
    Species(String),
    Pair(String, String),
}

fn resolve_target(
    species: Option<String>,
    pair: Option<String>,
    stat: StatArg,
) -> Result<Target, CliError> {
    let is_cross = matches!(stat, StatArg::Kcross | StatArg::Jcross);
    match (species, pair) {
        (Some(_), Some(_)) => Err(CliError::usage("--species and --pair are exclusive")),
        (Some(s), None) => {
            if is_cross {
                Err(CliError::usage(
                    "cross statistics need --pair, not --species",
                ))
            } else {
                Ok(Target::Species(s))
            }
        }
        (None, Some(p)) => {
            if is_cross {
                let (a, b) = parse_pair(&p)?;
                Ok(Target::Pair(a, b))
            } else {
                Err(CliError::usage(
                    "univariate statistics need --species, not --pair",
                ))
            }
        }
        (None, None) => Err(CliError::usage("one of --species or --pair is required")),
    }
}

fn kind_of(kind: KindArg) -> DeviationKind {
    match kind {
        KindArg::Mad => DeviationKind::Mad,
        KindArg::Dclf => DeviationKind::Dclf,
        KindArg::Stud => DeviationKind::StudentizedMad,
        KindArg::Dq => DeviationKind::DirectionalQuantileMad,
    }
}

fn sided_of(sided: SidedArg) -> Sidedness {
    match sided {
        SidedArg::Two => Sidedness::TwoSided,
        SidedArg::Greater => Sidedness::Greater,
        SidedArg::Less => Sidedness::Less,
    }
}

pub fn cmd_intensity(
    common: &CommonArgs,
    mut cfg: RunConfig,
    species: &str,
    ref_census_id: Option<u32>,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, common);
    let records = load_records(common, &cfg)?;
    let pattern = species_pattern(&records, &cfg, species, common.census_id)?;
    let h = bandwidth_for(&pattern, &cfg)?;

    let (surface, suffix) = match ref_census_id {
        None => (
            kernel_intensity(&pattern, h, cfg.grid_nx, cfg.grid_ny)?,
            "",
        ),
        Some(ref_id) => (
            null_intensity(
                &records,
                &records,
                cfg.window,
                species,
                ref_id,
                common.census_id,
                h,
                cfg.grid_nx,
                cfg.grid_ny,
            )?,
            "_null",
        ),
    };

    let mut csv = Vec::new();
    surface.to_csv(&mut csv).map_err(CliError::from)?;
    let csv_path = common.out_dir.join(format!("intensity_{species}{suffix}.csv"));
    write_atomic(&csv_path, &csv)?;

    let title = format!("intensity {species}{suffix} (h = {h:.2} m)");
    let svg_path = common.out_dir.join(format!("intensity_{species}{suffix}.svg"));
    write_atomic(&svg_path, svg::heatmap(&surface, &title).as_bytes())?;

    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

pub fn cmd_stats(
    common: &CommonArgs,
    mut cfg: RunConfig,
    species: Option<String>,
    pair: Option<String>,
    stat: StatArg,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, common);
    let records = load_records(common, &cfg)?;
    let target = resolve_target(species, pair, stat)?;

    let (curve, label) = match target {
        Target::Species(sp) => {
            let p = species_pattern(&records, &cfg, &sp, common.census_id)?;
            let lam = own_surface(&p, &cfg)?;
            let r = RGrid::regular(cfg.r_max_univariate, cfg.n_r)?;
            let curve = match stat {
                StatArg::K => k_inhom(&p, &lam, &r)?,
                StatArg::J => {
                    let spacing = cfg.lattice_spacing.unwrap_or(lam.dx().max(lam.dy()));
                    let grid = GridPoints::lattice(&cfg.window, spacing)?;
                    j_inhom(&p, &lam, &grid, &r)?
                }
                _ => unreachable!("cross handled via pair target"),
            };
            (curve, sp)
        }
        Target::Pair(a, b) => {
            let pa = species_pattern(&records, &cfg, &a, common.census_id)?;
            let pb = species_pattern(&records, &cfg, &b, common.census_id)?;
            let lam_a = own_surface(&pa, &cfg)?;
            let lam_b = own_surface(&pb, &cfg)?;
            let r = RGrid::regular(cfg.r_max_cross, cfg.n_r)?;
            let curve = match stat {
                StatArg::Kcross => k_cross_inhom(&pa, &pb, &lam_a, &lam_b, &r)?,
                StatArg::Jcross => {
                    let spacing = cfg.lattice_spacing.unwrap_or(lam_b.dx().max(lam_b.dy()));
                    let grid = GridPoints::lattice(&cfg.window, spacing)?;
                    j_cross_inhom(&pa, &pb, &lam_b, &grid, &r)?
                }
                _ => unreachable!("univariate handled via species target"),
            };
            (curve, format!("{a}_{b}"))
        }
    };

    let stat_name = curve.kind.label();
    let mut csv = Vec::new();
    curve.to_csv(&mut csv).map_err(CliError::from)?;
    let csv_path = common.out_dir.join(format!("{stat_name}_{label}.csv"));
    write_atomic(&csv_path, &csv)?;
    let svg_path = common.out_dir.join(format!("{stat_name}_{label}.svg"));
    write_atomic(
        &svg_path,
        svg::curve(&curve, &format!("{stat_name} {label}")).as_bytes(),
    )?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

#[derive(Serialize)]
struct TestReport {
    target: String,
    stat: String,
    kind: &'static str,
    sided: &'static str,
    nsim: usize,
    seed: u64,
    r_range: (f64, f64),
    observed_statistic: f64,
    p_value: f64,
}

fn emit_test_output(
    out_dir: &Path,
    target: &str,
    stat_label: &str,
    seed: u64,
    out: &TestOutput,
) -> Result<(), CliError> {
    let report = TestReport {
        target: target.to_string(),
        stat: stat_label.to_string(),
        kind: out.result.kind.label(),
        sided: out.result.sided.label(),
        nsim: out.result.nsim,
        seed,
        r_range: out.result.r_range,
        observed_statistic: out.result.observed_t,
        p_value: out.result.p_value,
    };
    let mut json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::numeric(format!("serialization failed: {e}")))?;
    json.push('\n');
    let json_path = out_dir.join(format!("test_{target}_{stat_label}.json"));
    write_atomic(&json_path, json.as_bytes())?;

    let env = pointwise_envelopes(&out.observed_curve, &out.simulated_curves, 1)?;
    let svg_path = out_dir.join(format!("envelope_{target}_{stat_label}.svg"));
    write_atomic(
        &svg_path,
        svg::envelope(&env, &format!("{stat_label} {target} (p = {:.4})", report.p_value))
            .as_bytes(),
    )?;
    println!("wrote {}", json_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_test(
    common: &CommonArgs,
    mut cfg: RunConfig,
    species: Option<String>,
    pair: Option<String>,
    stat: StatArg,
    kind: KindArg,
    sided: Option<SidedArg>,
    ref_census_id: Option<u32>,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, common);
    let kind = kind_of(kind);
    if let Some(s) = sided {
        if sided_of(s) != Sidedness::TwoSided && !kind.supports_one_sided() {
            return Err(CliError::usage(format!(
                "--kind {} is two-sided only",
                kind.label()
            )));
        }
    }
    let records = load_records(common, &cfg)?;
    let target = resolve_target(species, pair, stat)?;

    match target {
        Target::Species(sp) => {
            let p = species_pattern(&records, &cfg, &sp, common.census_id)?;
            let h = bandwidth_for(&p, &cfg)?;
            let null_lam = match ref_census_id {
                None => kernel_intensity(&p, h, cfg.grid_nx, cfg.grid_ny)?,
                Some(ref_id) => null_intensity(
                    &records,
                    &records,
                    cfg.window,
                    &sp,
                    ref_id,
                    common.census_id,
                    h,
                    cfg.grid_nx,
                    cfg.grid_ny,
                )?,
            };
            let gof_stat = match stat {
                StatArg::K => GofStat::K,
                StatArg::J => GofStat::J,
                _ => unreachable!(),
            };
            let mut opts = GofOptions::new(
                gof_stat,
                cfg.nsim,
                RGrid::regular(cfg.r_max_univariate, cfg.n_r)?,
                RngSeed::new(cfg.seed),
            );
            opts.kind = kind;
            opts.sided = match sided {
                Some(s) => sided_of(s),
                None if kind.supports_one_sided() => gof_stat.clustered_sidedness(),
                None => Sidedness::TwoSided,
            };
            opts.lattice_spacing = cfg.lattice_spacing;
            let out = goodness_of_fit_test(&p, &null_lam, &opts)?;
            emit_test_output(&common.out_dir, &sp, gof_stat.label(), cfg.seed, &out)
        }
        Target::Pair(a, b) => {
            let pa = species_pattern(&records, &cfg, &a, common.census_id)?;
            let pb = species_pattern(&records, &cfg, &b, common.census_id)?;
            let lam_a = own_surface(&pa, &cfg)?;
            let lam_b = own_surface(&pb, &cfg)?;
            let cross_stat = match stat {
                StatArg::Kcross => CrossStat::KCross,
                StatArg::Jcross => CrossStat::JCross,
                _ => unreachable!(),
            };
            let mut opts = LsOptions::new(
                cross_stat,
                cfg.nsim,
                RGrid::regular(cfg.r_max_cross, cfg.n_r)?,
                RngSeed::new(cfg.seed),
            );
            opts.kind = kind;
            opts.sided = match sided {
                Some(s) => sided_of(s),
                None => Sidedness::TwoSided,
            };
            opts.lattice_spacing = cfg.lattice_spacing;
            let out = lotwick_silverman_test(&pa, &pb, &lam_a, &lam_b, &opts)?;
            let label = format!("{a}_{b}");
            emit_test_output(&common.out_dir, &label, cross_stat.label(), cfg.seed, &out)
        }
    }
}

pub fn cmd_screen(
    common: &CommonArgs,
    mut cfg: RunConfig,
    mode: ScreenMode,
    kind: KindArg,
) -> Result<(), CliError> {
    apply_overrides(&mut cfg, common);
    let records = load_records(common, &cfg)?;
    let m = ppstat_core::MultiTypePattern::from_records(
        &records,
        cfg.window,
        common.census_id,
        StatusFilter::Alive,
    )?;
    let screen_cfg = ScreenConfig {
        min_count: cfg.min_species_count,
        nsim: cfg.nsim,
        r_univariate: RGrid::regular(cfg.r_max_univariate, cfg.n_r)?,
        r_cross: RGrid::regular(cfg.r_max_cross, cfg.n_r)?,
        kind: kind_of(kind),
        grid_nx: cfg.grid_nx,
        grid_ny: cfg.grid_ny,
        bandwidth: cfg.bandwidth,
        seed: cfg.seed,
        lattice_spacing: cfg.lattice_spacing,
        reestimate: true,
    };
    let (rows, mode_name): (Vec<ScreenRow>, &str) = match mode {
        ScreenMode::Species => (screen_species(&m, &screen_cfg), "species"),
        ScreenMode::Pairs => (
            screen_pairs(&m, &screen_cfg, RngSeed::new(cfg.seed))?,
            "pairs",
        ),
    };
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "warning: {} {} failed: {}",
            row.target,
            row.stat,
            row.error.as_deref().unwrap_or("unknown")
        );
    }

    let mut csv = Vec::new();
    screen_rows_to_csv(&rows, &mut csv).map_err(CliError::from)?;
    let csv_path = common.out_dir.join(format!("screen_{mode_name}.csv"));
    write_atomic(&csv_path, &csv)?;

    let p_values: Vec<f64> = rows.iter().filter_map(|r| r.p_value).collect();
    let svg_path = common.out_dir.join(format!("pvalues_{mode_name}.svg"));
    write_atomic(
        &svg_path,
        svg::p_value_histogram(&p_values, &format!("p-values ({mode_name})")).as_bytes(),
    )?;
    println!("wrote {}", csv_path.display());
    println!("wrote {}", svg_path.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    cfg: RunConfig,
    out_dir: &Path,
    process: ProcessArg,
    species: &str,
    lambda: Option<f64>,
    parent_rate: Option<f64>,
    mean_offspring: Option<f64>,
    sigma: Option<f64>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let seed = seed.unwrap_or(cfg.seed);
    let pattern = match process {
        ProcessArg::Poisson => {
            let lambda = lambda
                .ok_or_else(|| CliError::usage("--lambda is required for --process poisson"))?;
            if !(lambda > 0.0) {
                return Err(CliError::numeric("--lambda must be positive"));
            }
            let flat = IntensitySurface::constant(cfg.window, cfg.grid_nx, cfg.grid_ny, lambda)
                .map_err(CliError::from)?;
            sample_inhom_poisson(&flat, RngSeed::new(seed))
        }
        ProcessArg::Thomas => {
            let (rate, mu, s) = match (parent_rate, mean_offspring, sigma) {
                (Some(r), Some(m), Some(s)) => (r, m, s),
                _ => {
                    return Err(CliError::usage(
                        "--parent-rate, --mean-offspring and --sigma are required for --process thomas",
                    ))
                }
            };
            if !(rate > 0.0 && mu > 0.0 && s > 0.0) {
                return Err(CliError::numeric("thomas parameters must be positive"));
            }
            sample_thomas(rate, mu, s, &cfg.window, RngSeed::new(seed))
        }
    };

    let records: Vec<CensusRecord> = pattern
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| CensusRecord {
            tree_id: format!("t{:06}", i + 1),
            species: species.to_string(),
            x: p.x,
            y: p.y,
            status: Status::Alive,
            census_id: 1,
        })
        .collect();
    let mut csv = Vec::new();
    write_census(&records, &cfg.status_map, &mut csv).map_err(CliError::from)?;
    let path: PathBuf = out_dir.join(format!("simulated_{species}.csv"));
    write_atomic(&path, &csv)?;
    println!("wrote {} ({} points)", path.display(), records.len());
    Ok(())
}
