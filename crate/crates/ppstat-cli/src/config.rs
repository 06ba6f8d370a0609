//! Run configuration: built-in defaults, an optional TOML file, and flag
//! overrides (flags win).

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use ppstat_core::pattern::{Status, StatusMap};
use ppstat_core::RectWindow;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub window: RectWindow,
    pub grid_nx: usize,
    pub grid_ny: usize,
    pub n_r: usize,
    pub r_max_univariate: f64,
    pub r_max_cross: f64,
    pub nsim: usize,
    pub seed: u64,
    pub min_species_count: usize,
    pub bandwidth: Option<f64>,
    pub lattice_spacing: Option<f64>,
    pub status_map: StatusMap,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            // A 1000 m x 500 m plot, the common large forest-census layout.
            window: RectWindow::new(0.0, 0.0, 1000.0, 500.0).unwrap(),
            grid_nx: 256,
            grid_ny: 128,
            n_r: 512,
            r_max_univariate: 25.0,
            r_max_cross: 30.0,
            nsim: 99,
            seed: 42,
            min_species_count: 50,
            bandwidth: None,
            lattice_spacing: None,
            status_map: StatusMap::default(),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    window: Option<[f64; 4]>,
    grid_nx: Option<usize>,
    grid_ny: Option<usize>,
    n_r: Option<usize>,
    r_max_univariate: Option<f64>,
    r_max_cross: Option<f64>,
    nsim: Option<usize>,
    seed: Option<u64>,
    min_species_count: Option<usize>,
    bandwidth: Option<f64>,
    lattice_spacing: Option<f64>,
    status_map: Option<BTreeMap<String, String>>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        let Some(path) = path else {
            return Ok(cfg);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let file: FileConfig =
            toml::from_str(&text).map_err(|e| format!("config parse error: {e}"))?;
        if let Some([x0, y0, x1, y1]) = file.window {
            cfg.window =
                RectWindow::new(x0, y0, x1, y1).map_err(|e| format!("config window: {e}"))?;
        }
        if let Some(v) = file.grid_nx {
            cfg.grid_nx = v;
        }
        if let Some(v) = file.grid_ny {
            cfg.grid_ny = v;
        }
        if let Some(v) = file.n_r {
            cfg.n_r = v;
        }
        if let Some(v) = file.r_max_univariate {
            cfg.r_max_univariate = v;
        }
        if let Some(v) = file.r_max_cross {
            cfg.r_max_cross = v;
        }
        if let Some(v) = file.nsim {
            cfg.nsim = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.min_species_count {
            cfg.min_species_count = v;
        }
        if let Some(v) = file.bandwidth {
            cfg.bandwidth = Some(v);
        }
        if let Some(v) = file.lattice_spacing {
            cfg.lattice_spacing = Some(v);
        }
        if let Some(map) = file.status_map {
            let mut pairs = Vec::new();
            for (code, status) in map {
                let status = match status.as_str() {
                    "alive" => Status::Alive,
                    "dead" => Status::Dead,
                    other => {
                        return Err(format!(
                            "config status_map: {code:?} maps to unknown status {other:?}"
                        ))
                    }
                };
                pairs.push((code, status));
            }
            cfg.status_map = StatusMap::from_pairs(pairs);
        }
        Ok(cfg)
    }
}
