//! Python bindings: windows, patterns, intensity surfaces, summary
//! statistics and the Monte Carlo tests.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ppstat_core::geometry;
use ppstat_core::intensity;
use ppstat_core::mctest;
use ppstat_core::simulate;
use ppstat_core::sumstats;
use ppstat_core::{Point, RngSeed};

fn py_err(e: ppstat_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Axis-aligned rectangular observation window, coordinates in metres.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Window {
    inner: ppstat_core::RectWindow,
}

#[pymethods]
impl Window {
    #[new]
    fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> PyResult<Self> {
        Ok(Window {
            inner: ppstat_core::RectWindow::new(x_min, y_min, x_max, y_max).map_err(py_err)?,
        })
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn erode(&self, r: f64) -> PyResult<Window> {
        Ok(Window {
            inner: self.inner.erode(r).map_err(py_err)?,
        })
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        self.inner.contains(&Point::new(x, y))
    }

    #[getter]
    fn bounds(&self) -> (f64, f64, f64, f64) {
        (
            self.inner.x_min(),
            self.inner.y_min(),
            self.inner.x_max(),
            self.inner.y_max(),
        )
    }

    fn __repr__(&self) -> String {
        format!(
            "Window({}, {}, {}, {})",
            self.inner.x_min(),
            self.inner.y_min(),
            self.inner.x_max(),
            self.inner.y_max()
        )
    }
}

/// A point pattern inside a window.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Pattern {
    inner: ppstat_core::PointPattern,
}

#[pymethods]
impl Pattern {
    #[new]
    fn new(points: Vec<(f64, f64)>, window: Window) -> PyResult<Self> {
        let pts = points.into_iter().map(|(x, y)| Point::new(x, y)).collect();
        Ok(Pattern {
            inner: ppstat_core::PointPattern::new(pts, window.inner).map_err(py_err)?,
        })
    }

    fn points(&self) -> Vec<(f64, f64)> {
        self.inner.points().iter().map(|p| (p.x, p.y)).collect()
    }

    #[getter]
    fn window(&self) -> Window {
        Window {
            inner: *self.inner.window(),
        }
    }

    fn torus_shift(&self, dx: f64, dy: f64) -> Pattern {
        let shifted = geometry::torus_shift(
            self.inner.points(),
            &Point::new(dx, dy),
            self.inner.window(),
        );
        Pattern {
            inner: ppstat_core::PointPattern::new(shifted, *self.inner.window())
                .expect("torus shift stays in the window"),
        }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Pattern(n={})", self.inner.len())
    }
}

/// A gridded intensity surface (points per square metre).
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Surface {
    inner: ppstat_core::IntensitySurface,
}

#[pymethods]
impl Surface {
    /// Constant surface on a window.
    #[staticmethod]
    fn constant(window: Window, nx: usize, ny: usize, value: f64) -> PyResult<Surface> {
        Ok(Surface {
            inner: ppstat_core::IntensitySurface::constant(window.inner, nx, ny, value)
                .map_err(py_err)?,
        })
    }

    #[getter]
    fn shape(&self) -> (usize, usize) {
        (self.inner.nx(), self.inner.ny())
    }

    #[getter]
    fn cell_size(&self) -> (f64, f64) {
        (self.inner.dx(), self.inner.dy())
    }

    #[getter]
    fn window(&self) -> Window {
        Window {
            inner: *self.inner.window(),
        }
    }

    /// Row-major cell values (y outermost).
    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn max_value(&self) -> f64 {
        self.inner.max_value()
    }

    /// Bilinear evaluation, floored at the positivity threshold.
    fn evaluate(&self, x: f64, y: f64) -> PyResult<f64> {
        self.inner.evaluate(&Point::new(x, y)).map_err(py_err)
    }

    fn rescale_to_count(&self, n: usize) -> PyResult<Surface> {
        Ok(Surface {
            inner: self.inner.rescale_to_count(n).map_err(py_err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Surface({}x{}, mass={:.3})",
            self.inner.nx(),
            self.inner.ny(),
            self.inner.total_mass()
        )
    }
}

/// A summary statistic curve on a distance grid.
#[pyclass(from_py_object)]
#[derive(Clone)]
struct Curve {
    inner: sumstats::SummaryFunction,
}

#[pymethods]
impl Curve {
    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind.label()
    }

    fn r(&self) -> Vec<f64> {
        self.inner.r.values().to_vec()
    }

    fn values(&self) -> Vec<f64> {
        self.inner.value.clone()
    }

    fn reference(&self) -> Vec<f64> {
        self.inner.reference.clone()
    }

    fn defined(&self) -> Vec<bool> {
        self.inner.defined.clone()
    }

    fn __repr__(&self) -> String {
        format!("Curve({}, {} distances)", self.inner.kind.label(), self.inner.len())
    }
}

/// Outcome of a Monte Carlo deviation test.
#[pyclass]
struct MonteCarloTest {
    #[pyo3(get)]
    p_value: f64,
    #[pyo3(get)]
    observed_t: f64,
    #[pyo3(get)]
    simulated_t: Vec<f64>,
    #[pyo3(get)]
    kind: String,
    #[pyo3(get)]
    sided: String,
    #[pyo3(get)]
    nsim: usize,
    observed_curve: sumstats::SummaryFunction,
}

#[pymethods]
impl MonteCarloTest {
    fn observed_curve(&self) -> Curve {
        Curve {
            inner: self.observed_curve.clone(),
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "MonteCarloTest({} {}, p={})",
            self.kind, self.sided, self.p_value
        )
    }
}

fn parse_kind(kind: &str) -> PyResult<mctest::DeviationKind> {
    match kind {
        "mad" => Ok(mctest::DeviationKind::Mad),
        "dclf" => Ok(mctest::DeviationKind::Dclf),
        "stud" => Ok(mctest::DeviationKind::StudentizedMad),
        "dq" => Ok(mctest::DeviationKind::DirectionalQuantileMad),
        other => Err(PyValueError::new_err(format!(
            "kind must be one of mad/dclf/stud/dq, got {other:?}"
        ))),
    }
}

fn parse_sided(sided: &str) -> PyResult<mctest::Sidedness> {
    match sided {
        "two" => Ok(mctest::Sidedness::TwoSided),
        "greater" => Ok(mctest::Sidedness::Greater),
        "less" => Ok(mctest::Sidedness::Less),
        other => Err(PyValueError::new_err(format!(
            "sided must be one of two/greater/less, got {other:?}"
        ))),
    }
}

fn rgrid(r_max: f64, n_r: usize) -> PyResult<sumstats::RGrid> {
    sumstats::RGrid::regular(r_max, n_r).map_err(py_err)
}

#[pyfunction]
fn translation_weight(window: &Window, p: (f64, f64), q: (f64, f64)) -> f64 {
    geometry::translation_weight(
        &window.inner,
        &Point::new(p.0, p.1),
        &Point::new(q.0, q.1),
    )
}

#[pyfunction]
fn kernel_intensity(pattern: &Pattern, bandwidth: f64, nx: usize, ny: usize) -> PyResult<Surface> {
    Ok(Surface {
        inner: intensity::kernel_intensity(&pattern.inner, bandwidth, nx, ny).map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (pattern, candidates, nx, ny, leave_one_out = false))]
fn cvl_bandwidth(
    pattern: &Pattern,
    candidates: Vec<f64>,
    nx: usize,
    ny: usize,
    leave_one_out: bool,
) -> PyResult<f64> {
    intensity::cvl_bandwidth_with(&pattern.inner, &candidates, nx, ny, leave_one_out)
        .map_err(py_err)
}

#[pyfunction]
fn default_bandwidth_candidates(window: &Window, nx: usize, ny: usize) -> Vec<f64> {
    intensity::default_bandwidth_candidates(&window.inner, nx, ny)
}

#[pyfunction]
fn k_inhom(pattern: &Pattern, lam: &Surface, r_max: f64, n_r: usize) -> PyResult<Curve> {
    Ok(Curve {
        inner: sumstats::k_inhom(&pattern.inner, &lam.inner, &rgrid(r_max, n_r)?)
            .map_err(py_err)?,
    })
}

#[pyfunction]
fn g_inhom(pattern: &Pattern, lam: &Surface, r_max: f64, n_r: usize) -> PyResult<Curve> {
    Ok(Curve {
        inner: sumstats::g_inhom(&pattern.inner, &lam.inner, &rgrid(r_max, n_r)?)
            .map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (pattern, lam, r_max, n_r, lattice_spacing = None))]
fn f_inhom(
    pattern: &Pattern,
    lam: &Surface,
    r_max: f64,
    n_r: usize,
    lattice_spacing: Option<f64>,
) -> PyResult<Curve> {
    let spacing = lattice_spacing.unwrap_or_else(|| lam.inner.dx().max(lam.inner.dy()));
    let grid = sumstats::GridPoints::lattice(pattern.inner.window(), spacing).map_err(py_err)?;
    Ok(Curve {
        inner: sumstats::f_inhom(&pattern.inner, &lam.inner, &grid, &rgrid(r_max, n_r)?)
            .map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (pattern, lam, r_max, n_r, lattice_spacing = None))]
fn j_inhom(
    pattern: &Pattern,
    lam: &Surface,
    r_max: f64,
    n_r: usize,
    lattice_spacing: Option<f64>,
) -> PyResult<Curve> {
    let spacing = lattice_spacing.unwrap_or_else(|| lam.inner.dx().max(lam.inner.dy()));
    let grid = sumstats::GridPoints::lattice(pattern.inner.window(), spacing).map_err(py_err)?;
    Ok(Curve {
        inner: sumstats::j_inhom(&pattern.inner, &lam.inner, &grid, &rgrid(r_max, n_r)?)
            .map_err(py_err)?,
    })
}

#[pyfunction]
fn k_cross_inhom(
    p1: &Pattern,
    p2: &Pattern,
    lam1: &Surface,
    lam2: &Surface,
    r_max: f64,
    n_r: usize,
) -> PyResult<Curve> {
    Ok(Curve {
        inner: sumstats::k_cross_inhom(
            &p1.inner,
            &p2.inner,
            &lam1.inner,
            &lam2.inner,
            &rgrid(r_max, n_r)?,
        )
        .map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (p1, p2, lam2, r_max, n_r, lattice_spacing = None))]
fn j_cross_inhom(
    p1: &Pattern,
    p2: &Pattern,
    lam2: &Surface,
    r_max: f64,
    n_r: usize,
    lattice_spacing: Option<f64>,
) -> PyResult<Curve> {
    let spacing = lattice_spacing.unwrap_or_else(|| lam2.inner.dx().max(lam2.inner.dy()));
    let grid = sumstats::GridPoints::lattice(p1.inner.window(), spacing).map_err(py_err)?;
    Ok(Curve {
        inner: sumstats::j_cross_inhom(
            &p1.inner,
            &p2.inner,
            &lam2.inner,
            &grid,
            &rgrid(r_max, n_r)?,
        )
        .map_err(py_err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (lam, seed, stream = 0))]
fn sample_poisson(lam: &Surface, seed: u64, stream: u64) -> Pattern {
    Pattern {
        inner: simulate::sample_inhom_poisson(
            &lam.inner,
            RngSeed::new(seed).with_stream(stream),
        ),
    }
}

#[pyfunction]
#[pyo3(signature = (parent_rate, mean_offspring, sigma, window, seed, stream = 0))]
fn sample_thomas(
    parent_rate: f64,
    mean_offspring: f64,
    sigma: f64,
    window: &Window,
    seed: u64,
    stream: u64,
) -> Pattern {
    Pattern {
        inner: simulate::sample_thomas(
            parent_rate,
            mean_offspring,
            sigma,
            &window.inner,
            RngSeed::new(seed).with_stream(stream),
        ),
    }
}

#[pyfunction]
fn random_pairing(species: Vec<String>, seed: u64) -> PyResult<Vec<(String, String)>> {
    simulate::random_pairing(&species, RngSeed::new(seed)).map_err(py_err)
}

fn wrap_output(out: mctest::TestOutput) -> MonteCarloTest {
    MonteCarloTest {
        p_value: out.result.p_value,
        observed_t: out.result.observed_t,
        simulated_t: out.result.simulated_t,
        kind: out.result.kind.label().to_string(),
        sided: out.result.sided.label().to_string(),
        nsim: out.result.nsim,
        observed_curve: out.observed_curve,
    }
}

/// Monte Carlo goodness-of-fit test against an inhomogeneous Poisson null.
#[pyfunction]
#[pyo3(signature = (pattern, null_lam, stat, nsim, r_max, n_r, seed,
                    kind = "mad", sided = None, reestimate_bandwidth = None))]
#[allow(clippy::too_many_arguments)]
fn goodness_of_fit_test(
    pattern: &Pattern,
    null_lam: &Surface,
    stat: &str,
    nsim: usize,
    r_max: f64,
    n_r: usize,
    seed: u64,
    kind: &str,
    sided: Option<&str>,
    reestimate_bandwidth: Option<f64>,
) -> PyResult<MonteCarloTest> {
    let stat = match stat {
        "K" => mctest::GofStat::K,
        "J" => mctest::GofStat::J,
        other => {
            return Err(PyValueError::new_err(format!(
                "stat must be K or J, got {other:?}"
            )))
        }
    };
    let kind = parse_kind(kind)?;
    let mut opts = mctest::GofOptions::new(stat, nsim, rgrid(r_max, n_r)?, RngSeed::new(seed));
    opts.kind = kind;
    opts.sided = match sided {
        Some(s) => parse_sided(s)?,
        None if kind.supports_one_sided() => stat.clustered_sidedness(),
        None => mctest::Sidedness::TwoSided,
    };
    opts.reestimate_bandwidth = reestimate_bandwidth;
    let out = mctest::goodness_of_fit_test(&pattern.inner, &null_lam.inner, &opts)
        .map_err(py_err)?;
    Ok(wrap_output(out))
}

/// Lotwick–Silverman torus-shift independence test for a species pair.
#[pyfunction]
#[pyo3(signature = (p1, p2, lam1, lam2, stat, nsim, r_max, n_r, seed,
                    kind = "mad", sided = "two"))]
#[allow(clippy::too_many_arguments)]
fn lotwick_silverman_test(
    p1: &Pattern,
    p2: &Pattern,
    lam1: &Surface,
    lam2: &Surface,
    stat: &str,
    nsim: usize,
    r_max: f64,
    n_r: usize,
    seed: u64,
    kind: &str,
    sided: &str,
) -> PyResult<MonteCarloTest> {
    let stat = match stat {
        "Kcross" => mctest::CrossStat::KCross,
        "Jcross" => mctest::CrossStat::JCross,
        other => {
            return Err(PyValueError::new_err(format!(
                "stat must be Kcross or Jcross, got {other:?}"
            )))
        }
    };
    let mut opts = mctest::LsOptions::new(stat, nsim, rgrid(r_max, n_r)?, RngSeed::new(seed));
    opts.kind = parse_kind(kind)?;
    opts.sided = parse_sided(sided)?;
    let out = mctest::lotwick_silverman_test(
        &p1.inner,
        &p2.inner,
        &lam1.inner,
        &lam2.inner,
        &opts,
    )
    .map_err(py_err)?;
    Ok(wrap_output(out))
}

#[pymodule]
fn ppstat(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Window>()?;
    m.add_class::<Pattern>()?;
    m.add_class::<Surface>()?;
    m.add_class::<Curve>()?;
    m.add_class::<MonteCarloTest>()?;
    m.add_function(wrap_pyfunction!(translation_weight, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_intensity, m)?)?;
    m.add_function(wrap_pyfunction!(cvl_bandwidth, m)?)?;
    m.add_function(wrap_pyfunction!(default_bandwidth_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(k_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(g_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(f_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(j_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(k_cross_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(j_cross_inhom, m)?)?;
    m.add_function(wrap_pyfunction!(sample_poisson, m)?)?;
    m.add_function(wrap_pyfunction!(sample_thomas, m)?)?;
    m.add_function(wrap_pyfunction!(random_pairing, m)?)?;
    m.add_function(wrap_pyfunction!(goodness_of_fit_test, m)?)?;
    m.add_function(wrap_pyfunction!(lotwick_silverman_test, m)?)?;
    Ok(())
}
