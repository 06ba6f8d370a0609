//! Null and alternative pattern generators for Monte Carlo testing.
//!
//! All randomness flows through counter-based ChaCha streams keyed by
//! `(seed, stream)`, so batches of simulations can run concurrently and
//! still reproduce bit-for-bit.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, RectWindow};
use crate::intensity::IntensitySurface;
use crate::pattern::PointPattern;

/// Seed plus stream index; distinct streams give independent draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngSeed {
    pub seed: u64,
    pub stream: u64,
}

impl RngSeed {
    pub fn new(seed: u64) -> Self {
        RngSeed { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        RngSeed { stream, ..self }
    }

    pub fn substream(self, offset: u64) -> Self {
        RngSeed {
            stream: self.stream.wrapping_add(offset),
            ..self
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

fn poisson_count(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

fn uniform_in(rng: &mut ChaCha8Rng, w: &RectWindow) -> Point {
    let u: f64 = rng.random();
    let v: f64 = rng.random();
    Point::new(w.x_min() + u * w.width(), w.y_min() + v * w.height())
}

/// Draw an inhomogeneous Poisson pattern from `lam` by thinning a dominating
/// homogeneous process at the grid maximum.
pub fn sample_inhom_poisson(lam: &IntensitySurface, seed: RngSeed) -> PointPattern {
    let w = *lam.window();
    let lam_max = lam.max_value();
    if lam_max <= 0.0 {
        return PointPattern::empty(w);
    }
    let mut rng = seed.rng();
    let n = poisson_count(&mut rng, lam_max * w.area());
    let mut pts = Vec::new();
    for _ in 0..n {
        let p = uniform_in(&mut rng, &w);
        let u: f64 = rng.random();
        // Bilinear interpolation never exceeds the grid maximum, so the
        // acceptance ratio is a valid probability.
        let value = lam.evaluate(&p).expect("sampled inside the window");
        if u * lam_max < value {
            pts.push(p);
        }
    }
    PointPattern::new(pts, w).expect("thinned points stay inside the window")
}

/// Draw a Thomas cluster process: Poisson parents on the window dilated by
/// `4 * sigma`, Poisson(`mean_offspring`) children per parent with isotropic
/// Gaussian displacement, clipped to `w`.
pub fn sample_thomas(
    parent_intensity: f64,
    mean_offspring: f64,
    sigma: f64,
    w: &RectWindow,
    seed: RngSeed,
) -> PointPattern {
    assert!(
        parent_intensity > 0.0 && mean_offspring > 0.0 && sigma > 0.0,
        "Thomas parameters must be positive"
    );
    let mut rng = seed.rng();
    let dilated = w.dilate(4.0 * sigma);
    let normal = Normal::new(0.0, sigma).expect("positive sigma");
    let n_parents = poisson_count(&mut rng, parent_intensity * dilated.area());
    let mut pts = Vec::new();
    for _ in 0..n_parents {
        let parent = uniform_in(&mut rng, &dilated);
        let k = poisson_count(&mut rng, mean_offspring);
        for _ in 0..k {
            let child = Point::new(
                parent.x + normal.sample(&mut rng),
                parent.y + normal.sample(&mut rng),
            );
            if w.contains(&child) {
                pts.push(child);
            }
        }
    }
    PointPattern::new(pts, *w).expect("children are clipped to the window")
}

/// Uniform random perfect matching of the species list. With an odd count
/// one species stays unpaired.
pub fn random_pairing(species: &[String], seed: RngSeed) -> Result<Vec<(String, String)>> {
    if species.len() < 2 {
        return Err(Error::NothingToPair);
    }
    let mut rng = seed.rng();
    let mut order: Vec<usize> = (0..species.len()).collect();
    order.shuffle(&mut rng);
    Ok(order
        .chunks_exact(2)
        .map(|c| (species[c[0]].clone(), species[c[1]].clone()))
        .collect())
}
