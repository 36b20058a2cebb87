//! Static geometry and randomness: cell, clusters, correlated angle
//! perturbation fields and the probe lattice.

mod field;
mod io;
mod params;

pub use field::{gaussian_covariance, uniform_transform, AlphaField, FieldGrid, Stencil};
pub use params::{AlphaRegime, Params, C0, PARAM_KEYS};

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::{uniform_in_disk, Point};
use crate::rng::{stream, Purpose, StreamRng};

/// A static scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub position: Point,
    /// Complex gain per subband, `CN(0, 1)`.
    pub gains: Vec<Complex64>,
}

impl Cluster {
    /// `|g(k)|^2`.
    pub fn power(&self, k: usize) -> f64 {
        self.gains[k].norm_sqr()
    }
}

/// Draws a `CN(0, 1)` sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `L` clusters uniform on the disk, each with `K` independent gains.
///
/// Positions come from one stream per cluster and gains from one stream per
/// (cluster, subband), so changing `K` or `L` keeps the shared draws.
pub fn generate_clusters(seed: u64, params: &Params) -> Vec<Cluster> {
    (0..params.clusters)
        .map(|l| {
            let mut prng = stream(seed, Purpose::ClusterPositions, l as u64, 0);
            let position = uniform_in_disk(&mut prng, params.radius);
            let gains = (0..params.subbands)
                .map(|k| {
                    complex_gaussian(&mut stream(seed, Purpose::ClusterGains, l as u64, k as u64))
                })
                .collect();
            Cluster { position, gains }
        })
        .collect()
}

/// Departure (and, for multi-antenna UEs, arrival) fields for every
/// (cluster, subband) pair.
#[derive(Debug, Clone)]
pub struct FieldBank {
    grid: FieldGrid,
    subbands: usize,
    departure: Vec<AlphaField>,
    arrival: Option<Vec<AlphaField>>,
}

impl FieldBank {
    pub fn grid(&self) -> &FieldGrid {
        &self.grid
    }

    pub fn departure(&self, cluster: usize, k: usize) -> &AlphaField {
        &self.departure[cluster * self.subbands + k]
    }

    pub fn arrival(&self, cluster: usize, k: usize) -> Option<&AlphaField> {
        self.arrival.as_ref().map(|a| &a[cluster * self.subbands + k])
    }
}

/// Builds the field of one (cluster, subband) pair: the departure field and
/// its arrival companion share one white-noise draw.
pub fn build_alpha_field(
    grid: &FieldGrid,
    seed: u64,
    cluster: usize,
    k: usize,
) -> (AlphaField, AlphaField) {
    let mut rng: StreamRng = stream(seed, Purpose::DepartureField, cluster as u64, k as u64);
    grid.sample_pair(&mut rng)
}

/// Builds all fields for a parameter set.
pub fn build_field_bank(seed: u64, params: &Params) -> Result<FieldBank> {
    let grid = FieldGrid::new(params)?;
    let keep_arrival = params.n_rx > 1;
    let pairs: Vec<(AlphaField, Option<AlphaField>)> = (0..params.clusters * params.subbands)
        .into_par_iter()
        .map(|i| {
            let (dep, arr) = build_alpha_field(&grid, seed, i / params.subbands, i % params.subbands);
            (dep, keep_arrival.then_some(arr))
        })
        .collect();
    let mut departure = Vec::with_capacity(pairs.len());
    let mut arrival = keep_arrival.then(|| Vec::with_capacity(pairs.len()));
    for (d, a) in pairs {
        departure.push(d);
        if let (Some(v), Some(a)) = (arrival.as_mut(), a) {
            v.push(a);
        }
    }
    Ok(FieldBank {
        grid,
        subbands: params.subbands,
        departure,
        arrival,
    })
}

/// Square-lattice probe positions inside the closed disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeLattice {
    points: Vec<Point>,
}

impl ProbeLattice {
    pub fn from_points(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// All `(L_S n_x, L_S n_y)` with norm `<= R`, row-major by `n_y` then `n_x`.
pub fn probe_lattice(radius: f64, spacing: f64) -> Result<ProbeLattice> {
    if !(spacing.is_finite() && spacing > 0.0) {
        return Err(invalid("l_s_m", "lattice spacing must be > 0"));
    }
    let n = (radius / spacing).floor() as i64;
    let r2 = radius * radius * (1.0 + 1e-12);
    let mut points = Vec::new();
    for ny in -n..=n {
        for nx in -n..=n {
            let p = Point::new(nx as f64 * spacing, ny as f64 * spacing);
            if p.norm_sq() <= r2 {
                points.push(p);
            }
        }
    }
    Ok(ProbeLattice { points })
}

/// An immutable scenario: parameters, clusters and (for the frozen regime)
/// the angle-perturbation fields.
#[derive(Debug, Clone)]
pub struct Scenario {
    params: Params,
    clusters: Vec<Cluster>,
    fields: Option<FieldBank>,
}

impl Scenario {
    /// Generates clusters and fields from `params.seed`.
    pub fn generate(params: Params) -> Result<Self> {
        params.validate()?;
        let clusters = generate_clusters(params.seed, &params);
        Self::with_clusters(params, clusters)
    }

    /// Uses the given clusters; fields are regenerated from `params.seed`.
    pub fn with_clusters(params: Params, clusters: Vec<Cluster>) -> Result<Self> {
        params.validate()?;
        if clusters.is_empty() {
            return Err(invalid("L", "scenario needs at least one cluster"));
        }
        if clusters.iter().any(|c| c.gains.len() != params.subbands) {
            return Err(invalid("K", "every cluster needs one gain per subband"));
        }
        let fields = match params.alpha_regime {
            AlphaRegime::Frozen => Some(build_field_bank(params.seed, &params)?),
            AlphaRegime::Redraw => None,
        };
        Ok(Self {
            params,
            clusters,
            fields,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn fields(&self) -> Option<&FieldBank> {
        self.fields.as_ref()
    }

    pub fn lattice(&self) -> Result<ProbeLattice> {
        probe_lattice(self.params.radius, self.params.lattice_spacing)
    }

    /// Same scenario with a different path-loss normalization.
    pub fn with_path_loss(&self, a_pl: f64) -> Scenario {
        let mut s = self.clone();
        s.params.a_pl = a_pl;
        s
    }

    /// Same scenario with a different estimation/receiver noise.
    pub fn with_noise(&self, sigma: f64, sigma_v: f64) -> Scenario {
        let mut s = self.clone();
        s.params.sigma = sigma;
        s.params.sigma_v = sigma_v;
        s
    }
}
