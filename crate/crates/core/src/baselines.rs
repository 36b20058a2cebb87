//! Reference attacks: cell identity (CID), time-of-arrival trilateration
//! (ToA) and channel fingerprint matching (RFPM).

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{assemble_channel, estimate_channel, realize, CMatrix, ChannelRealization, ObservationModel, Perturbation, UeState};
use crate::error::{invalid, Error, Result};
use crate::geometry::{uniform_in_disk, wrap_angle, Point};
use crate::scenario::{Cluster, ProbeLattice, Scenario, C0};

/// CID estimate: the cell center.
pub fn cid_estimate() -> Point {
    Point::ORIGIN
}

/// Minimum angle, at every receiver, between the directions to the other two.
pub const MIN_RECEIVER_ANGLE: f64 = 0.01 * PI;

const PLACEMENT_ATTEMPTS: usize = 10_000;

/// Three adversarial receivers with their measured times of arrival.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToaSetup {
    pub receivers: [Point; 3],
    /// Seconds; zero until measured.
    pub toa: [f64; 3],
}

/// Whether every receiver sees the other two at least `MIN_RECEIVER_ANGLE` apart.
pub fn receivers_well_spread(r: &[Point; 3]) -> bool {
    (0..3).all(|i| {
        let (a, b) = (r[(i + 1) % 3] - r[i], r[(i + 2) % 3] - r[i]);
        if a.norm() == 0.0 || b.norm() == 0.0 {
            return false;
        }
        wrap_angle(a.angle() - b.angle()).abs() >= MIN_RECEIVER_ANGLE
    })
}

/// Rejection-samples three receivers uniform on the disk.
pub fn place_receivers<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> Result<ToaSetup> {
    for _ in 0..PLACEMENT_ATTEMPTS {
        let r = [
            uniform_in_disk(rng, radius),
            uniform_in_disk(rng, radius),
            uniform_in_disk(rng, radius),
        ];
        if receivers_well_spread(&r) {
            return Ok(ToaSetup {
                receivers: r,
                toa: [0.0; 3],
            });
        }
    }
    Err(Error::Degenerate(format!(
        "no admissible receiver triple in {PLACEMENT_ATTEMPTS} draws"
    )))
}

/// Shortest UE-cluster-receiver delay for each receiver.
pub fn toa_measure(p: Point, receivers: &[Point; 3], clusters: &[Cluster]) -> Result<[f64; 3]> {
    if clusters.is_empty() {
        return Err(invalid("L", "at least one cluster required"));
    }
    Ok(receivers.map(|r| {
        clusters
            .iter()
            .map(|c| p.dist(c.position) + c.position.dist(r))
            .fold(f64::INFINITY, f64::min)
            / C0
    }))
}

/// Range-difference linear least squares with receiver 0 as reference,
/// clamped to the disk; the cell center when the system is singular.
pub fn toa_localize(setup: &ToaSetup, radius: f64) -> Point {
    let r = setup.receivers;
    let d = setup.toa.map(|t| t * C0);
    let row = |j: usize| {
        let v = r[j] - r[0];
        (2.0 * v.x, 2.0 * v.y, d[0] * d[0] - d[j] * d[j] + r[j].norm_sq() - r[0].norm_sq())
    };
    let (a1, b1, c1) = row(1);
    let (a2, b2, c2) = row(2);
    let a = Matrix2::new(a1, b1, a2, b2);
    let scale = a.abs().max().max(f64::MIN_POSITIVE);
    if a.determinant().abs() <= 1e-12 * scale * scale {
        return cid_estimate();
    }
    match a.lu().solve(&Vector2::new(c1, c2)) {
        Some(x) if x.iter().all(|v| v.is_finite()) => Point::new(x[0], x[1]).clamp_to_disk(radius),
        _ => cid_estimate(),
    }
}

/// Noiseless fingerprints on the probe lattice, `mu = pi/4`, zero orientation.
#[derive(Debug, Clone)]
pub struct FingerprintDb {
    positions: Vec<Point>,
    /// Per position, one matrix per subband.
    channels: Vec<Vec<CMatrix>>,
}

impl FingerprintDb {
    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn channels(&self, s: usize) -> &[CMatrix] {
        &self.channels[s]
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn from_entries(positions: Vec<Point>, channels: Vec<Vec<CMatrix>>) -> Result<Self> {
        if positions.is_empty() || positions.len() != channels.len() {
            return Err(invalid("lattice", "fingerprint database is empty or inconsistent"));
        }
        Ok(Self { positions, channels })
    }
}

/// Reference state used for database entries.
pub const DB_STATE: UeState = UeState {
    mu: PI / 4.0,
    orientation: 0.0,
};

/// Noiseless channel at `p` with the scenario's frozen perturbations (or
/// none in the redraw regime).
fn reference_channel(scenario: &Scenario, p: Point) -> Result<Vec<CMatrix>> {
    let params = scenario.params();
    let all: Vec<usize> = (0..scenario.clusters().len()).collect();
    let stencil = scenario.fields().map(|f| f.grid().stencil(p));
    (0..params.subbands)
        .map(|k| {
            let perturb: Vec<Perturbation> = match (scenario.fields(), &stencil) {
                (Some(bank), Some(st)) => all
                    .iter()
                    .map(|&l| Perturbation {
                        alpha: bank.departure(l, k).eval(st),
                        alpha_bar: bank.arrival(l, k).map_or(0.0, |f| f.eval(st)),
                    })
                    .collect(),
                _ => vec![Perturbation::default(); all.len()],
            };
            assemble_channel(p, scenario, k, DB_STATE, &perturb, &all)
        })
        .collect()
}

pub fn rfpm_build_db(scenario: &Scenario, lattice: &ProbeLattice) -> Result<FingerprintDb> {
    let channels = lattice
        .points()
        .par_iter()
        .map(|&p| reference_channel(scenario, p))
        .collect::<Result<Vec<_>>>()?;
    FingerprintDb::from_entries(lattice.points().to_vec(), channels)
}

/// `|<h, h'>|^2 / (|h|^2 |h'|^2)`, zero when either side vanishes.
pub fn trrs(h: &CMatrix, g: &CMatrix) -> f64 {
    let inner: Complex64 = h.iter().zip(g.iter()).map(|(a, b)| a.conj() * b).sum();
    let den = h.norm_squared() * g.norm_squared();
    if den > 0.0 {
        inner.norm_sqr() / den
    } else {
        0.0
    }
}

/// Subband-averaged TRRS.
pub fn trrs_score(observed: &[CMatrix], stored: &[CMatrix]) -> f64 {
    observed.iter().zip(stored).map(|(h, g)| trrs(h, g)).sum::<f64>() / observed.len() as f64
}

/// Best-matching database position and its score; smallest index on ties.
pub fn rfpm_localize(observed: &[CMatrix], db: &FingerprintDb) -> Result<(Point, f64)> {
    if db.is_empty() {
        return Err(invalid("lattice", "empty fingerprint database"));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (s, stored) in db.channels.iter().enumerate() {
        let score = trrs_score(observed, stored);
        if score > best.1 {
            best = (s, score);
        }
    }
    Ok((db.positions[best.0], best.1))
}

/// Observation used by the RFPM attacker: a fresh realization plus
/// estimation noise.
pub fn rfpm_observe<R: Rng + ?Sized>(scenario: &Scenario, p: Point, rng: &mut R) -> Result<ChannelRealization> {
    let h = realize(scenario, p, &ObservationModel::default(), rng)?;
    let est = estimate_channel(&h, scenario.params().sigma, rng)?;
    Ok(ChannelRealization {
        subbands: est.subbands,
        ue: h.ue,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::scenario::{AlphaRegime, Params};

    fn on_segment(p: Point, r: Point, t: f64) -> Cluster {
        Cluster {
            position: p + (r - p) * t,
            gains: vec![Complex64::new(1.0, 0.0)],
        }
    }

    #[test]
    fn placement_rejects_collinear_and_accepts_most() {
        let line = [Point::new(-5.0, 0.0), Point::new(0.0, 0.0), Point::new(5.0, 0.0)];
        assert!(!receivers_well_spread(&line));
        let tri = [Point::new(10.0, 0.0), Point::new(-5.0, 8.66), Point::new(-5.0, -8.66)];
        assert!(receivers_well_spread(&tri));
        let mut rng = stream(1, Purpose::Receivers, 0, 0);
        let ok = (0..10_000)
            .filter(|_| {
                let r = [0; 3].map(|_| uniform_in_disk(&mut rng, 25.0));
                receivers_well_spread(&r)
            })
            .count();
        assert!(ok as f64 / 10_000.0 > 0.95);
        for _ in 0..100 {
            assert!(receivers_well_spread(&place_receivers(&mut rng, 25.0).unwrap().receivers));
        }
    }

    #[test]
    fn toa_examples() {
        let p = Point::new(3.0, -4.0);
        let rx = [Point::new(10.0, 0.0), Point::new(-5.0, 8.66), Point::new(-5.0, -8.66)];
        let clusters: Vec<Cluster> = rx.iter().map(|&r| on_segment(p, r, 0.3)).collect();
        let toa = toa_measure(p, &rx, &clusters).unwrap();
        for (t, r) in toa.iter().zip(&rx) {
            assert!((t * C0 - p.dist(*r)).abs() < 1e-9);
        }
        let est = toa_localize(&ToaSetup { receivers: rx, toa }, 25.0);
        assert!(est.dist(p) < 1e-9);

        let mut rng = stream(2, Purpose::Test, 0, 0);
        for _ in 0..50 {
            let cl: Vec<Cluster> = (0..5)
                .map(|_| Cluster { position: uniform_in_disk(&mut rng, 25.0), gains: vec![] })
                .collect();
            let q = uniform_in_disk(&mut rng, 25.0);
            let t = toa_measure(q, &rx, &cl).unwrap();
            for (i, r) in rx.iter().enumerate() {
                let brute = cl.iter().map(|c| q.dist(c.position) + c.position.dist(*r)).fold(f64::MAX, f64::min);
                assert_eq!(t[i], brute / C0);
                assert!(t[i] * C0 >= q.dist(*r) - 1e-12);
            }
        }
    }

    #[test]
    fn toa_symmetric_ranges_give_center() {
        let r = 10.0;
        let rx = [0.0, 2.0 * PI / 3.0, 4.0 * PI / 3.0].map(|a: f64| Point::new(r * a.cos(), r * a.sin()));
        let est = toa_localize(&ToaSetup { receivers: rx, toa: [r / C0; 3] }, 25.0);
        assert!(est.norm() < 1e-9);
        let line = [Point::new(-5.0, 0.0), Point::new(0.0, 0.0), Point::new(5.0, 0.0)];
        assert_eq!(toa_localize(&ToaSetup { receivers: line, toa: [1e-8; 3] }, 25.0), Point::ORIGIN);
    }

    #[test]
    fn trrs_properties() {
        let mut rng = stream(3, Purpose::Test, 0, 0);
        let h = CMatrix::from_fn(1, 4, |_, _| crate::scenario::complex_gaussian(&mut rng));
        let g = CMatrix::from_fn(1, 4, |_, _| crate::scenario::complex_gaussian(&mut rng));
        assert!((trrs(&h, &h) - 1.0).abs() < 1e-12);
        let rot = h.map(|v| v * Complex64::from_polar(2.5, 1.1));
        assert!((trrs(&h, &rot) - 1.0).abs() < 1e-12);
        let s = trrs(&h, &g);
        assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn rfpm_exact_entry() {
        let params = Params {
            n_tx: 2,
            subbands: 2,
            clusters: 10,
            radius: 5.0,
            alpha_regime: AlphaRegime::Redraw,
            ..Params::default()
        };
        let s = Scenario::generate(params).unwrap();
        let lattice = s.lattice().unwrap();
        let db = rfpm_build_db(&s, &lattice).unwrap();
        let target = 17;
        let stored = db.channels(target).to_vec();
        let (p, score) = rfpm_localize(&stored, &db).unwrap();
        assert_eq!(p, lattice.points()[target]);
        assert!((score - 1.0).abs() < 1e-12);
        let rotated: Vec<CMatrix> = stored.iter().map(|m| m.map(|v| v * Complex64::from_polar(1.0, 0.4))).collect();
        assert_eq!(rfpm_localize(&rotated, &db).unwrap().0, lattice.points()[target]);
        assert!(FingerprintDb::from_entries(vec![], vec![]).is_err());
    }
}
