//! Location-consistent multi-cluster channel synthesis.
//!
//! For UE position `p`, subband `k` and cluster `l` the path gain is
//! `sqrt(N) A_PL g_l(k) / tau_l(p) * exp(-j 2 pi k tau_l(p) / (K T_S))`, the
//! departure/arrival directions are the geometric angles perturbed by the
//! `alpha` fields, and the `Nbar x 2N` channel stacks the two polarizations
//! weighted by `cos mu` and `sin mu`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;

use crate::analysis::link_cluster;
use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::rng::{stream, Purpose};
use crate::scenario::{complex_gaussian, Cluster, Params, Scenario, C0};

pub type CMatrix = DMatrix<Complex64>;

/// `(|p - q| + |q|) / c0`.
pub fn path_delay(p: Point, q: Point) -> f64 {
    (p.dist(q) + q.norm()) / C0
}

/// `c0 / (f_c + delta_f (k - (K - 1) / 2))`, 0-based `k`.
pub fn subband_wavelength(k: usize, params: &Params) -> Result<f64> {
    if k >= params.subbands {
        return Err(Error::OutOfRange(format!("subband {k} >= K={}", params.subbands)));
    }
    let offset = k as f64 - (params.subbands as f64 - 1.0) / 2.0;
    Ok(C0 / (params.carrier_hz + params.subband_spacing_hz * offset))
}

/// Complex gain of the path through `cluster` on subband `k`.
pub fn cluster_gain(p: Point, cluster: &Cluster, k: usize, params: &Params) -> Result<Complex64> {
    let tau = path_delay(p, cluster.position);
    if !(tau > 0.0) {
        return Err(Error::Degenerate(
            "zero path delay (UE and cluster both at the gNB)".into(),
        ));
    }
    let g = cluster
        .gains
        .get(k)
        .ok_or_else(|| Error::OutOfRange(format!("cluster has no gain for subband {k}")))?;
    let phase = -TAU * k as f64 * tau / (params.subbands as f64 * params.sampling_period());
    Ok((params.n_tx as f64).sqrt() * params.a_pl * g / tau * Complex64::from_polar(1.0, phase))
}

/// Angle of departure towards cluster `q`.
pub fn departure_angle(q: Point, alpha: f64, c_asd: f64) -> f64 {
    q.angle() + c_asd * alpha
}

/// Angle of arrival at `p` from cluster `q`.
pub fn arrival_angle(p: Point, q: Point, alpha_bar: f64, c_asa: f64, orientation: f64) -> f64 {
    (q - p).angle() + c_asa * alpha_bar + orientation
}

/// Centered ULA steering vector with unit norm.
pub fn steering(count: usize, spacing_over_lambda: f64, phi: f64) -> Vec<Complex64> {
    let scale = 1.0 / (count as f64).sqrt();
    let center = (count as f64 - 1.0) / 2.0;
    let step = TAU * spacing_over_lambda * phi.sin();
    let rot = Complex64::from_polar(1.0, step);
    let mut v = Complex64::from_polar(scale, -step * center);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        out.push(v);
        v *= rot;
    }
    out
}

/// Element spacing over the subband-`k` wavelength for the given ratio at
/// the carrier.
fn spacing_at(ratio_at_carrier: f64, k: usize, params: &Params) -> Result<f64> {
    let lambda_c = C0 / params.carrier_hz;
    Ok(ratio_at_carrier * lambda_c / subband_wavelength(k, params)?)
}

pub fn gnb_steering(phi: f64, k: usize, params: &Params) -> Result<Vec<Complex64>> {
    Ok(steering(params.n_tx, spacing_at(params.d_over_lambda, k, params)?, phi))
}

pub fn ue_steering(phi_bar: f64, k: usize, params: &Params) -> Result<Vec<Complex64>> {
    Ok(steering(params.n_rx, spacing_at(params.dbar_over_lambda, k, params)?, phi_bar))
}

/// Per-observation UE state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeState {
    /// Polarization co-phasing angle, rad.
    pub mu: f64,
    /// Orientation in the plane, rad.
    pub orientation: f64,
}

/// Angle perturbations of one cluster on one subband.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Perturbation {
    pub alpha: f64,
    pub alpha_bar: f64,
}

/// `H(p, k)` summed over `clusters` (indices into the scenario). `perturb`
/// is indexed by cluster.
pub fn assemble_channel(
    p: Point,
    scenario: &Scenario,
    k: usize,
    ue: UeState,
    perturb: &[Perturbation],
    clusters: &[usize],
) -> Result<CMatrix> {
    let params = scenario.params();
    let (n, nbar) = (params.n_tx, params.n_rx);
    let mut h = CMatrix::zeros(nbar, 2 * n);
    let (c, s) = (ue.mu.cos(), ue.mu.sin());
    for &l in clusters {
        let cl = &scenario.clusters()[l];
        let pert = perturb.get(l).copied().unwrap_or_default();
        let gamma = cluster_gain(p, cl, k, params)?;
        let a = gnb_steering(departure_angle(cl.position, pert.alpha, params.c_asd), k, params)?;
        let a_bar = ue_steering(
            arrival_angle(p, cl.position, pert.alpha_bar, params.c_asa, ue.orientation),
            k,
            params,
        )?;
        for (r, ab) in a_bar.iter().enumerate() {
            let row = gamma * ab;
            for (i, ai) in a.iter().enumerate() {
                let t = row * ai.conj();
                h[(r, i)] += t * c;
                h[(r, n + i)] += t * s;
            }
        }
    }
    Ok(h)
}

/// Channel matrices for all subbands of one observation.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub subbands: Vec<CMatrix>,
    pub ue: UeState,
}

/// Noisy channel estimate.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    pub subbands: Vec<CMatrix>,
    pub sigma: f64,
}

/// `H + V` with `V` entries `CN(0, sigma^2)`.
pub fn estimate_channel<R: Rng + ?Sized>(
    h: &ChannelRealization,
    sigma: f64,
    rng: &mut R,
) -> Result<ChannelEstimate> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(invalid("sigma", "noise std must be >= 0"));
    }
    let subbands = h
        .subbands
        .iter()
        .map(|m| {
            if sigma == 0.0 {
                m.clone()
            } else {
                m.map(|v| v + complex_gaussian(rng) * sigma)
            }
        })
        .collect();
    Ok(ChannelEstimate { subbands, sigma })
}

/// How observations are drawn on top of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ObservationModel {
    /// Fixed co-phasing angle; random `U[0, 2 pi)` when `None`.
    pub mu: Option<f64>,
    /// Fixed orientation; random `U[0, 2 pi)` when `None`.
    pub orientation: Option<f64>,
    /// Keep only the strongest (linked) cluster on each subband.
    pub strongest_only: bool,
}

/// Draws one channel observation at `p`.
///
/// With frozen fields the perturbations are read at `p`; otherwise they are
/// fresh `U(-1, 1)` draws from `rng`.
pub fn realize<R: Rng + ?Sized>(
    scenario: &Scenario,
    p: Point,
    model: &ObservationModel,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let params = scenario.params();
    let ue = UeState {
        mu: model.mu.unwrap_or_else(|| rng.random::<f64>() * TAU),
        orientation: model.orientation.unwrap_or_else(|| rng.random::<f64>() * TAU),
    };
    let nclusters = scenario.clusters().len();
    let all: Vec<usize> = (0..nclusters).collect();
    let stencil = scenario.fields().map(|f| f.grid().stencil(p));
    let mut perturb = vec![Perturbation::default(); nclusters];
    let mut subbands = Vec::with_capacity(params.subbands);
    for k in 0..params.subbands {
        let chosen: Vec<usize> = if model.strongest_only {
            vec![link_cluster(p, scenario.clusters(), k)?.index]
        } else {
            all.clone()
        };
        for &l in &chosen {
            perturb[l] = match (scenario.fields(), &stencil) {
                (Some(bank), Some(st)) => Perturbation {
                    alpha: bank.departure(l, k).eval(st),
                    alpha_bar: bank.arrival(l, k).map_or(0.0, |f| f.eval(st)),
                },
                _ => Perturbation {
                    alpha: rng.random_range(-1.0..=1.0),
                    alpha_bar: if params.n_rx > 1 {
                        rng.random_range(-1.0..=1.0)
                    } else {
                        0.0
                    },
                },
            };
        }
        subbands.push(assemble_channel(p, scenario, k, ue, &perturb, &chosen)?);
    }
    Ok(ChannelRealization { subbands, ue })
}

/// Mean per-entry channel power on the cell border, from `draws` random
/// observations at evenly spaced border points.
pub fn border_power(scenario: &Scenario, seed: u64, draws: usize) -> Result<f64> {
    let params = scenario.params();
    let model = ObservationModel::default();
    let points = 64;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..points {
        let th = TAU * i as f64 / points as f64;
        let p = Point::new(params.radius * th.cos(), params.radius * th.sin());
        let mut rng = stream(seed, Purpose::Calibration, i as u64, 0);
        for _ in 0..draws.max(1) {
            let h = realize(scenario, p, &model, &mut rng)?;
            for m in &h.subbands {
                acc += m.iter().map(|v| v.norm_sqr()).sum::<f64>();
                count += m.len();
            }
        }
    }
    Ok(acc / count as f64)
}

/// `A_PL` such that the border SNR `E|H_ij|^2 / noise_std^2` hits the target.
pub fn calibrate_apl(scenario: &Scenario, noise_std: f64, target_snr_db: f64) -> Result<f64> {
    if !target_snr_db.is_finite() {
        return Err(invalid("snr_db", "target SNR must be finite"));
    }
    if !(noise_std > 0.0) {
        return Err(invalid("sigma", "calibration needs a positive noise std"));
    }
    let unit = scenario.with_path_loss(1.0);
    let p1 = border_power(&unit, scenario.params().seed, 4)?;
    let target = 10f64.powf(target_snr_db / 10.0);
    Ok((target * noise_std * noise_std / p1).sqrt())
}

/// Achieved border SNR in dB; infinite for a noiseless estimate.
pub fn border_snr_db(scenario: &Scenario, noise_std: f64, seed: u64) -> Result<f64> {
    if noise_std == 0.0 {
        return Ok(f64::INFINITY);
    }
    let p = border_power(scenario, seed, 4)?;
    Ok(10.0 * (p / (noise_std * noise_std)).log10())
}
