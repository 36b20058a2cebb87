//! Closed-form feedback statistics and the analytical MSE of the attack
//! under the simplified model: one receive antenna, feedback mode 3, perfect
//! estimation, `mu = pi/4`, independent `alpha` per observation, and the
//! channel on each subband reduced to its strongest cluster.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;

use crate::channel::subband_wavelength;
use crate::error::{invalid, Error, Result};
use crate::geometry::Point;
use crate::rng::derive_seed;
use crate::scenario::{generate_clusters, AlphaRegime, Cluster, Params, C0};

/// Cluster a UE is linked to on one subband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkedCluster {
    pub index: usize,
    /// `zeta = |g(k)|^2 / (|p - q| + |q|)^2`.
    pub score: f64,
}

/// `argmax_l zeta_l(p, k)`, smallest index on ties.
pub fn link_cluster(p: Point, clusters: &[Cluster], k: usize) -> Result<LinkedCluster> {
    if clusters.is_empty() {
        return Err(invalid("L", "at least one cluster required"));
    }
    let mut best = LinkedCluster {
        index: 0,
        score: f64::NEG_INFINITY,
    };
    for (l, c) in clusters.iter().enumerate() {
        let xi = c
            .gains
            .get(k)
            .ok_or_else(|| Error::OutOfRange(format!("cluster has no gain for subband {k}")))?
            .norm_sqr();
        let len = p.dist(c.position) + c.position.norm();
        let score = xi / (len * len);
        if score > best.score {
            best = LinkedCluster { index: l, score };
        }
    }
    Ok(best)
}

/// Inputs of the analytical model.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Geometry and codebook; only `N, O, K, L, R, c_ASD, d/lambda, f_c,
    /// delta_f` are read.
    pub params: Params,
    /// Outer Monte Carlo draws of cluster positions and gains.
    pub cluster_draws: usize,
    /// Midpoint-grid nodes used for the spatial integrals.
    pub position_samples: usize,
    /// Fit exponent of the asymptotic RMSE.
    pub eta: f64,
    /// Largest admissible `(N O)^K`.
    pub max_pmf_entries: u128,
    pub seed: u64,
}

impl AnalysisConfig {
    pub fn new(params: Params) -> Self {
        let seed = params.seed;
        Self {
            params,
            cluster_draws: 200,
            position_samples: 2000,
            eta: 9.0,
            max_pmf_entries: 1 << 24,
            seed,
        }
    }

    fn pmf_entries(&self) -> Result<usize> {
        let size = self.params.codebook_size() as u128;
        let required = size.checked_pow(self.params.subbands as u32).unwrap_or(u128::MAX);
        if required > self.max_pmf_entries {
            return Err(Error::Budget {
                what: "joint feedback PMF entries".into(),
                required,
                limit: self.max_pmf_entries,
            });
        }
        Ok(required as usize)
    }
}

/// Probability of each beam index on subband `k` when the departure angle is
/// `phi' + c_ASD alpha`, `alpha ~ U(-1, 1)`.
pub fn beam_probabilities(phi_prime: f64, k: usize, params: &Params) -> Result<Vec<f64>> {
    let size = params.codebook_size();
    let ratio = params.d_over_lambda * (C0 / params.carrier_hz) / subband_wavelength(k, params)?;
    let c = params.c_asd;
    let mut x = vec![0.0; size];
    if c == 0.0 {
        let v = ratio * phi_prime.sin() * size as f64;
        x[((v + 0.5).floor() as i64).rem_euclid(size as i64) as usize] = 1.0;
        return Ok(x);
    }
    let tau_lo = ((phi_prime - c + PI / 2.0) / PI).floor() as i64;
    let tau_hi = ((phi_prime + c + PI / 2.0) / PI).floor() as i64;
    let nf = size as f64;
    for wrap in 0..2 {
        for (i, xi) in x.iter_mut().enumerate() {
            let lo = ((i as f64 - 0.5) / nf - wrap as f64) / ratio;
            let hi = ((i as f64 + 0.5) / nf - wrap as f64) / ratio;
            let (s1, s2) = (lo.clamp(-1.0, 1.0), hi.clamp(-1.0, 1.0));
            if s1 >= s2 {
                continue;
            }
            let (a1, a2) = (s1.asin(), s2.asin());
            for tau in tau_lo..=tau_hi {
                let shift = tau as f64 * PI;
                // sin is increasing on even half-periods and decreasing on odd ones
                let (f1, f2) = if tau % 2 == 0 {
                    (a1 + shift, a2 + shift)
                } else {
                    (shift - a2, shift - a1)
                };
                let t1 = ((f1 - phi_prime) / c).clamp(-1.0, 1.0);
                let t2 = ((f2 - phi_prime) / c).clamp(-1.0, 1.0);
                *xi += (t2 - t1).max(0.0) / 2.0;
            }
        }
    }
    let total: f64 = x.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Normalization(format!(
            "beam probabilities sum to {total} (phi' = {phi_prime}, k = {k})"
        )));
    }
    Ok(x)
}

/// `X(p, k)`: beam probabilities of subband `k` for a UE linked at `p`.
pub fn feedback_probabilities(p: Point, clusters: &[Cluster], k: usize, config: &AnalysisConfig) -> Result<Vec<f64>> {
    let linked = link_cluster(p, clusters, k)?;
    beam_probabilities(clusters[linked.index].position.angle(), k, &config.params)
}

/// `B(b) = sum_k (N O)^k b_k` with 0-based `k`.
pub fn pmf_index(b: &[u32], codebook_size: usize) -> u128 {
    b.iter()
        .rev()
        .fold(0u128, |acc, &v| acc * codebook_size as u128 + v as u128)
}

/// Dense `Y(p)` of length `(N O)^K`, `Y[B(b)] = prod_k X_{b_k}(p, k)`.
pub fn joint_pmf(p: Point, clusters: &[Cluster], config: &AnalysisConfig) -> Result<Vec<f64>> {
    let entries = config.pmf_entries()?;
    let size = config.params.codebook_size();
    let mut y = vec![1.0];
    for k in 0..config.params.subbands {
        let x = feedback_probabilities(p, clusters, k, config)?;
        let stride = y.len();
        let mut next = vec![0.0; stride * size];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, &yj) in y.iter().enumerate() {
                    next[i * stride + j] = xi * yj;
                }
            }
        }
        y = next;
    }
    debug_assert_eq!(y.len(), entries);
    Ok(y)
}

/// Midpoint-grid nodes inside the disk, about `count` of them.
pub fn disk_quadrature(radius: f64, count: usize) -> Vec<Point> {
    let h = (PI * radius * radius / count.max(1) as f64).sqrt();
    let n = (radius / h).ceil() as i64;
    let mut pts = Vec::new();
    for iy in -n..n {
        for ix in -n..n {
            let p = Point::new((ix as f64 + 0.5) * h, (iy as f64 + 0.5) * h);
            if p.norm() <= radius {
                pts.push(p);
            }
        }
    }
    pts
}

/// MSE of the ideal attacker for the given clusters and gains, with the
/// spatial integrals evaluated on `points` (uniform weights).
pub fn conditional_mse(clusters: &[Cluster], points: &[Point], config: &AnalysisConfig) -> Result<f64> {
    let params = &config.params;
    let kk = params.subbands;
    if points.is_empty() {
        return Err(invalid("position_samples", "no quadrature nodes"));
    }
    let w = 1.0 / points.len() as f64;
    let second_moment: f64 = points.iter().map(|p| p.norm_sq()).sum::<f64>() * w;
    if kk == 0 {
        let cx: f64 = points.iter().map(|p| p.x).sum::<f64>() * w;
        let cy: f64 = points.iter().map(|p| p.y).sum::<f64>() * w;
        return Ok(second_moment - cx * cx - cy * cy);
    }
    let entries = config.pmf_entries()?;
    let size = params.codebook_size();

    // Y depends on p only through the linked cluster of each subband.
    let mut regions: BTreeMap<Vec<u32>, (f64, f64, f64)> = BTreeMap::new();
    for &p in points {
        let key = (0..kk)
            .map(|k| link_cluster(p, clusters, k).map(|l| l.index as u32))
            .collect::<Result<Vec<u32>>>()?;
        let e = regions.entry(key).or_insert((0.0, 0.0, 0.0));
        e.0 += w;
        e.1 += p.x * w;
        e.2 += p.y * w;
    }

    let sparse_x = clusters
        .iter()
        .flat_map(|c| (0..kk).map(move |k| (c, k)))
        .map(|(c, k)| {
            let x = beam_probabilities(c.position.angle(), k, params)?;
            Ok(x.into_iter().enumerate().filter(|&(_, v)| v > 0.0).collect())
        })
        .collect::<Result<Vec<Vec<(usize, f64)>>>>()?;
    let mut s0 = vec![0.0; entries];
    let mut s1x = vec![0.0; entries];
    let mut s1y = vec![0.0; entries];
    let mut strides = vec![1usize; kk];
    for k in 1..kk {
        strides[k] = strides[k - 1] * size;
    }
    for (links, &(m0, mx, my)) in &regions {
        let sparse: Vec<&Vec<(usize, f64)>> = links
            .iter()
            .enumerate()
            .map(|(k, &l)| &sparse_x[l as usize * kk + k])
            .collect();
        // odometer over the nonzero entries of each subband
        let mut pos = vec![0usize; kk];
        loop {
            let mut idx = 0;
            let mut y = 1.0;
            for k in 0..kk {
                let (i, v) = sparse[k][pos[k]];
                idx += i * strides[k];
                y *= v;
            }
            s0[idx] += y * m0;
            s1x[idx] += y * mx;
            s1y[idx] += y * my;
            let mut k = 0;
            while k < kk {
                pos[k] += 1;
                if pos[k] < sparse[k].len() {
                    break;
                }
                pos[k] = 0;
                k += 1;
            }
            if k == kk {
                break;
            }
        }
    }
    let explained: f64 = s0
        .iter()
        .zip(s1x.iter().zip(&s1y))
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, (&bx, &by))| (bx * bx + by * by) / a)
        .sum();
    Ok((second_moment - explained).max(0.0))
}

/// Analytical MSE averaged over cluster configurations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticalMse {
    pub mse: f64,
    /// Standard error of `mse` over the outer draws.
    pub mse_stderr: f64,
    pub draws: usize,
}

impl AnalyticalMse {
    pub fn rmse(&self) -> f64 {
        self.mse.sqrt()
    }

    /// Delta-method standard error of the RMSE.
    pub fn rmse_stderr(&self) -> f64 {
        if self.mse > 0.0 {
            self.mse_stderr / (2.0 * self.rmse())
        } else {
            0.0
        }
    }
}

/// Expected MSE over uniform cluster positions and `Exp(1)` gains.
pub fn analytical_mse(config: &AnalysisConfig) -> Result<AnalyticalMse> {
    let r = config.params.radius;
    if config.params.subbands == 0 {
        return Ok(AnalyticalMse {
            mse: r * r / 2.0,
            mse_stderr: 0.0,
            draws: 0,
        });
    }
    if config.cluster_draws == 0 {
        return Err(invalid("cluster_draws", "at least one draw required"));
    }
    config.pmf_entries()?;
    let points = disk_quadrature(r, config.position_samples);
    let mut params = config.params.clone();
    params.alpha_regime = AlphaRegime::Redraw;
    let values = (0..config.cluster_draws)
        .into_par_iter()
        .map(|d| {
            let clusters = generate_clusters(derive_seed(config.seed, crate::rng::Purpose::Analysis, d as u64), &params);
            conditional_mse(&clusters, &points, config)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(AnalyticalMse {
        mse: mean,
        mse_stderr: (var / n).sqrt(),
        draws: values.len(),
    })
}

/// RMSE without feedback: `R / sqrt(2)`.
pub fn rmse_zero(radius: f64) -> f64 {
    radius * FRAC_1_SQRT_2
}

/// RMSE when every cluster Voronoi cell is resolved: `R / sqrt(2 L)`.
pub fn rmse_infinity(radius: f64, clusters: usize) -> f64 {
    radius / (2.0 * clusters as f64).sqrt()
}

/// `R / sqrt(2L) + (1 - 1/sqrt(L)) (R / sqrt(2)) (N O)^(-K / eta)`.
pub fn rmse_fit(radius: f64, clusters: usize, n_tx: usize, oversampling: usize, subbands: usize, eta: f64) -> f64 {
    let l = clusters as f64;
    let decay = ((n_tx * oversampling) as f64).powf(-(subbands as f64) / eta);
    rmse_infinity(radius, clusters) + (1.0 - 1.0 / l.sqrt()) * rmse_zero(radius) * decay
}
