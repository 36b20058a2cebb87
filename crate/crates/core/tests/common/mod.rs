//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::TAU;

use num_complex::Complex64;
use pfloc::channel::CMatrix;
use pfloc::codebook::FeedbackMode;
use pfloc::scenario::Params;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const O: usize = 4;

pub fn oracle_precoder(m: usize, n: usize, n_tx: usize) -> Vec<Complex64> {
    let size = (n_tx * O) as f64;
    let psi = Complex64::i().powu(n as u32);
    let beam: Vec<Complex64> = (0..n_tx)
        .map(|i| Complex64::from_polar(1.0 / (n_tx as f64).sqrt(), TAU * (i * m) as f64 / size))
        .collect();
    beam.iter().copied().chain(beam.iter().map(|b| b * psi)).collect()
}

pub fn oracle_rate(h: &[CMatrix], beams: &[(usize, usize)], n_tx: usize) -> f64 {
    h.iter()
        .zip(beams)
        .map(|(hk, &(m, n))| {
            let w = oracle_precoder(m, n, n_tx);
            let gain: f64 = (0..hk.nrows())
                .map(|r| (0..hk.ncols()).map(|c| hk[(r, c)] * w[c]).sum::<Complex64>().norm_sqr())
                .sum();
            (1.0 + gain).log2()
        })
        .sum()
}

pub fn random_channel(rng: &mut ChaCha8Rng, nbar: usize, n_tx: usize, k: usize) -> Vec<CMatrix> {
    (0..k)
        .map(|_| CMatrix::from_fn(nbar, 2 * n_tx, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect()
}

/// Every admissible beam/co-phasing assignment of `mode` as per-subband pairs.
pub fn all_assignments(mode: FeedbackMode, n_tx: usize, k: usize) -> Vec<Vec<(usize, usize)>> {
    let size = n_tx * O;
    let mut out = Vec::new();
    let per_subband = |choices: &[(usize, usize)]| -> Vec<Vec<(usize, usize)>> {
        let mut acc: Vec<Vec<(usize, usize)>> = vec![vec![]];
        for _ in 0..k {
            acc = acc
                .into_iter()
                .flat_map(|prefix| {
                    choices.iter().map(move |&c| {
                        let mut v = prefix.clone();
                        v.push(c);
                        v
                    })
                })
                .collect();
        }
        acc
    };
    match mode {
        FeedbackMode::Wideband => {
            for m in 0..size {
                let choices: Vec<_> = (0..4).map(|n| (m, n)).collect();
                out.extend(per_subband(&choices));
            }
        }
        FeedbackMode::Subband => {
            for g in 0..size / 2 {
                let choices: Vec<_> = (0..4).flat_map(|d| (0..4).map(move |n| ((2 * g + d) % size, n))).collect();
                out.extend(per_subband(&choices));
            }
        }
        FeedbackMode::PerSubband => {
            let choices: Vec<_> = (0..size).flat_map(|m| (0..4).map(move |n| (m, n))).collect();
            out.extend(per_subband(&choices));
        }
    }
    out
}

/// Total variation distance between two PMFs.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Element spacing over the subband-`k` wavelength.
pub fn ratio(params: &Params, k: usize) -> f64 {
    let kk = params.subbands as f64;
    let f = params.carrier_hz + params.subband_spacing_hz * (k as f64 - (kk - 1.0) / 2.0);
    params.d_over_lambda * f / params.carrier_hz
}

/// Beam histogram from the nearest-grid-point rule `m = round(N O r sin(phi))`.
pub fn sampled_beams(phi_prime: f64, k: usize, params: &Params, draws: usize, seed: u64) -> Vec<f64> {
    let size = params.codebook_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = vec![0.0; size];
    for _ in 0..draws {
        let phi = phi_prime + params.c_asd * rng.random_range(-1.0..1.0);
        let v = ratio(params, k) * phi.sin() * size as f64;
        h[(v.round() as i64).rem_euclid(size as i64) as usize] += 1.0 / draws as f64;
    }
    h
}
