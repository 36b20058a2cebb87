//! Type-I single-panel codebook, rate evaluation and precoder selection.

mod feedback;
mod mitigation;

pub use feedback::{
    decode_feedback, encode_feedback, localization_bits, localization_hex, Feedback, FeedbackLayout,
};
pub use mitigation::{ranked_candidates, select_mitigated};

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::CMatrix;
use crate::error::{invalid, Error, Result};

/// Polarization co-phasing factors `exp(j 2 pi n / 4)`.
pub const COPHASE: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// Feedback mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeedbackMode {
    /// One beam for all subbands, per-subband co-phasing.
    Wideband = 1,
    /// Shared beam group, per-subband beam offset and co-phasing.
    Subband = 2,
    /// Independent beam and co-phasing per subband.
    PerSubband = 3,
}

impl FeedbackMode {
    pub fn number(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for FeedbackMode {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(FeedbackMode::Wideband),
            2 => Ok(FeedbackMode::Subband),
            3 => Ok(FeedbackMode::PerSubband),
            _ => Err(invalid("mode", format!("feedback mode must be 1, 2 or 3, got {v}"))),
        }
    }
}

/// `w_{m,n}` with its indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    pub m: usize,
    pub n: usize,
    pub w: Vec<Complex64>,
}

/// DFT beams `w~_m`, `m = 0..N O`.
#[derive(Debug, Clone)]
pub struct Codebook {
    n_tx: usize,
    oversampling: usize,
    beams: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn new(n_tx: usize, oversampling: usize) -> Result<Self> {
        if n_tx == 0 || oversampling == 0 {
            return Err(invalid("N", "codebook needs N >= 1 and O >= 1"));
        }
        let size = n_tx * oversampling;
        let beams = (0..size)
            .map(|m| {
                (0..n_tx)
                    .map(|i| Complex64::from_polar(1.0, TAU * (i * m % size) as f64 / size as f64))
                    .collect()
            })
            .collect();
        Ok(Self {
            n_tx,
            oversampling,
            beams,
        })
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn oversampling(&self) -> usize {
        self.oversampling
    }

    /// `N O`.
    pub fn size(&self) -> usize {
        self.beams.len()
    }

    /// `w~_m`; indices wrap modulo `N O` since the beam is periodic in `m`.
    pub fn beam(&self, m: usize) -> &[Complex64] {
        &self.beams[m % self.beams.len()]
    }

    pub fn precoder(&self, m: usize, n: usize) -> Result<Precoder> {
        if m >= self.size() || n >= 4 {
            return Err(Error::OutOfRange(format!(
                "precoder ({m}, {n}) outside {} x 4",
                self.size()
            )));
        }
        let scale = 1.0 / (self.n_tx as f64).sqrt();
        let b = self.beam(m);
        let w = b
            .iter()
            .map(|v| v * scale)
            .chain(b.iter().map(|v| v * COPHASE[n] * scale))
            .collect();
        Ok(Precoder { m, n, w })
    }
}

/// `w_{m,n}` for an `N x O` codebook.
pub fn codebook_vector(m: usize, n: usize, n_tx: usize, oversampling: usize) -> Result<Precoder> {
    Codebook::new(n_tx, oversampling)?.precoder(m, n)
}

fn check_sigma_v(sigma_v: f64) -> Result<()> {
    if sigma_v > 0.0 && sigma_v.is_finite() {
        Ok(())
    } else {
        Err(invalid("sigma_v", "receiver noise std must be > 0"))
    }
}

/// Rate `sum_k log2(1 + |H(k) w(k)|^2 / sigma_v^2)`.
pub fn spectral_efficiency(h: &[CMatrix], w: &[Vec<Complex64>], sigma_v: f64) -> Result<f64> {
    check_sigma_v(sigma_v)?;
    if h.len() != w.len() {
        return Err(invalid("K", "one precoder per subband required"));
    }
    let mut total = 0.0;
    for (hk, wk) in h.iter().zip(w) {
        if hk.ncols() != wk.len() {
            return Err(invalid("N", "precoder length does not match channel"));
        }
        let hw = hk * nalgebra::DVector::from_column_slice(wk);
        total += (1.0 + hw.norm_squared() / (sigma_v * sigma_v)).log2();
    }
    Ok(total)
}

/// Rate through `log2 det(I + H w w^H H^H / sigma_v^2)`.
pub fn spectral_efficiency_det(h: &[CMatrix], w: &[Vec<Complex64>], sigma_v: f64) -> Result<f64> {
    check_sigma_v(sigma_v)?;
    if h.len() != w.len() {
        return Err(invalid("K", "one precoder per subband required"));
    }
    let mut total = 0.0;
    for (hk, wk) in h.iter().zip(w) {
        if hk.ncols() != wk.len() {
            return Err(invalid("N", "precoder length does not match channel"));
        }
        let hw = hk * nalgebra::DVector::from_column_slice(wk);
        let m = DMatrix::identity(hk.nrows(), hk.nrows())
            + &hw * hw.adjoint() / Complex64::new(sigma_v * sigma_v, 0.0);
        total += m.determinant().re.log2();
    }
    Ok(total)
}

/// Per-subband rate of every `(beam, co-phasing)` pair.
#[derive(Debug, Clone)]
pub struct RateTable {
    beams: usize,
    subbands: usize,
    rates: Vec<[f64; 4]>,
}

impl RateTable {
    pub fn new(codebook: &Codebook, h: &[CMatrix], sigma_v: f64) -> Result<Self> {
        check_sigma_v(sigma_v)?;
        let n = codebook.n_tx();
        let inv_noise = 1.0 / (sigma_v * sigma_v);
        let mut rates = Vec::with_capacity(h.len() * codebook.size());
        for hk in h {
            if hk.ncols() != 2 * n {
                return Err(invalid("N", "channel width must be 2N"));
            }
            let rows = hk.nrows();
            let mut u1 = vec![Complex64::new(0.0, 0.0); rows];
            let mut u2 = vec![Complex64::new(0.0, 0.0); rows];
            for m in 0..codebook.size() {
                let b = codebook.beam(m);
                for r in 0..rows {
                    let (mut a, mut c) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
                    for (i, bi) in b.iter().enumerate() {
                        a += hk[(r, i)] * bi;
                        c += hk[(r, n + i)] * bi;
                    }
                    u1[r] = a;
                    u2[r] = c;
                }
                let mut row = [0.0; 4];
                for (nn, psi) in COPHASE.iter().enumerate() {
                    let g: f64 = u1
                        .iter()
                        .zip(&u2)
                        .map(|(a, c)| (a + psi * c).norm_sqr())
                        .sum::<f64>()
                        / n as f64;
                    row[nn] = (1.0 + g * inv_noise).log2();
                }
                rates.push(row);
            }
        }
        Ok(Self {
            beams: codebook.size(),
            subbands: h.len(),
            rates,
        })
    }

    pub fn beams(&self) -> usize {
        self.beams
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    /// Rate on subband `k` with beam `m` (wrapped) and co-phasing `n`.
    pub fn rate(&self, k: usize, m: usize, n: usize) -> f64 {
        self.rates[k * self.beams + m % self.beams][n]
    }

    /// Best co-phasing for beam `m` on subband `k`, smallest index on ties.
    pub fn best_cophase(&self, k: usize, m: usize) -> (usize, f64) {
        let row = &self.rates[k * self.beams + m % self.beams];
        let mut best = (0, row[0]);
        for (n, &r) in row.iter().enumerate().skip(1) {
            if r > best.1 {
                best = (n, r);
            }
        }
        best
    }
}

/// Selected indices for one observation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Selection {
    Wideband { m: usize, n: Vec<u8> },
    Subband { m: usize, delta: Vec<u8>, n: Vec<u8> },
    PerSubband { m: Vec<usize>, n: Vec<u8> },
}

impl Selection {
    pub fn mode(&self) -> FeedbackMode {
        match self {
            Selection::Wideband { .. } => FeedbackMode::Wideband,
            Selection::Subband { .. } => FeedbackMode::Subband,
            Selection::PerSubband { .. } => FeedbackMode::PerSubband,
        }
    }

    pub fn subbands(&self) -> usize {
        match self {
            Selection::Wideband { n, .. }
            | Selection::Subband { n, .. }
            | Selection::PerSubband { n, .. } => n.len(),
        }
    }

    /// `(beam index, co-phasing index)` used on each subband.
    pub fn beams(&self, codebook_size: usize) -> Vec<(usize, usize)> {
        match self {
            Selection::Wideband { m, n } => n.iter().map(|&nk| (*m, nk as usize)).collect(),
            Selection::Subband { m, delta, n } => delta
                .iter()
                .zip(n)
                .map(|(&d, &nk)| ((2 * m + d as usize) % codebook_size, nk as usize))
                .collect(),
            Selection::PerSubband { m, n } => {
                m.iter().zip(n).map(|(&mk, &nk)| (mk, nk as usize)).collect()
            }
        }
    }

    /// Rate of this selection under `table`.
    pub fn rate(&self, table: &RateTable) -> f64 {
        self.beams(table.beams())
            .iter()
            .enumerate()
            .map(|(k, &(m, n))| table.rate(k, m, n))
            .sum()
    }

    /// Precoder vectors per subband.
    pub fn precoders(&self, codebook: &Codebook) -> Result<Vec<Vec<Complex64>>> {
        self.beams(codebook.size())
            .into_iter()
            .map(|(m, n)| codebook.precoder(m, n).map(|p| p.w))
            .collect()
    }
}

/// Best wideband beam with per-subband co-phasing.
pub fn select_mode1(table: &RateTable) -> Selection {
    let (m, _) = best_group(table, table.beams(), 1, |m, _| m);
    let n = (0..table.subbands())
        .map(|k| table.best_cophase(k, m).0 as u8)
        .collect();
    Selection::Wideband { m, n }
}

/// Best beam group `m` with per-subband offset `delta` and co-phasing.
pub fn select_mode2(table: &RateTable) -> Result<Selection> {
    if table.beams() % 2 != 0 {
        return Err(invalid("O", "mode 2 needs an even codebook size"));
    }
    let (m, _) = best_group(table, table.beams() / 2, 4, |m, d| 2 * m + d);
    let mut delta = Vec::with_capacity(table.subbands());
    let mut n = Vec::with_capacity(table.subbands());
    for k in 0..table.subbands() {
        let (d, nk, _) = best_offset(table, k, m);
        delta.push(d as u8);
        n.push(nk as u8);
    }
    Ok(Selection::Subband { m, delta, n })
}

/// Independent best `(m, n)` per subband.
pub fn select_mode3(table: &RateTable) -> Selection {
    let mut m = Vec::with_capacity(table.subbands());
    let mut n = Vec::with_capacity(table.subbands());
    for k in 0..table.subbands() {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for mm in 0..table.beams() {
            let (nn, r) = table.best_cophase(k, mm);
            if r > best.2 {
                best = (mm, nn, r);
            }
        }
        m.push(best.0);
        n.push(best.1 as u8);
    }
    Selection::PerSubband { m, n }
}

pub fn select(mode: FeedbackMode, table: &RateTable) -> Result<Selection> {
    match mode {
        FeedbackMode::Wideband => Ok(select_mode1(table)),
        FeedbackMode::Subband => select_mode2(table),
        FeedbackMode::PerSubband => Ok(select_mode3(table)),
    }
}

/// Best `(delta, n, rate)` for group `m` on subband `k`.
pub(crate) fn best_offset(table: &RateTable, k: usize, m: usize) -> (usize, usize, f64) {
    let mut best = (0, 0, f64::NEG_INFINITY);
    for d in 0..4 {
        let (n, r) = table.best_cophase(k, 2 * m + d);
        if r > best.2 {
            best = (d, n, r);
        }
    }
    best
}

/// Rate of group `g` when each subband picks its best member.
pub(crate) fn group_rate(table: &RateTable, g: usize, beam_of: impl Fn(usize, usize) -> usize, offsets: usize) -> f64 {
    (0..table.subbands())
        .map(|k| {
            (0..offsets)
                .map(|d| table.best_cophase(k, beam_of(g, d)).1)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

fn best_group(
    table: &RateTable,
    groups: usize,
    offsets: usize,
    beam_of: impl Fn(usize, usize) -> usize + Copy,
) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for g in 0..groups {
        let r = group_rate(table, g, beam_of, offsets);
        if r > best.1 {
            best = (g, r);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::scenario::complex_gaussian;
    use rand::Rng;

    fn random_channels<R: Rng>(rng: &mut R, nbar: usize, n: usize, k: usize) -> Vec<CMatrix> {
        (0..k)
            .map(|_| CMatrix::from_fn(nbar, 2 * n, |_, _| complex_gaussian(rng)))
            .collect()
    }

    #[test]
    fn codebook_examples() {
        let p = codebook_vector(0, 0, 2, 4).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!(p.w.iter().all(|v| (v - Complex64::new(s, 0.0)).norm() < 1e-15));
        let p = codebook_vector(1, 0, 2, 4).unwrap();
        let expected = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
        assert!((p.w[1] * 2f64.sqrt() - expected).norm() < 1e-15);
        assert!(codebook_vector(8, 0, 2, 4).is_err());
        assert!(codebook_vector(0, 4, 2, 4).is_err());
        for n_tx in [1, 2, 16] {
            let cb = Codebook::new(n_tx, 4).unwrap();
            for m in 0..cb.size() {
                for n in 0..4 {
                    let w = cb.precoder(m, n).unwrap().w;
                    let e: f64 = w.iter().map(|v| v.norm_sqr()).sum();
                    assert!((e - 2.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn rate_examples() {
        // |Hw|^2 = 1, sigma_v = 1 -> 1 bit
        let h = vec![CMatrix::from_row_slice(1, 2, &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)])];
        let w = vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]];
        assert!((spectral_efficiency(&h, &w, 1.0).unwrap() - 1.0).abs() < 1e-15);
        // null space
        let w0 = vec![vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        assert_eq!(spectral_efficiency(&h, &w0, 1.0).unwrap(), 0.0);
        // {3, 7} -> 2 + 3
        let h2 = vec![
            CMatrix::from_row_slice(1, 2, &[Complex64::new(3f64.sqrt(), 0.0), Complex64::new(0.0, 0.0)]),
            CMatrix::from_row_slice(1, 2, &[Complex64::new(0.0, 7f64.sqrt()), Complex64::new(0.0, 0.0)]),
        ];
        let w2 = vec![w[0].clone(), w[0].clone()];
        assert!((spectral_efficiency(&h2, &w2, 1.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(spectral_efficiency(&h2, &w2, 0.0).is_err());
    }

    #[test]
    fn determinant_identity() {
        let mut rng = stream(3, Purpose::Test, 0, 0);
        let cb = Codebook::new(4, 4).unwrap();
        for nbar in 1..=4 {
            for _ in 0..20 {
                let h = random_channels(&mut rng, nbar, 4, 3);
                let w: Vec<_> = (0..3)
                    .map(|_| cb.precoder(rng.random_range(0..16), rng.random_range(0..4)).unwrap().w)
                    .collect();
                let sv = rng.random_range(0.3..2.0);
                let a = spectral_efficiency(&h, &w, sv).unwrap();
                let b = spectral_efficiency_det(&h, &w, sv).unwrap();
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn table_matches_direct_rate() {
        let mut rng = stream(4, Purpose::Test, 0, 0);
        let cb = Codebook::new(2, 4).unwrap();
        let h = random_channels(&mut rng, 2, 2, 2);
        let t = RateTable::new(&cb, &h, 0.7).unwrap();
        for k in 0..2 {
            for m in 0..8 {
                for n in 0..4 {
                    let w = cb.precoder(m, n).unwrap().w;
                    let r = spectral_efficiency(&h[k..=k], &[w], 0.7).unwrap();
                    assert!((t.rate(k, m, n) - r).abs() < 1e-12);
                }
            }
        }
    }

    fn matched(cb: &Codebook, m: usize, n: usize, k: usize) -> Vec<CMatrix> {
        let w = cb.precoder(m, n).unwrap().w;
        let row: Vec<Complex64> = w.iter().map(|v| v.conj() * 3.0).collect();
        (0..k).map(|_| CMatrix::from_row_slice(1, row.len(), &row)).collect()
    }

    #[test]
    fn matched_channel_recovers_indices() {
        let cb = Codebook::new(4, 4).unwrap();
        let h = matched(&cb, 5, 2, 3);
        let t = RateTable::new(&cb, &h, 1.0).unwrap();
        assert_eq!(select_mode1(&t), Selection::Wideband { m: 5, n: vec![2; 3] });
        assert_eq!(select_mode3(&t), Selection::PerSubband { m: vec![5; 3], n: vec![2; 3] });
        let s2 = select_mode2(&t).unwrap();
        assert!(s2.beams(16).iter().all(|&(b, n)| b == 5 && n == 2));
    }

    #[test]
    fn k1_modes_coincide() {
        let mut rng = stream(5, Purpose::Test, 0, 0);
        let cb = Codebook::new(2, 4).unwrap();
        for _ in 0..50 {
            let h = random_channels(&mut rng, 1, 2, 1);
            let t = RateTable::new(&cb, &h, 1.0).unwrap();
            let r1 = select_mode1(&t).rate(&t);
            let r2 = select_mode2(&t).unwrap().rate(&t);
            let r3 = select_mode3(&t).rate(&t);
            assert_eq!(r1, r3);
            assert_eq!(r2, r3);
            let b1 = select_mode1(&t).beams(8);
            assert_eq!(b1, select_mode3(&t).beams(8));
        }
    }

    #[test]
    fn mode2_wraps_group_offsets() {
        let cb = Codebook::new(2, 4).unwrap();
        // matched to beam 1; group 3 with offset 2 -> beam 8 -> wraps to 0
        let t = RateTable::new(&cb, &matched(&cb, 1, 0, 1), 1.0).unwrap();
        let s = Selection::Subband { m: 3, delta: vec![3], n: vec![0] };
        assert_eq!(s.beams(8), vec![(1, 0)]);
        assert_eq!(s.rate(&t), select_mode3(&t).rate(&t));
    }
}
