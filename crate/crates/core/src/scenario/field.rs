//! Spatially correlated angle-perturbation fields.
//!
//! A zero-mean unit-variance Gaussian field `Z` is synthesized on a square
//! grid `g(n, m) = (n dx, m dy)`, `|n| < G_x`, `|m| < G_y`, and mapped to
//! `alpha = 2 (1 - Q(Z)) - 1`, which is `U(-1, 1)` distributed.
//!
//! The Gaussian covariance is `rho_N(d) = 2 sin(pi/6 * exp(-d / (2 d_S)))`.
//! Under the uniform transform this gives exactly
//! `corr(alpha(p1), alpha(p2)) = exp(-|p1 - p2| / (2 d_S))`. Sampling uses
//! circulant embedding on a padded periodic grid (one FFT pair per two
//! fields). Off-grid points are bilinearly interpolated and rescaled back
//! to unit variance.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::geometry::Point;
use crate::scenario::Params;

/// Gaussian-domain covariance for separation `d`.
pub fn gaussian_covariance(d: f64, corr_distance: f64) -> f64 {
    if corr_distance <= 0.0 {
        return if d == 0.0 { 1.0 } else { 0.0 };
    }
    2.0 * (PI / 6.0 * (-d / (2.0 * corr_distance)).exp()).sin()
}

/// `2 (1 - Q(z)) - 1`.
pub fn uniform_transform(z: f64) -> f64 {
    libm::erf(z / std::f64::consts::SQRT_2)
}

/// Grid geometry plus the square-rooted circulant spectrum shared by every
/// field of a scenario.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    /// Nodes per axis is `2 * half + 1`.
    half_x: usize,
    half_y: usize,
    dx: f64,
    dy: f64,
    corr_distance: f64,
    /// Periodic embedding sizes.
    mx: usize,
    my: usize,
    sqrt_spectrum: Vec<f64>,
    node_std: f64,
}

/// Interpolation stencil of one evaluation point, reusable across fields.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
    inv_std: f64,
}

/// One realized field, stored as unit-variance Gaussian node values.
#[derive(Debug, Clone)]
pub struct AlphaField {
    nodes: Vec<f32>,
}

impl FieldGrid {
    pub fn new(params: &Params) -> Result<Self> {
        if params.grid_x < 2 || params.grid_y < 2 {
            return Err(invalid("grid_x", "degenerate field grid (need G >= 2)"));
        }
        if params.corr_distance <= 0.0 {
            return Err(invalid("d_s_m", "correlated fields need d_S > 0"));
        }
        let extent = params.grid_extent * params.radius;
        let dx = extent / params.grid_x as f64;
        let dy = extent / params.grid_y as f64;
        let half_x = params.grid_x - 1;
        let half_y = params.grid_y - 1;
        // Pad until the wrapped covariance is below 1e-3.
        let reach = 2.0 * params.corr_distance * (PI / 3.0 / 1e-3).ln();
        let mx = (2 * half_x + 1 + (reach / dx).ceil() as usize).next_multiple_of(2);
        let my = (2 * half_y + 1 + (reach / dy).ceil() as usize).next_multiple_of(2);

        let mut cov = vec![Complex64::new(0.0, 0.0); mx * my];
        for j in 0..my {
            let oy = j.min(my - j) as f64 * dy;
            for i in 0..mx {
                let ox = i.min(mx - i) as f64 * dx;
                cov[j * mx + i].re = gaussian_covariance(ox.hypot(oy), params.corr_distance);
            }
        }
        let mut planner = FftPlanner::new();
        let fwd = Fft2::new(&mut planner, mx, my, false);
        fwd.run(&mut cov);
        // Tiny negative eigenvalues come from truncating the embedding.
        let sqrt_spectrum: Vec<f64> = cov.iter().map(|c| c.re.max(0.0).sqrt()).collect();
        let var: f64 = cov.iter().map(|c| c.re.max(0.0)).sum::<f64>() / (mx * my) as f64;
        Ok(Self {
            half_x,
            half_y,
            dx,
            dy,
            corr_distance: params.corr_distance,
            mx,
            my,
            sqrt_spectrum,
            node_std: var.sqrt(),
        })
    }

    fn nx(&self) -> usize {
        2 * self.half_x + 1
    }

    fn ny(&self) -> usize {
        2 * self.half_y + 1
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.dx, self.dy)
    }

    pub fn node_position(&self, ix: usize, iy: usize) -> Point {
        Point::new(
            (ix as f64 - self.half_x as f64) * self.dx,
            (iy as f64 - self.half_y as f64) * self.dy,
        )
    }

    /// Draws two independent fields from one complex white-noise grid.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> (AlphaField, AlphaField) {
        let (mx, my) = (self.mx, self.my);
        let mut buf: Vec<Complex64> = (0..mx * my)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut planner = FftPlanner::new();
        Fft2::new(&mut planner, mx, my, false).run(&mut buf);
        for (b, s) in buf.iter_mut().zip(&self.sqrt_spectrum) {
            *b *= *s;
        }
        Fft2::new(&mut planner, mx, my, true).run(&mut buf);
        let scale = 1.0 / ((mx * my) as f64 * self.node_std);
        let (nx, ny) = (self.nx(), self.ny());
        let mut a = Vec::with_capacity(nx * ny);
        let mut b = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let v = buf[j * mx + i] * scale;
                a.push(v.re as f32);
                b.push(v.im as f32);
            }
        }
        (AlphaField { nodes: a }, AlphaField { nodes: b })
    }

    /// Bilinear stencil at `p`; points beyond the grid use the edge cell.
    pub fn stencil(&self, p: Point) -> Stencil {
        let fx = (p.x / self.dx + self.half_x as f64).clamp(0.0, (self.nx() - 1) as f64);
        let fy = (p.y / self.dy + self.half_y as f64).clamp(0.0, (self.ny() - 1) as f64);
        let ix = (fx.floor() as usize).min(self.nx() - 2);
        let iy = (fy.floor() as usize).min(self.ny() - 2);
        let tx = fx - ix as f64;
        let ty = fy - iy as f64;
        let nx = self.nx();
        let idx = [iy * nx + ix, iy * nx + ix + 1, (iy + 1) * nx + ix, (iy + 1) * nx + ix + 1];
        let w = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
        let offs = [(0.0, 0.0), (self.dx, 0.0), (0.0, self.dy), (self.dx, self.dy)];
        let mut var = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                let d = (offs[a].0 - offs[b].0).hypot(offs[a].1 - offs[b].1);
                var += w[a] * w[b] * gaussian_covariance(d, self.corr_distance);
            }
        }
        Stencil {
            idx,
            w,
            inv_std: 1.0 / var.sqrt(),
        }
    }
}

impl AlphaField {
    /// Unit-variance Gaussian value at the stencil point.
    pub fn gaussian(&self, s: &Stencil) -> f64 {
        let z: f64 = s
            .idx
            .iter()
            .zip(&s.w)
            .map(|(&i, &w)| w * self.nodes[i] as f64)
            .sum();
        z * s.inv_std
    }

    /// `alpha` in `[-1, 1]`.
    pub fn eval(&self, s: &Stencil) -> f64 {
        uniform_transform(self.gaussian(s)).clamp(-1.0, 1.0)
    }
}

/// Row/column 2-D FFT over a row-major `mx * my` buffer.
struct Fft2 {
    rows: Arc<dyn Fft<f64>>,
    cols: Arc<dyn Fft<f64>>,
    mx: usize,
    my: usize,
}

impl Fft2 {
    fn new(planner: &mut FftPlanner<f64>, mx: usize, my: usize, inverse: bool) -> Self {
        let (rows, cols) = if inverse {
            (planner.plan_fft_inverse(mx), planner.plan_fft_inverse(my))
        } else {
            (planner.plan_fft_forward(mx), planner.plan_fft_forward(my))
        };
        Self { rows, cols, mx, my }
    }

    fn run(&self, buf: &mut [Complex64]) {
        self.rows.process(buf);
        let mut t = vec![Complex64::new(0.0, 0.0); buf.len()];
        transpose(buf, &mut t, self.mx, self.my);
        self.cols.process(&mut t);
        transpose(&t, buf, self.my, self.mx);
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], w: usize, h: usize) {
    for r in 0..h {
        for c in 0..w {
            dst[c * h + r] = src[r * w + c];
        }
    }
}
