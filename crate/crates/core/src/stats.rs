//! Error summaries: RMSE with a 95% interval, miss rate and CCDF.

use std::fmt::Write as _;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

/// Summary of localization errors over a set of trials.
#[derive(Debug, Clone, PartialEq)]
pub struct RmseReport {
    pub trials: usize,
    pub rmse: f64,
    /// Half-width of the 95% interval of the RMSE (delta method on the MSE).
    pub ci95: f64,
    pub miss_rate: f64,
    /// Per-trial errors, m, in trial order.
    pub errors: Vec<f64>,
}

impl RmseReport {
    /// `misses` counts trials whose feedback was absent from the map.
    pub fn from_errors(errors: Vec<f64>, misses: usize) -> Self {
        let n = errors.len();
        if n == 0 {
            return Self {
                trials: 0,
                rmse: f64::NAN,
                ci95: f64::NAN,
                miss_rate: f64::NAN,
                errors,
            };
        }
        let nf = n as f64;
        let mse = errors.iter().map(|e| e * e).sum::<f64>() / nf;
        let var = if n > 1 {
            errors.iter().map(|e| (e * e - mse).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        let rmse = mse.sqrt();
        let ci95 = if rmse > 0.0 {
            Z95 * (var / nf).sqrt() / (2.0 * rmse)
        } else {
            0.0
        };
        Self {
            trials: n,
            rmse,
            ci95,
            miss_rate: misses as f64 / nf,
            errors,
        }
    }

    pub fn mse(&self) -> f64 {
        self.rmse * self.rmse
    }

    /// Fraction of trials with error strictly above `a`.
    pub fn exceedance(&self, a: f64) -> f64 {
        if self.errors.is_empty() {
            return f64::NAN;
        }
        self.errors.iter().filter(|&&e| e > a).count() as f64 / self.errors.len() as f64
    }

    /// `(a, P(error > a))` on the given grid.
    pub fn ccdf(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        let mut sorted = self.errors.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        grid.iter()
            .map(|&a| {
                let at_most = sorted.partition_point(|&e| e <= a);
                (a, (sorted.len() - at_most) as f64 / n)
            })
            .collect()
    }
}

/// `0, step, 2 step, ..` up to and including `max`.
pub fn error_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Mean and standard error.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// CCDF rows as `error_m,ccdf` CSV text.
pub fn ccdf_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("error_m,ccdf\n");
    for (a, p) in rows {
        writeln!(s, "{a},{p}").unwrap();
    }
    s
}
