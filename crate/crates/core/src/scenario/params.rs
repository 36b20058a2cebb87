//! Simulation parameters and their flat `key=value` form.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// How the angle perturbations `alpha` behave across observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlphaRegime {
    /// One spatially correlated field per (cluster, subband), fixed for the
    /// lifetime of the scenario.
    Frozen,
    /// Fresh independent `U(-1, 1)` values at every observation and position.
    Redraw,
}

impl AlphaRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            AlphaRegime::Frozen => "frozen",
            AlphaRegime::Redraw => "redraw",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// gNB cross-polarized antenna pairs (2N antennas).
    pub n_tx: usize,
    /// UE antennas.
    pub n_rx: usize,
    pub oversampling: usize,
    pub subbands: usize,
    pub clusters: usize,
    /// Cell radius, m.
    pub radius: f64,
    pub carrier_hz: f64,
    pub subband_spacing_hz: f64,
    /// Departure angle spread constant, rad.
    pub c_asd: f64,
    /// Arrival angle spread constant, rad.
    pub c_asa: f64,
    pub d_over_lambda: f64,
    pub dbar_over_lambda: f64,
    /// Spatial correlation distance of the angle perturbations, m.
    pub corr_distance: f64,
    /// Probe lattice spacing, m.
    pub lattice_spacing: f64,
    /// Channel-estimate noise std.
    pub sigma: f64,
    /// Receiver noise std used in the rate expression.
    pub sigma_v: f64,
    /// Path-loss normalization.
    pub a_pl: f64,
    /// Sampling period; `None` means `1 / (K * delta_f)`.
    pub sampling_period: Option<f64>,
    pub grid_x: usize,
    pub grid_y: usize,
    /// Field grid half-width as a multiple of the radius.
    pub grid_extent: f64,
    pub alpha_regime: AlphaRegime,
    pub seed: u64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n_tx: 16,
            n_rx: 1,
            oversampling: 4,
            subbands: 4,
            clusters: 70,
            radius: 25.0,
            carrier_hz: 28e9,
            subband_spacing_hz: 5.76e6,
            c_asd: 10f64.to_radians(),
            c_asa: 10f64.to_radians(),
            d_over_lambda: 0.5,
            dbar_over_lambda: 0.5,
            corr_distance: 2.0,
            lattice_spacing: 1.0,
            sigma: 0.0,
            sigma_v: 1.0,
            a_pl: 1.0,
            sampling_period: None,
            grid_x: 100,
            grid_y: 100,
            grid_extent: 1.2,
            alpha_regime: AlphaRegime::Frozen,
            seed: 1,
        }
    }
}

/// Keys accepted by [`Params::set`], in canonical output order.
pub const PARAM_KEYS: &[&str] = &[
    "N",
    "Nbar",
    "O",
    "K",
    "L",
    "R_m",
    "fc_hz",
    "delta_f_hz",
    "c_asd_rad",
    "c_asa_rad",
    "d_over_lambda",
    "dbar_over_lambda",
    "d_s_m",
    "l_s_m",
    "sigma",
    "sigma_v",
    "a_pl",
    "t_s",
    "grid_x",
    "grid_y",
    "grid_extent",
    "alpha_regime",
    "seed",
];

impl Params {
    /// Codebook size `N * O`.
    pub fn codebook_size(&self) -> usize {
        self.n_tx * self.oversampling
    }

    pub fn sampling_period(&self) -> f64 {
        self.sampling_period
            .unwrap_or(1.0 / (self.subbands as f64 * self.subband_spacing_hz))
    }

    pub fn validate(&self) -> Result<()> {
        let pos_count = |name, v: usize| {
            if v == 0 {
                Err(invalid(name, "must be at least 1"))
            } else {
                Ok(())
            }
        };
        pos_count("N", self.n_tx)?;
        pos_count("Nbar", self.n_rx)?;
        pos_count("O", self.oversampling)?;
        pos_count("K", self.subbands)?;
        pos_count("L", self.clusters)?;
        let positive = |name, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("R_m", self.radius)?;
        positive("fc_hz", self.carrier_hz)?;
        positive("d_over_lambda", self.d_over_lambda)?;
        positive("dbar_over_lambda", self.dbar_over_lambda)?;
        positive("l_s_m", self.lattice_spacing)?;
        if !(self.subband_spacing_hz.is_finite() && self.subband_spacing_hz >= 0.0) {
            return Err(invalid("delta_f_hz", "must be finite and >= 0"));
        }
        let half_band = self.subband_spacing_hz * (self.subbands as f64 - 1.0) / 2.0;
        if half_band >= self.carrier_hz {
            return Err(invalid("delta_f_hz", "lowest subband frequency is not positive"));
        }
        for (name, v) in [
            ("c_asd_rad", self.c_asd),
            ("c_asa_rad", self.c_asa),
            ("d_s_m", self.corr_distance),
            ("sigma", self.sigma),
            ("sigma_v", self.sigma_v),
            ("a_pl", self.a_pl),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        if let Some(ts) = self.sampling_period {
            positive("t_s", ts)?;
        }
        if self.grid_x < 2 || self.grid_y < 2 {
            return Err(invalid("grid_x", "field grid needs at least 2 points per axis"));
        }
        if !(self.grid_extent.is_finite() && self.grid_extent >= 1.0) {
            return Err(invalid("grid_extent", "field grid must cover the cell (extent >= 1)"));
        }
        if self.alpha_regime == AlphaRegime::Frozen && self.corr_distance <= 0.0 {
            return Err(invalid(
                "d_s_m",
                "frozen fields need a positive correlation distance; use alpha_regime=redraw for d_S=0",
            ));
        }
        Ok(())
    }

    /// Sets one parameter from its textual form. Accepts the keys in
    /// [`PARAM_KEYS`] plus the degree variants `c_asd_deg` / `c_asa_deg`.
    /// Returns `Ok(false)` for an unknown key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<bool, String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.trim()
                .parse::<T>()
                .map_err(|_| format!("cannot parse `{}`", v.trim()))
        }
        let v = value.trim();
        match key {
            "N" => self.n_tx = num(v)?,
            "Nbar" => self.n_rx = num(v)?,
            "O" => self.oversampling = num(v)?,
            "K" => self.subbands = num(v)?,
            "L" => self.clusters = num(v)?,
            "R_m" => self.radius = num(v)?,
            "fc_hz" => self.carrier_hz = num(v)?,
            "delta_f_hz" => self.subband_spacing_hz = num(v)?,
            "c_asd_rad" => self.c_asd = num(v)?,
            "c_asa_rad" => self.c_asa = num(v)?,
            "c_asd_deg" => self.c_asd = num::<f64>(v)? * PI / 180.0,
            "c_asa_deg" => self.c_asa = num::<f64>(v)? * PI / 180.0,
            "d_over_lambda" => self.d_over_lambda = num(v)?,
            "dbar_over_lambda" => self.dbar_over_lambda = num(v)?,
            "d_s_m" => self.corr_distance = num(v)?,
            "l_s_m" => self.lattice_spacing = num(v)?,
            "sigma" => self.sigma = num(v)?,
            "sigma_v" => self.sigma_v = num(v)?,
            "a_pl" => self.a_pl = num(v)?,
            "t_s" => {
                self.sampling_period = if v == "auto" { None } else { Some(num(v)?) };
            }
            "grid_x" => self.grid_x = num(v)?,
            "grid_y" => self.grid_y = num(v)?,
            "grid_extent" => self.grid_extent = num(v)?,
            "alpha_regime" => {
                self.alpha_regime = match v {
                    "frozen" => AlphaRegime::Frozen,
                    "redraw" => AlphaRegime::Redraw,
                    other => return Err(format!("expected `frozen` or `redraw`, got `{other}`")),
                }
            }
            "seed" => self.seed = num(v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    /// Canonical `(key, value)` pairs; floats use the shortest exact form.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        PARAM_KEYS
            .iter()
            .map(|&k| {
                let v = match k {
                    "N" => self.n_tx.to_string(),
                    "Nbar" => self.n_rx.to_string(),
                    "O" => self.oversampling.to_string(),
                    "K" => self.subbands.to_string(),
                    "L" => self.clusters.to_string(),
                    "R_m" => self.radius.to_string(),
                    "fc_hz" => self.carrier_hz.to_string(),
                    "delta_f_hz" => self.subband_spacing_hz.to_string(),
                    "c_asd_rad" => self.c_asd.to_string(),
                    "c_asa_rad" => self.c_asa.to_string(),
                    "d_over_lambda" => self.d_over_lambda.to_string(),
                    "dbar_over_lambda" => self.dbar_over_lambda.to_string(),
                    "d_s_m" => self.corr_distance.to_string(),
                    "l_s_m" => self.lattice_spacing.to_string(),
                    "sigma" => self.sigma.to_string(),
                    "sigma_v" => self.sigma_v.to_string(),
                    "a_pl" => self.a_pl.to_string(),
                    "t_s" => self
                        .sampling_period
                        .map_or_else(|| "auto".to_string(), |t| t.to_string()),
                    "grid_x" => self.grid_x.to_string(),
                    "grid_y" => self.grid_y.to_string(),
                    "grid_extent" => self.grid_extent.to_string(),
                    "alpha_regime" => self.alpha_regime.as_str().to_string(),
                    "seed" => self.seed.to_string(),
                    _ => unreachable!(),
                };
                (k, v)
            })
            .collect()
    }
}
