use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::attack::VictimSampling;
use crate::codebook::FeedbackMode;
use crate::scenario::Params;

/// Which figure's data to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Map,
    RmseVsK,
    RmseVsR,
    Ccdf,
    Analysis,
    Mitigation,
    Baselines,
    All,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Map,
        ExperimentKind::RmseVsK,
        ExperimentKind::RmseVsR,
        ExperimentKind::Ccdf,
        ExperimentKind::Analysis,
        ExperimentKind::Mitigation,
        ExperimentKind::Baselines,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::Map => "map",
            ExperimentKind::RmseVsK => "rmse-vs-k",
            ExperimentKind::RmseVsR => "rmse-vs-r",
            ExperimentKind::Ccdf => "ccdf",
            ExperimentKind::Analysis => "analysis",
            ExperimentKind::Mitigation => "mitigation",
            ExperimentKind::Baselines => "baselines",
            ExperimentKind::All => "all",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let norm = s.trim().replace('_', "-");
        ExperimentKind::ALL
            .iter()
            .chain(std::iter::once(&ExperimentKind::All))
            .find(|k| k.as_str() == norm)
            .copied()
            .ok_or_else(|| format!("unknown experiment kind `{}`", s.trim()))
    }
}

/// Invalid configuration, with its location when it comes from a file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

fn field_error(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: None,
        key: Some(key.to_string()),
        message: message.into(),
    }
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Base parameters; sweeps override individual fields.
    pub params: Params,
    pub modes: Vec<FeedbackMode>,
    pub n_list: Vec<usize>,
    pub nbar_list: Vec<usize>,
    pub k_list: Vec<usize>,
    pub r_list: Vec<f64>,
    /// Border SNR values in dB; `None` is the noiseless case.
    pub snr_db_list: Vec<Option<f64>>,
    pub u_list: Vec<usize>,
    /// Cluster count for R sweeps; `round(0.112 R^2)` when absent.
    pub l_override: Option<usize>,
    pub trials: usize,
    pub samples_per_position: usize,
    pub victims: VictimSampling,
    pub analysis_draws: usize,
    pub analysis_positions: usize,
    pub eta: f64,
    pub max_pmf_entries: u128,
    /// Border SNR used to express mitigation rates.
    pub rate_snr_db: f64,
    pub ccdf_max_m: f64,
    pub ccdf_step_m: f64,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::All,
            params: Params::default(),
            modes: vec![FeedbackMode::Wideband, FeedbackMode::Subband],
            n_list: vec![16],
            nbar_list: vec![1],
            k_list: vec![1, 2, 4, 8],
            r_list: vec![15.0, 25.0, 35.0],
            snr_db_list: vec![None],
            u_list: vec![1, 2, 4],
            l_override: None,
            trials: 2000,
            samples_per_position: 10,
            victims: VictimSampling::Continuous,
            analysis_draws: 200,
            analysis_positions: 2000,
            eta: 9.0,
            max_pmf_entries: 1 << 24,
            rate_snr_db: 10.0,
            ccdf_max_m: 40.0,
            ccdf_step_m: 0.25,
            out_dir: PathBuf::from("out"),
        }
    }
}

/// Keys accepted by [`ExperimentConfig::set`] besides the parameter keys.
pub const EXPERIMENT_KEYS: &[&str] = &[
    "kind",
    "modes",
    "n_list",
    "nbar_list",
    "k_list",
    "r_list",
    "snr_db_list",
    "u_list",
    "l_override",
    "trials",
    "samples_per_position",
    "victims",
    "analysis_draws",
    "analysis_positions",
    "eta",
    "max_pmf_entries",
    "rate_snr_db",
    "ccdf_max_m",
    "ccdf_step_m",
    "out_dir",
];

fn parse<T: FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("cannot parse `{}`", v.trim()))
}

fn list<T: FromStr>(v: &str) -> Result<Vec<T>, String> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err("empty list".into());
    }
    items.into_iter().map(parse).collect()
}

fn snr_list(v: &str) -> Result<Vec<Option<f64>>, String> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| match s {
            "inf" | "noiseless" => Ok(None),
            other => parse::<f64>(other).map(Some),
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|l| if l.is_empty() { Err("empty list".into()) } else { Ok(l) })
}

impl ExperimentConfig {
    /// Sets one field; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let v = value.trim();
        match key {
            "kind" => self.kind = parse(v)?,
            "modes" => {
                self.modes = list::<u8>(v)?
                    .into_iter()
                    .map(|m| FeedbackMode::try_from(m).map_err(|e| e.to_string()))
                    .collect::<Result<_, _>>()?
            }
            "n_list" => self.n_list = list(v)?,
            "nbar_list" => self.nbar_list = list(v)?,
            "k_list" => self.k_list = list(v)?,
            "r_list" => self.r_list = list(v)?,
            "snr_db_list" => self.snr_db_list = snr_list(v)?,
            "u_list" => self.u_list = list(v)?,
            "l_override" => {
                self.l_override = if v == "auto" { None } else { Some(parse(v)?) }
            }
            "trials" => self.trials = parse(v)?,
            "samples_per_position" => self.samples_per_position = parse(v)?,
            "victims" => {
                self.victims = match v {
                    "continuous" => VictimSampling::Continuous,
                    "lattice" => VictimSampling::Lattice,
                    other => return Err(format!("expected `continuous` or `lattice`, got `{other}`")),
                }
            }
            "analysis_draws" => self.analysis_draws = parse(v)?,
            "analysis_positions" => self.analysis_positions = parse(v)?,
            "eta" => self.eta = parse(v)?,
            "max_pmf_entries" => self.max_pmf_entries = parse(v)?,
            "rate_snr_db" => self.rate_snr_db = parse(v)?,
            "ccdf_max_m" => self.ccdf_max_m = parse(v)?,
            "ccdf_step_m" => self.ccdf_step_m = parse(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            _ => {
                if !self.params.set(key, v)? {
                    return Err("unknown key".into());
                }
            }
        }
        Ok(())
    }

    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen = std::collections::HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: None,
                    message: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(ConfigError {
                    line: Some(line_no),
                    key: Some(key.into()),
                    message: "duplicate key".into(),
                });
            }
            cfg.set(key, value).map_err(|message| ConfigError {
                line: Some(line_no),
                key: Some(key.into()),
                message,
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params
            .validate()
            .map_err(|e| field_error("params", e.to_string()))?;
        let nonempty = |key: &str, empty: bool| {
            if empty {
                Err(field_error(key, "list must not be empty"))
            } else {
                Ok(())
            }
        };
        nonempty("modes", self.modes.is_empty())?;
        nonempty("n_list", self.n_list.is_empty())?;
        nonempty("nbar_list", self.nbar_list.is_empty())?;
        nonempty("k_list", self.k_list.is_empty())?;
        nonempty("r_list", self.r_list.is_empty())?;
        nonempty("snr_db_list", self.snr_db_list.is_empty())?;
        nonempty("u_list", self.u_list.is_empty())?;
        let positive = |key: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(field_error(key, "sweep values must be positive"))
            }
        };
        positive("n_list", self.n_list.iter().all(|&v| v > 0))?;
        positive("nbar_list", self.nbar_list.iter().all(|&v| v > 0))?;
        positive("k_list", self.k_list.iter().all(|&v| v > 0))?;
        positive("r_list", self.r_list.iter().all(|&v| v > 0.0 && v.is_finite()))?;
        positive("u_list", self.u_list.iter().all(|&v| v > 0))?;
        positive("snr_db_list", self.snr_db_list.iter().flatten().all(|v| v.is_finite()))?;
        positive("trials", self.trials > 0)?;
        positive("samples_per_position", self.samples_per_position > 0)?;
        positive("analysis_draws", self.analysis_draws > 0)?;
        positive("analysis_positions", self.analysis_positions > 0)?;
        positive("eta", self.eta > 0.0)?;
        positive("ccdf_step_m", self.ccdf_step_m > 0.0)?;
        positive("ccdf_max_m", self.ccdf_max_m > 0.0)?;
        if self.l_override == Some(0) {
            return Err(field_error("l_override", "must be at least 1"));
        }
        Ok(())
    }

    /// Cluster count for radius `r`.
    pub fn clusters_for_radius(&self, r: f64) -> usize {
        self.l_override.unwrap_or_else(|| cluster_count_for_radius(r))
    }
}

/// `round(0.112 R^2)`, keeping the cluster density of the reference cell.
pub fn cluster_count_for_radius(r: f64) -> usize {
    ((0.112 * r * r).round() as usize).max(1)
}
