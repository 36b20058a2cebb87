//! Experiment orchestration: parameter sweeps rendered as CSV files.
//!
//! Every experiment is a pure function of its [`ExperimentConfig`]; the
//! master seed is `config.params.seed`. Sweep points share the scenario seed
//! so curves along a sweep axis use common random numbers.

mod config;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub use config::{cluster_count_for_radius, ConfigError, ExperimentConfig, ExperimentKind, EXPERIMENT_KEYS};

use crate::analysis::{analytical_mse, rmse_fit, AnalysisConfig};
use crate::attack::{build_map, run_attack, run_trials, sample_victim, AttackConfig, AttackOutcome, TrialOutcome, VictimSampling};
use crate::baselines::{cid_estimate, place_receivers, rfpm_build_db, rfpm_localize, rfpm_observe, toa_localize, toa_measure};
use crate::channel::{calibrate_apl, ObservationModel};
use crate::codebook::FeedbackMode;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, Purpose};
use crate::scenario::{AlphaRegime, Params, Scenario};
use crate::stats::{ccdf_csv, error_grid};

/// Header of every report CSV.
pub const REPORT_HEADER: &str =
    "experiment,attack_kind,mode,N,Nbar,K,L,R_m,snr_db,U,victims,trials,rmse_m,ci95_m,miss_rate,rate_bps_hz";

/// Header of `analysis_rmse.csv`.
pub const ANALYSIS_HEADER: &str = "N,O,K,L,R_m,rmse_analytic_m,rmse_fit_m,mc_stderr_m";

/// Scenarios pooled by the restricted simulator of the analysis experiment.
pub const ANALYSIS_SIM_SCENARIOS: usize = 10;

/// One generated file, relative to the output directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

/// Attack family of a report row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Pf,
    Cid,
    Toa,
    Rfpm,
}

impl AttackKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AttackKind::Pf => "pf",
            AttackKind::Cid => "cid",
            AttackKind::Toa => "toa",
            AttackKind::Rfpm => "rfpm",
        }
    }
}

/// One line of a report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub experiment: ExperimentKind,
    pub attack: AttackKind,
    /// Feedback mode; absent for non-feedback attacks.
    pub mode: Option<FeedbackMode>,
    pub n_tx: usize,
    pub n_rx: usize,
    pub subbands: usize,
    pub clusters: usize,
    pub radius: f64,
    /// `None` is noiseless estimation.
    pub snr_db: Option<f64>,
    pub mitigation: usize,
    pub victims: VictimSampling,
    pub trials: usize,
    pub rmse: f64,
    pub ci95: f64,
    pub miss_rate: f64,
    pub rate: Option<f64>,
}

impl ReportRow {
    fn write(&self, out: &mut String) {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment.as_str(),
            self.attack.as_str(),
            self.mode.map_or(String::new(), |m| m.number().to_string()),
            self.n_tx,
            self.n_rx,
            self.subbands,
            self.clusters,
            self.radius,
            self.snr_db.map_or("inf".to_string(), |s| s.to_string()),
            self.mitigation,
            self.victims.as_str(),
            self.trials,
            self.rmse,
            self.ci95,
            self.miss_rate,
            opt(self.rate),
        );
    }
}

/// Renders rows with the report header.
pub fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        r.write(&mut out);
    }
    out
}

/// Row of `analysis_rmse.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub n_tx: usize,
    pub oversampling: usize,
    pub subbands: usize,
    pub clusters: usize,
    pub radius: f64,
    pub rmse: f64,
    pub rmse_fit: f64,
    pub stderr: f64,
}

pub fn analysis_csv(rows: &[AnalysisRow]) -> String {
    let mut out = String::from(ANALYSIS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n_tx, r.oversampling, r.subbands, r.clusters, r.radius, r.rmse, r.rmse_fit, r.stderr
        );
    }
    out
}

/// A point of a sweep: the scenario parameters plus attack settings.
#[derive(Debug, Clone)]
struct Point {
    params: Params,
    mode: FeedbackMode,
    snr_db: Option<f64>,
}

fn snr_tag(snr: Option<f64>) -> String {
    snr.map_or(String::new(), |s| format!("_snr{s}"))
}

fn file_stem(p: &Point) -> String {
    format!(
        "mode{}_N{}_Nbar{}_K{}{}",
        p.mode.number(),
        p.params.n_tx,
        p.params.n_rx,
        p.params.subbands,
        snr_tag(p.snr_db)
    )
}

/// Scenario with the noise setting applied: noiseless runs keep `A_PL`,
/// noisy runs fix `sigma = 1` and calibrate `A_PL` to the border SNR.
pub fn scenario_at_snr(params: Params, snr_db: Option<f64>) -> Result<Scenario> {
    match snr_db {
        None => Scenario::generate(Params { sigma: 0.0, ..params }),
        Some(db) => {
            let base = Scenario::generate(Params { sigma: 1.0, ..params })?;
            let a_pl = calibrate_apl(&base, 1.0, db)?;
            Ok(base.with_path_loss(a_pl))
        }
    }
}

/// Map and victim seeds derived from the master seed.
fn map_seed(seed: u64) -> u64 {
    derive_seed(seed, Purpose::MapSample, 0)
}

fn victim_seed(seed: u64) -> u64 {
    derive_seed(seed, Purpose::Victim, 0)
}

fn attack_config(config: &ExperimentConfig, mode: FeedbackMode, mitigation: usize) -> AttackConfig {
    AttackConfig {
        mode,
        model: ObservationModel::default(),
        samples_per_position: config.samples_per_position,
        mitigation,
        victims: config.victims,
    }
}

/// Builds the map and attacks `trials` victims.
pub fn run_pf(scenario: &Scenario, attack: &AttackConfig, trials: usize) -> Result<AttackOutcome> {
    let seed = scenario.params().seed;
    let lattice = scenario.lattice()?;
    let map = build_map(scenario, &lattice, attack, map_seed(seed))?;
    run_attack(scenario, &map, attack, trials, victim_seed(seed))
}

#[allow(clippy::too_many_arguments)]
fn row(
    experiment: ExperimentKind,
    attack: AttackKind,
    mode: Option<FeedbackMode>,
    params: &Params,
    snr_db: Option<f64>,
    mitigation: usize,
    victims: VictimSampling,
    outcome: &AttackOutcome,
) -> ReportRow {
    ReportRow {
        experiment,
        attack,
        mode,
        n_tx: params.n_tx,
        n_rx: params.n_rx,
        subbands: params.subbands,
        clusters: params.clusters,
        radius: params.radius,
        snr_db,
        mitigation,
        victims,
        trials: outcome.report.trials,
        rmse: outcome.report.rmse,
        ci95: outcome.report.ci95,
        miss_rate: outcome.report.miss_rate,
        rate: outcome.mean_rate,
    }
}

/// Sweep over modes, antennas, subbands and SNR, in that nesting order.
fn k_sweep(config: &ExperimentConfig) -> Vec<Point> {
    let mut out = Vec::new();
    for &mode in &config.modes {
        for &n in &config.n_list {
            for &nb in &config.nbar_list {
                for &k in &config.k_list {
                    for &snr in &config.snr_db_list {
                        out.push(Point {
                            params: Params {
                                n_tx: n,
                                n_rx: nb,
                                subbands: k,
                                ..config.params.clone()
                            },
                            mode,
                            snr_db: snr,
                        });
                    }
                }
            }
        }
    }
    out
}

fn run_map(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut files = Vec::new();
    for pt in k_sweep(config) {
        let scenario = scenario_at_snr(pt.params.clone(), pt.snr_db)?;
        let lattice = scenario.lattice()?;
        let map = build_map(&scenario, &lattice, &attack_config(config, pt.mode, 1), map_seed(pt.params.seed))?;
        files.push(OutputFile {
            name: format!("map_{}.csv", file_stem(&pt)),
            contents: map.to_csv(),
        });
    }
    Ok(files)
}

fn run_rmse_vs_k(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut rows = Vec::new();
    for pt in k_sweep(config) {
        let scenario = scenario_at_snr(pt.params.clone(), pt.snr_db)?;
        let run = run_pf(&scenario, &attack_config(config, pt.mode, 1), config.trials)?;
        rows.push(row(
            ExperimentKind::RmseVsK,
            AttackKind::Pf,
            Some(pt.mode),
            scenario.params(),
            pt.snr_db,
            1,
            config.victims,
            &run,
        ));
    }
    Ok(vec![OutputFile {
        name: "rmse_vs_k.csv".into(),
        contents: report_csv(&rows),
    }])
}

fn run_rmse_vs_r(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut rows = Vec::new();
    for &mode in &config.modes {
        for &n in &config.n_list {
            for &nb in &config.nbar_list {
                for &r in &config.r_list {
                    for &snr in &config.snr_db_list {
                        let params = Params {
                            n_tx: n,
                            n_rx: nb,
                            radius: r,
                            clusters: config.clusters_for_radius(r),
                            ..config.params.clone()
                        };
                        let scenario = scenario_at_snr(params, snr)?;
                        let run = run_pf(&scenario, &attack_config(config, mode, 1), config.trials)?;
                        rows.push(row(
                            ExperimentKind::RmseVsR,
                            AttackKind::Pf,
                            Some(mode),
                            scenario.params(),
                            snr,
                            1,
                            config.victims,
                            &run,
                        ));
                    }
                }
            }
        }
    }
    Ok(vec![OutputFile {
        name: "rmse_vs_r.csv".into(),
        contents: report_csv(&rows),
    }])
}

fn run_ccdf(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let grid = error_grid(config.ccdf_max_m, config.ccdf_step_m);
    let mut files = Vec::new();
    for pt in k_sweep(config) {
        let scenario = scenario_at_snr(pt.params.clone(), pt.snr_db)?;
        let run = run_pf(&scenario, &attack_config(config, pt.mode, 1), config.trials)?;
        files.push(OutputFile {
            name: format!("ccdf_{}.csv", file_stem(&pt)),
            contents: ccdf_csv(&run.report.ccdf(&grid)),
        });
    }
    Ok(files)
}

/// Parameters of the restricted model the analysis describes: single
/// antenna UE, no spatial correlation, one linked cluster per subband.
pub fn analysis_params(base: &Params, n_tx: usize, subbands: usize) -> Params {
    Params {
        n_tx,
        n_rx: 1,
        subbands,
        sigma: 0.0,
        corr_distance: 0.0,
        alpha_regime: AlphaRegime::Redraw,
        ..base.clone()
    }
}

/// Observation model matching the analysis.
pub const ANALYSIS_MODEL: ObservationModel = ObservationModel {
    mu: Some(std::f64::consts::FRAC_PI_4),
    orientation: Some(0.0),
    strongest_only: true,
};

/// Restricted simulator: mode 3 over `scenarios` independent cluster draws,
/// errors pooled.
pub fn restricted_simulation(params: &Params, config: &ExperimentConfig, scenarios: usize) -> Result<AttackOutcome> {
    let per = config.trials.div_ceil(scenarios).max(1);
    let mut errors = Vec::new();
    let mut misses = 0usize;
    for s in 0..scenarios {
        let seed = derive_seed(params.seed, Purpose::Scenario, s as u64);
        let scenario = Scenario::generate(Params { seed, ..params.clone() })?;
        let attack = AttackConfig {
            mode: FeedbackMode::PerSubband,
            model: ANALYSIS_MODEL,
            samples_per_position: config.samples_per_position,
            mitigation: 1,
            victims: config.victims,
        };
        let run = run_pf(&scenario, &attack, per)?;
        misses += (run.report.miss_rate * run.report.trials as f64).round() as usize;
        errors.extend(run.report.errors);
    }
    Ok(AttackOutcome {
        report: crate::stats::RmseReport::from_errors(errors, misses),
        mean_rate: None,
    })
}

fn run_analysis(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut arows = Vec::new();
    let mut srows = Vec::new();
    for &n in &config.n_list {
        for &k in &config.k_list {
            let params = analysis_params(&config.params, n, k);
            let acfg = AnalysisConfig {
                cluster_draws: config.analysis_draws,
                position_samples: config.analysis_positions,
                eta: config.eta,
                max_pmf_entries: config.max_pmf_entries,
                seed: params.seed,
                params: params.clone(),
            };
            let a = analytical_mse(&acfg)?;
            arows.push(AnalysisRow {
                n_tx: n,
                oversampling: params.oversampling,
                subbands: k,
                clusters: params.clusters,
                radius: params.radius,
                rmse: a.rmse(),
                rmse_fit: rmse_fit(params.radius, params.clusters, n, params.oversampling, k, config.eta),
                stderr: a.rmse_stderr(),
            });
            let sim = restricted_simulation(&params, config, ANALYSIS_SIM_SCENARIOS)?;
            srows.push(row(
                ExperimentKind::Analysis,
                AttackKind::Pf,
                Some(FeedbackMode::PerSubband),
                &params,
                None,
                1,
                config.victims,
                &sim,
            ));
        }
    }
    Ok(vec![
        OutputFile {
            name: "analysis_rmse.csv".into(),
            contents: analysis_csv(&arows),
        },
        OutputFile {
            name: "analysis_sim.csv".into(),
            contents: report_csv(&srows),
        },
    ])
}

/// Rows of the mitigation experiment: one per (mode, N, Nbar, K, U).
pub fn mitigation_rows(config: &ExperimentConfig) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for &mode in &config.modes {
        for &n in &config.n_list {
            for &nb in &config.nbar_list {
                for &k in &config.k_list {
                    let params = Params {
                        n_tx: n,
                        n_rx: nb,
                        subbands: k,
                        sigma: 0.0,
                        ..config.params.clone()
                    };
                    let scenario = Scenario::generate(params)?;
                    // Rates are expressed at a fixed border SNR; selection stays noiseless.
                    let a_pl = calibrate_apl(&scenario.with_noise(1.0, scenario.params().sigma_v), scenario.params().sigma_v, config.rate_snr_db)?;
                    let scenario = scenario.with_path_loss(a_pl);
                    let lattice = scenario.lattice()?;
                    let map = build_map(&scenario, &lattice, &attack_config(config, mode, 1), map_seed(scenario.params().seed))?;
                    for &u in &config.u_list {
                        let attack = attack_config(config, mode, u);
                        let outcome = run_attack(&scenario, &map, &attack, config.trials, victim_seed(scenario.params().seed))?;
                        rows.push(row(
                            ExperimentKind::Mitigation,
                            AttackKind::Pf,
                            Some(mode),
                            scenario.params(),
                            None,
                            u,
                            config.victims,
                            &outcome,
                        ));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn run_mitigation(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    Ok(vec![OutputFile {
        name: "mitigation.csv".into(),
        contents: report_csv(&mitigation_rows(config)?),
    }])
}

/// CID: the cell center for every victim.
pub fn run_cid(scenario: &Scenario, victims: VictimSampling, trials: usize) -> Result<AttackOutcome> {
    let lattice = scenario.lattice()?;
    let radius = scenario.params().radius;
    run_trials(trials, victim_seed(scenario.params().seed), Purpose::Victim, |_, rng| {
        let p = sample_victim(victims, radius, &lattice, rng);
        Ok(TrialOutcome {
            error: p.dist(cid_estimate()),
            miss: false,
            rate: None,
        })
    })
}

/// ToA trilateration with fresh receivers per victim.
pub fn run_toa(scenario: &Scenario, victims: VictimSampling, trials: usize) -> Result<AttackOutcome> {
    let lattice = scenario.lattice()?;
    let radius = scenario.params().radius;
    run_trials(trials, victim_seed(scenario.params().seed), Purpose::Receivers, |_, rng| {
        let p = sample_victim(victims, radius, &lattice, rng);
        let mut setup = place_receivers(rng, radius)?;
        setup.toa = toa_measure(p, &setup.receivers, scenario.clusters())?;
        Ok(TrialOutcome {
            error: p.dist(toa_localize(&setup, radius)),
            miss: false,
            rate: None,
        })
    })
}

/// RFPM matching against a database built on the probe lattice; victims are
/// always continuous since a lattice victim matches its own entry exactly.
pub fn run_rfpm(scenario: &Scenario, trials: usize) -> Result<AttackOutcome> {
    let lattice = scenario.lattice()?;
    let db = rfpm_build_db(scenario, &lattice)?;
    let radius = scenario.params().radius;
    run_trials(trials, victim_seed(scenario.params().seed), Purpose::Fingerprint, |_, rng| {
        let p = sample_victim(VictimSampling::Continuous, radius, &lattice, rng);
        let h = rfpm_observe(scenario, p, rng)?;
        let (est, _) = rfpm_localize(&h.subbands, &db)?;
        Ok(TrialOutcome {
            error: p.dist(est),
            miss: false,
            rate: None,
        })
    })
}

fn run_baselines(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut rows = Vec::new();
    let b = ExperimentKind::Baselines;
    for &n in &config.n_list {
        for &nb in &config.nbar_list {
            for &k in &config.k_list {
                for &snr in &config.snr_db_list {
                    let params = Params {
                        n_tx: n,
                        n_rx: nb,
                        subbands: k,
                        ..config.params.clone()
                    };
                    let scenario = scenario_at_snr(params, snr)?;
                    let p = scenario.params();
                    for &mode in &config.modes {
                        let run = run_pf(&scenario, &attack_config(config, mode, 1), config.trials)?;
                        rows.push(row(b, AttackKind::Pf, Some(mode), p, snr, 1, config.victims, &run));
                    }
                    let cid = run_cid(&scenario, config.victims, config.trials)?;
                    rows.push(row(b, AttackKind::Cid, None, p, snr, 1, config.victims, &cid));
                    let toa = run_toa(&scenario, config.victims, config.trials)?;
                    rows.push(row(b, AttackKind::Toa, None, p, snr, 1, config.victims, &toa));
                    let rfpm = run_rfpm(&scenario, config.trials)?;
                    rows.push(row(b, AttackKind::Rfpm, None, p, snr, 1, VictimSampling::Continuous, &rfpm));
                }
            }
        }
    }
    Ok(vec![OutputFile {
        name: "baselines.csv".into(),
        contents: report_csv(&rows),
    }])
}

/// Runs the configured experiment and returns its files, sorted by name.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let kinds: Vec<ExperimentKind> = match config.kind {
        ExperimentKind::All => ExperimentKind::ALL.to_vec(),
        k => vec![k],
    };
    let mut files = Vec::new();
    for kind in kinds {
        files.extend(match kind {
            ExperimentKind::Map => run_map(config)?,
            ExperimentKind::RmseVsK => run_rmse_vs_k(config)?,
            ExperimentKind::RmseVsR => run_rmse_vs_r(config)?,
            ExperimentKind::Ccdf => run_ccdf(config)?,
            ExperimentKind::Analysis => run_analysis(config)?,
            ExperimentKind::Mitigation => run_mitigation(config)?,
            ExperimentKind::Baselines => run_baselines(config)?,
            ExperimentKind::All => unreachable!("expanded above"),
        });
    }
    files.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(files)
}

/// Failure while writing outputs.
#[derive(Debug, thiserror::Error)]
pub enum WriteError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// Writes `files` under `dir`, creating it when needed.
pub fn write_outputs(dir: &Path, files: &[OutputFile]) -> std::result::Result<Vec<PathBuf>, WriteError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| WriteError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    files
        .iter()
        .map(|f| {
            let path = dir.join(&f.name);
            std::fs::write(&path, &f.contents).map_err(io(&path))?;
            Ok(path)
        })
        .collect()
}

/// Whether an error is a budget or feasibility refusal.
pub fn is_refusal(e: &Error) -> bool {
    matches!(e, Error::Budget { .. })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.params = Params {
            n_tx: 2,
            subbands: 2,
            clusters: 4,
            radius: 4.0,
            grid_x: 16,
            grid_y: 16,
            ..Params::default()
        };
        c.n_list = vec![2];
        c.k_list = vec![1, 2];
        c.r_list = vec![4.0];
        c.trials = 40;
        c.samples_per_position = 2;
        c.analysis_draws = 4;
        c.analysis_positions = 100;
        c.u_list = vec![1, 2];
        c
    }

    #[test]
    fn report_rows_follow_header() {
        let mut c = tiny();
        c.kind = ExperimentKind::RmseVsK;
        let files = run_experiment(&c).unwrap();
        assert_eq!(files.len(), 1);
        let lines: Vec<&str> = files[0].contents.lines().collect();
        assert_eq!(lines[0], REPORT_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 2);
        let cols = REPORT_HEADER.split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
        assert!(lines[1].starts_with("rmse-vs-k,pf,1,2,1,1,4,4,inf,1,continuous,40,"));
    }

    #[test]
    fn radius_sweep_scales_clusters() {
        let mut c = tiny();
        c.kind = ExperimentKind::RmseVsR;
        c.modes = vec![FeedbackMode::Subband];
        c.r_list = vec![4.0, 6.0];
        let files = run_experiment(&c).unwrap();
        let ls: Vec<&str> = files[0].contents.lines().skip(1).map(|l| l.split(',').nth(6).unwrap()).collect();
        assert_eq!(ls, vec!["2", "4"]);
    }

    #[test]
    fn budget_refusal() {
        let mut c = tiny();
        c.kind = ExperimentKind::Analysis;
        c.max_pmf_entries = 10;
        let e = run_experiment(&c).unwrap_err();
        assert!(is_refusal(&e));
    }
}
