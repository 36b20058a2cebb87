//! The precoder-feedback attack: a probabilistic map from feedback vectors to
//! lattice positions, and centroid localization of overheard feedback.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{estimate_channel, realize, ObservationModel};
use crate::codebook::{
    encode_feedback, localization_bits, select, select_mitigated, spectral_efficiency, Codebook,
    localization_hex, Feedback, FeedbackLayout, FeedbackMode, RateTable,
};
use crate::error::{invalid, Result};
use crate::geometry::{uniform_in_disk, Point};
use crate::rng::{stream, Purpose};
use crate::scenario::{ProbeLattice, Scenario};
use crate::stats::RmseReport;

/// Where victims are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VictimSampling {
    /// Uniform on the disk.
    #[default]
    Continuous,
    /// Uniform over the probe lattice points.
    Lattice,
}

impl VictimSampling {
    pub fn as_str(self) -> &'static str {
        match self {
            VictimSampling::Continuous => "continuous",
            VictimSampling::Lattice => "lattice",
        }
    }
}

/// How feedback is produced, shared by map building and the attack stage.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub mode: FeedbackMode,
    pub model: ObservationModel,
    /// Observations per lattice position while building the map.
    pub samples_per_position: usize,
    /// Mitigation list size `U` applied by the victim; 1 disables it.
    pub mitigation: usize,
    pub victims: VictimSampling,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            mode: FeedbackMode::Subband,
            model: ObservationModel::default(),
            samples_per_position: 10,
            mitigation: 1,
            victims: VictimSampling::Continuous,
        }
    }
}

/// One feedback report with the rate it achieves on the true channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub feedback: Feedback,
    pub bits: Vec<u32>,
    pub rate: f64,
}

/// Produces feedback for UEs of one scenario.
#[derive(Debug, Clone)]
pub struct Observer<'a> {
    scenario: &'a Scenario,
    codebook: Codebook,
    layout: FeedbackLayout,
    mode: FeedbackMode,
    model: ObservationModel,
}

impl<'a> Observer<'a> {
    pub fn new(scenario: &'a Scenario, mode: FeedbackMode, model: ObservationModel) -> Result<Self> {
        let params = scenario.params();
        let codebook = Codebook::new(params.n_tx, params.oversampling)?;
        let layout = FeedbackLayout::new(mode, codebook.size(), params.subbands)?;
        Ok(Self {
            scenario,
            codebook,
            layout,
            mode,
            model,
        })
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    pub fn layout(&self) -> FeedbackLayout {
        self.layout
    }

    /// Feedback of a UE at `p`; `mitigation > 1` draws among the top-U.
    pub fn observe<R: Rng + ?Sized>(&self, p: Point, mitigation: usize, rng: &mut R) -> Result<Observation> {
        let params = self.scenario.params();
        let h = realize(self.scenario, p, &self.model, rng)?;
        let est = estimate_channel(&h, params.sigma, rng)?;
        let table = RateTable::new(&self.codebook, &est.subbands, params.sigma_v)?;
        let selection = if mitigation > 1 {
            select_mitigated(&table, mitigation, self.mode, rng)?
        } else {
            select(self.mode, &table)?
        };
        let rate = if params.sigma == 0.0 {
            selection.rate(&table)
        } else {
            spectral_efficiency(&h.subbands, &selection.precoders(&self.codebook)?, params.sigma_v)?
        };
        let feedback = encode_feedback(&selection, &self.codebook)?;
        let bits = localization_bits(&feedback);
        Ok(Observation {
            feedback,
            bits,
            rate,
        })
    }
}

/// Map key: `B(b) = sum_k (N O)^k b_k` when it fits in 64 bits, else `b`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MapKey {
    Packed(u64),
    Vector(Vec<u32>),
}

pub fn map_key(b: &[u32], codebook_size: usize) -> MapKey {
    let base = codebook_size as u128;
    let fits = base
        .checked_pow(b.len() as u32)
        .is_some_and(|v| v <= u64::MAX as u128 + 1);
    if fits {
        MapKey::Packed(crate::analysis::pmf_index(b, codebook_size) as u64)
    } else {
        MapKey::Vector(b.to_vec())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Cell {
    count: u64,
    sum_x: f64,
    sum_y: f64,
}

/// Estimate for one overheard feedback vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub position: Point,
    /// The vector was never observed while building the map.
    pub miss: bool,
}

/// Outcome of localizing one victim.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationResult {
    pub truth: Point,
    pub estimate: Point,
    pub error: f64,
    pub miss: bool,
}

/// Empirical feedback histograms per lattice position.
#[derive(Debug, Clone)]
pub struct FeedbackMap {
    mode: FeedbackMode,
    codebook_size: usize,
    subbands: usize,
    samples_per_position: usize,
    positions: Vec<Point>,
    /// Per position: distinct vectors with counts, ordered by vector.
    histograms: Vec<Vec<(Vec<u32>, u32)>>,
    cells: HashMap<MapKey, Cell>,
}

impl FeedbackMap {
    /// Builds a map from raw per-position observations.
    pub fn from_observations(
        mode: FeedbackMode,
        codebook_size: usize,
        subbands: usize,
        positions: Vec<Point>,
        observations: Vec<Vec<Vec<u32>>>,
    ) -> Result<Self> {
        if positions.is_empty() || positions.len() != observations.len() {
            return Err(invalid("lattice", "one observation list per position required"));
        }
        let t = observations[0].len();
        if t == 0 || observations.iter().any(|o| o.len() != t) {
            return Err(invalid("samples_per_position", "equal, nonzero sample counts required"));
        }
        let mut cells: HashMap<MapKey, Cell> = HashMap::new();
        let mut histograms = Vec::with_capacity(positions.len());
        for (s, obs) in positions.iter().zip(observations) {
            let mut sorted = obs;
            sorted.sort();
            let mut hist: Vec<(Vec<u32>, u32)> = Vec::new();
            for b in sorted {
                match hist.last_mut() {
                    Some((last, c)) if *last == b => *c += 1,
                    _ => hist.push((b, 1)),
                }
            }
            for (b, c) in &hist {
                let cell = cells.entry(map_key(b, codebook_size)).or_default();
                cell.count += *c as u64;
                cell.sum_x += s.x * *c as f64;
                cell.sum_y += s.y * *c as f64;
            }
            histograms.push(hist);
        }
        Ok(Self {
            mode,
            codebook_size,
            subbands,
            samples_per_position: t,
            positions,
            histograms,
            cells,
        })
    }

    pub fn mode(&self) -> FeedbackMode {
        self.mode
    }

    pub fn subbands(&self) -> usize {
        self.subbands
    }

    pub fn samples_per_position(&self) -> usize {
        self.samples_per_position
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    /// Distinct vectors seen at position `s`, with counts.
    pub fn histogram(&self, s: usize) -> &[(Vec<u32>, u32)] {
        &self.histograms[s]
    }

    pub fn distinct_vectors(&self) -> usize {
        self.cells.len()
    }

    /// `p_map(b, s)`.
    pub fn p_map(&self, b: &[u32], s: usize) -> f64 {
        self.histograms[s]
            .iter()
            .find(|(v, _)| v == b)
            .map_or(0.0, |(_, c)| *c as f64 / self.samples_per_position as f64)
    }

    /// `p(b) = sum_s p_map(b, s) / |S|`.
    pub fn p_global(&self, b: &[u32]) -> f64 {
        self.cells.get(&map_key(b, self.codebook_size)).map_or(0.0, |c| {
            c.count as f64 / (self.samples_per_position * self.positions.len()) as f64
        })
    }

    /// Count-weighted centroid of the positions where `b` was observed; the
    /// cell center when it never was.
    pub fn localize(&self, b: &[u32]) -> Estimate {
        match self.cells.get(&map_key(b, self.codebook_size)) {
            Some(c) if c.count > 0 => Estimate {
                position: Point::new(c.sum_x / c.count as f64, c.sum_y / c.count as f64),
                miss: false,
            },
            _ => Estimate {
                position: Point::ORIGIN,
                miss: true,
            },
        }
    }

    /// `x_m,y_m,b_hex,count`, one row per (position, vector).
    pub fn to_csv(&self) -> String {
        let beam_bits = self.codebook_size.trailing_zeros();
        let mut s = String::from("x_m,y_m,b_hex,count\n");
        for (p, hist) in self.positions.iter().zip(&self.histograms) {
            for (b, c) in hist {
                writeln!(s, "{},{},{},{}", p.x, p.y, localization_hex(b, beam_bits), c).unwrap();
            }
        }
        s
    }
}

/// Observes `T` feedback reports at every lattice position.
pub fn build_map(scenario: &Scenario, lattice: &ProbeLattice, config: &AttackConfig, seed: u64) -> Result<FeedbackMap> {
    if config.samples_per_position == 0 {
        return Err(invalid("samples_per_position", "T must be >= 1"));
    }
    let observer = Observer::new(scenario, config.mode, config.model)?;
    let observations = lattice
        .points()
        .par_iter()
        .enumerate()
        .map(|(s, &p)| {
            let mut rng = stream(seed, Purpose::MapSample, s as u64, 0);
            (0..config.samples_per_position)
                .map(|_| observer.observe(p, config.mitigation, &mut rng).map(|o| o.bits))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let params = scenario.params();
    FeedbackMap::from_observations(
        config.mode,
        params.codebook_size(),
        params.subbands,
        lattice.points().to_vec(),
        observations,
    )
}

/// Localizes one overheard vector against the truth.
pub fn localize(truth: Point, b: &[u32], map: &FeedbackMap) -> LocalizationResult {
    let est = map.localize(b);
    LocalizationResult {
        truth,
        estimate: est.position,
        error: truth.dist(est.position),
        miss: est.miss,
    }
}

/// One attack trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub error: f64,
    pub miss: bool,
    /// Achieved rate, when the trial has one.
    pub rate: Option<f64>,
}

/// Attack statistics over all trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackOutcome {
    pub report: RmseReport,
    /// Mean achieved rate, bits/s/Hz, over trials that report one.
    pub mean_rate: Option<f64>,
}

/// Runs `trials` independent trials in parallel; trial `t` gets its own
/// stream, so results do not depend on scheduling.
pub fn run_trials<F>(trials: usize, seed: u64, purpose: Purpose, trial: F) -> Result<AttackOutcome>
where
    F: Fn(usize, &mut crate::rng::StreamRng) -> Result<TrialOutcome> + Sync,
{
    if trials == 0 {
        return Err(invalid("trials", "at least one trial required"));
    }
    let outcomes = (0..trials)
        .into_par_iter()
        .map(|t| trial(t, &mut stream(seed, purpose, t as u64, 0)))
        .collect::<Result<Vec<_>>>()?;
    let misses = outcomes.iter().filter(|o| o.miss).count();
    let rates: Vec<f64> = outcomes.iter().filter_map(|o| o.rate).collect();
    let mean_rate = (!rates.is_empty()).then(|| rates.iter().sum::<f64>() / rates.len() as f64);
    Ok(AttackOutcome {
        report: RmseReport::from_errors(outcomes.iter().map(|o| o.error).collect(), misses),
        mean_rate,
    })
}

/// Draws a victim position.
pub fn sample_victim<R: Rng + ?Sized>(sampling: VictimSampling, radius: f64, lattice: &ProbeLattice, rng: &mut R) -> Point {
    match sampling {
        VictimSampling::Continuous => uniform_in_disk(rng, radius),
        VictimSampling::Lattice => lattice.points()[rng.random_range(0..lattice.len())],
    }
}

/// Localizes `trials` victims with fresh channel realizations.
pub fn run_attack(
    scenario: &Scenario,
    map: &FeedbackMap,
    config: &AttackConfig,
    trials: usize,
    seed: u64,
) -> Result<AttackOutcome> {
    let observer = Observer::new(scenario, config.mode, config.model)?;
    let lattice = ProbeLattice::from_points(map.positions().to_vec());
    let radius = scenario.params().radius;
    run_trials(trials, seed, Purpose::Victim, |_, rng| {
        let p = sample_victim(config.victims, radius, &lattice, rng);
        let obs = observer.observe(p, config.mitigation, rng)?;
        let res = localize(p, &obs.bits, map);
        Ok(TrialOutcome {
            error: res.error,
            miss: res.miss,
            rate: Some(obs.rate),
        })
    })
}
