//! Accuracy-constrained hyper-parameter reduction.
//!
//! Every tunable parameter (`d`, `l` for ID-level, `q`) has an ascending list
//! of admitted values ending at the baseline. Each iteration picks the
//! parameter whose next binary-search candidate promises the largest saving
//! according to the cost model, retrains a model with that value and keeps it
//! only if its evaluation accuracy stays above `baseline - threshold`. An
//! accepted value moves the search window to smaller values, a rejected one
//! to larger values. The loop ends when every window is empty.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cost::{savings, ResourceReport, Savings};
use crate::data::{Dataset, Normalization};
use crate::encoders::Encoder;
use crate::error::{Error, Result};
use crate::model::{EncodedSet, EncoderKind, HdcConfig, TrainOptions, TrainedModel, TrainingState};
use crate::rng::Seeds;

/// Slack on the accuracy gate so that a candidate matching the floor exactly
/// is not rejected by rounding.
const ACCURACY_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Param {
    D,
    L,
    Q,
}

impl Param {
    pub const ALL: [Param; 3] = [Param::D, Param::L, Param::Q];

    pub fn get(self, config: &HdcConfig) -> usize {
        match self {
            Param::D => config.dims,
            Param::L => config.levels,
            Param::Q => config.bitwidth as usize,
        }
    }

    pub fn set(self, config: &HdcConfig, value: usize) -> HdcConfig {
        let mut out = *config;
        match self {
            Param::D => out.dims = value,
            Param::L => out.levels = value,
            Param::Q => out.bitwidth = value as u32,
        }
        out
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::D => "d",
            Param::L => "l",
            Param::Q => "q",
        })
    }
}

impl FromStr for Param {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(Param::D),
            "l" => Ok(Param::L),
            "q" => Ok(Param::Q),
            other => Err(Error::InvalidConfig(format!("unknown parameter `{other}`"))),
        }
    }
}

pub const DEFAULT_D: &[usize] = &[200, 500, 1000, 2000, 4000, 6000, 8000, 10000];
pub const DEFAULT_L: &[usize] = &[4, 16, 32, 64, 128, 256, 512, 1024];
pub const DEFAULT_Q: &[usize] = &[1, 2, 3, 4, 5, 7, 8, 13, 14, 16];

/// Admitted values per parameter, ascending, baseline last.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpace {
    pub d: Vec<usize>,
    pub l: Vec<usize>,
    pub q: Vec<usize>,
}

impl Default for ParamSpace {
    fn default() -> Self {
        Self { d: DEFAULT_D.to_vec(), l: DEFAULT_L.to_vec(), q: DEFAULT_Q.to_vec() }
    }
}

impl ParamSpace {
    pub fn values(&self, param: Param) -> &[usize] {
        match param {
            Param::D => &self.d,
            Param::L => &self.l,
            Param::Q => &self.q,
        }
    }

    /// Parameters the encoder exposes: `d, l, q` for ID-level, `d, q` for
    /// projection.
    pub fn params(kind: EncoderKind) -> &'static [Param] {
        match kind {
            EncoderKind::IdLevel => &[Param::D, Param::L, Param::Q],
            EncoderKind::Projection => &[Param::D, Param::Q],
        }
    }

    /// Keeps the values below the baseline's and appends the baseline, so
    /// the lists are valid for `baseline` whatever they held before.
    pub fn fitted_to(&self, baseline: &HdcConfig) -> Self {
        let fit = |values: &[usize], base: usize| {
            let mut out: Vec<usize> = values.iter().copied().filter(|&v| v < base).collect();
            out.sort_unstable();
            out.dedup();
            out.push(base);
            out
        };
        Self {
            d: fit(&self.d, baseline.dims),
            l: if baseline.encoder == EncoderKind::IdLevel { fit(&self.l, baseline.levels) } else { self.l.clone() },
            q: fit(&self.q, baseline.bitwidth as usize),
        }
    }

    pub fn validate(&self, baseline: &HdcConfig) -> Result<()> {
        for &p in Self::params(baseline.encoder) {
            let v = self.values(p);
            if v.is_empty() {
                return Err(Error::InvalidConfig(format!("admitted values for {p} are empty")));
            }
            if v.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!("admitted values for {p} must be strictly ascending")));
            }
            if *v.last().expect("nonempty") != p.get(baseline) {
                return Err(Error::InvalidConfig(format!(
                    "last admitted value for {p} must be the baseline {}",
                    p.get(baseline)
                )));
            }
            for &x in v {
                p.set(baseline, x).validate()?;
            }
        }
        Ok(())
    }

    /// `2 * H * ceil(log2 max|V|) + 1`.
    pub fn probe_bound(&self, kind: EncoderKind) -> usize {
        let params = Self::params(kind);
        let max_len = params.iter().map(|&p| self.values(p).len()).max().unwrap_or(1);
        let log = (max_len as f64).log2().ceil() as usize;
        2 * params.len() * log + 1
    }
}

/// Inclusive binary-search window over indices of an admitted-value list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lower: usize,
    /// One past the last admitted index, so an empty window needs no sign.
    pub end: usize,
}

impl Window {
    pub fn full(len: usize) -> Self {
        Self { lower: 0, end: len }
    }

    pub fn is_empty(&self) -> bool {
        self.lower >= self.end
    }

    /// `floor((lower + upper) / 2)`, if the window is non-empty.
    pub fn mid(&self) -> Option<usize> {
        (!self.is_empty()).then(|| (self.lower + self.end - 1) / 2)
    }

    /// Accepting index `k` leaves the values strictly below it.
    pub fn accept(&mut self, k: usize) {
        self.end = k;
    }

    /// Rejecting index `k` leaves the values strictly above it.
    pub fn reject(&mut self, k: usize) {
        self.lower = k + 1;
    }
}

/// Which cost-model ratio ranks candidate steps first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SavingsPriority {
    #[default]
    MemoryFirst,
    ComputeFirst,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub train: TrainOptions,
    /// Tolerated drop in evaluation accuracy, as a fraction.
    pub threshold: f64,
    pub seed: u64,
    pub priority: SavingsPriority,
    pub normalization: Normalization,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            train: TrainOptions::default(),
            threshold: 0.01,
            seed: 0,
            priority: SavingsPriority::default(),
            normalization: Normalization::None,
        }
    }
}

/// The data the optimizer may see. There is deliberately no test split.
#[derive(Clone, Copy, Debug)]
pub struct Workload<'a> {
    pub train: &'a Dataset,
    pub eval: &'a Dataset,
}

/// A trained model with the encodings it was trained and scored on.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub state: TrainingState,
    pub train_set: EncodedSet,
    pub eval_set: EncodedSet,
    pub eval_accuracy: f64,
}

impl Candidate {
    pub fn config(&self) -> HdcConfig {
        self.state.model().config
    }

    pub fn model(&self) -> &TrainedModel {
        self.state.model()
    }
}

/// Trains `config` from scratch: fresh encoder, single pass, retraining.
pub fn train_candidate(workload: Workload<'_>, config: HdcConfig, opts: &OptimizerOptions) -> Result<Candidate> {
    if workload.train.is_empty() || workload.eval.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let encoder = Encoder::build(&config, Seeds(opts.seed))?;
    let train_set = EncodedSet::encode(&encoder, workload.train)?;
    let eval_set = EncodedSet::encode(&encoder, workload.eval)?;
    let mut state = TrainingState::single_pass(
        encoder,
        config,
        opts.seed,
        &train_set,
        opts.train.similarity,
        opts.normalization,
    )?;
    state.retrain(&train_set, &opts.train)?;
    let eval_accuracy = state.model().evaluate(&eval_set)?;
    Ok(Candidate { state, train_set, eval_set, eval_accuracy })
}

#[derive(Clone, Debug)]
pub struct Baseline {
    pub candidate: Candidate,
    pub accuracy: f64,
    pub floor: f64,
}

pub fn establish_baseline(workload: Workload<'_>, config: HdcConfig, opts: &OptimizerOptions) -> Result<Baseline> {
    if !(opts.threshold >= 0.0) {
        return Err(Error::InvalidConfig(format!("threshold must be non-negative, got {}", opts.threshold)));
    }
    let candidate = train_candidate(workload, config, opts)?;
    let accuracy = candidate.eval_accuracy;
    Ok(Baseline { candidate, accuracy, floor: accuracy - opts.threshold })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Baseline,
    Probe,
}

/// One trained-and-evaluated configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub kind: RecordKind,
    pub param: Option<Param>,
    pub value: Option<usize>,
    /// Projected savings of the probed config over the config current at the
    /// time of the probe.
    pub memory_ratio: f64,
    pub compute_ratio: f64,
    pub eval_accuracy: f64,
    pub accuracy_floor: f64,
    pub accepted: bool,
    pub config: HdcConfig,
    pub memory_bits: u64,
    pub compute_ops: u64,
}

/// Append-only log of every probe, stored as one JSON object per line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OptTrace {
    pub records: Vec<TraceRecord>,
}

impl OptTrace {
    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    /// Records that required training a candidate (excludes the baseline).
    pub fn probes(&self) -> usize {
        self.records.iter().filter(|r| r.kind == RecordKind::Probe).count()
    }

    pub fn accepted_steps(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.kind == RecordKind::Probe && r.accepted)
    }

    pub fn baseline(&self) -> Option<&TraceRecord> {
        self.records.iter().find(|r| r.kind == RecordKind::Baseline)
    }

    /// The last accepted record, or the baseline when nothing was accepted.
    pub fn final_record(&self) -> Option<&TraceRecord> {
        self.records.iter().rev().find(|r| r.accepted)
    }

    /// Baseline-to-final `(memory, compute)` reduction factors.
    pub fn factors(&self) -> Option<Savings> {
        let (first, last) = (self.baseline()?, self.final_record()?);
        savings(&first.config, &last.config).ok()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r).map_err(std::io::Error::other)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> Result<Self> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let record: TraceRecord =
                serde_json::from_str(&line).map_err(|e| Error::Trace { line: i + 1, msg: e.to_string() })?;
            records.push(record);
        }
        let trace = Self { records };
        trace.check()?;
        Ok(trace)
    }

    /// Structural checks: one leading baseline, consecutive iterations, and
    /// probes that carry their parameter and value.
    pub fn check(&self) -> Result<()> {
        let err = |line: usize, msg: &str| Error::Trace { line, msg: msg.into() };
        match self.records.first() {
            None => return Err(err(1, "trace is empty")),
            Some(r) if r.kind != RecordKind::Baseline => return Err(err(1, "first record must be the baseline")),
            _ => {}
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.iteration != i {
                return Err(err(i + 1, "iterations must count up from 0"));
            }
            if i > 0 && (r.kind != RecordKind::Probe || r.param.is_none() || r.value.is_none()) {
                return Err(err(i + 1, "every record after the first must be a probe with a parameter and value"));
            }
            if !r.config.same_workload(&self.records[0].config) {
                return Err(err(i + 1, "workload differs from the baseline"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
}

/// Optimizer state between iterations.
#[derive(Clone, Debug)]
pub struct SearchState {
    pub space: ParamSpace,
    windows: [Window; 3],
    active: [bool; 3],
    pub current: Candidate,
    pub baseline_accuracy: f64,
    pub floor: f64,
    pub trace: OptTrace,
}

impl SearchState {
    pub fn new(space: ParamSpace, baseline: Baseline) -> Result<Self> {
        let config = baseline.candidate.config();
        space.validate(&config)?;
        let mut windows = [Window::full(0); 3];
        let mut active = [false; 3];
        for &p in ParamSpace::params(config.encoder) {
            windows[p.index()] = Window::full(space.values(p).len());
            active[p.index()] = true;
        }
        let report = ResourceReport::of(&config);
        let mut trace = OptTrace::default();
        trace.push(TraceRecord {
            iteration: 0,
            kind: RecordKind::Baseline,
            param: None,
            value: None,
            memory_ratio: 1.0,
            compute_ratio: 1.0,
            eval_accuracy: baseline.accuracy,
            accuracy_floor: baseline.floor,
            accepted: true,
            config,
            memory_bits: report.memory_bits,
            compute_ops: report.total_ops(),
        });
        Ok(Self {
            space,
            windows,
            active,
            current: baseline.candidate,
            baseline_accuracy: baseline.accuracy,
            floor: baseline.floor,
            trace,
        })
    }

    pub fn window(&self, param: Param) -> Window {
        self.windows[param.index()]
    }

    pub fn is_active(&self, param: Param) -> bool {
        self.active[param.index()]
    }

    pub fn active_params(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|&p| self.is_active(p)).collect()
    }

    /// The next value to try for `param`, or `None` once its window is empty
    /// (which also marks it exhausted). A candidate equal to the current value
    /// would change nothing, so it is accepted on the spot and the search
    /// moves on without training.
    pub fn propose_candidate(&mut self, param: Param) -> Option<(usize, usize)> {
        let values = self.space.values(param).to_vec();
        loop {
            if !self.is_active(param) {
                return None;
            }
            let w = &mut self.windows[param.index()];
            let Some(mid) = w.mid() else {
                self.active[param.index()] = false;
                return None;
            };
            if values[mid] == param.get(&self.current.config()) {
                w.accept(mid);
                continue;
            }
            return Some((mid, values[mid]));
        }
    }

    /// Picks the active parameter whose candidate saves the most, memory
    /// first (or compute first), ties going to the fixed order `d, l, q`.
    pub fn greedy_select(&mut self, priority: SavingsPriority) -> Result<Option<(Param, usize, usize, Savings)>> {
        let current = self.current.config();
        let mut best: Option<(Param, usize, usize, Savings)> = None;
        for p in Param::ALL {
            let Some((index, value)) = self.propose_candidate(p) else { continue };
            let s = savings(&current, &p.set(&current, value))?;
            let key = |s: &Savings| match priority {
                SavingsPriority::MemoryFirst => (s.memory_ratio, s.compute_ratio),
                SavingsPriority::ComputeFirst => (s.compute_ratio, s.memory_ratio),
            };
            let better = match &best {
                None => true,
                Some((_, _, _, b)) => key(&s).partial_cmp(&key(b)) == Some(std::cmp::Ordering::Greater),
            };
            if better {
                best = Some((p, index, value, s));
            }
        }
        Ok(best)
    }

    /// Trains and gates one candidate value, then updates the window.
    pub fn try_step(
        &mut self,
        workload: Workload<'_>,
        param: Param,
        index: usize,
        opts: &OptimizerOptions,
    ) -> Result<StepOutcome> {
        let value = self.space.values(param)[index];
        let current = self.current.config();
        if value == param.get(&current) {
            self.windows[param.index()].accept(index);
            return Ok(StepOutcome::Accepted);
        }
        let config = param.set(&current, value);
        let projected = savings(&current, &config)?;
        let trained = match self.build(workload, param, config, opts) {
            Ok(c) => Some(c),
            Err(Error::AccumulatorOverflow) => {
                log::warn!("{config}: accumulator overflow, treating as rejected");
                None
            }
            Err(e) => return Err(e),
        };
        let eval_accuracy = trained.as_ref().map_or(0.0, |c| c.eval_accuracy);
        let accepted = trained.is_some() && eval_accuracy + ACCURACY_EPS >= self.floor;
        let report = ResourceReport::of(&config);
        self.trace.push(TraceRecord {
            iteration: self.trace.records.len(),
            kind: RecordKind::Probe,
            param: Some(param),
            value: Some(value),
            memory_ratio: projected.memory_ratio,
            compute_ratio: projected.compute_ratio,
            eval_accuracy,
            accuracy_floor: self.floor,
            accepted,
            config,
            memory_bits: report.memory_bits,
            compute_ops: report.total_ops(),
        });
        log::info!(
            "probe {param}={value}: eval accuracy {eval_accuracy:.4} (floor {:.4}) {}",
            self.floor,
            if accepted { "accepted" } else { "rejected" }
        );
        if accepted {
            self.current = trained.expect("accepted implies trained");
            self.windows[param.index()].accept(index);
            Ok(StepOutcome::Accepted)
        } else {
            self.windows[param.index()].reject(index);
            Ok(StepOutcome::Rejected)
        }
    }

    /// Builds the candidate for `config`, reusing what the change allows. A
    /// new `q` on ID-level encoding keeps the encoder and shadow vectors;
    /// everything else is regenerated from the seed.
    fn build(&self, workload: Workload<'_>, param: Param, config: HdcConfig, opts: &OptimizerOptions) -> Result<Candidate> {
        if param == Param::Q && config.encoder == EncoderKind::IdLevel {
            let mut state = self.current.state.clone();
            state.requantize(config.bitwidth)?;
            state.retrain(&self.current.train_set, &opts.train)?;
            let eval_accuracy = state.model().evaluate(&self.current.eval_set)?;
            return Ok(Candidate {
                state,
                train_set: self.current.train_set.clone(),
                eval_set: self.current.eval_set.clone(),
                eval_accuracy,
            });
        }
        train_candidate(workload, config, opts)
    }
}

#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub baseline_model: TrainedModel,
    pub baseline_accuracy: f64,
    pub floor: f64,
    pub model: TrainedModel,
    pub eval_accuracy: f64,
    pub trace: OptTrace,
}

impl OptimizeOutcome {
    pub fn config(&self) -> HdcConfig {
        self.model.config
    }
}

/// Runs the full loop from a baseline configuration.
pub fn optimize(
    workload: Workload<'_>,
    baseline: HdcConfig,
    space: &ParamSpace,
    opts: &OptimizerOptions,
) -> Result<OptimizeOutcome> {
    space.validate(&baseline)?;
    let base = establish_baseline(workload, baseline, opts)?;
    log::info!("baseline {baseline}: eval accuracy {:.4}, floor {:.4}", base.accuracy, base.floor);
    let baseline_model = base.candidate.model().clone();
    let mut state = SearchState::new(space.clone(), base)?;
    while let Some((param, index, _, _)) = state.greedy_select(opts.priority)? {
        state.try_step(workload, param, index, opts)?;
    }
    Ok(OptimizeOutcome {
        baseline_model,
        baseline_accuracy: state.baseline_accuracy,
        floor: state.floor,
        eval_accuracy: state.current.eval_accuracy,
        model: state.current.state.into_model(),
        trace: state.trace,
    })
}
