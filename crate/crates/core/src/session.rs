//! Pausable solver sessions.
//!
//! A [`Session`] wraps a [`Colony`] in a `CREATED -> RUNNING <-> PAUSED ->
//! FINISHED` state machine. Steering updates submitted while running are
//! queued and applied, in submission order, at the next iteration boundary;
//! while created or paused they apply immediately. Every applied update is
//! recorded with the number of iterations completed at that moment, which is
//! all a replay needs to reproduce the run.

use std::collections::VecDeque;
use std::fmt;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acs::{AcsError, AcsParams, Colony, Event, PheromoneSummary, SolutionRecord, SteeringSource};
use crate::instance::{Instance, InstanceError, Tour};
use crate::oracle::{exact_optimum, OptimalRecord, OracleError, HELD_KARP_MAX_NODES};
use crate::scalar::Scalar;
use crate::steering::{SteeringDocument, SteeringError, SteeringState, SteeringUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Created,
    Running,
    Paused,
    Finished,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Status::Created => "CREATED",
            Status::Running => "RUNNING",
            Status::Paused => "PAUSED",
            Status::Finished => "FINISHED",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("cannot {action} a session that is {status}")]
    IllegalTransition { action: &'static str, status: Status },
    #[error("session is finished")]
    Finished,
    #[error("optimum unavailable: instance has {n} nodes, exact solving stops at {HELD_KARP_MAX_NODES}")]
    OptimumUnavailable { n: usize },
    #[error("comparison needs a finished session, or a paused one with force")]
    NotComparable,
    #[error("cluster {index} has {size} nodes, at least 3 are needed")]
    ClusterTooSmall { index: usize, size: usize },
    #[error("clusters must partition the {n} nodes exactly once")]
    NotAPartition { n: usize },
    #[error("steering script entry {index} applies after iteration {iteration}, out of order or past the last iteration")]
    ScriptOrder { index: usize, iteration: usize },
    #[error("steering script entry {index}: {source}")]
    ScriptEntry { index: usize, source: SteeringError },
    #[error("provided optimum does not fit the instance: {0}")]
    BadOptimum(String),
    #[error(transparent)]
    Acs(#[from] AcsError),
    #[error(transparent)]
    Steering(#[from] SteeringError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("{context}: {source}")]
    Json { context: String, source: serde_json::Error },
}

fn io_err(context: impl Into<String>) -> impl FnOnce(io::Error) -> SessionError {
    let context = context.into();
    move |source| SessionError::Io { context, source }
}

fn json_err(context: impl Into<String>) -> impl FnOnce(serde_json::Error) -> SessionError {
    let context = context.into();
    move |source| SessionError::Json { context, source }
}

/// One applied steering update, as written to `steering-script.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Intervention<T> {
    /// Iterations completed when the update took effect.
    pub iteration_applied: usize,
    pub update: SteeringUpdate<T>,
}

/// Parameters plus the impact factor chosen before the run starts; the
/// content of `params.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunConfig<T> {
    pub hif: T,
    pub params: AcsParams<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub optimal: OptimalRecord,
    pub gap_percent: f64,
}

impl Comparison {
    pub fn new(best_length: u64, optimal: OptimalRecord) -> Self {
        let gap_percent = 100.0 * (best_length as f64 - optimal.length as f64) / optimal.length as f64;
        Comparison { optimal, gap_percent }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PheromoneView {
    #[serde(flatten)]
    pub summary: PheromoneSummary,
    pub values: Vec<Vec<f64>>,
}

/// Iteration-boundary view of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Scalar")]
pub struct Snapshot<T> {
    pub session_id: String,
    pub status: Status,
    pub iteration: usize,
    pub iterations: usize,
    pub best: SolutionRecord,
    pub pheromone: PheromoneView,
    /// State the colony runs under.
    pub steering: SteeringDocument<T>,
    /// Version including updates queued for the next boundary.
    pub latest_steering_version: u64,
    pub comparison: Option<Comparison>,
}

/// Content of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RunResult<T> {
    pub best_order: Vec<usize>,
    pub best_length: u64,
    pub optimum: Option<OptimalRecord>,
    pub gap_percent: Option<f64>,
    pub seed: u64,
    pub params: AcsParams<T>,
    pub steering_versions: Vec<u64>,
}

pub struct Session<T: Scalar> {
    id: String,
    colony: Colony<T>,
    initial_hif: T,
    status: Status,
    pending: VecDeque<SteeringUpdate<T>>,
    latest: SteeringState<T>,
    interventions: Vec<Intervention<T>>,
    applied_versions: Vec<u64>,
    events: Vec<Event>,
    optimum: Option<OptimalRecord>,
    comparison: Option<Comparison>,
}

impl<T: Scalar> Session<T> {
    /// New session with an empty interaction matrix and the given impact
    /// factor; pheromone is initialized from the nearest-neighbour tour.
    pub fn create(instance: Arc<Instance>, params: AcsParams<T>, initial_hif: T) -> Result<Self, SessionError> {
        let steering = SteeringState::new(instance.dimension(), initial_hif)?;
        let colony = Colony::new(instance, params)?.with_steering(steering.clone())?;
        Ok(Session {
            id: uuid::Uuid::new_v4().to_string(),
            colony,
            initial_hif,
            status: Status::Created,
            pending: VecDeque::new(),
            latest: steering,
            interventions: Vec::new(),
            applied_versions: Vec::new(),
            events: Vec::new(),
            optimum: None,
            comparison: None,
        })
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn iteration(&self) -> usize {
        self.colony.iteration()
    }

    pub fn instance(&self) -> &Arc<Instance> {
        self.colony.instance()
    }

    pub fn params(&self) -> &AcsParams<T> {
        self.colony.params()
    }

    pub fn config(&self) -> RunConfig<T> {
        RunConfig { hif: self.initial_hif, params: self.params().clone() }
    }

    pub fn colony(&self) -> &Colony<T> {
        &self.colony
    }

    pub fn best(&self) -> &SolutionRecord {
        self.colony.best()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn interventions(&self) -> &[Intervention<T>] {
        &self.interventions
    }

    /// Steering state including queued updates.
    pub fn latest_steering(&self) -> &SteeringState<T> {
        &self.latest
    }

    fn transition(&mut self, action: &'static str, from: Status, to: Status) -> Result<Status, SessionError> {
        if self.status != from {
            return Err(SessionError::IllegalTransition { action, status: self.status });
        }
        self.status = to;
        Ok(to)
    }

    pub fn start(&mut self) -> Result<Status, SessionError> {
        self.transition("start", Status::Created, Status::Running)
    }

    /// Running sessions only advance through [`Self::step`], so a pause always
    /// lands on an iteration boundary.
    pub fn pause(&mut self) -> Result<Status, SessionError> {
        self.transition("pause", Status::Running, Status::Paused)
    }

    pub fn resume(&mut self) -> Result<Status, SessionError> {
        self.transition("resume", Status::Paused, Status::Running)?;
        let mut sink = Vec::new();
        self.flush_pending(&mut sink)?;
        self.events.extend(sink);
        Ok(self.status)
    }

    /// Validates `update` and returns the version it will run under. Applied
    /// now when created or paused, at the next boundary when running.
    pub fn apply_steering_update(&mut self, update: SteeringUpdate<T>) -> Result<u64, SessionError> {
        if self.status == Status::Finished {
            return Err(SessionError::Finished);
        }
        let version = self.latest.apply(&update)?;
        self.pending.push_back(update);
        if self.status != Status::Running {
            let mut sink = Vec::new();
            self.flush_pending(&mut sink)?;
            self.events.extend(sink);
        }
        Ok(version)
    }

    fn flush_pending(&mut self, sink: &mut Vec<Event>) -> Result<(), SessionError> {
        while let Some(update) = self.pending.pop_front() {
            let version = self.colony.apply_steering(&update, sink)?;
            self.applied_versions.push(version);
            self.interventions.push(Intervention { iteration_applied: self.colony.iteration(), update });
        }
        Ok(())
    }

    /// Applies queued steering, then runs one iteration. Returns the events
    /// it produced.
    pub fn step(&mut self) -> Result<Vec<Event>, SessionError> {
        if self.status != Status::Running {
            return Err(SessionError::IllegalTransition { action: "step", status: self.status });
        }
        let mut sink = Vec::new();
        self.flush_pending(&mut sink)?;
        self.colony.iterate(&mut sink);
        if self.colony.is_done() {
            self.status = Status::Finished;
        }
        self.events.extend(sink.iter().cloned());
        Ok(sink)
    }

    /// Starts if needed and steps until finished or paused.
    pub fn run_to_end(&mut self) -> Result<&SolutionRecord, SessionError> {
        if self.status == Status::Created {
            self.start()?;
        }
        while self.status == Status::Running {
            self.step()?;
        }
        Ok(self.colony.best())
    }

    /// Runs to the end, applying scripted updates at their boundaries.
    pub fn run_scripted(&mut self, script: &mut impl SteeringSource<T>) -> Result<&SolutionRecord, SessionError> {
        if self.status == Status::Created {
            self.start()?;
        }
        while self.status == Status::Running {
            for update in script.drain(self.iteration()) {
                self.apply_steering_update(update)?;
            }
            self.step()?;
        }
        Ok(self.colony.best())
    }

    pub fn snapshot(&self) -> Snapshot<T> {
        let pheromone = self.colony.pheromone();
        Snapshot {
            session_id: self.id.clone(),
            status: self.status,
            iteration: self.colony.iteration(),
            iterations: self.params().iterations,
            best: self.colony.best().clone(),
            pheromone: PheromoneView { summary: pheromone.summary(), values: pheromone.rows() },
            steering: self.colony.steering().expect("sessions always steer").to_document(),
            latest_steering_version: self.latest.version(),
            comparison: self.comparison.clone(),
        }
    }

    /// Registers an externally known optimum, used for instances too large
    /// for exact solving.
    pub fn register_optimum(&mut self, optimum: OptimalRecord) -> Result<(), SessionError> {
        let tour = Tour::new(self.instance(), optimum.order.clone())
            .map_err(|e| SessionError::BadOptimum(e.to_string()))?;
        if tour.length() != optimum.length {
            return Err(SessionError::BadOptimum(format!(
                "stated length {} but the tour measures {}",
                optimum.length,
                tour.length()
            )));
        }
        self.optimum = Some(optimum);
        Ok(())
    }

    /// Gap of the best tour to the optimum. Needs a finished session, or a
    /// paused one with `force`.
    pub fn compare_with_optimal(&mut self, force: bool) -> Result<Comparison, SessionError> {
        match (self.status, force) {
            (Status::Finished, _) | (Status::Paused, true) => {}
            _ => return Err(SessionError::NotComparable),
        }
        let optimum = match &self.optimum {
            Some(o) => o.clone(),
            None => {
                let n = self.instance().dimension();
                if n > HELD_KARP_MAX_NODES {
                    return Err(SessionError::OptimumUnavailable { n });
                }
                let o = exact_optimum(self.instance())?;
                self.optimum = Some(o.clone());
                o
            }
        };
        let comparison = Comparison::new(self.best().tour.length(), optimum);
        self.comparison = Some(comparison.clone());
        Ok(comparison)
    }

    pub fn result(&self) -> RunResult<T> {
        let best = &self.colony.best().tour;
        RunResult {
            best_order: best.order().to_vec(),
            best_length: best.length(),
            optimum: self.comparison.as_ref().map(|c| c.optimal.clone()),
            gap_percent: self.comparison.as_ref().map(|c| c.gap_percent),
            seed: self.params().seed,
            params: self.params().clone(),
            steering_versions: self.applied_versions.clone(),
        }
    }

    /// Writes `instance.json`, `params.json`, `events.jsonl`,
    /// `steering-script.jsonl` and `result.json` into `dir`.
    pub fn persist(&self, dir: &Path) -> Result<(), SessionError> {
        fs::create_dir_all(dir).map_err(io_err(format!("creating {}", dir.display())))?;
        let write = |name: &str, body: String| {
            let path = dir.join(name);
            fs::write(&path, body).map_err(io_err(format!("writing {}", path.display())))
        };
        write("instance.json", self.instance().to_json() + "\n")?;
        write("params.json", pretty(&self.config()) + "\n")?;
        write("events.jsonl", to_jsonl(&self.events))?;
        write("steering-script.jsonl", to_jsonl(&self.interventions))?;
        write("result.json", pretty(&self.result()) + "\n")?;
        Ok(())
    }
}

fn pretty<S: Serialize>(value: &S) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

pub fn to_jsonl<S: Serialize>(items: &[S]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("plain data serializes"));
        out.push('\n');
    }
    out
}

/// Recorded interventions replayed at their iteration boundaries.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SteeringScript<T> {
    entries: VecDeque<Intervention<T>>,
}

impl<T: Scalar> SteeringScript<T> {
    pub fn new(entries: Vec<Intervention<T>>) -> Self {
        SteeringScript { entries: entries.into() }
    }

    /// Parses JSON lines of `{iteration_applied, update}`. Blank lines are
    /// skipped.
    pub fn from_jsonl(reader: impl BufRead) -> Result<Self, SessionError> {
        let mut entries = Vec::new();
        for (k, line) in reader.lines().enumerate() {
            let line = line.map_err(io_err("reading steering script"))?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(
                serde_json::from_str(&line).map_err(json_err(format!("steering script line {}", k + 1)))?,
            );
        }
        Ok(Self::new(entries))
    }

    pub fn entries(&self) -> impl Iterator<Item = &Intervention<T>> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks ordering, range and that every update is accepted in sequence
    /// by a fresh steering state.
    pub fn validate(&self, n: usize, iterations: usize, initial_hif: T) -> Result<(), SessionError> {
        let mut state = SteeringState::new(n, initial_hif)?;
        let mut last = 0;
        for (index, entry) in self.entries.iter().enumerate() {
            if entry.iteration_applied < last || entry.iteration_applied >= iterations {
                return Err(SessionError::ScriptOrder { index, iteration: entry.iteration_applied });
            }
            last = entry.iteration_applied;
            state
                .apply(&entry.update)
                .map_err(|source| SessionError::ScriptEntry { index, source })?;
        }
        Ok(())
    }

    pub fn write_jsonl(&self, mut out: impl Write) -> io::Result<()> {
        out.write_all(to_jsonl(&self.entries.iter().collect::<Vec<_>>()).as_bytes())
    }
}

impl<T: Scalar> SteeringSource<T> for SteeringScript<T> {
    fn drain(&mut self, completed: usize) -> Vec<SteeringUpdate<T>> {
        let mut out = Vec::new();
        while self.entries.front().is_some_and(|e| e.iteration_applied <= completed) {
            out.push(self.entries.pop_front().expect("front exists").update);
        }
        out
    }
}

/// Creates a session and runs it to the end under `script`.
pub fn replay<T: Scalar>(
    instance: Arc<Instance>,
    config: &RunConfig<T>,
    script: SteeringScript<T>,
) -> Result<Session<T>, SessionError> {
    script.validate(instance.dimension(), config.params.iterations, config.hif)?;
    let mut session = Session::create(instance, config.params.clone(), config.hif)?;
    let mut script = script;
    session.run_scripted(&mut script)?;
    Ok(session)
}

/// Solves each of two clusters with its own unsteered session and joins the
/// tours with the cheapest two-edge exchange.
pub fn cluster_solve<T: Scalar>(
    instance: &Instance,
    clusters: [&[usize]; 2],
    params: &AcsParams<T>,
) -> Result<Tour, SessionError> {
    let n = instance.dimension();
    let mut seen = vec![false; n];
    for (index, cluster) in clusters.iter().enumerate() {
        if cluster.len() < crate::instance::MIN_DIMENSION {
            return Err(SessionError::ClusterTooSmall { index, size: cluster.len() });
        }
        for &v in cluster.iter() {
            match seen.get_mut(v) {
                Some(s @ false) => *s = true,
                _ => return Err(SessionError::NotAPartition { n }),
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(SessionError::NotAPartition { n });
    }
    let mut tours = Vec::with_capacity(2);
    for (index, cluster) in clusters.iter().enumerate() {
        let sub = Arc::new(instance.subset(format!("{}-cluster{index}", instance.name()), cluster)?);
        let mut session = Session::create(sub, params.clone(), T::zero())?;
        session.run_to_end()?;
        tours.push(session.best().tour.order().iter().map(|&k| cluster[k]).collect::<Vec<_>>());
    }
    Ok(merge_tours(instance, &tours[0], &tours[1]))
}

/// Joins two disjoint cycles covering all nodes into one circuit, trying every
/// pair of removed edges and both reconnection orientations.
pub fn merge_tours(instance: &Instance, first: &[usize], second: &[usize]) -> Tour {
    let mut best: Option<Tour> = None;
    let mut merged = Vec::with_capacity(first.len() + second.len());
    for i in 0..first.len() {
        for j in 0..second.len() {
            for reversed in [false, true] {
                merged.clear();
                // first, opened after position i
                merged.extend((1..=first.len()).map(|k| first[(i + k) % first.len()]));
                // second, opened between j and j + 1
                if reversed {
                    merged.extend((0..second.len()).map(|k| second[(j + second.len() - k) % second.len()]));
                } else {
                    merged.extend((1..=second.len()).map(|k| second[(j + k) % second.len()]));
                }
                let candidate = Tour::from_valid(instance, merged.clone());
                if best.as_ref().is_none_or(|b| candidate.length() < b.length()) {
                    best = Some(candidate);
                }
            }
        }
    }
    best.expect("clusters are nonempty")
}
