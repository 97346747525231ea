//! Human steering of the colony.
//!
//! A human sets per-edge probabilities (the interaction matrix, rows summing
//! to at most one) and a global impact factor scaling all of them. When an ant
//! leaves node `i`, it first draws against the scaled human probabilities of
//! the still-available targets, taken in ascending node order. If the draw
//! misses every human interval, the human-targeted nodes are removed and the
//! ordinary ACS rule picks among the rest. Blocked edges are never taken and
//! receive no pheromone.
//!
//! Steering never touches the pheromone matrix.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acs::{sample, select_next_acs, AcsParams, Eta, PheromoneMatrix};
use crate::scalar::{unit_draw, Scalar};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SteeringError {
    #[error("self-loop ({0}, {0}) cannot be steered or blocked")]
    Diagonal(usize),
    #[error("node {node} is out of range for {n} nodes")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("probability {0} is outside [0, 1]")]
    ProbabilityOutOfRange(f64),
    #[error("impact factor {0} is outside [0, 1]")]
    HifOutOfRange(f64),
    #[error("row {row} would sum to {sum}, above 1")]
    RowSumExceeded { row: usize, sum: f64 },
    #[error("steering state is for {found} nodes, instance has {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("update changes nothing")]
    EmptyUpdate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

impl Edge {
    pub const fn new(from: usize, to: usize) -> Self {
        Edge { from, to }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct HimEntry<T> {
    pub from: usize,
    pub to: usize,
    pub p: T,
}

/// A batch of steering edits applied atomically as one new version.
///
/// Order of application: impact factor, matrix entries, blocks, unblocks. Row
/// sums are checked on the final matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SteeringUpdate<T> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hif: Option<T>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub entries: Vec<HimEntry<T>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub block: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unblock: Vec<Edge>,
}

impl<T> Default for SteeringUpdate<T> {
    fn default() -> Self {
        SteeringUpdate { hif: None, entries: Vec::new(), block: Vec::new(), unblock: Vec::new() }
    }
}

impl<T: Scalar> SteeringUpdate<T> {
    pub fn set_hif(hif: T) -> Self {
        SteeringUpdate { hif: Some(hif), ..Self::default() }
    }

    pub fn entry(from: usize, to: usize, p: T) -> Self {
        Self::default().with_entry(from, to, p)
    }

    pub fn with_entry(mut self, from: usize, to: usize, p: T) -> Self {
        self.entries.push(HimEntry { from, to, p });
        self
    }

    pub fn block(from: usize, to: usize) -> Self {
        SteeringUpdate { block: vec![Edge::new(from, to)], ..Self::default() }
    }

    pub fn with_block(mut self, from: usize, to: usize) -> Self {
        self.block.push(Edge::new(from, to));
        self
    }

    pub fn unblock(from: usize, to: usize) -> Self {
        SteeringUpdate { unblock: vec![Edge::new(from, to)], ..Self::default() }
    }

    pub fn is_empty(&self) -> bool {
        self.hif.is_none() && self.entries.is_empty() && self.block.is_empty() && self.unblock.is_empty()
    }
}

/// Interaction matrix, impact factor and blocked edges, with a version that
/// grows by one per accepted mutation.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringState<T> {
    n: usize,
    him: Vec<T>,
    hif: T,
    blocked: BTreeSet<(usize, usize)>,
    version: u64,
}

impl<T: Scalar> SteeringState<T> {
    pub fn new(n: usize, hif: T) -> Result<Self, SteeringError> {
        check_hif(hif)?;
        Ok(SteeringState { n, him: vec![T::zero(); n * n], hif, blocked: BTreeSet::new(), version: 0 })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn hif(&self) -> T {
        self.hif
    }

    #[inline]
    pub fn him(&self, from: usize, to: usize) -> T {
        self.him[from * self.n + to]
    }

    #[inline]
    pub fn is_blocked(&self, from: usize, to: usize) -> bool {
        !self.blocked.is_empty() && self.blocked.contains(&(from, to))
    }

    pub fn blocked(&self) -> impl Iterator<Item = Edge> + '_ {
        self.blocked.iter().map(|&(a, b)| Edge::new(a, b))
    }

    pub fn row_sum(&self, row: usize) -> T {
        self.him[row * self.n..(row + 1) * self.n]
            .iter()
            .fold(T::zero(), |acc, &p| acc + p)
    }

    /// True when no human probability mass can reach any ant.
    pub fn is_neutral(&self) -> bool {
        self.hif == T::zero() || self.him.iter().all(|&p| p == T::zero())
    }

    fn check_edge(&self, from: usize, to: usize) -> Result<(), SteeringError> {
        for node in [from, to] {
            if node >= self.n {
                return Err(SteeringError::NodeOutOfRange { node, n: self.n });
            }
        }
        if from == to {
            return Err(SteeringError::Diagonal(from));
        }
        Ok(())
    }

    /// Checks an update without applying it.
    pub fn validate(&self, update: &SteeringUpdate<T>) -> Result<(), SteeringError> {
        self.clone().apply(update).map(|_| ())
    }

    /// Applies `update` atomically. On error `self` is left untouched.
    pub fn apply(&mut self, update: &SteeringUpdate<T>) -> Result<u64, SteeringError> {
        if update.is_empty() {
            return Err(SteeringError::EmptyUpdate);
        }
        let mut next = self.clone();
        if let Some(hif) = update.hif {
            check_hif(hif)?;
            next.hif = hif;
        }
        let mut touched = BTreeSet::new();
        for e in &update.entries {
            next.check_edge(e.from, e.to)?;
            if !(e.p >= T::zero() && e.p <= T::one()) {
                return Err(SteeringError::ProbabilityOutOfRange(e.p.as_f64()));
            }
            next.him[e.from * next.n + e.to] = e.p;
            touched.insert(e.from);
        }
        for row in touched {
            let sum = next.row_sum(row);
            if sum > T::one() + T::row_sum_slack() {
                return Err(SteeringError::RowSumExceeded { row, sum: sum.as_f64() });
            }
        }
        for e in &update.block {
            next.check_edge(e.from, e.to)?;
            next.blocked.insert((e.from, e.to));
        }
        for e in &update.unblock {
            next.check_edge(e.from, e.to)?;
            next.blocked.remove(&(e.from, e.to));
        }
        next.version += 1;
        *self = next;
        Ok(self.version)
    }

    pub fn set_him_entry(&mut self, from: usize, to: usize, p: T) -> Result<u64, SteeringError> {
        self.apply(&SteeringUpdate::entry(from, to, p))
    }

    pub fn set_hif(&mut self, hif: T) -> Result<u64, SteeringError> {
        self.apply(&SteeringUpdate::set_hif(hif))
    }

    pub fn block_edge(&mut self, from: usize, to: usize) -> Result<u64, SteeringError> {
        self.apply(&SteeringUpdate::block(from, to))
    }

    pub fn unblock_edge(&mut self, from: usize, to: usize) -> Result<u64, SteeringError> {
        self.apply(&SteeringUpdate::unblock(from, to))
    }

    /// Scaled human probabilities `hif * him[i][j]` for the available,
    /// unblocked targets carrying positive mass, in ascending node order.
    pub fn effective_human_distribution(&self, from: usize, available: &[usize]) -> Vec<(usize, T)> {
        if self.hif == T::zero() {
            return Vec::new();
        }
        let mut out: Vec<(usize, T)> = available
            .iter()
            .filter(|&&j| !self.is_blocked(from, j))
            .map(|&j| (j, self.hif * self.him(from, j)))
            .filter(|&(_, p)| p > T::zero())
            .collect();
        out.sort_unstable_by_key(|&(j, _)| j);
        out
    }

    pub fn to_document(&self) -> SteeringDocument<T> {
        let mut entries = Vec::new();
        for from in 0..self.n {
            for to in 0..self.n {
                let p = self.him(from, to);
                if p != T::zero() {
                    entries.push(HimEntry { from, to, p });
                }
            }
        }
        SteeringDocument { hif: self.hif, entries, blocked: self.blocked().collect(), version: self.version }
    }

    /// Rebuilds a state for an `n`-node instance, checking every invariant.
    pub fn from_document(n: usize, doc: &SteeringDocument<T>) -> Result<Self, SteeringError> {
        let mut state = SteeringState::new(n, doc.hif)?;
        if !doc.entries.is_empty() || !doc.blocked.is_empty() {
            state.apply(&SteeringUpdate {
                hif: None,
                entries: doc.entries.clone(),
                block: doc.blocked.clone(),
                unblock: Vec::new(),
            })?;
        }
        state.version = doc.version;
        Ok(state)
    }
}

fn check_hif<T: Scalar>(hif: T) -> Result<(), SteeringError> {
    if hif >= T::zero() && hif <= T::one() {
        Ok(())
    } else {
        Err(SteeringError::HifOutOfRange(hif.as_f64()))
    }
}

/// JSON form of a [`SteeringState`]: `{hif, entries, blocked, version}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SteeringDocument<T> {
    pub hif: T,
    pub entries: Vec<HimEntry<T>>,
    pub blocked: Vec<Edge>,
    pub version: u64,
}

/// Which rule produced a move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    /// The draw landed in a human interval.
    Human,
    /// The ACS rule chose, over non-human targets when steering was active.
    Colony,
    /// The draw missed the human intervals but only human targets remained,
    /// so one of them was chosen by renormalized human weight.
    Fallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Steered {
    pub node: usize,
    pub route: Route,
}

/// Next node under human steering.
///
/// Draws `u` on `[0, 1)` against the cumulative scaled human intervals. On a
/// miss, the human-targeted and blocked nodes are removed and the ACS rule
/// runs over the remainder. With no human mass at `from` this is exactly
/// [`select_next_acs`] over the unblocked nodes, consuming the same draws.
pub fn steered_select_next<T: Scalar, R: Rng + ?Sized>(
    from: usize,
    available: &[usize],
    state: &SteeringState<T>,
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    params: &AcsParams<T>,
    rng: &mut R,
) -> Steered {
    assert!(!available.is_empty(), "no node available from {from}");
    let human = state.effective_human_distribution(from, available);
    let unblocked = || available.iter().copied().filter(|&j| !state.is_blocked(from, j));
    if human.is_empty() {
        let candidates: Vec<usize> = unblocked().collect();
        let pool = if candidates.is_empty() { available } else { &candidates };
        return Steered { node: select_next_acs(from, pool, tau, eta, params, rng), route: Route::Colony };
    }
    let u: T = unit_draw(rng);
    let mut cumulative = T::zero();
    for &(node, p) in &human {
        cumulative = cumulative + p;
        if u < cumulative {
            return Steered { node, route: Route::Human };
        }
    }
    let rest: Vec<usize> = unblocked()
        .filter(|j| human.binary_search_by_key(j, |&(t, _)| t).is_err())
        .collect();
    if !rest.is_empty() {
        return Steered { node: select_next_acs(from, &rest, tau, eta, params, rng), route: Route::Colony };
    }
    let total = human.iter().fold(T::zero(), |acc, &(_, p)| acc + p);
    let nodes: Vec<usize> = human.iter().map(|&(j, _)| j).collect();
    let weights: Vec<T> = human.iter().map(|&(_, p)| p / total).collect();
    Steered { node: sample(&nodes, &weights, unit_draw(rng)), route: Route::Fallback }
}
