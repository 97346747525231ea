//! Ant Colony System: pheromone state, the pseudo-random-proportional
//! transition rule, per-ant local updates, the global update on the best tour,
//! optional 2-opt, and the iteration loop.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Tour};
use crate::oracle::nearest_neighbor_tour;
use crate::scalar::{unit_draw, Scalar};
use crate::steering::{steered_select_next, Route, SteeringError, SteeringState, SteeringUpdate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "T: Scalar")]
pub struct AcsParams<T> {
    #[serde(alias = "m")]
    pub ants: usize,
    pub iterations: usize,
    pub alpha: T,
    pub beta: T,
    pub rho: T,
    pub q0: T,
    pub seed: u64,
    /// Run 2-opt on every constructed tour before it is scored.
    pub two_opt: bool,
    /// Accepted for compatibility with configurations that list it; unused.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<T>,
}

impl<T: Scalar> Default for AcsParams<T> {
    fn default() -> Self {
        AcsParams {
            ants: 30,
            iterations: 250,
            alpha: T::one(),
            beta: T::of(3.0),
            rho: T::of(0.1),
            q0: T::of(0.9),
            seed: 0,
            two_opt: false,
            sigma: None,
        }
    }
}

impl<T: Scalar> AcsParams<T> {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), AcsError> {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        let bad = |field: &'static str, reason: &'static str| Err(AcsError::InvalidParam { field, reason });
        if self.ants == 0 {
            return bad("ants", "must be positive");
        }
        if self.iterations == 0 {
            return bad("iterations", "must be positive");
        }
        if !unit(self.rho) {
            return bad("rho", "must lie in [0, 1]");
        }
        if !unit(self.q0) {
            return bad("q0", "must lie in [0, 1]");
        }
        if self.alpha < T::zero() || !self.alpha.is_finite() {
            return bad("alpha", "must be a finite non-negative number");
        }
        if self.beta < T::zero() || !self.beta.is_finite() {
            return bad("beta", "must be a finite non-negative number");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AcsError {
    #[error("parameter {field} {reason}")]
    InvalidParam { field: &'static str, reason: &'static str },
    #[error("the initial tour has zero cost, pheromone cannot be initialized")]
    ZeroCost,
    #[error(transparent)]
    Steering(#[from] SteeringError),
}

/// Heuristic desirability `1 / max(c_ij, 1)`, computed once per instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Eta<T> {
    n: usize,
    values: Vec<T>,
}

impl<T: Scalar> Eta<T> {
    pub fn new(instance: &Instance) -> Self {
        let n = instance.dimension();
        let values = (0..n * n)
            .map(|k| T::one() / T::of_u64(instance.cost(k / n, k % n).max(1)))
            .collect();
        Eta { n, values }
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> T {
        self.values[from * self.n + to]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PheromoneMatrix<T> {
    n: usize,
    tau: Vec<T>,
    tau0: T,
    symmetric: bool,
}

/// Uniform trail `1 / (n * pbest_cost)` on every edge.
pub fn init_pheromone<T: Scalar>(n: usize, pbest_cost: u64) -> Result<PheromoneMatrix<T>, AcsError> {
    if n < crate::instance::MIN_DIMENSION {
        return Err(AcsError::InvalidParam { field: "n", reason: "must be at least 3" });
    }
    if pbest_cost == 0 {
        return Err(AcsError::ZeroCost);
    }
    let tau0 = T::one() / (T::of_u64(n as u64) * T::of_u64(pbest_cost));
    Ok(PheromoneMatrix { n, tau: vec![tau0; n * n], tau0, symmetric: true })
}

/// Minimum, maximum and mean trail level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PheromoneSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
}

impl<T: Scalar> PheromoneMatrix<T> {
    /// Like [`init_pheromone`], mirroring updates only when the instance is
    /// symmetric.
    pub fn for_instance(instance: &Instance, pbest_cost: u64) -> Result<Self, AcsError> {
        let mut matrix = init_pheromone(instance.dimension(), pbest_cost)?;
        matrix.symmetric = instance.is_symmetric();
        Ok(matrix)
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn tau0(&self) -> T {
        self.tau0
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> T {
        self.tau[from * self.n + to]
    }

    pub fn values(&self) -> &[T] {
        &self.tau
    }

    fn blend(&mut self, from: usize, to: usize, rho: T, deposit: T) {
        let mut update = |a: usize, b: usize| {
            let cell = &mut self.tau[a * self.n + b];
            *cell = (T::one() - rho) * *cell + rho * deposit;
        };
        update(from, to);
        if self.symmetric {
            update(to, from);
        }
    }

    /// `tau <- (1 - rho) tau + rho / (n * l_initial)` on one edge.
    pub fn local_update(&mut self, from: usize, to: usize, rho: T, l_initial: u64) {
        let deposit = T::one() / (T::of_u64(self.n as u64) * T::of_u64(l_initial));
        self.blend(from, to, rho, deposit);
    }

    /// Applies [`Self::local_update`] to every edge of `tour` not excluded by
    /// `skip`.
    pub fn local_update_tour(
        &mut self,
        tour: &Tour,
        rho: T,
        l_initial: u64,
        skip: impl Fn(usize, usize) -> bool,
    ) {
        for (a, b) in tour.edges() {
            if !skip(a, b) {
                self.local_update(a, b, rho, l_initial);
            }
        }
    }

    /// `tau <- (1 - rho) tau + rho / L_best` on the edges of the best tour.
    pub fn global_update(&mut self, best: &Tour, rho: T) {
        self.global_update_filtered(best, rho, |_, _| false);
    }

    pub fn global_update_filtered(&mut self, best: &Tour, rho: T, skip: impl Fn(usize, usize) -> bool) {
        let deposit = T::one() / T::of_u64(best.length());
        for (a, b) in best.edges() {
            if !skip(a, b) {
                self.blend(a, b, rho, deposit);
            }
        }
    }

    /// Summary over the off-diagonal entries.
    pub fn summary(&self) -> PheromoneSummary {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..self.n {
            for j in (0..self.n).filter(|&j| j != i) {
                let v = self.get(i, j).as_f64();
                min = min.min(v);
                max = max.max(v);
                sum += v;
            }
        }
        PheromoneSummary { min, max, mean: sum / (self.n * (self.n - 1)) as f64 }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.tau.chunks(self.n).map(|r| r.iter().map(|v| v.as_f64()).collect()).collect()
    }
}

#[inline]
fn attractiveness<T: Scalar>(
    from: usize,
    to: usize,
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    alpha: T,
    beta: T,
) -> T {
    let t = tau.get(from, to);
    let t = if alpha == T::one() { t } else { t.powf(alpha) };
    t * eta.get(from, to).powf(beta)
}

/// Normalized transition probabilities from `from` over `available`.
pub fn transition_weights<T: Scalar>(
    from: usize,
    available: &[usize],
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    alpha: T,
    beta: T,
) -> Vec<T> {
    let raw: Vec<T> = available
        .iter()
        .map(|&j| attractiveness(from, j, tau, eta, alpha, beta))
        .collect();
    let total = raw.iter().fold(T::zero(), |acc, &w| acc + w);
    assert!(total > T::zero(), "transition weights vanished at node {from}");
    raw.into_iter().map(|w| w / total).collect()
}

/// Pseudo-random-proportional rule: with probability `q0` take the most
/// attractive node (lowest index on ties), otherwise sample proportionally.
pub fn select_next_acs<T: Scalar, R: Rng + ?Sized>(
    from: usize,
    available: &[usize],
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    params: &AcsParams<T>,
    rng: &mut R,
) -> usize {
    assert!(!available.is_empty(), "no node available from {from}");
    let q: T = unit_draw(rng);
    if q <= params.q0 {
        let mut best = available[0];
        let mut best_w = attractiveness(from, best, tau, eta, params.alpha, params.beta);
        for &j in &available[1..] {
            let w = attractiveness(from, j, tau, eta, params.alpha, params.beta);
            if w > best_w || (w == best_w && j < best) {
                best = j;
                best_w = w;
            }
        }
        return best;
    }
    let weights = transition_weights(from, available, tau, eta, params.alpha, params.beta);
    sample(available, &weights, unit_draw(rng))
}

/// Inverse-CDF pick; `u` in `[0, 1)`, weights summing to one.
pub(crate) fn sample<T: Scalar>(nodes: &[usize], weights: &[T], u: T) -> usize {
    let mut cumulative = T::zero();
    for (&node, &w) in nodes.iter().zip(weights) {
        cumulative = cumulative + w;
        if u < cumulative {
            return node;
        }
    }
    // Rounding left the total marginally below u.
    *nodes
        .iter()
        .zip(weights)
        .rev()
        .find(|(_, &w)| w > T::zero())
        .map(|(n, _)| n)
        .unwrap_or(nodes.last().expect("nonempty"))
}

/// A dead end during construction: every remaining node is blocked from `at`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("construction stuck at node {at}: all {remaining} remaining nodes are blocked")]
pub struct Infeasible {
    pub at: usize,
    pub remaining: usize,
}

/// A constructed tour with the rule that chose each move; `routes[k]` chose
/// `order[k + 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construction {
    pub tour: Tour,
    pub routes: Vec<Route>,
}

/// Builds one ant's tour from `start`.
pub fn construct_solution<T: Scalar, R: Rng + ?Sized>(
    instance: &Instance,
    start: usize,
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    params: &AcsParams<T>,
    steering: Option<&SteeringState<T>>,
    rng: &mut R,
) -> Result<Tour, Infeasible> {
    construct_traced(instance, start, tau, eta, params, steering, rng).map(|c| c.tour)
}

pub fn construct_traced<T: Scalar, R: Rng + ?Sized>(
    instance: &Instance,
    start: usize,
    tau: &PheromoneMatrix<T>,
    eta: &Eta<T>,
    params: &AcsParams<T>,
    steering: Option<&SteeringState<T>>,
    rng: &mut R,
) -> Result<Construction, Infeasible> {
    let n = instance.dimension();
    let mut available: Vec<usize> = (0..n).filter(|&v| v != start).collect();
    let mut order = Vec::with_capacity(n);
    let mut routes = Vec::with_capacity(n - 1);
    order.push(start);
    let mut current = start;
    let mut candidates = Vec::with_capacity(n);
    while !available.is_empty() {
        let (next, route) = match steering {
            Some(state) => {
                candidates.clear();
                candidates.extend(available.iter().copied().filter(|&j| !state.is_blocked(current, j)));
                if candidates.is_empty() {
                    return Err(Infeasible { at: current, remaining: available.len() });
                }
                let s = steered_select_next(current, &candidates, state, tau, eta, params, rng);
                (s.node, s.route)
            }
            None => (select_next_acs(current, &available, tau, eta, params, rng), Route::Colony),
        };
        let pos = available.binary_search(&next).expect("selected node is available");
        available.remove(pos);
        order.push(next);
        routes.push(route);
        current = next;
    }
    Ok(Construction { tour: Tour::from_valid(instance, order), routes })
}

/// First-improvement 2-opt until no segment reversal shortens the tour.
pub fn two_opt(instance: &Instance, tour: &Tour) -> Tour {
    two_opt_avoiding(instance, tour, |_, _| false)
}

/// [`two_opt`] that never accepts a tour using an edge for which `forbidden`
/// holds.
pub fn two_opt_avoiding(instance: &Instance, tour: &Tour, forbidden: impl Fn(usize, usize) -> bool) -> Tour {
    let n = tour.len();
    let mut order = tour.order().to_vec();
    let mut length = tour.length() as i128;
    let c = |a: usize, b: usize| instance.cost(a, b) as i128;
    let symmetric = instance.is_symmetric();
    let uses_forbidden =
        |o: &[usize]| (0..o.len()).any(|k| forbidden(o[k], o[(k + 1) % o.len()]));
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n - 1 {
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (a, b, cc, d) = (order[i], order[i + 1], order[j], order[(j + 1) % n]);
                let candidate_len = if symmetric {
                    length + c(a, cc) + c(b, d) - c(a, b) - c(cc, d)
                } else {
                    let mut trial = order.clone();
                    trial[i + 1..=j].reverse();
                    crate::instance::cycle_length(instance, &trial) as i128
                };
                if candidate_len >= length {
                    continue;
                }
                order[i + 1..=j].reverse();
                if uses_forbidden(&order) {
                    order[i + 1..=j].reverse();
                    continue;
                }
                length = candidate_len;
                improved = true;
            }
        }
    }
    Tour::from_valid(instance, order)
}

/// Best-so-far tour and where it was found. The initial heuristic tour has
/// `iteration_found = 0` and no ant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SolutionRecord {
    pub tour: Tour,
    pub iteration_found: usize,
    pub ant_index: Option<usize>,
}

/// One line of the run's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Iteration {
        iteration: usize,
        best_length: u64,
        improved: bool,
        steering_version: u64,
        tau_min: f64,
        tau_max: f64,
    },
    SteeringApplied {
        after_iteration: usize,
        version: u64,
    },
    Infeasible {
        iteration: usize,
        ant: usize,
        node: usize,
    },
    Fallback {
        iteration: usize,
        ant: usize,
        node: usize,
    },
}

pub trait EventSink {
    fn emit(&mut self, event: Event);
}

impl EventSink for Vec<Event> {
    fn emit(&mut self, event: Event) {
        self.push(event);
    }
}

impl EventSink for std::sync::mpsc::Sender<Event> {
    fn emit(&mut self, event: Event) {
        let _ = self.send(event);
    }
}

/// Discards events.
pub struct NullSink;

impl EventSink for NullSink {
    fn emit(&mut self, _: Event) {}
}

/// Supplies steering updates at iteration boundaries.
pub trait SteeringSource<T> {
    /// Updates to apply after `completed` iterations, in order.
    fn drain(&mut self, completed: usize) -> Vec<SteeringUpdate<T>>;
}

/// A source that never steers.
pub struct NoSteering;

impl<T> SteeringSource<T> for NoSteering {
    fn drain(&mut self, _: usize) -> Vec<SteeringUpdate<T>> {
        Vec::new()
    }
}

impl<T> SteeringSource<T> for std::sync::mpsc::Receiver<SteeringUpdate<T>> {
    fn drain(&mut self, _: usize) -> Vec<SteeringUpdate<T>> {
        self.try_iter().collect()
    }
}

/// Random stream of one ant in one iteration.
pub fn ant_rng(seed: u64, iteration: usize, ants: usize, ant: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (iteration as u64 * ants as u64 + ant as u64))
}

/// Colony state between iterations.
#[derive(Debug, Clone)]
pub struct Colony<T: Scalar> {
    instance: Arc<Instance>,
    params: AcsParams<T>,
    eta: Eta<T>,
    pheromone: PheromoneMatrix<T>,
    initial: Tour,
    best: SolutionRecord,
    iteration: usize,
    steering: Option<SteeringState<T>>,
}

impl<T: Scalar> Colony<T> {
    /// Heuristic start tour from node 0 and uniform initial trail. Steering is
    /// disabled until [`Self::apply_steering`] or [`Self::with_steering`].
    pub fn new(instance: Arc<Instance>, params: AcsParams<T>) -> Result<Self, AcsError> {
        params.validate()?;
        let initial = nearest_neighbor_tour(&instance, 0).expect("node 0 exists");
        let pheromone = PheromoneMatrix::for_instance(&instance, initial.length())?;
        Ok(Colony {
            eta: Eta::new(&instance),
            pheromone,
            best: SolutionRecord { tour: initial.clone(), iteration_found: 0, ant_index: None },
            initial,
            iteration: 0,
            steering: None,
            params,
            instance,
        })
    }

    pub fn with_steering(mut self, state: SteeringState<T>) -> Result<Self, AcsError> {
        if state.dimension() != self.instance.dimension() {
            return Err(SteeringError::DimensionMismatch {
                expected: self.instance.dimension(),
                found: state.dimension(),
            }
            .into());
        }
        self.steering = Some(state);
        Ok(self)
    }

    pub fn instance(&self) -> &Arc<Instance> {
        &self.instance
    }

    pub fn params(&self) -> &AcsParams<T> {
        &self.params
    }

    pub fn pheromone(&self) -> &PheromoneMatrix<T> {
        &self.pheromone
    }

    pub fn eta(&self) -> &Eta<T> {
        &self.eta
    }

    pub fn initial_tour(&self) -> &Tour {
        &self.initial
    }

    pub fn best(&self) -> &SolutionRecord {
        &self.best
    }

    /// Completed iterations.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.params.iterations
    }

    pub fn steering(&self) -> Option<&SteeringState<T>> {
        self.steering.as_ref()
    }

    pub fn steering_version(&self) -> u64 {
        self.steering.as_ref().map_or(0, SteeringState::version)
    }

    /// Applies an update at the current iteration boundary, enabling steering
    /// (with `hif = 1`) if it was off.
    pub fn apply_steering(&mut self, update: &SteeringUpdate<T>, sink: &mut impl EventSink) -> Result<u64, AcsError> {
        let n = self.instance.dimension();
        let state = self
            .steering
            .get_or_insert_with(|| SteeringState::new(n, T::one()).expect("hif 1 is valid"));
        let version = state.apply(update)?;
        sink.emit(Event::SteeringApplied { after_iteration: self.iteration, version });
        Ok(version)
    }

    /// Runs one iteration: every ant builds a tour, scores it against the
    /// best, deposits local trail; then the best tour is reinforced.
    pub fn iterate(&mut self, sink: &mut impl EventSink) -> &SolutionRecord {
        let k = self.iteration;
        let n = self.instance.dimension();
        let m = self.params.ants;
        let rho = self.params.rho;
        let l_initial = self.initial.length();
        let previous = self.best.tour.length();
        let steering = self.steering.as_ref();
        let blocked = |a: usize, b: usize| steering.is_some_and(|s| s.is_blocked(a, b));
        for ant in 0..m {
            let mut rng = ant_rng(self.params.seed, k, m, ant);
            let start = rng.gen_range(0..n);
            let built = construct_traced(
                &self.instance,
                start,
                &self.pheromone,
                &self.eta,
                &self.params,
                steering,
                &mut rng,
            );
            let construction = match built {
                Ok(c) => c,
                Err(Infeasible { at, .. }) => {
                    sink.emit(Event::Infeasible { iteration: k + 1, ant, node: at });
                    continue;
                }
            };
            for (step, route) in construction.routes.iter().enumerate() {
                if *route == Route::Fallback {
                    let node = construction.tour.order()[step];
                    sink.emit(Event::Fallback { iteration: k + 1, ant, node });
                }
            }
            let mut tour = construction.tour;
            if self.params.two_opt {
                tour = two_opt_avoiding(&self.instance, &tour, blocked);
            }
            if tour.length() <= self.best.tour.length() {
                self.best = SolutionRecord { tour: tour.clone(), iteration_found: k + 1, ant_index: Some(ant) };
            }
            self.pheromone.local_update_tour(&tour, rho, l_initial, blocked);
        }
        self.pheromone.global_update_filtered(&self.best.tour, rho, blocked);
        self.iteration += 1;
        let summary = self.pheromone.summary();
        sink.emit(Event::Iteration {
            iteration: self.iteration,
            best_length: self.best.tour.length(),
            improved: self.best.tour.length() < previous,
            steering_version: self.steering_version(),
            tau_min: summary.min,
            tau_max: summary.max,
        });
        &self.best
    }
}

/// Runs all iterations, draining `source` at each iteration boundary before
/// the next iteration starts.
pub fn run<T: Scalar>(
    instance: Arc<Instance>,
    params: AcsParams<T>,
    steering: Option<SteeringState<T>>,
    source: &mut impl SteeringSource<T>,
    sink: &mut impl EventSink,
) -> Result<SolutionRecord, AcsError> {
    let mut colony = Colony::new(instance, params)?;
    if let Some(state) = steering {
        colony = colony.with_steering(state)?;
    }
    while !colony.is_done() {
        for update in source.drain(colony.iteration()) {
            colony.apply_steering(&update, sink)?;
        }
        colony.iterate(sink);
    }
    Ok(colony.best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_tsplib, EdgeWeightType, Point};
    use crate::oracle::{count_crossings, exact_optimum};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn euc(points: &[(f64, f64)]) -> Instance {
        Instance::from_coordinates(
            "t",
            EdgeWeightType::Euc2d,
            points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        )
        .unwrap()
    }

    fn triangle() -> Instance {
        euc(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)])
    }

    fn burma14() -> Arc<Instance> {
        Arc::new(parse_tsplib(include_str!("../data/burma14.tsp")).unwrap())
    }

    #[test]
    fn initial_pheromone_values() {
        let p: PheromoneMatrix<f64> = init_pheromone(5, 10).unwrap();
        assert!(p.values().iter().all(|&v| v == 0.02));
        let p: PheromoneMatrix<f64> = init_pheromone(3, 12).unwrap();
        assert_eq!(p.get(0, 1), 1.0 / 36.0);
        assert_eq!(init_pheromone::<f64>(3, 0), Err(AcsError::ZeroCost));

        let inst = burma14();
        let nn = nearest_neighbor_tour(&inst, 0).unwrap().length();
        let p: PheromoneMatrix<f64> = PheromoneMatrix::for_instance(&inst, nn).unwrap();
        let s = p.summary();
        assert_eq!(s.min, s.max);
        assert_eq!(s.min, 1.0 / (14.0 * nn as f64));
    }

    #[test]
    fn weights_examples() {
        // Nodes 1 and 2 at distances 1 and 2 from node 0.
        let inst = Instance::from_matrix("w", vec![vec![0, 1, 2], vec![1, 0, 1], vec![2, 1, 0]]).unwrap();
        let eta = Eta::<f64>::new(&inst);
        let tau: PheromoneMatrix<f64> = init_pheromone(3, 4).unwrap();
        let w = transition_weights(0, &[1, 2], &tau, &eta, 1.0, 3.0);
        assert!((w[0] - 8.0 / 9.0).abs() < 1e-12 && (w[1] - 1.0 / 9.0).abs() < 1e-12);

        let even = Instance::from_matrix("e", vec![vec![0, 2, 2], vec![2, 0, 2], vec![2, 2, 0]]).unwrap();
        let w = transition_weights(0, &[1, 2], &tau, &Eta::new(&even), 1.0, 3.0);
        assert_eq!(w, vec![0.5, 0.5]);

        let mut tau = tau;
        tau.tau[1] = 0.02;
        tau.tau[2] = 0.06;
        let w = transition_weights(0, &[1, 2], &tau, &eta, 1.0, 0.0);
        assert!((w[0] - 0.25).abs() < 1e-12 && (w[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn argmax_and_ties() {
        let inst = Instance::from_matrix(
            "t",
            vec![vec![0, 2, 2, 1], vec![2, 0, 1, 1], vec![2, 1, 0, 1], vec![1, 1, 1, 0]],
        )
        .unwrap();
        let eta = Eta::<f64>::new(&inst);
        let tau = init_pheromone(4, 5).unwrap();
        let params = AcsParams { q0: 1.0, ..AcsParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            assert_eq!(select_next_acs(0, &[1, 2, 3], &tau, &eta, &params, &mut rng), 3);
            assert_eq!(select_next_acs(0, &[2, 1], &tau, &eta, &params, &mut rng), 1);
        }
    }

    #[test]
    fn proportional_sampling_matches_weights() {
        let inst = Instance::from_matrix(
            "p",
            vec![vec![0, 1, 2, 4], vec![1, 0, 1, 1], vec![2, 1, 0, 1], vec![4, 1, 1, 0]],
        )
        .unwrap();
        let eta = Eta::<f64>::new(&inst);
        let tau = init_pheromone(4, 5).unwrap();
        let params = AcsParams { q0: 0.0, beta: 1.0, ..AcsParams::default() };
        // eta = 1, 1/2, 1/4 -> 4/7, 2/7, 1/7
        let expected = [4.0 / 7.0, 2.0 / 7.0, 1.0 / 7.0];
        let draws = 100_000;
        let mut counts = [0usize; 3];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..draws {
            counts[select_next_acs(0, &[1, 2, 3], &tau, &eta, &params, &mut rng) - 1] += 1;
        }
        for (c, p) in counts.iter().zip(expected) {
            let sd = (draws as f64 * p * (1.0 - p)).sqrt();
            assert!((*c as f64 - draws as f64 * p).abs() <= 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn update_rules() {
        let mut p: PheromoneMatrix<f64> = init_pheromone(5, 20).unwrap();
        p.tau.iter_mut().for_each(|v| *v = 0.05);
        p.local_update(1, 2, 0.1, 10);
        assert!((p.get(1, 2) - 0.047).abs() < 1e-12);
        assert_eq!(p.get(2, 1), p.get(1, 2));
        let before = p.get(0, 3);
        p.local_update(0, 3, 0.0, 10);
        assert_eq!(p.get(0, 3), before);
        p.local_update(0, 4, 1.0, 10);
        assert_eq!(p.get(0, 4), 1.0 / 50.0);

        let tri = triangle();
        let best = Tour::new(&tri, vec![0, 1, 2]).unwrap();
        let mut p: PheromoneMatrix<f64> = init_pheromone(4, 1).unwrap();
        p.tau.iter_mut().for_each(|v| *v = 0.02);
        p.global_update(&best, 0.1);
        assert!((p.get(0, 1) - (0.9 * 0.02 + 0.1 / 12.0)).abs() < 1e-12);
        assert_eq!(p.get(0, 3), 0.02);
        assert_eq!(p.get(3, 1), 0.02);
        let snapshot = p.clone();
        p.global_update(&best, 0.0);
        assert_eq!(p, snapshot);
    }

    #[test]
    fn asymmetric_updates_are_directed() {
        let inst = Instance::from_matrix("a", vec![vec![0, 1, 5], vec![9, 0, 1], vec![1, 9, 0]]).unwrap();
        let mut p: PheromoneMatrix<f64> = PheromoneMatrix::for_instance(&inst, 3).unwrap();
        p.local_update(0, 1, 0.5, 5);
        assert_ne!(p.get(0, 1), p.get(1, 0));
    }

    #[test]
    fn triangle_construction_and_run() {
        let tri = Arc::new(triangle());
        let eta = Eta::<f64>::new(&tri);
        let tau = init_pheromone(3, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = construct_solution(&tri, 1, &tau, &eta, &AcsParams::default(), None, &mut rng).unwrap();
        assert_eq!(t.length(), 12);
        assert_eq!(t.order()[0], 1);

        let mut events = Vec::new();
        let params = AcsParams::<f64> { iterations: 1, ..AcsParams::default() };
        let best = run(tri, params, None, &mut NoSteering, &mut events).unwrap();
        assert_eq!(best.tour.length(), 12);
        assert!(matches!(events[0], Event::Iteration { iteration: 1, best_length: 12, .. }));
    }

    #[test]
    fn two_opt_examples() {
        let sq = euc(&[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]);
        let bowtie = Tour::new(&sq, vec![0, 2, 1, 3]).unwrap();
        assert_eq!(bowtie.length(), 4);
        // nint(sqrt 2) = 1 makes the bowtie tie the perimeter at unit scale.
        let sq = euc(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        let bowtie = Tour::new(&sq, vec![0, 2, 1, 3]).unwrap();
        assert_eq!(bowtie.length(), 48);
        let fixed = two_opt(&sq, &bowtie);
        assert_eq!(fixed.length(), 40);
        assert_eq!(count_crossings(&sq, &fixed).unwrap(), 0);

        let tri = triangle();
        let t = Tour::new(&tri, vec![0, 1, 2]).unwrap();
        assert_eq!(two_opt(&tri, &t), t);
    }

    #[test]
    fn two_opt_respects_forbidden_edges() {
        let sq = euc(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        let bowtie = Tour::new(&sq, vec![0, 2, 1, 3]).unwrap();
        let kept = two_opt_avoiding(&sq, &bowtie, |a, b| (a, b) == (0, 1) || (a, b) == (1, 0));
        assert!(kept.edges().all(|(a, b)| (a, b) != (0, 1) && (a, b) != (1, 0)));
    }

    #[test]
    fn invalid_params_rejected() {
        let base = AcsParams::<f64>::default();
        assert!(base.validate().is_ok());
        assert!(AcsParams { ants: 0, ..base.clone() }.validate().is_err());
        assert!(AcsParams { iterations: 0, ..base.clone() }.validate().is_err());
        assert!(AcsParams { rho: 1.5, ..base.clone() }.validate().is_err());
        assert!(AcsParams { q0: -0.1, ..base.clone() }.validate().is_err());
        assert!(AcsParams { beta: f64::NAN, ..base }.validate().is_err());
    }

    #[test]
    fn params_json_defaults_and_alias() {
        let p: AcsParams<f64> = serde_json::from_str(r#"{"m": 12, "seed": 3}"#).unwrap();
        assert_eq!(p.ants, 12);
        assert_eq!(p.iterations, 250);
        assert_eq!(p.beta, 3.0);
        assert_eq!(p.seed, 3);
    }

    #[test]
    fn seeded_runs_repeat() {
        let params = AcsParams::<f64> { iterations: 30, ..AcsParams::default() }.with_seed(4);
        let mut a = Vec::new();
        let mut b = Vec::new();
        let ra = run(burma14(), params.clone(), None, &mut NoSteering, &mut a).unwrap();
        let rb = run(burma14(), params, None, &mut NoSteering, &mut b).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn burma14_run_is_monotone_and_positive() {
        let params = AcsParams::<f64> { iterations: 60, ..AcsParams::default() }.with_seed(1);
        let mut events = Vec::new();
        let best = run(burma14(), params, None, &mut NoSteering, &mut events).unwrap();
        let mut last = u64::MAX;
        for e in &events {
            if let Event::Iteration { best_length, tau_min, tau_max, .. } = *e {
                assert!(best_length <= last);
                assert!(tau_min > 0.0 && tau_max <= 1.0);
                last = best_length;
            }
        }
        assert!(best.tour.length() >= exact_optimum(&burma14()).unwrap().length);
    }

    #[test]
    fn single_precision_colony_runs() {
        let params = AcsParams::<f32> { iterations: 40, ..AcsParams::default() }.with_seed(2);
        let best = run(burma14(), params, None, &mut NoSteering, &mut NullSink).unwrap();
        assert!(best.tour.length() < 4048);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn two_opt_is_sandwiched(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<(f64, f64)> = (0..9).map(|_| (rng.gen_range(0.0..1000.0), rng.gen_range(0.0..1000.0))).collect();
            let inst = euc(&pts);
            let mut order: Vec<usize> = (0..9).collect();
            for i in (1..9).rev() { order.swap(i, rng.gen_range(0..=i)); }
            let start = Tour::new(&inst, order).unwrap();
            let improved = two_opt(&inst, &start);
            prop_assert!(improved.length() <= start.length());
            prop_assert!(improved.length() >= exact_optimum(&inst).unwrap().length);
        }

        #[test]
        fn two_opt_output_has_no_crossings(seed in any::<u64>(), n in 5usize..25) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Large spread keeps integer rounding from hiding a crossing.
            let pts: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0.0..1e6), rng.gen_range(0.0..1e6))).collect();
            let inst = euc(&pts);
            let tour = two_opt(&inst, &nearest_neighbor_tour(&inst, 0).unwrap());
            prop_assert_eq!(count_crossings(&inst, &tour).unwrap(), 0);
        }
    }
}
