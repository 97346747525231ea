//! Reference solvers: exact optima for small instances, the greedy start tour,
//! and a geometric crossing counter.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, Point, Tour, TourError};

/// Largest instance [`exact_optimum`] accepts.
pub const HELD_KARP_MAX_NODES: usize = 20;

/// Largest instance [`brute_force_optimum`] accepts.
pub const BRUTE_FORCE_MAX_NODES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptimumMethod {
    HeldKarp,
    BruteForce,
    Provided,
}

/// A known optimum, either computed here or supplied alongside an instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimalRecord {
    pub order: Vec<usize>,
    pub length: u64,
    pub method: OptimumMethod,
}

impl OptimalRecord {
    /// Wraps an externally known optimal tour, checking its length.
    pub fn provided(instance: &Instance, order: Vec<usize>) -> Result<Self, TourError> {
        let tour = Tour::new(instance, order)?;
        Ok(OptimalRecord {
            length: tour.length(),
            order: tour.into_order(),
            method: OptimumMethod::Provided,
        })
    }

    pub fn tour(&self, instance: &Instance) -> Result<Tour, TourError> {
        Tour::new(instance, self.order.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("{method:?} handles at most {max} nodes, instance has {n}")]
    TooLarge { method: OptimumMethod, n: usize, max: usize },
    #[error("instance has no coordinates")]
    NoCoordinates,
    #[error("start node {0} is out of range")]
    BadStart(usize),
}

/// Held-Karp dynamic program over `(visited subset, endpoint)` states with
/// node 0 fixed as the start.
pub fn exact_optimum(instance: &Instance) -> Result<OptimalRecord, OracleError> {
    let n = instance.dimension();
    if n > HELD_KARP_MAX_NODES {
        return Err(OracleError::TooLarge {
            method: OptimumMethod::HeldKarp,
            n,
            max: HELD_KARP_MAX_NODES,
        });
    }
    // Subsets range over nodes 1..n, encoded as bit (v - 1).
    let m = n - 1;
    let full = (1usize << m) - 1;
    let mut best = vec![u64::MAX; (1 << m) * m];
    let mut parent = vec![u8::MAX; (1 << m) * m];
    for v in 0..m {
        best[(1 << v) * m + v] = instance.cost(0, v + 1);
    }
    for subset in 1..=full {
        for last in 0..m {
            if subset & (1 << last) == 0 {
                continue;
            }
            let here = best[subset * m + last];
            if here == u64::MAX {
                continue;
            }
            let mut rest = full & !subset;
            while rest != 0 {
                let next = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let grown = subset | (1 << next);
                let cand = here + instance.cost(last + 1, next + 1);
                let slot = grown * m + next;
                if cand < best[slot] {
                    best[slot] = cand;
                    parent[slot] = last as u8;
                }
            }
        }
    }
    let (mut last, length) = (0..m)
        .map(|v| (v, best[full * m + v] + instance.cost(v + 1, 0)))
        .min_by_key(|&(v, len)| (len, v))
        .expect("n >= 3");
    let mut order = Vec::with_capacity(n);
    let mut subset = full;
    while subset != 0 {
        order.push(last + 1);
        let prev = parent[subset * m + last];
        subset &= !(1 << last);
        last = prev as usize;
    }
    order.push(0);
    order.reverse();
    Ok(OptimalRecord { order, length, method: OptimumMethod::HeldKarp })
}

/// Exhaustive search over circuits with node 0 first; on symmetric instances
/// only one direction of each circuit is evaluated.
pub fn brute_force_optimum(instance: &Instance) -> Result<OptimalRecord, OracleError> {
    let n = instance.dimension();
    if n > BRUTE_FORCE_MAX_NODES {
        return Err(OracleError::TooLarge {
            method: OptimumMethod::BruteForce,
            n,
            max: BRUTE_FORCE_MAX_NODES,
        });
    }
    let canonical_only = instance.is_symmetric();
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Option<(u64, Vec<usize>)> = None;
    permute(&mut order, 1, &mut |perm| {
        if canonical_only && perm[1] > perm[n - 1] {
            return;
        }
        let len = crate::instance::cycle_length(instance, perm);
        if best.as_ref().is_none_or(|(b, _)| len < *b) {
            best = Some((len, perm.to_vec()));
        }
    });
    let (length, order) = best.expect("at least one circuit");
    Ok(OptimalRecord { order, length, method: OptimumMethod::BruteForce })
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Greedy tour: always move to the cheapest unvisited node, ties to the lowest
/// index.
pub fn nearest_neighbor_tour(instance: &Instance, start: usize) -> Result<Tour, OracleError> {
    let n = instance.dimension();
    if start >= n {
        return Err(OracleError::BadStart(start));
    }
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut current = start;
    visited[current] = true;
    order.push(current);
    for _ in 1..n {
        let next = (0..n)
            .filter(|&v| !visited[v])
            .min_by_key(|&v| (instance.cost(current, v), v))
            .expect("unvisited node remains");
        visited[next] = true;
        order.push(next);
        current = next;
    }
    Ok(Tour::from_valid(instance, order))
}

/// Number of pairs of non-adjacent tour edges whose segments properly cross.
pub fn count_crossings(instance: &Instance, tour: &Tour) -> Result<usize, OracleError> {
    let coords = instance.coordinates().ok_or(OracleError::NoCoordinates)?;
    let segments: Vec<(Point, Point)> = tour.edges().map(|(a, b)| (coords[a], coords[b])).collect();
    let n = segments.len();
    let mut count = 0;
    for i in 0..n {
        for j in i + 2..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if properly_intersect(segments[i], segments[j]) {
                count += 1;
            }
        }
    }
    Ok(count)
}

fn orientation(a: Point, b: Point, c: Point) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

fn properly_intersect((p1, p2): (Point, Point), (q1, q2): (Point, Point)) -> bool {
    let d1 = orientation(q1, q2, p1);
    let d2 = orientation(q1, q2, p2);
    let d3 = orientation(p1, p2, q1);
    let d4 = orientation(p1, p2, q2);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}
