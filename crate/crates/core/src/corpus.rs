//! TSPLIB instances shipped with the crate.

use crate::instance::{parse_tsplib, Instance};

/// `(name, TSPLIB text)` pairs.
pub const BUNDLED: &[(&str, &str)] = &[
    ("burma14", include_str!("../data/burma14.tsp")),
    ("burma14x2", include_str!("../data/burma14x2.tsp")),
    ("ulysses16", include_str!("../data/ulysses16.tsp")),
];

pub fn text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

pub fn load(name: &str) -> Option<Instance> {
    text(name).map(|t| parse_tsplib(t).expect("bundled instances parse"))
}
