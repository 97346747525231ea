use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point type used for pheromone levels, heuristic values and
/// probabilities: `f32` or `f64`.
///
/// Tour lengths and edge costs never go through this type; they stay integer.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Lossy conversion used for constants and for random draws.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to every Scalar")
    }

    fn of_u64(value: u64) -> Self {
        Self::from_u64(value).expect("u64 converts to every Scalar")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("Scalar converts to f64")
    }

    /// Slack allowed when checking that human probabilities in a row sum to
    /// at most one.
    fn row_sum_slack() -> Self {
        Self::epsilon() * Self::of(16.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Uniform draw on `[0, 1)` in the scalar type.
///
/// Draws are made in `f64` so that `f32` and `f64` runs consume the random
/// stream identically; a draw that rounds up to 1 in `f32` is pulled back
/// below 1.
pub(crate) fn unit_draw<T: Scalar, R: rand::Rng + ?Sized>(rng: &mut R) -> T {
    let u = T::of(rng.gen::<f64>());
    if u >= T::one() {
        T::one() - T::epsilon()
    } else {
        u
    }
}
