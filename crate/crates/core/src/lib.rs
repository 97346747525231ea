//! Ant Colony System for the symmetric TSP with a human in the loop.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`). The
//! type aliases at the crate root fix it to `f64`; [`single`] has the `f32`
//! versions.

pub mod acs;
pub mod corpus;
pub mod instance;
pub mod live;
pub mod oracle;
pub mod scalar;
pub mod session;
pub mod steering;

pub use instance::{parse_tsplib, tour_length, EdgeWeightType, Instance, Point, Tour};
pub use oracle::{exact_optimum, nearest_neighbor_tour, OptimalRecord};
pub use scalar::Scalar;
pub use session::Status;

pub type AcsParams = acs::AcsParams<f64>;
pub type PheromoneMatrix = acs::PheromoneMatrix<f64>;
pub type Colony = acs::Colony<f64>;
pub type SteeringState = steering::SteeringState<f64>;
pub type SteeringUpdate = steering::SteeringUpdate<f64>;
pub type Session = session::Session<f64>;
pub type Snapshot = session::Snapshot<f64>;
pub type RunConfig = session::RunConfig<f64>;
pub type RunResult = session::RunResult<f64>;
pub type SteeringScript = session::SteeringScript<f64>;
pub type SessionHandle = live::SessionHandle<f64>;
pub type LiveOptions = live::LiveOptions<f64>;

/// Single-precision aliases.
pub mod single {
    pub type AcsParams = crate::acs::AcsParams<f32>;
    pub type PheromoneMatrix = crate::acs::PheromoneMatrix<f32>;
    pub type Colony = crate::acs::Colony<f32>;
    pub type SteeringState = crate::steering::SteeringState<f32>;
    pub type SteeringUpdate = crate::steering::SteeringUpdate<f32>;
    pub type Session = crate::session::Session<f32>;
}
