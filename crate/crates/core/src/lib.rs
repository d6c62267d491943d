//! Planning and runtime verification for a unicycle robot.
//!
//! Candidate trajectories come from a parameterized Dubins planning model and
//! a precomputed forward reachable set ([`frs`], [`planner`]). Before a
//! candidate is executed, the [`verifier`] propagates an interval
//! over-approximation of the closed-loop unicycle under bounded disturbances
//! and checks it against obstacles; rejected candidates go through the
//! [`repair`] ladder.
//!
//! The geometry, dynamics, integration and verification layers are generic
//! over [`Scalar`] (`f32` or `f64`). The FRS, planner and repair layers work
//! in `f64`. The aliases below fix the scalar to `f64`.

pub mod dynamics;
pub mod frs;
pub mod geometry;
pub mod ode;
pub mod planner;
pub mod repair;
pub mod scalar;
pub mod verifier;

pub use scalar::Scalar;

pub type Interval = geometry::Interval<f64>;
pub type IntervalVector<const N: usize> = geometry::IntervalVector<f64, N>;
pub type Box2 = geometry::Box2<f64>;
pub type Point2 = geometry::Point2<f64>;
pub type ConvexPolygon = geometry::ConvexPolygon<f64>;
pub type UnicycleState = dynamics::UnicycleState<f64>;
pub type PlanState = dynamics::PlanState<f64>;
pub type TrajParam = dynamics::TrajParam<f64>;
pub type VehicleLimits = dynamics::VehicleLimits<f64>;
pub type CommandProfile = dynamics::CommandProfile<f64>;
pub type DisturbancePatch = dynamics::DisturbancePatch<f64>;
pub type DisturbanceField = dynamics::DisturbanceField<f64>;
pub type EmbeddingState = verifier::EmbeddingState<f64, 4>;
pub type UncertaintyConfig = verifier::UncertaintyConfig<f64>;
pub type DisturbanceBounds = verifier::DisturbanceBounds<f64>;
pub type ReachTube = verifier::ReachTube<f64>;
pub type Certificate = verifier::Certificate<f64>;

pub use dynamics::{Phase, Realization};
pub use frs::{FrsParams, FrsTable, TrackingErrorBound};
pub use planner::{PlanOutcome, PlanningProblem};
pub use repair::{RepairConfig, RepairOutcome};
pub use verifier::Verdict;
