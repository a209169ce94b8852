//! Most-reliable-path routing for mobile ad-hoc networks whose nodes follow
//! pre-planned, group-correlated trajectories.
//!
//! The math modules ([`chisq`], [`estimator`], [`router`], [`geometry`],
//! [`mobility`] plans and [`pli::sigma_p`]) are generic over the scalar type.
//! The simulator runs in `f64`; the aliases below fix that choice.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chisq;
pub mod engine;
pub mod estimator;
pub mod geometry;
pub mod harness;
pub mod linkstate;
pub mod mobility;
pub mod pli;
pub mod protocol;
pub mod radio;
pub mod router;
pub mod scalar;

pub use scalar::Real;

pub type Point = geometry::Point2<f64>;
pub type Waypoint = mobility::Waypoint<f64>;
pub type MobilityPlan = mobility::MobilityPlan<f64>;
pub type ReliabilityGraph = router::ReliabilityGraph<f64>;
pub type RoutingTable = router::RoutingTable<f64>;
pub type Route = router::Route<f64>;
