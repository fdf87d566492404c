//! Return-to-home for multirotor UAVs without satellite positioning.
//!
//! The outbound flight is logged (ground speeds, altitude, yaw, and body-frame
//! anemometer readings). When positioning is lost, the drone flies home from
//! that log alone, either by retracing the route with wind-weighted speeds
//! ([`planner::weighted`]) or by flying straight home at speeds predicted
//! from the live wind by a pair of LASSO models ([`planner::lasso`]).
//!
//! [`windsim`] provides a deterministic wind/drone simulator to close the
//! loop, and [`evaluator`] runs the experiments on top of it.

pub mod deadreckon;
pub mod evaluator;
pub mod frames;
pub mod lasso;
pub mod logstore;
pub mod planner;
pub mod windsim;

pub use deadreckon::{arrival_error, integrate_path, reverse_series, Path, Position};
pub use frames::{normalize_angle, to_true_north_east, wind_magnitude, Angle, Speed, TrueWind, WindSample};
pub use logstore::{FlightRecord, RecordMeta};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/frames.md")]
    struct Frames;
    #[doc = include_str!("../../../book/src/logs.md")]
    struct Logs;
    #[doc = include_str!("../../../book/src/dead-reckoning.md")]
    struct DeadReckoning;
    #[doc = include_str!("../../../book/src/simulator.md")]
    struct Simulator;
    #[doc = include_str!("../../../book/src/weighted.md")]
    struct Weighted;
    #[doc = include_str!("../../../book/src/lasso.md")]
    struct Lasso;
    #[doc = include_str!("../../../book/src/evaluation.md")]
    struct Evaluation;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
