//! Homotopy continuation for nonlinear equations and complementarity
//! problems, built around the Newton fixed-point homotopy
//! `rho(lambda, x) = lambda F(x) + (1 - lambda)(F(x) - F(a) + A(x - a))`.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod ncp;
pub mod problem;
pub mod refine;
pub mod tracker;

pub use error::{Error, Result};
pub use ncp::{NcpHomotopy, NcpInstance, NcpPoint, SmoothingParams};
pub use problem::{Homotopy, HomotopyKind, HomotopyMap, Problem, SpdMatrix};
pub use refine::{merit_descent, newton_polish, MeritStatus, PolishConfig};
pub use tracker::{track, CurveTrace, Orientation, Parametrization, Strategy, TraceStatus, TrackerConfig};
