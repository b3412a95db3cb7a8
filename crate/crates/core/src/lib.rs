#![no_std]

//! Rare-event probability estimation by large-deviations importance sampling.
//!
//! The crate is organised bottom-up:
//!
//! - [`rate_models`]: input laws with cumulant generating function, rate
//!   function, tilt solve and exponentially tilted sampling.
//! - [`event_sets`]: rare-event sets as finite unions of convex polyhedra and
//!   the covered/residual split induced by a list of dominating points.
//! - [`qp`]: a dual active-set solver for projecting onto a polyhedron in the
//!   Mahalanobis metric.
//! - [`dominating`]: sequential dominating-point search with a rate-ratio
//!   stopping rule.
//! - [`sampling`]: mixture importance sampling, crude Monte Carlo and the
//!   single/two-tilt estimators for sums of i.i.d. increments.
//! - [`inference`]: confidence intervals and efficiency diagnostics.
//!
//! Everything here is pure computation over `alloc`; IO, threading and file
//! formats live in the companion `redps` crate.

extern crate alloc;

pub mod dominating;
pub mod error;
pub mod event_sets;
pub mod inference;
pub mod linalg;
pub mod qp;
pub mod rate_models;
pub mod rng;
pub mod sampling;
pub mod special;

pub use crate::dominating::{find_dominating_set, min_rate_point, DominatingPoint, DominatingSet};
pub use crate::error::{Error, Result};
pub use crate::event_sets::{PolyhedralUnion, Polyhedron, Region, RegionSplit};
pub use crate::qp::{QpResult, QpStatus};
pub use crate::rate_models::{GaussianModel, IncrementSum, RateModel};
pub use crate::sampling::{EstimationReport, MixtureSampler};
