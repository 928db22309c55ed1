//! Multiperiod production planning for prestressed precast beams.
//!
//! Molds of fixed capacity cast beams of several types; a type fixes the
//! curing time and offers a few lengths with a demand each. A plan assigns
//! to every mold and period either the start of a pattern (a type plus a
//! count per length), a continuation of a pattern still curing, or nothing.
//!
//! The crate is organised bottom-up:
//!
//! - [`instance`]: problem data, the instance file format and validation.
//! - [`patterns`]: pattern enumeration and catalogs (all, maximal, qc-maximal).
//! - [`ilp`]: the four integer programs and LP file export.
//! - [`solver`]: branch-and-bound, bound providers and a brute-force oracle.
//! - [`plan`]: production plans, independent verification and metrics.
//! - [`heuristics`]: the six priority rules and the size-reduction heuristic.
//! - [`generator`] and [`bench`]: seeded instances and benchmark tables.

pub mod bench;
pub mod generator;
pub mod heuristics;
pub mod ilp;
pub mod instance;
pub mod patterns;
pub mod plan;
pub mod solver;
pub mod units;
