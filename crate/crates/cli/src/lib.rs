//! Benchmark harness around the `driftrelax` library: configuration
//! loading, filter runs over the double-well observation sequence, and
//! CSV / SVG / manifest output.

// Validation guards are written `!(x > 0.0)` on purpose: the negation
// rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod plot;
pub mod report;
