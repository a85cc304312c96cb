//! Deterministic simulator for automated-vehicle trips that carry passengers
//! without a human escort.
//!
//! Three levels run on a fixed clock: strategic (mission, route, course of
//! action), tactical (stops, doors, boarding) and operational (actuator
//! commands). A plant model closes the loop through perception and the
//! representation layer; the harness wires everything together and writes a
//! replayable log.

// `!(x > 0.0)` is how NaN gets rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod harness;
pub mod ids;
pub mod odd;
pub mod operational;
pub mod perception;
pub mod plant;
pub mod representation;
pub mod strategic;
pub mod tactical;
