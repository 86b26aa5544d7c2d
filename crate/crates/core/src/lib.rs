//! Mask-mediator-wrapper integration framework.
//!
//! Wrappers expose one data source each in the canonical system format,
//! mediators integrate and restructure their children's schemas, and masks
//! sit on top of exactly one mediator to present the integrated data in a
//! user-facing format. [`topology`] wires components together from a file
//! and [`cost`] prices architecture shifts.

pub mod comms;
pub mod cost;
pub mod mask;
pub mod mediator;
pub mod model;
pub mod topology;
pub mod wrapper;
