// SPDX-License-Identifier: Apache-2.0

//! Routability-aware analytical global placement.
//!
//! The crate is organised bottom-up:
//!
//! * [`netlist`] holds the circuit hypergraph, its text formats and a seeded
//!   synthetic generator.
//! * [`router`] is a deterministic L-shape global router used as the routing
//!   oracle, together with the overflow metrics and the electric overflow.
//! * [`features`] computes RUDY maps and the differentiable per-cell
//!   geometric features.
//! * [`routegraph`] builds the heterogeneous cell/net/grid graph.
//! * [`gnn`] is the congestion model with a hand-written reverse pass.
//! * [`trainer`] collects snapshots, trains the model and evaluates it.
//! * [`placer`] is the Nesterov global placement loop.
//! * [`report`] renders overflow histograms, tables and PPM heatmaps.

pub mod config;
pub mod error;
pub mod features;
pub mod gnn;
pub mod grid;
pub mod netlist;
pub mod placer;
pub mod report;
pub mod routegraph;
pub mod router;
pub mod trainer;

pub use error::{Error, Result};
pub use netlist::{Netlist, Placement};
