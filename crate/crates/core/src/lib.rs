//! Sampling and estimation toolkit for the largest component of random
//! geometric graphs and for site percolation clusters on lattice boxes.
//!
//! The crate is organised bottom-up:
//!
//! - [`point_process`]: seedable Poisson and binomial point samplers.
//! - [`geometric_graph`]: cell-list graph construction and component labeling.
//! - [`continuum`]: giant-component statistics, out-connect points and the
//!   boundary functional `ξ(R)` of the Poisson Boolean model.
//! - [`lattice`]: site percolation on `{0,…,n−1}^d`, cluster counting and the
//!   lattice boundary functional.
//! - [`estimation`]: Monte Carlo summaries, weighted polynomial expansion
//!   fits, normality checks and tail-decay probes.
//! - [`oracles`]: slow reference implementations used to cross-check the above.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod continuum;
pub mod error;
pub mod estimation;
pub mod geometric_graph;
pub mod lattice;
pub mod oracles;
pub mod point_process;
pub mod union_find;

pub use error::{Error, Result};
