//! Overlay streaming with randomized network coding: where should the
//! coding nodes go?
//!
//! The crate models an overlay multicast network as a DAG of lossy,
//! capacity-limited links whose relays either store-and-forward packets or
//! recombine them over GF(2^8). It estimates per-client decoding delay
//! analytically, places a budget of network-coding nodes greedily (with
//! full or only local network knowledge), and validates every prediction
//! against a packet-level discrete-event simulation.
//!
//! Start from the runnable programs in `examples/`, one per capability:
//! coding round trips, topology generation, delay estimation, simulation,
//! node placement, and throughput bounds. The `ncplace` binary drives the
//! same machinery from the command line.

pub mod buffer;
pub mod delay;
pub mod experiment;
pub mod gf256;
pub mod placement;
pub mod rnc;
pub mod sim;
pub mod topology;

pub use delay::{estimate, DelayReport};
pub use placement::{select_centralized, select_local, select_random, SelectionPlan};
pub use sim::{monte_carlo, simulate, SimConfig, SimResult};
pub use topology::{generate, GenerateConfig, NodeId, OverlayGraph, Role};
