//! Packet-level simulation of the inner code over erasure networks.

mod engine;
pub mod link;
pub mod scheme;
pub mod topology;

pub use link::{apply_link, expand_batch, recode, shrink_batch, unit_batch};
pub use scheme::{run_scheme, run_scheme_ranks, BatchSource, DestinationTrace, SchemeConfig, SchemeRun, SchemeTag, TraceBatch};
pub use topology::{edge_disjoint_paths, edge_disjoint_trees, homogenize, max_flow, min_cut, Link, NetworkTopology, NodeSpec, Role, Tree};
