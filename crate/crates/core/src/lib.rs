//! Network error correction for four-node zig-zag networks with a feedback link.

pub mod adversary;
pub mod bounds;
pub mod codec;
pub mod error;
pub mod galois;
pub mod harness;
pub mod mds;
pub mod signaling;
pub mod sink;

pub use bounds::{Category, LinkId, NetworkParams};
pub use error::{Error, Result};
pub use galois::{Field, SymbolMatrix};
pub use mds::{make_mds, MdsCode};
