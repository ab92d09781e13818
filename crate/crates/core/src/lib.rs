//! Exact neuron merging for feed-forward ReLU/LeakyReLU networks.
//!
//! Neurons whose incoming weights and bias are positively proportional
//! (after aggregating over already-merged upstream neurons) compute
//! positively proportional values, so they can be collapsed into one
//! neuron with re-weighted outgoing edges and the network computes the
//! same function on every input. The same lumping notion is provided for
//! continuous-time Markov chains and labelled graphs, together with a
//! linear-combination relaxation whose exactness depends on a sign
//! condition.

pub mod bench;
pub mod cli;
pub mod ctmc;
pub mod error;
pub mod io;
pub mod lump;
pub mod network;
pub mod partition;
pub mod quotient;
pub mod relax;
pub mod sampling;

pub use error::{Error, Result};
pub use lump::{check_lumpability, max_lumpability, LayerPartition, Lumping};
pub use network::{forward, forward_layer, forward_trace, validate, Activation, Layer, Network};
pub use partition::{Mode, DEFAULT_TOL};
pub use quotient::{reduce, reduction_report, ReductionReport};
