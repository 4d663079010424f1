//! Spatial quantization of the forward process: node grids, projection,
//! transition probabilities and truncated increment weights.

mod chain;
mod spatial;
mod transition;

pub use chain::{build_chain, build_step, ChainStep, LazyChain, QuantizedChain, SparseRow, TransitionSource};
pub use spatial::{build_spatial_grids, GridPolicy, NodeSchedule, SpatialGrid};
pub use transition::{increment_weights, transition_row, TransitionMode, WINDOW_STD_DEVS};
