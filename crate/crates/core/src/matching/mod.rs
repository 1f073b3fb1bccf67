//! Descriptor-based DTW matching of candidate paths against a guided branch.

mod daisy;
mod dtw;
mod select;

pub use daisy::{descriptor, DaisyField};
pub use dtw::{dtw, is_valid_warping_path, CostMatrix, DtwResult};
pub use select::{cost_matrix, select_branch, Selection};
