//! Tracking of annotated curvilinear structures through grayscale image
//! sequences.
//!
//! Each branch of a key-frame annotation is mapped into the next frame by
//! registration, searched for in a centerline graph built inside its tracking
//! range, and chosen among candidate paths by dynamic time warping over dense
//! gradient-histogram descriptors. A synthetic sequence generator and a
//! tolerance-based evaluation harness accompany the tracker.

// Negated comparisons reject NaN in parameter validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod annotation;
pub mod centerline;
pub mod config;
pub mod error;
pub mod eval;
pub mod filter;
pub mod gap;
pub mod geometry;
pub mod graph;
pub mod io;
pub mod matching;
pub mod preprocess;
pub mod raster;
pub mod synth;
pub mod tracker;

pub use annotation::VesselAnnotation;
pub use config::TrackerConfig;
pub use error::{Error, Result};
pub use geometry::{Point, Polyline};
pub use raster::{BinaryMask, ImageFrame};
pub use tracker::{track_sequence, track_sequence_with, TrackOptions, TrackingReport};
