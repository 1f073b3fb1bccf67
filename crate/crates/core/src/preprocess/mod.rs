//! Key-frame to current-frame registration, annotation mapping and the
//! tracking-range mask.

mod field;
mod range;
mod register;

pub use field::{map_annotation, map_polyline, DeformationField};
pub use range::{rasterize_polyline, tracking_range};
pub use register::{register, Registration};
