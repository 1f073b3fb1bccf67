//! Branch annotations and their JSON file format.
//!
//! ```json
//! {"frame_index": 0, "branches": [[[12.0, 40.5], [13.0, 40.5]], ...]}
//! ```
//!
//! Points are `[x, y]` pixel pairs in traversal order. The same format is
//! used for ground truth, initial annotations and tracking output.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};

#[derive(Debug, Clone, PartialEq)]
pub struct VesselAnnotation {
    pub frame_index: usize,
    pub branches: Vec<Polyline>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationFile {
    frame_index: usize,
    branches: Vec<Vec<[f64; 2]>>,
}

impl VesselAnnotation {
    pub fn new(frame_index: usize, branches: Vec<Polyline>) -> Result<Self> {
        if branches.is_empty() {
            return Err(Error::InvalidAnnotation(
                "an annotation needs at least one branch".into(),
            ));
        }
        Ok(Self {
            frame_index,
            branches,
        })
    }

    /// Checks that every point lies inside a `width` x `height` frame.
    pub fn validate_bounds(&self, width: usize, height: usize) -> Result<()> {
        let (xm, ym) = ((width - 1) as f64, (height - 1) as f64);
        for (b, branch) in self.branches.iter().enumerate() {
            for p in branch.points() {
                if p.x < 0.0 || p.y < 0.0 || p.x > xm || p.y > ym {
                    return Err(Error::InvalidAnnotation(format!(
                        "branch {b}: point ({}, {}) outside the {width}x{height} frame",
                        p.x, p.y
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn point_count(&self) -> usize {
        self.branches.iter().map(Polyline::len).sum()
    }

    /// Parses the JSON annotation format. Sparse branches are densified so
    /// consecutive points are at most one pixel apart.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: AnnotationFile = serde_json::from_str(text)?;
        let branches = file
            .branches
            .into_iter()
            .enumerate()
            .map(|(i, pts)| {
                let line = Polyline::new(pts.into_iter().map(|[x, y]| Point::new(x, y)).collect())
                    .map_err(|e| Error::InvalidAnnotation(format!("branch {i}: {e}")))?;
                Ok(if line.is_dense() { line } else { line.densify(1.0) })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.frame_index, branches)
    }

    pub fn to_json(&self) -> String {
        let file = AnnotationFile {
            frame_index: self.frame_index,
            branches: self
                .branches
                .iter()
                .map(|b| b.points().iter().map(|p| [p.x, p.y]).collect())
                .collect(),
        };
        let mut s = serde_json::to_string(&file).expect("annotation serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }
}
