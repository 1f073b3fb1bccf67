use rayon::prelude::*;

use super::daisy::DaisyField;
use super::dtw::{dtw, CostMatrix};
use crate::error::{Error, Result};
use crate::geometry::{resample_polyline, Polyline};

fn describe_all(field: &DaisyField, line: &Polyline) -> Vec<Vec<f32>> {
    line.points().iter().map(|p| field.describe(p)).collect()
}

fn euclidean(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (*x - *y) as f64;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn matrix_from_descriptors(guided: &[Vec<f32>], cand: &[Vec<f32>]) -> CostMatrix {
    let data = guided
        .iter()
        .flat_map(|g| cand.iter().map(move |c| euclidean(g, c)))
        .collect();
    CostMatrix::new(guided.len(), cand.len(), data).expect("descriptor distances are finite")
}

/// `d(i, j)`: Euclidean distance between the key-frame descriptor at guided
/// point `i` and the current-frame descriptor at candidate point `j`.
pub fn cost_matrix(key: &DaisyField, cur: &DaisyField, guided: &Polyline, cand: &Polyline) -> CostMatrix {
    matrix_from_descriptors(&describe_all(key, guided), &describe_all(cur, cand))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    /// Index of the winning candidate (first on ties).
    pub index: usize,
    pub distance: f64,
    /// Warping distance of every candidate, in input order.
    pub distances: Vec<f64>,
}

/// Scores each candidate by DTW against the guided branch, both resampled to
/// `spacing`, and keeps the smallest warping distance. Guided descriptors are
/// computed once and shared by all candidates.
pub fn select_branch(
    key: &DaisyField,
    cur: &DaisyField,
    guided: &Polyline,
    candidates: &[Polyline],
    spacing: f64,
) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    let guided_desc = describe_all(key, &resample_polyline(guided, spacing));
    let distances: Vec<f64> = candidates
        .par_iter()
        .map(|c| {
            let cand_desc = describe_all(cur, &resample_polyline(c, spacing));
            dtw(&matrix_from_descriptors(&guided_desc, &cand_desc)).distance
        })
        .collect();
    let mut index = 0;
    for (i, d) in distances.iter().enumerate() {
        if *d < distances[index] {
            index = i;
        }
    }
    Ok(Selection {
        index,
        distance: distances[index],
        distances,
    })
}
