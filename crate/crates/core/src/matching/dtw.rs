//! Dynamic time warping over a dense cost matrix.

use crate::error::{Error, Result};

/// Row-major `rows x cols` matrix of non-negative finite point-pair costs.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("cost matrix needs at least one row and column".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidConfig(format!("cost {v} is not a finite non-negative value")));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidConfig("ragged cost matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn transpose(&self) -> CostMatrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                data.push(self.get(i, j));
            }
        }
        CostMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwResult {
    /// Accumulated cost of the optimal warping path, `D(M, L)`.
    pub distance: f64,
    /// Zero-based `(row, col)` pairs from `(0, 0)` to `(M - 1, L - 1)`.
    pub path: Vec<(usize, usize)>,
}

/// Optimal warping path by the accumulated-cost recurrence
/// `D(i, j) = d(i, j) + min(D(i-1, j-1), D(i-1, j), D(i, j-1))`, where the
/// first row and column accumulate along their only predecessor. Backtracking
/// prefers the diagonal, then up (`i - 1`), then left (`j - 1`) on ties.
pub fn dtw(d: &CostMatrix) -> DtwResult {
    let (m, l) = (d.rows, d.cols);
    let mut acc = vec![0.0f64; m * l];
    for i in 0..m {
        for j in 0..l {
            let c = d.get(i, j);
            acc[i * l + j] = match (i, j) {
                (0, 0) => c,
                (0, _) => acc[j - 1] + c,
                (_, 0) => acc[(i - 1) * l] + c,
                _ => {
                    let diag = acc[(i - 1) * l + j - 1];
                    let up = acc[(i - 1) * l + j];
                    let left = acc[i * l + j - 1];
                    diag.min(up).min(left) + c
                }
            };
        }
    }
    let mut path = vec![(m - 1, l - 1)];
    let (mut i, mut j) = (m - 1, l - 1);
    while (i, j) != (0, 0) {
        if i == 0 {
            j -= 1;
        } else if j == 0 {
            i -= 1;
        } else {
            let diag = acc[(i - 1) * l + j - 1];
            let up = acc[(i - 1) * l + j];
            let left = acc[i * l + j - 1];
            if diag <= up && diag <= left {
                i -= 1;
                j -= 1;
            } else if up <= left {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        path.push((i, j));
    }
    path.reverse();
    DtwResult {
        distance: acc[m * l - 1],
        path,
    }
}

/// Boundary, continuity and monotonicity of a zero-based warping path over an
/// `m x l` grid, plus the length bound `max(m, l) <= K <= m + l`.
pub fn is_valid_warping_path(path: &[(usize, usize)], m: usize, l: usize) -> bool {
    let k = path.len();
    if k < m.max(l) || k > m + l {
        return false;
    }
    if path.first() != Some(&(0, 0)) || path.last() != Some(&(m - 1, l - 1)) {
        return false;
    }
    path.windows(2).all(|w| {
        let di = w[1].0 as isize - w[0].0 as isize;
        let dj = w[1].1 as isize - w[0].1 as isize;
        (0..=1).contains(&di) && (0..=1).contains(&dj) && di + dj > 0
    })
}
