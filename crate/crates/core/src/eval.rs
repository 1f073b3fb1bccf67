//! Tolerance-based precision, sensitivity and F1 of tracked centerlines, and
//! their aggregation over frames and sequences.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::annotation::VesselAnnotation;
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::geometry::{resample_polyline, Point};
use crate::raster::ImageFrame;
use crate::tracker::{track_sequence_with, TrackOptions};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub prec: f64,
    pub sens: f64,
    pub f1: f64,
}

/// Branch points resampled to 1 px spacing, all branches pooled.
pub fn point_set(ann: &VesselAnnotation) -> Vec<Point> {
    ann.branches
        .iter()
        .flat_map(|b| resample_polyline(b, 1.0).into_points())
        .collect()
}

/// Uniform grid over points with cell size `cell`, for radius queries.
struct PointGrid {
    cell: f64,
    cells: std::collections::HashMap<(i64, i64), Vec<Point>>,
}

impl PointGrid {
    fn new(points: &[Point], cell: f64) -> Self {
        let mut cells: std::collections::HashMap<(i64, i64), Vec<Point>> = Default::default();
        for p in points {
            cells.entry(Self::key(p, cell)).or_default().push(*p);
        }
        Self { cell, cells }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64) {
        ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
    }

    fn any_within(&self, p: &Point, r: f64) -> bool {
        let (cx, cy) = Self::key(p, self.cell);
        let r2 = r * r;
        (cx - 1..=cx + 1).any(|x| {
            (cy - 1..=cy + 1).any(|y| {
                self.cells
                    .get(&(x, y))
                    .is_some_and(|v| v.iter().any(|q| p.dist2(q) <= r2))
            })
        })
    }
}

fn covered(from: &[Point], to: &[Point], rho: f64) -> usize {
    if to.is_empty() {
        return 0;
    }
    let grid = PointGrid::new(to, rho.max(1.0));
    from.iter().filter(|p| grid.any_within(p, rho)).count()
}

/// Coverage matching at tolerance `rho`: a predicted point is a true positive
/// when some ground-truth point lies within `rho`, and a ground-truth point is
/// missed when no predicted point does. Both annotations are compared as
/// 1 px resampled point sets.
pub fn match_counts(pred: &VesselAnnotation, gt: &VesselAnnotation, rho: f64) -> MatchCounts {
    let (p, g) = (point_set(pred), point_set(gt));
    let tp = covered(&p, &g, rho);
    MatchCounts {
        tp,
        fp: p.len() - tp,
        fn_: g.len() - covered(&g, &p, rho),
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn metrics(c: MatchCounts) -> MetricTriple {
    let prec = ratio(c.tp, c.tp + c.fp);
    let sens = ratio(c.tp, c.tp + c.fn_);
    let f1 = if prec + sens > 0.0 {
        2.0 * prec * sens / (prec + sens)
    } else {
        0.0
    };
    MetricTriple { prec, sens, f1 }
}

/// Mean and population std of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(v: impl Iterator<Item = f64> + Clone) -> MeanStd {
    let n = v.clone().count() as f64;
    let mean = v.clone().sum::<f64>() / n;
    let var = v.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    MeanStd { mean, std: var.sqrt() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub frames: usize,
    pub sequences: usize,
    pub prec: MeanStd,
    pub sens: MeanStd,
    pub f1: MeanStd,
    /// Mean F1 over each sequence's first, middle (`floor((T - 1) / 2)`) and
    /// last tracked frame.
    pub first_f1: f64,
    pub middle_f1: f64,
    pub last_f1: f64,
}

/// Aggregates per-frame metrics; each inner list holds one sequence's tracked
/// frames in order.
pub fn aggregate(sequences: &[Vec<MetricTriple>]) -> Result<Summary> {
    if sequences.is_empty() || sequences.iter().any(|s| s.is_empty()) {
        return Err(Error::InvalidConfig("aggregation needs non-empty sequences".into()));
    }
    let all = sequences.iter().flatten();
    let span = |pick: fn(&[MetricTriple]) -> &MetricTriple| {
        sequences.iter().map(|s| pick(s).f1).sum::<f64>() / sequences.len() as f64
    };
    Ok(Summary {
        frames: all.clone().count(),
        sequences: sequences.len(),
        prec: mean_std(all.clone().map(|m| m.prec)),
        sens: mean_std(all.clone().map(|m| m.sens)),
        f1: mean_std(all.map(|m| m.f1)),
        first_f1: span(|s| &s[0]),
        middle_f1: span(|s| &s[(s.len() - 1) / 2]),
        last_f1: span(|s| &s[s.len() - 1]),
    })
}

/// One row of the per-frame table.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRow {
    pub sequence: String,
    pub frame: usize,
    pub metrics: MetricTriple,
}

/// Comma-separated per-frame table followed by a summary block.
pub fn metrics_table(rows: &[FrameRow], summary: &Summary) -> String {
    let mut s = String::from("sequence,frame,prec,sens,f1\n");
    for r in rows {
        let m = r.metrics;
        let _ = writeln!(s, "{},{},{:.4},{:.4},{:.4}", r.sequence, r.frame, m.prec, m.sens, m.f1);
    }
    let _ = writeln!(s, "\nmetric,mean,std");
    for (name, v) in [("prec", summary.prec), ("sens", summary.sens), ("f1", summary.f1)] {
        let _ = writeln!(s, "{name},{:.4},{:.4}", v.mean, v.std);
    }
    let _ = writeln!(s, "\nspan,f1");
    for (name, v) in [("first", summary.first_f1), ("middle", summary.middle_f1), ("last", summary.last_f1)] {
        let _ = writeln!(s, "{name},{v:.4}");
    }
    s
}

/// Per-frame metrics of tracked annotations against ground truth matched by
/// frame index. Tracked frames without ground truth are an error.
pub fn evaluate_frames(pred: &[&VesselAnnotation], gt: &[VesselAnnotation], rho: f64) -> Result<Vec<(usize, MetricTriple)>> {
    pred.iter()
        .map(|p| {
            let g = gt
                .iter()
                .find(|g| g.frame_index == p.frame_index)
                .ok_or_else(|| Error::InvalidAnnotation(format!("no ground truth for frame {}", p.frame_index)))?;
            Ok((p.frame_index, metrics(match_counts(p, g, rho))))
        })
        .collect()
}

/// One tracking benchmark: frames, ground truth per frame (index 0 seeds the
/// tracker) and a name for the table.
pub struct Benchmark<'a> {
    pub name: &'a str,
    pub frames: &'a [ImageFrame],
    pub ground_truth: &'a [VesselAnnotation],
}

/// Tracks every benchmark once per value of `n_nearest` and aggregates the
/// results; each entry pairs the value with its summary.
pub fn sweep_n_nearest(
    benchmarks: &[Benchmark],
    values: &[usize],
    base: &TrackerConfig,
    opts: &TrackOptions,
) -> Result<Vec<(usize, Summary)>> {
    values
        .iter()
        .map(|&n| {
            let cfg = TrackerConfig {
                n_nearest: n,
                ..base.clone()
            };
            let per_seq = benchmarks
                .iter()
                .map(|b| {
                    let report = track_sequence_with(b.frames, &b.ground_truth[0], &cfg, opts)?;
                    let m = evaluate_frames(&report.annotations(), b.ground_truth, cfg.rho)?;
                    Ok(m.into_iter().map(|(_, t)| t).collect())
                })
                .collect::<Result<Vec<Vec<MetricTriple>>>>()?;
            Ok((n, aggregate(&per_seq)?))
        })
        .collect()
}

/// Table of a sweep: one row per parameter value.
pub fn sweep_table(param: &str, rows: &[(usize, Summary)]) -> String {
    let mut s = format!("{param},prec_mean,prec_std,sens_mean,sens_std,f1_mean,f1_std,first_f1,middle_f1,last_f1\n");
    for (v, m) in rows {
        let _ = writeln!(
            s,
            "{v},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}",
            m.prec.mean, m.prec.std, m.sens.mean, m.sens.std, m.f1.mean, m.f1.std, m.first_f1, m.middle_f1, m.last_f1
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Polyline;
    use proptest::prelude::*;

    type Segment = ((f64, f64), (f64, f64));

    fn ann(lines: &[Segment]) -> VesselAnnotation {
        VesselAnnotation {
            frame_index: 0,
            branches: lines
                .iter()
                .map(|&(a, b)| Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]).unwrap().densify(1.0))
                .collect(),
        }
    }

    #[test]
    fn formula_fixtures() {
        let m = metrics(MatchCounts { tp: 9, fp: 1, fn_: 1 });
        assert_eq!((m.prec, m.sens, m.f1), (0.9, 0.9, 0.9));
        assert_eq!(metrics(MatchCounts { tp: 0, fp: 4, fn_: 3 }), MetricTriple::default());
        let m = metrics(MatchCounts { tp: 8, fp: 2, fn_: 0 });
        assert_eq!((m.prec, m.sens), (0.8, 1.0));
        assert!((m.f1 - 8.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn identical_and_empty() {
        let g = ann(&[((0.0, 0.0), (20.0, 5.0))]);
        let c = match_counts(&g, &g, 0.0);
        assert_eq!((c.fp, c.fn_), (0, 0));
        let empty = VesselAnnotation { frame_index: 0, branches: vec![] };
        let n = point_set(&g).len();
        assert_eq!(match_counts(&empty, &g, 3.0), MatchCounts { tp: 0, fp: 0, fn_: n });
        assert_eq!(match_counts(&g, &empty, 3.0), MatchCounts { tp: 0, fp: n, fn_: 0 });
    }

    #[test]
    fn shifted_line() {
        let g = ann(&[((0.0, 10.0), (40.0, 10.0))]);
        let p = ann(&[((0.0, 12.0), (40.0, 12.0))]);
        let n = point_set(&g).len();
        assert_eq!(match_counts(&p, &g, 3.0), MatchCounts { tp: n, fp: 0, fn_: 0 });
        assert_eq!(match_counts(&p, &g, 1.0), MatchCounts { tp: 0, fp: n, fn_: n });
    }

    #[test]
    fn overlong_prediction_is_half_false() {
        let g = ann(&[((0.0, 0.0), (50.0, 0.0))]);
        let p = ann(&[((0.0, 0.0), (100.0, 0.0))]);
        let c = match_counts(&p, &g, 1.0);
        // Points 0..=51 lie within 1 px of the truth, 52..=100 do not.
        assert_eq!((c.tp, c.fp, c.fn_), (52, 49, 0));
        let swapped = match_counts(&g, &p, 1.0);
        assert_eq!((swapped.fp, swapped.fn_), (0, 49));
    }

    #[test]
    fn aggregation() {
        let t = |f1| MetricTriple { prec: f1, sens: f1, f1 };
        let one = aggregate(&[vec![t(0.7)]]).unwrap();
        assert_eq!((one.f1.mean, one.f1.std), (0.7, 0.0));
        let two = aggregate(&[vec![t(0.8), t(1.0)]]).unwrap();
        assert!((two.f1.mean - 0.9).abs() < 1e-12 && (two.f1.std - 0.1).abs() < 1e-12);
        // First, middle and last average one value per sequence.
        let s = aggregate(&[
            vec![t(0.1), t(0.2), t(0.3), t(0.4)],
            vec![t(0.5), t(0.6), t(0.7)],
            vec![t(0.9)],
        ])
        .unwrap();
        assert!((s.first_f1 - (0.1 + 0.5 + 0.9) / 3.0).abs() < 1e-12);
        assert!((s.middle_f1 - (0.2 + 0.6 + 0.9) / 3.0).abs() < 1e-12);
        assert!((s.last_f1 - (0.4 + 0.7 + 0.9) / 3.0).abs() < 1e-12);
        assert!(aggregate(&[]).is_err());
        let table = metrics_table(&[FrameRow { sequence: "a".into(), frame: 1, metrics: t(0.5) }], &one);
        assert!(table.starts_with("sequence,frame,prec,sens,f1\na,1,0.5000,0.5000,0.5000\n"));
    }

    fn polyline() -> impl Strategy<Value = ((f64, f64), (f64, f64))> {
        ((0.0f64..60.0, 0.0f64..60.0), (0.0f64..60.0, 0.0f64..60.0))
            .prop_filter("distinct", |(a, b)| (a.0 - b.0).abs() + (a.1 - b.1).abs() > 1.0)
    }

    proptest! {
        #[test]
        fn monotone_in_rho_and_harmonic(
            p in proptest::collection::vec(polyline(), 1..4),
            g in proptest::collection::vec(polyline(), 1..4),
            r1 in 0.0f64..6.0,
            dr in 0.0f64..6.0,
        ) {
            let (p, g) = (ann(&p), ann(&g));
            let a = metrics(match_counts(&p, &g, r1));
            let b = metrics(match_counts(&p, &g, r1 + dr));
            prop_assert!(a.prec <= b.prec && a.sens <= b.sens);
            prop_assert!(a.f1 >= a.prec.min(a.sens) - 1e-12 && a.f1 <= a.prec.max(a.sens) + 1e-12);
        }
    }
}
