//! Points and open polylines in continuous pixel coordinates.
//!
//! `x` is the column and `y` the row. Coordinates are sub-pixel; rasterization
//! only happens where a mask or an image is produced.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn dist2(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn chebyshev(&self, other: &Point) -> f64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Nearest pixel (column, row), or `None` when the point rounds outside
    /// a `width` x `height` grid.
    pub fn pixel(&self, width: usize, height: usize) -> Option<(usize, usize)> {
        let x = self.x.round();
        let y = self.y.round();
        if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
            return None;
        }
        Some((x as usize, y as usize))
    }
}

impl From<(f64, f64)> for Point {
    fn from((x, y): (f64, f64)) -> Self {
        Point::new(x, y)
    }
}

/// Maximum Chebyshev step between consecutive points of a dense polyline.
pub const MAX_CHAIN_STEP: f64 = 2.0;

/// An ordered open curve with at least two points.
///
/// Construction through [`Polyline::new`] rejects non-finite coordinates,
/// drops exact consecutive duplicates and requires two distinct points.
/// Pixel-chain density (`MAX_CHAIN_STEP`) is not enforced at construction
/// because coarse resampling legitimately produces sparse curves; use
/// [`Polyline::is_dense`] / [`Polyline::densify`].
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidPolyline(format!(
                "non-finite coordinate ({}, {})",
                p.x, p.y
            )));
        }
        let mut deduped: Vec<Point> = Vec::with_capacity(points.len());
        for p in points {
            if deduped.last() != Some(&p) {
                deduped.push(p);
            }
        }
        if deduped.len() < 2 {
            return Err(Error::InvalidPolyline(
                "a polyline needs at least two distinct points".into(),
            ));
        }
        Ok(Self { points: deduped })
    }

    /// Builds a polyline without any validation. Callers must guarantee at
    /// least two finite points; coincident points are tolerated.
    pub(crate) fn from_raw(points: Vec<Point>) -> Self {
        debug_assert!(points.len() >= 2);
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; a polyline holds at least two points.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        self.points[self.points.len() - 1]
    }

    pub fn reversed(&self) -> Polyline {
        let mut points = self.points.clone();
        points.reverse();
        Polyline { points }
    }

    pub fn arclength(&self) -> f64 {
        arclength(self)
    }

    /// True when consecutive points are at most `MAX_CHAIN_STEP` apart
    /// (Chebyshev).
    pub fn is_dense(&self) -> bool {
        self.points
            .windows(2)
            .all(|w| w[0].chebyshev(&w[1]) <= MAX_CHAIN_STEP + 1e-9)
    }

    /// Inserts linearly interpolated points so that no two consecutive points
    /// are more than `max_step` apart (Euclidean). Existing points are kept.
    pub fn densify(&self, max_step: f64) -> Polyline {
        assert!(max_step > 0.0);
        let mut out = Vec::with_capacity(self.points.len());
        out.push(self.points[0]);
        for w in self.points.windows(2) {
            let d = w[0].dist(&w[1]);
            let pieces = (d / max_step).ceil().max(1.0) as usize;
            for k in 1..pieces {
                out.push(w[0].lerp(&w[1], k as f64 / pieces as f64));
            }
            out.push(w[1]);
        }
        Polyline { points: out }
    }

    /// Minimum Euclidean distance from `p` to any vertex of the polyline.
    pub fn min_vertex_distance(&self, p: &Point) -> f64 {
        self.points
            .iter()
            .map(|q| q.dist2(p))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Minimum Euclidean distance from `p` to the curve (segments included).
    pub fn distance_to(&self, p: &Point) -> f64 {
        self.points
            .windows(2)
            .map(|w| point_segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Polyline {
        Polyline {
            points: self
                .points
                .iter()
                .map(|p| Point::new(p.x + dx, p.y + dy))
                .collect(),
        }
    }
}

pub fn point_segment_distance(p: &Point, a: &Point, b: &Point) -> f64 {
    let vx = b.x - a.x;
    let vy = b.y - a.y;
    let len2 = vx * vx + vy * vy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * vx + (p.y - a.y) * vy) / len2).clamp(0.0, 1.0);
    p.dist(&Point::new(a.x + t * vx, a.y + t * vy))
}

/// Sum of Euclidean distances between consecutive points.
pub fn arclength(p: &Polyline) -> f64 {
    p.points.windows(2).map(|w| w[0].dist(&w[1])).sum()
}

/// Resamples `p` at (approximately) uniform arclength `spacing`.
///
/// The curve is cut into `round(length / spacing)` equal arclength pieces
/// (at least one), so every output point lies on `p`, the endpoints are kept
/// exactly and the spacing differs from the requested one by at most half a
/// step per piece. A curve shorter than `spacing` collapses to its two
/// endpoints.
pub fn resample_polyline(p: &Polyline, spacing: f64) -> Polyline {
    assert!(spacing > 0.0, "resample spacing must be positive");
    let total = arclength(p);
    let pieces = ((total / spacing).round() as usize).max(1);
    if total < spacing || pieces == 1 {
        return Polyline::from_raw(vec![p.first(), p.last()]);
    }
    let step = total / pieces as f64;

    let pts = &p.points;
    let mut out = Vec::with_capacity(pieces + 1);
    out.push(pts[0]);
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut seg_len = pts[0].dist(&pts[1]);
    for k in 1..pieces {
        let target = step * k as f64;
        while seg_start + seg_len < target && seg + 2 < pts.len() {
            seg_start += seg_len;
            seg += 1;
            seg_len = pts[seg].dist(&pts[seg + 1]);
        }
        let t = if seg_len > 0.0 {
            ((target - seg_start) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[seg].lerp(&pts[seg + 1], t));
    }
    out.push(p.last());
    Polyline::from_raw(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[(f64, f64)]) -> Polyline {
        Polyline::new(points.iter().map(|&p| p.into()).collect()).unwrap()
    }

    #[test]
    fn arclength_fixtures() {
        assert_eq!(arclength(&line(&[(0.0, 0.0), (3.0, 4.0)])), 5.0);
        assert_eq!(arclength(&line(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)])), 2.0);
        let square = line(&[(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)]);
        assert_eq!(arclength(&square), 30.0);
    }

    #[test]
    fn construction_rejects_degenerate_input() {
        assert!(Polyline::new(vec![Point::new(1.0, 1.0)]).is_err());
        assert!(Polyline::new(vec![Point::new(1.0, 1.0), Point::new(1.0, 1.0)]).is_err());
        assert!(Polyline::new(vec![Point::new(f64::NAN, 1.0), Point::new(1.0, 1.0)]).is_err());
        let p = line(&[(0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn resample_straight_segment_unit_spacing() {
        let p = line(&[(0.0, 0.0), (10.0, 0.0)]);
        let r = resample_polyline(&p, 1.0);
        assert_eq!(r.len(), 11);
        for (k, q) in r.points().iter().enumerate() {
            assert!((q.x - k as f64).abs() < 1e-12);
            assert_eq!(q.y, 0.0);
        }
    }

    #[test]
    fn resample_degenerate_spacing_keeps_endpoints() {
        let p = line(&[(0.0, 0.0), (3.0, 4.0), (6.0, 0.0)]);
        let r = resample_polyline(&p, arclength(&p));
        assert_eq!(r.points(), &[p.first(), p.last()]);
        let r = resample_polyline(&p, 100.0);
        assert_eq!(r.points(), &[p.first(), p.last()]);
    }

    #[test]
    fn resample_quarter_circle() {
        let radius = 20.0;
        let arc: Vec<Point> = (0..=400)
            .map(|k| {
                let a = std::f64::consts::FRAC_PI_2 * k as f64 / 400.0;
                Point::new(radius * a.cos(), radius * a.sin())
            })
            .collect();
        let p = Polyline::new(arc).unwrap();
        let r = resample_polyline(&p, 2.0);
        let analytic = std::f64::consts::PI * radius / 2.0;
        let expected = (analytic / 2.0).round() as i64 + 1;
        assert!((r.len() as i64 - expected).abs() <= 1);
        for q in r.points() {
            let d = (q.x.hypot(q.y) - radius).abs();
            assert!(d < 0.5, "point off the arc by {d}");
        }
        assert_eq!(r.first(), p.first());
        assert_eq!(r.last(), p.last());
    }

    #[test]
    fn densify_bounds_steps() {
        let p = line(&[(0.0, 0.0), (7.0, 0.0), (7.0, 3.5)]);
        let d = p.densify(1.0);
        assert!(d.is_dense());
        assert!(d.points().windows(2).all(|w| w[0].dist(&w[1]) <= 1.0 + 1e-12));
        assert!((arclength(&d) - arclength(&p)).abs() < 1e-9);
    }

    #[test]
    fn distance_queries() {
        let p = line(&[(0.0, 0.0), (10.0, 0.0)]);
        assert!((p.distance_to(&Point::new(5.0, 3.0)) - 3.0).abs() < 1e-12);
        assert!((p.min_vertex_distance(&Point::new(5.0, 3.0)) - 34f64.sqrt()).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        // Smooth curves: unit steps with bounded curvature (radius >= 20 px).
        // Resampling cuts corners, so the length bound is a smooth-curve property.
        fn polyline_strategy() -> impl Strategy<Value = Polyline> {
            (
                (20.0f64..180.0, 20.0f64..180.0, 0.0f64..std::f64::consts::TAU),
                prop::collection::vec(-0.05f64..0.05, 2..300),
            )
                .prop_map(|((x0, y0, heading0), turns)| {
                    let mut heading = heading0;
                    let mut pts = vec![Point::new(x0, y0)];
                    for t in turns {
                        heading += t;
                        let last = *pts.last().unwrap();
                        pts.push(Point::new(last.x + heading.cos(), last.y + heading.sin()));
                    }
                    Polyline::new(pts).unwrap()
                })
        }

        proptest! {
            #[test]
            fn resample_preserves_length_within_spacing(p in polyline_strategy(), spacing in 0.5f64..5.0) {
                let r = resample_polyline(&p, spacing);
                prop_assert!((arclength(&r) - arclength(&p)).abs() < spacing);
                prop_assert_eq!(r.first(), p.first());
                prop_assert_eq!(r.last(), p.last());
                prop_assert_eq!(resample_polyline(&p, spacing), r);
            }
        }
    }
}
