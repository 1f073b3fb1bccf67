//! Skeleton gap repair: a connection-cost map fused from skeleton saliency,
//! ridge response and orientation coherence, searched with Dijkstra between
//! endpoints of different skeleton components.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::centerline::{end_pixels, thin, RidgeResponse};
use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::raster::{check_dims, BinaryMask, Plane, NEIGHBORS_8};

/// Lowest connection probability; bounds the cost at `-ln(1e-6)`.
pub const MIN_PROBABILITY: f32 = 1e-6;
const SALIENCY_SIGMA: f64 = 2.0;
const COHERENCE_RADIUS: f64 = 10.0;

/// Per-pixel traversal cost `-ln p` for a connection probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionCostMap {
    pub width: usize,
    pub height: usize,
    pub cost: Vec<f32>,
}

impl ConnectionCostMap {
    pub fn from_probability(p: &Plane) -> Self {
        Self {
            width: p.width,
            height: p.height,
            cost: p
                .data
                .iter()
                .map(|v| -v.clamp(MIN_PROBABILITY, 1.0).ln())
                .collect(),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.cost[y * self.width + x]
    }
}

/// Fuses skeleton saliency `S`, ridge response `R` and orientation coherence
/// `O` into `p = clamp(w . [S, R, O], 1e-6, 1)`.
///
/// `S` is the skeleton indicator blurred with std 2 and rescaled so a straight
/// one-pixel line reads 1 on its axis. `O` is `cos^2` of the angle between
/// the pixel orientation and the orientation at the nearest skeleton endpoint
/// within 10 px, and 0.5 where no endpoint is that close.
pub fn connection_cost(
    resp: &RidgeResponse,
    skeleton: &BinaryMask,
    weights: [f32; 3],
) -> Result<ConnectionCostMap> {
    check_dims(resp.dims(), skeleton.dims())?;
    let (w, h) = skeleton.dims();
    let indicator = Plane {
        width: w,
        height: h,
        data: skeleton.bits.iter().map(|b| *b as u8 as f32).collect(),
    };
    let line_peak = (2.0 * std::f64::consts::PI).sqrt() * SALIENCY_SIGMA;
    let saliency = gaussian_blur(&indicator, SALIENCY_SIGMA);

    let mut coherence = vec![0.5f32; w * h];
    let mut nearest = vec![f64::INFINITY; w * h];
    let r = COHERENCE_RADIUS.floor() as isize;
    for (ex, ey) in end_pixels(skeleton) {
        let te = resp.orientation.get(ex, ey);
        for dy in -r..=r {
            for dx in -r..=r {
                let d2 = (dx * dx + dy * dy) as f64;
                let (x, y) = (ex as isize + dx, ey as isize + dy);
                if d2 > COHERENCE_RADIUS * COHERENCE_RADIUS
                    || x < 0
                    || y < 0
                    || x as usize >= w
                    || y as usize >= h
                {
                    continue;
                }
                let i = y as usize * w + x as usize;
                if d2 < nearest[i] {
                    nearest[i] = d2;
                    let diff = resp.orientation.data[i] - te;
                    coherence[i] = diff.cos().powi(2);
                }
            }
        }
    }

    let p = Plane {
        width: w,
        height: h,
        data: (0..w * h)
            .map(|i| {
                let s = (saliency.data[i] as f64 * line_peak).min(1.0) as f32;
                let v = weights[0] * s + weights[1] * resp.response.data[i] + weights[2] * coherence[i];
                v.clamp(MIN_PROBABILITY, 1.0)
            })
            .collect(),
    };
    Ok(ConnectionCostMap::from_probability(&p))
}

#[derive(Clone, Copy, PartialEq)]
struct Entry {
    dist: f64,
    idx: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .dist
            .total_cmp(&self.dist)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A minimum-cost 8-connected pixel path and its mean per-pixel cost.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub pixels: Vec<(usize, usize)>,
    pub mean_cost: f32,
}

/// Dijkstra between two pixels over the cells for which `allowed` holds.
/// A step costs the mean of its two pixel costs times its Euclidean length.
/// Both endpoints are always allowed. Ties resolve towards lower pixel index.
pub fn shortest_path(
    costs: &ConnectionCostMap,
    from: (usize, usize),
    to: (usize, usize),
    allowed: impl Fn(usize, usize) -> bool,
) -> Option<BridgePath> {
    let (w, h) = costs.dims();
    let start = from.1 * w + from.0;
    let goal = to.1 * w + to.0;
    let ok = |x: usize, y: usize| (x, y) == from || (x, y) == to || allowed(x, y);
    let mut dist = std::collections::HashMap::<usize, f64>::new();
    let mut prev = std::collections::HashMap::<usize, usize>::new();
    let mut heap = BinaryHeap::new();
    dist.insert(start, 0.0);
    heap.push(Entry { dist: 0.0, idx: start });
    while let Some(Entry { dist: d, idx }) = heap.pop() {
        if idx == goal {
            break;
        }
        if d > dist[&idx] {
            continue;
        }
        let (x, y) = (idx % w, idx / w);
        for (dx, dy) in NEIGHBORS_8 {
            let (nx, ny) = (x as isize + dx, y as isize + dy);
            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !ok(nx, ny) {
                continue;
            }
            let step = if dx != 0 && dy != 0 { std::f64::consts::SQRT_2 } else { 1.0 };
            let nd = d + 0.5 * (costs.get(x, y) as f64 + costs.get(nx, ny) as f64) * step;
            let j = ny * w + nx;
            if dist.get(&j).is_none_or(|&old| nd < old) {
                dist.insert(j, nd);
                prev.insert(j, idx);
                heap.push(Entry { dist: nd, idx: j });
            }
        }
    }
    if !dist.contains_key(&goal) {
        return None;
    }
    let mut pixels = vec![(to.0, to.1)];
    let mut cur = goal;
    while cur != start {
        cur = prev[&cur];
        pixels.push((cur % w, cur / w));
    }
    pixels.reverse();
    let mean_cost =
        pixels.iter().map(|&(x, y)| costs.get(x, y) as f64).sum::<f64>() / pixels.len() as f64;
    Some(BridgePath {
        pixels,
        mean_cost: mean_cost as f32,
    })
}

/// Union-find over component labels.
struct Components {
    parent: Vec<usize>,
}

impl Components {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Region a bridge between `a` and `b` may occupy: their bounding box grown
/// by `max_gap / 2`, intersected with disks of radius `1.5 * max_gap`
/// around both endpoints.
fn bridge_region(a: (usize, usize), b: (usize, usize), max_gap: f64) -> impl Fn(usize, usize) -> bool {
    let pad = (max_gap / 2.0).ceil() as isize;
    let x0 = a.0.min(b.0) as isize - pad;
    let x1 = a.0.max(b.0) as isize + pad;
    let y0 = a.1.min(b.1) as isize - pad;
    let y1 = a.1.max(b.1) as isize + pad;
    let r2 = (1.5 * max_gap).powi(2);
    move |x, y| {
        let (xi, yi) = (x as isize, y as isize);
        let d2 = |p: (usize, usize)| {
            let dx = xi - p.0 as isize;
            let dy = yi - p.1 as isize;
            (dx * dx + dy * dy) as f64
        };
        xi >= x0 && xi <= x1 && yi >= y0 && yi <= y1 && d2(a) <= r2 && d2(b) <= r2
    }
}

/// Bridges skeleton gaps between endpoints of different components.
///
/// Endpoint pairs within `max_gap` are visited in ascending distance; each
/// endpoint bridges at most once per pass and pairs already joined in this
/// pass are skipped. A bridge is the Dijkstra path inside the pair's bridge
/// region that avoids all other skeleton pixels, accepted when its mean pixel
/// cost is at most `ceiling`. Passes repeat on the re-thinned skeleton until
/// none is accepted, which makes the operation idempotent.
pub fn bridge_gaps(
    skeleton: &BinaryMask,
    costs: &ConnectionCostMap,
    max_gap: f64,
    ceiling: f32,
) -> Result<BinaryMask> {
    check_dims(skeleton.dims(), costs.dims())?;
    if !(max_gap >= 1.0) {
        return Err(Error::InvalidConfig(format!("max_gap must be >= 1, got {max_gap}")));
    }
    let mut skel = thin(skeleton);
    loop {
        let ends = end_pixels(&skel);
        let (labels, n) = skel.components();
        let w = skel.width;
        let label = |p: (usize, usize)| labels[p.1 * w + p.0] as usize;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..ends.len() {
            for j in i + 1..ends.len() {
                if label(ends[i]) == label(ends[j]) {
                    continue;
                }
                let dx = ends[i].0 as f64 - ends[j].0 as f64;
                let dy = ends[i].1 as f64 - ends[j].1 as f64;
                let d = dx.hypot(dy);
                if d <= max_gap {
                    pairs.push((d, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

        let mut used = vec![false; ends.len()];
        let mut merged = Components::new(n + 1);
        let mut added = false;
        let frozen = skel.clone();
        for (_, i, j) in pairs {
            if used[i] || used[j] {
                continue;
            }
            let (a, b) = (ends[i], ends[j]);
            if merged.find(label(a)) == merged.find(label(b)) {
                continue;
            }
            let region = bridge_region(a, b, max_gap);
            let path = shortest_path(costs, a, b, |x, y| region(x, y) && !frozen.get(x, y));
            let Some(path) = path else { continue };
            if path.mean_cost > ceiling {
                continue;
            }
            for &(x, y) in &path.pixels {
                skel.set(x, y, true);
            }
            used[i] = true;
            used[j] = true;
            merged.union(label(a), label(b));
            added = true;
        }
        if !added {
            return Ok(skel);
        }
        skel = thin(&skel);
    }
}
