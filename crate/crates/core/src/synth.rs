//! Synthetic angiography-like sequences with exact ground truth: a branching
//! tree of dark Gaussian tubes on a bright background under a smooth periodic
//! deformation.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::VesselAnnotation;
use crate::error::{Error, Result};
use crate::geometry::{point_segment_distance, resample_polyline, Point, Polyline};
use crate::raster::{ImageFrame, Plane};

pub const BACKGROUND: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub seed: u64,
    /// Generations of branching; depth 1 is the root alone.
    pub depth: usize,
    /// Total number of branches, root included.
    pub branches: usize,
    /// Std of the tube's Gaussian cross-section, pixels.
    pub tube_std: f64,
    /// Intensity drop on the tube axis.
    pub contrast: f64,
    pub noise: f64,
    /// Peak displacement of the periodic motion, pixels.
    pub amplitude: f64,
    pub frames_per_cycle: usize,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    /// Left-to-right background ramp added to the bright level.
    pub background_gradient: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            seed: 7,
            depth: 2,
            branches: 3,
            tube_std: 2.0,
            contrast: 0.45,
            noise: 0.05,
            amplitude: 4.0,
            frames_per_cycle: 12,
            frames: 12,
            width: 512,
            height: 512,
            background_gradient: 0.0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.depth == 0 || self.branches == 0 {
            return fail("depth and branches must be >= 1");
        }
        if self.depth == 1 && self.branches > 1 {
            return fail("a depth-1 tree has exactly one branch");
        }
        if self.width < 64 || self.height < 64 {
            return fail("frames must be at least 64x64");
        }
        if self.frames == 0 || self.frames_per_cycle == 0 {
            return fail("frames and frames_per_cycle must be >= 1");
        }
        if !(self.tube_std > 0.0) || !(self.contrast > 0.0 && self.contrast <= BACKGROUND) {
            return fail("tube_std must be positive and contrast in (0, 0.8]");
        }
        if !(self.noise >= 0.0) || !(self.amplitude >= 0.0) {
            return fail("noise and amplitude must be non-negative");
        }
        Ok(())
    }

    fn margin(&self) -> f64 {
        24.0 + self.amplitude + 4.0 * self.tube_std
    }
}

/// Centripetal-free uniform Catmull-Rom spline through `ctrl`, sampled densely
/// and resampled to 1 px.
fn spline(ctrl: &[Point]) -> Polyline {
    let n = ctrl.len();
    let at = |i: isize| ctrl[i.clamp(0, n as isize - 1) as usize];
    let mut pts = Vec::new();
    for i in 0..n - 1 {
        let (p0, p1, p2, p3) = (at(i as isize - 1), at(i as isize), at(i as isize + 1), at(i as isize + 2));
        let steps = (p1.dist(&p2).ceil() as usize * 4).max(4);
        for s in 0..steps {
            let t = s as f64 / steps as f64;
            let (t2, t3) = (t * t, t * t * t);
            let f = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b + (-a + c) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 + (-a + 3.0 * b - 3.0 * c + d) * t3)
            };
            pts.push(Point::new(f(p0.x, p1.x, p2.x, p3.x), f(p0.y, p1.y, p2.y, p3.y)));
        }
    }
    pts.push(ctrl[n - 1]);
    resample_polyline(&Polyline::new(pts).expect("control points are distinct"), 1.0)
}

fn random_curve(rng: &mut ChaCha8Rng, start: Point, heading: f64, length: f64, pieces: usize) -> Polyline {
    let mut ctrl = vec![start];
    let mut h = heading;
    let step = length / pieces as f64;
    for _ in 0..pieces {
        h += rng.random_range(-0.35..0.35);
        let last = *ctrl.last().unwrap();
        ctrl.push(Point::new(last.x + step * h.cos(), last.y + step * h.sin()));
    }
    spline(&ctrl)
}

fn inside(line: &Polyline, params: &SynthParams) -> bool {
    let m = params.margin();
    line.points().iter().all(|p| {
        p.x >= m && p.y >= m && p.x <= params.width as f64 - 1.0 - m && p.y <= params.height as f64 - 1.0 - m
    })
}

/// Minimum distance from the points of `line` (skipping the first `skip`)
/// to any existing branch.
fn clearance(line: &Polyline, others: &[Polyline], skip: usize) -> f64 {
    line.points()
        .iter()
        .skip(skip)
        .flat_map(|p| others.iter().map(move |o| o.distance_to(p)))
        .fold(f64::INFINITY, f64::min)
}

const MIN_CLEARANCE: f64 = 16.0;
const ATTEMPTS: usize = 200;

/// Random branching tree. The root enters from the upper-left quadrant and
/// heads across the frame; every child starts exactly at a vertex of its
/// parent, alternating sides, and keeps clear of all other branches.
pub fn gen_tree(params: &SynthParams) -> Result<VesselAnnotation> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (w, h) = (params.width as f64, params.height as f64);
    let size = w.min(h);
    let root_len = 0.6 * size;
    let root = (0..ATTEMPTS)
        .map(|_| {
            let start = Point::new(rng.random_range(0.15..0.3) * w, rng.random_range(0.15..0.3) * h);
            let heading = PI / 4.0 + rng.random_range(-0.3..0.3);
            random_curve(&mut rng, start, heading, root_len, 5)
        })
        .find(|c| inside(c, params))
        .ok_or_else(|| Error::InvalidConfig("could not place the root branch".into()))?;

    let mut branches = vec![root];
    let mut generation = vec![1usize];
    let mut children = vec![0usize];
    let mut parent = 0;
    while branches.len() < params.branches {
        if parent >= branches.len() {
            return Err(Error::InvalidConfig("tree depth too small for the branch count".into()));
        }
        if generation[parent] >= params.depth || children[parent] >= 2 {
            parent += 1;
            continue;
        }
        let side = if (children[parent] + parent) % 2 == 0 { 1.0 } else { -1.0 };
        let (lo, hi) = if children[parent] == 0 { (0.25, 0.45) } else { (0.55, 0.75) };
        let par = branches[parent].clone();
        let mut placed = None;
        for _ in 0..ATTEMPTS {
            let idx = (rng.random_range(lo..hi) * (par.len() - 1) as f64) as usize;
            let idx = idx.clamp(2, par.len() - 3);
            let (a, b) = (par.points()[idx - 2], par.points()[idx + 2]);
            let tangent = (b.y - a.y).atan2(b.x - a.x);
            let angle = rng.random_range(35f64..60.0).to_radians();
            let len = par.arclength() * rng.random_range(0.5..0.7);
            let child = random_curve(&mut rng, par.points()[idx], tangent + side * angle, len, 4);
            if inside(&child, params) && clearance(&child, &branches, 20) >= MIN_CLEARANCE {
                placed = Some(child);
                break;
            }
        }
        let Some(child) = placed else {
            children[parent] = 2;
            continue;
        };
        branches.push(child);
        generation.push(generation[parent] + 1);
        children.push(0);
        children[parent] += 1;
    }
    VesselAnnotation::new(0, branches)
}

/// Displacement of a frame-0 location at frame `t`:
/// `A sin(2 pi (t mod T) / T) m(p) (cos phi(p), sin phi(p))` with
/// `m = 0.9 + 0.1 cos(2 pi x / W) cos(2 pi y / H)` and
/// `phi = phi0 + 0.5 sin(2 pi x / W)`.
pub fn displacement(p: &Point, t: usize, params: &SynthParams) -> (f64, f64) {
    let phase = (t % params.frames_per_cycle) as f64 / params.frames_per_cycle as f64;
    let s = (TAU * phase).sin();
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let (w, h) = (params.width as f64, params.height as f64);
    let m = 0.9 + 0.1 * (TAU * p.x / w).cos() * (TAU * p.y / h).cos();
    let phi = motion_direction(params) + 0.5 * (TAU * p.x / w).sin();
    let mag = params.amplitude * s * m;
    (mag * phi.cos(), mag * phi.sin())
}

/// Base direction of the motion field, fixed by the seed.
fn motion_direction(params: &SynthParams) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(u64::MAX);
    rng.random_range(0.0..TAU)
}

/// The tree as it appears at frame `t`. Frame 0 and every full cycle leave
/// it unchanged.
pub fn deform_tree(tree: &VesselAnnotation, t: usize, params: &SynthParams) -> VesselAnnotation {
    let branches = tree
        .branches
        .iter()
        .map(|b| {
            let pts = b
                .points()
                .iter()
                .map(|p| {
                    let (dx, dy) = displacement(p, t, params);
                    Point::new(p.x + dx, p.y + dy)
                })
                .collect();
            Polyline::new(pts).unwrap_or_else(|_| b.clone())
        })
        .collect();
    VesselAnnotation {
        frame_index: t,
        branches,
    }
}

/// Renders one frame of the deformed tree.
pub fn render_frame(tree: &VesselAnnotation, t: usize, params: &SynthParams) -> ImageFrame {
    let (w, h) = (params.width, params.height);
    let std = params.tube_std;
    let reach = 5.0 * std;
    let mut dist = vec![f64::INFINITY; w * h];
    for b in &tree.branches {
        for seg in b.points().windows(2) {
            let (a, c) = (seg[0], seg[1]);
            let x0 = (a.x.min(c.x) - reach).floor().max(0.0) as usize;
            let x1 = ((a.x.max(c.x) + reach).ceil() as usize).min(w - 1);
            let y0 = (a.y.min(c.y) - reach).floor().max(0.0) as usize;
            let y1 = ((a.y.max(c.y) + reach).ceil() as usize).min(h - 1);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    let d = point_segment_distance(&Point::new(x as f64, y as f64), &a, &c);
                    let i = y * w + x;
                    if d < dist[i] {
                        dist[i] = d;
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(t as u64);
    let normal = Normal::new(0.0, params.noise.max(f64::MIN_POSITIVE)).expect("finite std");
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = dist[y * w + x];
            let tube = params.contrast * (-d * d / (2.0 * std * std)).exp();
            let ramp = params.background_gradient * (x as f64 / w as f64 - 0.5);
            let noise = if params.noise > 0.0 { normal.sample(&mut rng) } else { 0.0 };
            data.push((BACKGROUND + ramp - tube + noise) as f32);
        }
    }
    ImageFrame::from_plane_clamped(Plane {
        width: w,
        height: h,
        data,
    })
}

/// Frames and per-frame ground truth for the whole sequence.
pub fn render_sequence(tree: &VesselAnnotation, params: &SynthParams) -> (Vec<ImageFrame>, Vec<VesselAnnotation>) {
    (0..params.frames)
        .into_par_iter()
        .map(|t| {
            let gt = deform_tree(tree, t, params);
            (render_frame(&gt, t, params), gt)
        })
        .unzip()
}
