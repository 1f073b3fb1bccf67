//! Frame-to-frame tracking: every branch of the key annotation is searched
//! independently in the current frame, then the branches are fused into one
//! vasculature. The per-branch selections become the next key annotation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::annotation::VesselAnnotation;
use crate::centerline::{
    centerline_from_nms, estimate_noise, non_max_suppression, otsu_threshold, significant_ridges, vesselness,
    RidgeResponse,
};
use crate::config::TrackerConfig;
use crate::error::{Error, Result};
use crate::gap::{bridge_gaps, connection_cost, shortest_path};
use crate::geometry::{Point, Polyline};
use crate::graph::{build_graph, candidate_endpoints, detect_junctions, enumerate_paths, split_segments};
use crate::matching::{select_branch, DaisyField};
use crate::preprocess::{map_polyline, rasterize_polyline, register, tracking_range, DeformationField};
use crate::raster::{check_dims, BinaryMask, ImageFrame};

/// Extra border around the tracking range kept when cropping the frame-wide
/// maps, so thinning and gap costs near the range are unaffected by the crop.
const ROI_MARGIN: usize = 16;
/// Fusion iterates snap and bridge passes until stable, at most this often.
const FUSION_PASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    /// No ridge pixel survived thresholding inside the tracking range.
    EmptyCenterline,
    /// The centerline graph had no path between the candidate endpoints.
    NoPath,
}

impl Fallback {
    pub fn as_str(&self) -> &'static str {
        match self {
            Fallback::EmptyCenterline => "empty-centerline",
            Fallback::NoPath => "no-path",
        }
    }
}

/// Result of tracking one branch onto the current frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    /// Selected branch, or the registration-mapped guided branch on fallback.
    pub polyline: Polyline,
    /// Warping distance of the selected candidate.
    pub distance: Option<f64>,
    pub fallback: Option<Fallback>,
    pub candidates: usize,
    /// The path enumeration hit its cap.
    pub truncated: bool,
}

/// Frame-wide maps shared by every branch tracked onto the same frame.
struct FrameContext<'a> {
    field: DeformationField,
    resp: RidgeResponse,
    nms: BinaryMask,
    key_desc: &'a DaisyField,
    cur_desc: &'a DaisyField,
    mask: Option<&'a BinaryMask>,
}

/// Ridge response and its maxima, restricted to ridges the frame's noise
/// cannot explain.
fn ridge_maps(cur: &ImageFrame, cfg: &TrackerConfig) -> Result<(RidgeResponse, BinaryMask)> {
    let resp = vesselness(cur, &cfg.scales, cfg.frangi_beta)?;
    let mut nms = non_max_suppression(&resp);
    if cfg.noise_gate > 0.0 {
        nms = nms.and(&significant_ridges(&resp, estimate_noise(cur), cfg.noise_gate));
    }
    Ok((resp, nms))
}

fn fallback(mapped: Polyline, reason: Fallback, candidates: usize, truncated: bool) -> BranchOutcome {
    BranchOutcome {
        polyline: mapped.densify(1.0),
        distance: None,
        fallback: Some(reason),
        candidates,
        truncated,
    }
}

fn track_in_context(ctx: &FrameContext, guided: &Polyline, cfg: &TrackerConfig) -> Result<BranchOutcome> {
    let (w, h) = ctx.resp.dims();
    let mapped = map_polyline(guided, &ctx.field);
    let mut range = tracking_range(mapped.points(), cfg.sigma, w, h);
    if let Some(m) = ctx.mask {
        range = range.and(m);
    }
    let Some((bx0, by0, bx1, by1)) = range.bounding_box() else {
        return Ok(fallback(mapped, Fallback::EmptyCenterline, 0, false));
    };
    let x0 = bx0.saturating_sub(ROI_MARGIN);
    let y0 = by0.saturating_sub(ROI_MARGIN);
    let rw = (bx1 + ROI_MARGIN + 1).min(w) - x0;
    let rh = (by1 + ROI_MARGIN + 1).min(h) - y0;
    let resp = ctx.resp.crop(x0, y0, rw, rh);
    let nms = ctx.nms.crop(x0, y0, rw, rh);
    let range = range.crop(x0, y0, rw, rh);

    let threshold = cfg
        .ridge_threshold
        .unwrap_or_else(|| otsu_threshold(&resp.response, &range, cfg.threshold_floor));
    let skel = centerline_from_nms(&resp, &nms, &range, threshold)?;
    if skel.is_empty() {
        return Ok(fallback(mapped, Fallback::EmptyCenterline, 0, false));
    }
    let costs = connection_cost(&resp, &skel, cfg.gap_weights)?;
    let skel = bridge_gaps(&skel, &costs, cfg.max_gap, cfg.gap_cost_ceiling())?;

    let junctions = detect_junctions(&skel);
    let segments = split_segments(&skel, &junctions);
    let graph = build_graph(segments, junctions, cfg.snap_radius);
    if graph.segments.is_empty() {
        return Ok(fallback(mapped, Fallback::NoPath, 0, false));
    }
    let local = |p: Point| Point::new(p.x - x0 as f64, p.y - y0 as f64);
    let starts = candidate_endpoints(&graph, &local(mapped.first()), cfg.n_nearest);
    let ends = candidate_endpoints(&graph, &local(mapped.last()), cfg.n_nearest);
    let found = enumerate_paths(&graph, &starts, &ends, cfg.max_paths);
    if found.paths.is_empty() {
        return Ok(fallback(mapped, Fallback::NoPath, 0, found.truncated));
    }
    let candidates: Vec<Polyline> = found
        .paths
        .iter()
        .map(|p| p.polyline.translated(x0 as f64, y0 as f64))
        .collect();
    let sel = select_branch(ctx.key_desc, ctx.cur_desc, guided, &candidates, cfg.resample_spacing)?;
    Ok(BranchOutcome {
        polyline: candidates[sel.index].clone(),
        distance: Some(sel.distance),
        fallback: None,
        candidates: candidates.len(),
        truncated: found.truncated,
    })
}

/// Tracks one key-frame branch onto `cur`: registration, tracking range,
/// centerline, gap repair, graph search and descriptor-based selection.
/// When no candidate exists the registration-mapped branch is returned,
/// flagged.
pub fn track_branch(
    key: &ImageFrame,
    cur: &ImageFrame,
    guided: &Polyline,
    cfg: &TrackerConfig,
) -> Result<BranchOutcome> {
    cfg.validate()?;
    check_dims(key.dims(), cur.dims())?;
    let field = register(key, cur, &cfg.registration)?.field;
    let (resp, nms) = ridge_maps(cur, cfg)?;
    let key_desc = DaisyField::new(key, &cfg.daisy);
    let cur_desc = DaisyField::new(cur, &cfg.daisy);
    let ctx = FrameContext {
        field,
        resp,
        nms,
        key_desc: &key_desc,
        cur_desc: &cur_desc,
        mask: None,
    };
    track_in_context(&ctx, guided, cfg)
}

fn endpoint(line: &Polyline, last: bool) -> Point {
    if last {
        line.last()
    } else {
        line.first()
    }
}

/// Extends one end by the chain `path` (ordered from the old endpoint
/// outwards) and re-densifies.
fn extend(line: &Polyline, last: bool, path: &[Point]) -> Polyline {
    let mut pts = line.points().to_vec();
    if last {
        pts.extend_from_slice(path);
    } else {
        pts.reverse();
        pts.extend_from_slice(path);
        pts.reverse();
    }
    pts.dedup();
    Polyline::new(pts).map(|l| l.densify(1.0)).unwrap_or_else(|_| line.clone())
}

fn snap_pass(branches: &mut [Polyline], radius: f64) -> bool {
    let ends: Vec<(usize, bool)> = (0..branches.len()).flat_map(|i| [(i, false), (i, true)]).collect();
    let mut parent: Vec<usize> = (0..ends.len()).collect();
    fn root(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    for a in 0..ends.len() {
        for b in a + 1..ends.len() {
            if ends[a].0 == ends[b].0 {
                continue;
            }
            let (pa, pb) = (endpoint(&branches[ends[a].0], ends[a].1), endpoint(&branches[ends[b].0], ends[b].1));
            if pa.dist(&pb) <= radius {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for a in 0..ends.len() {
        let r = root(&mut parent, a);
        groups.entry(r).or_default().push(a);
    }
    let mut changed = false;
    for members in groups.values().filter(|m| m.len() > 1) {
        let pts: Vec<Point> = members
            .iter()
            .map(|&a| endpoint(&branches[ends[a].0], ends[a].1))
            .collect();
        let n = pts.len() as f64;
        let c = Point::new(pts.iter().map(|p| p.x).sum::<f64>() / n, pts.iter().map(|p| p.y).sum::<f64>() / n);
        if pts.iter().all(|p| *p == pts[0]) {
            continue;
        }
        for &a in members {
            let (i, last) = ends[a];
            let mut p = branches[i].points().to_vec();
            let k = if last { p.len() - 1 } else { 0 };
            p[k] = c;
            p.dedup();
            if let Ok(line) = Polyline::new(p) {
                branches[i] = line.densify(1.0);
                changed = true;
            }
        }
    }
    changed
}

/// Connects each endpoint lying off every other branch, but within `max_gap`
/// of one, to that branch's nearest vertex.
fn bridge_pass(branches: &mut [Polyline], resp: &RidgeResponse, cfg: &TrackerConfig) -> Result<bool> {
    let (w, h) = resp.dims();
    let mut changed = false;
    for i in 0..branches.len() {
        for last in [false, true] {
            let e = endpoint(&branches[i], last);
            let nearest = (0..branches.len())
                .filter(|&j| j != i)
                .flat_map(|j| branches[j].points().iter().map(move |q| (j, *q)))
                .map(|(j, q)| (e.dist(&q), j, q))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let Some((d, _, target)) = nearest else { continue };
            if d == 0.0 || d > cfg.max_gap {
                continue;
            }
            let path = if d <= cfg.snap_radius {
                Some(vec![target])
            } else {
                bridge_to(branches, e, target, resp, cfg, (w, h))?
            };
            if let Some(path) = path {
                branches[i] = extend(&branches[i], last, &path);
                changed = true;
            }
        }
    }
    Ok(changed)
}

/// Dijkstra bridge from `from` to `to` on a cost map built around the
/// rasterized branches; `None` when its mean cost exceeds the acceptance
/// ceiling.
fn bridge_to(
    branches: &[Polyline],
    from: Point,
    to: Point,
    resp: &RidgeResponse,
    cfg: &TrackerConfig,
    (w, h): (usize, usize),
) -> Result<Option<Vec<Point>>> {
    let (Some(a), Some(b)) = (from.pixel(w, h), to.pixel(w, h)) else {
        return Ok(None);
    };
    let reach = (cfg.max_gap.ceil() as usize) + ROI_MARGIN;
    let x0 = a.0.min(b.0).saturating_sub(reach);
    let y0 = a.1.min(b.1).saturating_sub(reach);
    let rw = (a.0.max(b.0) + reach + 1).min(w) - x0;
    let rh = (a.1.max(b.1) + reach + 1).min(h) - y0;
    let mut skel = BinaryMask::new(rw, rh);
    for line in branches {
        for (x, y) in rasterize_polyline(line.points(), w, h) {
            if x >= x0 && y >= y0 && x < x0 + rw && y < y0 + rh {
                skel.set(x - x0, y - y0, true);
            }
        }
    }
    let local = resp.crop(x0, y0, rw, rh);
    let costs = connection_cost(&local, &skel, cfg.gap_weights)?;
    let Some(path) = shortest_path(&costs, (a.0 - x0, a.1 - y0), (b.0 - x0, b.1 - y0), |_, _| true) else {
        return Ok(None);
    };
    if path.mean_cost > cfg.gap_cost_ceiling() {
        return Ok(None);
    }
    let mut pts: Vec<Point> = path
        .pixels
        .iter()
        .skip(1)
        .take(path.pixels.len().saturating_sub(2))
        .map(|&(x, y)| Point::new((x + x0) as f64, (y + y0) as f64))
        .collect();
    pts.push(to);
    Ok(Some(pts))
}

/// Merges tracked branches into one vasculature. Endpoints of different
/// branches within the snap radius move to their common centroid; an endpoint
/// within `max_gap` of another branch is joined to its nearest vertex, by a
/// straight step inside the snap radius and by an accepted Dijkstra bridge on
/// the frame's cost map beyond it. Branch order is preserved.
pub fn fuse_branches(
    frame_index: usize,
    branches: &[Polyline],
    resp: &RidgeResponse,
    cfg: &TrackerConfig,
) -> Result<VesselAnnotation> {
    let mut out = branches.to_vec();
    for _ in 0..FUSION_PASSES {
        let snapped = snap_pass(&mut out, cfg.snap_radius);
        let bridged = bridge_pass(&mut out, resp, cfg)?;
        if !snapped && !bridged {
            break;
        }
    }
    Ok(VesselAnnotation {
        frame_index,
        branches: out,
    })
}

/// Inputs that replace or restrict parts of the per-frame pipeline.
#[derive(Debug, Clone)]
pub struct TrackOptions {
    /// Frames advanced per tracking step.
    pub stride: usize,
    /// Precomputed fields keyed by current-frame index, each mapping the
    /// previous key frame onto that frame. They bypass registration.
    pub fields: BTreeMap<usize, DeformationField>,
    /// Segmentation masks keyed by frame index, intersected with every
    /// tracking range on that frame.
    pub masks: BTreeMap<usize, BinaryMask>,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            stride: 1,
            fields: BTreeMap::new(),
            masks: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameResult {
    pub key_index: usize,
    /// Output annotation of the tracked frame (fused when fusion is on).
    pub annotation: VesselAnnotation,
    pub branches: Vec<BranchOutcome>,
    pub registration_warning: Option<String>,
}

impl FrameResult {
    pub fn frame_index(&self) -> usize {
        self.annotation.frame_index
    }

    pub fn fallback_count(&self) -> usize {
        self.branches.iter().filter(|b| b.fallback.is_some()).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingReport {
    /// One entry per tracked frame, in order.
    pub frames: Vec<FrameResult>,
    /// Wall time per tracked frame.
    pub timings: Vec<Duration>,
}

impl TrackingReport {
    pub fn annotations(&self) -> Vec<&VesselAnnotation> {
        self.frames.iter().map(|f| &f.annotation).collect()
    }

    pub fn fallback_count(&self) -> usize {
        self.frames.iter().map(|f| f.fallback_count()).sum()
    }

    /// Per-frame, per-branch warping distances and fallback flags. Contains
    /// nothing run-dependent, so identical runs produce identical text.
    pub fn summary(&self) -> String {
        let mut s = String::from("frame,key,branch,distance,candidates,truncated,fallback\n");
        for f in &self.frames {
            for (b, o) in f.branches.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    f.frame_index(),
                    f.key_index,
                    b,
                    o.distance.map_or_else(|| "-".to_string(), |d| format!("{d:.6}")),
                    o.candidates,
                    o.truncated,
                    o.fallback.map_or("-", |r| r.as_str()),
                );
            }
            if let Some(w) = &f.registration_warning {
                let _ = writeln!(s, "# frame {}: registration: {w}", f.frame_index());
            }
        }
        let _ = writeln!(s, "# fallbacks: {}", self.fallback_count());
        s
    }

    pub fn timings_text(&self) -> String {
        let mut s = String::from("frame,seconds\n");
        for (f, t) in self.frames.iter().zip(&self.timings) {
            let _ = writeln!(s, "{},{:.3}", f.frame_index(), t.as_secs_f64());
        }
        s
    }
}

pub fn track_sequence(frames: &[ImageFrame], initial: &VesselAnnotation, cfg: &TrackerConfig) -> Result<TrackingReport> {
    track_sequence_with(frames, initial, cfg, &TrackOptions::default())
}

/// Tracks `initial` (annotating frame 0) through frames `stride, 2 stride,
/// ...`. Each step tracks every branch of the key annotation independently,
/// fuses the results for output, and makes the unfused selections the next
/// key annotation.
pub fn track_sequence_with(
    frames: &[ImageFrame],
    initial: &VesselAnnotation,
    cfg: &TrackerConfig,
    opts: &TrackOptions,
) -> Result<TrackingReport> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(Error::InvalidConfig("tracking needs at least two frames".into()));
    }
    if opts.stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    let dims = frames[0].dims();
    for f in frames {
        check_dims(dims, f.dims())?;
    }
    for (t, f) in &opts.fields {
        check_dims(dims, f.dims()).map_err(|e| Error::MalformedField(format!("field for frame {t}: {e}")))?;
    }
    for m in opts.masks.values() {
        check_dims(dims, m.dims())?;
    }
    initial.validate_bounds(dims.0, dims.1)?;

    let mut key_index = 0;
    let mut key_branches = initial.branches.clone();
    let mut key_desc = DaisyField::new(&frames[0], &cfg.daisy);
    let mut report = TrackingReport {
        frames: Vec::new(),
        timings: Vec::new(),
    };
    while key_index + opts.stride < frames.len() {
        let started = Instant::now();
        let cur_index = key_index + opts.stride;
        let (key, cur) = (&frames[key_index], &frames[cur_index]);
        let (field, warning) = match opts.fields.get(&cur_index) {
            Some(f) => (f.clone(), None),
            None => {
                let r = register(key, cur, &cfg.registration)?;
                (r.field, r.warning)
            }
        };
        let (resp, nms) = ridge_maps(cur, cfg)?;
        let cur_desc = DaisyField::new(cur, &cfg.daisy);
        let ctx = FrameContext {
            field,
            resp,
            nms,
            key_desc: &key_desc,
            cur_desc: &cur_desc,
            mask: opts.masks.get(&cur_index),
        };
        let outcomes: Vec<BranchOutcome> = key_branches
            .par_iter()
            .map(|b| track_in_context(&ctx, b, cfg))
            .collect::<Result<_>>()?;
        let selected: Vec<Polyline> = outcomes.iter().map(|o| o.polyline.clone()).collect();
        let annotation = if cfg.fusion {
            fuse_branches(cur_index, &selected, &ctx.resp, cfg)?
        } else {
            VesselAnnotation {
                frame_index: cur_index,
                branches: selected.clone(),
            }
        };
        for o in &outcomes {
            if let Some(r) = o.fallback {
                log::warn!("frame {cur_index}: branch fell back ({})", r.as_str());
            }
        }
        report.frames.push(FrameResult {
            key_index,
            annotation,
            branches: outcomes,
            registration_warning: warning,
        });
        report.timings.push(started.elapsed());
        key_branches = selected;
        key_desc = cur_desc;
        key_index = cur_index;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{gen_tree, render_frame, render_sequence, SynthParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn mean_distance(a: &Polyline, b: &Polyline) -> f64 {
        a.points().iter().map(|p| b.distance_to(p)).sum::<f64>() / a.len() as f64
    }

    fn small_params() -> SynthParams {
        SynthParams {
            width: 256,
            height: 256,
            frames: 3,
            noise: 0.02,
            ..Default::default()
        }
    }

    #[test]
    fn static_frame_reproduces_the_guided_branch() {
        let p = small_params();
        let tree = gen_tree(&p).unwrap();
        let f = render_frame(&tree, 0, &p);
        let cfg = TrackerConfig::default();
        for b in &tree.branches {
            let out = track_branch(&f, &f, b, &cfg).unwrap();
            assert!(out.fallback.is_none());
            assert!(mean_distance(b, &out.polyline) < 1.0);
            assert!(mean_distance(&out.polyline, b) < 1.0);
        }
    }

    #[test]
    fn noise_frame_falls_back_to_the_mapped_branch() {
        let p = small_params();
        let tree = gen_tree(&p).unwrap();
        let key = render_frame(&tree, 0, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = ImageFrame::new(256, 256, (0..256 * 256).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
        let out = track_branch(&key, &noise, &tree.branches[0], &TrackerConfig::default()).unwrap();
        assert!(out.fallback.is_some(), "{out:?}");
    }

    #[test]
    fn fusion_merges_drifted_endpoints() {
        let cfg = TrackerConfig::default();
        let resp = vesselness(&ImageFrame::new(80, 80, vec![0.8; 6400]).unwrap(), &[2.0], 0.5).unwrap();
        let line = |a: (f64, f64), b: (f64, f64)| {
            Polyline::new(vec![Point::new(a.0, a.1), Point::new(b.0, b.1)]).unwrap().densify(1.0)
        };
        // Two branches ending 2 px apart meet at the midpoint.
        let a = line((10.0, 40.0), (39.0, 40.0));
        let b = line((41.0, 40.0), (70.0, 40.0));
        let fused = fuse_branches(1, &[a.clone(), b.clone()], &resp, &cfg).unwrap();
        assert_eq!(fused.branches[0].last(), Point::new(40.0, 40.0));
        assert_eq!(fused.branches[1].first(), Point::new(40.0, 40.0));
        assert_eq!(fused.branches[0].first(), a.first());
        // Idempotent, and shared endpoints are left alone.
        let again = fuse_branches(1, &fused.branches, &resp, &cfg).unwrap();
        assert_eq!(again, fused);
        // Far-apart branches are untouched.
        let c = line((10.0, 10.0), (30.0, 10.0));
        let d = line((10.0, 60.0), (30.0, 60.0));
        let far = fuse_branches(1, &[c.clone(), d.clone()], &resp, &cfg).unwrap();
        assert_eq!(far.branches, vec![c, d]);
    }

    #[test]
    fn fusion_attaches_a_child_start_to_its_parent() {
        let cfg = TrackerConfig::default();
        let resp = vesselness(&ImageFrame::new(80, 80, vec![0.8; 6400]).unwrap(), &[2.0], 0.5).unwrap();
        let parent = Polyline::new(vec![Point::new(5.0, 40.0), Point::new(75.0, 40.0)]).unwrap().densify(1.0);
        let child = Polyline::new(vec![Point::new(40.0, 38.0), Point::new(40.0, 10.0)]).unwrap().densify(1.0);
        let fused = fuse_branches(2, &[parent.clone(), child], &resp, &cfg).unwrap();
        assert_eq!(fused.branches[0], parent);
        assert_eq!(fused.branches[1].first(), Point::new(40.0, 40.0));
        assert!(fused.branches[1].is_dense());
        assert_eq!(fuse_branches(2, &fused.branches, &resp, &cfg).unwrap(), fused);
    }

    #[test]
    fn identical_sequence_keeps_the_annotation() {
        let p = small_params();
        let tree = gen_tree(&p).unwrap();
        let f = render_frame(&tree, 0, &p);
        let report = track_sequence(&[f.clone(), f], &tree, &TrackerConfig::default()).unwrap();
        assert_eq!(report.frames.len(), 1);
        let out = &report.frames[0].annotation;
        assert_eq!(out.frame_index, 1);
        assert_eq!(out.branches.len(), tree.branches.len());
        for (a, b) in tree.branches.iter().zip(&out.branches) {
            assert!(mean_distance(a, b) < 1.0);
        }
    }

    #[test]
    fn stride_skips_frames_and_rejects_bad_input() {
        let p = SynthParams { frames: 5, ..small_params() };
        let tree = gen_tree(&p).unwrap();
        let (frames, _) = render_sequence(&tree, &p);
        let opts = TrackOptions { stride: 2, ..Default::default() };
        let report = track_sequence_with(&frames, &tree, &TrackerConfig::default(), &opts).unwrap();
        let idx: Vec<usize> = report.frames.iter().map(|f| f.frame_index()).collect();
        assert_eq!(idx, vec![2, 4]);
        assert!(report.frames.iter().all(|f| f.annotation.branches.len() == 3));
        assert!(track_sequence(&frames[..1], &tree, &TrackerConfig::default()).is_err());
        let small = ImageFrame::new(64, 64, vec![0.5; 64 * 64]).unwrap();
        assert!(matches!(
            track_sequence(&[frames[0].clone(), small], &tree, &TrackerConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
