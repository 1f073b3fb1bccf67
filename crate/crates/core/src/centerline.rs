//! Multi-scale Hessian ridge filtering, orientation-aware non-maximum
//! suppression and morphological thinning.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::hessian;
use crate::raster::{check_dims, BinaryMask, ImageFrame, Plane, NEIGHBORS_8};

/// Per-pixel ridge strength, vessel direction and the scale that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeResponse {
    /// Vesselness normalized to `[0, 1]` over the frame.
    pub response: Plane,
    /// Vessel direction in `[0, pi)`, measured from the +x axis towards +y.
    pub orientation: Plane,
    pub best_scale: Plane,
    /// Scale-normalized across-vessel curvature at the best scale; positive
    /// on dark tubes and not rescaled.
    pub strength: Plane,
}

impl RidgeResponse {
    pub fn dims(&self) -> (usize, usize) {
        self.response.dims()
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> RidgeResponse {
        RidgeResponse {
            response: self.response.crop(x0, y0, w, h),
            orientation: self.orientation.crop(x0, y0, w, h),
            best_scale: self.best_scale.crop(x0, y0, w, h),
            strength: self.strength.crop(x0, y0, w, h),
        }
    }
}

/// Eigen-decomposition of the symmetric 2x2 matrix `[[a, b], [b, c]]`.
/// Returns `(lambda_small, lambda_large, direction)` with eigenvalues ordered
/// by magnitude and `direction` the angle of the small-magnitude eigenvector.
fn eigen2(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let m = 0.5 * (a + c);
    let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (mu1, mu2) = (m + r, m - r);
    let theta1 = 0.5 * (2.0 * b).atan2(a - c);
    if mu1.abs() <= mu2.abs() {
        (mu1, mu2, theta1)
    } else {
        (mu2, mu1, theta1 + 0.5 * PI)
    }
}

fn wrap_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(PI);
    if t >= PI {
        0.0
    } else {
        t
    }
}

/// Frangi-style vesselness for dark tubes on a bright background.
///
/// Hessians are scale-normalized by `s^2`. The structureness constant is half
/// the largest Hessian norm seen over all scales and pixels. A frame without
/// curvature yields an all-zero response.
pub fn vesselness(frame: &ImageFrame, scales: &[f64], beta: f64) -> Result<RidgeResponse> {
    if scales.is_empty() || scales.iter().any(|s| !(*s >= 0.5)) {
        return Err(Error::InvalidConfig(
            "ridge scales must be non-empty and each >= 0.5".into(),
        ));
    }
    let (w, h) = frame.dims();
    let n = w * h;
    let eig: Vec<Vec<(f32, f32, f32)>> = scales
        .iter()
        .map(|&s| {
            let (ixx, iyy, ixy) = hessian(frame.plane(), s);
            let s2 = s * s;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let (l1, l2, dir) = eigen2(
                        s2 * ixx.data[i] as f64,
                        s2 * ixy.data[i] as f64,
                        s2 * iyy.data[i] as f64,
                    );
                    (l1 as f32, l2 as f32, dir as f32)
                })
                .collect()
        })
        .collect();

    let max_norm = eig
        .iter()
        .flat_map(|e| e.iter())
        .map(|(l1, l2, _)| (*l1 as f64).hypot(*l2 as f64))
        .fold(0.0f64, f64::max);

    let mut response = Plane::filled(w, h, 0.0);
    let mut orientation = Plane::filled(w, h, 0.0);
    let mut best_scale = Plane::filled(w, h, scales[0] as f32);
    let mut strength = Plane::filled(w, h, 0.0);
    if max_norm < 1e-6 {
        return Ok(RidgeResponse {
            response,
            orientation,
            best_scale,
            strength,
        });
    }
    let c = 0.5 * max_norm;
    let (two_b2, two_c2) = (2.0 * beta * beta, 2.0 * c * c);
    for i in 0..n {
        let mut best = -1.0f64;
        for (k, e) in eig.iter().enumerate() {
            let (l1, l2, dir) = (e[i].0 as f64, e[i].1 as f64, e[i].2 as f64);
            let v = if l2 <= 0.0 {
                0.0
            } else {
                let rb = l1 / l2;
                let s2 = l1 * l1 + l2 * l2;
                (-rb * rb / two_b2).exp() * (1.0 - (-s2 / two_c2).exp())
            };
            if v > best {
                best = v;
                response.data[i] = v as f32;
                orientation.data[i] = wrap_angle(dir) as f32;
                best_scale.data[i] = scales[k] as f32;
                strength.data[i] = l2 as f32;
            }
        }
    }
    let peak = response.max();
    if peak > 0.0 {
        response.data.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(RidgeResponse {
        response,
        orientation,
        best_scale,
        strength,
    })
}

/// Robust noise std of a frame: the median absolute horizontal neighbour
/// difference, scaled to a Gaussian std.
pub fn estimate_noise(frame: &ImageFrame) -> f64 {
    let p = frame.plane();
    let mut diffs: Vec<f32> = (0..p.height)
        .flat_map(|y| (1..p.width).map(move |x| (x, y)))
        .map(|(x, y)| (p.get(x, y) - p.get(x - 1, y)).abs())
        .collect();
    if diffs.is_empty() {
        return 0.0;
    }
    let mid = diffs.len() / 2;
    let (_, median, _) = diffs.select_nth_unstable_by(mid, f32::total_cmp);
    1.4826 * *median as f64 / std::f64::consts::SQRT_2
}

/// Pixels whose ridge strength exceeds `k` times the std that white noise of
/// std `noise` induces in a scale-normalized second derivative at the
/// pixel's best scale, `noise * sqrt(3 / (16 pi)) / s`.
pub fn significant_ridges(resp: &RidgeResponse, noise: f64, k: f64) -> BinaryMask {
    let (w, h) = resp.dims();
    let unit = noise * (3.0 / (16.0 * PI)).sqrt();
    BinaryMask {
        width: w,
        height: h,
        bits: resp
            .strength
            .data
            .iter()
            .zip(&resp.best_scale.data)
            .map(|(v, s)| *v as f64 > 0.0 && *v as f64 >= k * unit / *s as f64)
            .collect(),
    }
}

/// Pixels whose response is a maximum across the vessel direction: strictly
/// above the bilinear sample one pixel along the normal and not below the
/// sample one pixel against it. Zero-response pixels are never kept.
pub fn non_max_suppression(resp: &RidgeResponse) -> BinaryMask {
    let (w, h) = resp.dims();
    let r = &resp.response;
    let bits: Vec<bool> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let v = r.data[i];
            if v <= 0.0 {
                return false;
            }
            let (x, y) = ((i % w) as f64, (i / w) as f64);
            let theta = resp.orientation.data[i] as f64;
            let (nx, ny) = (-theta.sin(), theta.cos());
            let ahead = r.sample(x + nx, y + ny);
            let behind = r.sample(x - nx, y - ny);
            v > ahead && v >= behind
        })
        .collect();
    BinaryMask {
        width: w,
        height: h,
        bits,
    }
}

/// Otsu threshold over the nonzero responses inside `range` (256 bins on
/// `[0, 1]`), never below `floor`.
pub fn otsu_threshold(resp: &Plane, range: &BinaryMask, floor: f32) -> f32 {
    let mut hist = [0u64; 256];
    let mut total = 0u64;
    for (v, m) in resp.data.iter().zip(&range.bits) {
        if *m && *v > 0.0 {
            hist[((v * 255.0).round() as usize).min(255)] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return floor;
    }
    let sum_all: f64 = hist.iter().enumerate().map(|(i, c)| i as f64 * *c as f64).sum();
    let (mut w0, mut sum0) = (0.0f64, 0.0f64);
    let (mut best, mut best_k) = (-1.0f64, 0usize);
    for (k, c) in hist.iter().enumerate() {
        w0 += *c as f64;
        sum0 += k as f64 * *c as f64;
        let w1 = total as f64 - w0;
        if w0 == 0.0 || w1 == 0.0 {
            continue;
        }
        let m0 = sum0 / w0;
        let m1 = (sum_all - sum0) / w1;
        let between = w0 * w1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_k = k;
        }
    }
    (((best_k as f32) + 0.5) / 255.0).max(floor)
}

/// Clockwise neighbours starting north: P2..P9 in the usual thinning notation.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring_bits(m: &BinaryMask, x: usize, y: usize) -> [bool; 8] {
    let mut p = [false; 8];
    for (k, (dx, dy)) in RING.iter().enumerate() {
        p[k] = m.get_signed(x as isize + dx, y as isize + dy);
    }
    p
}

fn deletable(m: &BinaryMask, x: usize, y: usize, second: bool) -> bool {
    let p = ring_bits(m, x, y);
    let b = p.iter().filter(|v| **v).count();
    if !(2..=6).contains(&b) {
        return false;
    }
    let a = (0..8).filter(|&k| !p[k] && p[(k + 1) % 8]).count();
    if a != 1 {
        return false;
    }
    let (n, e, s, w) = (p[0], p[2], p[4], p[6]);
    if second {
        !(n && e && w) && !(n && s && w)
    } else {
        !(n && e && s) && !(e && s && w)
    }
}

/// One thinning subiteration. Candidates are found in parallel and then
/// re-checked against the live mask while deleting in raster order, so a
/// deletion never disconnects what an earlier one left behind.
fn zhang_suen_pass(m: &mut BinaryMask, second: bool) -> bool {
    let (w, h) = m.dims();
    let frozen: &BinaryMask = m;
    let candidates: Vec<usize> = (0..w * h)
        .into_par_iter()
        .filter(|&i| frozen.bits[i] && deletable(frozen, i % w, i / w, second))
        .collect();
    let mut changed = false;
    for i in candidates {
        if deletable(m, i % w, i / w, second) {
            m.bits[i] = false;
            changed = true;
        }
    }
    changed
}

/// True when the set neighbours of `(x, y)` form one 8-connected group
/// among themselves.
fn neighbours_connected(p: &[bool; 8]) -> bool {
    let offs: Vec<(isize, isize)> = (0..8).filter(|&k| p[k]).map(|k| RING[k]).collect();
    if offs.len() <= 1 {
        return true;
    }
    let mut seen = vec![false; offs.len()];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for j in 0..offs.len() {
            if !seen[j]
                && (offs[i].0 - offs[j].0).abs() <= 1
                && (offs[i].1 - offs[j].1).abs() <= 1
            {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.iter().all(|s| *s)
}

/// Removes staircase corners left by two-subiteration thinning: pixels that
/// touch two perpendicular 4-neighbours and whose removal keeps their
/// neighbourhood connected. Sequential in raster order.
fn remove_corners(m: &mut BinaryMask) -> bool {
    let (w, h) = m.dims();
    let mut changed = false;
    for y in 0..h {
        for x in 0..w {
            if !m.get(x, y) {
                continue;
            }
            let p = ring_bits(m, x, y);
            let count = p.iter().filter(|v| **v).count();
            if count < 2 {
                continue;
            }
            let corner = (0..4).any(|k| p[2 * k] && p[(2 * k + 2) % 8]);
            if corner && neighbours_connected(&p) {
                m.set(x, y, false);
                changed = true;
            }
        }
    }
    changed
}

/// Thins a binary mask to one-pixel-wide 8-connected curves. Idempotent.
pub fn thin(mask: &BinaryMask) -> BinaryMask {
    let mut m = mask.clone();
    loop {
        let mut changed = false;
        loop {
            let a = zhang_suen_pass(&mut m, false);
            let b = zhang_suen_pass(&mut m, true);
            if !(a || b) {
                break;
            }
            changed = true;
        }
        changed |= remove_corners(&mut m);
        if !changed {
            return m;
        }
    }
}

/// Thinned ridge maxima with response at least `threshold`, clipped to
/// `range`. `nms` is the frame's [`non_max_suppression`] mask.
pub fn centerline_from_nms(
    resp: &RidgeResponse,
    nms: &BinaryMask,
    range: &BinaryMask,
    threshold: f32,
) -> Result<BinaryMask> {
    check_dims(resp.dims(), range.dims())?;
    check_dims(resp.dims(), nms.dims())?;
    let mut cand = nms.clone();
    for (b, v) in cand.bits.iter_mut().zip(&resp.response.data) {
        *b = *b && *v >= threshold;
    }
    Ok(thin(&cand).and(range))
}

/// One-pixel-wide centerline skeleton of the ridges inside `range`.
///
/// Thinning runs before clipping, so the result for a sub-range is exactly
/// the result for the full range restricted to it.
pub fn extract_centerline(
    resp: &RidgeResponse,
    range: &BinaryMask,
    threshold: f32,
) -> Result<BinaryMask> {
    check_dims(resp.dims(), range.dims())?;
    centerline_from_nms(resp, &non_max_suppression(resp), range, threshold)
}

/// Pixels with three or more set 8-neighbours.
pub fn branch_pixels(skel: &BinaryMask) -> Vec<(usize, usize)> {
    skel.pixels()
        .filter(|&(x, y)| skel.neighbor_count(x, y) >= 3)
        .collect()
}

/// Pixels with exactly one set 8-neighbour.
pub fn end_pixels(skel: &BinaryMask) -> Vec<(usize, usize)> {
    skel.pixels()
        .filter(|&(x, y)| {
            NEIGHBORS_8
                .iter()
                .filter(|(dx, dy)| skel.get_signed(x as isize + dx, y as isize + dy))
                .count()
                == 1
        })
        .collect()
}
