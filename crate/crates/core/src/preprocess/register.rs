//! Coarse-to-fine block matching registration.
//!
//! Each pyramid level matches `block`-sized key-frame blocks (stride half a
//! block) against the current frame by normalized cross-correlation within
//! `±search` pixels of the displacement predicted by the coarser level. Blocks
//! without a confident match are filled from the prior, the grid is smoothed by
//! confidence-weighted Gaussian averaging and bilinearly upsampled to a dense
//! field.

use rayon::prelude::*;

use super::field::DeformationField;
use crate::config::RegistrationParams;
use crate::error::Result;
use crate::filter::{downsample2, gaussian_kernel};
use crate::raster::{check_dims, ImageFrame, Plane};

#[derive(Debug, Clone)]
pub struct Registration {
    pub field: DeformationField,
    /// Set when no block carried signal or the estimated field failed to
    /// lower the intensity mismatch; the field is then the identity.
    pub warning: Option<String>,
    /// Mean squared intensity difference under the identity field.
    pub mse_identity: f64,
    /// Mean squared intensity difference under the returned field.
    pub mse_field: f64,
}

/// Dense displacement at one pyramid level, stored as a block-centre grid.
struct GridField {
    origin: f64,
    stride: f64,
    gw: usize,
    gh: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl GridField {
    fn sample(&self, x: f64, y: f64) -> (f64, f64) {
        let gx = ((x - self.origin) / self.stride).clamp(0.0, (self.gw - 1) as f64);
        let gy = ((y - self.origin) / self.stride).clamp(0.0, (self.gh - 1) as f64);
        let x0 = gx.floor() as usize;
        let y0 = gy.floor() as usize;
        let x1 = (x0 + 1).min(self.gw - 1);
        let y1 = (y0 + 1).min(self.gh - 1);
        let fx = gx - x0 as f64;
        let fy = gy - y0 as f64;
        let lerp = |g: &[f64]| {
            let at = |a: usize, b: usize| g[b * self.gw + a];
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bot = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            top * (1.0 - fy) + bot * fy
        };
        (lerp(&self.dx), lerp(&self.dy))
    }
}

struct BlockMatch {
    dx: f64,
    dy: f64,
}

fn match_block(
    key: &Plane,
    cur: &Plane,
    x0: usize,
    y0: usize,
    prior: (f64, f64),
    params: &RegistrationParams,
) -> Option<BlockMatch> {
    let b = params.block;
    let n = (b * b) as f64;
    let mut kb = Vec::with_capacity(b * b);
    for y in y0..y0 + b {
        kb.extend_from_slice(&key.data[y * key.width + x0..y * key.width + x0 + b]);
    }
    let mean = kb.iter().map(|v| *v as f64).sum::<f64>() / n;
    let kc: Vec<f64> = kb.iter().map(|v| *v as f64 - mean).collect();
    let knorm = kc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if knorm / n.sqrt() < 1e-3 {
        return None;
    }

    let s = params.search as i64;
    let (px, py) = (prior.0.round() as i64, prior.1.round() as i64);
    let side = (2 * s + 1) as usize;
    let mut ncc = vec![f64::NAN; side * side];
    let mut best: Option<(f64, i64, i64)> = None;
    for v in -s..=s {
        for u in -s..=s {
            let (sx, sy) = (px + u, py + v);
            let cx = x0 as i64 + sx;
            let cy = y0 as i64 + sy;
            if cx < 0 || cy < 0 || cx as usize + b > cur.width || cy as usize + b > cur.height {
                continue;
            }
            let (cx, cy) = (cx as usize, cy as usize);
            let (mut sc, mut sc2, mut skc) = (0.0f64, 0.0f64, 0.0f64);
            for r in 0..b {
                let row = &cur.data[(cy + r) * cur.width + cx..(cy + r) * cur.width + cx + b];
                let krow = &kc[r * b..(r + 1) * b];
                for (c, k) in row.iter().zip(krow) {
                    let c = *c as f64;
                    sc += c;
                    sc2 += c * c;
                    skc += k * c;
                }
            }
            let cvar = (sc2 - sc * sc / n).max(0.0);
            let value = if cvar <= 1e-12 { 0.0 } else { skc / (knorm * cvar.sqrt()) };
            ncc[(v + s) as usize * side + (u + s) as usize] = value;
            let dev = (sx as f64 - prior.0).powi(2) + (sy as f64 - prior.1).powi(2);
            let score = value - params.deviation_penalty * dev;
            if best.is_none_or(|(bs, _, _)| score > bs) {
                best = Some((score, u, v));
            }
        }
    }
    let (_, u, v) = best?;
    let at = |uu: i64, vv: i64| -> Option<f64> {
        if uu < -s || uu > s || vv < -s || vv > s {
            return None;
        }
        let val = ncc[(vv + s) as usize * side + (uu + s) as usize];
        (!val.is_nan()).then_some(val)
    };
    let peak = at(u, v)?;
    if peak < params.min_ncc {
        return None;
    }
    let refine = |l: Option<f64>, r: Option<f64>| -> f64 {
        match (l, r) {
            (Some(l), Some(r)) => {
                let denom = l - 2.0 * peak + r;
                if denom < -1e-12 {
                    (0.5 * (l - r) / denom).clamp(-0.5, 0.5)
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    };
    let ox = refine(at(u - 1, v), at(u + 1, v));
    let oy = refine(at(u, v - 1), at(u, v + 1));
    Some(BlockMatch {
        dx: (px + u) as f64 + ox,
        dy: (py + v) as f64 + oy,
    })
}

fn weighted_median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    values[values.len() / 2]
}

/// Estimates one level. Returns the grid and whether any block was confident.
fn register_level(
    key: &Plane,
    cur: &Plane,
    prior: Option<&GridField>,
    params: &RegistrationParams,
) -> Option<(GridField, bool)> {
    let b = params.block;
    if key.width < b || key.height < b {
        return None;
    }
    let stride = (b / 2).max(1);
    let gw = (key.width - b) / stride + 1;
    let gh = (key.height - b) / stride + 1;
    let half = b as f64 / 2.0;
    let prior_at = |cx: f64, cy: f64| -> (f64, f64) {
        match prior {
            Some(p) => {
                let (u, v) = p.sample(cx / 2.0, cy / 2.0);
                (2.0 * u, 2.0 * v)
            }
            None => (0.0, 0.0),
        }
    };
    let matches: Vec<(Option<BlockMatch>, (f64, f64))> = (0..gw * gh)
        .into_par_iter()
        .map(|i| {
            let (gx, gy) = (i % gw, i / gw);
            let (x0, y0) = (gx * stride, gy * stride);
            let pr = prior_at(x0 as f64 + half, y0 as f64 + half);
            (match_block(key, cur, x0, y0, pr, params), pr)
        })
        .collect();

    let confident: Vec<&BlockMatch> = matches.iter().filter_map(|(m, _)| m.as_ref()).collect();
    let any = !confident.is_empty();
    let fallback = if prior.is_none() && any {
        let mut xs: Vec<f64> = confident.iter().map(|m| m.dx).collect();
        let mut ys: Vec<f64> = confident.iter().map(|m| m.dy).collect();
        Some((weighted_median(&mut xs), weighted_median(&mut ys)))
    } else {
        None
    };

    // Confidence-weighted Gaussian averaging on the grid.
    let sigma_cells = params.smoothing / stride as f64;
    let kernel = gaussian_kernel(sigma_cells, 0);
    let r = (kernel.len() / 2) as i64;
    let mut dx = vec![0.0; gw * gh];
    let mut dy = vec![0.0; gw * gh];
    for gy in 0..gh {
        for gx in 0..gw {
            let (mut wsum, mut sx, mut sy) = (0.0f64, 0.0f64, 0.0f64);
            for ky in -r..=r {
                for kx in -r..=r {
                    let (nx, ny) = (gx as i64 + kx, gy as i64 + ky);
                    if nx < 0 || ny < 0 || nx >= gw as i64 || ny >= gh as i64 {
                        continue;
                    }
                    if let Some(m) = &matches[ny as usize * gw + nx as usize].0 {
                        let w = kernel[(kx + r) as usize] as f64 * kernel[(ky + r) as usize] as f64;
                        wsum += w;
                        sx += w * m.dx;
                        sy += w * m.dy;
                    }
                }
            }
            let i = gy * gw + gx;
            let own_prior = matches[i].1;
            let (fx, fy) = fallback.unwrap_or(own_prior);
            // Blend towards the prior where the local evidence is thin.
            let centre = kernel[r as usize] as f64 * kernel[r as usize] as f64;
            let trust = (wsum / centre).min(1.0);
            if wsum > 0.0 {
                dx[i] = trust * sx / wsum + (1.0 - trust) * fx;
                dy[i] = trust * sy / wsum + (1.0 - trust) * fy;
            } else {
                dx[i] = fx;
                dy[i] = fy;
            }
            let lim = params.max_displacement;
            dx[i] = dx[i].clamp(-lim, lim);
            dy[i] = dy[i].clamp(-lim, lim);
        }
    }
    Some((
        GridField {
            origin: half - 0.5,
            stride: stride as f64,
            gw,
            gh,
            dx,
            dy,
        },
        any,
    ))
}

fn mismatch(key: &Plane, cur: &Plane, field: &DeformationField, margin: usize) -> (f64, f64) {
    let (w, h) = key.dims();
    let (x0, x1) = (margin.min(w / 2), w - margin.min(w / 2));
    let (y0, y1) = (margin.min(h / 2), h - margin.min(h / 2));
    let mut id = 0.0f64;
    let mut warped = 0.0f64;
    let mut n = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            let i = y * w + x;
            let k = key.data[i] as f64;
            let d0 = cur.data[i] as f64 - k;
            let c = cur.sample(x as f64 + field.dx[i] as f64, y as f64 + field.dy[i] as f64);
            let d1 = c as f64 - k;
            id += d0 * d0;
            warped += d1 * d1;
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    (id / n, warped / n)
}

/// Estimates the displacement field mapping `key` onto `cur`.
pub fn register(
    key: &ImageFrame,
    cur: &ImageFrame,
    params: &RegistrationParams,
) -> Result<Registration> {
    check_dims(key.dims(), cur.dims())?;
    let (w, h) = key.dims();

    let mut key_pyr = vec![key.plane().clone()];
    let mut cur_pyr = vec![cur.plane().clone()];
    for _ in 1..params.levels {
        let (k, c) = (key_pyr.last().unwrap(), cur_pyr.last().unwrap());
        if k.width < 2 * params.block || k.height < 2 * params.block {
            break;
        }
        key_pyr.push(downsample2(k));
        cur_pyr.push(downsample2(c));
    }

    let mut grid: Option<GridField> = None;
    let mut any_signal = false;
    for level in (0..key_pyr.len()).rev() {
        if let Some((g, any)) = register_level(&key_pyr[level], &cur_pyr[level], grid.as_ref(), params) {
            any_signal |= any;
            grid = Some(g);
        } else if let Some(g) = grid.as_mut() {
            // Level too small to hold a block: carry the prior to this scale.
            for v in g.dx.iter_mut().chain(g.dy.iter_mut()) {
                *v *= 2.0;
            }
            g.origin = 2.0 * g.origin + 0.5;
            g.stride *= 2.0;
        }
    }

    let identity = DeformationField::identity(w, h);
    let margin = params.block / 2;
    let (mse_identity, _) = mismatch(key.plane(), cur.plane(), &identity, margin);
    if mse_identity <= 1e-12 {
        return Ok(Registration {
            field: identity,
            warning: None,
            mse_identity,
            mse_field: mse_identity,
        });
    }
    let grid = match grid {
        Some(g) if any_signal => g,
        _ => {
            return Ok(Registration {
                field: identity,
                warning: Some("no block carried matchable structure".into()),
                mse_identity,
                mse_field: mse_identity,
            })
        }
    };
    let field = DeformationField::from_fn(w, h, |x, y| {
        let (u, v) = grid.sample(x as f64, y as f64);
        (u as f32, v as f32)
    });
    let (_, mse_field) = mismatch(key.plane(), cur.plane(), &field, margin);
    if mse_field >= mse_identity {
        return Ok(Registration {
            field: identity,
            warning: Some(format!(
                "registration did not reduce the mismatch ({mse_field:.3e} >= {mse_identity:.3e})"
            )),
            mse_identity,
            mse_field: mse_identity,
        });
    }
    Ok(Registration {
        field,
        warning: None,
        mse_identity,
        mse_field,
    })
}
