//! Dense DAISY-style descriptors: Gaussian-smoothed gradient-orientation maps
//! sampled on a centre point plus concentric rings.

use std::f64::consts::TAU;

use crate::config::DaisyParams;
use crate::filter::{gaussian_blur, gradient, reflect_index};
use crate::geometry::Point;
use crate::raster::{ImageFrame, Plane};

/// Bilinear sample with symmetric reflection outside the plane.
fn sample_reflect(p: &Plane, x: f64, y: f64) -> f32 {
    let (fx0, fy0) = (x.floor(), y.floor());
    let (fx, fy) = ((x - fx0) as f32, (y - fy0) as f32);
    let (x0, y0) = (fx0 as isize, fy0 as isize);
    let xa = reflect_index(x0, p.width);
    let xb = reflect_index(x0 + 1, p.width);
    let ya = reflect_index(y0, p.height);
    let yb = reflect_index(y0 + 1, p.height);
    let top = p.get(xa, ya) * (1.0 - fx) + p.get(xb, ya) * fx;
    let bottom = p.get(xa, yb) * (1.0 - fx) + p.get(xb, yb) * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Smoothed orientation maps of one frame, ready for descriptor lookups.
#[derive(Debug, Clone)]
pub struct DaisyField {
    params: DaisyParams,
    /// `maps[k][o]`: orientation bin `o` smoothed at the sigma of level `k`
    /// (level 0 is the centre, level `k >= 1` ring `k`).
    maps: Vec<Vec<Plane>>,
}

impl DaisyField {
    pub fn new(frame: &ImageFrame, params: &DaisyParams) -> Self {
        let (gx, gy) = gradient(frame.plane());
        let h = params.bins;
        let raw: Vec<Plane> = (0..h)
            .map(|o| {
                let theta = TAU * o as f64 / h as f64;
                let (c, s) = (theta.cos() as f32, theta.sin() as f32);
                Plane {
                    width: gx.width,
                    height: gx.height,
                    data: gx
                        .data
                        .iter()
                        .zip(&gy.data)
                        .map(|(a, b)| (a * c + b * s).max(0.0))
                        .collect(),
                }
            })
            .collect();
        let mut maps: Vec<Vec<Plane>> = Vec::with_capacity(params.rings + 1);
        for k in 0..=params.rings {
            let sigma = params.level_sigma(k);
            let reuse = (0..k).find(|&j| params.level_sigma(j) == sigma);
            let level = match reuse {
                Some(j) => maps[j].clone(),
                None => raw.iter().map(|m| gaussian_blur(m, sigma)).collect(),
            };
            maps.push(level);
        }
        Self {
            params: params.clone(),
            maps,
        }
    }

    pub fn params(&self) -> &DaisyParams {
        &self.params
    }

    /// Descriptor at `p`: the centre histogram followed by ring 1..=Q, each
    /// ring listing its `T` points counter-clockwise from +x. Every `H`-bin
    /// histogram is L2-normalized; a histogram without gradient mass becomes
    /// uniform `1/sqrt(H)`.
    pub fn describe(&self, p: &Point) -> Vec<f32> {
        let prm = &self.params;
        let h = prm.bins;
        let mut out = Vec::with_capacity(prm.dimension());
        let push_histogram = |level: usize, x: f64, y: f64, out: &mut Vec<f32>| {
            let start = out.len();
            out.extend(self.maps[level].iter().map(|m| sample_reflect(m, x, y)));
            let norm = out[start..].iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
            if norm > 1e-12 {
                out[start..].iter_mut().for_each(|v| *v = (*v as f64 / norm) as f32);
            } else {
                let u = (1.0 / (h as f64).sqrt()) as f32;
                out[start..].iter_mut().for_each(|v| *v = u);
            }
        };
        push_histogram(0, p.x, p.y, &mut out);
        for k in 1..=prm.rings {
            let r = prm.ring_radius(k);
            for j in 0..prm.ring_points {
                let a = TAU * j as f64 / prm.ring_points as f64;
                push_histogram(k, p.x + r * a.cos(), p.y + r * a.sin(), &mut out);
            }
        }
        out
    }
}

/// One-off descriptor of `frame` at `p`. Use [`DaisyField`] for many points.
pub fn descriptor(frame: &ImageFrame, p: &Point, params: &DaisyParams) -> Vec<f32> {
    DaisyField::new(frame, params).describe(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| ((x - y) as f64).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn constant_frame_gives_uniform_blocks() {
        let f = ImageFrame::new(40, 40, vec![0.5; 1600]).unwrap();
        let d = descriptor(&f, &Point::new(20.0, 20.0), &DaisyParams::default());
        assert_eq!(d.len(), 200);
        let u = 1.0 / 8f32.sqrt();
        assert!(d.iter().all(|v| (v - u).abs() < 1e-7));
    }

    #[test]
    fn blocks_are_unit_norm_and_deterministic() {
        let f = ImageFrame::from_plane(Plane::from_fn(64, 64, |x, y| {
            (0.5 + 0.4 * ((x as f32) * 0.3).sin() * ((y as f32) * 0.2).cos()).clamp(0.0, 1.0)
        }))
        .unwrap();
        let field = DaisyField::new(&f, &DaisyParams::default());
        // Near a corner the rings leave the frame and rely on reflection.
        for p in [Point::new(30.5, 31.2), Point::new(2.0, 1.0)] {
            let a = field.describe(&p);
            let b = field.describe(&p);
            assert_eq!(a, b);
            for block in a.chunks(8) {
                let n = block.iter().map(|v| (*v as f64).powi(2)).sum::<f64>().sqrt();
                assert!((n - 1.0).abs() < 1e-6);
                assert!(block.iter().all(|v| *v >= 0.0 && v.is_finite()));
            }
        }
    }

    #[test]
    fn step_edge_separates_sides() {
        // Every histogram with edge mass normalizes to the same shape, so the
        // sides are told apart by which ring samples reach the edge. Points 30
        // px either side see it through opposite rings; points at x = 10, 20
        // are beyond the widest support (radius 15 plus 4 * 7.5) and agree.
        let f = ImageFrame::from_plane(Plane::from_fn(200, 80, |x, _| if x < 100 { 0.2 } else { 0.8 }))
            .unwrap();
        let field = DaisyField::new(&f, &DaisyParams::default());
        let at = |x: f64| field.describe(&Point::new(x, 40.0));
        let straddle = dist(&at(70.0), &at(130.0));
        let same_side = dist(&at(10.0), &at(20.0));
        assert!(straddle > same_side + 0.5, "{straddle} vs {same_side}");
    }
}
