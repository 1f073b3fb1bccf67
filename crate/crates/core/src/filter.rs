//! Separable Gaussian filtering with symmetric (half-sample) border reflection.

use rayon::prelude::*;

use crate::raster::Plane;

/// Sampled Gaussian kernel of derivative `order` (0, 1 or 2), truncated at
/// 4 standard deviations. The smoothing kernel is normalized to unit sum;
/// derivative kernels are the analytic derivatives of that normalized kernel,
/// laid out for correlation (tap `i` multiplies the sample at offset `+i`).
/// Derivative kernels sum to zero so constant offsets never leak into them.
pub fn gaussian_kernel(sigma: f64, order: u8) -> Vec<f32> {
    assert!(sigma > 0.0);
    let radius = (4.0 * sigma).ceil().max(1.0) as isize;
    let s2 = sigma * sigma;
    let base: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * s2)).exp())
        .collect();
    let norm: f64 = base.iter().sum();
    let mut taps: Vec<f64> = (-radius..=radius)
        .zip(base)
        .map(|(i, g)| {
            let x = i as f64;
            let g = g / norm;
            match order {
                0 => g,
                1 => x / s2 * g,
                2 => (x * x - s2) / (s2 * s2) * g,
                _ => panic!("unsupported derivative order {order}"),
            }
        })
        .collect();
    if order == 2 {
        let mean = taps.iter().sum::<f64>() / taps.len() as f64;
        taps.iter_mut().for_each(|t| *t -= mean);
    }
    taps.into_iter().map(|t| t as f32).collect()
}

/// Maps an arbitrary index into `[0, n)` by symmetric reflection
/// (`... c b a | a b c ...`).
#[inline]
pub fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

fn convolve_rows(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let w = src.width;
    let mut out = vec![0.0f32; src.data.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let line = &src.data[y * w..(y + 1) * w];
        for (x, o) in row.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            for (k, kv) in kernel.iter().enumerate() {
                let xi = reflect_index(x as isize + k as isize - r, w);
                acc += kv * line[xi];
            }
            *o = acc;
        }
    });
    Plane {
        width: src.width,
        height: src.height,
        data: out,
    }
}

fn convolve_cols(src: &Plane, kernel: &[f32]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let (w, h) = (src.width, src.height);
    let mut out = vec![0.0f32; src.data.len()];
    out.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (k, kv) in kernel.iter().enumerate() {
            let yi = reflect_index(y as isize + k as isize - r, h);
            let line = &src.data[yi * w..(yi + 1) * w];
            for (o, s) in row.iter_mut().zip(line) {
                *o += kv * s;
            }
        }
    });
    Plane {
        width: w,
        height: h,
        data: out,
    }
}

/// Convolves with `kx` along rows and `ky` along columns.
pub fn separable(src: &Plane, kx: &[f32], ky: &[f32]) -> Plane {
    convolve_cols(&convolve_rows(src, kx), ky)
}

pub fn gaussian_blur(src: &Plane, sigma: f64) -> Plane {
    let k = gaussian_kernel(sigma, 0);
    separable(src, &k, &k)
}

/// Second-order Gaussian derivatives `(Ixx, Iyy, Ixy)` at scale `sigma`.
pub fn hessian(src: &Plane, sigma: f64) -> (Plane, Plane, Plane) {
    let g0 = gaussian_kernel(sigma, 0);
    let g1 = gaussian_kernel(sigma, 1);
    let g2 = gaussian_kernel(sigma, 2);
    let ixx = separable(src, &g2, &g0);
    let iyy = separable(src, &g0, &g2);
    let ixy = separable(src, &g1, &g1);
    (ixx, iyy, ixy)
}

/// Central-difference gradient `(gx, gy)` with reflected borders.
pub fn gradient(src: &Plane) -> (Plane, Plane) {
    let (w, h) = src.dims();
    let gx = Plane::from_fn(w, h, |x, y| {
        let l = src.get(reflect_index(x as isize - 1, w), y);
        let r = src.get(reflect_index(x as isize + 1, w), y);
        0.5 * (r - l)
    });
    let gy = Plane::from_fn(w, h, |x, y| {
        let u = src.get(x, reflect_index(y as isize - 1, h));
        let d = src.get(x, reflect_index(y as isize + 1, h));
        0.5 * (d - u)
    });
    (gx, gy)
}

/// 2x2 box downsampling (odd trailing row/column dropped).
pub fn downsample2(src: &Plane) -> Plane {
    let w = (src.width / 2).max(1);
    let h = (src.height / 2).max(1);
    Plane::from_fn(w, h, |x, y| {
        let x0 = (2 * x).min(src.width - 1);
        let y0 = (2 * y).min(src.height - 1);
        let x1 = (x0 + 1).min(src.width - 1);
        let y1 = (y0 + 1).min(src.height - 1);
        0.25 * (src.get(x0, y0) + src.get(x1, y0) + src.get(x0, y1) + src.get(x1, y1))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_is_symmetric() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect_index(i, 5)).collect();
        assert_eq!(idx, vec![2, 1, 0, 0, 1, 2, 3, 4, 4, 3, 2]);
    }

    #[test]
    fn smoothing_kernel_has_unit_mass() {
        for s in [0.5, 1.0, 2.5, 7.5] {
            let k = gaussian_kernel(s, 0);
            let sum: f32 = k.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn derivative_kernels_match_polynomials() {
        // First derivative of x is 1, second derivative of x^2 / 2 is 1.
        let s = 2.0;
        let k1 = gaussian_kernel(s, 1);
        let k2 = gaussian_kernel(s, 2);
        let r = (k1.len() / 2) as f64;
        let d1: f64 = k1
            .iter()
            .enumerate()
            .map(|(i, k)| *k as f64 * (i as f64 - r))
            .sum();
        let d2: f64 = k2
            .iter()
            .enumerate()
            .map(|(i, k)| *k as f64 * 0.5 * (i as f64 - r).powi(2))
            .sum();
        assert!((d1 - 1.0).abs() < 1e-3, "{d1}");
        // Truncation at 4 sigma drops part of the fourth-moment tail.
        assert!((d2 - 1.0).abs() < 1e-2, "{d2}");
    }

    #[test]
    fn blur_preserves_constant() {
        let p = Plane::filled(9, 7, 0.3);
        let b = gaussian_blur(&p, 1.5);
        assert!(b.data.iter().all(|v| (v - 0.3).abs() < 1e-5));
    }
}
