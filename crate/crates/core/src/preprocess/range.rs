use crate::geometry::Point;
use crate::raster::BinaryMask;

/// Pixels visited by Bresenham lines between consecutive rounded points.
/// Points are clamped into the frame before rounding.
pub fn rasterize_polyline(points: &[Point], width: usize, height: usize) -> Vec<(usize, usize)> {
    let clamp = |p: &Point| -> (i64, i64) {
        (
            p.x.clamp(0.0, (width - 1) as f64).round() as i64,
            p.y.clamp(0.0, (height - 1) as f64).round() as i64,
        )
    };
    let mut out: Vec<(usize, usize)> = Vec::new();
    let push = |x: i64, y: i64, out: &mut Vec<(usize, usize)>| {
        let px = (x as usize, y as usize);
        if out.last() != Some(&px) {
            out.push(px);
        }
    };
    if let Some(first) = points.first() {
        let (x, y) = clamp(first);
        push(x, y, &mut out);
    }
    for w in points.windows(2) {
        let (mut x0, mut y0) = clamp(&w[0]);
        let (x1, y1) = clamp(&w[1]);
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            push(x0, y0, &mut out);
            if x0 == x1 && y0 == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x0 += sx;
            }
            if e2 <= dx {
                err += dx;
                y0 += sy;
            }
        }
    }
    out
}

/// Mask of pixels whose Euclidean distance to the rasterized branch is at
/// most `sigma`.
pub fn tracking_range(points: &[Point], sigma: f64, width: usize, height: usize) -> BinaryMask {
    let mut mask = BinaryMask::new(width, height);
    let r = sigma.floor() as i64;
    let r2 = sigma * sigma;
    let disk: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| ((dx * dx + dy * dy) as f64) <= r2)
        .collect();
    for (cx, cy) in rasterize_polyline(points, width, height) {
        for (dx, dy) in &disk {
            let (x, y) = (cx as i64 + dx, cy as i64 + dy);
            if x >= 0 && y >= 0 && (x as usize) < width && (y as usize) < height {
                mask.set(x as usize, y as usize, true);
            }
        }
    }
    mask
}
