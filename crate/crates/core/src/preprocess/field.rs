use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::annotation::VesselAnnotation;
use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};

/// Dense per-pixel displacement mapping a key-frame location `p` to the
/// current-frame location `p + (dx, dy)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationField {
    pub width: usize,
    pub height: usize,
    pub dx: Vec<f32>,
    pub dy: Vec<f32>,
}

impl DeformationField {
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn uniform(width: usize, height: usize, dx: f32, dy: f32) -> Self {
        Self {
            width,
            height,
            dx: vec![dx; width * height],
            dy: vec![dy; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> (f32, f32)) -> Self {
        let mut field = Self::identity(width, height);
        for y in 0..height {
            for x in 0..width {
                let (u, v) = f(x, y);
                field.dx[y * width + x] = u;
                field.dy[y * width + x] = v;
            }
        }
        field
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Bilinearly interpolated displacement at a sub-pixel location (clamped
    /// to the grid).
    pub fn displacement(&self, p: &Point) -> (f64, f64) {
        let (x, y) = (
            p.x.clamp(0.0, (self.width - 1) as f64),
            p.y.clamp(0.0, (self.height - 1) as f64),
        );
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |g: &[f32]| {
            let at = |xx: usize, yy: usize| g[yy * self.width + xx] as f64;
            let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
            let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        };
        (lerp(&self.dx), lerp(&self.dy))
    }

    /// Maps a key-frame point into the current frame, clamped to its bounds.
    pub fn map_point(&self, p: &Point) -> Point {
        let (u, v) = self.displacement(p);
        Point::new(
            (p.x + u).clamp(0.0, (self.width - 1) as f64),
            (p.y + v).clamp(0.0, (self.height - 1) as f64),
        )
    }

    pub fn max_abs(&self) -> f32 {
        self.dx
            .iter()
            .chain(&self.dy)
            .fold(0.0f32, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.dx.iter().chain(&self.dy).all(|v| v.is_finite())
    }

    /// Writes `DFIELD <width> <height>\n` followed by little-endian `f32`
    /// samples: all `dx` row-major, then all `dy` row-major.
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "DFIELD {} {}", self.width, self.height)?;
        let mut buf = Vec::with_capacity(8 * self.dx.len());
        for v in self.dx.iter().chain(&self.dy) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(r: impl Read) -> Result<Self> {
        let mut reader = BufReader::new(r);
        let mut header = String::new();
        reader.read_line(&mut header)?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("DFIELD") {
            return Err(Error::MalformedField("missing DFIELD header".into()));
        }
        let mut dim = || -> Result<usize> {
            parts
                .next()
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|v| *v > 0)
                .ok_or_else(|| Error::MalformedField("bad dimensions in header".into()))
        };
        let (width, height) = (dim()?, dim()?);
        let n = width * height;
        let mut bytes = Vec::new();
        reader.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * n {
            return Err(Error::MalformedField(format!(
                "expected {} payload bytes, found {}",
                8 * n,
                bytes.len()
            )));
        }
        let floats: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let field = Self {
            width,
            height,
            dx: floats[..n].to_vec(),
            dy: floats[n..].to_vec(),
        };
        if !field.is_finite() {
            return Err(Error::MalformedField("non-finite displacement".into()));
        }
        Ok(field)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(std::fs::File::open(path)?)
    }
}

pub fn map_polyline(line: &Polyline, field: &DeformationField) -> Polyline {
    let mapped: Vec<Point> = line.points().iter().map(|p| field.map_point(p)).collect();
    Polyline::new(mapped.clone()).unwrap_or_else(|_| {
        // Everything clamped onto one location; keep the degenerate pair.
        Polyline::from_raw(vec![mapped[0], mapped[mapped.len() - 1]])
    })
}

/// Displaces every annotation point by the interpolated field. Branch order
/// and point order are preserved.
pub fn map_annotation(ann: &VesselAnnotation, field: &DeformationField) -> VesselAnnotation {
    VesselAnnotation {
        frame_index: ann.frame_index,
        branches: ann.branches.iter().map(|b| map_polyline(b, field)).collect(),
    }
}
