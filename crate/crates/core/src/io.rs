//! On-disk sequences: numbered 8-bit grayscale PNG frames, JSON annotations,
//! an optional manifest, segmentation masks and overlay rendering.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::annotation::VesselAnnotation;
use crate::error::{Error, Result};
use crate::preprocess::rasterize_polyline;
use crate::raster::{BinaryMask, ImageFrame, Plane};
use crate::synth::SynthParams;

pub const MANIFEST: &str = "manifest.json";

pub fn frame_name(index: usize) -> String {
    format!("frame{index:03}.png")
}

pub fn annotation_name(index: usize) -> String {
    format!("frame{index:03}.ann")
}

/// Displacement-field file name for the step that ends on frame `index`.
pub fn field_name(index: usize) -> String {
    format!("field{index:03}.dfield")
}

fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_frame(frame: &ImageFrame, path: &Path) -> Result<()> {
    let (w, h) = frame.dims();
    let img = GrayImage::from_fn(w as u32, h as u32, |x, y| Luma([to_u8(frame.get(x as usize, y as usize))]));
    img.save(path)?;
    Ok(())
}

/// Loads any supported image as grayscale with intensities in `[0, 1]`.
pub fn load_frame(path: &Path) -> Result<ImageFrame> {
    let img = image::open(path)?.into_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    ImageFrame::new(w, h, img.pixels().map(|p| p.0[0] as f32 / 255.0).collect())
}

/// The frame as it reads back after an 8-bit save.
pub fn quantize(frame: &ImageFrame) -> ImageFrame {
    ImageFrame::from_plane_clamped(Plane {
        width: frame.width(),
        height: frame.height(),
        data: frame.intensities().iter().map(|v| to_u8(*v) as f32 / 255.0).collect(),
    })
}

/// Segmentation mask: nonzero pixels are vessel.
pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let img = image::open(path)?.into_luma8();
    Ok(BinaryMask {
        width: img.width() as usize,
        height: img.height() as usize,
        bits: img.pixels().map(|p| p.0[0] != 0).collect(),
    })
}

/// Frame order of a sequence directory, plus the generator settings when the
/// sequence is synthetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub frames: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthParams>,
}

/// Writes frames, per-frame ground truth and the manifest into `dir`.
pub fn write_sequence(
    dir: &Path,
    frames: &[ImageFrame],
    truth: &[VesselAnnotation],
    params: Option<&SynthParams>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, f) in frames.iter().enumerate() {
        save_frame(f, &dir.join(frame_name(i)))?;
    }
    for a in truth {
        a.save(&dir.join(annotation_name(a.frame_index)))?;
    }
    let manifest = Manifest {
        frames: (0..frames.len()).map(frame_name).collect(),
        synth: params.cloned(),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    std::fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

/// Frame paths of a sequence directory: the manifest order when one exists,
/// otherwise every PNG file in lexicographic order.
pub fn sequence_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let manifest = dir.join(MANIFEST);
    let paths: Vec<PathBuf> = if manifest.is_file() {
        let m: Manifest = serde_json::from_str(&std::fs::read_to_string(&manifest)?)?;
        m.frames.iter().map(|f| dir.join(f)).collect()
    } else {
        let mut v: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("png")))
            .collect();
        v.sort();
        v
    };
    if let Some(missing) = paths.iter().find(|p| !p.is_file()) {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("frame {} not found", missing.display()),
        )));
    }
    Ok(paths)
}

pub fn load_sequence(dir: &Path) -> Result<Vec<ImageFrame>> {
    sequence_frames(dir)?.iter().map(|p| load_frame(p)).collect()
}

/// Every `*.ann` annotation in `dir`, ordered by frame index.
pub fn load_annotations(dir: &Path) -> Result<Vec<VesselAnnotation>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.extension().is_some_and(|e| e == "ann") {
            out.push(
                VesselAnnotation::load(&p)
                    .map_err(|e| Error::InvalidAnnotation(format!("{}: {e}", p.display())))?,
            );
        }
    }
    out.sort_by_key(|a| a.frame_index);
    Ok(out)
}

pub const TRACKED_COLOR: [u8; 3] = [230, 40, 40];
pub const TRUTH_COLOR: [u8; 3] = [40, 200, 60];

/// The frame in gray with the centerlines drawn on top; tracked lines are
/// drawn last.
pub fn render_overlay(frame: &ImageFrame, tracked: &VesselAnnotation, truth: Option<&VesselAnnotation>) -> RgbImage {
    let (w, h) = frame.dims();
    let mut img = RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = to_u8(frame.get(x as usize, y as usize));
        Rgb([v, v, v])
    });
    let mut draw = |ann: &VesselAnnotation, color: [u8; 3]| {
        for b in &ann.branches {
            for (x, y) in rasterize_polyline(b.points(), w, h) {
                img.put_pixel(x as u32, y as u32, Rgb(color));
            }
        }
    };
    if let Some(t) = truth {
        draw(t, TRUTH_COLOR);
    }
    draw(tracked, TRACKED_COLOR);
    img
}
