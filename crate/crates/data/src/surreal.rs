//! Normalized intermediate frame format.
//!
//! One directory per clip. Frame `k` is stored as
//! `frame_%06d.png` (RGB), `frame_%06d.parts.png` (8-bit labels),
//! `frame_%06d.depth.f32` (row-major little-endian `f32` mm, NaN on
//! background) and `frame_%06d.joints.json` (2D px, 3D mm, intrinsics,
//! subject id, optional bounding box).

use std::path::{Path, PathBuf};

use hgmt_core::{CameraIntrinsics, Sample, NUM_JOINTS};
use image::{GrayImage, ImageReader, RgbImage};
use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::manifest::{DatasetManifest, ManifestRecord};
use crate::warp::{warp_sample, Affine2, CameraUpdate};

/// Contents of a `frame_%06d.joints.json` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointsFile {
    pub joints2d: Vec<[f64; 2]>,
    pub joints3d: Vec<[f64; 3]>,
    #[serde(default)]
    pub visible: Option<Vec<bool>>,
    #[serde(default)]
    pub intrinsics: Option<CameraIntrinsics>,
    pub subject_id: u32,
    #[serde(default)]
    pub frame_id: u64,
    /// Person box `[x_min, y_min, x_max, y_max]` in pixels.
    #[serde(default)]
    pub bbox: Option<[f64; 4]>,
}

/// Stem of frame `index` inside a clip directory, e.g. `clip/frame_000007`.
pub fn frame_stem(clip_id: &str, index: u64) -> String {
    format!("{clip_id}/frame_{index:06}")
}

fn with_suffix(root: &Path, stem: &str, suffix: &str) -> PathBuf {
    root.join(format!("{stem}{suffix}"))
}

/// Writes `sample` under `root/<stem>.*` and returns the stem.
pub fn write_frame(root: &Path, clip_id: &str, index: u64, sample: &Sample, bbox: Option<[f64; 4]>) -> Result<String> {
    let stem = frame_stem(clip_id, index);
    let dir = root.join(clip_id);
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let (h, w) = (sample.height() as u32, sample.width() as u32);

    let rgb = RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([0, 1, 2].map(|k| (sample.image[[y as usize, x as usize, k]].clamp(0.0, 1.0) * 255.0).round() as u8))
    });
    let path = with_suffix(root, &stem, ".png");
    rgb.save(&path).map_err(|e| image_err(&stem, "image", e))?;

    let parts = GrayImage::from_fn(w, h, |x, y| image::Luma([sample.part_mask[[y as usize, x as usize]]]));
    let path = with_suffix(root, &stem, ".parts.png");
    parts.save(&path).map_err(|e| image_err(&stem, "parts", e))?;

    let mut raw = Vec::with_capacity(sample.depth.len() * 4);
    for &d in sample.depth.iter() {
        let v = if d.is_finite() { d } else { f32::NAN };
        raw.extend_from_slice(&v.to_le_bytes());
    }
    let path = with_suffix(root, &stem, ".depth.f32");
    std::fs::write(&path, raw).map_err(io_err(&path))?;

    let joints = JointsFile {
        joints2d: sample.joints2d.to_vec(),
        joints3d: sample.joints3d.to_vec(),
        visible: Some(sample.visible.to_vec()),
        intrinsics: Some(sample.intrinsics),
        subject_id: sample.subject_id,
        frame_id: sample.frame_id,
        bbox,
    };
    let path = with_suffix(root, &stem, ".joints.json");
    std::fs::write(&path, serde_json::to_vec_pretty(&joints).expect("serializable")).map_err(io_err(&path))?;
    Ok(stem)
}

fn image_err(record: &str, modality: &'static str, e: image::ImageError) -> Error {
    Error::Corrupt { record: record.to_string(), modality, reason: e.to_string() }
}

fn require(path: &Path, record: &str, modality: &'static str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingModality { record: record.to_string(), modality })
    }
}

/// Reads one frame at its stored resolution, without cropping.
pub fn read_frame(root: &Path, stem: &str) -> Result<(Sample, Option<[f64; 4]>)> {
    let paths = [".png", ".parts.png", ".depth.f32", ".joints.json"].map(|s| with_suffix(root, stem, s));
    for (path, modality) in paths.iter().zip(["image", "parts", "depth", "joints"]) {
        require(path, stem, modality)?;
    }
    let corrupt = |modality, reason: String| Error::Corrupt { record: stem.to_string(), modality, reason };

    let rgb = ImageReader::open(&paths[0])
        .map_err(io_err(&paths[0]))?
        .decode()
        .map_err(|e| image_err(stem, "image", e))?
        .to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let image = Array3::from_shape_fn((h, w, 3), |(r, c, k)| rgb.get_pixel(c as u32, r as u32)[k] as f32 / 255.0);

    let parts = ImageReader::open(&paths[1])
        .map_err(io_err(&paths[1]))?
        .decode()
        .map_err(|e| image_err(stem, "parts", e))?;
    if parts.color() != image::ColorType::L8 {
        return Err(corrupt("parts", format!("expected 8-bit labels, found {:?}", parts.color())));
    }
    let parts = parts.to_luma8();
    if (parts.width() as usize, parts.height() as usize) != (w, h) {
        return Err(corrupt("parts", format!("size {}x{} differs from image {w}x{h}", parts.width(), parts.height())));
    }
    let part_mask = Array2::from_shape_fn((h, w), |(r, c)| parts.get_pixel(c as u32, r as u32)[0]);

    let raw = std::fs::read(&paths[2]).map_err(io_err(&paths[2]))?;
    if raw.len() != w * h * 4 {
        return Err(corrupt("depth", format!("{} bytes, expected {}", raw.len(), w * h * 4)));
    }
    let values: Vec<f32> = raw
        .chunks_exact(4)
        .map(|b| {
            let v = f32::from_le_bytes(b.try_into().expect("4 bytes"));
            if v.is_nan() {
                f32::INFINITY
            } else {
                v
            }
        })
        .collect();
    let depth = Array2::from_shape_vec((h, w), values).expect("size checked");

    let text = std::fs::read(&paths[3]).map_err(io_err(&paths[3]))?;
    let joints: JointsFile = serde_json::from_slice(&text).map_err(|e| corrupt("joints", e.to_string()))?;
    let intrinsics = joints.intrinsics.ok_or_else(|| Error::MissingIntrinsics { record: stem.to_string() })?;
    let to_fixed = |n: usize, what: &str| {
        if n == NUM_JOINTS {
            Ok(())
        } else {
            Err(corrupt("joints", format!("{what} has {n} entries, expected {NUM_JOINTS}")))
        }
    };
    to_fixed(joints.joints2d.len(), "joints2d")?;
    to_fixed(joints.joints3d.len(), "joints3d")?;
    let visible: [bool; NUM_JOINTS] = match &joints.visible {
        Some(v) => {
            to_fixed(v.len(), "visible")?;
            v.as_slice().try_into().expect("length checked")
        }
        None => [true; NUM_JOINTS],
    };
    let mut sample = Sample {
        image,
        joints2d: joints.joints2d.as_slice().try_into().expect("length checked"),
        visible,
        joints3d: joints.joints3d.as_slice().try_into().expect("length checked"),
        part_mask,
        depth,
        intrinsics,
        subject_id: joints.subject_id,
        frame_id: joints.frame_id,
    };
    sample.refresh_visibility();
    Ok((sample, joints.bbox))
}

/// Crop and resize policy for loaded frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoadOptions {
    pub output_size: usize,
    pub crop_margin: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { output_size: 256, crop_margin: DatasetManifest::DEFAULT_CROP_MARGIN }
    }
}

/// Bounding box of the foreground, or of the whole frame when empty.
fn foreground_box(sample: &Sample) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
    for ((r, c), &l) in sample.part_mask.indexed_iter() {
        if l != 0 {
            b = [b[0].min(c as f64), b[1].min(r as f64), b[2].max(c as f64 + 1.0), b[3].max(r as f64 + 1.0)];
        }
    }
    if b[0].is_finite() {
        b
    } else {
        [0.0, 0.0, sample.width() as f64, sample.height() as f64]
    }
}

/// The crop-and-resize warp for a box: a square centred on the box, grown
/// by `margin` of its longer side on each side, scaled to `size`.
pub fn crop_warp(bbox: [f64; 4], margin: f64, size: usize) -> Affine2 {
    let (w, h) = (bbox[2] - bbox[0], bbox[3] - bbox[1]);
    let side = w.max(h).max(1.0) * (1.0 + 2.0 * margin);
    let (cx, cy) = ((bbox[0] + bbox[2]) / 2.0, (bbox[1] + bbox[3]) / 2.0);
    Affine2::crop(cx - side / 2.0, cy - side / 2.0, size as f64 / side)
}

/// Reads, crops and resizes one manifest record.
pub fn load_record(root: &Path, record: &ManifestRecord, opts: &LoadOptions) -> Result<Sample> {
    let (sample, bbox) = read_frame(root, &record.frame_path)?;
    let bbox = bbox.unwrap_or_else(|| foreground_box(&sample));
    let warp = crop_warp(bbox, opts.crop_margin, opts.output_size);
    let mut out = warp_sample(&sample, &warp, opts.output_size, CameraUpdate::Intrinsics);
    out.subject_id = record.subject_id;
    Ok(out)
}

/// Samples of every manifest record, in manifest order.
pub fn load_surreal_format<'a>(
    root: &'a Path,
    manifest: &'a DatasetManifest,
    opts: LoadOptions,
) -> impl Iterator<Item = Result<Sample>> + 'a {
    let opts = LoadOptions { crop_margin: manifest.crop_margin, ..opts };
    manifest.records.iter().map(move |r| load_record(root, r, &opts))
}
