use ndarray::{Array3, ArrayView3};
use serde::{Deserialize, Serialize};

use super::{stride, DepthQuantizer};
use crate::error::{Error, Result};
use crate::types::CameraIntrinsics;

/// Gaussian widths of the joint heatmaps. Peaks are normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatmapParams {
    /// Spatial standard deviation in heatmap cells.
    pub sigma_xy: f64,
    /// Depth standard deviation in bins.
    pub sigma_z: f64,
}

impl Default for HeatmapParams {
    fn default() -> Self {
        Self { sigma_xy: 1.0, sigma_z: 1.0 }
    }
}

impl HeatmapParams {
    pub fn validate(&self) -> Result<()> {
        if self.sigma_xy > 0.0 && self.sigma_z > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "sigmas must be positive, got sigma_xy={} sigma_z={}",
                self.sigma_xy, self.sigma_z
            )))
        }
    }
}

/// A decoded 2D joint in input-resolution pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint2d {
    pub xy: [f64; 2],
    pub confidence: f32,
}

/// Heatmap cell `(col, row)` containing pixel `p`, or `None` outside the grid.
pub fn joint_cell(p: [f64; 2], stride: usize, resolution: usize) -> Option<(usize, usize)> {
    let (x, y) = (p[0] / stride as f64, p[1] / stride as f64);
    if !(x.is_finite() && y.is_finite()) || x < 0.0 || y < 0.0 {
        return None;
    }
    let (cx, cy) = (x.floor() as usize, y.floor() as usize);
    (cx < resolution && cy < resolution).then_some((cx, cy))
}

fn gaussian_1d(len: usize, center: usize, sigma: f64) -> Vec<f64> {
    let denom = 2.0 * sigma * sigma;
    (0..len)
        .map(|i| {
            let d = i as f64 - center as f64;
            (-(d * d) / denom).exp()
        })
        .collect()
}

/// `R × R × J` joint heatmaps (channel-first in memory).
///
/// Channel `j` holds a peak-normalized Gaussian centred on the heatmap cell
/// of joint `j`; invisible or out-of-frame joints give an all-zero channel.
pub fn encode_pose2d(
    joints: &[[f64; 2]],
    visible: &[bool],
    input_size: usize,
    resolution: usize,
    params: &HeatmapParams,
) -> Result<Array3<f32>> {
    params.validate()?;
    let s = stride(input_size, resolution)?;
    if visible.len() != joints.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} visibility flags", joints.len()),
            actual: visible.len().to_string(),
        });
    }
    let mut out = Array3::<f32>::zeros((joints.len(), resolution, resolution));
    for (j, (p, &vis)) in joints.iter().zip(visible).enumerate() {
        if !vis {
            continue;
        }
        let Some((cx, cy)) = joint_cell(*p, s, resolution) else {
            continue;
        };
        let gx = gaussian_1d(resolution, cx, params.sigma_xy);
        let gy = gaussian_1d(resolution, cy, params.sigma_xy);
        let mut channel = out.index_axis_mut(ndarray::Axis(0), j);
        for ((row, col), v) in channel.indexed_iter_mut() {
            *v = (gy[row] * gx[col]) as f32;
        }
    }
    Ok(out)
}

/// Argmax per channel, mapped to the centre of the corresponding input cell.
pub fn decode_pose2d(heatmaps: ArrayView3<f32>, input_size: usize) -> Result<Vec<Keypoint2d>> {
    let (channels, rows, cols) = heatmaps.dim();
    if rows != cols {
        return Err(Error::ShapeMismatch {
            expected: "square heatmaps".into(),
            actual: format!("{rows}×{cols}"),
        });
    }
    let s = stride(input_size, rows)? as f64;
    let mut out = Vec::with_capacity(channels);
    for c in 0..channels {
        let channel = heatmaps.index_axis(ndarray::Axis(0), c);
        let mut best = (0usize, 0usize, f32::NEG_INFINITY);
        for ((row, col), &v) in channel.indexed_iter() {
            if v > best.2 {
                best = (row, col, v);
            }
        }
        out.push(Keypoint2d {
            xy: [best.1 as f64 * s + s / 2.0, best.0 as f64 * s + s / 2.0],
            confidence: best.2,
        });
    }
    Ok(out)
}

/// `R × R × (bins · J)` volumetric joint heatmaps.
///
/// Joint `j` owns channels `[bins·j, bins·j + bins)`; within the block a
/// separable Gaussian peaks at the projected cell and the quantized depth bin.
#[allow(clippy::too_many_arguments)]
pub fn encode_pose3d(
    joints3d: &[[f64; 3]],
    visible: &[bool],
    intrinsics: &CameraIntrinsics,
    input_size: usize,
    resolution: usize,
    quantizer: &DepthQuantizer,
    params: &HeatmapParams,
) -> Result<Array3<f32>> {
    params.validate()?;
    let s = stride(input_size, resolution)?;
    if visible.len() != joints3d.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} visibility flags", joints3d.len()),
            actual: visible.len().to_string(),
        });
    }
    let bins = quantizer.n_bins();
    let mut out = Array3::<f32>::zeros((bins * joints3d.len(), resolution, resolution));
    for (j, (p, &vis)) in joints3d.iter().zip(visible).enumerate() {
        if !vis || !(p[2] > 0.0) {
            continue;
        }
        let Some((cx, cy)) = joint_cell(intrinsics.project(*p), s, resolution) else {
            continue;
        };
        let zb = quantizer.quantize(p[2]);
        let gx = gaussian_1d(resolution, cx, params.sigma_xy);
        let gy = gaussian_1d(resolution, cy, params.sigma_xy);
        let gz = gaussian_1d(bins, zb, params.sigma_z);
        for (b, wz) in gz.iter().enumerate() {
            let mut slice = out.index_axis_mut(ndarray::Axis(0), j * bins + b);
            for ((row, col), v) in slice.indexed_iter_mut() {
                *v = (gy[row] * gx[col] * wz) as f32;
            }
        }
    }
    Ok(out)
}

/// Per-joint argmax over the `R × R × bins` block, back-projected to mm.
///
/// Ties resolve to the smallest `(row, col, bin)` index.
pub fn decode_pose3d(
    volume: ArrayView3<f32>,
    intrinsics: &CameraIntrinsics,
    input_size: usize,
    quantizer: &DepthQuantizer,
) -> Result<Vec<[f64; 3]>> {
    let (channels, rows, cols) = volume.dim();
    let bins = quantizer.n_bins();
    if rows != cols || channels % bins != 0 {
        return Err(Error::ShapeMismatch {
            expected: format!("R×R×(k·{bins})"),
            actual: format!("{rows}×{cols}×{channels}"),
        });
    }
    let s = stride(input_size, rows)? as f64;
    let joints = channels / bins;
    let mut out = Vec::with_capacity(joints);
    for j in 0..joints {
        let mut best = (0usize, 0usize, 0usize, f32::NEG_INFINITY);
        for row in 0..rows {
            for col in 0..cols {
                for b in 0..bins {
                    let v = volume[[j * bins + b, row, col]];
                    if v > best.3 {
                        best = (row, col, b, v);
                    }
                }
            }
        }
        let z = quantizer.dequantize(best.2).expect("foreground bin");
        let u = best.1 as f64 * s + s / 2.0;
        let v = best.0 as f64 * s + s / 2.0;
        out.push(intrinsics.back_project(u, v, z));
    }
    Ok(out)
}
