use ndarray::{Array2, Array3, ArrayView2, ArrayView3};

use super::{stride, DepthQuantizer};
use crate::error::{Error, Result};
use crate::types::NUM_PARTS;

fn grid_stride(rows: usize, cols: usize, resolution: usize) -> Result<usize> {
    let s = stride(rows, resolution)?;
    if stride(cols, resolution)? != s {
        return Err(Error::ShapeMismatch {
            expected: "square label map".into(),
            actual: format!("{rows}×{cols}"),
        });
    }
    Ok(s)
}

/// Nearest-neighbour downsampling that reads the pixel at each cell centre.
pub fn downsample_labels(part_mask: ArrayView2<u8>, resolution: usize) -> Result<Array2<u8>> {
    let (rows, cols) = part_mask.dim();
    let s = grid_stride(rows, cols, resolution)?;
    let offset = s / 2;
    Ok(Array2::from_shape_fn((resolution, resolution), |(r, c)| {
        part_mask[[r * s + offset, c * s + offset]]
    }))
}

/// `R × R × 15` one-hot body-part target.
pub fn encode_parts(part_mask: ArrayView2<u8>, resolution: usize) -> Result<Array3<f32>> {
    let labels = downsample_labels(part_mask, resolution)?;
    if let Some(&bad) = part_mask.iter().find(|&&l| l as usize >= NUM_PARTS) {
        return Err(Error::LabelOutOfRange { label: bad as usize, classes: NUM_PARTS });
    }
    Ok(one_hot(&labels, NUM_PARTS))
}

fn one_hot(labels: &Array2<u8>, classes: usize) -> Array3<f32> {
    let (rows, cols) = labels.dim();
    let mut out = Array3::<f32>::zeros((classes, rows, cols));
    for ((r, c), &l) in labels.indexed_iter() {
        out[[l as usize, r, c]] = 1.0;
    }
    out
}

/// Per-pixel argmax over channels; ties go to the smaller channel index.
pub fn channel_argmax(logits: ArrayView3<f32>) -> Array2<usize> {
    let (channels, rows, cols) = logits.dim();
    Array2::from_shape_fn((rows, cols), |(r, c)| {
        let mut best = (0usize, f32::NEG_INFINITY);
        for k in 0..channels {
            let v = logits[[k, r, c]];
            if v > best.1 {
                best = (k, v);
            }
        }
        best.0
    })
}

pub fn decode_parts(logits: ArrayView3<f32>) -> Array2<u8> {
    channel_argmax(logits).mapv(|k| k as u8)
}

/// Ground-truth depth bin per heatmap cell (background → `n_bins`).
pub fn depth_bins(
    depth: ArrayView2<f32>,
    part_mask: ArrayView2<u8>,
    quantizer: &DepthQuantizer,
    resolution: usize,
) -> Result<Array2<u8>> {
    if depth.dim() != part_mask.dim() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", part_mask.dim()),
            actual: format!("{:?}", depth.dim()),
        });
    }
    let (rows, cols) = depth.dim();
    let s = grid_stride(rows, cols, resolution)?;
    let offset = s / 2;
    Ok(Array2::from_shape_fn((resolution, resolution), |(r, c)| {
        let (pr, pc) = (r * s + offset, c * s + offset);
        if part_mask[[pr, pc]] == 0 {
            quantizer.background_bin() as u8
        } else {
            quantizer.quantize(depth[[pr, pc]] as f64) as u8
        }
    }))
}

/// `R × R × (bins + 1)` one-hot depth target; the last channel is background.
pub fn encode_depth(
    depth: ArrayView2<f32>,
    part_mask: ArrayView2<u8>,
    quantizer: &DepthQuantizer,
    resolution: usize,
) -> Result<Array3<f32>> {
    let bins = depth_bins(depth, part_mask, quantizer, resolution)?;
    Ok(one_hot(&bins, quantizer.num_channels()))
}

/// Decoded depth map at heatmap resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthDecoding {
    /// Argmax bin per cell; `n_bins` marks background.
    pub bins: Array2<u8>,
    /// Bin-centre depth in mm, `+∞` on background.
    pub depth_mm: Array2<f64>,
    pub background: Array2<bool>,
}

pub fn decode_depth(logits: ArrayView3<f32>, quantizer: &DepthQuantizer) -> Result<DepthDecoding> {
    if logits.dim().0 != quantizer.num_channels() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} depth channels", quantizer.num_channels()),
            actual: logits.dim().0.to_string(),
        });
    }
    let idx = channel_argmax(logits);
    let bins = idx.mapv(|b| b as u8);
    let depth_mm = idx.mapv(|b| quantizer.dequantize(b).unwrap_or(f64::INFINITY));
    let background = idx.mapv(|b| b == quantizer.background_bin());
    Ok(DepthDecoding { bins, depth_mm, background })
}
