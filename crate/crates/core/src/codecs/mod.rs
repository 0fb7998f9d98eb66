//! Supervision encoders and their decoders.
//!
//! Every decoder is an argmax with ties resolved towards the smallest
//! row-major index of the `rows × cols × channels` layout, so decoding is
//! bit-reproducible across implementations.

mod dense;
mod heatmap;
mod quantizer;

pub use dense::{
    channel_argmax, decode_depth, decode_parts, depth_bins, downsample_labels, encode_depth,
    encode_parts, DepthDecoding,
};
pub use heatmap::{
    decode_pose2d, decode_pose3d, encode_pose2d, encode_pose3d, joint_cell, HeatmapParams,
    Keypoint2d,
};
pub use quantizer::DepthQuantizer;

use crate::error::{Error, Result};

/// Pixel stride between the input crop and the heatmap grid.
pub fn stride(input: usize, resolution: usize) -> Result<usize> {
    if resolution == 0 || input == 0 || input % resolution != 0 {
        return Err(Error::StrideMismatch { input, resolution });
    }
    Ok(input / resolution)
}
