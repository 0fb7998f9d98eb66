//! Affine resampling of a whole [`Sample`].
//!
//! Pixel `i` covers `[i, i + 1)`, so its centre is at `i + 0.5`. A warp maps
//! source coordinates to destination coordinates; every output pixel is
//! filled by pulling from the inverse-mapped source position.

use hgmt_core::{CameraIntrinsics, Sample};
use ndarray::{Array2, Array3};

/// `p' = A p + t` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine2 {
    pub a: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl Affine2 {
    pub const IDENTITY: Affine2 = Affine2 { a: [[1.0, 0.0], [0.0, 1.0]], t: [0.0, 0.0] };

    /// Crop origin `(x0, y0)` followed by isotropic scale `s`.
    pub fn crop(x0: f64, y0: f64, s: f64) -> Self {
        Affine2 { a: [[s, 0.0], [0.0, s]], t: [-x0 * s, -y0 * s] }
    }

    /// Rotation by `theta` (radians, image axes) and scale `s` about `center`.
    pub fn rotate_scale(center: [f64; 2], theta: f64, s: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        let a = [[s * cos, -s * sin], [s * sin, s * cos]];
        let t = [
            center[0] - a[0][0] * center[0] - a[0][1] * center[1],
            center[1] - a[1][0] * center[0] - a[1][1] * center[1],
        ];
        Affine2 { a, t }
    }

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.a[0][0] * p[0] + self.a[0][1] * p[1] + self.t[0],
            self.a[1][0] * p[0] + self.a[1][1] * p[1] + self.t[1],
        ]
    }

    pub fn apply_linear(&self, v: [f64; 2]) -> [f64; 2] {
        [self.a[0][0] * v[0] + self.a[0][1] * v[1], self.a[1][0] * v[0] + self.a[1][1] * v[1]]
    }

    pub fn det(&self) -> f64 {
        self.a[0][0] * self.a[1][1] - self.a[0][1] * self.a[1][0]
    }

    pub fn inverse(&self) -> Option<Self> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let a = [[self.a[1][1] / det, -self.a[0][1] / det], [-self.a[1][0] / det, self.a[0][0] / det]];
        let t = [-(a[0][0] * self.t[0] + a[0][1] * self.t[1]), -(a[1][0] * self.t[0] + a[1][1] * self.t[1])];
        Some(Affine2 { a, t })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// How 3D joints and intrinsics follow an in-plane warp.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CameraUpdate {
    /// Keep the 3D points; fold the warp into the intrinsics. Needs a
    /// diagonal linear part (crop and resize).
    Intrinsics,
    /// Keep the focal lengths; move the 3D points in x and y and shift the
    /// principal point (rotation and scale about a centre).
    Points,
}

/// Warps every modality of `sample` onto a `size × size` grid.
///
/// The image is sampled bilinearly, the part mask and depth map by nearest
/// neighbour. Pixels pulled from outside the source become background.
pub fn warp_sample(sample: &Sample, warp: &Affine2, size: usize, camera: CameraUpdate) -> Sample {
    let mut out = sample.clone();
    if warp.is_identity() && size == sample.width() && size == sample.height() {
        return out;
    }
    let inv = warp.inverse().expect("invertible warp");
    let (h, w) = (sample.height(), sample.width());
    let mut image = Array3::<f32>::zeros((size, size, 3));
    let mut mask = Array2::<u8>::zeros((size, size));
    let mut depth = Array2::<f32>::from_elem((size, size), f32::INFINITY);
    for r in 0..size {
        for c in 0..size {
            let p = inv.apply([c as f64 + 0.5, r as f64 + 0.5]);
            let (sx, sy) = (p[0].floor(), p[1].floor());
            if sx >= 0.0 && sy >= 0.0 && (sx as usize) < w && (sy as usize) < h {
                let (sy, sx) = (sy as usize, sx as usize);
                mask[[r, c]] = sample.part_mask[[sy, sx]];
                depth[[r, c]] = sample.depth[[sy, sx]];
            }
            bilinear(&sample.image, p[0] - 0.5, p[1] - 0.5, |k, v| image[[r, c, k]] = v);
        }
    }
    out.image = image;
    out.part_mask = mask;
    out.depth = depth;
    for p in out.joints2d.iter_mut() {
        *p = warp.apply(*p);
    }
    let k = sample.intrinsics;
    let pp = warp.apply([k.cx, k.cy]);
    match camera {
        CameraUpdate::Intrinsics => {
            debug_assert!(warp.a[0][1] == 0.0 && warp.a[1][0] == 0.0);
            out.intrinsics = CameraIntrinsics::new(k.fx * warp.a[0][0], k.fy * warp.a[1][1], pp[0], pp[1]);
        }
        CameraUpdate::Points => {
            for q in out.joints3d.iter_mut() {
                let v = warp.apply_linear([k.fx * q[0], k.fy * q[1]]);
                q[0] = v[0] / k.fx;
                q[1] = v[1] / k.fy;
            }
            out.intrinsics = CameraIntrinsics::new(k.fx, k.fy, pp[0], pp[1]);
        }
    }
    let inside = |p: &[f64; 2]| p[0] >= 0.0 && p[1] >= 0.0 && p[0] < size as f64 && p[1] < size as f64;
    for (vis, p) in out.visible.iter_mut().zip(out.joints2d.iter()) {
        *vis = *vis && inside(p);
    }
    out
}

fn bilinear(img: &Array3<f32>, x: f64, y: f64, mut put: impl FnMut(usize, f32)) {
    let (h, w, _) = img.dim();
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = ((x - x0) as f32, (y - y0) as f32);
    let taps = [(x0, y0, (1.0 - fx) * (1.0 - fy)), (x0 + 1.0, y0, fx * (1.0 - fy)), (x0, y0 + 1.0, (1.0 - fx) * fy), (x0 + 1.0, y0 + 1.0, fx * fy)];
    for k in 0..3 {
        let mut acc = 0.0f32;
        for &(tx, ty, wgt) in &taps {
            if wgt != 0.0 && tx >= 0.0 && ty >= 0.0 && (tx as usize) < w && (ty as usize) < h {
                acc += wgt * img[[ty as usize, tx as usize, k]];
            }
        }
        put(k, acc);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quarter_turn_about_centre() {
        let a = Affine2::rotate_scale([128.0, 128.0], std::f64::consts::FRAC_PI_2, 1.0);
        let p = a.apply([192.0, 128.0]);
        assert!((p[0] - 128.0).abs() < 1e-9 && (p[1] - 192.0).abs() < 1e-9);
    }

    #[test]
    fn inverse_round_trips() {
        let a = Affine2::rotate_scale([10.0, -4.0], 0.7, 1.3);
        let b = a.inverse().unwrap();
        let p = b.apply(a.apply([3.0, 5.0]));
        assert!((p[0] - 3.0).abs() < 1e-12 && (p[1] - 5.0).abs() < 1e-12);
        assert!(Affine2::crop(0.0, 0.0, 0.0).inverse().is_none());
    }
}
