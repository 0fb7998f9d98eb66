use hgmt_core::Sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::warp::{warp_sample, Affine2, CameraUpdate};

/// Ranges for the random scale, rotation and colour jitter of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    pub scale_range: (f64, f64),
    /// Rotations are drawn from `±rotation_deg`.
    pub rotation_deg: f64,
    /// Per-channel gains are drawn from `1 ± jitter`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for AugmentParams {
    fn default() -> Self {
        Self { scale_range: (0.75, 1.25), rotation_deg: 30.0, jitter: 0.2, seed: 0 }
    }
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self { scale_range: (1.0, 1.0), rotation_deg: 0.0, jitter: 0.0, seed: 0 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> crate::Result<()> {
        let (lo, hi) = self.scale_range;
        let ok = lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite() && self.rotation_deg >= 0.0 && (0.0..1.0).contains(&self.jitter);
        if ok {
            Ok(())
        } else {
            Err(crate::Error::InvalidParams(format!("augmentation ranges must contain the identity: {self:?}")))
        }
    }

    /// The transform for this seed.
    pub fn draw(&self) -> AugmentTransform {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let draw = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| if lo < hi { rng.gen_range(lo..hi) } else { lo };
        let scale = draw(&mut rng, self.scale_range.0, self.scale_range.1);
        let rotation_deg = draw(&mut rng, -self.rotation_deg, self.rotation_deg);
        let gains = [0, 1, 2].map(|_| draw(&mut rng, 1.0 - self.jitter, 1.0 + self.jitter) as f32);
        AugmentTransform { scale, rotation_deg, gains }
    }
}

/// One concrete augmentation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentTransform {
    pub scale: f64,
    /// Positive angles turn +x towards +y in image coordinates.
    pub rotation_deg: f64,
    pub gains: [f32; 3],
}

impl AugmentTransform {
    pub const IDENTITY: AugmentTransform = AugmentTransform { scale: 1.0, rotation_deg: 0.0, gains: [1.0; 3] };

    /// The pixel warp about the centre of a `width × height` crop.
    pub fn warp(&self, width: usize, height: usize) -> Affine2 {
        if self.scale == 1.0 && self.rotation_deg == 0.0 {
            return Affine2::IDENTITY;
        }
        let center = [width as f64 / 2.0, height as f64 / 2.0];
        Affine2::rotate_scale(center, self.rotation_deg.to_radians(), self.scale)
    }
}

/// Applies a random augmentation drawn from `params`.
pub fn augment(sample: &Sample, params: &AugmentParams) -> Sample {
    augment_with(sample, &params.draw())
}

/// Applies one affine warp to every modality, then colour gains to the image.
///
/// 3D joints move in x and y with the in-plane warp; depth values are kept.
/// Joints that leave the frame are flagged invisible.
pub fn augment_with(sample: &Sample, t: &AugmentTransform) -> Sample {
    let warp = t.warp(sample.width(), sample.height());
    let mut out = warp_sample(sample, &warp, sample.width(), CameraUpdate::Points);
    if t.gains != [1.0; 3] {
        for mut px in out.image.rows_mut() {
            for (v, g) in px.iter_mut().zip(t.gains) {
                *v = (*v * g).clamp(0.0, 1.0);
            }
        }
    }
    out
}
