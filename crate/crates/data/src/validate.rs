//! Modal consistency checks between mask, depth and joints.

use std::fmt;

use hgmt_core::{Joint, Sample};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationOptions {
    /// Allowed distance between a visible 2D joint and its projected 3D joint.
    pub projection_tol_px: f64,
    /// Slack on the foreground depth range when checking joint depths.
    pub depth_tol_mm: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { projection_tol_px: 0.5, depth_tol_mm: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Pixels that are foreground with non-finite depth or background with finite depth.
    MaskDepthMismatch { pixels: usize },
    Projection { joint: Joint, error_px: f64 },
    JointDepth { joint: Joint, z: f64, range: (f64, f64) },
    NoForeground,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::MaskDepthMismatch { pixels } => write!(f, "{pixels} pixels disagree between part mask and depth"),
            Violation::Projection { joint, error_px } => write!(f, "{joint} 2D joint is {error_px:.3} px from its projection"),
            Violation::JointDepth { joint, z, range } => {
                write!(f, "{joint} depth {z:.2} mm outside foreground range [{:.2}, {:.2}]", range.0, range.1)
            }
            Violation::NoForeground => write!(f, "no foreground pixels"),
        }
    }
}

/// Every violation found in one sample.
pub fn validate_sample(sample: &Sample, opts: &ValidationOptions) -> Vec<Violation> {
    let mut out = Vec::new();
    let mismatched = sample
        .part_mask
        .iter()
        .zip(sample.depth.iter())
        .filter(|(label, d)| (**label != 0) != d.is_finite())
        .count();
    if mismatched > 0 {
        out.push(Violation::MaskDepthMismatch { pixels: mismatched });
    }
    for joint in Joint::ALL {
        let j = joint.index();
        if !sample.visible[j] {
            continue;
        }
        let p = sample.intrinsics.project(sample.joints3d[j]);
        let q = sample.joints2d[j];
        let error_px = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        if !(error_px <= opts.projection_tol_px) {
            out.push(Violation::Projection { joint, error_px });
        }
    }
    match sample.foreground_depth_range() {
        None => out.push(Violation::NoForeground),
        Some(range) => {
            for joint in Joint::ALL {
                let j = joint.index();
                let z = sample.joints3d[j][2];
                if sample.visible[j] && !(z >= range.0 - opts.depth_tol_mm && z <= range.1 + opts.depth_tol_mm) {
                    out.push(Violation::JointDepth { joint, z, range });
                }
            }
        }
    }
    out
}

/// Violations over a dataset, keyed by frame id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<(u64, Violation)>,
}

impl ValidationReport {
    pub fn add(&mut self, sample: &Sample, opts: &ValidationOptions) {
        self.samples += 1;
        self.violations.extend(validate_sample(sample, opts).into_iter().map(|v| (sample.frame_id, v)));
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// Violation counts by kind: mask/depth, projection, joint depth, empty.
    pub fn counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for (_, v) in &self.violations {
            c[match v {
                Violation::MaskDepthMismatch { .. } => 0,
                Violation::Projection { .. } => 1,
                Violation::JointDepth { .. } => 2,
                Violation::NoForeground => 3,
            }] += 1;
        }
        c
    }
}

pub fn validate_all<'a>(samples: impl IntoIterator<Item = &'a Sample>, opts: &ValidationOptions) -> ValidationReport {
    let mut report = ValidationReport::default();
    for s in samples {
        report.add(s, opts);
    }
    report
}
