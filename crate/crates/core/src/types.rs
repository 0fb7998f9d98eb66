//! Label vocabularies, task sets and the sample record shared by every crate.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 16;
pub const NUM_PARTS: usize = 15;

macro_rules! vocabulary {
    ($(#[$meta:meta])* $name:ident, $count:expr, [$($variant:ident => $label:expr),+ $(,)?]) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: [$name; $count] = [$($name::$variant),+];

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(index: usize) -> Option<Self> {
                Self::ALL.get(index).copied()
            }

            pub fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

vocabulary!(
    /// The sixteen body joints, in the fixed channel order used by every encoder.
    Joint, NUM_JOINTS, [
        RightAnkle => "R.Ankle",
        RightKnee => "R.Knee",
        RightHip => "R.Hip",
        LeftHip => "L.Hip",
        LeftKnee => "L.Knee",
        LeftAnkle => "L.Ankle",
        Pelvis => "Pelvis",
        Thorax => "Thorax",
        UpperNeck => "Upper Neck",
        HeadTop => "Head Top",
        RightWrist => "R.Wrist",
        RightElbow => "R.Elbow",
        RightShoulder => "R.Shoulder",
        LeftShoulder => "L.Shoulder",
        LeftElbow => "L.Elbow",
        LeftWrist => "L.Wrist",
    ]
);

vocabulary!(
    /// Body-part labels. Background is label 0.
    Part, NUM_PARTS, [
        Background => "Background",
        Head => "Head",
        Torso => "Torso",
        UpperRightArm => "Upper R.Arm",
        LowerRightArm => "Lower R.Arm",
        RightHand => "R.Hand",
        UpperLeftArm => "Upper L.Arm",
        LowerLeftArm => "Lower L.Arm",
        LeftHand => "L.Hand",
        UpperRightLeg => "Upper R.Leg",
        LowerRightLeg => "Lower R.Leg",
        RightFoot => "R.Feet",
        UpperLeftLeg => "Upper L.Leg",
        LowerLeftLeg => "Lower L.Leg",
        LeftFoot => "L.Feet",
    ]
);

impl FromStr for Joint {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Joint::ALL
            .iter()
            .copied()
            .find(|j| j.name() == s)
            .ok_or_else(|| Error::UnknownJoint(s.to_string()))
    }
}

impl FromStr for Part {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Part::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::UnknownPart(s.to_string()))
    }
}

impl Joint {
    /// The fifteen joints reported in the 3D pose tables (every joint but the pelvis).
    pub fn without_pelvis() -> Vec<Joint> {
        Joint::ALL.iter().copied().filter(|j| *j != Joint::Pelvis).collect()
    }
}

impl Part {
    pub fn is_background(self) -> bool {
        self == Part::Background
    }
}

/// One of the four supervised tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "2d")]
    Pose2D,
    #[serde(rename = "seg")]
    PartSeg,
    #[serde(rename = "depth")]
    Depth,
    #[serde(rename = "3d")]
    Pose3D,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Pose2D,
        TaskKind::PartSeg,
        TaskKind::Depth,
        TaskKind::Pose3D,
    ];

    pub fn token(self) -> &'static str {
        match self {
            TaskKind::Pose2D => "2d",
            TaskKind::PartSeg => "seg",
            TaskKind::Depth => "depth",
            TaskKind::Pose3D => "3d",
        }
    }

    pub fn from_token(token: &str) -> Result<Self> {
        TaskKind::ALL
            .iter()
            .copied()
            .find(|t| t.token() == token)
            .ok_or_else(|| Error::UnknownTask(token.to_string()))
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// A non-empty subset of the four tasks.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskSet(u8);

impl TaskSet {
    pub fn new(tasks: impl IntoIterator<Item = TaskKind>) -> Result<Self> {
        let bits = tasks.into_iter().fold(0u8, |acc, t| acc | t.bit());
        if bits == 0 {
            return Err(Error::EmptyTaskSet);
        }
        Ok(TaskSet(bits))
    }

    pub fn single(task: TaskKind) -> Self {
        TaskSet(task.bit())
    }

    pub fn all() -> Self {
        TaskSet(0b1111)
    }

    /// Every one of the fifteen non-empty task combinations.
    pub fn enumerate() -> Vec<TaskSet> {
        (1u8..16).map(TaskSet).collect()
    }

    pub fn contains(self, task: TaskKind) -> bool {
        self.0 & task.bit() != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        false
    }

    /// Tasks in canonical order (2d, seg, depth, 3d).
    pub fn tasks(self) -> Vec<TaskKind> {
        TaskKind::ALL.iter().copied().filter(|t| self.contains(*t)).collect()
    }

    /// Position of `task` among this set's streams, if present.
    pub fn position(self, task: TaskKind) -> Option<usize> {
        self.tasks().iter().position(|t| *t == task)
    }

    pub fn is_subset_of(self, other: TaskSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn union(self, other: TaskSet) -> TaskSet {
        TaskSet(self.0 | other.0)
    }

    /// Column label in the style of the published comparison tables,
    /// e.g. `2D/3D pose + seg. + depth`.
    pub fn paper_label(self) -> String {
        let mut pieces = Vec::new();
        match (self.contains(TaskKind::Pose2D), self.contains(TaskKind::Pose3D)) {
            (true, true) => pieces.push("2D/3D pose"),
            (true, false) => pieces.push("2D pose"),
            (false, true) => pieces.push("3D pose"),
            (false, false) => {}
        }
        if self.contains(TaskKind::PartSeg) {
            pieces.push("seg.");
        }
        if self.contains(TaskKind::Depth) {
            pieces.push("depth");
        }
        pieces.join(" + ")
    }
}

impl fmt::Display for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tokens: Vec<&str> = self.tasks().iter().map(|t| t.token()).collect();
        f.write_str(&tokens.join("+"))
    }
}

impl fmt::Debug for TaskSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TaskSet({self})")
    }
}

impl FromStr for TaskSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_task_set(s)
    }
}

impl Serialize for TaskSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for TaskSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_task_set(&text).map_err(serde::de::Error::custom)
    }
}

/// Parses a `+`-separated task list such as `2d+seg+depth`.
///
/// Token order is irrelevant and repeated tokens collapse.
pub fn parse_task_set(text: &str) -> Result<TaskSet> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(Error::EmptyTaskSet);
    }
    let tasks = trimmed
        .split('+')
        .map(|token| TaskKind::from_token(token.trim()))
        .collect::<Result<Vec<_>>>()?;
    TaskSet::new(tasks)
}

/// Pinhole intrinsics in pixels of the crop frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        Self { fx, fy, cx, cy }
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx <= width as f64 && self.cy >= 0.0 && self.cy <= height as f64) {
            return Err(Error::InvalidParameter(format!(
                "principal point ({}, {}) outside {width}x{height} image",
                self.cx, self.cy
            )));
        }
        Ok(())
    }

    /// Projects a camera-frame point (mm) to pixel coordinates.
    pub fn project(&self, p: [f64; 3]) -> [f64; 2] {
        [self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy]
    }

    /// Lifts pixel `(u, v)` to the camera-frame point at depth `z`.
    pub fn back_project(&self, u: f64, v: f64, z: f64) -> [f64; 3] {
        [(u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z]
    }
}

/// One annotated human crop.
///
/// `image` is `H × W × 3` with intensities in `[0, 1]`. `depth` is metric
/// depth in millimetres, `+∞` on background pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: Array3<f32>,
    pub joints2d: [[f64; 2]; NUM_JOINTS],
    pub visible: [bool; NUM_JOINTS],
    pub joints3d: [[f64; 3]; NUM_JOINTS],
    pub part_mask: Array2<u8>,
    pub depth: Array2<f32>,
    pub intrinsics: CameraIntrinsics,
    pub subject_id: u32,
    pub frame_id: u64,
}

impl Sample {
    pub fn height(&self) -> usize {
        self.part_mask.nrows()
    }

    pub fn width(&self) -> usize {
        self.part_mask.ncols()
    }

    /// Pixel-space distance between head top and upper neck.
    pub fn head_length(&self) -> f64 {
        let a = self.joints2d[Joint::HeadTop.index()];
        let b = self.joints2d[Joint::UpperNeck.index()];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Minimum and maximum depth over foreground pixels, if any.
    pub fn foreground_depth_range(&self) -> Option<(f64, f64)> {
        let mut range: Option<(f64, f64)> = None;
        for (&label, &d) in self.part_mask.iter().zip(self.depth.iter()) {
            if label != 0 {
                let d = d as f64;
                range = Some(match range {
                    None => (d, d),
                    Some((lo, hi)) => (lo.min(d), hi.max(d)),
                });
            }
        }
        range
    }

    /// Marks joints outside `[0, W) × [0, H)` as invisible.
    pub fn refresh_visibility(&mut self) {
        let (w, h) = (self.width() as f64, self.height() as f64);
        for (vis, p) in self.visible.iter_mut().zip(self.joints2d.iter()) {
            let inside = p[0] >= 0.0 && p[0] < w && p[1] >= 0.0 && p[1] < h;
            *vis = *vis && inside;
        }
    }
}

/// `rows × cols × channels`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TensorShape {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
}

impl TensorShape {
    pub fn new(rows: usize, cols: usize, channels: usize) -> Self {
        Self { rows, cols, channels }
    }

    /// Channel-first dimensions matching the in-memory layout.
    pub fn chw(&self) -> (usize, usize, usize) {
        (self.channels, self.rows, self.cols)
    }
}

impl fmt::Display for TensorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}×{}×{}", self.rows, self.cols, self.channels)
    }
}

/// Output tensor shape of `task` at heatmap resolution `resolution`.
pub fn output_shape(
    task: TaskKind,
    resolution: usize,
    bins: usize,
    joints: usize,
    parts: usize,
) -> Result<TensorShape> {
    if resolution == 0 || bins == 0 || joints == 0 || parts == 0 {
        return Err(Error::InvalidParameter(format!(
            "shape parameters must be positive (resolution={resolution}, bins={bins}, joints={joints}, parts={parts})"
        )));
    }
    let channels = match task {
        TaskKind::Pose2D => joints,
        TaskKind::PartSeg => parts,
        TaskKind::Depth => bins + 1,
        TaskKind::Pose3D => bins * joints,
    };
    Ok(TensorShape::new(resolution, resolution, channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn joint_and_part_vocabularies_round_trip() {
        for (i, j) in Joint::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(j.name().parse::<Joint>().unwrap(), *j);
            assert_eq!(Joint::from_index(i), Some(*j));
        }
        for (i, p) in Part::ALL.iter().enumerate() {
            assert_eq!(p.index(), i);
            assert_eq!(p.name().parse::<Part>().unwrap(), *p);
        }
        assert_eq!(Part::Background.index(), 0);
        assert_eq!(Joint::from_index(16), None);
        assert_eq!(Joint::without_pelvis().len(), 15);
    }

    #[test]
    fn parse_task_set_examples() {
        let a = parse_task_set("2d+seg+depth").unwrap();
        assert_eq!(a.tasks(), vec![TaskKind::Pose2D, TaskKind::PartSeg, TaskKind::Depth]);
        assert_eq!(parse_task_set("depth+2d+seg").unwrap(), a);
        assert_eq!(a.to_string(), "2d+seg+depth");
        assert_eq!(
            parse_task_set("2d+flow"),
            Err(Error::UnknownTask("flow".to_string()))
        );
        assert_eq!(parse_task_set(""), Err(Error::EmptyTaskSet));
        assert_eq!(TaskSet::new(Vec::new()), Err(Error::EmptyTaskSet));
    }

    #[test]
    fn fifteen_task_sets() {
        let all = TaskSet::enumerate();
        assert_eq!(all.len(), 15);
        for ts in &all {
            assert_eq!(parse_task_set(&ts.to_string()).unwrap(), *ts);
        }
    }

    #[test]
    fn paper_labels() {
        let label = |s: &str| parse_task_set(s).unwrap().paper_label();
        assert_eq!(label("seg"), "seg.");
        assert_eq!(label("2d+3d+seg+depth"), "2D/3D pose + seg. + depth");
        assert_eq!(label("3d+seg+depth"), "3D pose + seg. + depth");
        assert_eq!(label("2d+depth"), "2D pose + depth");
    }

    #[test]
    fn output_shape_examples() {
        assert_eq!(
            output_shape(TaskKind::Pose3D, 64, 19, 16, 15).unwrap(),
            TensorShape::new(64, 64, 304)
        );
        assert_eq!(
            output_shape(TaskKind::Depth, 64, 19, 16, 15).unwrap(),
            TensorShape::new(64, 64, 20)
        );
        assert_eq!(
            output_shape(TaskKind::PartSeg, 32, 19, 16, 15).unwrap(),
            TensorShape::new(32, 32, 15)
        );
        assert_eq!(
            output_shape(TaskKind::Pose2D, 64, 19, 16, 15).unwrap(),
            TensorShape::new(64, 64, 16)
        );
        assert!(output_shape(TaskKind::Pose2D, 0, 19, 16, 15).is_err());
    }

    #[test]
    fn projection_round_trip() {
        let k = CameraIntrinsics::new(500.0, 480.0, 128.0, 120.0);
        let p = [120.0, -340.0, 3100.0];
        let uv = k.project(p);
        let back = k.back_project(uv[0], uv[1], p[2]);
        for i in 0..3 {
            assert!((back[i] - p[i]).abs() < 1e-9);
        }
        assert!(k.validate(256, 256).is_ok());
        assert!(CameraIntrinsics::new(-1.0, 1.0, 0.0, 0.0).validate(8, 8).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 300.0, 0.0).validate(256, 256).is_err());
    }

    proptest! {
        #[test]
        fn canonical_order_is_stable(bits in 1u8..16, shuffle in any::<u64>()) {
            let mut tasks: Vec<TaskKind> = TaskKind::ALL.iter().copied().filter(|t| bits & (1 << (*t as u8)) != 0).collect();
            let n = tasks.len();
            tasks.rotate_left((shuffle as usize) % n);
            let text: Vec<&str> = tasks.iter().map(|t| t.token()).collect();
            let ts = parse_task_set(&text.join("+")).unwrap();
            let once = ts.tasks();
            let twice = TaskSet::new(once.clone()).unwrap().tasks();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn channel_counts_ignore_resolution(r1 in 1usize..128, r2 in 1usize..128) {
            for task in TaskKind::ALL {
                let a = output_shape(task, r1, 19, 16, 15).unwrap();
                let b = output_shape(task, r2, 19, 16, 15).unwrap();
                prop_assert_eq!(a.channels, b.channels);
                prop_assert_eq!(a.rows, r1);
                prop_assert_eq!(b.cols, r2);
            }
        }
    }
}
