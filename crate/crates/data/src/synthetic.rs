//! Procedural 2.5D articulated figures with exact ground truth.
//!
//! A figure is a kinematic tree of 3D joints in the camera frame. Each of the
//! fourteen body parts is drawn as a tapered capsule between two tree points,
//! with depth interpolated linearly along the capsule axis. The nearest
//! capsule wins each pixel. A square crop around the projected figure sets
//! the final intrinsics, so `joints2d` is the exact pinhole projection of
//! `joints3d`.

use std::f64::consts::PI;

use hgmt_core::{CameraIntrinsics, Joint, Part, Sample, NUM_JOINTS};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the area behind the figure is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundMode {
    Flat,
    Gradient,
    /// Smooth value noise plus a little per-pixel grain.
    #[default]
    Noise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticFigureParams {
    pub seed: u64,
    pub image_size: usize,
    /// Subjects cycle through frame indices; each has fixed proportions.
    pub num_subjects: u32,
    /// Focal length of the uncropped camera, in pixels.
    pub focal_px: f64,
    /// Range of the pelvis depth, in mm.
    pub depth_range_mm: (f64, f64),
    /// Margin added on each side of the figure's bounding box before cropping.
    pub crop_margin: f64,
    /// Multipliers on the nominal limb lengths and widths.
    pub limb_scale: (f64, f64),
    pub width_scale: (f64, f64),
    /// Angle of the upper arm away from the body's down axis, in degrees.
    pub arm_swing_deg: (f64, f64),
    pub leg_swing_deg: (f64, f64),
    /// Elbow and knee flexion, in degrees.
    pub bend_deg: (f64, f64),
    /// Maximum absolute torso lean in the image plane.
    pub lean_deg: f64,
    /// Maximum absolute limb elevation towards or away from the camera.
    pub out_of_plane_deg: f64,
    /// Maximum absolute rotation of the shoulder and hip lines about the torso.
    pub yaw_deg: f64,
    pub background: BackgroundMode,
}

impl Default for SyntheticFigureParams {
    fn default() -> Self {
        Self {
            seed: 0,
            image_size: 256,
            num_subjects: 10,
            focal_px: 1000.0,
            depth_range_mm: (3000.0, 6000.0),
            crop_margin: 0.1,
            limb_scale: (0.9, 1.1),
            width_scale: (0.85, 1.15),
            arm_swing_deg: (10.0, 150.0),
            leg_swing_deg: (0.0, 40.0),
            bend_deg: (0.0, 110.0),
            lean_deg: 20.0,
            out_of_plane_deg: 35.0,
            yaw_deg: 40.0,
            background: BackgroundMode::Noise,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64), min: f64) -> Result<()> {
    if lo.is_finite() && hi.is_finite() && lo >= min && lo <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} = ({lo}, {hi}) must satisfy {min} <= lo <= hi")))
    }
}

impl SyntheticFigureParams {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 8 {
            return Err(Error::InvalidParams(format!("image_size {} is below 8", self.image_size)));
        }
        if self.num_subjects == 0 {
            return Err(Error::InvalidParams("num_subjects must be positive".into()));
        }
        if !(self.focal_px > 0.0) {
            return Err(Error::InvalidParams(format!("focal_px {} must be positive", self.focal_px)));
        }
        if !(self.crop_margin >= 0.0 && self.crop_margin <= 1.0) {
            return Err(Error::InvalidParams(format!("crop_margin {} must lie in [0, 1]", self.crop_margin)));
        }
        check_range("depth_range_mm", self.depth_range_mm, MAX_REACH_MM * self.limb_scale.1.max(1.0) + 100.0)?;
        check_range("limb_scale", self.limb_scale, 0.1)?;
        check_range("width_scale", self.width_scale, 0.1)?;
        check_range("arm_swing_deg", self.arm_swing_deg, 0.0)?;
        check_range("leg_swing_deg", self.leg_swing_deg, 0.0)?;
        check_range("bend_deg", self.bend_deg, 0.0)?;
        for (name, v) in [("lean_deg", self.lean_deg), ("out_of_plane_deg", self.out_of_plane_deg), ("yaw_deg", self.yaw_deg)] {
            if !(v >= 0.0 && v < 90.0) {
                return Err(Error::InvalidParams(format!("{name} = {v} must lie in [0, 90)")));
            }
        }
        Ok(())
    }
}

/// Upper bound on the distance of any figure point from the pelvis, in mm at
/// unit limb scale.
const MAX_REACH_MM: f64 = 1400.0;

/// Extra capsule endpoints that are not joints.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Joint(Joint),
    RightHandTip,
    LeftHandTip,
    RightFootTip,
    LeftFootTip,
}

struct LimbSpec {
    part: Part,
    from: Anchor,
    to: Anchor,
    radius_mm: (f64, f64),
    color: [f32; 3],
}

const LIMBS: [LimbSpec; 14] = {
    use Anchor as A;
    use Joint as J;
    [
        LimbSpec { part: Part::Head, from: A::Joint(J::UpperNeck), to: A::Joint(J::HeadTop), radius_mm: (70.0, 95.0), color: [0.93, 0.78, 0.62] },
        LimbSpec { part: Part::Torso, from: A::Joint(J::Pelvis), to: A::Joint(J::Thorax), radius_mm: (135.0, 150.0), color: [0.20, 0.40, 0.80] },
        LimbSpec { part: Part::UpperRightArm, from: A::Joint(J::RightShoulder), to: A::Joint(J::RightElbow), radius_mm: (50.0, 42.0), color: [0.85, 0.25, 0.25] },
        LimbSpec { part: Part::LowerRightArm, from: A::Joint(J::RightElbow), to: A::Joint(J::RightWrist), radius_mm: (40.0, 32.0), color: [0.95, 0.55, 0.20] },
        LimbSpec { part: Part::RightHand, from: A::Joint(J::RightWrist), to: A::RightHandTip, radius_mm: (30.0, 34.0), color: [0.95, 0.85, 0.30] },
        LimbSpec { part: Part::UpperLeftArm, from: A::Joint(J::LeftShoulder), to: A::Joint(J::LeftElbow), radius_mm: (50.0, 42.0), color: [0.25, 0.75, 0.30] },
        LimbSpec { part: Part::LowerLeftArm, from: A::Joint(J::LeftElbow), to: A::Joint(J::LeftWrist), radius_mm: (40.0, 32.0), color: [0.20, 0.70, 0.70] },
        LimbSpec { part: Part::LeftHand, from: A::Joint(J::LeftWrist), to: A::LeftHandTip, radius_mm: (30.0, 34.0), color: [0.55, 0.90, 0.85] },
        LimbSpec { part: Part::UpperRightLeg, from: A::Joint(J::RightHip), to: A::Joint(J::RightKnee), radius_mm: (75.0, 55.0), color: [0.55, 0.20, 0.60] },
        LimbSpec { part: Part::LowerRightLeg, from: A::Joint(J::RightKnee), to: A::Joint(J::RightAnkle), radius_mm: (52.0, 40.0), color: [0.80, 0.40, 0.75] },
        LimbSpec { part: Part::RightFoot, from: A::Joint(J::RightAnkle), to: A::RightFootTip, radius_mm: (38.0, 36.0), color: [0.40, 0.25, 0.15] },
        LimbSpec { part: Part::UpperLeftLeg, from: A::Joint(J::LeftHip), to: A::Joint(J::LeftKnee), radius_mm: (75.0, 55.0), color: [0.60, 0.60, 0.15] },
        LimbSpec { part: Part::LowerLeftLeg, from: A::Joint(J::LeftKnee), to: A::Joint(J::LeftAnkle), radius_mm: (52.0, 40.0), color: [0.90, 0.70, 0.45] },
        LimbSpec { part: Part::LeftFoot, from: A::Joint(J::LeftAnkle), to: A::LeftFootTip, radius_mm: (38.0, 36.0), color: [0.30, 0.30, 0.30] },
    ]
};

/// Per-subject body proportions, fixed for all frames of a subject.
#[derive(Debug, Clone, PartialEq)]
struct Body {
    torso: f64,
    neck: f64,
    head: f64,
    shoulder_half: f64,
    hip_half: f64,
    upper_arm: f64,
    lower_arm: f64,
    hand: f64,
    upper_leg: f64,
    lower_leg: f64,
    foot: f64,
    width: f64,
    tint: [f32; 3],
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

fn symmetric(rng: &mut ChaCha8Rng, max: f64) -> f64 {
    uniform(rng, (-max, max))
}

impl Body {
    fn draw(params: &SyntheticFigureParams, rng: &mut ChaCha8Rng) -> Self {
        let mut len = |nominal: f64| nominal * uniform(rng, params.limb_scale);
        let (torso, neck, head) = (len(500.0), len(110.0), len(200.0));
        let (shoulder_half, hip_half) = (len(175.0), len(105.0));
        let (upper_arm, lower_arm, hand) = (len(290.0), len(255.0), len(90.0));
        let (upper_leg, lower_leg, foot) = (len(440.0), len(410.0), len(120.0));
        let width = uniform(rng, params.width_scale);
        let tint = [0, 1, 2].map(|_| rng.gen_range(0.8f32..1.0));
        Self { torso, neck, head, shoulder_half, hip_half, upper_arm, lower_arm, hand, upper_leg, lower_leg, foot, width, tint }
    }
}

/// Unit vector at in-plane angle `theta` from the image down axis (+y, with
/// positive angles towards +x) and elevation `phi` towards +z.
fn direction(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.cos() * phi.cos(), phi.sin()]
}

fn offset(p: [f64; 3], len: f64, dir: [f64; 3]) -> [f64; 3] {
    [p[0] + len * dir[0], p[1] + len * dir[1], p[2] + len * dir[2]]
}

/// The figure's 3D joints and the four extremity tips.
#[derive(Debug, Clone, PartialEq)]
struct Skeleton {
    joints: [[f64; 3]; NUM_JOINTS],
    tips: [[f64; 3]; 4],
}

impl Skeleton {
    fn point(&self, a: Anchor) -> [f64; 3] {
        match a {
            Anchor::Joint(j) => self.joints[j.index()],
            Anchor::RightHandTip => self.tips[0],
            Anchor::LeftHandTip => self.tips[1],
            Anchor::RightFootTip => self.tips[2],
            Anchor::LeftFootTip => self.tips[3],
        }
    }

    fn pose(body: &Body, params: &SyntheticFigureParams, rng: &mut ChaCha8Rng) -> Self {
        let deg = PI / 180.0;
        let oop = params.out_of_plane_deg * deg;
        let mut j = [[0.0; 3]; NUM_JOINTS];
        let z = uniform(rng, params.depth_range_mm);
        let pelvis = [symmetric(rng, 100.0), symmetric(rng, 100.0), z];
        // the body's up axis points towards -y, i.e. angle pi
        let up = PI + symmetric(rng, params.lean_deg * deg);
        let down = up - PI;
        let thorax = offset(pelvis, body.torso, direction(up, symmetric(rng, oop / 2.0)));
        let neck = offset(thorax, body.neck, direction(up + symmetric(rng, 15.0 * deg), symmetric(rng, oop / 2.0)));
        let head = offset(neck, body.head, direction(up + symmetric(rng, 20.0 * deg), symmetric(rng, oop / 2.0)));

        // lateral axis towards the figure's right, which faces image -x
        let yaw = symmetric(rng, params.yaw_deg * deg);
        let lateral = [-up.cos() * yaw.cos(), up.sin() * yaw.cos(), yaw.sin()];
        let side = |p: [f64; 3], half: f64, sign: f64| offset(p, sign * half, lateral);

        j[Joint::Pelvis.index()] = pelvis;
        j[Joint::Thorax.index()] = thorax;
        j[Joint::UpperNeck.index()] = neck;
        j[Joint::HeadTop.index()] = head;
        let mut tips = [[0.0; 3]; 4];

        // (shoulder or hip, middle, end, tip index, sign) for right then left
        for (sign, right) in [(1.0, true), (-1.0, false)] {
            let away = -sign;
            let shoulder = side(thorax, body.shoulder_half, sign);
            let a_upper = down + away * uniform(rng, params.arm_swing_deg) * deg;
            let elbow = offset(shoulder, body.upper_arm, direction(a_upper, symmetric(rng, oop)));
            let bend = if rng.gen_bool(0.5) { 1.0 } else { -1.0 } * uniform(rng, params.bend_deg) * deg;
            let a_lower = a_upper + bend;
            let wrist = offset(elbow, body.lower_arm, direction(a_lower, symmetric(rng, oop)));
            let hand_tip = offset(wrist, body.hand, direction(a_lower + symmetric(rng, 20.0 * deg), symmetric(rng, oop)));

            let hip = side(pelvis, body.hip_half, sign);
            let l_upper = down + away * uniform(rng, params.leg_swing_deg) * deg;
            let knee = offset(hip, body.upper_leg, direction(l_upper, symmetric(rng, oop)));
            let l_lower = l_upper - away * uniform(rng, (0.0, params.bend_deg.1.min(90.0))) * deg;
            let ankle = offset(knee, body.lower_leg, direction(l_lower, symmetric(rng, oop)));
            let foot_angle = l_lower + away * uniform(rng, (60.0, 100.0)) * deg;
            let foot_tip = offset(ankle, body.foot, direction(foot_angle, symmetric(rng, oop)));

            if right {
                j[Joint::RightShoulder.index()] = shoulder;
                j[Joint::RightElbow.index()] = elbow;
                j[Joint::RightWrist.index()] = wrist;
                j[Joint::RightHip.index()] = hip;
                j[Joint::RightKnee.index()] = knee;
                j[Joint::RightAnkle.index()] = ankle;
                tips[0] = hand_tip;
                tips[2] = foot_tip;
            } else {
                j[Joint::LeftShoulder.index()] = shoulder;
                j[Joint::LeftElbow.index()] = elbow;
                j[Joint::LeftWrist.index()] = wrist;
                j[Joint::LeftHip.index()] = hip;
                j[Joint::LeftKnee.index()] = knee;
                j[Joint::LeftAnkle.index()] = ankle;
                tips[1] = hand_tip;
                tips[3] = foot_tip;
            }
        }
        Skeleton { joints: j, tips }
    }
}

/// Ground-truth record of one rendered capsule.
#[derive(Debug, Clone, PartialEq)]
pub struct LimbRecord {
    pub part: Part,
    pub from: Anchor,
    pub to: Anchor,
    /// Camera-frame endpoints in mm.
    pub endpoints: [[f64; 3]; 2],
    pub radius_mm: [f64; 2],
}

impl LimbRecord {
    /// Closed depth interval spanned by the endpoints, rounded to `f32`.
    pub fn depth_bounds(&self) -> (f32, f32) {
        let (a, b) = (self.endpoints[0][2] as f32, self.endpoints[1][2] as f32);
        (a.min(b), a.max(b))
    }
}

/// A generated sample together with the generator's internal geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticFigure {
    pub sample: Sample,
    pub limbs: Vec<LimbRecord>,
    /// Index into `limbs` of the capsule that produced each foreground pixel.
    pub owner: Array2<u8>,
    /// Number of rejected poses before this one was accepted.
    pub attempts: u32,
}

const MAX_ATTEMPTS: u32 = 64;
const NO_OWNER: u8 = u8::MAX;

fn subject_rng(seed: u64, subject: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * subject as u64 + 1);
    rng
}

fn frame_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2 * index);
    rng
}

/// Renders frame `index`. Frames are independent, so any subset can be
/// generated in any order or in parallel with identical results.
pub fn generate_figure(params: &SyntheticFigureParams, index: u64) -> Result<SyntheticFigure> {
    params.validate()?;
    let subject = (index % params.num_subjects as u64) as u32;
    let body = Body::draw(params, &mut subject_rng(params.seed, subject));
    let mut rng = frame_rng(params.seed, index);
    for attempt in 0..MAX_ATTEMPTS {
        let skeleton = Skeleton::pose(&body, params, &mut rng);
        let mut fig = render(&skeleton, &body, params, &mut rng);
        if joint_depths_covered(&fig.sample) {
            fig.sample.subject_id = subject;
            fig.sample.frame_id = index;
            fig.attempts = attempt;
            return Ok(fig);
        }
    }
    Err(Error::InvalidParams(format!(
        "no pose with every joint depth inside the rendered depth range after {MAX_ATTEMPTS} attempts (frame {index})"
    )))
}

/// Frames `0..n` of the stream described by `params`.
pub fn generate_synthetic(params: &SyntheticFigureParams, n: usize) -> Result<Vec<Sample>> {
    generate_range(params, 0, n as u64)
}

/// Frames `start..end` of the stream described by `params`.
pub fn generate_range(params: &SyntheticFigureParams, start: u64, end: u64) -> Result<Vec<Sample>> {
    (start..end).map(|i| generate_figure(params, i).map(|f| f.sample)).collect()
}

fn joint_depths_covered(sample: &Sample) -> bool {
    let Some((lo, hi)) = sample.foreground_depth_range() else {
        return false;
    };
    sample.joints3d.iter().zip(sample.visible.iter()).all(|(p, v)| {
        let z = p[2] as f32 as f64;
        !*v || (z >= lo && z <= hi)
    })
}

struct Projected {
    a: [f64; 2],
    b: [f64; 2],
    ra: f64,
    rb: f64,
}

fn render(skeleton: &Skeleton, body: &Body, params: &SyntheticFigureParams, rng: &mut ChaCha8Rng) -> SyntheticFigure {
    let size = params.image_size;
    let f0 = params.focal_px;
    let nominal = CameraIntrinsics::new(f0, f0, 0.0, 0.0);

    let limbs: Vec<LimbRecord> = LIMBS
        .iter()
        .map(|spec| LimbRecord {
            part: spec.part,
            from: spec.from,
            to: spec.to,
            endpoints: [skeleton.point(spec.from), skeleton.point(spec.to)],
            radius_mm: [spec.radius_mm.0 * body.width, spec.radius_mm.1 * body.width],
        })
        .collect();

    // square crop around the projected capsules
    let (mut x_lo, mut y_lo, mut x_hi, mut y_hi) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for limb in &limbs {
        for (p, r) in limb.endpoints.iter().zip(limb.radius_mm) {
            let q = nominal.project(*p);
            let rp = r * f0 / p[2];
            x_lo = x_lo.min(q[0] - rp);
            x_hi = x_hi.max(q[0] + rp);
            y_lo = y_lo.min(q[1] - rp);
            y_hi = y_hi.max(q[1] + rp);
        }
    }
    let side = (x_hi - x_lo).max(y_hi - y_lo) * (1.0 + 2.0 * params.crop_margin);
    let (x0, y0) = ((x_lo + x_hi - side) / 2.0, (y_lo + y_hi - side) / 2.0);
    let s = size as f64 / side;
    let k = CameraIntrinsics::new(f0 * s, f0 * s, -x0 * s, -y0 * s);

    let projected: Vec<Projected> = limbs
        .iter()
        .map(|l| Projected {
            a: k.project(l.endpoints[0]),
            b: k.project(l.endpoints[1]),
            ra: l.radius_mm[0] * k.fx / l.endpoints[0][2],
            rb: l.radius_mm[1] * k.fx / l.endpoints[1][2],
        })
        .collect();

    let mut depth = Array2::<f32>::from_elem((size, size), f32::INFINITY);
    let mut owner = Array2::<u8>::from_elem((size, size), NO_OWNER);
    let mut shade = Array2::<f32>::zeros((size, size));
    for (li, (limb, pr)) in limbs.iter().zip(&projected).enumerate() {
        let rmax = pr.ra.max(pr.rb);
        let c_lo = (pr.a[0].min(pr.b[0]) - rmax).floor().max(0.0) as usize;
        let c_hi = ((pr.a[0].max(pr.b[0]) + rmax).ceil().max(0.0) as usize).min(size);
        let r_lo = (pr.a[1].min(pr.b[1]) - rmax).floor().max(0.0) as usize;
        let r_hi = ((pr.a[1].max(pr.b[1]) + rmax).ceil().max(0.0) as usize).min(size);
        let d = [pr.b[0] - pr.a[0], pr.b[1] - pr.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let (za, zb) = (limb.endpoints[0][2], limb.endpoints[1][2]);
        for r in r_lo..r_hi {
            for c in c_lo..c_hi {
                let p = [c as f64 + 0.5 - pr.a[0], r as f64 + 0.5 - pr.a[1]];
                let t = if len2 > 0.0 { ((p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
                let q = [p[0] - t * d[0], p[1] - t * d[1]];
                let dist = (q[0] * q[0] + q[1] * q[1]).sqrt();
                let radius = pr.ra + t * (pr.rb - pr.ra);
                if dist > radius {
                    continue;
                }
                let z = (za + t * (zb - za)) as f32;
                if z < depth[[r, c]] {
                    depth[[r, c]] = z;
                    owner[[r, c]] = li as u8;
                    shade[[r, c]] = (1.0 - (dist / radius) as f32 * 0.6).max(0.0);
                }
            }
        }
    }

    let part_mask = owner.mapv(|o| if o == NO_OWNER { 0 } else { LIMBS[o as usize].part.index() as u8 });
    let image = paint(&owner, &shade, &depth, body, params.background, rng);

    let mut joints2d = [[0.0; 2]; NUM_JOINTS];
    for (p2, p3) in joints2d.iter_mut().zip(skeleton.joints.iter()) {
        *p2 = k.project(*p3);
    }
    let mut sample = Sample {
        image,
        joints2d,
        visible: [true; NUM_JOINTS],
        joints3d: skeleton.joints,
        part_mask,
        depth,
        intrinsics: k,
        subject_id: 0,
        frame_id: 0,
    };
    sample.refresh_visibility();
    SyntheticFigure { sample, limbs, owner, attempts: 0 }
}

fn paint(
    owner: &Array2<u8>,
    shade: &Array2<f32>,
    depth: &Array2<f32>,
    body: &Body,
    mode: BackgroundMode,
    rng: &mut ChaCha8Rng,
) -> Array3<f32> {
    let (h, w) = owner.dim();
    let base: [f32; 3] = [0, 1, 2].map(|_| rng.gen_range(0.25f32..0.75));
    let grid = 5;
    let lattice: Vec<[f32; 3]> = (0..grid * grid).map(|_| [0, 1, 2].map(|_| rng.gen_range(-0.2f32..0.2))).collect();
    let tilt = [rng.gen_range(-0.3f32..0.3), rng.gen_range(-0.3f32..0.3)];
    let (z_lo, z_hi) = depth.iter().filter(|d| d.is_finite()).fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let z_span = (z_hi - z_lo).max(1.0);

    let mut image = Array3::<f32>::zeros((h, w, 3));
    for r in 0..h {
        for c in 0..w {
            let (u, v) = ((c as f32 + 0.5) / w as f32, (r as f32 + 0.5) / h as f32);
            let grain: f32 = rng.gen_range(-0.03..0.03);
            let o = owner[[r, c]];
            for k in 0..3 {
                let value = if o == NO_OWNER {
                    match mode {
                        BackgroundMode::Flat => base[k],
                        BackgroundMode::Gradient => base[k] + tilt[0] * (u - 0.5) + tilt[1] * (v - 0.5),
                        BackgroundMode::Noise => base[k] + value_noise(&lattice, grid, u, v, k) + grain,
                    }
                } else {
                    let near = 1.0 - 0.3 * (depth[[r, c]] - z_lo) / z_span;
                    LIMBS[o as usize].color[k] * body.tint[k] * (0.4 + 0.6 * shade[[r, c]]) * near + grain
                };
                image[[r, c, k]] = value.clamp(0.0, 1.0);
            }
        }
    }
    image
}

fn value_noise(lattice: &[[f32; 3]], grid: usize, u: f32, v: f32, k: usize) -> f32 {
    let (x, y) = (u * (grid - 1) as f32, v * (grid - 1) as f32);
    let (x0, y0) = ((x.floor() as usize).min(grid - 2), (y.floor() as usize).min(grid - 2));
    let (fx, fy) = (x - x0 as f32, y - y0 as f32);
    let at = |i: usize, j: usize| lattice[j * grid + i][k];
    let top = at(x0, y0) * (1.0 - fx) + at(x0 + 1, y0) * fx;
    let bottom = at(x0, y0 + 1) * (1.0 - fx) + at(x0 + 1, y0 + 1) * fx;
    top * (1.0 - fy) + bottom * fy
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SyntheticFigureParams {
        SyntheticFigureParams { image_size: 64, ..Default::default() }
    }

    #[test]
    fn figures_fill_the_crop() {
        let fig = generate_figure(&small(), 3).unwrap();
        let s = &fig.sample;
        assert_eq!(s.image.dim(), (64, 64, 3));
        assert!(s.visible.iter().all(|v| *v));
        let fg = s.part_mask.iter().filter(|l| **l != 0).count();
        assert!(fg > 64 * 64 / 20, "foreground {fg}");
        let parts: std::collections::BTreeSet<u8> = s.part_mask.iter().copied().collect();
        assert!(parts.len() >= 8, "{parts:?}");
        s.intrinsics.validate(64, 64).unwrap();
    }

    #[test]
    fn subjects_cycle_with_fixed_proportions() {
        let p = small();
        let a = generate_figure(&p, 2).unwrap();
        let b = generate_figure(&p, 12).unwrap();
        assert_eq!(a.sample.subject_id, 2);
        assert_eq!(b.sample.subject_id, 2);
        assert_eq!(a.limbs[0].radius_mm, b.limbs[0].radius_mm);
        assert_ne!(a.sample.joints3d, b.sample.joints3d);
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        for bad in [
            SyntheticFigureParams { limb_scale: (1.2, 1.0), ..small() },
            SyntheticFigureParams { depth_range_mm: (500.0, 900.0), ..small() },
            SyntheticFigureParams { num_subjects: 0, ..small() },
            SyntheticFigureParams { out_of_plane_deg: 90.0, ..small() },
            SyntheticFigureParams { image_size: 4, ..small() },
        ] {
            assert!(matches!(generate_figure(&bad, 0), Err(Error::InvalidParams(_))));
        }
    }
}
