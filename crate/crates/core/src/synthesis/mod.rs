//! Off-trajectory augmentation: lateral offset sampling, depth-based view
//! synthesis and relabelling of displaced samples.

pub mod image;
pub mod render;
pub mod warp;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::Result;
use crate::geometry::{relative_target_pose, Pose2D};
use crate::labels::{LabeledSample, Origin};
use crate::mpc::{solve_relative, MpcConfig};
use crate::vehicle::{ControlCommand, VehicleParams};

pub use image::{postprocess, DepthImage, RgbImage, VoidMask};
pub use render::{default_intrinsics, render_scene, CameraMount, SceneBox, SyntheticScene};
pub use warp::{agreement, warp_view};

pub const DEFAULT_N: usize = 30;
pub const LATERAL_SPACING: f64 = 0.2;
pub const LATERAL_JITTER: f64 = 0.05;
/// Variance of the longitudinal offset, m².
pub const Y_OFF_VARIANCE: f64 = 0.66;
/// Variance of the rotational offset, rad².
pub const THETA_OFF_VARIANCE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetSample {
    /// Lateral, m.
    pub x_off: f64,
    /// Longitudinal, m.
    pub y_off: f64,
    pub theta_off: f64,
    /// Lateral grid index in `0..=n`.
    pub k: usize,
    pub epsilon: f64,
    pub n: usize,
}

impl OffsetSample {
    /// The displaced ego's pose in the on-trajectory body frame.
    pub fn pose(&self) -> Pose2D {
        Pose2D::new(self.x_off, self.y_off, self.theta_off)
    }

    /// Center of this sample's lateral band, `k·0.2 − n/10`.
    pub fn lateral_center(&self) -> f64 {
        self.k as f64 * LATERAL_SPACING - self.n as f64 / 10.0
    }
}

/// Draws all `n + 1` lateral positions and drops one uniformly at random, so
/// `n` samples come back together with the dropped index.
pub fn sample_offsets<R: Rng>(rng: &mut R, n: usize) -> (Vec<OffsetSample>, usize) {
    let y_dist = Normal::new(0.0, Y_OFF_VARIANCE.sqrt()).expect("valid std");
    let t_dist = Normal::new(0.0, THETA_OFF_VARIANCE.sqrt()).expect("valid std");
    let mut all: Vec<OffsetSample> = (0..=n)
        .map(|k| {
            let epsilon = rng.gen_range(-LATERAL_JITTER..=LATERAL_JITTER);
            OffsetSample {
                x_off: k as f64 * LATERAL_SPACING - n as f64 / 10.0 + epsilon,
                y_off: y_dist.sample(rng),
                theta_off: t_dist.sample(rng),
                k,
                epsilon,
                n,
            }
        })
        .collect();
    let dropped = *(0..=n).collect::<Vec<_>>().choose(rng).expect("n + 1 > 0");
    all.remove(dropped);
    (all, dropped)
}

/// Relabel an on-trajectory sample for an ego displaced by `offset`: the
/// target's pose is re-expressed in the displaced frame and MPC is re-solved
/// from there. Non-converged solves come back with `converged = false`.
pub fn augment_labels(
    on: &LabeledSample,
    offset: &OffsetSample,
    cfg: &MpcConfig,
    params: &VehicleParams,
) -> LabeledSample {
    augment_labels_warm(on, offset, cfg, params, None).0
}

/// [`augment_labels`] with the solver seeded from `warm`; also returns the
/// solved control sequence.
pub fn augment_labels_warm(
    on: &LabeledSample,
    offset: &OffsetSample,
    cfg: &MpcConfig,
    params: &VehicleParams,
    warm: Option<&[ControlCommand]>,
) -> (LabeledSample, Vec<ControlCommand>) {
    let rel = relative_target_pose(&offset.pose(), &on.rel);
    let sol = solve_relative(&rel, on.v_ego, on.v_ref, cfg, params, warm);
    let sample = LabeledSample {
        frame: on.frame,
        rel,
        v_ego: on.v_ego,
        v_ref: on.v_ref,
        label: sol.command,
        origin: Origin::OffTrajectory {
            x_off: offset.x_off,
            y_off: offset.y_off,
            theta_off: offset.theta_off,
        },
        converged: sol.converged,
    };
    (sample, sol.controls)
}

/// `per_frame` augmented rows for each on-trajectory sample whose frame index
/// is a multiple of `frame_stride`. Within a frame, offsets are solved in
/// lateral order, each warm-started from its neighbour.
pub fn augment_dataset<R: Rng>(
    on: &[LabeledSample],
    per_frame: usize,
    frame_stride: usize,
    rng: &mut R,
    cfg: &MpcConfig,
    params: &VehicleParams,
) -> Result<Vec<LabeledSample>> {
    let stride = frame_stride.max(1);
    let mut out = Vec::new();
    for s in on.iter().filter(|s| s.is_on_trajectory() && s.frame % stride == 0) {
        let (offsets, _) = sample_offsets(rng, per_frame);
        let mut warm: Option<Vec<ControlCommand>> = None;
        for o in &offsets {
            let (a, controls) = augment_labels_warm(s, o, cfg, params, warm.as_deref());
            out.push(a);
            warm = Some(controls);
        }
    }
    Ok(out)
}
