//! Kinematic vehicle model shared by the MPC rollout and the simulator.

use crate::error::{Error, Result};
use crate::geometry::{wrap, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub pose: Pose2D,
    /// Forward speed, m/s. Never negative.
    pub v: f64,
}

impl VehicleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        Self {
            pose: Pose2D::new(x, y, theta),
            v: v.max(0.0),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.is_finite() && self.v.is_finite()
    }

    pub fn distance_to(&self, other: &VehicleState) -> f64 {
        (self.pose.x - other.pose.x).hypot(self.pose.y - other.pose.y)
    }
}

/// Throttle in `[0, 1]`, steer in `[-1, 1]` (positive turns left).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub throttle: f64,
    pub steer: f64,
}

impl ControlCommand {
    pub const IDLE: ControlCommand = ControlCommand {
        throttle: 0.0,
        steer: 0.0,
    };

    /// Clamp raw values into the actuator range.
    pub fn clamp(raw_throttle: f64, raw_steer: f64) -> Result<Self> {
        if raw_throttle.is_nan() || raw_steer.is_nan() {
            return Err(Error::NonFinite("control"));
        }
        Ok(Self::saturate(raw_throttle, raw_steer))
    }

    /// Clamp for values known not to be NaN.
    #[inline]
    pub(crate) fn saturate(raw_throttle: f64, raw_steer: f64) -> Self {
        Self {
            throttle: raw_throttle.clamp(0.0, 1.0),
            steer: raw_steer.clamp(-1.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VehicleParams {
    /// Length `l` in the heading update, meters.
    pub length: f64,
    /// Mass in kg; only used to turn perturbation forces into accelerations.
    pub mass: f64,
    /// Per-step fractional speed loss.
    pub drag_coeff: f64,
    /// Acceleration at full throttle, m/s².
    pub accel_gain: f64,
    /// Wheel angle at full steer, radians.
    pub steer_gain: f64,
    pub dt: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            length: 4.0,
            mass: 1500.0,
            drag_coeff: 0.05,
            accel_gain: 20.0,
            steer_gain: 1.22,
            dt: 0.05,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.length > 0.0
            && self.mass > 0.0
            && self.dt > 0.0
            && (0.0..1.0).contains(&self.drag_coeff)
            && self.accel_gain.is_finite()
            && self.steer_gain.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid vehicle params {self:?}")))
        }
    }

    /// Speed reached under constant full throttle.
    pub fn terminal_speed(&self) -> f64 {
        self.accel_gain * self.dt / self.drag_coeff
    }

    /// Throttle that holds speed `v` constant.
    pub fn holding_throttle(&self, v: f64) -> f64 {
        (self.drag_coeff * v / (self.accel_gain * self.dt)).clamp(0.0, 1.0)
    }
}

/// Advance one control period.
#[inline]
pub fn step(state: &VehicleState, cmd: &ControlCommand, params: &VehicleParams) -> VehicleState {
    let VehicleState { pose, v } = *state;
    let (s, c) = pose.theta.sin_cos();
    let accel = params.accel_gain * cmd.throttle;
    let wheel = params.steer_gain * cmd.steer;
    VehicleState {
        pose: Pose2D {
            x: pose.x + v * c * params.dt,
            y: pose.y + v * s * params.dt,
            theta: wrap(pose.theta + v * params.dt * wheel / params.length),
        },
        v: (v + accel * params.dt - params.drag_coeff * v).max(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn stationary_fixed_point() {
        let s = VehicleState::new(3.0, 4.0, 0.5, 0.0);
        let p = VehicleParams::default();
        assert_eq!(step(&s, &ControlCommand::IDLE, &p), s);
    }

    #[test]
    fn coasting_step() {
        let p = VehicleParams {
            dt: 0.1,
            drag_coeff: 0.05,
            ..Default::default()
        };
        let s = step(&VehicleState::new(0.0, 0.0, 0.0, 10.0), &ControlCommand::IDLE, &p);
        assert_abs_diff_eq!(s.pose.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.v, 9.5, epsilon = 1e-12);
    }

    #[test]
    fn heading_update() {
        // wheel angle 0.1 rad via steer_gain
        let p = VehicleParams {
            dt: 0.1,
            length: 4.0,
            steer_gain: 0.1,
            ..Default::default()
        };
        let cmd = ControlCommand {
            throttle: 0.0,
            steer: 1.0,
        };
        let s = step(&VehicleState::new(0.0, 0.0, 0.0, 10.0), &cmd, &p);
        assert_abs_diff_eq!(s.pose.theta, 0.025, epsilon = 1e-12);
    }

    #[test]
    fn clamp_examples() {
        let c = ControlCommand::clamp(0.5, -0.2).unwrap();
        assert_eq!((c.throttle, c.steer), (0.5, -0.2));
        let c = ControlCommand::clamp(1.7, -3.0).unwrap();
        assert_eq!((c.throttle, c.steer), (1.0, -1.0));
        let c = ControlCommand::clamp(-0.3, 0.0).unwrap();
        assert_eq!((c.throttle, c.steer), (0.0, 0.0));
        assert!(ControlCommand::clamp(f64::NAN, 0.0).is_err());
        assert!(ControlCommand::clamp(0.0, f64::NAN).is_err());
    }

    #[test]
    fn speed_never_negative() {
        let p = VehicleParams {
            drag_coeff: 0.99,
            ..Default::default()
        };
        let s = step(&VehicleState::new(0.0, 0.0, 0.0, 1e-3), &ControlCommand::IDLE, &p);
        assert!(s.v >= 0.0);
    }

    #[test]
    fn terminal_speed_monotone() {
        let p = VehicleParams::default();
        let vt = p.terminal_speed();
        assert_abs_diff_eq!(vt, 20.0, epsilon = 1e-12);
        let full = ControlCommand {
            throttle: 1.0,
            steer: 0.0,
        };
        let mut s = VehicleState::new(0.0, 0.0, 0.0, 0.0);
        for _ in 0..2000 {
            let n = step(&s, &full, &p);
            assert!(n.v >= s.v);
            assert!(n.v <= vt + 1e-9);
            s = n;
        }
        assert_abs_diff_eq!(s.v, vt, epsilon = 1e-6);
    }

    #[test]
    fn holding_throttle_holds() {
        let p = VehicleParams::default();
        let cmd = ControlCommand {
            throttle: p.holding_throttle(8.0),
            steer: 0.0,
        };
        let s = step(&VehicleState::new(0.0, 0.0, 0.0, 8.0), &cmd, &p);
        assert_abs_diff_eq!(s.v, 8.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn zero_steer_keeps_heading(theta in -3.0..3.0f64, v in 0.0..30.0f64, thr in 0.0..1.0f64) {
            let p = VehicleParams::default();
            let cmd = ControlCommand { throttle: thr, steer: 0.0 };
            let mut s = VehicleState::new(1.0, 2.0, theta, v);
            let h = s.pose.theta;
            for _ in 0..100 {
                s = step(&s, &cmd, &p);
                prop_assert_eq!(s.pose.theta, h);
            }
        }

        #[test]
        fn step_is_deterministic(x in -10.0..10.0f64, v in 0.0..30.0f64, thr in 0.0..1.0f64, st in -1.0..1.0f64) {
            let p = VehicleParams::default();
            let s = VehicleState::new(x, -x, x / 5.0, v);
            let cmd = ControlCommand { throttle: thr, steer: st };
            let a = step(&s, &cmd, &p);
            let b = step(&s, &cmd, &p);
            prop_assert_eq!(a.pose.x.to_bits(), b.pose.x.to_bits());
            prop_assert_eq!(a.pose.y.to_bits(), b.pose.y.to_bits());
            prop_assert_eq!(a.pose.theta.to_bits(), b.pose.theta.to_bits());
            prop_assert_eq!(a.v.to_bits(), b.v.to_bits());
        }
    }
}
