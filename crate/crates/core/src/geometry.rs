//! Planar poses, angle wrapping and the pinhole camera model.
//!
//! Frame conventions used throughout the crate:
//!
//! - World frame: x east, y north, heading `theta` measured counter-clockwise
//!   from the world x axis.
//! - Vehicle body frame: y is longitudinal (forward), x is lateral (positive
//!   to the right), heading is the counter-clockwise yaw relative to the
//!   vehicle's own forward axis. A target driving straight ahead of the ego
//!   with the same heading sits at `(0, d, 0)`.
//! - Camera frame: z forward along the optical axis, x right, y down.
//!
//! Body-frame coordinates compose with the ordinary SE(2) product, so
//! [`compose`] and [`inverse`] apply to world poses and body poses alike.

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Wrap an angle into `[-π, π]`. The tie at `±π` resolves to `+π`.
pub fn wrap_angle(theta: f64) -> Result<f64> {
    if !theta.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(theta))
}

/// Infallible wrap for values already known to be finite.
#[inline]
pub(crate) fn wrap(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return if theta == -PI { PI } else { theta };
    }
    let r = (theta + PI).rem_euclid(TWO_PI) - PI;
    if r <= -PI {
        PI
    } else {
        r
    }
}

/// Planar rigid-body pose. `theta` is always stored wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose2D {
    pub const IDENTITY: Pose2D = Pose2D {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self {
            x,
            y,
            theta: wrap(theta),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite()
    }

    /// Euclidean norm of the translation part.
    pub fn range(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Apply this pose as a transform to a point.
    pub fn transform_point(&self, px: f64, py: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (self.x + c * px - s * py, self.y + s * px + c * py)
    }
}

impl fmt::Display for Pose2D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.4}, {:.4}, {:.4})", self.x, self.y, self.theta)
    }
}

/// SE(2) product: the frame `b` expressed in `a`'s parent frame.
pub fn compose(a: &Pose2D, b: &Pose2D) -> Pose2D {
    let (x, y) = a.transform_point(b.x, b.y);
    Pose2D::new(x, y, a.theta + b.theta)
}

pub fn inverse(p: &Pose2D) -> Pose2D {
    let (s, c) = p.theta.sin_cos();
    Pose2D::new(-(c * p.x + s * p.y), s * p.x - c * p.y, -p.theta)
}

/// Re-express a target pose given in the on-trajectory ego body frame in the
/// frame of an ego displaced by `offset` (the displaced ego's pose in the
/// original body frame). The transform from the original frame into the
/// displaced one is `inverse(offset)`.
pub fn relative_target_pose(offset: &Pose2D, target_in_ego: &Pose2D) -> Pose2D {
    compose(&inverse(offset), target_in_ego)
}

/// Pose of `target` (world) expressed in the body frame of `ego` (world).
pub fn world_to_body(ego: &Pose2D, target: &Pose2D) -> Pose2D {
    let dx = target.x - ego.x;
    let dy = target.y - ego.y;
    let (s, c) = ego.theta.sin_cos();
    Pose2D::new(dx * s - dy * c, dx * c + dy * s, target.theta - ego.theta)
}

/// Inverse of [`world_to_body`]: a body-frame pose relative to `ego` in world
/// coordinates.
pub fn body_to_world(ego: &Pose2D, body: &Pose2D) -> Pose2D {
    let (s, c) = ego.theta.sin_cos();
    // right = (s, -c), forward = (c, s)
    Pose2D::new(
        ego.x + body.x * s + body.y * c,
        ego.y - body.x * c + body.y * s,
        ego.theta + body.theta,
    )
}

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    /// 90° horizontal field of view, principal point at the image center.
    pub fn wide(width: usize, height: usize) -> Self {
        let f = width as f64 / 2.0;
        Self {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidIntrinsics)
        }
    }
}

/// A point in the camera frame (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3D {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

pub fn backproject(u: f64, v: f64, depth: f64, k: &CameraIntrinsics) -> Result<Point3D> {
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(Error::VoidDepth);
    }
    Ok(Point3D {
        x: (u - k.cx) * depth / k.fx,
        y: (v - k.cy) * depth / k.fy,
        z: depth,
    })
}

/// Project onto the image plane. The pixel may fall outside the image; the
/// caller culls.
pub fn project(p: &Point3D, k: &CameraIntrinsics) -> Result<((f64, f64), f64)> {
    if !(p.z > 0.0) {
        return Err(Error::BehindCamera);
    }
    Ok(((k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy), p.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn assert_pose(a: Pose2D, b: Pose2D, tol: f64) {
        assert_abs_diff_eq!(a.x, b.x, epsilon = tol);
        assert_abs_diff_eq!(a.y, b.y, epsilon = tol);
        assert_abs_diff_eq!(wrap(a.theta - b.theta), 0.0, epsilon = tol);
    }

    #[test]
    fn compose_examples() {
        let p = Pose2D::new(1.5, -2.0, 0.3);
        assert_eq!(compose(&Pose2D::IDENTITY, &p), p);
        assert_pose(
            compose(&Pose2D::new(1.0, 0.0, 0.0), &Pose2D::new(0.0, 2.0, 0.0)),
            Pose2D::new(1.0, 2.0, 0.0),
            1e-15,
        );
        assert_pose(
            compose(&Pose2D::new(0.0, 0.0, PI / 2.0), &Pose2D::new(1.0, 0.0, 0.0)),
            Pose2D::new(0.0, 1.0, PI / 2.0),
            1e-15,
        );
    }

    #[test]
    fn inverse_examples() {
        assert_pose(inverse(&Pose2D::IDENTITY), Pose2D::IDENTITY, 0.0);
        assert_pose(inverse(&Pose2D::new(1.0, 0.0, 0.0)), Pose2D::new(-1.0, 0.0, 0.0), 0.0);
        assert_pose(
            inverse(&Pose2D::new(0.0, 0.0, PI / 2.0)),
            Pose2D::new(0.0, 0.0, -PI / 2.0),
            1e-15,
        );
    }

    #[test]
    fn relative_target_examples() {
        let target = Pose2D::new(0.0, 8.0, 0.0);
        assert_eq!(relative_target_pose(&Pose2D::IDENTITY, &target), target);
        assert_pose(
            relative_target_pose(&Pose2D::new(1.0, 0.0, 0.0), &target),
            Pose2D::new(-1.0, 8.0, 0.0),
            1e-12,
        );
        assert_pose(
            relative_target_pose(&Pose2D::new(0.0, 0.0, PI / 2.0), &target),
            Pose2D::new(8.0, 0.0, -PI / 2.0),
            1e-12,
        );
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(wrap_angle(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI).unwrap(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(-3.5 * PI).unwrap(), 0.5 * PI, epsilon = 1e-12);
        assert_eq!(wrap_angle(PI).unwrap(), PI);
        assert_eq!(wrap_angle(-PI).unwrap(), PI);
        assert!(wrap_angle(f64::NAN).is_err());
        assert!(wrap_angle(f64::INFINITY).is_err());
    }

    #[test]
    fn body_frame_round_trip() {
        let ego = Pose2D::new(3.0, -1.0, 0.7);
        let ahead = body_to_world(&ego, &Pose2D::new(0.0, 8.0, 0.0));
        assert_abs_diff_eq!(ahead.x, 3.0 + 8.0 * 0.7f64.cos(), epsilon = 1e-12);
        assert_abs_diff_eq!(ahead.y, -1.0 + 8.0 * 0.7f64.sin(), epsilon = 1e-12);
        // A point to the right of a north-facing vehicle lies east.
        let north = Pose2D::new(0.0, 0.0, PI / 2.0);
        let right = body_to_world(&north, &Pose2D::new(2.0, 0.0, 0.0));
        assert_abs_diff_eq!(right.x, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(right.y, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pinhole_examples() {
        let k = CameraIntrinsics::wide(1200, 352);
        let p = backproject(k.cx, k.cy, 5.0, &k).unwrap();
        assert_eq!(p, Point3D::new(0.0, 0.0, 5.0));
        let p = backproject(k.cx + k.fx, k.cy, 2.0, &k).unwrap();
        assert_eq!(p, Point3D::new(2.0, 0.0, 2.0));
        let ((u, v), d) = project(&Point3D::new(2.0, 0.0, 2.0), &k).unwrap();
        assert_eq!((u, v, d), (k.cx + k.fx, k.cy, 2.0));
        assert!(matches!(
            project(&Point3D::new(1.0, 1.0, 0.0), &k),
            Err(Error::BehindCamera)
        ));
        assert!(matches!(backproject(1.0, 1.0, 0.0, &k), Err(Error::VoidDepth)));
        assert!(CameraIntrinsics::new(-1.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }

    fn pose() -> impl Strategy<Value = Pose2D> {
        (-50.0..50.0f64, -50.0..50.0f64, -10.0..10.0f64).prop_map(|(x, y, t)| Pose2D::new(x, y, t))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn group_axioms(a in pose(), b in pose(), c in pose()) {
            let l = compose(&compose(&a, &b), &c);
            let r = compose(&a, &compose(&b, &c));
            assert_pose(l, r, 1e-9);
            assert_pose(compose(&a, &inverse(&a)), Pose2D::IDENTITY, 1e-12);
            assert_pose(compose(&inverse(&a), &a), Pose2D::IDENTITY, 1e-12);
            prop_assert_eq!(relative_target_pose(&Pose2D::IDENTITY, &a), a);
        }

        #[test]
        fn wrap_is_idempotent_and_periodic(t in -1e4..1e4f64, n in -20i32..20) {
            let w = wrap_angle(t).unwrap();
            prop_assert!((-PI..=PI).contains(&w));
            prop_assert_eq!(wrap_angle(w).unwrap(), w);
            let shifted = wrap_angle(t + n as f64 * TWO_PI).unwrap();
            prop_assert!(wrap(shifted - w).abs() < 1e-9);
        }

        #[test]
        fn world_body_round_trip(ego in pose(), t in pose()) {
            let b = world_to_body(&ego, &t);
            assert_pose(body_to_world(&ego, &b), t, 1e-9);
        }

        #[test]
        fn pinhole_round_trip(u in 0.0..1200.0f64, v in 0.0..352.0f64, d in 0.1..200.0f64) {
            let k = CameraIntrinsics::wide(1200, 352);
            let p = backproject(u, v, d, &k).unwrap();
            let ((u2, v2), d2) = project(&p, &k).unwrap();
            prop_assert!((u2 - u).abs() < 1e-9 && (v2 - v).abs() < 1e-9);
            prop_assert!((d2 - d).abs() < 1e-12);
        }
    }
}
