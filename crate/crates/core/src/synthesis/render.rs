//! Analytic ray-cast renderer for checkerboard ground plus boxes. It provides
//! both the source views for warping and the ground truth to compare
//! warped views against.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::{DepthImage, RgbImage};
use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, Pose2D};

/// World-axis-aligned box resting on the ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneBox {
    /// Footprint center.
    pub x: f64,
    pub y: f64,
    /// Extent along world x, world y and z.
    pub size_x: f64,
    pub size_y: f64,
    pub height: f64,
    pub color: [u8; 3],
}

impl SceneBox {
    /// Slab-test entry distance of the ray, if it hits.
    fn hit(&self, o: [f64; 3], d: [f64; 3]) -> Option<f64> {
        let lo = [self.x - self.size_x / 2.0, self.y - self.size_y / 2.0, 0.0];
        let hi = [self.x + self.size_x / 2.0, self.y + self.size_y / 2.0, self.height];
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            if d[a] == 0.0 {
                if o[a] < lo[a] || o[a] > hi[a] {
                    return None;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo[a] - o[a]) / d[a], (hi[a] - o[a]) / d[a]);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub tile_size: f64,
    pub tile_colors: [[u8; 3]; 2],
    pub boxes: Vec<SceneBox>,
    pub target: SceneBox,
    /// Radius of the ground disc around the world origin; beyond it is sky.
    pub ground_range: f64,
}

/// Camera height above the ground, meters.
pub const CAMERA_HEIGHT: f64 = 1.6;

/// Fixed body-to-camera mounting: camera `forward` meters ahead of the body
/// origin at `height`, looking along body +y; camera x = body x (right),
/// camera y = down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraMount {
    pub height: f64,
    pub forward: f64,
}

impl Default for CameraMount {
    fn default() -> Self {
        Self {
            height: CAMERA_HEIGHT,
            forward: 0.0,
        }
    }
}

pub fn default_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::wide(super::image::SOURCE_WIDTH, super::image::SOURCE_HEIGHT)
}

impl SyntheticScene {
    /// Empty ground with the target box `gap` meters ahead of a camera at the
    /// origin facing +y.
    pub fn empty(gap: f64) -> Self {
        Self {
            tile_size: 2.0,
            tile_colors: [[200, 200, 200], [70, 90, 70]],
            boxes: Vec::new(),
            target: SceneBox {
                x: 0.0,
                y: gap,
                size_x: 2.0,
                size_y: 4.5,
                height: 1.5,
                color: [200, 30, 30],
            },
            ground_range: 40.0,
        }
    }

    /// Random clutter in front of a camera at the origin facing +y.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::empty(rng.gen_range(8.0..16.0));
        s.target.x = rng.gen_range(-1.5..1.5);
        for _ in 0..8 {
            let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            s.boxes.push(SceneBox {
                x: side * rng.gen_range(4.0..14.0),
                y: rng.gen_range(6.0..36.0),
                size_x: rng.gen_range(1.0..4.0),
                size_y: rng.gen_range(1.0..4.0),
                height: rng.gen_range(1.0..4.0),
                color: [rng.gen(), rng.gen(), rng.gen()],
            });
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        for b in self.boxes.iter().chain(std::iter::once(&self.target)) {
            if !(b.size_x > 0.0 && b.size_y > 0.0 && b.height > 0.0) {
                return Err(Error::Config("box dimensions must be positive".into()));
            }
        }
        if !(self.tile_size > 0.0) {
            return Err(Error::Config("tile size must be positive".into()));
        }
        Ok(())
    }

    /// Color and optical-axis depth of the first surface along the ray.
    fn trace(&self, o: [f64; 3], d: [f64; 3]) -> Option<([u8; 3], f64)> {
        let mut best: Option<([u8; 3], f64)> = None;
        if d[2] < 0.0 {
            let t = -o[2] / d[2];
            let (gx, gy) = (o[0] + t * d[0], o[1] + t * d[1]);
            if gx.hypot(gy) <= self.ground_range {
                let k = (gx / self.tile_size).floor() as i64 + (gy / self.tile_size).floor() as i64;
                best = Some((self.tile_colors[k.rem_euclid(2) as usize], t));
            }
        }
        for b in self.boxes.iter().chain(std::iter::once(&self.target)) {
            if let Some(t) = b.hit(o, d) {
                if best.map_or(true, |(_, bt)| t < bt) {
                    best = Some((b.color, t));
                }
            }
        }
        best
    }
}

/// Render the scene from a camera mounted on a body at `pose` (world).
/// Sky pixels are black with infinite depth.
pub fn render_scene(
    scene: &SyntheticScene,
    pose: &Pose2D,
    mount: &CameraMount,
    k: &CameraIntrinsics,
) -> Result<(RgbImage, DepthImage)> {
    k.validate()?;
    scene.validate()?;
    if !(mount.height > 0.0) {
        return Err(Error::Config("camera must be above the ground".into()));
    }
    let (s, c) = pose.theta.sin_cos();
    let forward = [c, s, 0.0];
    let right = [s, -c, 0.0];
    let origin = [pose.x + mount.forward * c, pose.y + mount.forward * s, mount.height];
    let mut rgb = RgbImage::new(k.width, k.height);
    let mut depth = DepthImage::new(k.width, k.height);
    for v in 0..k.height {
        let dy = (v as f64 - k.cy) / k.fy;
        for u in 0..k.width {
            let dx = (u as f64 - k.cx) / k.fx;
            // Camera ray (dx, dy, 1): z = 1 makes the hit parameter the depth.
            let d = [
                dx * right[0] + forward[0],
                dx * right[1] + forward[1],
                -dy,
            ];
            if let Some((color, t)) = scene.trace(origin, d) {
                rgb.set(u, v, color);
                depth.data[v * k.width + u] = t as f32;
            }
        }
    }
    Ok((rgb, depth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;

    fn cam() -> Pose2D {
        Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2)
    }

    fn ground_only() -> SyntheticScene {
        let mut s = SyntheticScene::empty(10.0);
        s.target.x = 1000.0;
        s.ground_range = 1e9;
        s
    }

    #[test]
    fn ground_depth_grows_toward_horizon() {
        let k = default_intrinsics();
        let (rgb, depth) = render_scene(&ground_only(), &cam(), &CameraMount::default(), &k).unwrap();
        let col = k.width / 2;
        // Above the horizon: sky.
        assert!(depth.get(col, 10).is_infinite());
        assert_eq!(rgb.get(col, 10), [0, 0, 0]);
        let mut last = 0.0;
        for v in (k.cy as usize + 1..k.height).rev() {
            let d = depth.get(col, v);
            assert!(d.is_finite() && d > last);
            last = d;
        }
        let bottom = k.height - 1;
        assert!(ground_only().tile_colors.contains(&rgb.get(col, bottom)));
    }

    #[test]
    fn moving_forward_shrinks_depth() {
        let k = default_intrinsics();
        let m = CameraMount::default();
        let mut s = ground_only();
        s.target.x = 0.0;
        s.target.y = 20.0 + s.target.size_y / 2.0;
        s.target.height = 3.0;
        let (_, d0) = render_scene(&s, &cam(), &m, &k).unwrap();
        let (_, d1) = render_scene(&s, &Pose2D::new(0.0, 1.0, cam().theta), &m, &k).unwrap();
        let (col, row) = (k.width / 2, k.cy as usize);
        assert!((d0.get(col, row) - 20.0).abs() < 1e-5);
        assert!((d0.get(col, row) - d1.get(col, row) - 1.0).abs() < 1e-5);
        // Ground rows clear of the box: ray-plane depth = h·fy/(v − cy).
        for v in [200, 250, 300, 351] {
            let expected = 1.6 * k.fy / (v as f64 - k.cy);
            assert!((d0.get(100, v) as f64 - expected).abs() < 1e-4 * expected);
        }
    }

    #[test]
    fn box_width_matches_pinhole() {
        let k = default_intrinsics();
        let mut s = ground_only();
        s.target = SceneBox {
            x: 0.0,
            y: 8.0 + 0.5,
            size_x: 2.0,
            size_y: 1.0,
            height: 3.0,
            color: [255, 0, 0],
        };
        let (rgb, depth) = render_scene(&s, &cam(), &CameraMount::default(), &k).unwrap();
        let row = k.cy as usize;
        let span = (0..k.width).filter(|&u| rgb.get(u, row) == [255, 0, 0]).count() as f64;
        let expected = k.fx * 2.0 / 8.0;
        assert!((span - expected).abs() <= 1.0, "{span} vs {expected}");
        assert!((depth.get(k.width / 2, row) - 8.0).abs() < 1e-5);
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let mut k = default_intrinsics();
        k.fx = 0.0;
        assert!(render_scene(&ground_only(), &cam(), &CameraMount::default(), &k).is_err());
        let k = default_intrinsics();
        assert!(render_scene(&ground_only(), &cam(), &CameraMount { height: 0.0, forward: 0.0 }, &k).is_err());
    }
}
