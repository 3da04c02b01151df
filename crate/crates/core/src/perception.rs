//! Noisy relative-pose observer standing in for a 3D detector.
//!
//! Noise is zero-mean Gaussian per component with variance equal to the
//! preset's mean squared error.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry::Pose2D;

pub const DEFAULT_MAX_RANGE: f64 = 40.0;

/// Per-component detection error, as mean squared error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Lateral, m².
    pub mse_x: f64,
    /// Longitudinal, m².
    pub mse_y: f64,
    /// Rotational, rad².
    pub mse_theta: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    Lidar,
    Sgbm,
    Cdn,
    Oracle,
}

impl Preset {
    pub const ALL: [Preset; 4] = [Preset::Lidar, Preset::Sgbm, Preset::Cdn, Preset::Oracle];

    /// `(mse_x, mse_y, mse_theta)`.
    pub fn mse(self) -> (f64, f64, f64) {
        match self {
            Preset::Lidar => (0.18, 0.05, 0.04),
            Preset::Sgbm => (1.50, 3.00, 0.24),
            Preset::Cdn => (4.89, 3.97, 0.77),
            Preset::Oracle => (0.0, 0.0, 0.0),
        }
    }

    pub fn model(self, seed: u64) -> NoiseModel {
        let (mse_x, mse_y, mse_theta) = self.mse();
        NoiseModel {
            mse_x,
            mse_y,
            mse_theta,
            seed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Lidar => "lidar",
            Preset::Sgbm => "sgbm",
            Preset::Cdn => "cdn",
            Preset::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "perception preset",
                name: s.to_string(),
            })
    }
}

impl NoiseModel {
    pub fn oracle() -> Self {
        Preset::Oracle.model(0)
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.mse_x, "mse_x"),
            (self.mse_y, "mse_y"),
            (self.mse_theta, "mse_theta"),
        ] {
            if !v.is_finite() {
                return Err(Error::NonFinite(name));
            }
            if v < 0.0 {
                return Err(Error::Negative(name));
            }
        }
        Ok(())
    }

    pub fn is_oracle(&self) -> bool {
        self.mse_x == 0.0 && self.mse_y == 0.0 && self.mse_theta == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// Target pose in the ego body frame; meaningless when `valid` is false.
    pub relative_pose: Pose2D,
    pub valid: bool,
}

impl Detection {
    pub const INVALID: Detection = Detection {
        relative_pose: Pose2D::IDENTITY,
        valid: false,
    };

    pub fn new(relative_pose: Pose2D) -> Self {
        Self {
            relative_pose,
            valid: true,
        }
    }

    pub fn pose(&self) -> Option<Pose2D> {
        self.valid.then_some(self.relative_pose)
    }
}

/// Seeded observer; one per episode.
#[derive(Debug, Clone)]
pub struct Perception {
    model: NoiseModel,
    rng: ChaCha8Rng,
    noise: [Normal<f64>; 3],
}

impl Perception {
    pub fn new(model: NoiseModel) -> Result<Self> {
        model.validate()?;
        let n = |mse: f64| Normal::new(0.0, mse.sqrt()).map_err(|e| Error::Config(e.to_string()));
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(model.seed),
            noise: [n(model.mse_x)?, n(model.mse_y)?, n(model.mse_theta)?],
            model,
        })
    }

    pub fn model(&self) -> &NoiseModel {
        &self.model
    }

    pub fn observe(&mut self, true_relative: &Pose2D) -> Detection {
        if self.model.is_oracle() {
            return Detection::new(*true_relative);
        }
        let ex = self.noise[0].sample(&mut self.rng);
        let ey = self.noise[1].sample(&mut self.rng);
        let et = self.noise[2].sample(&mut self.rng);
        Detection::new(Pose2D::new(
            true_relative.x + ex,
            true_relative.y + ey,
            true_relative.theta + et,
        ))
    }
}

/// Nearest valid detection within `max_range`, or an invalid detection.
pub fn prune(detections: &[Detection], max_range: f64) -> Detection {
    detections
        .iter()
        .filter(|d| d.valid && d.relative_pose.range() <= max_range)
        .min_by(|a, b| a.relative_pose.range().total_cmp(&b.relative_pose.range()))
        .copied()
        .unwrap_or(Detection::INVALID)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empirical(preset: Preset, n: usize) -> ([f64; 3], [f64; 3]) {
        let truth = Pose2D::new(0.5, 12.0, 0.1);
        let mut p = Perception::new(preset.model(7)).unwrap();
        let mut sq = [0.0; 3];
        let mut sum = [0.0; 3];
        for _ in 0..n {
            let d = p.observe(&truth).relative_pose;
            let r = [
                d.x - truth.x,
                d.y - truth.y,
                crate::geometry::wrap(d.theta - truth.theta),
            ];
            for i in 0..3 {
                sq[i] += r[i] * r[i];
                sum[i] += r[i];
            }
        }
        (sq.map(|s| s / n as f64), sum.map(|s| s / n as f64))
    }

    #[test]
    fn oracle_is_identity() {
        let mut p = Perception::new(NoiseModel::oracle()).unwrap();
        let t = Pose2D::new(1.25, 9.5, -0.3);
        for _ in 0..10 {
            assert_eq!(p.observe(&t), Detection::new(t));
        }
    }

    #[test]
    fn lidar_lateral_mse() {
        let (mse, _) = empirical(Preset::Lidar, 100_000);
        assert!((0.162..=0.198).contains(&mse[0]), "{mse:?}");
    }

    #[test]
    fn sgbm_longitudinal_mse() {
        let (mse, _) = empirical(Preset::Sgbm, 100_000);
        assert!((2.70..=3.30).contains(&mse[1]), "{mse:?}");
    }

    #[test]
    fn noise_is_unbiased() {
        let n = 100_000;
        let (mse, mean) = empirical(Preset::Cdn, n);
        for i in 0..3 {
            let bound = 3.0 * (mse[i] / n as f64).sqrt();
            assert!(mean[i].abs() < bound, "component {i}: {} vs {bound}", mean[i]);
        }
    }

    #[test]
    fn same_seed_same_stream() {
        let t = Pose2D::new(0.0, 10.0, 0.0);
        let mut a = Perception::new(Preset::Sgbm.model(3)).unwrap();
        let mut b = Perception::new(Preset::Sgbm.model(3)).unwrap();
        let mut c = Perception::new(Preset::Sgbm.model(4)).unwrap();
        let da: Vec<_> = (0..50).map(|_| a.observe(&t)).collect();
        let db: Vec<_> = (0..50).map(|_| b.observe(&t)).collect();
        let dc: Vec<_> = (0..50).map(|_| c.observe(&t)).collect();
        assert_eq!(da, db);
        assert_ne!(da, dc);
    }

    #[test]
    fn invalid_models_rejected() {
        let mut m = Preset::Lidar.model(0);
        m.mse_y = -0.1;
        assert!(Perception::new(m).is_err());
        m.mse_y = f64::NAN;
        assert!(Perception::new(m).is_err());
    }

    #[test]
    fn prune_examples() {
        assert!(!prune(&[], 40.0).valid);
        let near = Detection::new(Pose2D::new(0.0, 10.0, 0.0));
        let far = Detection::new(Pose2D::new(0.0, 50.0, 0.0));
        assert_eq!(prune(&[near], 40.0), near);
        assert_eq!(prune(&[far, near], 40.0), near);
        assert!(!prune(&[far], 40.0).valid);
        assert!(!prune(&[Detection::INVALID], 40.0).valid);
    }

    #[test]
    fn preset_names_round_trip() {
        for p in Preset::ALL {
            assert_eq!(p.name().parse::<Preset>().unwrap(), p);
        }
        assert_eq!("LIDAR".parse::<Preset>().unwrap(), Preset::Lidar);
        assert!("radar".parse::<Preset>().is_err());
    }
}
