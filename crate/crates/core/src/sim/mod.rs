//! Closed-loop pursuit world: a scripted or externally driven target, an ego
//! under some [`Controller`], optional perturbations, and recording.

pub mod recording;
pub mod track;

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{body_to_world, world_to_body, Pose2D};
use crate::mpc::{MpcConfig, MpcController};
use crate::perception::{Detection, NoiseModel, Perception, DEFAULT_MAX_RANGE};
use crate::vehicle::{step, ControlCommand, VehicleParams, VehicleState};

pub use recording::{read_recording, write_recording};
pub use track::{ScriptFollower, TargetScript, Track, Waypoint};

pub const COLLISION_RADIUS: f64 = 4.5;
pub const INITIAL_GAP: f64 = 10.0;

/// Everything a controller sees in one frame.
#[derive(Debug, Clone, Copy)]
pub struct Observation {
    pub detection: Detection,
    pub ego: VehicleState,
    pub v_ref: f64,
}

pub trait Controller {
    fn command(&mut self, obs: &Observation) -> Result<ControlCommand>;

    fn reset(&mut self) {}
}

/// MPC on the perceived target, solved in the ego-aligned frame; the
/// target's speed is read directly.
impl Controller for MpcController {
    fn command(&mut self, obs: &Observation) -> Result<ControlCommand> {
        let Some(rel) = obs.detection.pose() else {
            return Ok(ControlCommand::IDLE);
        };
        Ok(self.control_relative(&rel, obs.ego.v, obs.v_ref))
    }

    fn reset(&mut self) {
        MpcController::reset(self)
    }
}

/// Replays whatever command was last pushed from outside.
#[derive(Debug, Clone, Default)]
pub struct ExternalController {
    pub latest: ControlCommand,
}

impl Controller for ExternalController {
    fn command(&mut self, _obs: &Observation) -> Result<ControlCommand> {
        Ok(self.latest)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationConfig {
    pub level: f64,
    /// Frames per schedule window.
    pub period: usize,
    /// Consecutive active frames at the end of each window.
    pub duration: usize,
    pub seed: u64,
}

impl PerturbationConfig {
    pub fn new(level: f64, seed: u64) -> Self {
        Self {
            level,
            period: 40,
            duration: 3,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.period == 0 || self.duration > self.period || !(self.level >= 0.0) {
            return Err(Error::Config(format!("invalid perturbation {self:?}")));
        }
        Ok(())
    }

    pub fn active(&self, frame: usize) -> bool {
        frame % self.period >= self.period - self.duration
    }

    /// External force `2 · level · m`, newtons.
    pub fn force(&self, params: &VehicleParams) -> f64 {
        2.0 * self.level * params.mass
    }
}

/// Push the vehicle's velocity vector by `F/m · dt` along `direction`
/// (radians, world frame).
pub fn perturb_velocity(
    state: &VehicleState,
    cfg: &PerturbationConfig,
    params: &VehicleParams,
    direction: f64,
) -> VehicleState {
    let dv = cfg.force(params) / params.mass * params.dt;
    if dv == 0.0 {
        return *state;
    }
    let (s, c) = state.pose.theta.sin_cos();
    let (ds, dc) = direction.sin_cos();
    let vx = state.v * c + dv * dc;
    let vy = state.v * s + dv * ds;
    let v = vx.hypot(vy);
    let theta = if v > 1e-12 { vy.atan2(vx) } else { state.pose.theta };
    VehicleState {
        pose: Pose2D::new(state.pose.x, state.pose.y, theta),
        v,
    }
}

/// [`perturb_velocity`] in a direction drawn uniformly from `[0, 2π)`.
pub fn apply_perturbation(
    state: &VehicleState,
    cfg: &PerturbationConfig,
    params: &VehicleParams,
    rng: &mut impl Rng,
) -> VehicleState {
    let direction = rng.gen_range(0.0..TAU);
    perturb_velocity(state, cfg, params, direction)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    RouteComplete,
    Collision,
    Divergence,
    ManualStop,
    MaxSteps,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::RouteComplete => "route-complete",
            Termination::Collision => "collision",
            Termination::Divergence => "divergence",
            Termination::ManualStop => "manual-stop",
            Termination::MaxSteps => "max-steps",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Termination {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use Termination::*;
        [RouteComplete, Collision, Divergence, ManualStop, MaxSteps]
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "termination",
                name: s.to_string(),
            })
    }
}

/// One simulated frame: states at the start of the frame and the commands
/// applied during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub ego: VehicleState,
    pub target: VehicleState,
    pub command: ControlCommand,
    pub target_command: ControlCommand,
    pub detection: Detection,
    pub perturbed: bool,
}

impl Frame {
    pub fn gap(&self) -> f64 {
        self.ego.distance_to(&self.target)
    }

    pub fn is_finite(&self) -> bool {
        self.ego.is_finite()
            && self.target.is_finite()
            && self.command.throttle.is_finite()
            && self.command.steer.is_finite()
            && self.target_command.throttle.is_finite()
            && self.target_command.steer.is_finite()
            && self.detection.relative_pose.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecording {
    pub dt: f64,
    pub frames: Vec<Frame>,
    pub termination: Termination,
    /// Unvisited part of the target's route when the episode ended before
    /// the target finished its script.
    pub remaining_route: Vec<(f64, f64)>,
}

impl EpisodeRecording {
    pub fn ego_positions(&self) -> Vec<(f64, f64)> {
        self.frames.iter().map(|f| (f.ego.pose.x, f.ego.pose.y)).collect()
    }

    pub fn target_positions(&self) -> Vec<(f64, f64)> {
        self.frames.iter().map(|f| (f.target.pose.x, f.target.pose.y)).collect()
    }

    /// The target's route: its realized trajectory plus anything it still
    /// had to drive.
    pub fn reference_path(&self) -> Vec<(f64, f64)> {
        let mut p = self.target_positions();
        p.extend_from_slice(&self.remaining_route);
        p
    }

    pub fn collided(&self) -> bool {
        self.termination == Termination::Collision
    }
}

/// What drives the target vehicle.
#[derive(Debug, Clone)]
pub enum TargetDriver {
    Script(ScriptFollower),
    /// Latest human command.
    External(ControlCommand),
}

#[derive(Debug, Clone)]
pub struct WorldConfig {
    pub params: VehicleParams,
    pub mpc: MpcConfig,
    pub collision_radius: f64,
    pub max_range: f64,
    pub initial_gap: f64,
    pub max_frames: usize,
    /// Frames the ego gets to settle after the target finishes its script.
    pub settle_frames: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            params: VehicleParams::default(),
            mpc: MpcConfig::default(),
            collision_radius: COLLISION_RADIUS,
            max_range: DEFAULT_MAX_RANGE,
            initial_gap: INITIAL_GAP,
            max_frames: 6000,
            settle_frames: 100,
        }
    }
}

/// Steppable episode; [`run_episode`] drives it to termination, the live
/// server steps it on a wall clock.
pub struct Episode<'c> {
    pub world: WorldConfig,
    pub ego: VehicleState,
    pub target: VehicleState,
    pub driver: TargetDriver,
    controller: &'c mut dyn Controller,
    perception: Perception,
    perturb: Option<PerturbationConfig>,
    perturb_rng: ChaCha8Rng,
    frame: usize,
    settled_for: usize,
    pub frames: Vec<Frame>,
    pub termination: Option<Termination>,
}

impl<'c> Episode<'c> {
    pub fn new(
        world: WorldConfig,
        driver: TargetDriver,
        start: Pose2D,
        controller: &'c mut dyn Controller,
        noise: NoiseModel,
        perturb: Option<PerturbationConfig>,
    ) -> Result<Self> {
        world.params.validate()?;
        world.mpc.validate(&world.params)?;
        if let Some(p) = &perturb {
            p.validate()?;
        }
        let target = VehicleState { pose: start, v: 0.0 };
        let ego = VehicleState {
            pose: body_to_world(&start, &Pose2D::new(0.0, -world.initial_gap, 0.0)),
            v: 0.0,
        };
        controller.reset();
        Ok(Self {
            perturb_rng: ChaCha8Rng::seed_from_u64(perturb.map_or(0, |p| p.seed)),
            perception: Perception::new(noise)?,
            world,
            ego,
            target,
            driver,
            controller,
            perturb,
            frame: 0,
            settled_for: 0,
            frames: Vec::new(),
            termination: None,
        })
    }

    pub fn for_track(
        world: WorldConfig,
        track: &TargetScript,
        controller: &'c mut dyn Controller,
        noise: NoiseModel,
        perturb: Option<PerturbationConfig>,
    ) -> Result<Self> {
        let start = track.start_pose();
        Self::new(
            world,
            TargetDriver::Script(ScriptFollower::new(track.clone())),
            start,
            controller,
            noise,
            perturb,
        )
    }

    pub fn frame_index(&self) -> usize {
        self.frame
    }

    pub fn set_perturbation(&mut self, perturb: Option<PerturbationConfig>) {
        self.perturb = perturb;
    }

    pub fn gap(&self) -> f64 {
        self.ego.distance_to(&self.target)
    }

    /// Advance one frame. Returns the termination reason once reached.
    pub fn step(&mut self) -> Option<Termination> {
        if self.termination.is_some() {
            return self.termination;
        }
        let p = self.world.params;
        let target_command = match &mut self.driver {
            TargetDriver::Script(f) => f.step(&self.target, &p),
            TargetDriver::External(u) => *u,
        };

        let truth = world_to_body(&self.ego.pose, &self.target.pose);
        let detection = crate::perception::prune(&[self.perception.observe(&truth)], self.world.max_range);
        let obs = Observation {
            detection,
            ego: self.ego,
            v_ref: self.target.v,
        };
        let command = match self.controller.command(&obs) {
            Ok(u) if u.throttle.is_finite() && u.steer.is_finite() => {
                ControlCommand::saturate(u.throttle, u.steer)
            }
            Ok(_) | Err(_) => {
                log::warn!("controller failed at frame {}", self.frame);
                return self.finish(Termination::ManualStop);
            }
        };

        let perturbed = self.perturb.is_some_and(|c| c.level > 0.0 && c.active(self.frame));
        self.frames.push(Frame {
            t: self.frame as f64 * p.dt,
            ego: self.ego,
            target: self.target,
            command,
            target_command,
            detection,
            perturbed,
        });

        self.target = step(&self.target, &target_command, &p);
        self.ego = step(&self.ego, &command, &p);
        if perturbed {
            let cfg = self.perturb.expect("active implies configured");
            self.ego = apply_perturbation(&self.ego, &cfg, &p, &mut self.perturb_rng);
        }
        self.frame += 1;

        let gap = self.gap();
        if gap < self.world.collision_radius {
            return self.finish(Termination::Collision);
        }
        if gap > self.world.max_range {
            return self.finish(Termination::Divergence);
        }
        if let TargetDriver::Script(f) = &self.driver {
            if f.finished() {
                self.settled_for += 1;
                if self.settled_for >= self.world.settle_frames && self.ego.v < 0.1 {
                    return self.finish(Termination::RouteComplete);
                }
            }
        }
        if self.frame >= self.world.max_frames {
            return self.finish(Termination::MaxSteps);
        }
        None
    }

    pub fn stop(&mut self) -> Termination {
        self.finish(Termination::ManualStop).expect("just set")
    }

    fn finish(&mut self, reason: Termination) -> Option<Termination> {
        self.termination = Some(reason);
        Some(reason)
    }

    pub fn into_recording(self) -> EpisodeRecording {
        let remaining_route = match &self.driver {
            TargetDriver::Script(f) if !f.finished() => f.script.remaining(f.progress(), 1.0),
            _ => Vec::new(),
        };
        EpisodeRecording {
            dt: self.world.params.dt,
            frames: self.frames,
            termination: self.termination.unwrap_or(Termination::ManualStop),
            remaining_route,
        }
    }
}

/// Run a scripted-target episode to termination.
pub fn run_episode(
    world: &WorldConfig,
    track: &TargetScript,
    controller: &mut dyn Controller,
    noise: NoiseModel,
    perturb: Option<PerturbationConfig>,
) -> Result<EpisodeRecording> {
    let mut ep = Episode::for_track(world.clone(), track, controller, noise, perturb)?;
    while ep.step().is_none() {}
    Ok(ep.into_recording())
}

/// Convenience: an MPC controller for `world`.
pub fn mpc_controller(world: &WorldConfig) -> MpcController {
    MpcController::new(world.mpc, world.params)
}
