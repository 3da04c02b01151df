//! Scripted target routes and the pure-pursuit driver that follows them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{world_to_body, Pose2D};
use crate::vehicle::{ControlCommand, VehicleParams, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    /// Target speed on the segment starting here, m/s.
    pub speed: f64,
    /// Seconds to stand still at this waypoint; zero means drive through.
    pub dwell: f64,
}

impl Waypoint {
    pub fn new(x: f64, y: f64, speed: f64) -> Self {
        Self {
            x,
            y,
            speed,
            dwell: 0.0,
        }
    }

    pub fn stop(x: f64, y: f64, speed: f64, dwell: f64) -> Self {
        Self { x, y, speed, dwell }
    }
}

/// Ordered waypoints with per-segment speeds. A non-looped script ends with
/// a stop at the final waypoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetScript {
    pub waypoints: Vec<Waypoint>,
    pub looped: bool,
    /// Cumulative arc length at each waypoint.
    arc: Vec<f64>,
}

impl TargetScript {
    pub fn new(waypoints: Vec<Waypoint>, looped: bool) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config("target script needs at least two waypoints".into()));
        }
        let mut arc = vec![0.0];
        for w in waypoints.windows(2) {
            let d = (w[1].x - w[0].x).hypot(w[1].y - w[0].y);
            if d <= 1e-9 {
                return Err(Error::Config("consecutive waypoints coincide".into()));
            }
            arc.push(arc.last().unwrap() + d);
        }
        if waypoints.iter().any(|w| !(w.speed >= 0.0) || !(w.dwell >= 0.0)) {
            return Err(Error::Config("waypoint speeds and dwells must be >= 0".into()));
        }
        Ok(Self {
            waypoints,
            looped,
            arc,
        })
    }

    pub fn length(&self) -> f64 {
        *self.arc.last().unwrap()
    }

    /// Pose at the start of the route, heading along the first segment.
    pub fn start_pose(&self) -> Pose2D {
        let (a, b) = (self.waypoints[0], self.waypoints[1]);
        Pose2D::new(a.x, a.y, (b.y - a.y).atan2(b.x - a.x))
    }

    /// Point at arc length `s`, clamped to the route ends.
    pub fn point_at(&self, s: f64) -> (f64, f64) {
        let s = s.clamp(0.0, self.length());
        let i = match self.arc.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i.min(self.waypoints.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.waypoints.len() - 2),
        };
        let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
        let t = (s - self.arc[i]) / (self.arc[i + 1] - self.arc[i]);
        (a.x + t * (b.x - a.x), a.y + t * (b.y - a.y))
    }

    /// Route polyline from arc length `s` to the end, sampled every `spacing`.
    pub fn remaining(&self, s: f64, spacing: f64) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut t = s;
        while t < self.length() {
            out.push(self.point_at(t));
            t += spacing;
        }
        out.push(self.point_at(self.length()));
        out
    }

    fn segment_of(&self, s: f64) -> usize {
        self.arc
            .windows(2)
            .position(|w| s < w[1])
            .unwrap_or(self.waypoints.len() - 2)
    }

    /// Project onto segments `lo..=hi`; returns the arc length of the closest
    /// foot point.
    fn project(&self, x: f64, y: f64, lo: usize, hi: usize) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for i in lo..=hi.min(self.waypoints.len() - 2) {
            let (a, b) = (self.waypoints[i], self.waypoints[i + 1]);
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let len2 = ex * ex + ey * ey;
            let t = (((x - a.x) * ex + (y - a.y) * ey) / len2).clamp(0.0, 1.0);
            let (px, py) = (a.x + t * ex, a.y + t * ey);
            let d = (x - px).hypot(y - py);
            if d < best.0 {
                best = (d, self.arc[i] + t * (self.arc[i + 1] - self.arc[i]));
            }
        }
        best.1
    }
}

/// Pure-pursuit steering toward a world point. Positive steer turns left.
pub fn pure_pursuit_steer(state: &VehicleState, target: (f64, f64), params: &VehicleParams) -> f64 {
    let p = world_to_body(&state.pose, &Pose2D::new(target.0, target.1, 0.0));
    let dist = p.x.hypot(p.y);
    if dist < 1e-9 {
        return 0.0;
    }
    // angle to the left of the heading
    let alpha = (-p.x).atan2(p.y);
    let curvature = 2.0 * alpha.sin() / dist;
    (curvature * params.length / params.steer_gain).clamp(-1.0, 1.0)
}

/// Proportional speed control on top of the drag-holding throttle; coasts
/// whenever the vehicle is faster than desired.
pub fn speed_throttle(v: f64, v_desired: f64, params: &VehicleParams) -> f64 {
    if v > v_desired {
        return 0.0;
    }
    (params.holding_throttle(v_desired) + SPEED_GAIN * (v_desired - v)).clamp(0.0, 1.0)
}

const SPEED_GAIN: f64 = 0.5;
const MIN_LOOKAHEAD: f64 = 5.0;
const LOOKAHEAD_TIME: f64 = 0.6;
/// Desired speed per meter of remaining distance when approaching a stop.
const STOP_RAMP: f64 = 0.8;

/// Stateful follower tracking progress along a script.
#[derive(Debug, Clone)]
pub struct ScriptFollower {
    pub script: TargetScript,
    s: f64,
    /// Next waypoint index that requires a stop.
    next_stop: Option<usize>,
    dwell_left: f64,
    finished: bool,
}

impl ScriptFollower {
    pub fn new(script: TargetScript) -> Self {
        let mut f = Self {
            script,
            s: 0.0,
            next_stop: None,
            dwell_left: 0.0,
            finished: false,
        };
        f.next_stop = f.find_stop(1);
        f
    }

    fn find_stop(&self, from: usize) -> Option<usize> {
        let n = self.script.waypoints.len();
        (from..n).find(|&i| self.script.waypoints[i].dwell > 0.0 || (i == n - 1 && !self.script.looped))
    }

    /// Arc length reached so far.
    pub fn progress(&self) -> f64 {
        self.s
    }

    pub fn finished(&self) -> bool {
        self.finished
    }

    pub fn step(&mut self, state: &VehicleState, params: &VehicleParams) -> ControlCommand {
        let script = &self.script;
        let len = script.length();
        let seg = script.segment_of(self.s);
        let mut s = script.project(state.pose.x, state.pose.y, seg.saturating_sub(1), seg + 3);
        if let Some(stop) = self.next_stop {
            s = s.min(script.arc[stop]);
        }
        if script.looped && s >= len - 1e-6 {
            s = 0.0;
        }
        self.s = s.max(if script.looped { 0.0 } else { self.s });

        if self.finished {
            return ControlCommand::IDLE;
        }

        let mut v_des = script.waypoints[script.segment_of(self.s)].speed;
        if let Some(stop) = self.next_stop {
            let to_stop = script.arc[stop] - self.s;
            v_des = v_des.min(STOP_RAMP * (to_stop - 0.5).max(0.0));
            if to_stop < 1.5 && state.v < 0.3 {
                let last = stop == script.waypoints.len() - 1 && !script.looped;
                if last {
                    self.finished = true;
                    return ControlCommand::IDLE;
                }
                if self.dwell_left <= 0.0 {
                    self.dwell_left = script.waypoints[stop].dwell;
                }
                self.dwell_left -= params.dt;
                if self.dwell_left > 0.0 {
                    return ControlCommand::IDLE;
                }
                self.dwell_left = 0.0;
                self.s = script.arc[stop];
                self.next_stop = self.find_stop(stop + 1);
                v_des = script.waypoints[stop].speed;
            }
        }

        let lookahead = (LOOKAHEAD_TIME * state.v).max(MIN_LOOKAHEAD);
        let mut la = self.s + lookahead;
        if script.looped && la > len {
            la -= len;
        }
        let point = if !script.looped && la >= len {
            // extend past the final waypoint along the last segment
            let n = script.waypoints.len();
            let (a, b) = (script.waypoints[n - 2], script.waypoints[n - 1]);
            let d = (b.x - a.x).hypot(b.y - a.y);
            let extra = la - len;
            (b.x + (b.x - a.x) / d * extra, b.y + (b.y - a.y) / d * extra)
        } else {
            script.point_at(la)
        };
        ControlCommand {
            throttle: speed_throttle(state.v, v_des, params),
            steer: pure_pursuit_steer(state, point, params),
        }
    }
}

/// The built-in routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Track {
    Straight,
    Figure8,
    Roundabout,
    Grid,
    Spline,
}

impl Track {
    pub const ALL: [Track; 5] = [
        Track::Straight,
        Track::Figure8,
        Track::Roundabout,
        Track::Grid,
        Track::Spline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Track::Straight => "straight",
            Track::Figure8 => "figure8",
            Track::Roundabout => "roundabout",
            Track::Grid => "grid",
            Track::Spline => "spline",
        }
    }

    pub fn script(self) -> TargetScript {
        match self {
            Track::Straight => straight_with_stops(),
            Track::Figure8 => figure_eight(),
            Track::Roundabout => roundabout(),
            Track::Grid => turn_grid(),
            Track::Spline => random_spline(SPLINE_SEED),
        }
    }
}

const SPLINE_SEED: u64 = 11;

impl fmt::Display for Track {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Track {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Track::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "track",
                name: s.to_string(),
            })
    }
}

fn straight_with_stops() -> TargetScript {
    TargetScript::new(
        vec![
            Waypoint::new(0.0, 0.0, 10.0),
            Waypoint::new(100.0, 0.0, 4.0),
            Waypoint::stop(150.0, 0.0, 6.0, 2.0),
            Waypoint::new(220.0, 0.0, 12.0),
            Waypoint::new(330.0, 0.0, 7.0),
            Waypoint::new(400.0, 0.0, 7.0),
        ],
        false,
    )
    .expect("valid built-in track")
}

fn arc_points(cx: f64, cy: f64, r: f64, from: f64, to: f64, speed: f64) -> Vec<Waypoint> {
    let n = ((to - from).abs() * r / 2.0).ceil().max(2.0) as usize;
    (1..=n)
        .map(|i| {
            let a = from + (to - from) * i as f64 / n as f64;
            Waypoint::new(cx + r * a.cos(), cy + r * a.sin(), speed)
        })
        .collect()
}

fn figure_eight() -> TargetScript {
    let r = 25.0;
    // Enter the crossing heading north, loop the right lobe clockwise, then
    // the left lobe counter-clockwise, and leave north.
    let mut w = vec![Waypoint::new(0.0, -40.0, 8.0), Waypoint::new(0.0, -5.0, 7.0)];
    w.extend(arc_points(r, 0.0, r, PI, PI - 2.0 * PI, 7.0));
    w.extend(arc_points(-r, 0.0, r, 0.0, 2.0 * PI, 7.0));
    w.push(Waypoint::new(0.0, 30.0, 8.0));
    w.push(Waypoint::new(0.0, 90.0, 8.0));
    TargetScript::new(w, false).expect("valid built-in track")
}

fn roundabout() -> TargetScript {
    let r = 20.0;
    let mut w = vec![
        Waypoint::new(-110.0, -r, 10.0),
        Waypoint::new(-30.0, -r, 6.0),
    ];
    w.extend(arc_points(0.0, 0.0, r, -PI / 2.0, PI, 6.0));
    if let Some(last) = w.last_mut() {
        last.speed = 10.0;
    }
    w.push(Waypoint::new(-r, -40.0, 10.0));
    w.push(Waypoint::new(-r, -60.0, 10.0));
    w.push(Waypoint::new(-r, -140.0, 10.0));
    TargetScript::new(w, false).expect("valid built-in track")
}

fn turn_grid() -> TargetScript {
    TargetScript::new(
        vec![
            Waypoint::new(0.0, 0.0, 8.0),
            Waypoint::new(90.0, 0.0, 8.0),
            Waypoint::new(90.0, 70.0, 8.0),
            Waypoint::new(170.0, 70.0, 8.0),
            Waypoint::new(170.0, -10.0, 8.0),
            Waypoint::new(250.0, -10.0, 8.0),
            Waypoint::new(330.0, -10.0, 8.0),
        ],
        false,
    )
    .expect("valid built-in track")
}

/// A smooth random route: Catmull-Rom through control points from a
/// heading random walk. Different seeds give different routes.
pub fn random_spline(seed: u64) -> TargetScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ctrl = vec![(0.0, 0.0), (40.0, 0.0)];
    let mut heading: f64 = 0.0;
    for _ in 0..8 {
        heading += rng.gen_range(-0.8..0.8);
        let step = rng.gen_range(40.0..60.0);
        let (x, y) = *ctrl.last().unwrap();
        ctrl.push((x + step * heading.cos(), y + step * heading.sin()));
    }
    let speeds: Vec<f64> = (0..ctrl.len()).map(|_| rng.gen_range(6.0..11.0)).collect();

    let mut w = vec![Waypoint::new(ctrl[0].0, ctrl[0].1, speeds[0])];
    for i in 0..ctrl.len() - 1 {
        let p0 = ctrl[i.saturating_sub(1)];
        let (p1, p2) = (ctrl[i], ctrl[i + 1]);
        let p3 = ctrl[(i + 2).min(ctrl.len() - 1)];
        let n = 12;
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let (t2, t3) = (t * t, t * t * t);
            let cr = |a: f64, b: f64, c: f64, d: f64| {
                0.5 * (2.0 * b + (-a + c) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t2 + (-a + 3.0 * b - 3.0 * c + d) * t3)
            };
            w.push(Waypoint::new(
                cr(p0.0, p1.0, p2.0, p3.0),
                cr(p0.1, p1.1, p2.1, p3.1),
                speeds[i + 1],
            ));
        }
    }
    TargetScript::new(w, false).expect("spline waypoints are distinct")
}
