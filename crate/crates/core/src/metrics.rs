//! Trajectory evaluation: Hungarian matching, mean translational error,
//! control difference, route completion, infraction score and binned
//! velocity/acceleration differences.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::sim::{EpisodeRecording, Termination};

pub const R_COMPLETE: f64 = 4.0;
pub const INFRACTION_PENALTY: f64 = 0.65;
pub const CORRIDOR_HALFWIDTH: f64 = 3.5;
pub const MAX_MATCH_POINTS: usize = 500;

/// Minimum-cost assignment of rows to columns. Returns `assignment[row] =
/// Some(col)`; exactly `min(rows, cols)` rows are assigned.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<Option<usize>> {
    let n = cost.len();
    if n == 0 || cost[0].is_empty() {
        return vec![None; n];
    }
    let m = cost[0].len();
    if n > m {
        // Solve the transpose so rows never outnumber columns.
        let t: Vec<Vec<f64>> = (0..m).map(|j| (0..n).map(|i| cost[i][j]).collect()).collect();
        let cols = hungarian(&t);
        let mut out = vec![None; n];
        for (j, i) in cols.into_iter().enumerate() {
            if let Some(i) = i {
                out[i] = Some(j);
            }
        }
        return out;
    }

    // Shortest augmenting paths with row/column potentials; 1-based with a
    // virtual column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Sum of the assigned entries in row order.
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[Option<usize>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| cost[i][j]))
        .sum()
}

/// A trajectory sample: position and the control applied there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajPoint {
    pub x: f64,
    pub y: f64,
    pub throttle: f64,
    pub steer: f64,
}

pub fn ego_track(rec: &EpisodeRecording) -> Vec<TrajPoint> {
    rec.frames
        .iter()
        .map(|f| TrajPoint {
            x: f.ego.pose.x,
            y: f.ego.pose.y,
            throttle: f.command.throttle,
            steer: f.command.steer,
        })
        .collect()
}

pub fn target_track(rec: &EpisodeRecording) -> Vec<TrajPoint> {
    rec.frames
        .iter()
        .map(|f| TrajPoint {
            x: f.target.pose.x,
            y: f.target.pose.y,
            throttle: f.target_command.throttle,
            steer: f.target_command.steer,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub ego_index: usize,
    pub ref_index: usize,
    /// Ego position minus matched reference position.
    pub translation: (f64, f64),
    pub ego_control: (f64, f64),
    pub ref_control: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Matching {
    pub pairs: Vec<MatchedPair>,
}

impl Matching {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Indices of at most `max` samples spread uniformly over `0..n`.
pub fn downsample_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    (0..max).map(|k| k * (n - 1) / (max - 1)).collect()
}

/// Hungarian matching on Euclidean distance between positions, after
/// downsampling both sides to at most `max_points`.
pub fn match_trajectories(ego: &[TrajPoint], reference: &[TrajPoint], max_points: usize) -> Result<Matching> {
    if ego.is_empty() || reference.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let ei = downsample_indices(ego.len(), max_points);
    let ri = downsample_indices(reference.len(), max_points);
    let cost: Vec<Vec<f64>> = ei
        .iter()
        .map(|&i| {
            ri.iter()
                .map(|&j| (ego[i].x - reference[j].x).hypot(ego[i].y - reference[j].y))
                .collect()
        })
        .collect();
    let assignment = hungarian(&cost);
    let pairs = assignment
        .iter()
        .enumerate()
        .filter_map(|(a, b)| b.map(|b| (ei[a], ri[b])))
        .map(|(i, j)| MatchedPair {
            ego_index: i,
            ref_index: j,
            translation: (ego[i].x - reference[j].x, ego[i].y - reference[j].y),
            ego_control: (ego[i].throttle, ego[i].steer),
            ref_control: (reference[j].throttle, reference[j].steer),
        })
        .collect();
    Ok(Matching { pairs })
}

/// Mean squared translational error over matched pairs.
pub fn mte(m: &Matching) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Empty("matching"));
    }
    let s: f64 = m
        .pairs
        .iter()
        .map(|p| p.translation.0 * p.translation.0 + p.translation.1 * p.translation.1)
        .sum();
    Ok(s / m.len() as f64)
}

/// Mean (unsquared) translational error, reported next to [`mte`].
pub fn mean_translation_norm(m: &Matching) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Empty("matching"));
    }
    let s: f64 = m.pairs.iter().map(|p| p.translation.0.hypot(p.translation.1)).sum();
    Ok(s / m.len() as f64)
}

/// Mean Euclidean distance between matched (throttle, steer) pairs.
pub fn control_difference(m: &Matching) -> Result<f64> {
    if m.is_empty() {
        return Err(Error::Empty("matching"));
    }
    let s: f64 = m
        .pairs
        .iter()
        .map(|p| (p.ego_control.0 - p.ref_control.0).hypot(p.ego_control.1 - p.ref_control.1))
        .sum();
    Ok(s / m.len() as f64)
}

const RC_SAMPLE_SPACING: f64 = 0.25;

/// Percent of the reference path's arc length lying within `radius` of some
/// ego position.
pub fn route_completion(ego: &[(f64, f64)], ref_path: &[(f64, f64)], radius: f64) -> f64 {
    let total: f64 = ref_path.windows(2).map(|w| dist(w[0], w[1])).sum();
    if total <= 0.0 || ego.is_empty() {
        return 0.0;
    }
    let r2 = radius * radius;
    let covered_at = |p: (f64, f64)| {
        ego.iter()
            .any(|e| (e.0 - p.0) * (e.0 - p.0) + (e.1 - p.1) * (e.1 - p.1) <= r2)
    };
    let mut covered = 0.0;
    for w in ref_path.windows(2) {
        let len = dist(w[0], w[1]);
        if len == 0.0 {
            continue;
        }
        let n = (len / RC_SAMPLE_SPACING).ceil() as usize;
        let piece = len / n as f64;
        for k in 0..n {
            let t = (k as f64 + 0.5) / n as f64;
            let p = (w[0].0 + t * (w[1].0 - w[0].0), w[0].1 + t * (w[1].1 - w[0].1));
            if covered_at(p) {
                covered += piece;
            }
        }
    }
    (100.0 * covered / total).clamp(0.0, 100.0)
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

/// Distance from `p` to the polyline `path`.
pub fn distance_to_path(p: (f64, f64), path: &[(f64, f64)]) -> f64 {
    match path.len() {
        0 => f64::INFINITY,
        1 => dist(p, path[0]),
        _ => path
            .windows(2)
            .map(|w| {
                let (ax, ay) = w[0];
                let (ex, ey) = (w[1].0 - ax, w[1].1 - ay);
                let len2 = ex * ex + ey * ey;
                let t = if len2 > 0.0 {
                    (((p.0 - ax) * ex + (p.1 - ay) * ey) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                dist(p, (ax + t * ex, ay + t * ey))
            })
            .fold(f64::INFINITY, f64::min),
    }
}

/// Number of corridor departures: each exit from the corridor after the ego
/// first entered it counts once.
pub fn corridor_departures(ego: &[(f64, f64)], ref_path: &[(f64, f64)], halfwidth: f64) -> usize {
    let mut entered = false;
    let mut inside = false;
    let mut count = 0;
    for &p in ego {
        let now = distance_to_path(p, ref_path) <= halfwidth;
        if now {
            entered = true;
        } else if inside && entered {
            count += 1;
        }
        inside = now;
    }
    count
}

/// `penalty ^ infractions`.
pub fn infraction_score(infractions: usize, penalty: f64) -> f64 {
    penalty.powi(infractions as i32)
}

/// Central-difference acceleration; one-sided at the ends.
pub fn acceleration(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    match n {
        0 => vec![],
        1 => vec![0.0],
        _ => (0..n)
            .map(|i| {
                if i == 0 {
                    (v[1] - v[0]) / dt
                } else if i == n - 1 {
                    (v[n - 1] - v[n - 2]) / dt
                } else {
                    (v[i + 1] - v[i - 1]) / (2.0 * dt)
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// `None` for an empty bin.
    pub mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VelAccBins {
    /// Mean |Δv| binned by reference velocity.
    pub velocity: Vec<Bin>,
    /// Mean |Δacc| binned by reference acceleration.
    pub acceleration: Vec<Bin>,
}

/// A sampled kinematic track.
#[derive(Debug, Clone, PartialEq)]
pub struct KinTrack {
    pub positions: Vec<(f64, f64)>,
    pub velocity: Vec<f64>,
    pub dt: f64,
}

impl KinTrack {
    pub fn ego(rec: &EpisodeRecording) -> Self {
        Self {
            positions: rec.ego_positions(),
            velocity: rec.frames.iter().map(|f| f.ego.v).collect(),
            dt: rec.dt,
        }
    }

    pub fn target(rec: &EpisodeRecording) -> Self {
        Self {
            positions: rec.target_positions(),
            velocity: rec.frames.iter().map(|f| f.target.v).collect(),
            dt: rec.dt,
        }
    }
}

fn bin_means(samples: &[(f64, f64)], edges: &[f64]) -> Vec<Bin> {
    edges
        .windows(2)
        .enumerate()
        .map(|(k, w)| {
            let last = k == edges.len() - 2;
            let vals: Vec<f64> = samples
                .iter()
                .filter(|(key, _)| *key >= w[0] && (*key < w[1] || (last && *key <= w[1])))
                .map(|(_, v)| *v)
                .collect();
            Bin {
                lo: w[0],
                hi: w[1],
                count: vals.len(),
                mean: (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64),
            }
        })
        .collect()
}

/// Match every ego sample to the nearest reference position, then bin the
/// absolute velocity and acceleration differences.
pub fn vel_acc_difference_bins(
    ego: &KinTrack,
    reference: &KinTrack,
    vel_edges: &[f64],
    acc_edges: &[f64],
) -> Result<VelAccBins> {
    if ego.positions.is_empty() || reference.positions.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let ea = acceleration(&ego.velocity, ego.dt);
    let ra = acceleration(&reference.velocity, reference.dt);
    let mut dv = Vec::with_capacity(ego.positions.len());
    let mut da = Vec::with_capacity(ego.positions.len());
    for (i, &p) in ego.positions.iter().enumerate() {
        let j = reference
            .positions
            .iter()
            .enumerate()
            .min_by(|a, b| dist(p, *a.1).total_cmp(&dist(p, *b.1)))
            .map(|(j, _)| j)
            .expect("non-empty");
        dv.push((reference.velocity[j], (ego.velocity[i] - reference.velocity[j]).abs()));
        da.push((ra[j], (ea[i] - ra[j]).abs()));
    }
    Ok(VelAccBins {
        velocity: bin_means(&dv, vel_edges),
        acceleration: bin_means(&da, acc_edges),
    })
}

pub const DEFAULT_VEL_EDGES: [f64; 8] = [0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 20.0];
pub const DEFAULT_ACC_EDGES: [f64; 7] = [-20.0, -4.0, -2.0, -0.5, 0.5, 2.0, 20.0];

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub rc: f64,
    pub ic: f64,
    pub mte: f64,
    pub mte_norm: f64,
    pub cd: f64,
    pub collisions: usize,
    pub corridor_departures: usize,
    pub termination: Termination,
    pub frames: usize,
    pub bins: VelAccBins,
}

/// Standard report for one episode: the ego against the target it pursued.
pub fn evaluate(rec: &EpisodeRecording) -> Result<MetricsReport> {
    let ego = ego_track(rec);
    let tgt = target_track(rec);
    let m = match_trajectories(&ego, &tgt, MAX_MATCH_POINTS)?;
    let ref_path = rec.reference_path();
    let ego_pos = rec.ego_positions();
    let collisions = usize::from(rec.collided());
    let departures = corridor_departures(&ego_pos, &ref_path, CORRIDOR_HALFWIDTH);
    Ok(MetricsReport {
        rc: route_completion(&ego_pos, &ref_path, R_COMPLETE),
        ic: infraction_score(collisions + departures, INFRACTION_PENALTY),
        mte: mte(&m)?,
        mte_norm: mean_translation_norm(&m)?,
        cd: control_difference(&m)?,
        collisions,
        corridor_departures: departures,
        termination: rec.termination,
        frames: rec.frames.len(),
        bins: vel_acc_difference_bins(
            &KinTrack::ego(rec),
            &KinTrack::target(rec),
            &DEFAULT_VEL_EDGES,
            &DEFAULT_ACC_EDGES,
        )?,
    })
}

impl MetricsReport {
    /// `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rc={:.4}", self.rc);
        let _ = writeln!(s, "ic={:.6}", self.ic);
        let _ = writeln!(s, "mte={:.6}", self.mte);
        let _ = writeln!(s, "mte_unsquared={:.6}", self.mte_norm);
        let _ = writeln!(s, "cd={:.6}", self.cd);
        let _ = writeln!(s, "collisions={}", self.collisions);
        let _ = writeln!(s, "corridor_departures={}", self.corridor_departures);
        let _ = writeln!(s, "termination={}", self.termination);
        let _ = writeln!(s, "frames={}", self.frames);
        s
    }

    /// `kind,lo,hi,count,mean` rows; empty bins are omitted.
    pub fn bins_csv(&self) -> String {
        let mut s = String::from("kind,lo,hi,count,mean\n");
        for (kind, bins) in [("velocity", &self.bins.velocity), ("acceleration", &self.bins.acceleration)] {
            for b in bins {
                if let Some(mean) = b.mean {
                    let _ = writeln!(s, "{kind},{},{},{},{:.6}", b.lo, b.hi, b.count, mean);
                }
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pts(xy: &[(f64, f64)]) -> Vec<TrajPoint> {
        xy.iter()
            .map(|&(x, y)| TrajPoint {
                x,
                y,
                throttle: 0.0,
                steer: 0.0,
            })
            .collect()
    }

    #[test]
    fn hungarian_small() {
        let c = vec![vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0], vec![1.0, 1.0, 0.0]];
        let a = hungarian(&c);
        assert_eq!(a, vec![Some(0), Some(1), Some(2)]);
        assert_eq!(assignment_cost(&c, &a), 0.0);
        let c = vec![vec![1.0, 2.0], vec![3.0, 1.0]];
        let a = hungarian(&c);
        assert_eq!(a, vec![Some(0), Some(1)]);
        assert_eq!(assignment_cost(&c, &a), 2.0);
        assert!(hungarian(&[]).is_empty());
    }

    #[test]
    fn hungarian_rectangular() {
        let wide = vec![vec![5.0, 1.0, 9.0], vec![2.0, 8.0, 0.5]];
        let a = hungarian(&wide);
        assert_eq!(a, vec![Some(1), Some(2)]);
        let tall = vec![vec![5.0, 2.0], vec![1.0, 8.0], vec![9.0, 0.5]];
        let a = hungarian(&tall);
        assert_eq!(a.iter().filter(|x| x.is_some()).count(), 2);
        assert_eq!(assignment_cost(&tall, &a), 1.5);
    }

    #[test]
    fn identical_trajectories_match_themselves() {
        let t = pts(&[(0.0, 0.0), (1.0, 0.5), (2.0, 2.0), (3.0, 2.5)]);
        let m = match_trajectories(&t, &t, 500).unwrap();
        assert_eq!(m.len(), 4);
        for p in &m.pairs {
            assert_eq!(p.ego_index, p.ref_index);
            assert_eq!(p.translation, (0.0, 0.0));
        }
        assert_eq!(mte(&m).unwrap(), 0.0);
    }

    #[test]
    fn shifted_trajectory() {
        let r: Vec<(f64, f64)> = (0..50).map(|i| (0.0, i as f64 * 3.0)).collect();
        let e: Vec<(f64, f64)> = r.iter().map(|&(x, y)| (x + 1.0, y)).collect();
        let m = match_trajectories(&pts(&e), &pts(&r), 500).unwrap();
        for p in &m.pairs {
            assert_abs_diff_eq!(p.translation.0.hypot(p.translation.1), 1.0, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(mte(&m).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(mean_translation_norm(&m).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn shorter_ego_bounds_pairs() {
        let r = pts(&(0..30).map(|i| (i as f64, 0.0)).collect::<Vec<_>>());
        let e = pts(&(0..12).map(|i| (i as f64, 0.2)).collect::<Vec<_>>());
        assert_eq!(match_trajectories(&e, &r, 500).unwrap().len(), 12);
        assert!(match_trajectories(&[], &r, 500).is_err());
    }

    fn pair(t: (f64, f64), ec: (f64, f64), rc: (f64, f64)) -> MatchedPair {
        MatchedPair {
            ego_index: 0,
            ref_index: 0,
            translation: t,
            ego_control: ec,
            ref_control: rc,
        }
    }

    #[test]
    fn mte_examples() {
        let m = Matching {
            pairs: vec![pair((1.0, 0.0), (0.0, 0.0), (0.0, 0.0)), pair((0.0, 2.0), (0.0, 0.0), (0.0, 0.0))],
        };
        assert_abs_diff_eq!(mte(&m).unwrap(), 2.5, epsilon = 1e-12);
        assert!(mte(&Matching::default()).is_err());
    }

    #[test]
    fn cd_examples() {
        let same = Matching {
            pairs: vec![pair((0.0, 0.0), (0.3, 0.1), (0.3, 0.1))],
        };
        assert_eq!(control_difference(&same).unwrap(), 0.0);
        let one = Matching {
            pairs: vec![pair((0.0, 0.0), (0.5, 0.4), (0.2, 0.0))],
        };
        assert_abs_diff_eq!(control_difference(&one).unwrap(), 0.5, epsilon = 1e-12);
        let two = Matching {
            pairs: vec![
                pair((0.0, 0.0), (0.5, 0.4), (0.2, 0.0)),
                pair((0.0, 0.0), (0.1, 0.0), (0.0, 0.0)),
            ],
        };
        assert_abs_diff_eq!(control_difference(&two).unwrap(), 0.3, epsilon = 1e-12);
        assert!(control_difference(&Matching::default()).is_err());
    }

    #[test]
    fn metrics_invariant_to_reordering() {
        let a = pair((1.0, 2.0), (0.5, 0.1), (0.2, -0.3));
        let b = pair((-0.5, 0.3), (0.9, 0.0), (0.1, 0.4));
        let c = pair((0.0, -1.5), (0.0, 0.2), (0.3, 0.3));
        let m1 = Matching { pairs: vec![a, b, c] };
        let m2 = Matching { pairs: vec![c, a, b] };
        assert_abs_diff_eq!(mte(&m1).unwrap(), mte(&m2).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            control_difference(&m1).unwrap(),
            control_difference(&m2).unwrap(),
            epsilon = 1e-12
        );
    }

    fn line(len: f64, step: f64) -> Vec<(f64, f64)> {
        let n = (len / step) as usize;
        (0..=n).map(|i| (i as f64 * step, 0.0)).collect()
    }

    #[test]
    fn route_completion_examples() {
        let path = line(1000.0, 1.0);
        assert_abs_diff_eq!(route_completion(&path, &path, R_COMPLETE), 100.0, epsilon = 1e-9);
        let half: Vec<(f64, f64)> = line(500.0, 0.5);
        let rc = route_completion(&half, &path, R_COMPLETE);
        assert!((rc - 50.0).abs() <= 1.0, "{rc}");
        let far: Vec<(f64, f64)> = path.iter().map(|&(x, _)| (x, 50.0)).collect();
        assert_eq!(route_completion(&far, &path, R_COMPLETE), 0.0);
        assert_eq!(route_completion(&[], &path, R_COMPLETE), 0.0);
    }

    #[test]
    fn route_completion_monotone_in_length() {
        let path = line(300.0, 2.0);
        let ego: Vec<(f64, f64)> = line(300.0, 0.7).into_iter().map(|(x, _)| (x, 1.0)).collect();
        let mut last = 0.0;
        for k in (1..ego.len()).step_by(17) {
            let rc = route_completion(&ego[..k], &path, R_COMPLETE);
            assert!(rc >= last);
            last = rc;
        }
    }

    #[test]
    fn infraction_examples() {
        assert_eq!(infraction_score(0, INFRACTION_PENALTY), 1.0);
        assert_abs_diff_eq!(infraction_score(1, INFRACTION_PENALTY), 0.65, epsilon = 1e-15);
        assert_abs_diff_eq!(infraction_score(3, INFRACTION_PENALTY), 0.274625, epsilon = 1e-12);
    }

    #[test]
    fn corridor_excursions_counted_once() {
        let path = line(100.0, 1.0);
        // starts outside, enters, leaves twice
        let mut ego = vec![(0.0, 8.0)];
        ego.extend((0..10).map(|i| (i as f64, 0.5)));
        ego.extend((10..15).map(|i| (i as f64, 5.0)));
        ego.extend((15..30).map(|i| (i as f64, 0.0)));
        ego.extend((30..33).map(|i| (i as f64, -6.0)));
        ego.extend((33..40).map(|i| (i as f64, 0.0)));
        assert_eq!(corridor_departures(&ego, &path, CORRIDOR_HALFWIDTH), 2);
    }

    fn track(v: Vec<f64>) -> KinTrack {
        KinTrack {
            positions: (0..v.len()).map(|i| (i as f64, 0.0)).collect(),
            velocity: v,
            dt: 0.05,
        }
    }

    #[test]
    fn vel_acc_bins_examples() {
        let r = track((0..100).map(|i| 3.0 + 0.08 * i as f64).collect());
        let same = vel_acc_difference_bins(&r, &r, &DEFAULT_VEL_EDGES, &DEFAULT_ACC_EDGES).unwrap();
        for b in same.velocity.iter().chain(&same.acceleration) {
            if let Some(m) = b.mean {
                assert_eq!(m, 0.0);
            }
        }
        let faster = track(r.velocity.iter().map(|v| v + 0.5).collect());
        let bins = vel_acc_difference_bins(&faster, &r, &DEFAULT_VEL_EDGES, &DEFAULT_ACC_EDGES).unwrap();
        let nonempty: Vec<_> = bins.velocity.iter().filter_map(|b| b.mean).collect();
        assert!(!nonempty.is_empty());
        for m in nonempty {
            assert_abs_diff_eq!(m, 0.5, epsilon = 1e-12);
        }
        assert!(bins.velocity.iter().any(|b| b.mean.is_none()));

        let flat = track(vec![7.0; 40]);
        let flat_ego = track(vec![5.0; 40]);
        let bins = vel_acc_difference_bins(&flat_ego, &flat, &DEFAULT_VEL_EDGES, &DEFAULT_ACC_EDGES).unwrap();
        for b in &bins.acceleration {
            if let Some(m) = b.mean {
                assert_eq!(m, 0.0);
            }
        }
    }

    #[test]
    fn acceleration_differences() {
        let a = acceleration(&[0.0, 1.0, 3.0, 6.0], 0.5);
        assert_eq!(a, vec![2.0, 3.0, 5.0, 6.0]);
        assert!(acceleration(&[], 0.1).is_empty());
    }
}
