//! MPC-labelled training samples and the label dataset file.
//!
//! Dataset format: a header line `# pursuit-labels v1`, then one sample per
//! line as space-separated `name=value` fields in this fixed order:
//!
//! ```text
//! frame rel_x rel_y rel_theta v_ego v_ref throttle steer origin [x_off y_off theta_off] converged
//! ```
//!
//! `origin` is `on` or `off`; the offset triple is present only for `off`
//! rows. Floats carry 9 significant digits; `converged` is `1` or `0`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use log::info;

use crate::error::{Error, Result};
use crate::geometry::{world_to_body, Pose2D};
use crate::mpc::{solve_relative, MpcConfig};
use crate::perception::{prune, NoiseModel, Perception, DEFAULT_MAX_RANGE};
use crate::sim::EpisodeRecording;
use crate::vehicle::{ControlCommand, VehicleParams};

pub const DATASET_HEADER: &str = "# pursuit-labels v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Origin {
    OnTrajectory,
    /// Lateral, longitudinal and rotational ego displacement.
    OffTrajectory { x_off: f64, y_off: f64, theta_off: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSample {
    pub frame: usize,
    /// Target pose in the ego body frame.
    pub rel: Pose2D,
    pub v_ego: f64,
    pub v_ref: f64,
    pub label: ControlCommand,
    pub origin: Origin,
    /// False when the solver hit its iteration cap.
    pub converged: bool,
}

impl LabeledSample {
    pub fn features(&self) -> [f64; 5] {
        [self.rel.x, self.rel.y, self.rel.theta, self.v_ego, self.v_ref]
    }

    pub fn is_on_trajectory(&self) -> bool {
        self.origin == Origin::OnTrajectory
    }
}

/// One on-trajectory sample per usable frame, labelled by MPC from the
/// perceived relative pose. Solves run in frame order, each warm-started from
/// the previous solution. Returns the samples and the number of skipped
/// frames (non-finite state or no valid detection).
pub fn generate_labels(
    rec: &EpisodeRecording,
    noise: NoiseModel,
    cfg: &MpcConfig,
    params: &VehicleParams,
) -> Result<(Vec<LabeledSample>, usize)> {
    let mut perception = Perception::new(noise)?;
    let mut out = Vec::with_capacity(rec.frames.len());
    let mut skipped = 0;
    let mut warm: Option<Vec<ControlCommand>> = None;
    for (i, f) in rec.frames.iter().enumerate() {
        if !f.is_finite() {
            skipped += 1;
            continue;
        }
        let truth = world_to_body(&f.ego.pose, &f.target.pose);
        let det = prune(&[perception.observe(&truth)], DEFAULT_MAX_RANGE);
        let Some(rel) = det.pose() else {
            skipped += 1;
            continue;
        };
        let sol = solve_relative(&rel, f.ego.v, f.target.v, cfg, params, warm.as_deref());
        out.push(LabeledSample {
            frame: i,
            rel,
            v_ego: f.ego.v,
            v_ref: f.target.v,
            label: sol.command,
            origin: Origin::OnTrajectory,
            converged: sol.converged,
        });
        warm = Some(sol.controls);
    }
    if skipped > 0 {
        info!("label generation skipped {skipped} of {} frames", rec.frames.len());
    }
    Ok((out, skipped))
}

/// `v` with 9 significant digits.
pub fn fmt9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let s = format!("{v:.8e}");
    // Round-trip through parse to drop trailing zeros in the mantissa.
    let parsed: f64 = s.parse().expect("formatted float");
    format!("{parsed}")
}

pub fn format_sample(s: &LabeledSample) -> String {
    let mut line = format!(
        "frame={} rel_x={} rel_y={} rel_theta={} v_ego={} v_ref={} throttle={} steer={}",
        s.frame,
        fmt9(s.rel.x),
        fmt9(s.rel.y),
        fmt9(s.rel.theta),
        fmt9(s.v_ego),
        fmt9(s.v_ref),
        fmt9(s.label.throttle),
        fmt9(s.label.steer)
    );
    match s.origin {
        Origin::OnTrajectory => line.push_str(" origin=on"),
        Origin::OffTrajectory { x_off, y_off, theta_off } => {
            let _ = write!(
                line,
                " origin=off x_off={} y_off={} theta_off={}",
                fmt9(x_off),
                fmt9(y_off),
                fmt9(theta_off)
            );
        }
    }
    let _ = write!(line, " converged={}", u8::from(s.converged));
    line
}

pub fn parse_sample(line: &str, lineno: usize) -> Result<LabeledSample> {
    let err = |msg: String| Error::Parse { line: lineno, msg };
    let mut fields = line.split_whitespace().map(|tok| {
        tok.split_once('=')
            .ok_or_else(|| err(format!("expected name=value, got {tok:?}")))
    });
    let mut next = |name: &str| -> Result<String> {
        let (k, v) = fields
            .next()
            .ok_or_else(|| err(format!("missing field {name}")))??;
        if k != name {
            return Err(err(format!("expected field {name}, got {k}")));
        }
        Ok(v.to_string())
    };
    let num = |v: String, name: &str| -> Result<f64> {
        v.parse::<f64>()
            .map_err(|e| err(format!("{name}: {e}")))
    };
    let frame = next("frame")?
        .parse::<usize>()
        .map_err(|e| err(format!("frame: {e}")))?;
    let rel_x = num(next("rel_x")?, "rel_x")?;
    let rel_y = num(next("rel_y")?, "rel_y")?;
    let rel_theta = num(next("rel_theta")?, "rel_theta")?;
    let v_ego = num(next("v_ego")?, "v_ego")?;
    let v_ref = num(next("v_ref")?, "v_ref")?;
    let throttle = num(next("throttle")?, "throttle")?;
    let steer = num(next("steer")?, "steer")?;
    let origin = match next("origin")?.as_str() {
        "on" => Origin::OnTrajectory,
        "off" => Origin::OffTrajectory {
            x_off: num(next("x_off")?, "x_off")?,
            y_off: num(next("y_off")?, "y_off")?,
            theta_off: num(next("theta_off")?, "theta_off")?,
        },
        other => return Err(err(format!("unknown origin {other:?}"))),
    };
    let converged = match next("converged")?.as_str() {
        "1" => true,
        "0" => false,
        other => return Err(err(format!("converged must be 0 or 1, got {other:?}"))),
    };
    Ok(LabeledSample {
        frame,
        rel: Pose2D::new(rel_x, rel_y, rel_theta),
        v_ego,
        v_ref,
        label: ControlCommand { throttle, steer },
        origin,
        converged,
    })
}

pub fn write_dataset<W: Write>(mut w: W, samples: &[LabeledSample]) -> Result<()> {
    writeln!(w, "{DATASET_HEADER}")?;
    for s in samples {
        writeln!(w, "{}", format_sample(s))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Vec<LabeledSample>> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != DATASET_HEADER {
        return Err(Error::Header {
            found: header.trim().to_string(),
            expected: DATASET_HEADER,
        });
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(parse_sample(&line, i + 2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(origin: Origin) -> LabeledSample {
        LabeledSample {
            frame: 7,
            rel: Pose2D::new(-0.123456789012, 15.5, 0.01),
            v_ego: 7.25,
            v_ref: 8.0,
            label: ControlCommand {
                throttle: 0.0312,
                steer: -0.2,
            },
            origin,
            converged: true,
        }
    }

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt9(0.123456789012), "0.123456789");
        assert_eq!(fmt9(15.5), "15.5");
        assert_eq!(fmt9(-1234567.891234), "-1234567.89");
        assert_eq!(fmt9(0.0), "0");
    }

    #[test]
    fn line_round_trip() {
        for origin in [
            Origin::OnTrajectory,
            Origin::OffTrajectory {
                x_off: -2.9,
                y_off: 0.4,
                theta_off: -0.05,
            },
        ] {
            let s = sample(origin);
            let line = format_sample(&s);
            let back = parse_sample(&line, 1).unwrap();
            assert_eq!(back.origin, s.origin);
            assert_eq!(back.rel.x, fmt9(s.rel.x).parse::<f64>().unwrap());
            assert_eq!(format_sample(&back), line);
        }
    }

    #[test]
    fn field_order_is_fixed() {
        let line = format_sample(&sample(Origin::OnTrajectory));
        let names: Vec<&str> = line.split(' ').map(|t| t.split('=').next().unwrap()).collect();
        assert_eq!(
            names,
            ["frame", "rel_x", "rel_y", "rel_theta", "v_ego", "v_ref", "throttle", "steer", "origin", "converged"]
        );
        let swapped = line.replacen("rel_x", "rel_q", 1);
        assert!(parse_sample(&swapped, 3).is_err());
    }

    #[test]
    fn dataset_header_checked() {
        let mut buf = Vec::new();
        write_dataset(&mut buf, &[sample(Origin::OnTrajectory)]).unwrap();
        assert_eq!(read_dataset(&buf[..]).unwrap().len(), 1);
        let bad = b"# pursuit-labels v0\n".to_vec();
        assert!(matches!(read_dataset(&bad[..]), Err(Error::Header { .. })));
    }
}
