//! Recording file.
//!
//! ```text
//! # pursuit-recording v1
//! dt <dt>
//! termination <name>
//! frame <t> <ego x y theta v> <target x y theta v> <throttle steer> <target throttle steer> <det valid x y theta> <perturbed>
//! ...
//! route <x> <y>
//! ...
//! ```
//!
//! Each `frame` line has 18 values; `valid` and `perturbed` are `0`/`1`.
//! `route` lines list the unvisited remainder of the target's route. Floats
//! are written in shortest round-trip form, so reading reproduces the exact
//! values.

use std::io::{BufRead, Write};

use super::{EpisodeRecording, Frame, Termination};
use crate::error::{Error, Result};
use crate::geometry::Pose2D;
use crate::perception::Detection;
use crate::vehicle::{ControlCommand, VehicleState};

pub const RECORDING_HEADER: &str = "# pursuit-recording v1";

pub fn write_recording<W: Write>(mut w: W, rec: &EpisodeRecording) -> Result<()> {
    writeln!(w, "{RECORDING_HEADER}")?;
    writeln!(w, "dt {}", rec.dt)?;
    writeln!(w, "termination {}", rec.termination)?;
    for f in &rec.frames {
        let d = &f.detection;
        writeln!(
            w,
            "frame {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            f.t,
            f.ego.pose.x,
            f.ego.pose.y,
            f.ego.pose.theta,
            f.ego.v,
            f.target.pose.x,
            f.target.pose.y,
            f.target.pose.theta,
            f.target.v,
            f.command.throttle,
            f.command.steer,
            f.target_command.throttle,
            f.target_command.steer,
            u8::from(d.valid),
            d.relative_pose.x,
            d.relative_pose.y,
            d.relative_pose.theta,
            u8::from(f.perturbed)
        )?;
    }
    for (x, y) in &rec.remaining_route {
        writeln!(w, "route {x} {y}")?;
    }
    w.flush()?;
    Ok(())
}

fn flag(s: &str, line: usize) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::Parse {
            line,
            msg: format!("expected 0 or 1, got {s:?}"),
        }),
    }
}

pub fn read_recording<R: BufRead>(r: R) -> Result<EpisodeRecording> {
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != RECORDING_HEADER {
        return Err(Error::Header {
            found: header.trim().to_string(),
            expected: RECORDING_HEADER,
        });
    }
    let mut dt = None;
    let mut termination = None;
    let mut frames = Vec::new();
    let mut remaining_route = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        let line = line?;
        let mut tok = line.split_whitespace();
        let Some(kind) = tok.next() else { continue };
        let rest: Vec<&str> = tok.collect();
        let err = |msg: String| Error::Parse { line: n, msg };
        let nums = |vals: &[&str]| -> Result<Vec<f64>> {
            vals.iter()
                .map(|v| v.parse::<f64>().map_err(|e| err(format!("{v:?}: {e}"))))
                .collect()
        };
        match kind {
            "dt" if rest.len() == 1 => dt = Some(nums(&rest)?[0]),
            "termination" if rest.len() == 1 => termination = Some(rest[0].parse::<Termination>()?),
            "frame" if rest.len() == 18 => {
                let valid = flag(rest[13], n)?;
                let perturbed = flag(rest[17], n)?;
                let mut v = nums(&rest[..13])?;
                v.extend(nums(&rest[14..17])?);
                frames.push(Frame {
                    t: v[0],
                    ego: VehicleState::new(v[1], v[2], v[3], v[4]),
                    target: VehicleState::new(v[5], v[6], v[7], v[8]),
                    command: ControlCommand {
                        throttle: v[9],
                        steer: v[10],
                    },
                    target_command: ControlCommand {
                        throttle: v[11],
                        steer: v[12],
                    },
                    detection: Detection {
                        relative_pose: Pose2D::new(v[13], v[14], v[15]),
                        valid,
                    },
                    perturbed,
                });
            }
            "route" if rest.len() == 2 => {
                let v = nums(&rest)?;
                remaining_route.push((v[0], v[1]));
            }
            _ if kind.starts_with('#') => {}
            _ => return Err(err(format!("malformed {kind:?} line"))),
        }
    }
    Ok(EpisodeRecording {
        dt: dt.ok_or(Error::Parse {
            line: 0,
            msg: "missing dt".into(),
        })?,
        frames,
        termination: termination.ok_or(Error::Parse {
            line: 0,
            msg: "missing termination".into(),
        })?,
        remaining_route,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec() -> EpisodeRecording {
        let f = Frame {
            t: 0.05,
            ego: VehicleState::new(0.1, -10.0, 1.5707963267948966, 3.3333333333333335),
            target: VehicleState::new(0.0, 0.0, 1.5, 8.0),
            command: ControlCommand {
                throttle: 0.123456789123,
                steer: -1.0,
            },
            target_command: ControlCommand::IDLE,
            detection: Detection::new(Pose2D::new(0.01, 9.99, -0.07)),
            perturbed: true,
        };
        EpisodeRecording {
            dt: 0.05,
            frames: vec![
                f,
                Frame {
                    detection: Detection::INVALID,
                    perturbed: false,
                    ..f
                },
            ],
            termination: Termination::Collision,
            remaining_route: vec![(1.0, 2.0), (3.5, -4.25)],
        }
    }

    #[test]
    fn round_trip_is_exact() {
        let r = rec();
        let mut buf = Vec::new();
        write_recording(&mut buf, &r).unwrap();
        let back = read_recording(&buf[..]).unwrap();
        assert_eq!(back, r);
        let mut again = Vec::new();
        write_recording(&mut again, &back).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(matches!(read_recording(&b"# other\n"[..]), Err(Error::Header { .. })));
        let text = format!("{RECORDING_HEADER}\ndt 0.05\ntermination collision\nframe 1 2 3\n");
        assert!(matches!(read_recording(text.as_bytes()), Err(Error::Parse { line: 4, .. })));
        let text = format!("{RECORDING_HEADER}\ntermination collision\n");
        assert!(read_recording(text.as_bytes()).is_err());
        let text = format!("{RECORDING_HEADER}\ndt 0.05\ntermination sideways\n");
        assert!(read_recording(text.as_bytes()).is_err());
    }
}
