use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use pursuit_core::geometry::{body_to_world, Pose2D};
use pursuit_core::labels::{generate_labels, read_dataset, write_dataset, LabeledSample, Origin};
use pursuit_core::learner::{
    load_model, per_output_mse, save_model, train, MlpController, Optimizer, Phase, TrainSchedule,
};
use pursuit_core::metrics::{control_difference, ego_track, evaluate, match_trajectories, MetricsReport, MAX_MATCH_POINTS};
use pursuit_core::perception::NoiseModel;
use pursuit_core::sim::{
    mpc_controller, read_recording, run_episode, write_recording, Controller, EpisodeRecording,
    PerturbationConfig, Termination, Track, WorldConfig,
};
use pursuit_core::synthesis::{
    agreement, augment_dataset, default_intrinsics, image, postprocess, render_scene, warp_view,
    CameraMount, SyntheticScene,
};

use crate::args::*;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    /// Resolved world, MPC and vehicle parameters.
    pub resolved: serde_json::Value,
}

pub fn resolved_world(w: &WorldConfig) -> serde_json::Value {
    let p = &w.params;
    let m = &w.mpc;
    json!({
        "vehicle": {
            "length": p.length, "mass": p.mass, "drag_coeff": p.drag_coeff,
            "accel_gain": p.accel_gain, "steer_gain": p.steer_gain, "dt": p.dt,
        },
        "mpc": {
            "w1": m.w1, "w2": m.w2, "w3_vel": m.w3_vel, "base_length": m.base_length,
            "horizon": m.horizon, "block": m.block, "dt": m.dt,
            "throttle_bounds": [m.throttle_bounds.0, m.throttle_bounds.1],
            "steer_bounds": [m.steer_bounds.0, m.steer_bounds.1],
            "max_iters": m.max_iters, "tol": m.tol, "line_tol": m.line_tol,
        },
        "world": {
            "collision_radius": w.collision_radius, "max_range": w.max_range,
            "initial_gap": w.initial_gap, "max_frames": w.max_frames,
            "settle_frames": w.settle_frames,
        },
    })
}

fn world_of(cmd: &Command) -> Option<&WorldArgs> {
    match cmd {
        Command::Simulate(a) => Some(&a.world),
        Command::Label(a) => Some(&a.world),
        Command::Augment(a) => Some(&a.world),
        Command::Eval(a) => Some(&a.world),
        Command::Sweep(a) => Some(&a.world),
        Command::Serve(a) => Some(&a.world),
        Command::Train(_) | Command::Replay(_) => None,
    }
}

fn prepare_out(out: &str, cmd: &Command) -> Result<PathBuf> {
    let dir = PathBuf::from(out);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let manifest = Manifest {
        tool: "pursuit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.clone(),
        resolved: world_of(cmd).map_or(serde_json::Value::Null, |w| resolved_world(&w.world())),
    };
    let text = serde_json::to_string_pretty(&manifest)? + "\n";
    fs::write(dir.join(MANIFEST_FILE), text)?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn open(path: &str) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {path}"))?))
}

pub fn load_model_file(path: &str) -> Result<pursuit_core::learner::Mlp> {
    load_model(open(path)?).with_context(|| format!("loading model {path}"))
}

pub fn build_controller(args: &ControllerArgs, world: &WorldConfig) -> Result<Box<dyn Controller>> {
    Ok(match args.controller {
        ControllerKind::Mpc => Box::new(mpc_controller(world)),
        ControllerKind::Mlp => {
            let Some(path) = &args.model else {
                bail!("--model is required for the mlp controller");
            };
            Box::new(MlpController::new(load_model_file(path)?))
        }
    })
}

pub fn run(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => simulate(a, cmd),
        Command::Label(a) => label(a, cmd),
        Command::Augment(a) => augment(a, cmd),
        Command::Train(a) => train_cmd(a, cmd),
        Command::Eval(a) => eval(a, cmd),
        Command::Sweep(a) => sweep(a, cmd),
        Command::Serve(a) => crate::serve::run_blocking(a),
        Command::Replay(a) => replay(a),
    }
}

fn summary(r: &MetricsReport) -> String {
    format!(
        "rc={:.2} ic={:.4} mte={:.4} cd={:.4} collisions={} termination={}",
        r.rc, r.ic, r.mte, r.cd, r.collisions, r.termination
    )
}

fn simulate(a: &SimulateArgs, cmd: &Command) -> Result<()> {
    let world = a.world.world();
    let track = parse_track(&a.track)?;
    let mut ctl = build_controller(&a.controller, &world)?;
    let out = prepare_out(&a.out, cmd)?;
    let noise = a.perception.preset().model(a.perception.seed);
    let perturb = (a.perturb_level > 0.0).then(|| PerturbationConfig::new(a.perturb_level, a.perception.seed));
    let rec = run_episode(&world, &track.script(), ctl.as_mut(), noise, perturb)?;
    write_recording(create(&out.join("recording.txt"))?, &rec)?;
    let report = evaluate(&rec)?;
    fs::write(out.join("report.txt"), report.to_text())?;
    fs::write(out.join("bins.csv"), report.bins_csv())?;
    println!("track={} {}", track, summary(&report));
    if rec.termination == Termination::ManualStop {
        bail!("controller failed at frame {}", rec.frames.len());
    }
    Ok(())
}

fn label(a: &LabelArgs, cmd: &Command) -> Result<()> {
    let world = a.world.world();
    let rec = read_recording(open(&a.recording)?).with_context(|| format!("reading {}", a.recording))?;
    let out = prepare_out(&a.out, cmd)?;
    let noise = a.perception.preset().model(a.perception.seed);
    let (samples, skipped) = generate_labels(&rec, noise, &world.mpc, &world.params)?;
    write_dataset(create(&out.join("labels.txt"))?, &samples)?;
    let unconverged = samples.iter().filter(|s| !s.converged).count();
    println!(
        "labelled {} of {} frames (skipped {skipped}, unconverged {unconverged})",
        samples.len(),
        rec.frames.len()
    );
    Ok(())
}

fn augment(a: &AugmentArgs, cmd: &Command) -> Result<()> {
    let world = a.world.world();
    let on = read_dataset(open(&a.dataset)?).with_context(|| format!("reading {}", a.dataset))?;
    let out = prepare_out(&a.out, cmd)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let off = augment_dataset(&on, a.per_frame, a.stride, &mut rng, &world.mpc, &world.params)?;
    let mut all = on.clone();
    all.extend(off.iter().copied());
    write_dataset(create(&out.join("dataset.txt"))?, &all)?;
    let unconverged = off.iter().filter(|s| !s.converged).count();
    println!(
        "{} on-trajectory + {} off-trajectory rows (unconverged {unconverged})",
        on.len(),
        off.len()
    );
    if a.images > 0 {
        write_views(&out.join("views"), &on, &off[..a.images.min(off.len())], a.seed)?;
    }
    Ok(())
}

/// Source render, depth, warped view, void mask, oracle re-render and the
/// 128×128 network input for each augmented sample. The target box sits at
/// the on-trajectory relative position in a random synthetic scene.
fn write_views(dir: &Path, on: &[LabeledSample], off: &[LabeledSample], seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    let k = default_intrinsics();
    let mount = CameraMount::default();
    let cam = Pose2D::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
    for (i, s) in off.iter().enumerate() {
        let Origin::OffTrajectory { x_off, y_off, theta_off } = s.origin else {
            continue;
        };
        let Some(src) = on.iter().find(|o| o.frame == s.frame && o.is_on_trajectory()) else {
            continue;
        };
        let mut scene = SyntheticScene::random(seed.wrapping_add(i as u64));
        scene.target.x = src.rel.x;
        scene.target.y = src.rel.y;
        let offset = Pose2D::new(x_off, y_off, theta_off);
        let (rgb, depth) = render_scene(&scene, &cam, &mount, &k)?;
        let (warped, mask) = warp_view(&rgb, &depth, &offset, &k, &mount)?;
        let (oracle, _) = render_scene(&scene, &body_to_world(&cam, &offset), &mount, &k)?;
        let name = |kind: &str, ext: &str| dir.join(format!("{i:04}_{kind}.{ext}"));
        image::write_ppm(create(&name("source", "ppm"))?, &rgb)?;
        image::write_pfm(create(&name("depth", "pfm"))?, &depth)?;
        image::write_ppm(create(&name("warped", "ppm"))?, &warped)?;
        image::write_pgm_mask(create(&name("mask", "pgm"))?, &mask)?;
        image::write_ppm(create(&name("oracle", "ppm"))?, &oracle)?;
        image::write_ppm(create(&name("input", "ppm"))?, &postprocess(&warped)?)?;
        println!(
            "view {i}: offset ({x_off:.2}, {y_off:.2}, {theta_off:.3}) agreement {:.3}",
            agreement(&warped, &mask, &oracle, 10)
        );
    }
    Ok(())
}

fn train_cmd(a: &TrainArgs, cmd: &Command) -> Result<()> {
    let mut samples = Vec::new();
    for path in &a.dataset {
        samples.extend(read_dataset(open(path)?).with_context(|| format!("reading {path}"))?);
    }
    if a.on_trajectory_only {
        samples.retain(LabeledSample::is_on_trajectory);
    }
    let out = prepare_out(&a.out, cmd)?;
    let schedule = TrainSchedule {
        phases: vec![
            Phase { epochs: a.epochs1, lr: a.lr1 },
            Phase { epochs: a.epochs2, lr: a.lr2 },
        ],
        batch_size: a.batch,
        seed: a.seed,
        optimizer: match a.optimizer {
            OptimizerKind::Adam => Optimizer::ADAM,
            OptimizerKind::Sgd => Optimizer::Sgd,
        },
        val_fraction: a.val_fraction,
        skip_unconverged: !a.include_unconverged,
        ..TrainSchedule::default()
    };
    let (model, report) = train(&samples, &schedule)?;
    save_model(create(&out.join("model.txt"))?, &model)?;
    let mut csv = String::from("epoch,train_loss,val_loss\n");
    for (e, t) in report.train_loss.iter().enumerate() {
        let v = report.val_loss.get(e).map_or(String::new(), |v| format!("{v}"));
        let _ = writeln!(csv, "{},{t},{v}", e + 1);
    }
    fs::write(out.join("loss.csv"), csv)?;
    let used: Vec<LabeledSample> = samples
        .iter()
        .filter(|s| s.converged || a.include_unconverged)
        .copied()
        .collect();
    let [mse_t, mse_s] = per_output_mse(&model, &used)?;
    println!(
        "trained on {} rows ({} validation): final train loss {:.6}, val loss {}, mse throttle {mse_t:.6} steer {mse_s:.6}",
        report.train_size,
        report.val_size,
        report.train_loss.last().copied().unwrap_or(f64::NAN),
        report.val_loss.last().map_or("n/a".to_string(), |v| format!("{v:.6}")),
    );
    Ok(())
}

pub fn run_track(
    world: &WorldConfig,
    track: Track,
    ctl: &mut dyn Controller,
    noise: NoiseModel,
    perturb: Option<PerturbationConfig>,
) -> Result<EpisodeRecording> {
    Ok(run_episode(world, &track.script(), ctl, noise, perturb)?)
}

fn eval(a: &EvalArgs, cmd: &Command) -> Result<()> {
    let world = a.world.world();
    let model = a.model.as_deref().map(load_model_file).transpose()?;
    let out = prepare_out(&a.out, cmd)?;
    let noise = |t: Track| a.perception.preset().model(a.perception.seed.wrapping_add(t as u64));
    let mut csv = String::from("method,track,rc,ic,mte,mte_unsquared,cd,cd_vs_mpc,collisions,termination,frames\n");
    let mut means: Vec<(&str, [f64; 4], Option<f64>)> = Vec::new();
    let mut acc_mpc = [0.0; 4];
    let mut acc_mlp = [0.0; 4];
    let mut acc_vs = 0.0;
    let row = |csv: &mut String, method: &str, t: Track, r: &MetricsReport, vs: Option<f64>| {
        let _ = writeln!(
            csv,
            "{method},{t},{:.4},{:.6},{:.6},{:.6},{:.6},{},{},{},{}",
            r.rc,
            r.ic,
            r.mte,
            r.mte_norm,
            r.cd,
            vs.map_or(String::new(), |v| format!("{v:.6}")),
            r.collisions,
            r.termination,
            r.frames
        );
    };
    for t in Track::ALL {
        let mut mpc = mpc_controller(&world);
        let mpc_rec = run_track(&world, t, &mut mpc, noise(t), None)?;
        let r = evaluate(&mpc_rec)?;
        row(&mut csv, "mpc", t, &r, None);
        println!("mpc {t}: {}", summary(&r));
        for (s, v) in acc_mpc.iter_mut().zip([r.rc, r.ic, r.mte, r.cd]) {
            *s += v / Track::ALL.len() as f64;
        }
        if let Some(m) = &model {
            let mut ctl = MlpController::new(m.clone());
            let rec = run_track(&world, t, &mut ctl, noise(t), None)?;
            let r = evaluate(&rec)?;
            let vs = control_difference(&match_trajectories(
                &ego_track(&rec),
                &ego_track(&mpc_rec),
                MAX_MATCH_POINTS,
            )?)?;
            row(&mut csv, "mlp", t, &r, Some(vs));
            println!("mlp {t}: {} cd_vs_mpc={vs:.4}", summary(&r));
            for (s, v) in acc_mlp.iter_mut().zip([r.rc, r.ic, r.mte, r.cd]) {
                *s += v / Track::ALL.len() as f64;
            }
            acc_vs += vs / Track::ALL.len() as f64;
        }
    }
    means.push(("mpc", acc_mpc, None));
    if model.is_some() {
        means.push(("mlp", acc_mlp, Some(acc_vs)));
    }
    let mut table = format!("{:<8} {:>8} {:>8} {:>8} {:>8} {:>10}\n", "method", "RC", "IC", "MTE", "CD", "CD vs MPC");
    for (name, [rc, ic, mte, cd], vs) in &means {
        let _ = writeln!(
            table,
            "{name:<8} {rc:>8.2} {ic:>8.3} {mte:>8.3} {cd:>8.3} {:>10}",
            vs.map_or("-".to_string(), |v| format!("{v:.3}"))
        );
    }
    fs::write(out.join("table.csv"), csv)?;
    fs::write(out.join("table.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn sweep(a: &SweepArgs, cmd: &Command) -> Result<()> {
    let world = a.world.world();
    let levels = parse_levels(&a.levels).map_err(anyhow::Error::msg)?;
    let tracks: Vec<Track> = a.tracks.iter().map(|t| parse_track(t)).collect::<Result<_>>()?;
    if tracks.is_empty() || a.seeds == 0 {
        bail!("sweep needs at least one track and one seed");
    }
    let models = [
        ("baseline", load_model_file(&a.baseline)?),
        ("augmented", load_model_file(&a.augmented)?),
    ];
    let out = prepare_out(&a.out, cmd)?;
    let mut csv = String::from("level,seed,track,model,rc,ic,termination\n");
    let mut summary_csv = String::from("level,baseline_rc,augmented_rc\n");
    let runs = (a.seeds as usize * tracks.len()) as f64;
    for &level in &levels {
        let mut mean = [0.0; 2];
        for seed in 0..a.seeds {
            for &t in &tracks {
                for (k, (name, m)) in models.iter().enumerate() {
                    let mut ctl = MlpController::new(m.clone());
                    let noise = a.perception.preset().model(a.perception.seed.wrapping_add(seed));
                    let perturb = Some(PerturbationConfig::new(f64::from(level), seed));
                    let rec = run_track(&world, t, &mut ctl, noise, perturb)?;
                    let r = evaluate(&rec)?;
                    let _ = writeln!(csv, "{level},{seed},{t},{name},{:.4},{:.6},{}", r.rc, r.ic, r.termination);
                    mean[k] += r.rc / runs;
                }
            }
        }
        let _ = writeln!(summary_csv, "{level},{:.4},{:.4}", mean[0], mean[1]);
        println!("level {level}: baseline rc {:.2}, augmented rc {:.2}", mean[0], mean[1]);
    }
    fs::write(out.join("sweep.csv"), csv)?;
    fs::write(out.join("sweep_summary.csv"), summary_csv)?;
    Ok(())
}

pub fn read_manifest(path: &str) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {path}"))?)
}

fn replay(a: &ReplayArgs) -> Result<()> {
    let manifest = read_manifest(&a.manifest)?;
    let mut cmd = manifest.command;
    if let Some(out) = &a.out {
        match &mut cmd {
            Command::Simulate(x) => x.out = out.clone(),
            Command::Label(x) => x.out = out.clone(),
            Command::Augment(x) => x.out = out.clone(),
            Command::Train(x) => x.out = out.clone(),
            Command::Eval(x) => x.out = out.clone(),
            Command::Sweep(x) => x.out = out.clone(),
            Command::Serve(_) | Command::Replay(_) => {}
        }
    }
    if matches!(cmd, Command::Replay(_)) {
        bail!("a manifest cannot record a replay");
    }
    run(&cmd)
}
