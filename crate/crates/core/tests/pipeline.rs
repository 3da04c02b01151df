//! Short end-to-end run: record, label, augment, train, save, reload, drive.

use pursuit_core::labels::{generate_labels, read_dataset, write_dataset, Origin};
use pursuit_core::learner::{load_model, save_model, train, MlpController, Phase, TrainSchedule};
use pursuit_core::perception::{NoiseModel, Preset};
use pursuit_core::sim::{mpc_controller, read_recording, run_episode, write_recording, Track, WorldConfig};
use pursuit_core::synthesis::augment_dataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn short_world() -> WorldConfig {
    WorldConfig {
        max_frames: 160,
        ..WorldConfig::default()
    }
}

#[test]
fn record_label_train_drive() {
    let world = short_world();
    let script = Track::Straight.script();
    let mut mpc = mpc_controller(&world);
    let rec = run_episode(&world, &script, &mut mpc, NoiseModel::oracle(), None).unwrap();
    assert_eq!(rec.frames.len(), 160);

    let mut buf = Vec::new();
    write_recording(&mut buf, &rec).unwrap();
    let back = read_recording(&buf[..]).unwrap();
    let mut again = Vec::new();
    write_recording(&mut again, &back).unwrap();
    assert_eq!(buf, again);

    let (on, skipped) = generate_labels(&rec, NoiseModel::oracle(), &world.mpc, &world.params).unwrap();
    assert_eq!(on.len() + skipped, rec.frames.len());
    assert!(on.iter().all(|s| s.origin == Origin::OnTrajectory));

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let off = augment_dataset(&on, 4, 40, &mut rng, &world.mpc, &world.params).unwrap();
    assert_eq!(off.len(), 4 * on.iter().filter(|s| s.frame % 40 == 0).count());
    assert!(off.iter().all(|s| !s.is_on_trajectory()));

    let mut all = on.clone();
    all.extend(off);
    let mut ds = Vec::new();
    write_dataset(&mut ds, &all).unwrap();
    let parsed = read_dataset(&ds[..]).unwrap();
    assert_eq!(parsed.len(), all.len());
    for (a, b) in parsed.iter().zip(&all) {
        assert_eq!(a.is_on_trajectory(), b.is_on_trajectory());
        assert_eq!(a.converged, b.converged);
        assert!((a.label.steer - b.label.steer).abs() <= 1e-8 * (1.0 + b.label.steer.abs()));
    }

    let sched = TrainSchedule {
        phases: vec![Phase { epochs: 20, lr: 1e-3 }],
        batch_size: 32,
        seed: 5,
        ..TrainSchedule::default()
    };
    let (model, report) = train(&parsed, &sched).unwrap();
    assert_eq!(report.train_loss.len(), 20);
    assert!(report.train_loss.last().unwrap() < &report.train_loss[0]);

    let mut file = Vec::new();
    save_model(&mut file, &model).unwrap();
    let loaded = load_model(&file[..]).unwrap();
    assert_eq!(loaded, model);

    let mut ctl = MlpController::new(loaded);
    let noise = Preset::Lidar.model(1);
    let drive = run_episode(&world, &script, &mut ctl, noise, None).unwrap();
    assert!(!drive.frames.is_empty());
    for f in &drive.frames {
        assert!((0.0..=1.0).contains(&f.command.throttle));
        assert!((-1.0..=1.0).contains(&f.command.steer));
    }
}

#[test]
fn unreadable_inputs_are_rejected() {
    assert!(read_recording(&b"# something else\n"[..]).is_err());
    assert!(read_dataset(&b"# pursuit-labels v1\nframe=1 rel_x=oops\n"[..]).is_err());
    assert!(load_model(&b"# pursuit-mlp\nversion 9\n"[..]).is_err());
}
