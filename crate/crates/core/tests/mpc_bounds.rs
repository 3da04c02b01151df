use proptest::prelude::*;
use pursuit_core::geometry::Pose2D;
use pursuit_core::mpc::{ego_aligned, sequence_cost, solve_relative, MpcConfig};
use pursuit_core::vehicle::{ControlCommand, VehicleParams};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_stay_in_bounds_and_beat_idling(
        x in -6.0..6.0f64,
        y in 3.0..35.0f64,
        theta in -1.0..1.0f64,
        v_ego in 0.0..14.0f64,
        v_ref in 0.0..14.0f64,
    ) {
        let cfg = MpcConfig::default();
        let p = VehicleParams::default();
        let rel = Pose2D::new(x, y, theta);
        let sol = solve_relative(&rel, v_ego, v_ref, &cfg, &p, None);
        for u in &sol.controls {
            prop_assert!((0.0..=1.0).contains(&u.throttle));
            prop_assert!((-1.0..=1.0).contains(&u.steer));
        }
        prop_assert_eq!(sol.command, sol.controls[0]);
        let (ego, reference) = ego_aligned(&rel, v_ego, v_ref);
        let idle = vec![ControlCommand::IDLE; sol.controls.len()];
        let idle_cost = sequence_cost(&ego, &reference, &idle, &cfg, &p);
        prop_assert!(sol.cost <= idle_cost + 1e-9);
        let replay = sequence_cost(&ego, &reference, &sol.controls, &cfg, &p);
        prop_assert!((replay - sol.cost).abs() <= 1e-9 * (1.0 + replay));
    }
}

#[test]
fn solves_are_deterministic() {
    let cfg = MpcConfig::default();
    let p = VehicleParams::default();
    let rel = Pose2D::new(1.3, 14.0, -0.2);
    let a = solve_relative(&rel, 5.0, 7.0, &cfg, &p, None);
    let b = solve_relative(&rel, 5.0, 7.0, &cfg, &p, None);
    assert_eq!(a.controls, b.controls);
    assert_eq!(a.cost.to_bits(), b.cost.to_bits());
}
