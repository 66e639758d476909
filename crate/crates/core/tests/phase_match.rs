use cbl_core::atomic::closure_wavelength;
use cbl_core::constants::wavenumber;
use cbl_core::phase_match::{crossed_pumps, solve_planar, Branch, PhaseMatchSolution, WaveVector};
use nalgebra::{Rotation3, Unit, Vector3};
use proptest::prelude::*;

const L1: f64 = 780.241;
const L2: f64 = 775.978;
const LIR: f64 = 5233.208;

fn magnitudes(ir_scale: f64, bl_scale: f64) -> (f64, f64) {
    let bl = closure_wavelength(L1, L2, LIR).unwrap();
    (ir_scale * wavenumber(LIR), bl_scale * wavenumber(bl))
}

fn residual_with(s: &PhaseMatchSolution, bl_dir: Vector3<f64>, ir_dir: Vector3<f64>) -> f64 {
    (s.k1.vector() + s.k2.vector() - bl_dir * s.k_bl.magnitude - ir_dir * s.k_ir.magnitude).norm()
}

fn rotate_in_plane(s: &PhaseMatchSolution, d: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    Rotation3::from_axis_angle(&Unit::new_normalize(s.normal), angle) * d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn stored_residual_matches_recomputation(
        theta in -0.2f64..0.2, ir_scale in 0.5f64..1.5, bl_scale in 0.9f64..1.1, counter in any::<bool>(),
    ) {
        let (k1, k2) = crossed_pumps(L1, L2, theta).unwrap();
        let (ir, bl) = magnitudes(ir_scale, bl_scale);
        let branch = if counter { Branch::Counter } else { Branch::Co };
        let s = solve_planar(&k1, &k2, ir, bl, branch).unwrap();
        prop_assert!((s.recompute_residual() - s.residual).norm() <= 1e-9 * bl);
        prop_assert!((s.k_bl.direction.norm() - 1.0).abs() < 1e-12);
        prop_assert!((s.k_ir.direction.norm() - 1.0).abs() < 1e-12);
        prop_assert!(s.k_bl.direction.dot(&s.normal).abs() < 1e-12);
        prop_assert!(s.k_ir.direction.dot(&s.normal).abs() < 1e-12);
    }

    #[test]
    fn co_branch_is_a_local_minimum(
        theta in -0.2f64..0.2, ir_scale in 0.5f64..1.5, bl_scale in 0.9f64..1.1, step in 1e-6f64..1e-3,
    ) {
        let (k1, k2) = crossed_pumps(L1, L2, theta).unwrap();
        let (ir, bl) = magnitudes(ir_scale, bl_scale);
        let s = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        let sum = (s.k1.vector() + s.k2.vector()).normalize();
        let base = s.mismatch();
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step), (step, step), (step, -step)] {
            let bl_dir = rotate_in_plane(&s, &s.k_bl.direction, da);
            let ir_dir = rotate_in_plane(&s, &s.k_ir.direction, db);
            if bl_dir.dot(&sum) < 0.0 || ir_dir.dot(&sum) < 0.0 {
                continue;
            }
            prop_assert!(residual_with(&s, bl_dir, ir_dir) >= base - 1e-9 * bl);
        }
    }

    #[test]
    fn solution_is_rotation_invariant(
        theta in -0.2f64..0.2, ir_scale in 0.5f64..1.5, ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
        angle in 0.0f64..6.28,
    ) {
        prop_assume!(ax * ax + ay * ay + az * az > 1e-3);
        let (k1, k2) = crossed_pumps(L1, L2, theta).unwrap();
        let (ir, bl) = magnitudes(ir_scale, 1.0);
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vector3::new(ax, ay, az)), angle);
        let turn = |k: &WaveVector| WaveVector::new(k.label.clone(), k.magnitude, (rot * k.direction).normalize()).unwrap();
        let a = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        let b = solve_planar(&turn(&k1), &turn(&k2), ir, bl, Branch::Co).unwrap();
        prop_assert!((a.mismatch() - b.mismatch()).abs() <= 1e-9 * bl);
        prop_assert!((a.angle_bl.abs() - b.angle_bl.abs()).abs() < 1e-9);
        prop_assert!((a.angle_ir.abs() - b.angle_ir.abs()).abs() < 1e-9);
        prop_assert!((rot * a.k_bl.direction - b.k_bl.direction).norm() < 1e-9
            || (a.angle_bl + b.angle_bl).abs() < 1e-9);
    }

    #[test]
    fn counter_branch_never_beats_co_branch(theta in -0.2f64..0.2, ir_scale in 0.5f64..1.5, bl_scale in 0.9f64..1.1) {
        let (k1, k2) = crossed_pumps(L1, L2, theta).unwrap();
        let (ir, bl) = magnitudes(ir_scale, bl_scale);
        let co = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        let counter = solve_planar(&k1, &k2, ir, bl, Branch::Counter).unwrap();
        prop_assert!(counter.mismatch() >= co.mismatch() - 1e-9 * bl);
    }

    #[test]
    fn feasible_triangles_close(theta in -0.05f64..0.05, ir_scale in 0.5f64..1.5) {
        let (k1, k2) = crossed_pumps(L1, L2, theta).unwrap();
        let big_k = (k1.vector() + k2.vector()).norm();
        let (ir, _) = magnitudes(ir_scale, 1.0);
        let bl = big_k - 0.5 * ir;
        let s = solve_planar(&k1, &k2, ir, bl, Branch::Co).unwrap();
        prop_assert!(s.mismatch() < 1e-9 * bl, "{}", s.mismatch());
    }
}

#[test]
fn counter_residual_is_twice_the_infrared_wavenumber() {
    let (k1, k2) = crossed_pumps(L1, L2, 0.0).unwrap();
    let (ir, bl) = magnitudes(1.0, 1.0);
    let s = solve_planar(&k1, &k2, ir, bl, Branch::Counter).unwrap();
    assert!((s.mismatch() / (2.0 * ir) - 1.0).abs() < 1e-9);
    assert!((s.mismatch() - 2.4e6).abs() < 0.01 * 2.4e6);
    assert!(s.k_ir.direction.dot(&Vector3::z()) < -0.999_999);
}
