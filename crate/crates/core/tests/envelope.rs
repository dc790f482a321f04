mod common;

use std::f64::consts::PI;

use common::{crossing_planes, crossing_planes_3d, dist, planes_through, sector_angles};
use lem_core::envelope::{
    argmin_label, check_regularity, detect_tuple_points, extract_phases, interface_geometry,
    lower_envelope, pairwise_interface, triple_angles, DEFAULT_EPS_RANK,
};
use lem_core::{GridSpec, LevelFunctionSet};

#[test]
fn envelope_values_at_sample_points() {
    let phi = crossing_planes(32);
    assert!((lower_envelope(&phi, &[0.9, 0.9]).unwrap() + 0.8).abs() < 1e-12);
    assert_eq!(lower_envelope(&phi, &[0.5, 0.5]).unwrap(), 0.0);
    assert_eq!(argmin_label(&phi, &[0.2, 0.5]).unwrap(), 0);
    assert_eq!(argmin_label(&phi, &[0.5, 0.5]).unwrap(), 0);
    assert_eq!(argmin_label(&phi, &[0.9, 0.1]).unwrap(), 1);
}

#[test]
fn phase_areas_match_the_wedges() {
    let n = 256;
    let phi = crossing_planes(n);
    let areas = extract_phases(&phi).areas();
    let h = 1.0 / n as f64;
    for (a, want) in areas.iter().zip([0.25, 0.375, 0.375]) {
        assert!((a - want).abs() <= 4.0 * h, "{a} vs {want}");
    }
    assert!((areas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn constant_offset_field_never_wins() {
    let grid = GridSpec::square(8).unwrap();
    let phi = LevelFunctionSet::new(grid, vec![vec![0.0; 81], vec![1.0; 81]], true).unwrap();
    assert_eq!(extract_phases(&phi).count(0), 64);
}

#[test]
fn four_phases_meet_at_the_cube_centre() {
    let n = 32;
    let phi = crossing_planes_3d(n);
    let labels = extract_phases(&phi);
    let grid = phi.grid();
    let mut seen = [false; 4];
    for i in [n / 2 - 1, n / 2] {
        for j in [n / 2 - 1, n / 2] {
            for k in [n / 2 - 1, n / 2] {
                seen[labels.label(grid.cell_index(&[i, j, k])) as usize] = true;
            }
        }
    }
    assert_eq!(seen, [true; 4]);
    let found = detect_tuple_points(&phi).unwrap();
    assert_eq!(found.points.len(), 1);
    assert!(dist(&found.points[0], &[0.5, 0.5, 0.5]) < 1.0 / n as f64);
}

#[test]
fn diagonal_interface_is_active_below_the_junction_only() {
    let phi = crossing_planes(64);
    let tol = 1e-12;
    let p01 = pairwise_interface(&phi, 0, 1).unwrap();
    assert!(!p01.active.is_empty() && !p01.ghost.is_empty());
    for s in p01.all_segments() {
        for q in [s.a, s.b] {
            assert!((q[0] - q[1]).abs() < tol);
        }
    }
    for s in &p01.active {
        assert!(s.midpoint()[1] <= 0.5 + tol);
    }
    for s in &p01.ghost {
        assert!(s.midpoint()[1] >= 0.5 - tol);
    }
    let p12 = pairwise_interface(&phi, 1, 2).unwrap();
    assert!(!p12.active.is_empty());
    for s in &p12.active {
        assert!((s.a[1] - 0.5).abs() < tol && (s.b[1] - 0.5).abs() < tol);
        assert!(s.midpoint()[0] >= 0.5 - tol);
    }
}

#[test]
fn two_phase_line_has_no_ghost() {
    let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| p[1] - 0.5];
    let phi = LevelFunctionSet::from_fns(GridSpec::square(20).unwrap(), &fs, true).unwrap();
    let p = pairwise_interface(&phi, 0, 1).unwrap();
    assert!(p.ghost.is_empty());
    let total: f64 = p.active.iter().map(|s| s.length()).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn triple_point_and_angles_of_the_crossing_planes() {
    for n in [63, 64, 128] {
        let phi = crossing_planes(n);
        let geo = interface_geometry(&phi).unwrap();
        assert_eq!(geo.tuple_points.len(), 1);
        assert!(dist(&geo.tuple_points[0], &[0.5, 0.5]) < 1e-8);
    }
    let phi = crossing_planes(64);
    let b = triple_angles(&phi, &[0.5, 0.5], DEFAULT_EPS_RANK).unwrap();
    let want = [PI / 2.0, 3.0 * PI / 4.0, 3.0 * PI / 4.0];
    let oracle = sector_angles(&phi, [0.5, 0.5], 4.0 / 64.0, 36_000);
    for k in 0..3 {
        assert!((b[k] - want[k]).abs() < 1e-10);
        assert!((oracle[k] - want[k]).abs() < 1e-3);
    }
}

#[test]
fn symmetric_planes_give_equal_angles() {
    let c = [0.5, 0.5];
    let rot = |a: f64| [a.cos(), a.sin()];
    // unit gradients 60° apart: the three pairwise differences are then
    // unit vectors 120° apart
    let phi = planes_through(64, c, rot(PI / 2.0), rot(PI / 2.0 + PI / 3.0));
    let b = triple_angles(&phi, &c, DEFAULT_EPS_RANK).unwrap();
    for v in b {
        assert!((v - 2.0 * PI / 3.0).abs() < 1e-10, "{b:?}");
    }
}

#[test]
fn inactive_third_field_gives_no_tuple_point() {
    let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[1] - p[0], |p| 10.0 + p[0]];
    let phi = LevelFunctionSet::from_fns(GridSpec::square(32).unwrap(), &fs, true).unwrap();
    assert!(detect_tuple_points(&phi).unwrap().points.is_empty());
}

#[test]
fn regularity_of_the_crossing_planes() {
    let r = check_regularity(&crossing_planes(64), DEFAULT_EPS_RANK);
    assert!(r.pass);
    let s2 = 2f64.sqrt();
    for ((k, l), want) in [((0, 1), s2), ((0, 2), s2), ((1, 2), 2.0)] {
        let got = r.pair(k, l).unwrap().min_gradient.unwrap();
        assert!((got - want).abs() < 1e-9, "pair ({k},{l}): {got}");
    }
}

#[test]
fn identical_fields_fail_regularity() {
    let grid = GridSpec::square(8).unwrap();
    let phi = LevelFunctionSet::new(grid, vec![vec![0.0; 81], vec![0.0; 81]], true).unwrap();
    let r = check_regularity(&phi, DEFAULT_EPS_RANK);
    assert!(!r.pass);
    assert_eq!(r.pair(0, 1).unwrap().min_gradient, Some(0.0));
}

#[test]
fn parabola_regularity_is_its_slope_on_the_contour() {
    let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| (p[0] - 0.5).powi(2) - 0.01];
    let phi = LevelFunctionSet::from_fns(GridSpec::square(100).unwrap(), &fs, true).unwrap();
    let r = check_regularity(&phi, DEFAULT_EPS_RANK);
    assert!(r.pass);
    let m = r.pair(0, 1).unwrap().min_gradient.unwrap();
    assert!((m - 0.2).abs() < 0.02, "{m}");
}
