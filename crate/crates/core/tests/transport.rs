mod common;

use std::f64::consts::PI;

use common::{crossing_planes, dist, rk4};
use lem_core::envelope::detect_tuple_points;
use lem_core::transport::{advect, advect_step, cfl_dt, TransportParams, VelocityField, EPS_VEL};
use lem_core::{Error, GridSpec, LevelFunctionSet};

fn constant(grid: GridSpec, v: [f64; 2]) -> VelocityField {
    VelocityField::with_projection(grid, vec![v[0]; grid.node_count()], vec![v[1]; grid.node_count()])
        .unwrap()
        .0
}

#[test]
fn time_step_from_the_cfl_number() {
    let grid = GridSpec::square(64).unwrap();
    let v = VelocityField::from_fn(grid, |_, _| [2.0, 0.0]).unwrap();
    assert!((cfl_dt(&v, 1.0 / 64.0, 0.5) - 1.0 / 256.0).abs() < 1e-15);
    let v = VelocityField::from_fn(grid, |_, _| [0.6, 0.4]).unwrap();
    assert!((cfl_dt(&v, 0.01, 0.9) - 0.009).abs() < 1e-15);
    let z = VelocityField::zero(grid).unwrap();
    assert_eq!(cfl_dt(&z, 0.01, 0.5), 0.5 * 0.01 / EPS_VEL);
}

#[test]
fn upwind_step_is_exact_on_linear_fields() {
    let n = 32;
    let grid = GridSpec::square(n).unwrap();
    let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| p[1] - p[0]];
    let phi = LevelFunctionSet::from_fns(grid, &fs, true).unwrap();
    let theta = constant(grid, [1.0, 0.0]);
    let dt = grid.h() / 2.0;
    let out = advect_step(&phi, &theta, dt).unwrap();
    for idx in 0..grid.node_count() {
        let [i, _, _] = grid.node_ijk(idx);
        let shift = if i == 0 || i == n { 0.0 } else { dt };
        assert!((out.field(1)[idx] - phi.field(1)[idx] - shift).abs() < 1e-14);
    }
    assert_eq!(out.field(0), phi.field(0));
}

#[test]
fn zero_velocity_and_zero_time_change_nothing() {
    let phi = crossing_planes(16);
    let grid = *phi.grid();
    let z = VelocityField::zero(grid).unwrap();
    assert_eq!(advect_step(&phi, &z, 0.3).unwrap(), phi);
    let v = constant(grid, [0.3, -0.2]);
    assert_eq!(advect(&phi, &v, TransportParams::new(0.5, 0.0).unwrap()).unwrap(), phi);
}

#[test]
fn step_above_the_cfl_limit_is_refused() {
    let phi = crossing_planes(16);
    let v = constant(*phi.grid(), [1.0, 0.0]);
    let r = advect_step(&phi, &v, 2.0 / 16.0);
    assert!(matches!(r, Err(Error::StepSize { .. })));
}

#[test]
fn linear_fields_shift_by_the_elapsed_time() {
    let grid = GridSpec::square(40).unwrap();
    let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[1] - p[0], |p| 1.0 - p[0] - p[1]];
    let phi = LevelFunctionSet::from_fns(grid, &fs, true).unwrap();
    let theta = constant(grid, [1.0, 0.0]);
    let out = advect(&phi, &theta, TransportParams::new(0.5, 0.25).unwrap()).unwrap();
    let n = grid.n();
    let steps = (0.25 / cfl_dt(&theta, grid.h(), 0.5)).ceil() as usize;
    for idx in 0..grid.node_count() {
        let [i, _, _] = grid.node_ijk(idx);
        // columns within the numerical domain of dependence of the inflow
        // wall see its frozen values
        if i <= steps || i == n {
            continue;
        }
        assert!((out.field(1)[idx] - phi.field(1)[idx] - 0.25).abs() < 1e-12);
        assert!((out.field(2)[idx] - phi.field(2)[idx] - 0.25).abs() < 1e-12);
    }
}

#[test]
fn triple_point_follows_a_constant_flow() {
    let n = 64;
    let phi = crossing_planes(n);
    let theta = constant(*phi.grid(), [0.1, 0.0]);
    let out = advect(&phi, &theta, TransportParams::new(0.5, 0.5).unwrap()).unwrap();
    let pts = detect_tuple_points(&out).unwrap().points;
    assert_eq!(pts.len(), 1);
    assert!(dist(&pts[0], &[0.55, 0.5]) < 2.0 / n as f64, "{:?}", pts[0]);
}

#[test]
fn circle_is_carried_along_the_flow() {
    let n = 96;
    let grid = GridSpec::square(n).unwrap();
    let bump = |x: f64, y: f64| (PI * x).sin().powi(2) * (PI * y).sin().powi(2);
    let flow = move |p: [f64; 2]| [0.0, 0.5 * bump(p[0], p[1])];
    let theta = VelocityField::from_fn(grid, |x, y| flow([x, y])).unwrap();
    let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| (p[0] - 0.5).powi(2) + (p[1] - 0.3).powi(2) - 0.04];
    let phi = LevelFunctionSet::from_fns(grid, &fs, true).unwrap();
    let cfl = 0.5;
    let t0 = 0.4;
    let out = advect(&phi, &theta, TransportParams::new(cfl, t0).unwrap()).unwrap();
    let dt = cfl_dt(&theta, grid.h(), cfl);
    let mut worst: f64 = 0.0;
    for k in 0..64 {
        let a = 2.0 * PI * k as f64 / 64.0;
        let x0 = [0.5 + 0.2 * a.cos(), 0.3 + 0.2 * a.sin()];
        let x1 = rk4(flow, x0, t0, 400);
        let v = out.value(1, &x1).unwrap();
        let g = out.gradient(1, &x1).unwrap();
        worst = worst.max(v.abs() / g[0].hypot(g[1]));
    }
    assert!(worst <= 2.0 * (grid.h() + dt), "distance {worst}");
}
