use lem_core::eit::NormalStream;
use lem_core::fem::TriMesh;
use lem_core::shape_gradient::{
    assemble_s1_general, assemble_s1_iso, descent_direction, evaluate_dj, fd_check, RegParams,
    ShapeGradientData,
};
use lem_core::transport::VelocityField;
use lem_core::{GridSpec, LevelFunctionSet};
use nalgebra::{Matrix2, Vector2};

fn random(rng: &mut NormalStream, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.next_normal()).collect()
}

fn states(mesh: &TriMesh, seed: u64) -> [Vec<f64>; 4] {
    let mut rng = NormalStream::new(seed);
    let nn = mesh.node_count();
    [random(&mut rng, nn), random(&mut rng, nn), random(&mut rng, nn), random(&mut rng, nn)]
}

fn iso_sigma(mesh: &TriMesh, seed: u64) -> Vec<Matrix2<f64>> {
    let mut rng = NormalStream::new(seed);
    (0..mesh.element_count()).map(|_| Matrix2::identity() * (1.0 + rng.next_normal().abs())).collect()
}

fn close(a: &Matrix2<f64>, b: &Matrix2<f64>, tol: f64) -> bool {
    (a - b).abs().max() <= tol
}

#[test]
fn equal_states_give_a_zero_tensor() {
    let mesh = TriMesh::new(6).unwrap();
    let [u, _, _, _] = states(&mesh, 1);
    let z = vec![0.0; mesh.node_count()];
    let s = assemble_s1_iso(&mesh, &u, &u, &z, &z, &iso_sigma(&mesh, 2)).unwrap();
    assert!(s.s1().iter().all(|m| *m == Matrix2::zeros()));
}

#[test]
fn swapping_the_two_state_pairs_changes_nothing() {
    let mesh = TriMesh::new(6).unwrap();
    let [u, v, p, q] = states(&mesh, 3);
    let sigma = iso_sigma(&mesh, 4);
    let a = assemble_s1_iso(&mesh, &u, &v, &p, &q, &sigma).unwrap();
    let b = assemble_s1_iso(&mesh, &v, &u, &q, &p, &sigma).unwrap();
    for (x, y) in a.s1().iter().zip(b.s1()) {
        assert!(close(x, y, 1e-12));
        assert!(close(x, &x.transpose(), 1e-12));
    }
}

#[test]
fn single_element_by_hand() {
    // ∇u = (1, 0), ∇p = (0, 1), σ = 2I and ū = 0 on the first element
    let mesh = TriMesh::new(2).unwrap();
    let u = mesh.interpolate(|x, _| x);
    let p = mesh.interpolate(|_, y| y);
    let z = vec![0.0; mesh.node_count()];
    let sigma = vec![Matrix2::identity() * 2.0; mesh.element_count()];
    let s = assemble_s1_iso(&mesh, &u, &u, &p, &z, &sigma).unwrap();
    let t = assemble_s1_iso(&mesh, &u, &z, &p, &z, &sigma).unwrap();
    assert!(close(&s.s1()[0], &Matrix2::new(0.0, -2.0, -2.0, 0.0), 1e-14));
    // ū = u when v = 0: only the ½ū² trace term differs
    let [a, b, c] = mesh.element(0);
    let ubar = (u[a] + u[b] + u[c]) / 3.0;
    assert!(close(&(t.s1()[0] - s.s1()[0]), &(Matrix2::identity() * 0.5 * ubar * ubar), 1e-14));
}

#[test]
fn general_tensor_reduces_to_the_isotropic_one() {
    let mesh = TriMesh::new(6).unwrap();
    let [u, v, p, q] = states(&mesh, 5);
    let sigma = iso_sigma(&mesh, 6);
    let f = vec![0.0; mesh.element_count()];
    let a = assemble_s1_iso(&mesh, &u, &v, &p, &q, &sigma).unwrap();
    let b = assemble_s1_general(&mesh, &u, &v, &p, &q, &sigma, &f, None).unwrap();
    for (x, y) in a.s1().iter().zip(b.s1()) {
        assert!(close(x, y, 1e-12));
    }
    assert!(b.s0().iter().all(|z| *z == Vector2::zeros()));
}

#[test]
fn constant_source_adds_a_diagonal_term() {
    let mesh = TriMesh::new(2).unwrap();
    let [u, v, p, q] = states(&mesh, 7);
    let sigma = iso_sigma(&mesh, 8);
    let c = 1.7;
    let zero = assemble_s1_general(&mesh, &u, &v, &p, &q, &sigma, &[0.0; 8], None).unwrap();
    let with = assemble_s1_general(&mesh, &u, &v, &p, &q, &sigma, &[c; 8], None).unwrap();
    for e in 0..mesh.element_count() {
        let pq: f64 = mesh.element(e).iter().map(|&i| p[i] + q[i]).sum::<f64>() / 3.0;
        assert!(close(&(with.s1()[e] - zero.s1()[e]), &(Matrix2::identity() * (-c * pq)), 1e-13));
    }
}

#[test]
fn directional_derivative_identities() {
    let mesh = TriMesh::new(8).unwrap();
    let ne = mesh.element_count();
    let id = ShapeGradientData::new(vec![Matrix2::identity(); ne], vec![Vector2::zeros(); ne]).unwrap();
    let z = vec![0.0; mesh.node_count()];
    assert_eq!(evaluate_dj(&mesh, &id, &z, &z).unwrap(), 0.0);
    let (x, y) = (mesh.interpolate(|x, _| x), mesh.interpolate(|_, y| y));
    assert!((evaluate_dj(&mesh, &id, &x, &y).unwrap() - 2.0).abs() < 1e-12);

    let [u, v, p, q] = states(&mesh, 9);
    let s = assemble_s1_iso(&mesh, &u, &v, &p, &q, &iso_sigma(&mesh, 10)).unwrap();
    let [ax, ay, bx, by] = states(&mesh, 11);
    let (a, b) = (0.7, -2.3);
    let cx: Vec<f64> = ax.iter().zip(&bx).map(|(s, t)| a * s + b * t).collect();
    let cy: Vec<f64> = ay.iter().zip(&by).map(|(s, t)| a * s + b * t).collect();
    let lhs = evaluate_dj(&mesh, &s, &cx, &cy).unwrap();
    let rhs = a * evaluate_dj(&mesh, &s, &ax, &ay).unwrap() + b * evaluate_dj(&mesh, &s, &bx, &by).unwrap();
    assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1.0));
}

#[test]
fn descent_direction_properties() {
    let mesh = TriMesh::new(12).unwrap();
    let alpha = RegParams::default();
    let zero = ShapeGradientData::zeros(mesh.element_count());
    let d = descent_direction(&mesh, &zero, alpha).unwrap();
    assert_eq!(d.field.max_norm(), 0.0);
    for seed in 0..5 {
        let [u, v, p, q] = states(&mesh, 20 + seed);
        let s = assemble_s1_iso(&mesh, &u, &v, &p, &q, &iso_sigma(&mesh, seed)).unwrap();
        let d = descent_direction(&mesh, &s, alpha).unwrap();
        let dj = evaluate_dj(&mesh, &s, d.field.vx(), d.field.vy()).unwrap();
        assert!(dj < 0.0, "seed {seed}: {dj}");
        let mut s3 = s.clone();
        s3.scale(3.0);
        let d3 = descent_direction(&mesh, &s3, alpha).unwrap();
        for (a, b) in d3.field.vx().iter().zip(d.field.vx()).chain(d3.field.vy().iter().zip(d.field.vy())) {
            assert!((a - 3.0 * b).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}

#[test]
fn zero_velocity_has_zero_finite_difference_error() {
    let grid = GridSpec::square(8).unwrap();
    let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| p[0] - 0.5];
    let phi = LevelFunctionSet::from_fns(grid, &fs, true).unwrap();
    let theta = VelocityField::zero(grid).unwrap();
    let r = fd_check(&phi, &theta, 1e-3, 0.0, 0.5, |phi| Ok(phi.field(1).iter().sum())).unwrap();
    assert_eq!(r.rel_error, 0.0);
    assert_eq!(r.quotient, 0.0);
}
