#![allow(dead_code)]

use std::f64::consts::PI;

use lem_core::eit::NormalStream;
use lem_core::envelope::argmin_label;
use lem_core::fem::{SideSet, TriMesh};
use lem_core::{GridSpec, LevelFunctionSet};
use nalgebra::{DMatrix, DVector, Matrix2};

/// Two crossing planes over a zero field; the three phases meet at the centre.
pub fn crossing_planes(n: usize) -> LevelFunctionSet {
    let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[1] - p[0], |p| 1.0 - p[0] - p[1]];
    LevelFunctionSet::from_fns(GridSpec::square(n).unwrap(), &fs, true).unwrap()
}

/// The crossing planes extended to the cube with a fourth phase below
/// `z = 1/2`.
pub fn crossing_planes_3d(n: usize) -> LevelFunctionSet {
    let fs: [fn(&[f64]) -> f64; 4] = [|_| 0.0, |p| p[1] - p[0], |p| 1.0 - p[0] - p[1], |p| p[2] - 0.5];
    LevelFunctionSet::from_fns(GridSpec::cube(n).unwrap(), &fs, true).unwrap()
}

/// `φ0 = 0`, `φ1 = a·(x − c)`, `φ2 = b·(x − c)` sampled on the grid.
pub fn planes_through(n: usize, c: [f64; 2], a: [f64; 2], b: [f64; 2]) -> LevelFunctionSet {
    let grid = GridSpec::square(n).unwrap();
    let f = |g: [f64; 2]| -> Vec<f64> {
        (0..grid.node_count())
            .map(|i| {
                let p = grid.node_point(i);
                g[0] * (p[0] - c[0]) + g[1] * (p[1] - c[1])
            })
            .collect()
    };
    LevelFunctionSet::new(grid, vec![vec![0.0; grid.node_count()], f(a), f(b)], true).unwrap()
}

/// Angular widths of the phases seen on a circle of radius `r` around `x`,
/// from `samples` equally spaced label queries.
pub fn sector_angles(phi: &LevelFunctionSet, x: [f64; 2], r: f64, samples: usize) -> Vec<f64> {
    let mut counts = vec![0usize; phi.kappa()];
    for s in 0..samples {
        let a = 2.0 * PI * (s as f64 + 0.5) / samples as f64;
        let p = [x[0] + r * a.cos(), x[1] + r * a.sin()];
        counts[argmin_label(phi, &p).unwrap() as usize] += 1;
    }
    counts.iter().map(|&c| 2.0 * PI * c as f64 / samples as f64).collect()
}

/// Classical fourth-order Runge–Kutta for `ẋ = f(x)`.
pub fn rk4(f: impl Fn([f64; 2]) -> [f64; 2], mut x: [f64; 2], t: f64, steps: usize) -> [f64; 2] {
    let dt = t / steps as f64;
    let add = |x: [f64; 2], k: [f64; 2], s: f64| [x[0] + s * k[0], x[1] + s * k[1]];
    for _ in 0..steps {
        let k1 = f(x);
        let k2 = f(add(x, k1, dt / 2.0));
        let k3 = f(add(x, k2, dt / 2.0));
        let k4 = f(add(x, k3, dt));
        for i in 0..2 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    x
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn random_spd(rng: &mut NormalStream, count: usize) -> Vec<Matrix2<f64>> {
    (0..count)
        .map(|_| {
            let l = Matrix2::new(1.0 + rng.next_normal().abs(), 0.0, rng.next_normal(), 0.5 + rng.next_normal().abs());
            l * l.transpose()
        })
        .collect()
}

/// Dense stiffness and mass assembled from the node coordinates alone.
pub fn dense_matrices(mesh: &TriMesh, sigma: &[Matrix2<f64>]) -> (DMatrix<f64>, DMatrix<f64>) {
    let nn = mesh.node_count();
    let mut k = DMatrix::zeros(nn, nn);
    let mut m = DMatrix::zeros(nn, nn);
    for (e, tri) in mesh.elements().iter().enumerate() {
        let p = tri.map(|i| mesh.node_point(i));
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let area = det.abs() / 2.0;
        let grad = |a: usize| {
            let (b, c) = (p[(a + 1) % 3], p[(a + 2) % 3]);
            nalgebra::Vector2::new(b[1] - c[1], c[0] - b[0]) / det
        };
        for a in 0..3 {
            for b in 0..3 {
                k[(tri[a], tri[b])] += area * (sigma[e] * grad(b)).dot(&grad(a));
                m[(tri[a], tri[b])] += area / 12.0 * if a == b { 2.0 } else { 1.0 };
            }
        }
    }
    (k, m)
}

/// Solves `K x = b` on the free nodes with `x = 0` on the fixed ones.
pub fn dense_solve(k: &DMatrix<f64>, b: &[f64], fixed: &[bool]) -> Vec<f64> {
    let free: Vec<usize> = (0..b.len()).filter(|&i| !fixed[i]).collect();
    let kr = DMatrix::from_fn(free.len(), free.len(), |i, j| k[(free[i], free[j])]);
    let br = DVector::from_iterator(free.len(), free.iter().map(|&i| b[i]));
    let xr = kr.lu().solve(&br).unwrap();
    let mut x = vec![0.0; b.len()];
    for (r, &i) in free.iter().enumerate() {
        x[i] = xr[r];
    }
    x
}

pub fn on_sides(mesh: &TriMesh, sides: SideSet) -> Vec<bool> {
    (0..mesh.node_count()).map(|i| mesh.node_tags(i).sides().any(|s| sides.contains(s))).collect()
}
