//! Junctions of several phases: points where a subset of the level
//! functions coincide, located by Newton's method on the interpolated
//! fields.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{interpolant_gradient, interpolate, LevelFunctionSet};

/// Default lower bound on gradient norms and singular values.
pub const DEFAULT_EPS_RANK: f64 = 1e-6;

const MAX_NEWTON_ITERS: usize = 50;

/// Result of scanning the grid for (d+1)-tuple points.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TupleSearch {
    pub points: Vec<Vec<f64>>,
    /// Smallest singular value of the central-difference Jacobian of the
    /// coincidence map at each point, aligned with `points`.
    pub min_singular: Vec<f64>,
    /// Flagged cells where Newton did not converge.
    pub failed_cells: Vec<usize>,
    /// Flagged cells where the Jacobian became singular.
    pub singular_cells: Vec<usize>,
}

pub(crate) enum Newton {
    Converged(Vec<f64>),
    Singular,
    Diverged,
}

/// `r_i = φ_{k_0}(x) − φ_{k_{i+1}}(x)`
fn residual(phi: &LevelFunctionSet, idx: &[usize], x: &[f64]) -> Vec<f64> {
    let g = phi.grid();
    let base = interpolate(g, phi.field(idx[0]), x);
    idx[1..]
        .iter()
        .map(|&k| base - interpolate(g, phi.field(k), x))
        .collect()
}

fn jacobian(phi: &LevelFunctionSet, idx: &[usize], x: &[f64], exact: bool) -> DMatrix<f64> {
    let g = phi.grid();
    let d = g.dim();
    let grad = |k: usize| {
        if exact {
            interpolant_gradient(g, phi.field(k), x)
        } else {
            crate::grid::central_gradient(g, phi.field(k), x)
        }
    };
    let g0 = grad(idx[0]);
    let mut jac = DMatrix::zeros(idx.len() - 1, d);
    for (r, &k) in idx[1..].iter().enumerate() {
        let gk = grad(k);
        for a in 0..d {
            jac[(r, a)] = g0[a] - gk[a];
        }
    }
    jac
}

pub(crate) fn min_singular(jac: &DMatrix<f64>) -> f64 {
    jac.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |m, &s| m.min(s))
}

/// Smallest singular value of the central-difference Jacobian of the
/// coincidence map for the index set `idx` at `x`.
pub(crate) fn coincidence_min_singular(phi: &LevelFunctionSet, idx: &[usize], x: &[f64]) -> f64 {
    min_singular(&jacobian(phi, idx, x, false))
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Damped (minimum-norm when underdetermined) Newton iteration for the
/// coincidence set of `idx`, started from `x0`.
pub(crate) fn project_to_coincidence(phi: &LevelFunctionSet, idx: &[usize], x0: &[f64]) -> Newton {
    let tol = phi.tol_eq();
    let d = phi.grid().dim();
    let mut x = x0.to_vec();
    let mut r = residual(phi, idx, &x);
    for _ in 0..MAX_NEWTON_ITERS {
        let rn = norm_inf(&r);
        if rn < tol {
            return Newton::Converged(x);
        }
        let jac = jacobian(phi, idx, &x, true);
        let svd = jac.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !(smin > 1e-12 * smax) {
            return Newton::Singular;
        }
        let rhs = DMatrix::from_column_slice(r.len(), 1, &r);
        let step = match svd.solve(&rhs, 1e-14 * smax) {
            Ok(s) => s,
            Err(_) => return Newton::Singular,
        };
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = (0..d)
                .map(|a| (x[a] - lambda * step[a]).clamp(0.0, 1.0))
                .collect();
            let rt = residual(phi, idx, &trial);
            if norm_inf(&rt) < rn {
                x = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            return Newton::Diverged;
        }
    }
    if norm_inf(&r) < tol {
        Newton::Converged(x)
    } else {
        Newton::Diverged
    }
}

/// Phases that attain the minimum (within `tol`) at some corner of `cell`.
pub(crate) fn corner_phases(phi: &LevelFunctionSet, cell: usize, tol: f64) -> Vec<bool> {
    let mut seen = vec![false; phi.kappa()];
    for node in phi.grid().cell_corners(cell) {
        let vals: Vec<f64> = phi.fields().iter().map(|f| f[node]).collect();
        let m = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        for (k, &v) in vals.iter().enumerate() {
            if v <= m + tol {
                seen[k] = true;
            }
        }
    }
    seen
}

pub(crate) fn in_cell(phi: &LevelFunctionSet, cell: usize, x: &[f64], margin: f64) -> bool {
    let g = phi.grid();
    let ijk = g.cell_ijk(cell);
    (0..g.dim()).all(|a| {
        let lo = g.coord(ijk[a]) - margin;
        let hi = g.coord(ijk[a] + 1) + margin;
        x[a] >= lo && x[a] <= hi
    })
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Points where all κ = d + 1 phases meet.
pub fn detect_tuple_points(phi: &LevelFunctionSet) -> Result<TupleSearch> {
    let grid = *phi.grid();
    let kappa = phi.kappa();
    if kappa != grid.dim() + 1 {
        return Err(Error::Precondition(format!(
            "tuple points need κ = d + 1 = {}, got κ = {kappa}",
            grid.dim() + 1
        )));
    }
    let tol = phi.tol_eq();
    let h = grid.h();
    let idx: Vec<usize> = (0..kappa).collect();
    let mut out = TupleSearch::default();
    for cell in 0..grid.cell_count() {
        if !corner_phases(phi, cell, tol).into_iter().all(|s| s) {
            continue;
        }
        let x0 = &grid.cell_centroid(cell)[..grid.dim()];
        match project_to_coincidence(phi, &idx, x0) {
            Newton::Converged(x) => {
                if !in_cell(phi, cell, &x, 0.5 * h) {
                    continue;
                }
                if out.points.iter().any(|p| dist(p, &x) <= h) {
                    continue;
                }
                out.min_singular.push(coincidence_min_singular(phi, &idx, &x));
                out.points.push(x);
            }
            Newton::Singular => out.singular_cells.push(cell),
            Newton::Diverged => out.failed_cells.push(cell),
        }
    }
    Ok(out)
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

/// Opening angles `(β_0, β_1, β_2)` of the three phases at a triple point,
/// from the gradients of the pairwise differences.
pub fn triple_angles(phi: &LevelFunctionSet, x: &[f64], eps_rank: f64) -> Result<[f64; 3]> {
    let grid = phi.grid();
    if grid.dim() != 2 || phi.kappa() != 3 {
        return Err(Error::Precondition("triple angles need d = 2 and κ = 3".into()));
    }
    if !phi.pinned_zero() {
        return Err(Error::Precondition("triple angles need field 0 pinned to zero".into()));
    }
    grid.check_point(x)?;
    let vals = phi.values_at(x);
    let spread = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if spread > phi.tol_eq() {
        return Err(Error::Precondition(format!(
            "{x:?} is not a triple point: field spread {spread:.3e}"
        )));
    }
    let smin = coincidence_min_singular(phi, &[0, 1, 2], x);
    if !(smin > eps_rank) {
        return Err(Error::DegenerateJunction {
            point: x.to_vec(),
            min_singular: smin,
        });
    }
    let grads: Vec<[f64; 3]> = (0..3).map(|k| crate::grid::central_gradient(grid, phi.field(k), x)).collect();
    let mut beta = [0.0; 3];
    for (k, b) in beta.iter_mut().enumerate() {
        let next = grads[(k + 1) % 3];
        let prev = grads[(k + 2) % 3];
        let u = sub(next, grads[k]);
        let v = sub(grads[k], prev);
        let c = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        *b = c.clamp(-1.0, 1.0).acos();
    }
    Ok(beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use std::f64::consts::PI;

    fn example(n: usize) -> LevelFunctionSet {
        let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[1] - p[0], |p| 1.0 - p[0] - p[1]];
        LevelFunctionSet::from_fns(GridSpec::square(n).unwrap(), &fs, true).unwrap()
    }

    #[test]
    fn finds_the_example_triple_point_on_odd_grids_too() {
        for n in [16, 17, 33] {
            let found = detect_tuple_points(&example(n)).unwrap();
            assert_eq!(found.points.len(), 1, "n = {n}");
            let p = &found.points[0];
            assert!((p[0] - 0.5).abs() < 1e-8 && (p[1] - 0.5).abs() < 1e-8);
            assert!(found.failed_cells.is_empty());
        }
    }

    #[test]
    fn inactive_third_phase_has_no_triple_point() {
        let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[1] - p[0], |p| 10.0 + p[0]];
        let phi = LevelFunctionSet::from_fns(GridSpec::square(16).unwrap(), &fs, true).unwrap();
        assert!(detect_tuple_points(&phi).unwrap().points.is_empty());
    }

    #[test]
    fn wrong_kappa_is_rejected() {
        let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| p[1] - p[0]];
        let phi = LevelFunctionSet::from_fns(GridSpec::square(8).unwrap(), &fs, true).unwrap();
        assert!(matches!(detect_tuple_points(&phi), Err(Error::Precondition(_))));
    }

    #[test]
    fn example_angles() {
        let b = triple_angles(&example(32), &[0.5, 0.5], DEFAULT_EPS_RANK).unwrap();
        assert!((b[0] - PI / 2.0).abs() < 1e-12);
        assert!((b[1] - 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((b[2] - 3.0 * PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_junction_has_equal_angles() {
        // φ_1, φ_2 chosen so the three pairwise difference gradients are
        // unit vectors 120° apart
        let c = (2.0 * PI / 3.0).cos();
        let s = (2.0 * PI / 3.0).sin();
        let g1 = [1.0, 0.0];
        let g2 = [1.0 + c, s];
        let phi = LevelFunctionSet::from_fns(
            GridSpec::square(20).unwrap(),
            &[
                Box::new(|_: &[f64]| 0.0) as Box<dyn Fn(&[f64]) -> f64>,
                Box::new(move |p: &[f64]| g1[0] * (p[0] - 0.5) + g1[1] * (p[1] - 0.5)),
                Box::new(move |p: &[f64]| g2[0] * (p[0] - 0.5) + g2[1] * (p[1] - 0.5)),
            ],
            true,
        )
        .unwrap();
        let b = triple_angles(&phi, &[0.5, 0.5], DEFAULT_EPS_RANK).unwrap();
        for beta in b {
            assert!((beta - 2.0 * PI / 3.0).abs() < 1e-12, "{b:?}");
        }
    }

    #[test]
    fn off_junction_point_is_rejected() {
        assert!(matches!(
            triple_angles(&example(16), &[0.2, 0.5], DEFAULT_EPS_RANK),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn parallel_gradients_are_degenerate() {
        let fs: [fn(&[f64]) -> f64; 3] = [|_| 0.0, |p| p[0] - 0.5, |p| 2.0 * (p[0] - 0.5)];
        let phi = LevelFunctionSet::from_fns(GridSpec::square(8).unwrap(), &fs, true).unwrap();
        assert!(matches!(
            triple_angles(&phi, &[0.5, 0.5], DEFAULT_EPS_RANK),
            Err(Error::DegenerateJunction { .. })
        ));
    }
}
