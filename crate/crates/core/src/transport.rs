//! Transport of all level functions by one common velocity field.
//!
//! Every field obeys `∂_t φ_k + θ·∇φ_k = 0`; moving the fields together
//! moves every interface and junction of the lower envelope with the flow of
//! `θ`. The discretization is first-order upwind on the node grid.

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LevelFunctionSet};

/// Guard against division by zero when the velocity vanishes.
pub const EPS_VEL: f64 = 1e-14;

/// Nodal velocity on a 2D grid whose normal component vanishes on the
/// boundary of the unit square.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityField {
    grid: GridSpec,
    vx: Vec<f64>,
    vy: Vec<f64>,
}

impl VelocityField {
    /// Builds the field, zeroing the normal component at boundary nodes.
    pub fn new(grid: GridSpec, vx: Vec<f64>, vy: Vec<f64>) -> Result<Self> {
        Ok(Self::with_projection(grid, vx, vy)?.0)
    }

    /// Like [`VelocityField::new`], also returning the largest normal
    /// component that was removed.
    pub fn with_projection(grid: GridSpec, mut vx: Vec<f64>, mut vy: Vec<f64>) -> Result<(Self, f64)> {
        if grid.dim() != 2 {
            return Err(Error::config("velocity fields are two-dimensional"));
        }
        if vx.len() != grid.node_count() || vy.len() != grid.node_count() {
            return Err(Error::config("velocity components do not match the grid"));
        }
        if vx.iter().chain(vy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("velocity is not finite".into()));
        }
        let n = grid.n();
        let mut removed = 0.0f64;
        for idx in 0..grid.node_count() {
            let [i, j, _] = grid.node_ijk(idx);
            if i == 0 || i == n {
                removed = removed.max(vx[idx].abs());
                vx[idx] = 0.0;
            }
            if j == 0 || j == n {
                removed = removed.max(vy[idx].abs());
                vy[idx] = 0.0;
            }
        }
        Ok((VelocityField { grid, vx, vy }, removed))
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; 2]) -> Result<Self> {
        let (vx, vy) = (0..grid.node_count())
            .map(|idx| {
                let p = grid.node_point(idx);
                let v = f(p[0], p[1]);
                (v[0], v[1])
            })
            .unzip();
        Self::new(grid, vx, vy)
    }

    pub fn zero(grid: GridSpec) -> Result<Self> {
        let m = grid.node_count();
        Self::new(grid, vec![0.0; m], vec![0.0; m])
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn vx(&self) -> &[f64] {
        &self.vx
    }

    pub fn vy(&self) -> &[f64] {
        &self.vy
    }

    /// `max_nodes (|θ_x| + |θ_y|)`, the norm that controls the upwind CFL
    /// condition.
    pub fn max_norm(&self) -> f64 {
        self.vx
            .iter()
            .zip(&self.vy)
            .fold(0.0f64, |m, (a, b)| m.max(a.abs() + b.abs()))
    }

    pub fn scaled(&self, c: f64) -> VelocityField {
        VelocityField {
            grid: self.grid,
            vx: self.vx.iter().map(|v| c * v).collect(),
            vy: self.vy.iter().map(|v| c * v).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransportParams {
    pub cfl: f64,
    pub t0: f64,
}

impl TransportParams {
    pub fn new(cfl: f64, t0: f64) -> Result<Self> {
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(Error::config(format!("cfl must lie in (0, 1], got {cfl}")));
        }
        if !(t0 >= 0.0 && t0.is_finite()) {
            return Err(Error::config(format!("end time must be finite and >= 0, got {t0}")));
        }
        Ok(TransportParams { cfl, t0 })
    }
}

pub fn cfl_dt(theta: &VelocityField, h: f64, cfl: f64) -> f64 {
    cfl * h / theta.max_norm().max(EPS_VEL)
}

fn check_grids(phi: &LevelFunctionSet, theta: &VelocityField) -> Result<()> {
    if phi.grid() != theta.grid() {
        return Err(Error::config("level functions and velocity live on different grids"));
    }
    Ok(())
}

/// One explicit upwind step of length `dt`.
pub fn advect_step(phi: &LevelFunctionSet, theta: &VelocityField, dt: f64) -> Result<LevelFunctionSet> {
    check_grids(phi, theta)?;
    let grid = *phi.grid();
    let limit = cfl_dt(theta, grid.h(), 1.0);
    if !(dt >= 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(Error::StepSize { dt, limit });
    }
    let mut out = phi.clone();
    let skip = usize::from(phi.pinned_zero());
    for (src, dst) in phi.fields().iter().zip(out.fields_mut()).skip(skip) {
        upwind_update(&grid, src, dst, theta, dt);
    }
    Ok(out)
}

fn upwind_update(grid: &GridSpec, src: &[f64], dst: &mut [f64], theta: &VelocityField, dt: f64) {
    let n = grid.n();
    let m = n + 1;
    let inv_h = grid.n() as f64;
    for j in 0..m {
        for i in 0..m {
            let idx = j * m + i;
            let (ux, uy) = (theta.vx[idx], theta.vy[idx]);
            let mut rate = 0.0;
            if ux != 0.0 {
                let back = i > 0;
                let fwd = i < n;
                let d = if (ux > 0.0 && back) || !fwd {
                    src[idx] - src[idx - 1]
                } else {
                    src[idx + 1] - src[idx]
                };
                rate += ux * d * inv_h;
            }
            if uy != 0.0 {
                let back = j > 0;
                let fwd = j < n;
                let d = if (uy > 0.0 && back) || !fwd {
                    src[idx] - src[idx - m]
                } else {
                    src[idx + m] - src[idx]
                };
                rate += uy * d * inv_h;
            }
            dst[idx] = src[idx] - dt * rate;
        }
    }
}

/// Advects for total time `params.t0` in CFL-limited substeps.
pub fn advect(phi: &LevelFunctionSet, theta: &VelocityField, params: TransportParams) -> Result<LevelFunctionSet> {
    check_grids(phi, theta)?;
    if params.t0 == 0.0 || theta.max_norm() == 0.0 {
        return Ok(phi.clone());
    }
    let dt_max = cfl_dt(theta, phi.grid().h(), params.cfl);
    let mut cur = phi.clone();
    let mut t = 0.0;
    while t < params.t0 {
        let dt = dt_max.min(params.t0 - t);
        cur = advect_step(&cur, theta, dt)?;
        if params.t0 - t <= dt_max {
            break;
        }
        t += dt;
    }
    Ok(cur)
}

/// Multiplies every unpinned field by a common factor so that the mean
/// gradient norm of the pairwise differences on their zero sets becomes
/// one. A common positive factor leaves every phase unchanged. Returns the
/// factor applied, or `None` when no interface was found.
pub fn rescale_by_interface_gradient(phi: &mut LevelFunctionSet) -> Option<f64> {
    let grid = *phi.grid();
    if grid.dim() != 2 || !phi.pinned_zero() {
        return None;
    }
    let kappa = phi.kappa();
    let mut sum = 0.0;
    let mut count = 0usize;
    for k in 0..kappa {
        for l in k + 1..kappa {
            let iface = crate::envelope::pairwise_interface(phi, k as u8, l as u8).ok()?;
            for seg in &iface.active {
                let g = phi.difference_gradient(k, l, &seg.midpoint());
                sum += g[0].hypot(g[1]);
                count += 1;
            }
        }
    }
    if count == 0 || sum <= 0.0 {
        return None;
    }
    let factor = count as f64 / sum;
    for f in phi.fields_mut().iter_mut().skip(1) {
        f.iter_mut().for_each(|v| *v *= factor);
    }
    Some(factor)
}
