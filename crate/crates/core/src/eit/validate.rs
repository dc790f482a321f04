use super::{ExperimentConfig, KvProblem};
use crate::error::{Error, Result};
use crate::fields::{pinned_set, FieldSpec};
use crate::grid::LevelFunctionSet;
use crate::shape_gradient::{evaluate_dj, fd_check, DescentOperator, FdReport};
use crate::transport::VelocityField;

/// Smooth validation setting: noiseless data of the default ground truth and
/// a state made of two circular inclusions in a single background phase.
pub struct FdCase {
    pub problem: KvProblem,
    pub phi: LevelFunctionSet,
    /// Descent velocity at `phi`, scaled to unit max-norm.
    pub theta: VelocityField,
    /// `dJ(θ)` of the cost normalized by its value at `phi`.
    pub dj: f64,
    pub j0: f64,
    pub cfl: f64,
}

impl FdCase {
    pub fn standard(n: usize) -> Result<Self> {
        let cfg = ExperimentConfig {
            n,
            ..ExperimentConfig::default()
        };
        let measurements = cfg.measure()?;
        let problem = cfg.problem(&measurements)?;
        let phi = pinned_set(
            *problem.grid(),
            &[
                FieldSpec::Const(1.0),
                FieldSpec::Ellipses {
                    scale: 0.2,
                    shapes: vec![
                        crate::fields::Ellipse::circle(0.35, 0.62, 0.15),
                        crate::fields::Ellipse::circle(0.7, 0.35, 0.15),
                    ],
                },
            ],
        )?;
        let (eval, _) = problem.evaluate(&phi, true)?;
        let j0 = eval.cost;
        let mut s = eval.gradient.expect("gradient requested");
        s.scale(1.0 / j0);
        let mesh = problem.mesh();
        let d = DescentOperator::new(mesh, cfg.alpha, cfg.solver)?.solve(mesh, &s)?;
        let norm = d.field.max_norm();
        if norm == 0.0 {
            return Err(Error::Precondition("the validation case has a vanishing descent direction".into()));
        }
        let theta = d.field.scaled(1.0 / norm);
        let dj = evaluate_dj(mesh, &s, theta.vx(), theta.vy())?;
        Ok(FdCase {
            problem,
            phi,
            theta,
            dj,
            j0,
            cfl: cfg.cfl,
        })
    }

    /// Difference quotient along the level-set transport.
    pub fn transport(&self, t: f64) -> Result<FdReport> {
        fd_check(&self.phi, &self.theta, t, self.dj, self.cfl, |phi| {
            Ok(self.problem.evaluate(phi, false)?.0.cost / self.j0)
        })
    }

    /// Difference quotient when the mesh nodes move by `t θ` with the
    /// element conductivities carried along; θ is zeroed on the boundary.
    pub fn mesh_motion(&self, t: f64) -> Result<FdReport> {
        if !(t > 0.0) {
            return Err(Error::config(format!("finite-difference step must be positive, got {t}")));
        }
        let mesh = self.problem.mesh();
        let mut tx = self.theta.vx().to_vec();
        let mut ty = self.theta.vy().to_vec();
        for i in mesh.boundary_nodes() {
            tx[i] = 0.0;
            ty[i] = 0.0;
        }
        let (eval, _) = self.problem.evaluate(&self.phi, true)?;
        let mut s = eval.gradient.expect("gradient requested");
        s.scale(1.0 / self.j0);
        let dj = evaluate_dj(mesh, &s, &tx, &ty)?;
        let sigma = self.problem.element_sigma(&self.phi)?;
        let dx: Vec<f64> = tx.iter().map(|v| t * v).collect();
        let dy: Vec<f64> = ty.iter().map(|v| t * v).collect();
        let j1 = self.problem.evaluate_on(&mesh.displaced(&dx, &dy)?, &sigma, false)?.cost / self.j0;
        let quotient = (j1 - 1.0) / t;
        Ok(FdReport {
            j0: 1.0,
            j1,
            quotient,
            dj,
            rel_error: (quotient - dj).abs() / dj.abs().max(f64::EPSILON),
        })
    }
}
