use nalgebra::Matrix2;

use super::{Current, MeasurementSet};
use crate::envelope::{extract_phases, PhaseLabelField};
use crate::error::{Error, Result};
use crate::fem::{
    mass_apply, LinearSolver, NodalField, PhaseConductivity, SideSet, SideValues, SigmaRule,
    SplitSystems, TriMesh,
};
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::shape_gradient::{assemble_s1_general, assemble_s1_iso, ShapeGradientData};

/// States of one current: `u` carries the measured trace on `Γ_a`, `v` on
/// `Γ_b`; `p`, `q` are the adjoints.
#[derive(Clone, Debug)]
pub struct CurrentStates {
    pub u: NodalField,
    pub v: NodalField,
    pub adjoints: Option<(NodalField, NodalField)>,
    pub cost: f64,
}

/// Unnormalized cost and, on request, the summed shape gradient.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub cost: f64,
    pub states: Vec<CurrentStates>,
    pub gradient: Option<ShapeGradientData>,
}

/// The mismatch functional `½ Σ_i ∫ (u_i − v_i)²` for a fixed set of
/// currents and measured traces.
pub struct KvProblem {
    mesh: TriMesh,
    grid: GridSpec,
    sigma: PhaseConductivity,
    fluxes: Vec<SideValues>,
    traces: Vec<NodalField>,
    gamma_a: SideSet,
    solver: LinearSolver,
    rule: SigmaRule,
    #[cfg(feature = "parallel")]
    pool: Option<rayon::ThreadPool>,
}

impl KvProblem {
    pub fn new(
        sigma: PhaseConductivity,
        currents: &[Current],
        measurements: &MeasurementSet,
        solver: LinearSolver,
        rule: SigmaRule,
        threads: usize,
    ) -> Result<Self> {
        if currents.len() != measurements.len() {
            return Err(Error::config(format!(
                "{} currents but {} measured traces",
                currents.len(),
                measurements.len()
            )));
        }
        if currents.is_empty() {
            return Err(Error::config("at least one current is required"));
        }
        let mesh = TriMesh::new(measurements.n)?;
        let grid = GridSpec::square(measurements.n)?;
        let fluxes = currents.iter().map(|g| g.sample(&mesh)).collect();
        let traces = (0..measurements.len()).map(|i| measurements.nodal(&mesh, i)).collect();
        #[cfg(not(feature = "parallel"))]
        let _ = threads;
        Ok(KvProblem {
            mesh,
            grid,
            sigma,
            fluxes,
            traces,
            gamma_a: SideSet::LEFT_RIGHT,
            solver,
            rule,
            #[cfg(feature = "parallel")]
            pool: make_pool(threads)?,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn sigma(&self) -> &PhaseConductivity {
        &self.sigma
    }

    pub fn current_count(&self) -> usize {
        self.fluxes.len()
    }

    pub fn sigma_rule(&self) -> SigmaRule {
        self.rule
    }

    /// Element conductivities of the phases of `phi`.
    pub fn element_sigma(&self, phi: &LevelFunctionSet) -> Result<Vec<Matrix2<f64>>> {
        self.rule.element_sigma(phi, &self.sigma, &self.mesh)
    }

    /// Cost (and gradient) for the phases of `phi`.
    pub fn evaluate(&self, phi: &LevelFunctionSet, gradient: bool) -> Result<(Evaluation, PhaseLabelField)> {
        if phi.grid() != &self.grid {
            return Err(Error::config("level functions do not match the measurement grid"));
        }
        let labels = extract_phases(phi);
        let sigma = self.element_sigma(phi)?;
        Ok((self.evaluate_on(&self.mesh, &sigma, gradient)?, labels))
    }

    /// Cost (and gradient) for given element conductivities on `mesh`,
    /// which must share the connectivity and boundary nodes of the
    /// problem mesh.
    pub fn evaluate_on(&self, mesh: &TriMesh, sigma: &[Matrix2<f64>], gradient: bool) -> Result<Evaluation> {
        if mesh.n() != self.mesh.n() {
            return Err(Error::config("mesh does not match the problem"));
        }
        let systems = SplitSystems::new(mesh, sigma, self.gamma_a, self.solver)?;
        let f = vec![0.0; mesh.element_count()];
        let isotropic = self.sigma.is_isotropic();
        let per_current = self.map_currents(|i| {
            let u = systems.solve_u(mesh, &f, &self.traces[i], &self.fluxes[i])?;
            let v = systems.solve_v(mesh, &f, &self.traces[i], &self.fluxes[i])?;
            let d: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            let cost = 0.5 * d.iter().zip(mass_apply(mesh, &d)).map(|(a, b)| a * b).sum::<f64>();
            let (adjoints, s) = if gradient {
                let (p, q) = systems.adjoints(mesh, &u, &v)?;
                let s = if isotropic {
                    assemble_s1_iso(mesh, &u, &v, &p, &q, sigma)?
                } else {
                    assemble_s1_general(mesh, &u, &v, &p, &q, sigma, &f, None)?
                };
                (Some((p, q)), Some(s))
            } else {
                (None, None)
            };
            Ok((CurrentStates { u, v, adjoints, cost }, s))
        })?;
        let mut cost = 0.0;
        let mut total: Option<ShapeGradientData> = None;
        let mut states = Vec::with_capacity(per_current.len());
        for (st, s) in per_current {
            cost += st.cost;
            if let Some(s) = s {
                match total.as_mut() {
                    Some(t) => t.accumulate(&s),
                    None => total = Some(s),
                }
            }
            states.push(st);
        }
        Ok(Evaluation {
            cost,
            states,
            gradient: total,
        })
    }

    fn map_currents<T: Send>(&self, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
        let m = self.fluxes.len();
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            use rayon::prelude::*;
            return pool.install(|| (0..m).into_par_iter().map(&f).collect());
        }
        (0..m).map(f).collect()
    }
}

#[cfg(feature = "parallel")]
fn make_pool(threads: usize) -> Result<Option<rayon::ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::config(format!("cannot start {threads} threads: {e}")))
}

/// `100 ∫|σ − σ*| / ∫|σ|` over grid cells, with the Frobenius norm for
/// tensors.
pub fn error_metric(labels: &PhaseLabelField, truth: &PhaseLabelField, sigma: &PhaseConductivity) -> Result<f64> {
    if labels.grid() != truth.grid() {
        return Err(Error::config("label fields live on different grids"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&a, &b) in labels.labels().iter().zip(truth.labels()) {
        let (sa, sb) = (sigma.phase(a as usize), sigma.phase(b as usize));
        num += (sa - sb).norm();
        den += sa.norm();
    }
    Ok(100.0 * num / den)
}
