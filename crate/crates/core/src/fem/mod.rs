//! P1 finite elements on a structured triangulation of the unit square.

mod assembly;
mod band;
mod mesh;

pub use assembly::{
    add_side_load, boundary_lumped_mass, element_load, mass, mass_apply, side_integral, stiffness,
};
pub use band::{pcg, BandCholesky, BandMatrix};
pub use mesh::{Side, SideSet, TriMesh};

use nalgebra::Matrix2;

use crate::envelope::{argmin, PhaseLabelField};
use crate::grid::LevelFunctionSet;
use crate::error::{Error, Result};
use band::norm2;

/// One scalar per mesh node.
pub type NodalField = Vec<f64>;

/// Flux densities sampled at the nodes of each side, indexed by
/// [`Side::index`] and ordered along the side.
pub type SideValues = [Vec<f64>; 4];

/// Relative residual required of every linear solve.
pub const TOL_LIN: f64 = 1e-10;

/// Relative tolerance on `∫_{∂D} g + ∫_D f` for pure Neumann data.
pub const TOL_COMPAT: f64 = 1e-9;

/// Per-phase conductivity tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseConductivity {
    sigma: Vec<Matrix2<f64>>,
    lower: f64,
}

impl PhaseConductivity {
    pub fn new(sigma: Vec<Matrix2<f64>>, lower: f64) -> Result<Self> {
        if !(lower > 0.0) {
            return Err(Error::config(format!("conductivity lower bound must be positive, got {lower}")));
        }
        if sigma.len() < 2 {
            return Err(Error::config("need at least two phase conductivities"));
        }
        for (k, s) in sigma.iter().enumerate() {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(format!("conductivity {k} is not finite")));
            }
            if (s[(0, 1)] - s[(1, 0)]).abs() > 1e-12 * s.norm() {
                return Err(Error::config(format!("conductivity {k} is not symmetric")));
            }
            let min_eig = s.symmetric_eigenvalues().min();
            if min_eig < lower {
                return Err(Error::config(format!(
                    "conductivity {k} has eigenvalue {min_eig} below {lower}"
                )));
            }
            for (l, t) in sigma.iter().enumerate().take(k) {
                if s == t {
                    return Err(Error::config(format!("conductivities {l} and {k} coincide")));
                }
            }
        }
        Ok(PhaseConductivity { sigma, lower })
    }

    /// `σ_k = c_k I`.
    pub fn isotropic(values: &[f64]) -> Result<Self> {
        let lower = values.iter().copied().fold(f64::INFINITY, f64::min);
        Self::new(values.iter().map(|&c| Matrix2::identity() * c).collect(), lower)
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn phase(&self, k: usize) -> &Matrix2<f64> {
        &self.sigma[k]
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// True when every tensor is a multiple of the identity.
    pub fn is_isotropic(&self) -> bool {
        self.sigma
            .iter()
            .all(|s| s[(0, 1)] == 0.0 && s[(1, 0)] == 0.0 && s[(0, 0)] == s[(1, 1)])
    }
}

/// Conductivity per element, from the label of the grid cell holding it.
pub fn element_sigma(
    labels: &PhaseLabelField,
    sigma: &PhaseConductivity,
    mesh: &TriMesh,
) -> Result<Vec<Matrix2<f64>>> {
    let grid = labels.grid();
    if grid.dim() != 2 || grid.n() != mesh.n() {
        return Err(Error::config(format!(
            "label grid ({}D, n = {}) does not match the mesh (n = {})",
            grid.dim(),
            grid.n(),
            mesh.n()
        )));
    }
    if labels.kappa() > sigma.len() {
        return Err(Error::config(format!(
            "{} phases but only {} conductivities",
            labels.kappa(),
            sigma.len()
        )));
    }
    Ok((0..mesh.element_count())
        .map(|e| *sigma.phase(labels.label(mesh.element_cell(e)) as usize))
        .collect())
}

/// Per-element conductivity from the minimizing phase of the P1
/// interpolants at each triangle centroid.
pub fn element_sigma_from_phi(
    phi: &LevelFunctionSet,
    sigma: &PhaseConductivity,
    mesh: &TriMesh,
) -> Result<Vec<Matrix2<f64>>> {
    let grid = phi.grid();
    if grid.dim() != 2 || grid.n() != mesh.n() {
        return Err(Error::config(format!(
            "level-function grid ({}D, n = {}) does not match the mesh (n = {})",
            grid.dim(),
            grid.n(),
            mesh.n()
        )));
    }
    if phi.kappa() > sigma.len() {
        return Err(Error::config(format!(
            "{} phases but only {} conductivities",
            phi.kappa(),
            sigma.len()
        )));
    }
    let mut values = vec![0.0; phi.kappa()];
    Ok(mesh
        .elements()
        .iter()
        .map(|tri| {
            for (k, f) in phi.fields().iter().enumerate() {
                values[k] = (f[tri[0]] + f[tri[1]] + f[tri[2]]) / 3.0;
            }
            *sigma.phase(argmin(&values) as usize)
        })
        .collect())
}

/// Share of each triangle covered by each phase of the P1 interpolants,
/// `κ` entries per element.
pub fn phase_fractions(phi: &LevelFunctionSet, mesh: &TriMesh) -> Result<Vec<f64>> {
    let grid = phi.grid();
    if grid.dim() != 2 || grid.n() != mesh.n() {
        return Err(Error::config(format!(
            "level-function grid ({}D, n = {}) does not match the mesh (n = {})",
            grid.dim(),
            grid.n(),
            mesh.n()
        )));
    }
    let kappa = phi.kappa();
    let fields = phi.fields();
    let mut out = Vec::with_capacity(kappa * mesh.element_count());
    let mut vals = vec![0.0; kappa];
    for tri in mesh.elements() {
        let mut uniform = None;
        for (c, &i) in tri.iter().enumerate() {
            fields.iter().zip(vals.iter_mut()).for_each(|(f, v)| *v = f[i]);
            let k = argmin(&vals);
            let margin = vals
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != k as usize)
                .all(|(_, &v)| v > vals[k as usize]);
            uniform = match (c, uniform) {
                (0, _) if margin => Some(k),
                (_, Some(u)) if margin && u == k => Some(k),
                _ => None,
            };
            if uniform.is_none() {
                break;
            }
        }
        if let Some(k) = uniform {
            // the minimizer is strict and shared by all three corners
            out.extend((0..kappa).map(|j| if j == k as usize { 1.0 } else { 0.0 }));
            continue;
        }
        // reference-triangle vertices carrying all level-function values
        let corners: Vec<([f64; 2], Vec<f64>)> = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .into_iter()
            .zip(tri)
            .map(|(x, &i)| (x, fields.iter().map(|f| f[i]).collect()))
            .collect();
        let first = out.len();
        for k in 0..kappa {
            let mut poly = corners.clone();
            for j in (0..kappa).filter(|&j| j != k) {
                poly = clip(&poly, |v| v[k] - v[j]);
                if poly.is_empty() {
                    break;
                }
            }
            out.push(2.0 * polygon_area(&poly));
        }
        let total: f64 = out[first..].iter().sum();
        if total > 0.0 {
            out[first..].iter_mut().for_each(|f| *f /= total);
        }
    }
    Ok(out)
}

/// Keeps the part of a convex polygon where `g` (affine in the carried
/// values) is negative.
fn clip(poly: &[([f64; 2], Vec<f64>)], g: impl Fn(&[f64]) -> f64) -> Vec<([f64; 2], Vec<f64>)> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (a, b) = (&poly[i], &poly[(i + 1) % poly.len()]);
        let (ga, gb) = (g(&a.1), g(&b.1));
        if ga < 0.0 {
            out.push(a.clone());
        }
        if (ga < 0.0) != (gb < 0.0) {
            let s = ga / (ga - gb);
            let x = [a.0[0] + s * (b.0[0] - a.0[0]), a.0[1] + s * (b.0[1] - a.0[1])];
            let v = a.1.iter().zip(&b.1).map(|(p, q)| p + s * (q - p)).collect();
            out.push((x, v));
        }
    }
    out
}

fn polygon_area(poly: &[([f64; 2], Vec<f64>)]) -> f64 {
    let m = poly.len();
    0.5 * (0..m)
        .map(|i| {
            let (p, q) = (poly[i].0, poly[(i + 1) % m].0);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        .abs()
}

/// Per-element conductivity as the area-weighted mean of the phase
/// conductivities.
pub fn element_sigma_blended(
    phi: &LevelFunctionSet,
    sigma: &PhaseConductivity,
    mesh: &TriMesh,
) -> Result<Vec<Matrix2<f64>>> {
    let kappa = phi.kappa();
    if kappa > sigma.len() {
        return Err(Error::config(format!("{kappa} phases but only {} conductivities", sigma.len())));
    }
    let fr = phase_fractions(phi, mesh)?;
    Ok(fr
        .chunks(kappa)
        .map(|c| c.iter().enumerate().map(|(k, w)| sigma.phase(k) * *w).sum())
        .collect())
}

/// How element conductivities are read off the level functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SigmaRule {
    /// Phase of the minimizing interpolant at the triangle centroid.
    Centroid,
    /// Area-weighted mean over the phases cutting the triangle.
    #[default]
    Blended,
}

impl SigmaRule {
    pub fn element_sigma(
        self,
        phi: &LevelFunctionSet,
        sigma: &PhaseConductivity,
        mesh: &TriMesh,
    ) -> Result<Vec<Matrix2<f64>>> {
        match self {
            SigmaRule::Centroid => element_sigma_from_phi(phi, sigma, mesh),
            SigmaRule::Blended => element_sigma_blended(phi, sigma, mesh),
        }
    }
}

/// Mixed boundary data: Dirichlet values on some sides, flux densities on
/// the rest. Corners touching a Dirichlet side are Dirichlet.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryData {
    dirichlet: SideSet,
    values: NodalField,
    neumann: SideValues,
}

impl BoundaryData {
    /// `values` holds one entry per node; only Dirichlet nodes are read.
    /// Neumann sides not listed carry `g = 0`.
    pub fn new(
        mesh: &TriMesh,
        dirichlet: SideSet,
        values: NodalField,
        neumann: Vec<(Side, Vec<f64>)>,
    ) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::config(format!(
                "Dirichlet data has {} values for {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        let m = mesh.n() + 1;
        let mut sides: SideValues = Default::default();
        for s in Side::ALL {
            sides[s.index()] = vec![0.0; m];
        }
        for (side, g) in neumann {
            if dirichlet.contains(side) {
                return Err(Error::config(format!(
                    "side {} is both Dirichlet and Neumann",
                    side.name()
                )));
            }
            if g.len() != m {
                return Err(Error::config(format!(
                    "flux on side {} has {} samples, expected {m}",
                    side.name(),
                    g.len()
                )));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("flux on side {} is not finite", side.name())));
            }
            sides[side.index()] = g;
        }
        Ok(BoundaryData {
            dirichlet,
            values,
            neumann: sides,
        })
    }

    pub fn dirichlet_sides(&self) -> SideSet {
        self.dirichlet
    }

    pub fn neumann(&self, side: Side) -> &[f64] {
        &self.neumann[side.index()]
    }
}

/// Flags nodes lying on any side of `sides`.
pub fn side_mask(mesh: &TriMesh, sides: SideSet) -> Vec<bool> {
    (0..mesh.node_count())
        .map(|i| mesh.node_tags(i).sides().any(|s| sides.contains(s)))
        .collect()
}

/// Linear solver for the reduced systems.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum LinearSolver {
    #[default]
    Cholesky,
    Cg { max_iter: usize },
}

#[derive(Clone, Debug)]
enum Method {
    Direct(BandCholesky),
    Iterative(usize),
}

/// A symmetric system with Dirichlet rows and columns eliminated, ready to
/// solve for many right-hand sides.
#[derive(Clone, Debug)]
pub struct DirichletSystem {
    full: BandMatrix,
    reduced: BandMatrix,
    mask: Vec<bool>,
    method: Method,
}

impl DirichletSystem {
    pub fn new(full: BandMatrix, mask: Vec<bool>, solver: LinearSolver) -> Result<Self> {
        let n = full.size();
        assert_eq!(mask.len(), n);
        let bw = full.bandwidth();
        let mut reduced = full.clone();
        for i in 0..n {
            for j in i.saturating_sub(bw)..=i {
                if mask[i] || mask[j] {
                    reduced.set(i, j, if i == j { 1.0 } else { 0.0 });
                }
            }
        }
        let method = match solver {
            LinearSolver::Cholesky => Method::Direct(reduced.cholesky()?),
            LinearSolver::Cg { max_iter } => Method::Iterative(max_iter),
        };
        Ok(DirichletSystem {
            full,
            reduced,
            mask,
            method,
        })
    }

    pub fn matrix(&self) -> &BandMatrix {
        &self.full
    }

    pub fn reduced(&self) -> &BandMatrix {
        &self.reduced
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Solves `A u = load` on free nodes with `u = dirichlet` on masked ones.
    pub fn solve(&self, load: &[f64], dirichlet: &[f64]) -> Result<NodalField> {
        let lift: Vec<f64> = self
            .mask
            .iter()
            .zip(dirichlet)
            .map(|(&m, &g)| if m { g } else { 0.0 })
            .collect();
        let a_lift = self.full.matvec(&lift);
        let rhs: Vec<f64> = (0..load.len())
            .map(|i| if self.mask[i] { lift[i] } else { load[i] - a_lift[i] })
            .collect();
        self.solve_reduced(&rhs)
    }

    fn solve_reduced(&self, rhs: &[f64]) -> Result<NodalField> {
        let bnorm = norm2(rhs);
        if bnorm == 0.0 {
            return Ok(vec![0.0; rhs.len()]);
        }
        match &self.method {
            Method::Direct(chol) => {
                let mut x = chol.solve(rhs);
                for _ in 0..3 {
                    let ax = self.reduced.matvec(&x);
                    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
                    if norm2(&r) <= TOL_LIN * bnorm {
                        return Ok(x);
                    }
                    let dx = chol.solve(&r);
                    x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
                }
                let ax = self.reduced.matvec(&x);
                let res = rhs.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum::<f64>().sqrt();
                if res <= TOL_LIN * bnorm {
                    Ok(x)
                } else {
                    Err(Error::Solver(format!(
                        "relative residual {:.3e} above {TOL_LIN:e}",
                        res / bnorm
                    )))
                }
            }
            Method::Iterative(max_iter) => pcg(&self.reduced, rhs, TOL_LIN, *max_iter).map(|(x, _)| x),
        }
    }
}

fn check_sigma(mesh: &TriMesh, sigma: &[Matrix2<f64>]) -> Result<()> {
    if sigma.len() != mesh.element_count() {
        return Err(Error::config(format!(
            "{} element conductivities for {} elements",
            sigma.len(),
            mesh.element_count()
        )));
    }
    Ok(())
}

fn check_nodal(mesh: &TriMesh, v: &[f64], what: &str) -> Result<()> {
    if v.len() != mesh.node_count() {
        return Err(Error::config(format!(
            "{what} has {} values for {} nodes",
            v.len(),
            mesh.node_count()
        )));
    }
    Ok(())
}

fn check_element_load(mesh: &TriMesh, f: &[f64]) -> Result<()> {
    if f.len() != mesh.element_count() {
        return Err(Error::config(format!(
            "source has {} values for {} elements",
            f.len(),
            mesh.element_count()
        )));
    }
    Ok(())
}

fn neumann_load(mesh: &TriMesh, f: &[f64], g: &SideValues, sides: SideSet) -> NodalField {
    let mut load = element_load(mesh, f);
    for s in sides.sides() {
        add_side_load(mesh, s, &g[s.index()], &mut load);
    }
    load
}

/// Galerkin solution of `−div(σ∇u) = f` with mixed boundary data.
pub fn solve_mixed(
    mesh: &TriMesh,
    sigma: &[Matrix2<f64>],
    f: &[f64],
    bc: &BoundaryData,
    solver: LinearSolver,
) -> Result<NodalField> {
    check_sigma(mesh, sigma)?;
    check_element_load(mesh, f)?;
    if bc.dirichlet.is_empty() {
        return Err(Error::Gauge);
    }
    let sys = DirichletSystem::new(stiffness(mesh, sigma), side_mask(mesh, bc.dirichlet), solver)?;
    let load = neumann_load(mesh, f, &bc.neumann, bc.dirichlet.complement());
    sys.solve(&load, &bc.values)
}

/// Pure Neumann solve normalized to zero nodal mean.
pub fn solve_neumann_gauged(
    mesh: &TriMesh,
    sigma: &[Matrix2<f64>],
    f: &[f64],
    g: &SideValues,
    solver: LinearSolver,
) -> Result<NodalField> {
    check_sigma(mesh, sigma)?;
    check_element_load(mesh, f)?;
    let m = mesh.n() + 1;
    if g.iter().any(|s| s.len() != m) {
        return Err(Error::config(format!("each side needs {m} flux samples")));
    }
    let h = mesh.h();
    let area = |e: usize| mesh.element_area(e);
    let total: f64 = g.iter().map(|s| side_integral(h, s)).sum::<f64>()
        + f.iter().enumerate().map(|(e, v)| v * area(e)).sum::<f64>();
    let scale: f64 = g
        .iter()
        .map(|s| side_integral(h, &s.iter().map(|v| v.abs()).collect::<Vec<_>>()))
        .sum::<f64>()
        + f.iter().enumerate().map(|(e, v)| v.abs() * area(e)).sum::<f64>();
    if total.abs() > TOL_COMPAT * scale {
        return Err(Error::Data(format!(
            "incompatible Neumann data: net flux {total:.3e}"
        )));
    }
    let mut mask = vec![false; mesh.node_count()];
    mask[0] = true;
    let sys = DirichletSystem::new(stiffness(mesh, sigma), mask, solver)?;
    let load = neumann_load(mesh, f, g, SideSet::ALL);
    let mut u = sys.solve(&load, &vec![0.0; mesh.node_count()])?;
    let mean = u.iter().sum::<f64>() / u.len() as f64;
    u.iter_mut().for_each(|v| *v -= mean);
    Ok(u)
}

/// Factored systems for a split `∂D = Γ_a ∪ Γ_b`: one with Dirichlet
/// conditions on `Γ_a` (for `u` and `p`), one on `Γ_b` (for `v` and `q`).
#[derive(Clone, Debug)]
pub struct SplitSystems {
    gamma_a: SideSet,
    sys_a: DirichletSystem,
    sys_b: DirichletSystem,
}

impl SplitSystems {
    pub fn new(mesh: &TriMesh, sigma: &[Matrix2<f64>], gamma_a: SideSet, solver: LinearSolver) -> Result<Self> {
        check_sigma(mesh, sigma)?;
        let gamma_b = gamma_a.complement();
        if gamma_a.is_empty() || gamma_b.is_empty() {
            return Err(Error::config("both boundary parts must be non-empty"));
        }
        let k = stiffness(mesh, sigma);
        let sys_a = DirichletSystem::new(k.clone(), side_mask(mesh, gamma_a), solver)?;
        let sys_b = DirichletSystem::new(k, side_mask(mesh, gamma_b), solver)?;
        Ok(SplitSystems { gamma_a, sys_a, sys_b })
    }

    pub fn gamma_a(&self) -> SideSet {
        self.gamma_a
    }

    pub fn gamma_b(&self) -> SideSet {
        self.gamma_a.complement()
    }

    /// `u = h` on `Γ_a`, `σ∇u·n = g` on `Γ_b`.
    pub fn solve_u(&self, mesh: &TriMesh, f: &[f64], h: &[f64], g: &SideValues) -> Result<NodalField> {
        check_nodal(mesh, h, "trace")?;
        let load = neumann_load(mesh, f, g, self.gamma_b());
        self.sys_a.solve(&load, h)
    }

    /// `v = h` on `Γ_b`, `σ∇v·n = g` on `Γ_a`.
    pub fn solve_v(&self, mesh: &TriMesh, f: &[f64], h: &[f64], g: &SideValues) -> Result<NodalField> {
        check_nodal(mesh, h, "trace")?;
        let load = neumann_load(mesh, f, g, self.gamma_a);
        self.sys_b.solve(&load, h)
    }

    /// Adjoint states: `p = 0` on `Γ_a` with load `−M(u − v)`, `q = 0` on
    /// `Γ_b` with load `+M(u − v)`.
    pub fn adjoints(&self, mesh: &TriMesh, u: &[f64], v: &[f64]) -> Result<(NodalField, NodalField)> {
        check_nodal(mesh, u, "u")?;
        check_nodal(mesh, v, "v")?;
        let diff: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
        let md = mass_apply(mesh, &diff);
        let zero = vec![0.0; mesh.node_count()];
        let neg: Vec<f64> = md.iter().map(|x| -x).collect();
        let p = self.sys_a.solve(&neg, &zero)?;
        let q = self.sys_b.solve(&md, &zero)?;
        Ok((p, q))
    }
}

/// Adjoint pair for `u`, `v` with `p = 0` on `gamma_a`, `q = 0` on its
/// complement.
pub fn solve_adjoints(
    mesh: &TriMesh,
    sigma: &[Matrix2<f64>],
    u: &[f64],
    v: &[f64],
    gamma_a: SideSet,
    solver: LinearSolver,
) -> Result<(NodalField, NodalField)> {
    SplitSystems::new(mesh, sigma, gamma_a, solver)?.adjoints(mesh, u, v)
}
