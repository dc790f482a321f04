//! Distributed shape derivative `dJ(θ) = ∫ S1 : Dθ + S0 · θ` and the
//! regularized descent direction.
//!
//! Conventions: `(Dθ)_ij = ∂_j θ_i` and `(a ⊗ b)_ij = a_i b_j`.

use nalgebra::{Matrix2, Vector2};

use crate::envelope::Label;
use crate::error::{Error, Result};
use crate::fem::{boundary_lumped_mass, mass, stiffness, DirichletSystem, LinearSolver, TriMesh};
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::transport::{advect, TransportParams, VelocityField};

/// Per-element tensors `S1` (2×2) and `S0` (2-vector).
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeGradientData {
    s1: Vec<Matrix2<f64>>,
    s0: Vec<Vector2<f64>>,
}

impl ShapeGradientData {
    pub fn new(s1: Vec<Matrix2<f64>>, s0: Vec<Vector2<f64>>) -> Result<Self> {
        if s1.len() != s0.len() {
            return Err(Error::config("S1 and S0 have different lengths"));
        }
        if s1.iter().any(|m| m.iter().any(|v| !v.is_finite())) || s0.iter().any(|v| v.iter().any(|x| !x.is_finite())) {
            return Err(Error::Data("shape gradient is not finite".into()));
        }
        Ok(ShapeGradientData { s1, s0 })
    }

    pub fn zeros(elements: usize) -> Self {
        ShapeGradientData {
            s1: vec![Matrix2::zeros(); elements],
            s0: vec![Vector2::zeros(); elements],
        }
    }

    pub fn len(&self) -> usize {
        self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s1.is_empty()
    }

    pub fn s1(&self) -> &[Matrix2<f64>] {
        &self.s1
    }

    pub fn s0(&self) -> &[Vector2<f64>] {
        &self.s0
    }

    /// Adds `other` elementwise (used to sum over currents).
    pub fn accumulate(&mut self, other: &ShapeGradientData) {
        for (a, b) in self.s1.iter_mut().zip(&other.s1) {
            *a += b;
        }
        for (a, b) in self.s0.iter_mut().zip(&other.s0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.s1.iter_mut().for_each(|m| *m *= c);
        self.s0.iter_mut().for_each(|v| *v *= c);
    }
}

/// Weights of the regularized descent problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl RegParams {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        for (name, a) in [("alpha1", alpha1), ("alpha2", alpha2), ("alpha3", alpha3)] {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config(format!("{name} must be positive, got {a}")));
            }
        }
        Ok(RegParams { alpha1, alpha2, alpha3 })
    }
}

impl Default for RegParams {
    fn default() -> Self {
        RegParams {
            alpha1: 0.2,
            alpha2: 0.8,
            alpha3: 1e5,
        }
    }
}

fn check_fields(mesh: &TriMesh, fields: &[&[f64]]) -> Result<()> {
    if fields.iter().any(|f| f.len() != mesh.node_count()) {
        return Err(Error::config("nodal field does not match the mesh"));
    }
    Ok(())
}

fn centroid_value(mesh: &TriMesh, e: usize, w: &[f64]) -> f64 {
    let [a, b, c] = mesh.element(e);
    (w[a] + w[b] + w[c]) / 3.0
}

/// Isotropic tensor: `S1 = [½ū² + σ∇u·∇p + σ∇v·∇q] I − 2σ[∇u⊙∇p + ∇v⊙∇q]`
/// with `ū = u − v` at the centroid, and `S0 = 0`.
pub fn assemble_s1_iso(
    mesh: &TriMesh,
    u: &[f64],
    v: &[f64],
    p: &[f64],
    q: &[f64],
    sigma: &[Matrix2<f64>],
) -> Result<ShapeGradientData> {
    check_fields(mesh, &[u, v, p, q])?;
    if sigma.len() != mesh.element_count() {
        return Err(Error::config("element conductivities do not match the mesh"));
    }
    let mut s1 = Vec::with_capacity(mesh.element_count());
    for (e, sig) in sigma.iter().enumerate() {
        if sig[(0, 1)] != 0.0 || sig[(1, 0)] != 0.0 || sig[(0, 0)] != sig[(1, 1)] {
            return Err(Error::Precondition(format!("element {e} conductivity is not isotropic")));
        }
        let s = sig[(0, 0)];
        let (gu, gv, gp, gq) = (mesh.gradient(e, u), mesh.gradient(e, v), mesh.gradient(e, p), mesh.gradient(e, q));
        let w = centroid_value(mesh, e, u) - centroid_value(mesh, e, v);
        let trace = 0.5 * w * w + s * (gu.dot(&gp) + gv.dot(&gq));
        let sym = gu * gp.transpose() + gp * gu.transpose() + gv * gq.transpose() + gq * gv.transpose();
        s1.push(Matrix2::identity() * trace - sym * s);
    }
    Ok(ShapeGradientData {
        s1,
        s0: vec![Vector2::zeros(); mesh.element_count()],
    })
}

/// `x, a, b ↦ (Σ_ij ∂_ℓ(σ_k)_ij a_j b_i)_ℓ` for phase `k`.
pub type DsigmaFn<'a> = &'a dyn Fn(usize, [f64; 2], Vector2<f64>, Vector2<f64>) -> Vector2<f64>;
/// `x ↦ ∇f_k(x)` for phase `k`.
pub type GradFFn<'a> = &'a dyn Fn(usize, [f64; 2]) -> Vector2<f64>;

/// Phase coefficients that vary in space, entering `S0`.
pub struct VariableCoefficients<'a> {
    /// Phase of each element.
    pub element_phase: &'a [Label],
    pub sigma_varies: bool,
    pub f_varies: bool,
    pub dsigma: Option<DsigmaFn<'a>>,
    pub grad_f: Option<GradFFn<'a>>,
}

/// Full tensor for matrix-valued conductivities and a source term. With
/// `coeffs = None` the phase coefficients are constant and `S0 = 0`.
#[allow(clippy::too_many_arguments)]
pub fn assemble_s1_general(
    mesh: &TriMesh,
    u: &[f64],
    v: &[f64],
    p: &[f64],
    q: &[f64],
    sigma: &[Matrix2<f64>],
    f: &[f64],
    coeffs: Option<&VariableCoefficients>,
) -> Result<ShapeGradientData> {
    check_fields(mesh, &[u, v, p, q])?;
    let ne = mesh.element_count();
    if sigma.len() != ne || f.len() != ne {
        return Err(Error::config("element coefficients do not match the mesh"));
    }
    if let Some(c) = coeffs {
        if c.element_phase.len() != ne {
            return Err(Error::config("element phases do not match the mesh"));
        }
        if c.sigma_varies && c.dsigma.is_none() {
            return Err(Error::config("varying conductivity needs a derivative callback"));
        }
        if c.f_varies && c.grad_f.is_none() {
            return Err(Error::config("varying source needs a gradient callback"));
        }
    }
    let mut s1 = Vec::with_capacity(ne);
    let mut s0 = Vec::with_capacity(ne);
    for e in 0..ne {
        let sig = sigma[e];
        let sig_t = sig.transpose();
        let (gu, gv, gp, gq) = (mesh.gradient(e, u), mesh.gradient(e, v), mesh.gradient(e, p), mesh.gradient(e, q));
        let w = centroid_value(mesh, e, u) - centroid_value(mesh, e, v);
        let pq = centroid_value(mesh, e, p) + centroid_value(mesh, e, q);
        let trace = 0.5 * w * w - f[e] * pq + (sig * gu).dot(&gp) + (sig * gv).dot(&gq);
        let outer = gp * (sig * gu).transpose()
            + gu * (sig_t * gp).transpose()
            + gq * (sig * gv).transpose()
            + gv * (sig_t * gq).transpose();
        s1.push(Matrix2::identity() * trace - outer);

        let mut z = Vector2::zeros();
        if let Some(c) = coeffs {
            let k = c.element_phase[e] as usize;
            let x = mesh.centroid(e);
            if c.sigma_varies {
                let ds = c.dsigma.expect("checked above");
                z += ds(k, x, gu, gp) + ds(k, x, gv, gq);
            }
            if c.f_varies {
                z -= c.grad_f.expect("checked above")(k, x) * pq;
            }
        }
        s0.push(z);
    }
    ShapeGradientData::new(s1, s0)
}

/// `Σ_e |T_e| (S1 : Dθ + S0 · θ(centroid))`.
pub fn evaluate_dj(mesh: &TriMesh, s: &ShapeGradientData, theta_x: &[f64], theta_y: &[f64]) -> Result<f64> {
    check_fields(mesh, &[theta_x, theta_y])?;
    if s.len() != mesh.element_count() {
        return Err(Error::config("shape gradient does not match the mesh"));
    }
    let mut total = 0.0;
    for e in 0..mesh.element_count() {
        let area = mesh.element_area(e);
        let gx = mesh.gradient(e, theta_x);
        let gy = mesh.gradient(e, theta_y);
        let m = &s.s1[e];
        let mut val = m[(0, 0)] * gx.x + m[(0, 1)] * gx.y + m[(1, 0)] * gy.x + m[(1, 1)] * gy.y;
        let s0 = s.s0[e];
        if s0 != Vector2::zeros() {
            val += s0.x * centroid_value(mesh, e, theta_x) + s0.y * centroid_value(mesh, e, theta_y);
        }
        total += area * val;
    }
    Ok(total)
}

/// Factored operator of the descent problem. Both velocity components
/// share one scalar matrix `α1 K + α2 M + α3 M_∂`.
#[derive(Clone, Debug)]
pub struct DescentOperator {
    system: DirichletSystem,
}

impl DescentOperator {
    pub fn new(mesh: &TriMesh, alpha: RegParams, solver: LinearSolver) -> Result<Self> {
        let k = stiffness(mesh, &vec![Matrix2::identity() * alpha.alpha1; mesh.element_count()]);
        let m = mass(mesh);
        let mb = boundary_lumped_mass(mesh);
        let mut a = k;
        for i in 0..mesh.node_count() {
            for j in i.saturating_sub(a.bandwidth())..=i {
                let v = alpha.alpha2 * m.get(i, j);
                if v != 0.0 {
                    a.add(i, j, v);
                }
            }
            a.add(i, i, alpha.alpha3 * mb[i]);
        }
        Ok(DescentOperator {
            system: DirichletSystem::new(a, vec![false; mesh.node_count()], solver)?,
        })
    }

    /// `B(θ, θ)` for a nodal velocity.
    pub fn energy(&self, theta_x: &[f64], theta_y: &[f64]) -> f64 {
        self.inner((theta_x, theta_y), (theta_x, theta_y))
    }

    /// `B(a, b)` for two nodal velocities.
    pub fn inner(&self, a: (&[f64], &[f64]), b: (&[f64], &[f64])) -> f64 {
        let m = self.system.matrix();
        let dot = |u: &[f64], v: &[f64]| m.matvec(u).iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
        dot(a.0, b.0) + dot(a.1, b.1)
    }

    /// Solves `B(θ, ξ) = −dJ(ξ)` for all `ξ`.
    pub fn solve(&self, mesh: &TriMesh, s: &ShapeGradientData) -> Result<Descent> {
        if s.len() != mesh.element_count() {
            return Err(Error::config("shape gradient does not match the mesh"));
        }
        let nn = mesh.node_count();
        let (mut rx, mut ry) = (vec![0.0; nn], vec![0.0; nn]);
        for (e, nodes) in mesh.elements().iter().enumerate() {
            let area = mesh.element_area(e);
            let g = mesh.basis_gradients(e);
            let m = &s.s1[e];
            let s0 = s.s0[e];
            for (a, &node) in nodes.iter().enumerate() {
                rx[node] -= area * (m[(0, 0)] * g[a].x + m[(0, 1)] * g[a].y + s0.x / 3.0);
                ry[node] -= area * (m[(1, 0)] * g[a].x + m[(1, 1)] * g[a].y + s0.y / 3.0);
            }
        }
        let zero = vec![0.0; nn];
        let raw_x = self.system.solve(&rx, &zero)?;
        let raw_y = self.system.solve(&ry, &zero)?;
        let grid = GridSpec::square(mesh.n())?;
        let (field, removed_normal) = VelocityField::with_projection(grid, raw_x.clone(), raw_y.clone())?;
        Ok(Descent {
            raw_x,
            raw_y,
            field,
            removed_normal,
        })
    }
}

/// Output of the descent problem: the raw solution and the transport
/// velocity with its boundary-normal part removed.
#[derive(Clone, Debug)]
pub struct Descent {
    pub raw_x: Vec<f64>,
    pub raw_y: Vec<f64>,
    pub field: VelocityField,
    /// Largest normal component removed at boundary nodes.
    pub removed_normal: f64,
}

pub fn descent_direction(mesh: &TriMesh, s: &ShapeGradientData, alpha: RegParams) -> Result<Descent> {
    DescentOperator::new(mesh, alpha, LinearSolver::Cholesky)?.solve(mesh, s)
}

/// Relative mismatch between the difference quotient of `cost` along the
/// transport by `theta` over time `t` and the predicted derivative `dj`.
pub fn fd_check(
    phi: &LevelFunctionSet,
    theta: &VelocityField,
    t: f64,
    dj: f64,
    cfl: f64,
    cost: impl Fn(&LevelFunctionSet) -> Result<f64>,
) -> Result<FdReport> {
    if !(t > 0.0) {
        return Err(Error::config(format!("finite-difference step must be positive, got {t}")));
    }
    let j0 = cost(phi)?;
    let moved = advect(phi, theta, TransportParams::new(cfl, t)?)?;
    let j1 = cost(&moved)?;
    let quotient = (j1 - j0) / t;
    let rel_error = if quotient == 0.0 && dj == 0.0 {
        0.0
    } else {
        (quotient - dj).abs() / dj.abs().max(f64::EPSILON)
    };
    Ok(FdReport {
        j0,
        j1,
        quotient,
        dj,
        rel_error,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FdReport {
    pub j0: f64,
    pub j1: f64,
    pub quotient: f64,
    pub dj: f64,
    pub rel_error: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_element() {
        let mesh = TriMesh::new(2).unwrap();
        let u = mesh.interpolate(|x, _| x);
        let p = mesh.interpolate(|_, y| y);
        let z = vec![0.0; mesh.node_count()];
        let sigma = vec![Matrix2::identity() * 2.0; mesh.element_count()];
        // ū = u − v ≠ 0 here, so remove the quadratic term by hand
        let s = assemble_s1_iso(&mesh, &u, &z, &p, &z, &sigma).unwrap();
        let w = centroid_value(&mesh, 0, &u);
        let expect = Matrix2::new(0.5 * w * w, -2.0, -2.0, 0.5 * w * w);
        assert!((s.s1()[0] - expect).norm() < 1e-14);
    }

    #[test]
    fn dj_of_identity_is_divergence() {
        let mesh = TriMesh::new(5).unwrap();
        let s = ShapeGradientData::new(
            vec![Matrix2::identity(); mesh.element_count()],
            vec![Vector2::zeros(); mesh.element_count()],
        )
        .unwrap();
        let tx = mesh.interpolate(|x, _| x);
        let ty = mesh.interpolate(|_, y| y);
        assert!((evaluate_dj(&mesh, &s, &tx, &ty).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn descent_sign_and_energy() {
        let mesh = TriMesh::new(6).unwrap();
        let s1: Vec<Matrix2<f64>> = (0..mesh.element_count())
            .map(|e| {
                let c = mesh.centroid(e);
                Matrix2::new(c[0].sin(), c[1], c[0] * c[1], 1.0 - c[0])
            })
            .collect();
        let s = ShapeGradientData::new(s1, vec![Vector2::new(0.1, -0.2); mesh.element_count()]).unwrap();
        let op = DescentOperator::new(&mesh, RegParams::default(), LinearSolver::Cholesky).unwrap();
        let d = op.solve(&mesh, &s).unwrap();
        let dj = evaluate_dj(&mesh, &s, &d.raw_x, &d.raw_y).unwrap();
        let b = op.energy(&d.raw_x, &d.raw_y);
        assert!(dj < 0.0);
        assert!((dj + b).abs() <= 1e-9 * b);
    }

    #[test]
    fn general_matches_iso_for_isotropic_input() {
        let mesh = TriMesh::new(4).unwrap();
        let u = mesh.interpolate(|x, y| x * x + y);
        let v = mesh.interpolate(|x, y| x - y * y);
        let p = mesh.interpolate(|x, y| (x * y).sin());
        let q = mesh.interpolate(|x, y| x + 2.0 * y);
        let sigma: Vec<Matrix2<f64>> = (0..mesh.element_count())
            .map(|e| Matrix2::identity() * (1.0 + (e % 3) as f64))
            .collect();
        let a = assemble_s1_iso(&mesh, &u, &v, &p, &q, &sigma).unwrap();
        let f = vec![0.0; mesh.element_count()];
        let b = assemble_s1_general(&mesh, &u, &v, &p, &q, &sigma, &f, None).unwrap();
        for (x, y) in a.s1().iter().zip(b.s1()) {
            assert!((x - y).norm() <= 1e-14 * x.norm().max(1.0));
        }
    }
}
