use nalgebra::Matrix2;

use super::band::BandMatrix;
use super::mesh::{Side, TriMesh};

/// Stiffness matrix `∫ σ∇φ_j·∇φ_i` with element-constant `σ`.
pub fn stiffness(mesh: &TriMesh, sigma: &[Matrix2<f64>]) -> BandMatrix {
    let mut k = BandMatrix::zeros(mesh.node_count(), mesh.bandwidth());
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let area = mesh.element_area(e);
        let g = mesh.basis_gradients(e);
        let s = sigma[e];
        for a in 0..3 {
            let sg = s * g[a];
            for b in 0..=a {
                k.add(nodes[a], nodes[b], area * sg.dot(&g[b]));
            }
        }
    }
    k
}

/// Consistent P1 mass matrix.
pub fn mass(mesh: &TriMesh) -> BandMatrix {
    let mut m = BandMatrix::zeros(mesh.node_count(), mesh.bandwidth());
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let c = mesh.element_area(e) / 12.0;
        for a in 0..3 {
            for b in 0..=a {
                m.add(nodes[a], nodes[b], if a == b { 2.0 * c } else { c });
            }
        }
    }
    m
}

/// Consistent mass matrix applied to `w`.
pub fn mass_apply(mesh: &TriMesh, w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.node_count()];
    for (e, nodes) in mesh.elements().iter().enumerate() {
        let c = mesh.element_area(e) / 12.0;
        let s = w[nodes[0]] + w[nodes[1]] + w[nodes[2]];
        for &a in nodes {
            out[a] += c * (s + w[a]);
        }
    }
    out
}

/// Boundary mass with trapezoidal lumping: `∫_{∂D} w φ_i`.
pub fn boundary_lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.node_count()];
    for side in Side::ALL {
        let nodes = mesh.side_nodes(side);
        for w in nodes.windows(2) {
            let len = edge_length(mesh, w[0], w[1]);
            out[w[0]] += 0.5 * len;
            out[w[1]] += 0.5 * len;
        }
    }
    out
}

/// One-point load `∫ f φ_i` for element-constant `f`.
pub fn element_load(mesh: &TriMesh, f: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.node_count()];
    for (e, (nodes, &fe)) in mesh.elements().iter().zip(f).enumerate() {
        if fe != 0.0 {
            let c = mesh.element_area(e) / 3.0;
            for &a in nodes {
                out[a] += c * fe;
            }
        }
    }
    out
}

/// Adds the trapezoidal edge quadrature of `∫_side g φ_i`, with `g`
/// sampled at the side nodes in tangential order.
pub fn add_side_load(mesh: &TriMesh, side: Side, g: &[f64], load: &mut [f64]) {
    let nodes = mesh.side_nodes(side);
    for (w, gv) in nodes.windows(2).zip(g.windows(2)) {
        let len = edge_length(mesh, w[0], w[1]);
        load[w[0]] += 0.5 * len * gv[0];
        load[w[1]] += 0.5 * len * gv[1];
    }
}

fn edge_length(mesh: &TriMesh, a: usize, b: usize) -> f64 {
    let (p, q) = (mesh.node_point(a), mesh.node_point(b));
    (q[0] - p[0]).hypot(q[1] - p[1])
}

/// Trapezoidal `∫_side g` on a uniform side.
pub fn side_integral(h: f64, g: &[f64]) -> f64 {
    g.windows(2).map(|w| 0.5 * h * (w[0] + w[1])).sum()
}
