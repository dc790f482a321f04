//! Browser bindings: a three-phase junction built from two planes, its
//! transport by a vortex, and the potential of one boundary current.

use std::f64::consts::PI;

use lem_core::eit::{build_currents, ExperimentConfig};
use lem_core::envelope::{extract_phases, interface_geometry, triple_angles, DEFAULT_EPS_RANK};
use lem_core::fem::{solve_neumann_gauged, TriMesh};
use lem_core::transport::{advect, TransportParams, VelocityField};
use lem_core::{Error, GridSpec, LevelFunctionSet, Result};
use wasm_bindgen::prelude::*;

/// Cell labels of a level-function set with its junction, if one was found.
#[wasm_bindgen]
pub struct PhaseView {
    n: usize,
    labels: Vec<u8>,
    point: Vec<f64>,
    angles: Vec<f64>,
}

#[wasm_bindgen]
impl PhaseView {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major cell labels, lowest `y` first.
    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }

    /// Triple point `[x, y]`, empty when there is none.
    #[wasm_bindgen(getter)]
    pub fn point(&self) -> Vec<f64> {
        self.point.clone()
    }

    /// Opening angles of phases 0, 1, 2 at the triple point in radians.
    #[wasm_bindgen(getter)]
    pub fn angles(&self) -> Vec<f64> {
        self.angles.clone()
    }
}

/// Nodal potential on an `(n + 1)²` grid with the cell labels of the
/// conductivity used.
#[wasm_bindgen]
pub struct PotentialView {
    n: usize,
    values: Vec<f64>,
    labels: Vec<u8>,
}

#[wasm_bindgen]
impl PotentialView {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u8> {
        self.labels.clone()
    }
}

fn view(phi: &LevelFunctionSet) -> Result<PhaseView> {
    let labels = extract_phases(phi).labels().to_vec();
    let point = interface_geometry(phi)?.tuple_points.into_iter().next().unwrap_or_default();
    let angles = if point.is_empty() {
        Vec::new()
    } else {
        triple_angles(phi, &point, DEFAULT_EPS_RANK).map(Vec::from).unwrap_or_default()
    };
    Ok(PhaseView {
        n: phi.grid().n(),
        labels,
        point,
        angles,
    })
}

/// `φ1 = a·(x − c)`, `φ2 = b·(x − c)` with unit gradients at the given
/// directions (radians) over the pinned zero field.
pub fn planes(n: usize, c: [f64; 2], dir_a: f64, dir_b: f64) -> Result<LevelFunctionSet> {
    let grid = GridSpec::square(n)?;
    let plane = |d: f64| -> Vec<f64> {
        (0..grid.node_count())
            .map(|i| {
                let p = grid.node_point(i);
                d.cos() * (p[0] - c[0]) + d.sin() * (p[1] - c[1])
            })
            .collect()
    };
    LevelFunctionSet::new(grid, vec![vec![0.0; grid.node_count()], plane(dir_a), plane(dir_b)], true)
}

pub fn junction_view(n: usize, cx: f64, cy: f64, dir_a: f64, dir_b: f64) -> Result<PhaseView> {
    view(&planes(n, [cx, cy], dir_a, dir_b)?)
}

/// Junction of the two planes transported for time `t0` by a vortex that
/// vanishes on the boundary.
pub fn transport_view(n: usize, dir_a: f64, dir_b: f64, strength: f64, t0: f64) -> Result<PhaseView> {
    let phi = planes(n, [0.5, 0.35], dir_a, dir_b)?;
    let theta = VelocityField::from_fn(*phi.grid(), |x, y| {
        let (sx, sy) = ((PI * x).sin(), (PI * y).sin());
        [strength * sx * sx * (2.0 * PI * y).sin(), -strength * sy * sy * (2.0 * PI * x).sin()]
    })?;
    view(&advect(&phi, &theta, TransportParams::new(0.5, t0)?)?)
}

/// Potential of boundary current `current` (1 to 11) on the default ground
/// truth.
pub fn potential_view(n: usize, current: usize) -> Result<PotentialView> {
    let currents = build_currents();
    let g = currents
        .get(current.wrapping_sub(1))
        .ok_or_else(|| Error::Config(format!("current must lie in 1..=11, got {current}")))?;
    let cfg = ExperimentConfig {
        n,
        ..ExperimentConfig::default()
    };
    let phi = cfg.truth_set()?;
    let mesh = TriMesh::new(n)?;
    let sigma = cfg.sigma_rule.element_sigma(&phi, &cfg.conductivity()?, &mesh)?;
    let f = vec![0.0; mesh.element_count()];
    let values = solve_neumann_gauged(&mesh, &sigma, &f, &g.sample(&mesh), cfg.solver)?;
    Ok(PotentialView {
        n,
        values,
        labels: extract_phases(&phi).labels().to_vec(),
    })
}

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub fn junction(n: usize, cx: f64, cy: f64, dir_a: f64, dir_b: f64) -> std::result::Result<PhaseView, JsError> {
    junction_view(n, cx, cy, dir_a, dir_b).map_err(js)
}

#[wasm_bindgen]
pub fn transport(n: usize, dir_a: f64, dir_b: f64, strength: f64, t0: f64) -> std::result::Result<PhaseView, JsError> {
    transport_view(n, dir_a, dir_b, strength, t0).map_err(js)
}

#[wasm_bindgen]
pub fn potential(n: usize, current: usize) -> std::result::Result<PotentialView, JsError> {
    potential_view(n, current).map_err(js)
}
