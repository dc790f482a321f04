use std::f64::consts::PI;

use crate::fem::{Side, SideValues, TriMesh};

/// Shape of one applied boundary current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Current {
    /// Constant flux on each side, indexed by [`Side::index`].
    SideSigns([f64; 4]),
    /// `arctan(500 (s − 0.5))` on one side, zero elsewhere.
    Arctan(Side),
    /// `sin(4π s)` on one side, zero elsewhere.
    Sine(Side),
}

impl Current {
    /// Flux at tangential coordinate `s ∈ [0, 1]` along `side`.
    pub fn on_side(&self, side: Side, s: f64) -> f64 {
        match *self {
            Current::SideSigns(v) => v[side.index()],
            Current::Arctan(at) if at == side => (500.0 * (s - 0.5)).atan(),
            Current::Sine(at) if at == side => (4.0 * PI * s).sin(),
            _ => 0.0,
        }
    }

    /// Flux at a boundary point; at corners the first matching side of
    /// left, right, lower, upper wins.
    pub fn at(&self, x: f64, y: f64) -> f64 {
        let tol = 1e-12;
        let side = if x.abs() <= tol {
            Side::Left
        } else if (x - 1.0).abs() <= tol {
            Side::Right
        } else if y.abs() <= tol {
            Side::Lower
        } else {
            Side::Upper
        };
        self.on_side(side, tangential(side, x, y))
    }

    /// Samples at the nodes of each side.
    pub fn sample(&self, mesh: &TriMesh) -> SideValues {
        Side::ALL.map(|side| {
            mesh.side_nodes(side)
                .into_iter()
                .map(|i| {
                    let p = mesh.node_point(i);
                    self.on_side(side, tangential(side, p[0], p[1]))
                })
                .collect()
        })
    }
}

fn tangential(side: Side, x: f64, y: f64) -> f64 {
    match side {
        Side::Left | Side::Right => y,
        Side::Lower | Side::Upper => x,
    }
}

/// The eleven standard currents: three sign patterns, then arctan jumps
/// and sines on the left, right, upper and lower sides.
pub fn build_currents() -> Vec<Current> {
    // sign order: left, right, lower, upper
    let mut out = vec![
        Current::SideSigns([1.0, 1.0, -1.0, -1.0]),
        Current::SideSigns([1.0, -1.0, -1.0, 1.0]),
        Current::SideSigns([1.0, -1.0, 1.0, -1.0]),
    ];
    let order = [Side::Left, Side::Right, Side::Upper, Side::Lower];
    out.extend(order.map(Current::Arctan));
    out.extend(order.map(Current::Sine));
    out
}
