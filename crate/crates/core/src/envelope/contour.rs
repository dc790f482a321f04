use super::{detect_tuple_points, Label};
use crate::error::{Error, Result};
use crate::grid::LevelFunctionSet;

/// Straight piece of a zero contour inside one grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub cell: usize,
}

impl Segment {
    pub fn midpoint(&self) -> [f64; 2] {
        [0.5 * (self.a[0] + self.b[0]), 0.5 * (self.a[1] + self.b[1])]
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }

    /// Euclidean distance from `p` to the segment.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let d = [self.b[0] - self.a[0], self.b[1] - self.a[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let t = if len2 > 0.0 {
            (((p[0] - self.a[0]) * d[0] + (p[1] - self.a[1]) * d[1]) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = [self.a[0] + t * d[0], self.a[1] + t * d[1]];
        (p[0] - q[0]).hypot(p[1] - q[1])
    }
}

/// Zero contour of `φ_k − φ_l`, split into the part that really separates
/// phases `k` and `l` and the ghost part where a third field lies below.
#[derive(Clone, Debug, PartialEq)]
pub struct PairInterface {
    pub pair: (Label, Label),
    pub active: Vec<Segment>,
    pub ghost: Vec<Segment>,
    /// Cells on which the difference vanishes identically.
    pub degenerate_cells: Vec<usize>,
}

impl PairInterface {
    /// Every segment of the coincidence set, active first.
    pub fn all_segments(&self) -> impl Iterator<Item = &Segment> {
        self.active.iter().chain(self.ghost.iter())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceGeometry {
    pub pairs: Vec<PairInterface>,
    /// Filled only when κ = d + 1.
    pub tuple_points: Vec<Vec<f64>>,
}

impl InterfaceGeometry {
    pub fn pair(&self, k: Label, l: Label) -> Option<&PairInterface> {
        let key = (k.min(l), k.max(l));
        self.pairs.iter().find(|p| p.pair == key)
    }
}

/// Marching squares over the nodal difference `φ_k − φ_l`.
pub fn pairwise_interface(phi: &LevelFunctionSet, k: Label, l: Label) -> Result<PairInterface> {
    let grid = *phi.grid();
    if grid.dim() != 2 {
        return Err(Error::Precondition("interface extraction is two-dimensional only".into()));
    }
    let kappa = phi.kappa();
    if k == l || k as usize >= kappa || l as usize >= kappa {
        return Err(Error::Precondition(format!(
            "invalid phase pair ({k}, {l}) for {kappa} phases"
        )));
    }
    let (fk, fl) = (phi.field(k as usize), phi.field(l as usize));
    let tol = phi.tol_eq();
    let mut out = PairInterface {
        pair: (k.min(l), k.max(l)),
        active: Vec::new(),
        ghost: Vec::new(),
        degenerate_cells: Vec::new(),
    };

    for cell in 0..grid.cell_count() {
        let c = grid.cell_corners(cell);
        // counter-clockwise corner order
        let nodes = [c[0], c[1], c[3], c[2]];
        let vals = nodes.map(|idx| fk[idx] - fl[idx]);
        if vals.iter().all(|v| v.abs() <= tol) {
            out.degenerate_cells.push(cell);
            continue;
        }
        let pts = nodes.map(|idx| {
            let p = grid.node_point(idx);
            [p[0], p[1]]
        });
        for (a, b) in cell_segments(&vals, &pts) {
            let seg = Segment { a, b, cell };
            if is_active(phi, k as usize, l as usize, seg.midpoint(), tol) {
                out.active.push(seg);
            } else {
                out.ghost.push(seg);
            }
        }
    }
    Ok(out)
}

/// All pairwise interfaces, plus tuple points when κ = d + 1.
pub fn interface_geometry(phi: &LevelFunctionSet) -> Result<InterfaceGeometry> {
    let kappa = phi.kappa() as Label;
    let mut pairs = Vec::new();
    for k in 0..kappa {
        for l in k + 1..kappa {
            pairs.push(pairwise_interface(phi, k, l)?);
        }
    }
    let tuple_points = if phi.kappa() == phi.grid().dim() + 1 {
        detect_tuple_points(phi)?.points
    } else {
        Vec::new()
    };
    Ok(InterfaceGeometry {
        pairs,
        tuple_points,
    })
}

/// `{k, l}` are the two smallest values at `x`.
fn is_active(phi: &LevelFunctionSet, k: usize, l: usize, x: [f64; 2], tol: f64) -> bool {
    let vals = phi.values_at(&x);
    let level = 0.5 * (vals[k] + vals[l]);
    vals.iter()
        .enumerate()
        .filter(|&(m, _)| m != k && m != l)
        .all(|(_, &v)| level <= v + tol)
}

fn crossing(va: f64, vb: f64, pa: [f64; 2], pb: [f64; 2]) -> [f64; 2] {
    let t = va / (va - vb);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
}

/// Segments of the zero contour inside one cell. Corner values `>= 0`
/// count as positive so that contours running through nodes are emitted
/// once.
fn cell_segments(vals: &[f64; 4], pts: &[[f64; 2]; 4]) -> Vec<([f64; 2], [f64; 2])> {
    let pos = vals.map(|v| v >= 0.0);
    let edge = |e: usize| {
        let (a, b) = (e, (e + 1) % 4);
        crossing(vals[a], vals[b], pts[a], pts[b])
    };
    let cut: Vec<usize> = (0..4).filter(|&e| pos[e] != pos[(e + 1) % 4]).collect();
    match cut.len() {
        2 => vec![(edge(cut[0]), edge(cut[1]))],
        4 => {
            // saddle: decide connectivity from the cell average
            let centre = 0.25 * vals.iter().sum::<f64>();
            if (centre >= 0.0) == pos[0] {
                vec![(edge(0), edge(1)), (edge(2), edge(3))]
            } else {
                vec![(edge(3), edge(0)), (edge(1), edge(2))]
            }
        }
        _ => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn horizontal_line_has_no_ghost() {
        let g = GridSpec::square(10).unwrap();
        let fs: [fn(&[f64]) -> f64; 2] = [|_| 0.0, |p| p[1] - 0.5];
        let phi = LevelFunctionSet::from_fns(g, &fs, true).unwrap();
        let iface = pairwise_interface(&phi, 0, 1).unwrap();
        assert!(iface.ghost.is_empty());
        let total: f64 = iface.active.iter().map(Segment::length).sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in &iface.active {
            assert!((s.a[1] - 0.5).abs() < 1e-12 && (s.b[1] - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn saddle_cell_gives_two_segments() {
        let vals = [1.0, -1.0, 1.0, -1.0];
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert_eq!(cell_segments(&vals, &pts).len(), 2);
    }

    #[test]
    fn identical_fields_are_degenerate() {
        let g = GridSpec::square(4).unwrap();
        let phi = LevelFunctionSet::new(g, vec![vec![0.0; 25]; 2], true).unwrap();
        let iface = pairwise_interface(&phi, 0, 1).unwrap();
        assert_eq!(iface.degenerate_cells.len(), 16);
        assert!(iface.active.is_empty());
    }

    #[test]
    fn rejects_bad_pairs() {
        let g = GridSpec::square(4).unwrap();
        let phi = LevelFunctionSet::new(g, vec![vec![0.0; 25]; 2], true).unwrap();
        assert!(pairwise_interface(&phi, 1, 1).is_err());
        assert!(pairwise_interface(&phi, 0, 2).is_err());
    }
}
