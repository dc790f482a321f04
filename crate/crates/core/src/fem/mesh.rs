use nalgebra::Vector2;

use crate::error::{Error, Result};

/// One side of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Lower,
    Upper,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Lower, Side::Upper];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Lower => [0.0, -1.0],
            Side::Upper => [0.0, 1.0],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Lower => "lower",
            Side::Upper => "upper",
        }
    }
}

/// Subset of the four sides, as a bit mask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct SideSet(u8);

impl SideSet {
    pub const EMPTY: SideSet = SideSet(0);
    pub const ALL: SideSet = SideSet(0b1111);
    pub const LEFT_RIGHT: SideSet = SideSet(0b0011);
    pub const LOWER_UPPER: SideSet = SideSet(0b1100);

    pub fn of(sides: &[Side]) -> SideSet {
        SideSet(sides.iter().fold(0, |m, s| m | 1 << s.index()))
    }

    pub fn contains(self, s: Side) -> bool {
        self.0 & (1 << s.index()) != 0
    }

    pub fn complement(self) -> SideSet {
        SideSet(!self.0 & 0b1111)
    }

    pub fn union(self, other: SideSet) -> SideSet {
        SideSet(self.0 | other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn sides(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |&s| self.contains(s))
    }
}

/// Structured P1 triangulation of the unit square. Each grid cell is split
/// along its lower-left to upper-right diagonal, lower triangle first.
#[derive(Clone, Debug, PartialEq)]
pub struct TriMesh {
    n: usize,
    h: f64,
    coords: Vec<[f64; 2]>,
    elements: Vec<[usize; 3]>,
    areas: Vec<f64>,
    grads: Vec<[Vector2<f64>; 3]>,
}

impl TriMesh {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::config(format!("mesh needs at least 2 cells per side, got {n}")));
        }
        let h = 1.0 / n as f64;
        let m = n + 1;
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = j * m + i;
                let (b, c, d) = (a + 1, a + m + 1, a + m);
                elements.push([a, b, c]);
                elements.push([a, c, d]);
            }
        }
        let coords = (0..m * m)
            .map(|idx| [(idx % m) as f64 * h, (idx / m) as f64 * h])
            .collect();
        Self::with_coords(n, coords, elements)
    }

    fn with_coords(n: usize, coords: Vec<[f64; 2]>, elements: Vec<[usize; 3]>) -> Result<Self> {
        let mut areas = Vec::with_capacity(elements.len());
        let mut grads = Vec::with_capacity(elements.len());
        for (e, nodes) in elements.iter().enumerate() {
            let [a, b, c] = nodes.map(|i| Vector2::from(coords[i]));
            let (eb, ec) = (b - a, c - a);
            let det = eb.x * ec.y - eb.y * ec.x;
            if !(det > 0.0) {
                return Err(Error::Precondition(format!("element {e} is inverted or degenerate")));
            }
            areas.push(0.5 * det);
            // gradients of the barycentric coordinates
            let gb = Vector2::new(ec.y, -ec.x) / det;
            let gc = Vector2::new(-eb.y, eb.x) / det;
            grads.push([-gb - gc, gb, gc]);
        }
        Ok(TriMesh {
            n,
            h: 1.0 / n as f64,
            coords,
            elements,
            areas,
            grads,
        })
    }

    /// Same connectivity with every node moved by `(dx, dy)`.
    pub fn displaced(&self, dx: &[f64], dy: &[f64]) -> Result<TriMesh> {
        if dx.len() != self.node_count() || dy.len() != self.node_count() {
            return Err(Error::config("displacement does not match the mesh"));
        }
        let coords = self
            .coords
            .iter()
            .zip(dx.iter().zip(dy))
            .map(|(p, (x, y))| [p[0] + x, p[1] + y])
            .collect();
        Self::with_coords(self.n, coords, self.elements.clone())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        (self.n + 1) * (self.n + 1)
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[[usize; 3]] {
        &self.elements
    }

    pub fn element(&self, e: usize) -> [usize; 3] {
        self.elements[e]
    }

    /// Half bandwidth of the stiffness matrix.
    pub fn bandwidth(&self) -> usize {
        self.n + 2
    }

    pub fn element_area(&self, e: usize) -> f64 {
        self.areas[e]
    }

    /// Grid cell containing element `e`.
    pub fn element_cell(&self, e: usize) -> usize {
        e / 2
    }

    pub fn node_point(&self, idx: usize) -> [f64; 2] {
        self.coords[idx]
    }

    pub fn centroid(&self, e: usize) -> [f64; 2] {
        let [a, b, c] = self.elements[e];
        let (pa, pb, pc) = (self.node_point(a), self.node_point(b), self.node_point(c));
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Gradients of the three local basis functions of element `e`.
    pub fn basis_gradients(&self, e: usize) -> &[Vector2<f64>; 3] {
        &self.grads[e]
    }

    /// Gradient of the P1 interpolant of `values` on element `e`.
    pub fn gradient(&self, e: usize, values: &[f64]) -> Vector2<f64> {
        let g = self.basis_gradients(e);
        let nodes = self.elements[e];
        g[0] * values[nodes[0]] + g[1] * values[nodes[1]] + g[2] * values[nodes[2]]
    }

    /// Nodes of one side, ordered by increasing tangential coordinate.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        let m = self.n + 1;
        match side {
            Side::Left => (0..m).map(|j| j * m).collect(),
            Side::Right => (0..m).map(|j| j * m + self.n).collect(),
            Side::Lower => (0..m).collect(),
            Side::Upper => (0..m).map(|i| self.n * m + i).collect(),
        }
    }

    /// Sides a node lies on.
    pub fn node_tags(&self, idx: usize) -> SideSet {
        let m = self.n + 1;
        let (i, j) = (idx % m, idx / m);
        let mut tags = Vec::new();
        if i == 0 {
            tags.push(Side::Left);
        }
        if i == self.n {
            tags.push(Side::Right);
        }
        if j == 0 {
            tags.push(Side::Lower);
        }
        if j == self.n {
            tags.push(Side::Upper);
        }
        SideSet::of(&tags)
    }

    /// All boundary nodes in increasing index order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| !self.node_tags(i).is_empty())
            .collect()
    }

    /// Nodal values of a function of position.
    pub fn interpolate(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.node_count())
            .map(|i| {
                let p = self.node_point(i);
                f(p[0], p[1])
            })
            .collect()
    }
}
