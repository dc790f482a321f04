//! Uniform node grids over the unit box and multilinearly interpolated
//! scalar fields sampled on them.

use crate::error::{Error, Result};

/// Uniform grid with `n` cells (so `n + 1` nodes) along each of `dim` axes,
/// covering `[0, 1]^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    dim: usize,
    n: usize,
}

impl GridSpec {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::config(format!("grid dimension must be 2 or 3, got {dim}")));
        }
        if n < 2 {
            return Err(Error::config(format!("grid needs at least 2 cells per side, got {n}")));
        }
        Ok(GridSpec { dim, n })
    }

    pub fn square(n: usize) -> Result<Self> {
        Self::new(2, n)
    }

    pub fn cube(n: usize) -> Result<Self> {
        Self::new(3, n)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn nodes_per_side(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_side().pow(self.dim as u32)
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Coordinate of node index `i` along one axis. `i / n` rather than
    /// `i * h` so that the last node lands exactly on 1.
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    /// Row-major node index, first axis fastest.
    pub fn node_index(&self, ijk: &[usize]) -> usize {
        let m = self.nodes_per_side();
        ijk.iter().rev().fold(0, |acc, &i| acc * m + i)
    }

    pub fn node_ijk(&self, mut idx: usize) -> [usize; 3] {
        let m = self.nodes_per_side();
        let mut out = [0; 3];
        for slot in out.iter_mut().take(self.dim) {
            *slot = idx % m;
            idx /= m;
        }
        out
    }

    pub fn node_point(&self, idx: usize) -> [f64; 3] {
        let ijk = self.node_ijk(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.coord(ijk[a]);
        }
        p
    }

    pub fn cell_index(&self, ijk: &[usize]) -> usize {
        ijk.iter().rev().fold(0, |acc, &i| acc * self.n + i)
    }

    pub fn cell_ijk(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for slot in out.iter_mut().take(self.dim) {
            *slot = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn cell_centroid(&self, idx: usize) -> [f64; 3] {
        let ijk = self.cell_ijk(idx);
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = (ijk[a] as f64 + 0.5) / self.n as f64;
        }
        p
    }

    /// Node indices of the `2^dim` corners of a cell, in binary order
    /// (bit `a` set means the upper node along axis `a`).
    pub fn cell_corners(&self, cell: usize) -> Vec<usize> {
        let ijk = self.cell_ijk(cell);
        (0..1usize << self.dim)
            .map(|bits| {
                let mut c = [0; 3];
                for a in 0..self.dim {
                    c[a] = ijk[a] + ((bits >> a) & 1);
                }
                self.node_index(&c[..self.dim])
            })
            .collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|&v| (0.0..=1.0).contains(&v))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { point: x.to_vec() })
        }
    }

    /// Cell containing `x` along with local coordinates in `[0, 1]`.
    /// Points on the upper boundary belong to the last cell.
    pub(crate) fn locate(&self, x: &[f64]) -> ([usize; 3], [f64; 3]) {
        let mut cell = [0; 3];
        let mut local = [0.0; 3];
        for a in 0..self.dim {
            let s = x[a] * self.n as f64;
            let i = (s.floor().max(0.0) as usize).min(self.n - 1);
            cell[a] = i;
            local[a] = s - i as f64;
        }
        (cell, local)
    }
}

/// A scalar field sampled at grid nodes.
pub type NodeValues = Vec<f64>;

/// Multilinear interpolation of nodal `values` at `x` (assumed inside).
pub(crate) fn interpolate(grid: &GridSpec, values: &[f64], x: &[f64]) -> f64 {
    let (cell, t) = grid.locate(x);
    let mut acc = 0.0;
    for bits in 0..1usize << grid.dim() {
        let mut w = 1.0;
        let mut c = [0; 3];
        for a in 0..grid.dim() {
            let up = (bits >> a) & 1;
            c[a] = cell[a] + up;
            w *= if up == 1 { t[a] } else { 1.0 - t[a] };
        }
        acc += w * values[grid.node_index(&c[..grid.dim()])];
    }
    acc
}

/// Exact gradient of the multilinear interpolant inside the cell that
/// contains `x`.
pub(crate) fn interpolant_gradient(grid: &GridSpec, values: &[f64], x: &[f64]) -> [f64; 3] {
    let (cell, t) = grid.locate(x);
    let n = grid.n() as f64;
    let mut g = [0.0; 3];
    for bits in 0..1usize << grid.dim() {
        let mut c = [0; 3];
        for a in 0..grid.dim() {
            c[a] = cell[a] + ((bits >> a) & 1);
        }
        let v = values[grid.node_index(&c[..grid.dim()])];
        for (a, ga) in g.iter_mut().enumerate().take(grid.dim()) {
            let mut w = n;
            for b in 0..grid.dim() {
                let up = (bits >> b) & 1;
                if b == a {
                    w *= if up == 1 { 1.0 } else { -1.0 };
                } else {
                    w *= if up == 1 { t[b] } else { 1.0 - t[b] };
                }
            }
            *ga += w * v;
        }
    }
    g
}

/// Central difference of the interpolant with stencil `h`, falling back to
/// a one-sided difference where the stencil would leave the box.
pub(crate) fn central_gradient(grid: &GridSpec, values: &[f64], x: &[f64]) -> [f64; 3] {
    let h = grid.h();
    let mut g = [0.0; 3];
    let mut xp = [0.0; 3];
    let mut xm = [0.0; 3];
    for a in 0..grid.dim() {
        xp[..grid.dim()].copy_from_slice(&x[..grid.dim()]);
        xm[..grid.dim()].copy_from_slice(&x[..grid.dim()]);
        xp[a] = (x[a] + h).min(1.0);
        xm[a] = (x[a] - h).max(0.0);
        let fp = interpolate(grid, values, &xp[..grid.dim()]);
        let fm = interpolate(grid, values, &xm[..grid.dim()]);
        g[a] = (fp - fm) / (xp[a] - xm[a]);
    }
    g
}

/// The κ level functions `φ_0, …, φ_{κ-1}` whose lower envelope defines
/// the phases.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelFunctionSet {
    grid: GridSpec,
    fields: Vec<NodeValues>,
    pinned_zero: bool,
}

impl LevelFunctionSet {
    pub fn new(grid: GridSpec, fields: Vec<NodeValues>, pinned_zero: bool) -> Result<Self> {
        if fields.len() < 2 {
            return Err(Error::config(format!(
                "need at least two level functions, got {}",
                fields.len()
            )));
        }
        if fields.len() > u8::MAX as usize {
            return Err(Error::config("too many level functions"));
        }
        for (k, f) in fields.iter().enumerate() {
            if f.len() != grid.node_count() {
                return Err(Error::config(format!(
                    "field {k} has {} values, grid expects {}",
                    f.len(),
                    grid.node_count()
                )));
            }
            if let Some(bad) = f.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data(format!("field {k} is not finite at node {bad}")));
            }
        }
        if pinned_zero && fields[0].iter().any(|&v| v != 0.0) {
            return Err(Error::config("field 0 is pinned but not identically zero"));
        }
        Ok(LevelFunctionSet {
            grid,
            fields,
            pinned_zero,
        })
    }

    /// Samples `funcs` at every node. Field 0 is pinned when `pin_first` is
    /// set, in which case `funcs[0]` is ignored and replaced by zero.
    pub fn from_fns<F>(grid: GridSpec, funcs: &[F], pin_first: bool) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let fields = funcs
            .iter()
            .enumerate()
            .map(|(k, f)| {
                (0..grid.node_count())
                    .map(|idx| {
                        if k == 0 && pin_first {
                            0.0
                        } else {
                            f(&grid.node_point(idx)[..grid.dim()])
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(grid, fields, pin_first)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn kappa(&self) -> usize {
        self.fields.len()
    }

    pub fn pinned_zero(&self) -> bool {
        self.pinned_zero
    }

    pub fn field(&self, k: usize) -> &[f64] {
        &self.fields[k]
    }

    pub fn fields(&self) -> &[NodeValues] {
        &self.fields
    }

    pub(crate) fn fields_mut(&mut self) -> &mut [NodeValues] {
        &mut self.fields
    }

    pub fn into_fields(self) -> Vec<NodeValues> {
        self.fields
    }

    pub fn max_abs(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Equality tolerance for interpolated comparisons.
    pub fn tol_eq(&self) -> f64 {
        (1e-10 * self.max_abs()).max(f64::MIN_POSITIVE)
    }

    /// Interpolated values of every field at `x`, without a domain check.
    pub(crate) fn values_at(&self, x: &[f64]) -> Vec<f64> {
        self.fields
            .iter()
            .map(|f| interpolate(&self.grid, f, x))
            .collect()
    }

    pub fn value(&self, k: usize, x: &[f64]) -> Result<f64> {
        self.grid.check_point(x)?;
        Ok(interpolate(&self.grid, &self.fields[k], x))
    }

    /// Central-difference gradient of the interpolated field `k` at `x`.
    pub fn gradient(&self, k: usize, x: &[f64]) -> Result<[f64; 3]> {
        self.grid.check_point(x)?;
        Ok(central_gradient(&self.grid, &self.fields[k], x))
    }

    /// Central-difference gradient of `φ_k − φ_l`.
    pub(crate) fn difference_gradient(&self, k: usize, l: usize, x: &[f64]) -> [f64; 3] {
        let gk = central_gradient(&self.grid, &self.fields[k], x);
        let gl = central_gradient(&self.grid, &self.fields[l], x);
        [gk[0] - gl[0], gk[1] - gl[1], gk[2] - gl[2]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_or_odd_grids() {
        assert!(GridSpec::new(2, 1).is_err());
        assert!(GridSpec::new(4, 8).is_err());
        let g = GridSpec::square(4).unwrap();
        assert_eq!(g.node_count(), 25);
        assert_eq!(g.h() * g.n() as f64, 1.0);
    }

    #[test]
    fn node_indexing_round_trips() {
        let g = GridSpec::cube(3).unwrap();
        for idx in 0..g.node_count() {
            let ijk = g.node_ijk(idx);
            assert_eq!(g.node_index(&ijk), idx);
        }
        assert_eq!(g.node_point(g.node_count() - 1), [1.0, 1.0, 1.0]);
    }

    #[test]
    fn bilinear_reproduces_bilinear_functions() {
        let g = GridSpec::square(5).unwrap();
        let f = |p: &[f64]| 1.0 + 2.0 * p[0] - 3.0 * p[1] + 0.5 * p[0] * p[1];
        let values: Vec<f64> = (0..g.node_count()).map(|i| f(&g.node_point(i)[..2])).collect();
        for &x in &[[0.13, 0.77], [1.0, 1.0], [0.0, 0.5], [0.999, 0.001]] {
            assert!((interpolate(&g, &values, &x) - f(&x)).abs() < 1e-13);
        }
        let grad = interpolant_gradient(&g, &values, &[0.3, 0.3]);
        assert!((grad[0] - (2.0 + 0.5 * 0.3)).abs() < 1e-12);
        assert!((grad[1] - (-3.0 + 0.5 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn central_gradient_is_one_sided_at_the_wall() {
        let g = GridSpec::square(8).unwrap();
        let values: Vec<f64> = (0..g.node_count()).map(|i| g.node_point(i)[0]).collect();
        let grad = central_gradient(&g, &values, &[0.0, 0.4]);
        assert!((grad[0] - 1.0).abs() < 1e-12);
        assert!(grad[1].abs() < 1e-12);
    }

    #[test]
    fn pinned_field_must_be_zero() {
        let g = GridSpec::square(2).unwrap();
        let fields = vec![vec![1.0; 9], vec![0.0; 9]];
        assert!(LevelFunctionSet::new(g, fields, true).is_err());
    }
}
