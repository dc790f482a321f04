use std::fmt;

use super::junction::{coincidence_min_singular, in_cell, project_to_coincidence, Newton};
use super::{pairwise_interface, Label};
use crate::grid::LevelFunctionSet;

#[derive(Clone, Debug, PartialEq)]
pub struct PairRegularity {
    pub pair: (Label, Label),
    /// Smallest `|∇(φ_k − φ_l)|` over the sampled coincidence set; `None`
    /// when the two fields never meet.
    pub min_gradient: Option<f64>,
    pub samples: usize,
    pub degenerate_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TupleRegularity {
    pub set: Vec<Label>,
    /// Smallest singular value of the coincidence Jacobian over the
    /// sampled points; `None` when no point was found.
    pub min_singular: Option<f64>,
    pub samples: usize,
    pub singular_cells: usize,
    pub failed_cells: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularityReport {
    pub eps_rank: f64,
    pub pairs: Vec<PairRegularity>,
    pub higher: Vec<TupleRegularity>,
    pub pass: bool,
}

impl RegularityReport {
    pub fn pair(&self, k: Label, l: Label) -> Option<&PairRegularity> {
        let key = (k.min(l), k.max(l));
        self.pairs.iter().find(|p| p.pair == key)
    }

    /// Smallest of all reported minima.
    pub fn worst(&self) -> Option<f64> {
        self.pairs
            .iter()
            .filter_map(|p| p.min_gradient)
            .chain(self.higher.iter().filter_map(|t| t.min_singular))
            .reduce(f64::min)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "none".to_string(), |x| format!("{x}"))
}

impl fmt::Display for RegularityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eps_rank = {}", self.eps_rank)?;
        for p in &self.pairs {
            writeln!(
                f,
                "pair {},{}: min_grad = {} samples = {} degenerate_cells = {}",
                p.pair.0,
                p.pair.1,
                fmt_opt(p.min_gradient),
                p.samples,
                p.degenerate_cells
            )?;
        }
        for t in &self.higher {
            let set: Vec<String> = t.set.iter().map(|k| k.to_string()).collect();
            writeln!(
                f,
                "set {}: min_singular = {} samples = {} singular_cells = {} failed_cells = {}",
                set.join(","),
                fmt_opt(t.min_singular),
                t.samples,
                t.singular_cells,
                t.failed_cells
            )?;
        }
        writeln!(f, "result = {}", if self.pass { "pass" } else { "fail" })
    }
}

/// Samples every coincidence set and checks the non-degeneracy conditions
/// that make the phases a partition with thin boundaries.
pub fn check_regularity(phi: &LevelFunctionSet, eps_rank: f64) -> RegularityReport {
    let kappa = phi.kappa();
    let mut pairs = Vec::new();
    for k in 0..kappa {
        for l in k + 1..kappa {
            pairs.push(check_pair(phi, k, l));
        }
    }
    let mut higher = Vec::new();
    let max_size = kappa.min(phi.grid().dim() + 1);
    for size in 3..=max_size {
        for set in subsets(kappa, size) {
            higher.push(check_set(phi, &set));
        }
    }
    let ok = |v: Option<f64>| v.is_none_or(|m| m > eps_rank);
    let pass = pairs.iter().all(|p| ok(p.min_gradient)) && higher.iter().all(|t| ok(t.min_singular));
    RegularityReport {
        eps_rank,
        pairs,
        higher,
        pass,
    }
}

fn norm(g: [f64; 3]) -> f64 {
    (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt()
}

fn check_pair(phi: &LevelFunctionSet, k: usize, l: usize) -> PairRegularity {
    let grid = phi.grid();
    let mut min = f64::INFINITY;
    let mut samples = 0;
    let degenerate_cells;
    if grid.dim() == 2 {
        let iface = pairwise_interface(phi, k as Label, l as Label).expect("valid pair");
        for seg in iface.all_segments() {
            min = min.min(norm(phi.difference_gradient(k, l, &seg.midpoint())));
            samples += 1;
        }
        degenerate_cells = iface.degenerate_cells.len();
    } else {
        // zero crossings along grid edges
        let (fk, fl) = (phi.field(k), phi.field(l));
        let tol = phi.tol_eq();
        let m = grid.nodes_per_side();
        let mut degenerate = 0;
        for idx in 0..grid.node_count() {
            let ijk = grid.node_ijk(idx);
            let va = fk[idx] - fl[idx];
            for a in 0..3 {
                if ijk[a] + 1 >= m {
                    continue;
                }
                let mut nb = ijk;
                nb[a] += 1;
                let jdx = grid.node_index(&nb);
                let vb = fk[jdx] - fl[jdx];
                if va.abs() <= tol && vb.abs() <= tol {
                    degenerate += 1;
                    continue;
                }
                if (va >= 0.0) == (vb >= 0.0) {
                    continue;
                }
                let t = va / (va - vb);
                let pa = grid.node_point(idx);
                let pb = grid.node_point(jdx);
                let x: Vec<f64> = (0..3).map(|c| pa[c] + t * (pb[c] - pa[c])).collect();
                min = min.min(norm(phi.difference_gradient(k, l, &x)));
                samples += 1;
            }
        }
        degenerate_cells = degenerate;
    }
    if degenerate_cells > 0 {
        min = 0.0;
    }
    PairRegularity {
        pair: (k as Label, l as Label),
        min_gradient: (samples > 0 || degenerate_cells > 0).then_some(min),
        samples,
        degenerate_cells,
    }
}

fn check_set(phi: &LevelFunctionSet, set: &[usize]) -> TupleRegularity {
    let grid = phi.grid();
    let tol = phi.tol_eq();
    let mut out = TupleRegularity {
        set: set.iter().map(|&k| k as Label).collect(),
        min_singular: None,
        samples: 0,
        singular_cells: 0,
        failed_cells: 0,
    };
    let mut min = f64::INFINITY;
    for cell in 0..grid.cell_count() {
        let corners = grid.cell_corners(cell);
        let brackets = set[1..].iter().all(|&k| {
            let (lo, hi) = corners.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| {
                let v = phi.field(set[0])[c] - phi.field(k)[c];
                (lo.min(v), hi.max(v))
            });
            lo <= tol && hi >= -tol
        });
        if !brackets {
            continue;
        }
        let x0 = &grid.cell_centroid(cell)[..grid.dim()];
        match project_to_coincidence(phi, set, x0) {
            Newton::Converged(x) => {
                if in_cell(phi, cell, &x, 0.5 * grid.h()) {
                    min = min.min(coincidence_min_singular(phi, set, &x));
                    out.samples += 1;
                }
            }
            Newton::Singular => {
                out.singular_cells += 1;
                min = 0.0;
            }
            Newton::Diverged => out.failed_cells += 1,
        }
    }
    if out.samples > 0 || out.singular_cells > 0 {
        out.min_singular = Some(min);
    }
    out
}

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, size: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for k in start..n {
            cur.push(k);
            rec(k + 1, n, size, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, size, &mut Vec::new(), &mut out);
    out
}
