use std::fmt::Write as _;
use std::path::Path;

use super::noise::NormalStream;
use super::Current;
use crate::envelope::{check_regularity, DEFAULT_EPS_RANK};
use crate::error::{Error, Result};
use crate::fem::{solve_neumann_gauged, LinearSolver, PhaseConductivity, SigmaRule, Side, TriMesh};
use crate::fields::{pinned_set, FieldSpec};
use crate::grid::GridSpec;
use crate::io;

/// Boundary potentials, one trace per current, stored at the boundary
/// nodes of the mesh in increasing node order.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    pub n: usize,
    pub traces: Vec<Vec<f64>>,
    pub noisy: bool,
    pub delta: f64,
    pub seed: u64,
    /// Mean over boundary nodes removed from each clean trace.
    pub gauge_shift: Vec<f64>,
}

impl MeasurementSet {
    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    /// Trace `i` as a nodal vector, zero at interior nodes.
    pub fn nodal(&self, mesh: &TriMesh, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; mesh.node_count()];
        for (&node, &h) in mesh.boundary_nodes().iter().zip(&self.traces[i]) {
            out[node] = h;
        }
        out
    }

    fn check_mesh(&self, mesh: &TriMesh) -> Result<()> {
        if mesh.n() != self.n {
            return Err(Error::config(format!(
                "measurements were taken at n = {}, mesh has n = {}",
                self.n,
                mesh.n()
            )));
        }
        Ok(())
    }

    /// Writes `h01.csv`, `h02.csv`, ... and `meta.txt` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        let mesh = TriMesh::new(self.n)?;
        let nodes = mesh.boundary_nodes();
        for (i, trace) in self.traces.iter().enumerate() {
            let mut s = String::from("node,x,y,h\n");
            for (&node, h) in nodes.iter().zip(trace) {
                let p = mesh.node_point(node);
                writeln!(s, "{node},{},{},{h}", p[0], p[1]).expect("string write");
            }
            io::write_file(&dir.join(format!("h{:02}.csv", i + 1)), &s)?;
        }
        let shifts: Vec<String> = self.gauge_shift.iter().map(f64::to_string).collect();
        let meta = format!(
            "n = {}\ncurrents = {}\nnoisy = {}\ndelta = {}\nseed = {}\ngauge_shift = {}\n",
            self.n,
            self.traces.len(),
            self.noisy,
            self.delta,
            self.seed,
            shifts.join(",")
        );
        io::write_file(&dir.join("meta.txt"), &meta)
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("meta.txt");
        let meta = io::read_file(&meta_path)?;
        let mut kv = std::collections::BTreeMap::new();
        for (i, line) in meta.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: meta_path.clone(),
                line: i + 1,
                msg: "expected key = value".into(),
            })?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| {
            kv.get(k).cloned().ok_or_else(|| Error::Parse {
                path: meta_path.clone(),
                line: 0,
                msg: format!("missing key `{k}`"),
            })
        };
        let bad = |k: &str| Error::Parse {
            path: meta_path.clone(),
            line: 0,
            msg: format!("bad value for `{k}`"),
        };
        let n: usize = get("n")?.parse().map_err(|_| bad("n"))?;
        let count: usize = get("currents")?.parse().map_err(|_| bad("currents"))?;
        let noisy: bool = get("noisy")?.parse().map_err(|_| bad("noisy"))?;
        let delta: f64 = get("delta")?.parse().map_err(|_| bad("delta"))?;
        let seed: u64 = get("seed")?.parse().map_err(|_| bad("seed"))?;
        let gauge_shift = get("gauge_shift")?
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad("gauge_shift")))
            .collect::<Result<Vec<_>>>()?;
        let mesh = TriMesh::new(n)?;
        let nodes = mesh.boundary_nodes();
        let mut traces = Vec::with_capacity(count);
        for i in 0..count {
            let path = dir.join(format!("h{:02}.csv", i + 1));
            let text = io::read_file(&path)?;
            let rows = io::parse_numeric_csv(&path, &text, &["node", "x", "y", "h"])?;
            if rows.len() != nodes.len() || rows.iter().zip(&nodes).any(|(r, &nd)| r[0] != nd as f64) {
                return Err(Error::Parse {
                    path,
                    line: 0,
                    msg: format!("expected the {} boundary nodes of an n = {n} mesh", nodes.len()),
                });
            }
            traces.push(rows.into_iter().map(|r| r[3]).collect());
        }
        Ok(MeasurementSet {
            n,
            traces,
            noisy,
            delta,
            seed,
            gauge_shift,
        })
    }
}

/// Ground-truth description for synthetic data.
#[derive(Clone, Debug)]
pub struct SynthesisSpec<'a> {
    pub n: usize,
    pub truth: &'a [FieldSpec],
    pub sigma: &'a PhaseConductivity,
    pub currents: &'a [Current],
    /// Solve on a mesh refined by this factor, then sample at the coarse
    /// boundary nodes.
    pub refine: usize,
    pub solver: LinearSolver,
    pub rule: SigmaRule,
}

/// Noiseless traces of the pure Neumann problems on the ground truth,
/// shifted to zero mean over the boundary nodes.
pub fn synthesize_clean(spec: &SynthesisSpec) -> Result<MeasurementSet> {
    if spec.refine == 0 {
        return Err(Error::config("synthesis refinement must be at least 1"));
    }
    let fine_n = spec.n * spec.refine;
    let grid = GridSpec::square(fine_n)?;
    let phi = pinned_set(grid, spec.truth)?;
    let report = check_regularity(&phi, DEFAULT_EPS_RANK);
    if !report.pass {
        return Err(Error::Precondition(format!(
            "ground truth is not regular (smallest value {:?})",
            report.worst()
        )));
    }
    let fine = TriMesh::new(fine_n)?;
    let coarse = TriMesh::new(spec.n)?;
    let sigma = spec.rule.element_sigma(&phi, spec.sigma, &fine)?;
    let f = vec![0.0; fine.element_count()];
    let m_fine = fine_n + 1;
    let m = spec.n + 1;
    let nodes: Vec<usize> = coarse
        .boundary_nodes()
        .into_iter()
        .map(|idx| (idx / m) * spec.refine * m_fine + (idx % m) * spec.refine)
        .collect();
    let mut traces = Vec::with_capacity(spec.currents.len());
    let mut shifts = Vec::with_capacity(spec.currents.len());
    for g in spec.currents {
        let u = solve_neumann_gauged(&fine, &sigma, &f, &g.sample(&fine), spec.solver)?;
        let mut h: Vec<f64> = nodes.iter().map(|&i| u[i]).collect();
        let mean = h.iter().sum::<f64>() / h.len() as f64;
        h.iter_mut().for_each(|v| *v -= mean);
        traces.push(h);
        shifts.push(mean);
    }
    Ok(MeasurementSet {
        n: spec.n,
        traces,
        noisy: false,
        delta: 0.0,
        seed: 0,
        gauge_shift: shifts,
    })
}

/// Adds i.i.d. `N(0, (δ ‖h_i‖_∞)²)` noise at every boundary node; trace `i`
/// (zero-based) draws from the stream seeded with `seed + i`.
pub fn add_noise(clean: &MeasurementSet, delta: f64, seed: u64) -> Result<MeasurementSet> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("noise parameter must be >= 0, got {delta}")));
    }
    let mut out = clean.clone();
    out.delta = delta;
    out.seed = seed;
    out.noisy = delta > 0.0;
    if delta == 0.0 {
        return Ok(out);
    }
    for (i, trace) in out.traces.iter_mut().enumerate() {
        let sd = delta * trace.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut stream = NormalStream::new(seed.wrapping_add(i as u64));
        for v in trace.iter_mut() {
            *v += sd * stream.next_normal();
        }
    }
    Ok(out)
}

pub fn synthesize(spec: &SynthesisSpec, delta: f64, seed: u64) -> Result<MeasurementSet> {
    add_noise(&synthesize_clean(spec)?, delta, seed)
}

/// `‖w‖_{L²(∂D)}` of a trace at the boundary nodes, by the trapezoid rule
/// on each boundary edge.
pub fn boundary_l2(mesh: &TriMesh, trace: &[f64]) -> f64 {
    let nodes = mesh.boundary_nodes();
    let mut nodal = vec![0.0; mesh.node_count()];
    for (&i, &v) in nodes.iter().zip(trace) {
        nodal[i] = v;
    }
    let h = mesh.h();
    Side::ALL
        .iter()
        .map(|&s| {
            mesh.side_nodes(s)
                .windows(2)
                .map(|w| 0.5 * h * (nodal[w[0]].powi(2) + nodal[w[1]].powi(2)))
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

/// `Σ_i ‖h_i − h̃_i‖ / Σ_i ‖h_i‖` as a fraction.
pub fn noise_level(clean: &MeasurementSet, noisy: &MeasurementSet) -> Result<f64> {
    if clean.n != noisy.n || clean.len() != noisy.len() {
        return Err(Error::config("measurement sets do not match"));
    }
    let mesh = TriMesh::new(clean.n)?;
    clean.check_mesh(&mesh)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (a, b) in clean.traces.iter().zip(&noisy.traces) {
        let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        num += boundary_l2(&mesh, &d);
        den += boundary_l2(&mesh, a);
    }
    if den == 0.0 {
        return Err(Error::Data("clean measurements vanish".into()));
    }
    Ok(num / den)
}
