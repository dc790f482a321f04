//! Command-line front end. Every command reads a flat `key = value` file
//! and writes plain-text artifacts into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::eit::{self, parse_kv, ConfigMap, ExperimentConfig, MeasurementSet, ReconState};
use crate::envelope::{
    check_regularity, extract_phases, interface_geometry, triple_angles, DEFAULT_EPS_RANK,
};
use crate::error::{Error, Result};
use crate::fields::FieldSpec;
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::io;
use crate::transport::{advect, TransportParams, VelocityField};

#[derive(Debug, Parser)]
#[command(name = "lem", version, about = "Lower-envelope multiphase tracking and EIT reconstruction")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthetic boundary measurements from the ground truth of a config.
    Synthesize(Common),
    /// Reconstruct the phases from boundary measurements.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Directory written by `synthesize`; synthesized in memory if absent.
        #[arg(long)]
        measurements: Option<PathBuf>,
    },
    /// Phase labels, interfaces, tuple points and angles of level functions.
    Phases(Common),
    /// Transport level functions by a velocity field.
    Advect(Common),
    /// Regularity report of level functions.
    Check(Common),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write a phase snapshot every K outer iterations.
    #[arg(long, value_name = "K")]
    pub snapshot_every: Option<usize>,
    /// Overrides the `threads` key.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    pub force: bool,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

pub fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synthesize(c) => synthesize(c),
        Command::Reconstruct { common, measurements } => reconstruct(common, measurements.as_deref()),
        Command::Phases(c) => phases(c),
        Command::Advect(c) => advect_cmd(c),
        Command::Check(c) => check(c),
    }
}

fn read_config(path: &Path) -> Result<ConfigMap> {
    parse_kv(&io::read_file(path)?).map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty && !force {
            return Err(Error::config(format!(
                "output directory {} is not empty; pass --force to overwrite",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn experiment(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_map(&read_config(&c.config)?)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(t) = c.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn synthesize(c: &Common) -> Result<()> {
    let cfg = experiment(c)?;
    prepare_out(&c.out, c.force)?;
    let m = cfg.measure()?;
    m.write_dir(&c.out)?;
    io::write_file(&c.out.join("truth_labels.pgm"), &io::labels_pgm(&extract_phases(&cfg.truth_set()?)))?;
    io::write_file(&c.out.join("config.echo"), &cfg.echo())?;
    if m.noisy {
        let clean = eit::synthesize_clean(&eit::SynthesisSpec {
            n: cfg.n,
            truth: &cfg.truth,
            sigma: &cfg.conductivity()?,
            currents: &cfg.current_set(),
            refine: cfg.synth_refine,
            solver: cfg.solver,
            rule: cfg.sigma_rule,
        })?;
        info!("noise level {:.4}%", 100.0 * eit::noise_level(&clean, &m)?);
    }
    Ok(())
}

fn reconstruct(c: &Common, measurements: Option<&Path>) -> Result<()> {
    let cfg = experiment(c)?;
    let m = match measurements {
        Some(dir) => MeasurementSet::read_dir(dir)?,
        None => cfg.measure()?,
    };
    if m.len() != cfg.currents {
        return Err(Error::config(format!(
            "configuration uses {} currents, measurements contain {}",
            cfg.currents,
            m.len()
        )));
    }
    prepare_out(&c.out, c.force)?;
    io::write_file(&c.out.join("config.echo"), &cfg.echo())?;
    let snap_dir = c.out.join("snapshots");
    let every = c.snapshot_every.filter(|&k| k > 0);
    if every.is_some() {
        fs::create_dir_all(&snap_dir).map_err(|e| Error::io(&snap_dir, e))?;
        let labels = extract_phases(&cfg.initial_set()?);
        io::write_file(&snap_dir.join("iter_0000.pgm"), &io::labels_pgm(&labels))?;
    }
    let mut snap_err = None;
    let state = eit::reconstruct(&cfg, &m, |st, info| {
        if let Some(k) = every {
            if st.iter % k == 0 && snap_err.is_none() {
                let path = snap_dir.join(format!("iter_{:04}.pgm", st.iter));
                snap_err = io::write_file(&path, &io::labels_pgm(info.labels)).err();
            }
        }
    })?;
    if let Some(e) = snap_err {
        return Err(e);
    }
    write_reconstruction(&c.out, &state)
}

fn write_reconstruction(out: &Path, state: &ReconState) -> Result<()> {
    io::write_file(&out.join("history.csv"), &eit::history_csv(&state.history))?;
    io::write_file(&out.join("labels.pgm"), &io::labels_pgm(&extract_phases(&state.phi)))?;
    io::write_level_set(out, &state.phi)?;
    let last = state.history.last().expect("initial row");
    let summary = format!(
        "iterations = {}\naccepted_steps = {}\nstop = {:?}\nj0 = {}\ncost = {}\nerror_pct = {}\n",
        state.iter, state.accepted_steps, state.stop, state.j0, last.cost, last.error_pct
    );
    io::write_file(&out.join("summary.txt"), &summary)
}

/// Level functions and an optional velocity given by closed forms or CSV
/// files.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldConfig {
    pub n: usize,
    pub dim: usize,
    /// `phi0`, `phi1`, ...; field 0 defaults to zero and is then pinned.
    pub fields: Vec<FieldSpec>,
    pub theta: [FieldSpec; 2],
    pub t0: f64,
    pub cfl: f64,
    pub eps_rank: f64,
}

impl FieldConfig {
    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let mut cfg = FieldConfig {
            n: 64,
            dim: 2,
            fields: Vec::new(),
            theta: [FieldSpec::Zero, FieldSpec::Zero],
            t0: 0.0,
            cfl: 0.5,
            eps_rank: DEFAULT_EPS_RANK,
        };
        let mut slots: Vec<Option<FieldSpec>> = Vec::new();
        let num = |k: &str, v: &str| -> Result<f64> {
            v.parse().map_err(|_| Error::config(format!("bad value `{v}` for key `{k}`")))
        };
        for (k, v) in map {
            match k.as_str() {
                "n" => cfg.n = v.parse().map_err(|_| Error::config(format!("bad value `{v}` for key `n`")))?,
                "dim" => cfg.dim = v.parse().map_err(|_| Error::config(format!("bad value `{v}` for key `dim`")))?,
                "theta.x" => cfg.theta[0] = FieldSpec::parse(v)?,
                "theta.y" => cfg.theta[1] = FieldSpec::parse(v)?,
                "t0" => cfg.t0 = num(k, v)?,
                "cfl" => cfg.cfl = num(k, v)?,
                "eps_rank" => cfg.eps_rank = num(k, v)?,
                _ => {
                    let idx = k
                        .strip_prefix("phi")
                        .and_then(|s| s.parse::<usize>().ok())
                        .filter(|&i| i < u8::MAX as usize)
                        .ok_or_else(|| Error::config(format!("unknown key `{k}`")))?;
                    if slots.len() <= idx {
                        slots.resize(idx + 1, None);
                    }
                    slots[idx] = Some(FieldSpec::parse(v)?);
                }
            }
        }
        if slots.is_empty() {
            return Err(Error::config("no level functions given (keys phi1, phi2, ...)"));
        }
        if slots[0].is_none() {
            slots[0] = Some(FieldSpec::Zero);
        }
        cfg.fields = slots
            .into_iter()
            .enumerate()
            .map(|(k, s)| s.ok_or_else(|| Error::config(format!("missing key `phi{k}`"))))
            .collect::<Result<_>>()?;
        if cfg.fields.len() < 2 {
            return Err(Error::config("need at least two level functions"));
        }
        Ok(cfg)
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.dim, self.n)
    }

    pub fn level_set(&self) -> Result<LevelFunctionSet> {
        let grid = self.grid()?;
        let fields = self.fields.iter().map(|f| f.sample(&grid)).collect::<Result<Vec<_>>>()?;
        let pinned = fields[0].iter().all(|&v| v == 0.0);
        LevelFunctionSet::new(grid, fields, pinned)
    }

    pub fn echo(&self) -> String {
        let mut s = format!("n = {}\ndim = {}\n", self.n, self.dim);
        for (k, f) in self.fields.iter().enumerate() {
            writeln!(s, "phi{k} = {f}").expect("string write");
        }
        write!(
            s,
            "theta.x = {}\ntheta.y = {}\nt0 = {}\ncfl = {}\neps_rank = {}\n",
            self.theta[0], self.theta[1], self.t0, self.cfl, self.eps_rank
        )
        .expect("string write");
        s
    }
}

fn field_config(c: &Common) -> Result<FieldConfig> {
    FieldConfig::from_map(&read_config(&c.config)?)
}

fn phases(c: &Common) -> Result<()> {
    let cfg = field_config(c)?;
    let phi = cfg.level_set()?;
    prepare_out(&c.out, c.force)?;
    io::write_file(&c.out.join("config.echo"), &cfg.echo())?;
    let labels = extract_phases(&phi);
    let mut areas = String::from("phase,area\n");
    for (k, a) in labels.areas().iter().enumerate() {
        writeln!(areas, "{k},{a}").expect("string write");
    }
    io::write_file(&c.out.join("areas.csv"), &areas)?;
    let dim = phi.grid().dim();
    let tuple_points = if dim == 2 {
        io::write_file(&c.out.join("labels.pgm"), &io::labels_pgm(&labels))?;
        let geo = interface_geometry(&phi)?;
        let mut s = String::from("k,l,kind,x0,y0,x1,y1\n");
        for p in &geo.pairs {
            for (kind, segs) in [("active", &p.active), ("ghost", &p.ghost)] {
                for seg in segs.iter().filter(|s| s.a != s.b) {
                    writeln!(
                        s,
                        "{},{},{kind},{},{},{},{}",
                        p.pair.0, p.pair.1, seg.a[0], seg.a[1], seg.b[0], seg.b[1]
                    )
                    .expect("string write");
                }
            }
        }
        io::write_file(&c.out.join("interfaces.csv"), &s)?;
        geo.tuple_points
    } else if phi.kappa() == dim + 1 {
        crate::envelope::detect_tuple_points(&phi)?.points
    } else {
        Vec::new()
    };
    let mut s = String::from(if dim == 2 { "x,y\n" } else { "x,y,z\n" });
    for p in &tuple_points {
        let cols: Vec<String> = p.iter().map(f64::to_string).collect();
        s.push_str(&cols.join(","));
        s.push('\n');
    }
    io::write_file(&c.out.join("tuple_points.csv"), &s)?;
    if dim == 2 && phi.kappa() == 3 && phi.pinned_zero() {
        let mut s = String::from("point,beta0,beta1,beta2\n");
        for (i, p) in tuple_points.iter().enumerate() {
            let b = triple_angles(&phi, p, cfg.eps_rank)?;
            writeln!(s, "{i},{},{},{}", b[0], b[1], b[2]).expect("string write");
        }
        io::write_file(&c.out.join("angles.csv"), &s)?;
    }
    Ok(())
}

fn advect_cmd(c: &Common) -> Result<()> {
    let cfg = field_config(c)?;
    let phi = cfg.level_set()?;
    let grid = *phi.grid();
    let vx = cfg.theta[0].sample(&grid)?;
    let vy = cfg.theta[1].sample(&grid)?;
    let (theta, removed) = VelocityField::with_projection(grid, vx, vy)?;
    if removed > 0.0 {
        info!("removed normal velocity up to {removed} on the boundary");
    }
    let moved = advect(&phi, &theta, TransportParams::new(cfg.cfl, cfg.t0)?)?;
    prepare_out(&c.out, c.force)?;
    io::write_file(&c.out.join("config.echo"), &cfg.echo())?;
    io::write_level_set(&c.out, &moved)
}

fn check(c: &Common) -> Result<()> {
    let cfg = field_config(c)?;
    let phi = cfg.level_set()?;
    let report = check_regularity(&phi, cfg.eps_rank);
    prepare_out(&c.out, c.force)?;
    io::write_file(&c.out.join("config.echo"), &cfg.echo())?;
    let text = report.to_string();
    print!("{text}");
    io::write_file(&c.out.join("report.txt"), &text)
}
