use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Direction, ExperimentConfig, Normalization};
use crate::error::{Error, Result};
use crate::fem::{LinearSolver, SigmaRule};
use crate::fields::FieldSpec;

/// Ordered `key = value` pairs.
pub type ConfigMap = BTreeMap<String, String>;

/// Parses a flat `key = value` file. `#` starts a comment; duplicate keys
/// are rejected.
pub fn parse_kv(text: &str) -> Result<ConfigMap> {
    let mut map = ConfigMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("line {}: expected `key = value`, found `{line}`", i + 1)))?;
        let k = k.trim().to_string();
        if map.insert(k.clone(), v.trim().to_string()).is_some() {
            return Err(Error::config(format!("line {}: duplicate key `{k}`", i + 1)));
        }
    }
    Ok(map)
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::config(format!("bad value `{v}` for key `{key}`")))
}

fn list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|x| num(key, x.trim())).collect()
}

impl ExperimentConfig {
    /// Keys understood by [`ExperimentConfig::apply`].
    pub const KEYS: &'static [&'static str] = &[
        "n",
        "sigma",
        "truth.phi1",
        "truth.phi2",
        "init.phi1",
        "init.phi2",
        "currents",
        "delta",
        "seed",
        "alpha1",
        "alpha2",
        "alpha3",
        "ls.t_init",
        "ls.backtrack",
        "ls.max_backtracks",
        "ls.armijo",
        "ls.growth",
        "ls.t_max",
        "max_iter",
        "step_tol",
        "cfl",
        "paper_norm",
        "synth_refine",
        "solver",
        "threads",
        "rescale",
        "sigma_rule",
        "direction",
    ];

    /// Overrides defaults with the entries of `map`; any key outside
    /// [`ExperimentConfig::KEYS`] is an error.
    pub fn apply(&mut self, map: &ConfigMap) -> Result<()> {
        for (k, v) in map {
            let v = v.as_str();
            match k.as_str() {
                "n" => self.n = num(k, v)?,
                "sigma" => self.sigma = list(k, v)?,
                "truth.phi1" => self.truth[0] = FieldSpec::parse(v)?,
                "truth.phi2" => self.truth[1] = FieldSpec::parse(v)?,
                "init.phi1" => self.init[0] = FieldSpec::parse(v)?,
                "init.phi2" => self.init[1] = FieldSpec::parse(v)?,
                "currents" => self.currents = num(k, v)?,
                "delta" => self.delta = num(k, v)?,
                "seed" => self.seed = num(k, v)?,
                "alpha1" => self.alpha.alpha1 = num(k, v)?,
                "alpha2" => self.alpha.alpha2 = num(k, v)?,
                "alpha3" => self.alpha.alpha3 = num(k, v)?,
                "ls.t_init" => self.line_search.t_init = num(k, v)?,
                "ls.backtrack" => self.line_search.backtrack = num(k, v)?,
                "ls.max_backtracks" => self.line_search.max_backtracks = num(k, v)?,
                "ls.armijo" => self.line_search.armijo = num(k, v)?,
                "ls.growth" => self.line_search.growth = num(k, v)?,
                "ls.t_max" => self.line_search.t_max = num(k, v)?,
                "max_iter" => self.max_iter = num(k, v)?,
                "step_tol" => self.step_tol = num(k, v)?,
                "cfl" => self.cfl = num(k, v)?,
                "paper_norm" => {
                    self.normalization = match v {
                        "full" => Normalization::Full,
                        "first_current" => Normalization::FirstCurrent,
                        _ => return Err(Error::config(format!("bad value `{v}` for key `{k}`"))),
                    }
                }
                "synth_refine" => self.synth_refine = num(k, v)?,
                "solver" => {
                    self.solver = match v {
                        "cholesky" => LinearSolver::Cholesky,
                        "cg" => LinearSolver::Cg { max_iter: 20_000 },
                        _ => return Err(Error::config(format!("bad value `{v}` for key `{k}`"))),
                    }
                }
                "threads" => self.threads = num(k, v)?,
                "rescale" => self.rescale = num(k, v)?,
                "sigma_rule" => {
                    self.sigma_rule = match v {
                        "centroid" => SigmaRule::Centroid,
                        "blended" => SigmaRule::Blended,
                        _ => return Err(Error::config(format!("bad value `{v}` for key `{k}`"))),
                    }
                }
                "direction" => {
                    self.direction = match v {
                        "steepest" => Direction::Steepest,
                        "conjugate" => Direction::Conjugate,
                        _ => return Err(Error::config(format!("bad value `{v}` for key `{k}`"))),
                    }
                }
                _ => return Err(Error::config(format!("unknown key `{k}`"))),
            }
        }
        self.validate()
    }

    pub fn from_map(map: &ConfigMap) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        cfg.apply(map)?;
        Ok(cfg)
    }

    /// Fully resolved configuration in the same `key = value` format.
    pub fn echo(&self) -> String {
        let ls = &self.line_search;
        let sigma: Vec<String> = self.sigma.iter().map(f64::to_string).collect();
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        put("n", self.n.to_string());
        put("sigma", sigma.join(", "));
        put("truth.phi1", self.truth[0].to_string());
        put("truth.phi2", self.truth[1].to_string());
        put("init.phi1", self.init[0].to_string());
        put("init.phi2", self.init[1].to_string());
        put("currents", self.currents.to_string());
        put("delta", self.delta.to_string());
        put("seed", self.seed.to_string());
        put("alpha1", self.alpha.alpha1.to_string());
        put("alpha2", self.alpha.alpha2.to_string());
        put("alpha3", self.alpha.alpha3.to_string());
        put("ls.t_init", ls.t_init.to_string());
        put("ls.backtrack", ls.backtrack.to_string());
        put("ls.max_backtracks", ls.max_backtracks.to_string());
        put("ls.armijo", ls.armijo.to_string());
        put("ls.growth", ls.growth.to_string());
        put("ls.t_max", ls.t_max.to_string());
        put("max_iter", self.max_iter.to_string());
        put("step_tol", self.step_tol.to_string());
        put("cfl", self.cfl.to_string());
        put(
            "paper_norm",
            match self.normalization {
                Normalization::Full => "full",
                Normalization::FirstCurrent => "first_current",
            }
            .into(),
        );
        put("synth_refine", self.synth_refine.to_string());
        put(
            "solver",
            match self.solver {
                LinearSolver::Cholesky => "cholesky",
                LinearSolver::Cg { .. } => "cg",
            }
            .into(),
        );
        put("threads", self.threads.to_string());
        put("rescale", self.rescale.to_string());
        put(
            "sigma_rule",
            match self.sigma_rule {
                SigmaRule::Centroid => "centroid",
                SigmaRule::Blended => "blended",
            }
            .into(),
        );
        put(
            "direction",
            match self.direction {
                Direction::Steepest => "steepest",
                Direction::Conjugate => "conjugate",
            }
            .into(),
        );
        s
    }
}
