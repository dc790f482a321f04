//! Conductivity reconstruction from boundary data: currents, synthetic
//! measurements, the mismatch cost and the descent loop.

mod config;
mod currents;
mod measure;
mod noise;
mod problem;
mod validate;

pub use config::{parse_kv, ConfigMap};
pub use currents::{build_currents, Current};
pub use measure::{
    add_noise, boundary_l2, noise_level, synthesize, synthesize_clean, MeasurementSet, SynthesisSpec,
};
pub use noise::NormalStream;
pub use problem::{error_metric, CurrentStates, Evaluation, KvProblem};
pub use validate::FdCase;

use std::fmt::Write as _;

use log::{info, warn};

use crate::envelope::{check_regularity, extract_phases, PhaseLabelField, DEFAULT_EPS_RANK};
use crate::error::{Error, Result};
use crate::fem::{LinearSolver, PhaseConductivity, SigmaRule};
use crate::fields::{pinned_set, Ellipse, FieldSpec};
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::shape_gradient::{evaluate_dj, DescentOperator, RegParams};
use crate::transport::{advect, rescale_by_interface_gradient, TransportParams};

/// What the cost is divided by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Full initial cost over all currents.
    #[default]
    Full,
    /// Initial cost of the first current only.
    FirstCurrent,
}

/// Backtracking on the pseudo-time of the transport. The velocity is
/// scaled to unit max-norm, so the step is the largest nodal displacement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineSearch {
    pub t_init: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub armijo: f64,
    /// Factor applied to the step after an immediate acceptance.
    pub growth: f64,
    pub t_max: f64,
}

impl Default for LineSearch {
    fn default() -> Self {
        LineSearch {
            t_init: 0.01,
            backtrack: 0.5,
            max_backtracks: 8,
            armijo: 1e-4,
            growth: 1.5,
            t_max: 0.1,
        }
    }
}

/// How successive shape gradients are combined into a search direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Direction {
    /// The solution of the descent problem itself.
    Steepest,
    /// Polak–Ribière combination with the previous direction in the inner
    /// product of the descent problem, restarted whenever it fails.
    #[default]
    Conjugate,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub sigma: Vec<f64>,
    /// Fields 1 and 2 of the ground truth; field 0 is zero.
    pub truth: Vec<FieldSpec>,
    /// Fields 1 and 2 of the initial guess.
    pub init: Vec<FieldSpec>,
    pub currents: usize,
    pub delta: f64,
    pub seed: u64,
    pub alpha: RegParams,
    pub line_search: LineSearch,
    pub max_iter: usize,
    pub step_tol: f64,
    pub cfl: f64,
    pub normalization: Normalization,
    pub synth_refine: usize,
    pub solver: LinearSolver,
    pub threads: usize,
    pub rescale: bool,
    pub sigma_rule: SigmaRule,
    pub direction: Direction,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 63,
            sigma: vec![1.0, 3.0, 15.0],
            truth: vec![
                FieldSpec::Wavy {
                    offset: 0.5,
                    amplitude: 0.08,
                    frequency: 1.0,
                },
                FieldSpec::Ellipses {
                    scale: 0.2,
                    shapes: vec![
                        Ellipse {
                            cx: 0.35,
                            cy: 0.65,
                            rx: 0.2,
                            ry: 0.1,
                        },
                        Ellipse {
                            cx: 0.75,
                            cy: 0.35,
                            rx: 0.15,
                            ry: 0.25,
                        },
                    ],
                },
            ],
            init: vec![
                FieldSpec::Affine {
                    c: -0.5,
                    g: vec![0.0, 1.0],
                },
                default_init_inclusions(),
            ],
            currents: 11,
            delta: 0.0,
            seed: 1,
            alpha: RegParams::default(),
            line_search: LineSearch::default(),
            max_iter: 200,
            step_tol: 1e-5,
            cfl: 0.5,
            normalization: Normalization::Full,
            synth_refine: 1,
            solver: LinearSolver::Cholesky,
            threads: 1,
            rescale: false,
            sigma_rule: SigmaRule::Blended,
            direction: Direction::Conjugate,
        }
    }
}

/// Four circles on a 2×2 lattice; transport can move, grow, merge or
/// remove inclusions but never create them.
fn default_init_inclusions() -> FieldSpec {
    let c = [0.3, 0.7];
    FieldSpec::Ellipses {
        scale: 0.2,
        shapes: c
            .iter()
            .flat_map(|&y| c.iter().map(move |&x| Ellipse::circle(x, y, 0.12)))
            .collect(),
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sigma.len() != 3 {
            return Err(Error::config("exactly three phase conductivities are required"));
        }
        PhaseConductivity::isotropic(&self.sigma)?;
        if self.truth.len() != 2 || self.init.len() != 2 {
            return Err(Error::config("truth and init need fields 1 and 2"));
        }
        if self.currents == 0 || self.currents > 11 {
            return Err(Error::config(format!("currents must lie in 1..=11, got {}", self.currents)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::config(format!("delta must be >= 0, got {}", self.delta)));
        }
        let ls = &self.line_search;
        if !(ls.t_init > 0.0 && ls.t_max >= ls.t_init) {
            return Err(Error::config("line search needs 0 < t_init <= t_max"));
        }
        if !(ls.backtrack > 0.0 && ls.backtrack < 1.0) || !(ls.growth >= 1.0) {
            return Err(Error::config("line search needs backtrack in (0, 1) and growth >= 1"));
        }
        if !(ls.armijo > 0.0 && ls.armijo < 1.0) {
            return Err(Error::config("armijo constant must lie in (0, 1)"));
        }
        if self.synth_refine == 0 || self.threads == 0 {
            return Err(Error::config("synth_refine and threads must be positive"));
        }
        RegParams::new(self.alpha.alpha1, self.alpha.alpha2, self.alpha.alpha3)?;
        TransportParams::new(self.cfl, 0.0)?;
        GridSpec::square(self.n)?;
        Ok(())
    }

    pub fn conductivity(&self) -> Result<PhaseConductivity> {
        PhaseConductivity::isotropic(&self.sigma)
    }

    pub fn current_set(&self) -> Vec<Current> {
        build_currents().into_iter().take(self.currents).collect()
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::square(self.n)
    }

    pub fn truth_set(&self) -> Result<LevelFunctionSet> {
        pinned_set(self.grid()?, &self.truth)
    }

    pub fn initial_set(&self) -> Result<LevelFunctionSet> {
        pinned_set(self.grid()?, &self.init)
    }

    pub fn measure(&self) -> Result<MeasurementSet> {
        self.validate()?;
        let sigma = self.conductivity()?;
        let currents = self.current_set();
        synthesize(
            &SynthesisSpec {
                n: self.n,
                truth: &self.truth,
                sigma: &sigma,
                currents: &currents,
                refine: self.synth_refine,
                solver: self.solver,
                rule: self.sigma_rule,
            },
            self.delta,
            self.seed,
        )
    }

    pub fn problem(&self, measurements: &MeasurementSet) -> Result<KvProblem> {
        KvProblem::new(
            self.conductivity()?,
            &self.current_set(),
            measurements,
            self.solver,
            self.sigma_rule,
            self.threads,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryRow {
    pub iter: usize,
    pub cost: f64,
    pub error_pct: f64,
    pub step: f64,
}

pub fn history_csv(rows: &[HistoryRow]) -> String {
    let mut s = String::from("iter,cost,error_pct,step\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.iter, r.cost, r.error_pct, r.step).expect("string write");
    }
    s
}

#[derive(Clone, Debug)]
pub struct ReconState {
    pub phi: LevelFunctionSet,
    pub iter: usize,
    pub history: Vec<HistoryRow>,
    pub j0: f64,
    pub accepted_steps: usize,
    pub stop: StopReason,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Running,
    MaxIterations,
    StepTolerance,
    Stationary,
    ZeroCost,
}

/// Per-iteration details handed to the observer.
pub struct IterationInfo<'a> {
    pub labels: &'a PhaseLabelField,
    pub dj: f64,
    pub removed_normal: f64,
    pub backtracks: usize,
    pub accepted: bool,
}

/// Relative raw cost below which the data are considered matched.
const ZERO_COST: f64 = 1e-20;

/// Descent loop on the level functions. `observer` runs after every outer
/// iteration.
pub fn reconstruct(
    cfg: &ExperimentConfig,
    measurements: &MeasurementSet,
    mut observer: impl FnMut(&ReconState, &IterationInfo),
) -> Result<ReconState> {
    cfg.validate()?;
    if measurements.n != cfg.n {
        return Err(Error::config(format!(
            "measurements have n = {}, configuration has n = {}",
            measurements.n, cfg.n
        )));
    }
    let problem = cfg.problem(measurements)?;
    let mesh = problem.mesh().clone();
    let sigma = problem.sigma().clone();
    let truth_labels = extract_phases(&cfg.truth_set()?);
    let descent = DescentOperator::new(&mesh, cfg.alpha, cfg.solver)?;
    let ls = cfg.line_search;
    let data_scale: f64 = measurements.traces.iter().map(|h| boundary_l2(&mesh, h).powi(2)).sum();

    let phi = cfg.initial_set()?;
    let (eval, labels) = problem.evaluate(&phi, true)?;
    let j0 = match cfg.normalization {
        Normalization::Full => eval.cost,
        Normalization::FirstCurrent => eval.states[0].cost,
    };
    let j0 = if j0 > 0.0 { j0 } else { 1.0 };
    let error0 = error_metric(&labels, &truth_labels, &sigma)?;
    let mut state = ReconState {
        phi,
        iter: 0,
        history: vec![HistoryRow {
            iter: 0,
            cost: eval.cost / j0,
            error_pct: error0,
            step: 0.0,
        }],
        j0,
        accepted_steps: 0,
        stop: StopReason::Running,
    };
    info!("iter=0 cost={} error_pct={} step=0", eval.cost / j0, error0);

    let mut current = eval;
    let mut labels = labels;
    let mut t_ls = ls.t_init;
    let mut cached: Option<(crate::transport::VelocityField, f64, f64)> = None;
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    while state.stop == StopReason::Running {
        if current.cost <= ZERO_COST * data_scale {
            state.stop = StopReason::ZeroCost;
            break;
        }
        if state.iter >= cfg.max_iter {
            state.stop = StopReason::MaxIterations;
            break;
        }
        state.iter += 1;
        let j = current.cost / j0;

        let mut conjugate = false;
        let (theta, dj, removed) = match cached.take() {
            Some(c) => c,
            None => {
                let mut s = current.gradient.clone().expect("gradient requested");
                s.scale(1.0 / j0);
                let d = descent.solve(&mesh, &s)?;
                let dj = evaluate_dj(&mesh, &s, d.field.vx(), d.field.vy())?;
                if !(dj < 0.0) || d.field.max_norm() <= crate::transport::EPS_VEL {
                    state.stop = StopReason::Stationary;
                    info!("iter={} stationary dJ={dj}", state.iter);
                    break;
                }
                let mut field = d.field;
                let mut dj = dj;
                if cfg.direction == Direction::Conjugate {
                    let sx = field.vx().to_vec();
                    let sy = field.vy().to_vec();
                    if let Some((px, py, dx, dy)) = prev.take() {
                        let diff_x: Vec<f64> = sx.iter().zip(&px).map(|(a, b)| a - b).collect();
                        let diff_y: Vec<f64> = sy.iter().zip(&py).map(|(a, b)| a - b).collect();
                        let beta = (descent.inner((&sx, &sy), (&diff_x, &diff_y)) / descent.energy(&px, &py)).max(0.0);
                        let cx: Vec<f64> = sx.iter().zip(&dx).map(|(a, b)| a + beta * b).collect();
                        let cy: Vec<f64> = sy.iter().zip(&dy).map(|(a, b)| a + beta * b).collect();
                        let djc = evaluate_dj(&mesh, &s, &cx, &cy)?;
                        if djc < 0.0 && beta > 0.0 {
                            conjugate = true;
                            field = crate::transport::VelocityField::new(*state.phi.grid(), cx, cy)?;
                            dj = djc;
                        }
                    }
                    prev = Some((sx, sy, field.vx().to_vec(), field.vy().to_vec()));
                }
                let norm = field.max_norm();
                (field.scaled(1.0 / norm), dj / norm, d.removed_normal)
            }
        };

        let mut t = t_ls;
        let mut accepted = None;
        let mut backtracks = 0;
        for b in 0..=ls.max_backtracks {
            let trial = advect(&state.phi, &theta, TransportParams::new(cfg.cfl, t)?)?;
            let (eval, trial_labels) = problem.evaluate(&trial, true)?;
            if eval.cost / j0 <= j + ls.armijo * t * dj {
                accepted = Some((trial, eval, trial_labels));
                backtracks = b;
                break;
            }
            t *= ls.backtrack;
            backtracks = b + 1;
        }

        match accepted {
            Some((mut phi, eval, new_labels)) => {
                if cfg.rescale {
                    rescale_by_interface_gradient(&mut phi);
                }
                state.phi = phi;
                current = eval;
                labels = new_labels;
                state.accepted_steps += 1;
                let err = error_metric(&labels, &truth_labels, &sigma)?;
                state.history.push(HistoryRow {
                    iter: state.iter,
                    cost: current.cost / j0,
                    error_pct: err,
                    step: t,
                });
                info!("iter={} cost={} error_pct={} step={}", state.iter, current.cost / j0, err, t);
                let report = check_regularity(&state.phi, DEFAULT_EPS_RANK);
                if !report.pass {
                    warn!("iter={} regularity check failed (smallest value {:?})", state.iter, report.worst());
                }
                t_ls = if backtracks == 0 { (t * ls.growth).min(ls.t_max) } else { t.max(ls.t_init) };
                if t < cfg.step_tol {
                    state.stop = StopReason::StepTolerance;
                }
            }
            None => {
                let last = *state.history.last().expect("initial row");
                state.history.push(HistoryRow {
                    iter: state.iter,
                    step: 0.0,
                    ..last
                });
                prev = None;
                if conjugate {
                    info!("iter={} line search failed, restarting from the steepest direction", state.iter);
                } else {
                    t_ls = t;
                    info!("iter={} line search failed, step reduced to {t_ls}", state.iter);
                    if t_ls < cfg.step_tol {
                        state.stop = StopReason::StepTolerance;
                    }
                    cached = Some((theta, dj, removed));
                }
            }
        }
        observer(
            &state,
            &IterationInfo {
                labels: &labels,
                dj,
                removed_normal: removed,
                backtracks,
                accepted: accepted_flag(&state),
            },
        );
    }
    Ok(state)
}

fn accepted_flag(state: &ReconState) -> bool {
    state.history.last().is_some_and(|r| r.step > 0.0)
}
