//! Closed-form level functions used by configurations.

use std::fmt;
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, LevelFunctionSet};
use crate::io;

/// Axis-aligned ellipse `((x − cx)/rx)² + ((y − cy)/ry)² − 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
}

impl Ellipse {
    pub fn circle(cx: f64, cy: f64, r: f64) -> Self {
        Ellipse { cx, cy, rx: r, ry: r }
    }

    pub fn quadratic(&self, x: f64, y: f64) -> f64 {
        ((x - self.cx) / self.rx).powi(2) + ((y - self.cy) / self.ry).powi(2) - 1.0
    }
}

/// One scalar level function.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldSpec {
    Zero,
    Const(f64),
    /// `c + g · x`.
    Affine { c: f64, g: Vec<f64> },
    /// `y − offset − amplitude sin(2π frequency x)`.
    Wavy { offset: f64, amplitude: f64, frequency: f64 },
    /// `scale · min_e q_e(x, y)`; negative inside the union of the ellipses.
    Ellipses { scale: f64, shapes: Vec<Ellipse> },
    /// Nodal values from a level-function CSV file.
    Csv(PathBuf),
}

impl FieldSpec {
    /// Analytic value at `p`; `None` for file-backed fields.
    pub fn eval(&self, p: &[f64]) -> Option<f64> {
        Some(match self {
            FieldSpec::Zero => 0.0,
            FieldSpec::Const(c) => *c,
            FieldSpec::Affine { c, g } => c + g.iter().zip(p).map(|(a, b)| a * b).sum::<f64>(),
            FieldSpec::Wavy {
                offset,
                amplitude,
                frequency,
            } => p[1] - offset - amplitude * (2.0 * std::f64::consts::PI * frequency * p[0]).sin(),
            FieldSpec::Ellipses { scale, shapes } => {
                scale
                    * shapes
                        .iter()
                        .map(|e| e.quadratic(p[0], p[1]))
                        .fold(f64::INFINITY, f64::min)
            }
            FieldSpec::Csv(_) => return None,
        })
    }

    pub fn sample(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        if let FieldSpec::Csv(path) = self {
            let (g, values) = io::read_level_function(path)?;
            if g != *grid {
                return Err(Error::config(format!(
                    "{}: grid n = {} ({}D) does not match n = {} ({}D)",
                    path.display(),
                    g.n(),
                    g.dim(),
                    grid.n(),
                    grid.dim()
                )));
            }
            return Ok(values);
        }
        if let FieldSpec::Affine { g, .. } = self {
            if g.len() != grid.dim() {
                return Err(Error::config(format!(
                    "affine field has {} slopes on a {}D grid",
                    g.len(),
                    grid.dim()
                )));
            }
        }
        if grid.dim() != 2 && matches!(self, FieldSpec::Wavy { .. } | FieldSpec::Ellipses { .. }) {
            return Err(Error::config("wavy and ellipse fields are two-dimensional"));
        }
        Ok((0..grid.node_count())
            .map(|i| self.eval(&grid.node_point(i)[..grid.dim()]).expect("analytic"))
            .collect())
    }

    /// Parses `zero`, `const(c)`, `affine(c, gx, gy[, gz])`,
    /// `wavy(offset, amplitude, frequency)`,
    /// `ellipses(scale; cx, cy, rx, ry; ...)` or `csv(path)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "zero" {
            return Ok(FieldSpec::Zero);
        }
        let bad = || Error::config(format!("cannot parse field `{s}`"));
        let open = s.find('(').ok_or_else(bad)?;
        if !s.ends_with(')') {
            return Err(bad());
        }
        let name = s[..open].trim();
        let body = &s[open + 1..s.len() - 1];
        let nums = |t: &str| -> Result<Vec<f64>> {
            t.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        match name {
            "const" => match nums(body)?.as_slice() {
                [c] => Ok(FieldSpec::Const(*c)),
                _ => Err(bad()),
            },
            "affine" => {
                let v = nums(body)?;
                if v.len() < 3 || v.len() > 4 {
                    return Err(bad());
                }
                Ok(FieldSpec::Affine {
                    c: v[0],
                    g: v[1..].to_vec(),
                })
            }
            "wavy" => match nums(body)?.as_slice() {
                [offset, amplitude, frequency] => Ok(FieldSpec::Wavy {
                    offset: *offset,
                    amplitude: *amplitude,
                    frequency: *frequency,
                }),
                _ => Err(bad()),
            },
            "ellipses" => {
                let mut parts = body.split(';');
                let scale = match nums(parts.next().ok_or_else(bad)?)?.as_slice() {
                    [s] => *s,
                    _ => return Err(bad()),
                };
                let shapes = parts
                    .map(|p| match nums(p)?.as_slice() {
                        [cx, cy, rx, ry] if *rx > 0.0 && *ry > 0.0 => Ok(Ellipse {
                            cx: *cx,
                            cy: *cy,
                            rx: *rx,
                            ry: *ry,
                        }),
                        _ => Err(bad()),
                    })
                    .collect::<Result<Vec<_>>>()?;
                if shapes.is_empty() {
                    return Err(bad());
                }
                Ok(FieldSpec::Ellipses { scale, shapes })
            }
            "csv" => Ok(FieldSpec::Csv(PathBuf::from(body.trim()))),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSpec::Zero => write!(f, "zero"),
            FieldSpec::Const(c) => write!(f, "const({c})"),
            FieldSpec::Affine { c, g } => {
                write!(f, "affine({c}")?;
                for v in g {
                    write!(f, ", {v}")?;
                }
                write!(f, ")")
            }
            FieldSpec::Wavy {
                offset,
                amplitude,
                frequency,
            } => write!(f, "wavy({offset}, {amplitude}, {frequency})"),
            FieldSpec::Ellipses { scale, shapes } => {
                write!(f, "ellipses({scale}")?;
                for e in shapes {
                    write!(f, "; {}, {}, {}, {}", e.cx, e.cy, e.rx, e.ry)?;
                }
                write!(f, ")")
            }
            FieldSpec::Csv(p) => write!(f, "csv({})", p.display()),
        }
    }
}

/// Level-function set with field 0 pinned to zero and the given fields
/// after it.
pub fn pinned_set(grid: GridSpec, rest: &[FieldSpec]) -> Result<LevelFunctionSet> {
    let mut fields = vec![vec![0.0; grid.node_count()]];
    for spec in rest {
        fields.push(spec.sample(&grid)?);
    }
    LevelFunctionSet::new(grid, fields, true)
}
