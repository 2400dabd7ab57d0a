use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{GraphBuilder, MeasureMode, WeightedGraph};
use crate::error::{Error, Result};

/// Deterministic graph generators.
///
/// Vertex ids and ordering:
/// * `path_N`, `cycle_N`, `polyline_N_α`: `"0"` .. `"N-1"` along the line.
/// * `grid_AxB`: `"r{i}c{j}"` in row-major order, `A` rows and `B` columns.
/// * `binary_tree_depth_D`: heap order `"0"` .. `"2^(D+1)-2"`, children of `k` are `2k+1`, `2k+2`.
/// * `star_N`: centre `"0"`, leaves `"1"` .. `"N"`.
///
/// All weights are one except `polyline`, where `b(k, k+1) = (k+1)^α`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Family {
    Path(usize),
    Cycle(usize),
    Grid(usize, usize),
    BinaryTree(u32),
    Star(usize),
    Polyline(usize, f64),
}

fn invalid(spec: &str, reason: &str) -> Error {
    Error::InvalidFamily { spec: spec.to_string(), reason: reason.to_string() }
}

impl Family {
    fn validate(&self) -> Result<()> {
        let spec = self.to_string();
        match *self {
            Family::Path(n) | Family::Polyline(n, _) | Family::Star(n) if n < 2 => Err(invalid(&spec, "N < 2")),
            Family::Cycle(n) if n < 3 => Err(invalid(&spec, "a cycle needs N >= 3")),
            Family::Grid(a, b) if a == 0 || b == 0 || a * b < 2 => Err(invalid(&spec, "grid needs at least two cells")),
            Family::BinaryTree(d) if d < 1 => Err(invalid(&spec, "depth < 1")),
            Family::BinaryTree(d) if d > 24 => Err(invalid(&spec, "depth > 24")),
            Family::Polyline(_, alpha) if !alpha.is_finite() => Err(invalid(&spec, "alpha must be finite")),
            _ => Ok(()),
        }
    }

    /// Number of vertices the generator will produce.
    pub fn vertex_count(&self) -> usize {
        match *self {
            Family::Path(n) | Family::Cycle(n) | Family::Polyline(n, _) => n,
            Family::Grid(a, b) => a * b,
            Family::BinaryTree(d) => (1usize << (d + 1)) - 1,
            Family::Star(n) => n + 1,
        }
    }

    pub fn generate(&self, mode: MeasureMode) -> Result<WeightedGraph> {
        self.validate()?;
        let mut g = GraphBuilder::new();
        let num = |k: usize| k.to_string();
        match *self {
            Family::Path(n) => {
                for k in 0..n - 1 {
                    g.edge(&num(k), &num(k + 1), 1.0)?;
                }
            }
            Family::Cycle(n) => {
                for k in 0..n {
                    g.edge(&num(k), &num((k + 1) % n), 1.0)?;
                }
            }
            Family::Grid(a, b) => {
                let cell = |i: usize, j: usize| format!("r{i}c{j}");
                for i in 0..a {
                    for j in 0..b {
                        g.vertex(&cell(i, j))?;
                    }
                }
                for i in 0..a {
                    for j in 0..b {
                        if j + 1 < b {
                            g.edge(&cell(i, j), &cell(i, j + 1), 1.0)?;
                        }
                        if i + 1 < a {
                            g.edge(&cell(i, j), &cell(i + 1, j), 1.0)?;
                        }
                    }
                }
            }
            Family::BinaryTree(_) => {
                let n = self.vertex_count();
                g.vertex("0")?;
                for k in 1..n {
                    g.edge(&num((k - 1) / 2), &num(k), 1.0)?;
                }
            }
            Family::Star(n) => {
                for k in 1..=n {
                    g.edge("0", &num(k), 1.0)?;
                }
            }
            Family::Polyline(n, alpha) => {
                for k in 0..n - 1 {
                    let w = ((k + 1) as f64).powf(alpha);
                    if !(w.is_finite() && w > 0.0) {
                        return Err(invalid(&self.to_string(), &format!("weight (k+1)^alpha out of range at k = {k}")));
                    }
                    g.edge(&num(k), &num(k + 1), w)?;
                }
            }
        }
        g.build(mode)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::Path(n) => write!(f, "path_{n}"),
            Family::Cycle(n) => write!(f, "cycle_{n}"),
            Family::Grid(a, b) => write!(f, "grid_{a}x{b}"),
            Family::BinaryTree(d) => write!(f, "binary_tree_depth_{d}"),
            Family::Star(n) => write!(f, "star_{n}"),
            Family::Polyline(n, alpha) => write!(f, "polyline_{n}_{alpha}"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let count = |t: &str| t.parse::<usize>().map_err(|_| invalid(s, "expected a nonnegative integer"));
        let spec = s.trim();
        let family = if let Some(rest) = spec.strip_prefix("binary_tree_depth_").or(spec.strip_prefix("binary_tree_")) {
            Family::BinaryTree(rest.parse().map_err(|_| invalid(s, "expected an integer depth"))?)
        } else if let Some(rest) = spec.strip_prefix("path_") {
            Family::Path(count(rest)?)
        } else if let Some(rest) = spec.strip_prefix("cycle_") {
            Family::Cycle(count(rest)?)
        } else if let Some(rest) = spec.strip_prefix("star_") {
            Family::Star(count(rest)?)
        } else if let Some(rest) = spec.strip_prefix("grid_") {
            let (a, b) = rest.split_once(['x', '×']).ok_or_else(|| invalid(s, "expected grid_AxB"))?;
            Family::Grid(count(a)?, count(b)?)
        } else if let Some(rest) = spec.strip_prefix("polyline_") {
            let (n, alpha) = rest.split_once('_').ok_or_else(|| invalid(s, "expected polyline_N_ALPHA"))?;
            let alpha = alpha.parse::<f64>().map_err(|_| invalid(s, "expected a numeric exponent"))?;
            Family::Polyline(count(n)?, alpha)
        } else {
            return Err(invalid(s, "unknown family"));
        };
        family.validate()?;
        Ok(family)
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        f.to_string()
    }
}
