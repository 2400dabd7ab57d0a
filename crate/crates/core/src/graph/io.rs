//! Text persistence in the `graph v1` format (grammar in the README).

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::{validate_id, GraphBuilder, MeasureKind, MeasureMode, WeightedGraph};
use crate::error::{Error, Result};

/// Serializes with shortest round-trip decimal representations.
pub fn write_graph(g: &WeightedGraph) -> String {
    let mut out = String::from("graph v1\n");
    let _ = writeln!(out, "measure {}", g.measure_kind());
    for (id, m) in g.ids().iter().zip(g.measures()) {
        let _ = writeln!(out, "vertex {id} {m:?}");
    }
    for (x, y, w) in g.edges() {
        let _ = writeln!(out, "edge {} {} {w:?}", g.id(x), g.id(y));
    }
    out
}

pub fn save_graph(g: &WeightedGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, write_graph(g))?;
    Ok(())
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<WeightedGraph> {
    parse_graph(&std::fs::read_to_string(path)?)
}

fn number(token: &str, line: usize, field: usize) -> Result<f64> {
    token.parse::<f64>().map_err(|_| Error::parse(line, field, format!("`{token}` is not a number")))
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut header_seen = false;
    let mut kind = MeasureKind::Custom;
    let mut measures: BTreeMap<String, f64> = BTreeMap::new();
    let mut builder = GraphBuilder::new();
    let mut directed: HashMap<(String, String), f64> = HashMap::new();
    let mut edges_started = false;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if !header_seen {
            if tokens != ["graph", "v1"] {
                return Err(Error::parse(line, 1, "expected header `graph v1`"));
            }
            header_seen = true;
            continue;
        }
        let arity = |n: usize| {
            if tokens.len() == n {
                Ok(())
            } else {
                Err(Error::parse(line, tokens.len().min(n) + 1, format!("`{}` takes {} fields", tokens[0], n - 1)))
            }
        };
        match tokens[0] {
            "measure" => {
                arity(2)?;
                if !measures.is_empty() || edges_started {
                    return Err(Error::parse(line, 1, "`measure` must precede vertex and edge lines"));
                }
                kind = tokens[1].parse().map_err(|_| Error::parse(line, 2, "expected normalizing, counting or custom"))?;
            }
            "vertex" => {
                arity(3)?;
                if edges_started {
                    return Err(Error::parse(line, 1, "vertex lines must precede edge lines"));
                }
                let id = tokens[1];
                validate_id(id).map_err(|e| Error::parse(line, 2, e.to_string()))?;
                if measures.contains_key(id) {
                    return Err(Error::parse(line, 2, format!("vertex `{id}` declared twice")));
                }
                let m = number(tokens[2], line, 3)?;
                if !(m > 0.0 && m.is_finite()) {
                    return Err(Error::NonPositiveMeasure { vertex: id.to_string(), measure: m });
                }
                builder.vertex(id)?;
                measures.insert(id.to_string(), m);
            }
            "edge" => {
                arity(4)?;
                edges_started = true;
                let (u, v) = (tokens[1], tokens[2]);
                for (field, id) in [(2, u), (3, v)] {
                    if !measures.contains_key(id) {
                        return Err(Error::parse(line, field, format!("undeclared vertex `{id}`")));
                    }
                }
                let w = number(tokens[3], line, 4)?;
                if let Some(&back) = directed.get(&(v.to_string(), u.to_string())) {
                    if back.to_bits() != w.to_bits() {
                        return Err(Error::Asymmetric { u: u.into(), v: v.into(), forward: w, backward: back });
                    }
                }
                directed.insert((u.to_string(), v.to_string()), w);
                builder.edge(u, v, w)?;
            }
            other => return Err(Error::parse(line, 1, format!("unknown directive `{other}`"))),
        }
    }
    if !header_seen {
        return Err(Error::parse(1, 1, "missing header `graph v1`"));
    }

    let mut g = builder.build(MeasureMode::Custom(measures))?;
    match kind {
        MeasureKind::Normalizing => {
            if let Some(x) = (0..g.len()).find(|&x| g.measure[x].to_bits() != g.degree[x].to_bits()) {
                return Err(Error::InvalidParameter(format!(
                    "normalizing measure at `{}` is {} but the degree is {}",
                    g.id(x),
                    g.measure[x],
                    g.degree[x]
                )));
            }
        }
        MeasureKind::Counting => {
            if let Some(x) = (0..g.len()).find(|&x| g.measure[x] != 1.0) {
                return Err(Error::InvalidParameter(format!("counting measure at `{}` is {}", g.id(x), g.measure[x])));
            }
        }
        MeasureKind::Custom => {}
    }
    g.kind = kind;
    Ok(g)
}
