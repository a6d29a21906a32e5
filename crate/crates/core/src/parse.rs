//! Line-oriented graph description format.
//!
//! ```text
//! # comment
//! vertex <id> nk
//! vertex <id> delta <alpha>
//! vertex <id> dirichlet
//! edge <id> <u> <v> <length>
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{EdgeSpec, GraphSpec, MetricGraph, VertexCondition};

pub fn parse_spec(text: &str) -> Result<GraphSpec> {
    let mut spec = GraphSpec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let err = |message: String| Error::Parse { line, message };
        let number = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| err(format!("expected a number, found `{s}`")))
        };
        match tokens.as_slice() {
            [] => {}
            ["vertex", id, "nk"] => spec.vertices.push((id.to_string(), VertexCondition::NK)),
            ["vertex", id, "dirichlet"] => {
                spec.vertices.push((id.to_string(), VertexCondition::Dirichlet))
            }
            ["vertex", id, "delta", alpha] => spec
                .vertices
                .push((id.to_string(), VertexCondition::Delta(number(alpha)?))),
            ["vertex", ..] => {
                return Err(err(
                    "expected `vertex <id> nk | delta <alpha> | dirichlet`".to_string(),
                ))
            }
            ["edge", id, u, v, length] => spec.edges.push(EdgeSpec {
                id: id.to_string(),
                u: u.to_string(),
                v: v.to_string(),
                length: number(length)?,
            }),
            ["edge", ..] => return Err(err("expected `edge <id> <u> <v> <length>`".to_string())),
            [other, ..] => return Err(err(format!("unknown directive `{other}`"))),
        }
    }
    Ok(spec)
}

/// Parses and validates a connected graph.
pub fn parse_graph(text: &str) -> Result<MetricGraph> {
    parse_spec(text)?.build()
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<MetricGraph> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_graph(&text)
}
