#![allow(dead_code)]

use proptest::prelude::*;
use qgraph_core::{GraphSpec, MetricGraph, VertexCondition};

pub const NK: VertexCondition = VertexCondition::NK;
pub const D: VertexCondition = VertexCondition::Dirichlet;

/// One of a few small shapes with lengths `l` and coefficient `alpha` at one
/// vertex.
pub fn shape(kind: usize, l: &[f64], alpha: f64) -> MetricGraph {
    let a = VertexCondition::Delta(alpha);
    let spec = match kind % 5 {
        0 => GraphSpec::new()
            .vertex("c", a)
            .vertex("a", NK)
            .vertex("b", D)
            .vertex("d", NK)
            .edge("x", "c", "a", l[0])
            .edge("y", "c", "b", l[1])
            .edge("z", "c", "d", l[2]),
        1 => GraphSpec::new()
            .vertex("u", NK)
            .vertex("v", a)
            .edge("x", "u", "v", l[0])
            .edge("y", "u", "v", l[1])
            .edge("z", "v", "u", l[2]),
        2 => GraphSpec::new()
            .vertex("a", a)
            .vertex("p", NK)
            .edge("loop", "a", "a", l[0])
            .edge("tail", "a", "p", l[1]),
        3 => GraphSpec::new()
            .vertex("a", NK)
            .vertex("b", NK)
            .vertex("c", a)
            .vertex("d", D)
            .edge("ab", "a", "b", l[0])
            .edge("bc", "b", "c", l[1])
            .edge("ca", "c", "a", l[2])
            .edge("cd", "c", "d", l[3]),
        _ => GraphSpec::new()
            .vertex("o", a)
            .edge("x", "o", "o", l[0])
            .edge("y", "o", "o", l[1]),
    };
    spec.build().unwrap()
}

/// Graphs with one delta vertex of random sign.
pub fn robin_graph() -> impl Strategy<Value = MetricGraph> {
    (0usize..5, prop::collection::vec(0.5f64..2.5, 4), -2.0f64..2.0).prop_map(|(k, l, a)| shape(k, &l, a))
}

/// Graphs with NK and Dirichlet conditions only.
pub fn nk_graph() -> impl Strategy<Value = MetricGraph> {
    (0usize..5, prop::collection::vec(0.5f64..2.5, 4)).prop_map(|(k, l)| shape(k, &l, 0.0))
}
