//! Small reference graphs used by the tests, the benchmarks and the CLI
//! `--example` flag.

use std::f64::consts::{PI, SQRT_2, TAU};

use crate::graph::{GraphSpec, MetricGraph, VertexCondition};

const D: VertexCondition = VertexCondition::Dirichlet;
const NK: VertexCondition = VertexCondition::NK;

/// Generic lengths for the three-edge graphs.
pub const STAR_LENGTHS: [f64; 3] = [1.0, 1.3, 1.7];

fn build(spec: GraphSpec) -> MetricGraph {
    spec.build().expect("corpus graphs are valid")
}

pub fn dirichlet_interval(length: f64) -> MetricGraph {
    build(GraphSpec::new().vertex("a", D).vertex("b", D).edge("e", "a", "b", length))
}

pub fn circle(length: f64) -> MetricGraph {
    build(GraphSpec::new().vertex("o", NK).edge("e", "o", "o", length))
}

pub fn figure_eight(l1: f64, l2: f64) -> MetricGraph {
    build(GraphSpec::new().vertex("o", NK).edge("e1", "o", "o", l1).edge("e2", "o", "o", l2))
}

pub fn star3(leaf: VertexCondition, lengths: [f64; 3]) -> MetricGraph {
    build(
        GraphSpec::new()
            .vertex("c", NK)
            .vertex("l1", leaf)
            .vertex("l2", leaf)
            .vertex("l3", leaf)
            .edge("e1", "c", "l1", lengths[0])
            .edge("e2", "c", "l2", lengths[1])
            .edge("e3", "c", "l3", lengths[2]),
    )
}

pub fn star3_dirichlet(lengths: [f64; 3]) -> MetricGraph {
    star3(D, lengths)
}

pub fn star3_neumann(lengths: [f64; 3]) -> MetricGraph {
    star3(NK, lengths)
}

/// Two vertices joined by three parallel edges.
pub fn mandarin3(lengths: [f64; 3]) -> MetricGraph {
    build(
        GraphSpec::new()
            .vertex("u", NK)
            .vertex("v", NK)
            .edge("e1", "u", "v", lengths[0])
            .edge("e2", "u", "v", lengths[1])
            .edge("e3", "u", "v", lengths[2]),
    )
}

/// A loop at `a` with a pendant edge to a Neumann leaf `p`.
pub fn lollipop(loop_length: f64, pendant: f64) -> MetricGraph {
    build(
        GraphSpec::new()
            .vertex("a", NK)
            .vertex("p", NK)
            .edge("loop", "a", "a", loop_length)
            .edge("tail", "a", "p", pendant),
    )
}

/// Triangle `a b c` with a tail from `c` to `d`.
pub fn cycle_with_tail() -> MetricGraph {
    build(
        GraphSpec::new()
            .vertex("a", NK)
            .vertex("b", NK)
            .vertex("c", NK)
            .vertex("d", NK)
            .edge("ab", "a", "b", 1.0)
            .edge("bc", "b", "c", 1.2)
            .edge("ca", "c", "a", 1.5)
            .edge("cd", "c", "d", 0.8),
    )
}

/// Two edges of length `length` between a delta vertex `r` and a
/// Neumann-Kirchhoff vertex `n`; the cycle is a loop that is not pure.
pub fn impure_loop(length: f64, alpha: f64) -> MetricGraph {
    build(
        GraphSpec::new()
            .vertex("r", VertexCondition::Delta(alpha))
            .vertex("n", NK)
            .edge("e1", "r", "n", length)
            .edge("e2", "n", "r", length),
    )
}

pub fn equilateral_star3() -> MetricGraph {
    star3_dirichlet([1.0; 3])
}

/// The eight reference graphs, by name.
pub fn corpus() -> Vec<(&'static str, MetricGraph)> {
    vec![
        ("dirichlet_interval", dirichlet_interval(PI)),
        ("circle", circle(TAU)),
        ("figure_eight", figure_eight(TAU, TAU * SQRT_2)),
        ("star3_dirichlet", star3_dirichlet(STAR_LENGTHS)),
        ("star3_neumann", star3_neumann(STAR_LENGTHS)),
        ("mandarin3", mandarin3(STAR_LENGTHS)),
        ("lollipop", lollipop(TAU, 1.3)),
        ("cycle_with_tail", cycle_with_tail()),
    ]
}

/// Corpus graph or one of the auxiliary graphs by name.
pub fn by_name(name: &str) -> Option<MetricGraph> {
    match name {
        "impure_loop" => Some(impure_loop(PI, 1.0)),
        "equilateral_star3" => Some(equilateral_star3()),
        _ => corpus().into_iter().find(|(n, _)| *n == name).map(|(_, g)| g),
    }
}

pub fn names() -> Vec<&'static str> {
    let mut v: Vec<&'static str> = corpus().iter().map(|(n, _)| *n).collect();
    v.extend(["impure_loop", "equilateral_star3"]);
    v
}
