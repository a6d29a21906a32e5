//! Spectral computations for compact quantum graphs with delta-type vertex
//! conditions.

pub mod eigenmode;
pub mod error;
pub mod corpus;
pub mod genericity;
pub mod graph;
pub mod linalg;
pub mod manifold;
pub mod parse;
pub mod secular;
pub mod spectral;
mod union_find;

pub use error::{Error, Result};
pub use graph::{
    build_graph, Edge, EdgeEnd, EdgeEndRef, EdgeSpec, End, GraphSignature, GraphSpec,
    LoopDescriptor, MetricGraph, SplitVertex, Vertex, VertexCondition,
};
pub use parse::{parse_graph, parse_spec, read_graph};
