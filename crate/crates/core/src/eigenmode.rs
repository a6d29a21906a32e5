//! Eigenfunctions reconstructed from the null space of the direct system.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::graph::{End, LoopDescriptor, MetricGraph, VertexCondition};
use crate::spectral::{Basis, DirectSystem, EigenvalueRecord, NULL_TOLERANCE};

/// Vertex values at or below this count as zero.
pub const VANISH_TOLERANCE: f64 = 1e-7;
/// Coefficients at or below this count as zero when testing loop support.
pub const LOOP_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub enum SupportClassification {
    NonvanishingOnVertices,
    VanishesAtVertices(Vec<String>),
    LoopSupported(LoopDescriptor),
    /// Supported on a union of several pure loops sharing the eigenvalue.
    SupportedOnLoops(Vec<LoopDescriptor>),
}

/// An eigenfunction with unit L2 norm: on edge `e`,
/// `f(x) = c[e][0] phi1(x) + c[e][1] phi2(x)` in `basis`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenFunction {
    pub lambda: f64,
    pub basis: Basis,
    pub coefficients: Vec<[f64; 2]>,
    edge_ids: Vec<String>,
    lengths: Vec<f64>,
    vertex_values: Vec<(String, f64)>,
    pub support: SupportClassification,
}

impl EigenFunction {
    pub fn edge_ids(&self) -> &[String] {
        &self.edge_ids
    }

    fn edge_position(&self, id: &str) -> Result<usize> {
        self.edge_ids
            .iter()
            .position(|e| e == id)
            .ok_or_else(|| Error::UnknownEdge(id.to_string()))
    }

    /// Value at `x` on edge `edge`, measured from the edge's start vertex.
    pub fn evaluate(&self, edge: &str, x: f64) -> Result<f64> {
        let e = self.edge_position(edge)?;
        self.evaluate_index(e, x)
    }

    pub fn evaluate_index(&self, e: usize, x: f64) -> Result<f64> {
        let length = self.lengths[e];
        let slack = 1e-12 * length.max(1.0);
        if !(x >= -slack && x <= length + slack) {
            return Err(Error::CoordinateOutOfRange { x, length });
        }
        let x = x.clamp(0.0, length);
        let [p1, p2] = self.basis.values(x, length);
        Ok(self.coefficients[e][0] * p1 + self.coefficients[e][1] * p2)
    }

    pub fn derivative_index(&self, e: usize, x: f64) -> f64 {
        let [d1, d2] = self.basis.derivatives(x, self.lengths[e]);
        self.coefficients[e][0] * d1 + self.coefficients[e][1] * d2
    }

    /// `f(v)` for every vertex, keyed by vertex id.
    pub fn vertex_values(&self) -> BTreeMap<String, f64> {
        self.vertex_values.iter().cloned().collect()
    }

    pub fn vertex_value(&self, id: &str) -> Option<f64> {
        self.vertex_values.iter().find(|(v, _)| v == id).map(|&(_, x)| x)
    }

    /// True when both coefficients on the edge are at most `tol`.
    pub fn vanishes_on_edge(&self, e: usize, tol: f64) -> bool {
        self.coefficients[e].iter().all(|c| c.abs() <= tol)
    }

    /// Writes `edge\tx\tf` rows, `samples` points per edge including ends.
    pub fn write_samples<W: Write>(&self, out: &mut W, samples: usize) -> Result<()> {
        let samples = samples.max(2);
        writeln!(out, "edge\tx\tf")?;
        for (e, id) in self.edge_ids.iter().enumerate() {
            for i in 0..samples {
                let x = self.lengths[e] * i as f64 / (samples - 1) as f64;
                writeln!(out, "{id}\t{x:.12e}\t{:.12e}", self.evaluate_index(e, x)?)?;
            }
        }
        Ok(())
    }
}

/// Value of `f` at vertex `v`, read off its first incident edge-end.
fn value_at_vertex(g: &MetricGraph, basis: &Basis, coeffs: &[[f64; 2]], v: usize) -> f64 {
    let ee = g.incident(v)[0];
    let length = g.edges()[ee.edge].length;
    let x = match ee.end {
        End::Start => 0.0,
        End::End => length,
    };
    let [p1, p2] = basis.values(x, length);
    coeffs[ee.edge][0] * p1 + coeffs[ee.edge][1] * p2
}

/// Exact `[[int phi1^2, int phi1 phi2], [., int phi2^2]]` over `[0, length]`.
pub fn edge_gram(basis: &Basis, length: f64) -> [[f64; 2]; 2] {
    let l = length;
    match *basis {
        Basis::Polynomial => [[l, l * l / 2.0], [l * l / 2.0, l * l * l / 3.0]],
        Basis::Oscillatory { k } => {
            let mu = k.max(1.0);
            let u = 2.0 * k * l;
            let cc = l / 2.0 + u.sin() / (4.0 * k);
            // int (sin kx / k)^2 = (u - sin u) / (4 k^3)
            let ss = if u < 0.1 {
                let u2 = u * u;
                let series = u2 * u / 6.0 * (1.0 - u2 / 20.0 * (1.0 - u2 / 42.0 * (1.0 - u2 / 72.0)));
                series / (4.0 * k * k * k)
            } else {
                (u - u.sin()) / (4.0 * k * k * k)
            };
            let cs = (k * l).sin().powi(2) / (2.0 * k * k);
            [[cc, mu * cs], [mu * cs, mu * mu * ss]]
        }
        Basis::Hyperbolic { kappa } => {
            let m = l / 2.0;
            let b = kappa * m;
            let c11 = m / b.cosh().powi(2) + b.tanh() / kappa;
            // (coth b - b / sinh^2 b) / kappa
            let c22 = if b < 0.05 {
                let b2 = b * b;
                m * (2.0 / 3.0 - 4.0 * b2 / 45.0 + 4.0 * b2 * b2 / 315.0)
            } else {
                (1.0 / b.tanh() - b / b.sinh().powi(2)) / kappa
            };
            [[c11, 0.0], [0.0, c22]]
        }
    }
}

/// L2 inner product of two coefficient vectors (length `2E`).
fn inner(g: &MetricGraph, basis: &Basis, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    g.edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| {
            let m = edge_gram(basis, edge.length);
            let (a0, a1, b0, b1) = (a[2 * e], a[2 * e + 1], b[2 * e], b[2 * e + 1]);
            a0 * (m[0][0] * b0 + m[0][1] * b1) + a1 * (m[1][0] * b0 + m[1][1] * b1)
        })
        .sum()
}

/// Null vectors of `H` for the `count` smallest singular values.
fn null_vectors(sys: &DirectSystem, count: usize) -> (Vec<DVector<f64>>, Vec<f64>) {
    let svd = sys.matrix.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = order[..count.min(order.len())]
        .iter()
        .map(|&i| v_t.row(i).transpose())
        .collect();
    (vecs, sv)
}

/// An L2-orthonormal basis of the eigenspace of `record`. In degenerate
/// eigenspaces the basis is rotated so that states supported on a single pure
/// loop appear as basis members.
pub fn eigenfunctions_at(g: &MetricGraph, record: &EigenvalueRecord) -> Result<Vec<EigenFunction>> {
    let basis = record.basis();
    let sys = DirectSystem::assemble(g, basis);
    let (vectors, sv) = null_vectors(&sys, record.multiplicity);
    let threshold = NULL_TOLERANCE * sys.norm();
    let found = sv.iter().take_while(|&&s| s <= threshold).count();
    if found != record.multiplicity && !record.degeneracy_suspected {
        return Err(Error::NullSpaceDimensionMismatch {
            lambda: record.lambda,
            expected: record.multiplicity,
            found,
        });
    }

    let vectors = orthonormalize(g, &basis, vectors);
    let vectors = rotate_to_loop_states(g, vectors);
    let lambda = record.lambda;
    Ok(vectors
        .into_iter()
        .map(|c| build(g, lambda, basis, c))
        .collect())
}

/// Orthonormal coefficient vectors from the Cholesky factor of the exact Gram
/// matrix.
fn orthonormalize(g: &MetricGraph, basis: &Basis, vectors: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let d = vectors.len();
    let gram = DMatrix::from_fn(d, d, |i, j| inner(g, basis, &vectors[i], &vectors[j]));
    let l = gram.cholesky().expect("Gram matrix of independent vectors").l();
    let l_inv = l.try_inverse().expect("Cholesky factor is invertible");
    (0..d)
        .map(|i| {
            let mut v = DVector::zeros(vectors[0].len());
            for j in 0..=i {
                v += &vectors[j] * l_inv[(i, j)];
            }
            v
        })
        .collect()
}

/// Within an orthonormal eigenspace basis, extracts for each pure loop the
/// directions with no coefficients off the loop and puts them first.
fn rotate_to_loop_states(g: &MetricGraph, vectors: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let d = vectors.len();
    if d < 2 {
        return vectors;
    }
    let mut picked: Vec<DVector<f64>> = Vec::new();
    for lp in g.find_loops().iter().filter(|l| l.pure) {
        let on_loop: Vec<usize> = lp
            .edge_chain
            .iter()
            .map(|id| g.edge_index(id).expect("loop edges exist"))
            .collect();
        let off: Vec<usize> = (0..g.edge_count()).filter(|e| !on_loop.contains(e)).collect();
        if off.is_empty() {
            continue;
        }
        // Zero rows pad a wide matrix so that the SVD lists every direction.
        let rows = (2 * off.len()).max(d);
        let a = DMatrix::from_fn(rows, d, |r, c| {
            if r < 2 * off.len() {
                vectors[c][2 * off[r / 2] + r % 2]
            } else {
                0.0
            }
        });
        let svd = a.svd(false, true);
        let v_t = svd.v_t.expect("requested V^T");
        let null: Vec<DVector<f64>> = svd
            .singular_values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s <= LOOP_TOLERANCE)
            .map(|(i, _)| v_t.row(i).transpose())
            .collect();
        picked.extend(null);
    }
    if picked.is_empty() {
        return vectors;
    }
    let mut frame: Vec<DVector<f64>> = Vec::new();
    for y in picked.into_iter().chain((0..d).map(|i| DVector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 }))) {
        let mut y = y;
        for f in &frame {
            let p = f.dot(&y);
            y -= f * p;
        }
        let n = y.norm();
        if n > 1e-6 && frame.len() < d {
            frame.push(y / n);
        }
    }
    frame
        .iter()
        .map(|y| {
            let mut v = DVector::zeros(vectors[0].len());
            for (c, w) in y.iter().enumerate() {
                v += &vectors[c] * *w;
            }
            v
        })
        .collect()
}

fn build(g: &MetricGraph, lambda: f64, basis: Basis, c: DVector<f64>) -> EigenFunction {
    let mut coefficients: Vec<[f64; 2]> = (0..g.edge_count()).map(|e| [c[2 * e], c[2 * e + 1]]).collect();

    // Sign convention: first coefficient above the vanishing tolerance on the
    // lexicographically first edge id is positive.
    let mut order: Vec<usize> = (0..g.edge_count()).collect();
    order.sort_by(|&a, &b| g.edges()[a].id.cmp(&g.edges()[b].id));
    let lead = order
        .iter()
        .flat_map(|&e| coefficients[e])
        .find(|x| x.abs() > VANISH_TOLERANCE)
        .unwrap_or(1.0);
    if lead < 0.0 {
        for c in &mut coefficients {
            c[0] = -c[0];
            c[1] = -c[1];
        }
    }

    let vertex_values = (0..g.vertex_count())
        .map(|v| (g.vertices()[v].id.clone(), value_at_vertex(g, &basis, &coefficients, v)))
        .collect();
    let mut f = EigenFunction {
        lambda,
        basis,
        coefficients,
        edge_ids: g.edges().iter().map(|e| e.id.clone()).collect(),
        lengths: g.lengths(),
        vertex_values,
        support: SupportClassification::NonvanishingOnVertices,
    };
    f.support = classify_support(g, &f);
    f
}

/// Nonvanishing when `|f(v)|` exceeds the vanishing tolerance at every vertex
/// other than Dirichlet leaves; loop-supported when every coefficient off
/// exactly one pure loop vanishes; otherwise the list of vertices where `f`
/// vanishes.
pub fn classify_support(g: &MetricGraph, f: &EigenFunction) -> SupportClassification {
    let vanishing: Vec<String> = g
        .vertices()
        .iter()
        .zip(&f.vertex_values)
        .filter(|(v, (_, x))| v.condition != VertexCondition::Dirichlet && x.abs() <= VANISH_TOLERANCE)
        .map(|(v, _)| v.id.clone())
        .collect();
    if vanishing.is_empty() {
        return SupportClassification::NonvanishingOnVertices;
    }
    let mut supporting: Vec<LoopDescriptor> = Vec::new();
    for lp in g.find_loops().into_iter().filter(|l| l.pure) {
        let on_loop: Vec<usize> = lp
            .edge_chain
            .iter()
            .map(|id| g.edge_index(id).expect("loop edges exist"))
            .collect();
        let off_clean = (0..g.edge_count())
            .filter(|e| !on_loop.contains(e))
            .all(|e| f.vanishes_on_edge(e, LOOP_TOLERANCE));
        let attached = f
            .vertex_value(&lp.attachment_vertex)
            .is_some_and(|x| x.abs() <= LOOP_TOLERANCE);
        let alive = on_loop.iter().any(|&e| !f.vanishes_on_edge(e, LOOP_TOLERANCE));
        if off_clean && attached && alive && on_loop.len() < g.edge_count() {
            supporting.push(lp);
        }
    }
    match supporting.len() {
        0 => SupportClassification::VanishesAtVertices(vanishing),
        1 => SupportClassification::LoopSupported(supporting.pop().expect("one loop")),
        _ => SupportClassification::SupportedOnLoops(supporting),
    }
}

/// Largest continuity mismatch and largest flux residual
/// `|sum f'(v) - alpha f(v)| / (1 + k)` over all vertices.
pub fn vertex_residuals(g: &MetricGraph, f: &EigenFunction) -> (f64, f64) {
    let mut continuity: f64 = 0.0;
    let mut flux: f64 = 0.0;
    let k = f.lambda.abs().sqrt();
    for (v, vertex) in g.vertices().iter().enumerate() {
        let ends = g.incident(v);
        let values: Vec<f64> = ends
            .iter()
            .map(|ee| {
                let l = g.edges()[ee.edge].length;
                let x = if ee.end == End::Start { 0.0 } else { l };
                f.evaluate_index(ee.edge, x).expect("vertex coordinate")
            })
            .collect();
        for w in &values[1..] {
            continuity = continuity.max((w - values[0]).abs());
        }
        match vertex.condition {
            VertexCondition::Dirichlet => continuity = continuity.max(values[0].abs()),
            VertexCondition::Delta(alpha) => {
                let sum: f64 = ends
                    .iter()
                    .map(|ee| {
                        let l = g.edges()[ee.edge].length;
                        match ee.end {
                            End::Start => f.derivative_index(ee.edge, 0.0),
                            End::End => -f.derivative_index(ee.edge, l),
                        }
                    })
                    .sum();
                flux = flux.max((sum - alpha * values[0]).abs() / (1.0 + k));
            }
        }
    }
    (continuity, flux)
}

/// L2 inner product of two eigenfunctions of the same eigenvalue on `g`.
pub fn inner_product(g: &MetricGraph, a: &EigenFunction, b: &EigenFunction) -> f64 {
    let flat = |f: &EigenFunction| DVector::from_iterator(2 * f.coefficients.len(), f.coefficients.iter().flatten().copied());
    inner(g, &a.basis, &flat(a), &flat(b))
}
