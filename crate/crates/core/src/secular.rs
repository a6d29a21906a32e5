//! Bond scattering formulation: the secular function
//! `F(k) = C det(e^{-ikL/2} - e^{ikL/2} S)` and its torus form `Phi(kappa)`.
//!
//! Bonds are directed edges: edge `e` owns bond `2e` (from `u` to `v`) and
//! bond `2e + 1` (from `v` to `u`). `S[b', b]` is the amplitude scattered
//! from bond `b` into bond `b'`, non-zero only when `b` ends where `b'` starts.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexCondition};
use crate::linalg::det_complex_in_place;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Edge to bond bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BondIndex {
    edges: usize,
}

impl BondIndex {
    pub fn new(edges: usize) -> Self {
        BondIndex { edges }
    }

    pub fn dimension(&self) -> usize {
        2 * self.edges
    }

    pub fn forward(&self, edge: usize) -> usize {
        2 * edge
    }

    pub fn reverse(&self, bond: usize) -> usize {
        bond ^ 1
    }

    pub fn edge_of(&self, bond: usize) -> usize {
        bond / 2
    }

    /// Bond leaving the vertex through this edge-end.
    pub fn outgoing(&self, edge: usize, end: End) -> usize {
        match end {
            End::Start => 2 * edge,
            End::End => 2 * edge + 1,
        }
    }

    /// Bond arriving at the vertex through this edge-end.
    pub fn incoming(&self, edge: usize, end: End) -> usize {
        self.reverse(self.outgoing(edge, end))
    }
}

/// Local scattering matrix of a vertex: `(2 / (d + i alpha / k)) J - I` for a
/// delta condition, `(-1)` for a Dirichlet leaf.
pub fn vertex_scattering(condition: VertexCondition, degree: usize, k: f64) -> Result<DMatrix<Complex64>> {
    if !(k > 0.0) {
        return Err(Error::NonpositiveK(k));
    }
    if degree == 0 {
        return Err(Error::InvalidArgument("vertex degree must be positive".into()));
    }
    Ok(match condition {
        VertexCondition::Dirichlet => DMatrix::from_element(degree, degree, ZERO) - DMatrix::identity(degree, degree),
        VertexCondition::Delta(alpha) => {
            let t = Complex64::new(2.0, 0.0) / Complex64::new(degree as f64, alpha / k);
            DMatrix::from_element(degree, degree, t) - DMatrix::identity(degree, degree)
        }
    })
}

/// Bond scattering matrix and bond lengths of a graph at wavenumber `k`.
#[derive(Debug, Clone)]
pub struct SecularSystem {
    pub bonds: BondIndex,
    pub s: DMatrix<Complex64>,
    /// Diagonal of `L`: each edge length appears for both of its bonds.
    pub lengths: Vec<f64>,
    pub k: f64,
}

pub fn assemble_secular_system(g: &MetricGraph, k: f64) -> Result<SecularSystem> {
    let bonds = BondIndex::new(g.edge_count());
    let n = bonds.dimension();
    let mut s = DMatrix::from_element(n, n, ZERO);
    for (v, vertex) in g.vertices().iter().enumerate() {
        let ends = g.incident(v);
        let sigma = vertex_scattering(vertex.condition, ends.len(), k)?;
        for (j, out) in ends.iter().enumerate() {
            for (i, inc) in ends.iter().enumerate() {
                let row = bonds.outgoing(out.edge, out.end);
                let col = bonds.incoming(inc.edge, inc.end);
                s[(row, col)] += sigma[(j, i)];
            }
        }
    }
    let lengths = (0..n).map(|b| g.edges()[bonds.edge_of(b)].length).collect();
    Ok(SecularSystem { bonds, s, lengths, k })
}

impl SecularSystem {
    /// `e^{-ikL/2} - e^{ikL/2} S`.
    pub fn secular_matrix(&self) -> DMatrix<Complex64> {
        let n = self.bonds.dimension();
        let mut m = DMatrix::from_element(n, n, ZERO);
        for r in 0..n {
            let half = Complex64::from_polar(1.0, self.k * self.lengths[r] / 2.0);
            for c in 0..n {
                m[(r, c)] = -half * self.s[(r, c)];
            }
            m[(r, r)] += half.conj();
        }
        m
    }

    /// Largest deviation of `S S*` from the identity.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.bonds.dimension();
        let p = &self.s * self.s.adjoint() - DMatrix::<Complex64>::identity(n, n);
        p.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Value of the secular function: real when all conditions are NK/Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SecularValue {
    Real(f64),
    Complex(Complex64),
}

impl SecularValue {
    pub fn to_complex(self) -> Complex64 {
        match self {
            SecularValue::Real(x) => Complex64::new(x, 0.0),
            SecularValue::Complex(z) => z,
        }
    }

    pub fn abs(self) -> f64 {
        self.to_complex().norm()
    }

    pub fn as_real(self) -> Option<f64> {
        match self {
            SecularValue::Real(x) => Some(x),
            SecularValue::Complex(_) => None,
        }
    }
}

/// Evaluates `Phi` for an NK/Dirichlet graph at torus points, with the
/// normalization `C = i^p` that makes it real.
#[derive(Debug, Clone)]
pub struct TorusFunction {
    edges: usize,
    /// Row-major real bond scattering matrix.
    s: Vec<f64>,
    phase: Complex64,
    power: u8,
}

impl TorusFunction {
    pub fn new(g: &MetricGraph) -> Result<Self> {
        if !g.is_nk_dirichlet() {
            return Err(Error::RobinNotSupportedOnTorus);
        }
        // S is k-independent here; any k > 0 assembles it.
        let sys = assemble_secular_system(g, 1.0)?;
        let n = sys.bonds.dimension();
        let mut s = Vec::with_capacity(n * n);
        for r in 0..n {
            for c in 0..n {
                s.push(sys.s[(r, c)].re);
            }
        }
        let mut f = TorusFunction {
            edges: g.edge_count(),
            s,
            phase: ONE,
            power: 0,
        };
        f.calibrate(g);
        Ok(f)
    }

    pub fn dimension(&self) -> usize {
        self.edges
    }

    /// The integer `p` of the normalization constant `C = i^p`.
    pub fn phase_power(&self) -> u8 {
        self.power
    }

    /// Picks `p` in {0, 1} minimizing the imaginary part over a scan of the
    /// ray `kappa = k * lengths`.
    fn calibrate(&mut self, g: &MetricGraph) {
        let lengths = g.lengths();
        let samples: Vec<Complex64> = (1..=24)
            .map(|j| {
                let k = 0.173 + 1.2437 * j as f64;
                let kappa: Vec<f64> = lengths.iter().map(|l| k * l).collect();
                self.raw(&kappa)
            })
            .collect();
        let worst = |p: u8| {
            let c = Complex64::i().powu(p as u32);
            samples
                .iter()
                .map(|z| (c * z).im.abs() / (1.0 + z.norm()))
                .fold(0.0, f64::max)
        };
        let power = if worst(1) < worst(0) { 1 } else { 0 };
        self.power = power;
        self.phase = Complex64::i().powu(power as u32);
    }

    /// `e^{i sum kappa} det(diag(e^{-i kappa}) - S)` without normalization.
    pub fn raw(&self, kappa: &[f64]) -> Complex64 {
        let n = 2 * self.edges;
        let mut a: Vec<Complex64> = self.s.iter().map(|&x| Complex64::new(-x, 0.0)).collect();
        let mut total = 0.0;
        for e in 0..self.edges {
            total += kappa[e];
            let d = Complex64::from_polar(1.0, -kappa[e]);
            a[(2 * e) * n + 2 * e] += d;
            a[(2 * e + 1) * n + 2 * e + 1] += d;
        }
        Complex64::from_polar(1.0, total) * det_complex_in_place(n, &mut a)
    }

    /// Normalized complex value; the imaginary part is round-off.
    pub fn complex_value(&self, kappa: &[f64]) -> Complex64 {
        self.phase * self.raw(kappa)
    }

    pub fn value(&self, kappa: &[f64]) -> f64 {
        self.complex_value(kappa).re
    }

    /// Central finite-difference gradient.
    pub fn gradient(&self, kappa: &[f64], step: f64) -> Vec<f64> {
        let mut p = kappa.to_vec();
        (0..self.edges)
            .map(|e| {
                p[e] = kappa[e] + step;
                let plus = self.value(&p);
                p[e] = kappa[e] - step;
                let minus = self.value(&p);
                p[e] = kappa[e];
                (plus - minus) / (2.0 * step)
            })
            .collect()
    }
}

/// `F(k)`: real for NK/Dirichlet graphs (normalized by `C = i^p`), complex
/// when a Robin vertex makes `S` depend on `k`.
pub fn secular_value(g: &MetricGraph, k: f64) -> Result<SecularValue> {
    if !(k > 0.0) {
        return Err(Error::NonpositiveK(k));
    }
    if g.is_nk_dirichlet() {
        let f = TorusFunction::new(g)?;
        let kappa: Vec<f64> = g.lengths().iter().map(|l| k * l).collect();
        return Ok(SecularValue::Real(f.value(&kappa)));
    }
    let sys = assemble_secular_system(g, k)?;
    let m = sys.secular_matrix();
    let n = m.nrows();
    let mut a: Vec<Complex64> = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            a.push(m[(r, c)]);
        }
    }
    Ok(SecularValue::Complex(det_complex_in_place(n, &mut a)))
}

/// `Phi(kappa)` for an NK/Dirichlet graph.
pub fn torus_value(g: &MetricGraph, kappa: &[f64]) -> Result<f64> {
    if kappa.len() != g.edge_count() {
        return Err(Error::DimensionMismatch {
            expected: g.edge_count(),
            got: kappa.len(),
        });
    }
    Ok(TorusFunction::new(g)?.value(kappa))
}

/// Closed form for the three-star with Dirichlet leaves:
/// `sum_j sin(k_j) sin(k_{j+1}) cos(k_{j+2})`, indices mod 3.
pub fn star3_dirichlet_closed_form(kappa: [f64; 3]) -> f64 {
    (0..3)
        .map(|j| kappa[j].sin() * kappa[(j + 1) % 3].sin() * kappa[(j + 2) % 3].cos())
        .sum()
}

/// Closed form for the three-star with Neumann leaves:
/// `sum_j cos(k_j) cos(k_{j+1}) sin(k_{j+2})`.
pub fn star3_neumann_closed_form(kappa: [f64; 3]) -> f64 {
    (0..3)
        .map(|j| kappa[j].cos() * kappa[(j + 1) % 3].cos() * kappa[(j + 2) % 3].sin())
        .sum()
}

/// Three-edge mandarin: product of the two star forms at `kappa / 2`.
pub fn mandarin3_closed_form(kappa: [f64; 3]) -> f64 {
    let half = kappa.map(|x| x / 2.0);
    star3_dirichlet_closed_form(half) * star3_neumann_closed_form(half)
}

/// Least-squares constant `c` with `values ~ c * reference`, and the
/// relative max-norm residual `max|v - c r| / max|v|`.
pub fn fit_proportionality(values: &[f64], reference: &[f64]) -> (f64, f64) {
    let num: f64 = values.iter().zip(reference).map(|(v, r)| v * r).sum();
    let den: f64 = reference.iter().map(|r| r * r).sum();
    let c = num / den;
    let scale = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let resid = values
        .iter()
        .zip(reference)
        .map(|(v, r)| (v - c * r).abs())
        .fold(0.0, f64::max);
    (c, resid / scale)
}
