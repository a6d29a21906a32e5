//! Eigenvalues from the direct vertex-condition system.
//!
//! On each edge an eigenfunction is `a * phi1(x) + b * phi2(x)` in a basis
//! that depends on the sign of the eigenvalue:
//!
//! * `lambda = k^2 > 0`: `cos(kx)` and `mu * sin(kx) / k` with `mu = max(k, 1)`,
//!   so the pair tends to `(1, x)` as `k -> 0`;
//! * `lambda = 0`: `1` and `x`;
//! * `lambda = -kappa^2 < 0`: `cosh(kappa (x - m)) / cosh(kappa m)` and
//!   `sinh(kappa (x - m)) / sinh(kappa m)` with `m` the edge midpoint, which
//!   stay bounded by one on the edge.
//!
//! The `2E x 2E` matrix `H` collects continuity rows and one flux row per
//! delta vertex (a value row for a Dirichlet leaf). `lambda` is an eigenvalue
//! exactly when `H` is singular, and the multiplicity is its nullity.

use std::ops::Range;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{End, MetricGraph, VertexCondition};
use crate::linalg::{det_real, singular_values_ascending};
use crate::secular::{assemble_secular_system, TorusFunction};

/// Relative nullity threshold `tau_null`.
pub const NULL_TOLERANCE: f64 = 1e-8;
/// Roots closer than this are reported as a suspected degeneracy.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
/// Candidate roots closer than this are the same root.
const DEDUP_TOLERANCE: f64 = 1e-9;
/// Final bracket width of root refinement.
const BRACKET_WIDTH: f64 = 1e-13;
/// Positive roots below this are the zero eigenvalue seen through the
/// oscillatory basis; zero is handled with the polynomial basis.
const MIN_ROOT: f64 = 1e-6;
const GRID_START: f64 = 1e-7;

/// Per-edge basis pair of the direct system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Basis {
    Oscillatory { k: f64 },
    Polynomial,
    Hyperbolic { kappa: f64 },
}

impl Basis {
    pub fn for_lambda(lambda: f64) -> Basis {
        if lambda > 0.0 {
            Basis::Oscillatory { k: lambda.sqrt() }
        } else if lambda < 0.0 {
            Basis::Hyperbolic { kappa: (-lambda).sqrt() }
        } else {
            Basis::Polynomial
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            Basis::Oscillatory { k } => k * k,
            Basis::Polynomial => 0.0,
            Basis::Hyperbolic { kappa } => -kappa * kappa,
        }
    }

    /// Scale of derivatives; flux rows are divided by it.
    fn flux_scale(&self) -> f64 {
        match *self {
            Basis::Oscillatory { k } => k.max(1.0),
            Basis::Polynomial => 1.0,
            Basis::Hyperbolic { kappa } => kappa.max(1.0),
        }
    }

    /// `(phi1, phi2)` at `x` on an edge of length `length`.
    pub fn values(&self, x: f64, length: f64) -> [f64; 2] {
        match *self {
            Basis::Oscillatory { k } => {
                let mu = k.max(1.0);
                [(k * x).cos(), mu * sinc_scaled(k, x)]
            }
            Basis::Polynomial => [1.0, x],
            Basis::Hyperbolic { kappa } => {
                let m = length / 2.0;
                [cosh_ratio(kappa * (x - m), kappa * m), sinh_ratio(kappa * (x - m), kappa * m)]
            }
        }
    }

    /// `(phi1', phi2')` at `x`.
    pub fn derivatives(&self, x: f64, length: f64) -> [f64; 2] {
        match *self {
            Basis::Oscillatory { k } => {
                let mu = k.max(1.0);
                [-k * (k * x).sin(), mu * (k * x).cos()]
            }
            Basis::Polynomial => [0.0, 1.0],
            Basis::Hyperbolic { kappa } => {
                let m = length / 2.0;
                let a = kappa * (x - m);
                let b = kappa * m;
                // sinh(a)/cosh(b) and cosh(a)/sinh(b)
                let d1 = kappa * sinh_ratio(a, b) * b.tanh();
                let d2 = if b < 1e-8 {
                    1.0 / m
                } else {
                    kappa * cosh_ratio(a, b) / b.tanh()
                };
                [d1, d2]
            }
        }
    }
}

/// `sin(kx) / k`, tending to `x` at `k = 0`.
fn sinc_scaled(k: f64, x: f64) -> f64 {
    if k * x.abs() < 1e-8 {
        x
    } else {
        (k * x).sin() / k
    }
}

/// `cosh(a) / cosh(b)` for `|a| <= b`, without overflow.
fn cosh_ratio(a: f64, b: f64) -> f64 {
    let a = a.abs();
    (a - b).exp() * (1.0 + (-2.0 * a).exp()) / (1.0 + (-2.0 * b).exp())
}

/// `sinh(a) / sinh(b)` for `|a| <= b`, tending to `a / b` as `b -> 0`.
fn sinh_ratio(a: f64, b: f64) -> f64 {
    if b < 1e-8 {
        return if b == 0.0 { 0.0 } else { a / b };
    }
    if b < 20.0 {
        return a.sinh() / b.sinh();
    }
    a.signum() * (a.abs() - b).exp() * (1.0 - (-2.0 * a.abs()).exp()) / (1.0 - (-2.0 * b).exp())
}

/// Value and outward derivative coefficients of an edge-end in `basis`.
fn end_coefficients(basis: &Basis, end: End, length: f64) -> ([f64; 2], [f64; 2]) {
    match end {
        End::Start => (basis.values(0.0, length), basis.derivatives(0.0, length)),
        End::End => {
            let d = basis.derivatives(length, length);
            (basis.values(length, length), [-d[0], -d[1]])
        }
    }
}

/// The direct vertex-condition matrix at one spectral parameter.
#[derive(Debug, Clone)]
pub struct DirectSystem {
    pub basis: Basis,
    pub matrix: DMatrix<f64>,
    /// Per row, the squared Frobenius norm of the entrywise sum of absolute
    /// contributions. Unlike `|H|` this does not collapse when contributions
    /// cancel, as they do for a circle at an eigenvalue.
    row_magnitudes: Vec<f64>,
}

impl DirectSystem {
    pub fn assemble(g: &MetricGraph, basis: Basis) -> DirectSystem {
        let n = 2 * g.edge_count();
        let mut h = DMatrix::zeros(n, n);
        let mut mag = DMatrix::<f64>::zeros(n, n);
        let mut put = |h: &mut DMatrix<f64>, r: usize, c: usize, x: f64| {
            h[(r, c)] += x;
            mag[(r, c)] += x.abs();
        };
        let scale = basis.flux_scale();
        let mut row = 0;
        for (v, vertex) in g.vertices().iter().enumerate() {
            let ends = g.incident(v);
            let coeffs: Vec<([f64; 2], [f64; 2])> = ends
                .iter()
                .map(|ee| end_coefficients(&basis, ee.end, g.edges()[ee.edge].length))
                .collect();
            let first = ends[0].edge;
            match vertex.condition {
                VertexCondition::Dirichlet => {
                    put(&mut h, row, 2 * first, coeffs[0].0[0]);
                    put(&mut h, row, 2 * first + 1, coeffs[0].0[1]);
                    row += 1;
                }
                VertexCondition::Delta(alpha) => {
                    for j in 1..ends.len() {
                        let e = ends[j].edge;
                        put(&mut h, row, 2 * first, coeffs[0].0[0]);
                        put(&mut h, row, 2 * first + 1, coeffs[0].0[1]);
                        put(&mut h, row, 2 * e, -coeffs[j].0[0]);
                        put(&mut h, row, 2 * e + 1, -coeffs[j].0[1]);
                        row += 1;
                    }
                    for (j, ee) in ends.iter().enumerate() {
                        put(&mut h, row, 2 * ee.edge, coeffs[j].1[0] / scale);
                        put(&mut h, row, 2 * ee.edge + 1, coeffs[j].1[1] / scale);
                    }
                    put(&mut h, row, 2 * first, -(alpha * coeffs[0].0[0] / scale));
                    put(&mut h, row, 2 * first + 1, -(alpha * coeffs[0].0[1] / scale));
                    row += 1;
                }
            }
        }
        debug_assert_eq!(row, n);
        let row_magnitudes = (0..n).map(|r| mag.row(r).norm_squared()).collect();
        DirectSystem {
            basis,
            matrix: h,
            row_magnitudes,
        }
    }

    pub fn at_lambda(g: &MetricGraph, lambda: f64) -> DirectSystem {
        DirectSystem::assemble(g, Basis::for_lambda(lambda))
    }

    /// Reference magnitude for relative thresholds.
    pub fn norm(&self) -> f64 {
        self.row_magnitudes.iter().sum::<f64>().sqrt()
    }

    /// Replaces the row of degree-one vertex `leaf` by the angle condition
    /// `cos(theta/2) f'(v) = k sin(theta/2) f(v)`, with `f'` the derivative
    /// pointing into the edge. `theta = 0` is Neumann, `theta = pi` Dirichlet.
    pub fn with_leaf_angle(mut self, g: &MetricGraph, leaf: usize, theta: f64) -> DirectSystem {
        let Basis::Oscillatory { k } = self.basis else {
            panic!("leaf angle conditions need a positive eigenvalue");
        };
        let row: usize = (0..leaf).map(|u| g.degree(u)).sum();
        let ee = g.incident(leaf)[0];
        let (val, der) = end_coefficients(&self.basis, ee.end, g.edges()[ee.edge].length);
        let mu = k.max(1.0);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        self.matrix.row_mut(row).fill(0.0);
        let mut mag = 0.0;
        for i in 0..2 {
            let x = (c * der[i] - k * s * val[i]) / mu;
            self.matrix[(row, 2 * ee.edge + i)] = x;
            mag += ((c * der[i]).abs() + (k * s * val[i]).abs()).powi(2) / (mu * mu);
        }
        self.row_magnitudes[row] = mag;
        self
    }
}

/// Determinant of `H` and its two smallest singular values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectDeterminant {
    pub value: f64,
    /// `[smallest, second smallest]`.
    pub smallest_singular_values: [f64; 2],
    pub norm: f64,
}

pub fn direct_determinant(g: &MetricGraph, lambda: f64) -> DirectDeterminant {
    let sys = DirectSystem::at_lambda(g, lambda);
    let sv = singular_values_ascending(&sys.matrix);
    DirectDeterminant {
        value: det_real(&sys.matrix),
        smallest_singular_values: [sv[0], sv.get(1).copied().unwrap_or(f64::INFINITY)],
        norm: sys.norm(),
    }
}

/// Number of singular values of `H` below `NULL_TOLERANCE * |H|`.
pub fn multiplicity_at(g: &MetricGraph, lambda: f64) -> usize {
    let sys = DirectSystem::at_lambda(g, lambda);
    nullity(&sys, NULL_TOLERANCE)
}

fn nullity(sys: &DirectSystem, tol: f64) -> usize {
    let threshold = tol * sys.norm();
    singular_values_ascending(&sys.matrix)
        .iter()
        .take_while(|&&s| s <= threshold)
        .count()
}

/// One point of the spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvalueRecord {
    pub lambda: f64,
    /// `lambda = k^2`, or `lambda = -k^2` when `negative`.
    pub k: f64,
    pub negative: bool,
    pub multiplicity: usize,
    /// First index in the ordered spectrum, counted from 0.
    pub index: usize,
    /// Smallest singular value of `H` at the root relative to `|H|`.
    pub residual: f64,
    /// Two refined roots closer than `DEGENERACY_TOLERANCE` whose nullity did
    /// not confirm a double eigenvalue.
    pub degeneracy_suspected: bool,
}

impl EigenvalueRecord {
    pub fn index_range(&self) -> Range<usize> {
        self.index..self.index + self.multiplicity
    }

    pub fn basis(&self) -> Basis {
        if self.k == 0.0 {
            Basis::Polynomial
        } else if self.negative {
            Basis::Hyperbolic { kappa: self.k }
        } else {
            Basis::Oscillatory { k: self.k }
        }
    }
}

/// Expected eigenvalue count `T k / pi` and the accepted deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylEstimate {
    pub expected: f64,
    pub tolerance: f64,
}

impl WeylEstimate {
    pub fn accepts(&self, found: usize) -> bool {
        (found as f64 - self.expected).abs() <= self.tolerance
    }
}

pub fn weyl_count(g: &MetricGraph, k_max: f64) -> WeylEstimate {
    WeylEstimate {
        expected: g.total_length() * k_max / std::f64::consts::PI,
        tolerance: (g.vertex_count() + 2) as f64,
    }
}

#[derive(Debug, Clone)]
pub struct ScanOptions {
    /// Coarse grid step; defaults to `min(pi / (4 T), 0.01)`.
    pub step: Option<f64>,
    /// Fine samples per flagged coarse cell.
    pub subdivisions: usize,
    pub null_tolerance: f64,
    pub degeneracy_tolerance: f64,
    /// Raise `WeylCountMismatch` when the count is off.
    pub check_weyl: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            step: None,
            subdivisions: 16,
            null_tolerance: NULL_TOLERANCE,
            degeneracy_tolerance: DEGENERACY_TOLERANCE,
            check_weyl: true,
        }
    }
}

impl ScanOptions {
    fn step_for(&self, g: &MetricGraph) -> f64 {
        self.step
            .unwrap_or_else(|| (std::f64::consts::PI / (4.0 * g.total_length())).min(0.01))
    }
}

/// A refined root of a one-parameter family of matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub t: f64,
    pub multiplicity: usize,
    pub residual: f64,
    pub degeneracy_suspected: bool,
}

/// Sample of a matrix family: a real sign function (if any) and the sorted
/// singular values with the matrix norm.
struct Sample {
    sign: Option<f64>,
    sv: Vec<f64>,
    norm: f64,
}

impl Sample {
    fn smallest(&self) -> f64 {
        self.sv[0] / self.norm
    }
}

/// Finds all singular points of a matrix family on `[lo, hi]`: sign changes
/// of the sign function are bisected, local minima of the smallest singular
/// value are refined by golden section.
fn scan_family<F>(eval: F, lo: f64, hi: f64, step: f64, opts: &ScanOptions) -> Result<Vec<Root>>
where
    F: Fn(f64) -> Sample + Sync,
{
    if hi <= lo {
        return Ok(Vec::new());
    }
    let cells = ((hi - lo) / step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=cells)
        .map(|i| if i == cells { hi } else { lo + i as f64 * step })
        .collect();
    let samples: Vec<Sample> = grid.par_iter().map(|&t| eval(t)).collect();

    let mut flagged = vec![false; cells];
    for i in 0..cells {
        if sign_change(&samples[i], &samples[i + 1]) {
            flagged[i] = true;
        }
    }
    for i in 1..cells {
        let s = samples[i].smallest();
        if s <= samples[i - 1].smallest() && s <= samples[i + 1].smallest() {
            flagged[i - 1] = true;
            flagged[i] = true;
        }
    }
    // Minimum at the right end of the range.
    if cells >= 1 && samples[cells].smallest() <= samples[cells - 1].smallest() {
        flagged[cells - 1] = true;
    }

    let candidates: Vec<Vec<Candidate>> = (0..cells)
        .into_par_iter()
        .filter(|&i| flagged[i])
        .map(|i| refine_cell(&eval, grid[i], grid[i + 1], opts))
        .collect();
    let mut candidates: Vec<Candidate> = candidates.into_iter().flatten().collect();
    candidates.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(merge_candidates(&eval, candidates, opts))
}

fn sign_change(a: &Sample, b: &Sample) -> bool {
    match (a.sign, b.sign) {
        (Some(x), Some(y)) => (x < 0.0 && y > 0.0) || (x > 0.0 && y < 0.0),
        _ => false,
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    t: f64,
    from_sign_change: bool,
}

fn refine_cell<F>(eval: &F, a: f64, b: f64, opts: &ScanOptions) -> Vec<Candidate>
where
    F: Fn(f64) -> Sample,
{
    let n = opts.subdivisions.max(2);
    let ts: Vec<f64> = (0..=n)
        .map(|j| if j == n { b } else { a + (b - a) * j as f64 / n as f64 })
        .collect();
    let samples: Vec<Sample> = ts.iter().map(|&t| eval(t)).collect();
    let mut out = Vec::new();
    for j in 0..n {
        if sign_change(&samples[j], &samples[j + 1]) {
            let t = bisect(eval, ts[j], ts[j + 1], samples[j].sign.unwrap_or(0.0));
            out.push(Candidate { t, from_sign_change: true });
        }
    }
    for j in 0..=n {
        let s = samples[j].smallest();
        let left = if j > 0 { samples[j - 1].smallest() } else { f64::INFINITY };
        let right = if j < n { samples[j + 1].smallest() } else { f64::INFINITY };
        if s <= left && s <= right {
            let lo = ts[j.saturating_sub(1)];
            let hi = ts[(j + 1).min(n)];
            let t = golden_minimum(eval, lo, hi);
            out.push(Candidate { t, from_sign_change: false });
        }
    }
    out
}

fn bisect<F>(eval: &F, mut a: f64, mut b: f64, sign_a: f64) -> f64
where
    F: Fn(f64) -> Sample,
{
    let positive_at_a = sign_a > 0.0;
    for _ in 0..200 {
        if b - a <= BRACKET_WIDTH.max(4.0 * f64::EPSILON * b.abs()) {
            break;
        }
        let m = 0.5 * (a + b);
        let s = eval(m).sign.unwrap_or(0.0);
        if s == 0.0 {
            return m;
        }
        if (s > 0.0) == positive_at_a {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn golden_minimum<F>(eval: &F, mut a: f64, mut b: f64) -> f64
where
    F: Fn(f64) -> Sample,
{
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let f = |t: f64| eval(t).smallest();
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..200 {
        if b - a <= BRACKET_WIDTH.max(4.0 * f64::EPSILON * b.abs()) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

fn merge_candidates<F>(eval: &F, candidates: Vec<Candidate>, opts: &ScanOptions) -> Vec<Root>
where
    F: Fn(f64) -> Sample,
{
    // Clusters of candidates that refer to the same point.
    let mut clusters: Vec<Vec<Candidate>> = Vec::new();
    for c in candidates {
        match clusters.last_mut() {
            Some(last) if c.t - last.last().expect("non-empty").t <= DEDUP_TOLERANCE => last.push(c),
            _ => clusters.push(vec![c]),
        }
    }
    let mut roots = Vec::new();
    for cluster in clusters {
        let mut best: Option<(f64, Sample)> = None;
        for c in &cluster {
            let s = eval(c.t);
            if best.as_ref().is_none_or(|(_, b)| s.smallest() < b.smallest()) {
                best = Some((c.t, s));
            }
        }
        let (t, sample) = best.expect("non-empty cluster");
        let threshold = opts.null_tolerance * sample.norm;
        let mut multiplicity = sample.sv.iter().take_while(|&&s| s <= threshold).count();
        let mut sign_roots: Vec<f64> = cluster
            .iter()
            .filter(|c| c.from_sign_change)
            .map(|c| c.t)
            .collect();
        sign_roots.dedup_by(|x, y| (*x - *y).abs() <= 1e-12);
        if multiplicity == 0 {
            if sign_roots.is_empty() {
                continue;
            }
            multiplicity = 1;
        }
        let spread = sign_roots.last().zip(sign_roots.first()).map_or(0.0, |(a, b)| a - b);
        let mut suspected = false;
        if sign_roots.len() >= 2 && multiplicity < sign_roots.len() {
            if spread <= opts.degeneracy_tolerance {
                suspected = true;
                multiplicity = sign_roots.len();
            } else {
                // Distinct roots that happened to cluster: keep them apart.
                for &r in &sign_roots {
                    let s = eval(r);
                    roots.push(Root {
                        t: r,
                        multiplicity: 1,
                        residual: s.smallest(),
                        degeneracy_suspected: false,
                    });
                }
                continue;
            }
        }
        roots.push(Root {
            t,
            multiplicity,
            residual: sample.smallest(),
            degeneracy_suspected: suspected,
        });
    }
    roots
}

fn direct_sample(g: &MetricGraph, basis: Basis) -> Sample {
    let sys = DirectSystem::assemble(g, basis);
    Sample {
        sign: Some(det_real(&sys.matrix)),
        sv: singular_values_ascending(&sys.matrix),
        norm: sys.norm(),
    }
}

/// Bracket `(0, kappa_max]` for negative eigenvalues `-kappa^2`. A function
/// with `-lambda = kappa^2` satisfies `kappa^2 <= S * max f^2 / |f|^2` with
/// `S` the sum of the negative coefficients, and `max f^2 <= |f|^2 / l_min +
/// 2 |f| |f'|`, which gives `kappa^2 <= S^2 + S / l_min`. One is added as
/// margin.
pub fn negative_bracket(g: &MetricGraph) -> Option<f64> {
    let s: f64 = g
        .vertices()
        .iter()
        .filter_map(|v| v.condition.alpha())
        .map(|a| (-a).max(0.0))
        .sum();
    if s == 0.0 {
        None
    } else {
        Some(1.0 + (s * s + s / g.min_length()).sqrt())
    }
}

/// All eigenvalues `lambda <= k_max^2`, including zero and negative ones,
/// sorted with index ranges.
pub fn scan_spectrum(g: &MetricGraph, k_max: f64) -> Result<Vec<EigenvalueRecord>> {
    scan_spectrum_with(g, k_max, &ScanOptions::default())
}

pub fn scan_spectrum_with(g: &MetricGraph, k_max: f64, opts: &ScanOptions) -> Result<Vec<EigenvalueRecord>> {
    if !(k_max > 0.0) || !k_max.is_finite() {
        return Err(Error::NonpositiveK(k_max));
    }
    let step = opts.step_for(g);
    let mut records = Vec::new();

    if let Some(kappa_max) = negative_bracket(g) {
        let roots = scan_family(
            |kappa| direct_sample(g, Basis::Hyperbolic { kappa }),
            GRID_START,
            kappa_max,
            step,
            opts,
        )?;
        for r in roots.into_iter().filter(|r| r.t >= MIN_ROOT) {
            records.push(record(-r.t * r.t, r.t, true, &r));
        }
    }

    let zero = DirectSystem::assemble(g, Basis::Polynomial);
    let m0 = nullity(&zero, opts.null_tolerance);
    if m0 > 0 {
        let sv = singular_values_ascending(&zero.matrix);
        records.push(EigenvalueRecord {
            lambda: 0.0,
            k: 0.0,
            negative: false,
            multiplicity: m0,
            index: 0,
            residual: sv[0] / zero.norm(),
            degeneracy_suspected: false,
        });
    }

    let roots = scan_family(
        |k| direct_sample(g, Basis::Oscillatory { k }),
        GRID_START,
        k_max,
        step,
        opts,
    )?;
    for r in roots.into_iter().filter(|r| r.t >= MIN_ROOT && r.t <= k_max) {
        records.push(record(r.t * r.t, r.t, false, &r));
    }

    records.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut index = 0;
    for r in &mut records {
        r.index = index;
        index += r.multiplicity;
    }
    if opts.check_weyl {
        let w = weyl_count(g, k_max);
        if !w.accepts(index) {
            return Err(Error::WeylCountMismatch {
                found: index,
                expected: w.expected,
                tolerance: w.tolerance,
            });
        }
    }
    Ok(records)
}

fn record(lambda: f64, k: f64, negative: bool, r: &Root) -> EigenvalueRecord {
    EigenvalueRecord {
        lambda,
        k,
        negative,
        multiplicity: r.multiplicity,
        index: 0,
        residual: r.residual,
        degeneracy_suspected: r.degeneracy_suspected,
    }
}

/// Records covering at least the first `count` eigenvalues (with
/// multiplicity), trimmed to those whose index range starts below `count`.
pub fn first_eigenvalues(g: &MetricGraph, count: usize) -> Result<Vec<EigenvalueRecord>> {
    let t = g.total_length();
    let mut k_max = std::f64::consts::PI * (count + g.vertex_count() + 3) as f64 / t + 1.0;
    for _ in 0..8 {
        let records = scan_spectrum(g, k_max)?;
        let total: usize = records.iter().map(|r| r.multiplicity).sum();
        if total > count {
            return Ok(records.into_iter().filter(|r| r.index < count).collect());
        }
        k_max *= 1.5;
    }
    Err(Error::NoConvergence(k_max))
}

/// The first `count` eigenvalues listed with multiplicity.
pub fn eigenvalue_list(g: &MetricGraph, count: usize) -> Result<Vec<f64>> {
    let records = first_eigenvalues(g, count)?;
    Ok(records
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity))
        .take(count)
        .collect())
}

/// Positive roots `k` of the secular determinant on `[k_lo, k_max]`, with
/// multiplicities from the nullity of `e^{-ikL/2} - e^{ikL/2} S`. For NK and
/// Dirichlet graphs the real secular function supplies sign changes.
pub fn secular_roots(g: &MetricGraph, k_lo: f64, k_max: f64) -> Result<Vec<Root>> {
    if !(k_lo > 0.0) {
        return Err(Error::NonpositiveK(k_lo));
    }
    let torus = if g.is_nk_dirichlet() {
        Some(TorusFunction::new(g)?)
    } else {
        None
    };
    let lengths = g.lengths();
    let eval = |k: f64| {
        let sys = assemble_secular_system(g, k).expect("k is positive");
        let m = sys.secular_matrix();
        let sign = torus.as_ref().map(|f| {
            let kappa: Vec<f64> = lengths.iter().map(|l| k * l).collect();
            f.value(&kappa)
        });
        Sample {
            sign,
            sv: singular_values_ascending(&m),
            // |e^{-ikL/2}| + |e^{ikL/2} S| in Frobenius norm
            norm: 2.0 * (m.nrows() as f64).sqrt(),
        }
    };
    let opts = ScanOptions::default();
    scan_family(eval, k_lo, k_max, opts.step_for(g), &opts)
}
