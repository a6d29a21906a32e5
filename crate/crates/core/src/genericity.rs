//! Numerical checks of spectral genericity: simplicity, vertex
//! non-vanishing and loop states, interlacing under a change of one vertex
//! coefficient, and the continuation of an eigenvalue through a rotating
//! leaf condition.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::eigenmode::{eigenfunctions_at, EigenFunction, SupportClassification};
use crate::error::{Error, Result};
use crate::graph::{End, GraphSignature, LoopDescriptor, MetricGraph, VertexCondition};
use crate::linalg::{det_real, singular_values_ascending};
use crate::secular::TorusFunction;
use crate::spectral::{first_eigenvalues, scan_spectrum, Basis, DirectSystem, EigenvalueRecord};

/// Relative gap `(lambda_{n+1} - lambda_n) / (1 + |lambda_n|)` above which two
/// eigenvalues count as distinct.
pub const GAP_THRESHOLD: f64 = 1e-6;
/// `|f(v)| + |sum f'(v)|` above which the strict interlacing precondition
/// holds.
pub const STRICT_PRECONDITION: f64 = 1e-6;
/// Interlacing differences above this count as strict.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Eigenfunction values above this count as nonzero at a point.
pub const POINT_TOLERANCE: f64 = 1e-6;
/// Default continuation steps per full turn of the leaf angle.
pub const STEPS_PER_TURN: usize = 200;

/// First `count` eigenpairs, one entry per eigenfunction, with the index of
/// each in the ordered spectrum.
pub fn eigenpairs(g: &MetricGraph, count: usize) -> Result<Vec<(usize, EigenFunction)>> {
    let records = first_eigenvalues(g, count)?;
    let mut out = Vec::with_capacity(count);
    for r in &records {
        for (i, f) in eigenfunctions_at(g, r)?.into_iter().enumerate() {
            out.push((r.index + i, f));
        }
    }
    out.truncate(count);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    /// The examined spectrum is simple.
    pub simple: bool,
    /// Every eigenfunction that is not a loop state is nonzero at every
    /// vertex.
    pub nonvanishing: bool,
    /// Every loop state lives on exactly one pure loop.
    pub single_loop: bool,
}

impl Verdict {
    pub fn all(&self) -> bool {
        self.simple && self.nonvanishing && self.single_loop
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenericityReport {
    pub signature: GraphSignature,
    pub n: usize,
    /// `lambda_0 .. lambda_n` with multiplicity (one more than examined).
    pub eigenvalues: Vec<f64>,
    /// Relative gaps after each examined eigenvalue.
    pub gaps: Vec<f64>,
    pub min_spectral_gap: f64,
    pub gap_threshold: f64,
    pub nonvanishing: Vec<usize>,
    pub vanishing_incidents: Vec<(usize, String)>,
    pub loop_states: Vec<(usize, LoopDescriptor)>,
    /// Eigenfunctions supported on more than one pure loop at once.
    pub ambiguous_loop_states: Vec<(usize, Vec<LoopDescriptor>)>,
    pub verdict: Verdict,
}

/// Examines the first `n` eigenpairs of `g`.
pub fn genericity_report(g: &MetricGraph, n: usize) -> Result<GenericityReport> {
    genericity_report_with(g, n, GAP_THRESHOLD)
}

/// As [`genericity_report`] with an explicit relative gap threshold for
/// simplicity.
pub fn genericity_report_with(g: &MetricGraph, n: usize, gap_threshold: f64) -> Result<GenericityReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of eigenvalues must be positive".into()));
    }
    if g.is_circle() {
        return Err(Error::CircleExcluded);
    }
    let records = first_eigenvalues(g, n + 1)?;
    let eigenvalues: Vec<f64> = records
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity))
        .take(n + 1)
        .collect();
    let gaps: Vec<f64> = (0..n)
        .map(|i| (eigenvalues[i + 1] - eigenvalues[i]) / (1.0 + eigenvalues[i].abs()))
        .collect();
    let min_spectral_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);

    let mut nonvanishing = Vec::new();
    let mut vanishing_incidents = Vec::new();
    let mut loop_states = Vec::new();
    let mut ambiguous_loop_states = Vec::new();
    for r in records.iter().filter(|r| r.index < n) {
        for (i, f) in eigenfunctions_at(g, r)?.into_iter().enumerate() {
            let idx = r.index + i;
            if idx >= n {
                break;
            }
            match f.support {
                SupportClassification::NonvanishingOnVertices => nonvanishing.push(idx),
                SupportClassification::VanishesAtVertices(vs) => {
                    vanishing_incidents.extend(vs.into_iter().map(|v| (idx, v)))
                }
                SupportClassification::LoopSupported(lp) => loop_states.push((idx, lp)),
                SupportClassification::SupportedOnLoops(lps) => ambiguous_loop_states.push((idx, lps)),
            }
        }
    }
    let verdict = Verdict {
        simple: min_spectral_gap > gap_threshold,
        nonvanishing: vanishing_incidents.is_empty(),
        single_loop: ambiguous_loop_states.is_empty(),
    };
    Ok(GenericityReport {
        signature: g.canonical_signature(),
        n,
        eigenvalues,
        gaps,
        min_spectral_gap,
        gap_threshold,
        nonvanishing,
        vanishing_incidents,
        loop_states,
        ambiguous_loop_states,
        verdict,
    })
}

impl GenericityReport {
    /// One row per examined eigenfunction.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("index\tlambda\tgap\tclass\tdetail\n");
        for i in 0..self.n {
            let (class, detail) = if self.nonvanishing.contains(&i) {
                ("nonvanishing", String::new())
            } else if let Some((_, lp)) = self.loop_states.iter().find(|(j, _)| *j == i) {
                ("loop", lp.edge_chain.join(","))
            } else if let Some((_, lps)) = self.ambiguous_loop_states.iter().find(|(j, _)| *j == i) {
                (
                    "loops",
                    lps.iter().map(|l| l.edge_chain.join(",")).collect::<Vec<_>>().join(";"),
                )
            } else {
                let vs: Vec<&str> = self
                    .vanishing_incidents
                    .iter()
                    .filter(|(j, _)| *j == i)
                    .map(|(_, v)| v.as_str())
                    .collect();
                ("vanishing", vs.join(","))
            };
            out.push_str(&format!(
                "{i}\t{:.12e}\t{:.6e}\t{class}\t{detail}\n",
                self.eigenvalues[i], self.gaps[i]
            ));
        }
        out
    }
}

impl fmt::Display for GenericityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "eigenvalues examined: {}", self.n)?;
        writeln!(
            f,
            "min relative gap: {:.6e} (threshold {:.1e})",
            self.min_spectral_gap, self.gap_threshold
        )?;
        writeln!(f, "simple: {}", self.verdict.simple)?;
        writeln!(
            f,
            "nonvanishing: {} ({} vanishing incidents)",
            self.verdict.nonvanishing,
            self.vanishing_incidents.len()
        )?;
        writeln!(
            f,
            "loop states: {} (single loop: {})",
            self.loop_states.len(),
            self.verdict.single_loop
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub trials: usize,
    pub passed: usize,
    /// `None` when no trial ran.
    pub fraction: Option<f64>,
    /// Failed trials with the reason.
    pub failures: Vec<(usize, String)>,
}

/// Seed of trial `i` derived from the base seed.
pub fn trial_seed(seed: u64, i: usize) -> u64 {
    seed ^ (i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Runs `genericity_report` on `trials` independent length perturbations of
/// size at most `epsilon`.
pub fn randomized_genericity_trial(
    g: &MetricGraph,
    trials: usize,
    epsilon: f64,
    n: usize,
    seed: u64,
) -> Result<TrialSummary> {
    if g.is_circle() {
        return Err(Error::CircleExcluded);
    }
    // Validates epsilon even when no trial runs.
    g.perturb_lengths(epsilon, seed)?;
    let outcomes: Vec<Result<GenericityReport>> = (0..trials)
        .into_par_iter()
        .map(|i| genericity_report(&g.perturb_lengths(epsilon, trial_seed(seed, i))?, n))
        .collect();
    let mut failures = Vec::new();
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) if r.verdict.all() => {}
            Ok(r) => failures.push((
                i,
                format!(
                    "simple={} nonvanishing={} single_loop={} min_gap={:.3e}",
                    r.verdict.simple, r.verdict.nonvanishing, r.verdict.single_loop, r.min_spectral_gap
                ),
            )),
            Err(Error::CircleExcluded) => {}
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    let passed = trials - failures.len();
    Ok(TrialSummary {
        trials,
        passed,
        fraction: (trials > 0).then(|| passed as f64 / trials as f64),
        failures,
    })
}

/// A delta coefficient, with `Infinite` standing for the Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaValue {
    Finite(f64),
    Infinite,
}

impl AlphaValue {
    fn key(&self) -> f64 {
        match *self {
            AlphaValue::Finite(a) => a,
            AlphaValue::Infinite => f64::INFINITY,
        }
    }

    fn condition(&self) -> VertexCondition {
        match *self {
            AlphaValue::Finite(a) => VertexCondition::Delta(a),
            AlphaValue::Infinite => VertexCondition::Dirichlet,
        }
    }
}

impl FromStr for AlphaValue {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" => Ok(AlphaValue::Infinite),
            t => t
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(AlphaValue::Finite)
                .ok_or_else(|| Error::InvalidArgument(format!("bad coefficient `{s}`"))),
        }
    }
}

impl fmt::Display for AlphaValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlphaValue::Finite(a) => write!(f, "{a}"),
            AlphaValue::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterlacingResult {
    pub alpha: AlphaValue,
    pub alpha_prime: AlphaValue,
    /// Smallest difference over all checked inequalities; negative is a
    /// violation.
    pub margin: f64,
    /// Indices `n` where the strict precondition holds.
    pub strict_checked: Vec<usize>,
    /// Indices among `strict_checked` where an inequality is not strict.
    pub strict_failures: Vec<usize>,
}

/// Checks interlacing between the spectra with coefficient `alpha` and
/// `alpha_prime` at vertex `v` for the first `n` eigenvalues.
pub fn verify_interlacing(
    g: &MetricGraph,
    v: &str,
    pairs: &[(AlphaValue, AlphaValue)],
    n: usize,
) -> Result<Vec<InterlacingResult>> {
    let vi = g.vertex_index(v)?;
    let leaf = g.degree(vi) == 1;
    if !leaf && g.vertices()[vi].condition == VertexCondition::Dirichlet {
        return Err(Error::InvalidArgument(format!("vertex `{v}` cannot carry a delta condition")));
    }
    pairs
        .iter()
        .map(|&(a, b)| interlace_pair(g, vi, a, b, n))
        .collect()
}

fn interlace_pair(g: &MetricGraph, vi: usize, alpha: AlphaValue, alpha_prime: AlphaValue, n: usize) -> Result<InterlacingResult> {
    let id = &g.vertices()[vi].id;
    let ga = g.with_condition(id, alpha.condition())?;
    let gb = g.with_condition(id, alpha_prime.condition())?;
    let recs_a = first_eigenvalues(&ga, n + 1)?;
    let recs_b = first_eigenvalues(&gb, n + 1)?;
    let la = expand(&recs_a, n + 1);
    let lb = expand(&recs_b, n + 1);
    let forward = alpha.key() < alpha_prime.key();

    let mut margin = f64::INFINITY;
    let mut strict_checked = Vec::new();
    let mut strict_failures = Vec::new();
    for i in 0..n {
        // forward:  lb[i-1] <= la[i] <= lb[i]
        // reversed: lb[i]   <= la[i] <= lb[i+1]
        let (lower, upper) = if forward {
            (if i > 0 { Some(la[i] - lb[i - 1]) } else { None }, lb[i] - la[i])
        } else {
            (Some(la[i] - lb[i]), lb[i + 1] - la[i])
        };
        let worst = lower.map_or(upper, |l| l.min(upper));
        margin = margin.min(worst);

        let rec = recs_a
            .iter()
            .find(|r| r.index_range().contains(&i))
            .expect("eigenvalue index covered");
        if rec.multiplicity == 1 && vertex_activity(&ga, vi, rec)? > STRICT_PRECONDITION {
            strict_checked.push(i);
            if worst <= STRICT_MARGIN {
                strict_failures.push(i);
            }
        }
    }
    Ok(InterlacingResult {
        alpha,
        alpha_prime,
        margin,
        strict_checked,
        strict_failures,
    })
}

fn expand(records: &[EigenvalueRecord], count: usize) -> Vec<f64> {
    records
        .iter()
        .flat_map(|r| std::iter::repeat_n(r.lambda, r.multiplicity))
        .take(count)
        .collect()
}

/// `|f(v)| + |sum f'(v)|` for the eigenfunction of a simple eigenvalue.
fn vertex_activity(g: &MetricGraph, vi: usize, rec: &EigenvalueRecord) -> Result<f64> {
    let f = &eigenfunctions_at(g, rec)?[0];
    let value = f.vertex_value(&g.vertices()[vi].id).unwrap_or(0.0);
    let flux: f64 = g
        .incident(vi)
        .iter()
        .map(|ee| match ee.end {
            End::Start => f.derivative_index(ee.edge, 0.0),
            End::End => -f.derivative_index(ee.edge, g.edges()[ee.edge].length),
        })
        .sum();
    Ok(value.abs() + flux.abs())
}

/// A point `y` in `(x0 - radius, x0 + radius)` on `edge` at which each of the
/// first `n` eigenfunctions is nonzero or vanishes on the whole edge.
pub fn pick_nonvanishing_point(g: &MetricGraph, edge: &str, x0: f64, radius: f64, n: usize) -> Result<f64> {
    let e = g.edge_index(edge)?;
    let length = g.edges()[e].length;
    if !(radius > 0.0 && x0 - radius >= 0.0 && x0 + radius <= length) {
        return Err(Error::InvalidArgument(format!(
            "window ({}, {}) not inside edge `{edge}` of length {length}",
            x0 - radius,
            x0 + radius
        )));
    }
    if n == 0 {
        return Ok(x0);
    }
    let modes = eigenpairs(g, n)?;
    let candidates = 64;
    for j in 0..candidates {
        // x0 first, then a van der Corput sequence spread over the open window
        let y = if j == 0 { x0 } else { x0 + radius * (2.0 * van_der_corput(j) - 1.0) };
        let admissible = modes.iter().all(|(_, f)| {
            f.vanishes_on_edge(e, 1e-8) || f.evaluate_index(e, y).is_ok_and(|v| v.abs() > POINT_TOLERANCE)
        });
        if admissible {
            return Ok(y);
        }
    }
    Err(Error::NoPointFound(candidates))
}

fn van_der_corput(mut i: usize) -> f64 {
    let mut x = 0.0;
    let mut base = 0.5;
    while i > 0 {
        if i & 1 == 1 {
            x += base;
        }
        base *= 0.5;
        i >>= 1;
    }
    x
}

/// One sample of a leaf-angle continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaSample {
    pub theta: f64,
    pub lambda: f64,
    /// Length of the leaf edge extended so that the original leaf condition
    /// holds at its new end.
    pub extended_length: f64,
    /// `sqrt(lambda) * lengths` reduced to `[0, 2 pi)`.
    pub torus_point: Vec<f64>,
    /// `|Phi|` at the torus point.
    pub phi_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaPath {
    pub leaf: String,
    pub leaf_edge: String,
    pub start_index: usize,
    pub turns: i64,
    pub samples: Vec<ThetaSample>,
    /// Index of the endpoint eigenvalue in the spectrum of the original graph.
    pub end_index: usize,
}

impl ThetaPath {
    pub fn max_phi_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.phi_residual).fold(0.0, f64::max)
    }

    pub fn end_lambda(&self) -> f64 {
        self.samples.last().expect("path has samples").lambda
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("theta\tlambda\textended_length\tphi_residual\ttorus_point\n");
        for s in &self.samples {
            let point: Vec<String> = s.torus_point.iter().map(|x| format!("{x:.12e}")).collect();
            out.push_str(&format!(
                "{:.12e}\t{:.12e}\t{:.12e}\t{:.3e}\t{}\n",
                s.theta,
                s.lambda,
                s.extended_length,
                s.phi_residual,
                point.join(",")
            ));
        }
        out
    }
}

/// Continues eigenvalue `n_start` while the leaf condition
/// `cos(theta/2) f' = k sin(theta/2) f` rotates from its original angle
/// through `turns` full turns (decreasing theta for positive `turns`), with
/// `steps_per_turn` continuation steps per turn.
pub fn trace_theta_path(
    g: &MetricGraph,
    leaf: &str,
    n_start: usize,
    turns: i64,
    steps_per_turn: usize,
) -> Result<ThetaPath> {
    if turns % 2 != 0 {
        return Err(Error::OddTurns(turns));
    }
    let v = g.vertex_index(leaf)?;
    if g.degree(v) != 1 {
        return Err(Error::NotALeaf(leaf.to_string()));
    }
    let theta_v = match g.vertices()[v].condition {
        VertexCondition::Dirichlet => PI,
        VertexCondition::Delta(0.0) => 0.0,
        _ => return Err(Error::InvalidArgument(format!("leaf `{leaf}` must be NK or Dirichlet"))),
    };
    let torus = TorusFunction::new(g)?;
    let ee = g.incident(v)[0];
    let e = ee.edge;
    let base_length = g.edges()[e].length;

    let records = first_eigenvalues(g, n_start + 1)?;
    let rec = records
        .iter()
        .find(|r| r.index_range().contains(&n_start))
        .ok_or(Error::IndexOutOfRange {
            index: n_start,
            available: records.iter().map(|r| r.multiplicity).sum(),
        })?;
    if rec.multiplicity != 1 || rec.degeneracy_suspected {
        return Err(Error::PathThroughDegeneracy { theta: theta_v });
    }
    if rec.negative || rec.k == 0.0 {
        return Err(Error::InvalidArgument("continuation needs a positive eigenvalue".into()));
    }

    let sample = |theta: f64, k: f64| -> ThetaSample {
        let extended_length = base_length + (theta_v - theta) / (2.0 * k);
        let mut lengths = g.lengths();
        lengths[e] = extended_length;
        let torus_point: Vec<f64> = lengths.iter().map(|l| (k * l).rem_euclid(TAU)).collect();
        let phi_residual = torus.value(&torus_point).abs();
        ThetaSample {
            theta,
            lambda: k * k,
            extended_length,
            torus_point,
            phi_residual,
        }
    };

    let mut samples = vec![sample(theta_v, rec.k)];
    let total = TAU * turns as f64;
    let nominal = total.abs() / (steps_per_turn.max(1) as f64 * turns.unsigned_abs().max(1) as f64);
    let direction = -(turns.signum() as f64);
    let theta_end = theta_v - total;
    let mut theta = theta_v;
    let mut k = rec.k;
    let mut slope = 0.0;
    let mut dtheta = nominal;
    // A fraction of the mean eigenvalue spacing pi / T: larger corrections to
    // the predicted root suggest a jump to a neighbouring branch.
    let jump_limit = 0.05 * PI / g.total_length();
    while (theta_end - theta) * direction > 1e-12 {
        let step = dtheta.min((theta_end - theta).abs());
        let next = theta + direction * step;
        match continue_root(g, v, next, k + slope * step, k) {
            Some(k_next) if (k_next - (k + slope * step)).abs() <= jump_limit => {
                let multiplicity = leaf_nullity(g, v, next, k_next);
                if multiplicity > 1 {
                    return Err(Error::PathThroughDegeneracy { theta: next });
                }
                slope = (k_next - k) / step;
                k = k_next;
                theta = next;
                samples.push(sample(theta, k));
                dtheta = (dtheta * 2.0).min(nominal);
            }
            _ => {
                dtheta *= 0.5;
                if dtheta < 1e-9 {
                    return Err(Error::NoConvergence(k));
                }
            }
        }
    }

    let end_k = k;
    let spectrum = scan_spectrum(g, end_k.max(rec.k) + 1.0)?;
    let end = spectrum
        .iter()
        .filter(|r| !r.negative)
        .min_by(|a, b| (a.k - end_k).abs().total_cmp(&(b.k - end_k).abs()))
        .ok_or(Error::NoConvergence(end_k))?;
    if (end.k - end_k).abs() > 1e-6 * end_k.max(1.0) {
        return Err(Error::NoConvergence(end_k));
    }
    Ok(ThetaPath {
        leaf: leaf.to_string(),
        leaf_edge: g.edges()[e].id.clone(),
        start_index: n_start,
        turns,
        samples,
        end_index: end.index,
    })
}

fn leaf_det(g: &MetricGraph, leaf: usize, theta: f64, k: f64) -> f64 {
    det_real(&DirectSystem::assemble(g, Basis::Oscillatory { k }).with_leaf_angle(g, leaf, theta).matrix)
}

fn leaf_nullity(g: &MetricGraph, leaf: usize, theta: f64, k: f64) -> usize {
    let sys = DirectSystem::assemble(g, Basis::Oscillatory { k }).with_leaf_angle(g, leaf, theta);
    let threshold = 1e-6 * sys.norm();
    singular_values_ascending(&sys.matrix)
        .iter()
        .take_while(|&&s| s <= threshold)
        .count()
}

/// Root of the leaf-angle determinant nearest to `guess`, bracketed by an
/// outward search and refined by bisection.
fn continue_root(g: &MetricGraph, leaf: usize, theta: f64, guess: f64, previous: f64) -> Option<f64> {
    let f = |k: f64| leaf_det(g, leaf, theta, k);
    let mut r = 1e-4 * previous.max(1.0);
    let f0 = f(guess);
    if f0 == 0.0 {
        return Some(guess);
    }
    for _ in 0..12 {
        let lo = (guess - r).max(1e-6);
        let hi = guess + r;
        let (flo, fhi) = (f(lo), f(hi));
        let bracket = if flo.signum() != f0.signum() {
            Some((lo, guess, flo))
        } else if fhi.signum() != f0.signum() {
            Some((guess, hi, f0))
        } else {
            None
        };
        if let Some((mut a, mut b, fa)) = bracket {
            let sa = fa.signum();
            for _ in 0..200 {
                if b - a <= 1e-14 * b.max(1.0) {
                    break;
                }
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    return Some(m);
                }
                if fm.signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            return Some(0.5 * (a + b));
        }
        r *= 2.0;
    }
    None
}
