//! Sampling of the torus function `Phi` on a periodic grid over
//! `[0, 2 pi)^E`, extraction of its zero set, smooth/singular classification
//! and connected components of the smooth part.
//!
//! Cells are indexed by their lower corner; the grid wraps in every axis.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::MetricGraph;
use crate::secular::TorusFunction;
use crate::spectral::DirectSystem;
use crate::union_find::UnionFind;

pub const MIN_RESOLUTION: usize = 16;
pub const MAX_DIMENSION: usize = 4;
/// Corner values within this fraction of `max |Phi|` count as zero.
pub const ZERO_FRACTION: f64 = 1e-10;
/// `tau_grad = GRAD_FRACTION * max |Phi| * resolution / (2 pi)`.
pub const GRAD_FRACTION: f64 = 1e-4;
/// Corner gradients of a smooth cell must pairwise subtend less than this
/// angle (cosine bound); sharper turns mark a cell next to a singular point.
pub const COHERENCE_COS: f64 = 0.5;
/// Cells within this Chebyshev distance of a singular cell are not labeled.
pub const EXCLUSION_RADIUS: usize = 1;
/// Finite-difference step of the sign labels.
pub const SIGN_STEP: f64 = 1e-6;
/// Gradient components below this are ignored by the sign labels.
pub const SIGN_TOLERANCE: f64 = 1e-8;
/// Number of singular cells checked against the eigenvalue multiplicity.
const MULTIPLICITY_SAMPLES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Empty,
    Smooth,
    /// Smooth but within the exclusion radius of a singular cell.
    NearSingular,
    Singular,
}

/// Multiplicity of `lambda = 1` for the realization `lengths = kappa` at a
/// singular sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplicityCheck {
    pub cell: usize,
    pub point: Vec<f64>,
    /// Second smallest singular value of the direct system relative to its
    /// scale.
    pub second_singular_value: f64,
    pub threshold: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone)]
pub struct TorusField {
    dimension: usize,
    resolution: usize,
    values: Vec<f64>,
    max_abs: f64,
    torus: TorusFunction,
    graph: MetricGraph,
    states: Vec<CellState>,
    multiplicity_checks: Vec<MultiplicityCheck>,
    classified: bool,
}

impl TorusField {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> f64 {
        TAU / self.resolution as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.max_abs
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn is_classified(&self) -> bool {
        self.classified
    }

    pub fn state(&self, cell: usize) -> CellState {
        self.states[cell]
    }

    pub fn count(&self, state: CellState) -> usize {
        self.states.iter().filter(|&&s| s == state).count()
    }

    pub fn is_zero_cell(&self, cell: usize) -> bool {
        self.states[cell] != CellState::Empty
    }

    pub fn multiplicity_checks(&self) -> &[MultiplicityCheck] {
        &self.multiplicity_checks
    }

    pub fn torus_function(&self) -> &TorusFunction {
        &self.torus
    }

    /// Grid coordinates of a flat index.
    pub fn coords(&self, mut index: usize) -> Vec<usize> {
        let r = self.resolution;
        (0..self.dimension)
            .map(|_| {
                let c = index % r;
                index /= r;
                c
            })
            .collect()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        let r = self.resolution;
        coords.iter().rev().fold(0, |acc, &c| acc * r + c % r)
    }

    pub fn point(&self, index: usize) -> Vec<f64> {
        let h = self.spacing();
        self.coords(index).iter().map(|&c| c as f64 * h).collect()
    }

    /// Cell containing the torus point.
    pub fn cell_of(&self, kappa: &[f64]) -> usize {
        let h = self.spacing();
        let coords: Vec<usize> = kappa
            .iter()
            .map(|k| ((k.rem_euclid(TAU) / h).floor() as usize).min(self.resolution - 1))
            .collect();
        self.index(&coords)
    }

    fn shifted(&self, index: usize, axis: usize, delta: isize) -> usize {
        let r = self.resolution as isize;
        let stride = (self.resolution as isize).pow(axis as u32);
        let c = (index as isize / stride) % r;
        let nc = (c + delta).rem_euclid(r);
        (index as isize + (nc - c) * stride) as usize
    }

    fn corners(&self, cell: usize) -> Vec<usize> {
        (0..1usize << self.dimension)
            .map(|mask| {
                (0..self.dimension).fold(cell, |idx, axis| {
                    if mask >> axis & 1 == 1 {
                        self.shifted(idx, axis, 1)
                    } else {
                        idx
                    }
                })
            })
            .collect()
    }

    /// Central-difference gradient at a grid vertex.
    pub fn grid_gradient(&self, index: usize) -> Vec<f64> {
        let h2 = 2.0 * self.spacing();
        (0..self.dimension)
            .map(|a| (self.values[self.shifted(index, a, 1)] - self.values[self.shifted(index, a, -1)]) / h2)
            .collect()
    }

    fn zero_threshold(&self) -> f64 {
        ZERO_FRACTION * self.max_abs
    }

    pub fn gradient_threshold(&self) -> f64 {
        GRAD_FRACTION * self.max_abs * self.resolution as f64 / TAU
    }

    fn cell_has_zero(&self, cell: usize) -> bool {
        let tz = self.zero_threshold();
        let (mut pos, mut neg) = (false, false);
        for c in self.corners(cell) {
            let v = self.values[c];
            if v.abs() <= tz {
                return true;
            }
            pos |= v > 0.0;
            neg |= v < 0.0;
        }
        pos && neg
    }

    fn cell_is_singular(&self, cell: usize) -> bool {
        let grads: Vec<Vec<f64>> = self.corners(cell).iter().map(|&c| self.grid_gradient(c)).collect();
        let norms: Vec<f64> = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
        if norms.iter().any(|&n| n < self.gradient_threshold()) {
            return true;
        }
        for i in 0..grads.len() {
            for j in i + 1..grads.len() {
                let dot: f64 = grads[i].iter().zip(&grads[j]).map(|(a, b)| a * b).sum();
                if dot < COHERENCE_COS * norms[i] * norms[j] {
                    return true;
                }
            }
        }
        false
    }

    /// Cells within Chebyshev distance `radius` of `cell`, excluding itself.
    fn neighbourhood(&self, cell: usize, radius: usize) -> Vec<usize> {
        let mut out = vec![cell];
        for axis in 0..self.dimension {
            let mut next = Vec::with_capacity(out.len() * (2 * radius + 1));
            for &c in &out {
                for d in -(radius as isize)..=(radius as isize) {
                    next.push(self.shifted(c, axis, d));
                }
            }
            out = next;
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&c| c != cell);
        out
    }
}

/// Samples `Phi` on the regular grid with `resolution` points per axis.
pub fn sample_field(g: &MetricGraph, resolution: usize) -> Result<TorusField> {
    let dimension = g.edge_count();
    if dimension > MAX_DIMENSION {
        return Err(Error::DimensionTooLarge(dimension));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooSmall(resolution));
    }
    let torus = TorusFunction::new(g)?;
    let total = resolution.pow(dimension as u32);
    let h = TAU / resolution as f64;
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0.0; dimension],
            |kappa, mut index| {
                for k in kappa.iter_mut() {
                    *k = (index % resolution) as f64 * h;
                    index /= resolution;
                }
                torus.value(kappa)
            },
        )
        .collect();
    let max_abs = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(TorusField {
        dimension,
        resolution,
        values,
        max_abs,
        torus,
        graph: g.clone(),
        states: vec![CellState::Empty; total],
        multiplicity_checks: Vec::new(),
        classified: false,
    })
}

/// Flags zero cells, splits them into smooth and singular, marks smooth cells
/// near singular ones, and cross-checks a sample of singular cells against
/// the eigenvalue multiplicity of the realization `lengths = kappa, k = 1`.
pub fn classify_points(mut field: TorusField) -> TorusField {
    let total = field.values.len();
    let states: Vec<CellState> = (0..total)
        .into_par_iter()
        .map(|c| {
            if !field.cell_has_zero(c) {
                CellState::Empty
            } else if field.cell_is_singular(c) {
                CellState::Singular
            } else {
                CellState::Smooth
            }
        })
        .collect();
    field.states = states;
    let singular: Vec<usize> = (0..total).filter(|&c| field.states[c] == CellState::Singular).collect();
    for &c in &singular {
        for n in field.neighbourhood(c, EXCLUSION_RADIUS) {
            if field.states[n] == CellState::Smooth {
                field.states[n] = CellState::NearSingular;
            }
        }
    }
    let stride = (singular.len() / MULTIPLICITY_SAMPLES).max(1);
    field.multiplicity_checks = singular
        .iter()
        .step_by(stride)
        .take(MULTIPLICITY_SAMPLES)
        .map(|&c| multiplicity_check(&field, c))
        .collect();
    field.classified = true;
    field
}

/// The corner of `cell` with the smallest `|Phi| + |grad Phi| h`, read as a
/// graph with lengths `kappa` (zero coordinates replaced by `2 pi`) at `k = 1`.
fn multiplicity_check(field: &TorusField, cell: usize) -> MultiplicityCheck {
    let h = field.spacing();
    let corner = field
        .corners(cell)
        .into_iter()
        .min_by(|&a, &b| {
            let score = |i: usize| {
                let g = field.grid_gradient(i);
                field.values[i].abs() + h * g.iter().map(|x| x * x).sum::<f64>().sqrt()
            };
            score(a).total_cmp(&score(b))
        })
        .expect("cells have corners");
    let point = field.point(corner);
    let lengths: Vec<f64> = point.iter().map(|&k| if k < 1e-12 { TAU } else { k }).collect();
    let threshold = (4.0 * h).max(1e-8);
    let (second, multiplicity) = match realization(field, &lengths) {
        Some(g) => {
            let sys = DirectSystem::at_lambda(&g, 1.0);
            let sv = crate::linalg::singular_values_ascending(&sys.matrix);
            let scale = sys.norm();
            let second = sv.get(1).copied().unwrap_or(f64::INFINITY) / scale;
            (second, sv.iter().take_while(|&&s| s / scale <= threshold).count())
        }
        None => (f64::INFINITY, 0),
    };
    MultiplicityCheck {
        cell,
        point,
        second_singular_value: second,
        threshold,
        multiplicity,
    }
}

fn realization(field: &TorusField, lengths: &[f64]) -> Option<MetricGraph> {
    field.graph.with_lengths(lengths).ok()
}

/// Component labels of the smooth zero cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Components {
    pub count: usize,
    /// Label per cell, `None` for unlabeled cells.
    pub labels: Vec<Option<u32>>,
    /// Cells per component.
    pub sizes: Vec<usize>,
    /// The zero set of a one-dimensional torus is a finite point set and
    /// carries no component structure.
    pub degenerate: bool,
}

/// Union-find over face-adjacent smooth cells with wraparound.
pub fn connected_components(field: &TorusField) -> Components {
    let total = field.values.len();
    let mut uf = UnionFind::new(total);
    let smooth = |c: usize| field.states[c] == CellState::Smooth;
    for c in (0..total).filter(|&c| smooth(c)) {
        for axis in 0..field.dimension {
            let n = field.shifted(c, axis, 1);
            if smooth(n) {
                uf.union(c, n);
            }
        }
    }
    let mut root_label: HashMap<usize, u32> = HashMap::new();
    let mut labels = vec![None; total];
    let mut sizes = Vec::new();
    for c in (0..total).filter(|&c| smooth(c)) {
        let root = uf.find(c);
        let next = root_label.len() as u32;
        let label = *root_label.entry(root).or_insert(next);
        if label as usize == sizes.len() {
            sizes.push(0);
        }
        sizes[label as usize] += 1;
        labels[c] = Some(label);
    }
    Components {
        count: sizes.len(),
        labels,
        sizes,
        degenerate: field.dimension == 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Positive,
    Negative,
}

/// Common sign of the gradient components at the projection of each smooth
/// cell's centre onto the zero set.
pub fn gradient_sign_labels(field: &TorusField) -> Result<Vec<(usize, Sign)>> {
    let total = field.values.len();
    let cells: Vec<usize> = (0..total).filter(|&c| field.states[c] == CellState::Smooth).collect();
    let h = field.spacing();
    cells
        .par_iter()
        .map(|&c| {
            let centre: Vec<f64> = field.point(c).iter().map(|x| x + h / 2.0).collect();
            let p = project(&field.torus, centre, h);
            let grad = field.torus.gradient(&p, SIGN_STEP);
            let pos = grad.iter().any(|&x| x > SIGN_TOLERANCE);
            let neg = grad.iter().any(|&x| x < -SIGN_TOLERANCE);
            match (pos, neg) {
                (true, false) => Ok((c, Sign::Positive)),
                (false, true) => Ok((c, Sign::Negative)),
                _ => Err(Error::MixedSignAtSmoothCell { cell: c }),
            }
        })
        .collect()
}

/// Newton steps along the gradient towards `Phi = 0`, moving at most `h` in
/// total.
fn project(torus: &TorusFunction, mut p: Vec<f64>, h: f64) -> Vec<f64> {
    let start = p.clone();
    for _ in 0..8 {
        let v = torus.value(&p);
        let g = torus.gradient(&p, SIGN_STEP);
        let n2: f64 = g.iter().map(|x| x * x).sum();
        if n2 == 0.0 {
            break;
        }
        let q: Vec<f64> = p.iter().zip(&g).map(|(x, gi)| x - v * gi / n2).collect();
        let moved = q.iter().zip(&start).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if moved > h {
            break;
        }
        let done = (v.abs()) < 1e-14;
        p = q;
        if done {
            break;
        }
    }
    p
}

/// Fraction of labeled cells whose sign agrees with the majority sign of
/// their component, and whether distinct components of a two-component set
/// carry opposite signs.
#[derive(Debug, Clone, PartialEq)]
pub struct SignAgreement {
    pub agreeing: usize,
    pub labeled: usize,
    pub component_signs: Vec<Option<Sign>>,
}

impl SignAgreement {
    pub fn fraction(&self) -> f64 {
        if self.labeled == 0 {
            1.0
        } else {
            self.agreeing as f64 / self.labeled as f64
        }
    }
}

pub fn sign_agreement(components: &Components, signs: &[(usize, Sign)]) -> SignAgreement {
    let mut tally = vec![(0usize, 0usize); components.count];
    for &(c, s) in signs {
        if let Some(l) = components.labels[c] {
            match s {
                Sign::Positive => tally[l as usize].0 += 1,
                Sign::Negative => tally[l as usize].1 += 1,
            }
        }
    }
    let component_signs = tally
        .iter()
        .map(|&(p, n)| match (p, n) {
            (0, 0) => None,
            (p, n) if p >= n => Some(Sign::Positive),
            _ => Some(Sign::Negative),
        })
        .collect();
    SignAgreement {
        agreeing: tally.iter().map(|&(p, n)| p.max(n)).sum(),
        labeled: tally.iter().map(|&(p, n)| p + n).sum(),
        component_signs,
    }
}

/// Writes `kappa_1 .. kappa_E, Phi` rows.
pub fn write_field<W: Write>(field: &TorusField, out: &mut W) -> Result<()> {
    let header: Vec<String> = (1..=field.dimension).map(|i| format!("kappa{i}")).collect();
    writeln!(out, "{}\tphi", header.join("\t"))?;
    for i in 0..field.values.len() {
        let p: Vec<String> = field.point(i).iter().map(|x| format!("{x:.9e}")).collect();
        writeln!(out, "{}\t{:.12e}", p.join("\t"), field.values[i])?;
    }
    Ok(())
}

/// Triangulated zero set of a three-dimensional field.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    /// Triangles as vertex indices, grouped by component label; `None` is the
    /// unlabeled group.
    pub groups: Vec<(Option<u32>, Vec<[usize; 3]>)>,
}

impl Mesh {
    pub fn triangle_count(&self) -> usize {
        self.groups.iter().map(|(_, t)| t.len()).sum()
    }

    /// Plain polygon text: `v x y z`, `g name`, `f i j k` (1-based).
    pub fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        for v in &self.vertices {
            writeln!(out, "v {:.9} {:.9} {:.9}", v[0], v[1], v[2])?;
        }
        for (label, tris) in &self.groups {
            match label {
                Some(l) => writeln!(out, "g component_{l}")?,
                None => writeln!(out, "g unlabeled")?,
            }
            for t in tris {
                writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
            }
        }
        Ok(())
    }
}

/// Six tetrahedra sharing the main diagonal of the unit cube; corners are
/// bit masks over the three axes.
const TETRAHEDRA: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
    [0, 5, 1, 7],
];

/// Marching tetrahedra over the window `origin + [0, 2 pi)^3`. The origin is
/// rounded to the grid.
pub fn build_mesh(field: &TorusField, components: &Components, origin: [f64; 3]) -> Result<Mesh> {
    if field.dimension != 3 {
        return Err(Error::DimensionNot3(field.dimension));
    }
    let r = field.resolution as i64;
    let h = field.spacing();
    let shift: Vec<i64> = origin.iter().map(|o| (o / h).round() as i64).collect();
    let mut mesh = Mesh::default();
    let mut vertex_ids: HashMap<([i64; 3], [i64; 3]), usize> = HashMap::new();
    let mut groups: HashMap<Option<u32>, Vec<[usize; 3]>> = HashMap::new();

    let wrap = |p: [i64; 3]| -> usize {
        field.index(&[
            p[0].rem_euclid(r) as usize,
            p[1].rem_euclid(r) as usize,
            p[2].rem_euclid(r) as usize,
        ])
    };
    for cz in 0..r {
        for cy in 0..r {
            for cx in 0..r {
                let base = [cx + shift[0], cy + shift[1], cz + shift[2]];
                let cell = wrap(base);
                if !field.is_zero_cell(cell) {
                    continue;
                }
                let label = components.labels[cell];
                let corner = |m: usize| [base[0] + (m & 1) as i64, base[1] + (m >> 1 & 1) as i64, base[2] + (m >> 2 & 1) as i64];
                for tet in TETRAHEDRA {
                    let pts: Vec<[i64; 3]> = tet.iter().map(|&m| corner(m)).collect();
                    let vals: Vec<f64> = pts.iter().map(|&p| field.values[wrap(p)]).collect();
                    let inside: Vec<usize> = (0..4).filter(|&i| vals[i] < 0.0).collect();
                    let outside: Vec<usize> = (0..4).filter(|&i| vals[i] >= 0.0).collect();
                    let mut edge_vertex = |a: usize, b: usize| -> usize {
                        let (pa, pb) = if pts[a] <= pts[b] { (pts[a], pts[b]) } else { (pts[b], pts[a]) };
                        *vertex_ids.entry((pa, pb)).or_insert_with(|| {
                            let (va, vb) = (field.values[wrap(pa)], field.values[wrap(pb)]);
                            let t = if va == vb { 0.5 } else { (va / (va - vb)).clamp(0.0, 1.0) };
                            let pos = [0, 1, 2].map(|d| (pa[d] as f64 + t * (pb[d] - pa[d]) as f64) * h);
                            mesh.vertices.push(pos);
                            mesh.vertices.len() - 1
                        })
                    };
                    let tris: Vec<[usize; 3]> = match (inside.len(), outside.len()) {
                        (1, 3) | (3, 1) => {
                            let (lone, rest) = if inside.len() == 1 { (inside[0], &outside) } else { (outside[0], &inside) };
                            vec![[edge_vertex(lone, rest[0]), edge_vertex(lone, rest[1]), edge_vertex(lone, rest[2])]]
                        }
                        (2, 2) => {
                            let (a, b, c, d) = (inside[0], inside[1], outside[0], outside[1]);
                            let p = [edge_vertex(a, c), edge_vertex(a, d), edge_vertex(b, d), edge_vertex(b, c)];
                            vec![[p[0], p[1], p[2]], [p[0], p[2], p[3]]]
                        }
                        _ => Vec::new(),
                    };
                    groups.entry(label).or_default().extend(tris);
                }
            }
        }
    }
    let mut groups: Vec<(Option<u32>, Vec<[usize; 3]>)> = groups.into_iter().collect();
    groups.sort_by_key(|(l, _)| l.map_or(u64::MAX, |x| x as u64));
    mesh.groups = groups;
    Ok(mesh)
}

/// Builds the mesh and writes it to `path`.
pub fn export_mesh(field: &TorusField, components: &Components, path: impl AsRef<Path>, origin: [f64; 3]) -> Result<Mesh> {
    let mesh = build_mesh(field, components, origin)?;
    let file = std::fs::File::create(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    let mut out = std::io::BufWriter::new(file);
    mesh.write(&mut out)?;
    out.flush()?;
    Ok(mesh)
}
