//! Symmetry-adapted generator bases of su(N).
//!
//! Given a Hermitian symmetry operator `Q`, [`sector_decompose`] groups its
//! spectrum into eigenvalue sectors and [`build_qbasis`] builds an
//! orthonormal Hermitian basis of su(N) in which every generator lives in
//! exactly one of three classes:
//!
//! * `Cartan`: diagonal in the eigenbasis of `Q`,
//! * `Within(q)`: off-diagonal, supported inside the `q` eigenspace block,
//! * `Ladder(q -> q')`: off-diagonal, connecting blocks `q` and `q'`.
//!
//! The Cartan elements are chosen sector-adapted: `S - 1` "center" elements
//! built from sector projectors plus `d_q - 1` traceless diagonals inside each
//! sector. Any unitary commuting with `Q` maps the span of a sector's internal
//! Cartan and `Within(q)` generators into itself, fixes the center elements
//! and maps each `Ladder(q, q')` class into itself; those invariant groups
//! are exposed as [`Block`].

use std::fmt;
use std::ops::Range;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    hermitian_eigen, hs_coefficient, hs_norm, is_hermitian, max_abs, CMatrix, SuperOp,
};

/// Q's spectrum grouped into sectors of (numerically) equal eigenvalues.
#[derive(Debug, Clone)]
pub struct SectorSpectrum {
    /// Sector eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    /// Unitary whose columns are the eigenvectors of Q, grouped by sector.
    pub transform: CMatrix,
    pub grouping_tol: f64,
    /// Ambiguous clustering decisions, if any.
    pub warnings: Vec<String>,
}

impl SectorSpectrum {
    pub fn dim(&self) -> usize {
        self.transform.nrows()
    }

    pub fn sector_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Column ranges of each sector inside `transform`.
    pub fn ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.multiplicities
            .iter()
            .map(|&d| {
                let r = start..start + d;
                start += d;
                r
            })
            .collect()
    }

    /// Sector index of an eigenbasis position.
    pub fn sector_of(&self, index: usize) -> usize {
        let mut acc = 0;
        for (s, &d) in self.multiplicities.iter().enumerate() {
            acc += d;
            if index < acc {
                return s;
            }
        }
        panic!("index {index} outside a {}-dimensional space", self.dim());
    }

    /// Sector whose eigenvalue is closest to `q`.
    pub fn sector_index(&self, q: f64) -> usize {
        self.eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - q).abs().total_cmp(&(b.1 - q).abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }

    /// Largest sector (ties resolved towards the larger eigenvalue).
    pub fn largest_sector(&self) -> usize {
        let mut best = 0;
        for (s, &d) in self.multiplicities.iter().enumerate() {
            if d >= self.multiplicities[best] {
                best = s;
            }
        }
        best
    }

    /// Orthogonal projector onto a sector, in the computational basis.
    pub fn projector(&self, sector: usize) -> CMatrix {
        let range = self.ranges()[sector].clone();
        let cols = self.transform.columns(range.start, range.len());
        &cols * cols.adjoint()
    }

    /// `V^dag a V`: an operator expressed in Q's eigenbasis.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.transform.adjoint() * a * &self.transform
    }

    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.transform * a * self.transform.adjoint()
    }
}

pub fn default_grouping_tol(max_abs_eigenvalue: f64) -> f64 {
    (1e-8 * max_abs_eigenvalue).max(1e-12)
}

/// Diagonalise `q` and cluster its eigenvalues into sectors.
///
/// `grouping_tol = None` selects `1e-8 * max|lambda(Q)|`.
pub fn sector_decompose(q: &CMatrix, grouping_tol: Option<f64>) -> Result<SectorSpectrum> {
    let eig = hermitian_eigen(q)?;
    let n = q.nrows();
    let scale = eig.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = grouping_tol.unwrap_or_else(|| default_grouping_tol(scale));

    let mut warnings = Vec::new();
    let mut groups: Vec<Vec<usize>> = vec![vec![0]];
    for k in 1..n {
        let gap = eig.values[k] - eig.values[k - 1];
        if gap > 0.5 * tol && gap < 2.0 * tol {
            warnings.push(format!(
                "eigenvalues {} and {} are {gap:e} apart, close to grouping_tol {tol:e}; {}",
                eig.values[k - 1],
                eig.values[k],
                if gap > tol { "kept separate" } else { "merged" }
            ));
        }
        if gap > tol {
            groups.push(vec![k]);
        } else {
            groups.last_mut().unwrap().push(k);
        }
    }

    let mut transform = eig.vectors.clone();
    let mut eigenvalues = Vec::with_capacity(groups.len());
    let mut multiplicities = Vec::with_capacity(groups.len());
    for g in &groups {
        let vals: Vec<f64> = g.iter().map(|&k| eig.values[k]).collect();
        let spread = vals.last().unwrap() - vals[0];
        if spread > tol {
            warnings.push(format!("sector around {} spreads over {spread:e} > grouping_tol", vals[0]));
        }
        eigenvalues.push(vals.iter().sum::<f64>() / vals.len() as f64);
        multiplicities.push(g.len());
        stabilize_block(&mut transform, g[0], g.len());
    }

    Ok(SectorSpectrum { eigenvalues, multiplicities, transform, grouping_tol: tol, warnings })
}

/// Modified Gram-Schmidt on a block of columns followed by a phase convention:
/// the largest-magnitude component of each column is made real positive.
fn stabilize_block(v: &mut CMatrix, start: usize, len: usize) {
    for j in start..start + len {
        for i in start..j {
            let proj: Complex64 = v.column(i).dotc(&v.column(j));
            let ci = v.column(i).clone_owned();
            let mut cj = v.column_mut(j);
            cj -= ci * proj;
        }
        let norm = v.column(j).norm();
        v.column_mut(j).unscale_mut(norm);
        let col = v.column(j);
        let max = col.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let pivot = col.iter().position(|z| z.norm() >= max * (1.0 - 1e-9)).unwrap_or(0);
        let phase = col[pivot].conj() / col[pivot].norm();
        for z in v.column_mut(j).iter_mut() {
            *z *= phase;
        }
    }
}

/// Real or imaginary off-diagonal partner of a generator pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    /// `(E_ab + E_ba) / sqrt 2`
    Symmetric,
    /// `i (E_ab - E_ba) / sqrt 2`
    Antisymmetric,
}

/// Per-generator tag. Indices `a`, `b` refer to positions in Q's eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Label {
    /// Diagonal generator; `sector: None` marks the sector-projector combinations.
    Cartan { sector: Option<usize>, index: usize },
    Within { sector: usize, a: usize, b: usize, part: Part },
    Ladder { from: usize, to: usize, a: usize, b: usize, part: Part },
}

/// Coarse class used for classification and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum LabelClass {
    Cartan,
    Within { sector: usize },
    Ladder { from: usize, to: usize },
}

/// Subspaces left invariant by the adjoint action of any unitary commuting with Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "block", rename_all = "snake_case")]
pub enum Block {
    Center,
    Sector { sector: usize },
    Transition { from: usize, to: usize },
}

impl Label {
    pub fn class(&self) -> LabelClass {
        match *self {
            Label::Cartan { .. } => LabelClass::Cartan,
            Label::Within { sector, .. } => LabelClass::Within { sector },
            Label::Ladder { from, to, .. } => LabelClass::Ladder { from, to },
        }
    }

    pub fn block(&self) -> Block {
        match *self {
            Label::Cartan { sector: None, .. } => Block::Center,
            Label::Cartan { sector: Some(s), .. } | Label::Within { sector: s, .. } => {
                Block::Sector { sector: s }
            }
            Label::Ladder { from, to, .. } => Block::Transition { from, to },
        }
    }

    pub fn is_ladder(&self) -> bool {
        matches!(self, Label::Ladder { .. })
    }

    /// Generators commuting with Q.
    pub fn in_centralizer(&self) -> bool {
        !self.is_ladder()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = |part: &Part| if *part == Part::Symmetric { "x" } else { "y" };
        match self {
            Label::Cartan { sector: None, index } => write!(f, "H{index}"),
            Label::Cartan { sector: Some(s), index } => write!(f, "H[{s}]{index}"),
            Label::Within { sector, a, b, part } => write!(f, "W[{sector}]{}{a}{b}", p(part)),
            Label::Ladder { from, to, a, b, part } => write!(f, "L[{from}>{to}]{}{a}{b}", p(part)),
        }
    }
}

/// Orthonormal Hermitian traceless basis of su(N) adapted to Q's sectors.
#[derive(Debug, Clone)]
pub struct QBasis {
    pub spectrum: SectorSpectrum,
    /// `elements[0]` is `1/sqrt(N)`; `elements[1..]` are the generators.
    elements: Vec<CMatrix>,
    pub labels: Vec<Label>,
    /// `q' - q` for ladder generators, 0 otherwise.
    pub root_projection: Vec<f64>,
}

impl QBasis {
    pub fn dim(&self) -> usize {
        self.spectrum.dim()
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.elements[1..]
    }

    pub fn generator(&self, i: usize) -> &CMatrix {
        &self.elements[i + 1]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Normalised identity followed by the generators: the Liouville basis.
    pub fn liouville_basis(&self) -> &[CMatrix] {
        &self.elements
    }

    /// Generator coefficients `Tr(x_i a)` of a Hermitian operator.
    pub fn coefficients(&self, a: &CMatrix) -> Vec<f64> {
        self.generators().iter().map(|x| hs_coefficient(x, a)).collect()
    }

    pub fn superop<F>(&self, map: F) -> Result<SuperOp>
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        SuperOp::from_map(map, &self.elements)
    }

    pub fn to_liouville(&self, rho: &CMatrix) -> DVector<f64> {
        crate::operator::to_liouville_vector(rho, &self.elements)
    }

    pub fn from_liouville(&self, v: &DVector<f64>) -> CMatrix {
        crate::operator::from_liouville_vector(v, &self.elements)
    }

    /// Generator indices grouped by invariant block, in first-appearance order.
    pub fn blocks(&self) -> Vec<(Block, Vec<usize>)> {
        let mut out: Vec<(Block, Vec<usize>)> = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            let b = l.block();
            match out.iter_mut().find(|(k, _)| *k == b) {
                Some((_, v)) => v.push(i),
                None => out.push((b, vec![i])),
            }
        }
        out
    }

    pub fn classes(&self) -> Vec<(LabelClass, Vec<usize>)> {
        let mut out: Vec<(LabelClass, Vec<usize>)> = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            let c = l.class();
            match out.iter_mut().find(|(k, _)| *k == c) {
                Some((_, v)) => v.push(i),
                None => out.push((c, vec![i])),
            }
        }
        out
    }
}

/// Build the Q-basis: generators constructed in Q's eigenbasis and rotated
/// back by the sector transform.
pub fn build_qbasis(spec: &SectorSpectrum) -> QBasis {
    let n = spec.dim();
    let v = &spec.transform;
    let ranges = spec.ranges();
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;

    let mut elements = vec![CMatrix::identity(n, n) / Complex64::new((n as f64).sqrt(), 0.0)];
    let mut labels = Vec::new();
    let mut roots = Vec::new();

    // Weighted diagonal in the eigenbasis -> V diag(w) V^dag.
    let diagonal = |weights: &[f64]| -> CMatrix {
        let mut scaled = v.clone();
        for (j, &w) in weights.iter().enumerate() {
            for z in scaled.column_mut(j).iter_mut() {
                *z *= w;
            }
        }
        scaled * v.adjoint()
    };

    // Center elements from sector projectors.
    let mut below = 0usize;
    for (k, r) in ranges.iter().enumerate() {
        let d = r.len();
        if k > 0 {
            let norm = ((d * below * (below + d)) as f64).sqrt();
            let mut w = vec![0.0; n];
            for (s, rr) in ranges.iter().enumerate().take(k + 1) {
                let val = if s == k { below as f64 } else { -(d as f64) };
                for j in rr.clone() {
                    w[j] = val / norm;
                }
            }
            elements.push(diagonal(&w));
            labels.push(Label::Cartan { sector: None, index: k - 1 });
            roots.push(0.0);
        }
        below += d;
    }

    // Sector-internal diagonals (generalised Gell-Mann within each block).
    for (s, r) in ranges.iter().enumerate() {
        for k in 1..r.len() {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut w = vec![0.0; n];
            for m in 0..k {
                w[r.start + m] = -1.0 / norm;
            }
            w[r.start + k] = k as f64 / norm;
            elements.push(diagonal(&w));
            labels.push(Label::Cartan { sector: Some(s), index: k - 1 });
            roots.push(0.0);
        }
    }

    // Off-diagonal pair (a, b) -> symmetric and antisymmetric generators.
    let pair = |a: usize, b: usize| -> (CMatrix, CMatrix) {
        let va = v.column(a);
        let vb = v.column(b);
        let ab = va * vb.adjoint(); // V E_ab V^dag
        let ba = ab.adjoint();
        let x = (&ab + &ba) * Complex64::new(inv_sqrt2, 0.0);
        let y = (&ab - &ba) * Complex64::new(0.0, inv_sqrt2);
        (x, y)
    };

    for (s, r) in ranges.iter().enumerate() {
        for a in r.clone() {
            for b in a + 1..r.end {
                let (x, y) = pair(a, b);
                elements.push(x);
                labels.push(Label::Within { sector: s, a, b, part: Part::Symmetric });
                elements.push(y);
                labels.push(Label::Within { sector: s, a, b, part: Part::Antisymmetric });
                roots.extend([0.0, 0.0]);
            }
        }
    }

    for (s, rs) in ranges.iter().enumerate() {
        for (t, rt) in ranges.iter().enumerate().skip(s + 1) {
            let delta = spec.eigenvalues[t] - spec.eigenvalues[s];
            for a in rs.clone() {
                for b in rt.clone() {
                    let (x, y) = pair(a, b);
                    elements.push(x);
                    labels.push(Label::Ladder { from: s, to: t, a, b, part: Part::Symmetric });
                    elements.push(y);
                    labels.push(Label::Ladder { from: s, to: t, a, b, part: Part::Antisymmetric });
                    roots.extend([delta, delta]);
                }
            }
        }
    }

    debug_assert_eq!(labels.len(), n * n - 1);
    QBasis { spectrum: spec.clone(), elements, labels, root_projection: roots }
}

/// Label counts of the centralizer and its complement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralizerDims {
    /// Cartan plus all `Within` generators.
    pub n_centralizer: usize,
    /// `(q, N_q)` with `N_q` the number of `Within(q)` generators.
    pub per_sector: Vec<(f64, usize)>,
    /// `(q, q', N_qq')` with `N_qq'` the number of `Ladder(q -> q')` generators.
    pub per_pair: Vec<(f64, f64, usize)>,
}

impl CentralizerDims {
    pub fn within(&self, sector: usize) -> usize {
        self.per_sector[sector].1
    }

    /// Ladder counts for all pairs involving `sector`.
    pub fn ladders_touching(&self, spec: &SectorSpectrum, sector: usize) -> Vec<usize> {
        let q = spec.eigenvalues[sector];
        self.per_pair
            .iter()
            .filter(|(a, b, _)| *a == q || *b == q)
            .map(|p| p.2)
            .collect()
    }
}

pub fn centralizer_dims(basis: &QBasis) -> CentralizerDims {
    let spec = &basis.spectrum;
    let s = spec.sector_count();
    let mut per_sector = vec![0usize; s];
    let mut per_pair = vec![vec![0usize; s]; s];
    let mut cartan = 0;
    for l in &basis.labels {
        match *l {
            Label::Cartan { .. } => cartan += 1,
            Label::Within { sector, .. } => per_sector[sector] += 1,
            Label::Ladder { from, to, .. } => per_pair[from][to] += 1,
        }
    }
    let n_centralizer = cartan + per_sector.iter().sum::<usize>();
    let mut pairs = Vec::new();
    for a in 0..s {
        for b in a + 1..s {
            pairs.push((spec.eigenvalues[a], spec.eigenvalues[b], per_pair[a][b]));
        }
    }
    CentralizerDims {
        n_centralizer,
        per_sector: spec.eigenvalues.iter().copied().zip(per_sector).collect(),
        per_pair: pairs,
    }
}

/// HS weight of an operator on each label class.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorSupport {
    /// `(class, fraction of ||x||^2)` for every class with any generator.
    pub weights: Vec<(LabelClass, f64)>,
    /// Norm of the ladder component.
    pub ladder_norm: f64,
    pub norm: f64,
    pub symmetry_preserving: bool,
}

impl SectorSupport {
    pub fn weight(&self, class: LabelClass) -> f64 {
        self.weights.iter().find(|(c, _)| *c == class).map(|w| w.1).unwrap_or(0.0)
    }

    pub fn ladder_weight(&self) -> f64 {
        self.weights
            .iter()
            .filter(|(c, _)| matches!(c, LabelClass::Ladder { .. }))
            .map(|w| w.1)
            .sum()
    }
}

/// Project a traceless Hermitian operator onto the label classes.
///
/// The operator is declared symmetry preserving when its ladder component has
/// norm at most `tol * ||x||`.
pub fn classify_operator(x: &CMatrix, basis: &QBasis, tol: f64) -> Result<SectorSupport> {
    if x.nrows() != basis.dim() || !x.is_square() {
        return Err(Error::DimensionMismatch { expected: basis.dim(), found: x.nrows() });
    }
    if !is_hermitian(x) {
        return Err(Error::NotHermitian { deviation: crate::operator::hermiticity_deviation(x) });
    }
    let coeffs = basis.coefficients(x);
    let norm = hs_norm(x);
    let norm2 = (norm * norm).max(1e-300);
    let mut weights = Vec::new();
    let mut ladder2 = 0.0;
    for (class, idx) in basis.classes() {
        let w: f64 = idx.iter().map(|&i| coeffs[i] * coeffs[i]).sum();
        if matches!(class, LabelClass::Ladder { .. }) {
            ladder2 += w;
        }
        weights.push((class, w / norm2));
    }
    let ladder_norm = ladder2.sqrt();
    Ok(SectorSupport { weights, ladder_norm, norm, symmetry_preserving: ladder_norm <= tol * norm })
}

/// Magnitudes of one off-sector block of a density matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OffSectorBlock {
    pub from: usize,
    pub to: usize,
    pub max: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPopulations {
    pub populations: Vec<f64>,
    pub off_sector: Vec<OffSectorBlock>,
    /// Largest off-diagonal magnitude inside each sector block.
    pub within_coherence: Vec<f64>,
}

impl BlockPopulations {
    pub fn max_off_sector(&self) -> f64 {
        self.off_sector.iter().fold(0.0, |m, b| m.max(b.max))
    }

    /// Largest magnitude among off-sector blocks not touching `sector`.
    pub fn max_off_sector_excluding(&self, sector: usize) -> f64 {
        self.off_sector
            .iter()
            .filter(|b| b.from != sector && b.to != sector)
            .fold(0.0, |m, b| m.max(b.max))
    }
}

/// Sector populations and off-sector coherences of a density matrix.
pub fn block_populations(rho: &CMatrix, spec: &SectorSpectrum) -> Result<BlockPopulations> {
    if rho.nrows() != spec.dim() || !rho.is_square() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), found: rho.nrows() });
    }
    let trace = rho.trace();
    if (trace.re - 1.0).abs() > 1e-8 || trace.im.abs() > 1e-8 {
        return Err(Error::NonUnitTrace { trace: trace.re });
    }
    let r = spec.to_eigenbasis(rho);
    let ranges = spec.ranges();
    let populations = ranges.iter().map(|rg| rg.clone().map(|k| r[(k, k)].re).sum()).collect();
    let within_coherence = ranges
        .iter()
        .map(|rg| {
            let mut m = 0.0f64;
            for a in rg.clone() {
                for b in rg.clone() {
                    if a != b {
                        m = m.max(r[(a, b)].norm());
                    }
                }
            }
            m
        })
        .collect();
    let mut off_sector = Vec::new();
    for (s, rs) in ranges.iter().enumerate() {
        for (t, rt) in ranges.iter().enumerate().skip(s + 1) {
            let mut max = 0.0f64;
            let mut total = 0.0;
            for a in rs.clone() {
                for b in rt.clone() {
                    let z = r[(a, b)].norm();
                    max = max.max(z);
                    total += z;
                }
            }
            off_sector.push(OffSectorBlock { from: s, to: t, max, total });
        }
    }
    Ok(BlockPopulations { populations, off_sector, within_coherence })
}

/// Sector eigenvalue and multiplicity, as serialised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorEntry {
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

/// One generator in the JSON schema: complex entries as `[re, im]` pairs,
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEntry {
    pub name: String,
    pub label: Label,
    pub root_projection: f64,
    pub matrix: Vec<Vec<[f64; 2]>>,
}

/// JSON document describing a Q-basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QBasisDocument {
    pub dim: usize,
    pub sectors: Vec<SectorEntry>,
    pub transform: Vec<Vec<[f64; 2]>>,
    pub generators: Vec<GeneratorEntry>,
}

pub fn matrix_to_pairs(a: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| [a[(i, j)].re, a[(i, j)].im]).collect())
        .collect()
}

pub fn pairs_to_matrix(rows: &[Vec<[f64; 2]>]) -> Result<CMatrix> {
    let n = rows.len();
    let mut out = CMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        for (j, p) in row.iter().enumerate() {
            out[(i, j)] = Complex64::new(p[0], p[1]);
        }
    }
    Ok(out)
}

impl QBasis {
    pub fn to_document(&self) -> QBasisDocument {
        QBasisDocument {
            dim: self.dim(),
            sectors: self
                .spectrum
                .eigenvalues
                .iter()
                .zip(&self.spectrum.multiplicities)
                .map(|(&eigenvalue, &multiplicity)| SectorEntry { eigenvalue, multiplicity })
                .collect(),
            transform: matrix_to_pairs(&self.spectrum.transform),
            generators: self
                .labels
                .iter()
                .zip(self.generators())
                .zip(&self.root_projection)
                .map(|((l, g), &r)| GeneratorEntry {
                    name: l.to_string(),
                    label: *l,
                    root_projection: r,
                    matrix: matrix_to_pairs(g),
                })
                .collect(),
        }
    }

    /// Rebuild a basis from its JSON document, checking orthonormality.
    pub fn from_document(doc: &QBasisDocument) -> Result<QBasis> {
        let transform = pairs_to_matrix(&doc.transform)?;
        let spectrum = SectorSpectrum {
            eigenvalues: doc.sectors.iter().map(|s| s.eigenvalue).collect(),
            multiplicities: doc.sectors.iter().map(|s| s.multiplicity).collect(),
            transform,
            grouping_tol: 0.0,
            warnings: Vec::new(),
        };
        let n = doc.dim;
        let mut elements = vec![CMatrix::identity(n, n) / Complex64::new((n as f64).sqrt(), 0.0)];
        for g in &doc.generators {
            elements.push(pairs_to_matrix(&g.matrix)?);
        }
        let basis = QBasis {
            spectrum,
            elements,
            labels: doc.generators.iter().map(|g| g.label).collect(),
            root_projection: doc.generators.iter().map(|g| g.root_projection).collect(),
        };
        let dev = orthonormality_deviation(&basis);
        if dev > 1e-10 {
            return Err(Error::Invariant(format!("basis document not orthonormal ({dev:e})")));
        }
        Ok(basis)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(s: &str) -> Result<QBasis> {
        QBasis::from_document(&serde_json::from_str(s)?)
    }
}

/// `max |Tr(x_i^dag x_j) - delta_ij|` over the generators.
pub fn orthonormality_deviation(basis: &QBasis) -> f64 {
    let g = basis.generators();
    let mut dev = 0.0f64;
    for i in 0..g.len() {
        for j in i..g.len() {
            let ip = crate::operator::hs_inner_unchecked(&g[i], &g[j]);
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((ip - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// `max |[Q, x +- i y] -+ delta (x +- i y)|` over all ladder pairs.
pub fn ladder_relation_deviation(basis: &QBasis, q: &CMatrix) -> f64 {
    let mut dev = 0.0f64;
    let scale = max_abs(q).max(1.0);
    for (i, l) in basis.labels.iter().enumerate() {
        if let Label::Ladder { part: Part::Symmetric, .. } = l {
            let x = basis.generator(i);
            let y = basis.generator(i + 1);
            let delta = basis.root_projection[i];
            for sign in [1.0, -1.0] {
                let z = x + y * Complex64::new(0.0, sign);
                let lhs = q * &z - &z * q;
                let rhs = &z * Complex64::new(sign * delta, 0.0);
                dev = dev.max(max_abs(&(lhs - rhs)) / scale);
            }
        }
    }
    dev
}
