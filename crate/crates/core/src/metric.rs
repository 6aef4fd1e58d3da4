//! Finite metric spaces and exact Lipschitz constants.
//!
//! A [`MetricSpace`] stores the full pairwise distance matrix of `n` distinct
//! points. Lipschitz constants of real-valued functions are exact suprema
//! over all unordered pairs, with absolute difference as the output metric.

use std::f64::consts::PI;
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("metric space needs at least one point")]
    Empty,
    #[error("distance row {row} has {got} entries, expected {expected}")]
    NotSquare { row: usize, expected: usize, got: usize },
    #[error("declared n = {declared} but the distance matrix has {rows} rows")]
    CountMismatch { declared: usize, rows: usize },
    #[error("dist[{i}][{j}] is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("dist[{i}][{j}] is negative")]
    Negative { i: usize, j: usize },
    #[error("dist[{i}][{i}] must be zero")]
    NonzeroDiagonal { i: usize },
    #[error("distance matrix is not symmetric at pair ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("points {i} and {j} coincide (zero distance)")]
    DuplicatePoints { i: usize, j: usize },
    #[error("triangle inequality fails: dist[{i}][{j}] > dist[{i}][{k}] + dist[{k}][{j}]")]
    Triangle { i: usize, j: usize, k: usize },
    #[error("got {got} labels for {expected} points")]
    LabelCount { expected: usize, got: usize },
    #[error("embedding coordinate {index} is not finite")]
    NonFiniteCoordinate { index: usize },
    #[error("field has {got} values but the space has {expected} points")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("field value {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("function family is empty")]
    EmptyFamily,
    #[error("metric space JSON must contain either \"embedding\" or \"dist\"")]
    MissingRepresentation,
}

/// Points placed in a simple ambient space; distances follow from the coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "coords", rename_all = "lowercase")]
pub enum Embedding {
    /// Real line with absolute difference.
    Line(Vec<f64>),
    /// Angles in radians on the unit circle with arc-length distance.
    Circle(Vec<f64>),
    /// Points in the plane with Euclidean distance.
    Grid2d(Vec<[f64; 2]>),
}

impl Embedding {
    fn len(&self) -> usize {
        match self {
            Embedding::Line(c) | Embedding::Circle(c) => c.len(),
            Embedding::Grid2d(c) => c.len(),
        }
    }

    fn distance(&self, i: usize, j: usize) -> f64 {
        match self {
            Embedding::Line(c) => (c[i] - c[j]).abs(),
            Embedding::Circle(c) => {
                let d = (c[i] - c[j]).abs().rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d)
            }
            Embedding::Grid2d(c) => {
                let (dx, dy) = (c[i][0] - c[j][0], c[i][1] - c[j][1]);
                dx.hypot(dy)
            }
        }
    }

    fn check_finite(&self) -> Result<(), MetricError> {
        let bad = match self {
            Embedding::Line(c) | Embedding::Circle(c) => c.iter().position(|v| !v.is_finite()),
            Embedding::Grid2d(c) => c.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()),
        };
        match bad {
            Some(index) => Err(MetricError::NonFiniteCoordinate { index }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MetricSpaceRepr", into = "MetricSpaceRepr")]
pub struct MetricSpace {
    n: usize,
    dist: Vec<f64>,
    labels: Option<Vec<String>>,
    embedding: Option<Embedding>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricSpaceRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dist: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<Embedding>,
}

impl TryFrom<MetricSpaceRepr> for MetricSpace {
    type Error = MetricError;

    fn try_from(r: MetricSpaceRepr) -> Result<Self, Self::Error> {
        let space = match (r.embedding, r.dist) {
            (Some(e), _) => MetricSpace::from_embedding(e)?,
            (None, Some(d)) => {
                if let Some(declared) = r.n {
                    if declared != d.len() {
                        return Err(MetricError::CountMismatch { declared, rows: d.len() });
                    }
                }
                MetricSpace::from_matrix(d)?
            }
            (None, None) => return Err(MetricError::MissingRepresentation),
        };
        match r.labels {
            Some(l) => space.with_labels(l),
            None => Ok(space),
        }
    }
}

impl From<MetricSpace> for MetricSpaceRepr {
    fn from(s: MetricSpace) -> Self {
        match s.embedding {
            Some(e) => Self { n: None, dist: None, labels: s.labels, embedding: Some(e) },
            None => Self {
                n: Some(s.n),
                dist: Some(s.dist.chunks(s.n).map(<[f64]>::to_vec).collect()),
                labels: s.labels,
                embedding: None,
            },
        }
    }
}

impl MetricSpace {
    /// Validates every metric axiom, including the O(n³) triangle check.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = rows.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare { row, expected: n, got: r.len() });
            }
        }
        let dist: Vec<f64> = rows.into_iter().flatten().collect();
        let mut scale = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() {
                    return Err(MetricError::NonFinite { i, j });
                }
                if d < 0.0 {
                    return Err(MetricError::Negative { i, j });
                }
                scale = scale.max(d);
            }
        }
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(MetricError::NonzeroDiagonal { i });
            }
            for j in (i + 1)..n {
                if dist[i * n + j] != dist[j * n + i] {
                    return Err(MetricError::Asymmetric { i, j });
                }
                if dist[i * n + j] == 0.0 {
                    return Err(MetricError::DuplicatePoints { i, j });
                }
            }
        }
        let slack = 1e-12 * (1.0 + scale);
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if dist[i * n + j] > dist[i * n + k] + dist[k * n + j] + slack {
                        return Err(MetricError::Triangle { i, j, k });
                    }
                }
            }
        }
        Ok(Self { n, dist, labels: None, embedding: None })
    }

    /// Builds the distance matrix from coordinates. The triangle inequality
    /// holds by construction and is not re-checked.
    pub fn from_embedding(embedding: Embedding) -> Result<Self, MetricError> {
        let n = embedding.len();
        if n == 0 {
            return Err(MetricError::Empty);
        }
        embedding.check_finite()?;
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = embedding.distance(i, j);
                if d == 0.0 {
                    return Err(MetricError::DuplicatePoints { i, j });
                }
                dist[i * n + j] = d;
                dist[j * n + i] = d;
            }
        }
        Ok(Self { n, dist, labels: None, embedding: Some(embedding) })
    }

    pub fn line(coords: Vec<f64>) -> Result<Self, MetricError> {
        Self::from_embedding(Embedding::Line(coords))
    }

    /// `n` points at 0, 1, …, n−1.
    pub fn unit_line(n: usize) -> Self {
        Self::line((0..n).map(|i| i as f64).collect()).expect("unit line points are distinct")
    }

    pub fn circle(angles: Vec<f64>) -> Result<Self, MetricError> {
        Self::from_embedding(Embedding::Circle(angles))
    }

    /// `n` equally spaced points on the unit circle.
    pub fn regular_circle(n: usize) -> Self {
        Self::circle((0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect())
            .expect("equally spaced angles are distinct")
    }

    pub fn plane(points: Vec<[f64; 2]>) -> Result<Self, MetricError> {
        Self::from_embedding(Embedding::Grid2d(points))
    }

    /// `rows × cols` lattice with unit spacing, row-major.
    pub fn grid(rows: usize, cols: usize) -> Self {
        let pts = (0..rows)
            .flat_map(|r| (0..cols).map(move |c| [r as f64, c as f64]))
            .collect();
        Self::plane(pts).expect("lattice points are distinct")
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, MetricError> {
        if labels.len() != self.n {
            return Err(MetricError::LabelCount { expected: self.n, got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.n..(i + 1) * self.n]
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn embedding(&self) -> Option<&Embedding> {
        self.embedding.as_ref()
    }

    pub fn max_distance(&self) -> f64 {
        self.dist.iter().copied().fold(0.0, f64::max)
    }

    /// Relabels points: new point `i` is old point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        assert_eq!(perm.len(), n, "permutation length must equal n");
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = self.dist(perm[i], perm[j]);
            }
        }
        Self {
            n,
            dist,
            labels: self.labels.as_ref().map(|l| perm.iter().map(|&p| l[p].clone()).collect()),
            embedding: None,
        }
    }
}

/// A real value per point of some metric space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Result<Self, MetricError> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(MetricError::NonFiniteValue { index });
        }
        Ok(Self(values))
    }

    pub fn on(space: &MetricSpace, values: Vec<f64>) -> Result<Self, MetricError> {
        if values.len() != space.len() {
            return Err(MetricError::DimensionMismatch { expected: space.len(), got: values.len() });
        }
        Self::new(values)
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

impl TryFrom<Vec<f64>> for ScalarField {
    type Error = MetricError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<ScalarField> for Vec<f64> {
    fn from(f: ScalarField) -> Self {
        f.0
    }
}

impl Deref for ScalarField {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub constant: f64,
    /// Pair attaining the supremum; `(0, 0)` on a one-point space.
    pub witness: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformLipschitzReport {
    pub constant: f64,
    /// Index of the family member attaining the supremum.
    pub member: usize,
    pub witness: (usize, usize),
}

/// Exact `max_{i<j} |f(i) − f(j)| / d(i, j)`.
///
/// A one-point space has no pairs and reports 0.
pub fn lipschitz_constant(f: &[f64], space: &MetricSpace) -> Result<LipschitzReport, MetricError> {
    let n = space.len();
    if f.len() != n {
        return Err(MetricError::DimensionMismatch { expected: n, got: f.len() });
    }
    if let Some(index) = f.iter().position(|v| !v.is_finite()) {
        return Err(MetricError::NonFiniteValue { index });
    }
    let mut best = LipschitzReport { constant: 0.0, witness: (0, if n > 1 { 1 } else { 0 }) };
    for i in 0..n {
        let row = space.row(i);
        for j in (i + 1)..n {
            let ratio = (f[i] - f[j]).abs() / row[j];
            if ratio > best.constant {
                best = LipschitzReport { constant: ratio, witness: (i, j) };
            }
        }
    }
    Ok(best)
}

/// Largest per-member Lipschitz constant over a nonempty family.
pub fn uniform_lipschitz_constant<F: AsRef<[f64]>>(
    family: &[F],
    space: &MetricSpace,
) -> Result<UniformLipschitzReport, MetricError> {
    if family.is_empty() {
        return Err(MetricError::EmptyFamily);
    }
    let mut best: Option<UniformLipschitzReport> = None;
    for (member, f) in family.iter().enumerate() {
        let r = lipschitz_constant(f.as_ref(), space)?;
        if best.is_none_or(|b| r.constant > b.constant) {
            best = Some(UniformLipschitzReport { constant: r.constant, member, witness: r.witness });
        }
    }
    Ok(best.expect("family is nonempty"))
}

impl AsRef<[f64]> for ScalarField {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}
