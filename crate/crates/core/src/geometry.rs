//! Charts, fields, and pointwise linear algebra on metrics.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::expr::Expression;

pub type Point = Vec<f64>;

/// Default relative width of the zero-eigenvalue band.
pub const DEFAULT_ZERO_EIG_TOL: f64 = 1e-8;
/// Gram-Schmidt pivots below this M-norm are rejected.
pub const PIVOT_TOL: f64 = 1e-12;

const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 1000;

/// A coordinate chart with an axis-aligned box domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    coords: Vec<String>,
    domain: Vec<(f64, f64)>,
}

impl Chart {
    pub fn new<S: AsRef<str>>(coords: &[S], domain: &[(f64, f64)]) -> Result<Chart> {
        let coords: Vec<String> = coords.iter().map(|c| c.as_ref().to_owned()).collect();
        if coords.len() < 2 {
            return Err(Error::InvalidChart(format!(
                "dimension must be at least 2, got {}",
                coords.len()
            )));
        }
        if domain.len() != coords.len() {
            return Err(Error::DimensionMismatch {
                expected: coords.len(),
                found: domain.len(),
            });
        }
        for (i, name) in coords.iter().enumerate() {
            let valid = name
                .chars()
                .next()
                .is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
                && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
            if !valid {
                return Err(Error::InvalidChart(format!("bad coordinate name `{name}`")));
            }
            if coords[..i].contains(name) {
                return Err(Error::InvalidChart(format!(
                    "duplicate coordinate `{name}`"
                )));
            }
        }
        for (name, &(lo, hi)) in coords.iter().zip(domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!(
                    "interval [{lo}, {hi}] for `{name}` is degenerate"
                )));
            }
        }
        Ok(Chart {
            coords,
            domain: domain.to_vec(),
        })
    }

    /// `[-1, 1]^n` with the given coordinate names.
    pub fn unit_box<S: AsRef<str>>(coords: &[S]) -> Result<Chart> {
        Chart::new(coords, &vec![(-1.0, 1.0); coords.len()])
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim()
            && p.iter()
                .zip(&self.domain)
                .all(|(x, (lo, hi))| lo <= x && x <= hi)
    }

    pub fn parse(&self, source: &str) -> Result<Expression> {
        Ok(Expression::parse(source, &self.coords)?)
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        Ok(())
    }
}

/// Regular sampling grid on a chart's domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    chart: Chart,
    resolution: Vec<usize>,
}

impl Grid {
    pub fn new(chart: &Chart, resolution: &[usize]) -> Result<Grid> {
        if resolution.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: resolution.len(),
            });
        }
        if let Some(r) = resolution.iter().find(|&&r| r < 2) {
            return Err(Error::InvalidArgument(format!(
                "grid resolution must be at least 2 per axis, got {r}"
            )));
        }
        Ok(Grid {
            chart: chart.clone(),
            resolution: resolution.to_vec(),
        })
    }

    pub fn uniform(chart: &Chart, per_axis: usize) -> Result<Grid> {
        Grid::new(chart, &vec![per_axis; chart.dim()])
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of the `flat`-th node; the last axis varies fastest.
    pub fn index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.resolution.len()];
        for (slot, &r) in idx.iter_mut().zip(&self.resolution).rev() {
            *slot = flat % r;
            flat /= r;
        }
        idx
    }

    pub fn flat(&self, index: &[usize]) -> usize {
        index
            .iter()
            .zip(&self.resolution)
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    pub fn coordinate(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi) = self.chart.domain[axis];
        let last = self.resolution[axis] - 1;
        if k == last {
            hi
        } else {
            lo + (hi - lo) * k as f64 / last as f64
        }
    }

    pub fn point(&self, index: &[usize]) -> Point {
        index
            .iter()
            .enumerate()
            .map(|(axis, &k)| self.coordinate(axis, k))
            .collect()
    }

    /// All node coordinates in flat order.
    pub fn points(&self) -> Vec<Point> {
        (0..self.len())
            .map(|i| self.point(&self.index(i)))
            .collect()
    }
}

type ScalarFn = dyn Fn(&[Dual]) -> Result<Dual> + Send + Sync;

/// A scalar field on a chart: a parsed expression, a constant, or a closure
/// composed from other fields.
#[derive(Clone)]
pub enum ScalarField {
    Expr(Expression),
    Const(f64),
    Composed(Arc<ScalarFn>),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScalarField::Expr(e) => write!(f, "{e}"),
            ScalarField::Const(c) => write!(f, "{c}"),
            ScalarField::Composed(_) => write!(f, "<composed>"),
        }
    }
}

impl From<Expression> for ScalarField {
    fn from(e: Expression) -> Self {
        ScalarField::Expr(e)
    }
}

impl ScalarField {
    pub fn composed<F>(f: F) -> ScalarField
    where
        F: Fn(&[Dual]) -> Result<Dual> + Send + Sync + 'static,
    {
        ScalarField::Composed(Arc::new(f))
    }

    pub fn eval_at(&self, p: &[Dual]) -> Result<Dual> {
        match self {
            ScalarField::Expr(e) => e.eval_at(p),
            ScalarField::Const(c) => Ok(Dual::constant(*c)),
            ScalarField::Composed(f) => f(p),
        }
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64> {
        Ok(self.eval_at(&Dual::lift(p))?.value)
    }

    /// Value and gradient, padded to the point's dimension.
    pub fn eval_dual(&self, p: &[f64]) -> Result<Dual> {
        let mut d = self.eval_at(&Dual::seed(p))?;
        if d.gradient.is_empty() {
            d.gradient = vec![0.0; p.len()];
        }
        Ok(d)
    }

    pub fn scaled(&self, k: f64) -> ScalarField {
        match self {
            ScalarField::Const(c) => ScalarField::Const(c * k),
            other => {
                let inner = other.clone();
                ScalarField::composed(move |p| Ok(inner.eval_at(p)?.scale(k)))
            }
        }
    }

    pub fn offset(&self, k: f64) -> ScalarField {
        match self {
            ScalarField::Const(c) => ScalarField::Const(c + k),
            other => {
                let inner = other.clone();
                ScalarField::composed(move |p| Ok(inner.eval_at(p)?.add_const(k)))
            }
        }
    }
}

/// Symmetric matrix stored as its lower triangle, row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    n: usize,
    data: Vec<T>,
}

fn tri(i: usize, j: usize) -> usize {
    let (i, j) = if i >= j { (i, j) } else { (j, i) };
    i * (i + 1) / 2 + j
}

impl<T: Clone> SymMatrix<T> {
    /// `lower` holds `n(n+1)/2` entries in row order: (0,0), (1,0), (1,1), ...
    pub fn from_lower(n: usize, lower: Vec<T>) -> Result<Self> {
        if lower.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: lower.len(),
            });
        }
        Ok(SymMatrix { n, data: lower })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                data.push(f(i, j));
            }
        }
        SymMatrix { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[tri(i, j)]
    }

    pub fn lower(&self) -> &[T] {
        &self.data
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> SymMatrix<U> {
        SymMatrix {
            n: self.n,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl SymMatrix<f64> {
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| *self.get(i, j))
    }

    pub fn diag(values: &[f64]) -> Self {
        SymMatrix::from_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// `u^T M v`.
    pub fn pair(&self, u: &[f64], v: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += u[i] * self.get(i, j) * v[j];
            }
        }
        s
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn determinant(&self) -> f64 {
        determinant(&self.map(|&v| Dual::constant(v))).value
    }
}

impl SymMatrix<Dual> {
    pub fn values(&self) -> SymMatrix<f64> {
        self.map(|d| d.value)
    }
}

type MatrixFn = dyn Fn(&[Dual]) -> Result<SymMatrix<Dual>> + Send + Sync;

#[derive(Clone)]
enum MetricSource {
    Components(Vec<ScalarField>),
    Composed(Arc<MatrixFn>),
}

/// A symmetric (0,2)-tensor field on a chart. Symmetry holds by storage.
#[derive(Clone)]
pub struct MetricField {
    chart: Chart,
    source: MetricSource,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            MetricSource::Components(c) => write!(f, "MetricField({:?})", c),
            MetricSource::Composed(_) => write!(f, "MetricField(<composed>)"),
        }
    }
}

impl MetricField {
    /// `lower` holds the `n(n+1)/2` lower-triangular components in row order.
    pub fn from_lower(chart: &Chart, lower: Vec<ScalarField>) -> Result<MetricField> {
        let n = chart.dim();
        if lower.len() != n * (n + 1) / 2 {
            return Err(Error::DimensionMismatch {
                expected: n * (n + 1) / 2,
                found: lower.len(),
            });
        }
        Ok(MetricField {
            chart: chart.clone(),
            source: MetricSource::Components(lower),
        })
    }

    /// Parses a full `n x n` matrix of expression strings. The upper triangle
    /// must parse to the same trees as the lower one.
    pub fn parse<S: AsRef<str>>(chart: &Chart, rows: &[Vec<S>]) -> Result<MetricField> {
        let n = chart.dim();
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: rows.len(),
            });
        }
        let mut lower = Vec::with_capacity(n * (n + 1) / 2);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for j in 0..=i {
                let e = chart.parse(row[j].as_ref())?;
                let mirror = chart.parse(rows[j][i].as_ref())?;
                if e.root() != mirror.root() {
                    return Err(Error::InvalidArgument(format!(
                        "metric component ({i},{j}) `{}` differs from ({j},{i}) `{}`",
                        row[j].as_ref(),
                        rows[j][i].as_ref()
                    )));
                }
                lower.push(ScalarField::Expr(e));
            }
        }
        MetricField::from_lower(chart, lower)
    }

    /// Constant diagonal metric.
    pub fn constant_diag(chart: &Chart, diag: &[f64]) -> Result<MetricField> {
        if diag.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: diag.len(),
            });
        }
        let m = SymMatrix::diag(diag);
        MetricField::from_lower(
            chart,
            m.lower().iter().map(|&v| ScalarField::Const(v)).collect(),
        )
    }

    pub fn composed<F>(chart: &Chart, f: F) -> MetricField
    where
        F: Fn(&[Dual]) -> Result<SymMatrix<Dual>> + Send + Sync + 'static,
    {
        MetricField {
            chart: chart.clone(),
            source: MetricSource::Composed(Arc::new(f)),
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn eval_at(&self, p: &[Dual]) -> Result<SymMatrix<Dual>> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: p.len(),
            });
        }
        match &self.source {
            MetricSource::Components(c) => Ok(SymMatrix {
                n: self.dim(),
                data: c.iter().map(|f| f.eval_at(p)).collect::<Result<_>>()?,
            }),
            MetricSource::Composed(f) => f(p),
        }
    }

    /// Component matrix at `p`.
    pub fn evaluate(&self, p: &[f64]) -> Result<SymMatrix<f64>> {
        self.chart.check_point(p)?;
        let m = self.eval_at(&Dual::lift(p))?.values();
        if let Some(bad) = m.lower().iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain {
                node: format!("metric at {p:?}"),
                reason: if bad.is_nan() {
                    "component is NaN"
                } else {
                    "component is infinite"
                },
            });
        }
        Ok(m)
    }

    /// Components with their gradients at `p`.
    pub fn evaluate_dual(&self, p: &[f64]) -> Result<SymMatrix<Dual>> {
        self.chart.check_point(p)?;
        self.eval_at(&Dual::seed(p))
    }
}

/// A contravariant vector field.
#[derive(Clone, Debug)]
pub struct VectorField {
    chart: Chart,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(chart: &Chart, components: Vec<ScalarField>) -> Result<VectorField> {
        if components.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                expected: chart.dim(),
                found: components.len(),
            });
        }
        Ok(VectorField {
            chart: chart.clone(),
            components,
        })
    }

    pub fn parse<S: AsRef<str>>(chart: &Chart, components: &[S]) -> Result<VectorField> {
        let c = components
            .iter()
            .map(|s| Ok(ScalarField::Expr(chart.parse(s.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        VectorField::new(chart, c)
    }

    /// The coordinate vector field along `axis`.
    pub fn coordinate(chart: &Chart, axis: usize) -> VectorField {
        let components = (0..chart.dim())
            .map(|i| ScalarField::Const(if i == axis { 1.0 } else { 0.0 }))
            .collect();
        VectorField {
            chart: chart.clone(),
            components,
        }
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn eval_at(&self, p: &[Dual]) -> Result<Vec<Dual>> {
        self.components.iter().map(|c| c.eval_at(p)).collect()
    }

    pub fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.chart.check_point(p)?;
        let v: Vec<f64> = self
            .eval_at(&Dual::lift(p))?
            .into_iter()
            .map(|d| d.value)
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain {
                node: format!("vector field at {p:?}"),
                reason: "component is not finite",
            });
        }
        Ok(v)
    }

    pub fn scaled(&self, k: f64) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            components: self.components.iter().map(|c| c.scaled(k)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Covector(pub Vec<f64>);

impl Covector {
    pub fn apply(&self, v: &[f64]) -> f64 {
        self.0.iter().zip(v).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureReport {
    pub n_neg: usize,
    pub n_zero: usize,
    pub n_pos: usize,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub tol_used: f64,
}

impl SignatureReport {
    pub fn counts(&self) -> [usize; 3] {
        [self.n_neg, self.n_zero, self.n_pos]
    }

    pub fn is_lorentzian(&self) -> bool {
        self.n_neg == 1 && self.n_zero == 0
    }

    pub fn is_riemannian(&self) -> bool {
        self.n_neg == 0 && self.n_zero == 0
    }
}

pub fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Index lowering: `(v♭)_i = Σ_j g_ij v^j`.
pub fn flat(metric: &MetricField, p: &[f64], v: &[f64]) -> Result<Covector> {
    let g = metric.evaluate(p)?;
    if v.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: v.len(),
        });
    }
    Ok(Covector(g.mul_vec(v)))
}

/// Determinant and its differential at `p`.
pub fn metric_determinant(metric: &MetricField, p: &[f64]) -> Result<Dual> {
    let m = metric.evaluate_dual(p)?;
    let mut d = determinant(&m);
    if d.gradient.is_empty() {
        d.gradient = vec![0.0; p.len()];
    }
    Ok(d)
}

/// Dual-number determinant: cofactor expansion up to 4x4, partially pivoted
/// LU beyond.
pub fn determinant(m: &SymMatrix<Dual>) -> Dual {
    let n = m.dim();
    let dense: Vec<Vec<Dual>> = (0..n)
        .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
        .collect();
    if n <= 4 {
        let cols: Vec<usize> = (0..n).collect();
        cofactor(&dense, 0, &cols)
    } else {
        lu_determinant(dense)
    }
}

fn cofactor(a: &[Vec<Dual>], row: usize, cols: &[usize]) -> Dual {
    match cols.len() {
        0 => Dual::constant(1.0),
        1 => a[row][cols[0]].clone(),
        2 => {
            &(&a[row][cols[0]] * &a[row + 1][cols[1]]) - &(&a[row][cols[1]] * &a[row + 1][cols[0]])
        }
        _ => {
            let mut acc = Dual::constant(0.0);
            for (k, &c) in cols.iter().enumerate() {
                let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
                let term = &a[row][c] * &cofactor(a, row + 1, &rest);
                acc = if k % 2 == 0 { acc + term } else { acc - term };
            }
            acc
        }
    }
}

fn lu_determinant(mut a: Vec<Vec<Dual>>) -> Dual {
    let n = a.len();
    let mut det = Dual::constant(1.0);
    for k in 0..n {
        let pivot = (k..n)
            .max_by(|&i, &j| a[i][k].value.abs().total_cmp(&a[j][k].value.abs()))
            .unwrap_or(k);
        if a[pivot][k].value == 0.0 {
            // Rank-deficient in value; the derivative of det is the sum of
            // cofactor-weighted derivatives, fall back to expansion.
            let cols: Vec<usize> = (0..n - k).collect();
            let sub: Vec<Vec<Dual>> = a[k..].iter().map(|r| r[k..].to_vec()).collect();
            return det * cofactor(&sub, 0, &cols);
        }
        if pivot != k {
            a.swap(pivot, k);
            det = -det;
        }
        det = det * &a[k][k];
        for i in k + 1..n {
            let factor = &a[i][k] / &a[k][k];
            for j in k + 1..n {
                let t = &factor * &a[k][j];
                a[i][j] = &a[i][j] - &t;
            }
        }
    }
    det
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending with
/// matching eigenvector columns.
pub fn symmetric_eigen(m: &SymMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(m.to_dmatrix(), EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or(Error::EigenFailure)?;
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m.dim(), m.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::EigenFailure);
    }
    Ok((values, vectors))
}

/// Half-width of the zero band for a given spectrum.
pub fn zero_band(eigenvalues: &[f64], tol: f64) -> f64 {
    let max = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    tol * max.max(1.0)
}

pub fn classify_eigenvalues(eigenvalues: Vec<f64>, tol: f64) -> SignatureReport {
    let band = zero_band(&eigenvalues, tol);
    let mut report = SignatureReport {
        n_neg: 0,
        n_zero: 0,
        n_pos: 0,
        eigenvalues,
        tol_used: tol,
    };
    for &l in &report.eigenvalues {
        if l.abs() <= band {
            report.n_zero += 1;
        } else if l < 0.0 {
            report.n_neg += 1;
        } else {
            report.n_pos += 1;
        }
    }
    report
}

pub fn signature_of(m: &SymMatrix<f64>, tol: f64) -> Result<SignatureReport> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "zero-eigenvalue tolerance must be positive, got {tol}"
        )));
    }
    let (values, _) = symmetric_eigen(m)?;
    Ok(classify_eigenvalues(values, tol))
}

pub fn signature_at(metric: &MetricField, p: &[f64], tol: f64) -> Result<SignatureReport> {
    signature_of(&metric.evaluate(p)?, tol)
}

/// `{V̂, E_1, ..., E_{n-1}}` with `M(V̂,V̂) = -1`, `M(V̂,E_i) = 0`,
/// `M(E_i,E_j) = δ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timelike: Vec<f64>,
    pub spatial: Vec<Vec<f64>>,
}

impl Frame {
    pub fn vectors(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.timelike).chain(&self.spatial)
    }

    /// Gram matrix of the frame under `m`, timelike vector first.
    pub fn gram(&self, m: &SymMatrix<f64>) -> Vec<Vec<f64>> {
        let vs: Vec<&Vec<f64>> = self.vectors().collect();
        vs.iter()
            .map(|a| vs.iter().map(|b| m.pair(a, b)).collect())
            .collect()
    }
}

/// Orthonormalizes the coordinate basis against `V` with the indefinite
/// metric, taking the candidate of largest |M-norm| as each pivot.
pub fn orthonormal_frame(metric: &MetricField, p: &[f64], v: &[f64]) -> Result<Frame> {
    let m = metric.evaluate(p)?;
    orthonormal_frame_of(&m, v, p)
}

pub fn orthonormal_frame_of(m: &SymMatrix<f64>, v: &[f64], p: &[f64]) -> Result<Frame> {
    let n = m.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: v.len(),
        });
    }
    let sig = signature_of(m, DEFAULT_ZERO_EIG_TOL)?;
    if sig.n_zero > 0 {
        return Err(Error::DegenerateMetric { point: p.to_vec() });
    }
    let vv = m.pair(v, v);
    if !(vv < 0.0) {
        return Err(Error::NotTimelike { norm: vv });
    }
    let s = (-vv).sqrt();
    let timelike: Vec<f64> = v.iter().map(|x| x / s).collect();

    // Project V̂ out of each coordinate basis vector: w = e + M(e,V̂) V̂.
    let mv = m.mul_vec(&timelike);
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            let c = mv[k];
            (0..n)
                .map(|i| if i == k { 1.0 } else { 0.0 } + c * timelike[i])
                .collect()
        })
        .collect();

    let mut spatial = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let (best, norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, w)| (i, m.pair(w, w)))
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .ok_or(Error::PivotFailure { norm: 0.0 })?;
        if norm.abs() < PIVOT_TOL {
            return Err(Error::PivotFailure { norm });
        }
        if norm < 0.0 {
            // A second timelike direction means M is not Lorentzian.
            return Err(Error::NotTimelike { norm: vv });
        }
        let w = candidates.swap_remove(best);
        let scale = norm.sqrt();
        let e: Vec<f64> = w.iter().map(|x| x / scale).collect();
        let me = m.mul_vec(&e);
        for c in candidates.iter_mut() {
            let k = dot(&me, c);
            for (ci, ei) in c.iter_mut().zip(&e) {
                *ci -= k * ei;
            }
        }
        spatial.push(e);
    }
    Ok(Frame { timelike, spatial })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart2() -> Chart {
        Chart::unit_box(&["t", "x"]).unwrap()
    }

    fn metric(rows: &[[&str; 2]; 2]) -> MetricField {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        MetricField::parse(&chart2(), &rows).unwrap()
    }

    fn kriele() -> MetricField {
        metric(&[["x", "0"], ["0", "1"]])
    }

    fn minkowski() -> MetricField {
        MetricField::constant_diag(&chart2(), &[-1.0, 1.0]).unwrap()
    }

    #[test]
    fn chart_validation() {
        assert!(Chart::unit_box(&["t"]).is_err());
        assert!(Chart::new(&["t", "x"], &[(0.0, 1.0), (1.0, 1.0)]).is_err());
        assert!(Chart::unit_box(&["t", "t"]).is_err());
        assert!(Chart::unit_box(&["t", "2x"]).is_err());
    }

    #[test]
    fn grid_indexing() {
        let g = Grid::new(&chart2(), &[3, 5]).unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.index(7), vec![1, 2]);
        assert_eq!(g.flat(&[1, 2]), 7);
        assert_eq!(g.point(&[1, 2]), vec![0.0, 0.0]);
        assert_eq!(g.point(&[2, 4]), vec![1.0, 1.0]);
        assert!(Grid::new(&chart2(), &[1, 5]).is_err());
    }

    #[test]
    fn evaluate_kriele_and_minkowski() {
        assert_eq!(
            kriele().evaluate(&[0.0, 0.0]).unwrap(),
            SymMatrix::diag(&[0.0, 1.0])
        );
        assert_eq!(
            kriele().evaluate(&[0.0, -1.0]).unwrap(),
            SymMatrix::diag(&[-1.0, 1.0])
        );
        assert_eq!(
            minkowski().evaluate(&[0.4, -0.9]).unwrap(),
            SymMatrix::diag(&[-1.0, 1.0])
        );
    }

    #[test]
    fn asymmetric_input_rejected() {
        let rows = vec![vec!["x", "t"], vec!["0", "1"]];
        assert!(MetricField::parse(&chart2(), &rows).is_err());
    }

    #[test]
    fn flat_examples() {
        assert_eq!(
            flat(&minkowski(), &[0.0, 0.0], &[1.0, 0.0]).unwrap().0,
            vec![-1.0, 0.0]
        );
        assert_eq!(
            flat(&kriele(), &[0.2, 0.3], &[0.0, 0.0]).unwrap().0,
            vec![0.0, 0.0]
        );
        assert_eq!(
            flat(&kriele(), &[0.3, 0.0], &[1.0, 0.0]).unwrap().0,
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn determinant_examples() {
        let d = metric_determinant(&kriele(), &[5.0, 0.25]).unwrap();
        assert_eq!(d.value, 0.25);
        assert_eq!(d.gradient, vec![0.0, 1.0]);
        let d = metric_determinant(&minkowski(), &[0.1, 0.2]).unwrap();
        assert_eq!(d.value, -1.0);
        assert_eq!(d.gradient, vec![0.0, 0.0]);
        let d = metric_determinant(&metric(&[["t", "0"], ["0", "1"]]), &[0.0, 3.0]).unwrap();
        assert_eq!(d.value, 0.0);
        assert_eq!(d.gradient, vec![1.0, 0.0]);
    }

    #[test]
    fn lu_and_cofactor_agree() {
        let n = 5;
        let m = SymMatrix::from_fn(n, |i, j| {
            let mut d = Dual::variable(1.0 / (1.0 + i as f64 + j as f64), (i + j) % n, n);
            if i == j {
                d = d.add_const(2.0);
            }
            d
        });
        let lu = determinant(&m);
        let dense: Vec<Vec<Dual>> = (0..n)
            .map(|i| (0..n).map(|j| m.get(i, j).clone()).collect())
            .collect();
        let cf = cofactor(&dense, 0, &(0..n).collect::<Vec<_>>());
        assert!((lu.value - cf.value).abs() < 1e-12);
        for (a, b) in lu.gradient.iter().zip(&cf.gradient) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn lu_with_zero_pivot_column() {
        let m = SymMatrix::diag(&[0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.determinant(), 0.0);
    }

    #[test]
    fn signature_trichotomy_for_kriele() {
        let s = |x: f64| signature_at(&kriele(), &[0.0, x], 1e-8).unwrap().counts();
        assert_eq!(s(5.0), [0, 0, 2]);
        assert_eq!(s(-1.0), [1, 0, 1]);
        assert_eq!(s(0.0), [0, 1, 1]);
    }

    #[test]
    fn zero_band_is_relative() {
        let m = SymMatrix::diag(&[1e-7, 1e3]);
        // 1e-7 <= 1e-8 * 1e3
        assert_eq!(signature_of(&m, 1e-8).unwrap().counts(), [0, 1, 1]);
        let m = SymMatrix::diag(&[1e-7, 1.0]);
        assert_eq!(signature_of(&m, 1e-8).unwrap().counts(), [0, 0, 2]);
        assert!(signature_of(&m, 0.0).is_err());
    }

    #[test]
    fn frame_trivial() {
        let f = orthonormal_frame(&minkowski(), &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(f.timelike, vec![1.0, 0.0]);
        assert_eq!(f.spatial, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn frame_rescales_timelike() {
        let g = MetricField::constant_diag(&chart2(), &[-4.0, 1.0]).unwrap();
        let f = orthonormal_frame(&g, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(f.timelike, vec![0.5, 0.0]);
        assert_eq!(f.spatial, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn frame_for_boosted_vector() {
        let m = minkowski();
        let f = orthonormal_frame(&m, &[0.0, 0.0], &[2.0, 1.0]).unwrap();
        let gram = f.gram(&m.evaluate(&[0.0, 0.0]).unwrap());
        let expect = [[-1.0, 0.0], [0.0, 1.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((gram[i][j] - expect[i][j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn frame_errors() {
        let p = [0.0, 0.0];
        assert!(matches!(
            orthonormal_frame(&minkowski(), &p, &[0.0, 1.0]),
            Err(Error::NotTimelike { .. })
        ));
        assert!(matches!(
            orthonormal_frame(&kriele(), &p, &[1.0, 0.0]),
            Err(Error::DegenerateMetric { .. })
        ));
    }
}
