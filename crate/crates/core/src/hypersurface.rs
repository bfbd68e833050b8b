//! The degeneracy hypersurface `H = {det g̃ = 0}` and the structure of `g̃`
//! on it: the radical, its position relative to `T_qH`, and the induced
//! metric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{
    dot, euclidean_norm, metric_determinant, signature_of, symmetric_eigen, zero_band, Grid,
    MetricField, Point, SignatureReport, SymMatrix, DEFAULT_ZERO_EIG_TOL,
};
use crate::transform::{transform, Triple};

/// Grid nodes with `|det| ≤ ON_H_TOL` are taken as points of `H`.
pub const ON_H_TOL: f64 = 1e-10;
/// `‖d(det)‖` at or below this is treated as zero.
pub const GRADIENT_ZERO_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 60;
pub const BISECTION_COORD_TOL: f64 = 1e-12;
/// Random draws closer than this to the radical line are discarded.
pub const MIN_OFF_RADICAL_NORM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HypersurfaceOptions {
    /// Relative zero-eigenvalue band.
    pub zero_eig: f64,
    /// `|det|` (and `|f - 1|` in triple mode) allowed at a point of `H`.
    pub h_point: f64,
    /// Relative threshold on `d(det)(radical)` separating transverse from
    /// tangent radicals.
    pub classify: f64,
}

impl Default for HypersurfaceOptions {
    fn default() -> Self {
        HypersurfaceOptions {
            zero_eig: DEFAULT_ZERO_EIG_TOL,
            h_point: 1e-8,
            classify: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RadicalClass {
    Transverse,
    Tangent,
}

/// A located point of `H` with the structure of `g̃` there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HPoint {
    /// Grid node the point was found from.
    pub grid_index: Vec<usize>,
    /// Axis of the bisected edge, or `None` when the node itself lies on `H`.
    pub edge_axis: Option<usize>,
    pub q: Point,
    pub det_value: f64,
    pub det_gradient: Vec<f64>,
    pub radical: Vec<f64>,
    pub radical_class: RadicalClass,
    pub induced_signature: SignatureReport,
}

/// A root of `det g̃` before enrichment.
#[derive(Debug, Clone, PartialEq)]
pub struct Root {
    pub grid_index: Vec<usize>,
    pub edge_axis: Option<usize>,
    pub q: Point,
}

fn det_value(gt: &MetricField, p: &[f64]) -> Result<f64> {
    Ok(gt.evaluate(p)?.determinant())
}

fn sign(d: f64) -> i8 {
    if d.abs() <= ON_H_TOL {
        0
    } else if d < 0.0 {
        -1
    } else {
        1
    }
}

/// Roots of `det g̃` on the grid: nodes where it vanishes, plus one bisected
/// root on every edge whose endpoint values have strictly opposite signs.
/// Ordered by grid index, node before its edges, edges by axis.
pub fn locate_roots(gt: &MetricField, grid: &Grid) -> Result<Vec<Root>> {
    let n = grid.chart().dim();
    let dets: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| det_value(gt, &grid.point(&grid.index(i))))
        .collect::<Vec<Result<f64>>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let found: Vec<Result<Vec<Root>>> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let index = grid.index(flat);
            let a = grid.point(&index);
            let sa = sign(dets[flat]);
            let mut out = Vec::new();
            if sa == 0 {
                out.push(Root {
                    grid_index: index.clone(),
                    edge_axis: None,
                    q: a.clone(),
                });
            }
            for axis in 0..n {
                if index[axis] + 1 >= grid.resolution()[axis] {
                    continue;
                }
                let mut nb = index.clone();
                nb[axis] += 1;
                let sb = sign(dets[grid.flat(&nb)]);
                let b = grid.point(&nb);
                if sa == 0 && sb == 0 {
                    for p in [&a, &b] {
                        let g = metric_determinant(gt, p)?.gradient;
                        if euclidean_norm(&g) <= GRADIENT_ZERO_TOL {
                            return Err(Error::DegenerateRegion { point: p.clone() });
                        }
                    }
                } else if sa * sb < 0 {
                    out.push(Root {
                        grid_index: index.clone(),
                        edge_axis: Some(axis),
                        q: bisect(gt, &a, &b, sa)?,
                    });
                }
            }
            Ok(out)
        })
        .collect();
    let mut roots = Vec::new();
    for r in found {
        roots.extend(r?);
    }
    Ok(roots)
}

fn bisect(gt: &MetricField, a: &[f64], b: &[f64], sign_a: i8) -> Result<Point> {
    let len = a
        .iter()
        .zip(b)
        .map(|(x, y)| (y - x) * (y - x))
        .sum::<f64>()
        .sqrt();
    let at = |s: f64| -> Point { a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect() };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..BISECTION_MAX_ITER {
        if (hi - lo) * len <= BISECTION_COORD_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let d = det_value(gt, &at(mid))?;
        if d == 0.0 {
            return Ok(at(mid));
        }
        if (d < 0.0) == (sign_a < 0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(0.5 * (lo + hi)))
}

/// Locates `H` on the grid and populates every point with its radical,
/// radical class and induced signature.
pub fn locate_hypersurface(
    gt: &MetricField,
    grid: &Grid,
    opts: HypersurfaceOptions,
) -> Result<Vec<HPoint>> {
    let roots = locate_roots(gt, grid)?;
    let enriched: Vec<Result<HPoint>> =
        roots.into_par_iter().map(|r| enrich(gt, r, opts)).collect();
    enriched.into_iter().collect()
}

fn enrich(gt: &MetricField, root: Root, opts: HypersurfaceOptions) -> Result<HPoint> {
    let det = metric_determinant(gt, &root.q)?;
    let radical = radical_at(gt, &root.q, opts.zero_eig)?;
    let radical_class = classify_radical(gt, &root.q, &radical, opts.classify)?;
    let induced_signature = induced_metric_on_h(gt, &root.q, opts.zero_eig)?;
    Ok(HPoint {
        grid_index: root.grid_index,
        edge_axis: root.edge_axis,
        q: root.q,
        det_value: det.value,
        det_gradient: det.gradient,
        radical,
        radical_class,
        induced_signature,
    })
}

/// Unit vector spanning the kernel of `g̃(q)`, first nonzero component
/// positive. The kernel must be one-dimensional.
pub fn radical_at(gt: &MetricField, q: &[f64], tol: f64) -> Result<Vec<f64>> {
    radical_of(&gt.evaluate(q)?, q, tol)
}

pub fn radical_of(m: &SymMatrix<f64>, q: &[f64], tol: f64) -> Result<Vec<f64>> {
    let (values, vectors) = symmetric_eigen(m)?;
    let band = zero_band(&values, tol);
    let kernel: Vec<usize> = (0..values.len())
        .filter(|&i| values[i].abs() <= band)
        .collect();
    if kernel.len() != 1 {
        return Err(Error::KernelDimension {
            point: q.to_vec(),
            dim: kernel.len(),
        });
    }
    let mut r: Vec<f64> = vectors.column(kernel[0]).iter().copied().collect();
    let norm = euclidean_norm(&r);
    r.iter_mut().for_each(|x| *x /= norm);
    if let Some(first) = r.iter().find(|x| x.abs() > 1e-12) {
        if *first < 0.0 {
            r.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(r)
}

fn det_gradient(gt: &MetricField, q: &[f64]) -> Result<Vec<f64>> {
    let g = metric_determinant(gt, q)?.gradient;
    let norm = euclidean_norm(&g);
    if norm <= GRADIENT_ZERO_TOL {
        return Err(Error::NotTransverseTypeChanging {
            point: q.to_vec(),
            norm,
        });
    }
    Ok(g)
}

fn pairing_class(covector: &[f64], radical: &[f64], tol: f64) -> RadicalClass {
    if dot(covector, radical).abs() > tol * euclidean_norm(covector) {
        RadicalClass::Transverse
    } else {
        RadicalClass::Tangent
    }
}

/// `Transverse` iff `|d(det)_q(radical)| > tol ‖d(det)_q‖`, i.e. the radical
/// leaves `T_qH = ker d(det)_q`.
pub fn classify_radical(
    gt: &MetricField,
    q: &[f64],
    radical: &[f64],
    tol: f64,
) -> Result<RadicalClass> {
    Ok(pairing_class(&det_gradient(gt, q)?, radical, tol))
}

/// Classifies through `d(det g̃)` and through `df` and requires both to agree.
pub fn classify_radical_in_triple(
    triple: &Triple,
    q: &[f64],
    radical: &[f64],
    tol: f64,
) -> Result<RadicalClass> {
    let by_det = classify_radical(&transform(triple), q, radical, tol)?;
    let df = triple.f.eval_dual(q)?.gradient;
    let norm = euclidean_norm(&df);
    if norm <= GRADIENT_ZERO_TOL {
        return Err(Error::NotTransverseTypeChanging {
            point: q.to_vec(),
            norm,
        });
    }
    if pairing_class(&df, radical, tol) != by_det {
        return Err(Error::ClassificationMismatch { point: q.to_vec() });
    }
    Ok(by_det)
}

/// Euclidean orthonormal basis of the complement of `normal`.
pub fn tangent_basis(normal: &[f64]) -> Vec<Vec<f64>> {
    let n = normal.len();
    let len = euclidean_norm(normal);
    let unit: Vec<f64> = normal.iter().map(|x| x / len).collect();
    let mut candidates: Vec<Vec<f64>> = (0..n)
        .map(|k| {
            (0..n)
                .map(|i| if i == k { 1.0 } else { 0.0 } - unit[k] * unit[i])
                .collect()
        })
        .collect();
    let mut basis = Vec::with_capacity(n - 1);
    for _ in 0..n - 1 {
        let (best, norm) = candidates
            .iter()
            .enumerate()
            .map(|(i, c)| (i, euclidean_norm(c)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("n - 1 candidates remain");
        let e: Vec<f64> = candidates
            .swap_remove(best)
            .iter()
            .map(|x| x / norm)
            .collect();
        for c in candidates.iter_mut() {
            let k = dot(c, &e);
            c.iter_mut().zip(&e).for_each(|(ci, ei)| *ci -= k * ei);
        }
        basis.push(e);
    }
    basis
}

/// Signature of `g̃(q)` restricted to `T_qH = ker d(det)_q`.
pub fn induced_metric_on_h(gt: &MetricField, q: &[f64], tol: f64) -> Result<SignatureReport> {
    let grad = det_gradient(gt, q)?;
    let m = gt.evaluate(q)?;
    let basis = tangent_basis(&grad);
    let restricted = SymMatrix::from_fn(basis.len(), |i, j| m.pair(&basis[i], &basis[j]));
    signature_of(&restricted, tol)
}

/// `x` with its component along `radical` removed, and `g̃(x,x)`; `None`
/// when what remains is shorter than [`MIN_OFF_RADICAL_NORM`].
pub fn off_radical_value(m: &SymMatrix<f64>, radical: &[f64], x: &[f64]) -> Option<(f64, f64)> {
    let k = dot(x, radical);
    let y: Vec<f64> = x.iter().zip(radical).map(|(a, r)| a - k * r).collect();
    let norm = euclidean_norm(&y);
    if norm < MIN_OFF_RADICAL_NORM {
        return None;
    }
    Some((m.pair(&y, &y), norm))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub passed: bool,
    pub accepted: usize,
    pub rejected: usize,
    /// Smallest `g̃(x,x) / ‖x‖²` over accepted draws.
    pub min_ratio: f64,
}

/// Draws `trials` vectors uniformly from the unit cube, removes their
/// component along the radical, and checks `g̃(x,x) > 0` for all survivors.
pub fn positivity_check(
    gt: &MetricField,
    q: &[f64],
    radical: &[f64],
    trials: usize,
    seed: u64,
) -> Result<PositivityReport> {
    let m = gt.evaluate(q)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PositivityReport {
        passed: true,
        accepted: 0,
        rejected: 0,
        min_ratio: f64::INFINITY,
    };
    for _ in 0..trials {
        let x: Vec<f64> = (0..q.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        match off_radical_value(&m, radical, &x) {
            None => report.rejected += 1,
            Some((value, norm)) => {
                report.accepted += 1;
                report.min_ratio = report.min_ratio.min(value / (norm * norm));
                if !(value > 0.0) {
                    report.passed = false;
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiconditionalEntry {
    pub q: Point,
    pub det_gradient_norm: f64,
    pub df_norm: f64,
    pub f_minus_one: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiconditionalReport {
    pub pass: bool,
    pub entries: Vec<BiconditionalEntry>,
}

/// At each point of `H` checks `‖d(det g̃)‖ > tol ⟺ ‖df‖ > tol`, and that the
/// point lies on `f⁻¹(1)` within [`HypersurfaceOptions::h_point`]'s default.
/// An empty point list passes.
pub fn verify_biconditional(
    triple: &Triple,
    points: &[Point],
    tol: f64,
) -> Result<BiconditionalReport> {
    let gt = transform(triple);
    let h_point = HypersurfaceOptions::default().h_point;
    let entries: Vec<Result<BiconditionalEntry>> = points
        .par_iter()
        .map(|q| {
            let a = euclidean_norm(&metric_determinant(&gt, q)?.gradient);
            let f = triple.f.eval_dual(q)?;
            let b = euclidean_norm(&f.gradient);
            let f_minus_one = f.value - 1.0;
            Ok(BiconditionalEntry {
                q: q.clone(),
                det_gradient_norm: a,
                df_norm: b,
                f_minus_one,
                agrees: (a > tol) == (b > tol) && f_minus_one.abs() <= h_point,
            })
        })
        .collect();
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(BiconditionalReport {
        pass: entries.iter().all(|e| e.agrees),
        entries,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactorizationReport {
    pub pass: bool,
    /// Largest `|det g̃ - (1-f) g₀₀ det h| / max(1, |det g̃|)`.
    pub max_deviation: f64,
    pub samples: usize,
}

/// Requires `V` along the first coordinate axis at every sample.
pub fn check_comoving(triple: &Triple, samples: &[Point]) -> Result<()> {
    for p in samples {
        let v = triple.v.evaluate(p)?;
        if v[1..].iter().any(|x| x.abs() > 1e-12) || v[0] == 0.0 {
            return Err(Error::NotComoving { point: p.clone() });
        }
    }
    Ok(())
}

/// `det g̃ = (1 - f) g₀₀ det h` with `h_ij = g_ij - g_i0 g_j0 / g₀₀`, for a
/// triple in co-moving form.
pub fn verify_det_factorization(
    triple: &Triple,
    samples: &[Point],
    tol: f64,
) -> Result<FactorizationReport> {
    check_comoving(triple, samples)?;
    let gt = transform(triple);
    let devs: Vec<Result<f64>> = samples
        .par_iter()
        .map(|p| {
            let lhs = gt.evaluate(p)?.determinant();
            let g = triple.g.evaluate(p)?;
            let f = triple.f.eval(p)?;
            let g00 = *g.get(0, 0);
            let h = SymMatrix::from_fn(g.dim() - 1, |i, j| {
                g.get(i + 1, j + 1) - g.get(i + 1, 0) * g.get(j + 1, 0) / g00
            });
            let rhs = (1.0 - f) * g00 * h.determinant();
            Ok((lhs - rhs).abs() / lhs.abs().max(1.0))
        })
        .collect();
    let mut max_deviation = 0.0f64;
    for d in devs {
        max_deviation = max_deviation.max(d?);
    }
    Ok(FactorizationReport {
        pass: max_deviation <= tol,
        max_deviation,
        samples: samples.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Chart;

    fn chart2() -> Chart {
        Chart::unit_box(&["t", "x"]).unwrap()
    }

    fn metric2(rows: [[&str; 2]; 2]) -> MetricField {
        let rows: Vec<Vec<&str>> = rows.iter().map(|r| r.to_vec()).collect();
        MetricField::parse(&chart2(), &rows).unwrap()
    }

    fn kriele() -> MetricField {
        metric2([["x", "0"], ["0", "1"]])
    }

    fn transverse() -> MetricField {
        metric2([["t", "0"], ["0", "1"]])
    }

    fn opts() -> HypersurfaceOptions {
        HypersurfaceOptions::default()
    }

    #[test]
    fn locate_kriele_on_odd_grid() {
        let grid = Grid::uniform(&chart2(), 9).unwrap();
        let pts = locate_hypersurface(&kriele(), &grid, opts()).unwrap();
        assert_eq!(pts.len(), 9);
        for (k, h) in pts.iter().enumerate() {
            assert!(h.q[1].abs() < 1e-10);
            assert_eq!(h.q[0], grid.coordinate(0, k));
            assert_eq!(h.edge_axis, None);
            assert_eq!(h.radical_class, RadicalClass::Tangent);
        }
    }

    #[test]
    fn locate_kriele_on_even_grid_bisects() {
        let grid = Grid::uniform(&chart2(), 10).unwrap();
        let pts = locate_hypersurface(&kriele(), &grid, opts()).unwrap();
        assert_eq!(pts.len(), 10);
        for h in &pts {
            assert_eq!(h.edge_axis, Some(1));
            assert!(h.q[1].abs() < 1e-10);
            assert!(h.det_value.abs() <= 1e-10);
        }
    }

    #[test]
    fn minkowski_has_no_hypersurface() {
        let gt = MetricField::constant_diag(&chart2(), &[-1.0, 1.0]).unwrap();
        let grid = Grid::uniform(&chart2(), 9).unwrap();
        assert!(locate_hypersurface(&gt, &grid, opts()).unwrap().is_empty());
    }

    #[test]
    fn locate_transverse() {
        let grid = Grid::uniform(&chart2(), 8).unwrap();
        let pts = locate_hypersurface(&transverse(), &grid, opts()).unwrap();
        assert_eq!(pts.len(), 8);
        for h in &pts {
            assert!(h.q[0].abs() < 1e-10);
            assert_eq!(h.radical_class, RadicalClass::Transverse);
        }
    }

    #[test]
    fn identically_degenerate_region() {
        let gt = metric2([["0", "0"], ["0", "1"]]);
        let grid = Grid::uniform(&chart2(), 3).unwrap();
        assert!(matches!(
            locate_hypersurface(&gt, &grid, opts()),
            Err(Error::DegenerateRegion { .. })
        ));
    }

    #[test]
    fn radical_examples() {
        assert_eq!(
            radical_at(&kriele(), &[0.3, 0.0], 1e-8).unwrap(),
            vec![1.0, 0.0]
        );
        assert_eq!(
            radical_at(&transverse(), &[0.0, 0.5], 1e-8).unwrap(),
            vec![1.0, 0.0]
        );
        let zero = metric2([["0", "0"], ["0", "0"]]);
        assert!(matches!(
            radical_at(&zero, &[0.0, 0.0], 1e-8),
            Err(Error::KernelDimension { dim: 2, .. })
        ));
        assert!(matches!(
            radical_at(&kriele(), &[0.0, 0.5], 1e-8),
            Err(Error::KernelDimension { dim: 0, .. })
        ));
    }

    #[test]
    fn radical_sign_convention() {
        // kernel of [[1,1],[1,1]] is span{(1,-1)}
        let m = SymMatrix::from_lower(2, vec![1.0, 1.0, 1.0]).unwrap();
        let r = radical_of(&m, &[0.0, 0.0], 1e-8).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((r[0] - s).abs() < 1e-12 && (r[1] + s).abs() < 1e-12);
    }

    #[test]
    fn classification_examples() {
        let r = [1.0, 0.0];
        assert_eq!(
            classify_radical(&kriele(), &[0.3, 0.0], &r, 1e-6).unwrap(),
            RadicalClass::Tangent
        );
        assert_eq!(
            classify_radical(&transverse(), &[0.0, 0.5], &r, 1e-6).unwrap(),
            RadicalClass::Transverse
        );
        let flat = metric2([["x^2", "0"], ["0", "1"]]);
        assert!(matches!(
            classify_radical(&flat, &[0.0, 0.0], &r, 1e-6),
            Err(Error::NotTransverseTypeChanging { .. })
        ));
    }

    #[test]
    fn classification_in_triple_mode_agrees() {
        let chart = chart2();
        let g = [vec!["-1", "0"], vec!["0", "1"]];
        let kr = Triple::parse(&chart, &g, &["1", "0"], "1+x").unwrap();
        // (df)(V) = dx(∂_t) = 0 on H
        let df = kr.f.eval_dual(&[0.3, 0.0]).unwrap().gradient;
        assert_eq!(dot(&df, &[1.0, 0.0]), 0.0);
        assert_eq!(
            classify_radical_in_triple(&kr, &[0.3, 0.0], &[1.0, 0.0], 1e-6).unwrap(),
            RadicalClass::Tangent
        );
        let tr = Triple::parse(&chart, &g, &["1", "0"], "1+t").unwrap();
        assert_eq!(
            classify_radical_in_triple(&tr, &[0.0, 0.3], &[1.0, 0.0], 1e-6).unwrap(),
            RadicalClass::Transverse
        );
    }

    #[test]
    fn induced_signatures() {
        assert_eq!(
            induced_metric_on_h(&kriele(), &[0.3, 0.0], 1e-8)
                .unwrap()
                .counts(),
            [0, 1, 0]
        );
        assert_eq!(
            induced_metric_on_h(&transverse(), &[0.0, 0.5], 1e-8)
                .unwrap()
                .counts(),
            [0, 0, 1]
        );
        let chart3 = Chart::unit_box(&["t", "x", "y"]).unwrap();
        let rows = vec![
            vec!["t", "0", "0"],
            vec!["0", "1", "0"],
            vec!["0", "0", "1"],
        ];
        let m3 = MetricField::parse(&chart3, &rows).unwrap();
        assert_eq!(
            induced_metric_on_h(&m3, &[0.0, 0.2, 0.3], 1e-8)
                .unwrap()
                .counts(),
            [0, 0, 2]
        );
    }

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        let normal = [0.3, -1.2, 0.5, 2.0];
        let b = tangent_basis(&normal);
        assert_eq!(b.len(), 3);
        for (i, u) in b.iter().enumerate() {
            assert!(dot(u, &normal).abs() < 1e-14);
            for (j, v) in b.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn positivity_examples() {
        let r = [1.0, 0.0];
        let rep = positivity_check(&kriele(), &[0.3, 0.0], &r, 1000, 42).unwrap();
        assert!(rep.passed);
        assert!(rep.min_ratio > 0.0);
        assert_eq!(rep.accepted + rep.rejected, 1000);
        let rep = positivity_check(&transverse(), &[0.0, 0.5], &r, 1000, 7).unwrap();
        assert!(rep.passed);
        // the radical itself is not a trial vector
        let m = kriele().evaluate(&[0.3, 0.0]).unwrap();
        assert!(off_radical_value(&m, &r, &r).is_none());
    }

    #[test]
    fn positivity_fails_off_h() {
        // In the Lorentzian sector ∂_x-removal leaves timelike draws.
        let m = kriele();
        let rep = positivity_check(&m, &[0.0, -0.5], &[0.0, 1.0], 100, 1).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn biconditional_examples() {
        let chart = chart2();
        let g = [vec!["-1", "0"], vec!["0", "1"]];
        let kr = Triple::parse(&chart, &g, &["1", "0"], "1+x").unwrap();
        let pts: Vec<Point> = (0..5).map(|k| vec![-1.0 + 0.5 * k as f64, 0.0]).collect();
        let rep = verify_biconditional(&kr, &pts, 1e-6).unwrap();
        assert!(rep.pass);
        assert!(rep
            .entries
            .iter()
            .all(|e| e.det_gradient_norm > 0.5 && e.df_norm > 0.5));

        // f = 1 + x^2: det g̃ = x^2, d(det) = 2x dx and df = 2x dx vanish together.
        let sq = Triple::parse(&chart, &g, &["1", "0"], "1+x^2").unwrap();
        let rep = verify_biconditional(&sq, &pts, 1e-6).unwrap();
        assert!(rep.pass);
        assert!(rep
            .entries
            .iter()
            .all(|e| e.det_gradient_norm <= 1e-6 && e.df_norm <= 1e-6));

        let mk = Triple::parse(&chart, &g, &["1", "0"], "0").unwrap();
        assert!(verify_biconditional(&mk, &[], 1e-6).unwrap().pass);
    }

    #[test]
    fn biconditional_flags_points_off_f_level() {
        let chart = chart2();
        let g = [vec!["-1", "0"], vec!["0", "1"]];
        let kr = Triple::parse(&chart, &g, &["1", "0"], "1+x").unwrap();
        assert!(
            !verify_biconditional(&kr, &[vec![0.0, 0.5]], 1e-6)
                .unwrap()
                .pass
        );
    }

    #[test]
    fn factorization_examples() {
        let chart = chart2();
        let g = [vec!["-1", "0"], vec!["0", "1"]];
        let kr = Triple::parse(&chart, &g, &["1", "0"], "1+x").unwrap();
        let rep = verify_det_factorization(&kr, &[vec![0.0, 0.5]], 1e-10).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_deviation, 0.0);

        let zero = Triple::parse(&chart, &g, &["1", "0"], "0").unwrap();
        assert_eq!(
            verify_det_factorization(&zero, &[vec![0.4, -0.2]], 1e-10)
                .unwrap()
                .max_deviation,
            0.0
        );

        let tilted = Triple::parse(&chart, &g, &["1", "0.5"], "0").unwrap();
        assert!(matches!(
            verify_det_factorization(&tilted, &[vec![0.0, 0.0]], 1e-10),
            Err(Error::NotComoving { .. })
        ));
    }
}
