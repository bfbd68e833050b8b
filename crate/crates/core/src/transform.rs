//! The prescription `g̃ = g + f V♭⊗V♭`, its pointwise inverse, the
//! rescaling law for `f`, and equivalence of triples.
//!
//! With `g(V,V) = -1` one has `g̃(V,·) = (1 - f) V♭` and `g̃(V,V) = f - 1`, so
//! given `g̃` and `V` away from `H`:
//!
//! ```text
//! c = g̃(V,V),   f = 1 + c,   V♭ = -g̃(V,·)/c,   g = g̃ - f V♭⊗V♭.
//! ```
//!
//! Inside the band `|c| < ε_H` the entries of `g` are extrapolated
//! quadratically from the closed form at points just off `H`. `f` itself is
//! always `1 + c`, including on `H`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dual::Dual;
use crate::error::{Error, Result};
use crate::geometry::{
    euclidean_norm, signature_of, Chart, MetricField, Point, ScalarField, SymMatrix, VectorField,
    DEFAULT_ZERO_EIG_TOL,
};

/// Allowed deviation of `g(V,V)` from -1.
pub const NORMALIZATION_TOL: f64 = 1e-9;
/// Half-width of the near-hypersurface band in `c = g̃(V,V)`.
pub const DEFAULT_EPS_H: f64 = 1e-6;
/// Quadratic-fit residual above which extrapolation is rejected.
pub const EXTRAPOLATION_RESIDUAL_TOL: f64 = 1e-6;

/// Representative `(g, V, f)` of an equivalence class of triples.
#[derive(Clone, Debug)]
pub struct Triple {
    pub g: MetricField,
    pub v: VectorField,
    pub f: ScalarField,
}

impl Triple {
    pub fn new(g: MetricField, v: VectorField, f: ScalarField) -> Result<Triple> {
        if g.dim() != v.chart().dim() {
            return Err(Error::DimensionMismatch {
                expected: g.dim(),
                found: v.chart().dim(),
            });
        }
        Ok(Triple { g, v, f })
    }

    /// Parses `g` (full matrix), `V` and `f` against a chart.
    pub fn parse<S: AsRef<str>>(chart: &Chart, g: &[Vec<S>], v: &[S], f: &str) -> Result<Triple> {
        Triple::new(
            MetricField::parse(chart, g)?,
            VectorField::parse(chart, v)?,
            ScalarField::Expr(chart.parse(f)?),
        )
    }

    pub fn chart(&self) -> &Chart {
        self.g.chart()
    }

    pub fn dim(&self) -> usize {
        self.g.dim()
    }

    /// `V ↦ -V`; the prescription is unchanged.
    pub fn negated(&self) -> Triple {
        Triple {
            g: self.g.clone(),
            v: self.v.scaled(-1.0),
            f: self.f.clone(),
        }
    }

    pub fn with_f(&self, f: ScalarField) -> Triple {
        Triple {
            g: self.g.clone(),
            v: self.v.clone(),
            f,
        }
    }

    /// Checks at each sample that `V ≠ 0`, `g` is Lorentzian, and
    /// `g(V,V) = -1`.
    pub fn validate(&self, samples: &[Point]) -> Result<()> {
        let checks: Vec<Result<()>> = samples.par_iter().map(|p| self.validate_at(p)).collect();
        checks.into_iter().collect()
    }

    fn validate_at(&self, p: &[f64]) -> Result<()> {
        let v = self.v.evaluate(p)?;
        if v.iter().all(|&x| x == 0.0) {
            return Err(Error::VanishingVector { point: p.to_vec() });
        }
        let g = self.g.evaluate(p)?;
        let sig = signature_of(&g, DEFAULT_ZERO_EIG_TOL)?;
        if !sig.is_lorentzian() {
            return Err(Error::NotLorentzian {
                point: p.to_vec(),
                signature: sig.counts(),
            });
        }
        let vv = g.pair(&v, &v);
        if (vv + 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization {
                point: p.to_vec(),
                value: vv,
            });
        }
        Ok(())
    }
}

fn lower_index(m: &SymMatrix<Dual>, v: &[Dual]) -> Vec<Dual> {
    let n = m.dim();
    (0..n)
        .map(|i| (0..n).fold(Dual::constant(0.0), |acc, j| acc + &(m.get(i, j) * &v[j])))
        .collect()
}

fn pair(m: &SymMatrix<Dual>, u: &[Dual], v: &[Dual]) -> Dual {
    lower_index(m, v)
        .iter()
        .zip(u)
        .fold(Dual::constant(0.0), |acc, (a, b)| acc + &(a * b))
}

fn values(p: &[Dual]) -> Point {
    p.iter().map(|d| d.value).collect()
}

/// `g̃_μν = g_μν + f V_μ V_ν` with `V_μ = g_μα V^α`. Evaluation fails with
/// [`Error::Normalization`] wherever `|g(V,V) + 1|` exceeds
/// [`NORMALIZATION_TOL`].
pub fn transform(triple: &Triple) -> MetricField {
    let t = triple.clone();
    MetricField::composed(triple.chart(), move |p| {
        let g = t.g.eval_at(p)?;
        let v = t.v.eval_at(p)?;
        let v_low = lower_index(&g, &v);
        let vv = v_low
            .iter()
            .zip(&v)
            .fold(0.0, |acc, (a, b)| acc + a.value * b.value);
        if (vv + 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::Normalization {
                point: values(p),
                value: vv,
            });
        }
        let f = t.f.eval_at(p)?;
        Ok(SymMatrix::from_fn(g.dim(), |i, j| {
            g.get(i, j) + &(&f * &(&v_low[i] * &v_low[j]))
        }))
    })
}

/// `W / sqrt(-g(W,W))`.
pub fn normalize_against(g: &MetricField, w: &VectorField, p: &[f64]) -> Result<Vec<f64>> {
    let m = g.evaluate(p)?;
    let wv = w.evaluate(p)?;
    let ww = m.pair(&wv, &wv);
    if !(ww < 0.0) {
        return Err(Error::NotTimelike { norm: ww });
    }
    let s = (-ww).sqrt();
    Ok(wv.iter().map(|x| x / s).collect())
}

/// `f ↦ 1 + φ²(f - 1)`, the change of `f` under `V ↦ φV`.
pub fn rescaling_image(f_value: f64, phi: f64) -> Result<f64> {
    if phi == 0.0 {
        return Err(Error::ZeroScale);
    }
    Ok(1.0 + phi * phi * (f_value - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecomposeOptions {
    pub eps_h: f64,
}

impl Default for DecomposeOptions {
    fn default() -> Self {
        DecomposeOptions {
            eps_h: DEFAULT_EPS_H,
        }
    }
}

/// `f` and `g` recovered at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDecomposition {
    pub f: f64,
    pub g: SymMatrix<f64>,
}

/// Decomposition at a sample, flagged when `g` was extrapolated across `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedSample {
    pub c: f64,
    pub f: f64,
    pub g: SymMatrix<f64>,
    pub extrapolated: bool,
}

struct ClosedForm {
    c: Dual,
    g: SymMatrix<Dual>,
}

fn closed_form(gt: &SymMatrix<Dual>, v: &[Dual]) -> ClosedForm {
    let w = lower_index(gt, v);
    let c = w
        .iter()
        .zip(v)
        .fold(Dual::constant(0.0), |acc, (a, b)| acc + &(a * b));
    let f = c.add_const(1.0);
    let u: Vec<Dual> = w.iter().map(|wi| -(wi / &c)).collect();
    let g = SymMatrix::from_fn(gt.dim(), |i, j| gt.get(i, j) - &(&f * &(&u[i] * &u[j])));
    ClosedForm { c, g }
}

/// `(f, g)` at `p` from the closed-form inverse. Points with
/// `|g̃(V,V)| < ε_H` are rejected with [`Error::NearHypersurface`].
pub fn decompose_point(gt: &MetricField, v: &VectorField, p: &[f64]) -> Result<PointDecomposition> {
    decompose_point_with(gt, v, p, DecomposeOptions::default())
}

pub fn decompose_point_with(
    gt: &MetricField,
    v: &VectorField,
    p: &[f64],
    opts: DecomposeOptions,
) -> Result<PointDecomposition> {
    let x = Dual::lift(p);
    let vv = v.eval_at(&x)?;
    if vv.iter().all(|d| d.value == 0.0) {
        return Err(Error::VanishingVector { point: p.to_vec() });
    }
    let cf = closed_form(&gt.eval_at(&x)?, &vv);
    if cf.c.value.abs() < opts.eps_h {
        return Err(Error::NearHypersurface { c: cf.c.value });
    }
    Ok(PointDecomposition {
        f: 1.0 + cf.c.value,
        g: cf.g.values(),
    })
}

/// Offsets, in units of the step, used for extrapolation onto `H`.
const OFFSETS: [f64; 6] = [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0];

/// Least-squares quadratic through `(OFFSETS[k], y[k])`: the value at 0 and
/// the largest residual. The design is symmetric, so the normal equations
/// decouple.
fn quadratic_at_zero(y: &[Dual; 6]) -> (Dual, f64) {
    const S2: f64 = 42.0; // Σt²
    const S4: f64 = 546.0; // Σt⁴
    const DET: f64 = 6.0 * S4 - S2 * S2;
    let mut a0 = Dual::constant(0.0);
    let (mut sy, mut sty, mut st2y) = (0.0, 0.0, 0.0);
    for (t, yk) in OFFSETS.iter().zip(y) {
        a0 = a0 + yk.scale((S4 - S2 * t * t) / DET);
        sy += yk.value;
        sty += t * yk.value;
        st2y += t * t * yk.value;
    }
    let a1 = sty / S2;
    let a2 = (6.0 * st2y - S2 * sy) / DET;
    let residual = OFFSETS
        .iter()
        .zip(y)
        .map(|(t, yk)| (yk.value - (a0.value + a1 * t + a2 * t * t)).abs())
        .fold(0.0, f64::max);
    (a0, residual)
}

fn extrapolated_g(
    gt: &MetricField,
    v: &VectorField,
    p: &[Dual],
    opts: DecomposeOptions,
) -> Result<SymMatrix<Dual>> {
    let at = values(p);
    let fail = |residual: f64| Error::ExtrapolationFailure {
        point: at.clone(),
        residual,
    };
    let seeded = Dual::seed(&at);
    let c = closed_form(&gt.eval_at(&seeded)?, &v.eval_at(&seeded)?).c;
    let dc = c.gradient_n(at.len());
    let dc_norm = euclidean_norm(&dc);
    if !(dc_norm > 1e-10) {
        return Err(fail(f64::INFINITY));
    }
    // Step along V when it crosses H; a V tangent to H never leaves the band,
    // so fall back to the direction of steepest change of c.
    let vp = v.evaluate(&at)?;
    let v_norm = euclidean_norm(&vp);
    let mut dir: Vec<f64> = vp.iter().map(|x| x / v_norm).collect();
    let mut rate = crate::geometry::dot(&dc, &dir).abs();
    if rate < 0.1 * dc_norm {
        dir = dc.iter().map(|x| x / dc_norm).collect();
        rate = dc_norm;
    }
    let step = 4.0 * opts.eps_h / rate;

    let n = at.len();
    let mut samples: Vec<SymMatrix<Dual>> = Vec::with_capacity(OFFSETS.len());
    for t in OFFSETS {
        let q: Vec<Dual> = p
            .iter()
            .zip(&dir)
            .map(|(x, d)| x.add_const(t * step * d))
            .collect();
        let cf = closed_form(&gt.eval_at(&q)?, &v.eval_at(&q)?);
        if cf.c.value.abs() < opts.eps_h {
            return Err(fail(f64::INFINITY));
        }
        samples.push(cf.g);
    }
    let mut worst = 0.0f64;
    let lower = (0..n * (n + 1) / 2)
        .map(|k| {
            let ys: [Dual; 6] = std::array::from_fn(|s| samples[s].lower()[k].clone());
            let (value, residual) = quadratic_at_zero(&ys);
            worst = worst.max(residual);
            value
        })
        .collect();
    if worst > EXTRAPOLATION_RESIDUAL_TOL {
        return Err(fail(worst));
    }
    SymMatrix::from_lower(n, lower)
}

/// `g` at a (possibly dual) point: closed form off the band, extrapolated
/// inside it. Returns the matrix and whether extrapolation was used.
fn recover_g(
    gt: &MetricField,
    v: &VectorField,
    p: &[Dual],
    opts: DecomposeOptions,
) -> Result<(Dual, SymMatrix<Dual>, bool)> {
    let vv = v.eval_at(p)?;
    if vv.iter().all(|d| d.value == 0.0) {
        return Err(Error::VanishingVector { point: values(p) });
    }
    let cf = closed_form(&gt.eval_at(p)?, &vv);
    if cf.c.value.abs() >= opts.eps_h {
        Ok((cf.c, cf.g, false))
    } else {
        Ok((cf.c, extrapolated_g(gt, v, p, opts)?, true))
    }
}

pub fn decompose_sample(
    gt: &MetricField,
    v: &VectorField,
    p: &[f64],
    opts: DecomposeOptions,
) -> Result<DecomposedSample> {
    let (c, g, extrapolated) = recover_g(gt, v, &Dual::lift(p), opts)?;
    Ok(DecomposedSample {
        c: c.value,
        f: 1.0 + c.value,
        g: g.values(),
        extrapolated,
    })
}

/// Recovers the triple `(g, V, f)` representing `gt` for the chosen `V`.
///
/// `f = 1 + gt(V,V)` everywhere. `g` is the closed-form inverse off the band
/// and the quadratic extrapolation inside it. Every sample is checked: `V`
/// must be timelike for `gt` wherever `gt` is Lorentzian, and the recovered
/// triple must pass [`Triple::validate`] at samples outside the band.
pub fn decompose_field(
    gt: &MetricField,
    v: &VectorField,
    samples: &[Point],
    opts: DecomposeOptions,
) -> Result<Triple> {
    let g_gt = gt.clone();
    let g_v = v.clone();
    let g = MetricField::composed(gt.chart(), move |p| Ok(recover_g(&g_gt, &g_v, p, opts)?.1));
    let f_gt = gt.clone();
    let f_v = v.clone();
    let f = ScalarField::composed(move |p| {
        let m = f_gt.eval_at(p)?;
        let vv = f_v.eval_at(p)?;
        Ok(pair(&m, &vv, &vv).add_const(1.0))
    });
    let triple = Triple::new(g, v.clone(), f)?;

    let checks: Vec<Result<()>> = samples
        .par_iter()
        .map(|p| {
            let m = gt.evaluate(p)?;
            let vp = v.evaluate(p)?;
            if vp.iter().all(|&x| x == 0.0) {
                return Err(Error::VanishingVector { point: p.clone() });
            }
            let c = m.pair(&vp, &vp);
            let sig = signature_of(&m, DEFAULT_ZERO_EIG_TOL)?;
            if sig.is_lorentzian() && c >= 0.0 {
                return Err(Error::NotTimelikeInLorentzSector {
                    point: p.clone(),
                    c,
                });
            }
            if c.abs() >= opts.eps_h {
                triple.validate_at(p)
            } else {
                triple.g.evaluate(p).map(|_| ())
            }
        })
        .collect();
    checks.into_iter().collect::<Result<()>>()?;
    Ok(triple)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceVerdict {
    pub equivalent: bool,
    pub max_deviation: f64,
    pub witness_point: Option<Point>,
}

/// Two triples are equivalent when they prescribe the same `g̃` at every
/// sample, up to `tol` entrywise.
pub fn triples_equivalent(
    t1: &Triple,
    t2: &Triple,
    samples: &[Point],
    tol: f64,
) -> Result<EquivalenceVerdict> {
    let a = transform(t1);
    let b = transform(t2);
    let devs: Vec<Result<f64>> = samples
        .par_iter()
        .map(|p| Ok(a.evaluate(p)?.max_abs_diff(&b.evaluate(p)?)))
        .collect();
    let mut max_deviation = 0.0f64;
    let mut witness = None;
    for (p, d) in samples.iter().zip(devs) {
        let d = d?;
        if d > max_deviation || (witness.is_none() && d.is_nan()) {
            max_deviation = d;
            witness = Some(p.clone());
        }
    }
    let equivalent = max_deviation <= tol;
    Ok(EquivalenceVerdict {
        equivalent,
        max_deviation,
        witness_point: if equivalent { None } else { witness },
    })
}
