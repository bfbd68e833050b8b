//! Command-line front end.
//!
//! ```text
//! sigflip analyze|transform|decompose|verify [--config PATH | gallery:NAME] [--out PATH] [--seed N]
//! ```
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 configuration error,
//! 3 analysis error. Errors are reported on stderr as a JSON object.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::gallery;
use crate::geometry::{
    metric_determinant, orthonormal_frame_of, signature_at, Chart, Grid, MetricField, Point,
    VectorField,
};
use crate::hypersurface::{
    check_comoving, classify_radical_in_triple, locate_hypersurface, positivity_check,
    verify_biconditional, verify_det_factorization, HPoint, HypersurfaceOptions, RadicalClass,
};
use crate::transform::{
    decompose_field, decompose_sample, rescaling_image, transform, triples_equivalent,
    DecomposeOptions, Triple,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_ANALYSIS: i32 = 3;

pub const THREADS_ENV: &str = "SIGFLIP_THREADS";
pub const GALLERY_PREFIX: &str = "gallery:";
/// Grid resolution per axis for gallery items.
pub const GALLERY_GRID: usize = 11;

const POSITIVITY_TRIALS: usize = 1000;
const BICONDITIONAL_TOL: f64 = 1e-6;
const FACTORIZATION_TOL: f64 = 1e-10;
const ROUND_TRIP_TOL: f64 = 1e-9;
const FRAME_TOL: f64 = 1e-10;
const RESCALING_TOL: f64 = 1e-9;
const RESCALING_FACTORS: [f64; 3] = [0.5, 2.0, 3.0];

#[derive(Debug, Parser)]
#[command(
    name = "sigflip",
    version,
    about = "Signature-type-changing metric toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Locate H and classify the radical and induced metric at each point.
    Analyze(CommonArgs),
    /// Sample g̃ = g + f V♭⊗V♭ on the grid as CSV.
    Transform(CommonArgs),
    /// Recover f and g from a metric and a chosen V, as CSV.
    Decompose(DecomposeArgs),
    /// Run every verdict on a triple.
    Verify(CommonArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// `gallery:NAME` or a config path.
    source: Option<String>,
    #[arg(long)]
    config: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include wall-clock timings in the report (breaks byte-reproducibility).
    #[arg(long)]
    timings: bool,
}

#[derive(Debug, Args)]
struct DecomposeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated components of V; defaults to the first coordinate
    /// vector.
    #[arg(long)]
    vector: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Triple,
    Metric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_zero_eig")]
    pub zero_eig: f64,
    #[serde(default = "default_h_point")]
    pub h_point: f64,
    #[serde(default = "default_classify")]
    pub classify: f64,
}

fn default_zero_eig() -> f64 {
    HypersurfaceOptions::default().zero_eig
}
fn default_h_point() -> f64 {
    HypersurfaceOptions::default().h_point
}
fn default_classify() -> f64 {
    HypersurfaceOptions::default().classify
}
fn default_seed() -> u64 {
    42
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            zero_eig: default_zero_eig(),
            h_point: default_h_point(),
            classify: default_classify(),
        }
    }
}

impl From<Tolerances> for HypersurfaceOptions {
    fn from(t: Tolerances) -> Self {
        HypersurfaceOptions {
            zero_eig: t.zero_eig,
            h_point: t.h_point,
            classify: t.classify,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mode: Mode,
    pub dimension: usize,
    pub coords: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<Vec<String>>>,
    #[serde(
        default,
        rename = "V",
        alias = "v",
        skip_serializing_if = "Option::is_none"
    )]
    pub v: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    /// Line element field used by `decompose`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<String>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

impl Config {
    /// Config for a gallery item, in triple mode or, for `Mode::Metric`,
    /// carrying only the metric.
    pub fn from_gallery(name: &str, mode: Mode) -> Result<Config, Error> {
        let item = gallery::get(name)?;
        let n = item.chart.dim();
        let source = item.triple_source.clone();
        let triple_mode = mode == Mode::Triple && source.is_some();
        Ok(Config {
            label: Some(format!("{GALLERY_PREFIX}{name}")),
            mode: if triple_mode {
                Mode::Triple
            } else {
                Mode::Metric
            },
            dimension: n,
            coords: item.chart.coords().to_vec(),
            domain: item.chart.domain().iter().map(|&(a, b)| [a, b]).collect(),
            grid: vec![GALLERY_GRID; n],
            metric: (!triple_mode).then(|| item.gt_source.clone()),
            g: source.as_ref().filter(|_| triple_mode).map(|s| s.g.clone()),
            v: source.as_ref().filter(|_| triple_mode).map(|s| s.v.clone()),
            f: source.as_ref().filter(|_| triple_mode).map(|s| s.f.clone()),
            vector: None,
            tolerances: Tolerances::default(),
            seed: default_seed(),
        })
    }
}

/// A validated config with its parsed fields.
pub struct Setup {
    pub config: Config,
    pub chart: Chart,
    pub grid: Grid,
    pub triple: Option<Triple>,
    pub gt: MetricField,
    pub opts: HypersurfaceOptions,
}

impl Setup {
    pub fn new(config: Config) -> Result<Setup, CliError> {
        let n = config.dimension;
        let cfg = |msg: String| CliError::Config(msg);
        if config.coords.len() != n || config.domain.len() != n || config.grid.len() != n {
            return Err(cfg(format!(
                "coords, domain and grid must each have {n} entries"
            )));
        }
        let t = &config.tolerances;
        if !(t.zero_eig > 0.0 && t.h_point > 0.0 && t.classify > 0.0) {
            return Err(cfg("tolerances must be positive".into()));
        }
        let domain: Vec<(f64, f64)> = config.domain.iter().map(|&[a, b]| (a, b)).collect();
        let chart = Chart::new(&config.coords, &domain).map_err(CliError::config)?;
        let grid = Grid::new(&chart, &config.grid).map_err(CliError::config)?;
        let (triple, gt) = match config.mode {
            Mode::Triple => {
                let (Some(g), Some(v), Some(f)) = (&config.g, &config.v, &config.f) else {
                    return Err(cfg("triple mode needs `g`, `V` and `f`".into()));
                };
                if config.metric.is_some() {
                    return Err(cfg("`metric` is not allowed in triple mode".into()));
                }
                let triple = Triple::parse(&chart, g, v, f).map_err(CliError::config)?;
                let gt = transform(&triple);
                (Some(triple), gt)
            }
            Mode::Metric => {
                let Some(m) = &config.metric else {
                    return Err(cfg("metric mode needs `metric`".into()));
                };
                if config.g.is_some() || config.v.is_some() || config.f.is_some() {
                    return Err(cfg("`g`, `V`, `f` are not allowed in metric mode".into()));
                }
                (
                    None,
                    MetricField::parse(&chart, m).map_err(CliError::config)?,
                )
            }
        };
        if let Some(v) = &config.vector {
            VectorField::parse(&chart, v).map_err(CliError::config)?;
        }
        let opts = config.tolerances.into();
        Ok(Setup {
            config,
            chart,
            grid,
            triple,
            gt,
            opts,
        })
    }

    pub fn load(source: &str, seed: Option<u64>, mode_hint: Mode) -> Result<Setup, CliError> {
        let mut config = match source.strip_prefix(GALLERY_PREFIX) {
            Some(name) => Config::from_gallery(name, mode_hint).map_err(CliError::config)?,
            None => {
                let text = fs::read_to_string(source)
                    .map_err(|e| CliError::Config(format!("cannot read {source}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| CliError::Config(format!("invalid config {source}: {e}")))?
            }
        };
        if let Some(s) = seed {
            config.seed = s;
        }
        Setup::new(config)
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Analysis(Error),
    Output(String),
}

impl CliError {
    fn config(e: Error) -> CliError {
        CliError::Config(e.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Analysis(_) | CliError::Output(_) => EXIT_ANALYSIS,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let (kind, message) = match self {
            CliError::Config(m) => ("ConfigError", m.clone()),
            CliError::Analysis(e) => (e.kind(), e.to_string()),
            CliError::Output(m) => ("OutputError", m.clone()),
        };
        serde_json::json!({
            "error": { "code": self.exit_code(), "kind": kind, "message": message }
        })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Analysis(e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignatureCell {
    pub index: Vec<usize>,
    pub point: Point,
    pub signature: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HPointRecord {
    pub grid_index: Vec<usize>,
    pub edge_axis: Option<usize>,
    pub q: Point,
    pub det_value: f64,
    pub det_gradient: Vec<f64>,
    pub radical: Vec<f64>,
    pub radical_class: RadicalClass,
    pub induced_signature: [usize; 3],
    pub induced_eigenvalues: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_minus_one: Option<f64>,
    /// `df(radical)` in triple mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_pairing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub pass: bool,
    pub max_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_ratio: Option<f64>,
}

impl Verdict {
    fn within(max_deviation: f64, tol: f64) -> Verdict {
        Verdict {
            pass: max_deviation <= tol,
            max_deviation,
            min_ratio: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Verdicts {
    pub biconditional: Option<Verdict>,
    pub det_factorization: Option<Verdict>,
    pub positivity: Option<Verdict>,
    pub round_trip: Option<Verdict>,
    pub frame_identities: Option<Verdict>,
    pub rescaling: Option<Verdict>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        [
            &self.biconditional,
            &self.det_factorization,
            &self.positivity,
            &self.round_trip,
            &self.frame_identities,
            &self.rescaling,
        ]
        .into_iter()
        .flatten()
        .all(|v| v.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config_echo: Config,
    pub signature_grid: Vec<SignatureCell>,
    pub h_points: Vec<HPointRecord>,
    pub verdicts: Verdicts,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn signature_grid(setup: &Setup) -> Result<Vec<SignatureCell>, Error> {
    let grid = &setup.grid;
    let cells: Vec<Result<SignatureCell, Error>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let index = grid.index(i);
            let point = grid.point(&index);
            let sig = signature_at(&setup.gt, &point, setup.opts.zero_eig)?;
            Ok(SignatureCell {
                index,
                point,
                signature: sig.counts(),
            })
        })
        .collect();
    cells.into_iter().collect()
}

fn h_point_record(setup: &Setup, h: &HPoint) -> Result<HPointRecord, Error> {
    let (f_minus_one, f_pairing) = match &setup.triple {
        Some(t) => {
            classify_radical_in_triple(t, &h.q, &h.radical, setup.opts.classify)?;
            let f = t.f.eval_dual(&h.q)?;
            let pairing = f.gradient.iter().zip(&h.radical).map(|(a, b)| a * b).sum();
            (Some(f.value - 1.0), Some(pairing))
        }
        None => (None, None),
    };
    Ok(HPointRecord {
        grid_index: h.grid_index.clone(),
        edge_axis: h.edge_axis,
        q: h.q.clone(),
        det_value: h.det_value,
        det_gradient: h.det_gradient.clone(),
        radical: h.radical.clone(),
        radical_class: h.radical_class,
        induced_signature: h.induced_signature.counts(),
        induced_eigenvalues: h.induced_signature.eigenvalues.clone(),
        f_minus_one,
        f_pairing,
    })
}

fn positivity_verdict(setup: &Setup, points: &[HPoint]) -> Result<Verdict, Error> {
    let reports: Vec<Result<_, Error>> = points
        .par_iter()
        .enumerate()
        .map(|(i, h)| {
            positivity_check(
                &setup.gt,
                &h.q,
                &h.radical,
                POSITIVITY_TRIALS,
                setup.config.seed.wrapping_add(i as u64),
            )
        })
        .collect();
    let mut pass = true;
    let mut min_ratio = f64::INFINITY;
    for r in reports {
        let r = r?;
        pass &= r.passed && r.min_ratio > 0.0;
        min_ratio = min_ratio.min(r.min_ratio);
    }
    Ok(Verdict {
        pass,
        max_deviation: if min_ratio.is_finite() {
            (-min_ratio).max(0.0)
        } else {
            0.0
        },
        min_ratio: min_ratio.is_finite().then_some(min_ratio),
    })
}

fn biconditional_verdict(triple: &Triple, points: &[HPoint]) -> Result<Verdict, Error> {
    let qs: Vec<Point> = points.iter().map(|h| h.q.clone()).collect();
    let rep = verify_biconditional(triple, &qs, BICONDITIONAL_TOL)?;
    let max_deviation = rep
        .entries
        .iter()
        .map(|e| e.f_minus_one.abs())
        .fold(0.0, f64::max);
    Ok(Verdict {
        pass: rep.pass,
        max_deviation,
        min_ratio: None,
    })
}

/// Largest deviation of the recovered `f` (everywhere) and `g` (outside the
/// near-H band) from the triple's own fields.
fn round_trip_deviation(setup: &Setup, triple: &Triple) -> Result<f64, Error> {
    let samples = setup.grid.points();
    let opts = DecomposeOptions::default();
    decompose_field(&setup.gt, &triple.v, &samples, opts)?;
    let devs: Vec<Result<f64, Error>> = samples
        .par_iter()
        .map(|p| {
            let s = decompose_sample(&setup.gt, &triple.v, p, opts)?;
            let mut d = (s.f - triple.f.eval(p)?).abs();
            if !s.extrapolated {
                d = d.max(s.g.max_abs_diff(&triple.g.evaluate(p)?));
            }
            Ok(d)
        })
        .collect();
    devs.into_iter()
        .try_fold(0.0, |acc, d| Ok(f64::max(acc, d?)))
}

fn frame_deviation(setup: &Setup, triple: &Triple) -> Result<f64, Error> {
    let devs: Vec<Result<f64, Error>> = setup
        .grid
        .points()
        .par_iter()
        .map(|p| {
            let g = triple.g.evaluate(p)?;
            let gt = setup.gt.evaluate(p)?;
            let v = triple.v.evaluate(p)?;
            let f = triple.f.eval(p)?;
            let frame = orthonormal_frame_of(&g, &v, p)?;
            let gram = frame.gram(&gt);
            let mut worst = (gram[0][0] - (f - 1.0)).abs();
            for i in 1..gram.len() {
                worst = worst.max(gram[0][i].abs());
                for j in 1..gram.len() {
                    let delta = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((gram[i][j] - delta).abs());
                }
            }
            Ok(worst)
        })
        .collect();
    devs.into_iter()
        .try_fold(0.0, |acc, d| Ok(f64::max(acc, d?)))
}

fn rescaling_verdict(setup: &Setup, triple: &Triple) -> Result<Verdict, Error> {
    let samples = setup.grid.points();
    let mut worst = 0.0f64;
    let mut pass = true;
    for phi in RESCALING_FACTORS {
        let scaled = triple.v.scaled(phi);
        let rescaled = decompose_field(&setup.gt, &scaled, &samples, DecomposeOptions::default())?;
        for p in &samples {
            let expect = rescaling_image(triple.f.eval(p)?, phi)?;
            worst = worst.max((rescaled.f.eval(p)? - expect).abs());
        }
        let eq = triples_equivalent(triple, &rescaled, &samples, RESCALING_TOL)?;
        pass &= eq.equivalent;
        worst = worst.max(eq.max_deviation);
    }
    Ok(Verdict {
        pass: pass && worst <= RESCALING_TOL,
        max_deviation: worst,
        min_ratio: None,
    })
}

struct Analysis {
    signature_grid: Vec<SignatureCell>,
    h_points: Vec<HPoint>,
    records: Vec<HPointRecord>,
}

fn analyze_setup(setup: &Setup) -> Result<Analysis, Error> {
    let signature_grid = signature_grid(setup)?;
    let h_points = locate_hypersurface(&setup.gt, &setup.grid, setup.opts)?;
    let records = h_points
        .iter()
        .map(|h| h_point_record(setup, h))
        .collect::<Result<_, _>>()?;
    Ok(Analysis {
        signature_grid,
        h_points,
        records,
    })
}

pub fn analyze(setup: &Setup) -> Result<Report, Error> {
    let a = analyze_setup(setup)?;
    let mut verdicts = Verdicts {
        positivity: Some(positivity_verdict(setup, &a.h_points)?),
        ..Verdicts::default()
    };
    if let Some(t) = &setup.triple {
        verdicts.biconditional = Some(biconditional_verdict(t, &a.h_points)?);
    }
    Ok(Report {
        command: "analyze".into(),
        config_echo: setup.config.clone(),
        signature_grid: a.signature_grid,
        h_points: a.records,
        verdicts,
        timings: None,
    })
}

pub fn verify(setup: &Setup) -> Result<Report, CliError> {
    let Some(triple) = &setup.triple else {
        return Err(CliError::Config(
            "verify needs a triple (mode = triple)".into(),
        ));
    };
    let samples = setup.grid.points();
    triple.validate(&samples)?;
    let a = analyze_setup(setup)?;
    let det_factorization = match check_comoving(triple, &samples) {
        Ok(()) => {
            let r = verify_det_factorization(triple, &samples, FACTORIZATION_TOL)?;
            Some(Verdict::within(r.max_deviation, FACTORIZATION_TOL))
        }
        Err(Error::NotComoving { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let verdicts = Verdicts {
        biconditional: Some(biconditional_verdict(triple, &a.h_points)?),
        det_factorization,
        positivity: Some(positivity_verdict(setup, &a.h_points)?),
        round_trip: Some(Verdict::within(
            round_trip_deviation(setup, triple)?,
            ROUND_TRIP_TOL,
        )),
        frame_identities: Some(Verdict::within(frame_deviation(setup, triple)?, FRAME_TOL)),
        rescaling: Some(rescaling_verdict(setup, triple)?),
    };
    Ok(Report {
        command: "verify".into(),
        config_echo: setup.config.clone(),
        signature_grid: a.signature_grid,
        h_points: a.records,
        verdicts,
        timings: None,
    })
}

/// `%.17g`-style formatting: 17 significant digits, trailing zeros dropped.
pub fn format_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_owned()
        } else {
            s.to_owned()
        }
    };
    if !(-5..17).contains(&exp) {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim(mantissa), sign, exp.abs())
    } else {
        let decimals = (16 - exp) as usize;
        trim(&format!("{x:.decimals$}"))
    }
}

fn component_headers(prefix: &str, n: usize) -> Vec<String> {
    let mut h = Vec::new();
    for i in 0..n {
        for j in i..n {
            h.push(format!("{prefix}_{i}{j}"));
        }
    }
    h
}

fn upper_row_major(m: &crate::geometry::SymMatrix<f64>) -> Vec<f64> {
    let n = m.dim();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for i in 0..n {
        for j in i..n {
            out.push(*m.get(i, j));
        }
    }
    out
}

fn csv_line(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

/// CSV of `g̃` components, `f` and `det g̃` at each grid node.
pub fn transform_csv(setup: &Setup) -> Result<String, CliError> {
    let Some(triple) = &setup.triple else {
        return Err(CliError::Config("transform needs mode = triple".into()));
    };
    let n = setup.chart.dim();
    let mut header: Vec<String> = setup.chart.coords().to_vec();
    header.extend(component_headers("gt", n));
    header.extend(["f".to_string(), "det_gt".to_string()]);
    let rows: Vec<Result<String, Error>> = setup
        .grid
        .points()
        .par_iter()
        .map(|p| {
            let m = setup.gt.evaluate(p)?;
            let det = metric_determinant(&setup.gt, p)?.value;
            let f = triple.f.eval(p)?;
            let mut cells: Vec<f64> = p.clone();
            cells.extend(upper_row_major(&m));
            cells.extend([f, det]);
            Ok(csv_line(cells.into_iter().map(format_g17)))
        })
        .collect();
    let mut out = csv_line(header);
    for r in rows {
        out.push_str(&r?);
    }
    Ok(out)
}

/// CSV of recovered `f` and `g` at each grid node, with a flag for nodes
/// where `g` was extrapolated across `H`.
pub fn decompose_csv(setup: &Setup, vector: &[String]) -> Result<String, CliError> {
    if setup.config.mode != Mode::Metric {
        return Err(CliError::Config("decompose needs mode = metric".into()));
    }
    let v = VectorField::parse(&setup.chart, vector).map_err(CliError::config)?;
    let samples = setup.grid.points();
    let opts = DecomposeOptions::default();
    decompose_field(&setup.gt, &v, &samples, opts)?;
    let n = setup.chart.dim();
    let mut header: Vec<String> = setup.chart.coords().to_vec();
    header.push("f".into());
    header.extend(component_headers("g", n));
    header.push("extrapolated".into());
    let rows: Vec<Result<String, Error>> = samples
        .par_iter()
        .map(|p| {
            let s = decompose_sample(&setup.gt, &v, p, opts)?;
            let mut cells: Vec<String> = p.iter().copied().map(format_g17).collect();
            cells.push(format_g17(s.f));
            cells.extend(upper_row_major(&s.g).into_iter().map(format_g17));
            cells.push(if s.extrapolated { "1" } else { "0" }.into());
            Ok(csv_line(cells))
        })
        .collect();
    let mut out = csv_line(header);
    for r in rows {
        out.push_str(&r?);
    }
    Ok(out)
}

fn resolve_source(args: &CommonArgs) -> Result<String, CliError> {
    match (&args.source, &args.config) {
        (Some(s), None) | (None, Some(s)) => Ok(s.clone()),
        (Some(_), Some(_)) => Err(CliError::Config(
            "give either --config PATH or gallery:NAME, not both".into(),
        )),
        (None, None) => Err(CliError::Config(
            "missing input: --config PATH or gallery:NAME".into(),
        )),
    }
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text)
            .map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Output(e.to_string())),
    }
}

fn thread_pool() -> Result<Option<rayon::ThreadPool>, CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(None);
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map(Some)
        .map_err(|e| CliError::Config(format!("cannot build thread pool: {e}")))
}

fn execute(command: Command) -> Result<i32, CliError> {
    let started = Instant::now();
    let stamp = |report: &mut Report, enabled: bool| {
        if enabled {
            report.timings = Some(Timings {
                total_seconds: started.elapsed().as_secs_f64(),
            });
        }
    };
    match command {
        Command::Analyze(args) => {
            let setup = Setup::load(&resolve_source(&args)?, args.seed, Mode::Triple)?;
            let mut report = analyze(&setup)?;
            stamp(&mut report, args.timings);
            write_output(&args.out, &report.to_json())?;
            Ok(EXIT_OK)
        }
        Command::Verify(args) => {
            let setup = Setup::load(&resolve_source(&args)?, args.seed, Mode::Triple)?;
            let mut report = verify(&setup)?;
            stamp(&mut report, args.timings);
            write_output(&args.out, &report.to_json())?;
            Ok(if report.verdicts.all_pass() {
                EXIT_OK
            } else {
                EXIT_VERDICT
            })
        }
        Command::Transform(args) => {
            let setup = Setup::load(&resolve_source(&args)?, args.seed, Mode::Triple)?;
            write_output(&args.out, &transform_csv(&setup)?)?;
            Ok(EXIT_OK)
        }
        Command::Decompose(args) => {
            let setup = Setup::load(
                &resolve_source(&args.common)?,
                args.common.seed,
                Mode::Metric,
            )?;
            let vector: Vec<String> = match (&args.vector, &setup.config.vector) {
                (Some(s), _) => s.split(',').map(|c| c.trim().to_owned()).collect(),
                (None, Some(v)) => v.clone(),
                (None, None) => (0..setup.chart.dim())
                    .map(|i| if i == 0 { "1" } else { "0" }.to_owned())
                    .collect(),
            };
            write_output(&args.common.out, &decompose_csv(&setup, &vector)?)?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI on `args` (including the program name) and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = thread_pool().and_then(|pool| match pool {
        Some(pool) => pool.install(|| execute(cli.command)),
        None => execute(cli.command),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}
