//! Built-in metrics with known answers.
//!
//! * `kriele2d`: `x dt² + dx²`, degenerate on `x = 0` with the radical `∂_t`
//!   tangent to `H`.
//! * `transverse2d`: `t dt² + dx²`, degenerate on `t = 0` with `∂_t` crossing
//!   `H`.
//! * `transverse3d`: `t dt² + dx² + dy²`, the same in three dimensions.

use crate::error::{Error, Result};
use crate::geometry::{Chart, MetricField};
use crate::hypersurface::RadicalClass;
use crate::transform::Triple;

pub const NAMES: [&str; 3] = ["kriele2d", "transverse2d", "transverse3d"];

/// Expression sources for a triple, as they would appear in a config.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleSource {
    pub g: Vec<Vec<String>>,
    pub v: Vec<String>,
    pub f: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truth {
    pub h_description: &'static str,
    pub radical_class: RadicalClass,
    pub induced_signature: [usize; 3],
    pub f_expression: Option<&'static str>,
}

#[derive(Debug, Clone)]
pub struct GalleryItem {
    pub name: &'static str,
    pub chart: Chart,
    pub triple: Option<Triple>,
    pub triple_source: Option<TripleSource>,
    pub gt_metric: MetricField,
    /// Full component matrix of `gt_metric` as expression strings.
    pub gt_source: Vec<Vec<String>>,
    pub truth: Truth,
}

fn strings(rows: &[&[&str]]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| r.iter().map(|s| s.to_string()).collect())
        .collect()
}

fn item(
    name: &'static str,
    coords: &[&str],
    gt: &[&[&str]],
    g: &[&[&str]],
    f: &'static str,
    truth: Truth,
) -> Result<GalleryItem> {
    let chart = Chart::unit_box(coords)?;
    let mut v = vec!["0".to_string(); coords.len()];
    v[0] = "1".into();
    let source = TripleSource {
        g: strings(g),
        v,
        f: f.into(),
    };
    let triple = Triple::parse(&chart, &source.g, &source.v, &source.f)?;
    Ok(GalleryItem {
        name,
        gt_metric: MetricField::parse(&chart, &strings(gt))?,
        gt_source: strings(gt),
        chart,
        triple: Some(triple),
        triple_source: Some(source),
        truth: Truth {
            f_expression: Some(f),
            ..truth
        },
    })
}

pub fn get(name: &str) -> Result<GalleryItem> {
    let minkowski2: &[&[&str]] = &[&["-1", "0"], &["0", "1"]];
    let minkowski3: &[&[&str]] = &[&["-1", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]];
    match name {
        "kriele2d" => item(
            "kriele2d",
            &["t", "x"],
            &[&["x", "0"], &["0", "1"]],
            minkowski2,
            "1+x",
            Truth {
                h_description: "x = 0",
                radical_class: RadicalClass::Tangent,
                induced_signature: [0, 1, 0],
                f_expression: None,
            },
        ),
        "transverse2d" => item(
            "transverse2d",
            &["t", "x"],
            &[&["t", "0"], &["0", "1"]],
            minkowski2,
            "1+t",
            Truth {
                h_description: "t = 0",
                radical_class: RadicalClass::Transverse,
                induced_signature: [0, 0, 1],
                f_expression: None,
            },
        ),
        "transverse3d" => item(
            "transverse3d",
            &["t", "x", "y"],
            &[&["t", "0", "0"], &["0", "1", "0"], &["0", "0", "1"]],
            minkowski3,
            "1+t",
            Truth {
                h_description: "t = 0",
                radical_class: RadicalClass::Transverse,
                induced_signature: [0, 0, 2],
                f_expression: None,
            },
        ),
        other => Err(Error::UnknownGalleryItem(other.to_owned())),
    }
}

pub fn all() -> Result<Vec<GalleryItem>> {
    NAMES.iter().map(|n| get(n)).collect()
}
