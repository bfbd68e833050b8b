use thiserror::Error;

use crate::expr::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("symmetric eigensolver did not converge")]
    EigenFailure,

    #[error("metric is degenerate at {point:?}")]
    DegenerateMetric { point: Vec<f64> },

    #[error("vector is not timelike (g(W,W) = {norm})")]
    NotTimelike { norm: f64 },

    #[error("frame pivot norm {norm} below threshold")]
    PivotFailure { norm: f64 },

    #[error("g(V,V) = {value} at {point:?}, expected -1")]
    Normalization { point: Vec<f64>, value: f64 },

    #[error("g is not Lorentzian at {point:?} (signature {signature:?})")]
    NotLorentzian {
        point: Vec<f64>,
        signature: [usize; 3],
    },

    #[error("vector field vanishes at {point:?}")]
    VanishingVector { point: Vec<f64> },

    #[error("point is within the near-hypersurface band (gt(V,V) = {c})")]
    NearHypersurface { c: f64 },

    #[error("V is not timelike in the Lorentzian sector at {point:?} (gt(V,V) = {c})")]
    NotTimelikeInLorentzSector { point: Vec<f64>, c: f64 },

    #[error("extrapolation across the hypersurface failed at {point:?} (residual {residual})")]
    ExtrapolationFailure { point: Vec<f64>, residual: f64 },

    #[error("scale factor must be non-zero")]
    ZeroScale,

    #[error("radical has dimension {dim} at {point:?}, expected 1")]
    KernelDimension { point: Vec<f64>, dim: usize },

    #[error("d(det) vanishes at {point:?} (norm {norm}); metric is not transverse type-changing")]
    NotTransverseTypeChanging { point: Vec<f64>, norm: f64 },

    #[error("determinant vanishes identically near {point:?}")]
    DegenerateRegion { point: Vec<f64> },

    #[error("triple is not in co-moving form at {point:?}")]
    NotComoving { point: Vec<f64> },

    #[error("radical classification disagrees between d(det) and df at {point:?}")]
    ClassificationMismatch { point: Vec<f64> },

    #[error("unknown gallery item `{0}`")]
    UnknownGalleryItem(String),

    #[error("{0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable machine-readable name used in CLI error objects.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse(_) => "ParseError",
            Error::Domain { .. } => "DomainError",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::InvalidChart(_) => "InvalidChart",
            Error::EigenFailure => "EigenFailure",
            Error::DegenerateMetric { .. } => "DegenerateMetric",
            Error::NotTimelike { .. } => "NotTimelike",
            Error::PivotFailure { .. } => "PivotFailure",
            Error::Normalization { .. } => "NormalizationError",
            Error::NotLorentzian { .. } => "NotLorentzian",
            Error::VanishingVector { .. } => "VanishingVector",
            Error::NearHypersurface { .. } => "NearHypersurface",
            Error::NotTimelikeInLorentzSector { .. } => "NotTimelikeInLorentzSector",
            Error::ExtrapolationFailure { .. } => "ExtrapolationFailure",
            Error::ZeroScale => "ZeroScale",
            Error::KernelDimension { .. } => "KernelDimensionError",
            Error::NotTransverseTypeChanging { .. } => "NotTransverseTypeChanging",
            Error::DegenerateRegion { .. } => "DegenerateRegion",
            Error::NotComoving { .. } => "NotComoving",
            Error::ClassificationMismatch { .. } => "ClassificationMismatch",
            Error::UnknownGalleryItem(_) => "UnknownGalleryItem",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}
