//! Derived KPIs, the fitted feature codec, the six-dimension taxonomy, and
//! exploratory association tests.

mod codec;
mod eda;
mod kpi;
mod taxonomy;

use thiserror::Error;

pub use codec::{fit_codec, ColumnRule, EncodeDiagnostics, Encoding, FeatureCodec, FeatureVector};
pub use eda::{
    chi_square, chi_square_sf, crosstab, ln_gamma, quantile_bins, regularized_gamma_q, Binning,
    ChiSquareResult, ContingencyTable,
};
pub use kpi::{derive_kpis, DemandTable, DerivedKpis, KPI_FEATURES};
pub use taxonomy::{Dimension, DimensionTaxonomy};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("training set contains an unlabeled row")]
    UnlabeledTrainingRow,
    #[error("single-class training set")]
    SingleClass,
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("column `{0}` has fewer than 2 distinct levels")]
    TooFewLevels(String),
    #[error("contingency table must be rectangular with at least 2 rows and 2 columns")]
    TableShape,
    #[error("contingency table has a zero row or column total")]
    ZeroMargin,
}
