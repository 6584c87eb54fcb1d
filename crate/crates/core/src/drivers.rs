//! Per-employee key drivers.
//!
//! Attrition: along a row's root-to-leaf path, each split credits its feature
//! with the change in node probability across that edge. Averaged over the
//! forest this gives `bias + sum(deltas) = predicted probability`.
//!
//! Tenure: each regression term is measured against the training mean, so
//! `baseline + sum(deltas) = predicted total tenure`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::Dimension;
use crate::forest::{predict_proba, DecisionTree, Forest, ForestError, Node};
use crate::linreg::{predict_ttl, RegressionError, RegressionModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub feature: String,
    /// Source column; one-hot siblings share it.
    pub source: String,
    pub dimension: Dimension,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reason {
    /// Source column the reason is about.
    pub feature: String,
    pub dimension: Dimension,
    pub delta: f64,
    /// The driver raises the predicted value (attrition risk or tenure).
    pub increases: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverReport {
    /// Baseline the contributions start from.
    pub bias: f64,
    pub prediction: f64,
    pub contributions: Vec<Contribution>,
    #[serde(default)]
    pub top_reasons: Vec<Reason>,
}

impl DriverReport {
    /// `|bias + sum(delta) - prediction|`.
    pub fn completeness_gap(&self) -> f64 {
        let total: f64 = self.contributions.iter().map(|c| c.delta).sum();
        (self.bias + total - self.prediction).abs()
    }
}

/// Names, sources and dimensions of the model's input features.
#[derive(Debug, Clone, Copy)]
pub struct FeatureMeta<'a> {
    pub names: &'a [String],
    pub sources: &'a [String],
    pub dimensions: &'a [Dimension],
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error("feature metadata covers {found} features, model expects {expected}")]
    Metadata { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathContributions {
    /// Root-node attrition fraction.
    pub bias: f64,
    /// Feature index to summed probability change along the path.
    pub deltas: BTreeMap<usize, f64>,
}

pub fn tree_path_contributions(tree: &DecisionTree, x: &[f64]) -> PathContributions {
    let path = tree.path(x);
    let mut deltas = BTreeMap::new();
    for edge in path.windows(2) {
        let (parent, child) = (&tree.nodes[edge[0]], &tree.nodes[edge[1]]);
        if let Node::Split { feature, .. } = *parent {
            *deltas.entry(feature).or_insert(0.0) += child.probability() - parent.probability();
        }
    }
    PathContributions {
        bias: tree.root().probability(),
        deltas,
    }
}

/// Forest-average path decomposition. `top_reasons` is left empty.
pub fn forest_contributions(
    forest: &Forest,
    x: &[f64],
    meta: FeatureMeta<'_>,
) -> Result<DriverReport, DriverError> {
    forest.check_dimension(x)?;
    check_meta(forest.n_features(), meta)?;

    let trees = forest.trees.len() as f64;
    let mut bias = 0.0;
    let mut sums = vec![0.0; forest.n_features()];
    for tree in &forest.trees {
        let pc = tree_path_contributions(tree, x);
        bias += pc.bias;
        for (f, d) in pc.deltas {
            sums[f] += d;
        }
    }
    let contributions = sums
        .into_iter()
        .enumerate()
        .map(|(f, s)| Contribution {
            feature: meta.names[f].clone(),
            source: meta.sources[f].clone(),
            dimension: meta.dimensions[f],
            delta: s / trees,
        })
        .collect();

    Ok(DriverReport {
        bias: bias / trees,
        prediction: predict_proba(forest, x)?,
        contributions,
        top_reasons: Vec::new(),
    })
}

/// Regression terms `coef * (x - training mean)` over the model's features.
pub fn tenure_contributions(
    model: &RegressionModel,
    x: &[f64],
    meta: FeatureMeta<'_>,
) -> Result<DriverReport, DriverError> {
    model.check_dimension(x)?;
    check_meta(model.input_dim, meta)?;

    let baseline = model.intercept
        + model
            .coefficients
            .iter()
            .zip(&model.feature_means)
            .map(|(b, m)| b * m)
            .sum::<f64>();
    let contributions = model
        .columns
        .iter()
        .zip(model.coefficients.iter().zip(&model.feature_means))
        .map(|(&c, (b, m))| Contribution {
            feature: meta.names[c].clone(),
            source: meta.sources[c].clone(),
            dimension: meta.dimensions[c],
            delta: b * (x[c] - m),
        })
        .collect();
    Ok(DriverReport {
        bias: baseline,
        prediction: predict_ttl(model, x)?,
        contributions,
        top_reasons: Vec::new(),
    })
}

fn check_meta(expected: usize, meta: FeatureMeta<'_>) -> Result<(), DriverError> {
    for found in [meta.names.len(), meta.sources.len(), meta.dimensions.len()] {
        if found != expected {
            return Err(DriverError::Metadata { expected, found });
        }
    }
    Ok(())
}

/// Reason templates keyed by source column. Placeholders: `{feature}`,
/// `{value}`, `{delta_points}`, `{direction}`, `{dimension}`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Phrasebook {
    pub templates: BTreeMap<String, String>,
}

impl Phrasebook {
    pub fn from_json_slice(bytes: &[u8]) -> Result<Self, serde_json::Error> {
        serde_json::from_slice(bytes)
    }
}

/// What a report's prediction measures; decides how reasons are worded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasonKind {
    Attrition,
    Tenure,
}

/// Contributions summed per source column (one-hot siblings merged), keeping
/// first-seen order.
pub fn merge_siblings(contributions: &[Contribution]) -> Vec<Contribution> {
    let mut merged: Vec<Contribution> = Vec::new();
    let mut at: BTreeMap<&str, usize> = BTreeMap::new();
    for c in contributions {
        match at.get(c.source.as_str()) {
            Some(&i) => merged[i].delta += c.delta,
            None => {
                at.insert(&c.source, merged.len());
                merged.push(Contribution {
                    feature: c.source.clone(),
                    source: c.source.clone(),
                    dimension: c.dimension,
                    delta: c.delta,
                });
            }
        }
    }
    merged
}

/// The `k` merged contributions with the largest `|delta|`, ties broken by
/// name. Zero deltas never become reasons. `values` holds the display value
/// of each source column for this employee.
pub fn top_reasons(
    report: &DriverReport,
    k: usize,
    kind: ReasonKind,
    phrasebook: &Phrasebook,
    values: &BTreeMap<String, String>,
) -> Vec<Reason> {
    let mut merged: Vec<Contribution> = merge_siblings(&report.contributions)
        .into_iter()
        .filter(|c| c.delta != 0.0)
        .collect();
    merged.sort_by(|a, b| {
        b.delta
            .abs()
            .total_cmp(&a.delta.abs())
            .then_with(|| a.feature.cmp(&b.feature))
    });
    merged.truncate(k);
    merged
        .into_iter()
        .map(|c| {
            let value = values.get(&c.feature).map_or("n/a", String::as_str);
            Reason {
                text: render(&c, value, kind, phrasebook),
                feature: c.feature,
                dimension: c.dimension,
                delta: c.delta,
                increases: c.delta > 0.0,
            }
        })
        .collect()
}

fn render(c: &Contribution, value: &str, kind: ReasonKind, phrasebook: &Phrasebook) -> String {
    match kind {
        ReasonKind::Attrition => match phrasebook.templates.get(&c.feature) {
            Some(t) => {
                let direction = if c.delta > 0.0 { "increases" } else { "decreases" };
                t.replace("{feature}", &c.feature)
                    .replace("{value}", value)
                    .replace("{delta_points}", &points(c.delta))
                    .replace("{direction}", direction)
                    .replace("{dimension}", &c.dimension.to_string())
            }
            None => format!("{} = {} ({})", c.feature, value, c.dimension),
        },
        ReasonKind::Tenure => {
            let direction = if c.delta > 0.0 { "lengthens" } else { "shortens" };
            format!(
                "{} = {} {} expected tenure by {:.1} years ({})",
                c.feature,
                value,
                direction,
                c.delta.abs(),
                c.dimension
            )
        }
    }
}

/// Probability change in percentage points, whole when at least 1.
fn points(delta: f64) -> String {
    let p = delta.abs() * 100.0;
    if p >= 1.0 {
        format!("{p:.0}")
    } else {
        format!("{p:.1}")
    }
}
