//! Bagged CART ensemble. Each tree votes with the attrition fraction of the
//! leaf a row falls into, and the forest score is the mean vote.

mod split;
mod tree;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use split::{best_split, gini, Split, TrainingData};
pub use tree::{grow_tree, DecisionTree, Node};

#[derive(Debug, Error, PartialEq)]
pub enum ForestError {
    #[error("gini impurity of an empty node")]
    EmptyNode,
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("expected {expected} features, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite value at row {row}, feature {feature}")]
    NonFinite { row: usize, feature: usize },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("invalid training parameters: {0}")]
    Params(String),
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSubset {
    Sqrt,
    All,
    Count(usize),
}

impl Serialize for FeatureSubset {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FeatureSubset::Sqrt => s.serialize_str("sqrt"),
            FeatureSubset::All => s.serialize_str("all"),
            FeatureSubset::Count(k) => s.serialize_u64(*k as u64),
        }
    }
}

impl<'de> Deserialize<'de> for FeatureSubset {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Count(usize),
            Name(String),
        }
        match Repr::deserialize(d)? {
            Repr::Count(k) => Ok(FeatureSubset::Count(k)),
            Repr::Name(n) if n == "sqrt" => Ok(FeatureSubset::Sqrt),
            Repr::Name(n) if n == "all" => Ok(FeatureSubset::All),
            Repr::Name(n) => Err(serde::de::Error::custom(format!(
                "features_per_split must be \"sqrt\", \"all\" or a count, got \"{n}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub features_per_split: FeatureSubset,
    pub bootstrap: bool,
    pub seed: u64,
    pub class_threshold: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_trees: 200,
            max_depth: None,
            min_samples_leaf: 2,
            features_per_split: FeatureSubset::Sqrt,
            bootstrap: true,
            seed: 42,
            class_threshold: 0.5,
        }
    }
}

impl TrainParams {
    pub fn validate(&self, n_features: usize) -> Result<(), ForestError> {
        if self.n_trees == 0 {
            return Err(ForestError::Params("n_trees must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(ForestError::Params("min_samples_leaf must be at least 1".into()));
        }
        if let FeatureSubset::Count(k) = self.features_per_split {
            if k == 0 || k > n_features {
                return Err(ForestError::Params(format!(
                    "features_per_split {k} must be in 1..={n_features}"
                )));
            }
        }
        if !(self.class_threshold > 0.0 && self.class_threshold < 1.0) {
            return Err(ForestError::Params(format!(
                "class_threshold {} must be in (0, 1)",
                self.class_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Yes,
    No,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Yes => "Yes",
            Label::No => "No",
        })
    }
}

impl From<bool> for Label {
    fn from(b: bool) -> Self {
        if b {
            Label::Yes
        } else {
            Label::No
        }
    }
}

/// `Yes` iff `p >= threshold`.
pub fn classify(p: f64, threshold: f64) -> Label {
    Label::from(p >= threshold)
}

/// Whether trees are built on the current thread or across the rayon pool.
/// The result is identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<DecisionTree>,
    pub feature_names: Vec<String>,
    pub params: TrainParams,
    /// Out-of-bag accuracy at `class_threshold`; `None` without bootstrap or
    /// when no row was ever out of bag.
    pub oob_accuracy: Option<f64>,
}

/// Per-tree seed. SplitMix64 finalizer over the master seed and tree index.
pub fn tree_seed(master: u64, tree: usize) -> u64 {
    let mut z = master ^ (tree as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn train_forest(
    data: &TrainingData,
    feature_names: &[String],
    params: &TrainParams,
    execution: Execution,
) -> Result<Forest, ForestError> {
    if feature_names.len() != data.n_features() {
        return Err(ForestError::DimensionMismatch {
            expected: data.n_features(),
            found: feature_names.len(),
        });
    }
    params.validate(data.n_features())?;
    let yes = data.labels().iter().filter(|&&y| y).count();
    if yes == 0 || yes == data.n_samples() {
        return Err(ForestError::SingleClass);
    }

    let build = |i: usize| -> (DecisionTree, Vec<bool>) {
        let seed = tree_seed(params.seed, i);
        let n = data.n_samples();
        let mut in_bag = vec![!params.bootstrap; n];
        let samples: Vec<usize> = if params.bootstrap {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            for &j in &s {
                in_bag[j] = true;
            }
            s
        } else {
            (0..n).collect()
        };
        // Offset so the bootstrap and feature-sampling streams are distinct.
        let tree = grow_tree(data, &samples, params, seed.wrapping_add(1));
        (tree, in_bag)
    };

    let built: Vec<(DecisionTree, Vec<bool>)> = match execution {
        Execution::Serial => (0..params.n_trees).map(build).collect(),
        Execution::Parallel => (0..params.n_trees).into_par_iter().map(build).collect(),
    };

    let oob_accuracy = params.bootstrap.then(|| oob_accuracy(data, &built, params)).flatten();
    Ok(Forest {
        trees: built.into_iter().map(|(t, _)| t).collect(),
        feature_names: feature_names.to_vec(),
        params: params.clone(),
        oob_accuracy,
    })
}

fn oob_accuracy(
    data: &TrainingData,
    built: &[(DecisionTree, Vec<bool>)],
    params: &TrainParams,
) -> Option<f64> {
    let mut scored = 0usize;
    let mut correct = 0usize;
    for i in 0..data.n_samples() {
        let row = data.row(i);
        let votes: Vec<f64> = built
            .iter()
            .filter(|(_, in_bag)| !in_bag[i])
            .map(|(t, _)| t.leaf_probability(&row))
            .collect();
        if votes.is_empty() {
            continue;
        }
        let p = votes.iter().sum::<f64>() / votes.len() as f64;
        scored += 1;
        if (classify(p, params.class_threshold) == Label::Yes) == data.label(i) {
            correct += 1;
        }
    }
    (scored > 0).then(|| correct as f64 / scored as f64)
}

impl Forest {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn check_dimension(&self, x: &[f64]) -> Result<(), ForestError> {
        if x.len() != self.n_features() {
            return Err(ForestError::DimensionMismatch {
                expected: self.n_features(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Mean of the per-tree leaf probabilities. Votes are summed in sorted order,
/// so the result does not depend on tree order.
pub fn predict_proba(forest: &Forest, x: &[f64]) -> Result<f64, ForestError> {
    forest.check_dimension(x)?;
    let mut votes: Vec<f64> = forest.trees.iter().map(|t| t.leaf_probability(x)).collect();
    votes.sort_by(f64::total_cmp);
    Ok(votes.iter().sum::<f64>() / votes.len() as f64)
}
