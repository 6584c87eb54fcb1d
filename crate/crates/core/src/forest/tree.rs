use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split, TrainingData};
use super::{FeatureSubset, TrainParams};

/// Every node carries the attrition fraction and sample count of the training
/// rows that reached it, so paths can be decomposed later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        probability: f64,
        samples: usize,
    },
    Leaf {
        probability: f64,
        samples: usize,
    },
}

impl Node {
    pub fn probability(&self) -> f64 {
        match *self {
            Node::Split { probability, .. } | Node::Leaf { probability, .. } => probability,
        }
    }

    pub fn samples(&self) -> usize {
        match *self {
            Node::Split { samples, .. } | Node::Leaf { samples, .. } => samples,
        }
    }
}

/// Binary CART tree stored in pre-order; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    /// Node indices from the root to the leaf that `x` lands in.
    pub fn path(&self, x: &[f64]) -> Vec<usize> {
        let mut path = vec![0];
        let mut at = 0;
        while let Node::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } = self.nodes[at]
        {
            at = if x[feature] <= threshold { left } else { right };
            path.push(at);
        }
        path
    }

    pub fn leaf_probability(&self, x: &[f64]) -> f64 {
        let leaf = *self.path(x).last().expect("path is never empty");
        self.nodes[leaf].probability()
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    /// Structural checks: children in range, child counts sum to the parent,
    /// probabilities in [0, 1].
    pub fn is_well_formed(&self) -> bool {
        self.nodes.iter().all(|n| {
            let p = n.probability();
            if !(0.0..=1.0).contains(&p) {
                return false;
            }
            match *n {
                Node::Leaf { .. } => true,
                Node::Split {
                    left,
                    right,
                    samples,
                    ..
                } => {
                    left < self.nodes.len()
                        && right < self.nodes.len()
                        && self.nodes[left].samples() + self.nodes[right].samples() == samples
                }
            }
        })
    }
}

struct Grower<'a> {
    data: &'a TrainingData,
    params: &'a TrainParams,
    features_per_split: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

/// Grows one tree on `samples` (indices into `data`, repeats allowed).
pub fn grow_tree(
    data: &TrainingData,
    samples: &[usize],
    params: &TrainParams,
    tree_seed: u64,
) -> DecisionTree {
    assert!(!samples.is_empty(), "cannot grow a tree on zero samples");
    let p = data.n_features();
    let features_per_split = match params.features_per_split {
        FeatureSubset::All => p,
        FeatureSubset::Sqrt => ((p as f64).sqrt().round() as usize).clamp(1, p.max(1)),
        FeatureSubset::Count(k) => k.clamp(1, p.max(1)),
    };
    let mut grower = Grower {
        data,
        params,
        features_per_split,
        rng: ChaCha8Rng::seed_from_u64(tree_seed),
        nodes: Vec::new(),
    };
    grower.grow(samples.to_vec(), 0);
    DecisionTree {
        nodes: grower.nodes,
    }
}

impl Grower<'_> {
    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let n = samples.len();
        let yes = samples.iter().filter(|&&s| self.data.label(s)).count();
        let probability = yes as f64 / n as f64;
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            probability,
            samples: n,
        });

        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        let pure = yes == 0 || yes == n;
        if depth_capped || pure || n < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }

        let p = self.data.n_features();
        let candidates: Vec<usize> = if self.features_per_split >= p {
            (0..p).collect()
        } else {
            let mut c = index::sample(&mut self.rng, p, self.features_per_split).into_vec();
            c.sort_unstable();
            c
        };
        let Some(split) = best_split(self.data, &samples, &candidates, self.params.min_samples_leaf)
        else {
            return id;
        };

        let (left_samples, right_samples): (Vec<usize>, Vec<usize>) = samples
            .iter()
            .partition(|&&s| self.data.value(s, split.feature) <= split.threshold);
        drop(samples);
        let left = self.grow(left_samples, depth + 1);
        let right = self.grow(right_samples, depth + 1);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
            probability,
            samples: n,
        };
        id
    }
}
