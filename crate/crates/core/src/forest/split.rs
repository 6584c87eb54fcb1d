use serde::{Deserialize, Serialize};

use super::ForestError;

/// Column-major training matrix with binary labels (`true` = attrition).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    columns: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl TrainingData {
    pub fn from_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<Self, ForestError> {
        if rows.len() != labels.len() {
            return Err(ForestError::LengthMismatch {
                rows: rows.len(),
                labels: labels.len(),
            });
        }
        let width = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); width];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(ForestError::DimensionMismatch {
                    expected: width,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ForestError::NonFinite { row: i, feature: j });
                }
                columns[j].push(v);
            }
        }
        Ok(TrainingData {
            columns,
            labels: labels.to_vec(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, sample: usize, feature: usize) -> f64 {
        self.columns[feature][sample]
    }

    pub fn label(&self, sample: usize) -> bool {
        self.labels[sample]
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn row(&self, sample: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[sample]).collect()
    }
}

/// Gini impurity `1 - p_yes^2 - p_no^2` of a two-class node.
pub fn gini(yes: usize, no: usize) -> Result<f64, ForestError> {
    let total = yes + no;
    if total == 0 {
        return Err(ForestError::EmptyNode);
    }
    Ok(gini_unchecked(yes as f64, total as f64))
}

fn gini_unchecked(yes: f64, total: f64) -> f64 {
    let p = yes / total;
    let q = 1.0 - p;
    1.0 - p * p - q * q
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    /// Samples with `value <= threshold` go left.
    pub threshold: f64,
    pub impurity_decrease: f64,
}

/// Smallest improvement that counts as better than the incumbent split.
const TIE_EPS: f64 = 1e-12;

/// Exhaustive threshold search over `candidate_features`.
///
/// Thresholds sit midway between consecutive distinct sorted values. The split
/// with the largest weighted impurity decrease wins; ties go to the lower
/// feature index, then the lower threshold. Returns `None` when no split has a
/// positive decrease with both children holding `min_samples_leaf` samples.
/// `samples` may repeat indices (bootstrap resamples).
pub fn best_split(
    data: &TrainingData,
    samples: &[usize],
    candidate_features: &[usize],
    min_samples_leaf: usize,
) -> Option<Split> {
    let n = samples.len();
    if n < 2 {
        return None;
    }
    let min_leaf = min_samples_leaf.max(1);
    let total_yes = samples.iter().filter(|&&s| data.label(s)).count();
    let parent = gini_unchecked(total_yes as f64, n as f64);
    if parent == 0.0 {
        return None;
    }

    let mut features = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<Split> = None;
    let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &f in &features {
        sorted.clear();
        sorted.extend(samples.iter().map(|&s| (data.value(s, f), data.label(s))));
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_yes = 0usize;
        for i in 0..n - 1 {
            if sorted[i].1 {
                left_yes += 1;
            }
            let (lo, hi) = (sorted[i].0, sorted[i + 1].0);
            if lo == hi {
                continue;
            }
            let left_n = i + 1;
            let right_n = n - left_n;
            if left_n < min_leaf || right_n < min_leaf {
                continue;
            }
            let right_yes = total_yes - left_yes;
            let weighted = (left_n as f64 * gini_unchecked(left_yes as f64, left_n as f64)
                + right_n as f64 * gini_unchecked(right_yes as f64, right_n as f64))
                / n as f64;
            let decrease = parent - weighted;
            if decrease <= TIE_EPS {
                continue;
            }
            if best.map_or(true, |b| decrease > b.impurity_decrease + TIE_EPS) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    impurity_decrease: decrease,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> TrainingData {
        TrainingData::from_rows(
            &[vec![1.0], vec![2.0], vec![3.0], vec![4.0]],
            &[false, false, true, true],
        )
        .unwrap()
    }

    /// Brute force: try every midpoint and keep the best weighted decrease.
    fn exhaustive(values: &[f64], labels: &[bool]) -> (f64, f64) {
        let n = values.len() as f64;
        let g = |ys: &[bool]| {
            let p = ys.iter().filter(|&&y| y).count() as f64 / ys.len() as f64;
            1.0 - p * p - (1.0 - p) * (1.0 - p)
        };
        let parent = g(labels);
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut best = (f64::NAN, f64::NEG_INFINITY);
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let left: Vec<bool> = values.iter().zip(labels).filter(|(v, _)| **v <= t).map(|(_, y)| *y).collect();
            let right: Vec<bool> = values.iter().zip(labels).filter(|(v, _)| **v > t).map(|(_, y)| *y).collect();
            let d = parent
                - (left.len() as f64 / n) * g(&left)
                - (right.len() as f64 / n) * g(&right);
            if d > best.1 + 1e-12 {
                best = (t, d);
            }
        }
        best
    }

    #[test]
    fn gini_values() {
        assert_eq!(gini(0, 8).unwrap(), 0.0);
        assert_eq!(gini(4, 4).unwrap(), 0.5);
        assert_eq!(gini(1, 3).unwrap(), 0.375);
        assert!(gini(0, 0).is_err());
    }

    #[test]
    fn separable_split_matches_exhaustive_search() {
        let data = separable();
        let (t, d) = exhaustive(&[1.0, 2.0, 3.0, 4.0], &[false, false, true, true]);
        assert_eq!((t, d), (2.5, 0.5));
        let split = best_split(&data, &[0, 1, 2, 3], &[0], 1).unwrap();
        assert_eq!(split.feature, 0);
        assert_eq!(split.threshold, 2.5);
        assert_eq!(split.impurity_decrease, 0.5);
    }

    #[test]
    fn pure_node_has_no_split() {
        let data = TrainingData::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], &[true, true, true]).unwrap();
        assert_eq!(best_split(&data, &[0, 1, 2], &[0], 1), None);
    }

    #[test]
    fn tie_goes_to_lower_feature_index() {
        let rows = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0], vec![4.0, 4.0]];
        let data = TrainingData::from_rows(&rows, &[false, false, true, true]).unwrap();
        let split = best_split(&data, &[0, 1, 2, 3], &[1, 0], 1).unwrap();
        assert_eq!(split.feature, 0);
    }

    #[test]
    fn min_samples_leaf_can_forbid_every_split() {
        let data = separable();
        assert!(best_split(&data, &[0, 1, 2, 3], &[0], 2).is_some());
        assert_eq!(best_split(&data, &[0, 1, 2, 3], &[0], 3), None);
    }

    #[test]
    fn constant_feature_has_no_split() {
        let data = TrainingData::from_rows(&[vec![5.0], vec![5.0]], &[true, false]).unwrap();
        assert_eq!(best_split(&data, &[0, 1], &[0], 1), None);
    }

    #[test]
    fn random_sets_agree_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(2..30);
            let values: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..8))).collect();
            let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
            let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
            let data = TrainingData::from_rows(&rows, &labels).unwrap();
            let samples: Vec<usize> = (0..n).collect();
            let (t, d) = exhaustive(&values, &labels);
            match best_split(&data, &samples, &[0], 1) {
                Some(s) => {
                    assert!((s.impurity_decrease - d).abs() < 1e-12);
                    assert_eq!(s.threshold, t);
                }
                None => assert!(!(d > 1e-12)),
            }
        }
    }
}
