use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{EmployeeRecord, IngestError};

/// Splits records into (train, validation). `|train| = round(ratio * N)`.
///
/// With `stratify`, each class contributes `floor(ratio * n_class)` rows plus
/// at most one more (largest remainder first), so per-class train counts stay
/// within one record of proportional. Both outputs keep input order.
pub fn split_train_validation(
    records: &[EmployeeRecord],
    ratio: f64,
    seed: u64,
    stratify: bool,
) -> Result<(Vec<EmployeeRecord>, Vec<EmployeeRecord>), IngestError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(IngestError::InvalidRatio(ratio));
    }
    if records.is_empty() {
        return Err(IngestError::EmptyInput);
    }

    let n_train = (ratio * records.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_train = vec![false; records.len()];

    if stratify {
        // Class order: No, then Yes.
        let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, r) in records.iter().enumerate() {
            let label = r.attrition.ok_or_else(|| IngestError::Unlabeled(r.id.clone()))?;
            classes[label as usize].push(i);
        }
        for (c, members) in classes.iter().enumerate() {
            if members.len() < 2 {
                return Err(IngestError::ClassTooSmall {
                    label: if c == 1 { "Yes" } else { "No" }.into(),
                    count: members.len(),
                });
            }
        }

        let quotas = allocate(&[classes[0].len(), classes[1].len()], ratio, n_train);
        for (members, quota) in classes.iter_mut().zip(quotas) {
            members.shuffle(&mut rng);
            for &i in &members[..quota] {
                in_train[i] = true;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..records.len()).collect();
        order.shuffle(&mut rng);
        for &i in &order[..n_train] {
            in_train[i] = true;
        }
    }

    let (train, validation): (Vec<_>, Vec<_>) = records
        .iter()
        .zip(in_train)
        .partition(|(_, keep)| *keep);
    Ok((
        train.into_iter().map(|(r, _)| r.clone()).collect(),
        validation.into_iter().map(|(r, _)| r.clone()).collect(),
    ))
}

/// Largest-remainder allocation of `total` slots across classes.
fn allocate(sizes: &[usize], ratio: f64, total: usize) -> Vec<usize> {
    let exact: Vec<f64> = sizes.iter().map(|&n| ratio * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = total.saturating_sub(quotas.iter().sum());

    let mut by_remainder: Vec<usize> = (0..sizes.len()).collect();
    by_remainder.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    while remaining > 0 {
        let before = remaining;
        for &c in &by_remainder {
            if remaining > 0 && quotas[c] < sizes[c] {
                quotas[c] += 1;
                remaining -= 1;
            }
        }
        if before == remaining {
            break;
        }
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{EmployeeId, EmployeeRecord};
    use std::collections::{BTreeMap, BTreeSet};

    fn records(labels: &[bool]) -> Vec<EmployeeRecord> {
        labels
            .iter()
            .enumerate()
            .map(|(i, &y)| EmployeeRecord {
                id: EmployeeId((i + 1).to_string()),
                raw: BTreeMap::new(),
                years_at_company: 1.0,
                total_working_years: 1.0,
                num_companies_worked: 0.0,
                attrition: Some(y),
                inconsistent: false,
            })
            .collect()
    }

    fn ids(rs: &[EmployeeRecord]) -> Vec<String> {
        rs.iter().map(|r| r.id.0.clone()).collect()
    }

    #[test]
    fn two_records_half_split_is_stable() {
        let rs = records(&[true, false]);
        let (a, b) = split_train_validation(&rs, 0.5, 9, false).unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        let (c, d) = split_train_validation(&rs, 0.5, 9, false).unwrap();
        assert_eq!(ids(&a), ids(&c));
        assert_eq!(ids(&b), ids(&d));
    }

    #[test]
    fn stratified_five_and_five() {
        let labels: Vec<bool> = (0..10).map(|i| i % 2 == 0).collect();
        let rs = records(&labels);
        // Every stratified split of 5 Yes / 5 No at 0.8 has 4 + 4 in train.
        for seed in 0..50 {
            let (train, val) = split_train_validation(&rs, 0.8, seed, true).unwrap();
            let yes = train.iter().filter(|r| r.attrition == Some(true)).count();
            assert_eq!((yes, train.len() - yes), (4, 4));
            assert_eq!(val.len(), 2);
        }
    }

    #[test]
    fn partition_is_disjoint_and_exhaustive() {
        let labels: Vec<bool> = (0..37).map(|i| i % 5 == 0).collect();
        let rs = records(&labels);
        let (train, val) = split_train_validation(&rs, 0.7, 3, true).unwrap();
        let t: BTreeSet<_> = ids(&train).into_iter().collect();
        let v: BTreeSet<_> = ids(&val).into_iter().collect();
        assert!(t.is_disjoint(&v));
        assert_eq!(t.len() + v.len(), 37);
        assert_eq!(train.len(), (0.7f64 * 37.0).round() as usize);
    }

    #[test]
    fn singleton_class_cannot_be_stratified() {
        let rs = records(&[true, false, false, false]);
        assert!(matches!(
            split_train_validation(&rs, 0.5, 1, true),
            Err(IngestError::ClassTooSmall { .. })
        ));
        assert!(split_train_validation(&rs, 0.5, 1, false).is_ok());
    }

    #[test]
    fn rejects_bad_ratio_and_empty_input() {
        let rs = records(&[true, false]);
        assert!(split_train_validation(&rs, 1.0, 0, false).is_err());
        assert!(split_train_validation(&rs, 0.0, 0, false).is_err());
        assert!(split_train_validation(&[], 0.5, 0, false).is_err());
    }

    #[test]
    fn allocation_respects_total() {
        assert_eq!(allocate(&[1233, 237], 0.8, 1176), vec![986, 190]);
        assert_eq!(allocate(&[5, 5], 0.8, 8), vec![4, 4]);
    }
}
