//! Contingency tables and the chi-square test of independence.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::ingest::{Cell, ColumnKind, DatasetSchema, EmployeeRecord};

/// How numeric columns are bucketed before tabulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// Equal-frequency bins.
    Quantile(usize),
}

impl Default for Binning {
    fn default() -> Self {
        Binning::Quantile(4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_variable: String,
    pub column_variable: String,
    pub row_levels: Vec<String>,
    pub column_levels: Vec<String>,
    /// `counts[row][column]`.
    pub counts: Vec<Vec<u64>>,
    /// Records skipped because either variable was missing.
    pub excluded: usize,
}

impl ContingencyTable {
    pub fn from_counts(counts: Vec<Vec<u64>>) -> Self {
        let rows = counts.len();
        let cols = counts.first().map_or(0, Vec::len);
        ContingencyTable {
            row_variable: "row".into(),
            column_variable: "column".into(),
            row_levels: (0..rows).map(|i| i.to_string()).collect(),
            column_levels: (0..cols).map(|i| i.to_string()).collect(),
            counts,
            excluded: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
    pub n: u64,
}

/// Cross-tabulates two columns. Categorical and boolean levels are sorted
/// alphabetically; numeric columns are binned.
pub fn crosstab(
    records: &[EmployeeRecord],
    schema: &DatasetSchema,
    var_a: &str,
    var_b: &str,
    binning: Binning,
) -> Result<ContingencyTable, FeatureError> {
    let spec_a = schema
        .column(var_a)
        .ok_or_else(|| FeatureError::UnknownColumn(var_a.to_owned()))?;
    let spec_b = schema
        .column(var_b)
        .ok_or_else(|| FeatureError::UnknownColumn(var_b.to_owned()))?;

    let complete: Vec<(&Cell, &Cell)> = records
        .iter()
        .filter_map(|r| Some((r.get(var_a)?, r.get(var_b)?)))
        .collect();
    let excluded = records.len() - complete.len();

    let (a_levels, a_index) = levels_for(spec_a.kind, complete.iter().map(|p| p.0), binning);
    let (b_levels, b_index) = levels_for(spec_b.kind, complete.iter().map(|p| p.1), binning);
    for (name, levels) in [(var_a, &a_levels), (var_b, &b_levels)] {
        if levels.len() < 2 {
            return Err(FeatureError::TooFewLevels(name.to_owned()));
        }
    }

    let mut counts = vec![vec![0u64; b_levels.len()]; a_levels.len()];
    for (i, j) in a_index.into_iter().zip(b_index) {
        counts[i][j] += 1;
    }
    Ok(ContingencyTable {
        row_variable: var_a.to_owned(),
        column_variable: var_b.to_owned(),
        row_levels: a_levels,
        column_levels: b_levels,
        counts,
        excluded,
    })
}

/// Returns level labels and the level index of every input cell.
fn levels_for<'a>(
    kind: ColumnKind,
    cells: impl Iterator<Item = &'a Cell>,
    binning: Binning,
) -> (Vec<String>, Vec<usize>) {
    let cells: Vec<&Cell> = cells.collect();
    match kind {
        ColumnKind::Numeric => {
            let values: Vec<f64> = cells.iter().map(|c| c.as_number().unwrap_or(0.0)).collect();
            let Binning::Quantile(k) = binning;
            quantile_bins(&values, k.max(1))
        }
        ColumnKind::Categorical | ColumnKind::Boolean => {
            let texts: Vec<String> = cells.iter().map(|c| c.to_string()).collect();
            let levels: Vec<String> = texts
                .iter()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect();
            let index = texts
                .iter()
                .map(|t| levels.binary_search(t).expect("level collected above"))
                .collect();
            (levels, index)
        }
    }
}

/// Equal-frequency binning. Cut points are the sorted values at positions
/// `floor(j * n / k)` for `j = 1..k`; a value lands in the bin equal to the
/// number of cut points at or below it. Repeated cut points collapse, so tied
/// data can yield fewer than `k` bins.
pub fn quantile_bins(values: &[f64], k: usize) -> (Vec<String>, Vec<usize>) {
    if values.is_empty() {
        return (Vec::new(), Vec::new());
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut cuts: Vec<f64> = (1..k).map(|j| sorted[j * n / k]).collect();
    cuts.dedup();
    // A cut at the minimum would leave bin 0 empty.
    cuts.retain(|&c| c > sorted[0]);

    let bin_of = |v: f64| cuts.partition_point(|&c| c <= v);
    let index: Vec<usize> = values.iter().map(|&v| bin_of(v)).collect();

    let mut bounds: Vec<Option<(f64, f64)>> = vec![None; cuts.len() + 1];
    for &v in &sorted {
        let b = &mut bounds[bin_of(v)];
        *b = Some(match *b {
            None => (v, v),
            Some((lo, hi)) => (lo.min(v), hi.max(v)),
        });
    }
    let labels = bounds
        .into_iter()
        .map(|b| match b {
            Some((lo, hi)) => format!("[{lo}, {hi}]"),
            None => "[]".to_owned(),
        })
        .collect();
    (labels, index)
}

/// Pearson's chi-square test of independence.
pub fn chi_square(table: &ContingencyTable) -> Result<ChiSquareResult, FeatureError> {
    let rows = table.counts.len();
    let cols = table.counts.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 || table.counts.iter().any(|r| r.len() != cols) {
        return Err(FeatureError::TableShape);
    }
    let row_totals: Vec<f64> = table
        .counts
        .iter()
        .map(|r| r.iter().sum::<u64>() as f64)
        .collect();
    let col_totals: Vec<f64> = (0..cols)
        .map(|j| table.counts.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    if row_totals.iter().chain(&col_totals).any(|&t| t == 0.0) {
        return Err(FeatureError::ZeroMargin);
    }
    let n = table.total();
    let total = n as f64;

    let mut statistic = 0.0;
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &observed) in row.iter().enumerate() {
            let expected = row_totals[i] * col_totals[j] / total;
            let d = observed as f64 - expected;
            statistic += d * d / expected;
        }
    }
    let degrees_of_freedom = (rows - 1) * (cols - 1);
    Ok(ChiSquareResult {
        statistic,
        degrees_of_freedom,
        p_value: chi_square_sf(statistic, degrees_of_freedom as f64),
        n,
    })
}

/// Upper tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    regularized_gamma_q(dof / 2.0, x / 2.0).clamp(0.0, 1.0)
}

const EPS: f64 = 1e-15;
const MAX_ITER: usize = 1000;

/// Q(a, x) = Γ(a, x) / Γ(a): series for `x < a + 1`, Lentz continued
/// fraction otherwise.
pub fn regularized_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_continued_fraction(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    let tiny = f64::MIN_POSITIVE / EPS;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Lanczos approximation (g = 7, n = 9).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}
