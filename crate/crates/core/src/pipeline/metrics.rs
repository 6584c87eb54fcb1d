use serde::{Deserialize, Serialize};

use crate::linreg::fit_quality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    /// `truth` and `predicted` are attrition flags; extra elements of the
    /// longer slice are ignored.
    pub fn from_pairs(truth: &[bool], predicted: &[bool]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => c.tp += 1,
                (false, true) => c.fp += 1,
                (false, false) => c.tn += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Tenure-regression fit on validation leavers. `None` without leavers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub n: usize,
    pub rmse: Option<f64>,
    pub r_squared: Option<f64>,
}

impl RegressionMetrics {
    pub fn compute(predicted: &[f64], observed: &[f64]) -> Self {
        if predicted.is_empty() {
            return RegressionMetrics::default();
        }
        let (rmse, r2) = fit_quality(predicted, observed);
        RegressionMetrics {
            n: predicted.len(),
            rmse: Some(rmse),
            r_squared: Some(r2),
        }
    }
}

/// Classification metrics at a fixed threshold. Ratios with a zero
/// denominator are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub n: usize,
    pub threshold: f64,
    pub accuracy: f64,
    /// True-positive rate on leavers.
    pub recall: Option<f64>,
    /// True-negative rate on stayers.
    pub specificity: Option<f64>,
    pub precision: Option<f64>,
    pub confusion: Confusion,
    /// Share of rows classified as leavers.
    pub predicted_attrition_ratio: f64,
    pub regression: RegressionMetrics,
}

impl EvalMetrics {
    /// `None` on an empty confusion matrix.
    pub fn from_confusion(c: Confusion, threshold: f64, regression: RegressionMetrics) -> Option<Self> {
        let n = c.total();
        if n == 0 {
            return None;
        }
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        Some(EvalMetrics {
            n,
            threshold,
            accuracy: (c.tp + c.tn) as f64 / n as f64,
            recall: ratio(c.tp, c.tp + c.fn_),
            specificity: ratio(c.tn, c.tn + c.fp),
            precision: ratio(c.tp, c.tp + c.fp),
            confusion: c,
            predicted_attrition_ratio: (c.tp + c.fp) as f64 / n as f64,
            regression,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn metrics(truth: &[bool], predicted: &[bool]) -> EvalMetrics {
        EvalMetrics::from_confusion(
            Confusion::from_pairs(truth, predicted),
            0.5,
            RegressionMetrics::default(),
        )
        .unwrap()
    }

    #[test]
    fn four_case_arithmetic() {
        let m = metrics(&[true, false, false, true], &[true, false, true, true]);
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.specificity, Some(0.5));
        assert_eq!(m.precision, Some(2.0 / 3.0));
        assert_eq!(
            m.confusion,
            Confusion {
                tp: 2,
                fp: 1,
                tn: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn perfect_predictions() {
        let t = [true, false, true, false, false];
        let m = metrics(&t, &t);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion.fp + m.confusion.fn_, 0);
    }

    #[test]
    fn all_negative_on_ibm_ratio() {
        let truth: Vec<bool> = (0..1470).map(|i| i < 237).collect();
        let m = metrics(&truth, &vec![false; 1470]);
        assert!((m.accuracy - 1233.0 / 1470.0).abs() < 1e-15);
        assert!((m.accuracy - 0.839).abs() < 5e-4);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.precision, None);
    }

    #[test]
    fn empty_is_none() {
        assert!(EvalMetrics::from_confusion(Confusion::default(), 0.5, RegressionMetrics::default()).is_none());
    }

    #[test]
    fn confusion_serializes_fn_key() {
        let json = serde_json::to_string(&Confusion::default()).unwrap();
        assert_eq!(json, r#"{"tp":0,"fp":0,"tn":0,"fn":0}"#);
    }
}
