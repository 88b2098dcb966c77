//! Confusion matrices and micro-averaged F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<u64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs.
    pub recall: Option<f64>,
}

impl ConfusionMatrix {
    pub fn zeros(n_classes: usize) -> Self {
        ConfusionMatrix {
            counts: vec![vec![0; n_classes]; n_classes],
        }
    }

    pub fn from_labels(truth: &[usize], pred: &[usize], n_classes: usize) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch {
                expected: truth.len(),
                actual: pred.len(),
                context: "predictions",
            });
        }
        let mut m = Self::zeros(n_classes);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= n_classes || p >= n_classes {
                return Err(Error::Config(format!("class index outside {n_classes} classes")));
            }
            m.counts[t][p] += 1;
        }
        Ok(m)
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn add(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.n_classes() != self.n_classes() {
            return Err(Error::DimensionMismatch {
                expected: self.n_classes(),
                actual: other.n_classes(),
                context: "confusion matrix classes",
            });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.n_classes()).map(|c| self.counts[c][c]).sum()
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<u64> {
        (0..self.n_classes())
            .map(|c| self.counts.iter().map(|r| r[c]).sum())
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }

    /// Micro-averaged F1 from pooled per-class true positives, false positives
    /// and false negatives. With exactly one prediction per row every error is
    /// one false positive and one false negative, so this equals accuracy.
    pub fn micro_f1(&self) -> f64 {
        let k = self.n_classes();
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        let cols = self.col_sums();
        let rows = self.row_sums();
        for c in 0..k {
            let hit = self.counts[c][c];
            tp += hit;
            fp += cols[c] - hit;
            fn_ += rows[c] - hit;
        }
        let denom = 2 * tp + fp + fn_;
        if denom == 0 {
            return 0.0;
        }
        2.0 * tp as f64 / denom as f64
    }

    pub fn per_class(&self, class_set: &[String]) -> Vec<ClassMetrics> {
        let rows = self.row_sums();
        let cols = self.col_sums();
        class_set
            .iter()
            .enumerate()
            .map(|(c, name)| {
                let hit = self.counts[c][c] as f64;
                ClassMetrics {
                    class: name.clone(),
                    support: rows[c],
                    precision: (cols[c] > 0).then(|| hit / cols[c] as f64),
                    recall: (rows[c] > 0).then(|| hit / rows[c] as f64),
                }
            })
            .collect()
    }
}

/// Micro-averaged F1 of two label sequences.
pub fn micro_f1(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::Empty("micro-F1 of zero predictions".into()));
    }
    let k = truth.iter().chain(pred).max().map_or(0, |m| m + 1);
    Ok(ConfusionMatrix::from_labels(truth, pred, k)?.micro_f1())
}

pub fn accuracy(truth: &[usize], pred: &[usize]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            actual: pred.len(),
            context: "predictions",
        });
    }
    if truth.is_empty() {
        return Err(Error::Empty("accuracy of zero predictions".into()));
    }
    Ok(truth.iter().zip(pred).filter(|(a, b)| a == b).count() as f64 / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_all_wrong() {
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2]).unwrap(), 1.0);
        assert_eq!(micro_f1(&[0, 1, 2], &[1, 2, 0]).unwrap(), 0.0);
    }

    #[test]
    fn four_of_five() {
        let f = micro_f1(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 2]).unwrap();
        assert!((f - 0.8).abs() < 1e-15);
    }

    #[test]
    fn length_mismatch_and_empty() {
        assert!(micro_f1(&[0, 1], &[0]).is_err());
        assert!(micro_f1(&[], &[]).is_err());
    }

    #[test]
    fn per_class_and_sums() {
        let m = ConfusionMatrix::from_labels(&[0, 0, 1, 1, 2], &[0, 1, 1, 1, 2], 4).unwrap();
        assert_eq!(m.row_sums(), vec![2, 2, 1, 0]);
        let names: Vec<String> = ["a", "b", "c", "d"].iter().map(|s| s.to_string()).collect();
        let pc = m.per_class(&names);
        assert_eq!(pc[0].precision, Some(1.0));
        assert_eq!(pc[0].recall, Some(0.5));
        assert_eq!(pc[1].precision, Some(2.0 / 3.0));
        assert_eq!(pc[3].recall, None);
    }
}
