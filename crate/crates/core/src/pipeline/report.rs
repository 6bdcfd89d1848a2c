//! Classification metrics and their TAB-separated rendering.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Accuracy figures and confusion matrix of one test run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub overall_accuracy: f64,
    /// Fraction of each class's test videos predicted correctly; NaN for a
    /// class with no test videos.
    pub per_class_accuracy: Vec<f64>,
    /// `confusion_matrix[truth][predicted]`.
    pub confusion_matrix: Vec<Vec<usize>>,
}

impl EvaluationReport {
    /// Tallies `(true label, predicted label)` pairs.
    pub fn from_predictions(num_classes: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::invalid("cannot evaluate an empty test set"));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for &(truth, predicted) in pairs {
            if truth >= num_classes || predicted >= num_classes {
                return Err(Error::invalid(format!(
                    "label pair ({truth}, {predicted}) outside 0..{num_classes}"
                )));
            }
            confusion[truth][predicted] += 1;
        }
        let correct: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let total: usize = row.iter().sum();
                if total == 0 {
                    f64::NAN
                } else {
                    row[c] as f64 / total as f64
                }
            })
            .collect();
        Ok(EvaluationReport {
            overall_accuracy: correct as f64 / pairs.len() as f64,
            per_class_accuracy: per_class,
            confusion_matrix: confusion,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.per_class_accuracy.len()
    }

    pub fn test_count(&self) -> usize {
        self.confusion_matrix.iter().flatten().sum()
    }
}

/// Per-run reports of a repeated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub reports: Vec<EvaluationReport>,
    pub mean_accuracy: f64,
}

impl ExperimentSummary {
    pub fn new(reports: Vec<EvaluationReport>) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::invalid("an experiment needs at least one run"));
        }
        let mean = reports.iter().map(|r| r.overall_accuracy).sum::<f64>() / reports.len() as f64;
        Ok(ExperimentSummary {
            reports,
            mean_accuracy: mean,
        })
    }

    /// Mean of each class's accuracy across runs.
    pub fn mean_per_class(&self) -> Vec<f64> {
        let k = self.reports[0].num_classes();
        (0..k)
            .map(|c| {
                self.reports
                    .iter()
                    .map(|r| r.per_class_accuracy[c])
                    .sum::<f64>()
                    / self.reports.len() as f64
            })
            .collect()
    }

    /// A header line, one line per run and a `mean` line. Columns are the run
    /// number, overall accuracy and per-class accuracies. Numbers use the
    /// shortest representation that parses back to the same value.
    pub fn to_table(&self) -> String {
        let mut out = String::from("run\toverall");
        for c in 0..self.reports[0].num_classes() {
            let _ = write!(out, "\tclass_{c}");
        }
        out.push('\n');
        let mut row = |label: String, overall: f64, per_class: &[f64]| {
            out.push_str(&label);
            let _ = write!(out, "\t{overall}");
            for a in per_class {
                let _ = write!(out, "\t{a}");
            }
            out.push('\n');
        };
        for (r, report) in self.reports.iter().enumerate() {
            row(
                (r + 1).to_string(),
                report.overall_accuracy,
                &report.per_class_accuracy,
            );
        }
        row("mean".into(), self.mean_accuracy, &self.mean_per_class());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_correct() {
        let r = EvaluationReport::from_predictions(3, &[(0, 0), (1, 1), (2, 2), (1, 1)]).unwrap();
        assert_eq!(r.overall_accuracy, 1.0);
        assert_eq!(r.per_class_accuracy, vec![1.0; 3]);
        assert_eq!(
            r.confusion_matrix,
            vec![vec![1, 0, 0], vec![0, 2, 0], vec![0, 0, 1]]
        );
    }

    #[test]
    fn constant_predictor_on_balanced_set() {
        let r = EvaluationReport::from_predictions(2, &[(0, 0), (0, 0), (1, 0), (1, 0)]).unwrap();
        assert_eq!(r.overall_accuracy, 0.5);
        assert_eq!(r.per_class_accuracy, vec![1.0, 0.0]);
        assert_eq!(r.confusion_matrix, vec![vec![2, 0], vec![2, 0]]);
    }

    #[test]
    fn identities_against_recount() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pairs: Vec<(usize, usize)> = (0..200)
            .map(|_| (rng.random_range(0..4), rng.random_range(0..4)))
            .collect();
        let r = EvaluationReport::from_predictions(4, &pairs).unwrap();
        let correct = pairs.iter().filter(|(a, b)| a == b).count();
        assert_eq!(r.overall_accuracy, correct as f64 / 200.0);
        for c in 0..4 {
            let total = pairs.iter().filter(|(a, _)| *a == c).count();
            assert_eq!(r.confusion_matrix[c].iter().sum::<usize>(), total);
            let hit = pairs.iter().filter(|(a, b)| *a == c && *b == c).count();
            assert_eq!(r.per_class_accuracy[c], hit as f64 / total as f64);
        }
        assert_eq!(r.test_count(), 200);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(EvaluationReport::from_predictions(2, &[]).is_err());
        assert!(EvaluationReport::from_predictions(2, &[(0, 2)]).is_err());
    }

    #[test]
    fn table_mean_row() {
        let a = EvaluationReport::from_predictions(2, &[(0, 0), (1, 0)]).unwrap();
        let b = EvaluationReport::from_predictions(2, &[(0, 0), (1, 1)]).unwrap();
        let s = ExperimentSummary::new(vec![a, b]).unwrap();
        assert_eq!(s.mean_accuracy, 0.75);
        assert_eq!(
            s.to_table(),
            "run\toverall\tclass_0\tclass_1\n1\t0.5\t1\t0\n2\t1\t1\t1\nmean\t0.75\t1\t0.5\n"
        );
        assert!(ExperimentSummary::new(vec![]).is_err());
    }
}
