//! Confusion statistics and the composite classification fitness.
//!
//! The fitness is `mean(tpr) + mean(tnr) + mean(ppv) + mean(npv) + mean(acc)`
//! over the ten one-vs-rest problems, plus overall accuracy, plus an inverse
//! mean-squared-error term, for a ceiling of 7. Undefined rates (0/0) count
//! as 0.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mnist::NUM_CLASSES;

pub type Scores = [f64; NUM_CLASSES];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("{predictions} predictions for {labels} labels")]
    Length { predictions: usize, labels: usize },
    #[error("class {0} out of range")]
    Class(usize),
    #[error("no samples")]
    Empty,
}

/// +1 for the true class, -1 elsewhere.
pub fn bipolar_target(label: usize) -> Scores {
    let mut t = [-1.0; NUM_CLASSES];
    t[label] = 1.0;
    t
}

/// Index of the largest score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|c| self.counts[c][c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.trace(), self.total())
    }
}

pub fn confusion(predictions: &[usize], labels: &[usize]) -> Result<ConfusionMatrix, MetricsError> {
    if predictions.len() != labels.len() {
        return Err(MetricsError::Length {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&p, &l) in predictions.iter().zip(labels) {
        if p >= NUM_CLASSES {
            return Err(MetricsError::Class(p));
        }
        if l >= NUM_CLASSES {
            return Err(MetricsError::Class(l));
        }
        cm.counts[l][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tpr: f64,
    pub tnr: f64,
    pub ppv: f64,
    pub npv: f64,
    pub acc: f64,
}

impl ClassMetrics {
    pub fn sum(&self) -> f64 {
        self.tpr + self.tnr + self.ppv + self.npv + self.acc
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 { 0.0 } else { num as f64 / den as f64 }
}

/// One-vs-rest rates for `class`.
pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> ClassMetrics {
    let total = cm.total();
    let tp = cm.counts[class][class];
    let row: u64 = cm.counts[class].iter().sum();
    let col: u64 = (0..NUM_CLASSES).map(|r| cm.counts[r][class]).sum();
    let fn_ = row - tp;
    let fp = col - tp;
    let tn = total - tp - fn_ - fp;
    ClassMetrics {
        tpr: ratio(tp, tp + fn_),
        tnr: ratio(tn, tn + fp),
        ppv: ratio(tp, tp + fp),
        npv: ratio(tn, tn + fn_),
        acc: ratio(tp + tn, total),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    /// Average each rate over the classes (ceiling 7).
    #[default]
    Mean,
    /// Add up all fifty per-class rates (ceiling 52).
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MseTerm {
    /// `1 / (1 + mse)`, bounded in (0, 1].
    #[default]
    InverseOnePlus,
    /// `1 / mse`, unbounded; infinite for a perfect fit.
    Inverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitnessForm {
    pub aggregation: Aggregation,
    pub mse_term: MseTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub accuracy: f64,
    pub mse: f64,
    pub mse_term: f64,
    pub fitness: f64,
    pub confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Mean over samples and outputs of `(score - target)^2` with bipolar targets.
pub fn mean_squared_error(scores: &[Scores], labels: &[usize]) -> f64 {
    let sum: f64 = scores
        .iter()
        .zip(labels)
        .map(|(s, &l)| {
            let t = bipolar_target(l);
            s.iter().zip(&t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        })
        .sum();
    sum / (scores.len() * NUM_CLASSES) as f64
}

pub fn fitness_score(
    scores: &[Scores],
    predictions: &[usize],
    labels: &[usize],
    form: FitnessForm,
) -> Result<FitnessReport, MetricsError> {
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(MetricsError::Length {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let cm = confusion(predictions, labels)?;
    let per_class: [ClassMetrics; NUM_CLASSES] = std::array::from_fn(|c| class_metrics(&cm, c));
    let rates: f64 = per_class.iter().map(ClassMetrics::sum).sum();
    let rates = match form.aggregation {
        Aggregation::Mean => rates / NUM_CLASSES as f64,
        Aggregation::Sum => rates,
    };
    let mse = mean_squared_error(scores, labels);
    let mse_term = match form.mse_term {
        MseTerm::InverseOnePlus => 1.0 / (1.0 + mse),
        MseTerm::Inverse => 1.0 / mse,
    };
    let accuracy = cm.accuracy();
    Ok(FitnessReport {
        per_class,
        accuracy,
        mse,
        mse_term,
        fitness: rates + accuracy + mse_term,
        confusion: cm.counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels_balanced(per_class: usize) -> Vec<usize> {
        (0..per_class * NUM_CLASSES).map(|i| i % NUM_CLASSES).collect()
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = labels_balanced(3);
        let cm = confusion(&labels, &labels).unwrap();
        for r in 0..NUM_CLASSES {
            for c in 0..NUM_CLASSES {
                assert_eq!(cm.counts[r][c], if r == c { 3 } else { 0 });
            }
        }
        for c in 0..NUM_CLASSES {
            let m = class_metrics(&cm, c);
            assert_eq!([m.tpr, m.tnr, m.ppv, m.npv, m.acc], [1.0; 5]);
        }
    }

    #[test]
    fn single_miss() {
        let cm = confusion(&[5], &[3]).unwrap();
        assert_eq!(cm.counts[3][5], 1);
        assert_eq!(cm.total(), 1);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(confusion(&[1, 2], &[1]), Err(MetricsError::Length { .. })));
    }

    #[test]
    fn absent_class_rules() {
        let cm = confusion(&[1, 2, 2], &[1, 2, 1]).unwrap();
        let m = class_metrics(&cm, 7);
        assert_eq!(m.tpr, 0.0);
        assert_eq!(m.tnr, 1.0);
        assert_eq!(m.ppv, 0.0);
        assert_eq!(m.npv, 1.0);
        assert_eq!(m.acc, 1.0);
    }

    #[test]
    fn collapsed_three_class_by_hand() {
        // labels 0,0,1,1,2,2 all predicted 0
        let cm = confusion(&[0; 6], &[0, 0, 1, 1, 2, 2]).unwrap();
        let m0 = class_metrics(&cm, 0);
        // TP=2 FN=0 FP=4 TN=0
        assert_eq!(m0.tpr, 1.0);
        assert_eq!(m0.tnr, 0.0);
        assert_eq!(m0.ppv, 2.0 / 6.0);
        assert_eq!(m0.npv, 0.0);
        assert_eq!(m0.acc, 2.0 / 6.0);
        let m1 = class_metrics(&cm, 1);
        // TP=0 FN=2 FP=0 TN=4
        assert_eq!(m1.tpr, 0.0);
        assert_eq!(m1.tnr, 1.0);
        assert_eq!(m1.ppv, 0.0);
        assert_eq!(m1.npv, 4.0 / 6.0);
        assert_eq!(m1.acc, 4.0 / 6.0);
    }

    #[test]
    fn perfect_classifier_scores_seven() {
        let labels = labels_balanced(4);
        let scores: Vec<Scores> = labels.iter().map(|&l| bipolar_target(l)).collect();
        let r = fitness_score(&scores, &labels, &labels, FitnessForm::default()).unwrap();
        assert_eq!(r.fitness, 7.0);
        assert_eq!(r.mse, 0.0);
    }

    #[test]
    fn all_zero_scores_on_balanced_labels() {
        // class 0: TP=n FN=0 FP=9n TN=0 -> tpr 1, tnr 0, ppv .1, npv 0, acc .1
        // class c>0: TP=0 FN=n FP=0 TN=9n -> tpr 0, tnr 1, ppv 0, npv .9, acc .9
        // means: tpr .1, tnr .9, ppv .01, npv .81, acc .82; accuracy .1; mse 1 -> .5
        let labels = labels_balanced(10);
        let scores = vec![[0.0; NUM_CLASSES]; labels.len()];
        let preds: Vec<usize> = scores.iter().map(|s| argmax(s)).collect();
        let r = fitness_score(&scores, &preds, &labels, FitnessForm::default()).unwrap();
        let expected = 0.1 + 0.9 + 0.01 + 0.81 + 0.82 + 0.1 + 0.5;
        assert!((r.fitness - expected).abs() < 1e-12, "{}", r.fitness);
    }

    #[test]
    fn alternative_forms() {
        let labels = labels_balanced(2);
        let scores = vec![[0.0; NUM_CLASSES]; labels.len()];
        let preds = vec![0; labels.len()];
        let sum = fitness_score(&scores, &preds, &labels, FitnessForm { aggregation: Aggregation::Sum, mse_term: MseTerm::Inverse }).unwrap();
        let mean = fitness_score(&scores, &preds, &labels, FitnessForm::default()).unwrap();
        assert!((sum.fitness - (10.0 * (mean.fitness - 0.6) + 0.1 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_input_rejected() {
        assert_eq!(fitness_score(&[], &[], &[], FitnessForm::default()), Err(MetricsError::Empty));
    }

    #[test]
    fn argmax_tie_breaks_low() {
        assert_eq!(argmax(&[0.0; 10]), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5, -1.0]), 1);
    }
}
