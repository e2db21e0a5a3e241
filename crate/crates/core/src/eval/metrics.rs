use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no predictions to score")]
    Empty,
    #[error("{truth} truth labels but {pred} predictions")]
    Length { truth: usize, pred: usize },
    #[error("label {0} is not in the class list")]
    UnknownLabel(String),
}

/// Rows are truth, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[String]) -> Self {
        let c = classes.len();
        Self {
            classes: classes.to_vec(),
            counts: vec![vec![0; c]; c],
        }
    }

    fn index(&self, label: &str) -> Result<usize, MetricsError> {
        self.classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
    }

    pub fn add(&mut self, truth: &str, pred: &str) -> Result<(), MetricsError> {
        let (t, p) = (self.index(truth)?, self.index(pred)?);
        self.counts[t][p] += 1;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["truth\\pred".to_string()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for (c, row) in self.classes.iter().zip(&self.counts) {
            let mut rec = vec![c.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub macro_recall: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
}

impl ClassificationReport {
    pub fn class(&self, label: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|c| c.label == label)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn report_from_confusion(confusion: ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    let total = confusion.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let c = confusion.classes.len();
    let mut per_class = Vec::with_capacity(c);
    let (mut wf1, mut recall_sum, mut present) = (0.0, 0.0, 0usize);
    for i in 0..c {
        let tp = confusion.counts[i][i];
        let support = confusion.support(i);
        let predicted: u64 = (0..c).map(|r| confusion.counts[r][i]).sum();
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        wf1 += f1 * support as f64;
        if support > 0 {
            recall_sum += recall;
            present += 1;
        }
        per_class.push(ClassMetrics {
            label: confusion.classes[i].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    Ok(ClassificationReport {
        accuracy: ratio(confusion.trace(), total),
        weighted_f1: wf1 / total as f64,
        macro_recall: if present > 0 { recall_sum / present as f64 } else { 0.0 },
        per_class,
        confusion,
    })
}

/// Accuracy, one-vs-rest precision/recall/F1 per class (0 when a denominator
/// is 0) and support-weighted F1.
pub fn classification_metrics<S: AsRef<str>>(
    truth: &[S],
    pred: &[S],
    classes: &[String],
) -> Result<ClassificationReport, MetricsError> {
    if truth.len() != pred.len() {
        return Err(MetricsError::Length {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut cm = ConfusionMatrix::new(classes);
    for (t, p) in truth.iter().zip(pred) {
        cm.add(t.as_ref(), p.as_ref())?;
    }
    report_from_confusion(cm)
}

/// Mean and population standard deviation across folds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd {
            mean,
            std: var.sqrt(),
            n: values.len(),
        })
    }
}
