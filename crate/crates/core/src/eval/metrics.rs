use crate::dataio::BeatClass;
use crate::error::{Error, Result};

/// Counts indexed `[actual][predicted]` over a fixed class list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<BeatClass>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<BeatClass>) -> Self {
        let q = classes.len();
        Self {
            classes,
            counts: vec![vec![0; q]; q],
        }
    }

    fn index(&self, c: BeatClass) -> Result<usize> {
        self.classes
            .iter()
            .position(|&x| x == c)
            .ok_or_else(|| Error::UnknownLabel(c.name().to_string()))
    }

    pub fn from_labels(
        y_true: &[BeatClass],
        y_pred: &[BeatClass],
        classes: &[BeatClass],
    ) -> Result<Self> {
        if y_true.len() != y_pred.len() {
            return Err(Error::Shape {
                expected: y_true.len(),
                given: y_pred.len(),
            });
        }
        let mut m = Self::new(classes.to_vec());
        for (&t, &p) in y_true.iter().zip(y_pred) {
            let (i, j) = (m.index(t)?, m.index(p)?);
            m.counts[i][j] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// True support of class `i`.
    pub fn row_sum(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    /// Number of predictions of class `i`.
    pub fn col_sum(&self, i: usize) -> usize {
        self.counts.iter().map(|r| r[i]).sum()
    }

    pub fn tp(&self, i: usize) -> usize {
        self.counts[i][i]
    }

    pub fn fp(&self, i: usize) -> usize {
        self.col_sum(i) - self.tp(i)
    }

    pub fn fn_(&self, i: usize) -> usize {
        self.row_sum(i) - self.tp(i)
    }

    pub fn tn(&self, i: usize) -> usize {
        self.total() - self.tp(i) - self.fp(i) - self.fn_(i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: BeatClass,
    pub support: usize,
    pub predicted: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub total: usize,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsReport {
    pub fn from_confusion(m: &ConfusionMatrix) -> Self {
        let per_class = m
            .classes
            .iter()
            .enumerate()
            .map(|(i, &class)| {
                let tp = m.tp(i);
                let precision = ratio(tp, tp + m.fp(i));
                let recall = ratio(tp, tp + m.fn_(i));
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                ClassMetrics {
                    class,
                    support: m.row_sum(i),
                    predicted: m.col_sum(i),
                    precision,
                    recall,
                    f1,
                }
            })
            .collect();
        Self {
            total: m.total(),
            accuracy: ratio(m.trace(), m.total()),
            per_class,
        }
    }

    pub fn class(&self, c: BeatClass) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == c)
    }
}

/// `a / b`, with 0 for an empty denominator.
fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

pub fn compute_metrics(
    y_true: &[BeatClass],
    y_pred: &[BeatClass],
    classes: &[BeatClass],
) -> Result<(MetricsReport, ConfusionMatrix)> {
    let m = ConfusionMatrix::from_labels(y_true, y_pred, classes)?;
    Ok((MetricsReport::from_confusion(&m), m))
}
