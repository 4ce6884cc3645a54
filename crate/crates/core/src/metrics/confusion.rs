use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `K × K` counts; rows are ground truth, columns predictions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        ConfusionMatrix { classes, counts: vec![0; classes * classes] }
    }

    pub fn from_rows(rows: &[&[u64]]) -> Self {
        let k = rows.len();
        ConfusionMatrix { classes: k, counts: rows.iter().flat_map(|r| r.iter().copied()).collect() }
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize) -> Result<()> {
        let k = self.classes;
        if gt >= k || pred >= k {
            return Err(Error::Label { label: gt.max(pred), classes: k });
        }
        self.counts[gt * k + pred] += 1;
        Ok(())
    }

    pub fn add_all(&mut self, gt: &[usize], pred: &[usize]) -> Result<()> {
        if gt.len() != pred.len() {
            return Err(Error::dim("ground truth and predictions differ in length"));
        }
        gt.iter().zip(pred).try_for_each(|(&g, &p)| self.add(g, p))
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::dim("confusion matrices of different sizes"));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    fn diag(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    fn row_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|j| self.get(c, j)).sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.classes).map(|i| self.get(i, c)).sum()
    }

    /// Correct fraction of everything scored; 0 when empty.
    pub fn overall_accuracy(&self) -> f64 {
        let t = self.total();
        if t == 0 {
            return 0.0;
        }
        (0..self.classes).map(|c| self.diag(c)).sum::<u64>() as f64 / t as f64
    }

    /// Mean per-class recall over classes that occur in the ground truth.
    pub fn mean_class_accuracy(&self) -> f64 {
        let recalls: Vec<f64> =
            (0..self.classes).filter(|&c| self.row_sum(c) > 0).map(|c| self.diag(c) as f64 / self.row_sum(c) as f64).collect();
        mean(&recalls)
    }

    /// IoU of every class present in the ground truth or the predictions.
    pub fn class_iou(&self) -> Vec<Option<f64>> {
        (0..self.classes)
            .map(|c| {
                let union = self.row_sum(c) + self.col_sum(c) - self.diag(c);
                (union > 0).then(|| self.diag(c) as f64 / union as f64)
            })
            .collect()
    }

    pub fn mean_iou(&self) -> f64 {
        mean(&self.class_iou().into_iter().flatten().collect::<Vec<_>>())
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// One shape's per-point labels and the part labels of its category.
#[derive(Clone, Debug)]
pub struct ShapePrediction {
    pub gt: Vec<u16>,
    pub pred: Vec<u16>,
    pub parts: Vec<u16>,
}

/// Mean over shapes of the mean part IoU; a part absent from both ground truth and
/// prediction counts as IoU 1.
pub fn instance_mean_iou(shapes: &[ShapePrediction]) -> Result<f64> {
    let mut per_shape = Vec::with_capacity(shapes.len());
    for s in shapes {
        if s.gt.len() != s.pred.len() {
            return Err(Error::dim("ground truth and predictions differ in length"));
        }
        if s.parts.is_empty() {
            return Err(Error::Input("shape category without parts".into()));
        }
        let ious: Vec<f64> = s
            .parts
            .iter()
            .map(|&part| {
                let (mut inter, mut union) = (0usize, 0usize);
                for (&g, &p) in s.gt.iter().zip(&s.pred) {
                    let (a, b) = (g == part, p == part);
                    inter += usize::from(a && b);
                    union += usize::from(a || b);
                }
                if union == 0 {
                    1.0
                } else {
                    inter as f64 / union as f64
                }
            })
            .collect();
        per_shape.push(mean(&ious));
    }
    Ok(mean(&per_shape))
}
