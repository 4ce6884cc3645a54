use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f32; 3];

/// Class annotation of a sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Labels {
    #[default]
    None,
    /// One class for the whole cloud.
    Cloud(u16),
    /// One class per point.
    Points(Vec<u16>),
}

/// One sample: positions plus optional per-point attributes and labels.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct PointCloud {
    pub positions: Vec<Point>,
    /// Per-point RGB in [0, 1].
    pub colors: Option<Vec<Point>>,
    /// Per-point unit normals.
    pub normals: Option<Vec<Point>>,
    /// Per-point height above the lowest point (derived, see `augment::append_height`).
    pub heights: Option<Vec<f32>>,
    pub labels: Labels,
}

impl PointCloud {
    pub fn new(positions: Vec<Point>) -> Self {
        PointCloud { positions, ..Default::default() }
    }

    pub fn with_colors(mut self, colors: Vec<Point>) -> Self {
        self.colors = Some(colors);
        self
    }

    pub fn with_normals(mut self, normals: Vec<Point>) -> Self {
        self.normals = Some(normals);
        self
    }

    pub fn with_labels(mut self, labels: Labels) -> Self {
        self.labels = labels;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn cloud_label(&self) -> Option<u16> {
        match self.labels {
            Labels::Cloud(l) => Some(l),
            _ => None,
        }
    }

    pub fn point_labels(&self) -> Option<&[u16]> {
        match &self.labels {
            Labels::Points(l) => Some(l),
            _ => None,
        }
    }

    /// Checks row counts, finiteness, color range and (optionally) label range.
    pub fn validate(&self, num_classes: Option<usize>) -> Result<()> {
        let p = self.len();
        let bad = |what: &str, n: usize| Error::Input(format!("{what} has {n} rows, positions have {p}"));
        if self.positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite coordinate".into()));
        }
        if let Some(c) = &self.colors {
            if c.len() != p {
                return Err(bad("colors", c.len()));
            }
            if c.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Input("color outside [0, 1]".into()));
            }
        }
        if let Some(n) = &self.normals {
            if n.len() != p {
                return Err(bad("normals", n.len()));
            }
        }
        if let Some(h) = &self.heights {
            if h.len() != p {
                return Err(bad("heights", h.len()));
            }
        }
        match (&self.labels, num_classes) {
            (Labels::Points(l), _) if l.len() != p => return Err(bad("labels", l.len())),
            (Labels::Points(l), Some(k)) => {
                if let Some(&x) = l.iter().find(|&&x| x as usize >= k) {
                    return Err(Error::Label { label: x as usize, classes: k });
                }
            }
            (Labels::Cloud(x), Some(k)) if *x as usize >= k => {
                return Err(Error::Label { label: *x as usize, classes: k });
            }
            _ => {}
        }
        Ok(())
    }

    /// New cloud made of the given rows (in that order); every attribute follows its point.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        fn pick<U: Copy>(v: &[U], idx: &[usize]) -> Vec<U> {
            idx.iter().map(|&i| v[i]).collect()
        }
        PointCloud {
            positions: pick(&self.positions, indices),
            colors: self.colors.as_deref().map(|c| pick(c, indices)),
            normals: self.normals.as_deref().map(|n| pick(n, indices)),
            heights: self.heights.as_deref().map(|h| pick(h, indices)),
            labels: match &self.labels {
                Labels::Points(l) => Labels::Points(pick(l, indices)),
                other => other.clone(),
            },
        }
    }
}
