use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::tensor::Array;

/// A finite set of `dim`-dimensional points, stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    pub label: Option<String>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if !(2..=4).contains(&dim) {
            return Err(Error::shape(format!("point dimension {dim} outside 2..=4")));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::shape(format!("{} coordinates for dim {dim}", coords.len())));
        }
        if let Some(bad) = coords.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("coordinate {bad}")));
        }
        Ok(PointCloud { dim, coords, label: None })
    }

    pub fn from_points<const D: usize>(points: &[[f64; D]]) -> Result<Self> {
        PointCloud::new(D, points.iter().flatten().copied().collect())
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn scaled(&self, s: f64) -> PointCloud {
        PointCloud { dim: self.dim, coords: self.coords.iter().map(|v| v * s).collect(), label: self.label.clone() }
    }

    /// Axis-aligned bounds as `(min, max)` per dimension.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.iter() {
            for d in 0..self.dim {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Some((lo, hi))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| (b - a) * (b - a)).sum::<f64>().sqrt(),
            None => 0.0,
        }
    }

    /// `[n, dim]` array view for feeding networks.
    pub fn to_array(&self) -> Result<Array> {
        Array::matrix(self.len(), self.dim, self.coords.clone())
    }

    pub fn from_array(a: &Array) -> Result<Self> {
        if a.shape().len() != 2 {
            return Err(Error::shape(format!("expected [n, dim], got {:?}", a.shape())));
        }
        PointCloud::new(a.shape()[1], a.data().to_vec())
    }

    /// Text form: one point per line, single-space separated, 17 significant digits.
    /// A label, if any, is written as a leading `#` comment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        if let Some(l) = &self.label {
            for line in l.lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        for p in self.iter() {
            let mut first = true;
            for v in p {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v:.16e}");
            }
            s.push('\n');
        }
        s
    }

    /// Parses the text form. Lines starting with `#` and blank lines are skipped.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut dim = None;
        let mut coords = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let before = coords.len();
            for tok in t.split(' ') {
                let v: f64 =
                    tok.parse().map_err(|_| Error::Format(format!("line {}: bad number {tok:?}", lineno + 1)))?;
                coords.push(v);
            }
            let n = coords.len() - before;
            match dim {
                None => dim = Some(n),
                Some(d) if d != n => {
                    return Err(Error::Format(format!("line {}: {n} coordinates, expected {d}", lineno + 1)))
                }
                _ => {}
            }
        }
        let dim = dim.ok_or_else(|| Error::Format("no points".into()))?;
        PointCloud::new(dim, coords).map_err(|e| Error::Format(e.to_string()))
    }
}
