use super::kdtree::{brute_force_nn, NnIndex};
use super::PointCloud;
use crate::error::{Error, Result};

/// Nearest-neighbor backend for set metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    KdTree,
    Brute,
}

impl std::str::FromStr for Backend {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kdtree" => Ok(Backend::KdTree),
            "brute" => Ok(Backend::Brute),
            _ => Err(Error::Format(format!("unknown backend {s:?}"))),
        }
    }
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::KdTree => "kdtree",
            Backend::Brute => "brute",
        }
    }
}

pub(crate) fn check_pair(x: &PointCloud, y: &PointCloud) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet(format!("sizes {} and {}", x.len(), y.len())));
    }
    if x.dim() != y.dim() {
        return Err(Error::shape(format!("dims {} and {}", x.dim(), y.dim())));
    }
    Ok(())
}

/// Nearest point of `y` for every point of `x`, as `(id, squared distance)`.
pub fn nearest_all(x: &PointCloud, y: &PointCloud, backend: Backend) -> Result<Vec<(usize, f64)>> {
    check_pair(x, y)?;
    Ok(match backend {
        Backend::KdTree => {
            let idx = NnIndex::build(y);
            x.iter().map(|p| idx.nearest(p)).collect()
        }
        Backend::Brute => x.iter().map(|p| brute_force_nn(y, p)).collect(),
    })
}

/// Mean over `x` of the squared distance to the nearest point of `y`.
pub fn chamfer_asym(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    chamfer_asym_with(x, y, Backend::KdTree)
}

pub fn chamfer_asym_with(x: &PointCloud, y: &PointCloud, backend: Backend) -> Result<f64> {
    let nn = nearest_all(x, y, backend)?;
    Ok(nn.iter().map(|&(_, d)| d).sum::<f64>() / x.len() as f64)
}

pub fn chamfer_sym(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    chamfer_sym_with(x, y, Backend::KdTree)
}

pub fn chamfer_sym_with(x: &PointCloud, y: &PointCloud, backend: Backend) -> Result<f64> {
    Ok(chamfer_asym_with(x, y, backend)? + chamfer_asym_with(y, x, backend)?)
}

/// Default F1 threshold: 1% of the ground-truth bounding-box diagonal.
pub fn default_f1_tau(gt: &PointCloud) -> f64 {
    0.01 * gt.bbox_diagonal()
}

/// Precision, recall and F1 at Euclidean threshold `tau`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1_score(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<F1Score> {
    check_pair(pred, gt)?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Precondition(format!("tau must be positive, got {tau}")));
    }
    let t2 = tau * tau;
    let frac = |a: &PointCloud, b: &PointCloud| -> Result<f64> {
        let nn = nearest_all(a, b, Backend::KdTree)?;
        Ok(nn.iter().filter(|&&(_, d)| d <= t2).count() as f64 / a.len() as f64)
    };
    let precision = frac(pred, gt)?;
    let recall = frac(gt, pred)?;
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(F1Score { precision, recall, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pc(p: &[[f64; 3]]) -> PointCloud {
        PointCloud::from_points(p).unwrap()
    }

    #[test]
    fn chamfer_examples() {
        let o = pc(&[[0.0, 0.0, 0.0]]);
        assert_eq!(chamfer_asym(&o, &o).unwrap(), 0.0);
        assert_eq!(chamfer_asym(&pc(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]), &o).unwrap(), 1.0);
        assert_eq!(chamfer_asym(&o, &pc(&[[1.0, 0.0, 0.0], [0.0, 0.0, 3.0]])).unwrap(), 1.0);
        assert_eq!(chamfer_sym(&pc(&[[1.0, 0.0, 0.0]]), &o).unwrap(), 2.0);
    }

    #[test]
    fn chamfer_errors() {
        let o = pc(&[[0.0, 0.0, 0.0]]);
        let empty = PointCloud::new(3, vec![]).unwrap();
        assert!(matches!(chamfer_asym(&empty, &o), Err(Error::EmptySet(_))));
        assert!(matches!(chamfer_asym(&o, &empty), Err(Error::EmptySet(_))));
        let flat = PointCloud::from_points(&[[0.0, 0.0]]).unwrap();
        assert!(matches!(chamfer_asym(&o, &flat), Err(Error::Shape(_))));
    }

    #[test]
    fn f1_examples() {
        let a = pc(&[[0.0, 0.0, 0.0], [1.0, 1.0, 1.0]]);
        assert_eq!(f1_score(&a, &a, 0.1).unwrap().f1, 1.0);
        let far = f1_score(&pc(&[[0.0, 0.0, 0.0]]), &pc(&[[10.0, 0.0, 0.0]]), 0.1).unwrap();
        assert_eq!(far.f1, 0.0);
        let s = f1_score(&pc(&[[0.0, 0.0, 0.0], [5.0, 0.0, 0.0]]), &pc(&[[0.0, 0.0, 0.0]]), 0.1).unwrap();
        assert_eq!((s.precision, s.recall), (0.5, 1.0));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn f1_rejects_bad_tau() {
        let a = pc(&[[0.0, 0.0, 0.0]]);
        assert!(f1_score(&a, &a, 0.0).is_err());
    }

    #[test]
    fn default_tau_uses_bbox_diagonal() {
        let gt = pc(&[[0.0, 0.0, 0.0], [3.0, 4.0, 0.0]]);
        assert!((default_f1_tau(&gt) - 0.05).abs() < 1e-15);
    }
}
