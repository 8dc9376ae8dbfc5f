//! Self-composition of mapping networks, interpolation by composition, the
//! parameter-averaging baseline, and the mapping regularizers.
//!
//! Composition stages feed raw outputs into the next stage; intermediate
//! points are free to leave the canonical set.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::funcnets::{mapping_forward, mapping_graph, FlatParams};
use crate::geometry::{nearest_all, Backend, PointCloud};
use crate::tensor::{Array, Tape, Var};

fn require_endomorphism(p: &FlatParams) -> Result<()> {
    let s = p.spec();
    if s.input_dim() != s.output_dim() {
        return Err(Error::shape(format!("mapping {s} does not map a space to itself")));
    }
    Ok(())
}

/// A mapping whose `k`-th power is the reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct KMapping {
    params: FlatParams,
    k: usize,
}

impl KMapping {
    /// `k = 0` is accepted and means the identity.
    pub fn new(params: FlatParams, k: usize) -> Result<Self> {
        require_endomorphism(&params)?;
        Ok(KMapping { params, k })
    }

    pub fn params(&self) -> &FlatParams {
        &self.params
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// `f^k(x)` with `f^0(x) = x`.
pub fn power_eval(m: &KMapping, x: &Array) -> Result<Array> {
    let d = m.params.spec().input_dim();
    if x.shape().len() != 2 || x.shape()[1] != d {
        return Err(Error::shape(format!("expected batch [n, {d}], got {:?}", x.shape())));
    }
    let mut y = x.clone();
    for _ in 0..m.k {
        y = mapping_forward(&m.params, &y)?;
    }
    Ok(y)
}

/// Tape form of `f^k`; `k = 1` is a plain application and works for any spec.
pub fn power_graph(tape: &mut Tape, params: &FlatParams, theta: Var, x: Var, k: usize) -> Result<Var> {
    if k != 1 {
        require_endomorphism(params)?;
    }
    let mut y = x;
    for _ in 0..k {
        y = mapping_graph(tape, params.spec(), theta, y)?;
    }
    Ok(y)
}

/// Which parent mapping a composition stage uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parent {
    A,
    B,
}

/// Sequence of parent choices, one per stage, in application order:
/// `"AB"` applies A first, then B, i.e. `f_B(f_A(x))`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CompositionPlan(Vec<Parent>);

impl CompositionPlan {
    pub fn new(stages: Vec<Parent>) -> Self {
        CompositionPlan(stages)
    }

    pub fn uniform(parent: Parent, k: usize) -> Self {
        CompositionPlan(vec![parent; k])
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn stages(&self) -> &[Parent] {
        &self.0
    }

    /// All `2^k` plans of length `k`, in binary order with A as 0.
    pub fn enumerate(k: usize) -> Vec<CompositionPlan> {
        assert!(k < usize::BITS as usize, "k too large to enumerate");
        (0..1usize << k)
            .map(|bits| {
                CompositionPlan(
                    (0..k).map(|i| if bits >> (k - 1 - i) & 1 == 0 { Parent::A } else { Parent::B }).collect(),
                )
            })
            .collect()
    }
}

impl FromStr for CompositionPlan {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s.is_empty() {
            return Err(Error::Format("empty composition plan".into()));
        }
        s.chars()
            .map(|c| match c {
                'A' => Ok(Parent::A),
                'B' => Ok(Parent::B),
                _ => Err(Error::Format(format!("plan {s:?}: invalid stage {c:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(CompositionPlan)
    }
}

impl fmt::Display for CompositionPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.0 {
            f.write_str(match p {
                Parent::A => "A",
                Parent::B => "B",
            })?;
        }
        Ok(())
    }
}

fn require_same_spec(a: &FlatParams, b: &FlatParams) -> Result<()> {
    if a.spec() != b.spec() {
        return Err(Error::Spec(format!("specs differ: {} vs {}", a.spec(), b.spec())));
    }
    Ok(())
}

/// Applies the plan's stages in order, each using mapping `a` or `b`.
pub fn compose_interpolate(a: &FlatParams, b: &FlatParams, plan: &CompositionPlan, x: &Array) -> Result<Array> {
    require_same_spec(a, b)?;
    require_endomorphism(a)?;
    let mut y = x.clone();
    for stage in plan.stages() {
        let p = match stage {
            Parent::A => a,
            Parent::B => b,
        };
        y = mapping_forward(p, &y)?;
    }
    Ok(y)
}

/// `(theta_a + theta_b) / 2`.
pub fn param_interpolate(a: &FlatParams, b: &FlatParams) -> Result<FlatParams> {
    require_same_spec(a, b)?;
    let theta = a.theta().iter().zip(b.theta()).map(|(x, y)| (x + y) / 2.0).collect();
    FlatParams::new(a.spec().clone(), theta)
}

fn mean_sq_row_dist(a: &Array, b: &Array) -> f64 {
    let n = a.rows();
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n as f64
}

/// Mean over the batch of `|f(x) - x|^2`.
pub fn reg_distance_traveled(params: &FlatParams, xs: &Array) -> Result<f64> {
    require_endomorphism(params)?;
    let y = mapping_forward(params, xs)?;
    Ok(mean_sq_row_dist(&y, xs))
}

/// Euclidean projection of every row of `xs` onto the nearest point of `target`.
pub fn project_onto(xs: &Array, target: &PointCloud) -> Result<Array> {
    if target.is_empty() {
        return Err(Error::EmptySet("projection target".into()));
    }
    let src = PointCloud::from_array(xs)?;
    let nn = nearest_all(&src, target, Backend::KdTree)?;
    let mut out = Vec::with_capacity(xs.len());
    for (id, _) in nn {
        out.extend_from_slice(target.point(id));
    }
    Array::matrix(xs.rows(), target.dim(), out)
}

/// Mean over the batch of `|f(x) - proj_O(x)|^2`.
pub fn reg_projection(params: &FlatParams, xs: &Array, target: &PointCloud) -> Result<f64> {
    require_endomorphism(params)?;
    let proj = project_onto(xs, target)?;
    let y = mapping_forward(params, xs)?;
    Ok(mean_sq_row_dist(&y, &proj))
}

/// Tape form of the distance-traveled penalty for outputs `y` of inputs `x`.
pub fn reg_distance_graph(tape: &mut Tape, y: Var, x: Var) -> Result<Var> {
    let n = tape.value(x).rows();
    let d = tape.sub(y, x)?;
    let s = tape.sq_norm(d)?;
    tape.scale(s, 1.0 / n as f64)
}

/// Tape form of the projection penalty for outputs `y` of inputs `x`.
pub fn reg_projection_graph(tape: &mut Tape, y: Var, x: &Array, target: &PointCloud) -> Result<Var> {
    let proj = tape.leaf(project_onto(x, target)?);
    let d = tape.sub(y, proj)?;
    let s = tape.sq_norm(d)?;
    tape.scale(s, 1.0 / x.rows() as f64)
}
