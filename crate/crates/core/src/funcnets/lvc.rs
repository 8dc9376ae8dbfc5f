//! Latent-vector-concatenation decoders and their conversion to fast-weight form.
//!
//! An LVC decoder has fixed weights. At each injection layer the codeword `z`
//! is appended to that layer's input, so the pre-activation reads
//! `a = Wx·h + Wz·z + b`. Folding `Wz·z + b` into a per-observation bias gives
//! an ordinary MLP with the `Wx` blocks, which is what [`lvc_to_hof`] returns.
//! The converted network never has more parameters than the LVC decoder plus
//! its codeword.

use std::collections::BTreeSet;

use rand::Rng;

use super::mlp::{count_params, mapping_forward, Activation, FlatParams, LayerParams, MlpSpec};
use crate::error::{Error, Result};
use crate::tensor::Array;

/// A fixed-weight LVC decoder.
///
/// `layer_sizes` excludes the codeword: layer `i` maps `layer_sizes[i]` (plus
/// `codeword_len` extra inputs when `i` is an injection layer) to
/// `layer_sizes[i + 1]`. Weights are packed per layer as `W [out, in_total]`
/// row-major, with the codeword columns last, followed by `b [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LvcSpec {
    layer_sizes: Vec<usize>,
    codeword_len: usize,
    injection: BTreeSet<usize>,
    activation: Activation,
    weights: Vec<f64>,
}

impl LvcSpec {
    pub fn new(
        layer_sizes: Vec<usize>,
        codeword_len: usize,
        injection: BTreeSet<usize>,
        activation: Activation,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let base = MlpSpec::new(layer_sizes.clone(), activation)?;
        if let Some(&bad) = injection.iter().find(|&&i| i >= base.num_layers()) {
            return Err(Error::Spec(format!("injection layer {bad} out of range for {} layers", base.num_layers())));
        }
        let spec = LvcSpec { layer_sizes, codeword_len, injection, activation, weights: vec![] };
        let need = spec.weight_count();
        if weights.len() != need {
            return Err(Error::shape(format!("LVC spec needs {need} weights, got {}", weights.len())));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("LVC weight".into()));
        }
        Ok(LvcSpec { weights, ..spec })
    }

    /// Random weights from `U(±1/sqrt(fan_in))`, biases from `U(±0.1)`.
    pub fn random<R: Rng + ?Sized>(
        layer_sizes: Vec<usize>,
        codeword_len: usize,
        injection: BTreeSet<usize>,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let shell = LvcSpec { layer_sizes, codeword_len, injection, activation, weights: vec![] };
        let mut weights = Vec::with_capacity(shell.weight_count());
        for l in 0..shell.num_layers() {
            let (fi, fo) = shell.layer_dims(l);
            let r = 1.0 / (fi as f64).sqrt();
            weights.extend((0..fi * fo).map(|_| rng.random_range(-r..r)));
            weights.extend((0..fo).map(|_| rng.random_range(-0.1..0.1)));
        }
        LvcSpec::new(shell.layer_sizes, shell.codeword_len, shell.injection, shell.activation, weights)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn codeword_len(&self) -> usize {
        self.codeword_len
    }

    pub fn injection(&self) -> &BTreeSet<usize> {
        &self.injection
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// `(total fan_in including codeword columns, fan_out)` of layer `l`.
    pub fn layer_dims(&self, l: usize) -> (usize, usize) {
        let extra = if self.injection.contains(&l) { self.codeword_len } else { 0 };
        (self.layer_sizes[l] + extra, self.layer_sizes[l + 1])
    }

    fn weight_count(&self) -> usize {
        (0..self.num_layers())
            .map(|l| {
                let (fi, fo) = self.layer_dims(l);
                (fi + 1) * fo
            })
            .sum()
    }

    fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let off: usize = (0..l)
            .map(|i| {
                let (fi, fo) = self.layer_dims(i);
                (fi + 1) * fo
            })
            .sum();
        let (fi, fo) = self.layer_dims(l);
        (&self.weights[off..off + fi * fo], &self.weights[off + fi * fo..off + (fi + 1) * fo])
    }

    /// The decoder spec with codeword columns removed.
    pub fn base_spec(&self) -> MlpSpec {
        MlpSpec::new(self.layer_sizes.clone(), self.activation).expect("validated at construction")
    }
}

/// Total decoder parameters (including codeword columns and biases) plus the
/// codeword length.
pub fn complexity_lvc(spec: &LvcSpec) -> usize {
    spec.weight_count() + spec.codeword_len
}

fn check_codeword(spec: &LvcSpec, z: &[f64]) -> Result<()> {
    if z.len() != spec.codeword_len {
        return Err(Error::shape(format!("codeword has {} values, spec expects {}", z.len(), spec.codeword_len)));
    }
    Ok(())
}

/// Evaluates the LVC decoder on a batch `[n, layer_sizes[0]]`.
pub fn lvc_forward(spec: &LvcSpec, z: &[f64], x: &Array) -> Result<Array> {
    check_codeword(spec, z)?;
    let n0 = spec.layer_sizes[0];
    if x.shape().len() != 2 || x.shape()[1] != n0 {
        return Err(Error::shape(format!("expected batch [n, {n0}], got {:?}", x.shape())));
    }
    let n = x.shape()[0];
    let mut h = x.data().to_vec();
    for l in 0..spec.num_layers() {
        let width = spec.layer_sizes[l];
        let (fi, fo) = spec.layer_dims(l);
        let (w, b) = spec.layer(l);
        let inject = spec.injection.contains(&l);
        let last = l + 1 == spec.num_layers();
        let mut out = vec![0.0; n * fo];
        let mut input = vec![0.0; fi];
        for i in 0..n {
            input[..width].copy_from_slice(&h[i * width..(i + 1) * width]);
            if inject {
                input[width..].copy_from_slice(z);
            }
            for j in 0..fo {
                let mut s = b[j];
                for (a, c) in input.iter().zip(&w[j * fi..(j + 1) * fi]) {
                    s += a * c;
                }
                out[i * fo + j] = if last { s } else { spec.activation.apply(s) };
            }
        }
        h = out;
    }
    Array::matrix(n, *spec.layer_sizes.last().unwrap(), h)
}

/// Fast-weight network computing the same function as `lvc_forward(spec, z, ·)`.
///
/// Each layer keeps its `Wx` block; injection layers get bias `b + Wz·z`.
pub fn lvc_to_hof(spec: &LvcSpec, z: &[f64]) -> Result<FlatParams> {
    check_codeword(spec, z)?;
    let layers: Vec<LayerParams> = (0..spec.num_layers())
        .map(|l| {
            let width = spec.layer_sizes[l];
            let (fi, fo) = spec.layer_dims(l);
            let (w, b) = spec.layer(l);
            let mut weight = Vec::with_capacity(width * fo);
            let mut bias = b.to_vec();
            for j in 0..fo {
                let row = &w[j * fi..(j + 1) * fi];
                weight.extend_from_slice(&row[..width]);
                if spec.injection.contains(&l) {
                    for (wz, zv) in row[width..].iter().zip(z) {
                        bias[j] += wz * zv;
                    }
                }
            }
            LayerParams { weight, bias }
        })
        .collect();
    FlatParams::pack(spec.base_spec(), &layers)
}

/// Outcome of [`lvc_collision_demo`].
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionReport {
    /// Shared codeword of the two observations.
    pub codeword: Vec<f64>,
    /// Max abs difference of the LVC outputs for the two observations.
    pub lvc_max_diff: f64,
    /// Max abs difference of the two fast-weight decoders on the probes.
    pub hof_max_diff: f64,
    /// Parameter counts of the two fast-weight decoders.
    pub hof_params: (usize, usize),
    pub lvc_complexity: usize,
    /// LVC outputs coincide while the fast-weight pair differs by more than
    /// `1e-6` at equal complexity.
    pub separated: bool,
}

/// Two observations that share a codeword are indistinguishable to the LVC
/// decoder, while fast-weight decoders of equal size can still tell them apart.
///
/// `hof_pair` holds the decoders a fast-weight encoder would emit for `obs_a`
/// and `obs_b`. Fails with a precondition error unless the codewords are equal.
pub fn lvc_collision_demo(
    spec: &LvcSpec,
    codeword_of: impl Fn(&[f64]) -> Vec<f64>,
    obs_a: &[f64],
    obs_b: &[f64],
    hof_pair: (&FlatParams, &FlatParams),
    probes: &Array,
) -> Result<CollisionReport> {
    let za = codeword_of(obs_a);
    let zb = codeword_of(obs_b);
    if za != zb {
        return Err(Error::Precondition(format!("codewords differ: {za:?} vs {zb:?}")));
    }
    let ya = lvc_forward(spec, &za, probes)?;
    let yb = lvc_forward(spec, &zb, probes)?;
    let (h1, h2) = hof_pair;
    if h1.spec() != h2.spec() {
        return Err(Error::Spec("fast-weight pair must share a spec".into()));
    }
    let o1 = mapping_forward(h1, probes)?;
    let o2 = mapping_forward(h2, probes)?;
    let lvc_max_diff = ya.max_abs_diff(&yb);
    let hof_max_diff = o1.max_abs_diff(&o2);
    let hof_params = (count_params(h1.spec()), count_params(h2.spec()));
    let lvc_complexity = complexity_lvc(spec);
    let separated =
        lvc_max_diff <= 1e-12 && hof_max_diff > 1e-6 && hof_params.0 == hof_params.1 && hof_params.0 <= lvc_complexity;
    Ok(CollisionReport { codeword: za, lvc_max_diff, hof_max_diff, hof_params, lvc_complexity, separated })
}

/// `(h1, h2)` where `h1 = lvc_to_hof(spec, z)` and `h2` replaces the first
/// layer's weight block with `W' != W`.
pub fn distinct_hof_pair<R: Rng + ?Sized>(spec: &LvcSpec, z: &[f64], rng: &mut R) -> Result<(FlatParams, FlatParams)> {
    let h1 = lvc_to_hof(spec, z)?;
    let mut h2 = h1.clone();
    let (fi, fo) = h1.spec().layer_dims(0);
    for w in &mut h2.theta_mut()[..fi * fo] {
        *w += rng.random_range(0.5..1.0);
    }
    Ok((h1, h2))
}
