use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::tensor::{Array, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    pub fn code(self) -> u32 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
        }
    }

    pub fn from_code(c: u32) -> Result<Self> {
        match c {
            0 => Ok(Activation::Relu),
            1 => Ok(Activation::Tanh),
            _ => Err(Error::Format(format!("unknown activation code {c}"))),
        }
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    x
                } else {
                    0.0
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    pub(crate) fn record(self, tape: &mut Tape, v: Var) -> Result<Var> {
        match self {
            Activation::Relu => tape.relu(v),
            Activation::Tanh => tape.tanh(v),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(Error::Format(format!("unknown activation {s:?}"))),
        }
    }
}

/// Layer-size schedule `[n0, n1, ..., nL]`. Hidden layers use `activation`;
/// the output layer is affine.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MlpSpec {
    layer_sizes: Vec<usize>,
    activation: Activation,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::Spec(format!("need at least one layer, got {layer_sizes:?}")));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Spec(format!("zero-width layer in {layer_sizes:?}")));
        }
        Ok(MlpSpec { layer_sizes, activation })
    }

    /// `[c, 1024, 3]`.
    pub fn hof1(c: usize) -> Self {
        MlpSpec::new(vec![c, 1024, 3], Activation::Relu).unwrap()
    }

    /// `[c, 128, 128, 128, 3]`.
    pub fn hof3(c: usize) -> Self {
        MlpSpec::new(vec![c, 128, 128, 128, 3], Activation::Relu).unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// `(fan_in, fan_out)` of layer `i`.
    pub fn layer_dims(&self, i: usize) -> (usize, usize) {
        (self.layer_sizes[i], self.layer_sizes[i + 1])
    }

    /// Offset of layer `i`'s weight block in the packed vector; its bias follows
    /// the weights directly.
    pub fn layer_offset(&self, i: usize) -> usize {
        (0..i)
            .map(|l| {
                let (a, b) = self.layer_dims(l);
                (a + 1) * b
            })
            .sum()
    }

    pub fn count_params(&self) -> usize {
        count_params(self)
    }
}

impl fmt::Display for MlpSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.layer_sizes.iter().map(|n| n.to_string()).collect();
        write!(f, "{}", sizes.join(","))
    }
}

/// `Σ (n_i + 1) n_{i+1}`.
pub fn count_params(spec: &MlpSpec) -> usize {
    spec.layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// One layer's weights `[out, in]` (row-major) and bias `[out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Packed parameters `(W1, b1, ..., WL, bL)` for an [`MlpSpec`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    spec: MlpSpec,
    theta: Vec<f64>,
}

impl FlatParams {
    pub fn new(spec: MlpSpec, theta: Vec<f64>) -> Result<Self> {
        let n = count_params(&spec);
        if theta.len() != n {
            return Err(Error::shape(format!("spec {spec} needs {n} params, got {}", theta.len())));
        }
        Ok(FlatParams { spec, theta })
    }

    pub fn zeros(spec: MlpSpec) -> Self {
        let n = count_params(&spec);
        FlatParams { spec, theta: vec![0.0; n] }
    }

    pub fn pack(spec: MlpSpec, layers: &[LayerParams]) -> Result<Self> {
        if layers.len() != spec.num_layers() {
            return Err(Error::shape(format!("{} layers for spec {spec}", layers.len())));
        }
        let mut theta = Vec::with_capacity(count_params(&spec));
        for (i, l) in layers.iter().enumerate() {
            let (fi, fo) = spec.layer_dims(i);
            if l.weight.len() != fi * fo || l.bias.len() != fo {
                return Err(Error::shape(format!("layer {i} has wrong sizes")));
            }
            theta.extend_from_slice(&l.weight);
            theta.extend_from_slice(&l.bias);
        }
        FlatParams::new(spec, theta)
    }

    pub fn unpack(&self) -> Vec<LayerParams> {
        (0..self.spec.num_layers())
            .map(|i| {
                let (w, b) = self.layer(i);
                LayerParams { weight: w.to_vec(), bias: b.to_vec() }
            })
            .collect()
    }

    pub fn spec(&self) -> &MlpSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn into_theta(self) -> Vec<f64> {
        self.theta
    }

    /// Weight and bias slices of layer `i`.
    pub fn layer(&self, i: usize) -> (&[f64], &[f64]) {
        let (fi, fo) = self.spec.layer_dims(i);
        let off = self.spec.layer_offset(i);
        (&self.theta[off..off + fi * fo], &self.theta[off + fi * fo..off + (fi + 1) * fo])
    }
}

fn check_batch(x: &Array, dim: usize) -> Result<usize> {
    if x.shape().len() != 2 || x.shape()[1] != dim {
        return Err(Error::shape(format!("expected batch [n, {dim}], got {:?}", x.shape())));
    }
    Ok(x.shape()[0])
}

/// Evaluates the network on a batch `[n, n0]`, giving `[n, nL]`.
pub fn mapping_forward(params: &FlatParams, x: &Array) -> Result<Array> {
    let spec = &params.spec;
    let n = check_batch(x, spec.input_dim())?;
    let mut h = x.data().to_vec();
    for l in 0..spec.num_layers() {
        let (fi, fo) = spec.layer_dims(l);
        let (w, b) = params.layer(l);
        let last = l + 1 == spec.num_layers();
        let mut out = vec![0.0; n * fo];
        for i in 0..n {
            let hin = &h[i * fi..(i + 1) * fi];
            for j in 0..fo {
                let wr = &w[j * fi..(j + 1) * fi];
                let mut s = b[j];
                for (a, c) in hin.iter().zip(wr) {
                    s += a * c;
                }
                out[i * fo + j] = if last { s } else { spec.activation.apply(s) };
            }
        }
        h = out;
    }
    Array::matrix(n, spec.output_dim(), h)
}

/// Records the network on `tape` with parameters taken from the flat vector
/// `theta` (a node of length `count_params(spec)`), applied to `x` (`[n, n0]`).
pub fn mapping_graph(tape: &mut Tape, spec: &MlpSpec, theta: Var, x: Var) -> Result<Var> {
    let tl = tape.value(theta).len();
    if tl != count_params(spec) {
        return Err(Error::shape(format!("theta has {tl} values, spec {spec} needs {}", count_params(spec))));
    }
    check_batch(tape.value(x), spec.input_dim())?;
    let mut h = x;
    for l in 0..spec.num_layers() {
        let (fi, fo) = spec.layer_dims(l);
        let off = spec.layer_offset(l);
        let w = tape.slice(theta, off, vec![fo, fi])?;
        let wt = tape.transpose(w)?;
        let b = tape.slice(theta, off + fi * fo, vec![fo])?;
        let z = tape.matmul(h, wt)?;
        h = tape.add(z, b)?;
        if l + 1 < spec.num_layers() {
            h = spec.activation.record(tape, h)?;
        }
    }
    Ok(h)
}
