use log::{debug, info};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::composition::{reg_distance_graph, reg_distance_traveled, reg_projection, reg_projection_graph};
use crate::error::{Error, Result};
use crate::funcnets::{mapping_forward, mapping_graph, EncoderNet, FlatParams};
use crate::geometry::{chamfer_asym, CanonicalSampler, NnIndex, PointCloud, SamplerKind};
use crate::seeding::{item_seed, rng_for, Stream};
use crate::tensor::{AdamState, Array, Tape, Var};

use super::config::{Regularizer, TrainConfig};
use super::data::Sample;

/// Components of one loss evaluation. `total = chamfer_fwd + chamfer_bwd + lambda * reg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    /// Prediction to ground truth.
    pub chamfer_fwd: f64,
    /// Ground truth to prediction.
    pub chamfer_bwd: f64,
    pub reg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: usize,
    pub loss: LossParts,
}

/// Both Chamfer terms of `pred` (a `[n, 3]` node) against a fixed target.
///
/// Neighbor assignments are computed from current values and held constant,
/// so gradients flow only through the selected pairs.
pub fn chamfer_graph(tape: &mut Tape, pred: Var, gt: &PointCloud, gt_index: &NnIndex) -> Result<(Var, Var)> {
    let p = tape.value(pred).clone();
    if p.shape().len() != 2 || p.cols() != gt.dim() {
        return Err(Error::shape(format!("prediction {:?} vs {}-d target", p.shape(), gt.dim())));
    }
    if p.rows() == 0 || gt.is_empty() {
        return Err(Error::EmptySet("chamfer operand".into()));
    }
    let n = p.rows();
    let mut targets = Vec::with_capacity(p.len());
    for i in 0..n {
        let (id, _) = gt_index.nearest(p.row(i));
        targets.extend_from_slice(gt.point(id));
    }
    let t = tape.leaf(Array::matrix(n, gt.dim(), targets)?);
    let d = tape.sub(pred, t)?;
    let s = tape.sq_norm(d)?;
    let fwd = tape.scale(s, 1.0 / n as f64)?;

    let pred_index = NnIndex::build(&PointCloud::from_array(&p)?);
    let ids: Vec<usize> = gt.iter().map(|q| pred_index.nearest(q).0).collect();
    let g = tape.gather_rows(pred, ids)?;
    let gl = tape.leaf(gt.to_array()?);
    let d = tape.sub(g, gl)?;
    let s = tape.sq_norm(d)?;
    let bwd = tape.scale(s, 1.0 / gt.len() as f64)?;
    Ok((fwd, bwd))
}

fn apply_power(theta: &FlatParams, x: &Array, k: usize) -> Result<Array> {
    let mut y = x.clone();
    for _ in 0..k {
        y = mapping_forward(theta, &y)?;
    }
    Ok(y)
}

/// Tape-free loss for canonical sample `x`.
pub fn loss_value(
    enc: &EncoderNet,
    raster: &[f64],
    x: &Array,
    gt: &PointCloud,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    let theta = enc.forward(raster)?;
    let y = apply_power(&theta, x, cfg.k)?;
    let pred = PointCloud::from_array(&y)?;
    let chamfer_fwd = chamfer_asym(&pred, gt)?;
    let chamfer_bwd = chamfer_asym(gt, &pred)?;
    let reg = match cfg.regularizer {
        Regularizer::None => 0.0,
        Regularizer::Distance if cfg.k == 1 => reg_distance_traveled(&theta, x)?,
        Regularizer::Projection if cfg.k == 1 => reg_projection(&theta, x, gt)?,
        Regularizer::Distance => mean_sq_rows(&y, x),
        Regularizer::Projection => mean_sq_rows(&y, &crate::composition::project_onto(x, gt)?),
    };
    let lambda = if cfg.regularizer == Regularizer::None { 0.0 } else { cfg.lambda_reg };
    Ok(LossParts { total: chamfer_fwd + chamfer_bwd + lambda * reg, chamfer_fwd, chamfer_bwd, reg })
}

fn mean_sq_rows(a: &Array, b: &Array) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.rows() as f64
}

/// Loss and its gradient with respect to the encoder parameters.
pub fn loss_and_grad(
    enc: &EncoderNet,
    raster: &[f64],
    x: &Array,
    gt: &PointCloud,
    gt_index: &NnIndex,
    cfg: &TrainConfig,
) -> Result<(LossParts, Vec<f64>)> {
    let mut tape = Tape::new();
    let phi = tape.leaf(Array::vector(enc.phi().theta().to_vec()));
    let theta = enc.graph(&mut tape, phi, raster)?;
    let xv = tape.leaf(x.clone());
    let mut y = xv;
    for _ in 0..cfg.k {
        y = mapping_graph(&mut tape, enc.decoder_spec(), theta, y)?;
    }
    let (fwd, bwd) = chamfer_graph(&mut tape, y, gt, gt_index)?;
    let mut loss = tape.add(fwd, bwd)?;
    let reg = match cfg.regularizer {
        Regularizer::None => None,
        Regularizer::Distance => Some(reg_distance_graph(&mut tape, y, xv)?),
        Regularizer::Projection => Some(reg_projection_graph(&mut tape, y, x, gt)?),
    };
    if let Some(r) = reg {
        let s = tape.scale(r, cfg.lambda_reg)?;
        loss = tape.add(loss, s)?;
    }
    let mut grads = tape.backward(loss)?;
    let parts = LossParts {
        total: tape.value(loss).item(),
        chamfer_fwd: tape.value(fwd).item(),
        chamfer_bwd: tape.value(bwd).item(),
        reg: reg.map_or(0.0, |r| tape.value(r).item()),
    };
    Ok((parts, grads.take(phi).into_data()))
}

fn diagnostic(enc: &EncoderNet, label: &str, step: u64) -> String {
    let phi = enc.phi().theta();
    let norm = phi.iter().map(|v| v * v).sum::<f64>().sqrt();
    let bad = phi.iter().filter(|v| !v.is_finite()).count();
    format!("step {step}, sample {label:?}: |phi| = {norm:.6e}, {bad} non-finite of {} parameters", phi.len())
}

/// One optimizer update of `enc` on a single example with canonical sample `x`.
pub fn train_step(
    enc: &mut EncoderNet,
    adam: &mut AdamState,
    sample: &Sample,
    x: &Array,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    let index = NnIndex::build(&sample.gt);
    step_with_index(enc, adam, sample, &index, x, cfg)
}

fn step_with_index(
    enc: &mut EncoderNet,
    adam: &mut AdamState,
    sample: &Sample,
    index: &NnIndex,
    x: &Array,
    cfg: &TrainConfig,
) -> Result<LossParts> {
    let step = adam.step;
    let label = sample.gt.label.as_deref().unwrap_or("");
    let dump = |e: Error, enc: &EncoderNet| match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{m}; {}", diagnostic(enc, label, step))),
        other => other,
    };
    let (parts, grad) = loss_and_grad(enc, &sample.raster, x, &sample.gt, index, cfg).map_err(|e| dump(e, enc))?;
    if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(dump(Error::NonFinite(format!("loss {}", parts.total)), enc));
    }
    adam.step(enc.phi_mut(), &grad)?;
    Ok(parts)
}

/// Owns the encoder, optimizer state and the per-run random streams.
#[derive(Debug, Clone)]
pub struct Trainer {
    enc: EncoderNet,
    adam: AdamState,
    cfg: TrainConfig,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = rng_for(cfg.seed, Stream::EncoderInit);
        let enc = EncoderNet::init(cfg.observation_len(), &cfg.encoder_hidden, cfg.decoder.clone(), &mut rng)?;
        Trainer::from_encoder(enc, cfg)
    }

    pub fn from_encoder(enc: EncoderNet, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if enc.decoder_spec() != &cfg.decoder || enc.input_len() != cfg.observation_len() {
            return Err(Error::Spec("encoder does not match the training config".into()));
        }
        let adam = AdamState::new(enc.phi().theta().len(), cfg.learning_rate);
        Ok(Trainer { enc, adam, cfg })
    }

    pub fn encoder(&self) -> &EncoderNet {
        &self.enc
    }

    pub fn into_encoder(self) -> EncoderNet {
        self.enc
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Runs `cfg.steps` updates, visiting examples in a reshuffled order each
    /// pass and drawing a fresh canonical sample every step.
    pub fn fit(&mut self, data: &[Sample], mut on_step: impl FnMut(&StepMetrics)) -> Result<Vec<StepMetrics>> {
        if data.is_empty() {
            return Err(Error::EmptySet("training set".into()));
        }
        for s in data {
            if s.raster.len() != self.cfg.observation_len() {
                return Err(Error::shape(format!(
                    "raster of {} values, config expects {}",
                    s.raster.len(),
                    self.cfg.observation_len()
                )));
            }
        }
        let indices: Vec<NnIndex> = data.iter().map(|s| NnIndex::build(&s.gt)).collect();
        let mut order_rng = rng_for(self.cfg.seed, Stream::Ordering);
        let mut canon_rng = rng_for(self.cfg.seed, Stream::CanonicalSample);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut log = Vec::with_capacity(self.cfg.steps);
        info!("training: {}", self.cfg.summary_line());
        for step in 0..self.cfg.steps {
            if step % data.len() == 0 {
                order.shuffle(&mut order_rng);
            }
            let i = order[step % data.len()];
            let x = self.cfg.sampler.sample_with(&mut canon_rng, self.cfg.train_samples).to_array()?;
            let loss = step_with_index(&mut self.enc, &mut self.adam, &data[i], &indices[i], &x, &self.cfg)?;
            let m = StepMetrics { step, loss };
            if step % 100 == 0 {
                debug!("step {step} loss {:.6e}", loss.total);
            }
            on_step(&m);
            log.push(m);
        }
        Ok(log)
    }
}

/// Metrics log with header `step,loss,chamfer_fwd,chamfer_bwd`.
pub fn metrics_csv(log: &[StepMetrics]) -> String {
    let mut s = String::from("step,loss,chamfer_fwd,chamfer_bwd\n");
    for m in log {
        s.push_str(&format!("{},{:e},{:e},{:e}\n", m.step, m.loss.total, m.loss.chamfer_fwd, m.loss.chamfer_bwd));
    }
    s
}

/// `n_points` outputs of `f_theta^k` on a fresh canonical sample drawn with `seed`.
pub fn reconstruct(
    enc: &EncoderNet,
    raster: &[f64],
    n_points: usize,
    k: usize,
    sampler: SamplerKind,
    seed: u64,
) -> Result<PointCloud> {
    if n_points == 0 {
        return Err(Error::Precondition("n_points must be positive".into()));
    }
    let theta = enc.forward(raster)?;
    let x = CanonicalSampler::new(sampler, seed).sample(n_points).to_array()?;
    PointCloud::from_array(&apply_power(&theta, &x, k)?)
}

/// Per-example `chamfer_sym` of reconstructions, evaluated in parallel.
/// Example `i` uses the canonical seed `item_seed(seed, Eval, i)`.
pub fn eval_chamfer(
    enc: &EncoderNet,
    data: &[Sample],
    n_points: usize,
    k: usize,
    sampler: SamplerKind,
    seed: u64,
) -> Result<Vec<f64>> {
    data.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let pred = reconstruct(enc, &s.raster, n_points, k, sampler, item_seed(seed, Stream::Eval, i as u64))?;
            crate::geometry::chamfer_sym(&pred, &s.gt)
        })
        .collect()
}

/// `chamfer_sym` of the untransformed canonical sample against each target.
pub fn eval_identity_baseline(data: &[Sample], n_points: usize, sampler: SamplerKind, seed: u64) -> Result<Vec<f64>> {
    if sampler.dim() != 3 {
        return Err(Error::Spec("identity baseline needs a 3-d sampler".into()));
    }
    data.par_iter()
        .enumerate()
        .map(|(i, s)| {
            let x = CanonicalSampler::new(sampler, item_seed(seed, Stream::Eval, i as u64)).sample(n_points);
            crate::geometry::chamfer_sym(&x, &s.gt)
        })
        .collect()
}

/// Mean training loss over `data` with one fixed canonical sample per example.
pub fn mean_loss(enc: &EncoderNet, data: &[Sample], cfg: &TrainConfig, seed: u64) -> Result<f64> {
    let losses: Result<Vec<f64>> = data
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let x = CanonicalSampler::new(cfg.sampler, item_seed(seed, Stream::Probe, i as u64))
                .sample(cfg.train_samples)
                .to_array()?;
            Ok(loss_value(enc, &s.raster, &x, &s.gt, cfg)?.total)
        })
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}
