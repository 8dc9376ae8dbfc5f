//! Finite-difference gradient checks.

use hofnet::funcnets::{Activation, EncoderNet, MlpSpec};
use hofnet::geometry::{NnIndex, SamplerKind};
use hofnet::seeding::{rng_for, Stream};
use hofnet::tensor::{Array, OpKind, Tape, Var};
use hofnet::training::{loss_and_grad, loss_value, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A recorded graph that can be replayed with different leaf values.
pub struct Program {
    leaves: Vec<Array>,
    ops: Vec<(OpKind, Vec<usize>)>,
}

impl Program {
    fn replay(&self, leaves: &[Array]) -> (Tape, Vec<Var>) {
        let mut tape = Tape::new();
        let mut vars: Vec<Var> = leaves.iter().map(|a| tape.leaf(a.clone())).collect();
        for (kind, ops) in &self.ops {
            let operands: Vec<Var> = ops.iter().map(|&i| vars[i]).collect();
            vars.push(tape.apply(kind.clone(), &operands).unwrap());
        }
        (tape, vars)
    }

    fn eval(&self, leaves: &[Array]) -> f64 {
        let (tape, vars) = self.replay(leaves);
        tape.value(*vars.last().unwrap()).item()
    }

    /// Whether any relu input sits within `margin` of its kink.
    pub fn near_kink(&self, margin: f64) -> bool {
        let (tape, vars) = self.replay(&self.leaves);
        self.ops
            .iter()
            .any(|(k, ops)| *k == OpKind::Relu && tape.value(vars[ops[0]]).data().iter().any(|x| x.abs() < margin))
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array {
    Array::matrix(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Random chain of 2-D operations ending in a scalar reduction.
pub fn random_program(rng: &mut ChaCha8Rng) -> Program {
    let (r, c) = (rng.random_range(1..5), rng.random_range(1..5));
    let mut p = Program { leaves: vec![random_matrix(rng, r, c)], ops: Vec::new() };
    let mut cur = 0;
    let n_ops = rng.random_range(2..7);
    let mut plan: Vec<(OpKind, Option<Array>)> = Vec::new();
    let mut shape = vec![r, c];
    for _ in 0..n_ops {
        let (r, c) = (shape[0], shape[1]);
        let choice = rng.random_range(0..10);
        let step = match choice {
            0 => {
                let k = rng.random_range(1..5);
                shape = vec![r, k];
                (OpKind::MatMul, Some(random_matrix(rng, c, k)))
            }
            1 => (OpKind::Add, Some(random_matrix(rng, r, c))),
            2 => (OpKind::Sub, Some(random_matrix(rng, 1, c).reshaped(vec![c]).unwrap())),
            3 => (OpKind::Relu, None),
            4 => (OpKind::Tanh, None),
            5 => (OpKind::Scale(rng.random_range(-2.0..2.0)), None),
            6 => {
                shape = vec![c, r];
                (OpKind::Transpose, None)
            }
            7 => {
                let idx: Vec<usize> = (0..rng.random_range(1..5)).map(|_| rng.random_range(0..r)).collect();
                shape = vec![idx.len(), c];
                (OpKind::GatherRows(idx), None)
            }
            8 => {
                let total = r * c;
                let len = rng.random_range(1..=total);
                let off = rng.random_range(0..=total - len);
                shape = vec![1, len];
                (OpKind::Slice { offset: off, shape: vec![1, len] }, None)
            }
            _ => {
                shape = vec![c, r];
                (OpKind::Reshape(vec![c, r]), None)
            }
        };
        plan.push(step);
    }
    // all leaves precede all ops in replay order
    let mut binary = Vec::new();
    for (kind, extra) in plan {
        let rhs = extra.map(|a| {
            p.leaves.push(a);
            p.leaves.len() - 1
        });
        binary.push((kind, rhs));
    }
    let base = p.leaves.len();
    for (i, (kind, rhs)) in binary.into_iter().enumerate() {
        let mut operands = vec![cur];
        operands.extend(rhs);
        p.ops.push((kind, operands));
        cur = base + i;
    }
    let reduce = if rng.random_bool(0.5) { OpKind::SqNorm } else { OpKind::ReduceMean };
    p.ops.push((reduce, vec![cur]));
    p
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn check_program(p: &Program) -> f64 {
    let (tape, vars) = p.replay(&p.leaves);
    let grads = tape.backward(*vars.last().unwrap()).unwrap();
    let h = 1e-6;
    let mut ad = Vec::new();
    let mut fd = Vec::new();
    for (li, leaf) in p.leaves.iter().enumerate() {
        ad.extend_from_slice(grads.get(vars[li]).data());
        for j in 0..leaf.len() {
            let mut plus = p.leaves.clone();
            plus[li].data_mut()[j] += h;
            let mut minus = p.leaves.clone();
            minus[li].data_mut()[j] -= h;
            fd.push((p.eval(&plus) - p.eval(&minus)) / (2.0 * h));
        }
    }
    let diff: Vec<f64> = ad.iter().zip(&fd).map(|(a, b)| a - b).collect();
    norm(&diff) / norm(&ad).max(norm(&fd)).max(1e-8)
}

/// Relative errors of the first `count` random programs that stay at least
/// `margin` away from every relu kink, keyed by generator seed.
pub fn op_graph_errors(count: usize, margin: f64) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(count);
    let mut seed = 0u64;
    while out.len() < count {
        seed += 1;
        let p = random_program(&mut ChaCha8Rng::seed_from_u64(seed));
        if p.near_kink(margin) {
            continue;
        }
        out.push((seed, check_program(&p)));
    }
    out
}

pub struct EndToEnd {
    pub rel_err: f64,
    pub skipped: usize,
    pub total: usize,
    pub fd_norm: f64,
}

/// Raster through encoder, decoder and Chamfer loss, differentiated with
/// respect to the encoder weights.
pub fn end_to_end() -> EndToEnd {
    let cfg = TrainConfig {
        decoder: MlpSpec::new(vec![3, 4, 3], Activation::Relu).unwrap(),
        encoder_hidden: vec![5],
        raster_side: 4,
        train_samples: 8,
        gt_points: 8,
        ..Default::default()
    };
    let mut rng = rng_for(11, Stream::EncoderInit);
    let mut enc = EncoderNet::init(16, &cfg.encoder_hidden, cfg.decoder.clone(), &mut rng).unwrap();
    // larger weights keep the decoder far from the zero map
    for v in enc.phi_mut().iter_mut() {
        *v *= 8.0;
    }
    let raster: Vec<f64> = (0..16).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
    let x = SamplerKind::Ball3Interior.sample_with(&mut rng_for(1, Stream::Probe), 8).to_array().unwrap();
    let gt = SamplerKind::Sphere3Surface.sample_with(&mut rng_for(2, Stream::Probe), 8).scaled(0.6);
    let idx = NnIndex::build(&gt);
    let (_, grad) = loss_and_grad(&enc, &raster, &x, &gt, &idx, &cfg).unwrap();

    let h = 1e-6;
    let eval = |e: &EncoderNet| loss_value(e, &raster, &x, &gt, &cfg).unwrap().total;
    let base = eval(&enc);
    let (mut ad, mut fd) = (Vec::new(), Vec::new());
    let mut skipped = 0;
    for (j, &g) in grad.iter().enumerate() {
        let mut e = enc.clone();
        e.phi_mut()[j] += h;
        let up = eval(&e);
        e.phi_mut()[j] -= 2.0 * h;
        let down = eval(&e);
        let (fwd, bwd) = ((up - base) / h, (base - down) / h);
        // one-sided slopes disagree only across a kink or a nearest-neighbor switch
        if (fwd - bwd).abs() > 1e-4 {
            skipped += 1;
            continue;
        }
        ad.push(g);
        fd.push((up - down) / (2.0 * h));
    }
    let diff: Vec<f64> = ad.iter().zip(&fd).map(|(a, b)| a - b).collect();
    let err = norm(&diff) / norm(&ad).max(norm(&fd));
    EndToEnd { rel_err: err, skipped, total: grad.len(), fd_norm: norm(&fd) }
}
