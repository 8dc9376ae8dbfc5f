use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::funcnets::{Activation, MlpSpec};
use crate::geometry::SamplerKind;

/// Optional penalty added to the reconstruction loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regularizer {
    None,
    /// Mean squared displacement `|f(x) - x|^2` over the canonical sample.
    Distance,
    /// Mean squared distance to the Euclidean projection onto the target.
    Projection,
}

impl Regularizer {
    pub fn name(self) -> &'static str {
        match self {
            Regularizer::None => "none",
            Regularizer::Distance => "distance",
            Regularizer::Projection => "projection",
        }
    }
}

impl fmt::Display for Regularizer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Regularizer {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Regularizer::None),
            "distance" => Ok(Regularizer::Distance),
            "projection" => Ok(Regularizer::Projection),
            _ => Err(Error::Format(format!("unknown regularizer {s:?}"))),
        }
    }
}

/// Everything needed to reproduce a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub decoder: MlpSpec,
    pub encoder_hidden: Vec<usize>,
    pub k: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub train_samples: usize,
    pub gt_points: usize,
    pub raster_side: usize,
    pub seed: u64,
    pub lambda_reg: f64,
    pub regularizer: Regularizer,
    pub sampler: SamplerKind,
}

impl Default for TrainConfig {
    /// Desk-scale defaults: HOF-1 decoder, lr 1e-3, 2000 steps.
    fn default() -> Self {
        TrainConfig {
            decoder: MlpSpec::hof1(3),
            encoder_hidden: vec![256, 256],
            k: 1,
            learning_rate: 1e-3,
            steps: 2000,
            train_samples: 1000,
            gt_points: 2000,
            raster_side: 32,
            seed: 7,
            lambda_reg: 0.01,
            regularizer: Regularizer::None,
            sampler: SamplerKind::Ball3Interior,
        }
    }
}

const KEYS: [&str; 13] = [
    "decoder",
    "activation",
    "encoder_hidden",
    "k",
    "learning_rate",
    "steps",
    "train_samples",
    "gt_points",
    "raster_side",
    "seed",
    "lambda_reg",
    "regularizer",
    "sampler",
];

fn parse_list(key: &str, v: &str) -> Result<Vec<usize>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Error::Format(format!("{key}: bad entry {t:?}"))))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse::<T>().map_err(|_| Error::Format(format!("{key}: cannot parse {v:?}")))
}

fn join(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl TrainConfig {
    /// Full-scale optimizer settings (lr 1e-5, 725k steps, 10k target points).
    pub fn full_scale() -> Self {
        TrainConfig { learning_rate: 1e-5, steps: 725_000, gt_points: 10_000, ..Default::default() }
    }

    pub fn observation_len(&self) -> usize {
        self.raster_side * self.raster_side
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("k", self.k),
            ("steps", self.steps),
            ("train_samples", self.train_samples),
            ("gt_points", self.gt_points),
            ("raster_side", self.raster_side),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::Precondition(format!("{name} must be positive")));
            }
        }
        if self.encoder_hidden.contains(&0) {
            return Err(Error::Precondition("encoder_hidden entries must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Precondition(format!("learning_rate {} not positive", self.learning_rate)));
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return Err(Error::Precondition(format!("lambda_reg {} not >= 0", self.lambda_reg)));
        }
        let d = self.sampler.dim();
        if self.decoder.input_dim() != d {
            return Err(Error::Spec(format!(
                "sampler {} is {d}-dimensional, decoder input is {}",
                self.sampler,
                self.decoder.input_dim()
            )));
        }
        if self.decoder.output_dim() != 3 {
            return Err(Error::Spec(format!("decoder must output 3-d points, got {}", self.decoder.output_dim())));
        }
        if (self.k > 1 || self.regularizer != Regularizer::None) && d != 3 {
            return Err(Error::Spec("composition and regularizers need a 3-d sampler".into()));
        }
        Ok(())
    }

    /// One `key=value` per line in a fixed key order.
    pub fn to_text(&self) -> String {
        let sizes = self.decoder.layer_sizes();
        let mut s = String::new();
        for key in KEYS {
            let v = match key {
                "decoder" => join(sizes),
                "activation" => self.decoder.activation().to_string(),
                "encoder_hidden" => join(&self.encoder_hidden),
                "k" => self.k.to_string(),
                "learning_rate" => format!("{:?}", self.learning_rate),
                "steps" => self.steps.to_string(),
                "train_samples" => self.train_samples.to_string(),
                "gt_points" => self.gt_points.to_string(),
                "raster_side" => self.raster_side.to_string(),
                "seed" => self.seed.to_string(),
                "lambda_reg" => format!("{:?}", self.lambda_reg),
                "regularizer" => self.regularizer.to_string(),
                "sampler" => self.sampler.to_string(),
                _ => unreachable!(),
            };
            s.push_str(key);
            s.push('=');
            s.push_str(&v);
            s.push('\n');
        }
        s
    }

    /// Single-line form for logs: `key=value` pairs separated by spaces.
    pub fn summary_line(&self) -> String {
        self.to_text().lines().collect::<Vec<_>>().join(" ")
    }

    /// Parses `key=value` lines over the defaults. Blank lines and `#`
    /// comments are ignored; unknown or repeated keys are errors.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        let mut decoder_sizes = cfg.decoder.layer_sizes().to_vec();
        let mut activation = cfg.decoder.activation();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) =
                line.split_once('=').ok_or_else(|| Error::Format(format!("line {}: expected key=value", no + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Format(format!("line {}: unknown key {key:?}", no + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Format(format!("line {}: duplicate key {key:?}", no + 1)));
            }
            match key {
                "decoder" => decoder_sizes = parse_list(key, value)?,
                "activation" => activation = value.parse::<Activation>().map_err(|e| Error::Format(e.to_string()))?,
                "encoder_hidden" => cfg.encoder_hidden = parse_list(key, value)?,
                "k" => cfg.k = parse_num(key, value)?,
                "learning_rate" => cfg.learning_rate = parse_num(key, value)?,
                "steps" => cfg.steps = parse_num(key, value)?,
                "train_samples" => cfg.train_samples = parse_num(key, value)?,
                "gt_points" => cfg.gt_points = parse_num(key, value)?,
                "raster_side" => cfg.raster_side = parse_num(key, value)?,
                "seed" => cfg.seed = parse_num(key, value)?,
                "lambda_reg" => cfg.lambda_reg = parse_num(key, value)?,
                "regularizer" => cfg.regularizer = value.parse()?,
                "sampler" => cfg.sampler = value.parse::<SamplerKind>().map_err(|e| Error::Format(e.to_string()))?,
                _ => unreachable!(),
            }
        }
        cfg.decoder = MlpSpec::new(decoder_sizes, activation).map_err(|e| Error::Format(e.to_string()))?;
        Ok(cfg)
    }
}
