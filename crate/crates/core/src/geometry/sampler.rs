use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PointCloud;
use crate::error::Error;
use crate::seeding::{rng_for, Stream};

/// Canonical sets the mapping network is fed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Ball3Interior,
    Sphere3Surface,
    Cube3Interior,
    Ball4Interior,
}

impl SamplerKind {
    pub fn dim(self) -> usize {
        match self {
            SamplerKind::Ball4Interior => 4,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ball3Interior => "ball3_interior",
            SamplerKind::Sphere3Surface => "sphere3_surface",
            SamplerKind::Cube3Interior => "cube3_interior",
            SamplerKind::Ball4Interior => "ball4_interior",
        }
    }

    /// Draws `count` i.i.d. uniform points using `rng`.
    pub fn sample_with<R: Rng + ?Sized>(self, rng: &mut R, count: usize) -> PointCloud {
        let d = self.dim();
        let mut coords = Vec::with_capacity(count * d);
        let mut dir = vec![0.0; d];
        for _ in 0..count {
            match self {
                SamplerKind::Cube3Interior => {
                    for _ in 0..d {
                        coords.push(rng.random_range(-1.0..1.0));
                    }
                }
                _ => {
                    // normalized Gaussian direction; interior radius u^(1/d)
                    let norm = loop {
                        for v in dir.iter_mut() {
                            *v = StandardNormal.sample(rng);
                        }
                        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if n > 1e-12 {
                            break n;
                        }
                    };
                    let r = if self == SamplerKind::Sphere3Surface {
                        1.0
                    } else {
                        rng.random::<f64>().powf(1.0 / d as f64)
                    };
                    coords.extend(dir.iter().map(|v| v / norm * r));
                }
            }
        }
        PointCloud::new(d, coords).expect("sampler emits finite points")
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "ball3_interior" => SamplerKind::Ball3Interior,
            "sphere3_surface" => SamplerKind::Sphere3Surface,
            "cube3_interior" => SamplerKind::Cube3Interior,
            "ball4_interior" => SamplerKind::Ball4Interior,
            _ => return Err(Error::Format(format!("unknown sampler {s:?}"))),
        })
    }
}

/// A seeded canonical sampler; identical seeds give identical samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalSampler {
    pub kind: SamplerKind,
    pub seed: u64,
}

impl CanonicalSampler {
    pub fn new(kind: SamplerKind, seed: u64) -> Self {
        CanonicalSampler { kind, seed }
    }

    pub fn sample(&self, count: usize) -> PointCloud {
        let mut rng = rng_for(self.seed, Stream::CanonicalSample);
        self.kind.sample_with(&mut rng, count)
    }
}
