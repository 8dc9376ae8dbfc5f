use rand::Rng;

use super::mlp::{count_params, mapping_forward, mapping_graph, Activation, FlatParams, MlpSpec};
use crate::error::{Error, Result};
use crate::tensor::{Array, Tape, Var};

/// Network `g_phi` that maps a flattened observation to the full parameter
/// vector of a decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderNet {
    phi: FlatParams,
    decoder: MlpSpec,
}

impl EncoderNet {
    /// Builds an encoder `[input_len, hidden..., count_params(decoder)]`.
    ///
    /// Hidden layers draw weights from `U(±1/sqrt(fan_in))`; the output layer
    /// uses a tenth of that range so initial decoders are near-zero maps.
    /// Biases start at zero.
    pub fn init<R: Rng + ?Sized>(input_len: usize, hidden: &[usize], decoder: MlpSpec, rng: &mut R) -> Result<Self> {
        let mut sizes = vec![input_len];
        sizes.extend_from_slice(hidden);
        sizes.push(count_params(&decoder));
        let spec = MlpSpec::new(sizes, Activation::Relu)?;
        let mut theta = Vec::with_capacity(count_params(&spec));
        for l in 0..spec.num_layers() {
            let (fi, fo) = spec.layer_dims(l);
            let mut r = 1.0 / (fi as f64).sqrt();
            if l + 1 == spec.num_layers() {
                r *= 0.1;
            }
            theta.extend((0..fi * fo).map(|_| rng.random_range(-r..r)));
            theta.extend(std::iter::repeat_n(0.0, fo));
        }
        EncoderNet::from_parts(FlatParams::new(spec, theta)?, decoder)
    }

    pub fn from_parts(phi: FlatParams, decoder: MlpSpec) -> Result<Self> {
        if phi.spec().output_dim() != count_params(&decoder) {
            return Err(Error::Spec(format!(
                "encoder emits {} values, decoder {decoder} needs {}",
                phi.spec().output_dim(),
                count_params(&decoder)
            )));
        }
        Ok(EncoderNet { phi, decoder })
    }

    pub fn phi(&self) -> &FlatParams {
        &self.phi
    }

    pub fn phi_mut(&mut self) -> &mut [f64] {
        self.phi.theta_mut()
    }

    pub fn spec(&self) -> &MlpSpec {
        self.phi.spec()
    }

    pub fn decoder_spec(&self) -> &MlpSpec {
        &self.decoder
    }

    pub fn input_len(&self) -> usize {
        self.phi.spec().input_dim()
    }

    fn check_obs(&self, len: usize) -> Result<()> {
        if len != self.input_len() {
            return Err(Error::shape(format!("observation has {len} values, encoder expects {}", self.input_len())));
        }
        Ok(())
    }

    /// Decoder parameters for one observation.
    pub fn forward(&self, observation: &[f64]) -> Result<FlatParams> {
        self.check_obs(observation.len())?;
        let x = Array::matrix(1, observation.len(), observation.to_vec())?;
        let theta = mapping_forward(&self.phi, &x)?.into_data();
        FlatParams::new(self.decoder.clone(), theta)
    }

    /// Records the encoder on `tape`; returns the decoder parameter node `[P]`.
    pub fn graph(&self, tape: &mut Tape, phi: Var, observation: &[f64]) -> Result<Var> {
        self.check_obs(observation.len())?;
        let x = tape.leaf(Array::matrix(1, observation.len(), observation.to_vec())?);
        let out = mapping_graph(tape, self.phi.spec(), phi, x)?;
        tape.reshape(out, vec![count_params(&self.decoder)])
    }
}

/// Free-function form of [`EncoderNet::forward`].
pub fn encoder_forward(enc: &EncoderNet, observation: &[f64]) -> Result<FlatParams> {
    enc.forward(observation)
}
