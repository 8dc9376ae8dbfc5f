//! Fast-weight mapping networks, the parameter-emitting encoder, and LVC decoders.
//!
//! Parameter counts compared by the LVC conversion are decoder-side only; the
//! encoder is shared by both regimes and left out of the comparison.

mod encoder;
mod lvc;
mod mlp;

pub use encoder::{encoder_forward, EncoderNet};
pub use lvc::{
    complexity_lvc, distinct_hof_pair, lvc_collision_demo, lvc_forward, lvc_to_hof, CollisionReport, LvcSpec,
};
pub use mlp::{count_params, mapping_forward, mapping_graph, Activation, FlatParams, LayerParams, MlpSpec};
