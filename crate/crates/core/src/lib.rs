//! Distributed space-time block codes for two-hop amplify-and-forward relay
//! networks, together with group decoders (PIC and PIC-SIC), their
//! full-diversity checks and a Monte-Carlo bit-error-rate harness.
//!
//! The numerical core is generic over the real scalar type (`f32` or `f64`,
//! see [`Real`]); rates are exact rationals. The aliases at the crate root fix
//! the scalar to `f64`.
//!
//! Indices (symbols, groups, relays) are 0-based throughout.

pub mod channel;
pub mod constellation;
pub mod construct;
pub mod decode;
pub mod design;
pub mod diversity;
pub mod error;
pub mod relay;
pub mod scalar;
pub mod sim;
pub mod streams;

pub use construct::{
    bits_per_channel_use, build, drop_relays, preset, rate_cspcu, GroupingScheme, PresetName,
    PresetParams, Rational,
};
pub use decode::DecoderKind;
pub use diversity::{Criterion, CriterionReport, Witness};
pub use error::{Error, Result};
pub use scalar::{Cx, Real};
pub use sim::{run_ber, BerCurve, BerPoint, ExperimentConfig};

/// Complex `f64`.
pub type Complex = Cx<f64>;
pub type Design = design::LinearDesign<f64>;
pub type Cod = design::CodProfile<f64>;
pub type Code = construct::DstbcCode<f64>;
pub type SignalSet = constellation::SignalSet<f64>;
pub type Rotation = constellation::RotationMatrix<f64>;
pub type RelayForm = relay::ConjugateLinearForm<f64>;
pub type Channel = channel::ChannelRealization<f64>;
pub type Power = channel::PowerConfig<f64>;
pub type Noise = channel::NoiseModel<f64>;
pub type Problem<'a> = decode::DecodeProblem<'a, f64>;
pub type Decision = decode::DecodeResult<f64>;
