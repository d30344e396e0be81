pub mod channel;
pub mod error;
pub mod game;
pub mod harness;
pub mod marl;
pub mod net;
pub mod oracle;
pub mod rng;
pub mod scalar;
pub mod topology;

pub use error::{Error, Result};

/// Learner networks run in single precision.
pub type Net = net::DenseNetwork<f32>;
pub type Realization = channel::ChannelRealization<f64>;
pub type LinkPowers = game::Powers<f64>;
pub type Queue = game::QueueState<f64>;
