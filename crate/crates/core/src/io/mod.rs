//! Configuration, RNG streams and file artifacts.

pub mod config;
pub mod csv;
pub mod model;
pub mod rng;

pub use config::{
    load_config, load_config_with_provenance, parse_config, Provenance, RunConfig, Scenario, ValueSource,
};
pub use model::{read_model, write_model};
pub use rng::{label, RngStreams, StreamRng};
