//! Eigen-domain MIMO channel generation.
//!
//! Channels are produced directly as time series of singular-vector matrices
//! `U(t)`, `V(t)` and complex singular values `S(t)`; the physical channel
//! `H = U S V^H` is assembled only on request. Around the generators sit stress
//! injection (forced eigenmode swaps), per-mode SIR under outdated weights,
//! and statistical checks on the output.

pub mod analysis;
pub mod config;
pub mod detclasses;
pub mod doppler;
pub mod eigenmodel;
pub mod error;
pub mod io;
pub mod numkit;
mod par;
pub mod scenario;
pub mod streams;
pub mod validation;

pub use config::{parse_config, ModelClass, ModelConfig, RunKind};
pub use error::{Error, Result};

/// Generates a trace of any class.
pub fn generate(cfg: &ModelConfig) -> Result<eigenmodel::EigenTrace> {
    match cfg.class {
        ModelClass::V => eigenmodel::gen_class_v(cfg),
        _ => detclasses::generate(cfg),
    }
}
