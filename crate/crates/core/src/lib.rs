//! Restless multi-armed bandits with clustered arms.
//!
//! The crate builds the mean-field linear program of an instance, solves it
//! with a dense revised simplex, turns fluid plans into integral actions
//! (re-solving every period or once), computes Whittle indices, and
//! simulates policies with reproducible per-cell random streams.

pub mod bounds;
pub mod counts;
pub mod error;
pub mod examples;
pub mod exact;
pub mod instance;
pub mod lp;
pub mod meanfield;
pub mod policy;
pub mod rounding;
pub mod sim;
pub mod whittle;

pub use counts::{
    step_cost, step_reward, ActionCount, ActionTensor, FractionalAction, FractionalState,
    StateCount,
};
pub use error::{Error, Result};
pub use instance::{ensure_valid, validate_instance, Dims, RmabInstance, Violation};
