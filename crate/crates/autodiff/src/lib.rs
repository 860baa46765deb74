//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Tape`] records every operation of one forward computation. Learnable
//! tensors live in a [`ParamStore`] and are pulled onto a tape with
//! [`Tape::param`]; [`Tape::backward`] writes gradients back into the store,
//! and [`adam_step`] consumes them.

pub mod checkpoint;
mod error;
pub mod gradcheck;
pub mod nn;
mod optim;
mod params;
mod tape;
mod tensor;

pub use error::{AdError, Result};
pub use gradcheck::{grad_check, GradCheckReport};
pub use nn::{Activation, GruCell, Linear, LstmCell, Mlp};
pub use optim::{adam_step, clip_grad_norm, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use tape::{sigmoid, softplus, BackwardStats, Tape, Var};
pub use tensor::Tensor;
