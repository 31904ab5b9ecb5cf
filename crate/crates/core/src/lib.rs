// SPDX-License-Identifier: Apache-2.0
//! Bit-column sparsity toolkit for int8 DNN weights.

pub mod bitflip;
pub mod cli;
pub mod codec;
pub mod error;
pub mod mapper;
pub mod model;
pub mod perf;
pub mod sim;

pub use error::{Error, Result};
