// SPDX-License-Identifier: Apache-2.0
//! Bit-exact model of the column-serial compute engine and lockstep cycle
//! accounting for whole layers.

mod bce;
mod layer;

pub use bce::{
    bce_column, bce_dense, bce_group, dot_ref, parse_index, smm, BceOutput, ParsedIndex,
};
pub use layer::{group_cycles, simulate_layer, verify_layer, CycleCount, SimOptions, VerifyReport};
