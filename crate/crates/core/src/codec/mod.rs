// SPDX-License-Identifier: Apache-2.0
//! Sign-magnitude bit-column codec.
//!
//! Weights are converted to sign-magnitude, grouped G at a time along the
//! input-channel axis, and each group stores an 8-bit zero-column index
//! followed by only its non-zero bit columns.

mod baseline;
mod compress;
mod group;
mod sm;
mod stats;

pub use baseline::{ceil_log2, csr_size, value_payload_bits, zre_size, ZreParams};
pub(crate) use compress::ratio;
pub use compress::{
    bcs_size_bits, best_group_size, compress_layer, compression_ratio, decode_group,
    decompress_layer, Compressed, CompressedGroup, CompressedLayer, Mode, ModeChoice, Payload,
};
pub use group::{
    column_index, column_indexes, partition_groups, sm_column_index, twos_column_index, BitGroup,
    GroupCoord, GroupLayout, GroupSize, ZeroColumnIndex,
};
pub use sm::{sm_byte, to_sign_magnitude, SignMagnitude};
pub use stats::{sparsity_stats, SparsityStats};
