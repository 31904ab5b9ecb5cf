// SPDX-License-Identifier: Apache-2.0
//! Size models for value-sparsity codecs, used as compression baselines.
//!
//! Only sizes are modelled; nothing is actually encoded.

/// Zero run-length encoding: every entry is one 8-bit value plus a
/// `run_bits` wide count of zeros preceding it.
///
/// A run longer than the counter can hold is split with filler entries
/// `(max_run, 0)`, each consuming `max_run + 1` positions. Trailing zeros
/// at the end of the stream are closed the same way, so a stream that
/// ends in `t` zeros pays `ceil(t / (max_run + 1))` entries for them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ZreParams {
    pub run_bits: u32,
}

impl Default for ZreParams {
    fn default() -> Self {
        ZreParams { run_bits: 4 }
    }
}

impl ZreParams {
    pub fn entry_bits(self) -> u64 {
        8 + self.run_bits as u64
    }

    pub fn entries(self, values: &[i8]) -> u64 {
        let span = 1u64 << self.run_bits; // max_run + 1
        let mut entries = 0;
        let mut run = 0u64;
        for &v in values {
            if v == 0 {
                run += 1;
            } else {
                entries += run / span + 1;
                run = 0;
            }
        }
        entries + run.div_ceil(span)
    }

    pub fn size_bits(self, values: &[i8]) -> u64 {
        self.entries(values) * self.entry_bits()
    }
}

/// ZRE size in bits with the default 4-bit run counter.
pub fn zre_size(values: &[i8]) -> u64 {
    ZreParams::default().size_bits(values)
}

/// ceil(log2(n)); 0 for n <= 1.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

/// Compressed sparse row: 8 data bits and a ceil(log2(row_len)) column
/// index per non-zero, plus (rows + 1) row pointers of ceil(log2(nnz + 1))
/// bits each. A trailing partial row counts as a row.
pub fn csr_size(values: &[i8], row_len: usize) -> u64 {
    let row_len = row_len.max(1);
    let rows = values.len().div_ceil(row_len) as u64;
    let nnz = values.iter().filter(|&&v| v != 0).count() as u64;
    nnz * 8 + nnz * ceil_log2(row_len as u64) as u64 + (rows + 1) * ceil_log2(nnz + 1) as u64
}

/// Data bits only (no run counters, indices or pointers): 8 per non-zero.
pub fn value_payload_bits(values: &[i8]) -> u64 {
    8 * values.iter().filter(|&&v| v != 0).count() as u64
}
