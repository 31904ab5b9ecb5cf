// SPDX-License-Identifier: Apache-2.0
use std::sync::OnceLock;

use crate::codec::{sm_column_index, ZeroColumnIndex};

/// Whether the group search may force the sign column to zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SignPolicy {
    /// The sign column is one more search dimension: zeroing it sends every
    /// negative element to 0. Needed for the search to be exact.
    #[default]
    Optimize,
    /// Only magnitude columns are searched; the sign column counts toward
    /// `z` only when it is zero after flipping.
    Preserve,
}

/// `TABLE[mask][m]` is the magnitude closest to `m` among the submasks of
/// `mask`, ties going to the smaller one.
fn table() -> &'static [[u8; 128]; 128] {
    static TABLE: OnceLock<Box<[[u8; 128]; 128]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Box::new([[0u8; 128]; 128]);
        for mask in 0..128u8 {
            // all submasks, ascending
            let mut subs: Vec<u8> = (0..128u8).filter(|s| s & !mask == 0).collect();
            subs.sort_unstable();
            for m in 0..128u8 {
                let mut best = 0u8;
                for &s in &subs {
                    if (s as i32 - m as i32).abs() < (best as i32 - m as i32).abs() {
                        best = s;
                    }
                }
                t[mask as usize][m as usize] = best;
            }
        }
        t
    })
}

/// Closest value to `v` whose sign-magnitude magnitude only uses bits of
/// `mask` (bits above 6 are ignored). The sign is kept; flipping it can
/// never beat rounding to 0. −128 is treated as −127.
pub fn nearest_with_mask(v: i8, mask: u8) -> i8 {
    let m = v.unsigned_abs().min(127);
    let r = table()[(mask & 0x7F) as usize][m as usize] as i8;
    if v < 0 {
        -r
    } else {
        r
    }
}

/// Outcome of the per-group search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColumnChoice {
    /// Forced-zero columns: bit 7 is the sign column, bits 6..0 magnitudes.
    pub zeroed: u8,
    pub values: Vec<i8>,
    pub index: ZeroColumnIndex,
    pub squared_error: u64,
}

fn apply(values: &[i8], zeroed: u8, out: &mut Vec<i8>) -> u64 {
    out.clear();
    let allowed = !zeroed & 0x7F;
    let force_sign = zeroed & 0x80 != 0;
    let mut err = 0u64;
    for &v in values {
        let f = if force_sign && v < 0 {
            0
        } else {
            nearest_with_mask(v, allowed)
        };
        let d = v as i64 - f as i64;
        err += (d * d) as u64;
        out.push(f);
    }
    err
}

/// Minimum squared-error replacement of `values` whose sign-magnitude
/// zero-column index has at least `z` zero bits. Ties go to the smaller
/// forced-zero set read as an integer, so lower significances are zeroed
/// first.
pub fn best_column_set(values: &[i8], z: u32, policy: SignPolicy) -> ColumnChoice {
    assert!(z <= 8, "at most 8 zero columns");
    if z == 0 {
        let mut v = Vec::new();
        let err = apply(values, 0, &mut v);
        let index = sm_column_index(&v);
        return ColumnChoice {
            zeroed: 0,
            values: v,
            index,
            squared_error: err,
        };
    }
    let limit: u16 = match policy {
        SignPolicy::Optimize => 256,
        SignPolicy::Preserve => 128,
    };
    let mut best: Option<ColumnChoice> = None;
    let mut buf = Vec::with_capacity(values.len());
    for s in 0..limit {
        let s = s as u8;
        let err = apply(values, s, &mut buf);
        if best.as_ref().is_some_and(|b| err >= b.squared_error) {
            continue;
        }
        let index = sm_column_index(&buf);
        if index.zero_columns() < z {
            continue;
        }
        best = Some(ColumnChoice {
            zeroed: s,
            values: buf.clone(),
            index,
            squared_error: err,
        });
    }
    best.expect("zeroing every column is always feasible")
}
