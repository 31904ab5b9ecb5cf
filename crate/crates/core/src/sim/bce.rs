// SPDX-License-Identifier: Apache-2.0
use crate::codec::{sm_byte, CompressedGroup, GroupSize};
use crate::error::{Error, Result};

/// Decoded zero-column index as seen by the compute engine.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedIndex {
    pub sign_rqst: bool,
    /// Significances of the non-zero magnitude columns, descending.
    pub schedule: Vec<u8>,
    pub nz_count: u32,
}

pub fn parse_index(idx: u8) -> ParsedIndex {
    let schedule: Vec<u8> = (0..7u8).rev().filter(|b| idx >> b & 1 == 1).collect();
    ParsedIndex {
        sign_rqst: idx & 0x80 != 0,
        nz_count: schedule.len() as u32,
        schedule,
    }
}

/// 1-bit sign-magnitude multiply: the weight bit gates the activation and
/// the weight sign negates it.
pub fn smm(activation: i8, wbit: bool, wsign: bool) -> i32 {
    match (wbit, wsign) {
        (false, _) => 0,
        (true, false) => activation as i32,
        (true, true) => -(activation as i32),
    }
}

/// Sums one bit column's partial products and applies a single shift.
/// Bit j of `column` / `signs` belongs to element j.
pub fn bce_column(acts: &[i8], column: u64, signs: u64, shift: u8) -> i64 {
    debug_assert!(shift <= 6);
    let sum: i64 = acts
        .iter()
        .enumerate()
        .map(|(j, &a)| smm(a, column >> j & 1 == 1, signs >> j & 1 == 1) as i64)
        .sum();
    sum << shift
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BceOutput {
    pub dot: i64,
    pub cycles: u32,
}

fn accumulate(acts: &[i8], schedule: &[u8], signs: u64, column: impl Fn(u8) -> u64) -> i64 {
    let bound = acts.len() as i64 * 128 * 127;
    let mut acc = 0i64;
    for &bit in schedule {
        acc += bce_column(acts, column(bit), signs, bit);
        debug_assert!(acc.abs() <= bound, "accumulator {acc} exceeds {bound}");
    }
    acc
}

/// Runs one compressed group against `acts` (length G).
pub fn bce_group(acts: &[i8], group: &CompressedGroup, group_size: GroupSize) -> Result<BceOutput> {
    if acts.len() != group_size.get() {
        return Err(Error::ShapeMismatch(format!(
            "{} activations for a group of {}",
            acts.len(),
            group_size
        )));
    }
    group.check(0, group_size)?;
    let parsed = parse_index(group.index.bits());
    // without a sign request every sign bit is treated as 0
    let signs = if parsed.sign_rqst {
        group.column(7, group_size)
    } else {
        0
    };
    let dot = accumulate(acts, &parsed.schedule, signs, |b| {
        group.column(b, group_size)
    });
    Ok(BceOutput {
        dot,
        cycles: parsed.nz_count,
    })
}

/// Dense-mode engine: all seven magnitude columns are processed, costing
/// the full 8-cycle operand precision. -128 weights are seen as -127.
pub fn bce_dense(acts: &[i8], weights: &[i8]) -> Result<BceOutput> {
    if acts.len() != weights.len() || acts.len() > 64 {
        return Err(Error::ShapeMismatch(format!(
            "{} activations, {} weights",
            acts.len(),
            weights.len()
        )));
    }
    let sm: Vec<u8> = weights.iter().map(|&w| sm_byte(w)).collect();
    let col = |b: u8| {
        sm.iter()
            .enumerate()
            .fold(0u64, |acc, (j, &x)| acc | ((x >> b & 1) as u64) << j)
    };
    let schedule: Vec<u8> = (0..7).rev().collect();
    Ok(BceOutput {
        dot: accumulate(acts, &schedule, col(7), col),
        cycles: 8,
    })
}

pub fn dot_ref(acts: &[i8], weights: &[i8]) -> i64 {
    acts.iter()
        .zip(weights)
        .map(|(&a, &w)| a as i64 * w as i64)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{compress_layer, decode_group, ModeChoice};
    use crate::model::{LayerShape, WeightTensor};
    use rand::{Rng, SeedableRng};

    fn compress_one(w: &[i8]) -> (CompressedGroup, GroupSize) {
        let g = GroupSize::new(w.len()).unwrap();
        let t = WeightTensor::new("g", LayerShape::conv(1, w.len(), 1, 1), w.to_vec()).unwrap();
        let c = compress_layer(&t, g, ModeChoice::Bcs).layer;
        (c.groups().unwrap()[0].clone(), g)
    }

    #[test]
    fn index_parsing() {
        assert_eq!(
            parse_index(0x00),
            ParsedIndex {
                sign_rqst: false,
                schedule: vec![],
                nz_count: 0
            }
        );
        assert_eq!(
            parse_index(0x86),
            ParsedIndex {
                sign_rqst: true,
                schedule: vec![2, 1],
                nz_count: 2
            }
        );
        assert_eq!(parse_index(0x7F).schedule, vec![6, 5, 4, 3, 2, 1, 0]);
        for i in 0..=255u8 {
            assert_eq!(parse_index(i).nz_count, (i & 0x7F).count_ones());
        }
    }

    #[test]
    fn smm_rule() {
        assert_eq!(smm(3, true, false), 3);
        assert_eq!(smm(-2, true, true), 2);
        assert_eq!(smm(127, false, true), 0);
        assert_eq!(smm(-128, true, true), 128);
    }

    #[test]
    fn column_sum_then_shift() {
        // weights {+5, -1}, column bit 0: bits [1,1], signs [0,1]
        assert_eq!(bce_column(&[3, -2], 0b11, 0b10, 0), 5);
        assert_eq!(bce_column(&[3, -2], 0, 0b11, 5), 0);
        assert_eq!(bce_column(&[1], 1, 0, 6), 64);
    }

    #[test]
    fn worked_group() {
        let (g, gs) = compress_one(&[5, -1]);
        let out = bce_group(&[3, -2], &g, gs).unwrap();
        assert_eq!(out, BceOutput { dot: 17, cycles: 2 });
        assert_eq!(dot_ref(&[3, -2], &[5, -1]), 17);
    }

    #[test]
    fn zero_group_is_free() {
        let (g, gs) = compress_one(&[0; 8]);
        assert_eq!(
            bce_group(&[9; 8], &g, gs).unwrap(),
            BceOutput { dot: 0, cycles: 0 }
        );
    }

    #[test]
    fn dot_ref_examples() {
        assert_eq!(dot_ref(&[1, 2], &[3, 4]), 11);
        assert_eq!(dot_ref(&[-128, 0], &[1, 0]), -128);
    }

    #[test]
    fn random_groups_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for g in [8usize, 16, 32, 64] {
            for _ in 0..300 {
                let w: Vec<i8> = (0..g).map(|_| rng.gen_range(-127..=127)).collect();
                let a: Vec<i8> = (0..g).map(|_| rng.gen()).collect();
                let (cg, gs) = compress_one(&w);
                let out = bce_group(&a, &cg, gs).unwrap();
                assert_eq!(out.dot, dot_ref(&a, &w));
                assert_eq!(out.cycles, (cg.index.bits() & 0x7F).count_ones());
                assert_eq!(bce_dense(&a, &w).unwrap().dot, dot_ref(&a, &w));
            }
        }
    }

    #[test]
    fn clamped_weight_within_bound() {
        let w = [-128i8, 3, 0, 1, 1, 1, 1, 1];
        let a = [100i8, -5, 7, 1, 2, 3, 4, 5];
        let (cg, gs) = compress_one(&w);
        let mut dec = [0i8; 8];
        decode_group(&cg, gs, &mut dec);
        let out = bce_group(&a, &cg, gs).unwrap();
        assert_eq!(out.dot, dot_ref(&a, &dec));
        assert!((out.dot - dot_ref(&a, &w)).abs() <= 127 * 8);
    }

    #[test]
    fn malformed_group_rejected() {
        let (mut g, gs) = compress_one(&[5, -1]);
        g.columns.pop();
        assert!(bce_group(&[1, 1], &g, gs).is_err());
        let (g, gs) = compress_one(&[5, -1]);
        assert!(bce_group(&[1, 1, 1], &g, gs).is_err());
    }
}
