// SPDX-License-Identifier: Apache-2.0
use super::group::{sm_column_index, twos_column_index, GroupLayout, GroupSize};
use super::sm::sm_byte;
use crate::model::WeightTensor;

/// Value, bit and column sparsity of one tensor. All fractions are in
/// [0, 1]; the ratios are bit sparsity over value sparsity and are
/// `f64::INFINITY` when the tensor has no zero values. Column sparsity
/// counts all 8 columns of every (padded) group in both encodings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SparsityStats {
    pub group_size: GroupSize,
    pub value: f64,
    pub bit_twos: f64,
    pub bit_sm: f64,
    pub column_sm: f64,
    pub column_twos: f64,
    pub ratio_twos: f64,
    pub ratio_sm: f64,
}

fn frac(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

fn sparsity_ratio(bit: f64, value: f64) -> f64 {
    if value == 0.0 {
        f64::INFINITY
    } else {
        bit / value
    }
}

pub fn sparsity_stats(tensor: &WeightTensor, group_size: GroupSize) -> SparsityStats {
    let n = tensor.len() as u64;
    let zeros = tensor.values.iter().filter(|&&v| v == 0).count() as u64;
    let ones_twos: u64 = tensor
        .values
        .iter()
        .map(|&v| (v as u8).count_ones() as u64)
        .sum();
    let ones_sm: u64 = tensor
        .values
        .iter()
        .map(|&v| sm_byte(v).count_ones() as u64)
        .sum();

    let layout = GroupLayout::new(&tensor.shape, group_size);
    let mut buf = vec![0i8; group_size.get()];
    let (mut zero_sm, mut zero_twos) = (0u64, 0u64);
    for g in 0..layout.group_count() {
        layout.gather(&tensor.values, g, &mut buf);
        zero_sm += sm_column_index(&buf).zero_columns() as u64;
        zero_twos += twos_column_index(&buf).zero_columns() as u64;
    }
    let columns = 8 * layout.group_count() as u64;

    let value = frac(zeros, n);
    let bit_twos = 1.0 - frac(ones_twos, 8 * n).min(1.0);
    let bit_sm = 1.0 - frac(ones_sm, 8 * n).min(1.0);
    let (bit_twos, bit_sm) = if n == 0 {
        (1.0, 1.0)
    } else {
        (bit_twos, bit_sm)
    };
    SparsityStats {
        group_size,
        value,
        bit_twos,
        bit_sm,
        column_sm: frac(zero_sm, columns),
        column_twos: frac(zero_twos, columns),
        ratio_twos: sparsity_ratio(bit_twos, value),
        ratio_sm: sparsity_ratio(bit_sm, value),
    }
}
