// SPDX-License-Identifier: Apache-2.0
use rayon::prelude::*;

use super::nearest::{best_column_set, SignPolicy};
use crate::codec::{bcs_size_bits, GroupLayout, GroupSize, ZeroColumnIndex};
use crate::model::WeightTensor;

#[derive(Clone, Debug, PartialEq)]
pub struct FlipResult {
    pub tensor: WeightTensor,
    pub group_size: GroupSize,
    pub z: u32,
    pub indexes: Vec<ZeroColumnIndex>,
    pub squared_error: u64,
    pub max_abs_error: u32,
    /// `histogram[k]` groups ended up with exactly k zero columns.
    pub histogram: [u64; 9],
}

impl FlipResult {
    /// Real compression ratio of the flipped tensor (index bytes included).
    pub fn compression_ratio(&self) -> f64 {
        let bits = bcs_size_bits(self.indexes.iter().copied(), self.group_size, true);
        crate::codec::ratio(8 * self.tensor.len() as u64, bits)
    }

    pub fn mse(&self) -> f64 {
        if self.tensor.is_empty() {
            0.0
        } else {
            self.squared_error as f64 / self.tensor.len() as f64
        }
    }
}

/// Flips every group of `tensor` independently so that it has at least `z`
/// zero columns.
pub fn flip_layer(
    tensor: &WeightTensor,
    group_size: GroupSize,
    z: u32,
    policy: SignPolicy,
) -> FlipResult {
    assert!(z <= 8, "at most 8 zero columns");
    let layout = GroupLayout::new(&tensor.shape, group_size);
    let choices: Vec<_> = (0..layout.group_count())
        .into_par_iter()
        .map(|g| {
            let mut buf = vec![0i8; group_size.get()];
            layout.gather(&tensor.values, g, &mut buf);
            best_column_set(&buf, z, policy)
        })
        .collect();

    let mut values = tensor.values.clone();
    let mut indexes = Vec::with_capacity(choices.len());
    let mut histogram = [0u64; 9];
    let mut squared_error = 0;
    for (g, c) in choices.iter().enumerate() {
        layout.scatter(&mut values, g, &c.values);
        indexes.push(c.index);
        histogram[c.index.zero_columns() as usize] += 1;
        squared_error += c.squared_error;
    }
    let max_abs_error = tensor
        .values
        .iter()
        .zip(&values)
        .map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs())
        .max()
        .unwrap_or(0);
    FlipResult {
        tensor: WeightTensor {
            name: tensor.name.clone(),
            shape: tensor.shape,
            values,
        },
        group_size,
        z,
        indexes,
        squared_error,
        max_abs_error,
        histogram,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{column_indexes, compress_layer, compression_ratio, ModeChoice};
    use crate::model::LayerShape;
    use rand::{Rng, SeedableRng};

    fn random(seed: u64) -> WeightTensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape = LayerShape::conv(4, 24, 3, 3);
        let v = (0..shape.weight_count())
            .map(|_| rng.gen_range(-127..=127))
            .collect();
        WeightTensor::new("r", shape, v).unwrap()
    }

    #[test]
    fn z_zero_is_identity() {
        let t = random(1);
        let r = flip_layer(&t, GroupSize::new(8).unwrap(), 0, SignPolicy::Optimize);
        assert_eq!(r.tensor, t);
        assert_eq!(r.squared_error, 0);
        let lossless = compress_layer(&t, GroupSize::new(8).unwrap(), ModeChoice::Bcs).layer;
        assert_eq!(r.compression_ratio(), compression_ratio(&lossless, true));
    }

    #[test]
    fn all_zero_unchanged() {
        let t = WeightTensor::new("z", LayerShape::conv(2, 16, 1, 1), vec![0; 32]).unwrap();
        let r = flip_layer(&t, GroupSize::new(16).unwrap(), 6, SignPolicy::Optimize);
        assert_eq!(r.tensor, t);
        assert_eq!(r.histogram[8], 2);
    }

    #[test]
    fn flipping_raises_cr_and_meets_target() {
        let t = random(2);
        for g in GroupSize::HARDWARE {
            let r = flip_layer(&t, g, 4, SignPolicy::Optimize);
            let lossless = compress_layer(&t, g, ModeChoice::Bcs).layer;
            assert!(r.compression_ratio() >= compression_ratio(&lossless, true));
            // recompute indices independently from the flipped values
            for idx in column_indexes(&r.tensor, g) {
                assert!(idx.zero_columns() >= 4);
            }
            assert_eq!(r.indexes, column_indexes(&r.tensor, g));
            assert!(r.tensor.values.iter().all(|&v| v != i8::MIN));
            let sq: u64 = t
                .values
                .iter()
                .zip(&r.tensor.values)
                .map(|(&a, &b)| ((a as i64 - b as i64) * (a as i64 - b as i64)) as u64)
                .sum();
            assert_eq!(sq, r.squared_error);
        }
    }

    #[test]
    fn deterministic() {
        let t = random(3);
        let g = GroupSize::new(16).unwrap();
        assert_eq!(
            flip_layer(&t, g, 5, SignPolicy::Optimize),
            flip_layer(&t, g, 5, SignPolicy::Optimize)
        );
    }
}
