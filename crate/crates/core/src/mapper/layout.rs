// SPDX-License-Identifier: Apache-2.0
use std::fmt::Write as _;

use super::catalog::SpatialUnrolling;
use crate::codec::{sm_byte, CompressedLayer, GroupLayout, Payload};
use crate::error::{Error, Result};
use crate::model::LayerShape;

/// Stored bit columns of one group, in schedule order: sign column first,
/// then significance 6 down to 0. Dense layers store all eight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupColumns {
    /// `(significance, bits)`, element j of the group at bit j.
    pub columns: Vec<(u8, u64)>,
}

/// Column view of group `group` of a compressed layer.
pub fn group_columns(layer: &CompressedLayer, layout: &GroupLayout, group: usize) -> GroupColumns {
    let g = layout.group_size();
    match &layer.payload {
        Payload::Bcs(groups) => {
            let cg = &groups[group];
            GroupColumns {
                columns: cg
                    .index
                    .stored_columns()
                    .map(|b| (b, cg.column(b, g)))
                    .collect(),
            }
        }
        Payload::Dense(values) => {
            let mut buf = vec![0i8; g.get()];
            layout.gather(values, group, &mut buf);
            let columns = (0..8u8)
                .rev()
                .map(|b| {
                    let bits = buf.iter().enumerate().fold(0u64, |acc, (j, &v)| {
                        acc | (((sm_byte(v) >> b) & 1) as u64) << j
                    });
                    (b, bits)
                })
                .collect();
            GroupColumns { columns }
        }
    }
}

pub const SEGMENTS: usize = 4;
const KERNELS_PER_SEGMENT: usize = 8;
const CHANNELS: usize = 8;

/// One 64-bit segment word: 8 kernels x 8 channels of one bit column each.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BankWord {
    /// Bank address; the four segments of a slot share it.
    pub address: u64,
    pub step: u64,
    pub slot: u32,
    pub segment: u8,
    /// Bit `kernel * 8 + channel`.
    pub bits: u64,
    /// Significance held by each kernel lane (`None` once that kernel's
    /// group has no columns left, or past the last filter).
    pub significance: [Option<u8>; KERNELS_PER_SEGMENT],
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BankLayout {
    pub words: Vec<BankWord>,
    pub slots_per_step: Vec<u32>,
}

impl BankLayout {
    pub fn addresses(&self) -> u64 {
        self.slots_per_step.iter().map(|&s| s as u64).sum()
    }

    /// One line per word: `address segment step slot bits significances`.
    pub fn render(&self) -> String {
        let mut out = String::from(
            "# address segment step slot bits(hex, bit=kernel*8+channel) significance per kernel\n",
        );
        for w in &self.words {
            let sig: Vec<String> = w
                .significance
                .iter()
                .map(|s| {
                    s.map_or(
                        "-".into(),
                        |b| if b == 7 { "s".into() } else { b.to_string() },
                    )
                })
                .collect();
            let _ = writeln!(
                out,
                "{} {} {} {} {:016x} {}",
                w.address,
                w.segment,
                w.step,
                w.slot,
                w.bits,
                sig.join(",")
            );
        }
        out
    }
}

/// Weight SRAM image for SU1: per step (32 kernels x 8 channels of one
/// kernel position), each kernel's group contributes its stored columns in
/// consecutive slots; the step lasts as long as its longest group. Steps
/// run filter block, kernel position, channel block.
pub fn weight_bank_layout(
    layer: &CompressedLayer,
    shape: &LayerShape,
    su: &SpatialUnrolling,
) -> Result<BankLayout> {
    if su.id != 1 {
        return Err(Error::Config(format!(
            "bank layout is defined for SU1 only, got {su}"
        )));
    }
    su.check(shape)?;
    let g = layer.group_size.get();
    if !g.is_multiple_of(CHANNELS) {
        return Err(Error::GroupingMismatch {
            su: su.to_string(),
            group_size: g,
        });
    }
    let layout = GroupLayout::new(shape, layer.group_size);
    if layout.group_count() != layer.group_count as usize {
        return Err(Error::ShapeMismatch(format!(
            "layer {} has {} groups, shape implies {}",
            layer.name,
            layer.group_count,
            layout.group_count()
        )));
    }
    let k_u = su.k_u as usize;
    let filter_blocks = layout.filters().div_ceil(k_u);
    let channel_blocks = layout.channels().div_ceil(CHANNELS);

    let mut words = Vec::new();
    let mut slots_per_step = Vec::new();
    let mut address = 0u64;
    let mut step = 0u64;
    for fb in 0..filter_blocks {
        for p in 0..layout.positions() {
            for cb in 0..channel_blocks {
                let block = cb * CHANNELS / g;
                let shift = cb * CHANNELS % g;
                let lanes: Vec<Option<GroupColumns>> = (0..k_u)
                    .map(|i| {
                        let f = fb * k_u + i;
                        (f < layout.filters())
                            .then(|| group_columns(layer, &layout, layout.group_id(f, p, block)))
                    })
                    .collect();
                let slots = lanes
                    .iter()
                    .flatten()
                    .map(|c| c.columns.len())
                    .max()
                    .unwrap_or(0) as u32;
                for slot in 0..slots {
                    for seg in 0..SEGMENTS {
                        let mut bits = 0u64;
                        let mut significance = [None; KERNELS_PER_SEGMENT];
                        for (ki, sig) in significance.iter_mut().enumerate() {
                            let Some(Some(cols)) = lanes.get(seg * KERNELS_PER_SEGMENT + ki) else {
                                continue;
                            };
                            if let Some(&(b, col)) = cols.columns.get(slot as usize) {
                                bits |= ((col >> shift) & 0xFF) << (ki * CHANNELS);
                                *sig = Some(b);
                            }
                        }
                        words.push(BankWord {
                            address,
                            step,
                            slot,
                            segment: seg as u8,
                            bits,
                            significance,
                        });
                    }
                    address += 1;
                }
                slots_per_step.push(slots);
                step += 1;
            }
        }
    }
    Ok(BankLayout {
        words,
        slots_per_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{compress_layer, GroupSize, ModeChoice};
    use crate::mapper::CATALOG;
    use crate::model::WeightTensor;
    use rand::{Rng, SeedableRng};

    fn tensor(k: usize, c: usize, seed: u64) -> WeightTensor {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let shape = LayerShape::conv(k, c, 1, 1);
        let v = (0..k * c).map(|_| rng.gen_range(-20..=20)).collect();
        WeightTensor::new("l", shape, v).unwrap()
    }

    #[test]
    fn segments_are_64_bits_and_four_per_slot() {
        let t = tensor(32, 8, 1);
        let c = compress_layer(&t, GroupSize::new(8).unwrap(), ModeChoice::Bcs).layer;
        let l = weight_bank_layout(&c, &t.shape, &CATALOG[0]).unwrap();
        assert_eq!(l.words.len() as u64, 4 * l.addresses());
        assert_eq!(SEGMENTS * 64, CATALOG[0].weight_bandwidth() as usize);
    }

    #[test]
    fn bits_reconstruct_weights() {
        let t = tensor(40, 24, 2);
        for g in [8, 16] {
            let gs = GroupSize::new(g).unwrap();
            let c = compress_layer(&t, gs, ModeChoice::Bcs).layer;
            let l = weight_bank_layout(&c, &t.shape, &CATALOG[0]).unwrap();
            // rebuild sign-magnitude bytes from the word stream
            let mut sm = vec![0u8; t.len()];
            let cb_count = 3;
            for w in &l.words {
                let fb = w.step as usize / cb_count;
                let cb = w.step as usize % cb_count;
                for ki in 0..8 {
                    let Some(b) = w.significance[ki] else {
                        continue;
                    };
                    let f = fb * 32 + w.segment as usize * 8 + ki;
                    for ch in 0..8 {
                        if w.bits >> (ki * 8 + ch) & 1 == 1 {
                            sm[t.shape.weight_offset(f, cb * 8 + ch, 0, 0)] |= 1 << b;
                        }
                    }
                }
            }
            let expect: Vec<u8> = t.values.iter().map(|&v| sm_byte(v)).collect();
            assert_eq!(sm, expect, "G={g}");
        }
    }

    #[test]
    fn group_columns_take_consecutive_slots() {
        let mut t = tensor(32, 8, 3);
        // kernel 0: only bits 2 and 0, positive
        for ch in 0..8 {
            t.values[ch] = 5;
        }
        let c = compress_layer(&t, GroupSize::new(8).unwrap(), ModeChoice::Bcs).layer;
        let l = weight_bank_layout(&c, &t.shape, &CATALOG[0]).unwrap();
        let lane0: Vec<Option<u8>> = l
            .words
            .iter()
            .filter(|w| w.segment == 0)
            .map(|w| w.significance[0])
            .collect();
        assert_eq!(&lane0[..2], &[Some(2), Some(0)]);
        assert!(lane0[2..].iter().all(Option::is_none));
        assert_eq!(l.words[0].bits & 0xFF, 0xFF);
    }

    #[test]
    fn dense_layer_uses_eight_descending_slots() {
        let t = tensor(32, 8, 4);
        let c = compress_layer(&t, GroupSize::new(8).unwrap(), ModeChoice::Dense).layer;
        let l = weight_bank_layout(&c, &t.shape, &CATALOG[0]).unwrap();
        assert_eq!(l.slots_per_step, vec![8]);
        let lane: Vec<Option<u8>> = l
            .words
            .iter()
            .filter(|w| w.segment == 1)
            .map(|w| w.significance[3])
            .collect();
        assert_eq!(lane, (0..8u8).rev().map(Some).collect::<Vec<_>>());
    }

    #[test]
    fn only_su1() {
        let t = tensor(32, 8, 5);
        let c = compress_layer(&t, GroupSize::new(8).unwrap(), ModeChoice::Bcs).layer;
        assert!(weight_bank_layout(&c, &t.shape, &CATALOG[1]).is_err());
    }
}
