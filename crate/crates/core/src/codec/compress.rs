// SPDX-License-Identifier: Apache-2.0
use super::group::{sm_column_index, GroupLayout, GroupSize, ZeroColumnIndex};
use super::sm::{sm_byte, SignMagnitude};
use crate::error::{Error, Result};
use crate::model::{LayerShape, WeightTensor};

/// Storage mode of a compressed layer; the discriminant is the on-disk byte.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Mode {
    Dense = 0,
    Bcs = 1,
}

impl Mode {
    pub fn from_byte(b: u8) -> Option<Mode> {
        match b {
            0 => Some(Mode::Dense),
            1 => Some(Mode::Bcs),
            _ => None,
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Dense => "dense",
            Mode::Bcs => "bcs",
        })
    }
}

/// Requested mode; `Auto` picks BCS iff it is strictly smaller than dense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModeChoice {
    Dense,
    Bcs,
    Auto,
}

/// One group: its index and `popcount(index) * ceil(G/8)` bytes of
/// column bits in storage order (sign, then 6..0). Element j of a column
/// sits at bit `j % 8` of byte `j / 8`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedGroup {
    pub index: ZeroColumnIndex,
    pub columns: Vec<u8>,
}

impl CompressedGroup {
    /// Column bits (element j at bit j) for significance `bit`
    /// (7 = sign); zero when the column is not stored.
    pub fn column(&self, bit: u8, group_size: GroupSize) -> u64 {
        let per = group_size.column_bytes();
        match self.index.stored_columns().position(|b| b == bit) {
            Some(slot) => {
                let bytes = &self.columns[slot * per..(slot + 1) * per];
                bytes
                    .iter()
                    .enumerate()
                    .fold(0u64, |acc, (i, &b)| acc | (b as u64) << (8 * i))
            }
            None => 0,
        }
    }

    pub fn check(&self, group: usize, group_size: GroupSize) -> Result<()> {
        let expected = self.index.nonzero_columns() as usize * group_size.column_bytes();
        if self.columns.len() != expected {
            return Err(Error::IndexPayloadMismatch {
                group,
                expected: self.index.nonzero_columns() as usize,
                actual: self.columns.len(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Dense(Vec<i8>),
    Bcs(Vec<CompressedGroup>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompressedLayer {
    pub name: String,
    pub group_size: GroupSize,
    pub element_count: u32,
    pub group_count: u32,
    pub payload: Payload,
}

impl CompressedLayer {
    pub fn mode(&self) -> Mode {
        match self.payload {
            Payload::Dense(_) => Mode::Dense,
            Payload::Bcs(_) => Mode::Bcs,
        }
    }

    pub fn groups(&self) -> Option<&[CompressedGroup]> {
        match &self.payload {
            Payload::Bcs(g) => Some(g),
            Payload::Dense(_) => None,
        }
    }

    /// Size in bits under the ideal bit-packing used for compression
    /// ratios: 8N for dense, sum of (8 + popcount * G) for BCS.
    pub fn size_bits(&self, include_index: bool) -> u64 {
        match &self.payload {
            Payload::Dense(v) => 8 * v.len() as u64,
            Payload::Bcs(groups) => bcs_size_bits(
                groups.iter().map(|g| g.index),
                self.group_size,
                include_index,
            ),
        }
    }
}

/// Result of compressing a layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compressed {
    pub layer: CompressedLayer,
    /// Number of -128 values clamped to -127 (BCS mode only).
    pub clamped: usize,
}

pub fn bcs_size_bits(
    indexes: impl IntoIterator<Item = ZeroColumnIndex>,
    group_size: GroupSize,
    include_index: bool,
) -> u64 {
    let g = group_size.get() as u64;
    let overhead = if include_index { 8 } else { 0 };
    indexes
        .into_iter()
        .map(|i| overhead + i.nonzero_columns() as u64 * g)
        .sum()
}

fn pack_group(values: &[i8], group_size: GroupSize) -> CompressedGroup {
    let index = sm_column_index(values);
    let per = group_size.column_bytes();
    let mut columns = Vec::with_capacity(index.nonzero_columns() as usize * per);
    for bit in index.stored_columns() {
        let start = columns.len();
        columns.resize(start + per, 0);
        for (j, &v) in values.iter().enumerate() {
            if sm_byte(v) >> bit & 1 == 1 {
                columns[start + j / 8] |= 1 << (j % 8);
            }
        }
    }
    CompressedGroup { index, columns }
}

pub fn compress_layer(
    tensor: &WeightTensor,
    group_size: GroupSize,
    mode: ModeChoice,
) -> Compressed {
    let layout = GroupLayout::new(&tensor.shape, group_size);
    let element_count = tensor.len() as u32;
    let group_count = layout.group_count() as u32;
    let dense = || Compressed {
        layer: CompressedLayer {
            name: tensor.name.clone(),
            group_size,
            element_count,
            group_count,
            payload: Payload::Dense(tensor.values.clone()),
        },
        clamped: 0,
    };
    if mode == ModeChoice::Dense {
        return dense();
    }

    let mut buf = vec![0i8; group_size.get()];
    let groups: Vec<CompressedGroup> = (0..layout.group_count())
        .map(|g| {
            layout.gather(&tensor.values, g, &mut buf);
            pack_group(&buf, group_size)
        })
        .collect();

    if mode == ModeChoice::Auto {
        let bcs = bcs_size_bits(groups.iter().map(|g| g.index), group_size, true);
        if bcs >= 8 * tensor.len() as u64 {
            return dense();
        }
    }
    Compressed {
        layer: CompressedLayer {
            name: tensor.name.clone(),
            group_size,
            element_count,
            group_count,
            payload: Payload::Bcs(groups),
        },
        clamped: tensor.values.iter().filter(|&&v| v == i8::MIN).count(),
    }
}

/// Unpacks one group into its G values.
pub fn decode_group(group: &CompressedGroup, group_size: GroupSize, out: &mut [i8]) {
    let mut bytes = vec![0u8; group_size.get()];
    let per = group_size.column_bytes();
    for (slot, bit) in group.index.stored_columns().enumerate() {
        let col = &group.columns[slot * per..(slot + 1) * per];
        for (j, b) in bytes.iter_mut().enumerate() {
            if col[j / 8] >> (j % 8) & 1 == 1 {
                *b |= 1 << bit;
            }
        }
    }
    for (o, b) in out.iter_mut().zip(bytes) {
        *o = SignMagnitude::from_byte(b).value();
    }
}

/// Reconstructs the tensor values. `shape` supplies the group geometry,
/// which the payload itself does not record.
pub fn decompress_layer(layer: &CompressedLayer, shape: &LayerShape) -> Result<Vec<i8>> {
    let layout = GroupLayout::new(shape, layer.group_size);
    if layer.element_count as usize != shape.weight_count() {
        return Err(Error::ShapeMismatch(format!(
            "layer `{}` holds {} elements, shape needs {}",
            layer.name,
            layer.element_count,
            shape.weight_count()
        )));
    }
    match &layer.payload {
        Payload::Dense(v) => {
            if v.len() != shape.weight_count() {
                return Err(Error::Truncated(format!(
                    "dense payload of `{}` has {} of {} bytes",
                    layer.name,
                    v.len(),
                    shape.weight_count()
                )));
            }
            Ok(v.clone())
        }
        Payload::Bcs(groups) => {
            if groups.len() != layout.group_count() || layer.group_count as usize != groups.len() {
                return Err(Error::Truncated(format!(
                    "`{}` has {} groups, layout needs {}",
                    layer.name,
                    groups.len(),
                    layout.group_count()
                )));
            }
            let mut values = vec![0i8; shape.weight_count()];
            let mut buf = vec![0i8; layer.group_size.get()];
            for (id, g) in groups.iter().enumerate() {
                g.check(id, layer.group_size)?;
                decode_group(g, layer.group_size, &mut buf);
                layout.scatter(&mut values, id, &buf);
            }
            Ok(values)
        }
    }
}

/// Original size over compressed size, in bits. Dense layers report 1.
/// Without the index term an all-zero layer has no payload and reports
/// `f64::INFINITY`.
pub fn compression_ratio(layer: &CompressedLayer, include_index: bool) -> f64 {
    match layer.payload {
        Payload::Dense(_) => 1.0,
        Payload::Bcs(_) => ratio(
            8 * layer.element_count as u64,
            layer.size_bits(include_index),
        ),
    }
}

pub(crate) fn ratio(original_bits: u64, compressed_bits: u64) -> f64 {
    if compressed_bits == 0 {
        f64::INFINITY
    } else {
        original_bits as f64 / compressed_bits as f64
    }
}

/// Best real (index-inclusive) BCS ratio among `candidates`; ties keep
/// the smaller group size.
pub fn best_group_size(tensor: &WeightTensor, candidates: &[GroupSize]) -> GroupSize {
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &g in candidates {
        let idx = super::group::column_indexes(tensor, g);
        let cr = ratio(8 * tensor.len() as u64, bcs_size_bits(idx, g, true));
        if cr > best.1 {
            best = (g, cr);
        }
    }
    best.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerShape;

    fn g(n: usize) -> GroupSize {
        GroupSize::new(n).unwrap()
    }

    fn t(values: Vec<i8>, k: usize, c: usize) -> WeightTensor {
        WeightTensor::new("t", LayerShape::conv(k, c, 1, 1), values).unwrap()
    }

    #[test]
    fn hand_packed_group_of_four() {
        let c = compress_layer(&t(vec![2, 6, 4, 4], 1, 4), g(4), ModeChoice::Bcs);
        let groups = c.layer.groups().unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].index, ZeroColumnIndex(0b0000_0110));
        // bit2 column: 6, 4, 4 -> elements 1,2,3; bit1 column: 2, 6 -> elements 0,1
        assert_eq!(groups[0].columns, vec![0b1110, 0b0011]);
        assert_eq!(c.layer.size_bits(true), 16);
        assert_eq!(compression_ratio(&c.layer, true), 2.0);
        assert_eq!(compression_ratio(&c.layer, false), 4.0);
    }

    #[test]
    fn zeros_cost_index_only() {
        for gs in GroupSize::ALL {
            let c = compress_layer(&t(vec![0; 64], 1, 64), gs, ModeChoice::Bcs);
            let groups = c.layer.groups().unwrap();
            assert!(groups
                .iter()
                .all(|g| g.index.0 == 0 && g.columns.is_empty()));
            assert_eq!(c.layer.size_bits(true), 8 * groups.len() as u64);
            assert_eq!(compression_ratio(&c.layer, false), f64::INFINITY);
        }
        let c = compress_layer(&t(vec![0; 8], 1, 8), g(8), ModeChoice::Bcs);
        assert_eq!(compression_ratio(&c.layer, true), 8.0);
    }

    #[test]
    fn all_columns_set() {
        let c = compress_layer(
            &t(vec![-127, 0, 0, 0, 0, 0, 0, 0], 1, 8),
            g(8),
            ModeChoice::Bcs,
        );
        assert_eq!(c.layer.groups().unwrap()[0].index.0, 0xff);
        assert_eq!(compression_ratio(&c.layer, true), 64.0 / 72.0);
        // auto picks dense when BCS is not smaller
        let auto = compress_layer(
            &t(vec![-127, 0, 0, 0, 0, 0, 0, 0], 1, 8),
            g(8),
            ModeChoice::Auto,
        );
        assert_eq!(auto.layer.mode(), Mode::Dense);
        assert_eq!(compression_ratio(&auto.layer, true), 1.0);
    }

    #[test]
    fn dense_payload_is_input() {
        let vals: Vec<i8> = vec![-128, -5, 0, 7, 127, 3];
        let tensor = t(vals.clone(), 2, 3);
        let c = compress_layer(&tensor, g(4), ModeChoice::Dense);
        assert_eq!(c.layer.payload, Payload::Dense(vals.clone()));
        assert_eq!(c.clamped, 0);
        assert_eq!(decompress_layer(&c.layer, &tensor.shape).unwrap(), vals);
    }

    #[test]
    fn round_trip_with_padding_and_wide_groups() {
        let vals: Vec<i8> = (0..3 * 37).map(|i| ((i * 53 % 255) - 127) as i8).collect();
        let tensor = t(vals.clone(), 3, 37);
        for gs in GroupSize::ALL {
            let c = compress_layer(&tensor, gs, ModeChoice::Bcs);
            assert_eq!(
                decompress_layer(&c.layer, &tensor.shape).unwrap(),
                vals,
                "G={gs}"
            );
        }
    }

    #[test]
    fn small_negatives_leave_zero_columns() {
        // sign-magnitude makes small negatives cheap: -1, -2, 1, 3 need
        // columns sign, bit1, bit0 only
        let vals = vec![-1, -2, 1, 3];
        let c = compress_layer(&t(vals.clone(), 1, 4), g(4), ModeChoice::Bcs);
        let idx = c.layer.groups().unwrap()[0].index;
        assert_eq!(idx.zero_columns(), 5);
        assert_eq!(
            decompress_layer(&c.layer, &LayerShape::conv(1, 4, 1, 1)).unwrap(),
            vals
        );
    }

    #[test]
    fn clamp_is_counted() {
        let tensor = t(vec![-128, 1, -128, 0], 1, 4);
        let c = compress_layer(&tensor, g(4), ModeChoice::Bcs);
        assert_eq!(c.clamped, 2);
        assert_eq!(
            decompress_layer(&c.layer, &tensor.shape).unwrap(),
            vec![-127, 1, -127, 0]
        );
    }

    #[test]
    fn malformed_payloads() {
        let tensor = t(vec![1, 2, 3, 4], 1, 4);
        let mut c = compress_layer(&tensor, g(4), ModeChoice::Bcs).layer;
        if let Payload::Bcs(groups) = &mut c.payload {
            groups[0].columns.pop();
        }
        assert!(matches!(
            decompress_layer(&c, &tensor.shape),
            Err(Error::IndexPayloadMismatch { .. })
        ));
        let c = compress_layer(&tensor, g(4), ModeChoice::Bcs).layer;
        assert!(decompress_layer(&c, &LayerShape::conv(1, 8, 1, 1)).is_err());
    }

    #[test]
    fn column_accessor() {
        let c = compress_layer(&t(vec![5, -1], 1, 2), g(2), ModeChoice::Bcs);
        let grp = &c.layer.groups().unwrap()[0];
        assert_eq!(grp.column(7, g(2)), 0b10);
        assert_eq!(grp.column(2, g(2)), 0b01);
        assert_eq!(grp.column(0, g(2)), 0b11);
        assert_eq!(grp.column(1, g(2)), 0);
    }
}
