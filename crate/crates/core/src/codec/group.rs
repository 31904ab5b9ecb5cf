// SPDX-License-Identifier: Apache-2.0
use std::fmt;

use super::sm::{sm_byte, SignMagnitude};
use crate::error::{Error, Result};
use crate::model::{LayerShape, WeightTensor};

/// Number of weights sharing one zero-column index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroupSize(u8);

impl GroupSize {
    pub const ALL: [GroupSize; 7] = [
        GroupSize(1),
        GroupSize(2),
        GroupSize(4),
        GroupSize(8),
        GroupSize(16),
        GroupSize(32),
        GroupSize(64),
    ];
    /// Column sizes the hardware supports per layer.
    pub const HARDWARE: [GroupSize; 3] = [GroupSize(8), GroupSize(16), GroupSize(32)];

    pub fn new(g: usize) -> Result<Self> {
        match g {
            1 | 2 | 4 | 8 | 16 | 32 | 64 => Ok(GroupSize(g as u8)),
            _ => Err(Error::InvalidGroupSize(g)),
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Bytes per packed column: ceil(G / 8).
    pub fn column_bytes(self) -> usize {
        self.get().div_ceil(8)
    }
}

impl fmt::Display for GroupSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<usize> for GroupSize {
    type Error = Error;
    fn try_from(g: usize) -> Result<Self> {
        GroupSize::new(g)
    }
}

/// 8-bit column mask: bit 7 is the sign column, bits 6..0 the magnitude
/// columns at that significance. A set bit marks a non-zero column.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ZeroColumnIndex(pub u8);

impl ZeroColumnIndex {
    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn sign_nonzero(self) -> bool {
        self.0 & 0x80 != 0
    }

    pub fn magnitude_mask(self) -> u8 {
        self.0 & 0x7f
    }

    /// Stored columns, sign included.
    pub fn nonzero_columns(self) -> u32 {
        self.0.count_ones()
    }

    pub fn nonzero_magnitude_columns(self) -> u32 {
        self.magnitude_mask().count_ones()
    }

    pub fn zero_columns(self) -> u32 {
        8 - self.nonzero_columns()
    }

    /// Set bits in storage order: sign first, then significance 6 down to 0.
    pub fn stored_columns(self) -> impl Iterator<Item = u8> {
        (0..8u8).rev().filter(move |b| self.0 & (1 << b) != 0)
    }
}

/// Location of a group inside its layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupCoord {
    /// Filter (kernel) index; always 0 for depthwise layers.
    pub filter: usize,
    /// Kernel position fy * FX + fx.
    pub position: usize,
    /// First channel covered by the group.
    pub channel_offset: usize,
}

/// Geometry of the group partition of one layer.
///
/// Groups run along the input-channel axis of one kernel position. For
/// depthwise layers every filter owns exactly one input channel, so the
/// channel axis is the filter axis and there is a single "filter".
/// Iteration order is filter-major, then kernel position, then channel
/// block; the last block per (filter, position) is zero padded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupLayout {
    shape: LayerShape,
    group_size: GroupSize,
    filters: usize,
    channels: usize,
    positions: usize,
    blocks: usize,
}

impl GroupLayout {
    pub fn new(shape: &LayerShape, group_size: GroupSize) -> Self {
        let (filters, channels) = if shape.kind.is_depthwise() {
            (1, shape.out_channels)
        } else {
            (shape.out_channels, shape.in_channels)
        };
        GroupLayout {
            shape: *shape,
            group_size,
            filters,
            channels,
            positions: shape.kernel_positions(),
            blocks: channels.div_ceil(group_size.get()),
        }
    }

    pub fn group_size(&self) -> GroupSize {
        self.group_size
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    /// Length of the grouped (channel) axis.
    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn positions(&self) -> usize {
        self.positions
    }

    pub fn blocks_per_position(&self) -> usize {
        self.blocks
    }

    pub fn group_count(&self) -> usize {
        self.filters * self.positions * self.blocks
    }

    pub fn group_id(&self, filter: usize, position: usize, block: usize) -> usize {
        (filter * self.positions + position) * self.blocks + block
    }

    pub fn coord(&self, group: usize) -> GroupCoord {
        let block = group % self.blocks;
        let rest = group / self.blocks;
        GroupCoord {
            filter: rest / self.positions,
            position: rest % self.positions,
            channel_offset: block * self.group_size.get(),
        }
    }

    /// Flat tensor offset of element `j` of `group`, `None` for padding.
    pub fn element_offset(&self, group: usize, j: usize) -> Option<usize> {
        let c = self.coord(group);
        let ch = c.channel_offset + j;
        if j >= self.group_size.get() || ch >= self.channels {
            return None;
        }
        let fy = c.position / self.shape.kernel_x;
        let fx = c.position % self.shape.kernel_x;
        Some(if self.shape.kind.is_depthwise() {
            self.shape.weight_offset(ch, 0, fy, fx)
        } else {
            self.shape.weight_offset(c.filter, ch, fy, fx)
        })
    }

    /// Copies the G values of `group` out of `values` (padding = 0).
    pub fn gather(&self, values: &[i8], group: usize, out: &mut [i8]) {
        for (j, slot) in out.iter_mut().enumerate() {
            *slot = self.element_offset(group, j).map_or(0, |o| values[o]);
        }
    }

    /// Writes the G values of `group` back (padding slots are skipped).
    pub fn scatter(&self, values: &mut [i8], group: usize, src: &[i8]) {
        for (j, &v) in src.iter().enumerate() {
            if let Some(o) = self.element_offset(group, j) {
                values[o] = v;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitGroup {
    pub coord: GroupCoord,
    /// Exactly G entries; padding is +0.
    pub values: Vec<SignMagnitude>,
}

impl BitGroup {
    pub fn from_values(coord: GroupCoord, values: &[i8]) -> Self {
        BitGroup {
            coord,
            values: values
                .iter()
                .map(|&v| SignMagnitude::from_i8(v).0)
                .collect(),
        }
    }
}

pub fn partition_groups(tensor: &WeightTensor, group_size: GroupSize) -> Vec<BitGroup> {
    let layout = GroupLayout::new(&tensor.shape, group_size);
    let mut buf = vec![0i8; group_size.get()];
    (0..layout.group_count())
        .map(|g| {
            layout.gather(&tensor.values, g, &mut buf);
            BitGroup::from_values(layout.coord(g), &buf)
        })
        .collect()
}

pub fn column_index(group: &BitGroup) -> ZeroColumnIndex {
    ZeroColumnIndex(group.values.iter().fold(0, |acc, v| acc | v.to_byte()))
}

/// Sign-magnitude column index of raw int8 values.
pub fn sm_column_index(values: &[i8]) -> ZeroColumnIndex {
    ZeroColumnIndex(values.iter().fold(0, |acc, &v| acc | sm_byte(v)))
}

/// Two's-complement column index of raw int8 values.
pub fn twos_column_index(values: &[i8]) -> ZeroColumnIndex {
    ZeroColumnIndex(values.iter().fold(0, |acc, &v| acc | v as u8))
}

/// Sign-magnitude column indexes of every group of `tensor`.
pub fn column_indexes(tensor: &WeightTensor, group_size: GroupSize) -> Vec<ZeroColumnIndex> {
    let layout = GroupLayout::new(&tensor.shape, group_size);
    let mut buf = vec![0i8; group_size.get()];
    (0..layout.group_count())
        .map(|g| {
            layout.gather(&tensor.values, g, &mut buf);
            sm_column_index(&buf)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerKind;

    fn tensor(shape: LayerShape) -> WeightTensor {
        let n = shape.weight_count();
        WeightTensor::new("t", shape, (0..n).map(|i| (i + 1) as i8).collect()).unwrap()
    }

    #[test]
    fn group_size_validation() {
        assert!(GroupSize::new(3).is_err());
        assert!(GroupSize::new(128).is_err());
        assert_eq!(GroupSize::new(16).unwrap().column_bytes(), 2);
        assert_eq!(GroupSize::new(4).unwrap().column_bytes(), 1);
    }

    #[test]
    fn exact_channel_fit_is_one_group() {
        let t = tensor(LayerShape::conv(1, 4, 1, 1));
        let groups = partition_groups(&t, GroupSize::new(4).unwrap());
        assert_eq!(groups.len(), 1);
    }

    #[test]
    fn tail_is_zero_padded() {
        let t = tensor(LayerShape::conv(1, 3, 1, 1));
        let groups = partition_groups(&t, GroupSize::new(4).unwrap());
        assert_eq!(groups.len(), 1);
        let vals: Vec<i8> = groups[0].values.iter().map(|v| v.value()).collect();
        assert_eq!(vals, vec![1, 2, 3, 0]);
    }

    #[test]
    fn kernel_major_channel_block_order() {
        // K=2, C=8: values are (k*8 + c + 1)
        let t = tensor(LayerShape::conv(2, 8, 1, 1));
        let groups = partition_groups(&t, GroupSize::new(4).unwrap());
        let seen: Vec<(usize, usize, Vec<i8>)> = groups
            .iter()
            .map(|g| {
                (
                    g.coord.filter,
                    g.coord.channel_offset,
                    g.values.iter().map(|v| v.value()).collect(),
                )
            })
            .collect();
        assert_eq!(
            seen,
            vec![
                (0, 0, vec![1, 2, 3, 4]),
                (0, 4, vec![5, 6, 7, 8]),
                (1, 0, vec![9, 10, 11, 12]),
                (1, 4, vec![13, 14, 15, 16]),
            ]
        );
    }

    #[test]
    fn groups_follow_channels_at_fixed_position() {
        // K=1, C=2, FY=1, FX=2: layout is c0fx0, c0fx1, c1fx0, c1fx1
        let t = tensor(LayerShape::conv(1, 2, 1, 2));
        let groups = partition_groups(&t, GroupSize::new(2).unwrap());
        let vals: Vec<Vec<i8>> = groups
            .iter()
            .map(|g| g.values.iter().map(|v| v.value()).collect())
            .collect();
        assert_eq!(vals, vec![vec![1, 3], vec![2, 4]]);
    }

    #[test]
    fn depthwise_groups_run_across_filters() {
        let shape = LayerShape::conv(5, 1, 1, 2).with_kind(LayerKind::DepthwiseConv);
        let t = tensor(shape);
        let layout = GroupLayout::new(&shape, GroupSize::new(4).unwrap());
        assert_eq!(layout.group_count(), 2 * 2);
        let groups = partition_groups(&t, GroupSize::new(4).unwrap());
        let first: Vec<i8> = groups[0].values.iter().map(|v| v.value()).collect();
        // position 0 of channels 0..4 sits at offsets 0, 2, 4, 6
        assert_eq!(first, vec![1, 3, 5, 7]);
        let tail: Vec<i8> = groups[1].values.iter().map(|v| v.value()).collect();
        assert_eq!(tail, vec![9, 0, 0, 0]);
    }

    #[test]
    fn gather_scatter_cover_every_element_once() {
        let shape = LayerShape::conv(3, 5, 2, 3);
        let t = tensor(shape);
        for g in GroupSize::ALL {
            let layout = GroupLayout::new(&shape, g);
            let mut out = vec![0i8; t.len()];
            let mut buf = vec![0i8; g.get()];
            for id in 0..layout.group_count() {
                layout.gather(&t.values, id, &mut buf);
                layout.scatter(&mut out, id, &buf);
            }
            assert_eq!(out, t.values);
            assert_eq!(layout.group_count(), 5usize.div_ceil(g.get()) * 3 * 6);
        }
    }

    #[test]
    fn column_index_examples() {
        let coord = GroupCoord {
            filter: 0,
            position: 0,
            channel_offset: 0,
        };
        let g = BitGroup::from_values(coord, &[2, 6, 4, 4]);
        assert_eq!(column_index(&g), ZeroColumnIndex(0b0_0000110));
        let z = BitGroup::from_values(coord, &[0, 0, 0, 0]);
        assert_eq!(column_index(&z), ZeroColumnIndex(0));
        let n = BitGroup::from_values(coord, &[0, 1, -1, 0]);
        assert!(column_index(&n).sign_nonzero());
    }

    #[test]
    fn stored_column_order() {
        let idx = ZeroColumnIndex(0b1000_0110);
        assert_eq!(idx.stored_columns().collect::<Vec<_>>(), vec![7, 2, 1]);
        assert_eq!(idx.nonzero_magnitude_columns(), 2);
        assert_eq!(idx.zero_columns(), 5);
    }
}
