// SPDX-License-Identifier: Apache-2.0
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::bce::{bce_dense, bce_group, dot_ref};
use crate::codec::{decode_group, CompressedLayer, GroupLayout, Payload};
use crate::error::{Error, Result};
use crate::mapper::SpatialUnrolling;
use crate::model::LayerShape;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SimOptions {
    /// Charge one extra cycle to groups whose sign column is stored.
    pub count_sign_cycle: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleCount {
    /// Cycles of each group in storage order.
    pub group_cycles: Vec<u32>,
    /// Array steps per output tile: filter blocks x positions x channel blocks.
    pub steps: u64,
    /// Times every step is repeated over output pixels and batch.
    pub repeats: u64,
    pub total_cycles: u64,
    /// Lane cycles lost waiting at the lockstep barrier.
    pub barrier_loss: u64,
}

impl CycleCount {
    /// Mean cycles per group, i.e. the prediction without barrier effects.
    pub fn mean_group_cycles(&self) -> f64 {
        if self.group_cycles.is_empty() {
            0.0
        } else {
            self.group_cycles.iter().map(|&c| c as f64).sum::<f64>()
                / self.group_cycles.len() as f64
        }
    }
}

fn layout_for(
    layer: &CompressedLayer,
    shape: &LayerShape,
    su: &SpatialUnrolling,
) -> Result<GroupLayout> {
    su.check(shape)?;
    let g = layer.group_size.get();
    if !g.is_multiple_of(8) {
        return Err(Error::GroupingMismatch {
            su: su.to_string(),
            group_size: g,
        });
    }
    let layout = GroupLayout::new(shape, layer.group_size);
    if layout.group_count() != layer.group_count as usize
        || shape.weight_count() != layer.element_count as usize
    {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: {} groups / {} weights stored, shape implies {} / {}",
            layer.name,
            layer.group_count,
            layer.element_count,
            layout.group_count(),
            shape.weight_count()
        )));
    }
    Ok(layout)
}

/// Per-group cycles: non-zero magnitude columns (8 in dense mode).
pub fn group_cycles(layer: &CompressedLayer, options: &SimOptions) -> Vec<u32> {
    match &layer.payload {
        Payload::Dense(_) => vec![8; layer.group_count as usize],
        Payload::Bcs(groups) => groups
            .iter()
            .map(|g| {
                g.index.nonzero_magnitude_columns()
                    + u32::from(options.count_sign_cycle && g.index.sign_nonzero())
            })
            .collect(),
    }
}

/// Lockstep cycle count of one layer on `su`.
///
/// A step covers `K_u` filters and `C_u` channels of one kernel position;
/// every group overlapping that tile is one lane and the step lasts as long
/// as its slowest lane. Steps repeat for every `OX_u`-wide slice of the
/// output row, every output row and every batch item.
pub fn simulate_layer(
    layer: &CompressedLayer,
    shape: &LayerShape,
    su: &SpatialUnrolling,
    options: &SimOptions,
) -> Result<CycleCount> {
    let layout = layout_for(layer, shape, su)?;
    let cycles = group_cycles(layer, options);
    let g = layer.group_size.get();
    let (c_u, k_u) = (su.c_u as usize, su.k_u as usize);
    let channels = layout.channels();
    let filters = layout.filters();

    let mut steps = 0u64;
    let mut step_cycles = 0u64;
    let mut loss = 0u64;
    let mut lane = Vec::new();
    for fb in 0..filters.div_ceil(k_u) {
        for p in 0..layout.positions() {
            for cb in 0..channels.div_ceil(c_u) {
                let lo = cb * c_u;
                let hi = ((cb + 1) * c_u).min(channels);
                lane.clear();
                for f in fb * k_u..((fb + 1) * k_u).min(filters) {
                    for b in lo / g..=(hi - 1) / g {
                        lane.push(cycles[layout.group_id(f, p, b)] as u64);
                    }
                }
                let max = lane.iter().copied().max().unwrap_or(0);
                loss += lane.iter().map(|&c| max - c).sum::<u64>();
                step_cycles += max;
                steps += 1;
            }
        }
    }
    let repeats =
        (shape.out_x as u64).div_ceil(su.ox_u as u64) * shape.out_y as u64 * shape.batch as u64;
    Ok(CycleCount {
        group_cycles: cycles,
        steps,
        repeats,
        total_cycles: step_cycles * repeats,
        barrier_loss: loss * repeats,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyReport {
    pub groups: usize,
    pub mismatches: usize,
}

/// Runs every group of the layer through the engine with seeded random
/// activations and compares against the reference dot product of the
/// stored weights.
pub fn verify_layer(
    layer: &CompressedLayer,
    shape: &LayerShape,
    seed: u64,
) -> Result<VerifyReport> {
    let gs = layer.group_size;
    let layout = GroupLayout::new(shape, gs);
    if layout.group_count() != layer.group_count as usize {
        return Err(Error::ShapeMismatch(format!(
            "layer {}: {} groups stored, shape implies {}",
            layer.name,
            layer.group_count,
            layout.group_count()
        )));
    }
    let mismatches = (0..layout.group_count())
        .into_par_iter()
        .map(|gi| -> Result<usize> {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed ^ (gi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let acts: Vec<i8> = (0..gs.get()).map(|_| rng.gen()).collect();
            let mut w = vec![0i8; gs.get()];
            let got = match &layer.payload {
                Payload::Bcs(groups) => {
                    decode_group(&groups[gi], gs, &mut w);
                    bce_group(&acts, &groups[gi], gs)?.dot
                }
                Payload::Dense(values) => {
                    layout.gather(values, gi, &mut w);
                    for v in &mut w {
                        *v = (*v).max(-127);
                    }
                    bce_dense(&acts, &w)?.dot
                }
            };
            Ok(usize::from(got != dot_ref(&acts, &w)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    Ok(VerifyReport {
        groups: layout.group_count(),
        mismatches,
    })
}
