// SPDX-License-Identifier: Apache-2.0
use super::spec::{AcceleratorSpec, Unroll};
use crate::error::Result;
use crate::model::LayerShape;

/// Dense (no sparsity, no compression) activity of one layer. DRAM and
/// SRAM counts are bytes; register counts are 8-bit accesses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActivityCounts {
    pub n_mac: u64,
    /// Array steps (tiles) of the mapping.
    pub steps: u64,
    /// Compute cycles without skipping: steps, times 8 on bit-serial arrays.
    pub cycles: u64,
    pub dram_read_w: u64,
    pub dram_read_a: u64,
    pub dram_write_o: u64,
    pub sram_write_w: u64,
    pub sram_write_a: u64,
    pub sram_read_w: u64,
    pub sram_read_a: u64,
    pub sram_write_o: u64,
    pub reg_read: u64,
    pub reg_write: u64,
}

impl ActivityCounts {
    /// Average MACs completed per compute cycle.
    pub fn macs_per_cycle(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.n_mac as f64 / self.cycles as f64
        }
    }
}

/// Streaming passes needed to move `bytes` through a buffer of `capacity`.
pub fn passes(bytes: u64, capacity: u64) -> u64 {
    bytes.div_ceil(capacity).max(1)
}

/// Dense activity under the spec's chosen unrolling for this layer.
///
/// Every tensor is streamed from DRAM once per pass, a pass being one
/// SRAM-full. Each step reads `c * k` weights and `c * ox` activations
/// from SRAM; every MAC reads two register operands and writes one.
pub fn dense_activity(
    shape: &LayerShape,
    spec: &AcceleratorSpec,
) -> Result<(Unroll, ActivityCounts)> {
    let unroll = spec.dataflow.select(shape)?;
    let steps = unroll.steps(shape);
    let cycles = steps * if spec.bit_serial { 8 } else { 1 };
    let n_mac = shape.mac_count();
    let w = shape.weight_count() as u64;
    let i = shape.input_bytes();
    let o = shape.output_bytes();
    let dram_read_w = passes(w, spec.weight_sram_bytes) * w;
    let dram_read_a = passes(i, spec.act_sram_bytes) * i;
    Ok((
        unroll,
        ActivityCounts {
            n_mac,
            steps,
            cycles,
            dram_read_w,
            dram_read_a,
            dram_write_o: o,
            sram_write_w: dram_read_w,
            sram_write_a: dram_read_a,
            sram_read_w: steps * unroll.c as u64 * unroll.k as u64,
            sram_read_a: steps * unroll.c as u64 * unroll.ox as u64,
            sram_write_o: o,
            reg_read: 2 * n_mac,
            reg_write: n_mac,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perf::spec::{preset, Dataflow};

    fn one_pe() -> AcceleratorSpec {
        AcceleratorSpec {
            dataflow: Dataflow::Fixed(Unroll::any(1, 1, 1)),
            ..preset("dense").unwrap()
        }
    }

    #[test]
    fn single_mac() {
        let (_, c) = dense_activity(&LayerShape::conv(1, 1, 1, 1), &one_pe()).unwrap();
        assert_eq!(c.n_mac, 1);
        assert_eq!(c.dram_read_w, 1);
        assert_eq!(c.cycles, 1);
        assert_eq!((c.reg_read, c.reg_write), (2, 1));
    }

    #[test]
    fn pass_arithmetic() {
        let shape = LayerShape::conv(16, 16, 3, 3);
        let w = shape.weight_count() as u64;
        let mut spec = one_pe();
        let (_, fits) = dense_activity(&shape, &spec).unwrap();
        assert_eq!(fits.dram_read_w, w);
        spec.weight_sram_bytes = w / 2;
        let (_, twice) = dense_activity(&shape, &spec).unwrap();
        assert_eq!(twice.dram_read_w, 2 * w);
        spec.weight_sram_bytes = w / 2 - 1;
        assert_eq!(dense_activity(&shape, &spec).unwrap().1.dram_read_w, 3 * w);
    }

    #[test]
    fn bit_serial_costs_eight_cycles_per_step() {
        let shape = LayerShape::conv(32, 8, 1, 1).with_output(16, 1);
        let (u, c) = dense_activity(&shape, &preset("bitcol-dense").unwrap()).unwrap();
        assert_eq!(u.su, Some(1));
        assert_eq!((c.steps, c.cycles), (1, 8));
        assert_eq!(c.macs_per_cycle(), 4096.0 / 8.0);
    }
}
