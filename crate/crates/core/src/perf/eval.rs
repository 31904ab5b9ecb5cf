// SPDX-License-Identifier: Apache-2.0
use rayon::prelude::*;

use super::counts::{dense_activity, ActivityCounts};
use super::equations::{
    effective_macs, effective_memory, expected_lockstep_max, total_energy, total_latency,
    EffectiveCounts, EnergyBreakdown, LatencyTerms,
};
use super::spec::{AcceleratorSpec, GroupChoice, Scheme, SparsityMode, Unroll};
use crate::codec::{
    best_group_size, ceil_log2, compress_layer, compression_ratio, csr_size, sm_byte, zre_size,
    GroupLayout, GroupSize, ModeChoice, Payload,
};
use crate::error::{Error, Result};
use crate::mapper::array_dims;
use crate::model::{Cell, Network, Report, WeightTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerPerf {
    pub layer: String,
    pub unroll: Unroll,
    pub utilization: f64,
    /// Group size used for BCS weights (`None` otherwise or in dense fallback).
    pub group_size: Option<GroupSize>,
    pub counts: ActivityCounts,
    pub effective: EffectiveCounts,
    pub energy: EnergyBreakdown,
    pub latency: LatencyTerms,
    pub total_cycles: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerfReport {
    pub network: String,
    pub spec: String,
    pub layers: Vec<LayerPerf>,
    pub energy: EnergyBreakdown,
    pub total_cycles: f64,
}

impl PerfReport {
    pub fn total_energy(&self) -> f64 {
        self.energy.total
    }

    pub fn compute_cycles(&self) -> f64 {
        self.layers.iter().map(|l| l.effective.cc_mac_e).sum()
    }

    /// One row per layer plus a `TOTAL` row.
    pub fn layer_table(&self) -> Report {
        let mut r = Report::new([
            "network",
            "spec",
            "layer",
            "unroll",
            "utilization",
            "G",
            "n_mac",
            "n_mac_e",
            "dense_cycles",
            "cc_mac_e",
            "cr_w",
            "cr_a",
            "s_w",
            "s_a",
            "s_w_b",
            "dram_read_e",
            "dram_write_e",
            "sram_read_w_e",
            "sram_read_a_e",
            "bound",
            "energy",
            "cycles",
        ]);
        for l in &self.layers {
            let e = &l.effective;
            r.push(vec![
                self.network.as_str().into(),
                self.spec.as_str().into(),
                l.layer.as_str().into(),
                l.unroll.label().into(),
                l.utilization.into(),
                l.group_size
                    .map_or(Cell::from("-"), |g| Cell::from(g.get())),
                e.n_mac.into(),
                e.n_mac_e.into(),
                e.dense_cycles.into(),
                e.cc_mac_e.into(),
                e.cr_w.into(),
                e.cr_a.into(),
                e.s_w.into(),
                e.s_a.into(),
                e.s_w_b.into(),
                e.memory.dram_read().into(),
                e.memory.dram_write_o.into(),
                e.memory.sram_read_w.into(),
                e.memory.sram_read_a.into(),
                l.latency.bound().into(),
                l.energy.total.into(),
                l.total_cycles.into(),
            ]);
        }
        let n_mac: u64 = self.layers.iter().map(|l| l.effective.n_mac).sum();
        let n_mac_e: f64 = self.layers.iter().map(|l| l.effective.n_mac_e).sum();
        let dense: u64 = self.layers.iter().map(|l| l.effective.dense_cycles).sum();
        let mut total = vec![
            self.network.as_str().into(),
            self.spec.as_str().into(),
            "TOTAL".into(),
            "-".into(),
            "-".into(),
            "-".into(),
            n_mac.into(),
            n_mac_e.into(),
            dense.into(),
            self.compute_cycles().into(),
        ];
        total.extend((0..10).map(|_| Cell::from("-")));
        total.push(self.energy.total.into());
        total.push(self.total_cycles.into());
        r.push(total);
        r
    }

    /// Energy per component summed over layers, plus the total.
    pub fn energy_table(&self) -> Report {
        let mut r = Report::new(["network", "spec", "component", "energy", "share"]);
        for &(name, v) in &self.energy.components {
            let share = if self.energy.total > 0.0 {
                v / self.energy.total
            } else {
                0.0
            };
            r.push(vec![
                self.network.as_str().into(),
                self.spec.as_str().into(),
                name.into(),
                v.into(),
                share.into(),
            ]);
        }
        r.push(vec![
            self.network.as_str().into(),
            self.spec.as_str().into(),
            "total".into(),
            self.energy.total.into(),
            1.0f64.into(),
        ]);
        r
    }
}

fn floor_one(cr: f64) -> f64 {
    if cr.is_nan() {
        1.0
    } else {
        cr.max(1.0)
    }
}

/// Activation compression ratio implied by a zero fraction, for codecs
/// applied to activations whose values are not available.
pub fn activation_cr(scheme: Scheme, s_a: f64, row_len: usize) -> f64 {
    let density = 1.0 - s_a;
    let cr = match scheme {
        Scheme::None | Scheme::Bcs => 1.0,
        // one 12-bit entry per non-zero, at least one per 16 positions
        Scheme::Zre => 8.0 / (12.0 * density.max(1.0 / 16.0)),
        Scheme::Csr => 8.0 / ((8.0 + ceil_log2(row_len as u64) as f64) * density.max(1.0 / 64.0)),
    };
    floor_one(cr)
}

struct WeightStats {
    cr_w: f64,
    group_size: Option<GroupSize>,
    /// Fraction of the dense cycles spent with bit-level skipping.
    bit_fraction: f64,
    /// Value sparsity after lockstep adjustment.
    s_w_adj: f64,
}

/// Values in group-layout order, chunked into lockstep sets of `sync`.
fn lockstep_sets(tensor: &WeightTensor, sync: usize) -> Result<Vec<Vec<i8>>> {
    let g = GroupSize::new(sync)?;
    let layout = GroupLayout::new(&tensor.shape, g);
    Ok((0..layout.group_count())
        .map(|i| {
            let mut buf = vec![0i8; sync];
            layout.gather(&tensor.values, i, &mut buf);
            buf
        })
        .collect())
}

fn weight_stats(
    tensor: &WeightTensor,
    unroll: &Unroll,
    spec: &AcceleratorSpec,
) -> Result<WeightStats> {
    let n = tensor.len();
    let mut stats = WeightStats {
        cr_w: 1.0,
        group_size: None,
        bit_fraction: 1.0,
        s_w_adj: 0.0,
    };
    match spec.weight_scheme {
        Scheme::None => {}
        Scheme::Zre => stats.cr_w = floor_one(8.0 * n as f64 / zre_size(&tensor.values) as f64),
        Scheme::Csr => {
            let row = tensor.shape.in_channels * tensor.shape.kernel_positions();
            stats.cr_w = floor_one(8.0 * n as f64 / csr_size(&tensor.values, row) as f64);
        }
        Scheme::Bcs => {
            let g = match spec.group {
                GroupChoice::Fixed(g) => g,
                GroupChoice::Auto => best_group_size(tensor, &GroupSize::HARDWARE),
            };
            let c = compress_layer(tensor, g, ModeChoice::Auto).layer;
            stats.cr_w = compression_ratio(&c, true);
            if let Payload::Bcs(groups) = &c.payload {
                stats.group_size = Some(g);
                if spec.sparsity == SparsityMode::BitColumnSkip {
                    let mut hist = [0u64; 8];
                    for grp in groups {
                        hist[grp.index.nonzero_magnitude_columns() as usize] += 1;
                    }
                    let (channels, filters) = array_dims(&tensor.shape);
                    let gs = g.get() as u64;
                    let per_filter = if gs >= unroll.c as u64 {
                        1
                    } else {
                        (unroll.c as u64).min(channels).div_ceil(gs)
                    };
                    let lanes = (unroll.k as u64).min(filters) * per_filter;
                    stats.bit_fraction = expected_lockstep_max(&hist, lanes) / 8.0;
                }
            }
        }
    }
    match spec.sparsity {
        SparsityMode::BitSkip => {
            let sets = lockstep_sets(tensor, spec.sync)?;
            let total: u64 = sets
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|&v| (v as u8).count_ones() as u64)
                        .max()
                        .unwrap_or(0)
                })
                .sum();
            stats.bit_fraction = total as f64 / (8.0 * sets.len().max(1) as f64);
        }
        SparsityMode::ValueSkip => {
            let sets = lockstep_sets(tensor, spec.sync)?;
            let zero = sets.iter().filter(|s| s.iter().all(|&v| v == 0)).count();
            stats.s_w_adj = zero as f64 / sets.len().max(1) as f64;
        }
        _ => {}
    }
    Ok(stats)
}

pub fn evaluate_layer(
    tensor: &WeightTensor,
    s_a: f64,
    spec: &AcceleratorSpec,
) -> Result<LayerPerf> {
    if !(0.0..=1.0).contains(&s_a) {
        return Err(Error::Config(format!(
            "activation sparsity {s_a} outside [0, 1]"
        )));
    }
    let (unroll, counts) = dense_activity(&tensor.shape, spec)?;
    let ws = weight_stats(tensor, &unroll, spec)?;
    let s_a_used = if spec.sparsity == SparsityMode::ValueSkip {
        s_a
    } else {
        0.0
    };
    let (n_mac_e, cc_mac_e) = effective_macs(
        counts.n_mac,
        counts.cycles,
        s_a_used,
        ws.s_w_adj,
        spec.sparsity,
        ws.bit_fraction,
    );
    let cr_a = activation_cr(spec.act_scheme, s_a, tensor.shape.in_channels);
    let memory = effective_memory(&counts, ws.cr_w, cr_a)?;
    let activity_scale = if counts.cycles == 0 {
        1.0
    } else {
        cc_mac_e / counts.cycles as f64
    };
    let n = tensor.len().max(1) as f64;
    let zeros = tensor.values.iter().filter(|&&v| v == 0).count() as f64;
    let ones: u64 = tensor
        .values
        .iter()
        .map(|&v| sm_byte(v).count_ones() as u64)
        .sum();
    let effective = EffectiveCounts {
        n_mac: counts.n_mac,
        n_mac_e,
        dense_cycles: counts.cycles,
        cc_mac_e,
        memory,
        reg_read: counts.reg_read as f64 * activity_scale,
        reg_write: counts.reg_write as f64 * activity_scale,
        cr_w: ws.cr_w,
        cr_a,
        s_w: zeros / n,
        s_a,
        s_w_b: 1.0 - ones as f64 / (8.0 * n),
    };
    let energy = total_energy(&effective, &spec.costs);

    let weight_port = (unroll.c as f64 * unroll.k as f64) / if spec.bit_serial { 8.0 } else { 1.0 };
    let act_port = unroll.c as f64 * unroll.ox as f64;
    let out_port = unroll.k as f64 * unroll.ox as f64;
    // register ports sustain the dense access rate
    let reg_rate = |dense: u64| {
        if counts.cycles == 0 {
            1.0
        } else {
            dense as f64 / counts.cycles as f64
        }
    };
    let latency = LatencyTerms {
        dram_read: memory.dram_read() / spec.dram_bytes_per_cycle,
        dram_write: memory.dram_write_o / spec.dram_bytes_per_cycle,
        sram_write_output: memory.sram_write_o / out_port,
        sram_read_input: memory.sram_read_a / act_port,
        sram_read_weight: memory.sram_read_w / weight_port,
        reg_read: effective.reg_read / reg_rate(counts.reg_read).max(f64::MIN_POSITIVE),
        reg_write: effective.reg_write / reg_rate(counts.reg_write).max(f64::MIN_POSITIVE),
        compute: cc_mac_e,
    };
    Ok(LayerPerf {
        layer: tensor.name.clone(),
        unroll,
        utilization: unroll.utilization(&tensor.shape),
        group_size: ws.group_size,
        counts,
        effective,
        energy,
        total_cycles: total_latency(&latency),
        latency,
    })
}

/// Evaluates every layer; missing activation sparsity counts as 0.
pub fn evaluate(network: &Network, spec: &AcceleratorSpec) -> Result<PerfReport> {
    spec.validate()?;
    let layers = network
        .tensors
        .par_iter()
        .zip(network.act_sparsity.par_iter())
        .map(|(t, s_a)| evaluate_layer(t, s_a.unwrap_or(0.0), spec))
        .collect::<Result<Vec<_>>>()?;
    let energy = layers
        .iter()
        .fold(EnergyBreakdown::zero(), |acc, l| acc.add(&l.energy));
    let total_cycles = layers.iter().map(|l| l.total_cycles).sum();
    Ok(PerfReport {
        network: network.name().to_string(),
        spec: spec.name.clone(),
        layers,
        energy,
        total_cycles,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    pub reports: Vec<PerfReport>,
    pub table: Report,
}

/// Speedup (baseline cycles / spec cycles) and energy gain (baseline
/// energy / spec energy) of every spec against the named baseline.
pub fn compare(network: &Network, specs: &[AcceleratorSpec], baseline: &str) -> Result<Comparison> {
    let base_idx = specs
        .iter()
        .position(|s| s.name == baseline)
        .ok_or_else(|| {
            Error::Config(format!(
                "baseline {baseline:?} is not among the evaluated specs"
            ))
        })?;
    let reports = specs
        .par_iter()
        .map(|s| evaluate(network, s))
        .collect::<Result<Vec<_>>>()?;
    let base = &reports[base_idx];
    let mut table = Report::new([
        "network",
        "spec",
        "cycles",
        "energy",
        "speedup",
        "energy_gain",
        "macs_per_cycle",
        "baseline",
    ]);
    let ratio = |a: f64, b: f64| if a == b { 1.0 } else { a / b };
    for r in &reports {
        let n_mac: u64 = r.layers.iter().map(|l| l.effective.n_mac).sum();
        table.push(vec![
            r.network.as_str().into(),
            r.spec.as_str().into(),
            r.total_cycles.into(),
            r.total_energy().into(),
            ratio(base.total_cycles, r.total_cycles).into(),
            ratio(base.total_energy(), r.total_energy()).into(),
            (n_mac as f64 / r.total_cycles).into(),
            baseline.into(),
        ]);
    }
    Ok(Comparison {
        baseline: baseline.to_string(),
        reports,
        table,
    })
}
