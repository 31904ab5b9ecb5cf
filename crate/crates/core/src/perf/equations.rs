// SPDX-License-Identifier: Apache-2.0
use super::counts::ActivityCounts;
use super::spec::{SparsityMode, UnitCosts};
use crate::error::{Error, Result};

/// Effective MACs and compute cycles.
///
/// Value skipping removes MACs with a zero operand: `N_e = N (1-S_a)(1-S_w)`
/// and cycles shrink at the dense MAC rate. Bit-level modes keep every MAC
/// but each one takes `bit_fraction` of the dense cycles. `None` ignores
/// both.
pub fn effective_macs(
    n_mac: u64,
    dense_cycles: u64,
    s_a: f64,
    s_w: f64,
    mode: SparsityMode,
    bit_fraction: f64,
) -> (f64, f64) {
    let n = n_mac as f64;
    let cc = dense_cycles as f64;
    match mode {
        SparsityMode::None => (n, cc),
        SparsityMode::ValueSkip => {
            let n_e = n * (1.0 - s_a) * (1.0 - s_w);
            let per_cycle = if cc == 0.0 { 1.0 } else { n / cc };
            (n_e, if n_e == 0.0 { 0.0 } else { n_e / per_cycle })
        }
        SparsityMode::BitSkip | SparsityMode::BitColumnSkip => (n, cc * bit_fraction),
    }
}

/// Memory traffic after compression: weight traffic divided by `cr_w`,
/// activation traffic (inputs and outputs) by `cr_a`. Bytes.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MemoryCounts {
    pub dram_read_w: f64,
    pub dram_read_a: f64,
    pub dram_write_o: f64,
    pub sram_write_w: f64,
    pub sram_write_a: f64,
    pub sram_read_w: f64,
    pub sram_read_a: f64,
    pub sram_write_o: f64,
}

impl MemoryCounts {
    pub fn dram_read(&self) -> f64 {
        self.dram_read_w + self.dram_read_a
    }
}

pub fn effective_memory(counts: &ActivityCounts, cr_w: f64, cr_a: f64) -> Result<MemoryCounts> {
    for cr in [cr_w, cr_a] {
        if cr.is_nan() || cr <= 0.0 {
            return Err(Error::InvalidCompressionRatio(cr));
        }
    }
    let w = |x: u64| x as f64 / cr_w;
    let a = |x: u64| x as f64 / cr_a;
    Ok(MemoryCounts {
        dram_read_w: w(counts.dram_read_w),
        dram_read_a: a(counts.dram_read_a),
        dram_write_o: a(counts.dram_write_o),
        sram_write_w: w(counts.sram_write_w),
        sram_write_a: a(counts.sram_write_a),
        sram_read_w: w(counts.sram_read_w),
        sram_read_a: a(counts.sram_read_a),
        sram_write_o: a(counts.sram_write_o),
    })
}

/// Everything the energy and latency equations consume.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EffectiveCounts {
    pub n_mac: u64,
    pub n_mac_e: f64,
    pub dense_cycles: u64,
    pub cc_mac_e: f64,
    pub memory: MemoryCounts,
    pub reg_read: f64,
    pub reg_write: f64,
    pub cr_w: f64,
    pub cr_a: f64,
    pub s_w: f64,
    pub s_a: f64,
    pub s_w_b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub components: Vec<(&'static str, f64)>,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.components
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }

    /// Element-wise sum (component lists must line up).
    pub fn add(&self, other: &EnergyBreakdown) -> EnergyBreakdown {
        let components: Vec<_> = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(&(n, a), &(m, b))| {
                debug_assert_eq!(n, m);
                (n, a + b)
            })
            .collect();
        EnergyBreakdown::from_components(components)
    }

    pub fn from_components(components: Vec<(&'static str, f64)>) -> Self {
        let total = components.iter().map(|&(_, v)| v).sum();
        EnergyBreakdown { components, total }
    }

    pub fn zero() -> Self {
        Self::from_components(ENERGY_COMPONENTS.iter().map(|&n| (n, 0.0)).collect())
    }
}

pub const ENERGY_COMPONENTS: [&str; 11] = [
    "mac",
    "dram_read_w",
    "dram_read_a",
    "dram_write_o",
    "sram_read_w",
    "sram_read_a",
    "sram_write_w",
    "sram_write_a",
    "sram_write_o",
    "reg_read",
    "reg_write",
];

/// Sum over memory levels of accesses times unit cost, plus MAC energy.
pub fn total_energy(e: &EffectiveCounts, costs: &UnitCosts) -> EnergyBreakdown {
    let m = &e.memory;
    let values = [
        e.n_mac_e * costs.mac,
        m.dram_read_w * costs.dram_read,
        m.dram_read_a * costs.dram_read,
        m.dram_write_o * costs.dram_write,
        m.sram_read_w * costs.sram_read,
        m.sram_read_a * costs.sram_read,
        m.sram_write_w * costs.sram_write,
        m.sram_write_a * costs.sram_write,
        m.sram_write_o * costs.sram_write,
        e.reg_read * costs.reg_read,
        e.reg_write * costs.reg_write,
    ];
    EnergyBreakdown::from_components(ENERGY_COMPONENTS.iter().copied().zip(values).collect())
}

/// Latency contributions, each already converted to cycles.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LatencyTerms {
    pub dram_read: f64,
    pub dram_write: f64,
    pub sram_write_output: f64,
    pub sram_read_input: f64,
    pub sram_read_weight: f64,
    pub reg_read: f64,
    pub reg_write: f64,
    pub compute: f64,
}

impl LatencyTerms {
    /// Name of the term that wins the overlapped max.
    pub fn bound(&self) -> &'static str {
        let terms = [
            ("sram_read_input", self.sram_read_input),
            ("sram_read_weight", self.sram_read_weight),
            ("reg_read", self.reg_read),
            ("reg_write", self.reg_write),
            ("compute", self.compute),
        ];
        let mut best = terms[4];
        for t in terms {
            if t.1 > best.1 {
                best = t;
            }
        }
        best.0
    }
}

/// DRAM transfers and output writes are serial; input reads, weight reads,
/// register traffic and compute overlap.
pub fn total_latency(t: &LatencyTerms) -> f64 {
    t.dram_read
        + t.dram_write
        + t.sram_write_output
        + t.sram_read_input
            .max(t.sram_read_weight)
            .max(t.reg_read)
            .max(t.reg_write)
            .max(t.compute)
}

/// Effective skip fraction of lockstep lane sets: each set only skips what
/// all of its lanes can skip, so the mean over sets of the per-set minimum.
pub fn imbalance_adjust(sets: &[Vec<f64>]) -> f64 {
    if sets.is_empty() {
        return 0.0;
    }
    sets.iter()
        .map(|s| s.iter().copied().fold(f64::INFINITY, f64::min).min(1.0))
        .map(|m| if m.is_finite() { m } else { 0.0 })
        .sum::<f64>()
        / sets.len() as f64
}

/// Expected maximum of `n` independent draws from the histogram
/// (`hist[v]` = number of items with value `v`).
pub fn expected_lockstep_max(hist: &[u64], n: u64) -> f64 {
    let total: u64 = hist.iter().sum();
    if total == 0 || n == 0 {
        return 0.0;
    }
    let mut cdf = 0u64;
    let mut e = 0.0;
    // E[max] = sum over v >= 1 of P(max >= v) = 1 - F(v-1)^n
    for &h in &hist[..hist.len() - 1] {
        cdf += h;
        e += 1.0 - (cdf as f64 / total as f64).powf(n as f64);
    }
    e
}
