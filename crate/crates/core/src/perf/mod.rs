// SPDX-License-Identifier: Apache-2.0
//! Analytical energy and latency model for bit-serial and bit-parallel arrays.

mod counts;
mod equations;
mod eval;
mod spec;

pub use counts::{dense_activity, passes, ActivityCounts};
pub use equations::{
    effective_macs, effective_memory, expected_lockstep_max, imbalance_adjust, total_energy,
    total_latency, EffectiveCounts, EnergyBreakdown, LatencyTerms, MemoryCounts, ENERGY_COMPONENTS,
};
pub use eval::{
    activation_cr, compare, evaluate, evaluate_layer, Comparison, LayerPerf, PerfReport,
};
pub use spec::{
    load_specs, parse_specs, preset, AcceleratorSpec, Dataflow, GroupChoice, LayerClass, Scheme,
    SparsityMode, UnitCosts, Unroll, PRESETS,
};
