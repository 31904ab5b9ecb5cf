// SPDX-License-Identifier: Apache-2.0
//! Spatial-unrolling catalog, per-layer utilization and selection, and the
//! SU1 weight-bank image.

mod catalog;
mod layout;

pub use catalog::{
    array_dims, bandwidth_requirements, select_from, select_su, spatial_utilization,
    temporal_steps, tile_steps, utilization_report, SpatialUnrolling, UtilizationReport,
    ARRAY_SIZE, CATALOG,
};
pub use layout::{group_columns, weight_bank_layout, BankLayout, BankWord, GroupColumns, SEGMENTS};
