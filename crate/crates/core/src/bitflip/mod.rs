// SPDX-License-Identifier: Apache-2.0
//! Lossy weight adjustment that trades a small squared error for more zero
//! bit columns per group, plus a greedy per-layer strategy search.

mod layer;
mod nearest;
mod oracle;
mod search;
mod strategy;

pub use layer::{flip_layer, FlipResult};
pub use nearest::{best_column_set, nearest_with_mask, ColumnChoice, SignPolicy};
pub use oracle::{proxy_metric, AccuracyOracle, ExternalOracle, ProxyOracle};
pub use search::{apply_strategy, greedy_search, Flipper, Move, SearchOptions, SearchOutcome};
pub use strategy::{FlipStrategy, LayerFlip};
