// SPDX-License-Identifier: Apache-2.0
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::layer::{flip_layer, FlipResult};
use super::nearest::SignPolicy;
use super::oracle::AccuracyOracle;
use super::strategy::{FlipStrategy, LayerFlip};
use crate::codec::GroupSize;
use crate::error::{Error, Result};
use crate::model::Network;

#[derive(Clone, Debug, Default)]
pub struct SearchOptions {
    /// Only these layers are considered for moves (all when `None`).
    pub layers: Option<Vec<String>>,
    /// Stop after this many committed moves.
    pub max_moves: Option<usize>,
    pub sign: SignPolicy,
    /// Evaluate the candidate moves of one sweep concurrently.
    pub parallel: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Move {
    pub layer: String,
    pub group_size: GroupSize,
    pub z: u32,
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub strategy: FlipStrategy,
    pub moves: Vec<Move>,
    pub evaluations: usize,
}

/// Flips layers from their original weights, memoizing per (layer, G, z).
pub struct Flipper<'a> {
    network: &'a Network,
    sign: SignPolicy,
    cache: Mutex<HashMap<(usize, GroupSize, u32), Arc<FlipResult>>>,
}

impl<'a> Flipper<'a> {
    pub fn new(network: &'a Network, sign: SignPolicy) -> Self {
        Flipper {
            network,
            sign,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn layer(&self, index: usize, group_size: GroupSize, z: u32) -> Arc<FlipResult> {
        let key = (index, group_size, z);
        if let Some(r) = self.cache.lock().unwrap().get(&key) {
            return r.clone();
        }
        let r = Arc::new(flip_layer(
            &self.network.tensors[index],
            group_size,
            z,
            self.sign,
        ));
        self.cache.lock().unwrap().entry(key).or_insert(r).clone()
    }

    pub fn apply(&self, strategy: &FlipStrategy) -> Result<(Network, Vec<Arc<FlipResult>>)> {
        strategy.validate(self.network)?;
        let results: Vec<_> = strategy
            .layers
            .iter()
            .enumerate()
            .map(|(i, l)| self.layer(i, l.group_size, l.z))
            .collect();
        let values = results.iter().map(|r| r.tensor.values.clone()).collect();
        Ok((self.network.with_values(values)?, results))
    }
}

/// Flips every layer of `network` from its original weights.
pub fn apply_strategy(
    network: &Network,
    strategy: &FlipStrategy,
    sign: SignPolicy,
) -> Result<(Network, Vec<FlipResult>)> {
    let (net, results) = Flipper::new(network, sign).apply(strategy)?;
    Ok((net, results.iter().map(|r| (**r).clone()).collect()))
}

/// Greedy strategy search.
///
/// Each sweep tries, for every candidate layer and every G in {8, 16, 32},
/// the move that sets that layer to (G, z + 1), and scores the flipped
/// network. The best-scoring move is committed (on equal scores the later
/// candidate wins). The search stops once the best score of a sweep is at
/// or below `macc`, when no layer can take another zero column, or when
/// the move budget is spent.
pub fn greedy_search(
    network: &Network,
    initial: &FlipStrategy,
    macc: f64,
    oracle: &dyn AccuracyOracle,
    options: &SearchOptions,
) -> Result<SearchOutcome> {
    initial.validate(network)?;
    if let Some(subset) = &options.layers {
        for name in subset {
            if network.layer_index(name).is_none() {
                return Err(Error::Strategy(format!(
                    "unknown layer {name:?} in search subset"
                )));
            }
        }
    }
    let flipper = Flipper::new(network, options.sign);
    let mut strategy = initial.clone();
    let mut moves = Vec::new();
    let mut evaluations = 0;

    loop {
        if options.max_moves.is_some_and(|m| moves.len() >= m) {
            break;
        }
        let mut candidates: Vec<(usize, LayerFlip)> = Vec::new();
        for (i, l) in strategy.layers.iter().enumerate() {
            if let Some(subset) = &options.layers {
                if !subset.contains(&l.layer) {
                    continue;
                }
            }
            if l.z >= 8 {
                continue;
            }
            for gs in GroupSize::HARDWARE {
                candidates.push((
                    i,
                    LayerFlip {
                        layer: l.layer.clone(),
                        group_size: gs,
                        z: l.z + 1,
                    },
                ));
            }
        }
        if candidates.is_empty() {
            break;
        }

        let score = |(i, mv): &(usize, LayerFlip)| -> Result<f64> {
            let mut tmp = strategy.clone();
            tmp.layers[*i] = mv.clone();
            let (net, _) = flipper.apply(&tmp)?;
            let m = oracle.evaluate(&net)?;
            if !m.is_finite() {
                return Err(Error::NonFiniteMetric(m));
            }
            Ok(m)
        };
        let scores: Vec<Result<f64>> = if options.parallel {
            candidates.par_iter().map(score).collect()
        } else {
            candidates.iter().map(score).collect()
        };
        evaluations += scores.len();

        let mut bacc = f64::NEG_INFINITY;
        let mut next = None;
        for (c, s) in candidates.iter().zip(scores) {
            let acc = s?;
            if acc >= bacc {
                bacc = acc;
                next = Some(c);
            }
        }
        if bacc <= macc {
            break;
        }
        let (i, mv) = next.expect("at least one candidate");
        strategy.layers[*i] = mv.clone();
        moves.push(Move {
            layer: mv.layer.clone(),
            group_size: mv.group_size,
            z: mv.z,
            metric: bacc,
        });
    }
    Ok(SearchOutcome {
        strategy,
        moves,
        evaluations,
    })
}
