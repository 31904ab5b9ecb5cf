// SPDX-License-Identifier: Apache-2.0
use std::fmt;
use std::path::Path;

use crate::codec::GroupSize;
use crate::error::{Error, Result};
use crate::model::Network;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerFlip {
    pub layer: String,
    pub group_size: GroupSize,
    pub z: u32,
}

/// Per-layer (G, z), in network layer order.
///
/// Text form, one layer per line: `layer=<name> G=<g> z=<z>`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlipStrategy {
    pub layers: Vec<LayerFlip>,
}

impl FlipStrategy {
    /// Every layer at `z = 0` with the given group size.
    pub fn initial(network: &Network, group_size: GroupSize) -> Self {
        FlipStrategy {
            layers: network
                .tensors
                .iter()
                .map(|t| LayerFlip {
                    layer: t.name.clone(),
                    group_size,
                    z: 0,
                })
                .collect(),
        }
    }

    pub fn uniform(network: &Network, group_size: GroupSize, z: u32) -> Self {
        let mut s = Self::initial(network, group_size);
        for l in &mut s.layers {
            l.z = z;
        }
        s
    }

    pub fn get(&self, layer: &str) -> Option<&LayerFlip> {
        self.layers.iter().find(|l| l.layer == layer)
    }

    /// Checks that the strategy covers exactly the layers of `network`, in
    /// order, with hardware group sizes and z <= 8.
    pub fn validate(&self, network: &Network) -> Result<()> {
        let names: Vec<&str> = network.tensors.iter().map(|t| t.name.as_str()).collect();
        let mine: Vec<&str> = self.layers.iter().map(|l| l.layer.as_str()).collect();
        if names != mine {
            return Err(Error::Strategy(format!(
                "strategy layers {mine:?} do not match network layers {names:?}"
            )));
        }
        for l in &self.layers {
            if !GroupSize::HARDWARE.contains(&l.group_size) {
                return Err(Error::Strategy(format!(
                    "layer {}: group size {} not in 8/16/32",
                    l.layer, l.group_size
                )));
            }
            if l.z > 8 {
                return Err(Error::Strategy(format!(
                    "layer {}: z={} exceeds 8",
                    l.layer, l.z
                )));
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut layers = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Strategy(format!("line {}: {msg}", i + 1));
            let (mut name, mut g, mut z) = (None, None, None);
            for tok in line.split_whitespace() {
                let (k, v) = tok
                    .split_once('=')
                    .ok_or_else(|| bad(format!("expected key=value, got {tok:?}")))?;
                match k {
                    "layer" => name = Some(v.to_string()),
                    "G" => {
                        let n: usize = v.parse().map_err(|_| bad(format!("bad G {v:?}")))?;
                        g = Some(GroupSize::new(n).map_err(|e| bad(e.to_string()))?);
                    }
                    "z" => z = Some(v.parse::<u32>().map_err(|_| bad(format!("bad z {v:?}")))?),
                    _ => return Err(bad(format!("unknown key {k:?}"))),
                }
            }
            let (Some(layer), Some(group_size), Some(z)) = (name, g, z) else {
                return Err(bad("need layer=, G= and z=".into()));
            };
            if z > 8 {
                return Err(bad(format!("z={z} exceeds 8")));
            }
            layers.push(LayerFlip {
                layer,
                group_size,
                z,
            });
        }
        Ok(FlipStrategy { layers })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for FlipStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.layers {
            writeln!(f, "layer={} G={} z={}", l.layer, l.group_size, l.z)?;
        }
        Ok(())
    }
}
