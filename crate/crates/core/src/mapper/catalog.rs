// SPDX-License-Identifier: Apache-2.0
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{LayerKind, LayerShape};

/// SMM count of the array: 512 compute engines of 8 multipliers each.
pub const ARRAY_SIZE: u64 = 4096;

/// One spatial unrolling of the array.
///
/// For the depthwise entry `c_u` is the channel-group unrolling (each
/// depthwise filter has a single input channel, so channels are the
/// output channels).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SpatialUnrolling {
    pub id: u8,
    pub c_u: u32,
    pub ox_u: u32,
    pub k_u: u32,
    pub depthwise: bool,
}

pub const CATALOG: [SpatialUnrolling; 7] = [
    SpatialUnrolling {
        id: 1,
        c_u: 8,
        ox_u: 16,
        k_u: 32,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 2,
        c_u: 16,
        ox_u: 8,
        k_u: 32,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 3,
        c_u: 32,
        ox_u: 4,
        k_u: 32,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 4,
        c_u: 8,
        ox_u: 1,
        k_u: 128,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 5,
        c_u: 16,
        ox_u: 1,
        k_u: 64,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 6,
        c_u: 32,
        ox_u: 1,
        k_u: 32,
        depthwise: false,
    },
    SpatialUnrolling {
        id: 7,
        c_u: 64,
        ox_u: 2,
        k_u: 1,
        depthwise: true,
    },
];

impl SpatialUnrolling {
    pub fn by_id(id: u8) -> Option<SpatialUnrolling> {
        CATALOG.iter().copied().find(|s| s.id == id)
    }

    /// Accepts `SU3`, `su3` or `3`.
    pub fn parse(s: &str) -> Result<SpatialUnrolling> {
        let t = s.trim();
        let digits = t
            .strip_prefix("SU")
            .or_else(|| t.strip_prefix("su"))
            .unwrap_or(t);
        digits
            .parse::<u8>()
            .ok()
            .and_then(Self::by_id)
            .ok_or_else(|| Error::Config(format!("unknown spatial unrolling {s:?} (SU1..SU7)")))
    }

    /// Multipliers used per cycle by this unrolling. Only SU1..SU3 span the
    /// full array; SU4..SU6 unroll 1024 and SU7 128.
    pub fn lanes(&self) -> u64 {
        self.c_u as u64 * self.ox_u as u64 * self.k_u as u64
    }

    /// Weight bits per cycle: one bit per weight lane in column-serial mode.
    pub fn weight_bandwidth(&self) -> u32 {
        self.c_u * self.k_u
    }

    /// Activation bits per cycle: full 8-bit activations.
    pub fn activation_bandwidth(&self) -> u32 {
        self.c_u * self.ox_u * 8
    }

    pub fn compatible(&self, kind: LayerKind) -> bool {
        self.depthwise == kind.is_depthwise()
    }

    pub fn check(&self, shape: &LayerShape) -> Result<()> {
        if self.compatible(shape.kind) {
            Ok(())
        } else {
            Err(Error::IncompatibleLayer {
                su: self.to_string(),
                kind: shape.kind.to_string(),
            })
        }
    }
}

impl fmt::Display for SpatialUnrolling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SU{}", self.id)
    }
}

/// `(weight bits/cycle, activation bits/cycle)`.
pub fn bandwidth_requirements(su: &SpatialUnrolling) -> (u32, u32) {
    (su.weight_bandwidth(), su.activation_bandwidth())
}

/// Channel and filter extents a layer presents to the array: depthwise
/// layers expose their K filters as channels of a single filter.
pub fn array_dims(shape: &LayerShape) -> (u64, u64) {
    if shape.kind.is_depthwise() {
        (shape.out_channels as u64, 1)
    } else {
        (shape.in_channels as u64, shape.out_channels as u64)
    }
}

/// Array steps for an arbitrary `c_u x ox_u x k_u` unrolling: every loop
/// not unrolled runs in time.
pub fn tile_steps(shape: &LayerShape, c_u: u32, ox_u: u32, k_u: u32) -> u64 {
    let (c, k) = array_dims(shape);
    c.div_ceil(c_u as u64)
        * (shape.out_x as u64).div_ceil(ox_u as u64)
        * k.div_ceil(k_u as u64)
        * shape.out_y as u64
        * shape.kernel_x as u64
        * shape.kernel_y as u64
        * shape.batch as u64
}

pub fn temporal_steps(shape: &LayerShape, su: &SpatialUnrolling) -> Result<u64> {
    su.check(shape)?;
    Ok(tile_steps(shape, su.c_u, su.ox_u, su.k_u))
}

pub fn spatial_utilization(shape: &LayerShape, su: &SpatialUnrolling) -> Result<f64> {
    let steps = temporal_steps(shape, su)?;
    Ok(shape.mac_count() as f64 / (steps as f64 * su.lanes() as f64))
}

/// Highest-utilization compatible unrolling; ties go to the lower weight
/// bandwidth, then the lower id.
pub fn select_su(shape: &LayerShape) -> SpatialUnrolling {
    select_from(shape, &CATALOG).expect("every layer kind has a compatible catalog entry")
}

pub fn select_from(
    shape: &LayerShape,
    candidates: &[SpatialUnrolling],
) -> Option<SpatialUnrolling> {
    let mut best: Option<(f64, SpatialUnrolling)> = None;
    for su in candidates {
        let Ok(u) = spatial_utilization(shape, su) else {
            continue;
        };
        let better = match best {
            None => true,
            Some((bu, b)) => {
                u > bu || (u == bu && (su.weight_bandwidth(), su.id) < (b.weight_bandwidth(), b.id))
            }
        };
        if better {
            best = Some((u, *su));
        }
    }
    best.map(|(_, s)| s)
}

/// Per-layer utilization over the whole catalog.
#[derive(Clone, Debug, PartialEq)]
pub struct UtilizationReport {
    /// `None` where the unrolling cannot run the layer.
    pub per_su: Vec<(SpatialUnrolling, Option<f64>)>,
    pub chosen: SpatialUnrolling,
    pub utilization: f64,
    /// Average multiplies per cycle with the chosen unrolling.
    pub macs_per_cycle: f64,
}

pub fn utilization_report(shape: &LayerShape) -> UtilizationReport {
    let per_su = CATALOG
        .iter()
        .map(|su| (*su, spatial_utilization(shape, su).ok()))
        .collect();
    let chosen = select_su(shape);
    let utilization = spatial_utilization(shape, &chosen).unwrap();
    UtilizationReport {
        per_su,
        chosen,
        utilization,
        macs_per_cycle: utilization * chosen.lanes() as f64,
    }
}
