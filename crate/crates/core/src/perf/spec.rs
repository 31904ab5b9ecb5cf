// SPDX-License-Identifier: Apache-2.0
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::codec::GroupSize;
use crate::error::{Error, Result};
use crate::mapper::{self, SpatialUnrolling, CATALOG};
use crate::model::LayerShape;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SparsityMode {
    None,
    /// Skips multiplies whose weight or activation is zero.
    ValueSkip,
    /// Skips zero weight bits per weight, lanes synchronised in sets.
    BitSkip,
    /// Skips bit columns that are zero across a whole weight group.
    BitColumnSkip,
}

impl FromStr for SparsityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => SparsityMode::None,
            "value-skip" => SparsityMode::ValueSkip,
            "bit-skip" => SparsityMode::BitSkip,
            "bit-column-skip" | "bit-column" => SparsityMode::BitColumnSkip,
            _ => return Err(Error::Config(format!("unknown sparsity mode {s:?}"))),
        })
    }
}

impl fmt::Display for SparsityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SparsityMode::None => "none",
            SparsityMode::ValueSkip => "value-skip",
            SparsityMode::BitSkip => "bit-skip",
            SparsityMode::BitColumnSkip => "bit-column-skip",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    None,
    Zre,
    Csr,
    Bcs,
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => Scheme::None,
            "zre" => Scheme::Zre,
            "csr" => Scheme::Csr,
            "bcs" => Scheme::Bcs,
            _ => return Err(Error::Config(format!("unknown compression scheme {s:?}"))),
        })
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::None => "none",
            Scheme::Zre => "zre",
            Scheme::Csr => "csr",
            Scheme::Bcs => "bcs",
        })
    }
}

/// Which layers an unrolling may run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerClass {
    Any,
    Standard,
    Depthwise,
}

/// A `c x ox x k` spatial unrolling. Depthwise layers present their
/// filters as channels (see [`mapper::array_dims`]).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Unroll {
    pub c: u32,
    pub ox: u32,
    pub k: u32,
    pub class: LayerClass,
    /// Catalog id when the unrolling comes from the SU catalog.
    pub su: Option<u8>,
}

impl Unroll {
    pub const fn any(c: u32, ox: u32, k: u32) -> Self {
        Unroll {
            c,
            ox,
            k,
            class: LayerClass::Any,
            su: None,
        }
    }

    pub fn lanes(&self) -> u64 {
        self.c as u64 * self.ox as u64 * self.k as u64
    }

    pub fn accepts(&self, shape: &LayerShape) -> bool {
        match self.class {
            LayerClass::Any => true,
            LayerClass::Standard => !shape.kind.is_depthwise(),
            LayerClass::Depthwise => shape.kind.is_depthwise(),
        }
    }

    pub fn steps(&self, shape: &LayerShape) -> u64 {
        mapper::tile_steps(shape, self.c, self.ox, self.k)
    }

    pub fn utilization(&self, shape: &LayerShape) -> f64 {
        shape.mac_count() as f64 / (self.steps(shape) as f64 * self.lanes() as f64)
    }

    pub fn label(&self) -> String {
        match self.su {
            Some(id) => format!("SU{id}"),
            None => format!("C{}xOX{}xK{}", self.c, self.ox, self.k),
        }
    }
}

impl From<SpatialUnrolling> for Unroll {
    fn from(su: SpatialUnrolling) -> Self {
        Unroll {
            c: su.c_u,
            ox: su.ox_u,
            k: su.k_u,
            class: if su.depthwise {
                LayerClass::Depthwise
            } else {
                LayerClass::Standard
            },
            su: Some(su.id),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Dataflow {
    Fixed(Unroll),
    /// Per layer, the best-utilization entry (ties: lower c*k, then order).
    Dynamic(Vec<Unroll>),
}

impl Dataflow {
    pub fn catalog() -> Self {
        Dataflow::Dynamic(CATALOG.iter().map(|&s| s.into()).collect())
    }

    pub fn select(&self, shape: &LayerShape) -> Result<Unroll> {
        let options: &[Unroll] = match self {
            Dataflow::Fixed(u) => std::slice::from_ref(u),
            Dataflow::Dynamic(v) => v,
        };
        let mut best: Option<(f64, Unroll)> = None;
        for u in options.iter().filter(|u| u.accepts(shape)) {
            let util = u.utilization(shape);
            if best.is_none_or(|(bu, b)| util > bu || (util == bu && u.c * u.k < b.c * b.k)) {
                best = Some((util, *u));
            }
        }
        best.map(|(_, u)| u)
            .ok_or_else(|| Error::IncompatibleLayer {
                su: "dataflow".into(),
                kind: shape.kind.to_string(),
            })
    }
}

/// Energy per access. DRAM and SRAM costs are per byte, register costs per
/// 8-bit access, `mac` per multiply-accumulate.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitCosts {
    pub mac: f64,
    pub dram_read: f64,
    pub dram_write: f64,
    pub sram_read: f64,
    pub sram_write: f64,
    pub reg_read: f64,
    pub reg_write: f64,
}

impl Default for UnitCosts {
    /// Placeholder values in pJ; only ratios between specs sharing these
    /// costs are meaningful.
    fn default() -> Self {
        UnitCosts {
            mac: 0.25,
            dram_read: 100.0,
            dram_write: 100.0,
            sram_read: 1.5,
            sram_write: 1.8,
            reg_read: 0.03,
            reg_write: 0.03,
        }
    }
}

impl UnitCosts {
    pub const ZERO: UnitCosts = UnitCosts {
        mac: 0.0,
        dram_read: 0.0,
        dram_write: 0.0,
        sram_read: 0.0,
        sram_write: 0.0,
        reg_read: 0.0,
        reg_write: 0.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupChoice {
    Fixed(GroupSize),
    /// Best real compression ratio among 8, 16 and 32 per layer.
    Auto,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AcceleratorSpec {
    pub name: String,
    /// Weights are processed one bit (column) per cycle.
    pub bit_serial: bool,
    pub dataflow: Dataflow,
    pub sparsity: SparsityMode,
    /// Lanes advancing in lockstep for bit-skip and value-skip modes.
    pub sync: usize,
    pub weight_scheme: Scheme,
    pub act_scheme: Scheme,
    pub group: GroupChoice,
    pub weight_sram_bytes: u64,
    pub act_sram_bytes: u64,
    pub dram_bytes_per_cycle: f64,
    pub costs: UnitCosts,
}

impl AcceleratorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("spec {}: {m}", self.name)));
        if self.weight_sram_bytes == 0 || self.act_sram_bytes == 0 {
            return bad("SRAM capacities must be > 0");
        }
        if self.dram_bytes_per_cycle.is_nan() || self.dram_bytes_per_cycle <= 0.0 {
            return bad("dram_bytes_per_cycle must be > 0");
        }
        if self.sync == 0 {
            return bad("sync must be >= 1");
        }
        if matches!(
            self.sparsity,
            SparsityMode::BitSkip | SparsityMode::ValueSkip
        ) && GroupSize::new(self.sync).is_err()
        {
            return bad("sync must be one of 1, 2, 4, 8, 16, 32, 64");
        }
        if self.act_scheme == Scheme::Bcs {
            return bad("BCS applies to weights only");
        }
        if self.sparsity == SparsityMode::BitColumnSkip && self.weight_scheme != Scheme::Bcs {
            return bad("bit-column-skip needs BCS weights");
        }
        if matches!(
            self.sparsity,
            SparsityMode::BitSkip | SparsityMode::BitColumnSkip
        ) && !self.bit_serial
        {
            return bad("bit-level skipping needs a bit-serial array");
        }
        if let GroupChoice::Fixed(g) = self.group {
            if self.sparsity == SparsityMode::BitColumnSkip && g.get() % 8 != 0 {
                return bad("bit-column-skip needs a group size that is a multiple of 8");
            }
        }
        match &self.dataflow {
            Dataflow::Fixed(u) if u.lanes() == 0 => bad("unrolling has zero lanes"),
            Dataflow::Dynamic(v) if v.is_empty() || v.iter().any(|u| u.lanes() == 0) => {
                bad("dynamic dataflow needs non-empty unrollings")
            }
            _ => Ok(()),
        }
    }
}

const KIB: u64 = 1024;

fn base(name: &str) -> AcceleratorSpec {
    AcceleratorSpec {
        name: name.into(),
        bit_serial: false,
        dataflow: Dataflow::Fixed(Unroll::any(8, 1, 64)),
        sparsity: SparsityMode::None,
        sync: 1,
        weight_scheme: Scheme::None,
        act_scheme: Scheme::None,
        group: GroupChoice::Auto,
        weight_sram_bytes: 256 * KIB,
        act_sram_bytes: 256 * KIB,
        dram_bytes_per_cycle: 32.0,
        costs: UnitCosts::default(),
    }
}

pub const PRESETS: [&str; 8] = [
    "bitcol",
    "bitcol-dense",
    "dense",
    "huaa",
    "stripes",
    "pragmatic",
    "bitlet",
    "scnn",
];

/// Built-in specs. They differ only in sparsity mode, compression and
/// dataflow; array sizes are matched to 512 8-bit MACs per cycle (4096
/// bit-serial lanes) except where noted.
pub fn preset(name: &str) -> Result<AcceleratorSpec> {
    let bit_serial_su1 = Dataflow::Fixed(Unroll::any(8, 16, 32));
    let spec = match name {
        "bitcol" => AcceleratorSpec {
            bit_serial: true,
            dataflow: Dataflow::catalog(),
            sparsity: SparsityMode::BitColumnSkip,
            weight_scheme: Scheme::Bcs,
            ..base(name)
        },
        // same array and dataflow, no sparsity support
        "bitcol-dense" => AcceleratorSpec {
            bit_serial: true,
            dataflow: Dataflow::catalog(),
            ..base(name)
        },
        "dense" => base(name),
        "huaa" => AcceleratorSpec {
            dataflow: Dataflow::Dynamic(vec![
                Unroll::any(8, 8, 8),
                Unroll::any(16, 1, 32),
                Unroll::any(4, 16, 8),
            ]),
            ..base(name)
        },
        "stripes" => AcceleratorSpec {
            bit_serial: true,
            dataflow: bit_serial_su1,
            ..base(name)
        },
        "pragmatic" => AcceleratorSpec {
            bit_serial: true,
            dataflow: bit_serial_su1,
            sparsity: SparsityMode::BitSkip,
            sync: 16,
            ..base(name)
        },
        "bitlet" => AcceleratorSpec {
            bit_serial: true,
            dataflow: bit_serial_su1,
            sparsity: SparsityMode::BitSkip,
            sync: 64,
            ..base(name)
        },
        // 1024 multipliers, compressed operands
        "scnn" => AcceleratorSpec {
            dataflow: Dataflow::Fixed(Unroll::any(4, 16, 16)),
            sparsity: SparsityMode::ValueSkip,
            sync: 4,
            weight_scheme: Scheme::Zre,
            act_scheme: Scheme::Zre,
            ..base(name)
        },
        _ => {
            return Err(Error::Config(format!(
                "unknown preset {name:?}; known: {}",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(spec)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnrollToml {
    c: u32,
    ox: u32,
    k: u32,
    #[serde(default)]
    class: Option<String>,
}

impl UnrollToml {
    fn build(&self) -> Result<Unroll> {
        let class = match self.class.as_deref() {
            None | Some("any") => LayerClass::Any,
            Some("standard") => LayerClass::Standard,
            Some("depthwise") => LayerClass::Depthwise,
            Some(o) => return Err(Error::Config(format!("unknown unroll class {o:?}"))),
        };
        Ok(Unroll {
            c: self.c,
            ox: self.ox,
            k: self.k,
            class,
            su: None,
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsToml {
    mac: Option<f64>,
    dram_read: Option<f64>,
    dram_write: Option<f64>,
    sram_read: Option<f64>,
    sram_write: Option<f64>,
    reg_read: Option<f64>,
    reg_write: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecToml {
    name: String,
    base: Option<String>,
    bit_serial: Option<bool>,
    /// `"catalog"` for the SU catalog.
    dataflow: Option<String>,
    unroll: Option<Vec<UnrollToml>>,
    sparsity: Option<String>,
    sync: Option<usize>,
    weight_scheme: Option<String>,
    act_scheme: Option<String>,
    /// Number, or `"auto"`.
    group_size: Option<toml::Value>,
    weight_sram_bytes: Option<u64>,
    act_sram_bytes: Option<u64>,
    dram_bytes_per_cycle: Option<f64>,
    costs: Option<CostsToml>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigToml {
    #[serde(default)]
    spec: Vec<SpecToml>,
}

impl SpecToml {
    fn build(self) -> Result<AcceleratorSpec> {
        let mut s = match &self.base {
            Some(b) => preset(b)?,
            None => base(&self.name),
        };
        s.name = self.name;
        if let Some(v) = self.bit_serial {
            s.bit_serial = v;
        }
        match (self.dataflow.as_deref(), self.unroll) {
            (Some("catalog"), None) => s.dataflow = Dataflow::catalog(),
            (Some(o), _) if o != "fixed" && o != "dynamic" && o != "catalog" => {
                return Err(Error::Config(format!("unknown dataflow {o:?}")))
            }
            (Some("catalog"), Some(_)) => {
                return Err(Error::Config(
                    "dataflow = \"catalog\" takes no unroll list".into(),
                ))
            }
            (d, Some(list)) => {
                let us = list
                    .iter()
                    .map(UnrollToml::build)
                    .collect::<Result<Vec<_>>>()?;
                s.dataflow = match (d, us.len()) {
                    (Some("fixed") | None, 1) => Dataflow::Fixed(us[0]),
                    (Some("fixed"), _) => {
                        return Err(Error::Config(
                            "fixed dataflow takes exactly one unroll".into(),
                        ))
                    }
                    _ => Dataflow::Dynamic(us),
                };
            }
            (_, None) => {}
        }
        if let Some(v) = self.sparsity {
            s.sparsity = v.parse()?;
        }
        if let Some(v) = self.sync {
            s.sync = v;
        }
        if let Some(v) = self.weight_scheme {
            s.weight_scheme = v.parse()?;
        }
        if let Some(v) = self.act_scheme {
            s.act_scheme = v.parse()?;
        }
        if let Some(v) = self.group_size {
            s.group = match v {
                toml::Value::String(ref a) if a == "auto" => GroupChoice::Auto,
                toml::Value::Integer(n) if n > 0 => GroupChoice::Fixed(GroupSize::new(n as usize)?),
                other => return Err(Error::Config(format!("bad group_size {other}"))),
            };
        }
        if let Some(v) = self.weight_sram_bytes {
            s.weight_sram_bytes = v;
        }
        if let Some(v) = self.act_sram_bytes {
            s.act_sram_bytes = v;
        }
        if let Some(v) = self.dram_bytes_per_cycle {
            s.dram_bytes_per_cycle = v;
        }
        if let Some(c) = self.costs {
            let k = &mut s.costs;
            for (dst, src) in [
                (&mut k.mac, c.mac),
                (&mut k.dram_read, c.dram_read),
                (&mut k.dram_write, c.dram_write),
                (&mut k.sram_read, c.sram_read),
                (&mut k.sram_write, c.sram_write),
                (&mut k.reg_read, c.reg_read),
                (&mut k.reg_write, c.reg_write),
            ] {
                if let Some(v) = src {
                    *dst = v;
                }
            }
        }
        s.validate()?;
        Ok(s)
    }
}

/// Parses `[[spec]]` tables; each may start from a preset via `base`.
pub fn parse_specs(text: &str) -> Result<Vec<AcceleratorSpec>> {
    let cfg: ConfigToml = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.spec.into_iter().map(SpecToml::build).collect()
}

pub fn load_specs(path: impl AsRef<Path>) -> Result<Vec<AcceleratorSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_specs(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LayerKind;

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            preset(p).unwrap().validate().unwrap();
        }
        assert!(preset("tpu").is_err());
    }

    #[test]
    fn catalog_dataflow_matches_mapper() {
        let df = Dataflow::catalog();
        for shape in [
            LayerShape::conv(64, 3, 7, 7).with_output(112, 112),
            LayerShape::conv(256, 128, 1, 1).with_output(1, 1),
            LayerShape::conv(32, 1, 3, 3)
                .with_output(112, 112)
                .with_kind(LayerKind::DepthwiseConv),
        ] {
            assert_eq!(
                df.select(&shape).unwrap().su,
                Some(mapper::select_su(&shape).id)
            );
        }
    }

    #[test]
    fn config_overrides_base() {
        let specs = parse_specs(
            r#"
            [[spec]]
            name = "bw16"
            base = "bitcol"
            group_size = 16
            weight_sram_bytes = 1024
            costs = { dram_read = 50.0 }

            [[spec]]
            name = "custom"
            bit_serial = true
            unroll = [{ c = 8, ox = 8, k = 8 }]
            sparsity = "bit-skip"
            sync = 8
            "#,
        )
        .unwrap();
        assert_eq!(
            specs[0].group,
            GroupChoice::Fixed(GroupSize::new(16).unwrap())
        );
        assert_eq!(specs[0].weight_sram_bytes, 1024);
        assert_eq!(specs[0].costs.dram_read, 50.0);
        assert_eq!(specs[0].costs.mac, UnitCosts::default().mac);
        assert_eq!(specs[0].sparsity, SparsityMode::BitColumnSkip);
        assert_eq!(specs[1].dataflow, Dataflow::Fixed(Unroll::any(8, 8, 8)));
        assert_eq!(specs[1].sync, 8);
    }

    #[test]
    fn config_errors() {
        assert!(parse_specs("[[spec]]\nname='x'\nweight_sram_bytes=0").is_err());
        assert!(parse_specs("[[spec]]\nname='x'\nsparsity='bit-column'").is_err());
        assert!(parse_specs("[[spec]]\nname='x'\nbogus=1").is_err());
        assert!(parse_specs("[[spec]]\nname='x'\nact_scheme='bcs'").is_err());
    }
}
