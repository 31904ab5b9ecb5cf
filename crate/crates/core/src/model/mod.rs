// SPDX-License-Identifier: Apache-2.0
//! Network ingestion and on-disk formats.
//!
//! A network is a plain-text manifest plus one raw int8 file per layer.
//! Weight values are stored K-major, then C, FY, FX, one two's-complement
//! byte each. Loading never reorders elements.

mod container;
mod manifest;
mod report;

pub use container::{decode_container, encode_container, read_compressed, write_compressed};
pub use manifest::{load_network, parse_manifest, render_manifest, save_network};
pub use report::{fmt_sig6, render_table, write_report_csv, Cell, Report};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    DepthwiseConv,
    PointwiseConv,
    FullyConnected,
    MatMul,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::DepthwiseConv => "depthwise-conv",
            LayerKind::PointwiseConv => "pointwise-conv",
            LayerKind::FullyConnected => "fully-connected",
            LayerKind::MatMul => "matmul",
        }
    }

    pub fn is_depthwise(self) -> bool {
        self == LayerKind::DepthwiseConv
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "conv" => LayerKind::Conv,
            "depthwise-conv" | "dwconv" => LayerKind::DepthwiseConv,
            "pointwise-conv" | "pwconv" => LayerKind::PointwiseConv,
            "fully-connected" | "fc" => LayerKind::FullyConnected,
            "matmul" => LayerKind::MatMul,
            other => return Err(format!("unknown layer kind `{other}`")),
        })
    }
}

/// Loop dimensions of one layer.
///
/// Fully-connected and matmul layers are 1x1 convolutions with
/// `C` = input features, `K` = output features and `OX` = token count.
/// Depthwise layers carry one input channel per filter, so `C` must be 1
/// and `K` is the channel count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LayerShape {
    pub batch: usize,
    pub out_channels: usize,
    pub in_channels: usize,
    pub out_x: usize,
    pub out_y: usize,
    pub kernel_x: usize,
    pub kernel_y: usize,
    pub stride: usize,
    pub kind: LayerKind,
}

impl LayerShape {
    /// A conv shape with batch, stride and output size 1.
    pub fn conv(out_channels: usize, in_channels: usize, kernel_y: usize, kernel_x: usize) -> Self {
        LayerShape {
            batch: 1,
            out_channels,
            in_channels,
            out_x: 1,
            out_y: 1,
            kernel_x,
            kernel_y,
            stride: 1,
            kind: LayerKind::Conv,
        }
    }

    pub fn with_output(mut self, out_x: usize, out_y: usize) -> Self {
        self.out_x = out_x;
        self.out_y = out_y;
        self
    }

    pub fn with_kind(mut self, kind: LayerKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("B", self.batch),
            ("K", self.out_channels),
            ("C", self.in_channels),
            ("OX", self.out_x),
            ("OY", self.out_y),
            ("FX", self.kernel_x),
            ("FY", self.kernel_y),
            ("stride", self.stride),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidShape(format!("{name} must be at least 1")));
        }
        if self.kind.is_depthwise() && self.in_channels != 1 {
            return Err(Error::InvalidShape(format!(
                "depthwise layers take one input channel per filter, got C={}",
                self.in_channels
            )));
        }
        Ok(())
    }

    /// K * C * FY * FX.
    pub fn weight_count(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_y * self.kernel_x
    }

    pub fn kernel_positions(&self) -> usize {
        self.kernel_y * self.kernel_x
    }

    /// B * K * C * OX * OY * FX * FY.
    pub fn mac_count(&self) -> u64 {
        [
            self.batch,
            self.out_channels,
            self.in_channels,
            self.out_x,
            self.out_y,
            self.kernel_x,
            self.kernel_y,
        ]
        .iter()
        .map(|&d| d as u64)
        .product()
    }

    /// Channels read per output pixel: C, or K for depthwise layers.
    pub fn input_channels_total(&self) -> usize {
        if self.kind.is_depthwise() {
            self.out_channels
        } else {
            self.in_channels
        }
    }

    pub fn input_bytes(&self) -> u64 {
        let ix = (self.out_x - 1) * self.stride + self.kernel_x;
        let iy = (self.out_y - 1) * self.stride + self.kernel_y;
        (self.batch * self.input_channels_total() * ix * iy) as u64
    }

    pub fn output_bytes(&self) -> u64 {
        (self.batch * self.out_channels * self.out_x * self.out_y) as u64
    }

    /// Flat offset of weight (k, c, fy, fx).
    pub fn weight_offset(&self, k: usize, c: usize, fy: usize, fx: usize) -> usize {
        ((k * self.in_channels + c) * self.kernel_y + fy) * self.kernel_x + fx
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightTensor {
    pub name: String,
    pub shape: LayerShape,
    pub values: Vec<i8>,
}

impl WeightTensor {
    pub fn new(name: impl Into<String>, shape: LayerShape, values: Vec<i8>) -> Result<Self> {
        let name = name.into();
        shape.validate()?;
        if values.len() != shape.weight_count() {
            return Err(Error::SizeMismatch {
                layer: name,
                expected: shape.weight_count(),
                actual: values.len(),
            });
        }
        Ok(WeightTensor {
            name,
            shape,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_bytes(&self) -> Vec<u8> {
        self.values.iter().map(|&v| v as u8).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerEntry {
    pub name: String,
    pub shape: LayerShape,
    pub weights: PathBuf,
    pub act_sparsity: Option<f64>,
    pub activations: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkManifest {
    pub name: String,
    pub quantization: Option<String>,
    pub layers: Vec<LayerEntry>,
}

/// A loaded network: manifest, tensors in manifest order, and the
/// per-layer activation sparsity resolved from either the scalar or the
/// activation sample (the scalar wins when both are given).
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub manifest: NetworkManifest,
    pub tensors: Vec<WeightTensor>,
    pub act_sparsity: Vec<Option<f64>>,
}

impl Network {
    /// Builds an in-memory network (no files) from tensors.
    pub fn from_tensors(name: impl Into<String>, tensors: Vec<WeightTensor>) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        for t in &tensors {
            if !seen.insert(t.name.clone()) {
                return Err(Error::DuplicateLayer(t.name.clone()));
            }
        }
        let layers = tensors
            .iter()
            .map(|t| LayerEntry {
                name: t.name.clone(),
                shape: t.shape,
                weights: PathBuf::from(format!("{}.bin", t.name)),
                act_sparsity: None,
                activations: None,
            })
            .collect();
        let n = tensors.len();
        Ok(Network {
            manifest: NetworkManifest {
                name: name.into(),
                quantization: None,
                layers,
            },
            tensors,
            act_sparsity: vec![None; n],
        })
    }

    pub fn name(&self) -> &str {
        &self.manifest.name
    }

    pub fn weight_count(&self) -> usize {
        self.tensors.iter().map(WeightTensor::len).sum()
    }

    pub fn layer_index(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    /// Same network with replaced weight values (shapes must match).
    pub fn with_values(&self, values: Vec<Vec<i8>>) -> Result<Self> {
        if values.len() != self.tensors.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} layers, got {}",
                self.tensors.len(),
                values.len()
            )));
        }
        let tensors = self
            .tensors
            .iter()
            .zip(values)
            .map(|(t, v)| WeightTensor::new(t.name.clone(), t.shape, v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Network {
            manifest: self.manifest.clone(),
            tensors,
            act_sparsity: self.act_sparsity.clone(),
        })
    }
}
