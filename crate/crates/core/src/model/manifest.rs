// SPDX-License-Identifier: Apache-2.0
use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{LayerEntry, LayerKind, LayerShape, Network, NetworkManifest, WeightTensor};
use crate::error::{Error, Result};

/// Parses manifest text. Paths are kept as written; `load_network`
/// resolves them relative to the manifest's directory.
///
/// ```text
/// network=<name>
/// quantization=<free text>
/// layer=<name> kind=<kind> K=<n> C=<n> FX=<n> FY=<n> OX=<n> OY=<n> B=<n> stride=<n> weights=<relpath> [s_a=<float>] [acts=<relpath>]
/// ```
///
/// Blank lines and lines starting with `#` are ignored.
pub fn parse_manifest(text: &str) -> Result<NetworkManifest> {
    let mut name = None;
    let mut quantization = None;
    let mut layers: Vec<LayerEntry> = Vec::new();
    let mut seen = HashSet::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Manifest { line: line_no, msg };

        if let Some(rest) = line.strip_prefix("network=") {
            if name.is_some() {
                return Err(err("second `network=` line".into()));
            }
            let rest = rest.trim();
            if rest.is_empty() {
                return Err(err("empty network name".into()));
            }
            name = Some(rest.to_string());
        } else if let Some(rest) = line.strip_prefix("quantization=") {
            quantization = Some(rest.trim().to_string());
        } else if line.starts_with("layer=") {
            let entry = parse_layer(line).map_err(err)?;
            entry.shape.validate().map_err(|e| err(e.to_string()))?;
            if !seen.insert(entry.name.clone()) {
                return Err(Error::DuplicateLayer(entry.name));
            }
            layers.push(entry);
        } else {
            return Err(err(format!("unrecognised line `{line}`")));
        }
    }

    let name = name.ok_or(Error::Manifest {
        line: 0,
        msg: "missing `network=` line".into(),
    })?;
    Ok(NetworkManifest {
        name,
        quantization,
        layers,
    })
}

fn parse_layer(line: &str) -> std::result::Result<LayerEntry, String> {
    let mut name = None;
    let mut kind = None;
    let mut dims: [Option<usize>; 8] = [None; 8];
    const DIM_KEYS: [&str; 8] = ["K", "C", "FX", "FY", "OX", "OY", "B", "stride"];
    let mut weights = None;
    let mut act_sparsity = None;
    let mut activations = None;

    for token in line.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{token}`"))?;
        if let Some(slot) = DIM_KEYS.iter().position(|k| *k == key) {
            let n = value
                .parse::<usize>()
                .map_err(|_| format!("{key}: `{value}` is not a count"))?;
            if dims[slot].replace(n).is_some() {
                return Err(format!("{key} given twice"));
            }
            continue;
        }
        match key {
            "layer" => name = Some(value.to_string()),
            "kind" => kind = Some(value.parse::<LayerKind>()?),
            "weights" => weights = Some(PathBuf::from(value)),
            "acts" => activations = Some(PathBuf::from(value)),
            "s_a" => {
                let s = value
                    .parse::<f64>()
                    .map_err(|_| format!("s_a: `{value}` is not a number"))?;
                if !(0.0..=1.0).contains(&s) {
                    return Err(format!("s_a={s} outside [0, 1]"));
                }
                act_sparsity = Some(s);
            }
            other => return Err(format!("unknown key `{other}`")),
        }
    }

    let name = name.filter(|n| !n.is_empty()).ok_or("empty layer name")?;
    let req = |slot: usize| dims[slot].ok_or_else(|| format!("missing {}", DIM_KEYS[slot]));
    let shape = LayerShape {
        out_channels: req(0)?,
        in_channels: req(1)?,
        kernel_x: req(2)?,
        kernel_y: req(3)?,
        out_x: req(4)?,
        out_y: req(5)?,
        batch: dims[6].unwrap_or(1),
        stride: dims[7].unwrap_or(1),
        kind: kind.ok_or("missing kind")?,
    };
    Ok(LayerEntry {
        name,
        shape,
        weights: weights.ok_or("missing weights")?,
        act_sparsity,
        activations,
    })
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path.to_path_buf())
        } else {
            Error::io(path, e)
        }
    })
}

/// Loads a manifest and all referenced weight files.
pub fn load_network(manifest_path: impl AsRef<Path>) -> Result<Network> {
    let manifest_path = manifest_path.as_ref();
    let text = String::from_utf8(read_file(manifest_path)?).map_err(|_| Error::Manifest {
        line: 0,
        msg: "manifest is not UTF-8".into(),
    })?;
    let manifest = parse_manifest(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let mut tensors = Vec::with_capacity(manifest.layers.len());
    let mut act_sparsity = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let bytes = read_file(&base.join(&entry.weights))?;
        let expected = entry.shape.weight_count();
        if bytes.len() != expected {
            return Err(Error::SizeMismatch {
                layer: entry.name.clone(),
                expected,
                actual: bytes.len(),
            });
        }
        let values = bytes.into_iter().map(|b| b as i8).collect();
        tensors.push(WeightTensor::new(entry.name.clone(), entry.shape, values)?);

        let s_a = match (entry.act_sparsity, &entry.activations) {
            (Some(s), _) => Some(s),
            (None, Some(path)) => {
                let sample = read_file(&base.join(path))?;
                if sample.is_empty() {
                    None
                } else {
                    let zeros = sample.iter().filter(|&&b| b == 0).count();
                    Some(zeros as f64 / sample.len() as f64)
                }
            }
            (None, None) => None,
        };
        act_sparsity.push(s_a);
    }

    Ok(Network {
        manifest,
        tensors,
        act_sparsity,
    })
}

/// Manifest text for `network`; weight paths are `<layer>.bin` and the
/// resolved activation sparsity is written as `s_a`.
pub fn render_manifest(network: &Network) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "network={}", network.manifest.name);
    if let Some(q) = &network.manifest.quantization {
        let _ = writeln!(out, "quantization={q}");
    }
    for (t, s_a) in network.tensors.iter().zip(&network.act_sparsity) {
        let s = &t.shape;
        let _ = write!(
            out,
            "layer={} kind={} K={} C={} FX={} FY={} OX={} OY={} B={} stride={} weights={}.bin",
            t.name,
            s.kind,
            s.out_channels,
            s.in_channels,
            s.kernel_x,
            s.kernel_y,
            s.out_x,
            s.out_y,
            s.batch,
            s.stride,
            t.name
        );
        if let Some(v) = s_a {
            let _ = write!(out, " s_a={v}");
        }
        out.push('\n');
    }
    out
}

/// Writes `manifest.txt` plus one `<layer>.bin` per tensor into `dir`
/// and returns the manifest path.
pub fn save_network(dir: impl AsRef<Path>, network: &Network) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for t in &network.tensors {
        let path = dir.join(format!("{}.bin", t.name));
        fs::write(&path, t.as_bytes()).map_err(|e| Error::io(&path, e))?;
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, render_manifest(network)).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, bytes: &[u8]) {
        fs::write(dir.join(name), bytes).unwrap();
    }

    #[test]
    fn loads_single_layer() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "w.bin", &[1, 0xff, 0, 127]);
        write(
            dir.path(),
            "m.txt",
            b"network=tiny\nlayer=l0 kind=conv K=1 C=4 FX=1 FY=1 OX=1 OY=1 B=1 stride=1 weights=w.bin\n",
        );
        let net = load_network(dir.path().join("m.txt")).unwrap();
        assert_eq!(net.tensors.len(), 1);
        assert_eq!(net.tensors[0].values, vec![1, -1, 0, 127]);
        assert_eq!(net.act_sparsity, vec![None]);
    }

    #[test]
    fn short_file_is_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "w.bin", &[1; 7]);
        write(
            dir.path(),
            "m.txt",
            b"network=n\nlayer=l0 kind=conv K=2 C=4 FX=1 FY=1 OX=1 OY=1 weights=w.bin\n",
        );
        match load_network(dir.path().join("m.txt")) {
            Err(Error::SizeMismatch {
                expected: 8,
                actual: 7,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn activation_scalar_passes_through() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "w.bin", &[0; 4]);
        write(dir.path(), "a.bin", &[0, 0, 0, 1]);
        write(
            dir.path(),
            "m.txt",
            b"network=n\nlayer=conv2 kind=conv K=1 C=4 FX=1 FY=1 OX=1 OY=1 weights=w.bin s_a=0.2 acts=a.bin\n\
              layer=conv3 kind=conv K=1 C=4 FX=1 FY=1 OX=1 OY=1 weights=w.bin acts=a.bin\n",
        );
        let net = load_network(dir.path().join("m.txt")).unwrap();
        assert_eq!(net.manifest.layers[0].act_sparsity, Some(0.2));
        assert_eq!(net.act_sparsity, vec![Some(0.2), Some(0.75)]);
    }

    #[test]
    fn rejects_duplicates_and_missing_files() {
        let text = "network=n\nlayer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=a.bin\n\
                    layer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=b.bin\n";
        assert!(matches!(parse_manifest(text), Err(Error::DuplicateLayer(n)) if n == "a"));

        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "m.txt",
            b"network=n\nlayer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=nope.bin\n",
        );
        assert!(matches!(
            load_network(dir.path().join("m.txt")),
            Err(Error::MissingFile(_))
        ));
        assert!(matches!(
            load_network(dir.path().join("absent.txt")),
            Err(Error::MissingFile(_))
        ));
    }

    #[test]
    fn rejects_bad_fields() {
        for line in [
            "layer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 weights=a.bin",
            "layer=a kind=blob K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=a.bin",
            "layer=a kind=conv K=0 C=1 FX=1 FY=1 OX=1 OY=1 weights=a.bin",
            "layer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=a.bin s_a=1.5",
            "layer=a kind=depthwise-conv K=8 C=8 FX=3 FY=3 OX=1 OY=1 weights=a.bin",
        ] {
            let text = format!("network=n\n{line}\n");
            assert!(
                matches!(parse_manifest(&text), Err(Error::Manifest { line: 2, .. })),
                "{line}"
            );
        }
        assert!(parse_manifest("layer=a kind=conv K=1 C=1 FX=1 FY=1 OX=1 OY=1 weights=a").is_err());
    }

    #[test]
    fn save_then_load_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let shape = LayerShape::conv(2, 3, 1, 2);
        let t =
            WeightTensor::new("x", shape, vec![-128, -1, 0, 1, 2, 3, 4, 5, 6, 7, 8, 127]).unwrap();
        let mut net = Network::from_tensors("rt", vec![t]).unwrap();
        net.act_sparsity[0] = Some(0.25);
        let path = save_network(dir.path(), &net).unwrap();
        let back = load_network(path).unwrap();
        assert_eq!(back.tensors, net.tensors);
        assert_eq!(back.act_sparsity, net.act_sparsity);
    }
}
