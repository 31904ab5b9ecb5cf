// SPDX-License-Identifier: Apache-2.0
use std::process::Command;

use crate::error::{Error, Result};
use crate::model::{save_network, Network};

/// Scores a (flipped) network; higher is better. Implementations must be
/// deterministic for identical inputs.
pub trait AccuracyOracle: Sync {
    fn evaluate(&self, network: &Network) -> Result<f64>;
}

impl<F> AccuracyOracle for F
where
    F: Fn(&Network) -> Result<f64> + Sync,
{
    fn evaluate(&self, network: &Network) -> Result<f64> {
        self(network)
    }
}

/// Negative mean squared deviation from a reference network.
pub struct ProxyOracle {
    reference: Network,
}

impl ProxyOracle {
    pub fn new(reference: Network) -> Self {
        ProxyOracle { reference }
    }
}

/// `-(Σ (w - w')²) / N` over all weights of the two networks.
pub fn proxy_metric(original: &Network, flipped: &Network) -> Result<f64> {
    if original.tensors.len() != flipped.tensors.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} layers vs {}",
            original.tensors.len(),
            flipped.tensors.len()
        )));
    }
    let mut sq = 0u64;
    let mut n = 0u64;
    for (a, b) in original.tensors.iter().zip(&flipped.tensors) {
        if a.shape != b.shape || a.len() != b.len() {
            return Err(Error::ShapeMismatch(format!(
                "layer {} differs in shape",
                a.name
            )));
        }
        for (&x, &y) in a.values.iter().zip(&b.values) {
            let d = x as i64 - y as i64;
            sq += (d * d) as u64;
        }
        n += a.len() as u64;
    }
    if n == 0 {
        return Ok(0.0);
    }
    Ok(-(sq as f64) / n as f64)
}

impl AccuracyOracle for ProxyOracle {
    fn evaluate(&self, network: &Network) -> Result<f64> {
        proxy_metric(&self.reference, network)
    }
}

/// Runs a shell command per evaluation. `{manifest}` in the template is
/// replaced by the path of a manifest describing the network under test;
/// the last non-empty line of standard output is the metric.
pub struct ExternalOracle {
    template: String,
}

impl ExternalOracle {
    pub fn new(template: impl Into<String>) -> Self {
        ExternalOracle {
            template: template.into(),
        }
    }

    pub fn template(&self) -> &str {
        &self.template
    }
}

fn quote(path: &str) -> String {
    format!("'{}'", path.replace('\'', r"'\''"))
}

impl AccuracyOracle for ExternalOracle {
    fn evaluate(&self, network: &Network) -> Result<f64> {
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let manifest = save_network(dir.path(), network)?;
        let cmd = self
            .template
            .replace("{manifest}", &quote(&manifest.to_string_lossy()));
        let out = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .output()
            .map_err(|e| Error::Oracle(format!("cannot run {cmd:?}: {e}")))?;
        if !out.status.success() {
            return Err(Error::Oracle(format!(
                "{cmd:?} exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let stdout = String::from_utf8_lossy(&out.stdout);
        let last = stdout
            .lines()
            .map(str::trim)
            .rfind(|l| !l.is_empty())
            .ok_or_else(|| Error::Oracle(format!("{cmd:?} printed nothing")))?;
        last.parse::<f64>()
            .map_err(|_| Error::Oracle(format!("{cmd:?} printed {last:?}, not a number")))
    }
}
