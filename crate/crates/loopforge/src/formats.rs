//! Numeric rendering and the network parameter document.

use std::fs;
use std::path::Path;

use loopforge_core::network::{Layer, NetworkParameters};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::export::ExportError;

/// Significant digits kept in every numeric output.
pub const SIG_DIGITS: usize = 9;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Rounds to nine significant digits. Non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest text that reads back as `round_sig(x)`.
pub fn fmt_num(x: f64) -> String {
    let r = round_sig(x);
    if r == 0.0 {
        // no "-0"
        return "0".into();
    }
    format!("{r}")
}

/// Rounds every float in a JSON tree in place. Integers are left alone so
/// seeds keep their full 64 bits.
pub fn round_json(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(m) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = m;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_json),
        Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Pretty JSON with floats rounded to nine significant digits and a
/// trailing newline.
pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut v = serde_json::to_value(value)?;
    round_json(&mut v);
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDocument {
    /// One row per output unit.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

/// On-disk form of a decision network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub format_version: u32,
    /// Seed of the episode that produced the weights.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub layer_sizes: Vec<usize>,
    pub layers: Vec<LayerDocument>,
}

impl NetworkDocument {
    pub fn from_params(params: &NetworkParameters, seed: Option<u64>) -> Self {
        Self {
            format_version: NETWORK_FORMAT_VERSION,
            seed,
            layer_sizes: params.layer_sizes.clone(),
            layers: params
                .layers
                .iter()
                .map(|l| LayerDocument {
                    weights: l.weights.chunks(l.inputs).map(|r| r.to_vec()).collect(),
                    biases: l.bias.clone(),
                })
                .collect(),
        }
    }

    pub fn to_params(&self) -> Result<NetworkParameters, ExportError> {
        if self.format_version != NETWORK_FORMAT_VERSION {
            return Err(ExportError::Format(format!(
                "network format_version {} is not supported (expected {NETWORK_FORMAT_VERSION})",
                self.format_version
            )));
        }
        for (i, l) in self.layers.iter().enumerate() {
            let width = l.weights.first().map_or(0, Vec::len);
            if l.weights.iter().any(|r| r.len() != width) {
                return Err(ExportError::Format(format!("layer {i}: ragged weight rows")));
            }
        }
        let layers = self
            .layers
            .iter()
            .map(|l| Layer {
                inputs: l.weights.first().map_or(0, Vec::len),
                outputs: l.weights.len(),
                weights: l.weights.concat(),
                bias: l.biases.clone(),
            })
            .collect();
        let params = NetworkParameters::from_layers(layers)
            .map_err(|e| ExportError::Format(e.to_string()))?;
        if params.layer_sizes != self.layer_sizes {
            return Err(ExportError::Format(format!(
                "layer_sizes {:?} disagree with the weights ({:?})",
                self.layer_sizes, params.layer_sizes
            )));
        }
        Ok(params)
    }
}

pub fn write_network(path: &Path, params: &NetworkParameters, seed: Option<u64>) -> Result<(), ExportError> {
    let text = to_rounded_json(&NetworkDocument::from_params(params, seed))?;
    fs::write(path, text).map_err(|e| ExportError::io(path, e))
}

pub fn read_network(path: &Path) -> Result<NetworkParameters, ExportError> {
    let text = fs::read_to_string(path).map_err(|e| ExportError::io(path, e))?;
    let doc: NetworkDocument = serde_json::from_str(&text)?;
    doc.to_params()
}

#[cfg(test)]
mod tests {
    use super::*;
    use loopforge_core::network::init_params;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(fmt_num(0.1 + 0.2), "0.3");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_num(123456789012.0), "123456789000");
        assert_eq!(fmt_num(-2.5e-7), "-0.00000025");
        assert_eq!(fmt_num(-0.0), "0");
        assert_eq!(fmt_num(42.0), "42");
        assert_eq!(round_sig(f64::NAN).is_nan(), true);
    }

    #[test]
    fn rounding_is_idempotent() {
        for x in [1.0 / 7.0, 2.0f64.sqrt() * 1e10, -std::f64::consts::PI * 1e-12] {
            let r = round_sig(x);
            assert_eq!(round_sig(r), r);
            assert_eq!(fmt_num(r).parse::<f64>().unwrap(), r);
        }
    }

    #[test]
    fn json_rounding_keeps_integers() {
        let mut v = serde_json::json!({"seed": u64::MAX, "x": [0.1234567891234, 3]});
        round_json(&mut v);
        assert_eq!(v["seed"].as_u64(), Some(u64::MAX));
        assert_eq!(v["x"][0].as_f64(), Some(0.123456789));
        assert_eq!(v["x"][1].as_u64(), Some(3));
    }

    #[test]
    fn network_document_round_trip() {
        let params = init_params(&[8, 16, 4], 9).unwrap();
        let doc = NetworkDocument::from_params(&params, None);
        assert_eq!(doc.layers[0].weights.len(), 16);
        assert_eq!(doc.layers[0].weights[0].len(), 8);
        assert_eq!(doc.layers[0].weights[2][5], params.layers[0].weight(2, 5));
        assert_eq!(doc.to_params().unwrap(), params);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        write_network(&path, &params, Some(9)).unwrap();
        let back = read_network(&path).unwrap();
        assert_eq!(back.layer_sizes, params.layer_sizes);
        for (a, b) in back.layers.iter().zip(&params.layers) {
            for (x, y) in a.weights.iter().zip(&b.weights) {
                assert_eq!(*x, round_sig(*y));
            }
        }
    }

    #[test]
    fn network_document_rejects_bad_input() {
        let params = init_params(&[2, 3, 2], 1).unwrap();
        let mut doc = NetworkDocument::from_params(&params, None);
        doc.format_version = 2;
        assert!(doc.to_params().is_err());
        let mut doc = NetworkDocument::from_params(&params, None);
        doc.layer_sizes = vec![2, 4, 2];
        assert!(doc.to_params().is_err());
        let mut doc = NetworkDocument::from_params(&params, None);
        doc.layers[1].weights[0].pop();
        assert!(doc.to_params().is_err());
    }
}
