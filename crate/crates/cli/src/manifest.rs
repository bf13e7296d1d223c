use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

const TIMING_KEYS: [&str; 3] = ["elapsed_ms", "total_ms", "wall_time_ms"];

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: Value,
    /// SHA-256 of each raw input document, keyed by flag name.
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub wall_time_ms: f64,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: Value) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            config,
            input_digests: BTreeMap::new(),
            tool_version: TOOL_VERSION.to_string(),
            wall_time_ms: 0.0,
        }
    }

    pub fn digest(&mut self, name: &str, raw: &str) {
        let hash = Sha256::digest(raw.as_bytes());
        self.input_digests
            .insert(name.to_string(), hex::encode(hash));
    }
}

/// Zeroes every timing field so that repeated runs print identical bytes.
pub fn strip_timings(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for (k, val) in map.iter_mut() {
                if TIMING_KEYS.contains(&k.as_str()) {
                    *val = Value::from(0.0);
                } else if k == "stages" {
                    if let Value::Array(stages) = val {
                        for s in stages.iter_mut() {
                            if let Value::Array(pair) = s {
                                if pair.len() == 2 {
                                    pair[1] = Value::from(0.0);
                                }
                            }
                        }
                    }
                } else {
                    strip_timings(val);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timings),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn digest_is_sha256_hex() {
        let mut m = RunManifest::new("tau", json!({}));
        m.digest("j", "abc");
        assert_eq!(
            m.input_digests["j"],
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn timings_are_zeroed_recursively() {
        let mut v = json!({
            "elapsed_ms": 3.5,
            "inner": [{"timings": {"total_ms": 2.0, "stages": [["a", 1.0]]}}],
            "keep": 7
        });
        strip_timings(&mut v);
        assert_eq!(
            v,
            json!({
                "elapsed_ms": 0.0,
                "inner": [{"timings": {"total_ms": 0.0, "stages": [["a", 0.0]]}}],
                "keep": 7
            })
        );
    }
}
