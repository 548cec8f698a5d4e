//! Reproducibility header: every emitted artifact embeds the configuration
//! that produced it plus a stable hash of that configuration.

use serde::Serialize;

pub const TOOL_VERSION: &str = concat!("flowkick ", env!("CARGO_PKG_VERSION"));

/// Flat, fully serializable record of one invocation. Field order fixes the
/// JSON key order, which keeps the hash stable.
#[derive(Debug, Clone, Serialize, Default)]
pub struct RunConfig {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub system_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub free: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub at: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_window: Option<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_axis: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub second_kind: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub x0: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cycles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub starts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub start_box: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub curve_type: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariant_dirs: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dedupe: Option<f64>,
    pub tol: f64,
    pub seed: u64,
    pub threads: usize,
    pub formats: Vec<String>,
}

impl RunConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// FNV-1a 64 over the canonical JSON form.
    pub fn hash_hex(&self) -> String {
        let mut h: u64 = 0xcbf29ce484222325;
        for b in self.to_json().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let mut cfg = RunConfig {
            command: "simulate".into(),
            tol: 1e-10,
            seed: 42,
            formats: vec!["csv".into()],
            ..RunConfig::default()
        };
        let h1 = cfg.hash_hex();
        assert_eq!(h1, cfg.hash_hex());
        cfg.seed = 43;
        assert_ne!(h1, cfg.hash_hex());
    }
}
