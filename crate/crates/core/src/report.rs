//! Seeded experiment records and binomial confidence radii.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub spec: Value,
    pub samples: usize,
    pub estimate: f64,
    pub confidence_radius: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<u64>,
    #[serde(default)]
    pub details: BTreeMap<String, Value>,
}

impl ExperimentReport {
    pub fn new(
        experiment: &str,
        spec: Value,
        samples: usize,
        estimate: f64,
        confidence_radius: f64,
        seed: u64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            spec,
            samples,
            estimate,
            confidence_radius,
            seed,
            wall_time_ms: None,
            details: BTreeMap::new(),
        }
    }

    pub fn with_detail(mut self, key: &str, value: impl Serialize) -> Self {
        self.details
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn lower(&self) -> f64 {
        self.estimate - self.confidence_radius
    }

    pub fn upper(&self) -> f64 {
        self.estimate + self.confidence_radius
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Largest distance from the point estimate to either Wilson bound.
pub fn wilson_radius(successes: usize, trials: usize, z: f64) -> f64 {
    if trials == 0 {
        return 1.0;
    }
    let p = successes as f64 / trials as f64;
    let (lo, hi) = wilson_interval(successes, trials, z);
    (p - lo).max(hi - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (5, 10), (10, 10), (150, 200)] {
            let (lo, hi) = wilson_interval(k, n, Z95);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi);
            assert!(wilson_radius(k, n, Z95) > 0.0);
        }
        // Known value: 150/200 → roughly [0.686, 0.805].
        let (lo, hi) = wilson_interval(150, 200, Z95);
        assert!((lo - 0.6856).abs() < 1e-3 && (hi - 0.8048).abs() < 1e-3);
    }

    #[test]
    fn report_json_omits_missing_wall_time() {
        let r = ExperimentReport::new("x", serde_json::json!({"n": 2}), 3, 0.5, 0.1, 7).with_detail("k", 1);
        let text = serde_json::to_string(&r).unwrap();
        assert!(!text.contains("wall_time_ms"));
        let back: ExperimentReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
