//! Run and sweep configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::policy::PolicyConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Number of nodes M.
    pub m: usize,
    /// Horizon K in slots.
    pub k: u64,
    pub sigma2: f64,
    pub epsilon: f64,
    pub policy: PolicyConfig,
    pub seed: u64,
    pub replications: u32,
    pub burn_in: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            m: 500,
            k: 500_000,
            sigma2: 1.0,
            epsilon: 0.0,
            policy: PolicyConfig::Ebt { beta: None },
            seed: 1,
            replications: 10,
            burn_in: 0,
            output: None,
        }
    }
}

impl SimConfig {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(SimError::invalid("m", "must be at least 1"));
        }
        if self.k == 0 {
            return Err(SimError::invalid("k", "must be at least 1"));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(SimError::invalid("sigma2", format!("{} is not a positive number", self.sigma2)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(SimError::invalid("epsilon", format!("{} not in [0, 1)", self.epsilon)));
        }
        if self.replications == 0 {
            return Err(SimError::invalid("replications", "must be at least 1"));
        }
        if self.burn_in >= self.k {
            return Err(SimError::invalid("burn_in", format!("{} leaves no slots of k = {}", self.burn_in, self.k)));
        }
        validate_policy(&self.policy)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text)
    }
}

pub fn validate_policy(policy: &PolicyConfig) -> Result<()> {
    match *policy {
        PolicyConfig::StationaryRandomized { p: Some(p) } if !(p > 0.0 && p <= 1.0) => {
            Err(SimError::invalid("policy.p", format!("{p} not in (0, 1]")))
        }
        PolicyConfig::Sat { gamma: Some(0) } => Err(SimError::invalid("policy.gamma", "must be at least 1")),
        PolicyConfig::Ebt { beta: Some(b) } if b.is_nan() || b < 0.0 => {
            Err(SimError::invalid("policy.beta", format!("{b} is negative")))
        }
        _ => Ok(()),
    }
}

/// Parameter swept by a [`SweepSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Sigma2,
    Epsilon,
    #[serde(rename = "m")]
    M,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub base: SimConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    pub policies: Vec<PolicyConfig>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(SimError::invalid("values", "sweep needs at least one value"));
        }
        if self.policies.is_empty() {
            return Err(SimError::invalid("policies", "sweep needs at least one policy"));
        }
        for &v in &self.values {
            self.point(v, &self.policies[0])?;
        }
        for p in &self.policies {
            validate_policy(p)?;
        }
        self.base.validate()
    }

    /// Config of one sweep point.
    pub fn point(&self, value: f64, policy: &PolicyConfig) -> Result<SimConfig> {
        let mut cfg = self.base.clone();
        cfg.policy = policy.clone();
        match self.axis {
            Axis::Sigma2 => cfg.sigma2 = value,
            Axis::Epsilon => cfg.epsilon = value,
            Axis::M => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(SimError::invalid("values", format!("{value} is not a node count")));
                }
                cfg.m = value as usize;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Built-in sweeps matching the figure grids.
    pub fn preset(name: &str) -> Option<Self> {
        let all = vec![
            PolicyConfig::Sat { gamma: None },
            PolicyConfig::Ebt { beta: None },
            PolicyConfig::CentralMw,
            PolicyConfig::CentralGreedyError,
            PolicyConfig::StationaryRandomized { p: None },
            PolicyConfig::PseudoBayesAloha,
        ];
        Some(match name {
            "sigma2" => SweepSpec {
                base: SimConfig::default(),
                axis: Axis::Sigma2,
                values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
                policies: all,
            },
            "epsilon" => SweepSpec {
                base: SimConfig {
                    sigma2: 3.0,
                    ..SimConfig::default()
                },
                axis: Axis::Epsilon,
                values: (0..8).map(|i| f64::from(i) / 10.0).collect(),
                policies: vec![
                    PolicyConfig::Sat { gamma: None },
                    PolicyConfig::Ebt { beta: None },
                    PolicyConfig::CentralMw,
                    PolicyConfig::CentralGreedyError,
                ],
            },
            "m" => SweepSpec {
                base: SimConfig {
                    sigma2: 3.0,
                    ..SimConfig::default()
                },
                axis: Axis::M,
                values: (1..=10).map(|i| f64::from(i) * 50.0).collect(),
                policies: vec![PolicyConfig::Ebt { beta: None }],
            },
            _ => return None,
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_are_desk_scale() {
        let c = SimConfig::default();
        assert_eq!((c.m, c.k, c.replications), (500, 500_000, 10));
        c.validate().unwrap();
    }

    #[test]
    fn field_errors_name_the_field() {
        let bad = [
            SimConfig { m: 0, ..Default::default() },
            SimConfig { sigma2: -1.0, ..Default::default() },
            SimConfig { epsilon: 1.0, ..Default::default() },
            SimConfig { replications: 0, ..Default::default() },
            SimConfig {
                policy: PolicyConfig::Sat { gamma: Some(0) },
                ..Default::default()
            },
        ];
        let fields = ["m", "sigma2", "epsilon", "replications", "policy.gamma"];
        for (cfg, field) in bad.iter().zip(fields) {
            let msg = cfg.validate().unwrap_err().to_string();
            assert!(msg.contains(field), "{msg}");
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = SimConfig::from_json(r#"{"m": 20, "policy": {"kind": "sat", "gamma": 40}}"#).unwrap();
        assert_eq!(c.m, 20);
        assert_eq!(c.k, 500_000);
        assert_eq!(c.policy, PolicyConfig::Sat { gamma: Some(40) });
        assert!(SimConfig::from_json(r#"{"mm": 3}"#).is_err());
    }

    #[test]
    fn presets_validate() {
        for name in ["sigma2", "epsilon", "m"] {
            SweepSpec::preset(name).unwrap().validate().unwrap();
        }
        assert!(SweepSpec::preset("nope").is_none());
    }

    #[test]
    fn m_axis_rejects_fractions() {
        let mut s = SweepSpec::preset("m").unwrap();
        s.values = vec![10.5];
        assert!(s.validate().is_err());
    }

    fn policy_strategy() -> impl Strategy<Value = PolicyConfig> {
        prop_oneof![
            proptest::option::of(1e-6f64..=1.0).prop_map(|p| PolicyConfig::StationaryRandomized { p }),
            Just(PolicyConfig::PseudoBayesAloha),
            proptest::option::of(1u64..100_000).prop_map(|gamma| PolicyConfig::Sat { gamma }),
            proptest::option::of(0.0f64..1e6).prop_map(|beta| PolicyConfig::Ebt { beta }),
            Just(PolicyConfig::CentralMw),
            Just(PolicyConfig::CentralGreedyError),
        ]
    }

    proptest! {
        #[test]
        fn config_round_trips(
            m in 1usize..100_000,
            k in 1u64..u64::MAX / 2,
            sigma2 in 1e-12f64..1e12,
            epsilon in 0.0f64..1.0,
            policy in policy_strategy(),
            seed in any::<u64>(),
            replications in 1u32..1000,
            output in proptest::option::of("[a-z]{1,8}"),
        ) {
            let cfg = SimConfig {
                m, k, sigma2, epsilon, policy, seed, replications,
                burn_in: k / 3,
                output: output.map(PathBuf::from),
            };
            let back = SimConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, cfg);
        }
    }
}
