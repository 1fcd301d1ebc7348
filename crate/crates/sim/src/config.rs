//! Simulation inputs.

use std::collections::{BTreeMap, BTreeSet};

use sentinel_core::model::K;
use sentinel_core::{AttributeSet, ConsequenceLevel};
use sentinel_service::EngineConfig;
use serde::{Deserialize, Serialize};

use crate::SimError;

const EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    #[serde(default = "default_steps")]
    pub steps: u64,
    /// Steps between trace samples; the final step is always sampled.
    #[serde(default = "default_trace_every")]
    pub trace_every: u64,
    #[serde(default)]
    pub engine: EngineConfig,
    pub scenarios: Vec<ScenarioSpec>,
    pub agents: Vec<AgentSpec>,
}

fn default_steps() -> u64 {
    1000
}

fn default_trace_every() -> u64 {
    10
}

/// A kind of post and what tends to happen after it is published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub id: String,
    pub sas: AttributeSet,
    /// Audience that should not have seen the post; used in reports.
    pub audience: String,
    pub incidents: Vec<IncidentSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSpec {
    pub uin: String,
    /// Chance per published post. Whatever the incidents leave over is the
    /// chance that nothing happens.
    pub probability: f64,
    /// Catastrophic first.
    pub consequences: [f64; K],
}

impl IncidentSpec {
    /// The index of the consequence distribution itself: the same formula as
    /// the estimator, applied to exact probabilities.
    pub fn true_index(&self) -> f64 {
        let mut cdf = 0.0;
        let mut sum = 0.0;
        for p in self.consequences {
            cdf += p;
            sum += cdf;
        }
        ((sum - 1.0) / (K - 1) as f64).clamp(0.0, 1.0)
    }

    pub fn level(index: usize) -> ConsequenceLevel {
        ConsequenceLevel::ALL[index]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub id: String,
    /// Number of identical agents; ids get a numeric suffix when above one.
    #[serde(default = "one")]
    pub count: u32,
    /// Expected posts per step. The integer part is posted every step, the
    /// fraction with that probability.
    pub post_rate: f64,
    /// Scenario id → relative weight.
    pub scenario_mix: BTreeMap<String, f64>,
    /// Chance of retracting a warned draft.
    pub heed_probability: f64,
}

fn one() -> u32 {
    1
}

impl AgentSpec {
    pub fn agent_ids(&self) -> Vec<String> {
        if self.count == 1 {
            vec![self.id.clone()]
        } else {
            (1..=self.count)
                .map(|i| format!("{}-{i:03}", self.id))
                .collect()
        }
    }
}

fn invalid(msg: impl Into<String>) -> SimError {
    SimError::Config(msg.into())
}

fn unit(x: f64) -> bool {
    x.is_finite() && (0.0..=1.0).contains(&x)
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if self.trace_every == 0 {
            return Err(invalid("trace_every must be at least 1"));
        }
        self.engine
            .validate()
            .map_err(|e| invalid(format!("engine: {e}")))?;
        if self.scenarios.is_empty() {
            return Err(invalid("at least one scenario is required"));
        }
        if self.agents.is_empty() {
            return Err(invalid("at least one agent is required"));
        }

        let mut scenario_ids = BTreeSet::new();
        for s in &self.scenarios {
            if !scenario_ids.insert(s.id.as_str()) {
                return Err(invalid(format!("duplicate scenario id {:?}", s.id)));
            }
            if s.sas.is_empty() {
                return Err(invalid(format!(
                    "scenario {:?} discloses no attributes",
                    s.id
                )));
            }
            if s.audience.trim().is_empty() {
                return Err(invalid(format!("scenario {:?} has no audience", s.id)));
            }
            let mut total = 0.0;
            let mut uins = BTreeSet::new();
            for inc in &s.incidents {
                if !uins.insert(sentinel_core::model::canonical_id(&inc.uin))
                    || inc.uin.trim().is_empty()
                {
                    return Err(invalid(format!(
                        "scenario {:?}: blank or repeated incident {:?}",
                        s.id, inc.uin
                    )));
                }
                if !unit(inc.probability) {
                    return Err(invalid(format!(
                        "scenario {:?}: probability of {:?} must lie in [0, 1]",
                        s.id, inc.uin
                    )));
                }
                total += inc.probability;
                if !inc.consequences.iter().all(|p| unit(*p))
                    || (inc.consequences.iter().sum::<f64>() - 1.0).abs() > EPS
                {
                    return Err(invalid(format!(
                        "scenario {:?}: consequences of {:?} must be probabilities summing to 1",
                        s.id, inc.uin
                    )));
                }
            }
            if total > 1.0 + EPS {
                return Err(invalid(format!(
                    "scenario {:?}: incident probabilities sum to {total} > 1",
                    s.id
                )));
            }
        }

        let mut agent_ids = BTreeSet::new();
        for a in &self.agents {
            if a.count == 0 {
                return Err(invalid(format!(
                    "agent {:?}: count must be at least 1",
                    a.id
                )));
            }
            for id in a.agent_ids() {
                if id.trim().is_empty() || !agent_ids.insert(id.clone()) {
                    return Err(invalid(format!("blank or duplicate agent id {id:?}")));
                }
            }
            if !(a.post_rate.is_finite() && a.post_rate >= 0.0) {
                return Err(invalid(format!("agent {:?}: post_rate must be >= 0", a.id)));
            }
            if !unit(a.heed_probability) {
                return Err(invalid(format!(
                    "agent {:?}: heed_probability must lie in [0, 1]",
                    a.id
                )));
            }
            if a.scenario_mix.is_empty()
                || a.scenario_mix
                    .values()
                    .any(|w| !(w.is_finite() && *w >= 0.0))
                || a.scenario_mix.values().sum::<f64>() <= 0.0
            {
                return Err(invalid(format!(
                    "agent {:?}: scenario_mix needs non-negative weights with a positive sum",
                    a.id
                )));
            }
            if let Some(unknown) = a
                .scenario_mix
                .keys()
                .find(|k| !scenario_ids.contains(k.as_str()))
            {
                return Err(invalid(format!(
                    "agent {:?}: unknown scenario {unknown:?}",
                    a.id
                )));
            }
        }
        Ok(())
    }
}
