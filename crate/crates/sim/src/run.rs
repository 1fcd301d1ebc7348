//! The stepping loop and its report.

use std::collections::BTreeMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sentinel_core::{
    AudienceId, ConsequenceFrequency, Decision, HeuristicId, Post, PostId, UserId,
};
use sentinel_service::engine::{ComposeStatus, NewPost, ReportRequest};
use serde::{Deserialize, Serialize};

use crate::config::{IncidentSpec, ScenarioSpec, SimConfig};
use crate::driver::{Driver, InProcess};
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub seed: u64,
    pub steps: u64,
    pub cells: Vec<CellReport>,
    pub agents: Vec<AgentReport>,
    pub totals: Totals,
    /// Wall-clock time; filled in by the CLI so that the report itself stays
    /// reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

/// Estimate versus truth for one (scenario, incident) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub scenario: String,
    pub uin: String,
    pub ph: Option<HeuristicId>,
    pub counts: ConsequenceFrequency,
    pub n: u64,
    pub true_index: f64,
    /// Absent while the cell has fewer reports than the estimator needs.
    pub estimate: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub abs_error: Option<f64>,
    pub covered: Option<bool>,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentReport {
    pub id: String,
    pub final_phi: f64,
    pub phi_trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub step: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub posts: u64,
    pub warnings: u64,
    pub retracted: u64,
    pub published: u64,
    pub incidents: u64,
    pub reports: u64,
}

/// Deterministic per-agent stream: the same (seed, agent id) always yields
/// the same draws, whatever the other agents do.
pub fn agent_rng(seed: u64, agent_id: &str) -> ChaCha8Rng {
    // FNV-1a over the id, then a SplitMix64 finalizer mixed with the seed
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in agent_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed ^ h.rotate_left(17);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// A draft that discloses exactly the scenario's attributes, via annotations.
pub fn synthesize_post(
    scenario: &ScenarioSpec,
    id: PostId,
    author: UserId,
    at: DateTime<Utc>,
    rng: &mut impl Rng,
) -> Post {
    let text = format!(
        "[{}] simulated post #{:08x}",
        scenario.id,
        rng.random::<u32>()
    );
    Post::draft(id, author, text, AudienceId::new("public"), at)
        .with_annotations(scenario.sas.clone())
}

struct Agent {
    id: String,
    rng: ChaCha8Rng,
    post_rate: f64,
    heed: f64,
    mix: Vec<usize>,
    weights: WeightedIndex<f64>,
    posted: bool,
    trace: Vec<TracePoint>,
}

fn epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

/// Runs against a fresh in-process engine.
pub fn run_simulation(config: &SimConfig) -> Result<SimulationReport, SimError> {
    config.validate()?;
    let mut driver = InProcess::new(config.engine)?;
    run_with(config, &mut driver)
}

/// Runs against any driver.
pub fn run_with(config: &SimConfig, driver: &mut dyn Driver) -> Result<SimulationReport, SimError> {
    config.validate()?;
    let scenario_index: BTreeMap<&str, usize> = config
        .scenarios
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let outcomes: Vec<WeightedIndex<f64>> = config
        .scenarios
        .iter()
        .map(|s| {
            let total: f64 = s.incidents.iter().map(|i| i.probability).sum();
            let weights = s
                .incidents
                .iter()
                .map(|i| i.probability)
                .chain([(1.0 - total).max(0.0)]);
            WeightedIndex::new(weights).map_err(|e| SimError::Config(e.to_string()))
        })
        .collect::<Result<_, _>>()?;
    let levels: Vec<Vec<Option<WeightedIndex<f64>>>> = config
        .scenarios
        .iter()
        .map(|s| {
            s.incidents
                .iter()
                .map(|i| WeightedIndex::new(i.consequences).ok())
                .collect()
        })
        .collect();

    let mut agents: Vec<Agent> = Vec::new();
    for spec in &config.agents {
        let mix: Vec<usize> = spec
            .scenario_mix
            .keys()
            .map(|k| scenario_index[k.as_str()])
            .collect();
        let weights = WeightedIndex::new(spec.scenario_mix.values().copied())
            .map_err(|e| SimError::Config(format!("agent {:?}: {e}", spec.id)))?;
        for id in spec.agent_ids() {
            agents.push(Agent {
                rng: agent_rng(config.seed, &id),
                id,
                post_rate: spec.post_rate,
                heed: spec.heed_probability,
                mix: mix.clone(),
                weights: weights.clone(),
                posted: false,
                trace: Vec::new(),
            });
        }
    }

    let mut cells: Vec<CellReport> = config
        .scenarios
        .iter()
        .flat_map(|s| {
            s.incidents.iter().map(|i| CellReport {
                scenario: s.id.clone(),
                uin: i.uin.clone(),
                ph: None,
                counts: ConsequenceFrequency::zero(),
                n: 0,
                true_index: i.true_index(),
                estimate: None,
                ci_lower: None,
                ci_upper: None,
                abs_error: None,
                covered: None,
                trace: Vec::new(),
            })
        })
        .collect();

    let phi_initial = config.engine.thresholds.phi_initial;
    let mut totals = Totals::default();
    for step in 1..=config.steps {
        let at = epoch() + Duration::seconds(step as i64);
        for agent in &mut agents {
            let whole = agent.post_rate.floor() as u64;
            let extra = u64::from(agent.rng.random_bool(agent.post_rate.fract()));
            for _ in 0..whole + extra {
                let s = agent.mix[agent.weights.sample(&mut agent.rng)];
                let scenario = &config.scenarios[s];
                let draft = synthesize_post(
                    scenario,
                    PostId::new("draft"),
                    UserId::new(agent.id.as_str()),
                    at,
                    &mut agent.rng,
                );
                let created = driver.create_post(
                    NewPost {
                        user_id: agent.id.clone(),
                        text: draft.text,
                        declared_audience: "public".into(),
                        annotations: draft.annotations,
                    },
                    at,
                )?;
                agent.posted = true;
                totals.posts += 1;
                let post_id = created.post_id.to_string();

                if created.status == ComposeStatus::Pending {
                    totals.warnings += 1;
                    let action = if agent.rng.random_bool(agent.heed) {
                        Decision::Retract
                    } else {
                        Decision::Publish
                    };
                    driver.decide(&post_id, action, at)?;
                    if action == Decision::Retract {
                        totals.retracted += 1;
                        continue;
                    }
                }
                totals.published += 1;

                let outcome = outcomes[s].sample(&mut agent.rng);
                let Some(incident) = scenario.incidents.get(outcome) else {
                    continue;
                };
                let Some(level_dist) = &levels[s][outcome] else {
                    continue;
                };
                let level = IncidentSpec::level(level_dist.sample(&mut agent.rng));
                totals.incidents += 1;
                let deleted = driver.delete_post(&post_id, at)?;
                if !deleted.prompt_incident_report {
                    continue;
                }
                driver.report(
                    ReportRequest {
                        post_id,
                        regretted: true,
                        uin: Some(incident.uin.clone()),
                        unintended_audience: Some(scenario.audience.clone()),
                        consequence_level: Some(level.name().to_string()),
                    },
                    at,
                )?;
                totals.reports += 1;
            }
        }

        if step % config.trace_every == 0 || step == config.steps {
            for agent in &mut agents {
                let phi = if agent.posted {
                    driver.phi(&agent.id)?
                } else {
                    phi_initial
                };
                agent.trace.push(TracePoint { step, value: phi });
            }
            for (cell, (scenario, incident)) in cells.iter_mut().zip(
                config
                    .scenarios
                    .iter()
                    .flat_map(|s| s.incidents.iter().map(move |i| (s, i))),
            ) {
                refresh_cell(cell, scenario, incident, config, driver)?;
                if let Some(estimate) = cell.estimate {
                    cell.trace.push(TracePoint {
                        step,
                        value: estimate,
                    });
                }
            }
        }
    }

    Ok(SimulationReport {
        seed: config.seed,
        steps: config.steps,
        cells,
        agents: agents
            .into_iter()
            .map(|a| AgentReport {
                id: a.id,
                final_phi: a.trace.last().map_or(phi_initial, |t| t.value),
                phi_trace: a.trace,
            })
            .collect(),
        totals,
        runtime_ms: None,
    })
}

fn refresh_cell(
    cell: &mut CellReport,
    scenario: &ScenarioSpec,
    incident: &IncidentSpec,
    config: &SimConfig,
    driver: &mut dyn Driver,
) -> Result<(), SimError> {
    let Some((ph, counts)) = driver.cell(&scenario.sas, &scenario.audience, &incident.uin)? else {
        return Ok(());
    };
    cell.ph = Some(ph);
    cell.counts = counts;
    cell.n = counts.n();
    if let Ok(r) = config.engine.estimator.assess(&counts) {
        cell.estimate = Some(r.point);
        cell.ci_lower = Some(r.ci_lower);
        cell.ci_upper = Some(r.ci_upper);
        cell.abs_error = Some((r.point - cell.true_index).abs());
        cell.covered = Some(r.ci_lower <= cell.true_index && cell.true_index <= r.ci_upper);
    }
    Ok(())
}

/// Per-step traces in long form: `step,series,key,value`.
pub fn write_csv(report: &SimulationReport, out: impl std::io::Write) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| SimError::Io(e.to_string());
    w.write_record(["step", "series", "key", "value"])
        .map_err(io)?;
    for agent in &report.agents {
        for p in &agent.phi_trace {
            w.write_record([
                p.step.to_string(),
                "phi".into(),
                agent.id.clone(),
                p.value.to_string(),
            ])
            .map_err(io)?;
        }
    }
    for cell in &report.cells {
        let key = format!("{}/{}", cell.scenario, cell.uin);
        for p in &cell.trace {
            w.write_record([
                p.step.to_string(),
                "index".into(),
                key.clone(),
                p.value.to_string(),
            ])
            .map_err(io)?;
        }
    }
    w.flush().map_err(|e| SimError::Io(e.to_string()))
}
