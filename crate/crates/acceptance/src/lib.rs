//! Fixtures and experiments behind the acceptance suite
//! (`cargo test -p sentinel-validation --test acceptance`).

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use sentinel_core::model::K;
use sentinel_core::{
    criticality_estimate, AttributeSet, ConsequenceFrequency, KnowledgeBase, RiskEstimator,
    SurveillanceAttribute, VarianceNormalization,
};
use sentinel_service::EngineConfig;
use sentinel_sim::{run_simulation, AgentSpec, IncidentSpec, ScenarioSpec, SimConfig};

/// The five-heuristic knowledge base of the worked example.
pub const TABLE2: &[u8] = include_bytes!("../../core/data/table2.json");

pub const FIG2: &str =
    "A typical day at the office. Lots of complaints and bad mood. Cannot wait for the day to be over...!";
pub const COFFEE: &str = "My job at this company is like the coffee they serve...awful!";
pub const BOSTON: &str = "Moving to Boston was definitely not a good idea...the weather in this town sucks and so my job at this company! #wrongdecisions";

pub const JOB_LOSS_CELL: [u64; K] = [50, 48, 10, 0, 0];
pub const REPUTATION_CELL: [u64; K] = [0, 0, 44, 188, 90];

pub fn table2() -> KnowledgeBase {
    KnowledgeBase::load_snapshot(TABLE2).expect("bundled table loads")
}

/// One criterion's verdict plus supporting lines.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
            notes: Vec::new(),
        }
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

pub fn within(value: f64, target: f64, tol: f64) -> bool {
    (value - target).abs() <= tol
}

/// Multinomial draw as a chain of conditional binomials.
pub fn multinomial(rng: &mut impl Rng, n: u64, p: &[f64; K]) -> [u64; K] {
    let mut out = [0u64; K];
    let mut left = n;
    let mut mass = 1.0;
    for k in 0..K - 1 {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (p[k] / mass).clamp(0.0, 1.0);
        let draw = Binomial::new(left, q).expect("valid binomial").sample(rng);
        out[k] = draw;
        left -= draw;
        mass -= p[k];
    }
    out[K - 1] += left;
    out
}

/// Sample variance of the index over multinomial resamples of a cell.
pub fn resampled_variance(freq: &ConsequenceFrequency, resamples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = freq.proportions().expect("non-empty cell");
    let draws: Vec<f64> = (0..resamples)
        .map(|_| {
            let counts = multinomial(&mut rng, freq.n(), &p);
            criticality_estimate(&counts.into()).expect("non-empty draw")
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64
}

/// The consequence mix of the job-loss cell, rounded.
pub const COVERAGE_MIX: [f64; K] = [0.463, 0.444, 0.093, 0.0, 0.0];

/// One simulated population whose single agent reports every post, so a run
/// of `reports` steps yields exactly that many reports.
pub fn coverage_config(seed: u64, reports: u64, normalization: VarianceNormalization) -> SimConfig {
    SimConfig {
        seed,
        steps: reports,
        trace_every: reports,
        engine: EngineConfig {
            estimator: RiskEstimator::new(0.05).with_normalization(normalization),
            ..EngineConfig::default()
        },
        scenarios: vec![ScenarioSpec {
            id: "office".into(),
            sas: AttributeSet::from([
                SurveillanceAttribute::WorkLocation,
                SurveillanceAttribute::EmploymentStatus,
                SurveillanceAttribute::Negative,
            ]),
            audience: "Work colleagues".into(),
            incidents: vec![IncidentSpec {
                uin: "Job loss".into(),
                probability: 1.0,
                consequences: COVERAGE_MIX,
            }],
        }],
        agents: vec![AgentSpec {
            id: "agent".into(),
            count: 1,
            post_rate: 1.0,
            scenario_mix: BTreeMap::from([("office".to_string(), 1.0)]),
            heed_probability: 0.0,
        }],
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Coverage {
    pub runs: u64,
    pub covered: u64,
    pub mean_n: f64,
}

impl Coverage {
    pub fn rate(&self) -> f64 {
        self.covered as f64 / self.runs as f64
    }
}

/// Runs independent seeded simulations and counts how often the interval
/// contains the closed-form index.
pub fn coverage(runs: u64, reports: u64, normalization: VarianceNormalization) -> Coverage {
    let mut covered = 0;
    let mut total_n = 0;
    for seed in 0..runs {
        let report = run_simulation(&coverage_config(seed, reports, normalization))
            .expect("valid simulation");
        let cell = &report.cells[0];
        total_n += cell.n;
        if cell.covered == Some(true) {
            covered += 1;
        }
    }
    Coverage {
        runs,
        covered,
        mean_n: total_n as f64 / runs as f64,
    }
}
