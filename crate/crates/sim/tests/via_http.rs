//! End-to-end: the simulator drives a live server over HTTP and gets the same
//! report as in-process.

use std::collections::BTreeMap;
use std::sync::Arc;

use sentinel_core::{AttributeSet, KnowledgeBase, Lexicon, SurveillanceAttribute::*};
use sentinel_service::{api, Engine, EngineConfig, Journal};
use sentinel_sim::{
    run_simulation, run_with, AgentSpec, Http, IncidentSpec, ScenarioSpec, SimConfig,
};

fn spawn_server() -> String {
    let engine = Engine::new(
        EngineConfig::default(),
        Arc::new(Lexicon::bundled()),
        KnowledgeBase::new(),
        Journal::Memory(Vec::new()),
    )
    .unwrap();
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, api::router(engine)).await.unwrap();
        });
    });
    format!("http://{}", rx.recv().unwrap())
}

#[test]
fn http_run_matches_in_process_run() {
    let cfg = SimConfig {
        seed: 8,
        steps: 40,
        trace_every: 10,
        engine: EngineConfig::default(),
        scenarios: vec![ScenarioSpec {
            id: "office".into(),
            sas: AttributeSet::from([WorkLocation, Negative]),
            audience: "Work colleagues".into(),
            incidents: vec![IncidentSpec {
                uin: "Job loss".into(),
                probability: 0.5,
                consequences: [0.2, 0.3, 0.3, 0.1, 0.1],
            }],
        }],
        agents: vec![AgentSpec {
            id: "a".into(),
            count: 3,
            post_rate: 1.0,
            scenario_mix: BTreeMap::from([("office".to_string(), 1.0)]),
            heed_probability: 0.3,
        }],
    };
    let url = spawn_server();
    let remote = run_with(&cfg, &mut Http::new(&url)).unwrap();
    let local = run_simulation(&cfg).unwrap();
    assert!(remote.totals.reports > 0);
    assert_eq!(remote, local);
}
