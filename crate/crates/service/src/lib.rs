//! Event-sourced engine and HTTP facade for adaptive privacy warnings.
//!
//! The engine runs the whole loop: compose a post, warn, record the
//! decision, delete, collect an incident report, update the knowledge base.
//! Each state change is first appended to a JSON-lines event log; replaying
//! the log over the same base knowledge reproduces the state exactly.

pub mod api;
pub mod config;
pub mod engine;
pub mod events;

use std::sync::Arc;

use sentinel_core::{load_lexicon, KnowledgeBase, Lexicon};

pub use config::{ConfigError, ServiceConfig};
pub use engine::{Engine, EngineConfig, EngineError, EngineSnapshot};
pub use events::{Event, EventRecord, Journal};

/// Lexicon and base knowledge named by the configuration.
pub fn load_inputs(cfg: &ServiceConfig) -> anyhow::Result<(Arc<Lexicon>, KnowledgeBase)> {
    use anyhow::Context;

    let lexicon = match &cfg.lexicon_path {
        Some(path) => {
            let file = std::fs::File::open(path)
                .with_context(|| format!("opening lexicon {}", path.display()))?;
            load_lexicon(file).with_context(|| format!("loading lexicon {}", path.display()))?
        }
        None => Lexicon::bundled(),
    };
    let kb = match &cfg.snapshot_path {
        Some(path) => {
            let bytes = std::fs::read(path)
                .with_context(|| format!("reading snapshot {}", path.display()))?;
            KnowledgeBase::load_snapshot(&bytes)
                .with_context(|| format!("loading snapshot {}", path.display()))?
        }
        None => KnowledgeBase::new(),
    };
    Ok((Arc::new(lexicon), kb))
}

/// Builds the engine for a configuration: replays an existing log, then keeps
/// appending to it. Without a log path the events are kept in memory.
pub fn bootstrap(cfg: &ServiceConfig) -> anyhow::Result<Engine> {
    let (lexicon, kb) = load_inputs(cfg)?;
    let engine_cfg = cfg.engine_config();
    let engine = match &cfg.log_path {
        Some(path) => {
            let records = if path.exists() {
                events::read_log(path)?
            } else {
                Vec::new()
            };
            Engine::replay(engine_cfg, lexicon, kb, records, Journal::open(path)?)?
        }
        None => Engine::new(engine_cfg, lexicon, kb, Journal::Memory(Vec::new()))?,
    };
    Ok(engine)
}

/// Rebuilds the state from the configured log without opening it for writing.
pub fn replay_only(cfg: &ServiceConfig) -> anyhow::Result<Engine> {
    let (lexicon, kb) = load_inputs(cfg)?;
    let path = cfg
        .log_path
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("no log_path configured"))?;
    let records = events::read_log(path)?;
    Ok(Engine::replay(
        cfg.engine_config(),
        lexicon,
        kb,
        records,
        Journal::Discard,
    )?)
}
