//! Event-sourced engine: every command is validated against the current
//! state, turned into events, written ahead to the journal, then applied.
//! Replaying the journal over the same base knowledge reproduces the state.

use std::collections::BTreeMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use sentinel_core::knowledge::Snapshot;
use sentinel_core::model::canonical_id;
use sentinel_core::{
    extract_sas, generate_warning, parse_consequence, publish_or_retract, record_user_action,
    AttributeSet, AudienceCircle, AudienceId, ConsequenceFrequency, CriticalityResult, Decision,
    HeuristicId, IncidentId, IncidentReport, KnowledgeBase, Lexicon, MatchMode, MatchResult, Post,
    PostId, PostStatus, PrivacyHeuristic, RenderedWarning, RiskEstimator, ThresholdConfig,
    ThresholdState, UnwantedIncident, UserAction, UserId, WarningMessage,
};
use serde::{Deserialize, Serialize};

use crate::events::{Event, EventRecord, Journal};

pub const ENGINE_SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Core(#[from] sentinel_core::Error),
    #[error("event log i/o: {0}")]
    Journal(#[from] std::io::Error),
    #[error("replay failed: {0}")]
    Replay(String),
}

pub type EngineResult<T> = Result<T, EngineError>;

/// Tunables shared by the service and the simulator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub thresholds: ThresholdConfig,
    pub estimator: RiskEstimator,
}

impl EngineConfig {
    pub fn validate(&self) -> sentinel_core::Result<()> {
        self.thresholds.validate()?;
        self.estimator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewPost {
    pub user_id: String,
    pub text: String,
    pub declared_audience: String,
    #[serde(default)]
    pub annotations: Option<AttributeSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostCreated {
    pub post_id: PostId,
    pub status: ComposeStatus,
    pub warning: RenderedWarning,
}

/// A new post either waits for a decision on its warning or is out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ComposeStatus {
    Pending,
    Published,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionOutcome {
    pub status: PostStatus,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeleteOutcome {
    pub prompt_incident_report: bool,
    pub detected_sas: AttributeSet,
}

/// The incident-report dialog as submitted. Incidents and audiences are given
/// by id or label; unknown ones are added to the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRequest {
    pub post_id: String,
    pub regretted: bool,
    #[serde(default)]
    pub uin: Option<String>,
    #[serde(default)]
    pub unintended_audience: Option<String>,
    #[serde(default)]
    pub consequence_level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSummary {
    pub ph_id: HeuristicId,
    pub mode: MatchMode,
    pub created: bool,
}

impl From<&MatchResult> for MatchSummary {
    fn from(m: &MatchResult) -> Self {
        Self {
            ph_id: m.heuristic.id.clone(),
            mode: m.mode,
            created: m.created,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOutcome {
    pub matches: Vec<MatchSummary>,
}

/// Everything the engine knows about one post.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostRecord {
    pub post: Post,
    pub warning: Option<WarningMessage>,
    pub detected_sas: Option<AttributeSet>,
    pub prompted: bool,
    pub report: Option<ReportOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserThreshold {
    pub user_id: UserId,
    pub threshold: ThresholdState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskIndex {
    pub ph: HeuristicId,
    pub uin: IncidentId,
    pub counts: ConsequenceFrequency,
    #[serde(flatten)]
    pub result: CriticalityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellView {
    pub ph: HeuristicId,
    pub uin: IncidentId,
    pub counts: ConsequenceFrequency,
    pub n: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableView {
    pub incidents: Vec<UnwantedIncident>,
    pub cells: Vec<CellView>,
}

/// Full engine state in a deterministic encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub version: u32,
    pub last_seq: u64,
    pub posts_created: u64,
    pub knowledge: Snapshot,
    pub posts: Vec<PostRecord>,
    pub users: Vec<UserThreshold>,
}

#[derive(Debug)]
pub struct Engine {
    config: EngineConfig,
    lexicon: Arc<Lexicon>,
    kb: KnowledgeBase,
    posts: BTreeMap<PostId, PostRecord>,
    users: BTreeMap<UserId, ThresholdState>,
    posts_created: u64,
    last_seq: u64,
    journal: Journal,
}

impl Engine {
    pub fn new(
        config: EngineConfig,
        lexicon: Arc<Lexicon>,
        kb: KnowledgeBase,
        journal: Journal,
    ) -> EngineResult<Self> {
        config.validate()?;
        Ok(Self {
            config,
            lexicon,
            kb,
            posts: BTreeMap::new(),
            users: BTreeMap::new(),
            posts_created: 0,
            last_seq: 0,
            journal,
        })
    }

    /// Rebuilds the state from `base` and a log, then attaches `journal` for
    /// further commands.
    pub fn replay(
        config: EngineConfig,
        lexicon: Arc<Lexicon>,
        base: KnowledgeBase,
        records: impl IntoIterator<Item = EventRecord>,
        journal: Journal,
    ) -> EngineResult<Self> {
        let mut engine = Self::new(config, lexicon, base, Journal::Discard)?;
        for record in records {
            engine.apply(&record)?;
        }
        engine.journal = journal;
        Ok(engine)
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn knowledge(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    pub fn post(&self, id: &PostId) -> Option<&PostRecord> {
        self.posts.get(id)
    }

    /// The user's current threshold, or the configured initial one for a
    /// user that has not posted yet.
    pub fn phi(&self, user: &UserId) -> f64 {
        self.users
            .get(user)
            .map_or(self.config.thresholds.phi_initial, |s| s.phi)
    }

    pub fn threshold(&self, user: &UserId) -> EngineResult<ThresholdState> {
        self.users
            .get(user)
            .copied()
            .ok_or_else(|| not_found(format!("user {user}")))
    }

    pub fn heuristics(&self) -> Vec<PrivacyHeuristic> {
        self.kb.db().heuristics().cloned().collect()
    }

    pub fn table(&self) -> TableView {
        TableView {
            incidents: self.kb.db().incidents().cloned().collect(),
            cells: self
                .kb
                .table()
                .cells()
                .map(|(ph, uin, f)| CellView {
                    ph: ph.clone(),
                    uin: uin.clone(),
                    counts: *f,
                    n: f.n(),
                })
                .collect(),
        }
    }

    /// Scores one cell; `alpha` overrides the configured level.
    pub fn risk_index(&self, ph: &str, uin: &str, alpha: Option<f64>) -> EngineResult<RiskIndex> {
        let ph = HeuristicId::new(ph.trim());
        let uin = IncidentId::new(canonical_id(uin));
        if self.kb.db().get(&ph).is_none() {
            return Err(not_found(format!("heuristic {ph}")));
        }
        if self.kb.db().incident(&uin).is_none() {
            return Err(not_found(format!("incident {uin}")));
        }
        let mut estimator = self.config.estimator;
        if let Some(alpha) = alpha {
            estimator.alpha = alpha;
        }
        let counts = self.kb.table().cell(&ph, &uin);
        let result = estimator.assess(&counts)?;
        Ok(RiskIndex {
            ph,
            uin,
            counts,
            result,
        })
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            version: ENGINE_SNAPSHOT_VERSION,
            last_seq: self.last_seq,
            posts_created: self.posts_created,
            knowledge: self.kb.snapshot(),
            posts: self.posts.values().cloned().collect(),
            users: self
                .users
                .iter()
                .map(|(id, s)| UserThreshold {
                    user_id: id.clone(),
                    threshold: *s,
                })
                .collect(),
        }
    }

    pub fn snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    // ---- commands ----------------------------------------------------------

    /// Composes a draft and raises its warning; a draft without warning items
    /// is published immediately.
    pub fn create_post(&mut self, req: NewPost, at: DateTime<Utc>) -> EngineResult<PostCreated> {
        let user_id = req.user_id.trim();
        if user_id.is_empty() {
            return Err(validation("user_id must not be blank"));
        }
        let audience = AudienceId::new(canonical_id(&req.declared_audience));
        if self.kb.db().audience(&audience).is_none() {
            return Err(not_found(format!("audience {:?}", req.declared_audience)));
        }
        if req.annotations.as_ref().is_some_and(|a| a.is_empty()) {
            return Err(validation("annotations, when given, must not be empty"));
        }

        let user_id = UserId::new(user_id);
        let post_id = PostId::new(format!("post-{:06}", self.posts_created + 1));
        let mut draft = Post::draft(
            post_id.clone(),
            user_id.clone(),
            &req.text,
            audience.clone(),
            at,
        );
        draft.annotations = req.annotations.clone();
        let warning = generate_warning(
            &draft,
            &self.kb,
            self.phi(&user_id),
            &self.config.estimator,
            &self.lexicon,
        );
        let rendered = warning.render();

        self.commit(
            at,
            vec![
                Event::PostCreated {
                    post_id: post_id.clone(),
                    user_id,
                    text: req.text,
                    declared_audience: audience,
                    annotations: req.annotations,
                },
                Event::WarningRaised { warning },
            ],
        )?;
        let status = match self.posts[&post_id].post.status {
            PostStatus::Draft => ComposeStatus::Pending,
            _ => ComposeStatus::Published,
        };
        Ok(PostCreated {
            status,
            post_id,
            warning: rendered,
        })
    }

    /// Resolves a pending warning.
    pub fn decide(
        &mut self,
        post_id: &str,
        action: Decision,
        at: DateTime<Utc>,
    ) -> EngineResult<DecisionOutcome> {
        let record = self.lookup(post_id)?;
        if record.post.status != PostStatus::Draft {
            return Err(conflict(format!(
                "post {post_id} is {}, not pending",
                record.post.status
            )));
        }
        let post_id = record.post.id.clone();
        let user_id = record.post.author.clone();
        let mut state = self.users[&user_id];

        let mut events = vec![Event::UserAction {
            post_id: post_id.clone(),
            action,
        }];
        if let Some(adjustment) = state.record(action) {
            events.push(Event::ThresholdAdjusted {
                user_id: user_id.clone(),
                adjustment,
            });
        }
        self.commit(at, events)?;
        Ok(DecisionOutcome {
            status: self.posts[&post_id].post.status,
            phi: self.users[&user_id].phi,
        })
    }

    /// Deletes a published post and decides whether to ask for a report.
    pub fn delete_post(&mut self, post_id: &str, at: DateTime<Utc>) -> EngineResult<DeleteOutcome> {
        let record = self.lookup(post_id)?;
        if record.post.status != PostStatus::Published {
            return Err(conflict(format!(
                "post {post_id} is {}, only published posts can be deleted",
                record.post.status
            )));
        }
        let post_id = record.post.id.clone();
        let detected_sas = extract_sas(&record.post, &self.lexicon);
        let prompt = !detected_sas.is_empty();
        self.commit(
            at,
            vec![Event::PostDeleted {
                post_id,
                detected_sas: detected_sas.clone(),
                prompt,
            }],
        )?;
        Ok(DeleteOutcome {
            prompt_incident_report: prompt,
            detected_sas,
        })
    }

    /// Accepts the single incident report allowed for a prompted deletion.
    pub fn report_incident(
        &mut self,
        req: ReportRequest,
        at: DateTime<Utc>,
    ) -> EngineResult<ReportOutcome> {
        let post_id = PostId::new(req.post_id.trim());
        let consequence = req
            .consequence_level
            .as_deref()
            .map(parse_consequence)
            .transpose()?;
        let uin = req
            .uin
            .as_deref()
            .map(|label| self.resolve_incident(label))
            .transpose()?;
        let audience = req
            .unintended_audience
            .as_deref()
            .map(|label| self.resolve_audience(label))
            .transpose()?;
        let report =
            IncidentReport::new(post_id.clone(), req.regretted, uin, audience, consequence)?;

        let record = self.lookup(post_id.as_str())?;
        if record.post.status != PostStatus::Deleted || !record.prompted {
            return Err(conflict(format!(
                "post {post_id} was not deleted with a report prompt"
            )));
        }
        if record.report.is_some() {
            return Err(conflict(format!("post {post_id} already has a report")));
        }

        let applied = self.commit(at, vec![Event::IncidentReported { report }])?;
        Ok(applied
            .into_iter()
            .flatten()
            .next()
            .unwrap_or(ReportOutcome {
                matches: Vec::new(),
            }))
    }

    fn resolve_incident(&self, label: &str) -> EngineResult<UnwantedIncident> {
        let custom = UnwantedIncident::custom(label)?;
        Ok(self.kb.db().incident(&custom.id).cloned().unwrap_or(custom))
    }

    fn resolve_audience(&self, label: &str) -> EngineResult<AudienceCircle> {
        let custom = AudienceCircle::custom(label)?;
        Ok(self.kb.db().audience(&custom.id).cloned().unwrap_or(custom))
    }

    fn lookup(&self, post_id: &str) -> EngineResult<&PostRecord> {
        self.posts
            .get(&PostId::new(post_id.trim()))
            .ok_or_else(|| not_found(format!("post {post_id}")))
    }

    // ---- write-ahead and apply ----------------------------------------------

    fn commit(
        &mut self,
        at: DateTime<Utc>,
        events: Vec<Event>,
    ) -> EngineResult<Vec<Option<ReportOutcome>>> {
        let records: Vec<EventRecord> = events
            .into_iter()
            .zip(self.last_seq + 1..)
            .map(|(event, seq)| EventRecord { seq, at, event })
            .collect();
        self.journal.append(&records)?;
        records.iter().map(|r| self.apply(r)).collect()
    }

    /// Applies one logged event. Used both live and during replay, so it
    /// re-checks everything it relies on.
    fn apply(&mut self, record: &EventRecord) -> EngineResult<Option<ReportOutcome>> {
        if record.seq != self.last_seq + 1 {
            return Err(EngineError::Replay(format!(
                "expected seq {}, found {}",
                self.last_seq + 1,
                record.seq
            )));
        }
        let mut outcome = None;
        match &record.event {
            Event::PostCreated {
                post_id,
                user_id,
                text,
                declared_audience,
                annotations,
            } => {
                if self.posts.contains_key(post_id) {
                    return Err(EngineError::Replay(format!("post {post_id} created twice")));
                }
                let mut post = Post::draft(
                    post_id.clone(),
                    user_id.clone(),
                    text.as_str(),
                    declared_audience.clone(),
                    record.at,
                );
                post.annotations = annotations.clone();
                if !self.users.contains_key(user_id) {
                    let state = ThresholdState::new(&self.config.thresholds)?;
                    self.users.insert(user_id.clone(), state);
                }
                self.posts.insert(
                    post_id.clone(),
                    PostRecord {
                        post,
                        warning: None,
                        detected_sas: None,
                        prompted: false,
                        report: None,
                    },
                );
                self.posts_created += 1;
            }
            Event::WarningRaised { warning } => {
                let entry = self.replay_post(&warning.post_id)?;
                if warning.is_empty() {
                    entry.post.publish()?;
                }
                entry.warning = Some(warning.clone());
            }
            Event::UserAction { post_id, action } => {
                let entry = self.replay_post(post_id)?;
                let warning = entry
                    .warning
                    .clone()
                    .ok_or_else(|| EngineError::Replay(format!("post {post_id} has no warning")))?;
                entry.post = publish_or_retract(&entry.post, *action)?;
                let user = entry.post.author.clone();
                let state = self.users.get_mut(&user).expect("author is registered");
                let action = UserAction {
                    post_id: post_id.clone(),
                    action: *action,
                    at: record.at,
                };
                *state = record_user_action(&action, &warning, state)?;
            }
            Event::ThresholdAdjusted {
                user_id,
                adjustment,
            } => {
                let state = self
                    .users
                    .get(user_id)
                    .ok_or_else(|| EngineError::Replay(format!("unknown user {user_id}")))?;
                if state.decisions_in_window != 0 || state.phi != adjustment.phi_after {
                    return Err(EngineError::Replay(format!(
                        "threshold of {user_id} diverged from the log"
                    )));
                }
            }
            Event::PostDeleted {
                post_id,
                detected_sas,
                prompt,
            } => {
                let entry = self.replay_post(post_id)?;
                entry.post.delete()?;
                entry.detected_sas = Some(detected_sas.clone());
                entry.prompted = *prompt;
            }
            Event::IncidentReported { report } => {
                let post_id = report.post_id().clone();
                let sas = {
                    let entry = self.replay_post(&post_id)?;
                    if entry.report.is_some() || !entry.prompted {
                        return Err(EngineError::Replay(format!(
                            "report for post {post_id} is not acceptable"
                        )));
                    }
                    entry.detected_sas.clone().unwrap_or_default()
                };
                let matches = if report.is_regretted() {
                    self.kb
                        .record_incident(report, &sas)?
                        .iter()
                        .map(MatchSummary::from)
                        .collect()
                } else {
                    Vec::new()
                };
                let result = ReportOutcome { matches };
                self.replay_post(&post_id)?.report = Some(result.clone());
                outcome = Some(result);
            }
        }
        self.last_seq = record.seq;
        Ok(outcome)
    }

    fn replay_post(&mut self, id: &PostId) -> EngineResult<&mut PostRecord> {
        self.posts
            .get_mut(id)
            .ok_or_else(|| EngineError::Replay(format!("unknown post {id}")))
    }
}

fn validation(msg: impl Into<String>) -> EngineError {
    sentinel_core::Error::Validation(msg.into()).into()
}

fn not_found(msg: impl Into<String>) -> EngineError {
    sentinel_core::Error::NotFound(msg.into()).into()
}

fn conflict(msg: impl Into<String>) -> EngineError {
    sentinel_core::Error::Conflict(msg.into()).into()
}
