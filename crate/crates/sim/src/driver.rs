//! What the simulation talks to: the engine in-process, or a running
//! service over HTTP.

use std::sync::Arc;

use chrono::{DateTime, Utc};
use sentinel_core::{
    AttributeSet, AudienceCircle, ConsequenceFrequency, Decision, HeuristicId, KnowledgeBase,
    Lexicon, PrivacyHeuristic, UnwantedIncident, UserId,
};
use sentinel_service::engine::{
    DecisionOutcome, DeleteOutcome, NewPost, PostCreated, ReportOutcome, ReportRequest, TableView,
    UserThreshold,
};
use sentinel_service::{Engine, EngineConfig, Journal};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::SimError;

pub trait Driver {
    fn create_post(&mut self, req: NewPost, at: DateTime<Utc>) -> Result<PostCreated, SimError>;
    fn decide(
        &mut self,
        post_id: &str,
        action: Decision,
        at: DateTime<Utc>,
    ) -> Result<DecisionOutcome, SimError>;
    fn delete_post(&mut self, post_id: &str, at: DateTime<Utc>) -> Result<DeleteOutcome, SimError>;
    fn report(&mut self, req: ReportRequest, at: DateTime<Utc>) -> Result<ReportOutcome, SimError>;
    /// The heuristic stored for exactly this scenario and its counts for the
    /// incident, if any.
    fn cell(
        &mut self,
        sas: &AttributeSet,
        audience: &str,
        uin: &str,
    ) -> Result<Option<(HeuristicId, ConsequenceFrequency)>, SimError>;
    fn phi(&mut self, user: &str) -> Result<f64, SimError>;
}

/// Drives a private engine through its library surface.
pub struct InProcess {
    engine: Engine,
}

impl InProcess {
    /// A fresh engine with an empty knowledge base.
    pub fn new(config: EngineConfig) -> Result<Self, SimError> {
        let engine = Engine::new(
            config,
            Arc::new(Lexicon::bundled()),
            KnowledgeBase::new(),
            Journal::Discard,
        )?;
        Ok(Self { engine })
    }

    pub fn with_engine(engine: Engine) -> Self {
        Self { engine }
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }

    pub fn into_engine(self) -> Engine {
        self.engine
    }
}

impl Driver for InProcess {
    fn create_post(&mut self, req: NewPost, at: DateTime<Utc>) -> Result<PostCreated, SimError> {
        Ok(self.engine.create_post(req, at)?)
    }

    fn decide(
        &mut self,
        post_id: &str,
        action: Decision,
        at: DateTime<Utc>,
    ) -> Result<DecisionOutcome, SimError> {
        Ok(self.engine.decide(post_id, action, at)?)
    }

    fn delete_post(&mut self, post_id: &str, at: DateTime<Utc>) -> Result<DeleteOutcome, SimError> {
        Ok(self.engine.delete_post(post_id, at)?)
    }

    fn report(&mut self, req: ReportRequest, at: DateTime<Utc>) -> Result<ReportOutcome, SimError> {
        Ok(self.engine.report_incident(req, at)?)
    }

    fn cell(
        &mut self,
        sas: &AttributeSet,
        audience: &str,
        uin: &str,
    ) -> Result<Option<(HeuristicId, ConsequenceFrequency)>, SimError> {
        let kb = self.engine.knowledge();
        let audience = AudienceCircle::custom(audience)?.id;
        let uin = UnwantedIncident::custom(uin)?.id;
        Ok(kb
            .db()
            .find(sas, &audience)
            .map(|ph| (ph.id.clone(), kb.table().cell(&ph.id, &uin))))
    }

    fn phi(&mut self, user: &str) -> Result<f64, SimError> {
        Ok(self.engine.phi(&UserId::new(user)))
    }
}

/// Drives a running service. Used as an end-to-end smoke test; results are
/// only reproducible against a freshly started server.
pub struct Http {
    base: String,
    client: reqwest::blocking::Client,
}

impl Http {
    pub fn new(base_url: &str) -> Self {
        Self {
            base: base_url.trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::new(),
        }
    }

    fn url(&self, path: &str) -> String {
        format!("{}/api/v1{path}", self.base)
    }

    fn send<T: DeserializeOwned>(
        &self,
        what: &str,
        req: reqwest::blocking::RequestBuilder,
    ) -> Result<T, SimError> {
        let err = |e: reqwest::Error| SimError::Http(format!("{what}: {e}"));
        let resp = req.send().map_err(err)?;
        let status = resp.status();
        let text = resp.text().map_err(err)?;
        if !status.is_success() {
            return Err(SimError::Http(format!("{what}: {status}: {text}")));
        }
        serde_json::from_str(&text).map_err(|e| SimError::Http(format!("{what}: {e}")))
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<T, SimError> {
        self.send(path, self.client.post(self.url(path)).json(body))
    }

    fn get<T: DeserializeOwned>(&self, path: &str) -> Result<T, SimError> {
        self.send(path, self.client.get(self.url(path)))
    }
}

impl Driver for Http {
    fn create_post(&mut self, req: NewPost, _at: DateTime<Utc>) -> Result<PostCreated, SimError> {
        self.post("/posts", &req)
    }

    fn decide(
        &mut self,
        post_id: &str,
        action: Decision,
        _at: DateTime<Utc>,
    ) -> Result<DecisionOutcome, SimError> {
        self.post(
            &format!("/posts/{post_id}/decision"),
            &serde_json::json!({ "action": action }),
        )
    }

    fn delete_post(
        &mut self,
        post_id: &str,
        _at: DateTime<Utc>,
    ) -> Result<DeleteOutcome, SimError> {
        let path = format!("/posts/{post_id}");
        self.send(&path, self.client.delete(self.url(&path)))
    }

    fn report(
        &mut self,
        req: ReportRequest,
        _at: DateTime<Utc>,
    ) -> Result<ReportOutcome, SimError> {
        self.post("/incident-reports", &req)
    }

    fn cell(
        &mut self,
        sas: &AttributeSet,
        audience: &str,
        uin: &str,
    ) -> Result<Option<(HeuristicId, ConsequenceFrequency)>, SimError> {
        let audience = AudienceCircle::custom(audience)?.id;
        let uin = UnwantedIncident::custom(uin)?.id;
        let heuristics: Vec<PrivacyHeuristic> = self.get("/heuristics")?;
        let Some(ph) = heuristics
            .into_iter()
            .find(|ph| &ph.sas == sas && ph.audience == audience)
        else {
            return Ok(None);
        };
        let table: TableView = self.get("/contingency-table")?;
        let counts = table
            .cells
            .into_iter()
            .find(|c| c.ph == ph.id && c.uin == uin)
            .map_or_else(ConsequenceFrequency::zero, |c| c.counts);
        Ok(Some((ph.id, counts)))
    }

    fn phi(&mut self, user: &str) -> Result<f64, SimError> {
        let t: UserThreshold = self.get(&format!("/users/{user}/threshold"))?;
        Ok(t.threshold.phi)
    }
}
