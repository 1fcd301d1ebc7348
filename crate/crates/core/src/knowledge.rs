//! Privacy-heuristics database and its contingency table.
//!
//! A reported regret is matched against stored heuristics with three rules:
//!
//! * **exact**: same attributes, same audience, incident already associated;
//! * **new incident**: same attributes and audience, incident not yet associated;
//! * **absorbing**: the heuristic's attributes are a strict subset of the
//!   report's, same audience, incident already associated.
//!
//! Every matching heuristic receives the report. When none matches, a new
//! heuristic is created from the report.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::criticality::ConsequenceFrequency;
use crate::error::{Error, Result};
use crate::model::{
    AttributeSet, AudienceCircle, AudienceId, HeuristicId, IncidentId, IncidentReport,
    PrivacyHeuristic, UnwantedIncident,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchMode {
    Exact,
    NewIncident,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub heuristic: PrivacyHeuristic,
    pub mode: MatchMode,
    pub created: bool,
}

/// Classifies one heuristic against a reported scenario. The three rules are
/// mutually exclusive.
pub fn classify(
    ph: &PrivacyHeuristic,
    sas: &AttributeSet,
    audience: &AudienceId,
    uin: &IncidentId,
) -> Option<MatchMode> {
    if &ph.audience != audience {
        return None;
    }
    let known = ph.uins.contains(uin);
    if &ph.sas == sas {
        Some(if known {
            MatchMode::Exact
        } else {
            MatchMode::NewIncident
        })
    } else if known && ph.sas.is_strict_subset(sas) {
        Some(MatchMode::Absorbing)
    } else {
        None
    }
}

/// Sparse `(heuristic, incident) → counts` map; missing cells are all zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ContingencyTable {
    cells: BTreeMap<(HeuristicId, IncidentId), ConsequenceFrequency>,
}

impl ContingencyTable {
    pub fn cell(&self, ph: &HeuristicId, uin: &IncidentId) -> ConsequenceFrequency {
        self.cells
            .get(&(ph.clone(), uin.clone()))
            .copied()
            .unwrap_or_default()
    }

    /// Cells in `(heuristic, incident)` order, including explicit zero cells.
    pub fn cells(
        &self,
    ) -> impl Iterator<Item = (&HeuristicId, &IncidentId, &ConsequenceFrequency)> {
        self.cells.iter().map(|((p, u), f)| (p, u, f))
    }

    pub fn row<'a>(
        &'a self,
        ph: &'a HeuristicId,
    ) -> impl Iterator<Item = (&'a IncidentId, &'a ConsequenceFrequency)> + 'a {
        self.cells
            .range((ph.clone(), IncidentId::new(""))..)
            .take_while(move |((p, _), _)| p == ph)
            .map(|((_, u), f)| (u, f))
    }

    /// Sum of every count in the table.
    pub fn grand_total(&self) -> u64 {
        self.cells.values().map(ConsequenceFrequency::n).sum()
    }

    fn ensure(&mut self, ph: &HeuristicId, uin: &IncidentId) -> &mut ConsequenceFrequency {
        self.cells.entry((ph.clone(), uin.clone())).or_default()
    }
}

/// The heuristics store together with the vocabularies it references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeuristicDb {
    heuristics: BTreeMap<HeuristicId, PrivacyHeuristic>,
    by_scenario: BTreeMap<(AttributeSet, AudienceId), HeuristicId>,
    incidents: BTreeMap<IncidentId, UnwantedIncident>,
    audiences: BTreeMap<AudienceId, AudienceCircle>,
    next_seq: u64,
}

impl Default for HeuristicDb {
    fn default() -> Self {
        Self {
            heuristics: BTreeMap::new(),
            by_scenario: BTreeMap::new(),
            incidents: UnwantedIncident::predefined()
                .into_iter()
                .map(|u| (u.id.clone(), u))
                .collect(),
            audiences: AudienceCircle::predefined()
                .into_iter()
                .map(|a| (a.id.clone(), a))
                .collect(),
            next_seq: 1,
        }
    }
}

impl HeuristicDb {
    pub fn len(&self) -> usize {
        self.heuristics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heuristics.is_empty()
    }

    pub fn get(&self, id: &HeuristicId) -> Option<&PrivacyHeuristic> {
        self.heuristics.get(id)
    }

    pub fn heuristics(&self) -> impl Iterator<Item = &PrivacyHeuristic> {
        self.heuristics.values()
    }

    pub fn find(&self, sas: &AttributeSet, audience: &AudienceId) -> Option<&PrivacyHeuristic> {
        self.by_scenario
            .get(&(sas.clone(), audience.clone()))
            .and_then(|id| self.heuristics.get(id))
    }

    pub fn incident(&self, id: &IncidentId) -> Option<&UnwantedIncident> {
        self.incidents.get(id)
    }

    pub fn incidents(&self) -> impl Iterator<Item = &UnwantedIncident> {
        self.incidents.values()
    }

    pub fn audience(&self, id: &AudienceId) -> Option<&AudienceCircle> {
        self.audiences.get(id)
    }

    pub fn audiences(&self) -> impl Iterator<Item = &AudienceCircle> {
        self.audiences.values()
    }

    /// Adds an "Other" incident to the vocabulary; returns the stored entry.
    pub fn register_incident(&mut self, incident: UnwantedIncident) -> &UnwantedIncident {
        self.incidents
            .entry(incident.id.clone())
            .or_insert(incident)
    }

    pub fn register_audience(&mut self, audience: AudienceCircle) -> &AudienceCircle {
        self.audiences
            .entry(audience.id.clone())
            .or_insert(audience)
    }

    /// Every heuristic matching the scenario: exact first, then new-incident,
    /// then absorbing; by id within a mode.
    pub fn match_heuristics(
        &self,
        sas: &AttributeSet,
        audience: &AudienceId,
        uin: &IncidentId,
    ) -> Result<Vec<MatchResult>> {
        if sas.is_empty() {
            return Err(Error::validation(
                "scenario attribute set must not be empty",
            ));
        }
        let mut out: Vec<MatchResult> = self
            .heuristics
            .values()
            .filter_map(|ph| {
                classify(ph, sas, audience, uin).map(|mode| MatchResult {
                    heuristic: ph.clone(),
                    mode,
                    created: false,
                })
            })
            .collect();
        out.sort_by(|a, b| (a.mode, &a.heuristic.id).cmp(&(b.mode, &b.heuristic.id)));
        Ok(out)
    }

    /// Heuristics whose attributes are all disclosed by the post, by id.
    pub fn applicable_heuristics(&self, post_sas: &AttributeSet) -> Vec<&PrivacyHeuristic> {
        self.heuristics
            .values()
            .filter(|ph| ph.sas.is_subset(post_sas))
            .collect()
    }

    /// Creates a heuristic for a scenario nothing matched.
    pub fn add_heuristic(
        &mut self,
        sas: AttributeSet,
        audience: &AudienceId,
        uin: &IncidentId,
    ) -> Result<PrivacyHeuristic> {
        if sas.is_empty() {
            return Err(Error::validation(
                "heuristic attribute set must not be empty",
            ));
        }
        if !self.audiences.contains_key(audience) {
            return Err(Error::NotFound(format!("audience {audience}")));
        }
        if !self.incidents.contains_key(uin) {
            return Err(Error::NotFound(format!("incident {uin}")));
        }
        let key = (sas, audience.clone());
        if let Some(existing) = self.by_scenario.get(&key) {
            return Err(Error::Conflict(format!(
                "heuristic {existing} already covers {} for audience {audience}",
                key.0
            )));
        }
        let id = self.fresh_id();
        let ph = PrivacyHeuristic {
            id: id.clone(),
            sas: key.0.clone(),
            audience: key.1.clone(),
            uins: BTreeSet::from([uin.clone()]),
        };
        self.by_scenario.insert(key, id.clone());
        self.heuristics.insert(id, ph.clone());
        Ok(ph)
    }

    fn fresh_id(&mut self) -> HeuristicId {
        loop {
            let id = HeuristicId::new(format!("ph-{:06}", self.next_seq));
            self.next_seq += 1;
            if !self.heuristics.contains_key(&id) {
                return id;
            }
        }
    }

    fn insert_loaded(&mut self, ph: PrivacyHeuristic) -> Result<()> {
        if ph.sas.is_empty() {
            return Err(Error::Integrity(format!(
                "heuristic {} has no attributes",
                ph.id
            )));
        }
        if !self.audiences.contains_key(&ph.audience) {
            return Err(Error::Integrity(format!(
                "heuristic {} references unknown audience {}",
                ph.id, ph.audience
            )));
        }
        if let Some(u) = ph.uins.iter().find(|u| !self.incidents.contains_key(*u)) {
            return Err(Error::Integrity(format!(
                "heuristic {} references unknown incident {u}",
                ph.id
            )));
        }
        if self.heuristics.contains_key(&ph.id) {
            return Err(Error::Integrity(format!(
                "duplicate heuristic id {}",
                ph.id
            )));
        }
        let key = (ph.sas.clone(), ph.audience.clone());
        if self.by_scenario.contains_key(&key) {
            return Err(Error::Integrity(format!(
                "heuristic {} duplicates the attributes and audience of another",
                ph.id
            )));
        }
        if let Some(seq) = ph
            .id
            .as_str()
            .strip_prefix("ph-")
            .and_then(|s| s.parse::<u64>().ok())
        {
            self.next_seq = self.next_seq.max(seq + 1);
        }
        self.by_scenario.insert(key, ph.id.clone());
        self.heuristics.insert(ph.id.clone(), ph);
        Ok(())
    }
}

/// Heuristics database plus contingency table, mutated together.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KnowledgeBase {
    db: HeuristicDb,
    table: ContingencyTable,
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn db(&self) -> &HeuristicDb {
        &self.db
    }

    pub fn table(&self) -> &ContingencyTable {
        &self.table
    }

    pub fn register_incident(&mut self, incident: UnwantedIncident) -> &UnwantedIncident {
        self.db.register_incident(incident)
    }

    pub fn register_audience(&mut self, audience: AudienceCircle) -> &AudienceCircle {
        self.db.register_audience(audience)
    }

    pub fn match_heuristics(
        &self,
        sas: &AttributeSet,
        audience: &AudienceId,
        uin: &IncidentId,
    ) -> Result<Vec<MatchResult>> {
        self.db.match_heuristics(sas, audience, uin)
    }

    pub fn applicable_heuristics(&self, post_sas: &AttributeSet) -> Vec<&PrivacyHeuristic> {
        self.db.applicable_heuristics(post_sas)
    }

    pub fn add_heuristic(
        &mut self,
        sas: AttributeSet,
        audience: &AudienceId,
        uin: &IncidentId,
    ) -> Result<PrivacyHeuristic> {
        let ph = self.db.add_heuristic(sas, audience, uin)?;
        self.table.ensure(&ph.id, uin);
        Ok(ph)
    }

    /// Incidents observed at least once for `ph`, with their counts.
    pub fn get_uins(
        &self,
        ph: &HeuristicId,
    ) -> Result<Vec<(&UnwantedIncident, ConsequenceFrequency)>> {
        if self.db.get(ph).is_none() {
            return Err(Error::NotFound(format!("heuristic {ph}")));
        }
        Ok(self
            .table
            .row(ph)
            .filter(|(_, f)| !f.is_zero())
            .filter_map(|(u, f)| self.db.incident(u).map(|inc| (inc, *f)))
            .collect())
    }

    /// Applies a regretted report: every matching heuristic's cell for the
    /// reported incident is incremented at the reported consequence level, or
    /// a new heuristic is created when nothing matches. All-or-nothing.
    pub fn record_incident(
        &mut self,
        report: &IncidentReport,
        sas: &AttributeSet,
    ) -> Result<Vec<MatchResult>> {
        let (uin, audience, level) = report.details().ok_or(Error::NotRegretted)?;
        if sas.is_empty() {
            return Err(Error::validation(
                "a report needs the attributes disclosed by the deleted post",
            ));
        }

        let matches = self.db.match_heuristics(sas, &audience.id, &uin.id)?;
        self.db.register_incident(uin.clone());
        self.db.register_audience(audience.clone());

        if matches.is_empty() {
            let ph = self.add_heuristic(sas.clone(), &audience.id, &uin.id)?;
            self.table.ensure(&ph.id, &uin.id).increment(level);
            return Ok(vec![MatchResult {
                heuristic: ph,
                mode: MatchMode::Exact,
                created: true,
            }]);
        }

        let mut applied = Vec::with_capacity(matches.len());
        for mut m in matches {
            let ph = self
                .db
                .heuristics
                .get_mut(&m.heuristic.id)
                .expect("matched heuristic exists");
            ph.uins.insert(uin.id.clone());
            m.heuristic = ph.clone();
            self.table.ensure(&m.heuristic.id, &uin.id).increment(level);
            applied.push(m);
        }
        Ok(applied)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            version: SNAPSHOT_VERSION,
            heuristics: self.db.heuristics.values().cloned().collect(),
            incidents: self.db.incidents.values().cloned().collect(),
            audiences: self.db.audiences.values().cloned().collect(),
            cells: self
                .table
                .cells()
                .map(|(ph, uin, f)| CellRecord {
                    ph: ph.clone(),
                    uin: uin.clone(),
                    counts: f.counts().map(|c| c as i64),
                })
                .collect(),
        }
    }

    /// Deterministic JSON encoding of the whole knowledge base.
    pub fn snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn load_snapshot(bytes: &[u8]) -> Result<KnowledgeBase> {
        let snap: Snapshot = serde_json::from_slice(bytes).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_snapshot(snap)
    }

    pub fn from_snapshot(snap: Snapshot) -> Result<KnowledgeBase> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        let mut db = HeuristicDb {
            heuristics: BTreeMap::new(),
            by_scenario: BTreeMap::new(),
            incidents: BTreeMap::new(),
            audiences: BTreeMap::new(),
            next_seq: 1,
        };
        for inc in snap.incidents {
            if db.incidents.insert(inc.id.clone(), inc).is_some() {
                return Err(Error::Integrity("duplicate incident id".into()));
            }
        }
        for aud in snap.audiences {
            if db.audiences.insert(aud.id.clone(), aud).is_some() {
                return Err(Error::Integrity("duplicate audience id".into()));
            }
        }
        for ph in snap.heuristics {
            db.insert_loaded(ph)?;
        }

        let mut table = ContingencyTable::default();
        for cell in snap.cells {
            let Some(ph) = db.get(&cell.ph) else {
                return Err(Error::Integrity(format!(
                    "cell references unknown heuristic {}",
                    cell.ph
                )));
            };
            if db.incident(&cell.uin).is_none() {
                return Err(Error::Integrity(format!(
                    "cell references unknown incident {}",
                    cell.uin
                )));
            }
            let mut counts = [0u64; crate::model::K];
            for (slot, c) in counts.iter_mut().zip(cell.counts) {
                *slot = u64::try_from(c).map_err(|_| {
                    Error::Integrity(format!(
                        "negative count {c} in cell ({}, {})",
                        cell.ph, cell.uin
                    ))
                })?;
            }
            let freq = ConsequenceFrequency::new(counts);
            if !freq.is_zero() && !ph.uins.contains(&cell.uin) {
                return Err(Error::Integrity(format!(
                    "heuristic {} has counts for {} but does not list it",
                    cell.ph, cell.uin
                )));
            }
            if table
                .cells
                .insert((cell.ph.clone(), cell.uin.clone()), freq)
                .is_some()
            {
                return Err(Error::Integrity(format!(
                    "duplicate cell ({}, {})",
                    cell.ph, cell.uin
                )));
            }
        }
        Ok(KnowledgeBase { db, table })
    }
}

pub const SNAPSHOT_VERSION: u32 = 1;

/// Serialized knowledge base. Arrays are sorted by id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub version: u32,
    pub heuristics: Vec<PrivacyHeuristic>,
    pub incidents: Vec<UnwantedIncident>,
    pub audiences: Vec<AudienceCircle>,
    pub cells: Vec<CellRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub ph: HeuristicId,
    pub uin: IncidentId,
    /// Catastrophic first. Signed so that corrupt input is reported as an
    /// integrity error rather than a type error.
    pub counts: [i64; crate::model::K],
}
