//! Adaptive warnings.
//!
//! A draft is scored against every applicable heuristic; each associated
//! incident whose severity (upper confidence bound) reaches the user's
//! threshold `phi` becomes a warning item. The threshold adapts to how the
//! user reacts: after every `tau` warning decisions, `phi` moves up by `delta`
//! when warnings were mostly ignored and down by `delta` when they were mostly
//! heeded.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::content::{extract_sas, Lexicon};
use crate::criticality::RiskEstimator;
use crate::error::{Error, Result};
use crate::knowledge::KnowledgeBase;
use crate::model::{AudienceId, IncidentId, Post, PostId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub phi_initial: f64,
    pub delta: f64,
    pub tau: u32,
    pub phi_min: f64,
    pub phi_max: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            phi_initial: 0.5,
            delta: 0.05,
            tau: 10,
            phi_min: 0.05,
            phi_max: 0.95,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !unit(self.phi_min) || !unit(self.phi_max) || self.phi_min > self.phi_max {
            return Err(Error::validation(
                "phi bounds must satisfy 0 <= phi_min <= phi_max <= 1",
            ));
        }
        if !(self.phi_min..=self.phi_max).contains(&self.phi_initial) {
            return Err(Error::validation(
                "phi_initial must lie within [phi_min, phi_max]",
            ));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::validation("delta must be positive"));
        }
        if self.tau == 0 {
            return Err(Error::validation("tau must be at least 1"));
        }
        Ok(())
    }
}

/// Per-user risk threshold and the current adaptation window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub phi: f64,
    pub delta: f64,
    pub tau: u32,
    pub phi_min: f64,
    pub phi_max: f64,
    pub accepted: u32,
    pub ignored: u32,
    pub decisions_in_window: u32,
}

impl ThresholdState {
    pub fn new(config: &ThresholdConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            phi: config.phi_initial,
            delta: config.delta,
            tau: config.tau,
            phi_min: config.phi_min,
            phi_max: config.phi_max,
            accepted: 0,
            ignored: 0,
            decisions_in_window: 0,
        })
    }

    /// Counts one decision; closes the window after `tau` of them.
    pub fn record(&mut self, decision: Decision) -> Option<ThresholdAdjustment> {
        match decision {
            Decision::Publish => self.ignored += 1,
            Decision::Retract => self.accepted += 1,
        }
        self.decisions_in_window += 1;
        if self.decisions_in_window < self.tau {
            return None;
        }

        let before = self.phi;
        if self.ignored > self.accepted {
            self.phi = (self.phi + self.delta).min(self.phi_max);
        } else if self.ignored < self.accepted {
            self.phi = (self.phi - self.delta).max(self.phi_min);
        }
        let adjustment = ThresholdAdjustment {
            phi_before: before,
            phi_after: self.phi,
            accepted: self.accepted,
            ignored: self.ignored,
        };
        self.accepted = 0;
        self.ignored = 0;
        self.decisions_in_window = 0;
        Some(adjustment)
    }
}

/// Outcome of a closed window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAdjustment {
    pub phi_before: f64,
    pub phi_after: f64,
    pub accepted: u32,
    pub ignored: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    /// Publish despite the warning.
    Publish,
    /// Heed the warning and withdraw the draft.
    Retract,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAction {
    pub post_id: PostId,
    pub action: Decision,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningItem {
    pub uin: IncidentId,
    pub uin_label: String,
    pub audience: AudienceId,
    pub audience_label: String,
    pub severity: f64,
}

/// Risks to show before publishing. Items are sorted by severity, highest
/// first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningMessage {
    pub post_id: PostId,
    pub items: Vec<WarningItem>,
}

impl WarningMessage {
    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// The wire form: labels only, severities rounded to three decimals.
    pub fn render(&self) -> RenderedWarning {
        RenderedWarning {
            post_id: self.post_id.clone(),
            items: self
                .items
                .iter()
                .map(|i| RenderedItem {
                    uin: i.uin_label.clone(),
                    audience: i.audience_label.clone(),
                    severity: (i.severity * 1000.0).round() / 1000.0,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedWarning {
    pub post_id: PostId,
    pub items: Vec<RenderedItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderedItem {
    pub uin: String,
    pub audience: String,
    pub severity: f64,
}

/// Builds the warning for a draft without touching any state.
///
/// Cells with fewer reports than the estimator's `n_min` are skipped. When
/// several heuristics yield the same (incident, audience) pair the highest
/// severity is kept. The audience reported is the heuristic's, not the
/// post's declared one.
pub fn generate_warning(
    post: &Post,
    kb: &KnowledgeBase,
    phi: f64,
    estimator: &RiskEstimator,
    lexicon: &Lexicon,
) -> WarningMessage {
    let sas = extract_sas(post, lexicon);
    let mut best: BTreeMap<(IncidentId, AudienceId), WarningItem> = BTreeMap::new();

    for ph in kb.applicable_heuristics(&sas) {
        let Ok(uins) = kb.get_uins(&ph.id) else {
            continue;
        };
        for (uin, freq) in uins {
            let Ok(severity) = estimator.severity(&freq) else {
                continue;
            };
            if severity < phi {
                continue;
            }
            let audience_label = kb
                .db()
                .audience(&ph.audience)
                .map(|a| a.label.clone())
                .unwrap_or_else(|| ph.audience.to_string());
            let item = WarningItem {
                uin: uin.id.clone(),
                uin_label: uin.label.clone(),
                audience: ph.audience.clone(),
                audience_label,
                severity,
            };
            best.entry((uin.id.clone(), ph.audience.clone()))
                .and_modify(|cur| {
                    if item.severity > cur.severity {
                        *cur = item.clone();
                    }
                })
                .or_insert(item);
        }
    }

    let mut items: Vec<WarningItem> = best.into_values().collect();
    items.sort_by(|a, b| {
        b.severity
            .total_cmp(&a.severity)
            .then_with(|| a.uin.cmp(&b.uin))
            .then_with(|| a.audience.cmp(&b.audience))
    });
    WarningMessage {
        post_id: post.id.clone(),
        items,
    }
}

/// Applies a decision on a warned post to the user's threshold state.
pub fn record_user_action(
    action: &UserAction,
    warning: &WarningMessage,
    state: &ThresholdState,
) -> Result<ThresholdState> {
    if warning.post_id != action.post_id {
        return Err(Error::validation(format!(
            "action refers to post {} but the warning was raised for {}",
            action.post_id, warning.post_id
        )));
    }
    if warning.is_empty() {
        return Err(Error::validation(format!(
            "no warning was raised for post {}",
            action.post_id
        )));
    }
    let mut next = *state;
    next.record(action.action);
    Ok(next)
}

/// Resolves a draft: published or retracted. Retracted posts never enter the
/// deleted-post reporting flow.
pub fn publish_or_retract(post: &Post, decision: Decision) -> Result<Post> {
    let mut next = post.clone();
    match decision {
        Decision::Publish => next.publish()?,
        Decision::Retract => next.retract()?,
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttributeSet, PostStatus, UserId};

    fn state(phi: f64) -> ThresholdState {
        ThresholdState::new(&ThresholdConfig {
            phi_initial: phi,
            ..ThresholdConfig::default()
        })
        .unwrap()
    }

    fn window(publishes: u32, retracts: u32) -> f64 {
        let mut s = state(0.5);
        let mut adjusted = None;
        for _ in 0..publishes {
            adjusted = s.record(Decision::Publish).or(adjusted);
        }
        for _ in 0..retracts {
            adjusted = s.record(Decision::Retract).or(adjusted);
        }
        assert!(adjusted.is_some());
        assert_eq!(s.decisions_in_window, 0);
        s.phi
    }

    #[test]
    fn window_rules() {
        assert!((window(7, 3) - 0.55).abs() < 1e-12);
        assert!((window(3, 7) - 0.45).abs() < 1e-12);
        assert_eq!(window(5, 5), 0.5);
    }

    #[test]
    fn phi_only_moves_at_window_end() {
        let mut s = state(0.5);
        for _ in 0..9 {
            assert!(s.record(Decision::Publish).is_none());
            assert_eq!(s.phi, 0.5);
        }
        assert_eq!(s.accepted + s.ignored, s.decisions_in_window);
        assert!(s.record(Decision::Publish).is_some());
    }

    #[test]
    fn phi_is_clamped() {
        let mut s = state(0.95);
        for _ in 0..10 {
            s.record(Decision::Publish);
        }
        assert_eq!(s.phi, 0.95);
        let mut s = state(0.05);
        for _ in 0..10 {
            s.record(Decision::Retract);
        }
        assert_eq!(s.phi, 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(ThresholdConfig::default().validate().is_ok());
        let bad = ThresholdConfig {
            tau: 0,
            ..ThresholdConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ThresholdConfig {
            phi_initial: 0.99,
            ..ThresholdConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn draft() -> Post {
        Post::draft(
            PostId::from("p1"),
            UserId::from("u"),
            "x",
            AudienceId::from("public"),
            Utc::now(),
        )
    }

    #[test]
    fn lifecycle() {
        assert_eq!(
            publish_or_retract(&draft(), Decision::Publish)
                .unwrap()
                .status,
            PostStatus::Published
        );
        assert_eq!(
            publish_or_retract(&draft(), Decision::Retract)
                .unwrap()
                .status,
            PostStatus::Retracted
        );
        let published = publish_or_retract(&draft(), Decision::Publish).unwrap();
        assert!(matches!(
            publish_or_retract(&published, Decision::Retract),
            Err(Error::State(_))
        ));
    }

    #[test]
    fn actions_require_a_raised_warning() {
        let s = state(0.5);
        let action = UserAction {
            post_id: PostId::from("p1"),
            action: Decision::Publish,
            at: Utc::now(),
        };
        let empty = WarningMessage {
            post_id: PostId::from("p1"),
            items: vec![],
        };
        assert!(record_user_action(&action, &empty, &s).is_err());
        let other = WarningMessage {
            post_id: PostId::from("p2"),
            items: vec![],
        };
        assert!(record_user_action(&action, &other, &s).is_err());
    }

    #[test]
    fn no_attributes_no_warning() {
        let kb = KnowledgeBase::new();
        let post = draft().with_annotations(AttributeSet::new());
        let w = generate_warning(
            &post,
            &kb,
            0.0,
            &RiskEstimator::default(),
            &Lexicon::default(),
        );
        assert!(w.is_empty());
    }
}
