//! Regret-driven privacy risk estimation.
//!
//! Posts that users delete after a bad experience are turned into evidence:
//! the attributes they disclosed, the audience that should not have seen them,
//! the incident that followed and how bad it was. That evidence is pooled into
//! privacy heuristics and a contingency table of consequence counts, scored
//! with an ordinal criticality index, and used to warn users before they
//! publish similar content.
//!
//! Modules follow the data flow:
//!
//! * [`model`]: attributes, consequence levels, audiences, incidents, posts;
//! * [`content`]: lexicon-based attribute detection;
//! * [`criticality`]: the index, its variance and confidence interval;
//! * [`knowledge`]: heuristic matching and contingency-table updates;
//! * [`awareness`]: warning generation and threshold adaptation.

pub mod awareness;
pub mod content;
pub mod criticality;
pub mod error;
pub mod knowledge;
pub mod model;

pub use awareness::{
    generate_warning, publish_or_retract, record_user_action, Decision, RenderedWarning,
    ThresholdAdjustment, ThresholdConfig, ThresholdState, UserAction, WarningItem, WarningMessage,
};
pub use content::{extract_sas, load_lexicon, Lexicon};
pub use criticality::{
    confidence_interval, criticality_estimate, criticality_variance, empirical_cdf, severity_score,
    ConsequenceFrequency, CriticalityResult, RiskEstimator, VarianceNormalization,
};
pub use error::{Error, Result};
pub use knowledge::{ContingencyTable, HeuristicDb, KnowledgeBase, MatchMode, MatchResult};
pub use model::{
    parse_consequence, sa_subset, AttributeSet, AudienceCircle, AudienceId, ConsequenceLevel,
    Dimension, HeuristicId, IncidentId, IncidentReport, Post, PostId, PostStatus, PrivacyHeuristic,
    SurveillanceAttribute, UnwantedIncident, UserId,
};
