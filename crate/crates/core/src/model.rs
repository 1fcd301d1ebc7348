//! Shared vocabulary: surveillance attributes, the consequence scale, audiences,
//! incidents, posts, heuristics and incident reports.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Number of levels on the consequence scale.
pub const K: usize = 5;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_string())
            }
        }
    };
}

string_id!(
    /// Identifier of an audience circle (canonical, lower-cased label).
    AudienceId
);
string_id!(
    /// Identifier of an unwanted incident (canonical, lower-cased label).
    IncidentId
);
string_id!(HeuristicId);
string_id!(PostId);
string_id!(UserId);

/// Lower-cases a label and collapses internal whitespace, so that free-text
/// "Other" entries dedupe against existing vocabulary.
pub fn canonical_id(label: &str) -> String {
    label
        .split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Self-disclosure dimensions grouping the surveillance attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Demographics,
    SexualProfile,
    PoliticalAttitudes,
    ReligiousBeliefs,
    HealthFactors,
    Location,
    Administrative,
    Contact,
    Sentiment,
}

impl Dimension {
    pub const ALL: [Dimension; 9] = [
        Dimension::Demographics,
        Dimension::SexualProfile,
        Dimension::PoliticalAttitudes,
        Dimension::ReligiousBeliefs,
        Dimension::HealthFactors,
        Dimension::Location,
        Dimension::Administrative,
        Dimension::Contact,
        Dimension::Sentiment,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::Demographics => "Demographics",
            Dimension::SexualProfile => "Sexual Profile",
            Dimension::PoliticalAttitudes => "Political Attitudes",
            Dimension::ReligiousBeliefs => "Religious Beliefs",
            Dimension::HealthFactors => "Health Factors and Condition",
            Dimension::Location => "Location",
            Dimension::Administrative => "Administrative",
            Dimension::Contact => "Contact",
            Dimension::Sentiment => "Sentiment",
        }
    }

    /// Case-insensitive lookup by label.
    pub fn from_label(label: &str) -> Option<Dimension> {
        let wanted = canonical_id(label);
        Dimension::ALL
            .into_iter()
            .find(|d| canonical_id(d.label()) == wanted)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

macro_rules! attributes {
    ($($variant:ident => ($dim:ident, $label:literal)),+ $(,)?) => {
        /// A category of personal information whose disclosure is privacy-relevant.
        ///
        /// The enumeration is closed; each attribute belongs to exactly one
        /// [`Dimension`].
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum SurveillanceAttribute {
            $($variant),+
        }

        impl SurveillanceAttribute {
            pub const ALL: [SurveillanceAttribute; 29] = [$(SurveillanceAttribute::$variant),+];

            pub fn dimension(self) -> Dimension {
                match self {
                    $(SurveillanceAttribute::$variant => Dimension::$dim),+
                }
            }

            pub fn label(self) -> &'static str {
                match self {
                    $(SurveillanceAttribute::$variant => $label),+
                }
            }
        }
    };
}

attributes! {
    Age => (Demographics, "Age"),
    Gender => (Demographics, "Gender"),
    Nationality => (Demographics, "Nationality"),
    RacialOrigin => (Demographics, "Racial origin"),
    Ethnicity => (Demographics, "Ethnicity"),
    LiteracyLevel => (Demographics, "Literacy level"),
    EmploymentStatus => (Demographics, "Employment status"),
    IncomeLevel => (Demographics, "Income level"),
    FamilyStatus => (Demographics, "Family status"),
    SexualPreference => (SexualProfile, "Sexual preference"),
    SupportedParty => (PoliticalAttitudes, "Supported party"),
    PoliticalIdeology => (PoliticalAttitudes, "Political ideology"),
    SupportedReligion => (ReligiousBeliefs, "Supported religion"),
    Smoking => (HealthFactors, "Smoking"),
    AlcoholDrinking => (HealthFactors, "Alcohol drinking"),
    DrugUse => (HealthFactors, "Drug use"),
    ChronicDiseases => (HealthFactors, "Chronic diseases"),
    Disabilities => (HealthFactors, "Disabilities"),
    OtherHealthFactors => (HealthFactors, "Other health factors"),
    HomeLocation => (Location, "Home location"),
    WorkLocation => (Location, "Work location"),
    FavoritePlaces => (Location, "Favorite places"),
    VisitedPlaces => (Location, "Visited places"),
    PersonalIdentificationNumber => (Administrative, "Personal Identification Number"),
    EmailAddress => (Contact, "Email address"),
    PhoneNumber => (Contact, "Phone number"),
    Negative => (Sentiment, "Negative"),
    Neutral => (Sentiment, "Neutral"),
    Positive => (Sentiment, "Positive"),
}

impl SurveillanceAttribute {
    /// `Dimension/Attribute`, the string sets are sorted by.
    pub fn canonical(self) -> String {
        format!("{}/{}", self.dimension().label(), self.label())
    }

    pub fn is_sentiment(self) -> bool {
        self.dimension() == Dimension::Sentiment
    }

    /// Resolves a `(dimension, attribute)` label pair, case-insensitively.
    pub fn lookup(dimension: &str, attribute: &str) -> Result<SurveillanceAttribute> {
        let dim = Dimension::from_label(dimension)
            .ok_or_else(|| Error::validation(format!("unknown dimension {dimension:?}")))?;
        let wanted = canonical_id(attribute);
        SurveillanceAttribute::ALL
            .into_iter()
            .find(|a| a.dimension() == dim && canonical_id(a.label()) == wanted)
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown attribute {attribute:?} in dimension {}",
                    dim.label()
                ))
            })
    }
}

impl fmt::Display for SurveillanceAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

// No dimension label is a prefix of another, so comparing the label pair
// orders attributes exactly like their canonical strings.
impl Ord for SurveillanceAttribute {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.dimension().label(), self.label()).cmp(&(other.dimension().label(), other.label()))
    }
}

impl PartialOrd for SurveillanceAttribute {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Serialize, Deserialize)]
struct AttributeRepr<'a> {
    #[serde(borrow)]
    dimension: std::borrow::Cow<'a, str>,
    #[serde(borrow)]
    attribute: std::borrow::Cow<'a, str>,
}

impl Serialize for SurveillanceAttribute {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        AttributeRepr {
            dimension: self.dimension().label().into(),
            attribute: self.label().into(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SurveillanceAttribute {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = AttributeRepr::deserialize(deserializer)?;
        SurveillanceAttribute::lookup(&repr.dimension, &repr.attribute).map_err(D::Error::custom)
    }
}

/// An ordered set of surveillance attributes. Serializes as an array sorted by
/// canonical string.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeSet(BTreeSet<SurveillanceAttribute>);

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sa: SurveillanceAttribute) -> bool {
        self.0.insert(sa)
    }

    pub fn contains(&self, sa: SurveillanceAttribute) -> bool {
        self.0.contains(&sa)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = SurveillanceAttribute> + '_ {
        self.0.iter().copied()
    }

    pub fn is_subset(&self, other: &AttributeSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_strict_subset(&self, other: &AttributeSet) -> bool {
        self.0.len() < other.0.len() && self.0.is_subset(&other.0)
    }
}

impl FromIterator<SurveillanceAttribute> for AttributeSet {
    fn from_iter<I: IntoIterator<Item = SurveillanceAttribute>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl<const N: usize> From<[SurveillanceAttribute; N]> for AttributeSet {
    fn from(items: [SurveillanceAttribute; N]) -> Self {
        items.into_iter().collect()
    }
}

impl fmt::Display for AttributeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let labels: Vec<_> = self.iter().map(|a| a.label()).collect();
        write!(f, "{{{}}}", labels.join(", "))
    }
}

/// True iff every element of `a` is in `b`.
pub fn sa_subset(a: &AttributeSet, b: &AttributeSet) -> bool {
    a.is_subset(b)
}

/// Ordinal consequence of an unwanted incident. Rank 1 is the most severe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConsequenceLevel {
    Catastrophic = 1,
    Major = 2,
    Moderate = 3,
    Minor = 4,
    Insignificant = 5,
}

impl ConsequenceLevel {
    /// Most severe first.
    pub const ALL: [ConsequenceLevel; K] = [
        ConsequenceLevel::Catastrophic,
        ConsequenceLevel::Major,
        ConsequenceLevel::Moderate,
        ConsequenceLevel::Minor,
        ConsequenceLevel::Insignificant,
    ];

    pub fn rank(self) -> usize {
        self as usize
    }

    /// Zero-based position in a count tuple.
    pub fn index(self) -> usize {
        self.rank() - 1
    }

    pub fn from_rank(rank: usize) -> Option<ConsequenceLevel> {
        ConsequenceLevel::ALL.get(rank.checked_sub(1)?).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ConsequenceLevel::Catastrophic => "catastrophic",
            ConsequenceLevel::Major => "major",
            ConsequenceLevel::Moderate => "moderate",
            ConsequenceLevel::Minor => "minor",
            ConsequenceLevel::Insignificant => "insignificant",
        }
    }
}

impl fmt::Display for ConsequenceLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConsequenceLevel {
    type Err = Error;

    fn from_str(label: &str) -> Result<Self> {
        parse_consequence(label)
    }
}

pub fn parse_consequence(label: &str) -> Result<ConsequenceLevel> {
    let wanted = label.trim().to_lowercase();
    ConsequenceLevel::ALL
        .into_iter()
        .find(|l| l.name() == wanted)
        .ok_or_else(|| {
            let legal: Vec<_> = ConsequenceLevel::ALL.iter().map(|l| l.name()).collect();
            Error::validation(format!(
                "unknown consequence level {label:?}; expected one of {}",
                legal.join(", ")
            ))
        })
}

/// A collection of recipients, e.g. "Work colleagues".
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AudienceCircle {
    pub id: AudienceId,
    pub label: String,
    pub predefined: bool,
}

impl AudienceCircle {
    pub const PREDEFINED: [&'static str; 4] = ["Public", "Friends", "Family", "Work colleagues"];

    /// A user-supplied circle; the id is derived from the label.
    pub fn custom(label: &str) -> Result<Self> {
        let id = canonical_id(label);
        if id.is_empty() {
            return Err(Error::validation("audience label must not be blank"));
        }
        Ok(Self {
            id: AudienceId(id),
            label: label.split_whitespace().collect::<Vec<_>>().join(" "),
            predefined: false,
        })
    }

    pub fn predefined() -> Vec<AudienceCircle> {
        Self::PREDEFINED
            .iter()
            .map(|label| AudienceCircle {
                id: AudienceId(canonical_id(label)),
                label: label.to_string(),
                predefined: true,
            })
            .collect()
    }
}

impl PartialEq for AudienceCircle {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for AudienceCircle {}

/// A negative outcome of a disclosure, e.g. job loss.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnwantedIncident {
    pub id: IncidentId,
    pub label: String,
    pub predefined: bool,
}

impl UnwantedIncident {
    pub const PREDEFINED: [&'static str; 4] = [
        "Job loss",
        "Reputation damage",
        "Harassment",
        "Unjustified discrimination",
    ];

    pub fn custom(label: &str) -> Result<Self> {
        let id = canonical_id(label);
        if id.is_empty() {
            return Err(Error::validation("incident label must not be blank"));
        }
        Ok(Self {
            id: IncidentId(id),
            label: label.split_whitespace().collect::<Vec<_>>().join(" "),
            predefined: false,
        })
    }

    pub fn predefined() -> Vec<UnwantedIncident> {
        Self::PREDEFINED
            .iter()
            .map(|label| UnwantedIncident {
                id: IncidentId(canonical_id(label)),
                label: label.to_string(),
                predefined: true,
            })
            .collect()
    }
}

impl PartialEq for UnwantedIncident {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for UnwantedIncident {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PostStatus {
    Draft,
    Published,
    Retracted,
    Deleted,
}

impl fmt::Display for PostStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PostStatus::Draft => "draft",
            PostStatus::Published => "published",
            PostStatus::Retracted => "retracted",
            PostStatus::Deleted => "deleted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Post {
    pub id: PostId,
    pub author: UserId,
    pub text: String,
    pub declared_audience: AudienceId,
    pub created_at: DateTime<Utc>,
    /// Explicit attributes; when present they replace lexicon extraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotations: Option<AttributeSet>,
    pub status: PostStatus,
}

impl Post {
    pub fn draft(
        id: PostId,
        author: UserId,
        text: impl Into<String>,
        declared_audience: AudienceId,
        created_at: DateTime<Utc>,
    ) -> Self {
        Self {
            id,
            author,
            text: text.into(),
            declared_audience,
            created_at,
            annotations: None,
            status: PostStatus::Draft,
        }
    }

    pub fn with_annotations(mut self, annotations: AttributeSet) -> Self {
        self.annotations = Some(annotations);
        self
    }

    fn transition(&mut self, from: PostStatus, to: PostStatus) -> Result<()> {
        if self.status != from {
            return Err(Error::State(format!(
                "post {} is {}, cannot become {to}",
                self.id, self.status
            )));
        }
        self.status = to;
        Ok(())
    }

    pub fn publish(&mut self) -> Result<()> {
        self.transition(PostStatus::Draft, PostStatus::Published)
    }

    pub fn retract(&mut self) -> Result<()> {
        self.transition(PostStatus::Draft, PostStatus::Retracted)
    }

    pub fn delete(&mut self) -> Result<()> {
        self.transition(PostStatus::Published, PostStatus::Deleted)
    }
}

/// A recurrent disclosure pattern: revealing `sas` to `audience` has led to
/// the incidents in `uins`. The risk part lives in the contingency table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrivacyHeuristic {
    pub id: HeuristicId,
    pub sas: AttributeSet,
    pub audience: AudienceId,
    pub uins: BTreeSet<IncidentId>,
}

/// The user's answer to the deleted-post dialog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IncidentReport {
    post_id: PostId,
    regretted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    uin: Option<UnwantedIncident>,
    #[serde(skip_serializing_if = "Option::is_none")]
    unintended_audience: Option<AudienceCircle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    consequence: Option<ConsequenceLevel>,
}

impl IncidentReport {
    /// Either all three details are given (regretted) or none are.
    pub fn new(
        post_id: PostId,
        regretted: bool,
        uin: Option<UnwantedIncident>,
        unintended_audience: Option<AudienceCircle>,
        consequence: Option<ConsequenceLevel>,
    ) -> Result<Self> {
        let given = [
            uin.is_some(),
            unintended_audience.is_some(),
            consequence.is_some(),
        ];
        if regretted && given.iter().any(|g| !g) {
            return Err(Error::validation(
                "a regretted report needs an incident, an unintended audience and a consequence level",
            ));
        }
        if !regretted && given.iter().any(|g| *g) {
            return Err(Error::validation(
                "a report that is not regretted must not carry incident details",
            ));
        }
        Ok(Self {
            post_id,
            regretted,
            uin,
            unintended_audience,
            consequence,
        })
    }

    pub fn regretted(
        post_id: PostId,
        uin: UnwantedIncident,
        audience: AudienceCircle,
        consequence: ConsequenceLevel,
    ) -> Self {
        Self {
            post_id,
            regretted: true,
            uin: Some(uin),
            unintended_audience: Some(audience),
            consequence: Some(consequence),
        }
    }

    pub fn not_regretted(post_id: PostId) -> Self {
        Self {
            post_id,
            regretted: false,
            uin: None,
            unintended_audience: None,
            consequence: None,
        }
    }

    pub fn post_id(&self) -> &PostId {
        &self.post_id
    }

    pub fn is_regretted(&self) -> bool {
        self.regretted
    }

    /// The incident details, present exactly when the report is regretted.
    pub fn details(&self) -> Option<(&UnwantedIncident, &AudienceCircle, ConsequenceLevel)> {
        match (&self.uin, &self.unintended_audience, self.consequence) {
            (Some(u), Some(a), Some(c)) => Some((u, a, c)),
            _ => None,
        }
    }
}

#[derive(Deserialize)]
struct IncidentReportRepr {
    post_id: PostId,
    regretted: bool,
    #[serde(default)]
    uin: Option<UnwantedIncident>,
    #[serde(default)]
    unintended_audience: Option<AudienceCircle>,
    #[serde(default)]
    consequence: Option<ConsequenceLevel>,
}

impl<'de> Deserialize<'de> for IncidentReport {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = IncidentReportRepr::deserialize(deserializer)?;
        IncidentReport::new(
            r.post_id,
            r.regretted,
            r.uin,
            r.unintended_audience,
            r.consequence,
        )
        .map_err(D::Error::custom)
    }
}
