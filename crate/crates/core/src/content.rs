//! Surveillance-attribute detection in post text.
//!
//! Detection is lexicon driven. Phrase patterns are matched on word
//! boundaries, case-insensitively, against the token stream of the post;
//! `re:` patterns are regular expressions anchored on word boundaries.
//! Every phrase occurrence contributes its attribute. Sentiment words are
//! counted with a leftmost-longest, non-overlapping scan so that "bad mood"
//! is one negative hit and "not a good idea" swallows the "good" inside it.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, BufReader, Read};

use regex::Regex;

use crate::error::{Error, Result};
use crate::model::{canonical_id, AttributeSet, Post, SurveillanceAttribute};

/// The lexicon bundled with the crate.
pub const DEFAULT_LEXICON: &str = include_str!("../data/default.lexicon");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Attribute(SurveillanceAttribute),
    Sentiment(Polarity),
}

#[derive(Debug, Clone)]
struct RegexEntry {
    source: String,
    regex: Regex,
    target: Target,
}

/// Immutable pattern table mapping phrases to attributes, plus sentiment word
/// lists.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    phrases: HashMap<Vec<String>, SurveillanceAttribute>,
    positive: HashSet<Vec<String>>,
    negative: HashSet<Vec<String>>,
    regexes: Vec<RegexEntry>,
    longest_phrase: usize,
    longest_sentiment: usize,
}

impl Lexicon {
    /// Parses the bundled lexicon.
    pub fn bundled() -> Lexicon {
        load_lexicon(DEFAULT_LEXICON.as_bytes()).expect("bundled lexicon is valid")
    }

    /// Number of attribute and sentiment entries.
    pub fn len(&self) -> usize {
        self.phrases.len() + self.positive.len() + self.negative.len() + self.regexes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn positive_words(&self) -> impl Iterator<Item = String> + '_ {
        self.positive.iter().map(|k| k.join(" "))
    }

    pub fn negative_words(&self) -> impl Iterator<Item = String> + '_ {
        self.negative.iter().map(|k| k.join(" "))
    }

    fn insert(&mut self, line: usize, pattern: &str, target: Target) -> Result<()> {
        if let Some(source) = pattern.strip_prefix("re:") {
            let key = format!("re:{source}");
            if self.regexes.iter().any(|r| r.source == key) {
                return Err(Error::Conflict(format!(
                    "line {line}: duplicate pattern {pattern:?}"
                )));
            }
            let regex = Regex::new(&format!(r"(?i)\b(?:{source})\b"))
                .map_err(|e| Error::parse_line(line, format!("invalid regular pattern: {e}")))?;
            self.regexes.push(RegexEntry {
                source: key,
                regex,
                target,
            });
            return Ok(());
        }

        let tokens: Vec<String> = tokenize(pattern).into_iter().map(|(t, _)| t).collect();
        if tokens.is_empty() {
            return Err(Error::parse_line(line, "pattern has no word characters"));
        }
        if self.phrases.contains_key(&tokens)
            || self.positive.contains(&tokens)
            || self.negative.contains(&tokens)
        {
            return Err(Error::Conflict(format!(
                "line {line}: duplicate pattern {:?}",
                tokens.join(" ")
            )));
        }
        let len = tokens.len();
        match target {
            Target::Attribute(sa) => {
                self.phrases.insert(tokens, sa);
                self.longest_phrase = self.longest_phrase.max(len);
            }
            Target::Sentiment(Polarity::Positive) => {
                self.positive.insert(tokens);
                self.longest_sentiment = self.longest_sentiment.max(len);
            }
            Target::Sentiment(Polarity::Negative) => {
                self.negative.insert(tokens);
                self.longest_sentiment = self.longest_sentiment.max(len);
            }
        }
        Ok(())
    }

    fn sentiment_at(&self, tokens: &[String], start: usize) -> Option<(Polarity, usize)> {
        let max = self.longest_sentiment.min(tokens.len() - start);
        (1..=max).rev().find_map(|len| {
            let key = &tokens[start..start + len];
            if self.negative.contains(key) {
                Some((Polarity::Negative, len))
            } else if self.positive.contains(key) {
                Some((Polarity::Positive, len))
            } else {
                None
            }
        })
    }
}

/// Lower-cased word tokens with their byte offsets. A token is a maximal run of
/// alphanumeric characters and apostrophes.
fn tokenize(text: &str) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let word = c.is_alphanumeric() || c == '\'';
        match (word, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((text[s..i].to_lowercase(), s));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((text[s..].to_lowercase(), s));
    }
    out
}

fn parse_target(line: usize, spec: &str) -> Result<Target> {
    let (dimension, attribute) = spec
        .split_once('/')
        .ok_or_else(|| Error::parse_line(line, "expected DIMENSION/ATTRIBUTE"))?;
    if canonical_id(dimension) == "sentiment" {
        return match canonical_id(attribute).as_str() {
            "+" | "positive" => Ok(Target::Sentiment(Polarity::Positive)),
            "-" | "negative" => Ok(Target::Sentiment(Polarity::Negative)),
            "neutral" => Err(Error::parse_line(line, "neutral sentiment is not taggable")),
            other => Err(Error::parse_line(
                line,
                format!("unknown sentiment polarity {other:?}; expected + or -"),
            )),
        };
    }
    SurveillanceAttribute::lookup(dimension, attribute)
        .map(Target::Attribute)
        .map_err(|e| Error::parse_line(line, e.to_string()))
}

/// Reads the tab-separated lexicon format: `pattern<TAB>DIMENSION/ATTRIBUTE`,
/// with `SENTIMENT/+` and `SENTIMENT/-` for sentiment words and `#` comments.
pub fn load_lexicon<R: Read>(source: R) -> Result<Lexicon> {
    let mut lexicon = Lexicon::default();
    for (idx, line) in BufReader::new(source).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::parse_line(line_no, e.to_string()))?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        let (pattern, target) = trimmed.split_once('\t').ok_or_else(|| {
            Error::parse_line(line_no, "expected pattern<TAB>DIMENSION/ATTRIBUTE")
        })?;
        let pattern = pattern.trim();
        if pattern.is_empty() {
            return Err(Error::parse_line(line_no, "empty pattern"));
        }
        let target = parse_target(line_no, target.trim())?;
        lexicon.insert(line_no, pattern, target)?;
    }
    Ok(lexicon)
}

/// Surveillance attributes disclosed by `post`.
///
/// Annotations, when present, are returned verbatim. Otherwise the result is
/// every lexicon hit plus at most one sentiment attribute: Negative when
/// negative hits outnumber positive ones, Positive for the reverse.
pub fn extract_sas(post: &Post, lexicon: &Lexicon) -> AttributeSet {
    match &post.annotations {
        Some(annotations) => annotations.clone(),
        None => extract_from_text(&post.text, lexicon),
    }
}

pub fn extract_from_text(text: &str, lexicon: &Lexicon) -> AttributeSet {
    let tokens: Vec<String> = tokenize(text).into_iter().map(|(t, _)| t).collect();
    let mut found = AttributeSet::new();

    for start in 0..tokens.len() {
        let max = lexicon.longest_phrase.min(tokens.len() - start);
        for len in 1..=max {
            if let Some(sa) = lexicon.phrases.get(&tokens[start..start + len]) {
                found.insert(*sa);
            }
        }
    }

    let mut score: BTreeMap<bool, usize> = BTreeMap::new();
    let mut pos = 0;
    while pos < tokens.len() {
        match lexicon.sentiment_at(&tokens, pos) {
            Some((polarity, len)) => {
                *score.entry(polarity == Polarity::Negative).or_default() += 1;
                pos += len;
            }
            None => pos += 1,
        }
    }

    for entry in &lexicon.regexes {
        let hits = entry.regex.find_iter(text).count();
        if hits == 0 {
            continue;
        }
        match entry.target {
            Target::Attribute(sa) => {
                found.insert(sa);
            }
            Target::Sentiment(p) => *score.entry(p == Polarity::Negative).or_default() += hits,
        }
    }

    let negative = score.get(&true).copied().unwrap_or(0);
    let positive = score.get(&false).copied().unwrap_or(0);
    if negative > positive {
        found.insert(SurveillanceAttribute::Negative);
    } else if positive > negative {
        found.insert(SurveillanceAttribute::Positive);
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AudienceId, PostId, UserId};
    use chrono::Utc;
    use SurveillanceAttribute::*;

    const FIG2: &str =
        "A typical day at the office. Lots of complaints and bad mood. Cannot wait for the day to be over...!";
    const BOSTON: &str = "Moving to Boston was definitely not a good idea...the weather in this town sucks and so my job at this company! #wrongdecisions";

    fn small_lexicon() -> Lexicon {
        let src = "office\tLocation/Work location\n\
                   day at the office\tDemographics/Employment status\n\
                   complaints\tSentiment/-\n\
                   bad mood\tSENTIMENT/-\n\
                   boston\tLocation/Home location\n\
                   this town\tLocation/Home location\n\
                   my job\tDemographics/Employment status\n\
                   this company\tLocation/Work location\n\
                   sucks\tSentiment/-\n";
        load_lexicon(src.as_bytes()).unwrap()
    }

    fn post(text: &str) -> Post {
        Post::draft(
            PostId::from("p"),
            UserId::from("u"),
            text,
            AudienceId::from("public"),
            Utc::now(),
        )
    }

    #[test]
    fn fig2_scenario() {
        let sas = extract_sas(&post(FIG2), &small_lexicon());
        assert_eq!(
            sas,
            AttributeSet::from([WorkLocation, EmploymentStatus, Negative])
        );
    }

    #[test]
    fn boston_scenario() {
        let sas = extract_sas(&post(BOSTON), &small_lexicon());
        assert_eq!(
            sas,
            AttributeSet::from([HomeLocation, WorkLocation, EmploymentStatus, Negative])
        );
    }

    #[test]
    fn empty_text_yields_nothing() {
        assert!(extract_sas(&post(""), &small_lexicon()).is_empty());
    }

    #[test]
    fn annotations_override_text() {
        let p = post(FIG2).with_annotations(AttributeSet::from([PhoneNumber]));
        assert_eq!(
            extract_sas(&p, &small_lexicon()),
            AttributeSet::from([PhoneNumber])
        );
    }

    #[test]
    fn sentiment_ties_emit_nothing() {
        let lex = load_lexicon("great\tSentiment/+\nawful\tSentiment/-\n".as_bytes()).unwrap();
        assert!(extract_from_text("great but awful", &lex).is_empty());
        assert_eq!(
            extract_from_text("great great awful", &lex),
            AttributeSet::from([Positive])
        );
    }

    #[test]
    fn longest_sentiment_phrase_wins() {
        let lex =
            load_lexicon("good\tSentiment/+\nnot a good idea\tSentiment/-\n".as_bytes()).unwrap();
        assert_eq!(
            extract_from_text("not a good idea", &lex),
            AttributeSet::from([Negative])
        );
    }

    #[test]
    fn matching_is_word_bounded() {
        let lex = load_lexicon("office\tLocation/Work location\n".as_bytes()).unwrap();
        assert!(extract_from_text("officer on duty", &lex).is_empty());
        assert_eq!(
            extract_from_text("the OFFICE!", &lex),
            AttributeSet::from([WorkLocation])
        );
    }

    #[test]
    fn regular_patterns() {
        let lex =
            load_lexicon("re:[\\w.+-]+@[\\w-]+\\.[a-z]{2,}\tContact/Email address\n".as_bytes())
                .unwrap();
        assert_eq!(
            extract_from_text("write to jane.doe@example.org today", &lex),
            AttributeSet::from([EmailAddress])
        );
    }

    #[test]
    fn loader_counts_entries_and_skips_comments() {
        let src = "# header\noffice\tLocation/Work location\n\nmy job\tDemographics/Employment status\nsucks\tSentiment/-\n";
        assert_eq!(load_lexicon(src.as_bytes()).unwrap().len(), 3);
    }

    #[test]
    fn loader_rejects_duplicates() {
        let src = "office\tLocation/Work location\nOffice\tDemographics/Employment status\n";
        assert!(matches!(
            load_lexicon(src.as_bytes()),
            Err(Error::Conflict(_))
        ));
        let src = "bad\tSentiment/-\nbad\tSentiment/+\n";
        assert!(matches!(
            load_lexicon(src.as_bytes()),
            Err(Error::Conflict(_))
        ));
    }

    #[test]
    fn loader_reports_line_numbers() {
        let src = "office\tLocation/Work location\nno tab here\n";
        assert!(matches!(
            load_lexicon(src.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        let src = "# c\nfoo\tLocation/Moon base\n";
        assert!(matches!(
            load_lexicon(src.as_bytes()),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(load_lexicon("meh\tSentiment/Neutral\n".as_bytes()).is_err());
    }

    #[test]
    fn bundled_lexicon_reproduces_worked_scenarios() {
        let lex = Lexicon::bundled();
        assert!(!lex.is_empty());
        assert_eq!(
            extract_from_text(FIG2, &lex),
            AttributeSet::from([WorkLocation, EmploymentStatus, Negative])
        );
        assert_eq!(
            extract_from_text(BOSTON, &lex),
            AttributeSet::from([HomeLocation, WorkLocation, EmploymentStatus, Negative])
        );
        assert!(extract_from_text("", &lex).is_empty());
        assert_eq!(
            extract_from_text(
                "My job at this company is like the coffee they serve...awful!",
                &lex
            ),
            AttributeSet::from([WorkLocation, EmploymentStatus, Negative])
        );
        assert_eq!(
            extract_from_text(
                "I hate my job at this company but damn, it pays the rent! #keepcalm",
                &lex
            ),
            AttributeSet::from([WorkLocation, EmploymentStatus, Negative])
        );
        assert!(extract_from_text("Nice weather today", &lex).is_empty());
    }

    #[test]
    fn bundled_sentiment_lists_are_disjoint() {
        let lex = Lexicon::bundled();
        let neg: Vec<_> = lex.negative_words().collect();
        assert!(lex.positive_words().all(|w| !neg.contains(&w)));
    }
}
