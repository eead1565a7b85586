use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perception::PersonObservation;

/// Items that make a person worth describing in a crowded scene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarmfulLexicon(BTreeSet<String>);

impl Default for HarmfulLexicon {
    fn default() -> Self {
        Self::new(["gun", "mask", "baseball bat"])
    }
}

impl HarmfulLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Self(words.into_iter().map(|w| w.as_ref().trim().to_lowercase()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(&word.trim().to_lowercase())
    }

    /// True when any of `desc` is a harmful item.
    pub fn matches(&self, desc: &[String]) -> bool {
        desc.iter().any(|w| self.contains(w))
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComposeOptions {
    pub lexicon: HarmfulLexicon,
    /// Write "2 unknown persons" instead of the literal "2 unknown person".
    #[serde(default)]
    pub pluralize: bool,
}

/// Which sentence template applies, by head count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessageShape {
    /// Four or more people: names, a count, and only those carrying
    /// something harmful.
    Crowd,
    SingleUnknown,
    Unknowns,
    KnownOnly,
    Mixed,
}

impl MessageShape {
    pub fn of(known: usize, unknown: usize) -> Result<Self> {
        Ok(match (known, unknown) {
            (0, 0) => return Err(Error::Empty("observations")),
            _ if known + unknown >= 4 => MessageShape::Crowd,
            (0, 1) => MessageShape::SingleUnknown,
            (0, _) => MessageShape::Unknowns,
            (_, 0) => MessageShape::KnownOnly,
            _ => MessageShape::Mixed,
        })
    }
}

fn desc(o: &PersonObservation) -> String {
    o.desc_words.join(", ")
}

fn unknown_count(n: usize, opts: &ComposeOptions) -> String {
    if opts.pluralize && n != 1 {
        format!("{n} unknown persons")
    } else {
        format!("{n} unknown person")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Clauses joined by " and " into one capitalised sentence, or `None`.
fn sentence(clauses: Vec<String>) -> Option<String> {
    (!clauses.is_empty()).then(|| format!("{}.", capitalize(&clauses.join(" and "))))
}

fn position_clause(o: &PersonObservation) -> String {
    format!("person on the {} has {}", o.position, desc(o))
}

fn name_clause(o: &PersonObservation) -> String {
    format!("{} has {}", o.name, desc(o))
}

/// Short message describing everyone at the door.
///
/// Known people are named, unknown ones counted; descriptions follow. The
/// result has at most two sentences, always ends with a period, and depends
/// only on the observation order.
///
/// ```
/// use safegate_core::change::Position;
/// use safegate_core::messaging::{compose_message, ComposeOptions};
/// use safegate_core::perception::PersonObservation;
///
/// let reza = PersonObservation {
///     name: "Reza".into(),
///     person_id: Some("p1".into()),
///     position: Position::Center,
///     desc_words: vec!["mustache".into(), "beard".into(), "gray hair".into()],
///     distance: None,
/// };
/// let stranger = PersonObservation::unknown(Position::Left, vec![]);
/// let msg = compose_message(&[reza, stranger], &ComposeOptions::default()).unwrap();
/// assert_eq!(msg, "Reza with 1 unknown person. Reza has mustache, beard, gray hair.");
/// ```
pub fn compose_message(observations: &[PersonObservation], opts: &ComposeOptions) -> Result<String> {
    let (known, unknown): (Vec<_>, Vec<_>) = observations.iter().partition(|o| o.is_known());
    let shape = MessageShape::of(known.len(), unknown.len())?;
    let described = |o: &&PersonObservation| !o.desc_words.is_empty();

    let head = || {
        let names = known.iter().map(|o| o.name.as_str()).collect::<Vec<_>>().join(" and ");
        match (names.is_empty(), unknown.is_empty()) {
            (false, false) => format!("{names} with {}.", unknown_count(unknown.len(), opts)),
            (false, true) => format!("{names}."),
            (true, _) => format!("{}.", capitalize(&unknown_count(unknown.len(), opts))),
        }
    };

    let parts: Vec<String> = match shape {
        MessageShape::Crowd => {
            let carriers = observations
                .iter()
                .filter(|o| opts.lexicon.matches(&o.desc_words))
                .map(position_clause)
                .collect();
            std::iter::once(head()).chain(sentence(carriers)).collect()
        }
        MessageShape::SingleUnknown => {
            let o = unknown[0];
            vec![if o.desc_words.is_empty() {
                "An unknown person.".to_string()
            } else {
                format!("An unknown person with {}.", desc(o))
            }]
        }
        MessageShape::Unknowns => {
            let clauses = unknown.iter().copied().filter(described).map(position_clause).collect();
            std::iter::once(head()).chain(sentence(clauses)).collect()
        }
        MessageShape::KnownOnly => {
            let clauses: Vec<String> = known.iter().copied().filter(described).map(name_clause).collect();
            match sentence(clauses) {
                Some(s) => vec![s],
                None => {
                    let names = known.iter().map(|o| o.name.as_str()).collect::<Vec<_>>();
                    let verb = if names.len() == 1 { "is" } else { "are" };
                    vec![format!("{} {verb} at the door.", names.join(" and "))]
                }
            }
        }
        MessageShape::Mixed => {
            let clauses = known.iter().copied().filter(described).map(name_clause).collect();
            std::iter::once(head()).chain(sentence(clauses)).collect()
        }
    };
    Ok(parts.join(" "))
}

/// Number of sentences, counted by terminal punctuation.
pub fn sentence_count(message: &str) -> usize {
    message
        .split_terminator(['.', '!', '?'])
        .filter(|s| !s.trim().is_empty())
        .count()
}

/// Advisory sent when the camera scene is too dark to analyse.
pub const POOR_LIGHTING_MESSAGE: &str =
    "The lighting condition is poor. Please turn on the external lights.";
