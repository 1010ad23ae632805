//! Dictionary classification of folklore motifs and the group-level
//! environmental-folklore score `ln(1 + env / total)`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seed vocabulary and plain inflections, shipped as a starting dictionary.
pub const SEED_TERMS: &[&str] = &[
    "weather",
    "weathers",
    "climate",
    "climates",
    "climatic",
    "temperature",
    "temperatures",
    "environment",
    "environments",
    "environmental",
    "natural disaster",
    "natural disasters",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FolkloreError {
    #[error("dictionary is empty")]
    EmptyDictionary,
    #[error("duplicate dictionary term {0:?}")]
    DuplicateTerm(String),
    #[error("dictionary term {0:?} has no alphanumeric content")]
    BlankTerm(String),
    #[error("duplicate motif ({group_id}, {motif_id})")]
    DuplicateMotif { group_id: String, motif_id: String },
    #[error("no motifs to score")]
    NoMotifs,
    #[error("groups without motifs: {}", .0.join(", "))]
    EmptyGroups(Vec<String>),
}

/// Lowercases and splits on every run of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TermDictionary {
    words: BTreeSet<String>,
    phrases: BTreeSet<Vec<String>>,
}

impl TermDictionary {
    pub fn new<S: AsRef<str>>(terms: impl IntoIterator<Item = S>) -> Result<Self, FolkloreError> {
        let mut words = BTreeSet::new();
        let mut phrases = BTreeSet::new();
        for term in terms {
            let term = term.as_ref();
            let tokens = tokenize(term);
            let fresh = match tokens.len() {
                0 => return Err(FolkloreError::BlankTerm(term.to_string())),
                1 => words.insert(tokens[0].clone()),
                _ => phrases.insert(tokens),
            };
            if !fresh {
                return Err(FolkloreError::DuplicateTerm(term.to_string()));
            }
        }
        if words.is_empty() && phrases.is_empty() {
            return Err(FolkloreError::EmptyDictionary);
        }
        Ok(Self { words, phrases })
    }

    pub fn seed() -> Self {
        Self::new(SEED_TERMS.iter().copied()).expect("seed terms are distinct")
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, FolkloreError> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn len(&self) -> usize {
        self.words.len() + self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn terms(&self) -> Vec<String> {
        self.words
            .iter()
            .cloned()
            .chain(self.phrases.iter().map(|p| p.join(" ")))
            .collect()
    }
}

pub fn classify_motif(description: &str, dict: &TermDictionary) -> bool {
    let tokens = tokenize(description);
    if tokens.iter().any(|t| dict.words.contains(t)) {
        return true;
    }
    dict.phrases
        .iter()
        .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifEntry {
    pub group_id: String,
    pub motif_id: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MotifCatalog {
    entries: Vec<MotifEntry>,
}

impl MotifCatalog {
    pub fn new(entries: Vec<MotifEntry>) -> Result<Self, FolkloreError> {
        let mut seen = BTreeSet::new();
        for e in &entries {
            if !seen.insert((e.group_id.as_str(), e.motif_id.as_str())) {
                return Err(FolkloreError::DuplicateMotif {
                    group_id: e.group_id.clone(),
                    motif_id: e.motif_id.clone(),
                });
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[MotifEntry] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FolkloreScore {
    pub group_id: String,
    pub env_motifs: u64,
    pub total_motifs: u64,
    pub score: f64,
}

/// `(env, total, ln(1 + env / total))` for one group's classified motifs.
pub fn score_group(motifs: &[bool]) -> Result<(u64, u64, f64), FolkloreError> {
    let total = motifs.len() as u64;
    let env = motifs.iter().filter(|&&m| m).count() as u64;
    Ok((env, total, score_counts(env, total)?))
}

pub fn score_counts(env: u64, total: u64) -> Result<f64, FolkloreError> {
    if total == 0 {
        return Err(FolkloreError::NoMotifs);
    }
    Ok((env as f64 / total as f64).ln_1p())
}

/// One score per group, sorted by group id.
pub fn score_catalog(
    catalog: &MotifCatalog,
    dict: &TermDictionary,
) -> Result<Vec<FolkloreScore>, FolkloreError> {
    let mut by_group: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for e in &catalog.entries {
        let slot = by_group.entry(e.group_id.as_str()).or_default();
        slot.1 += 1;
        if classify_motif(&e.description, dict) {
            slot.0 += 1;
        }
    }
    by_group
        .into_iter()
        .map(|(g, (env, total))| {
            Ok(FolkloreScore {
                group_id: g.to_string(),
                env_motifs: env,
                total_motifs: total,
                score: score_counts(env, total)?,
            })
        })
        .collect()
}

/// Scores with every group in `expected_groups` required to have motifs.
pub fn score_catalog_for(
    catalog: &MotifCatalog,
    dict: &TermDictionary,
    expected_groups: &[String],
) -> Result<Vec<FolkloreScore>, FolkloreError> {
    let scores = score_catalog(catalog, dict)?;
    let present: BTreeSet<&str> = scores.iter().map(|s| s.group_id.as_str()).collect();
    let missing: Vec<String> = expected_groups
        .iter()
        .filter(|g| !present.contains(g.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(FolkloreError::EmptyGroups(missing));
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(g: &str, m: &str, d: &str) -> MotifEntry {
        MotifEntry {
            group_id: g.into(),
            motif_id: m.into(),
            description: d.into(),
        }
    }

    #[test]
    fn classify_examples() {
        let flood = TermDictionary::new(["flood"]).unwrap();
        assert!(classify_motif("The great flood covered the earth", &flood));
        assert!(!classify_motif("", &flood));
        let nd = TermDictionary::new(["natural disaster"]).unwrap();
        assert!(classify_motif("after the natural\u{2014}disaster struck", &nd));
        assert!(!classify_motif("natural causes, a disaster", &nd));
        // no stemming
        assert!(!classify_motif("the floods came", &flood));
    }

    #[test]
    fn score_examples() {
        let mut m = vec![false; 62];
        assert_eq!(score_group(&m).unwrap(), (0, 62, 0.0));
        for x in m.iter_mut().take(31) {
            *x = true;
        }
        let (_, _, s) = score_group(&m).unwrap();
        assert!((s - 0.405_465_108_108_164_4).abs() < 1e-15);
        let all = vec![true; 62];
        let (_, _, s) = score_group(&all).unwrap();
        assert!((s - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(score_group(&[]), Err(FolkloreError::NoMotifs));
    }

    #[test]
    fn catalog_scores() {
        let dict = TermDictionary::seed();
        let cat = MotifCatalog::new(vec![entry("b", "1", "Bad weather at sea")]).unwrap();
        let s = score_catalog(&cat, &dict).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].score - std::f64::consts::LN_2).abs() < 1e-15);

        let base = vec![
            entry("b", "1", "Climate of the north"),
            entry("a", "1", "A fox and a crow"),
            entry("a", "2", "The environment spirit"),
        ];
        let mut doubled = base.clone();
        for e in &base {
            doubled.push(entry(&e.group_id, &format!("{}x", e.motif_id), &e.description));
        }
        let s1 = score_catalog(&MotifCatalog::new(base).unwrap(), &dict).unwrap();
        let s2 = score_catalog(&MotifCatalog::new(doubled).unwrap(), &dict).unwrap();
        assert_eq!(s1[0].group_id, "a");
        for (x, y) in s1.iter().zip(&s2) {
            assert_eq!(x.score, y.score);
            assert_eq!(2 * x.total_motifs, y.total_motifs);
        }
    }

    #[test]
    fn catalog_invariants() {
        let dup = vec![entry("a", "1", "x"), entry("a", "1", "y")];
        assert!(matches!(
            MotifCatalog::new(dup),
            Err(FolkloreError::DuplicateMotif { .. })
        ));
        let cat = MotifCatalog::new(vec![entry("a", "1", "x")]).unwrap();
        assert_eq!(
            score_catalog_for(&cat, &TermDictionary::seed(), &["a".into(), "z".into()]),
            Err(FolkloreError::EmptyGroups(vec!["z".into()]))
        );
    }

    #[test]
    fn dictionary_rules() {
        assert_eq!(TermDictionary::new(Vec::<&str>::new()), Err(FolkloreError::EmptyDictionary));
        assert!(matches!(
            TermDictionary::new(["rain", "Rain"]),
            Err(FolkloreError::DuplicateTerm(_))
        ));
        assert!(matches!(TermDictionary::new(["--"]), Err(FolkloreError::BlankTerm(_))));
        let d = TermDictionary::parse("# comment\nrain\n\nnatural  disaster\n").unwrap();
        assert_eq!(d.terms(), vec!["rain".to_string(), "natural disaster".to_string()]);
        assert_eq!(TermDictionary::seed().len(), SEED_TERMS.len());
    }
}
