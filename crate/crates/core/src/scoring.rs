//! Sensitivity-likelihood scoring of ad preferences.
//!
//! Each preference gets the maximum similarity between its scored text (the
//! disambiguation category when present, the name otherwise) and every
//! dictionary keyword. Keyword vectors are embedded once per scorer and
//! phrase vectors cached per unique scored text, so the full-catalog batch
//! is a dense dot-product sweep.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cdf::CdfTable;
use crate::corpus::{AdPreference, Catalog, KeywordDictionary, SensitiveCategory};
use crate::embeddings::{phrase_vector, PhraseVector, WordVectorStore};
use crate::{Error, Result};

/// Which text the score was computed from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScoredTextSource {
    Name,
    Disambiguation,
}

impl fmt::Display for ScoredTextSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoredTextSource::Name => "Name",
            ScoredTextSource::Disambiguation => "Disambiguation",
        })
    }
}

/// A preference with its sensitivity-likelihood score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPreference {
    pub pref_id: String,
    pub score: f64,
    /// The argmax dictionary entry; `None` when no similarity could be
    /// computed (vocabulary missing on either side).
    pub best_keyword: Option<String>,
    pub best_category: Option<SensitiveCategory>,
    pub source: ScoredTextSource,
    pub vocabulary_missing: bool,
}

struct KeywordVector {
    category: SensitiveCategory,
    keyword: String,
    vector: PhraseVector,
    norm: f64,
}

/// Scores texts against a fixed dictionary over a fixed vector store.
pub struct Scorer<'a> {
    store: &'a WordVectorStore,
    keywords: Vec<KeywordVector>,
}

impl<'a> Scorer<'a> {
    pub fn new(store: &'a WordVectorStore, dictionary: &KeywordDictionary) -> Result<Self> {
        if dictionary.is_empty() {
            return Err(Error::EmptyInput("dictionary has no entries".into()));
        }
        let mut keywords = Vec::with_capacity(dictionary.len());
        for (category, keyword) in dictionary.entries() {
            let vector = phrase_vector(store, keyword)?;
            let norm = vector.norm();
            keywords.push(KeywordVector {
                category: *category,
                keyword: keyword.clone(),
                vector,
                norm,
            });
        }
        Ok(Scorer { store, keywords })
    }

    /// Max similarity of `text` over all dictionary entries. Argmax ties
    /// break toward the lexicographically smallest keyword, then category.
    fn score_text(&self, text: &str) -> (f64, Option<(String, SensitiveCategory)>, bool) {
        let pv = match phrase_vector(self.store, text) {
            Ok(pv) => pv,
            Err(_) => return (0.0, None, true), // normalizes to zero tokens
        };
        if pv.is_vocabulary_missing() {
            return (0.0, None, true);
        }
        let pv_norm = pv.norm();
        let mut best_score = f64::NEG_INFINITY;
        let mut best: Option<&KeywordVector> = None;
        let mut any_scored = false;
        for kw in &self.keywords {
            if kw.vector.is_vocabulary_missing() {
                continue;
            }
            any_scored = true;
            let dot: f64 = pv
                .vector
                .iter()
                .zip(&kw.vector.vector)
                .map(|(x, y)| x * y)
                .sum();
            let denom = pv_norm * kw.norm;
            let score = if denom == 0.0 {
                0.0
            } else {
                (dot / denom).clamp(0.0, 1.0)
            };
            let better = match best {
                None => true,
                Some(b) => {
                    score > best_score
                        || (score == best_score
                            && (kw.keyword.as_str(), kw.category) < (b.keyword.as_str(), b.category))
                }
            };
            if better {
                best_score = score;
                best = Some(kw);
            }
        }
        match best {
            Some(kw) if any_scored => (
                best_score,
                Some((kw.keyword.clone(), kw.category)),
                false,
            ),
            _ => (0.0, None, true),
        }
    }

    pub fn score_preference(&self, pref: &AdPreference) -> ScoredPreference {
        let source = if pref.disambiguation.is_some() {
            ScoredTextSource::Disambiguation
        } else {
            ScoredTextSource::Name
        };
        let (score, best, vocabulary_missing) = self.score_text(pref.scored_text());
        let (best_keyword, best_category) = match best {
            Some((kw, cat)) => (Some(kw), Some(cat)),
            None => (None, None),
        };
        ScoredPreference {
            pref_id: pref.id.clone(),
            score,
            best_keyword,
            best_category,
            source,
            vocabulary_missing,
        }
    }

    /// Raw free-text scoring, used by the audit service for preferences not
    /// in the batch-scored catalog.
    pub fn score_free_text(
        &self,
        pref_id: &str,
        name: &str,
        disambiguation: Option<&str>,
    ) -> ScoredPreference {
        self.score_preference(&AdPreference {
            id: pref_id.to_string(),
            name: name.to_string(),
            disambiguation: disambiguation.map(str::to_string),
            topic: None,
            audience_size: 0,
        })
    }

    /// One score per catalog entry, in catalog order. Per-item work is
    /// independent, so parallel and sequential runs produce bitwise
    /// identical scores.
    pub fn score_catalog(&self, catalog: &Catalog) -> Vec<ScoredPreference> {
        // Dedup scored texts first; repeated disambiguation strings (e.g.
        // "Public Figure") dominate real catalogs.
        let prefs: Vec<&AdPreference> = catalog.iter().collect();
        let mut unique: Vec<&str> = prefs.iter().map(|p| p.scored_text()).collect();
        unique.sort_unstable();
        unique.dedup();
        let cache: HashMap<&str, (f64, Option<(String, SensitiveCategory)>, bool)> = unique
            .par_iter()
            .map(|&text| (text, self.score_text(text)))
            .collect();
        prefs
            .par_iter()
            .map(|pref| {
                let (score, best, vocabulary_missing) = cache[pref.scored_text()].clone();
                let (best_keyword, best_category) = match best {
                    Some((kw, cat)) => (Some(kw), Some(cat)),
                    None => (None, None),
                };
                ScoredPreference {
                    pref_id: pref.id.clone(),
                    score,
                    best_keyword,
                    best_category,
                    source: if pref.disambiguation.is_some() {
                        ScoredTextSource::Disambiguation
                    } else {
                        ScoredTextSource::Name
                    },
                    vocabulary_missing,
                }
            })
            .collect()
    }
}

/// Retains scores `>= threshold`, sorted by score descending (ties by
/// ascending preference id).
pub fn prefilter(scored: &[ScoredPreference], threshold: f64) -> Result<Vec<ScoredPreference>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "threshold {threshold} outside [0, 1]"
        )));
    }
    let mut kept: Vec<ScoredPreference> = scored
        .iter()
        .filter(|s| s.score >= threshold)
        .cloned()
        .collect();
    kept.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.pref_id.cmp(&b.pref_id))
    });
    Ok(kept)
}

/// CDF over the similarity scores.
pub fn score_cdf(scored: &[ScoredPreference]) -> CdfTable {
    let values: Vec<f64> = scored.iter().map(|s| s.score).collect();
    CdfTable::from_values(&values)
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoredRow {
    pref_id: String,
    score: f64,
    best_keyword: String,
    best_category: String,
    source: String,
    flags: String,
}

/// Writes the scored output CSV
/// (`pref_id,score,best_keyword,best_category,source,flags`).
pub fn save_scored(scored: &[ScoredPreference], path: impl AsRef<Path>) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let mut writer =
        csv::Writer::from_path(path.as_ref()).map_err(|e| csv_err(&display, e))?;
    for s in scored {
        writer
            .serialize(ScoredRow {
                pref_id: s.pref_id.clone(),
                score: s.score,
                best_keyword: s.best_keyword.clone().unwrap_or_default(),
                best_category: s
                    .best_category
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
                source: s.source.to_string(),
                flags: if s.vocabulary_missing {
                    "vocabulary_missing".into()
                } else {
                    String::new()
                },
            })
            .map_err(|e| csv_err(&display, e))?;
    }
    writer.flush().map_err(|e| Error::io(display, e))?;
    Ok(())
}

/// Reads a scored output CSV back.
pub fn load_scored(path: impl AsRef<Path>) -> Result<Vec<ScoredPreference>> {
    let display = path.as_ref().display().to_string();
    let mut reader =
        csv::Reader::from_path(path.as_ref()).map_err(|e| csv_err(&display, e))?;
    let mut out = Vec::new();
    for result in reader.deserialize::<ScoredRow>() {
        let row = result.map_err(|e| csv_err(&display, e))?;
        let source = match row.source.as_str() {
            "Disambiguation" => ScoredTextSource::Disambiguation,
            _ => ScoredTextSource::Name,
        };
        out.push(ScoredPreference {
            pref_id: row.pref_id,
            score: row.score,
            best_keyword: if row.best_keyword.is_empty() {
                None
            } else {
                Some(row.best_keyword)
            },
            best_category: SensitiveCategory::parse(&row.best_category),
            source,
            vocabulary_missing: row.flags.contains("vocabulary_missing"),
        });
    }
    Ok(out)
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRow {
            path: path.to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}
