//! Data model and file ingestion for ad-preference catalogs, user
//! assignments, keyword dictionaries and country populations.
//!
//! All inputs are CSV (or tab-separated for the dictionary) with explicit
//! headers. Loaded structures are immutable after construction and safe to
//! share across threads.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::cdf::CdfTable;
use crate::{Error, Result};

/// The five GDPR-derived sensitive data categories the dictionary covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SensitiveCategory {
    Politics,
    Religion,
    Health,
    Ethnicity,
    Sexuality,
}

impl SensitiveCategory {
    pub const ALL: [SensitiveCategory; 5] = [
        SensitiveCategory::Politics,
        SensitiveCategory::Religion,
        SensitiveCategory::Health,
        SensitiveCategory::Ethnicity,
        SensitiveCategory::Sexuality,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SensitiveCategory::Politics => "Politics",
            SensitiveCategory::Religion => "Religion",
            SensitiveCategory::Health => "Health",
            SensitiveCategory::Ethnicity => "Ethnicity",
            SensitiveCategory::Sexuality => "Sexuality",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "politics" => Some(SensitiveCategory::Politics),
            "religion" => Some(SensitiveCategory::Religion),
            "health" => Some(SensitiveCategory::Health),
            "ethnicity" => Some(SensitiveCategory::Ethnicity),
            "sexuality" => Some(SensitiveCategory::Sexuality),
            _ => None,
        }
    }
}

impl fmt::Display for SensitiveCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The 14 documented first-level interest categories.
pub const FIRST_LEVEL_TOPICS: [&str; 14] = [
    "Business and industry",
    "Education",
    "Family and relationships",
    "Fitness and wellness",
    "Food and drink",
    "Hobbies and activities",
    "Lifestyle and culture",
    "News and entertainment",
    "People",
    "Shopping and fashion",
    "Sports and outdoors",
    "Technology",
    "Travel places and events",
    "Empty",
];

/// One catalog entry: an interest advertisers can target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdPreference {
    pub id: String,
    pub name: String,
    pub disambiguation: Option<String>,
    pub topic: Option<String>,
    pub audience_size: u64,
}

impl AdPreference {
    /// Text used for similarity scoring: the disambiguation category when
    /// present, the name otherwise.
    pub fn scored_text(&self) -> &str {
        self.disambiguation.as_deref().unwrap_or(&self.name)
    }
}

/// Why a preference was assigned to a user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ReasonCode {
    AddedByUser,
    InferredFromActivity,
    AdClick,
    AppInstall,
    PageLike,
    CommentsPostsReactions,
    Unknown,
}

impl ReasonCode {
    pub const ALL: [ReasonCode; 7] = [
        ReasonCode::AddedByUser,
        ReasonCode::InferredFromActivity,
        ReasonCode::AdClick,
        ReasonCode::AppInstall,
        ReasonCode::PageLike,
        ReasonCode::CommentsPostsReactions,
        ReasonCode::Unknown,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ReasonCode::AddedByUser => "AddedByUser",
            ReasonCode::InferredFromActivity => "InferredFromActivity",
            ReasonCode::AdClick => "AdClick",
            ReasonCode::AppInstall => "AppInstall",
            ReasonCode::PageLike => "PageLike",
            ReasonCode::CommentsPostsReactions => "CommentsPostsReactions",
            ReasonCode::Unknown => "Unknown",
        }
    }

    pub fn parse_code(s: &str) -> Option<Self> {
        ReasonCode::ALL.iter().copied().find(|c| c.as_str() == s.trim())
    }

    /// Human-readable description, mirroring the explanations shown next to
    /// each assigned preference.
    pub fn description(&self) -> &'static str {
        match self {
            ReasonCode::AddedByUser => "This is a preference you added",
            ReasonCode::InferredFromActivity => {
                "You have this preference because we think it may be relevant to you \
                 based on what you do on Facebook"
            }
            ReasonCode::AdClick => "You have this preference because you clicked on an ad",
            ReasonCode::AppInstall => "You have this preference because you installed an app",
            ReasonCode::PageLike => "You have this preference because you liked a Page",
            ReasonCode::CommentsPostsReactions => {
                "You have this preference because of comments, posts, shares or reactions you made"
            }
            ReasonCode::Unknown => "Unclear or not gathered",
        }
    }

    /// Maps raw explanation text to a code by longest-prefix match over the
    /// six documented phrasings. Unmatched text maps to `Unknown`.
    pub fn from_raw_text(text: &str) -> Self {
        // Ordered longest-first so the shared "You have this preference
        // because" stem never shadows a more specific phrasing.
        const PREFIXES: [(&str, ReasonCode); 6] = [
            (
                "You have this preference because we think it may be relevant to you",
                ReasonCode::InferredFromActivity,
            ),
            (
                "You have this preference because of comments, posts, shares or reactions",
                ReasonCode::CommentsPostsReactions,
            ),
            (
                "You have this preference because you clicked on an ad",
                ReasonCode::AdClick,
            ),
            (
                "You have this preference because you installed the app",
                ReasonCode::AppInstall,
            ),
            (
                "You have this preference because you liked a Page",
                ReasonCode::PageLike,
            ),
            ("This is a preference you added", ReasonCode::AddedByUser),
        ];
        let trimmed = text.trim();
        PREFIXES
            .iter()
            .filter(|(p, _)| trimmed.starts_with(p))
            .max_by_key(|(p, _)| p.len())
            .map(|&(_, code)| code)
            .unwrap_or(ReasonCode::Unknown)
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Assignment reason: the parsed code plus the verbatim explanation text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignmentReason {
    pub code: ReasonCode,
    pub raw_text: Option<String>,
}

/// One (user, preference) assignment observed in a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAssignment {
    pub user_id: String,
    pub pref_id: String,
    pub reason: AssignmentReason,
    pub added_at: DateTime<Utc>,
}

/// Immutable preference catalog with id lookup.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    prefs: Vec<AdPreference>,
    index: HashMap<String, usize>,
    /// Topics seen that are not among the 14 first-level categories;
    /// recorded verbatim per the loader contract.
    pub topic_warnings: Vec<String>,
}

impl Catalog {
    pub fn new(prefs: Vec<AdPreference>) -> Result<Self> {
        let mut index = HashMap::with_capacity(prefs.len());
        let mut topic_warnings = Vec::new();
        for (i, p) in prefs.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "preference {} has an empty name",
                    p.id
                )));
            }
            if index.insert(p.id.clone(), i).is_some() {
                return Err(Error::DuplicateId { id: p.id.clone() });
            }
            if let Some(topic) = &p.topic {
                if !FIRST_LEVEL_TOPICS.contains(&topic.as_str()) {
                    topic_warnings.push(format!(
                        "preference {}: topic {:?} is not a first-level category; kept verbatim",
                        p.id, topic
                    ));
                }
            }
        }
        Ok(Catalog {
            prefs,
            index,
            topic_warnings,
        })
    }

    pub fn get(&self, id: &str) -> Option<&AdPreference> {
        self.index.get(id).map(|&i| &self.prefs[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.prefs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &AdPreference> {
        self.prefs.iter()
    }
}

#[derive(Debug, Deserialize, Serialize)]
struct CatalogRow {
    id: String,
    name: String,
    disambiguation: String,
    topic: String,
    audience_size: u64,
}

fn opt(s: String) -> Option<String> {
    if s.is_empty() {
        None
    } else {
        Some(s)
    }
}

/// Loads a catalog CSV (`id,name,disambiguation,topic,audience_size`).
pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| map_csv_open(&display, e))?;
    let mut prefs = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for result in reader.deserialize::<CatalogRow>() {
        let row = result.map_err(|e| malformed(&display, &e))?;
        if !seen.insert(row.id.clone()) {
            return Err(Error::DuplicateId { id: row.id });
        }
        prefs.push(AdPreference {
            id: row.id,
            name: row.name,
            disambiguation: opt(row.disambiguation),
            topic: opt(row.topic),
            audience_size: row.audience_size,
        });
    }
    Catalog::new(prefs)
}

/// Writes a catalog back in the canonical CSV layout.
pub fn save_catalog(catalog: &Catalog, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut writer = csv::Writer::from_path(path).map_err(|e| map_csv_open(&display, e))?;
    for p in catalog.iter() {
        writer
            .serialize(CatalogRow {
                id: p.id.clone(),
                name: p.name.clone(),
                disambiguation: p.disambiguation.clone().unwrap_or_default(),
                topic: p.topic.clone().unwrap_or_default(),
                audience_size: p.audience_size,
            })
            .map_err(|e| malformed(&display, &e))?;
    }
    writer
        .flush()
        .map_err(|e| Error::io(display.clone(), e))?;
    Ok(())
}

/// A row that could not be turned into an assignment, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

/// Assignments plus the rows that were rejected rather than silently dropped.
#[derive(Debug, Clone, Default)]
pub struct AssignmentLoad {
    pub assignments: Vec<UserAssignment>,
    pub rejects: Vec<RejectedRow>,
}

#[derive(Debug, Deserialize)]
struct AssignmentRow {
    user_id: String,
    pref_id: String,
    reason_code: String,
    reason_text: String,
    added_at: String,
}

/// Loads assignments (`user_id,pref_id,reason_code,reason_text,added_at`),
/// resolving every `pref_id` against the catalog. Unresolvable or malformed
/// rows go to the rejects report.
pub fn load_assignments(path: impl AsRef<Path>, catalog: &Catalog) -> Result<AssignmentLoad> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| map_csv_open(&display, e))?;
    let mut out = AssignmentLoad::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for (i, result) in reader.deserialize::<AssignmentRow>().enumerate() {
        let line = i as u64 + 2; // header is line 1
        let row = match result {
            Ok(row) => row,
            Err(e) => {
                out.rejects.push(RejectedRow {
                    line,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        if !catalog.contains(&row.pref_id) {
            out.rejects.push(RejectedRow {
                line,
                reason: format!("unknown preference id {}", row.pref_id),
            });
            continue;
        }
        let added_at = match DateTime::parse_from_rfc3339(&row.added_at) {
            Ok(t) => t.with_timezone(&Utc),
            Err(e) => {
                out.rejects.push(RejectedRow {
                    line,
                    reason: format!("bad timestamp {:?}: {e}", row.added_at),
                });
                continue;
            }
        };
        if !seen.insert((row.user_id.clone(), row.pref_id.clone())) {
            out.rejects.push(RejectedRow {
                line,
                reason: format!(
                    "duplicate assignment ({}, {})",
                    row.user_id, row.pref_id
                ),
            });
            continue;
        }
        let code = if row.reason_code.trim().is_empty() {
            ReasonCode::from_raw_text(&row.reason_text)
        } else {
            match ReasonCode::parse_code(&row.reason_code) {
                Some(c) => c,
                None => {
                    out.rejects.push(RejectedRow {
                        line,
                        reason: format!("unknown reason code {:?}", row.reason_code),
                    });
                    continue;
                }
            }
        };
        out.assignments.push(UserAssignment {
            user_id: row.user_id,
            pref_id: row.pref_id,
            reason: AssignmentReason {
                code,
                raw_text: opt(row.reason_text),
            },
            added_at,
        });
    }
    Ok(out)
}

/// Keyword dictionary: unique (category, keyword) pairs.
#[derive(Debug, Clone, Default)]
pub struct KeywordDictionary {
    entries: Vec<(SensitiveCategory, String)>,
}

impl KeywordDictionary {
    pub fn new(raw: Vec<(SensitiveCategory, String)>) -> Result<Self> {
        let mut set: BTreeSet<(SensitiveCategory, String)> = BTreeSet::new();
        for (cat, kw) in raw {
            let kw = kw.trim().to_string();
            if kw.is_empty() {
                return Err(Error::InvalidInput(
                    "dictionary keyword empty after normalization".into(),
                ));
            }
            set.insert((cat, kw));
        }
        Ok(KeywordDictionary {
            entries: set.into_iter().collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in deterministic (category, keyword) order.
    pub fn entries(&self) -> &[(SensitiveCategory, String)] {
        &self.entries
    }
}

/// Loads a dictionary file: one `category<TAB>keyword phrase` per line.
pub fn load_dictionary(path: impl AsRef<Path>) -> Result<KeywordDictionary> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut raw = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (cat, kw) = line.split_once('\t').ok_or_else(|| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 1,
            message: "expected category<TAB>keyword".into(),
        })?;
        let cat = SensitiveCategory::parse(cat).ok_or_else(|| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 1,
            message: format!("unknown category {cat:?}"),
        })?;
        raw.push((cat, kw.to_string()));
    }
    KeywordDictionary::new(raw)
}

/// Per-country population figures keyed by ISO-3166 alpha-2 code.
#[derive(Debug, Clone, Default)]
pub struct PopulationTable {
    by_code: BTreeMap<String, u64>,
}

impl PopulationTable {
    pub fn new(rows: Vec<(String, u64)>) -> Result<Self> {
        let mut by_code = BTreeMap::new();
        for (code, pop) in rows {
            if pop == 0 {
                return Err(Error::InvalidInput(format!(
                    "population for {code} must be positive"
                )));
            }
            if by_code.insert(code.clone(), pop).is_some() {
                return Err(Error::InvalidInput(format!(
                    "duplicate country code {code}"
                )));
            }
        }
        Ok(PopulationTable { by_code })
    }

    pub fn get(&self, code: &str) -> Option<u64> {
        self.by_code.get(code).copied()
    }

    /// Sum over a set of countries; errors on the first unknown code.
    pub fn total(&self, codes: &[String]) -> Result<u64> {
        codes.iter().try_fold(0u64, |acc, c| {
            self.get(c)
                .map(|p| acc + p)
                .ok_or_else(|| Error::UnknownCountry(c.clone()))
        })
    }
}

#[derive(Debug, Deserialize)]
struct PopulationRow {
    country_code: String,
    population: u64,
}

/// Loads a population CSV (`country_code,population`).
pub fn load_population(path: impl AsRef<Path>) -> Result<PopulationTable> {
    let path = path.as_ref();
    let display = path.display().to_string();
    let mut reader = csv::Reader::from_path(path).map_err(|e| map_csv_open(&display, e))?;
    let mut rows = Vec::new();
    for result in reader.deserialize::<PopulationRow>() {
        let row = result.map_err(|e| malformed(&display, &e))?;
        rows.push((row.country_code, row.population));
    }
    PopulationTable::new(rows)
}

/// CDF of per-user preference counts.
pub fn preference_count_distribution(assignments: &[UserAssignment]) -> CdfTable {
    let mut per_user: HashMap<&str, usize> = HashMap::new();
    for a in assignments {
        *per_user.entry(a.user_id.as_str()).or_insert(0) += 1;
    }
    let counts: Vec<f64> = per_user.values().map(|&c| c as f64).collect();
    CdfTable::from_values(&counts)
}

/// Percentages per reason code, over (a) all assignments and (b) the ones
/// whose preference is in `sensitive_ids`. Column (b) is `None` when no
/// assignment matches the sensitive set.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasonFrequencyTable {
    pub all: Vec<(ReasonCode, f64)>,
    pub sensitive: Option<Vec<(ReasonCode, f64)>>,
}

pub fn reason_frequency_table(
    assignments: &[UserAssignment],
    sensitive_ids: &HashSet<String>,
) -> Result<ReasonFrequencyTable> {
    if assignments.is_empty() {
        return Err(Error::EmptyInput("no assignments".into()));
    }
    let column = |rows: &[&UserAssignment]| -> Vec<(ReasonCode, f64)> {
        let total = rows.len() as f64;
        ReasonCode::ALL
            .iter()
            .map(|&code| {
                let n = rows.iter().filter(|a| a.reason.code == code).count();
                (code, 100.0 * n as f64 / total)
            })
            .collect()
    };
    let all_rows: Vec<&UserAssignment> = assignments.iter().collect();
    let sensitive_rows: Vec<&UserAssignment> = assignments
        .iter()
        .filter(|a| sensitive_ids.contains(&a.pref_id))
        .collect();
    Ok(ReasonFrequencyTable {
        all: column(&all_rows),
        sensitive: if sensitive_rows.is_empty() {
            None
        } else {
            Some(column(&sensitive_rows))
        },
    })
}

fn map_csv_open(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::MalformedRow {
            path: path.to_string(),
            line: 0,
            message: format!("{other:?}"),
        },
    }
}

fn malformed(path: &str, e: &csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| p.line())
        .unwrap_or(0);
    Error::MalformedRow {
        path: path.to_string(),
        line,
        message: e.to_string(),
    }
}
