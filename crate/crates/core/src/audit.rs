//! Blacklist maintenance and per-user audit histories.
//!
//! A [`Blacklist`] collects the preferences whose sensitivity score meets
//! the trained threshold (boundary inclusive; 0.69 deployed default). An
//! [`AuditStore`] folds preference snapshots into per-user histories: new
//! blacklisted preferences become Active entries, previously Active entries
//! absent from a snapshot become Deleted, and non-blacklisted preferences
//! never enter a history. Persistence is an append-only JSON-lines event
//! log with explicit compaction; a store re-opened on the same log replays
//! to the identical state.

use std::collections::{BTreeMap, HashMap};
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::corpus::{AssignmentReason, ReasonCode, SensitiveCategory};
use crate::scoring::{ScoredPreference, Scorer};
use crate::{Error, Result};

/// The threshold value deployed in production.
pub const DEPLOYED_THRESHOLD: f64 = 0.69;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlacklistEntry {
    pub pref_id: String,
    pub score: f64,
    pub best_category: Option<SensitiveCategory>,
    pub listed_at: DateTime<Utc>,
}

/// The set of preferences treated as sensitive: everything scoring at or
/// above the trained threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blacklist {
    pub threshold: f64,
    entries: BTreeMap<String, BlacklistEntry>,
}

impl Blacklist {
    pub fn get(&self, pref_id: &str) -> Option<&BlacklistEntry> {
        self.entries.get(pref_id)
    }

    pub fn contains(&self, pref_id: &str) -> bool {
        self.entries.contains_key(pref_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &BlacklistEntry> {
        self.entries.values()
    }

    /// Adds a preference scored on the fly; rejects scores below the
    /// threshold so the blacklist invariant cannot be broken.
    pub fn insert(&mut self, entry: BlacklistEntry) -> Result<()> {
        if entry.score < self.threshold {
            return Err(Error::InvalidParameter(format!(
                "score {} below blacklist threshold {}",
                entry.score, self.threshold
            )));
        }
        self.entries.insert(entry.pref_id.clone(), entry);
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let display = path.as_ref().display().to_string();
        let text = serde_json::to_string_pretty(self).expect("blacklist serializes");
        std::fs::write(path.as_ref(), text).map_err(|e| Error::io(display, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(display.clone(), e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: display,
            source: e,
        })
    }
}

/// Every scored preference with score >= threshold, boundary inclusive.
pub fn build_blacklist(
    scored: &[ScoredPreference],
    threshold: f64,
    listed_at: DateTime<Utc>,
) -> Result<Blacklist> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::InvalidParameter(format!(
            "blacklist threshold {threshold} outside [0, 1]"
        )));
    }
    let entries = scored
        .iter()
        .filter(|s| s.score >= threshold)
        .map(|s| {
            (
                s.pref_id.clone(),
                BlacklistEntry {
                    pref_id: s.pref_id.clone(),
                    score: s.score,
                    best_category: s.best_category,
                    listed_at,
                },
            )
        })
        .collect();
    Ok(Blacklist { threshold, entries })
}

/// One preference as it appears in a user's session snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPreference {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disambiguation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason_text: Option<String>,
}

impl SnapshotPreference {
    fn reason(&self) -> AssignmentReason {
        match &self.reason_text {
            Some(text) => AssignmentReason {
                code: ReasonCode::from_raw_text(text),
                raw_text: Some(text.clone()),
            },
            None => AssignmentReason {
                code: ReasonCode::Unknown,
                raw_text: None,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AuditEventKind {
    Added,
    Deleted,
}

/// One append-only log record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEvent {
    pub user_id: String,
    pub pref_id: String,
    pub name: String,
    pub kind: AuditEventKind,
    pub timestamp: DateTime<Utc>,
    pub reason: AssignmentReason,
    pub score: f64,
}

/// Wire form of a snapshot ingest request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRequest {
    pub user_id: String,
    pub timestamp: DateTime<Utc>,
    pub preferences: Vec<SnapshotPreference>,
}

/// Wire form of the blacklist listing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlacklistView {
    pub threshold: f64,
    pub entries: Vec<BlacklistEntry>,
}

impl BlacklistView {
    pub fn of(blacklist: &Blacklist) -> Self {
        BlacklistView {
            threshold: blacklist.threshold,
            entries: blacklist.entries().cloned().collect(),
        }
    }
}

/// The result of one snapshot ingest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditDiff {
    pub added: Vec<AuditEvent>,
    pub deleted: Vec<AuditEvent>,
}

impl AuditDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.deleted.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EntryStatus {
    Active,
    Deleted,
}

/// One blacklisted preference in a user's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub pref_id: String,
    pub name: String,
    pub score: f64,
    pub added_at: DateTime<Utc>,
    pub deleted_at: Option<DateTime<Utc>>,
    pub reason: AssignmentReason,
}

impl AuditEntry {
    pub fn status(&self) -> EntryStatus {
        if self.deleted_at.is_some() {
            EntryStatus::Deleted
        } else {
            EntryStatus::Active
        }
    }
}

/// One row of a user-facing report: the entry plus display fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReportEntry {
    pub pref_id: String,
    pub name: String,
    pub added_at: DateTime<Utc>,
    pub deleted_at: Option<DateTime<Utc>>,
    pub reason: AssignmentReason,
    pub reason_description: String,
    pub status: EntryStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAuditRecord {
    pub user_id: String,
    /// Sorted by added_at descending (newest first), pref_id ascending on
    /// ties.
    pub entries: Vec<AuditReportEntry>,
}

/// Per-user audit histories over a blacklist, optionally backed by an
/// append-only JSON-lines event log.
#[derive(Debug)]
pub struct AuditStore {
    blacklist: Blacklist,
    users: HashMap<String, Vec<AuditEntry>>,
    latest: HashMap<String, DateTime<Utc>>,
    log_path: Option<PathBuf>,
}

impl AuditStore {
    /// A store with no persistence.
    pub fn in_memory(blacklist: Blacklist) -> Self {
        AuditStore {
            blacklist,
            users: HashMap::new(),
            latest: HashMap::new(),
            log_path: None,
        }
    }

    /// Opens (or creates) a store on an event log, replaying any existing
    /// events.
    pub fn open(blacklist: Blacklist, log_path: impl AsRef<Path>) -> Result<Self> {
        let path = log_path.as_ref().to_path_buf();
        let mut store = AuditStore::in_memory(blacklist);
        if path.exists() {
            let display = path.display().to_string();
            let file = std::fs::File::open(&path).map_err(|e| Error::io(display.clone(), e))?;
            for (i, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(display.clone(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: AuditEvent =
                    serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
                        path: display.clone(),
                        line: i as u64 + 1,
                        message: e.to_string(),
                    })?;
                store.apply_event(&event);
            }
        }
        store.log_path = Some(path);
        Ok(store)
    }

    pub fn blacklist(&self) -> &Blacklist {
        &self.blacklist
    }

    /// The fold step: applies one event to the in-memory state.
    pub fn apply_event(&mut self, event: &AuditEvent) {
        let entries = self.users.entry(event.user_id.clone()).or_default();
        match event.kind {
            AuditEventKind::Added => entries.push(AuditEntry {
                pref_id: event.pref_id.clone(),
                name: event.name.clone(),
                score: event.score,
                added_at: event.timestamp,
                deleted_at: None,
                reason: event.reason.clone(),
            }),
            AuditEventKind::Deleted => {
                if let Some(entry) = entries
                    .iter_mut()
                    .find(|e| e.pref_id == event.pref_id && e.deleted_at.is_none())
                {
                    entry.deleted_at = Some(event.timestamp);
                }
            }
        }
        let latest = self.latest.entry(event.user_id.clone()).or_insert(event.timestamp);
        if event.timestamp > *latest {
            *latest = event.timestamp;
        }
    }

    fn append_to_log(&self, events: &[&AuditEvent]) -> Result<()> {
        let Some(path) = &self.log_path else {
            return Ok(());
        };
        let display = path.display().to_string();
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(display.clone(), e))?;
        let mut buf = String::new();
        for event in events {
            buf.push_str(&serde_json::to_string(event).expect("event serializes"));
            buf.push('\n');
        }
        file.write_all(buf.as_bytes())
            .map_err(|e| Error::io(display, e))
    }

    /// Compares a session snapshot against the blacklist and the user's
    /// current history.
    ///
    /// Preferences unknown to the blacklist are scored on the fly when a
    /// `scorer` is supplied and blacklisted if they meet the threshold.
    /// Timestamps must be monotone per user; a snapshot at the user's
    /// latest timestamp is allowed (idempotent retry), earlier ones are
    /// rejected.
    pub fn ingest_snapshot(
        &mut self,
        user_id: &str,
        snapshot: &[SnapshotPreference],
        timestamp: DateTime<Utc>,
        scorer: Option<&Scorer<'_>>,
    ) -> Result<AuditDiff> {
        if let Some(&latest) = self.latest.get(user_id) {
            if timestamp < latest {
                return Err(Error::NonMonotonicTimestamp {
                    user_id: user_id.to_string(),
                    got: timestamp.to_rfc3339(),
                    latest: latest.to_rfc3339(),
                });
            }
        }

        // Resolve which snapshot preferences are blacklisted, scoring
        // unknown ones on the fly.
        let mut listed: Vec<(&SnapshotPreference, f64)> = Vec::new();
        for pref in snapshot {
            if let Some(entry) = self.blacklist.get(&pref.id) {
                listed.push((pref, entry.score));
            } else if let Some(scorer) = scorer {
                let scored =
                    scorer.score_free_text(&pref.id, &pref.name, pref.disambiguation.as_deref());
                if scored.score >= self.blacklist.threshold {
                    self.blacklist.insert(BlacklistEntry {
                        pref_id: pref.id.clone(),
                        score: scored.score,
                        best_category: scored.best_category,
                        listed_at: timestamp,
                    })?;
                    listed.push((pref, scored.score));
                }
            }
        }

        let entries = self.users.entry(user_id.to_string()).or_default();
        let mut diff = AuditDiff::default();

        // additions: blacklisted snapshot preferences with no open entry
        for (pref, score) in &listed {
            let open = entries
                .iter()
                .any(|e| e.pref_id == pref.id && e.deleted_at.is_none());
            if !open {
                diff.added.push(AuditEvent {
                    user_id: user_id.to_string(),
                    pref_id: pref.id.clone(),
                    name: pref.name.clone(),
                    kind: AuditEventKind::Added,
                    timestamp,
                    reason: pref.reason(),
                    score: *score,
                });
            }
        }
        // deletions: open entries whose preference left the snapshot
        for entry in entries.iter() {
            if entry.deleted_at.is_none() && !snapshot.iter().any(|p| p.id == entry.pref_id) {
                diff.deleted.push(AuditEvent {
                    user_id: user_id.to_string(),
                    pref_id: entry.pref_id.clone(),
                    name: entry.name.clone(),
                    kind: AuditEventKind::Deleted,
                    timestamp,
                    reason: entry.reason.clone(),
                    score: entry.score,
                });
            }
        }

        let events: Vec<&AuditEvent> = diff.added.iter().chain(diff.deleted.iter()).collect();
        self.append_to_log(&events)?;
        let events: Vec<AuditEvent> = events.into_iter().cloned().collect();
        for event in &events {
            self.apply_event(event);
        }
        // advance the user's clock even when the diff is empty
        let latest = self.latest.entry(user_id.to_string()).or_insert(timestamp);
        if timestamp > *latest {
            *latest = timestamp;
        }
        Ok(diff)
    }

    /// The user's full history, newest additions first. Unknown users get
    /// an empty record.
    pub fn user_report(&self, user_id: &str) -> UserAuditRecord {
        let mut entries: Vec<AuditReportEntry> = self
            .users
            .get(user_id)
            .map(|entries| {
                entries
                    .iter()
                    .map(|e| AuditReportEntry {
                        pref_id: e.pref_id.clone(),
                        name: e.name.clone(),
                        added_at: e.added_at,
                        deleted_at: e.deleted_at,
                        reason: e.reason.clone(),
                        reason_description: e.reason.code.description().to_string(),
                        status: e.status(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        entries.sort_by(|a, b| {
            b.added_at
                .cmp(&a.added_at)
                .then_with(|| a.pref_id.cmp(&b.pref_id))
        });
        UserAuditRecord {
            user_id: user_id.to_string(),
            entries,
        }
    }

    pub fn user_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.users.keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Rewrites the log as the minimal event sequence reproducing the
    /// current state.
    pub fn compact(&self) -> Result<()> {
        let Some(path) = &self.log_path else {
            return Ok(());
        };
        let mut events: Vec<AuditEvent> = Vec::new();
        let mut user_ids: Vec<&String> = self.users.keys().collect();
        user_ids.sort();
        for user_id in user_ids {
            for entry in &self.users[user_id] {
                events.push(AuditEvent {
                    user_id: user_id.clone(),
                    pref_id: entry.pref_id.clone(),
                    name: entry.name.clone(),
                    kind: AuditEventKind::Added,
                    timestamp: entry.added_at,
                    reason: entry.reason.clone(),
                    score: entry.score,
                });
                if let Some(deleted_at) = entry.deleted_at {
                    events.push(AuditEvent {
                        user_id: user_id.clone(),
                        pref_id: entry.pref_id.clone(),
                        name: entry.name.clone(),
                        kind: AuditEventKind::Deleted,
                        timestamp: deleted_at,
                        reason: entry.reason.clone(),
                        score: entry.score,
                    });
                }
            }
        }
        events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
        let display = path.display().to_string();
        let mut buf = String::new();
        for event in &events {
            buf.push_str(&serde_json::to_string(event).expect("event serializes"));
            buf.push('\n');
        }
        std::fs::write(path, buf).map_err(|e| Error::io(display, e))
    }
}
