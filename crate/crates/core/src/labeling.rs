//! Panelist vote aggregation: majority labels and Fleiss' Kappa agreement.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::SensitiveCategory;
use crate::{Error, Result};

/// The 7-way vote taxonomy: the five sensitive categories plus Other and
/// NotKnown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VoteCategory {
    Politics,
    Religion,
    Health,
    Ethnicity,
    Sexuality,
    Other,
    NotKnown,
}

impl VoteCategory {
    pub const ALL: [VoteCategory; 7] = [
        VoteCategory::Politics,
        VoteCategory::Religion,
        VoteCategory::Health,
        VoteCategory::Ethnicity,
        VoteCategory::Sexuality,
        VoteCategory::Other,
        VoteCategory::NotKnown,
    ];

    pub fn sensitive(&self) -> Option<SensitiveCategory> {
        match self {
            VoteCategory::Politics => Some(SensitiveCategory::Politics),
            VoteCategory::Religion => Some(SensitiveCategory::Religion),
            VoteCategory::Health => Some(SensitiveCategory::Health),
            VoteCategory::Ethnicity => Some(SensitiveCategory::Ethnicity),
            VoteCategory::Sexuality => Some(SensitiveCategory::Sexuality),
            VoteCategory::Other | VoteCategory::NotKnown => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            VoteCategory::Politics => "Politics",
            VoteCategory::Religion => "Religion",
            VoteCategory::Health => "Health",
            VoteCategory::Ethnicity => "Ethnicity",
            VoteCategory::Sexuality => "Sexuality",
            VoteCategory::Other => "Other",
            VoteCategory::NotKnown => "NotKnown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "politics" => Some(VoteCategory::Politics),
            "religion" => Some(VoteCategory::Religion),
            "health" => Some(VoteCategory::Health),
            "ethnicity" => Some(VoteCategory::Ethnicity),
            "sexuality" => Some(VoteCategory::Sexuality),
            "other" => Some(VoteCategory::Other),
            "notknown" | "not known" | "not_known" => Some(VoteCategory::NotKnown),
            _ => None,
        }
    }
}

impl fmt::Display for VoteCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One panelist vote on one preference.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub pref_id: String,
    pub panelist_id: String,
    pub category: VoteCategory,
}

/// Per-preference vote multisets. Items whose vote count differs from the
/// protocol's `raters_per_item` are flagged, not silently included.
#[derive(Debug, Clone)]
pub struct VoteSheet {
    items: BTreeMap<String, Vec<VoteCategory>>,
    pub raters_per_item: usize,
}

impl VoteSheet {
    pub const DEFAULT_RATERS: usize = 5;

    pub fn from_votes(votes: &[Vote], raters_per_item: usize) -> Result<Self> {
        if raters_per_item == 0 {
            return Err(Error::InvalidParameter("raters_per_item must be > 0".into()));
        }
        let mut items: BTreeMap<String, Vec<VoteCategory>> = BTreeMap::new();
        let mut seen: std::collections::HashSet<(&str, &str)> = std::collections::HashSet::new();
        for v in votes {
            if !seen.insert((v.pref_id.as_str(), v.panelist_id.as_str())) {
                return Err(Error::InvalidInput(format!(
                    "duplicate vote by panelist {} on preference {}",
                    v.panelist_id, v.pref_id
                )));
            }
            items.entry(v.pref_id.clone()).or_default().push(v.category);
        }
        Ok(VoteSheet {
            items,
            raters_per_item,
        })
    }

    pub fn item_count(&self) -> usize {
        self.items.len()
    }

    pub fn items(&self) -> impl Iterator<Item = (&String, &Vec<VoteCategory>)> {
        self.items.iter()
    }

    /// Items whose vote count deviates from the protocol.
    pub fn flagged(&self) -> Vec<&String> {
        self.items
            .iter()
            .filter(|(_, votes)| votes.len() != self.raters_per_item)
            .map(|(id, _)| id)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Sensitive,
    NonSensitive,
}

/// Plurality sensitive category of a Sensitive item; `Mixed` marks ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignedCategory {
    Single(SensitiveCategory),
    Mixed,
}

impl fmt::Display for AssignedCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AssignedCategory::Single(c) => f.write_str(c.as_str()),
            AssignedCategory::Mixed => f.write_str("Mixed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDecision {
    pub pref_id: String,
    pub sensitive_votes: usize,
    pub label: Label,
    pub assigned_category: Option<AssignedCategory>,
}

/// Decisions plus items excluded for violating the exactly-N-votes protocol.
#[derive(Debug, Clone, Default)]
pub struct MajorityOutcome {
    pub decisions: Vec<LabelDecision>,
    pub excluded: Vec<(String, String)>,
}

/// Majority quorum: strict majority of the rater count.
pub fn quorum(raters: usize) -> usize {
    (raters + 2) / 2 // ceil((raters + 1) / 2)
}

/// Labels each item Sensitive when at least a quorum of votes fall in the
/// five sensitive categories; the assigned category is the plurality among
/// those votes, `Mixed` on ties.
pub fn majority_label(sheet: &VoteSheet) -> MajorityOutcome {
    let quorum = quorum(sheet.raters_per_item);
    let mut outcome = MajorityOutcome::default();
    for (pref_id, votes) in sheet.items() {
        if votes.len() != sheet.raters_per_item {
            outcome.excluded.push((
                pref_id.clone(),
                format!(
                    "has {} votes, protocol requires {}",
                    votes.len(),
                    sheet.raters_per_item
                ),
            ));
            continue;
        }
        let mut per_category: BTreeMap<SensitiveCategory, usize> = BTreeMap::new();
        for v in votes {
            if let Some(cat) = v.sensitive() {
                *per_category.entry(cat).or_insert(0) += 1;
            }
        }
        let sensitive_votes: usize = per_category.values().sum();
        let label = if sensitive_votes >= quorum {
            Label::Sensitive
        } else {
            Label::NonSensitive
        };
        let assigned_category = if label == Label::Sensitive {
            let max = per_category.values().copied().max().unwrap_or(0);
            let leaders: Vec<SensitiveCategory> = per_category
                .iter()
                .filter(|(_, &n)| n == max)
                .map(|(&c, _)| c)
                .collect();
            Some(if leaders.len() == 1 {
                AssignedCategory::Single(leaders[0])
            } else {
                AssignedCategory::Mixed
            })
        } else {
            None
        };
        outcome.decisions.push(LabelDecision {
            pref_id: pref_id.clone(),
            sensitive_votes,
            label,
            assigned_category,
        });
    }
    outcome
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaMode {
    /// Items restricted to majority-Sensitive preferences, ratings to their
    /// sensitive-category votes (unequal per-item rating counts).
    Restricted,
    /// All items, all 7 vote categories.
    All,
}

/// Fleiss' Kappa over a restricted or full sheet.
#[derive(Debug, Clone)]
pub struct AgreementReport {
    pub kappa: f64,
    pub item_agreements: Vec<(String, f64)>,
    pub mean_agreement: f64,
    pub expected_agreement: f64,
    pub item_count: usize,
    pub category_marginals: Vec<(String, f64)>,
    /// Items dropped because they had fewer than 2 ratings in the
    /// restricted view.
    pub excluded_items: usize,
}

/// Standard Fleiss computation generalized to unequal per-item rating
/// counts: `P_i = sum_k n_ik (n_ik - 1) / (n_i (n_i - 1))`, expected
/// agreement from the pooled category marginals.
pub fn fleiss_kappa(sheet: &VoteSheet, mode: KappaMode) -> Result<AgreementReport> {
    // (item id, category label per rating)
    let rated_items: Vec<(String, Vec<&'static str>)> = match mode {
        KappaMode::All => sheet
            .items()
            .map(|(id, votes)| (id.clone(), votes.iter().map(|v| v.as_str()).collect()))
            .collect(),
        KappaMode::Restricted => {
            let outcome = majority_label(sheet);
            let sensitive: std::collections::HashSet<&String> = outcome
                .decisions
                .iter()
                .filter(|d| d.label == Label::Sensitive)
                .map(|d| &d.pref_id)
                .collect();
            sheet
                .items()
                .filter(|(id, _)| sensitive.contains(id))
                .map(|(id, votes)| {
                    (
                        id.clone(),
                        votes
                            .iter()
                            .filter_map(|v| v.sensitive().map(|c| c.as_str()))
                            .collect(),
                    )
                })
                .collect()
        }
    };

    let mut excluded_items = 0;
    let mut kept: Vec<(String, Vec<&'static str>)> = Vec::new();
    for (id, ratings) in rated_items {
        if ratings.len() < 2 {
            excluded_items += 1;
        } else {
            kept.push((id, ratings));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyInput(
            "no items with at least 2 ratings for the kappa computation".into(),
        ));
    }
    if kept.len() < 2 {
        return Err(Error::InvalidInput(
            "Fleiss' Kappa needs at least 2 items".into(),
        ));
    }

    let mut item_agreements = Vec::with_capacity(kept.len());
    let mut marginal_counts: BTreeMap<&'static str, u64> = BTreeMap::new();
    let mut total_ratings = 0u64;
    for (id, ratings) in &kept {
        let n = ratings.len() as f64;
        let mut counts: BTreeMap<&'static str, u64> = BTreeMap::new();
        for &r in ratings {
            *counts.entry(r).or_insert(0) += 1;
            *marginal_counts.entry(r).or_insert(0) += 1;
        }
        total_ratings += ratings.len() as u64;
        let same_pairs: f64 = counts.values().map(|&c| c as f64 * (c as f64 - 1.0)).sum();
        item_agreements.push((id.clone(), same_pairs / (n * (n - 1.0))));
    }

    let mean_agreement =
        item_agreements.iter().map(|(_, p)| p).sum::<f64>() / item_agreements.len() as f64;
    let category_marginals: Vec<(String, f64)> = marginal_counts
        .iter()
        .map(|(&k, &c)| (k.to_string(), c as f64 / total_ratings as f64))
        .collect();
    let expected_agreement: f64 = category_marginals.iter().map(|(_, p)| p * p).sum();

    let kappa = if (1.0 - expected_agreement).abs() < 1e-15 {
        // every rating fell in one category; declare perfect agreement when
        // observed agreement is also perfect
        if (mean_agreement - 1.0).abs() < 1e-15 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        (mean_agreement - expected_agreement) / (1.0 - expected_agreement)
    };

    Ok(AgreementReport {
        kappa,
        item_count: item_agreements.len(),
        item_agreements,
        mean_agreement,
        expected_agreement,
        category_marginals,
        excluded_items,
    })
}

/// Percentage of Sensitive items per assigned category; `Mixed` reported as
/// its own bucket.
pub fn category_distribution(decisions: &[LabelDecision]) -> Result<Vec<(String, f64)>> {
    let sensitive: Vec<&LabelDecision> = decisions
        .iter()
        .filter(|d| d.label == Label::Sensitive)
        .collect();
    if sensitive.is_empty() {
        return Err(Error::EmptyInput(
            "no Sensitive decisions; category distribution undefined".into(),
        ));
    }
    let total = sensitive.len() as f64;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in &sensitive {
        let key = d
            .assigned_category
            .map(|c| c.to_string())
            .unwrap_or_else(|| "Mixed".into());
        *counts.entry(key).or_insert(0) += 1;
    }
    Ok(counts
        .into_iter()
        .map(|(k, n)| (k, 100.0 * n as f64 / total))
        .collect())
}

#[derive(Debug, Deserialize)]
struct VoteRow {
    pref_id: String,
    panelist_id: String,
    category: String,
}

/// Loads votes from CSV (`pref_id,panelist_id,category`).
pub fn load_votes(path: impl AsRef<Path>) -> Result<Vec<Vote>> {
    let display = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(display.clone(), io),
            other => Error::MalformedRow {
                path: display.clone(),
                line: 0,
                message: format!("{other:?}"),
            },
        }
    })?;
    let mut votes = Vec::new();
    for (i, result) in reader.deserialize::<VoteRow>().enumerate() {
        let row = result.map_err(|e| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 2,
            message: e.to_string(),
        })?;
        let category = VoteCategory::parse(&row.category).ok_or_else(|| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 2,
            message: format!("unknown category {:?}", row.category),
        })?;
        votes.push(Vote {
            pref_id: row.pref_id,
            panelist_id: row.panelist_id,
            category,
        });
    }
    Ok(votes)
}

/// Writes decisions as CSV (`pref_id,sensitive_votes,label,assigned_category`).
pub fn save_decisions(decisions: &[LabelDecision], path: impl AsRef<Path>) -> Result<()> {
    let display = path.as_ref().display().to_string();
    let mut writer = csv::Writer::from_path(path.as_ref())
        .map_err(|e| Error::InvalidInput(format!("cannot write {display}: {e}")))?;
    writer
        .write_record(["pref_id", "sensitive_votes", "label", "assigned_category"])
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for d in decisions {
        writer
            .write_record([
                d.pref_id.as_str(),
                &d.sensitive_votes.to_string(),
                match d.label {
                    Label::Sensitive => "Sensitive",
                    Label::NonSensitive => "NonSensitive",
                },
                &d.assigned_category
                    .map(|c| c.to_string())
                    .unwrap_or_default(),
            ])
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(display, e))?;
    Ok(())
}

/// Loads a decisions CSV back.
pub fn load_decisions(path: impl AsRef<Path>) -> Result<Vec<LabelDecision>> {
    let display = path.as_ref().display().to_string();
    let mut reader = csv::Reader::from_path(path.as_ref()).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(display.clone(), io),
        other => Error::MalformedRow {
            path: display.clone(),
            line: 0,
            message: format!("{other:?}"),
        },
    })?;
    let mut out = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let record = result.map_err(|e| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 2,
            message: e.to_string(),
        })?;
        let bad = |msg: String| Error::MalformedRow {
            path: display.clone(),
            line: i as u64 + 2,
            message: msg,
        };
        let pref_id = record.get(0).ok_or_else(|| bad("missing pref_id".into()))?;
        let sensitive_votes: usize = record
            .get(1)
            .ok_or_else(|| bad("missing sensitive_votes".into()))?
            .parse()
            .map_err(|e| bad(format!("bad sensitive_votes: {e}")))?;
        let label = match record.get(2) {
            Some("Sensitive") => Label::Sensitive,
            Some("NonSensitive") => Label::NonSensitive,
            other => return Err(bad(format!("bad label {other:?}"))),
        };
        let assigned_category = match record.get(3).unwrap_or("") {
            "" => None,
            "Mixed" => Some(AssignedCategory::Mixed),
            s => Some(AssignedCategory::Single(
                SensitiveCategory::parse(s).ok_or_else(|| bad(format!("bad category {s:?}")))?,
            )),
        };
        out.push(LabelDecision {
            pref_id: pref_id.to_string(),
            sensitive_votes,
            label,
            assigned_category,
        });
    }
    Ok(out)
}

/// Expands a votes-per-item histogram (`histogram[v]` items with `v`
/// sensitive votes) into a synthetic sheet: sensitive votes are Politics,
/// the rest Other.
pub fn sheet_from_histogram(histogram: &[usize], raters: usize) -> Result<VoteSheet> {
    let mut votes = Vec::new();
    let mut item = 0usize;
    for (sensitive_count, &items) in histogram.iter().enumerate() {
        if sensitive_count > raters {
            return Err(Error::InvalidParameter(format!(
                "histogram bucket {sensitive_count} exceeds rater count {raters}"
            )));
        }
        for _ in 0..items {
            let pref_id = format!("pref{item:06}");
            for rater in 0..raters {
                votes.push(Vote {
                    pref_id: pref_id.clone(),
                    panelist_id: format!("panelist{rater}"),
                    category: if rater < sensitive_count {
                        VoteCategory::Politics
                    } else {
                        VoteCategory::Other
                    },
                });
            }
            item += 1;
        }
    }
    VoteSheet::from_votes(&votes, raters)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sheet(items: &[(&str, &[VoteCategory])], raters: usize) -> VoteSheet {
        let mut votes = Vec::new();
        for (id, cats) in items {
            for (i, &c) in cats.iter().enumerate() {
                votes.push(Vote {
                    pref_id: id.to_string(),
                    panelist_id: format!("p{i}"),
                    category: c,
                });
            }
        }
        VoteSheet::from_votes(&votes, raters).unwrap()
    }

    use VoteCategory::*;

    #[test]
    fn three_of_five_is_sensitive() {
        let s = sheet(&[("x", &[Politics, Politics, Politics, Other, NotKnown])], 5);
        let out = majority_label(&s);
        let d = &out.decisions[0];
        assert_eq!(d.label, Label::Sensitive);
        assert_eq!(d.sensitive_votes, 3);
        assert_eq!(
            d.assigned_category,
            Some(AssignedCategory::Single(SensitiveCategory::Politics))
        );
    }

    #[test]
    fn two_of_five_is_non_sensitive() {
        let s = sheet(&[("x", &[Health, Health, Other, Other, Other])], 5);
        let d = &majority_label(&s).decisions[0];
        assert_eq!(d.label, Label::NonSensitive);
        assert_eq!(d.assigned_category, None);
    }

    #[test]
    fn plurality_tie_is_mixed() {
        let s = sheet(&[("x", &[Politics, Politics, Health, Health, Other])], 5);
        let d = &majority_label(&s).decisions[0];
        assert_eq!(d.label, Label::Sensitive);
        assert_eq!(d.assigned_category, Some(AssignedCategory::Mixed));
    }

    #[test]
    fn wrong_vote_count_is_excluded() {
        let s = sheet(&[("x", &[Politics, Politics, Politics]), ("y", &[Other; 5])], 5);
        let out = majority_label(&s);
        assert_eq!(out.decisions.len(), 1);
        assert_eq!(out.excluded.len(), 1);
        assert_eq!(out.excluded[0].0, "x");
    }

    #[test]
    fn vote_histogram_replay_counts_sensitive() {
        let sheet = sheet_from_histogram(&[1054, 767, 539, 422, 449, 1221], 5).unwrap();
        let out = majority_label(&sheet);
        assert_eq!(out.decisions.len(), 4452);
        let sensitive = out
            .decisions
            .iter()
            .filter(|d| d.label == Label::Sensitive)
            .count();
        assert_eq!(sensitive, 2092);
    }

    #[test]
    fn majority_is_monotone_in_sensitive_votes() {
        // flipping one Other vote to a sensitive category never loses the
        // Sensitive label
        let base = sheet(&[("x", &[Politics, Politics, Politics, Other, Other])], 5);
        let more = sheet(&[("x", &[Politics, Politics, Politics, Health, Other])], 5);
        assert_eq!(majority_label(&base).decisions[0].label, Label::Sensitive);
        assert_eq!(majority_label(&more).decisions[0].label, Label::Sensitive);
    }

    #[test]
    fn quorum_generalizes() {
        assert_eq!(quorum(5), 3);
        assert_eq!(quorum(3), 2);
        assert_eq!(quorum(4), 3);
        assert_eq!(quorum(7), 4);
    }

    #[test]
    fn fleiss_hand_example() {
        // item1 = PPPPP, item2 = PPPHH over 2 categories:
        // P1 = 1, P2 = 0.4, mean 0.7, marginals 0.8/0.2, Pe = 0.68,
        // kappa = 0.02 / 0.32 = 0.0625
        let s = sheet(
            &[
                ("i1", &[Politics; 5]),
                ("i2", &[Politics, Politics, Politics, Health, Health]),
            ],
            5,
        );
        let report = fleiss_kappa(&s, KappaMode::All).unwrap();
        assert!((report.mean_agreement - 0.7).abs() < 1e-12);
        assert!((report.expected_agreement - 0.68).abs() < 1e-12);
        assert!((report.kappa - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn perfect_agreement_two_categories() {
        let s = sheet(
            &[
                ("i1", &[Politics; 5]),
                ("i2", &[Health; 5]),
                ("i3", &[Politics; 5]),
            ],
            5,
        );
        let report = fleiss_kappa(&s, KappaMode::All).unwrap();
        assert_eq!(report.kappa, 1.0);
    }

    #[test]
    fn degenerate_single_category_unanimous_is_one() {
        let s = sheet(&[("i1", &[Politics; 5]), ("i2", &[Politics; 5])], 5);
        let report = fleiss_kappa(&s, KappaMode::All).unwrap();
        assert_eq!(report.kappa, 1.0);
    }

    #[test]
    fn restricted_mode_drops_non_sensitive_items_and_votes() {
        let s = sheet(
            &[
                // sensitive with 3 sensitive ratings
                ("i1", &[Politics, Politics, Politics, Other, Other]),
                // non-sensitive: dropped entirely
                ("i2", &[Other; 5]),
                // sensitive with 4 sensitive ratings
                ("i3", &[Health, Health, Health, Religion, Other]),
            ],
            5,
        );
        let report = fleiss_kappa(&s, KappaMode::Restricted).unwrap();
        assert_eq!(report.item_count, 2);
        // i1: 3 Politics ratings -> P = 1; i3: 3 Health + 1 Religion over
        // 4 ratings -> P = 6/12 = 0.5
        let p: BTreeMap<&str, f64> = report
            .item_agreements
            .iter()
            .map(|(id, p)| (id.as_str(), *p))
            .collect();
        assert!((p["i1"] - 1.0).abs() < 1e-12);
        assert!((p["i3"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn kappa_invariant_to_item_and_rater_permutation() {
        let items: [(&str, &[VoteCategory]); 3] = [
            ("a", &[Politics, Politics, Health, Other, Other]),
            ("b", &[Health, Health, Health, Health, Politics]),
            ("c", &[Religion, Religion, Other, Other, NotKnown]),
        ];
        let base = fleiss_kappa(&sheet(&items, 5), KappaMode::All).unwrap();
        let permuted_items: [(&str, &[VoteCategory]); 3] = [items[2], items[0], items[1]];
        let permuted = fleiss_kappa(&sheet(&permuted_items, 5), KappaMode::All).unwrap();
        assert!((base.kappa - permuted.kappa).abs() <= 1e-12);
        // permuting ratings within an item (rater identity) is a no-op too
        let shuffled: [(&str, &[VoteCategory]); 3] = [
            ("a", &[Other, Politics, Other, Health, Politics]),
            ("b", &[Politics, Health, Health, Health, Health]),
            ("c", &[NotKnown, Other, Religion, Other, Religion]),
        ];
        let r = fleiss_kappa(&sheet(&shuffled, 5), KappaMode::All).unwrap();
        assert!((base.kappa - r.kappa).abs() <= 1e-12);
    }

    #[test]
    fn single_item_is_an_error() {
        let s = sheet(&[("i1", &[Politics; 5])], 5);
        assert!(fleiss_kappa(&s, KappaMode::All).is_err());
    }

    #[test]
    fn restricted_mode_all_excluded_is_an_error() {
        let s = sheet(&[("i1", &[Other; 5]), ("i2", &[NotKnown; 5])], 5);
        assert!(fleiss_kappa(&s, KappaMode::Restricted).is_err());
    }

    #[test]
    fn category_distribution_hand_case() {
        let decide = |id: &str, cat: AssignedCategory| LabelDecision {
            pref_id: id.into(),
            sensitive_votes: 3,
            label: Label::Sensitive,
            assigned_category: Some(cat),
        };
        let decisions = vec![
            decide("a", AssignedCategory::Single(SensitiveCategory::Politics)),
            decide("b", AssignedCategory::Single(SensitiveCategory::Politics)),
            decide("c", AssignedCategory::Single(SensitiveCategory::Religion)),
            decide("d", AssignedCategory::Single(SensitiveCategory::Health)),
        ];
        let dist = category_distribution(&decisions).unwrap();
        let get = |k: &str| dist.iter().find(|(c, _)| c == k).unwrap().1;
        assert_eq!(get("Politics"), 50.0);
        assert_eq!(get("Religion"), 25.0);
        assert_eq!(get("Health"), 25.0);
        let sum: f64 = dist.iter().map(|(_, p)| p).sum();
        assert!((sum - 100.0).abs() < 0.01);
    }

    #[test]
    fn category_distribution_all_mixed() {
        let decisions = vec![LabelDecision {
            pref_id: "a".into(),
            sensitive_votes: 4,
            label: Label::Sensitive,
            assigned_category: Some(AssignedCategory::Mixed),
        }];
        let dist = category_distribution(&decisions).unwrap();
        assert_eq!(dist, vec![("Mixed".to_string(), 100.0)]);
    }

    #[test]
    fn category_distribution_no_sensitive_is_undefined() {
        let decisions = vec![LabelDecision {
            pref_id: "a".into(),
            sensitive_votes: 0,
            label: Label::NonSensitive,
            assigned_category: None,
        }];
        assert!(category_distribution(&decisions).is_err());
    }

    #[test]
    fn decisions_csv_roundtrip() {
        let decisions = vec![
            LabelDecision {
                pref_id: "a".into(),
                sensitive_votes: 4,
                label: Label::Sensitive,
                assigned_category: Some(AssignedCategory::Single(SensitiveCategory::Health)),
            },
            LabelDecision {
                pref_id: "b".into(),
                sensitive_votes: 1,
                label: Label::NonSensitive,
                assigned_category: None,
            },
        ];
        let f = tempfile::NamedTempFile::new().unwrap();
        save_decisions(&decisions, f.path()).unwrap();
        assert_eq!(load_decisions(f.path()).unwrap(), decisions);
    }
}
