//! Union-audience reach and population exposure metrics.
//!
//! `FFB(C, N)` is the percentage of platform users in country (or country
//! set) C assigned at least one of the top-N sensitive preferences; `FC` is
//! the same numerator over the country's total population. Reach comes from
//! a pluggable [`AudienceOracle`]: an exact synthetic-population simulator
//! or recorded fixtures keyed by canonicalized filters.
//!
//! Queries with more than 1000 interests are rejected client-side, and the
//! known-invalid fixed reach (2.1B) is treated as a sentinel that must never
//! enter metric arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::PopulationTable;
use crate::{Error, Result};

/// Hard cap the reach API places on the interest list.
pub const INTEREST_CAP: usize = 1000;

/// The fixed invalid value returned for over-cap queries.
pub const SENTINEL_REACH: u64 = 2_100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Gender {
    All,
    Male,
    Female,
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::All => "All",
            Gender::Male => "Male",
            Gender::Female => "Female",
        })
    }
}

/// An audience definition: country set, OR-semantics interest set and an
/// optional demographic restriction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceFilter {
    pub countries: Vec<String>,
    pub interests: BTreeSet<String>,
    pub gender: Gender,
    pub age_range: Option<(u32, u32)>,
}

impl AudienceFilter {
    pub fn country(code: impl Into<String>) -> Self {
        AudienceFilter {
            countries: vec![code.into()],
            interests: BTreeSet::new(),
            gender: Gender::All,
            age_range: None,
        }
    }

    pub fn countries(codes: &[String]) -> Self {
        AudienceFilter {
            countries: codes.to_vec(),
            interests: BTreeSet::new(),
            gender: Gender::All,
            age_range: None,
        }
    }

    pub fn with_interests<I: IntoIterator<Item = String>>(mut self, interests: I) -> Self {
        self.interests = interests.into_iter().collect();
        self
    }

    pub fn with_gender(mut self, gender: Gender) -> Self {
        self.gender = gender;
        self
    }

    pub fn with_age_range(mut self, lo: u32, hi: u32) -> Self {
        self.age_range = Some((lo, hi));
        self
    }

    /// Canonical text key: interest order and country order never matter.
    pub fn canonical_key(&self) -> String {
        let mut countries = self.countries.clone();
        countries.sort();
        let mut interests: Vec<&str> = self.interests.iter().map(String::as_str).collect();
        interests.sort_unstable();
        let age = match self.age_range {
            Some((lo, hi)) => format!("{lo}-{hi}"),
            None => "-".into(),
        };
        format!(
            "{}|{}|{}|{}",
            countries.join("+"),
            self.gender,
            age,
            interests.join(",")
        )
    }
}

/// Potential-reach count. `sentinel` marks the known-invalid fixed value;
/// sentinel results must never be used in metric arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReachResult {
    pub reach: u64,
    pub sentinel: bool,
}

/// Source of Potential Reach numbers. Implementations must be safe under
/// concurrent queries.
pub trait AudienceOracle: Sync {
    fn raw_reach(&self, filter: &AudienceFilter) -> Result<ReachResult>;
}

/// Guarded reach query: enforces the interest cap before touching the
/// oracle.
pub fn reach(oracle: &dyn AudienceOracle, filter: &AudienceFilter) -> Result<ReachResult> {
    if filter.interests.len() > INTEREST_CAP {
        return Err(Error::InterestCapExceeded {
            got: filter.interests.len(),
            cap: INTEREST_CAP,
        });
    }
    oracle.raw_reach(filter)
}

// ---------------------------------------------------------------------------
// Synthetic population simulator

/// One synthetic user.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub country: String,
    pub gender: Gender,
    pub age: u32,
    pub interests: BTreeSet<String>,
}

impl Person {
    fn matches_demo(&self, filter: &AudienceFilter) -> bool {
        if !filter.countries.iter().any(|c| c == &self.country) {
            return false;
        }
        if filter.gender != Gender::All && filter.gender != self.gender {
            return false;
        }
        if let Some((lo, hi)) = filter.age_range {
            if self.age < lo || self.age > hi {
                return false;
            }
        }
        true
    }

    fn matches(&self, filter: &AudienceFilter) -> bool {
        self.matches_demo(filter)
            && (filter.interests.is_empty()
                || filter.interests.iter().any(|i| self.interests.contains(i)))
    }
}

/// Deterministic synthetic population; the exact-count test oracle.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticPopulation {
    pub users: Vec<Person>,
    pub seed: u64,
}

impl AudienceOracle for SyntheticPopulation {
    fn raw_reach(&self, filter: &AudienceFilter) -> Result<ReachResult> {
        let reach = self.users.iter().filter(|u| u.matches(filter)).count() as u64;
        Ok(ReachResult {
            reach,
            sentinel: false,
        })
    }
}

impl SyntheticPopulation {
    /// Exact number of users in `countries` holding at least one of the
    /// given interests; the planted ground truth for exposure assertions.
    pub fn union_count(&self, countries: &[String], interests: &BTreeSet<String>) -> u64 {
        let filter = AudienceFilter::countries(countries).with_interests(interests.iter().cloned());
        self.users.iter().filter(|u| u.matches(&filter)).count() as u64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountrySpec {
    pub code: String,
    pub users: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterestSpec {
    pub id: String,
    /// Fraction of each country's users holding the interest, in [0, 1].
    /// Assigned as an exact rounded count per country.
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgeBand {
    pub lo: u32,
    pub hi: u32,
    pub weight: f64,
}

/// Generation spec for [`generate_population`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub countries: Vec<CountrySpec>,
    pub interests: Vec<InterestSpec>,
    /// Fraction of users generated as Female; the rest are Male.
    #[serde(default = "default_half")]
    pub gender_mix: f64,
    #[serde(default)]
    pub age_mix: Vec<AgeBand>,
    #[serde(default)]
    pub seed: u64,
}

fn default_half() -> f64 {
    0.5
}

/// Loads a population spec JSON file.
pub fn load_population_spec(path: impl AsRef<Path>) -> Result<PopulationSpec> {
    let display = path.as_ref().display().to_string();
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(display.clone(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: display,
        source: e,
    })
}

/// Builds a deterministic synthetic population. Interest popularity weights
/// become exact per-country member counts (`round(weight * users)`), so
/// planted fractions are recovered without sampling error.
pub fn generate_population(spec: &PopulationSpec, seed: u64) -> Result<SyntheticPopulation> {
    for i in &spec.interests {
        if !(0.0..=1.0).contains(&i.weight) || !i.weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "interest {} weight {} outside [0, 1]",
                i.id, i.weight
            )));
        }
    }
    if !(0.0..=1.0).contains(&spec.gender_mix) {
        return Err(Error::InvalidParameter(format!(
            "gender_mix {} outside [0, 1]",
            spec.gender_mix
        )));
    }
    for band in &spec.age_mix {
        if band.weight < 0.0 || !band.weight.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "age band {}-{} has negative weight",
                band.lo, band.hi
            )));
        }
        if band.lo > band.hi {
            return Err(Error::InvalidParameter(format!(
                "age band {}-{} is inverted",
                band.lo, band.hi
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut users = Vec::new();
    for country in &spec.countries {
        let n = country.users as usize;
        // exact gender counts, shuffled
        let females = (spec.gender_mix * n as f64).round() as usize;
        let mut genders: Vec<Gender> = (0..n)
            .map(|i| if i < females { Gender::Female } else { Gender::Male })
            .collect();
        genders.shuffle(&mut rng);

        // ages by band weights (largest remainder), uniform within a band
        let ages: Vec<u32> = if spec.age_mix.is_empty() {
            (0..n).map(|_| rng.random_range(13..=90)).collect()
        } else {
            let total_weight: f64 = spec.age_mix.iter().map(|b| b.weight).sum();
            if total_weight <= 0.0 {
                return Err(Error::InvalidParameter(
                    "age_mix weights sum to zero".into(),
                ));
            }
            let mut counts: Vec<usize> = spec
                .age_mix
                .iter()
                .map(|b| (b.weight / total_weight * n as f64).floor() as usize)
                .collect();
            let mut assigned: usize = counts.iter().sum();
            let bands = counts.len();
            let mut band = 0;
            while assigned < n {
                counts[band % bands] += 1;
                assigned += 1;
                band += 1;
            }
            let mut ages = Vec::with_capacity(n);
            for (band, &count) in spec.age_mix.iter().zip(&counts) {
                for _ in 0..count {
                    ages.push(rng.random_range(band.lo..=band.hi));
                }
            }
            ages.shuffle(&mut rng);
            ages
        };

        let base = users.len();
        for i in 0..n {
            users.push(Person {
                country: country.code.clone(),
                gender: genders[i],
                age: ages[i],
                interests: BTreeSet::new(),
            });
        }

        // exact-count interest membership per country
        for interest in &spec.interests {
            let members = (interest.weight * n as f64).round() as usize;
            let mut indices: Vec<usize> = (0..n).collect();
            indices.shuffle(&mut rng);
            for &i in indices.iter().take(members) {
                users[base + i].interests.insert(interest.id.clone());
            }
        }
    }
    Ok(SyntheticPopulation { users, seed })
}

// ---------------------------------------------------------------------------
// Recorded-fixture oracle

#[derive(Debug, Serialize, Deserialize)]
struct FixtureRecord {
    country: String,
    gender: Gender,
    #[serde(default)]
    age_lo: Option<u32>,
    #[serde(default)]
    age_hi: Option<u32>,
    interests: Vec<String>,
    reach: u64,
}

/// Replays recorded reach values keyed by canonicalized filters. Multi-
/// country audiences use `+`-separated codes in the `country` field.
#[derive(Debug, Clone, Default)]
pub struct FixtureOracle {
    responses: BTreeMap<String, u64>,
}

impl FixtureOracle {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text =
            std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(display.clone(), e))?;
        let records: Vec<FixtureRecord> = serde_json::from_str(&text).map_err(|e| Error::Json {
            path: display,
            source: e,
        })?;
        Ok(Self::from_records_inner(records))
    }

    fn from_records_inner(records: Vec<FixtureRecord>) -> Self {
        let mut responses = BTreeMap::new();
        for r in records {
            let age_range = match (r.age_lo, r.age_hi) {
                (Some(lo), Some(hi)) => Some((lo, hi)),
                _ => None,
            };
            let filter = AudienceFilter {
                countries: r.country.split('+').map(str::to_string).collect(),
                interests: r.interests.into_iter().collect(),
                gender: r.gender,
                age_range,
            };
            responses.insert(filter.canonical_key(), r.reach);
        }
        FixtureOracle { responses }
    }

    /// Builds an oracle from (filter, reach) pairs, e.g. for crafted
    /// replays.
    pub fn from_entries(entries: Vec<(AudienceFilter, u64)>) -> Self {
        let responses = entries
            .into_iter()
            .map(|(f, r)| (f.canonical_key(), r))
            .collect();
        FixtureOracle { responses }
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl AudienceOracle for FixtureOracle {
    fn raw_reach(&self, filter: &AudienceFilter) -> Result<ReachResult> {
        let key = filter.canonical_key();
        match self.responses.get(&key) {
            Some(&reach) => Ok(ReachResult {
                reach,
                sentinel: reach == SENTINEL_REACH,
            }),
            None => Err(Error::FixtureMiss { key }),
        }
    }
}

// ---------------------------------------------------------------------------
// Exposure metrics

/// Preferences ranked by single-interest reach, descending (ties by
/// ascending id).
pub fn rank_sensitive(
    oracle: &dyn AudienceOracle,
    countries: &[String],
    sensitive_ids: &[String],
) -> Result<Vec<(String, u64)>> {
    if sensitive_ids.is_empty() {
        return Err(Error::EmptyInput("no sensitive ids to rank".into()));
    }
    let mut ranked = Vec::with_capacity(sensitive_ids.len());
    for id in sensitive_ids {
        let filter =
            AudienceFilter::countries(countries).with_interests(std::iter::once(id.clone()));
        let result = reach(oracle, &filter)?;
        if result.sentinel {
            return Err(Error::SentinelReach {
                key: filter.canonical_key(),
            });
        }
        ranked.push((id.clone(), result.reach));
    }
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(ranked)
}

/// One FFB/FC computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExposureResult {
    /// Percentage of platform users tagged (numerator over user base).
    pub ffb: f64,
    /// Percentage of citizens tagged (numerator over population).
    pub fc: f64,
    pub numerator_reach: u64,
    pub fb_user_base: u64,
    pub population: u64,
}

/// A top-N exposure question against a ranked preference list.
#[derive(Debug, Clone)]
pub struct ExposureQuery {
    pub countries: Vec<String>,
    pub top_n: usize,
    pub gender: Gender,
    pub age_range: Option<(u32, u32)>,
    /// Ranking source: preference ids ordered by per-country popularity.
    pub ranked: Vec<String>,
}

fn exposure_for_interests(
    oracle: &dyn AudienceOracle,
    countries: &[String],
    interests: &BTreeSet<String>,
    gender: Gender,
    age_range: Option<(u32, u32)>,
    population_table: &PopulationTable,
) -> Result<ExposureResult> {
    let mut numerator_filter =
        AudienceFilter::countries(countries).with_interests(interests.iter().cloned());
    numerator_filter.gender = gender;
    numerator_filter.age_range = age_range;
    let numerator = reach(oracle, &numerator_filter)?;
    if numerator.sentinel {
        return Err(Error::SentinelReach {
            key: numerator_filter.canonical_key(),
        });
    }
    // user base: same demographic filter with the interest constraint
    // removed
    let mut base_filter = AudienceFilter::countries(countries);
    base_filter.gender = gender;
    base_filter.age_range = age_range;
    let base = reach(oracle, &base_filter)?;
    if base.sentinel {
        return Err(Error::SentinelReach {
            key: base_filter.canonical_key(),
        });
    }
    if base.reach == 0 {
        return Err(Error::EmptyUserBase(base_filter.canonical_key()));
    }
    let population = population_table.total(countries)?;
    Ok(ExposureResult {
        ffb: 100.0 * numerator.reach as f64 / base.reach as f64,
        fc: 100.0 * numerator.reach as f64 / population as f64,
        numerator_reach: numerator.reach,
        fb_user_base: base.reach,
        population,
    })
}

/// FFB/FC of the top-N preferences of the query's ranking.
pub fn exposure(
    oracle: &dyn AudienceOracle,
    query: &ExposureQuery,
    population_table: &PopulationTable,
) -> Result<ExposureResult> {
    if query.top_n == 0 || query.top_n > INTEREST_CAP {
        return Err(Error::InvalidParameter(format!(
            "top_n {} outside [1, {INTEREST_CAP}]",
            query.top_n
        )));
    }
    let top: BTreeSet<String> = query
        .ranked
        .iter()
        .take(query.top_n)
        .cloned()
        .collect();
    exposure_for_interests(
        oracle,
        &query.countries,
        &top,
        query.gender,
        query.age_range,
        population_table,
    )
}

/// FFB(C, N) series over ascending N values; nondecreasing in N.
pub fn exposure_curve(
    oracle: &dyn AudienceOracle,
    countries: &[String],
    ranked: &[String],
    n_values: &[usize],
    population_table: &PopulationTable,
) -> Result<Vec<(usize, ExposureResult)>> {
    if n_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParameter(
            "N values must be strictly ascending".into(),
        ));
    }
    if n_values.last().is_some_and(|&n| n > INTEREST_CAP) {
        return Err(Error::InvalidParameter(format!(
            "N exceeds the {INTEREST_CAP}-interest cap"
        )));
    }
    let mut series = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let query = ExposureQuery {
            countries: countries.to_vec(),
            top_n: n,
            gender: Gender::All,
            age_range: None,
            ranked: ranked.to_vec(),
        };
        series.push((n, exposure(oracle, &query, population_table)?));
    }
    Ok(series)
}

/// One row of the very-sensitive table: FFB/FC per country plus an
/// all-countries aggregate.
#[derive(Debug, Clone, Serialize)]
pub struct VerySensitiveRow {
    pub label: String,
    pub per_country: Vec<ExposureResult>,
    pub aggregate: ExposureResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerySensitiveTable {
    pub countries: Vec<String>,
    pub rows: Vec<VerySensitiveRow>,
    /// OR over the whole list per country.
    pub union_row: VerySensitiveRow,
}

/// Per-preference and aggregate FFB/FC for a hand-picked list.
pub fn very_sensitive_table(
    oracle: &dyn AudienceOracle,
    countries: &[String],
    list: &[String],
    population_table: &PopulationTable,
) -> Result<VerySensitiveTable> {
    if list.is_empty() {
        return Err(Error::EmptyInput("very-sensitive list is empty".into()));
    }
    let row = |interests: &BTreeSet<String>, label: String| -> Result<VerySensitiveRow> {
        let mut per_country = Vec::with_capacity(countries.len());
        for c in countries {
            per_country.push(exposure_for_interests(
                oracle,
                std::slice::from_ref(c),
                interests,
                Gender::All,
                None,
                population_table,
            )?);
        }
        let aggregate = exposure_for_interests(
            oracle,
            countries,
            interests,
            Gender::All,
            None,
            population_table,
        )?;
        Ok(VerySensitiveRow {
            label,
            per_country,
            aggregate,
        })
    };
    let mut rows = Vec::with_capacity(list.len());
    for id in list {
        let single: BTreeSet<String> = std::iter::once(id.clone()).collect();
        rows.push(row(&single, id.clone())?);
    }
    let all: BTreeSet<String> = list.iter().cloned().collect();
    let union_row = row(&all, "UNION".into())?;
    Ok(VerySensitiveTable {
        countries: countries.to_vec(),
        rows,
        union_row,
    })
}

/// A demographic slice for grouped exposure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DemographicGroup {
    Age { label: String, lo: u32, hi: u32 },
    Gender(Gender),
}

impl DemographicGroup {
    pub fn label(&self) -> String {
        match self {
            DemographicGroup::Age { label, .. } => label.clone(),
            DemographicGroup::Gender(g) => g.to_string(),
        }
    }
}

/// The four age bands used for the demographic breakdown.
pub fn standard_age_groups() -> Vec<DemographicGroup> {
    vec![
        DemographicGroup::Age {
            label: "Adolescence (13-19)".into(),
            lo: 13,
            hi: 19,
        },
        DemographicGroup::Age {
            label: "Early Adulthood (20-39)".into(),
            lo: 20,
            hi: 39,
        },
        DemographicGroup::Age {
            label: "Adulthood (40-64)".into(),
            lo: 40,
            hi: 64,
        },
        DemographicGroup::Age {
            label: "Maturity (65+)".into(),
            lo: 65,
            hi: 130,
        },
    ]
}

pub fn gender_groups() -> Vec<DemographicGroup> {
    vec![
        DemographicGroup::Gender(Gender::Male),
        DemographicGroup::Gender(Gender::Female),
    ]
}

/// FFB per demographic group over a multi-country base, all groups sharing
/// one ranking source.
pub fn demographic_exposure(
    oracle: &dyn AudienceOracle,
    groups: &[DemographicGroup],
    countries: &[String],
    ranked: &[String],
    top_n: usize,
    population_table: &PopulationTable,
) -> Result<Vec<(String, ExposureResult)>> {
    let mut out = Vec::with_capacity(groups.len());
    for group in groups {
        let (gender, age_range) = match group {
            DemographicGroup::Age { lo, hi, .. } => (Gender::All, Some((*lo, *hi))),
            DemographicGroup::Gender(g) => (*g, None),
        };
        let query = ExposureQuery {
            countries: countries.to_vec(),
            top_n,
            gender,
            age_range,
            ranked: ranked.to_vec(),
        };
        out.push((group.label(), exposure(oracle, &query, population_table)?));
    }
    Ok(out)
}
