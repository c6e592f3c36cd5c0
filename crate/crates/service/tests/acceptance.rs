//! Acceptance gate: one test per criterion, each printing a single
//! `criterion NN <name>: PASS` line (run with `--nocapture` to see the
//! lines for passing tests).

use std::collections::BTreeSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::Instant;

use chrono::{DateTime, TimeZone, Utc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use adaudit_core::audit::{build_blacklist, AuditStore, SnapshotPreference};
use adaudit_core::classifier::{auc, optimal_threshold, run_realizations, LabeledScore};
use adaudit_core::corpus::{KeywordDictionary, PopulationTable, SensitiveCategory};
use adaudit_core::embeddings::{load_vectors, tokenize, WordVectorStore};
use adaudit_core::exposure::{
    exposure, generate_population, rank_sensitive, AudienceFilter, AgeBand, CountrySpec,
    ExposureQuery, FixtureOracle, Gender, InterestSpec, PopulationSpec, SyntheticPopulation,
};
use adaudit_core::labeling::{
    fleiss_kappa, majority_label, sheet_from_histogram, KappaMode, Label, Vote, VoteCategory,
    VoteSheet,
};
use adaudit_core::report::{
    cost_per_identified_user, country_table, format_percent, render_country_csv, EU28,
};
use adaudit_core::scoring::Scorer;

use Label as LLabel;


fn criterion(number: u32, name: &str, body: impl FnOnce()) {
    let result = catch_unwind(AssertUnwindSafe(body));
    let verdict = if result.is_ok() { "PASS" } else { "FAIL" };
    println!("criterion {number:02} {name}: {verdict}");
    if let Err(panic) = result {
        resume_unwind(panic);
    }
}

// -------------------------------------------------------------------- 1

#[test]
fn criterion_01_majority_vote_replay() {
    criterion(1, "majority-vote histogram replay", || {
        let histogram = [1054usize, 767, 539, 422, 449, 1221];
        let sheet = sheet_from_histogram(&histogram, 5).unwrap();
        let outcome = majority_label(&sheet);
        assert_eq!(outcome.decisions.len(), 4452);
        assert!(outcome.excluded.is_empty());
        let sensitive = outcome
            .decisions
            .iter()
            .filter(|d| d.label == LLabel::Sensitive)
            .count();
        assert_eq!(sensitive, 2092);
    });
}

// -------------------------------------------------------------------- 2

fn sheet(items: &[(&str, Vec<VoteCategory>)], raters: usize) -> VoteSheet {
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

#[test]
fn criterion_02_kappa_oracle() {
    criterion(2, "agreement statistic oracle", || {
        use VoteCategory::*;
        // two-item hand example: P1 = 1, P2 = 0.4, Pbar = 0.7, Pe = 0.68
        let s = sheet(
            &[
                ("i1", vec![Politics; 5]),
                ("i2", vec![Politics, Politics, Politics, Health, Health]),
            ],
            5,
        );
        let report = fleiss_kappa(&s, KappaMode::All).unwrap();
        assert!((report.kappa - 0.0625).abs() < 1e-12);

        // perfect-agreement suites across distinct categories
        let perfect = sheet(
            &[
                ("i1", vec![Politics; 5]),
                ("i2", vec![Health; 5]),
                ("i3", vec![Other; 5]),
            ],
            5,
        );
        assert_eq!(fleiss_kappa(&perfect, KappaMode::All).unwrap().kappa, 1.0);
        let unanimous = sheet(&[("i1", vec![Health; 5]), ("i2", vec![Health; 5])], 5);
        assert_eq!(fleiss_kappa(&unanimous, KappaMode::All).unwrap().kappa, 1.0);

        // permutation invariance over 100 random sheets
        let categories = [
            Politics, Religion, Health, Ethnicity, Sexuality, Other, NotKnown,
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let mut votes = Vec::new();
            for item in 0..10 {
                for rater in 0..5 {
                    votes.push(Vote {
                        pref_id: format!("item{item}"),
                        panelist_id: format!("p{rater}"),
                        category: categories[rng.random_range(0..categories.len())],
                    });
                }
            }
            let base = VoteSheet::from_votes(&votes, 5).unwrap();
            let kappa = fleiss_kappa(&base, KappaMode::All).unwrap().kappa;
            let mut shuffled = votes.clone();
            shuffled.shuffle(&mut rng);
            let permuted = VoteSheet::from_votes(&shuffled, 5).unwrap();
            let kappa_permuted = fleiss_kappa(&permuted, KappaMode::All).unwrap().kappa;
            assert!((kappa - kappa_permuted).abs() <= 1e-12);
        }
    });
}

// -------------------------------------------------------------------- 3

/// Exhaustive candidate scan: the independent threshold oracle.
fn brute_force_threshold(train: &[LabeledScore]) -> (f64, f64) {
    let mut scores: Vec<f64> = train.iter().map(|d| d.score).collect();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    scores.dedup();
    let mut candidates = vec![0.0, 1.0];
    for w in scores.windows(2) {
        candidates.push((w[0] + w[1]) / 2.0);
    }
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best = (0.0, -1.0);
    for &tau in &candidates {
        let tp = train.iter().filter(|d| d.is_positive() && d.score >= tau).count() as f64;
        let fp = train.iter().filter(|d| !d.is_positive() && d.score >= tau).count() as f64;
        let fun = train.iter().filter(|d| d.is_positive() && d.score < tau).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fun > 0.0 { tp / (tp + fun) } else { 0.0 };
        let f = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        // scanning ascending with >= keeps the largest best threshold
        if f >= best.1 {
            best = (tau, f);
        }
    }
    (best.0, best.1)
}

/// Brute-force pair concordance: the independent AUC oracle.
fn brute_force_auc(data: &[LabeledScore]) -> f64 {
    let pos: Vec<f64> = data.iter().filter(|d| d.is_positive()).map(|d| d.score).collect();
    let neg: Vec<f64> = data.iter().filter(|d| !d.is_positive()).map(|d| d.score).collect();
    let mut concordant = 0.0;
    for &p in &pos {
        for &n in &neg {
            if p > n {
                concordant += 1.0;
            } else if p == n {
                concordant += 0.5;
            }
        }
    }
    concordant / (pos.len() as f64 * neg.len() as f64)
}

fn random_labeled_set(rng: &mut ChaCha8Rng) -> Vec<LabeledScore> {
    let n = rng.random_range(4..=500);
    loop {
        let data: Vec<LabeledScore> = (0..n)
            .map(|i| {
                // quantized scores provoke ties
                let score = (rng.random_range(0..=100) as f64) / 100.0;
                let positive = rng.random_bool(0.5);
                LabeledScore {
                    pref_id: format!("p{i}"),
                    score,
                    label: if positive { LLabel::Sensitive } else { LLabel::NonSensitive },
                }
            })
            .collect();
        let pos = data.iter().filter(|d| d.is_positive()).count();
        if pos > 0 && pos < data.len() {
            return data;
        }
    }
}

#[test]
fn criterion_03_threshold_optimizer_equivalence() {
    criterion(3, "threshold optimizer equals exhaustive search", || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let data = random_labeled_set(&mut rng);
            let (tau, f) = optimal_threshold(&data).unwrap();
            let (tau_bf, f_bf) = brute_force_threshold(&data);
            assert_eq!(tau, tau_bf, "threshold mismatch");
            assert!((f - f_bf).abs() <= 1e-12, "F mismatch");
            let a = auc(&data).unwrap();
            let a_bf = brute_force_auc(&data);
            assert!((a - a_bf).abs() <= 1e-12, "AUC mismatch");
        }
    });
}

// -------------------------------------------------------------------- 4

#[test]
fn criterion_04_classifier_pipeline_on_separable_data() {
    criterion(4, "separable-data realization run", || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<LabeledScore> = (0..200)
            .map(|i| {
                let positive = i % 2 == 0;
                let noise: f64 = rng.random_range(0.0..0.1);
                LabeledScore {
                    pref_id: format!("p{i}"),
                    score: if positive { 1.0 + noise } else { noise },
                    label: if positive { LLabel::Sensitive } else { LLabel::NonSensitive },
                }
            })
            .collect();
        let summary = run_realizations(&data, 100, 7, 0.8).unwrap();
        assert_eq!(summary.f_score.median, 1.0);
        assert_eq!(summary.auc.median, 1.0);
        let again = run_realizations(&data, 100, 7, 0.8).unwrap();
        assert_eq!(summary.reports, again.reports, "not deterministic");
    });
}

// -------------------------------------------------------------------- 5

/// Direct per-user enumeration, independent of the oracle's matching code.
fn enumerate_union(
    pop: &SyntheticPopulation,
    countries: &[String],
    interests: &BTreeSet<String>,
) -> u64 {
    pop.users
        .iter()
        .filter(|u| countries.contains(&u.country))
        .filter(|u| interests.is_empty() || u.interests.iter().any(|i| interests.contains(i)))
        .count() as u64
}

#[test]
fn criterion_05_union_reach_oracle_equivalence() {
    criterion(5, "union reach equals set enumeration", || {
        let countries: Vec<CountrySpec> = (0..5)
            .map(|i| CountrySpec {
                code: format!("C{i}"),
                users: 4000,
            })
            .collect();
        let interests: Vec<InterestSpec> = (0..50)
            .map(|i| InterestSpec {
                id: format!("i{i:02}"),
                weight: (i as f64 + 1.0) / 100.0,
            })
            .collect();
        let spec = PopulationSpec {
            countries,
            interests,
            gender_mix: 0.5,
            age_mix: vec![
                AgeBand { lo: 13, hi: 39, weight: 0.5 },
                AgeBand { lo: 40, hi: 90, weight: 0.5 },
            ],
            seed: 0,
        };
        let pop = generate_population(&spec, 55).unwrap();
        let codes: Vec<String> = (0..5).map(|i| format!("C{i}")).collect();
        let ids: Vec<String> = (0..50).map(|i| format!("i{i:02}")).collect();
        let table = PopulationTable::new(
            codes.iter().map(|c| (c.clone(), 10_000u64)).collect(),
        )
        .unwrap();

        let ranked: Vec<String> = rank_sensitive(&pop, &codes, &ids)
            .unwrap()
            .into_iter()
            .map(|(id, _)| id)
            .collect();
        let mut previous_ffb = 0.0;
        for n in [1usize, 5, 10, 25, 50] {
            let query = ExposureQuery {
                countries: codes.clone(),
                top_n: n,
                gender: Gender::All,
                age_range: None,
                ranked: ranked.clone(),
            };
            let result = exposure(&pop, &query, &table).unwrap();
            let top: BTreeSet<String> = ranked.iter().take(n).cloned().collect();
            let union = enumerate_union(&pop, &codes, &top);
            let base = enumerate_union(&pop, &codes, &BTreeSet::new());
            assert_eq!(result.numerator_reach, union);
            assert_eq!(result.fb_user_base, base);
            assert_eq!(result.ffb, 100.0 * union as f64 / base as f64);
            assert_eq!(result.fc, 100.0 * union as f64 / 50_000.0);
            // monotone in N
            assert!(result.ffb >= previous_ffb);
            previous_ffb = result.ffb;
            // union bounds against single-interest enumeration
            let singles: Vec<u64> = top
                .iter()
                .map(|id| {
                    enumerate_union(&pop, &codes, &std::iter::once(id.clone()).collect())
                })
                .collect();
            assert!(union >= singles.iter().copied().max().unwrap());
            assert!(union <= singles.iter().sum::<u64>());
        }
    });
}

// -------------------------------------------------------------------- 6

#[test]
fn criterion_06_recorded_reach_replay() {
    criterion(6, "recorded-reach table replay", || {
        let eu: Vec<String> = EU28.iter().map(|c| c.to_string()).collect();

        // populations: 27 x 644 + 640 = 18028 total
        let mut pops: Vec<(String, u64)> =
            eu.iter().take(27).map(|c| (c.clone(), 644u64)).collect();
        pops.push((eu[27].clone(), 640));
        let table = PopulationTable::new(pops).unwrap();

        let top: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let base_filter = AudienceFilter::countries(&eu);
        let num_filter = base_filter.clone().with_interests(top.iter().cloned());
        // per-country fixtures so every row of the table can be rendered
        let mut entries = vec![(base_filter, 10_000u64), (num_filter, 7_325u64)];
        for c in &eu {
            let country_base = AudienceFilter::country(c.clone());
            let country_num = country_base.clone().with_interests(top.iter().cloned());
            entries.push((country_base, 200));
            entries.push((country_num, 150));
        }
        let oracle = FixtureOracle::from_entries(entries);

        let mut rows = Vec::new();
        for c in &eu {
            let query = ExposureQuery {
                countries: vec![c.clone()],
                top_n: 10,
                gender: Gender::All,
                age_range: None,
                ranked: top.clone(),
            };
            rows.push((c.clone(), exposure(&oracle, &query, &table).unwrap()));
        }
        let aggregate_query = ExposureQuery {
            countries: eu.clone(),
            top_n: 10,
            gender: Gender::All,
            age_range: None,
            ranked: top.clone(),
        };
        let aggregate = exposure(&oracle, &aggregate_query, &table).unwrap();
        let rendered = render_country_csv(&country_table(rows, aggregate).unwrap());
        let last = rendered.lines().last().unwrap();
        assert_eq!(last, "EU28,73.25,40.63");

        // union-row replay: 4286 tagged of a 10000 base, population 18277
        let mut pops: Vec<(String, u64)> =
            eu.iter().take(27).map(|c| (c.clone(), 649u64)).collect();
        pops.push((eu[27].clone(), 754));
        let union_table = PopulationTable::new(pops).unwrap();
        let list: Vec<String> = (0..5).map(|i| format!("v{i}")).collect();
        let base_filter = AudienceFilter::countries(&eu);
        let union_filter = base_filter.clone().with_interests(list.iter().cloned());
        let oracle =
            FixtureOracle::from_entries(vec![(base_filter, 10_000), (union_filter, 4_286)]);
        let query = ExposureQuery {
            countries: eu.clone(),
            top_n: list.len(),
            gender: Gender::All,
            age_range: None,
            ranked: list,
        };
        let result = exposure(&oracle, &query, &union_table).unwrap();
        assert_eq!(format_percent(result.ffb), "42.86");
        assert_eq!(format_percent(result.fc), "23.45");
    });
}

// -------------------------------------------------------------------- 7

#[test]
fn criterion_07_cost_estimator() {
    criterion(7, "campaign cost estimator", || {
        let est = cost_per_identified_user(35.0, 26458, 0.09).unwrap();
        assert_eq!(est.display(), "€0.015");
        assert!((est.cost_per_identified_user - 0.0147).abs() < 5e-5);
        let est = cost_per_identified_user(35.0, 26458, 0.0009).unwrap();
        assert_eq!(est.display(), "€1.5");
    });
}

// -------------------------------------------------------------------- 8

#[test]
fn criterion_08_scoring_correctness() {
    criterion(8, "hand-computed scoring", || {
        let dir = tempfile::tempdir().unwrap();
        let vectors_path = dir.path().join("vectors.txt");
        std::fs::write(
            &vectors_path,
            "islam 1.0 0.0 0.0\n\
             quran 0.9 0.1 0.0\n\
             cancer 0.0 1.0 0.0\n\
             vote 0.0 0.9 0.3\n\
             gay 0.3 0.3 0.9\n\
             football 0.0 0.0 1.0\n\
             politics 0.1 0.8 0.2\n",
        )
        .unwrap();
        let store = load_vectors(&vectors_path).unwrap();
        let dictionary = KeywordDictionary::new(vec![
            (SensitiveCategory::Religion, "islam".into()),
            (SensitiveCategory::Religion, "quran".into()),
            (SensitiveCategory::Health, "cancer".into()),
            (SensitiveCategory::Politics, "vote".into()),
            (SensitiveCategory::Sexuality, "gay".into()),
        ])
        .unwrap();
        assert_eq!(dictionary.len(), 5);
        let scorer = Scorer::new(&store, &dictionary).unwrap();

        // independent hand computation: mean of known tokens, max cosine
        let phrase = |text: &str| -> Vec<f64> {
            let tokens = tokenize(text);
            let mut sum = vec![0.0; 3];
            let mut known = 0;
            for t in &tokens {
                if let Some(v) = store.get(t) {
                    known += 1;
                    for (a, b) in sum.iter_mut().zip(v) {
                        *a += b;
                    }
                }
            }
            sum.iter().map(|x| x / known.max(1) as f64).collect()
        };
        let cosine = |a: &[f64], b: &[f64]| -> f64 {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot / (na * nb)).clamp(0.0, 1.0)
        };
        let hand_max = |text: &str| -> f64 {
            let pv = phrase(text);
            ["islam", "quran", "cancer", "vote", "gay"]
                .iter()
                .map(|kw| cosine(&pv, &phrase(kw)))
                .fold(f64::NEG_INFINITY, f64::max)
        };

        for text in ["islam football", "politics", "quran cancer", "gay vote", "football"] {
            let got = scorer.score_free_text("x", text, None).score;
            assert!((got - hand_max(text)).abs() <= 1e-9, "{text}: {got}");
        }

        // the disambiguation text replaces the name for scoring
        let by_disambiguation = scorer.score_free_text("x", "Football", Some("islam"));
        assert!((by_disambiguation.score - 1.0).abs() <= 1e-9);

        // parallel run is bitwise-identical to the sequential run
        let catalog = adaudit_core::corpus::Catalog::new(
            (0..40)
                .map(|i| adaudit_core::corpus::AdPreference {
                    id: format!("p{i:02}"),
                    name: ["islam football", "politics", "cancer", "gay", "quran vote"]
                        [i % 5]
                        .to_string(),
                    disambiguation: None,
                    topic: None,
                    audience_size: 1,
                })
                .collect(),
        )
        .unwrap();
        let sequential = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| scorer.score_catalog(&catalog));
        let parallel = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| scorer.score_catalog(&catalog));
        assert_eq!(sequential.len(), parallel.len());
        for (s, p) in sequential.iter().zip(&parallel) {
            assert_eq!(s.score.to_bits(), p.score.to_bits());
            assert_eq!(s.best_keyword, p.best_keyword);
        }
    });
}

// -------------------------------------------------------------------- 9

#[test]
fn criterion_09_scoring_throughput() {
    criterion(9, "scoring throughput", || {
        let dims = 300;
        let keyword_count = 264;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
        for k in 0..keyword_count {
            entries.push((
                format!("kw{k:03}"),
                (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ));
        }
        for t in 0..500 {
            entries.push((
                format!("tok{t:03}"),
                (0..dims).map(|_| rng.random_range(-1.0..1.0)).collect(),
            ));
        }
        let store = WordVectorStore::from_entries(entries).unwrap();
        let dictionary = KeywordDictionary::new(
            (0..keyword_count)
                .map(|k| {
                    (
                        SensitiveCategory::ALL[k % 5],
                        format!("kw{k:03}"),
                    )
                })
                .collect(),
        )
        .unwrap();
        let scorer = Scorer::new(&store, &dictionary).unwrap();
        let catalog = adaudit_core::corpus::Catalog::new(
            (0..1000)
                .map(|i| adaudit_core::corpus::AdPreference {
                    id: format!("p{i:04}"),
                    name: format!("tok{:03} tok{:03}", i % 500, (i * 7 + 3) % 500),
                    disambiguation: None,
                    topic: None,
                    audience_size: 1,
                })
                .collect(),
        )
        .unwrap();

        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let start = Instant::now();
        let scored = single.install(|| scorer.score_catalog(&catalog));
        let elapsed = start.elapsed().as_secs_f64();
        assert_eq!(scored.len(), 1000);
        let computations = (catalog.len() * keyword_count) as f64;
        let rate = computations / elapsed;
        assert!(
            rate >= 100_000.0,
            "single-thread rate {rate:.0} similarity computations/s below 100k/s"
        );
        // the full 126192 x 264 batch at this rate stays under 10 minutes
        let full_batch_seconds = 126_192.0 * 264.0 / rate;
        assert!(full_batch_seconds < 600.0, "projected batch {full_batch_seconds:.0}s");

        // parallel speedup needs real cores; skip the assertion honestly
        // when the machine cannot provide four workers
        let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        if cores >= 4 {
            let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
            let start = Instant::now();
            let _ = four.install(|| scorer.score_catalog(&catalog));
            let parallel_elapsed = start.elapsed().as_secs_f64();
            assert!(
                elapsed / parallel_elapsed >= 3.0,
                "4-worker speedup {:.2}x below 3x",
                elapsed / parallel_elapsed
            );
        } else {
            println!(
                "criterion 09 note: 4-worker speedup not measurable on {cores} core(s); skipped"
            );
        }
    });
}

// -------------------------------------------------------------------- 10

fn ts(n: i64) -> DateTime<Utc> {
    Utc.timestamp_opt(1_700_000_000 + n * 60, 0).unwrap()
}

fn scored_pref(id: &str, score: f64) -> adaudit_core::scoring::ScoredPreference {
    adaudit_core::scoring::ScoredPreference {
        pref_id: id.into(),
        score,
        best_keyword: None,
        best_category: Some(SensitiveCategory::Politics),
        source: adaudit_core::scoring::ScoredTextSource::Name,
        vocabulary_missing: false,
    }
}

#[test]
fn criterion_10_audit_service_properties() {
    criterion(10, "audit snapshot properties and http round-trip", || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let universe: Vec<String> = (0..20).map(|i| format!("pref{i:02}")).collect();

        for _ in 0..1000 {
            // random half of the universe is blacklisted
            let mut ids = universe.clone();
            ids.shuffle(&mut rng);
            let listed: Vec<String> = ids[..10].to_vec();
            let blacklist = build_blacklist(
                &listed.iter().map(|id| scored_pref(id, 0.9)).collect::<Vec<_>>(),
                0.69,
                ts(0),
            )
            .unwrap();
            let mut store = AuditStore::in_memory(blacklist.clone());
            let mut folded = AuditStore::in_memory(blacklist.clone());
            // reference model: set of currently-active blacklisted prefs
            let mut model: BTreeSet<String> = BTreeSet::new();

            let steps = rng.random_range(1..=8);
            let mut clock = 0i64;
            for _ in 0..steps {
                clock += 1;
                let size = rng.random_range(0..=universe.len());
                let mut picked = universe.clone();
                picked.shuffle(&mut rng);
                let snapshot: Vec<SnapshotPreference> = picked[..size]
                    .iter()
                    .map(|id| SnapshotPreference {
                        id: id.clone(),
                        name: format!("name-{id}"),
                        disambiguation: None,
                        reason_text: None,
                    })
                    .collect();
                let diff = store
                    .ingest_snapshot("u", &snapshot, ts(clock), None)
                    .unwrap();

                // add/delete detection against the reference model
                let in_snapshot: BTreeSet<String> =
                    snapshot.iter().map(|p| p.id.clone()).collect();
                let expected_added: BTreeSet<String> = in_snapshot
                    .iter()
                    .filter(|id| listed.contains(id) && !model.contains(*id))
                    .cloned()
                    .collect();
                let expected_deleted: BTreeSet<String> =
                    model.difference(&in_snapshot).cloned().collect();
                let got_added: BTreeSet<String> =
                    diff.added.iter().map(|e| e.pref_id.clone()).collect();
                let got_deleted: BTreeSet<String> =
                    diff.deleted.iter().map(|e| e.pref_id.clone()).collect();
                assert_eq!(got_added, expected_added);
                assert_eq!(got_deleted, expected_deleted);
                model = model
                    .union(&expected_added)
                    .cloned()
                    .collect::<BTreeSet<_>>()
                    .difference(&expected_deleted)
                    .cloned()
                    .collect();

                // replay equals fold
                for event in diff.added.iter().chain(diff.deleted.iter()) {
                    folded.apply_event(event);
                }

                // idempotent re-ingest at a later time
                clock += 1;
                let again = store
                    .ingest_snapshot("u", &snapshot, ts(clock), None)
                    .unwrap();
                assert!(again.added.is_empty() && again.deleted.is_empty());
            }
            assert_eq!(store.user_report("u"), folded.user_report("u"));
        }

        // HTTP round-trip: POST then GET twice, byte-stable
        let runtime = tokio::runtime::Runtime::new().unwrap();
        runtime.block_on(async {
            let blacklist = build_blacklist(
                &[scored_pref("s1", 0.9), scored_pref("s2", 0.8)],
                0.69,
                ts(0),
            )
            .unwrap();
            let state =
                adaudit_service::AppState::new(AuditStore::in_memory(blacklist), None);
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            let addr = listener.local_addr().unwrap();
            tokio::spawn(async move {
                axum::serve(listener, adaudit_service::router(state)).await.unwrap();
            });
            let client = adaudit_client::AuditClient::new(format!("http://{addr}"));
            let posted: Vec<SnapshotPreference> = ["s1", "s2"]
                .iter()
                .map(|id| SnapshotPreference {
                    id: id.to_string(),
                    name: format!("name-{id}"),
                    disambiguation: None,
                    reason_text: None,
                })
                .collect();
            let diff = client.ingest("u", ts(1), posted.clone()).await.unwrap();
            assert_eq!(diff.added.len(), 2);
            let url = format!("http://{addr}/v1/users/u/report");
            let first = reqwest::get(&url).await.unwrap().bytes().await.unwrap();
            let second = reqwest::get(&url).await.unwrap().bytes().await.unwrap();
            assert_eq!(first, second);
            let report = client.user_report("u").await.unwrap();
            let ids: BTreeSet<&str> =
                report.entries.iter().map(|e| e.pref_id.as_str()).collect();
            let expected: BTreeSet<&str> = posted.iter().map(|p| p.id.as_str()).collect();
            assert_eq!(ids, expected);
        });
    });
}
