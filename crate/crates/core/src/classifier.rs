//! Threshold classifier: pick the similarity-score cutoff that maximizes
//! F-score on a training split, evaluate on held-out data, and repeat over
//! randomized splits.
//!
//! Candidate thresholds are the midpoints of consecutive distinct scores
//! plus 0 and 1; F-score is piecewise constant between observed scores, so
//! this grid is lossless. Sensitive is the positive class and the decision
//! rule is `score >= threshold`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::labeling::Label;
use crate::{Error, Result};

/// A preference's similarity score together with its manual label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub pref_id: String,
    pub score: f64,
    pub label: Label,
}

impl LabeledScore {
    pub fn is_positive(&self) -> bool {
        self.label == Label::Sensitive
    }
}

/// Metrics of one trained/evaluated realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub auc: f64,
    pub realization_seed: u64,
}

/// Five-number summary (min, quartiles, max) of one metric.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl FiveNumber {
    /// Linear-interpolation quantiles over the sorted sample.
    pub fn from_values(values: &[f64]) -> Option<FiveNumber> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
        let q = |p: f64| -> f64 {
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        };
        Some(FiveNumber {
            min: sorted[0],
            q1: q(0.25),
            median: q(0.5),
            q3: q(0.75),
            max: *sorted.last().unwrap(),
        })
    }
}

/// Five-number summaries over R realizations, plus the raw reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RealizationSummary {
    pub realizations: usize,
    pub abandoned: usize,
    pub threshold: FiveNumber,
    pub precision: FiveNumber,
    pub recall: FiveNumber,
    pub f_score: FiveNumber,
    pub auc: FiveNumber,
    pub reports: Vec<ClassifierReport>,
}

fn has_both_classes(data: &[LabeledScore]) -> bool {
    data.iter().any(|d| d.is_positive()) && data.iter().any(|d| !d.is_positive())
}

/// Uniformly random, disjoint and exhaustive train/validation split,
/// deterministic for a fixed seed. A draw leaving either part single-class
/// is redrawn up to 100 times.
pub fn split(
    data: &[LabeledScore],
    train_fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledScore>, Vec<LabeledScore>)> {
    if !(0.0..1.0).contains(&train_fraction) || train_fraction == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "train_fraction {train_fraction} outside (0, 1)"
        )));
    }
    if data.len() < 2 {
        return Err(Error::InvalidParameter(
            "split needs at least 2 items".into(),
        ));
    }
    if !has_both_classes(data) {
        return Err(Error::SingleClass("split input".into()));
    }
    let train_size = ((data.len() as f64 * train_fraction).round() as usize)
        .clamp(1, data.len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    const MAX_ATTEMPTS: usize = 100;
    for _ in 0..MAX_ATTEMPTS {
        let mut indices: Vec<usize> = (0..data.len()).collect();
        indices.shuffle(&mut rng);
        let train: Vec<LabeledScore> = indices[..train_size]
            .iter()
            .map(|&i| data[i].clone())
            .collect();
        let validation: Vec<LabeledScore> = indices[train_size..]
            .iter()
            .map(|&i| data[i].clone())
            .collect();
        if has_both_classes(&train) && has_both_classes(&validation) {
            return Ok((train, validation));
        }
    }
    Err(Error::DegenerateSplit {
        attempts: MAX_ATTEMPTS,
    })
}

fn f_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Distinct scores descending with per-score positive/negative counts.
fn score_groups(data: &[LabeledScore]) -> Vec<(f64, usize, usize)> {
    let mut sorted: Vec<(f64, bool)> = data.iter().map(|d| (d.score, d.is_positive())).collect();
    sorted.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite score"));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for (score, pos) in sorted {
        match groups.last_mut() {
            Some(g) if g.0 == score => {
                if pos {
                    g.1 += 1;
                } else {
                    g.2 += 1;
                }
            }
            _ => groups.push((score, pos as usize, !pos as usize)),
        }
    }
    groups
}

/// The candidate threshold grid: 0, midpoints of consecutive distinct
/// scores, and 1 — descending.
fn candidates_descending(groups: &[(f64, usize, usize)]) -> Vec<f64> {
    let mut c = vec![1.0];
    for pair in groups.windows(2) {
        c.push((pair[0].0 + pair[1].0) / 2.0);
    }
    c.push(0.0);
    c
}

/// Largest candidate threshold maximizing the training F-score.
pub fn optimal_threshold(train: &[LabeledScore]) -> Result<(f64, f64)> {
    if !has_both_classes(train) {
        return Err(Error::SingleClass("training set".into()));
    }
    let groups = score_groups(train);
    let total_pos: usize = groups.iter().map(|g| g.1).sum();
    let candidates = candidates_descending(&groups);

    let mut best_tau = 1.0;
    let mut best_f = f64::NEG_INFINITY;
    // walking candidates descending grows the predicted-positive prefix
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut next_group = 0usize;
    for tau in candidates {
        while next_group < groups.len() && groups[next_group].0 >= tau {
            tp += groups[next_group].1;
            fp += groups[next_group].2;
            next_group += 1;
        }
        let precision = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let recall = tp as f64 / total_pos as f64;
        let f = f_score(precision, recall);
        if f > best_f {
            best_f = f;
            best_tau = tau;
        }
    }
    Ok((best_tau, best_f))
}

/// Rank-based AUC: probability a random positive scores above a random
/// negative, ties counted half. Uses midranks; identical to brute-force
/// pair concordance.
pub fn auc(data: &[LabeledScore]) -> Result<f64> {
    let n_pos = data.iter().filter(|d| d.is_positive()).count();
    let n_neg = data.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass("AUC input".into()));
    }
    let mut sorted: Vec<(f64, bool)> = data.iter().map(|d| (d.score, d.is_positive())).collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite score"));
    let mut rank_sum_pos = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j].0 == sorted[i].0 {
            j += 1;
        }
        // ranks are 1-based; every tied item gets the midrank
        let midrank = (i + 1 + j) as f64 / 2.0;
        for item in &sorted[i..j] {
            if item.1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let n_pos_f = n_pos as f64;
    Ok((rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg as f64))
}

/// Confusion metrics and AUC of the validation set at a fixed threshold.
pub fn evaluate(
    validation: &[LabeledScore],
    threshold: f64,
    realization_seed: u64,
) -> Result<ClassifierReport> {
    if !has_both_classes(validation) {
        return Err(Error::SingleClass("validation set".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for d in validation {
        let predicted = d.score >= threshold;
        match (predicted, d.is_positive()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp > 0 {
        tp as f64 / (tp + fp) as f64
    } else {
        0.0
    };
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(ClassifierReport {
        threshold,
        precision,
        recall,
        f_score: f_score(precision, recall),
        auc: auc(validation)?,
        realization_seed,
    })
}

/// One full realization: split, train the threshold, evaluate held-out.
pub fn realize(
    data: &[LabeledScore],
    train_fraction: f64,
    seed: u64,
) -> Result<ClassifierReport> {
    let (train, validation) = split(data, train_fraction, seed)?;
    let (tau, _) = optimal_threshold(&train)?;
    evaluate(&validation, tau, seed)
}

/// Runs R independent realizations with seeds `base_seed..base_seed + R`.
/// Failed realizations are abandoned and counted; more than 10% abandoned
/// aborts the run. Deterministic for a fixed base seed regardless of the
/// number of workers.
pub fn run_realizations(
    data: &[LabeledScore],
    realizations: usize,
    base_seed: u64,
    train_fraction: f64,
) -> Result<RealizationSummary> {
    if realizations == 0 {
        return Err(Error::InvalidParameter("realizations must be >= 1".into()));
    }
    let results: Vec<Result<ClassifierReport>> = (0..realizations as u64)
        .into_par_iter()
        .map(|i| realize(data, train_fraction, base_seed.wrapping_add(i)))
        .collect();
    let mut reports = Vec::with_capacity(realizations);
    let mut abandoned = 0usize;
    for r in results {
        match r {
            Ok(report) => reports.push(report),
            Err(_) => abandoned += 1,
        }
    }
    if abandoned * 10 > realizations {
        return Err(Error::TooManyAbandoned {
            abandoned,
            total: realizations,
        });
    }
    let metric = |f: fn(&ClassifierReport) -> f64| -> FiveNumber {
        let values: Vec<f64> = reports.iter().map(f).collect();
        FiveNumber::from_values(&values).expect("at least one surviving realization")
    };
    if reports.is_empty() {
        return Err(Error::TooManyAbandoned {
            abandoned,
            total: realizations,
        });
    }
    Ok(RealizationSummary {
        realizations,
        abandoned,
        threshold: metric(|r| r.threshold),
        precision: metric(|r| r.precision),
        recall: metric(|r| r.recall),
        f_score: metric(|r| r.f_score),
        auc: metric(|r| r.auc),
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn item(score: f64, positive: bool) -> LabeledScore {
        LabeledScore {
            pref_id: format!("{score}-{positive}"),
            score,
            label: if positive {
                Label::Sensitive
            } else {
                Label::NonSensitive
            },
        }
    }

    fn items(pairs: &[(f64, bool)]) -> Vec<LabeledScore> {
        pairs.iter().map(|&(s, p)| item(s, p)).collect()
    }

    /// Exhaustive candidate search: the independent oracle for
    /// `optimal_threshold`.
    pub fn brute_force_threshold(train: &[LabeledScore]) -> (f64, f64) {
        let mut scores: Vec<f64> = train.iter().map(|d| d.score).collect();
        scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
        scores.dedup();
        let mut candidates = vec![0.0, 1.0];
        for pair in scores.windows(2) {
            candidates.push((pair[0] + pair[1]) / 2.0);
        }
        candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let total_pos = train.iter().filter(|d| d.is_positive()).count() as f64;
        let mut best = (0.0, f64::NEG_INFINITY);
        for &tau in &candidates {
            let tp = train
                .iter()
                .filter(|d| d.score >= tau && d.is_positive())
                .count() as f64;
            let fp = train
                .iter()
                .filter(|d| d.score >= tau && !d.is_positive())
                .count() as f64;
            let p = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let r = tp / total_pos;
            let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
            // >= keeps the largest tau among maxima (ascending scan)
            if f >= best.1 {
                best = (tau, f);
            }
        }
        best
    }

    /// Brute-force pair concordance: the independent oracle for `auc`.
    pub fn brute_force_auc(data: &[LabeledScore]) -> f64 {
        let pos: Vec<f64> = data
            .iter()
            .filter(|d| d.is_positive())
            .map(|d| d.score)
            .collect();
        let neg: Vec<f64> = data
            .iter()
            .filter(|d| !d.is_positive())
            .map(|d| d.score)
            .collect();
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

    #[test]
    fn split_is_deterministic_and_sized() {
        let data: Vec<LabeledScore> = (0..10).map(|i| item(i as f64 / 10.0, i >= 5)).collect();
        let (train1, val1) = split(&data, 0.8, 42).unwrap();
        let (train2, val2) = split(&data, 0.8, 42).unwrap();
        assert_eq!(train1.len(), 8);
        assert_eq!(val1.len(), 2);
        assert_eq!(train1, train2);
        assert_eq!(val1, val2);
    }

    #[test]
    fn split_two_items_is_degenerate() {
        // a 1/1 split can never hold both classes in both parts
        let data = items(&[(0.9, true), (0.1, false)]);
        assert!(matches!(
            split(&data, 0.5, 7),
            Err(Error::DegenerateSplit { .. })
        ));
    }

    #[test]
    fn split_is_disjoint_and_exhaustive() {
        let data: Vec<LabeledScore> = (0..20).map(|i| item(i as f64 / 20.0, i % 2 == 0)).collect();
        let (train, val) = split(&data, 0.7, 3).unwrap();
        assert_eq!(train.len() + val.len(), data.len());
        let ids: std::collections::HashSet<&str> = train
            .iter()
            .chain(&val)
            .map(|d| d.pref_id.as_str())
            .collect();
        assert_eq!(ids.len(), data.len());
    }

    #[test]
    fn split_single_class_errors() {
        let data = items(&[(0.9, true), (0.8, true)]);
        assert!(matches!(split(&data, 0.5, 1), Err(Error::SingleClass(_))));
    }

    #[test]
    fn separable_training_returns_midpoint() {
        let train = items(&[(0.9, true), (0.8, true), (0.2, false), (0.1, false)]);
        let (tau, f) = optimal_threshold(&train).unwrap();
        assert_eq!(tau, 0.5);
        assert_eq!(f, 1.0);
    }

    #[test]
    fn interleaved_training_hand_case() {
        // candidates {0, 0.3, 0.55, 0.75, 1}: tau = 0.3 wins with F = 0.8
        let train = items(&[(0.9, true), (0.6, false), (0.5, true), (0.1, false)]);
        let (tau, f) = optimal_threshold(&train).unwrap();
        assert!((tau - 0.3).abs() < 1e-12);
        assert!((f - 0.8).abs() < 1e-12);
    }

    #[test]
    fn matches_exhaustive_search_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..50 {
            let n = rng.random_range(4..120);
            let data: Vec<LabeledScore> = (0..n)
                .map(|i| {
                    let positive = rng.random_bool(0.5);
                    let score: f64 = rng.random_range(0.0..1.0);
                    LabeledScore {
                        pref_id: format!("p{i}"),
                        score,
                        label: if positive {
                            Label::Sensitive
                        } else {
                            Label::NonSensitive
                        },
                    }
                })
                .collect();
            if !has_both_classes(&data) {
                continue;
            }
            let (tau, f) = optimal_threshold(&data).unwrap();
            let (btau, bf) = brute_force_threshold(&data);
            assert_eq!(tau, btau);
            assert!((f - bf).abs() < 1e-12);
            let a = auc(&data).unwrap();
            assert!((a - brute_force_auc(&data)).abs() < 1e-12);
        }
    }

    #[test]
    fn evaluate_perfect_separation() {
        let val = items(&[(0.9, true), (0.8, true), (0.2, false)]);
        let report = evaluate(&val, 0.5, 0).unwrap();
        assert_eq!(report.precision, 1.0);
        assert_eq!(report.recall, 1.0);
        assert_eq!(report.f_score, 1.0);
        assert_eq!(report.auc, 1.0);
    }

    #[test]
    fn auc_hand_case() {
        // pos {0.9, 0.4}, neg {0.6, 0.1} -> 3 of 4 pairs concordant
        let val = items(&[(0.9, true), (0.4, true), (0.6, false), (0.1, false)]);
        assert_eq!(auc(&val).unwrap(), 0.75);
    }

    #[test]
    fn auc_ties_count_half() {
        let val = items(&[(0.5, true), (0.5, false)]);
        assert_eq!(auc(&val).unwrap(), 0.5);
    }

    #[test]
    fn precision_zero_without_positive_predictions() {
        let val = items(&[(0.2, true), (0.1, false)]);
        let report = evaluate(&val, 0.9, 0).unwrap();
        assert_eq!(report.precision, 0.0);
        assert_eq!(report.recall, 0.0);
        assert_eq!(report.f_score, 0.0);
    }

    #[test]
    fn auc_invariant_under_monotone_transform() {
        let data = items(&[
            (0.9, true),
            (0.7, true),
            (0.65, false),
            (0.3, true),
            (0.2, false),
            (0.05, false),
        ]);
        let transformed: Vec<LabeledScore> = data
            .iter()
            .map(|d| LabeledScore {
                score: d.score * d.score, // strictly increasing on [0,1]
                ..d.clone()
            })
            .collect();
        assert!((auc(&data).unwrap() - auc(&transformed).unwrap()).abs() < 1e-12);
        let (_, f1) = optimal_threshold(&data).unwrap();
        let (_, f2) = optimal_threshold(&transformed).unwrap();
        assert!((f1 - f2).abs() < 1e-12);
    }

    #[test]
    fn single_realization_summary_collapses() {
        let data: Vec<LabeledScore> = (0..20).map(|i| item(i as f64 / 20.0, i >= 10)).collect();
        let summary = run_realizations(&data, 1, 5, 0.8).unwrap();
        assert_eq!(summary.reports.len(), 1);
        let r = &summary.reports[0];
        assert_eq!(summary.f_score.min, r.f_score);
        assert_eq!(summary.f_score.max, r.f_score);
        assert_eq!(summary.f_score.median, r.f_score);
    }

    #[test]
    fn realizations_deterministic() {
        let data: Vec<LabeledScore> = (0..30).map(|i| item(i as f64 / 30.0, i % 3 == 0)).collect();
        let a = run_realizations(&data, 20, 11, 0.8).unwrap();
        let b = run_realizations(&data, 20, 11, 0.8).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn metric_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let data: Vec<LabeledScore> = (0..60)
            .map(|i| {
                let positive = i % 2 == 0;
                let noise: f64 = rng.random_range(0.0..0.6);
                item(if positive { 0.4 + noise } else { noise }, positive)
            })
            .collect();
        let summary = run_realizations(&data, 30, 1, 0.8).unwrap();
        for r in &summary.reports {
            for m in [r.precision, r.recall, r.f_score, r.auc] {
                assert!((0.0..=1.0).contains(&m));
            }
            // harmonic mean never exceeds the arithmetic mean
            assert!(r.f_score <= (r.precision + r.recall) / 2.0 + 1e-12);
        }
    }
}
