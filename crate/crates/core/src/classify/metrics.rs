//! Rank statistics on bag scores. Lower scores are read as more positive.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

fn class_counts(labels: &[Label]) -> (usize, usize) {
    let pos = labels.iter().filter(|l| l.is_pos()).count();
    (pos, labels.len() - pos)
}

fn check_inputs(scores: &[f64], labels: &[Label]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::invalid("scores must not be NaN"));
    }
    let (pos, neg) = class_counts(labels);
    if pos == 0 {
        return Err(Error::MissingClass(Label::Pos));
    }
    if neg == 0 {
        return Err(Error::MissingClass(Label::Neg));
    }
    Ok((pos, neg))
}

/// `P(score_pos < score_neg) + P(tie) / 2`, from mid-ranks.
///
/// Ranks are kept doubled so the statistic is an exact integer count divided
/// by `2 * n_pos * n_neg`.
pub fn auc(scores: &[f64], labels: &[Label]) -> Result<f64> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Sum of doubled mid-ranks of the negative bags.
    let mut neg_rank2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j+1 share the mid-rank (i + j + 2) / 2.
        let mid2 = (i + j + 2) as u128;
        let negs = order[i..=j].iter().filter(|&&k| !labels[k].is_pos()).count() as u128;
        neg_rank2 += mid2 * negs;
        i = j + 1;
    }
    let nn = n_neg as u128;
    let u2 = neg_rank2 - nn * (nn + 1);
    Ok(u2 as f64 / (2 * n_pos as u128 * nn) as f64)
}

/// ROC curve swept over every distinct score: a bag is called positive when
/// its score is at most the threshold. Points are (false positive rate,
/// true positive rate), from (0, 0) to (1, 1).
pub fn roc(scores: &[f64], labels: &[Label]) -> Result<Vec<(f64, f64)>> {
    let (n_pos, n_neg) = check_inputs(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]].is_pos() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    Ok(points)
}

/// Trapezoidal area under a piecewise-linear curve.
pub fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Fraction of bags whose predicted label matches.
pub fn accuracy(predictions: &[Label], labels: &[Label]) -> f64 {
    let hits = predictions.iter().zip(labels).filter(|(p, l)| p == l).count();
    hits as f64 / labels.len().max(1) as f64
}

/// Label implied by a score: positive strictly below the threshold.
pub fn predict(score: f64, threshold: f64) -> Label {
    if score < threshold {
        Label::Pos
    } else {
        Label::Neg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Loocv,
    Fixed(f64),
}

impl std::str::FromStr for ThresholdPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("loocv") {
            return Ok(ThresholdPolicy::Loocv);
        }
        if let Some(rest) = s.strip_prefix("fixed:") {
            let t: f64 = rest
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad fixed threshold {rest:?}")))?;
            if t.is_finite() {
                return Ok(ThresholdPolicy::Fixed(t));
            }
        }
        Err(Error::invalid(format!(
            "threshold must be 'loocv' or 'fixed:<t>', got {s:?}"
        )))
    }
}

/// Midpoints between consecutive distinct scores.
pub fn threshold_candidates(scores: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0).collect()
}

/// Picks the decision threshold from training scores.
///
/// Under `Loocv` every midpoint is a candidate. Each bag is held out in turn
/// and classified by the candidate; since candidates do not depend on the
/// held-out bag's label, this count equals the training accuracy of the
/// candidate. The best candidate wins, ties going to the one nearest the
/// median candidate (lower index on an exact tie).
pub fn choose_threshold(scores: &[f64], labels: &[Label], policy: ThresholdPolicy) -> Result<f64> {
    if let ThresholdPolicy::Fixed(t) = policy {
        return Ok(t);
    }
    if scores.len() < 2 || scores.len() != labels.len() {
        return Err(Error::invalid("threshold selection needs at least 2 labeled scores"));
    }
    let candidates = threshold_candidates(scores);
    if candidates.is_empty() {
        return Ok(scores[0]);
    }
    let hits: Vec<usize> = candidates
        .iter()
        .map(|&t| {
            scores
                .iter()
                .zip(labels)
                .filter(|(&s, &l)| predict(s, t) == l)
                .count()
        })
        .collect();
    let best = *hits.iter().max().expect("non-empty");
    let centre = (candidates.len() - 1) as f64 / 2.0;
    let pick = hits
        .iter()
        .enumerate()
        .filter(|(_, &h)| h == best)
        .map(|(i, _)| i)
        .min_by(|&a, &b| {
            let da = (a as f64 - centre).abs();
            let db = (b as f64 - centre).abs();
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("at least one maximizer");
    Ok(candidates[pick])
}
