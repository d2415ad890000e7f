//! Exact checks of the bag-to-class divergence properties on piecewise
//! constant densities.
//!
//! A scenario is a family of histogram configurations indexed by a limit
//! parameter (a ratio bound `M` growing, or a density bound `ε` shrinking).
//! For each configuration the contribution of a marked region to the total
//! divergence is computed exactly by restricted summation, and the trend of
//! that contribution along the family decides pass or fail.
//!
//! The contribution of a region is the change in divergence when bag and
//! reference are both replaced by their average on that region. For KL and
//! cKL this is the restricted integral; for the Bhattacharyya distance it is
//! `ln(1 + h_R / BC)` with `h_R` the region's squared-Hellinger mass. The
//! definition is symmetric in bag and reference, as BH itself is.

use serde::{Deserialize, Serialize};

use super::Measure;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PropertyId {
    /// Large bag-to-class ratio dominates; large class-to-bag ratio does not.
    P1,
    /// Regions where the bag density vanishes contribute nothing in the limit.
    P2,
    /// Regions where both class densities vanish contribute nothing in the limit.
    P3,
}

/// One configuration of a scenario family. Densities are per-bin values on
/// a shared grid of equal-width bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramStep {
    /// Limit parameter (`M` for P1, `ε` for P2/P3).
    pub param: f64,
    pub bag: Vec<f64>,
    /// Class density the bag is compared to.
    pub reference: Vec<f64>,
    /// The other class; only cKL uses it (as `f_neg` when `reference` is `f_pos`).
    pub alternate: Vec<f64>,
    /// The subspace whose contribution is tracked.
    pub region: Vec<bool>,
    /// For P1, the mirrored subspace where the class-to-bag ratio is large.
    pub mirror_region: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyScenario {
    pub name: String,
    pub bin_width: f64,
    pub steps: Vec<HistogramStep>,
}

/// Outcome for one measure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCheck {
    pub measure: Measure,
    pub passed: bool,
    /// Region contribution (P2/P3) or region share of the total (P1), per step.
    pub trend: Vec<f64>,
    /// Mirror-region share per step (P1 only).
    pub mirror_trend: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub property: PropertyId,
    pub scenario: String,
    pub results: Vec<MeasureCheck>,
}

impl CheckReport {
    pub fn passed(&self, measure: Measure) -> Option<bool> {
        self.results.iter().find(|r| r.measure == measure).map(|r| r.passed)
    }
}

/// Distance from the limit counted as "reached" at the end of a family.
const LIMIT_TOL: f64 = 0.05;
/// A contribution this small at the end of a shrinking-ε family counts as zero.
const ZERO_TOL: f64 = 1e-4;
/// Slack for monotone trends.
const TREND_SLACK: f64 = 1e-12;

struct Totals {
    kl: f64,
    ckl: f64,
    affinity: f64,
}

fn kl_term(b: f64, r: f64) -> f64 {
    if b == 0.0 {
        0.0
    } else if r == 0.0 {
        f64::INFINITY
    } else {
        b * (b / r).ln()
    }
}

fn ckl_term(b: f64, r: f64, a: f64) -> f64 {
    if b == 0.0 || a == 0.0 {
        0.0
    } else if r == 0.0 {
        f64::INFINITY
    } else {
        (a / r) * b * (b / r).ln()
    }
}

fn totals(step: &HistogramStep, w: f64) -> Totals {
    let mut t = Totals { kl: 0.0, ckl: 0.0, affinity: 0.0 };
    for i in 0..step.bag.len() {
        let (b, r, a) = (step.bag[i], step.reference[i], step.alternate[i]);
        t.kl += w * kl_term(b, r);
        t.ckl += w * ckl_term(b, r, a);
        t.affinity += w * (b * r).sqrt();
    }
    t
}

fn region_contribution(step: &HistogramStep, region: &[bool], w: f64, measure: Measure, totals: &Totals) -> f64 {
    let idx = (0..step.bag.len()).filter(|&i| region[i]);
    match measure {
        Measure::Kl => idx.map(|i| w * kl_term(step.bag[i], step.reference[i])).sum(),
        Measure::Ckl => idx
            .map(|i| w * ckl_term(step.bag[i], step.reference[i], step.alternate[i]))
            .sum(),
        Measure::Bh => {
            let hellinger: f64 = idx
                .map(|i| 0.5 * w * (step.bag[i].sqrt() - step.reference[i].sqrt()).powi(2))
                .sum();
            if totals.affinity > 0.0 {
                (1.0 + hellinger / totals.affinity).ln()
            } else {
                f64::INFINITY
            }
        }
    }
}

fn total_divergence(measure: Measure, t: &Totals) -> f64 {
    match measure {
        Measure::Kl => t.kl,
        Measure::Ckl => t.ckl,
        Measure::Bh => -t.affinity.ln(),
    }
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0] + TREND_SLACK * w[0].abs().max(1.0))
}

fn validate(scenario: &PropertyScenario, property: PropertyId) -> Result<()> {
    if scenario.steps.len() < 2 {
        return Err(Error::ScenarioMismatch("a scenario needs at least two steps".into()));
    }
    if !(scenario.bin_width > 0.0) {
        return Err(Error::ScenarioMismatch("bin width must be positive".into()));
    }
    let n = scenario.steps[0].bag.len();
    for (k, s) in scenario.steps.iter().enumerate() {
        let lens = [s.bag.len(), s.reference.len(), s.alternate.len(), s.region.len()];
        if lens.iter().any(|&l| l != n) || s.mirror_region.as_ref().is_some_and(|m| m.len() != n) {
            return Err(Error::ScenarioMismatch(format!("step {k} has grids of differing length")));
        }
        if property == PropertyId::P1 && s.mirror_region.is_none() {
            return Err(Error::ScenarioMismatch(format!("step {k} lacks the mirror region P1 needs")));
        }
        let all = s.bag.iter().chain(&s.reference).chain(&s.alternate);
        if all.clone().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::ScenarioMismatch(format!("step {k} has invalid densities")));
        }
    }
    Ok(())
}

/// Checks one property for KL, BH and cKL on a scenario family.
///
/// * P1 passes when the share of the divergence coming from the large
///   bag-to-class ratio region tends to 1 (its maximum) while the share of
///   the mirrored region does not.
/// * P2 and P3 pass when the tracked region's contribution shrinks
///   monotonically to zero.
pub fn check_property(property: PropertyId, scenario: &PropertyScenario) -> Result<CheckReport> {
    validate(scenario, property)?;
    let w = scenario.bin_width;
    let results = [Measure::Kl, Measure::Bh, Measure::Ckl]
        .into_iter()
        .map(|measure| {
            let mut trend = Vec::with_capacity(scenario.steps.len());
            let mut mirror_trend = Vec::new();
            for step in &scenario.steps {
                let t = totals(step, w);
                let c = region_contribution(step, &step.region, w, measure, &t);
                match property {
                    PropertyId::P1 => {
                        let total = total_divergence(measure, &t);
                        let mirror = step.mirror_region.as_ref().expect("validated");
                        let cm = region_contribution(step, mirror, w, measure, &t);
                        trend.push(c / total);
                        mirror_trend.push(cm / total);
                    }
                    PropertyId::P2 | PropertyId::P3 => trend.push(c),
                }
            }
            let passed = match property {
                PropertyId::P1 => {
                    let gaps: Vec<f64> = trend.iter().map(|s| (1.0 - s).abs()).collect();
                    let last = *gaps.last().expect("steps");
                    let mirror_last = (1.0 - mirror_trend.last().expect("steps")).abs();
                    gaps.iter().all(|g| g.is_finite())
                        && last <= LIMIT_TOL
                        && non_increasing(&gaps)
                        && mirror_last > LIMIT_TOL
                }
                PropertyId::P2 | PropertyId::P3 => {
                    let mags: Vec<f64> = trend.iter().map(|c| c.abs()).collect();
                    mags.iter().all(|m| m.is_finite())
                        && *mags.last().expect("steps") <= ZERO_TOL
                        && non_increasing(&mags)
                }
            };
            MeasureCheck {
                measure,
                passed,
                trend,
                mirror_trend,
            }
        })
        .collect();
    Ok(CheckReport {
        property,
        scenario: scenario.name.clone(),
        results,
    })
}

/// Which negative class of the two-negative-class construction to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NegativeVariant {
    /// Mass 0.5 at offsets 0 and 2.
    TwoAtoms,
    /// Mass 0.5, 0.25, 0.25 at offsets 0, 2 and 3.
    ThreeAtoms,
}

impl PropertyScenario {
    /// Symmetric construction for P1: on region A the bag density is `M`
    /// times the reference, on region B the reference is `M` times the bag,
    /// and on the remaining bins both agree. The alternate class is uniform.
    pub fn ratio_extremes(ms: &[f64]) -> Self {
        const A: f64 = 0.3;
        let steps = ms
            .iter()
            .map(|&m| {
                let common = (1.0 - A - A / m) / 2.0;
                HistogramStep {
                    param: m,
                    bag: vec![A, A / m, common, common],
                    reference: vec![A / m, A, common, common],
                    alternate: vec![0.25; 4],
                    region: vec![true, false, false, false],
                    mirror_region: Some(vec![false, true, false, false]),
                }
            })
            .collect();
        PropertyScenario {
            name: "ratio-extremes".into(),
            bin_width: 1.0,
            steps,
        }
    }

    /// Uniform bags of width one on a grid of unit bins. The bag sits at
    /// offset 0 and leaks mass `ε` into offset 2; the reference is one of the
    /// two negative classes, which differ only where the bag has no mass.
    /// The tracked region is every bin where the bag density is at most `ε`.
    pub fn two_negative_classes(variant: NegativeVariant, eps: &[f64]) -> Self {
        let reference = match variant {
            NegativeVariant::TwoAtoms => vec![0.5, 0.0, 0.5, 0.0],
            NegativeVariant::ThreeAtoms => vec![0.5, 0.0, 0.25, 0.25],
        };
        let steps = eps
            .iter()
            .map(|&e| {
                let bag = vec![1.0 - e, 0.0, e, 0.0];
                let region = bag.iter().map(|&b| b <= e).collect();
                HistogramStep {
                    param: e,
                    bag,
                    reference: reference.clone(),
                    alternate: vec![0.25; 4],
                    region,
                    mirror_region: None,
                }
            })
            .collect();
        PropertyScenario {
            name: match variant {
                NegativeVariant::TwoAtoms => "two-negative-classes/neg".into(),
                NegativeVariant::ThreeAtoms => "two-negative-classes/neg-prime".into(),
            },
            bin_width: 1.0,
            steps,
        }
    }

    /// A bag with a segment (mass 0.2 in bin 1) that neither class has seen:
    /// the positive class (reference) has density `ε` there and the negative
    /// class `ε²`. Bin 0 is shared by everything, bin 2 is positive only and
    /// bin 3 negative only.
    pub fn unseen_segment(eps: &[f64]) -> Self {
        let steps = eps
            .iter()
            .map(|&e| {
                let pos = vec![0.5 - e, e, 0.5, 0.0];
                let neg = vec![0.5 - e * e, e * e, 0.0, 0.5];
                let region = pos.iter().zip(&neg).map(|(&p, &n)| p <= e && n <= e).collect();
                HistogramStep {
                    param: e,
                    bag: vec![0.8, 0.2, 0.0, 0.0],
                    reference: pos,
                    alternate: neg,
                    region,
                    mirror_region: None,
                }
            })
            .collect();
        PropertyScenario {
            name: "unseen-segment".into(),
            bin_width: 1.0,
            steps,
        }
    }

    /// The fixed scenario used for each property by the property suite.
    pub fn standard(property: PropertyId) -> Self {
        let growing: Vec<f64> = (1..=10).map(|k| 10f64.powi(k)).collect();
        let shrinking: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
        match property {
            PropertyId::P1 => Self::ratio_extremes(&growing),
            PropertyId::P2 => Self::two_negative_classes(NegativeVariant::TwoAtoms, &shrinking),
            PropertyId::P3 => Self::unseen_segment(&shrinking),
        }
    }
}
