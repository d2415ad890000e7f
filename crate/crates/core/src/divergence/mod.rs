//! Bag-to-reference divergences: KL information, Bhattacharyya distance,
//! the class-conditional KL (cKL) and the bag-to-class ratio rD.
//!
//! Integrals are approximated either by importance sampling with the bag
//! density as proposal, or by a midpoint Riemann sum on a uniform grid. Both
//! routes write the integral as `∫ f_bag(x) g(x) dx` and differ only in the
//! evaluation points and their masses.
//!
//! Reference densities are floored at `floor` and density ratios are capped
//! at `ratio_clip`, so every score is finite. `clipped_fraction` reports how
//! often either safeguard fired.

mod properties;

pub use properties::{
    check_property, CheckReport, HistogramStep, MeasureCheck, NegativeVariant, PropertyId,
    PropertyScenario,
};

use serde::{Deserialize, Serialize};

use crate::density::DensityModel;
use crate::error::{Error, Result};
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "KL")]
    Kl,
    #[serde(rename = "BH")]
    Bh,
    #[serde(rename = "CKL")]
    Ckl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Integrator {
    #[serde(rename = "IMPORTANCE")]
    Importance,
    #[serde(rename = "RIEMANN")]
    Riemann,
}

/// How a divergence integral is approximated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceSpec {
    pub measure: Measure,
    pub integrator: Integrator,
    /// Importance-sample count.
    pub n_imp: usize,
    /// Riemann grid resolution.
    pub grid_points: usize,
    /// Cap on density ratios (and hence on |log ratio|).
    pub ratio_clip: f64,
    /// Floor applied to reference densities before division.
    pub floor: f64,
}

impl Default for DivergenceSpec {
    fn default() -> Self {
        DivergenceSpec {
            measure: Measure::Kl,
            integrator: Integrator::Importance,
            n_imp: 1000,
            grid_points: 4096,
            ratio_clip: 1e6,
            floor: 1e-300,
        }
    }
}

impl DivergenceSpec {
    pub fn with_measure(mut self, measure: Measure) -> Self {
        self.measure = measure;
        self
    }

    pub fn with_integrator(mut self, integrator: Integrator) -> Self {
        self.integrator = integrator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_imp < 100 {
            return Err(Error::invalid(format!("n_imp must be >= 100, got {}", self.n_imp)));
        }
        if self.grid_points < 256 {
            return Err(Error::invalid(format!(
                "grid_points must be >= 256, got {}",
                self.grid_points
            )));
        }
        if !(self.ratio_clip > 1.0) {
            return Err(Error::invalid("ratio_clip must exceed 1"));
        }
        if !(self.floor > 0.0 && self.floor < 1e-6) {
            return Err(Error::invalid("floor must lie in (0, 1e-6)"));
        }
        Ok(())
    }
}

/// One divergence estimate with diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DivergenceScore {
    pub measure: Measure,
    pub value: f64,
    /// Fraction of evaluation points where flooring or clipping fired.
    pub clipped_fraction: f64,
    /// Effective sample size of the importance weights (importance sampling only).
    pub ess: Option<f64>,
    /// Set when `ess < 0.01 * n_imp`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_ess: bool,
}

/// Evaluation points for integrals of the form `∫ f_bag(x) g(x) dx`.
///
/// Built once per bag; any number of reference densities can then be
/// evaluated at the same points.
#[derive(Debug, Clone)]
pub struct BagQuadrature {
    points: Vec<f64>,
    /// Integration mass of each point: `1/n` for importance sampling,
    /// `dx * f_bag(x)` for the Riemann sum.
    mass: Vec<f64>,
    bag: Vec<f64>,
    integrator: Integrator,
    ratio_clip: f64,
    floor: f64,
}

impl BagQuadrature {
    /// Draws importance samples from `f_bag`, or lays a Riemann grid over the
    /// union of the support hints of `f_bag` and `others`.
    pub fn new(f_bag: &DensityModel, others: &[&DensityModel], spec: &DivergenceSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let (points, mass, bag) = match spec.integrator {
            Integrator::Importance => {
                let mut rng = rng_from(seed);
                let points = f_bag.sample_with(spec.n_imp, &mut rng);
                let bag: Vec<f64> = points.iter().map(|&z| f_bag.eval(z)).collect();
                let mass = vec![1.0 / spec.n_imp as f64; spec.n_imp];
                (points, mass, bag)
            }
            Integrator::Riemann => {
                let (mut lo, mut hi) = f_bag.support_hint();
                for m in others {
                    let (l, h) = m.support_hint();
                    lo = lo.min(l);
                    hi = hi.max(h);
                }
                let pad = 0.1 * (hi - lo);
                lo -= pad;
                hi += pad;
                let dx = (hi - lo) / spec.grid_points as f64;
                let mut points = Vec::with_capacity(spec.grid_points);
                let mut mass = Vec::with_capacity(spec.grid_points);
                let mut bag = Vec::with_capacity(spec.grid_points);
                for i in 0..spec.grid_points {
                    let x = lo + (i as f64 + 0.5) * dx;
                    let fb = f_bag.eval(x);
                    // 0 log 0 = 0: points outside the bag's support carry no mass.
                    if fb > 0.0 {
                        points.push(x);
                        mass.push(dx * fb);
                        bag.push(fb);
                    }
                }
                (points, mass, bag)
            }
        };
        Ok(BagQuadrature {
            points,
            mass,
            bag,
            integrator: spec.integrator,
            ratio_clip: spec.ratio_clip,
            floor: spec.floor,
        })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Values of `model` at the evaluation points.
    pub fn evaluate(&self, model: &DensityModel) -> Vec<f64> {
        self.points.iter().map(|&x| model.eval(x)).collect()
    }

    fn ess(&self, weights: Option<&[f64]>) -> Option<f64> {
        if self.integrator != Integrator::Importance {
            return None;
        }
        let n = self.points.len() as f64;
        Some(match weights {
            None => n,
            Some(w) => {
                let s: f64 = w.iter().sum();
                let s2: f64 = w.iter().map(|x| x * x).sum();
                if s2 > 0.0 {
                    (s * s / s2).clamp(f64::MIN_POSITIVE, n)
                } else {
                    n
                }
            }
        })
    }

    fn score(&self, measure: Measure, value: f64, clipped: usize, weights: Option<&[f64]>) -> DivergenceScore {
        let n = self.points.len().max(1);
        let ess = self.ess(weights);
        DivergenceScore {
            measure,
            value,
            clipped_fraction: clipped as f64 / n as f64,
            ess,
            low_ess: ess.is_some_and(|e| e < 0.01 * n as f64),
        }
    }

    /// Clipped `log(f_bag / max(f_ref, floor))`; the flag reports whether a
    /// safeguard fired.
    #[inline]
    fn log_ratio(&self, fb: f64, fr: f64) -> (f64, bool) {
        let cap = self.ratio_clip.ln();
        let floored = fr < self.floor;
        let lr = fb.max(self.floor).ln() - fr.max(self.floor).ln();
        if lr > cap {
            (cap, true)
        } else if lr < -cap {
            (-cap, true)
        } else {
            (lr, floored)
        }
    }

    /// KL information from the bag to a reference evaluated at the points.
    pub fn kl(&self, reference: &[f64]) -> DivergenceScore {
        let mut sum = 0.0;
        let mut clipped = 0;
        for ((m, &fb), &fr) in self.mass.iter().zip(&self.bag).zip(reference) {
            let (lr, c) = self.log_ratio(fb, fr);
            clipped += usize::from(c);
            sum += m * lr;
        }
        self.score(Measure::Kl, sum, clipped, None)
    }

    /// Bhattacharyya distance `-log ∫ sqrt(f_bag f_ref)`, with the affinity
    /// clamped to `[1/ratio_clip, 1]`.
    pub fn bhattacharyya(&self, reference: &[f64]) -> DivergenceScore {
        let cap = self.ratio_clip;
        let mut affinity = 0.0;
        let mut clipped = 0;
        for ((m, &fb), &fr) in self.mass.iter().zip(&self.bag).zip(reference) {
            let mut ratio = fr / fb.max(self.floor);
            if ratio > cap {
                ratio = cap;
                clipped += 1;
            }
            affinity += m * ratio.sqrt();
        }
        let inner = affinity.clamp(1.0 / cap, 1.0);
        assert!(inner > 0.0, "Bhattacharyya affinity must be positive after clamping");
        self.score(Measure::Bh, -inner.ln(), clipped, None)
    }

    /// Class-conditional KL: `∫ (f_neg/f_pos) f_bag log(f_bag/f_pos)`, with the
    /// weight capped at `ratio_clip`. Both class densities are floored before
    /// the division, so the weight is 1 where both vanish.
    pub fn ckl(&self, pos: &[f64], neg: &[f64]) -> DivergenceScore {
        let mut sum = 0.0;
        let mut clipped = 0;
        let mut weights = Vec::with_capacity(self.points.len());
        for (((m, &fb), &fp), &fn_) in self.mass.iter().zip(&self.bag).zip(pos).zip(neg) {
            let (lr, mut c) = self.log_ratio(fb, fp);
            let mut w = fn_.max(self.floor) / fp.max(self.floor);
            if w > self.ratio_clip {
                w = self.ratio_clip;
                c = true;
            }
            clipped += usize::from(c);
            weights.push(w);
            sum += m * w * lr;
        }
        self.score(Measure::Ckl, sum, clipped, Some(&weights))
    }
}

/// KL information `∫ f_bag log(f_bag / f_ref)`.
pub fn kl(f_bag: &DensityModel, f_ref: &DensityModel, spec: &DivergenceSpec, seed: u64) -> Result<DivergenceScore> {
    let q = BagQuadrature::new(f_bag, &[f_ref], spec, seed)?;
    Ok(q.kl(&q.evaluate(f_ref)))
}

/// Bhattacharyya distance `-log ∫ sqrt(f_bag f_ref)`.
pub fn bhattacharyya(
    f_bag: &DensityModel,
    f_ref: &DensityModel,
    spec: &DivergenceSpec,
    seed: u64,
) -> Result<DivergenceScore> {
    let q = BagQuadrature::new(f_bag, &[f_ref], spec, seed)?;
    Ok(q.bhattacharyya(&q.evaluate(f_ref)))
}

/// Class-conditional KL of the bag against the positive class given the negative class.
pub fn ckl(
    f_bag: &DensityModel,
    f_pos: &DensityModel,
    f_neg: &DensityModel,
    spec: &DivergenceSpec,
    seed: u64,
) -> Result<DivergenceScore> {
    let q = BagQuadrature::new(f_bag, &[f_pos, f_neg], spec, seed)?;
    Ok(q.ckl(&q.evaluate(f_pos), &q.evaluate(f_neg)))
}

/// Denominator floor for [`rd_ratio`].
pub const RD_DENOMINATOR_FLOOR: f64 = 1e-12;

/// `D(f_bag, f_pos) / D(f_bag, f_neg)`; small values indicate a positive bag.
/// Both divergences are estimated at the same evaluation points.
pub fn rd_ratio(
    f_bag: &DensityModel,
    f_pos: &DensityModel,
    f_neg: &DensityModel,
    measure: Measure,
    spec: &DivergenceSpec,
    seed: u64,
) -> Result<f64> {
    let q = BagQuadrature::new(f_bag, &[f_pos, f_neg], spec, seed)?;
    let pos = q.evaluate(f_pos);
    let neg = q.evaluate(f_neg);
    let (num, den) = match measure {
        Measure::Kl => (q.kl(&pos).value, q.kl(&neg).value),
        Measure::Bh => (q.bhattacharyya(&pos).value, q.bhattacharyya(&neg).value),
        Measure::Ckl => return Err(Error::invalid("rD is defined for KL and BH only")),
    };
    Ok(ratio(num, den))
}

/// The rD quotient with its denominator floor.
pub fn ratio(num: f64, den: f64) -> f64 {
    num / den.max(RD_DENOMINATOR_FLOOR)
}

/// Closed-form KL between two normals given as (mean, variance).
pub fn gaussian_kl(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (m1, v1) = p;
    let (m2, v2) = q;
    0.5 * (v2 / v1).ln() + (v1 + (m1 - m2).powi(2)) / (2.0 * v2) - 0.5
}

/// Closed-form Bhattacharyya distance between two normals given as (mean, variance).
pub fn gaussian_bhattacharyya(p: (f64, f64), q: (f64, f64)) -> f64 {
    let (m1, v1) = p;
    let (m2, v2) = q;
    (m1 - m2).powi(2) / (4.0 * (v1 + v2)) + 0.5 * ((v1 + v2) / (2.0 * (v1 * v2).sqrt())).ln()
}
