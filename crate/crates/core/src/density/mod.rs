//! Univariate density estimates: kernel density estimation and Gaussian
//! mixtures fitted by EM.
//!
//! Every estimate is a [`DensityModel`], which can be evaluated exactly,
//! sampled from with a seed, and serialized to JSON for caching.

mod gmm;
mod kde;

use std::f64::consts::PI;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from, Rng};

pub use gmm::{fit_gmm, fit_gmm_with, select_gmm, select_gmm_with, EmFitReport, GmmConfig};
pub use kde::{fit_kde, rule_of_thumb_bandwidth};

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Beyond this many bandwidths a Gaussian kernel underflows to zero.
const GAUSS_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    /// Kernel value at standardized offset `u`.
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
        }
    }

    /// Half-width (in bandwidths) beyond which the kernel is exactly zero in
    /// floating point.
    fn reach(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => GAUSS_CUTOFF,
        }
    }

    /// Padding (in bandwidths) used for the support hint.
    fn hint_padding(self) -> f64 {
        match self {
            Kernel::Epanechnikov => 1.0,
            Kernel::Gaussian => 5.0,
        }
    }

    fn draw(self, rng: &mut Rng) -> f64 {
        match self {
            Kernel::Gaussian => rng.sample(StandardNormal),
            Kernel::Epanechnikov => {
                // Inverse CDF of 3/4 (1 - u^2) on [-1, 1].
                let p: f64 = rng.random();
                2.0 * ((2.0 * p - 1.0).asin() / 3.0).sin()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DensityKind {
    #[serde(rename = "KDE_EPANECHNIKOV")]
    KdeEpanechnikov,
    #[serde(rename = "KDE_GAUSSIAN")]
    KdeGaussian,
    #[serde(rename = "GMM")]
    Gmm,
}

/// A kernel density estimate with sorted centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    kernel: Kernel,
    bandwidth: f64,
    centers: Vec<f64>,
    support_hint: (f64, f64),
    norm: f64,
}

impl Kde {
    pub(crate) fn new(kernel: Kernel, bandwidth: f64, mut centers: Vec<f64>) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if centers.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if centers.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite kernel center"));
        }
        centers.sort_by(f64::total_cmp);
        let pad = kernel.hint_padding() * bandwidth;
        let support_hint = (centers[0] - pad, centers[centers.len() - 1] + pad);
        let norm = 1.0 / (centers.len() as f64 * bandwidth);
        Ok(Kde {
            kernel,
            bandwidth,
            centers,
            support_hint,
            norm,
        })
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        let reach = self.kernel.reach() * self.bandwidth;
        let lo = self.centers.partition_point(|&c| c < x - reach);
        let hi = self.centers.partition_point(|&c| c <= x + reach);
        let inv_h = 1.0 / self.bandwidth;
        let sum: f64 = self.centers[lo..hi]
            .iter()
            .map(|&c| self.kernel.eval((x - c) * inv_h))
            .sum();
        sum * self.norm
    }
}

/// One Gaussian mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

impl GaussianComponent {
    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        let sd = self.variance.sqrt();
        let z = (x - self.mean) / sd;
        INV_SQRT_2PI * (-0.5 * z * z).exp() / sd
    }

    #[inline]
    pub(crate) fn ln_pdf(&self, x: f64) -> f64 {
        let d = x - self.mean;
        -0.5 * ((2.0 * PI * self.variance).ln() + d * d / self.variance)
    }
}

/// A 1-D Gaussian mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm {
    components: Vec<GaussianComponent>,
    support_hint: (f64, f64),
}

/// Half-width (in standard deviations) of a mixture's support hint.
const GMM_HINT_SDS: f64 = 8.0;

impl Gmm {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        for c in &components {
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::invalid(format!("component variance must be positive, got {}", c.variance)));
            }
            if !(c.weight >= 0.0 && c.mean.is_finite()) {
                return Err(Error::invalid("invalid component weight or mean"));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}, not 1")));
        }
        let lo = components
            .iter()
            .map(|c| c.mean - GMM_HINT_SDS * c.variance.sqrt())
            .fold(f64::INFINITY, f64::min);
        let hi = components
            .iter()
            .map(|c| c.mean + GMM_HINT_SDS * c.variance.sqrt())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Gmm {
            components,
            support_hint: (lo, hi),
        })
    }

    /// A single normal N(mean, variance).
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        Gmm::new(vec![GaussianComponent {
            weight: 1.0,
            mean,
            variance,
        }])
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    #[inline]
    fn eval(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weight * c.pdf(x)).sum()
    }
}

/// An evaluable, sampleable univariate density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DensityDoc", into = "DensityDoc")]
pub enum DensityModel {
    Kde(Kde),
    Gmm(Gmm),
}

impl From<Gmm> for DensityModel {
    fn from(g: Gmm) -> Self {
        DensityModel::Gmm(g)
    }
}

impl From<Kde> for DensityModel {
    fn from(k: Kde) -> Self {
        DensityModel::Kde(k)
    }
}

impl DensityModel {
    /// Convenience constructor for a single normal with the given variance.
    pub fn normal(mean: f64, variance: f64) -> Result<Self> {
        Gmm::normal(mean, variance).map(DensityModel::Gmm)
    }

    /// A KDE with an explicit bandwidth; single-sample estimates are allowed.
    pub fn kde(kernel: Kernel, bandwidth: f64, centers: Vec<f64>) -> Result<Self> {
        Kde::new(kernel, bandwidth, centers).map(DensityModel::Kde)
    }

    pub fn kind(&self) -> DensityKind {
        match self {
            DensityModel::Kde(k) => match k.kernel {
                Kernel::Epanechnikov => DensityKind::KdeEpanechnikov,
                Kernel::Gaussian => DensityKind::KdeGaussian,
            },
            DensityModel::Gmm(_) => DensityKind::Gmm,
        }
    }

    /// Interval outside which the density is treated as negligible.
    pub fn support_hint(&self) -> (f64, f64) {
        match self {
            DensityModel::Kde(k) => k.support_hint,
            DensityModel::Gmm(g) => g.support_hint,
        }
    }

    /// Exact density value at `x`.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            DensityModel::Kde(k) => k.eval(x),
            DensityModel::Gmm(g) => g.eval(x),
        }
    }

    /// Draws `n` i.i.d. values; identical seeds give identical sequences.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        self.sample_with(n, &mut rng)
    }

    pub(crate) fn sample_with(&self, n: usize, rng: &mut Rng) -> Vec<f64> {
        match self {
            DensityModel::Kde(k) => (0..n)
                .map(|_| {
                    let c = k.centers[rng.random_range(0..k.centers.len())];
                    c + k.bandwidth * k.kernel.draw(rng)
                })
                .collect(),
            DensityModel::Gmm(g) => (0..n)
                .map(|_| {
                    let u: f64 = rng.random();
                    let mut acc = 0.0;
                    let mut chosen = g.components.len() - 1;
                    for (j, c) in g.components.iter().enumerate() {
                        acc += c.weight;
                        if u < acc {
                            chosen = j;
                            break;
                        }
                    }
                    let c = &g.components[chosen];
                    let z: f64 = StandardNormal.sample(rng);
                    c.mean + c.variance.sqrt() * z
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Free-function form of [`DensityModel::eval`].
pub fn eval_density(model: &DensityModel, x: f64) -> f64 {
    model.eval(x)
}

/// Free-function form of [`DensityModel::sample`].
pub fn sample_density(model: &DensityModel, n: usize, seed: u64) -> Vec<f64> {
    model.sample(n, seed)
}

/// Wire form of a density model.
#[derive(Serialize, Deserialize)]
struct DensityDoc {
    kind: DensityKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bandwidth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    centers: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    components: Option<Vec<GaussianComponent>>,
    support_hint: (f64, f64),
}

impl From<DensityModel> for DensityDoc {
    fn from(m: DensityModel) -> Self {
        let kind = m.kind();
        let support_hint = m.support_hint();
        match m {
            DensityModel::Kde(k) => DensityDoc {
                kind,
                bandwidth: Some(k.bandwidth),
                centers: Some(k.centers),
                components: None,
                support_hint,
            },
            DensityModel::Gmm(g) => DensityDoc {
                kind,
                bandwidth: None,
                centers: None,
                components: Some(g.components),
                support_hint,
            },
        }
    }
}

impl TryFrom<DensityDoc> for DensityModel {
    type Error = Error;

    fn try_from(doc: DensityDoc) -> Result<Self> {
        let mut model = match doc.kind {
            DensityKind::KdeEpanechnikov | DensityKind::KdeGaussian => {
                let kernel = if doc.kind == DensityKind::KdeGaussian {
                    Kernel::Gaussian
                } else {
                    Kernel::Epanechnikov
                };
                let bandwidth = doc.bandwidth.ok_or_else(|| Error::invalid("KDE document lacks bandwidth"))?;
                let centers = doc.centers.ok_or_else(|| Error::invalid("KDE document lacks centers"))?;
                DensityModel::Kde(Kde::new(kernel, bandwidth, centers)?)
            }
            DensityKind::Gmm => {
                let components = doc
                    .components
                    .ok_or_else(|| Error::invalid("GMM document lacks components"))?;
                DensityModel::Gmm(Gmm::new(components)?)
            }
        };
        // The stored hint is authoritative.
        match &mut model {
            DensityModel::Kde(k) => k.support_hint = doc.support_hint,
            DensityModel::Gmm(g) => g.support_hint = doc.support_hint,
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn standard_normal_at_zero() {
        let m = DensityModel::normal(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.eval(0.0), 0.39894, epsilon = 1e-5);
    }

    #[test]
    fn symmetric_two_component_mixture() {
        let m = DensityModel::Gmm(
            Gmm::new(vec![
                GaussianComponent { weight: 0.5, mean: -1.0, variance: 1.0 },
                GaussianComponent { weight: 0.5, mean: 1.0, variance: 1.0 },
            ])
            .unwrap(),
        );
        // 0.5 phi(1) + 0.5 phi(-1) = phi(1)
        let phi1 = (-0.5f64).exp() / (2.0 * PI).sqrt();
        assert_abs_diff_eq!(m.eval(0.0), phi1, epsilon = 1e-15);
        assert_abs_diff_eq!(m.eval(0.0), 0.24197, epsilon = 1e-5);
    }

    #[test]
    fn epanechnikov_vanishes_outside_hint() {
        let m = DensityModel::kde(Kernel::Epanechnikov, 0.3, vec![-1.0, 0.0, 2.0]).unwrap();
        let (lo, hi) = m.support_hint();
        for x in [lo - 1e-9, hi + 1e-9, lo - 10.0, hi + 100.0] {
            assert_eq!(m.eval(x), 0.0);
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(DensityModel::normal(5.0, 0.0).is_err());
        assert!(DensityModel::kde(Kernel::Gaussian, 0.0, vec![1.0]).is_err());
        assert!(Gmm::new(vec![GaussianComponent { weight: 0.7, mean: 0.0, variance: 1.0 }]).is_err());
    }

    #[test]
    fn narrow_gmm_sample_mean() {
        let m = DensityModel::normal(5.0, 1e-6).unwrap();
        let xs = m.sample(10_000, 3);
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!((mean - 5.0).abs() < 0.01);
    }

    #[test]
    fn epanechnikov_samples_stay_in_kernel() {
        let m = DensityModel::kde(Kernel::Epanechnikov, 1.0, vec![0.0]).unwrap();
        assert!(m.sample(20_000, 11).iter().all(|x| (-1.0..=1.0).contains(x)));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = DensityModel::kde(Kernel::Gaussian, 0.5, vec![0.0, 1.0, 4.0]).unwrap();
        assert_eq!(m.sample(100, 9), m.sample(100, 9));
        assert_ne!(m.sample(100, 9), m.sample(100, 10));
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let m = DensityModel::kde(Kernel::Gaussian, 0.1 + 0.2, vec![1.0 / 3.0, 2.0f64.sqrt(), -1e-300]).unwrap();
        let back = DensityModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let g = DensityModel::Gmm(
            Gmm::new(vec![
                GaussianComponent { weight: 0.25, mean: PI, variance: 1.0 / 7.0 },
                GaussianComponent { weight: 0.75, mean: -PI, variance: 2.0 },
            ])
            .unwrap(),
        );
        let json = g.to_json().unwrap();
        assert!(json.contains("\"kind\":\"GMM\""));
        assert_eq!(g, DensityModel::from_json(&json).unwrap());
    }
}
