use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{DensityModel, GaussianComponent, Gmm};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, Rng};

/// EM settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GmmConfig {
    /// Independent k-means++ initializations; the best log-likelihood wins.
    pub restarts: usize,
    pub max_iter: usize,
    /// Relative log-likelihood change that counts as converged.
    pub tol: f64,
    /// Variance floor as a fraction of the sample variance.
    pub variance_floor: f64,
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            restarts: 3,
            max_iter: 500,
            tol: 1e-8,
            variance_floor: 1e-6,
        }
    }
}

/// Outcome of one EM fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmFitReport {
    pub component_count: usize,
    pub log_likelihood: f64,
    pub aic: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every E-step, starting from the initialization.
    pub trace: Vec<f64>,
}

/// `2p - 2 log L` with `p = 3k - 1` free parameters.
pub fn aic(log_likelihood: f64, k: usize) -> f64 {
    2.0 * (3 * k - 1) as f64 - 2.0 * log_likelihood
}

struct EmRun {
    components: Vec<GaussianComponent>,
    report: EmFitReport,
}

fn sample_moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// k-means++ seeding followed by one hard assignment pass.
fn initialize(xs: &[f64], k: usize, var: f64, floor: f64, rng: &mut Rng) -> Vec<GaussianComponent> {
    let n = xs.len();
    let mut centers = vec![xs[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut pick = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            xs[pick]
        } else {
            xs[rng.random_range(0..n)]
        };
        centers.push(next);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - next).powi(2));
        }
    }

    let mut sums = vec![(0usize, 0.0f64, 0.0f64); k];
    for &x in xs {
        let j = centers
            .iter()
            .enumerate()
            .min_by(|a, b| (x - a.1).abs().total_cmp(&(x - b.1).abs()))
            .map(|(j, _)| j)
            .unwrap_or(0);
        sums[j].0 += 1;
        sums[j].1 += x;
        sums[j].2 += x * x;
    }
    sums.iter()
        .zip(&centers)
        .map(|(&(count, s, ss), &c)| {
            if count >= 2 {
                let m = s / count as f64;
                let v = (ss / count as f64 - m * m).max(floor);
                GaussianComponent { weight: count as f64 / n as f64, mean: m, variance: v }
            } else {
                GaussianComponent {
                    weight: count.max(1) as f64 / n as f64,
                    mean: c,
                    variance: var,
                }
            }
        })
        .collect()
}

fn normalize_weights(components: &mut [GaussianComponent]) {
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
}

fn run_em(xs: &[f64], mut components: Vec<GaussianComponent>, floor: f64, config: &GmmConfig) -> EmRun {
    let n = xs.len();
    let k = components.len();
    normalize_weights(&mut components);
    let mut resp = vec![0.0; n * k];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut log_terms = vec![0.0; k];

    loop {
        // E-step: responsibilities and the log-likelihood of the current parameters.
        let mut ll = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            for (t, c) in log_terms.iter_mut().zip(&components) {
                *t = if c.weight > 0.0 { c.weight.ln() + c.ln_pdf(x) } else { f64::NEG_INFINITY };
            }
            let max = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = log_terms.iter().map(|t| (t - max).exp()).sum();
            let lse = max + sum.ln();
            ll += lse;
            for (j, t) in log_terms.iter().enumerate() {
                resp[i * k + j] = (t - lse).exp();
            }
        }
        if let Some(&prev) = trace.last() {
            let prev: f64 = prev;
            if (ll - prev).abs() <= config.tol * prev.abs().max(f64::MIN_POSITIVE) {
                converged = true;
            }
        }
        trace.push(ll);
        if converged || iterations >= config.max_iter {
            break;
        }

        // M-step.
        for (j, c) in components.iter_mut().enumerate() {
            let nj: f64 = (0..n).map(|i| resp[i * k + j]).sum();
            if nj <= 1e-300 {
                c.weight = 0.0;
                continue;
            }
            let mean = (0..n).map(|i| resp[i * k + j] * xs[i]).sum::<f64>() / nj;
            let var = (0..n)
                .map(|i| resp[i * k + j] * (xs[i] - mean).powi(2))
                .sum::<f64>()
                / nj;
            c.weight = nj / n as f64;
            c.mean = mean;
            c.variance = var.max(floor);
        }
        normalize_weights(&mut components);
        iterations += 1;
    }

    let log_likelihood = *trace.last().expect("at least one E-step");
    EmRun {
        components,
        report: EmFitReport {
            component_count: k,
            log_likelihood,
            aic: aic(log_likelihood, k),
            iterations,
            converged,
            trace,
        },
    }
}

/// Fits a `k`-component mixture by EM with default settings.
pub fn fit_gmm(samples: &[f64], k: usize, seed: u64) -> Result<(DensityModel, EmFitReport)> {
    fit_gmm_with(samples, k, seed, &GmmConfig::default())
}

pub fn fit_gmm_with(
    samples: &[f64],
    k: usize,
    seed: u64,
    config: &GmmConfig,
) -> Result<(DensityModel, EmFitReport)> {
    if k < 1 {
        return Err(Error::invalid("component count must be at least 1"));
    }
    if samples.len() < 3 * k {
        return Err(Error::TooFewSamples {
            needed: 3 * k,
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite sample"));
    }
    let (_, var) = sample_moments(samples);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let floor = config.variance_floor * var;

    let mut best: Option<EmRun> = None;
    for restart in 0..config.restarts.max(1) {
        let mut rng = rng_from(derive_seed(seed, "em-restart", restart as u64));
        let init = initialize(samples, k, var, floor, &mut rng);
        let run = run_em(samples, init, floor, config);
        let better = best
            .as_ref()
            .is_none_or(|b| run.report.log_likelihood > b.report.log_likelihood);
        if better {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let model = Gmm::new(best.components)?;
    Ok((DensityModel::Gmm(model), best.report))
}

/// Fits k = 1..=k_max and keeps the minimum-AIC model (ties go to smaller k).
pub fn select_gmm(samples: &[f64], k_max: usize, seed: u64) -> Result<(DensityModel, EmFitReport)> {
    select_gmm_with(samples, k_max, seed, &GmmConfig::default())
}

pub fn select_gmm_with(
    samples: &[f64],
    k_max: usize,
    seed: u64,
    config: &GmmConfig,
) -> Result<(DensityModel, EmFitReport)> {
    if k_max < 1 {
        return Err(Error::invalid("k_max must be at least 1"));
    }
    let mut best: Option<(DensityModel, EmFitReport)> = None;
    let mut first_err = None;
    for k in 1..=k_max {
        match fit_gmm_with(samples, k, derive_seed(seed, "gmm-k", k as u64), config) {
            Ok((model, report)) => {
                if best.as_ref().is_none_or(|(_, b)| report.aic < b.aic) {
                    best = Some((model, report));
                }
            }
            Err(Error::TooFewSamples { .. }) if best.is_some() => break,
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match (best, first_err) {
        (Some(b), _) => Ok(b),
        (None, Some(e)) => Err(e),
        (None, None) => Err(Error::invalid("no mixture could be fitted")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::{Distribution, Normal};

    fn two_cluster(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from(seed);
        let left = Normal::new(-5.0, 1.0).unwrap();
        let right = Normal::new(5.0, 1.0).unwrap();
        (0..n)
            .map(|_| {
                if rng.random::<bool>() {
                    left.sample(&mut rng)
                } else {
                    right.sample(&mut rng)
                }
            })
            .collect()
    }

    #[test]
    fn single_component_is_closed_form() {
        let xs = [1.0, 2.0, 4.0, 7.0, -3.0];
        let (m, r) = fit_gmm(&xs, 1, 0).unwrap();
        let (mean, var) = sample_moments(&xs);
        let DensityModel::Gmm(g) = m else { panic!("not a gmm") };
        assert_abs_diff_eq!(g.components()[0].mean, mean, epsilon = 1e-12);
        assert_abs_diff_eq!(g.components()[0].variance, var, epsilon = 1e-12);
        assert!(r.converged);
    }

    #[test]
    fn recovers_separated_mixture() {
        let xs = two_cluster(500, 42);
        let (m, r) = fit_gmm(&xs, 2, 1).unwrap();
        let DensityModel::Gmm(g) = m else { panic!("not a gmm") };
        let mut comps = g.components().to_vec();
        comps.sort_by(|a, b| a.mean.total_cmp(&b.mean));
        assert!((comps[0].mean + 5.0).abs() < 0.5, "{comps:?}");
        assert!((comps[1].mean - 5.0).abs() < 0.5, "{comps:?}");
        for c in &comps {
            assert!((c.weight - 0.5).abs() < 0.1);
        }
        assert_eq!(r.component_count, 2);
        assert_abs_diff_eq!(r.aic, aic(r.log_likelihood, 2));
    }

    #[test]
    fn aic_arithmetic() {
        assert_abs_diff_eq!(aic(-100.0, 2), 210.0);
        assert_abs_diff_eq!(aic(-100.0, 1), 204.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(fit_gmm(&[1.0, 2.0, 3.0], 0, 0).is_err());
        assert!(matches!(fit_gmm(&[1.0, 2.0, 3.0, 4.0, 5.0], 2, 0), Err(Error::TooFewSamples { .. })));
        assert!(matches!(fit_gmm(&[1.0; 6], 1, 0), Err(Error::ZeroVariance)));
    }

    #[test]
    fn k_max_one_matches_single_fit() {
        let xs = two_cluster(60, 5);
        let (a, ra) = select_gmm(&xs, 1, 9).unwrap();
        let (b, rb) = fit_gmm(&xs, 1, 0).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(ra.log_likelihood, rb.log_likelihood);
    }

    #[test]
    fn deterministic_given_seed() {
        let xs = two_cluster(200, 8);
        assert_eq!(fit_gmm(&xs, 3, 4).unwrap(), fit_gmm(&xs, 3, 4).unwrap());
    }

    #[test]
    fn weights_sum_to_one() {
        let xs = two_cluster(300, 2);
        let (m, _) = fit_gmm(&xs, 4, 2).unwrap();
        let DensityModel::Gmm(g) = m else { panic!("not a gmm") };
        let total: f64 = g.components().iter().map(|c| c.weight).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        assert!(g.components().iter().all(|c| c.variance > 0.0));
    }
}
