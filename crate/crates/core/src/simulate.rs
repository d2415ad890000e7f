//! Hierarchical bag generator.
//!
//! Each bag first draws its own parameters from class-level hyperpriors
//! (mixing proportion, positive and negative component parameters), then
//! draws its instances from the resulting two-component mixture, recording
//! the latent instance labels. The six named scenarios are presets.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, Label};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Sim1,
    Sim2,
    Sim3,
    Sim4,
    Sim5,
    Sim6,
    Custom,
}

impl Scenario {
    pub const NAMED: [Scenario; 6] = [
        Scenario::Sim1,
        Scenario::Sim2,
        Scenario::Sim3,
        Scenario::Sim4,
        Scenario::Sim5,
        Scenario::Sim6,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Scenario::Sim1 => "sim1",
            Scenario::Sim2 => "sim2",
            Scenario::Sim3 => "sim3",
            Scenario::Sim4 => "sim4",
            Scenario::Sim5 => "sim5",
            Scenario::Sim6 => "sim6",
            Scenario::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sim1" => Ok(Scenario::Sim1),
            "sim2" => Ok(Scenario::Sim2),
            "sim3" => Ok(Scenario::Sim3),
            "sim4" => Ok(Scenario::Sim4),
            "sim5" => Ok(Scenario::Sim5),
            "sim6" => Ok(Scenario::Sim6),
            "custom" => Ok(Scenario::Custom),
            other => Err(Error::invalid(format!("unknown scenario {other:?}"))),
        }
    }
}

/// How the "10" in the N(·, 10) mean hyperpriors is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceNotation {
    /// N(μ, σ²): the second argument is a variance.
    Variance,
    /// N(μ, σ): the second argument is a standard deviation.
    StdDev,
}

/// When the positive-mean location ν⁺ is drawn from its choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NuDraw {
    PerBag,
    PerExperiment,
}

/// Hyperpriors of the two-component hierarchical model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchicalParams {
    /// Equiprobable locations ν⁺ for the positive-component mean prior.
    pub nu_pos: Vec<f64>,
    pub nu_draw: NuDraw,
    /// η⁺: mean of ζ⁺, where σ²⁺ = |ζ⁺|.
    pub eta_pos: f64,
    /// Mean of ζ⁻, where σ²⁻ = |ζ⁻|.
    pub eta_neg: f64,
    /// Location of the negative-component mean prior.
    pub nu_neg: f64,
    /// Spread of both mean priors (see `variance_notation`).
    pub mean_spread: f64,
    /// Variance of ζ⁺ and ζ⁻.
    pub zeta_variance: f64,
    /// Probability of a positive instance in a positive bag (Π⁺).
    pub pi_pos: f64,
    /// Probability of a positive instance in a negative bag (π⁻).
    pub pi_neg: f64,
    pub variance_notation: VarianceNotation,
    /// Lower bound applied to |ζ| draws.
    pub variance_floor: f64,
}

impl Default for HierarchicalParams {
    fn default() -> Self {
        HierarchicalParams {
            nu_pos: vec![15.0],
            nu_draw: NuDraw::PerBag,
            eta_pos: 1.0,
            eta_neg: 1.0,
            nu_neg: 0.0,
            mean_spread: 10.0,
            zeta_variance: 1.0,
            pi_pos: 0.10,
            pi_neg: 0.0,
            variance_notation: VarianceNotation::Variance,
            variance_floor: 1e-8,
        }
    }
}

/// Whole-bag densities without latent instance labels: positive bags are
/// lognormal, negative bags a two-component Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectParams {
    pub lognormal_mu: f64,
    pub lognormal_sigma2: f64,
    pub mixture_mu1: f64,
    pub mixture_mu2: f64,
    pub mixture_sigma2: f64,
    pub mixture_pi1: f64,
    /// Per-bag hyperprior variance of the lognormal μ; `None` keeps it fixed.
    pub lognormal_mu_hyper_variance: Option<f64>,
    /// Per-bag hyperprior variance of both mixture means; `None` keeps them fixed.
    pub mixture_mean_hyper_variance: Option<f64>,
}

impl Default for ObjectParams {
    fn default() -> Self {
        ObjectParams {
            lognormal_mu: 10f64.ln(),
            lognormal_sigma2: 0.04,
            mixture_mu1: 9.5,
            mixture_mu2: 13.5,
            mixture_sigma2: 2.5,
            mixture_pi1: 0.9,
            lognormal_mu_hyper_variance: None,
            mixture_mean_hyper_variance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum SimModel {
    Hierarchical(HierarchicalParams),
    Object(ObjectParams),
}

/// Full parameterization of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n_instances: usize,
    pub model: SimModel,
}

impl SimConfig {
    /// Preset for a named scenario; `Custom` yields the Sim 1 parameters as a
    /// starting point.
    pub fn preset(scenario: Scenario) -> Self {
        let hier = |nu_pos: Vec<f64>, eta_pos: f64, pi_neg: f64| {
            SimModel::Hierarchical(HierarchicalParams {
                nu_pos,
                eta_pos,
                pi_neg,
                ..HierarchicalParams::default()
            })
        };
        let model = match scenario {
            Scenario::Sim1 | Scenario::Custom => hier(vec![15.0], 1.0, 0.0),
            Scenario::Sim2 => hier(vec![15.0], 1.0, 0.01),
            Scenario::Sim3 => hier(vec![0.0], 100.0, 0.0),
            Scenario::Sim4 => hier(vec![-15.0, 15.0], 1.0, 0.01),
            Scenario::Sim5 => SimModel::Object(ObjectParams::default()),
            Scenario::Sim6 => SimModel::Object(ObjectParams {
                lognormal_mu_hyper_variance: Some(0.04),
                mixture_mean_hyper_variance: Some(1.0),
                ..ObjectParams::default()
            }),
        };
        SimConfig {
            scenario,
            n_instances: 50,
            model,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_instances < 1 {
            return Err(Error::invalid("n_instances must be at least 1"));
        }
        let prob = |p: f64, name: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be a probability, got {p}")))
            }
        };
        match &self.model {
            SimModel::Hierarchical(h) => {
                prob(h.pi_pos, "pi_pos")?;
                prob(h.pi_neg, "pi_neg")?;
                if h.nu_pos.is_empty() {
                    return Err(Error::invalid("nu_pos needs at least one location"));
                }
                if !(h.mean_spread >= 0.0 && h.zeta_variance >= 0.0 && h.variance_floor > 0.0) {
                    return Err(Error::invalid("spreads must be non-negative and the floor positive"));
                }
            }
            SimModel::Object(o) => {
                prob(o.mixture_pi1, "mixture_pi1")?;
                if !(o.lognormal_sigma2 > 0.0 && o.mixture_sigma2 > 0.0) {
                    return Err(Error::invalid("variances must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Per-bag latent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Latent {
    Hierarchical {
        /// Location the positive-mean prior was centred on.
        nu_pos: f64,
        /// Probability of a positive instance in this bag.
        pi: f64,
        /// (mean, variance) of the positive component.
        theta_pos: (f64, f64),
        /// (mean, variance) of the negative component.
        theta_neg: (f64, f64),
        /// Latent instance labels.
        tau: Vec<bool>,
    },
    Lognormal {
        mu: f64,
        sigma2: f64,
    },
    Mixture {
        mu1: f64,
        mu2: f64,
        sigma2: f64,
        pi1: f64,
        /// True when the instance came from the first component.
        first: Vec<bool>,
    },
}

/// A simulated bag plus everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedBag {
    pub bag: Bag,
    pub true_label: Label,
    pub seed: u64,
    pub latent: Latent,
}

fn normal(rng: &mut Rng, mean: f64, variance: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + variance.sqrt() * z
}

fn instance_rng(seed: u64, i: usize) -> Rng {
    rng_from(derive_seed(seed, "instance", i as u64))
}

/// Step 2 for a single instance: returns (component indicator, value).
fn draw_instance(latent: &Latent, seed: u64, i: usize) -> (bool, f64) {
    let mut rng = instance_rng(seed, i);
    match latent {
        Latent::Hierarchical { pi, theta_pos, theta_neg, .. } => {
            let tau = rng.random::<f64>() < *pi;
            let (m, v) = if tau { *theta_pos } else { *theta_neg };
            (tau, normal(&mut rng, m, v))
        }
        Latent::Lognormal { mu, sigma2 } => (true, normal(&mut rng, *mu, *sigma2).exp()),
        Latent::Mixture { mu1, mu2, sigma2, pi1, .. } => {
            let first = rng.random::<f64>() < *pi1;
            let m = if first { *mu1 } else { *mu2 };
            (first, normal(&mut rng, m, *sigma2))
        }
    }
}

impl GeneratedBag {
    /// Regenerates instance `i` from the recorded seed and bag parameters.
    pub fn replay_instance(&self, i: usize) -> (bool, f64) {
        draw_instance(&self.latent, self.seed, i)
    }
}

fn step_one(config: &SimConfig, label: Label, rng: &mut Rng, nu_override: Option<f64>) -> Latent {
    match &config.model {
        SimModel::Hierarchical(h) => {
            let nu = nu_override.unwrap_or_else(|| {
                if h.nu_pos.len() == 1 {
                    h.nu_pos[0]
                } else {
                    h.nu_pos[rng.random_range(0..h.nu_pos.len())]
                }
            });
            let mean_var = match h.variance_notation {
                VarianceNotation::Variance => h.mean_spread,
                VarianceNotation::StdDev => h.mean_spread * h.mean_spread,
            };
            let mu_pos = normal(rng, nu, mean_var);
            let var_pos = normal(rng, h.eta_pos, h.zeta_variance).abs().max(h.variance_floor);
            let mu_neg = normal(rng, h.nu_neg, mean_var);
            let var_neg = normal(rng, h.eta_neg, h.zeta_variance).abs().max(h.variance_floor);
            let pi = match label {
                Label::Pos => h.pi_pos,
                Label::Neg => h.pi_neg,
            };
            Latent::Hierarchical {
                nu_pos: nu,
                pi,
                theta_pos: (mu_pos, var_pos),
                theta_neg: (mu_neg, var_neg),
                tau: Vec::new(),
            }
        }
        SimModel::Object(o) => match label {
            Label::Pos => {
                let mu = match o.lognormal_mu_hyper_variance {
                    Some(v) => normal(rng, o.lognormal_mu, v),
                    None => o.lognormal_mu,
                };
                Latent::Lognormal { mu, sigma2: o.lognormal_sigma2 }
            }
            Label::Neg => {
                let (mu1, mu2) = match o.mixture_mean_hyper_variance {
                    Some(v) => (normal(rng, o.mixture_mu1, v), normal(rng, o.mixture_mu2, v)),
                    None => (o.mixture_mu1, o.mixture_mu2),
                };
                Latent::Mixture {
                    mu1,
                    mu2,
                    sigma2: o.mixture_sigma2,
                    pi1: o.mixture_pi1,
                    first: Vec::new(),
                }
            }
        },
    }
}

fn generate(config: &SimConfig, label: Label, seed: u64, id: String, nu_override: Option<f64>) -> Result<GeneratedBag> {
    let mut rng = rng_from(derive_seed(seed, "bag-parameters", 0));
    let mut latent = step_one(config, label, &mut rng, nu_override);
    let mut values = Vec::with_capacity(config.n_instances);
    let mut flags = Vec::with_capacity(config.n_instances);
    for i in 0..config.n_instances {
        let (flag, x) = draw_instance(&latent, seed, i);
        flags.push(flag);
        values.push(x);
    }
    match &mut latent {
        Latent::Hierarchical { tau, .. } => *tau = flags,
        Latent::Mixture { first, .. } => *first = flags,
        Latent::Lognormal { .. } => {}
    }
    Ok(GeneratedBag {
        bag: Bag::from_scalars(id, &values, Some(label))?,
        true_label: label,
        seed,
        latent,
    })
}

/// Draws one bag of the given class.
pub fn sample_bag(config: &SimConfig, label: Label, seed: u64) -> Result<GeneratedBag> {
    config.validate()?;
    generate(config, label, seed, format!("bag-{seed:016x}"), None)
}

/// Training and test bags of one simulated experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub train: Vec<GeneratedBag>,
    pub test: Vec<GeneratedBag>,
}

impl Experiment {
    pub fn train_dataset(&self) -> Result<Dataset> {
        Dataset::new("train", self.train.iter().map(|g| g.bag.clone()).collect())
    }

    pub fn test_dataset(&self) -> Result<Dataset> {
        Dataset::new("test", self.test.iter().map(|g| g.bag.clone()).collect())
    }
}

/// Generates `n_train_pos` + `n_train_neg` training bags and `n_test` test
/// bags (half positive, the odd one negative), all independent.
pub fn sample_experiment_detailed(
    config: &SimConfig,
    n_train_pos: usize,
    n_train_neg: usize,
    n_test: usize,
    seed: u64,
) -> Result<Experiment> {
    config.validate()?;
    if n_train_pos < 1 || n_train_neg < 1 || n_test < 1 {
        return Err(Error::invalid("bag counts must be at least 1"));
    }
    let nu_override = match &config.model {
        SimModel::Hierarchical(h) if h.nu_draw == NuDraw::PerExperiment => {
            let mut rng = rng_from(derive_seed(seed, "nu-per-experiment", 0));
            Some(h.nu_pos[rng.random_range(0..h.nu_pos.len())])
        }
        _ => None,
    };
    let train_labels = std::iter::repeat_n(Label::Pos, n_train_pos).chain(std::iter::repeat_n(Label::Neg, n_train_neg));
    let test_pos = n_test / 2;
    let test_labels = std::iter::repeat_n(Label::Pos, test_pos).chain(std::iter::repeat_n(Label::Neg, n_test - test_pos));

    let train = train_labels
        .enumerate()
        .map(|(i, label)| {
            let s = derive_seed(seed, "train", i as u64);
            generate(config, label, s, format!("train-{i:04}"), nu_override)
        })
        .collect::<Result<Vec<_>>>()?;
    let test = test_labels
        .enumerate()
        .map(|(i, label)| {
            let s = derive_seed(seed, "test", i as u64);
            generate(config, label, s, format!("test-{i:04}"), nu_override)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Experiment { train, test })
}

/// Dataset-only form of [`sample_experiment_detailed`].
pub fn sample_experiment(
    config: &SimConfig,
    n_train_pos: usize,
    n_train_neg: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let e = sample_experiment_detailed(config, n_train_pos, n_train_neg, n_test, seed)?;
    Ok((e.train_dataset()?, e.test_dataset()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tau(g: &GeneratedBag) -> &[bool] {
        match &g.latent {
            Latent::Hierarchical { tau, .. } => tau,
            _ => panic!("not hierarchical"),
        }
    }

    #[test]
    fn presets_match_named_parameters() {
        let get = |s| match SimConfig::preset(s).model {
            SimModel::Hierarchical(h) => (h.nu_pos, h.eta_pos, h.pi_neg, h.pi_pos),
            _ => panic!(),
        };
        assert_eq!(get(Scenario::Sim1), (vec![15.0], 1.0, 0.0, 0.1));
        assert_eq!(get(Scenario::Sim2), (vec![15.0], 1.0, 0.01, 0.1));
        assert_eq!(get(Scenario::Sim3), (vec![0.0], 100.0, 0.0, 0.1));
        assert_eq!(get(Scenario::Sim4), (vec![-15.0, 15.0], 1.0, 0.01, 0.1));
        assert_eq!(SimConfig::preset(Scenario::Sim1).n_instances, 50);
    }

    #[test]
    fn sim1_negative_bags_have_no_positive_instances() {
        let cfg = SimConfig::preset(Scenario::Sim1);
        for s in 0..50 {
            let g = sample_bag(&cfg, Label::Neg, s).unwrap();
            assert!(tau(&g).iter().all(|t| !t));
            assert_eq!(g.bag.len(), 50);
        }
    }

    #[test]
    fn replay_reproduces_instances() {
        let cfg = SimConfig::preset(Scenario::Sim2);
        let g = sample_bag(&cfg, Label::Pos, 77).unwrap();
        let Latent::Hierarchical { theta_pos, theta_neg, .. } = g.latent.clone() else { panic!() };
        let values = g.bag.column(0);
        for i in 0..g.bag.len() {
            let (t, x) = g.replay_instance(i);
            assert_eq!(t, tau(&g)[i]);
            assert_eq!(x, values[i]);
            // The standardized residual is the same normal draw under the recorded component.
            let (m, v) = if t { theta_pos } else { theta_neg };
            let mut rng = instance_rng(g.seed, i);
            let _: f64 = rng.random();
            let z: f64 = StandardNormal.sample(&mut rng);
            assert!((x - (m + v.sqrt() * z)).abs() < 1e-12);
        }
    }

    #[test]
    fn experiment_counts_and_balance() {
        let cfg = SimConfig::preset(Scenario::Sim1);
        let (train, test) = sample_experiment(&cfg, 1, 5, 100, 3).unwrap();
        assert_eq!(train.len(), 6);
        assert_eq!(train.count_label(Label::Pos), 1);
        assert_eq!(test.len(), 100);
        assert_eq!(test.count_label(Label::Pos), 50);
        let (_, odd) = sample_experiment(&cfg, 1, 1, 7, 3).unwrap();
        assert_eq!(odd.count_label(Label::Pos), 3);
        assert_eq!(odd.count_label(Label::Neg), 4);
    }

    #[test]
    fn experiments_are_deterministic() {
        let cfg = SimConfig::preset(Scenario::Sim4);
        let a = sample_experiment_detailed(&cfg, 2, 3, 10, 11).unwrap();
        let b = sample_experiment_detailed(&cfg, 2, 3, 10, 11).unwrap();
        assert_eq!(a, b);
        let c = sample_experiment_detailed(&cfg, 2, 3, 10, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn object_scenarios_have_no_tau() {
        let cfg = SimConfig::preset(Scenario::Sim5);
        let p = sample_bag(&cfg, Label::Pos, 1).unwrap();
        assert!(matches!(p.latent, Latent::Lognormal { .. }));
        assert!(p.bag.column(0).iter().all(|&x| x > 0.0));
        let n = sample_bag(&cfg, Label::Neg, 1).unwrap();
        assert!(matches!(n.latent, Latent::Mixture { .. }));
    }

    #[test]
    fn scenario_names_parse() {
        assert_eq!("SIM3".parse::<Scenario>().unwrap(), Scenario::Sim3);
        assert!("sim9".parse::<Scenario>().is_err());
        for s in Scenario::NAMED {
            assert_eq!(s.to_string().parse::<Scenario>().unwrap(), s);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut cfg = SimConfig::preset(Scenario::Sim1);
        cfg.n_instances = 0;
        assert!(sample_bag(&cfg, Label::Pos, 0).is_err());
        let mut cfg = SimConfig::preset(Scenario::Sim1);
        if let SimModel::Hierarchical(h) = &mut cfg.model {
            h.pi_neg = 1.5;
        }
        assert!(cfg.validate().is_err());
    }
}
