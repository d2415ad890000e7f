//! Repeated simulation experiments over a grid of training-set sizes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{auc, fit_bag_densities, fit_model, score_bag, ClassTerms, Estimator, Method, PipelineConfig};
use crate::data::Label;
use crate::divergence::DivergenceSpec;
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::simulate::{sample_experiment, Scenario, SimConfig};

/// Positive × negative training-bag counts, row-major by positive count.
pub const TABLE1_GRID: [(usize, usize); 9] = [
    (1, 5),
    (1, 10),
    (1, 25),
    (5, 5),
    (5, 10),
    (5, 25),
    (10, 5),
    (10, 10),
    (10, 25),
];

/// Published mean AUC × 100 as (rBH, rKL, cKL), embedded as reference data.
/// Indexed by scenario, then by [`TABLE1_GRID`] position.
const PUBLISHED_AUC: [[[f64; 3]; 9]; 6] = [
    [
        [61.0, 69.0, 85.0],
        [62.0, 72.0, 89.0],
        [61.0, 73.0, 92.0],
        [63.0, 75.0, 86.0],
        [64.0, 82.0, 94.0],
        [68.0, 84.0, 97.0],
        [69.0, 86.0, 87.0],
        [73.0, 91.0, 95.0],
        [75.0, 91.0, 98.0],
    ],
    [
        [57.0, 61.0, 75.0],
        [59.0, 61.0, 78.0],
        [58.0, 55.0, 75.0],
        [59.0, 67.0, 79.0],
        [60.0, 68.0, 84.0],
        [62.0, 63.0, 85.0],
        [64.0, 77.0, 80.0],
        [66.0, 78.0, 86.0],
        [68.0, 72.0, 86.0],
    ],
    [
        [51.0, 55.0, 71.0],
        [52.0, 58.0, 73.0],
        [50.0, 57.0, 74.0],
        [53.0, 61.0, 76.0],
        [53.0, 66.0, 81.0],
        [52.0, 65.0, 83.0],
        [58.0, 73.0, 78.0],
        [58.0, 76.0, 84.0],
        [57.0, 76.0, 87.0],
    ],
    [
        [55.0, 61.0, 70.0],
        [56.0, 62.0, 73.0],
        [56.0, 58.0, 69.0],
        [56.0, 63.0, 75.0],
        [57.0, 64.0, 81.0],
        [59.0, 59.0, 80.0],
        [60.0, 74.0, 77.0],
        [62.0, 76.0, 85.0],
        [63.0, 69.0, 84.0],
    ],
    [
        [64.0, 61.0, 62.0],
        [67.0, 63.0, 66.0],
        [64.0, 62.0, 67.0],
        [73.0, 69.0, 63.0],
        [74.0, 70.0, 67.0],
        [75.0, 71.0, 72.0],
        [74.0, 70.0, 62.0],
        [75.0, 73.0, 69.0],
        [76.0, 74.0, 72.0],
    ],
    [
        [68.0, 68.0, 67.0],
        [66.0, 68.0, 68.0],
        [68.0, 71.0, 68.0],
        [65.0, 64.0, 67.0],
        [68.0, 68.0, 69.0],
        [70.0, 71.0, 74.0],
        [66.0, 64.0, 66.0],
        [70.0, 69.0, 72.0],
        [72.0, 73.0, 74.0],
    ],
];

/// Published mean AUC × 100 for a scenario, cell and bag-to-class
/// method, when published.
pub fn published_auc(scenario: Scenario, pos: usize, neg: usize, method: Method) -> Option<f64> {
    let s = Scenario::NAMED.iter().position(|&x| x == scenario)?;
    let c = TABLE1_GRID.iter().position(|&x| x == (pos, neg))?;
    let m = match method {
        Method::RdBh => 0,
        Method::RdKl => 1,
        Method::Ckl => 2,
        _ => return None,
    };
    Some(PUBLISHED_AUC[s][c][m])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub estimator: Estimator,
    pub spec: DivergenceSpec,
    pub n_test: usize,
    /// Settings for methods outside the bag-to-class trio.
    pub pipeline: PipelineConfig,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            estimator: Estimator::KdeEpanechnikov,
            spec: DivergenceSpec::default(),
            n_test: 100,
            pipeline: PipelineConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub pos: usize,
    pub neg: usize,
    /// Mean AUC × 100 per method, in the study's method order.
    pub mean_auc: Vec<f64>,
    /// Standard deviation of AUC × 100 across repetitions.
    pub sd_auc: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimStudy {
    pub scenario: Scenario,
    pub repetitions: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub cells: Vec<CellResult>,
}

impl SimStudy {
    pub fn cell(&self, pos: usize, neg: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.pos == pos && c.neg == neg)
    }

    /// Mean AUC × 100 of `method` in a cell.
    pub fn mean(&self, pos: usize, neg: usize, method: Method) -> Option<f64> {
        let m = self.methods.iter().position(|&x| x == method)?;
        self.cell(pos, neg).map(|c| c.mean_auc[m])
    }
}

/// AUCs of every method for one fresh train/test sample.
fn one_repetition(
    config: &SimConfig,
    pos: usize,
    neg: usize,
    methods: &[Method],
    options: &StudyOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    let (train, test) = sample_experiment(config, pos, neg, options.n_test, derive_seed(seed, "data", 0))?;
    let labels: Vec<Label> = test.bags().iter().map(|b| b.label().expect("simulated bags are labeled")).collect();
    let mut out = vec![f64::NAN; methods.len()];

    if methods.iter().any(|m| m.is_bag_to_class()) {
        // One fit and one set of evaluation points serve all three methods.
        let base = PipelineConfig {
            method: Method::Ckl,
            estimator: options.estimator,
            spec: options.spec,
            threshold: super::ThresholdPolicy::Fixed(0.0),
            ..options.pipeline.clone()
        };
        let model = fit_model(&train, &base, derive_seed(seed, "fit", 0))?;
        let terms = test
            .bags()
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let s = derive_seed(seed, "score", i as u64);
                let dens = fit_bag_densities(b, options.estimator, derive_seed(s, "bag-density", 0))?;
                model.class_terms(&dens, derive_seed(s, "bag-divergence", 0))
            })
            .collect::<Result<Vec<_>>>()?;
        for (slot, &m) in out.iter_mut().zip(methods) {
            if m.is_bag_to_class() {
                let scores: Vec<f64> = terms.iter().map(|t| ClassTerms::score(t, m, base.ckl_orientation)).collect();
                *slot = auc(&scores, &labels)?;
            }
        }
    }
    for (slot, &m) in out.iter_mut().zip(methods) {
        if m.is_bag_to_class() {
            continue;
        }
        let cfg = PipelineConfig {
            method: m,
            estimator: options.estimator,
            spec: options.spec,
            ..options.pipeline.clone()
        };
        let model = fit_model(&train, &cfg, derive_seed(seed, "fit", 1))?;
        let scores = test
            .bags()
            .iter()
            .enumerate()
            .map(|(i, b)| score_bag(&model, b, derive_seed(seed, "score", i as u64)))
            .collect::<Result<Vec<_>>>()?;
        *slot = auc(&scores, &labels)?;
    }
    Ok(out)
}

/// Mean AUC × 100 per grid cell and method over `repetitions` independent
/// train/test samples. Work runs on the current rayon pool; results are
/// reduced in cell and repetition order, so they do not depend on the
/// thread count.
pub fn run_sim_study(
    config: &SimConfig,
    grid: &[(usize, usize)],
    repetitions: usize,
    methods: &[Method],
    options: &StudyOptions,
    seed: u64,
) -> Result<SimStudy> {
    config.validate()?;
    options.spec.validate()?;
    if grid.is_empty() || methods.is_empty() || repetitions == 0 {
        return Err(Error::invalid("study needs a grid cell, a method and a repetition"));
    }
    if grid.iter().any(|&(p, n)| p == 0 || n == 0) {
        return Err(Error::invalid("grid counts must be at least 1"));
    }
    let jobs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|c| (0..repetitions).map(move |r| (c, r)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(c, r)| {
            let (pos, neg) = grid[c];
            let s = derive_seed(derive_seed(seed, &format!("cell-{pos}-{neg}"), 0), "rep", r as u64);
            one_repetition(config, pos, neg, methods, options, s)
        })
        .collect::<Result<Vec<_>>>()?;

    let cells = grid
        .iter()
        .enumerate()
        .map(|(c, &(pos, neg))| {
            let reps = &results[c * repetitions..(c + 1) * repetitions];
            let n = repetitions as f64;
            let mut mean_auc = Vec::with_capacity(methods.len());
            let mut sd_auc = Vec::with_capacity(methods.len());
            for m in 0..methods.len() {
                let mean = reps.iter().map(|a| 100.0 * a[m]).sum::<f64>() / n;
                let var = if repetitions > 1 {
                    reps.iter().map(|a| (100.0 * a[m] - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                mean_auc.push(mean);
                sd_auc.push(var.sqrt());
            }
            CellResult {
                pos,
                neg,
                mean_auc,
                sd_auc,
            }
        })
        .collect();
    Ok(SimStudy {
        scenario: config.scenario,
        repetitions,
        seed,
        methods: methods.to_vec(),
        cells,
    })
}
