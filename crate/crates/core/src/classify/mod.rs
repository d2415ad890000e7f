//! Bag-level classification.
//!
//! Class densities are fitted per dimension to the pooled instances of each
//! class. A new bag gets its own density estimate and a score from one of the
//! methods in [`Method`]; lower scores are always more positive-like.

mod cv;
mod metrics;
mod study;
mod svm;

pub use cv::{cross_validate, cross_validate_observed, FitRecord};
pub use metrics::{
    accuracy, auc, choose_threshold, predict, roc, threshold_candidates, trapezoid_area, ThresholdPolicy,
};
pub use study::{published_auc, run_sim_study, CellResult, SimStudy, StudyOptions, TABLE1_GRID};
pub use svm::{train_linear_svm, LinearSvm, SvmTraining};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{Bag, Dataset, Label};
use crate::density::{fit_kde, select_gmm, DensityModel, Kernel};
use crate::divergence::{ratio, BagQuadrature, DivergenceSpec};
use crate::error::{Error, Result};
use crate::pca::{apply_pca, fit_pca};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "RD_KL")]
    RdKl,
    #[serde(rename = "RD_BH")]
    RdBh,
    #[serde(rename = "CKL")]
    Ckl,
    #[serde(rename = "BAG2BAG_KL")]
    Bag2BagKl,
    #[serde(rename = "BAG2BAG_BH")]
    Bag2BagBh,
    #[serde(rename = "SVM_ON_DIVS")]
    SvmOnDivs,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::RdKl,
        Method::RdBh,
        Method::Ckl,
        Method::Bag2BagKl,
        Method::Bag2BagBh,
        Method::SvmOnDivs,
    ];

    /// Methods that compare a bag with the two class densities.
    pub fn is_bag_to_class(self) -> bool {
        matches!(self, Method::RdKl | Method::RdBh | Method::Ckl)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::RdKl => "RD_KL",
            Method::RdBh => "RD_BH",
            Method::Ckl => "CKL",
            Method::Bag2BagKl => "BAG2BAG_KL",
            Method::Bag2BagBh => "BAG2BAG_BH",
            Method::SvmOnDivs => "SVM_ON_DIVS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('_', "-")
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "rd-kl" => Ok(Method::RdKl),
            "rd-bh" => Ok(Method::RdBh),
            "ckl" => Ok(Method::Ckl),
            "b2b-kl" | "bag2bag-kl" => Ok(Method::Bag2BagKl),
            "b2b-bh" | "bag2bag-bh" => Ok(Method::Bag2BagBh),
            "svm-divs" | "svm-on-divs" => Ok(Method::SvmOnDivs),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "KDE_EPANECHNIKOV")]
    KdeEpanechnikov,
    #[serde(rename = "KDE_GAUSSIAN")]
    KdeGaussian,
    #[serde(rename = "GMM_AIC")]
    GmmAic,
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "kde-epan" | "kde-epanechnikov" => Ok(Estimator::KdeEpanechnikov),
            "kde-gauss" | "kde-gaussian" => Ok(Estimator::KdeGaussian),
            "gmm-aic" | "gmm" => Ok(Estimator::GmmAic),
            other => Err(Error::invalid(format!("unknown estimator {other:?}"))),
        }
    }
}

/// Which class the cKL classifier measures the bag against.
///
/// `PositiveReference` scores a bag by `cKL(f_bag, f_pos | f_neg)`, small
/// meaning positive. `NegativeReference` scores it by
/// `-cKL(f_bag, f_neg | f_pos)`: a bag far from the negative class, in the
/// regions the positive class supports, is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CklOrientation {
    PositiveReference,
    NegativeReference,
}

impl FromStr for CklOrientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "pos" | "positive" | "positive-reference" => Ok(CklOrientation::PositiveReference),
            "neg" | "negative" | "negative-reference" => Ok(CklOrientation::NegativeReference),
            other => Err(Error::invalid(format!("unknown cKL orientation {other:?}"))),
        }
    }
}

/// Largest component count tried by the AIC search.
pub const DEFAULT_GMM_MAX_COMPONENTS: usize = 5;

/// Fits one 1-D density to `samples`.
pub fn fit_density(samples: &[f64], estimator: Estimator, seed: u64) -> Result<DensityModel> {
    match estimator {
        Estimator::KdeEpanechnikov => fit_kde(samples, Kernel::Epanechnikov, None),
        Estimator::KdeGaussian => fit_kde(samples, Kernel::Gaussian, None),
        Estimator::GmmAic => {
            let k_max = DEFAULT_GMM_MAX_COMPONENTS.min(samples.len() / 3).max(1);
            select_gmm(samples, k_max, seed).map(|(m, _)| m)
        }
    }
}

fn fit_bag_densities(bag: &Bag, estimator: Estimator, seed: u64) -> Result<Vec<DensityModel>> {
    (0..bag.dim())
        .map(|j| fit_density(&bag.column(j), estimator, derive_seed(seed, "bag-dim", j as u64)))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.for_bag(bag.id()))
}

/// Per-dimension densities of the pooled positive and negative instances.
pub fn fit_class_densities(
    train: &Dataset,
    estimator: Estimator,
    seed: u64,
) -> Result<(Vec<DensityModel>, Vec<DensityModel>)> {
    for label in [Label::Pos, Label::Neg] {
        if train.count_label(label) == 0 {
            return Err(Error::MissingClass(label));
        }
    }
    let fit = |label: Label| -> Result<Vec<DensityModel>> {
        (0..train.dimension())
            .map(|j| {
                let s = derive_seed(seed, &format!("class-{label}"), j as u64);
                fit_density(&train.pooled_column(label, j), estimator, s)
            })
            .collect()
    };
    Ok((fit(Label::Pos)?, fit(Label::Neg)?))
}

/// Everything needed to go from training data to bag scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub method: Method,
    pub estimator: Estimator,
    pub spec: DivergenceSpec,
    pub threshold: ThresholdPolicy,
    pub svm: SvmTraining,
    /// Per-dimension divergence used as the SVM feature; one of the
    /// bag-to-class methods.
    pub svm_feature: Method,
    pub ckl_orientation: CklOrientation,
    /// Project onto this many principal components, fitted on training bags.
    pub pca_components: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            method: Method::Ckl,
            estimator: Estimator::KdeEpanechnikov,
            spec: DivergenceSpec::default(),
            threshold: ThresholdPolicy::Loocv,
            svm: SvmTraining::default(),
            svm_feature: Method::Ckl,
            ckl_orientation: CklOrientation::NegativeReference,
            pca_components: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !self.svm_feature.is_bag_to_class() {
            return Err(Error::invalid("svm_feature must be RD_KL, RD_BH or CKL"));
        }
        Ok(())
    }
}

/// A training bag kept for bag-to-bag comparisons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainBag {
    pub id: String,
    pub label: Label,
    pub densities: Vec<DensityModel>,
}

/// Fitted classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub method: Method,
    pub estimator: Estimator,
    pub spec: DivergenceSpec,
    pub dimension: usize,
    pub f_pos: Vec<DensityModel>,
    pub f_neg: Vec<DensityModel>,
    pub threshold: f64,
    pub svm: Option<LinearSvm>,
    pub svm_feature: Method,
    pub ckl_orientation: CklOrientation,
    pub train_bags: Vec<TrainBag>,
}

/// Divergences of one bag against both classes in one dimension, all
/// estimated at the same evaluation points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassTerms {
    pub kl_pos: f64,
    pub kl_neg: f64,
    pub bh_pos: f64,
    pub bh_neg: f64,
    /// `cKL(f_bag, f_pos | f_neg)`.
    pub ckl_pos_ref: f64,
    /// `cKL(f_bag, f_neg | f_pos)`.
    pub ckl_neg_ref: f64,
}

impl ClassTerms {
    /// Score of a bag-to-class method summed over dimensions.
    pub fn score(terms: &[ClassTerms], method: Method, orientation: CklOrientation) -> f64 {
        let sum = |f: fn(&ClassTerms) -> f64| terms.iter().map(f).sum::<f64>();
        match method {
            Method::RdKl => ratio(sum(|t| t.kl_pos), sum(|t| t.kl_neg)),
            Method::RdBh => ratio(sum(|t| t.bh_pos), sum(|t| t.bh_neg)),
            Method::Ckl => match orientation {
                CklOrientation::PositiveReference => sum(|t| t.ckl_pos_ref),
                CklOrientation::NegativeReference => -sum(|t| t.ckl_neg_ref),
            },
            other => panic!("{other} is not a bag-to-class method"),
        }
    }

    /// One feature per dimension.
    pub fn features(terms: &[ClassTerms], method: Method, orientation: CklOrientation) -> Vec<f64> {
        terms
            .iter()
            .map(|t| ClassTerms::score(std::slice::from_ref(t), method, orientation))
            .collect()
    }
}

impl ClassModel {
    /// Class divergences of a bag whose densities are already fitted.
    pub fn class_terms(&self, bag: &[DensityModel], seed: u64) -> Result<Vec<ClassTerms>> {
        (0..self.dimension)
            .map(|j| {
                let (pos, neg) = (&self.f_pos[j], &self.f_neg[j]);
                let q = BagQuadrature::new(&bag[j], &[pos, neg], &self.spec, derive_seed(seed, "dim", j as u64))?;
                let (p, n) = (q.evaluate(pos), q.evaluate(neg));
                Ok(ClassTerms {
                    kl_pos: q.kl(&p).value,
                    kl_neg: q.kl(&n).value,
                    bh_pos: q.bhattacharyya(&p).value,
                    bh_neg: q.bhattacharyya(&n).value,
                    ckl_pos_ref: q.ckl(&p, &n).value,
                    ckl_neg_ref: q.ckl(&n, &p).value,
                })
            })
            .collect()
    }

    /// `min over positive training bags − min over negative training bags`,
    /// skipping the training bag named `skip`.
    fn bag_to_bag(&self, bag: &[DensityModel], seed: u64, skip: Option<&str>) -> Result<f64> {
        let mut best_pos = f64::INFINITY;
        let mut best_neg = f64::INFINITY;
        let quads = (0..self.dimension)
            .map(|j| {
                let others: Vec<&DensityModel> = self.train_bags.iter().map(|t| &t.densities[j]).collect();
                BagQuadrature::new(&bag[j], &others, &self.spec, derive_seed(seed, "dim", j as u64))
            })
            .collect::<Result<Vec<_>>>()?;
        for t in &self.train_bags {
            if skip == Some(t.id.as_str()) {
                continue;
            }
            let d: f64 = quads
                .iter()
                .zip(&t.densities)
                .map(|(q, f)| {
                    let r = q.evaluate(f);
                    match self.method {
                        Method::Bag2BagKl => q.kl(&r).value,
                        _ => q.bhattacharyya(&r).value,
                    }
                })
                .sum();
            let slot = if t.label.is_pos() { &mut best_pos } else { &mut best_neg };
            *slot = slot.min(d);
        }
        if !best_pos.is_finite() || !best_neg.is_finite() {
            return Err(Error::invalid("bag-to-bag scoring needs training bags of both classes"));
        }
        Ok(best_pos - best_neg)
    }

    fn score_fitted(&self, bag: &[DensityModel], seed: u64, skip: Option<&str>) -> Result<f64> {
        match self.method {
            m if m.is_bag_to_class() => Ok(ClassTerms::score(&self.class_terms(bag, seed)?, m, self.ckl_orientation)),
            Method::Bag2BagKl | Method::Bag2BagBh => self.bag_to_bag(bag, seed, skip),
            _ => {
                let svm = self.svm.as_ref().expect("SVM method carries a trained SVM");
                let terms = self.class_terms(bag, seed)?;
                Ok(svm.margin(&ClassTerms::features(&terms, self.svm_feature, self.ckl_orientation)))
            }
        }
    }

    pub fn predict(&self, score: f64) -> Label {
        predict(score, self.threshold)
    }
}

fn check_dim(bag: &Bag, dimension: usize) -> Result<()> {
    if bag.dim() != dimension {
        return Err(Error::DimensionMismatch {
            bag_id: bag.id().to_string(),
            expected: dimension,
            found: bag.dim(),
        });
    }
    Ok(())
}

/// Score of one bag; lower is more positive-like.
pub fn score_bag(model: &ClassModel, bag: &Bag, seed: u64) -> Result<f64> {
    check_dim(bag, model.dimension)?;
    let dens = fit_bag_densities(bag, model.estimator, derive_seed(seed, "bag-density", 0))?;
    model
        .score_fitted(&dens, derive_seed(seed, "bag-divergence", 0), None)
        .map_err(|e| e.for_bag(bag.id()))
}

fn labeled(train: &Dataset) -> Result<Vec<Label>> {
    train
        .bags()
        .iter()
        .map(|b| {
            b.label().ok_or_else(|| Error::InvalidBag {
                bag_id: b.id().to_string(),
                message: "training bags must be labeled".into(),
            })
        })
        .collect()
}

/// Fits the classifier for `config.method` on `train`.
///
/// The threshold methods pick their cut-off from the training bags' own
/// scores (bags stay in the class pools). Bag-to-bag methods and the SVM
/// use 0 unless a fixed threshold is given.
pub fn fit_model(train: &Dataset, config: &PipelineConfig, seed: u64) -> Result<ClassModel> {
    config.validate()?;
    let labels = labeled(train)?;
    let (f_pos, f_neg) = fit_class_densities(train, config.estimator, derive_seed(seed, "class-densities", 0))?;
    let mut model = ClassModel {
        method: config.method,
        estimator: config.estimator,
        spec: config.spec,
        dimension: train.dimension(),
        f_pos,
        f_neg,
        threshold: 0.0,
        svm: None,
        svm_feature: config.svm_feature,
        ckl_orientation: config.ckl_orientation,
        train_bags: Vec::new(),
    };
    let needs_bag_fits = match config.method {
        m if m.is_bag_to_class() => config.threshold == ThresholdPolicy::Loocv,
        _ => true,
    };
    let bag_dens = if needs_bag_fits {
        train
            .bags()
            .iter()
            .enumerate()
            .map(|(i, b)| fit_bag_densities(b, config.estimator, derive_seed(seed, "train-bag-density", i as u64)))
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    match config.method {
        m if m.is_bag_to_class() => {
            if let ThresholdPolicy::Fixed(t) = config.threshold {
                model.threshold = t;
            } else {
                let scores = train_scores(&model, train, &bag_dens, seed)?;
                model.threshold = choose_threshold(&scores, &labels, ThresholdPolicy::Loocv)?;
            }
        }
        Method::Bag2BagKl | Method::Bag2BagBh => {
            model.train_bags = train
                .bags()
                .iter()
                .zip(bag_dens)
                .zip(&labels)
                .map(|((b, d), &l)| TrainBag {
                    id: b.id().to_string(),
                    label: l,
                    densities: d,
                })
                .collect();
            if let ThresholdPolicy::Fixed(t) = config.threshold {
                model.threshold = t;
            }
        }
        _ => {
            let features = train
                .bags()
                .iter()
                .zip(&bag_dens)
                .enumerate()
                .map(|(i, (b, d))| {
                    let s = derive_seed(seed, "train-bag-divergence", i as u64);
                    let terms = model.class_terms(d, s).map_err(|e| e.for_bag(b.id()))?;
                    Ok(ClassTerms::features(&terms, config.svm_feature, config.ckl_orientation))
                })
                .collect::<Result<Vec<_>>>()?;
            model.svm = Some(train_linear_svm(&features, &labels, &config.svm, derive_seed(seed, "svm", 0))?);
            if let ThresholdPolicy::Fixed(t) = config.threshold {
                model.threshold = t;
            }
        }
    }
    Ok(model)
}

fn train_scores(model: &ClassModel, train: &Dataset, dens: &[Vec<DensityModel>], seed: u64) -> Result<Vec<f64>> {
    train
        .bags()
        .iter()
        .zip(dens)
        .enumerate()
        .map(|(i, (b, d))| {
            model
                .score_fitted(d, derive_seed(seed, "train-bag-divergence", i as u64), Some(b.id()))
                .map_err(|e| e.for_bag(b.id()))
        })
        .collect()
}

/// Scores, predictions and summary statistics for a set of bags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub estimator: Estimator,
    pub seed: u64,
    pub bag_ids: Vec<String>,
    pub scores: Vec<f64>,
    pub labels: Vec<Option<Label>>,
    pub predictions: Vec<Label>,
    /// Decision threshold; `None` when several fitted models contribute.
    pub threshold: Option<f64>,
    /// Rank AUC of all scores; `None` unless both classes are labeled.
    pub auc: Option<f64>,
    /// Mean accuracy (over folds for cross-validation).
    pub accuracy: Option<f64>,
    pub accuracy_sd: Option<f64>,
    /// Mean of the per-fold AUCs over folds containing both classes.
    pub fold_auc_mean: Option<f64>,
    pub roc: Vec<(f64, f64)>,
    /// Fold index of every bag, one assignment per repeat.
    pub folds: Vec<Vec<usize>>,
}

impl EvalReport {
    pub(crate) fn assemble(
        config: &PipelineConfig,
        seed: u64,
        bag_ids: Vec<String>,
        scores: Vec<f64>,
        labels: Vec<Option<Label>>,
        predictions: Vec<Label>,
    ) -> Result<Self> {
        let known: Option<Vec<Label>> = labels.iter().copied().collect();
        let (auc_v, roc_v, acc) = match &known {
            Some(l) if l.iter().any(|x| x.is_pos()) && l.iter().any(|x| !x.is_pos()) => {
                (Some(auc(&scores, l)?), roc(&scores, l)?, Some(accuracy(&predictions, l)))
            }
            Some(l) => (None, Vec::new(), Some(accuracy(&predictions, l))),
            None => (None, Vec::new(), None),
        };
        Ok(EvalReport {
            method: config.method,
            estimator: config.estimator,
            seed,
            bag_ids,
            scores,
            labels,
            predictions,
            threshold: None,
            auc: auc_v,
            accuracy: acc,
            accuracy_sd: None,
            fold_auc_mean: None,
            roc: roc_v,
            folds: Vec::new(),
        })
    }
}

/// Optional PCA, then fit on `train` and score every bag of `test`.
pub(crate) fn fit_and_score(
    train: &Dataset,
    test: &Dataset,
    config: &PipelineConfig,
    seed: u64,
) -> Result<(ClassModel, Vec<f64>)> {
    let (train, test) = match config.pca_components {
        Some(m) => {
            let t = fit_pca(train, m)?;
            (apply_pca(&t, train)?, apply_pca(&t, test)?)
        }
        None => (train.clone(), test.clone()),
    };
    let model = fit_model(&train, config, derive_seed(seed, "fit", 0))?;
    let scores = test
        .bags()
        .iter()
        .enumerate()
        .map(|(i, b)| score_bag(&model, b, derive_seed(seed, "score", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok((model, scores))
}

/// Fits on `train`, scores `test` and summarizes.
pub fn evaluate(train: &Dataset, test: &Dataset, config: &PipelineConfig, seed: u64) -> Result<EvalReport> {
    let (model, scores) = fit_and_score(train, test, config, seed)?;
    let predictions = scores.iter().map(|&s| model.predict(s)).collect();
    let ids = test.bags().iter().map(|b| b.id().to_string()).collect();
    let mut report = EvalReport::assemble(config, seed, ids, scores, test.labels(), predictions)?;
    report.threshold = Some(model.threshold);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Instance;
    use crate::simulate::{sample_experiment, Scenario, SimConfig};

    fn sim(pos: usize, neg: usize, test: usize, seed: u64) -> (Dataset, Dataset) {
        sample_experiment(&SimConfig::preset(Scenario::Sim1), pos, neg, test, seed).unwrap()
    }

    #[test]
    fn method_and_estimator_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("b2b-kl".parse::<Method>().unwrap(), Method::Bag2BagKl);
        assert_eq!("kde-epan".parse::<Estimator>().unwrap(), Estimator::KdeEpanechnikov);
        assert!("svm".parse::<Method>().is_err());
    }

    #[test]
    fn class_densities_pool_by_label() {
        let (train, _) = sim(1, 10, 2, 4);
        let (p, n) = fit_class_densities(&train, Estimator::KdeEpanechnikov, 0).unwrap();
        assert_eq!((p.len(), n.len()), (1, 1));
        let DensityModel::Kde(k) = &p[0] else { panic!() };
        assert_eq!(k.centers().len(), 50);
        let DensityModel::Kde(k) = &n[0] else { panic!() };
        assert_eq!(k.centers().len(), 500);
    }

    #[test]
    fn class_densities_per_dimension() {
        let mk = |id: &str, pts: &[[f64; 2]], l| {
            Bag::new(id, pts.iter().map(|p| Instance::new(p.to_vec()).unwrap()).collect(), Some(l)).unwrap()
        };
        let pos = mk("p", &[[0.0, 10.0], [1.0, 11.0], [2.0, 13.0]], Label::Pos);
        let neg = mk("n", &[[5.0, -1.0], [6.0, -2.0], [8.0, -4.0]], Label::Neg);
        let ds = Dataset::new("d", vec![pos, neg]).unwrap();
        let (p, _) = fit_class_densities(&ds, Estimator::KdeGaussian, 0).unwrap();
        assert_eq!(p.len(), 2);
        let DensityModel::Kde(k) = &p[1] else { panic!() };
        assert_eq!(k.centers(), &[10.0, 11.0, 13.0]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let (train, _) = sim(1, 1, 2, 4);
        let only_pos = train.subset("p", &[0]).unwrap();
        assert!(matches!(
            fit_class_densities(&only_pos, Estimator::KdeEpanechnikov, 0),
            Err(Error::MissingClass(Label::Neg))
        ));
    }

    #[test]
    fn bag_from_positive_class_scores_low() {
        let f_pos = DensityModel::normal(15.0, 1.0).unwrap();
        let f_neg = DensityModel::normal(0.0, 1.0).unwrap();
        let model = ClassModel {
            method: Method::RdKl,
            estimator: Estimator::KdeEpanechnikov,
            spec: DivergenceSpec::default(),
            dimension: 1,
            f_pos: vec![f_pos.clone()],
            f_neg: vec![f_neg],
            threshold: 1.0,
            svm: None,
            svm_feature: Method::Ckl,
            ckl_orientation: CklOrientation::NegativeReference,
            train_bags: Vec::new(),
        };
        let bag = Bag::from_scalars("b", &f_pos.sample(2000, 3), None).unwrap();
        let s = score_bag(&model, &bag, 1).unwrap();
        assert!(s < 0.05, "{s}");
    }

    #[test]
    fn copy_of_positive_training_bag_is_positive_for_bag_to_bag() {
        let (train, _) = sim(3, 3, 2, 8);
        let cfg = PipelineConfig {
            method: Method::Bag2BagKl,
            ..PipelineConfig::default()
        };
        let model = fit_model(&train, &cfg, 2).unwrap();
        let first_pos = train.bags().iter().find(|b| b.label() == Some(Label::Pos)).unwrap();
        assert!(score_bag(&model, first_pos, 0).unwrap() < 0.0);
    }

    #[test]
    fn evaluate_runs_every_method() {
        let (train, test) = sim(4, 4, 10, 21);
        for m in Method::ALL {
            let cfg = PipelineConfig {
                method: m,
                ..PipelineConfig::default()
            };
            let r = evaluate(&train, &test, &cfg, 5).unwrap();
            assert_eq!(r.scores.len(), 10);
            let a = r.auc.unwrap();
            assert!((0.0..=1.0).contains(&a));
            assert!((trapezoid_area(&r.roc) - a).abs() < 1e-12);
            assert_eq!(r, evaluate(&train, &test, &cfg, 5).unwrap());
        }
    }

    #[test]
    fn evaluate_errors_name_bag() {
        let (train, _) = sim(2, 2, 2, 1);
        let flat = Bag::from_scalars("flat", &[3.0; 10], Some(Label::Pos)).unwrap();
        let test = Dataset::new("t", vec![flat]).unwrap();
        let err = evaluate(&train, &test, &PipelineConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("flat"), "{err}");
    }
}
