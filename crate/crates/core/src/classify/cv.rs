//! Repeated stratified k-fold cross-validation at the bag level.

use rand::seq::SliceRandom;

use super::{auc, fit_and_score, predict, EvalReport, PipelineConfig};
use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from};

/// What one fold's model was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub repeat: usize,
    pub fold: usize,
    /// Ids of every bag whose instances entered PCA or density fitting.
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
}

fn assign_folds(labels: &[Label], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = rng_from(seed);
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].is_pos()).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i].is_pos()).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![0; labels.len()];
    for (slot, &i) in pos.iter().chain(&neg).enumerate() {
        folds[i] = slot % k;
    }
    folds
}

/// [`cross_validate_observed`] without an observer.
pub fn cross_validate(
    data: &Dataset,
    k_folds: usize,
    config: &PipelineConfig,
    repeats: usize,
    seed: u64,
) -> Result<EvalReport> {
    cross_validate_observed(data, k_folds, config, repeats, seed, |_| {})
}

/// Runs `repeats` rounds of stratified `k_folds`-fold cross-validation.
/// Bags are never split. The AUC is computed over the pooled test scores of
/// all folds and repeats; accuracy is averaged over folds.
pub fn cross_validate_observed(
    data: &Dataset,
    k_folds: usize,
    config: &PipelineConfig,
    repeats: usize,
    seed: u64,
    mut observer: impl FnMut(&FitRecord),
) -> Result<EvalReport> {
    config.validate()?;
    if k_folds < 2 || k_folds > data.len() {
        return Err(Error::invalid(format!(
            "k_folds must lie in 2..={}, got {k_folds}",
            data.len()
        )));
    }
    if repeats < 1 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    let labels: Vec<Label> = data
        .bags()
        .iter()
        .map(|b| {
            b.label().ok_or_else(|| Error::InvalidBag {
                bag_id: b.id().to_string(),
                message: "cross-validation needs labeled bags".into(),
            })
        })
        .collect::<Result<_>>()?;

    let mut ids = Vec::new();
    let mut scores = Vec::new();
    let mut pooled_labels = Vec::new();
    let mut predictions = Vec::new();
    let mut fold_acc = Vec::new();
    let mut fold_auc = Vec::new();
    let mut assignments = Vec::new();
    for r in 0..repeats {
        let folds = assign_folds(&labels, k_folds, derive_seed(seed, "folds", r as u64));
        for f in 0..k_folds {
            let test_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] == f).collect();
            let train_idx: Vec<usize> = (0..data.len()).filter(|&i| folds[i] != f).collect();
            let train = data.subset(format!("{}-r{r}-f{f}-train", data.name()), &train_idx)?;
            let test = data.subset(format!("{}-r{r}-f{f}-test", data.name()), &test_idx)?;
            for label in [Label::Pos, Label::Neg] {
                if train.count_label(label) == 0 {
                    return Err(Error::invalid(format!(
                        "fold {f} of repeat {r} has no {label} training bags"
                    )));
                }
            }
            observer(&FitRecord {
                repeat: r,
                fold: f,
                train_ids: train.bags().iter().map(|b| b.id().to_string()).collect(),
                test_ids: test.bags().iter().map(|b| b.id().to_string()).collect(),
            });
            let fit_seed = derive_seed(seed, "cv-fit", (r * k_folds + f) as u64);
            let (model, s) = fit_and_score(&train, &test, config, fit_seed)?;
            let l: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
            let p: Vec<Label> = s.iter().map(|&x| predict(x, model.threshold)).collect();
            fold_acc.push(super::accuracy(&p, &l));
            if l.iter().any(|x| x.is_pos()) && l.iter().any(|x| !x.is_pos()) {
                fold_auc.push(auc(&s, &l)?);
            }
            ids.extend(test.bags().iter().map(|b| b.id().to_string()));
            scores.extend(s);
            pooled_labels.extend(l.into_iter().map(Some));
            predictions.extend(p);
        }
        assignments.push(folds);
    }
    let mut report = EvalReport::assemble(config, seed, ids, scores, pooled_labels, predictions)?;
    let n = fold_acc.len() as f64;
    let mean = fold_acc.iter().sum::<f64>() / n;
    let sd = if fold_acc.len() > 1 {
        (fold_acc.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    report.accuracy = Some(mean);
    report.accuracy_sd = Some(sd);
    report.fold_auc_mean = (!fold_auc.is_empty()).then(|| fold_auc.iter().sum::<f64>() / fold_auc.len() as f64);
    report.folds = assignments;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{sample_experiment, Scenario, SimConfig};

    #[test]
    fn folds_are_stratified_and_deterministic() {
        let labels: Vec<Label> = (0..23).map(|i| if i < 9 { Label::Pos } else { Label::Neg }).collect();
        let a = assign_folds(&labels, 4, 7);
        assert_eq!(a, assign_folds(&labels, 4, 7));
        for f in 0..4 {
            let pos = (0..23).filter(|&i| a[i] == f && labels[i].is_pos()).count();
            assert!((2..=3).contains(&pos));
            let size = a.iter().filter(|&&x| x == f).count();
            assert!((5..=6).contains(&size));
        }
    }

    #[test]
    fn leave_one_bag_out() {
        let labels: Vec<Label> = (0..10).map(|i| if i % 2 == 0 { Label::Pos } else { Label::Neg }).collect();
        let mut a = assign_folds(&labels, 10, 1);
        a.sort();
        assert_eq!(a, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn test_bags_never_enter_fitting() {
        let (data, _) = sample_experiment(&SimConfig::preset(Scenario::Sim1), 6, 6, 1, 3).unwrap();
        let mut records = Vec::new();
        let r = cross_validate_observed(&data, 3, &PipelineConfig::default(), 2, 5, |rec| records.push(rec.clone()))
            .unwrap();
        assert_eq!(records.len(), 6);
        for rec in &records {
            assert!(rec.test_ids.iter().all(|t| !rec.train_ids.contains(t)));
            assert_eq!(rec.train_ids.len() + rec.test_ids.len(), 12);
        }
        assert_eq!(r.scores.len(), 24);
        assert_eq!(r.folds.len(), 2);
        assert!(r.accuracy_sd.is_some());
    }

    #[test]
    fn fold_without_training_class_is_an_error() {
        let (data, _) = sample_experiment(&SimConfig::preset(Scenario::Sim1), 1, 3, 1, 3).unwrap();
        assert!(cross_validate(&data, 2, &PipelineConfig::default(), 1, 0).is_err());
    }
}
