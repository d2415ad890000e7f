//! Principal component projection fitted on pooled instances.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Instance};
use crate::error::{Error, Result};

/// A fitted PCA projection: `mean`, `m` orthonormal components sorted by
/// explained variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTransform {
    mean: Vec<f64>,
    components: Vec<Vec<f64>>,
    explained_variance: Vec<f64>,
}

impl PcaTransform {
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.components.len()
    }

    /// Projects one centered point onto the components.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.components
            .iter()
            .map(|c| {
                c.iter()
                    .zip(x.iter().zip(&self.mean))
                    .map(|(ci, (xi, mi))| ci * (xi - mi))
                    .sum()
            })
            .collect()
    }

    /// Maps projection coordinates back to the input space.
    pub fn reconstruct(&self, z: &[f64]) -> Vec<f64> {
        let mut x = self.mean.clone();
        for (zi, c) in z.iter().zip(&self.components) {
            for (xj, cj) in x.iter_mut().zip(c) {
                *xj += zi * cj;
            }
        }
        x
    }
}

/// Fits `m` principal components to all instances of `train`, pooled across
/// bags with unit weight each.
pub fn fit_pca(train: &Dataset, m: usize) -> Result<PcaTransform> {
    let d = train.dimension();
    if m == 0 || m > d {
        return Err(Error::invalid(format!(
            "component count {m} must be in 1..={d}"
        )));
    }
    let n = train.instance_count();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }

    let rows = || train.bags().iter().flat_map(|b| b.instances().iter());
    let mut mean = vec![0.0; d];
    for x in rows() {
        for (mj, xj) in mean.iter_mut().zip(x.values()) {
            *mj += xj;
        }
    }
    for mj in &mut mean {
        *mj /= n as f64;
    }

    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0; d];
    for x in rows() {
        for (c, (xj, mj)) in centered.iter_mut().zip(x.values().iter().zip(&mean)) {
            *c = xj - mj;
        }
        for a in 0..d {
            for b in a..d {
                cov[(a, b)] += centered[a] * centered[b];
            }
        }
    }
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    if cov.trace() <= 0.0 {
        return Err(Error::DegenerateCovariance);
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut components = Vec::with_capacity(m);
    let mut explained_variance = Vec::with_capacity(m);
    for &i in order.iter().take(m) {
        let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
        // Sign convention: largest-magnitude coordinate is positive.
        let pivot = v
            .iter()
            .copied()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(k, _)| k)
            .unwrap_or(0);
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        components.push(v);
        explained_variance.push(eig.eigenvalues[i].max(0.0));
    }

    Ok(PcaTransform {
        mean,
        components,
        explained_variance,
    })
}

/// Replaces every instance by its projection coordinates. Bag ids and labels
/// are kept.
pub fn apply_pca(t: &PcaTransform, data: &Dataset) -> Result<Dataset> {
    if data.dimension() != t.input_dim() {
        return Err(Error::DimensionMismatch {
            bag_id: data.bags()[0].id().to_string(),
            expected: t.input_dim(),
            found: data.dimension(),
        });
    }
    let bags = data
        .bags()
        .iter()
        .map(|b| {
            let instances = b
                .instances()
                .iter()
                .map(|x| Instance::new(t.project(x.values())))
                .collect::<Result<Vec<_>>>()?;
            Ok(b.with_instances(instances))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(data.name(), bags)
}
