//! Multiple-instance classification with bag-to-class divergences.
//!
//! A bag is treated as a sample from its own probability density. Each bag's
//! density is estimated ([`density`]), compared with the pooled densities of
//! the positive and negative training classes ([`divergence`]), and the
//! resulting divergence score drives a threshold or linear classifier
//! ([`classify`]). [`simulate`] generates bags from a hierarchical model for
//! controlled studies.

pub mod classify;
pub mod data;
pub mod density;
pub mod divergence;
pub mod error;
pub mod io;
pub mod pca;
pub mod seed;
pub mod simulate;

pub use data::{Bag, Dataset, Instance, Label};
pub use density::{DensityKind, DensityModel, EmFitReport, Kernel};
pub use divergence::{DivergenceScore, DivergenceSpec, Integrator, Measure};
pub use error::{Error, Result};
pub use io::{load_dataset, save_dataset};
pub use pca::{apply_pca, fit_pca, PcaTransform};
