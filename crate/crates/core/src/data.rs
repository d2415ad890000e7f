//! Bags, datasets and their invariants.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary bag label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "POS")]
    Pos,
    #[serde(rename = "NEG")]
    Neg,
}

impl Label {
    pub fn flipped(self) -> Label {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    pub fn is_pos(self) -> bool {
        self == Label::Pos
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Pos => f.write_str("POS"),
            Label::Neg => f.write_str("NEG"),
        }
    }
}

/// One feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Instance(Vec<f64>);

impl Instance {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite instance value {v}")));
        }
        Ok(Instance(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// A bag: a non-empty set of same-dimension instances with an optional label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bag {
    id: String,
    instances: Vec<Instance>,
    label: Option<Label>,
}

impl Bag {
    pub fn new(id: impl Into<String>, instances: Vec<Instance>, label: Option<Label>) -> Result<Self> {
        let id = id.into();
        let Some(first) = instances.first() else {
            return Err(Error::InvalidBag {
                bag_id: id,
                message: "bag has no instances".into(),
            });
        };
        let d = first.dim();
        if d == 0 {
            return Err(Error::InvalidBag {
                bag_id: id,
                message: "instances have zero dimension".into(),
            });
        }
        if let Some(bad) = instances.iter().find(|x| x.dim() != d) {
            return Err(Error::DimensionMismatch {
                bag_id: id,
                expected: d,
                found: bad.dim(),
            });
        }
        Ok(Bag { id, instances, label })
    }

    /// Builds a bag of 1-D instances.
    pub fn from_scalars(id: impl Into<String>, values: &[f64], label: Option<Label>) -> Result<Self> {
        let instances = values
            .iter()
            .map(|&v| Instance::new(vec![v]))
            .collect::<Result<Vec<_>>>()?;
        Bag::new(id, instances, label)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn label(&self) -> Option<Label> {
        self.label
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.instances[0].dim()
    }

    /// Values of coordinate `j` across all instances, in instance order.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.instances.iter().map(|x| x.values()[j]).collect()
    }

    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }

    pub(crate) fn with_instances(&self, instances: Vec<Instance>) -> Bag {
        Bag {
            id: self.id.clone(),
            instances,
            label: self.label,
        }
    }
}

/// A named collection of bags sharing one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    dimension: usize,
    bags: Vec<Bag>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, bags: Vec<Bag>) -> Result<Self> {
        let name = name.into();
        let Some(first) = bags.first() else {
            return Err(Error::invalid(format!("dataset {name} has no bags")));
        };
        let dimension = first.dim();
        if let Some(bad) = bags.iter().find(|b| b.dim() != dimension) {
            return Err(Error::DimensionMismatch {
                bag_id: bad.id().to_string(),
                expected: dimension,
                found: bad.dim(),
            });
        }
        Ok(Dataset { name, dimension, bags })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bags(&self) -> &[Bag] {
        &self.bags
    }

    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    pub fn instance_count(&self) -> usize {
        self.bags.iter().map(Bag::len).sum()
    }

    pub fn labels(&self) -> Vec<Option<Label>> {
        self.bags.iter().map(Bag::label).collect()
    }

    pub fn count_label(&self, label: Label) -> usize {
        self.bags.iter().filter(|b| b.label() == Some(label)).count()
    }

    /// Pools coordinate `j` of every instance from bags carrying `label`.
    pub fn pooled_column(&self, label: Label, j: usize) -> Vec<f64> {
        self.bags
            .iter()
            .filter(|b| b.label() == Some(label))
            .flat_map(|b| b.instances().iter().map(move |x| x.values()[j]))
            .collect()
    }

    /// A new dataset holding the bags at `indices`, in that order.
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Result<Dataset> {
        Dataset::new(name, indices.iter().map(|&i| self.bags[i].clone()).collect())
    }
}
