//! Leave-one-out nearest-neighbour classification.

use std::collections::BTreeMap;

use serde::Serialize;

use super::matrix::DistanceMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assignment {
    pub id: String,
    pub label: String,
    pub assigned: String,
    pub nearest: String,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub level: String,
    /// Percentage of specimens assigned their own label.
    pub success_rate: f64,
    pub assignments: Vec<Assignment>,
    /// `confusion[true label][assigned label]` counts.
    pub confusion: BTreeMap<String, BTreeMap<String, usize>>,
}

impl ClassificationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Assigns each specimen the label of its nearest other specimen (ties to
/// the smallest index). `labels` follow the matrix id order.
pub fn loo_classify(d: &DistanceMatrix, labels: &[String], level: &str) -> Result<ClassificationReport> {
    let n = d.len();
    if n < 2 {
        return Err(Error::InvalidArgument("classification needs at least two specimens".into()));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!("{} labels for {n} specimens", labels.len())));
    }
    if let Some(i) = labels.iter().position(|l| l.is_empty()) {
        return Err(Error::InvalidArgument(format!("specimen {:?} has no label", d.ids()[i])));
    }
    let mut assignments = Vec::with_capacity(n);
    let mut confusion: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
    let mut correct = 0;
    for i in 0..n {
        let nearest = (0..n)
            .filter(|&j| j != i && !d.get(i, j).is_nan())
            .min_by(|&a, &b| d.get(i, a).total_cmp(&d.get(i, b)).then(a.cmp(&b)))
            .ok_or_else(|| Error::InvalidArgument(format!("specimen {:?} has no computed distance", d.ids()[i])))?;
        if labels[nearest] == labels[i] {
            correct += 1;
        }
        *confusion.entry(labels[i].clone()).or_default().entry(labels[nearest].clone()).or_default() += 1;
        assignments.push(Assignment {
            id: d.ids()[i].clone(),
            label: labels[i].clone(),
            assigned: labels[nearest].clone(),
            nearest: d.ids()[nearest].clone(),
            distance: d.get(i, nearest),
        });
    }
    Ok(ClassificationReport {
        level: level.to_string(),
        success_rate: 100.0 * correct as f64 / n as f64,
        assignments,
        confusion,
    })
}
