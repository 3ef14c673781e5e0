//! Attribute balance across sets.
//!
//! For every attribute key the report gives the per-set distribution of its
//! values next to the distribution over the whole dataset. Per-set ratios
//! are taken over the samples of that set carrying the key, so the full
//! ratio is the carrier-weighted mean of the per-set ratios (unassigned
//! samples form their own set here).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ingest::Dataset;
use crate::leakage::{LeakageError, SetLabel, SplitAssignment};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueBalance {
    pub full: f64,
    pub per_set: BTreeMap<SetLabel, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeBalance {
    /// Fraction of all samples carrying the key.
    pub coverage: f64,
    pub missing: usize,
    /// Samples carrying the key, per set.
    pub carriers: BTreeMap<SetLabel, usize>,
    pub values: BTreeMap<String, ValueBalance>,
}

impl AttributeBalance {
    /// Largest `|per-set ratio - full ratio|` over train, val and test.
    pub fn max_deviation(&self) -> f64 {
        self.values
            .values()
            .flat_map(|v| {
                SetLabel::ASSIGNED
                    .iter()
                    .filter_map(move |s| v.per_set.get(s).copied().flatten().map(|r| (r - v.full).abs()))
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub samples: usize,
    pub counts: BTreeMap<SetLabel, usize>,
    /// Share of train/val/test among assigned samples.
    pub proportions: BTreeMap<SetLabel, Option<f64>>,
    pub per_map: BTreeMap<String, BTreeMap<SetLabel, usize>>,
    pub attributes: BTreeMap<String, AttributeBalance>,
}

impl BalanceReport {
    pub fn max_deviation(&self) -> f64 {
        self.attributes
            .values()
            .map(AttributeBalance::max_deviation)
            .fold(0.0, f64::max)
    }

    pub fn check(&self) -> Result<(), String> {
        let total: usize = self.counts.values().sum();
        if total != self.samples {
            return Err("set counts do not sum to the sample count".into());
        }
        for (key, attr) in &self.attributes {
            for set in SetLabel::ALL {
                let ratios: Vec<f64> = attr
                    .values
                    .values()
                    .filter_map(|v| v.per_set.get(&set).copied().flatten())
                    .collect();
                if !ratios.is_empty() && (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                    return Err(format!("`{key}` ratios of {set} do not sum to 1"));
                }
            }
            let carriers: usize = attr.carriers.values().sum();
            for (value, v) in &attr.values {
                let weighted: f64 = attr
                    .carriers
                    .iter()
                    .filter_map(|(s, &n)| v.per_set.get(s).copied().flatten().map(|r| r * n as f64))
                    .sum();
                if carriers > 0 && (weighted / carriers as f64 - v.full).abs() > 1e-12 {
                    return Err(format!("`{key}={value}` full ratio is not the weighted mean"));
                }
            }
        }
        Ok(())
    }
}

pub fn balance_report(
    ds: &Dataset,
    split: &SplitAssignment,
    attribute_keys: &[String],
) -> Result<BalanceReport, LeakageError> {
    let labels = split.resolve(ds)?;
    Ok(balance_from_labels(ds, &labels, attribute_keys))
}

pub(crate) fn balance_from_labels(ds: &Dataset, labels: &[SetLabel], attribute_keys: &[String]) -> BalanceReport {
    let samples = ds.samples();
    let mut counts: BTreeMap<SetLabel, usize> = SetLabel::ALL.iter().map(|&l| (l, 0)).collect();
    let mut per_map: BTreeMap<String, BTreeMap<SetLabel, usize>> = BTreeMap::new();
    for (s, &l) in samples.iter().zip(labels) {
        *counts.get_mut(&l).unwrap() += 1;
        *per_map
            .entry(s.map_id.clone())
            .or_insert_with(|| SetLabel::ALL.iter().map(|&l| (l, 0)).collect())
            .get_mut(&l)
            .unwrap() += 1;
    }
    let assigned: usize = SetLabel::ASSIGNED.iter().map(|l| counts[l]).sum();
    let proportions = SetLabel::ASSIGNED
        .iter()
        .map(|l| (*l, (assigned > 0).then(|| counts[l] as f64 / assigned as f64)))
        .collect();

    let mut attributes = BTreeMap::new();
    for key in attribute_keys {
        let mut carriers: BTreeMap<SetLabel, usize> = SetLabel::ALL.iter().map(|&l| (l, 0)).collect();
        let mut tallies: BTreeMap<&str, [usize; 4]> = BTreeMap::new();
        for (s, &l) in samples.iter().zip(labels) {
            if let Some(v) = s.attrs.get(key) {
                *carriers.get_mut(&l).unwrap() += 1;
                tallies.entry(v.as_str()).or_default()[l.index()] += 1;
            }
        }
        let total: usize = carriers.values().sum();
        let values = tallies
            .into_iter()
            .map(|(value, per)| {
                let per_set = SetLabel::ALL
                    .iter()
                    .map(|l| {
                        let n = carriers[l];
                        (*l, (n > 0).then(|| per[l.index()] as f64 / n as f64))
                    })
                    .collect();
                let full = per.iter().sum::<usize>() as f64 / total as f64;
                (value.to_string(), ValueBalance { full, per_set })
            })
            .collect();
        attributes.insert(
            key.clone(),
            AttributeBalance {
                coverage: if ds.is_empty() {
                    0.0
                } else {
                    total as f64 / ds.len() as f64
                },
                missing: ds.len() - total,
                carriers,
                values,
            },
        );
    }
    BalanceReport {
        samples: ds.len(),
        counts,
        proportions,
        per_map,
        attributes,
    }
}
