//! AUROC and configuration sweeps.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::data::{FeatureMatrix, LabeledSet};
use crate::error::{Error, Result};
use crate::index::{fit, TrainedModel};
use crate::partition::{correlation_plan, identity_plan, PartitionPlan};
use crate::scoring::{score_batch, Method, ScoreConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocResult {
    pub auroc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// Area under the ROC curve, with label `true` as the positive class.
///
/// Computed from the Mann–Whitney rank sum with average ranks for ties, so
/// it equals the probability that a random positive outscores a random
/// negative, ties counting one half.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch { expected: labels.len(), found: scores.len() });
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a run of ties shares the mean of its ranks. Sums are
    // kept doubled so every term is an integer.
    let mut doubled_rank_sum: u128 = 0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]].total_cmp(&scores[order[start]]).is_eq() {
            end += 1;
        }
        let doubled_rank = (start + 1 + end) as u128;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count() as u128;
        doubled_rank_sum += doubled_rank * positives;
        start = end;
    }
    let p = n_pos as u128;
    let doubled_u = doubled_rank_sum - p * (p + 1);
    let auroc = doubled_u as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocResult { auroc, n_pos, n_neg })
}

/// One sweep line, with the set width and eigenpair count actually used.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub config: ScoreConfig,
    pub set_width: usize,
    pub n: usize,
    pub roc: RocResult,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Distinct models fitted while producing the table.
    pub fits: usize,
}

/// Fits and plans shared across configurations.
#[derive(Default)]
pub struct ModelCache {
    plans: HashMap<(usize, bool), Arc<PartitionPlan>>,
    models: HashMap<(Arc<PartitionPlan>, usize, usize), Arc<TrainedModel>>,
    fits: usize,
}

impl ModelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fits(&self) -> usize {
        self.fits
    }

    /// Model suitable for scoring `config` on `train`, fitting it on first use.
    pub fn model_for(&mut self, train: &FeatureMatrix, config: &ScoreConfig) -> Result<Arc<TrainedModel>> {
        config.validate()?;
        let dim = train.dim();
        let width = config.resolved_set_width(dim);
        let plan = match self.plans.get(&(width, config.reorder)) {
            Some(p) => Arc::clone(p),
            None => {
                let p = Arc::new(if config.reorder {
                    correlation_plan(train, width)?
                } else {
                    identity_plan(dim, width)?
                });
                self.plans.insert((width, config.reorder), Arc::clone(&p));
                p
            }
        };
        let k_nnn = config.fit_k_nnn();
        let n = if k_nnn > 0 { config.resolved_n(dim) } else { 0 };
        let key = (plan, k_nnn, n);
        if let Some(m) = self.models.get(&key) {
            return Ok(Arc::clone(m));
        }
        let model = Arc::new(fit(train, &key.0, k_nnn, n)?);
        self.fits += 1;
        self.models.insert(key, Arc::clone(&model));
        Ok(model)
    }
}

/// AUROC for each configuration, in the order given.
pub fn sweep(train: &FeatureMatrix, test: &LabeledSet, configs: &[ScoreConfig]) -> Result<SweepTable> {
    let mut cache = ModelCache::new();
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let model = cache.model_for(train, config)?;
        let report = score_batch(&model, &test.features, config, false)?;
        let dim = train.dim();
        rows.push(SweepRow {
            config: config.clone(),
            set_width: config.resolved_set_width(dim),
            n: config.resolved_n(dim),
            roc: auroc(&report.scores, &test.labels)?,
        });
    }
    Ok(SweepTable { rows, fits: cache.fits() })
}

pub const SWEEP_HEADER: &str = "method,k,k_nnn,L,n,reorder,auroc";

pub fn write_sweep_csv<W: Write>(table: &SweepTable, out: &mut W) -> Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for row in &table.rows {
        let c = &row.config;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            c.method,
            c.k,
            c.fit_k_nnn(),
            row.set_width,
            row.n,
            u8::from(c.reorder),
            row.roc.auroc
        )?;
    }
    Ok(())
}

/// Parses a sweep grid such as `knn:k=75; knnn:k=3,k_nnn=25,L=5,reorder=1`.
///
/// Entries are `;`-separated; each names a method followed by optional
/// `key=value` overrides of the defaults (`k`, `k_nnn`, `L`, `n`, `reorder`).
pub fn parse_grid(spec: &str) -> Result<Vec<ScoreConfig>> {
    let mut configs = Vec::new();
    for entry in spec.split(';').map(str::trim).filter(|e| !e.is_empty()) {
        let (method, params) = match entry.split_once(':') {
            Some((m, p)) => (m, p),
            None => (entry, ""),
        };
        let mut config = ScoreConfig::new(method.parse::<Method>()?);
        for param in params.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = param
                .split_once('=')
                .ok_or_else(|| Error::InvalidConfig(format!("expected key=value, got {param:?}")))?;
            let value = value.trim();
            let int = || {
                value
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidConfig(format!("{key} expects an integer, got {value:?}")))
            };
            match key.trim() {
                "k" => config.k = int()?,
                "k_nnn" | "knnn" | "k-nnn" => config.k_nnn = int()?,
                "L" | "l" => config.set_width = Some(int()?),
                "n" => config.n = Some(int()?),
                "reorder" => {
                    config.reorder = match value {
                        "1" | "true" | "yes" => true,
                        "0" | "false" | "no" => false,
                        _ => return Err(Error::InvalidConfig(format!("reorder expects a flag, got {value:?}"))),
                    }
                }
                other => return Err(Error::InvalidConfig(format!("unknown grid key {other:?}"))),
            }
        }
        config.validate()?;
        configs.push(config);
    }
    if configs.is_empty() {
        return Err(Error::InvalidConfig("empty sweep grid".into()));
    }
    Ok(configs)
}
