//! Anomaly scorers.
//!
//! All four share the same skeleton: find the query's `k` nearest training
//! rows by full-vector Euclidean distance, then add up one contribution per
//! neighbor and feature set.
//!
//! * `knn` adds the plain distance.
//! * `global` adds `Σ_j |(f_s − f_{i,s})·v_j| / √e_j` with one
//!   eigendecomposition per set over the whole training set.
//! * `local` uses the same form with eigenpairs of the query's own neighbors.
//! * `knnn` uses the eigenpairs stored with each neighbor at fit time.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::index::{knn_query, set_packs, TrainedModel, DEFAULT_K_NNN};
use crate::linalg::EigenPack;
use crate::partition::DEFAULT_SET_WIDTH;

pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Knn,
    Global,
    Local,
    Knnn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Knn, Method::Global, Method::Local, Method::Knnn];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Knn => "knn",
            Method::Global => "global",
            Method::Local => "local",
            Method::Knnn => "knnn",
        }
    }

    pub fn id(self) -> u32 {
        match self {
            Method::Knn => 0,
            Method::Global => 1,
            Method::Local => 2,
            Method::Knnn => 3,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.id() == id)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// Scorer selection and hyper-parameters.
///
/// `set_width` and `n` default to `min(5, D)` and the set width when `None`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ScoreConfig {
    pub method: Method,
    pub k: usize,
    pub k_nnn: usize,
    pub n: Option<usize>,
    pub set_width: Option<usize>,
    pub reorder: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            method: Method::Knnn,
            k: DEFAULT_K,
            k_nnn: DEFAULT_K_NNN,
            n: None,
            set_width: None,
            reorder: false,
        }
    }
}

impl ScoreConfig {
    pub fn new(method: Method) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_k_nnn(mut self, k_nnn: usize) -> Self {
        self.k_nnn = k_nnn;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn with_set_width(mut self, width: usize) -> Self {
        self.set_width = Some(width);
        self
    }

    pub fn with_reorder(mut self, reorder: bool) -> Self {
        self.reorder = reorder;
        self
    }

    pub fn resolved_set_width(&self, dim: usize) -> usize {
        self.set_width.unwrap_or(DEFAULT_SET_WIDTH.min(dim))
    }

    pub fn resolved_n(&self, dim: usize) -> usize {
        self.n.unwrap_or_else(|| self.resolved_set_width(dim))
    }

    /// Neighbors-of-neighbors count the model must be fitted with; only the
    /// k-NNN scorer needs packs.
    pub fn fit_k_nnn(&self) -> usize {
        if self.method == Method::Knnn {
            self.k_nnn
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.method == Method::Knnn && self.k_nnn == 1 {
            return Err(Error::InvalidConfig("k_nnn must be 0 or at least 2".into()));
        }
        if self.n == Some(0) {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        if self.set_width == Some(0) {
            return Err(Error::InvalidConfig("set width must be at least 1".into()));
        }
        Ok(())
    }
}

/// One neighbor's share of a query score, split by feature set (a single
/// entry for the plain k-NN distance).
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborContribution {
    pub neighbor: usize,
    pub per_set: Vec<f64>,
}

impl NeighborContribution {
    pub fn total(&self) -> f64 {
        self.per_set.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreReport {
    pub scores: Vec<f64>,
    pub config: ScoreConfig,
    pub breakdown: Option<Vec<Vec<NeighborContribution>>>,
}

fn check_query(model: &TrainedModel, query: &[f64]) -> Result<()> {
    if query.len() != model.plan().dim() {
        return Err(Error::PlanMismatch { expected: model.plan().dim(), found: query.len() });
    }
    Ok(())
}

fn total(parts: &[NeighborContribution]) -> f64 {
    parts.iter().map(NeighborContribution::total).sum()
}

fn knn_parts(model: &TrainedModel, query: &[f64], k: usize) -> Result<Vec<NeighborContribution>> {
    check_query(model, query)?;
    let nn = knn_query(model.train(), query, k, None)?;
    Ok(nn
        .neighbor_ids
        .into_iter()
        .zip(nn.distances)
        .map(|(neighbor, d)| NeighborContribution { neighbor, per_set: vec![d] })
        .collect())
}

// Per-set normalized projections of `query − neighbor` for each neighbor,
// with `packs_for(i, s)` supplying the eigenpairs.
fn projected_parts<'a>(
    model: &'a TrainedModel,
    query: &[f64],
    neighbors: &[usize],
    n: usize,
    packs_for: impl Fn(usize, usize) -> &'a EigenPack,
) -> Vec<NeighborContribution> {
    let plan = model.plan();
    let f = plan.permute(query);
    let mut diff = vec![0.0; plan.set_width()];
    neighbors
        .iter()
        .map(|&i| {
            let row = model.permuted_train().row(i);
            let per_set = plan
                .set_ranges()
                .enumerate()
                .map(|(s, range)| {
                    let diff = &mut diff[..range.len()];
                    for ((d, a), b) in diff.iter_mut().zip(&f[range.clone()]).zip(&row[range]) {
                        *d = a - b;
                    }
                    packs_for(i, s).normalized_projection(diff, n)
                })
                .collect();
            NeighborContribution { neighbor: i, per_set }
        })
        .collect()
}

fn global_parts(model: &TrainedModel, query: &[f64], k: usize, n: usize) -> Result<Vec<NeighborContribution>> {
    check_query(model, query)?;
    let packs = model.global_packs().ok_or_else(|| {
        Error::DegenerateSample("global normalization needs at least 2 training rows".into())
    })?;
    let nn = knn_query(model.train(), query, k, None)?;
    Ok(projected_parts(model, query, &nn.neighbor_ids, n, |_, s| &packs[s]))
}

fn local_parts(model: &TrainedModel, query: &[f64], k: usize, n: usize) -> Result<Vec<NeighborContribution>> {
    check_query(model, query)?;
    if k < 2 {
        return Err(Error::DegenerateSample(format!("local normalization needs k >= 2, got {k}")));
    }
    let nn = knn_query(model.train(), query, k, None)?;
    let rows: Vec<&[f64]> = nn.neighbor_ids.iter().map(|&i| model.permuted_train().row(i)).collect();
    let packs = set_packs(&rows, model.plan(), n, model.floor_policy())?;
    Ok(projected_parts(model, query, &nn.neighbor_ids, n, |_, s| &packs[s]))
}

fn knnn_parts(model: &TrainedModel, query: &[f64], k: usize, n: usize) -> Result<Vec<NeighborContribution>> {
    check_query(model, query)?;
    if !model.has_packs() {
        return knn_parts(model, query, k);
    }
    if n > model.n() {
        return Err(Error::InvalidConfig(format!(
            "model keeps {} eigenpairs per set, {n} requested",
            model.n()
        )));
    }
    let nn = knn_query(model.train(), query, k, None)?;
    Ok(projected_parts(model, query, &nn.neighbor_ids, n, |i, s| model.pack(i, s)))
}

/// Sum of Euclidean distances to the `k` nearest training rows.
pub fn score_knn(model: &TrainedModel, query: &[f64], k: usize) -> Result<f64> {
    knn_parts(model, query, k).map(|p| total(&p))
}

/// Neighbor differences normalized by the training set's own eigenpairs.
pub fn score_global(model: &TrainedModel, query: &[f64], k: usize, n: usize) -> Result<f64> {
    global_parts(model, query, k, n).map(|p| total(&p))
}

/// Neighbor differences normalized by eigenpairs of the query's `k` neighbors.
pub fn score_local(model: &TrainedModel, query: &[f64], k: usize, n: usize) -> Result<f64> {
    local_parts(model, query, k, n).map(|p| total(&p))
}

/// Neighbor differences normalized by each neighbor's stored eigenpairs.
///
/// Falls back to [`score_knn`] on a model fitted with `k_nnn = 0`.
pub fn score_knnn(
    model: &TrainedModel,
    query: &[f64],
    k: usize,
    n: usize,
) -> Result<(f64, Vec<NeighborContribution>)> {
    let parts = knnn_parts(model, query, k, n)?;
    Ok((total(&parts), parts))
}

/// Score with per-neighbor, per-set breakdown for any method.
pub fn score_with_breakdown(
    model: &TrainedModel,
    query: &[f64],
    config: &ScoreConfig,
) -> Result<(f64, Vec<NeighborContribution>)> {
    config.validate()?;
    let n = config.resolved_n(model.plan().dim());
    let parts = match config.method {
        Method::Knn => knn_parts(model, query, config.k)?,
        Method::Global => global_parts(model, query, config.k, n)?,
        Method::Local => local_parts(model, query, config.k, n)?,
        Method::Knnn => knnn_parts(model, query, config.k, n)?,
    };
    Ok((total(&parts), parts))
}

pub fn score(model: &TrainedModel, query: &[f64], config: &ScoreConfig) -> Result<f64> {
    score_with_breakdown(model, query, config).map(|(s, _)| s)
}

/// Scores every row of `queries`, in parallel, keeping row order.
pub fn score_batch(
    model: &TrainedModel,
    queries: &FeatureMatrix,
    config: &ScoreConfig,
    with_breakdown: bool,
) -> Result<ScoreReport> {
    let results: Vec<(f64, Vec<NeighborContribution>)> = queries
        .iter_rows()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|q| score_with_breakdown(model, q, config))
        .collect::<Result<_>>()?;
    let (scores, parts): (Vec<f64>, Vec<_>) = results.into_iter().unzip();
    Ok(ScoreReport {
        scores,
        config: config.clone(),
        breakdown: with_breakdown.then_some(parts),
    })
}
