//! Feature reordering and splitting into fixed-width sets.

use std::ops::Range;

use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};

/// Recommended set width.
pub const DEFAULT_SET_WIDTH: usize = 5;

/// A feature permutation plus a split of the permuted features into sets of
/// width `set_width` (the last set may be narrower).
///
/// Permuted position `p` holds original feature `permutation[p]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PartitionPlan {
    permutation: Vec<usize>,
    set_width: usize,
}

impl PartitionPlan {
    pub fn new(permutation: Vec<usize>, set_width: usize) -> Result<Self> {
        let dim = permutation.len();
        if set_width < 1 || set_width > dim {
            return Err(Error::BadWidth { width: set_width, dim });
        }
        let mut seen = vec![false; dim];
        for &p in &permutation {
            if p >= dim || seen[p] {
                return Err(Error::InvalidConfig(format!("permutation is not a bijection (index {p})")));
            }
            seen[p] = true;
        }
        Ok(Self { permutation, set_width })
    }

    pub fn dim(&self) -> usize {
        self.permutation.len()
    }

    pub fn set_width(&self) -> usize {
        self.set_width
    }

    pub fn set_count(&self) -> usize {
        self.dim().div_ceil(self.set_width)
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    /// Start offsets of each set in permuted order.
    pub fn boundaries(&self) -> Vec<usize> {
        (0..self.set_count()).map(|s| s * self.set_width).collect()
    }

    /// Permuted positions covered by set `s`.
    pub fn set_range(&self, s: usize) -> Range<usize> {
        let start = s * self.set_width;
        start..(start + self.set_width).min(self.dim())
    }

    pub fn set_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.set_count()).map(|s| self.set_range(s))
    }

    /// Original feature indices in set `s`.
    pub fn set_features(&self, s: usize) -> &[usize] {
        &self.permutation[self.set_range(s)]
    }

    pub fn permute_into(&self, src: &[f64], dst: &mut [f64]) {
        for (d, &p) in dst.iter_mut().zip(&self.permutation) {
            *d = src[p];
        }
    }

    pub fn permute(&self, src: &[f64]) -> Vec<f64> {
        self.permutation.iter().map(|&p| src[p]).collect()
    }

    pub fn unpermute(&self, permuted: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; permuted.len()];
        for (&p, &v) in self.permutation.iter().zip(permuted) {
            out[p] = v;
        }
        out
    }

    pub fn permute_matrix(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        if matrix.dim() != self.dim() {
            return Err(Error::PlanMismatch { expected: self.dim(), found: matrix.dim() });
        }
        matrix.map_rows(self.dim(), |src, dst| self.permute_into(src, dst))
    }
}

/// Contiguous sets over the original feature order.
pub fn identity_plan(dim: usize, set_width: usize) -> Result<PartitionPlan> {
    PartitionPlan::new((0..dim).collect(), set_width)
}

/// Greedy correlation-driven reordering.
///
/// Feature 0 stays first; every following position takes the unplaced
/// feature with the highest mean |Pearson| against the previous two placed
/// features (one when only one exists), except that each new set starts with
/// the feature having the lowest such mean. Ties go to the lowest index.
pub fn correlation_plan(train: &FeatureMatrix, set_width: usize) -> Result<PartitionPlan> {
    let dim = train.dim();
    if set_width < 1 || set_width > dim {
        return Err(Error::BadWidth { width: set_width, dim });
    }
    if train.rows() < 2 {
        return Err(Error::DegenerateSample(format!(
            "correlation needs at least 2 rows, got {}",
            train.rows()
        )));
    }
    let corr = abs_correlations(train);
    let mut placed = vec![false; dim];
    let mut order = Vec::with_capacity(dim);
    order.push(0);
    placed[0] = true;

    for pos in 1..dim {
        let prev = &order[pos.saturating_sub(2)..pos];
        let starts_set = pos % set_width == 0;
        let mut best: Option<(usize, f64)> = None;
        for cand in (0..dim).filter(|&c| !placed[c]) {
            let score = prev.iter().map(|&p| corr[cand * dim + p]).sum::<f64>() / prev.len() as f64;
            let better = match best {
                None => true,
                Some((_, b)) if starts_set => score < b,
                Some((_, b)) => score > b,
            };
            if better {
                best = Some((cand, score));
            }
        }
        let (chosen, _) = best.expect("an unplaced feature remains");
        placed[chosen] = true;
        order.push(chosen);
    }
    PartitionPlan::new(order, set_width)
}

// |Pearson| for all feature pairs, row-major `dim × dim`. Bit-identical to
// `linalg::pearson` on the same columns.
fn abs_correlations(train: &FeatureMatrix) -> Vec<f64> {
    let dim = train.dim();
    let m = train.rows() as f64;
    let centered: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let col = train.column(j);
            let mean = col.iter().sum::<f64>() / m;
            col.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let sum_sq: Vec<f64> = centered.iter().map(|c| c.iter().map(|x| x * x).sum()).collect();

    let rows: Vec<Vec<f64>> = (0..dim)
        .into_par_iter()
        .map(|i| {
            (0..dim)
                .map(|j| {
                    if i == j {
                        return if sum_sq[i] == 0.0 { 0.0 } else { 1.0 };
                    }
                    // Keep the argument order of pearson(col_min, col_max) so
                    // both triangles agree bit for bit.
                    let (a, b) = if i < j { (i, j) } else { (j, i) };
                    if sum_sq[a] == 0.0 || sum_sq[b] == 0.0 {
                        return 0.0;
                    }
                    let sab: f64 = centered[a].iter().zip(&centered[b]).map(|(x, y)| x * y).sum();
                    (sab / (sum_sq[a].sqrt() * sum_sq[b].sqrt())).clamp(-1.0, 1.0).abs()
                })
                .collect()
        })
        .collect();
    rows.concat()
}
