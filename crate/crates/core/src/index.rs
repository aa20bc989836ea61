//! Exact nearest-neighbor search and the neighbors-of-neighbors training
//! pass.
//!
//! Fitting stores, for every training point and every feature set of the
//! partition plan, the eigenpairs of the covariance of that point's own
//! `k_nnn` nearest neighbors (the point itself excluded).

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::data::FeatureMatrix;
use crate::error::{Error, Result};
use crate::linalg::{covariance, eig_sym, squared_distance, EigenPack};
use crate::partition::PartitionPlan;

/// Neighbors-of-neighbors count used unless configured otherwise.
pub const DEFAULT_K_NNN: usize = 25;

/// Relative eigenvalue floor: each pack's values are clamped to at least
/// this fraction of its largest value.
pub const EIGEN_FLOOR_RELATIVE: f64 = 1e-6;

/// How stored eigenvalues were floored. The id is persisted in model files.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorPolicy {
    /// `max(e, 1e-6 · largest)`; 1 stands in for `largest` when it is not positive.
    RelativeToLargest,
}

impl FloorPolicy {
    pub fn id(self) -> u32 {
        match self {
            FloorPolicy::RelativeToLargest => 1,
        }
    }

    pub fn from_id(id: u32) -> Option<Self> {
        match id {
            1 => Some(FloorPolicy::RelativeToLargest),
            _ => None,
        }
    }

    pub fn apply(self, pack: &mut EigenPack) {
        match self {
            FloorPolicy::RelativeToLargest => pack.apply_floor(EIGEN_FLOOR_RELATIVE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborQueryResult {
    pub neighbor_ids: Vec<usize>,
    pub distances: Vec<f64>,
}

/// The `k` training rows nearest to `query`, closest first.
///
/// Ties on distance resolve to the lower row id. `exclude` removes one row
/// from consideration.
pub fn knn_query(
    train: &FeatureMatrix,
    query: &[f64],
    k: usize,
    exclude: Option<usize>,
) -> Result<NeighborQueryResult> {
    if query.len() != train.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), found: query.len() });
    }
    let eligible = train.rows() - usize::from(exclude.is_some_and(|e| e < train.rows()));
    if k > eligible || k == 0 {
        return Err(Error::NotEnoughNeighbors { requested: k, available: eligible });
    }

    let mut candidates: Vec<(f64, usize)> = train
        .iter_rows()
        .enumerate()
        .filter(|(id, _)| Some(*id) != exclude)
        .map(|(id, row)| (squared_distance(query, row), id))
        .collect();
    let by_distance = |a: &(f64, usize), b: &(f64, usize)| -> Ordering {
        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
    };
    if k < candidates.len() {
        candidates.select_nth_unstable_by(k - 1, by_distance);
        candidates.truncate(k);
    }
    candidates.sort_unstable_by(by_distance);

    Ok(NeighborQueryResult {
        neighbor_ids: candidates.iter().map(|c| c.1).collect(),
        distances: candidates.iter().map(|c| c.0.sqrt()).collect(),
    })
}

/// A fitted model: training rows, partition plan and per-point eigen-statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    train: FeatureMatrix,
    permuted: FeatureMatrix,
    plan: PartitionPlan,
    k_nnn: usize,
    n: usize,
    floor: FloorPolicy,
    // Row-major N × S.
    packs: Vec<EigenPack>,
    // One pack per set over the whole training set; `None` when N < 2.
    global: Option<Vec<EigenPack>>,
}

impl TrainedModel {
    /// Assembles a model from precomputed packs, laid out point-major
    /// (`packs[i * S + s]`). Packs must already be floored.
    pub fn from_parts(
        train: FeatureMatrix,
        plan: PartitionPlan,
        k_nnn: usize,
        n: usize,
        packs: Vec<EigenPack>,
    ) -> Result<Self> {
        if train.dim() != plan.dim() {
            return Err(Error::PlanMismatch { expected: plan.dim(), found: train.dim() });
        }
        let s_count = plan.set_count();
        if k_nnn > 0 {
            if packs.len() != train.rows() * s_count {
                return Err(Error::DimensionMismatch {
                    expected: train.rows() * s_count,
                    found: packs.len(),
                });
            }
            for (idx, pack) in packs.iter().enumerate() {
                let width = plan.set_range(idx % s_count).len();
                if pack.dim() != width || pack.len() != n.min(width) {
                    return Err(Error::DimensionMismatch { expected: width, found: pack.dim() });
                }
            }
        } else if !packs.is_empty() || n != 0 {
            return Err(Error::InvalidConfig("a model without neighbors-of-neighbors holds no packs".into()));
        }
        let permuted = plan.permute_matrix(&train)?;
        let floor = FloorPolicy::RelativeToLargest;
        let global = global_packs(&permuted, &plan, floor)?;
        Ok(Self { train, permuted, plan, k_nnn, n, floor, packs, global })
    }

    pub fn train(&self) -> &FeatureMatrix {
        &self.train
    }

    /// Training rows with features in plan order.
    pub fn permuted_train(&self) -> &FeatureMatrix {
        &self.permuted
    }

    pub fn plan(&self) -> &PartitionPlan {
        &self.plan
    }

    /// 0 for a model fitted without neighbors-of-neighbors statistics.
    pub fn k_nnn(&self) -> usize {
        self.k_nnn
    }

    /// Eigenpairs kept per set (fewer in a set narrower than `n`).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn floor_policy(&self) -> FloorPolicy {
        self.floor
    }

    pub fn has_packs(&self) -> bool {
        self.k_nnn > 0
    }

    pub fn packs(&self) -> &[EigenPack] {
        &self.packs
    }

    pub fn pack(&self, point: usize, set: usize) -> &EigenPack {
        &self.packs[point * self.plan.set_count() + set]
    }

    pub fn global_packs(&self) -> Option<&[EigenPack]> {
        self.global.as_deref()
    }
}

fn global_packs(
    permuted: &FeatureMatrix,
    plan: &PartitionPlan,
    floor: FloorPolicy,
) -> Result<Option<Vec<EigenPack>>> {
    if permuted.rows() < 2 {
        return Ok(None);
    }
    plan.set_ranges()
        .map(|range| {
            let subs: Vec<&[f64]> = permuted.iter_rows().map(|r| &r[range.clone()]).collect();
            let mut pack = eig_sym(&covariance(&subs)?)?;
            floor.apply(&mut pack);
            Ok(pack)
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Eigenpairs of the covariance of `rows` restricted to each set of `plan`,
/// top `n` kept and floored. `rows` are in plan order.
pub fn set_packs(
    rows: &[&[f64]],
    plan: &PartitionPlan,
    n: usize,
    floor: FloorPolicy,
) -> Result<Vec<EigenPack>> {
    plan.set_ranges()
        .map(|range| {
            let subs: Vec<&[f64]> = rows.iter().map(|r| &r[range.clone()]).collect();
            let mut pack = eig_sym(&covariance(&subs)?)?;
            pack.truncate(n);
            floor.apply(&mut pack);
            Ok(pack)
        })
        .collect()
}

/// Neighbors-of-neighbors training pass.
///
/// `k_nnn == 0` yields a model without packs, usable by the k-NN, global and
/// local scorers only.
pub fn fit(train: &FeatureMatrix, plan: &PartitionPlan, k_nnn: usize, n: usize) -> Result<TrainedModel> {
    if train.dim() != plan.dim() {
        return Err(Error::PlanMismatch { expected: plan.dim(), found: train.dim() });
    }
    if k_nnn == 0 {
        return TrainedModel::from_parts(train.clone(), plan.clone(), 0, 0, Vec::new());
    }
    if k_nnn < 2 {
        return Err(Error::DegenerateSample(format!("k_nnn must be at least 2, got {k_nnn}")));
    }
    if n == 0 || n > plan.set_width() {
        return Err(Error::InvalidConfig(format!(
            "n must lie in 1..={}, got {n}",
            plan.set_width()
        )));
    }
    let available = train.rows().saturating_sub(1);
    if k_nnn > available {
        return Err(Error::NotEnoughNeighbors { requested: k_nnn, available });
    }

    let permuted = plan.permute_matrix(train)?;
    let floor = FloorPolicy::RelativeToLargest;
    let per_point: Vec<Vec<EigenPack>> = (0..train.rows())
        .into_par_iter()
        .map(|i| {
            let nn = knn_query(train, train.row(i), k_nnn, Some(i))?;
            let rows: Vec<&[f64]> = nn.neighbor_ids.iter().map(|&id| permuted.row(id)).collect();
            set_packs(&rows, plan, n, floor)
        })
        .collect::<Result<_>>()?;

    let global = global_packs(&permuted, plan, floor)?;
    Ok(TrainedModel {
        train: train.clone(),
        permuted,
        plan: plan.clone(),
        k_nnn,
        n,
        floor,
        packs: per_point.into_iter().flatten().collect(),
        global,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::identity_plan;
    use crate::rng::Rng;

    fn matrix(rows: &[[f64; 2]]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn query_one_dimensional_geometry() {
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]]);
        let res = knn_query(&train, &[0.1, 0.0], 2, None).unwrap();
        assert_eq!(res.neighbor_ids, vec![0, 1]);
        assert!((res.distances[0] - 0.1).abs() < 1e-15);
        assert!((res.distances[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn query_self_match_and_exclusion() {
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0], [5.0, 0.0]]);
        let res = knn_query(&train, &[1.0, 0.0], 1, None).unwrap();
        assert_eq!((res.neighbor_ids[0], res.distances[0]), (1, 0.0));
        let res = knn_query(&train, &[1.0, 0.0], 2, Some(1)).unwrap();
        assert_eq!(res.neighbor_ids, vec![0, 2]);
    }

    #[test]
    fn query_ties_prefer_lower_id() {
        let train = matrix(&[[3.0, 3.0], [0.0, 1.0], [1.0, 0.0]]);
        let res = knn_query(&train, &[0.0, 0.0], 1, None).unwrap();
        assert_eq!(res.neighbor_ids, vec![1]);
    }

    #[test]
    fn query_errors() {
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0]]);
        assert!(matches!(
            knn_query(&train, &[0.0, 0.0], 2, Some(0)),
            Err(Error::NotEnoughNeighbors { requested: 2, available: 1 })
        ));
        assert!(matches!(knn_query(&train, &[0.0], 1, None), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn collinear_points_give_rank_one_packs() {
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let plan = identity_plan(2, 2).unwrap();
        let model = fit(&train, &plan, 2, 2).unwrap();
        for i in 0..3 {
            let pack = model.pack(i, 0);
            assert_eq!(pack.vector(0), &[1.0, 0.0]);
            let lead = pack.values()[0];
            assert!(lead > 0.0);
            assert_eq!(pack.values()[1], EIGEN_FLOOR_RELATIVE * lead);
        }
    }

    #[test]
    fn square_corners_share_packs() {
        // Each corner's neighbors are the other three corners, so every pack
        // is a mirror image of the others: same eigenvalues, eigenvectors
        // along the diagonals.
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let plan = identity_plan(2, 2).unwrap();
        let model = fit(&train, &plan, 3, 2).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for i in 0..4 {
            let pack = model.pack(i, 0);
            assert!((pack.values()[0] - 0.5).abs() < 1e-12);
            assert!((pack.values()[1] - 1.0 / 6.0).abs() < 1e-12);
            for j in 0..2 {
                for c in pack.vector(j) {
                    assert!((c.abs() - h).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn fit_rejects_too_many_neighbors() {
        let train = matrix(&[[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]);
        let plan = identity_plan(2, 2).unwrap();
        assert!(matches!(fit(&train, &plan, 3, 2), Err(Error::NotEnoughNeighbors { .. })));
        assert!(matches!(fit(&train, &plan, 2, 3), Err(Error::InvalidConfig(_))));
        assert!(matches!(fit(&train, &plan, 1, 2), Err(Error::DegenerateSample(_))));
    }

    #[test]
    fn fit_is_deterministic_and_floored() {
        let mut rng = Rng::new(99);
        let rows: Vec<Vec<f64>> = (0..60).map(|_| (0..7).map(|_| rng.gaussian()).collect()).collect();
        let train = FeatureMatrix::from_rows(&rows).unwrap();
        let plan = identity_plan(7, 3).unwrap();
        let a = fit(&train, &plan, 5, 3).unwrap();
        let b = fit(&train, &plan, 5, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.packs().len(), 60 * 3);
        for pack in a.packs() {
            let lead = pack.values()[0];
            for (j, &v) in pack.values().iter().enumerate() {
                assert!(v >= EIGEN_FLOOR_RELATIVE * lead);
                let norm = crate::linalg::dot(pack.vector(j), pack.vector(j)).sqrt();
                assert!((norm - 1.0).abs() <= 1e-9);
            }
        }
        // The ragged last set has width 1.
        assert_eq!(a.pack(0, 2).len(), 1);
    }
}
