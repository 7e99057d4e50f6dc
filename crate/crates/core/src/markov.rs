//! kNN graph construction, one-step and multi-step Markov transition
//! matrices, and the min/max reachability templates built from them.
//!
//! The one-step probability between neighboring instances is inversely
//! related to their normalized distance; multi-step probabilities are matrix
//! powers of the one-step matrix. Folding those powers entrywise by min or
//! max yields the two reachability matrices the selection templates are
//! built from.

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// Power entries at or below this threshold count as unreachable; guards
/// against denormal noise from repeated multiplication.
pub const REACHABILITY_EPS: f64 = 1e-15;

/// Which distances enter the normalization denominator of the one-step
/// transition weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Denominator {
    /// Sum over the k selected neighbors only (default).
    #[default]
    Neighbors,
    /// Sum over all N points; kept as a switch for fidelity experiments.
    All,
}

/// Symmetric N x N matrix of pairwise Euclidean distances.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    values: Array2<f64>,
}

impl DistanceMatrix {
    /// Validates symmetry, zero diagonal, nonnegativity, and finiteness.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (r, c) = values.dim();
        if r != c {
            return Err(Error::ShapeMismatch {
                context: "distance matrix",
                expected: (r, r),
                got: (r, c),
            });
        }
        for i in 0..r {
            if values[[i, i]] != 0.0 {
                return Err(Error::NonFinite {
                    context: "distance matrix diagonal",
                });
            }
            for j in 0..r {
                let v = values[[i, j]];
                if !v.is_finite() || v < 0.0 || v != values[[j, i]] {
                    return Err(Error::NonFinite {
                        context: "distance matrix",
                    });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Directed kNN graph: for each instance, its k nearest others in ascending
/// distance order (ties broken by ascending index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborGraph {
    neighbors: Vec<Vec<usize>>,
    k: usize,
}

impl NeighborGraph {
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.neighbors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }
}

/// Row-stochastic one-step transition matrix with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    values: Array2<f64>,
    alpha: f64,
}

impl TransitionMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }
}

/// Whether a reachability matrix folds powers by minimum or maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReachabilityVariant {
    Min,
    Max,
}

/// N x N nonnegative reachability matrix folded over step horizons 1..=n.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityMatrix {
    values: Array2<f64>,
    variant: ReachabilityVariant,
    horizon: usize,
}

impl ReachabilityMatrix {
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn variant(&self) -> ReachabilityVariant {
        self.variant
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

/// N x d structure template (reachability-weighted instance averages).
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    values: Array2<f64>,
}

impl Template {
    /// Wraps raw template values, rejecting non-finite entries.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "template",
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }
}

/// Bundle of the graph stage: distances, neighbor mask, and the one-step
/// transition matrix with its parameters.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    pub distances: DistanceMatrix,
    pub neighbors: NeighborGraph,
    pub transition: TransitionMatrix,
    pub k: usize,
    pub alpha: f64,
    pub denominator: Denominator,
}

impl TransitionModel {
    pub fn build(
        x: &DataMatrix,
        k: usize,
        alpha: f64,
        denominator: Denominator,
    ) -> Result<Self> {
        let distances = pairwise_distances(x);
        let neighbors = knn_mask(&distances, k)?;
        let transition = one_step_transition_with(&distances, &neighbors, alpha, denominator)?;
        Ok(Self {
            distances,
            neighbors,
            transition,
            k,
            alpha,
            denominator,
        })
    }
}

/// Euclidean distances between all instance pairs (columns of X).
pub fn pairwise_distances(x: &DataMatrix) -> DistanceMatrix {
    let n = x.instance_count();
    // Instances as contiguous rows for cache-friendly row sweeps.
    let instances = x.values().t().as_standard_layout().to_owned();
    let mut values = Array2::zeros((n, n));
    values
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(i, mut row)| {
            let a = instances.row(i);
            let a = a.as_slice().expect("standard layout");
            for j in 0..n {
                if i == j {
                    continue;
                }
                let b = instances.row(j);
                let b = b.as_slice().expect("standard layout");
                let mut sum = 0.0;
                for (&ai, &bi) in a.iter().zip(b) {
                    let diff = ai - bi;
                    sum += diff * diff;
                }
                row[j] = sum.sqrt();
            }
        });
    DistanceMatrix { values }
}

/// k nearest other instances per instance, ascending distance, ties by
/// ascending index. The graph is directed; no symmetrization.
pub fn knn_mask(d: &DistanceMatrix, k: usize) -> Result<NeighborGraph> {
    let n = d.len();
    if k < 1 || k > n.saturating_sub(1) {
        return Err(Error::KOutOfRange {
            k,
            max: n.saturating_sub(1),
        });
    }
    let dist = d.values();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_unstable_by(|&a, &b| {
                dist[[i, a]]
                    .partial_cmp(&dist[[i, b]])
                    .expect("finite distances")
                    .then(a.cmp(&b))
            });
            order.truncate(k);
            order
        })
        .collect();
    Ok(NeighborGraph { neighbors, k })
}

/// One-step transition probabilities over the kNN graph with the default
/// neighbor-restricted distance normalization.
pub fn one_step_transition(
    d: &DistanceMatrix,
    g: &NeighborGraph,
    alpha: f64,
) -> Result<TransitionMatrix> {
    one_step_transition_with(d, g, alpha, Denominator::Neighbors)
}

/// One-step transition probabilities with an explicit denominator policy.
///
/// For each neighbor j of i, the weight is 1 / (r + alpha) where r is the
/// distance from i to j divided by the denominator sum; weights are zero off
/// the neighbor list and on the diagonal, and each row is normalized to
/// probabilities. A denominator of zero (all selected distances zero, i.e.
/// duplicate points) makes r zero, so alpha alone keeps the weights finite.
pub fn one_step_transition_with(
    d: &DistanceMatrix,
    g: &NeighborGraph,
    alpha: f64,
    denominator: Denominator,
) -> Result<TransitionMatrix> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::AlphaNonPositive { alpha });
    }
    let n = d.len();
    if g.len() != n {
        return Err(Error::ShapeMismatch {
            context: "neighbor graph vs distance matrix",
            expected: (n, n),
            got: (g.len(), g.len()),
        });
    }
    let dist = d.values();
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        let neigh = g.neighbors(i);
        let denom: f64 = match denominator {
            Denominator::Neighbors => neigh.iter().map(|&j| dist[[i, j]]).sum(),
            Denominator::All => dist.row(i).sum(),
        };
        let mut weight_sum = 0.0;
        for &j in neigh {
            let r = if denom > 0.0 { dist[[i, j]] / denom } else { 0.0 };
            let w = 1.0 / (r + alpha);
            values[[i, j]] = w;
            weight_sum += w;
        }
        for &j in neigh {
            values[[i, j]] /= weight_sum;
        }
    }
    Ok(TransitionMatrix { values, alpha })
}

/// The ordered list of matrix powers P^(1) ..= P^(n).
pub fn multi_step_transitions(p: &TransitionMatrix, n: usize) -> Result<Vec<Array2<f64>>> {
    if n == 0 {
        return Err(Error::HorizonZero);
    }
    let mut powers = Vec::with_capacity(n);
    powers.push(p.values.clone());
    for _ in 1..n {
        let next = powers.last().unwrap().dot(&p.values);
        powers.push(next);
    }
    Ok(powers)
}

fn fold_step(
    v_min: &mut Array2<f64>,
    v_max: &mut Array2<f64>,
    power: &Array2<f64>,
    first: bool,
) {
    let n = power.nrows();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = power[[i, j]];
            if p <= REACHABILITY_EPS {
                continue;
            }
            if first || v_min[[i, j]] == 0.0 || p < v_min[[i, j]] {
                v_min[[i, j]] = p;
            }
            if p > v_max[[i, j]] {
                v_max[[i, j]] = p;
            }
        }
    }
}

/// Entrywise minimum over the positive entries of the given powers; zero
/// where no step reaches, and zero on the diagonal.
pub fn min_reachability(powers: &[Array2<f64>], horizon: usize) -> Result<ReachabilityMatrix> {
    fold_reachability(powers, horizon).map(|(v1, _)| v1)
}

/// Entrywise maximum over the positive entries of the given powers; the
/// diagonal is forced to zero like the min variant.
pub fn max_reachability(powers: &[Array2<f64>], horizon: usize) -> Result<ReachabilityMatrix> {
    fold_reachability(powers, horizon).map(|(_, v2)| v2)
}

fn fold_reachability(
    powers: &[Array2<f64>],
    horizon: usize,
) -> Result<(ReachabilityMatrix, ReachabilityMatrix)> {
    if horizon == 0 {
        return Err(Error::HorizonZero);
    }
    if powers.len() != horizon {
        return Err(Error::PowersLengthMismatch {
            expected: horizon,
            got: powers.len(),
        });
    }
    let n = powers[0].nrows();
    let mut v_min = Array2::zeros((n, n));
    let mut v_max = Array2::zeros((n, n));
    for (t, power) in powers.iter().enumerate() {
        fold_step(&mut v_min, &mut v_max, power, t == 0);
    }
    Ok((
        ReachabilityMatrix {
            values: v_min,
            variant: ReachabilityVariant::Min,
            horizon,
        },
        ReachabilityMatrix {
            values: v_max,
            variant: ReachabilityVariant::Max,
            horizon,
        },
    ))
}

/// Builds both reachability matrices by folding powers incrementally, so
/// only one running power is ever held. Matches the materialized-list path
/// exactly: the power sequence is the same chain of products.
pub fn reachability_pair(
    p: &TransitionMatrix,
    n: usize,
) -> Result<(ReachabilityMatrix, ReachabilityMatrix)> {
    if n == 0 {
        return Err(Error::HorizonZero);
    }
    let nn = p.len();
    let mut v_min = Array2::zeros((nn, nn));
    let mut v_max = Array2::zeros((nn, nn));
    let mut current = p.values.clone();
    fold_step(&mut v_min, &mut v_max, &current, true);
    for _ in 1..n {
        current = current.dot(&p.values);
        fold_step(&mut v_min, &mut v_max, &current, false);
    }
    Ok((
        ReachabilityMatrix {
            values: v_min,
            variant: ReachabilityVariant::Min,
            horizon: n,
        },
        ReachabilityMatrix {
            values: v_max,
            variant: ReachabilityVariant::Max,
            horizon: n,
        },
    ))
}

/// Divides each row with a positive sum by that sum; all-zero rows are left
/// untouched and returned as warnings.
pub fn row_normalize(v: &ReachabilityMatrix) -> (ReachabilityMatrix, Vec<usize>) {
    let mut values = v.values.clone();
    let mut zero_rows = Vec::new();
    for (i, mut row) in values.rows_mut().into_iter().enumerate() {
        let sum = row.sum();
        if sum > 0.0 {
            row.mapv_inplace(|x| x / sum);
        } else {
            zero_rows.push(i);
        }
    }
    (
        ReachabilityMatrix {
            values,
            variant: v.variant,
            horizon: v.horizon,
        },
        zero_rows,
    )
}

/// Structure template F = V X^T (N x d).
pub fn build_template(v: &ReachabilityMatrix, x: &DataMatrix) -> Result<Template> {
    let n = x.instance_count();
    if v.values.dim() != (n, n) {
        return Err(Error::ShapeMismatch {
            context: "reachability matrix vs data matrix",
            expected: (n, n),
            got: v.values.dim(),
        });
    }
    Ok(Template {
        values: v.values.dot(&x.values().t()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn matrix_from_instances(instances: &[&[f64]]) -> DataMatrix {
        let n = instances.len();
        let d = instances[0].len();
        let mut values = Array2::zeros((d, n));
        for (i, inst) in instances.iter().enumerate() {
            for (f, &v) in inst.iter().enumerate() {
                values[[f, i]] = v;
            }
        }
        DataMatrix::from_values(values).unwrap()
    }

    /// Sum over all length-t paths of edge-probability products, by direct
    /// enumeration. Independent of the matrix-power implementation.
    fn path_sum(p: &Array2<f64>, t: usize, i: usize, j: usize) -> f64 {
        if t == 1 {
            return p[[i, j]];
        }
        let n = p.nrows();
        let mut total = 0.0;
        for v in 0..n {
            if p[[i, v]] > 0.0 {
                total += p[[i, v]] * path_sum(p, t - 1, v, j);
            }
        }
        total
    }

    fn small_random_transition(n: usize, k: usize, seed: u64) -> TransitionMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let d = 3;
        let mut values = Array2::zeros((d, n));
        values.mapv_inplace(|_: f64| rng.gen_range(-5.0..5.0));
        let x = DataMatrix::from_values(values).unwrap();
        let dist = pairwise_distances(&x);
        let graph = knn_mask(&dist, k).unwrap();
        one_step_transition(&dist, &graph, 1e-6).unwrap()
    }

    #[test]
    fn distances_on_a_line() {
        let x = matrix_from_instances(&[&[0.0], &[3.0]]);
        let d = pairwise_distances(&x);
        assert_eq!(d.values(), &array![[0.0, 3.0], [3.0, 0.0]]);
    }

    #[test]
    fn identical_points_have_zero_distance() {
        let x = matrix_from_instances(&[&[1.0, 2.0], &[1.0, 2.0]]);
        let d = pairwise_distances(&x);
        assert_eq!(d.values(), &array![[0.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn three_four_five_triangle() {
        let x = matrix_from_instances(&[&[0.0, 0.0], &[3.0, 4.0]]);
        let d = pairwise_distances(&x);
        assert_eq!(d.values()[[0, 1]], 5.0);
    }

    #[test]
    fn knn_on_three_points() {
        let x = matrix_from_instances(&[&[0.0], &[1.0], &[3.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 1).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
        assert_eq!(g.neighbors(2), &[1]);
    }

    #[test]
    fn knn_two_points() {
        let x = matrix_from_instances(&[&[0.0], &[2.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 1).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
        assert_eq!(g.neighbors(1), &[0]);
    }

    #[test]
    fn knn_tie_breaks_to_lower_index() {
        // Points 1 and 2 are equidistant from 0.
        let d = DistanceMatrix::new(array![
            [0.0, 2.0, 2.0],
            [2.0, 0.0, 3.0],
            [2.0, 3.0, 0.0]
        ])
        .unwrap();
        let g = knn_mask(&d, 1).unwrap();
        assert_eq!(g.neighbors(0), &[1]);
    }

    #[test]
    fn knn_rejects_bad_k() {
        let x = matrix_from_instances(&[&[0.0], &[1.0], &[3.0]]);
        let d = pairwise_distances(&x);
        assert!(matches!(knn_mask(&d, 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(knn_mask(&d, 3), Err(Error::KOutOfRange { .. })));
    }

    #[test]
    fn one_step_matches_scalar_computation() {
        // Points 0, 1, 3 with k = 2: row 0 has distances 1 and 3, so the
        // normalized distances are 1/4 and 3/4.
        let x = matrix_from_instances(&[&[0.0], &[1.0], &[3.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 2).unwrap();
        let alpha = 1e-6;
        let p = one_step_transition(&d, &g, alpha).unwrap();

        let m01 = 1.0 / (0.25 + alpha);
        let m02 = 1.0 / (0.75 + alpha);
        assert!((p.values()[[0, 1]] - m01 / (m01 + m02)).abs() < 1e-15);
        assert!((p.values()[[0, 2]] - m02 / (m01 + m02)).abs() < 1e-15);
        assert_eq!(p.values()[[0, 0]], 0.0);
    }

    #[test]
    fn one_step_alpha_limit() {
        let x = matrix_from_instances(&[&[0.0], &[1.0], &[3.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 2).unwrap();
        let p = one_step_transition(&d, &g, 1e-12).unwrap();
        assert!((p.values()[[0, 1]] - 0.75).abs() < 1e-9);
        assert!((p.values()[[0, 2]] - 0.25).abs() < 1e-9);
    }

    #[test]
    fn two_points_force_unit_probability() {
        let x = matrix_from_instances(&[&[0.0], &[2.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 1).unwrap();
        for alpha in [1e-9, 1e-3, 0.5] {
            let p = one_step_transition(&d, &g, alpha).unwrap();
            assert_eq!(p.values(), &array![[0.0, 1.0], [1.0, 0.0]]);
        }
    }

    #[test]
    fn duplicate_points_stay_finite() {
        let x = matrix_from_instances(&[&[1.0], &[1.0], &[1.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 2).unwrap();
        let p = one_step_transition(&d, &g, 1e-6).unwrap();
        for i in 0..3 {
            let row_sum: f64 = p.values().row(i).sum();
            assert!((row_sum - 1.0).abs() < 1e-10);
            assert!(p.values().row(i).iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn rejects_nonpositive_alpha() {
        let x = matrix_from_instances(&[&[0.0], &[1.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 1).unwrap();
        assert!(matches!(
            one_step_transition(&d, &g, 0.0),
            Err(Error::AlphaNonPositive { .. })
        ));
    }

    #[test]
    fn scale_invariance_of_transition() {
        let x = matrix_from_instances(&[&[0.0, 1.0], &[2.0, 0.5], &[5.0, -1.0], &[1.0, 4.0]]);
        let d = pairwise_distances(&x);
        let g = knn_mask(&d, 2).unwrap();
        let p = one_step_transition(&d, &g, 1e-6).unwrap();

        let scaled = DistanceMatrix::new(d.values() * 7.5).unwrap();
        let g2 = knn_mask(&scaled, 2).unwrap();
        let p2 = one_step_transition(&scaled, &g2, 1e-6).unwrap();
        for (a, b) in p.values().iter().zip(p2.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn period_two_chain_squares_to_identity() {
        let p = TransitionMatrix {
            values: array![[0.0, 1.0], [1.0, 0.0]],
            alpha: 1e-6,
        };
        let powers = multi_step_transitions(&p, 2).unwrap();
        assert_eq!(powers[1], array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn powers_stay_row_stochastic() {
        let p = small_random_transition(8, 3, 42);
        let powers = multi_step_transitions(&p, 6).unwrap();
        for power in &powers {
            for row in power.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn powers_match_path_enumeration() {
        let p = small_random_transition(8, 3, 7);
        let powers = multi_step_transitions(&p, 3).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let brute = path_sum(p.values(), 3, i, j);
                assert!(
                    (powers[2][[i, j]] - brute).abs() < 1e-12,
                    "entry ({i},{j}): {} vs {}",
                    powers[2][[i, j]],
                    brute
                );
            }
        }
    }

    #[test]
    fn min_reachability_period_two() {
        let p = TransitionMatrix {
            values: array![[0.0, 1.0], [1.0, 0.0]],
            alpha: 1e-6,
        };
        let powers = multi_step_transitions(&p, 2).unwrap();
        let v1 = min_reachability(&powers, 2).unwrap();
        // Off-diagonal entries only appear at t=1; t=2 puts mass on the
        // diagonal, which is excluded.
        assert_eq!(v1.values(), &array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn max_reachability_period_two_zeroes_diagonal() {
        let p = TransitionMatrix {
            values: array![[0.0, 1.0], [1.0, 0.0]],
            alpha: 1e-6,
        };
        let powers = multi_step_transitions(&p, 2).unwrap();
        let v2 = max_reachability(&powers, 2).unwrap();
        assert_eq!(v2.values(), &array![[0.0, 1.0], [1.0, 0.0]]);
    }

    #[test]
    fn horizon_one_reachability_equals_p() {
        let p = small_random_transition(6, 2, 3);
        let powers = multi_step_transitions(&p, 1).unwrap();
        let v1 = min_reachability(&powers, 1).unwrap();
        let v2 = max_reachability(&powers, 1).unwrap();
        assert_eq!(v1.values(), p.values());
        assert_eq!(v2.values(), p.values());
    }

    #[test]
    fn min_max_fold_against_enumeration() {
        let p = small_random_transition(8, 2, 11);
        let n = 4;
        let powers = multi_step_transitions(&p, n).unwrap();
        let v1 = min_reachability(&powers, n).unwrap();
        let v2 = max_reachability(&powers, n).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let mut lo = f64::INFINITY;
                let mut hi = 0.0f64;
                for t in 1..=n {
                    let entry = path_sum(p.values(), t, i, j);
                    if entry > REACHABILITY_EPS {
                        lo = lo.min(entry);
                        hi = hi.max(entry);
                    }
                }
                let expected_min = if i == j || lo.is_infinite() { 0.0 } else { lo };
                let expected_max = if i == j { 0.0 } else { hi };
                assert!((v1.values()[[i, j]] - expected_min).abs() < 1e-12);
                assert!((v2.values()[[i, j]] - expected_max).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn incremental_fold_matches_materialized() {
        let p = small_random_transition(10, 3, 5);
        let n = 7;
        let powers = multi_step_transitions(&p, n).unwrap();
        let v1 = min_reachability(&powers, n).unwrap();
        let v2 = max_reachability(&powers, n).unwrap();
        let (f1, f2) = reachability_pair(&p, n).unwrap();
        assert_eq!(v1, f1);
        assert_eq!(v2, f2);
    }

    #[test]
    fn powers_length_is_checked() {
        let p = small_random_transition(5, 2, 1);
        let powers = multi_step_transitions(&p, 2).unwrap();
        assert!(matches!(
            min_reachability(&powers, 3),
            Err(Error::PowersLengthMismatch { .. })
        ));
    }

    #[test]
    fn row_normalize_simple() {
        let v = ReachabilityMatrix {
            values: array![[0.0, 0.2, 0.3], [0.0, 0.0, 0.0], [0.5, 0.5, 0.0]],
            variant: ReachabilityVariant::Min,
            horizon: 1,
        };
        let (normed, warnings) = row_normalize(&v);
        assert!((normed.values()[[0, 1]] - 0.4).abs() < 1e-15);
        assert!((normed.values()[[0, 2]] - 0.6).abs() < 1e-15);
        // already-stochastic row unchanged
        assert_eq!(normed.values()[[2, 0]], 0.5);
        // zero row untouched and reported
        assert_eq!(warnings, vec![1]);
        assert!(normed.values().row(1).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn template_permutation_selects_instances() {
        let x = matrix_from_instances(&[&[1.0, 10.0], &[2.0, 20.0], &[3.0, 30.0]]);
        // V with a single 1 per row picks out instance sigma(i).
        let v = ReachabilityMatrix {
            values: array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]],
            variant: ReachabilityVariant::Max,
            horizon: 1,
        };
        let f = build_template(&v, &x).unwrap();
        assert_eq!(f.values().row(0).to_vec(), vec![2.0, 20.0]);
        assert_eq!(f.values().row(1).to_vec(), vec![3.0, 30.0]);
        assert_eq!(f.values().row(2).to_vec(), vec![1.0, 10.0]);
    }

    #[test]
    fn template_uniform_row_averages_neighbors() {
        let x = matrix_from_instances(&[&[1.0], &[3.0], &[5.0]]);
        let v = ReachabilityMatrix {
            values: array![[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]],
            variant: ReachabilityVariant::Max,
            horizon: 1,
        };
        let f = build_template(&v, &x).unwrap();
        assert!((f.values()[[0, 0]] - 4.0).abs() < 1e-15);
        assert!((f.values()[[1, 0]] - 3.0).abs() < 1e-15);
        assert!((f.values()[[2, 0]] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn template_matches_naive_matmul() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let n = 5;
        let d = 3;
        let mut v = Array2::zeros((n, n));
        v.mapv_inplace(|_: f64| rng.gen_range(0.0..1.0));
        for i in 0..n {
            v[[i, i]] = 0.0;
        }
        let mut xv = Array2::zeros((d, n));
        xv.mapv_inplace(|_: f64| rng.gen_range(-2.0..2.0));
        let x = DataMatrix::from_values(xv.clone()).unwrap();
        let reach = ReachabilityMatrix {
            values: v.clone(),
            variant: ReachabilityVariant::Min,
            horizon: 1,
        };
        let f = build_template(&reach, &x).unwrap();
        for i in 0..n {
            for j in 0..d {
                let mut acc = 0.0;
                for m in 0..n {
                    acc += v[[i, m]] * xv[[j, m]];
                }
                assert!((f.values()[[i, j]] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn template_shape_mismatch_is_rejected() {
        let x = matrix_from_instances(&[&[1.0], &[3.0]]);
        let v = ReachabilityMatrix {
            values: Array2::zeros((3, 3)),
            variant: ReachabilityVariant::Min,
            horizon: 1,
        };
        assert!(matches!(
            build_template(&v, &x),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
