//! Clustering-based evaluation of selected feature subsets: seeded k-means,
//! accuracy under the optimal cluster-to-class assignment, normalized mutual
//! information, and repeated-trial statistics.

use std::io::Write;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{DataMatrix, LabeledDataset};
use crate::error::{Error, Result};
use crate::select::{self, PipelineParams, SelectionResult, Variant};
use crate::solver::SolverConfig;

const KMEANS_MAX_ITER: usize = 300;

/// One k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringRun {
    /// Cluster index per instance, in [0, c).
    pub predicted: Vec<usize>,
    pub seed: u64,
    /// Final within-cluster sum of squared distances.
    pub inertia: f64,
}

/// How the mutual information is scaled to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalization {
    /// Arithmetic mean of the two entropies (default).
    #[default]
    Arithmetic,
    /// Geometric mean, for comparison against older published numbers.
    Geometric,
}

/// Mean and population standard deviation of ACC and NMI, in percent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsetStats {
    pub acc_mean: f64,
    pub acc_std: f64,
    pub nmi_mean: f64,
    pub nmi_std: f64,
}

/// One feature count of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub feature_count: usize,
    pub stats: SubsetStats,
}

/// Sweep results across feature counts.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variant: Variant,
    pub repeats: usize,
    pub rows: Vec<SweepRow>,
}

impl EvalReport {
    /// CSV rows of feature_count, acc_mean, acc_std, nmi_mean, nmi_std in
    /// percent with two decimals. A leading comment line records the trial
    /// count and that std is the population standard deviation.
    pub fn write_csv(&self, mut writer: impl Write) -> Result<()> {
        let io_err = |source: std::io::Error| Error::Io {
            path: "<writer>".to_string(),
            source,
        };
        writeln!(
            writer,
            "# variant={}; repeats={}; values in percent; std = population standard deviation",
            self.variant, self.repeats
        )
        .map_err(io_err)?;
        writeln!(writer, "feature_count,acc_mean,acc_std,nmi_mean,nmi_std").map_err(io_err)?;
        for row in &self.rows {
            writeln!(
                writer,
                "{},{:.2},{:.2},{:.2},{:.2}",
                row.feature_count,
                row.stats.acc_mean,
                row.stats.acc_std,
                row.stats.nmi_mean,
                row.stats.nmi_std
            )
            .map_err(io_err)?;
        }
        Ok(())
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Lloyd's algorithm with seeded random-point initialization.
///
/// Points are rows. Iterates to an assignment fixed point or 300 iterations.
/// An empty cluster is re-seeded with the point farthest from its currently
/// assigned center, never stealing a cluster's only member. Deterministic
/// given (points, c, seed).
pub fn kmeans(points: &Array2<f64>, c: usize, seed: u64) -> Result<ClusteringRun> {
    let n = points.nrows();
    let m = points.ncols();
    if c < 1 || c > n {
        return Err(Error::ClusterCountOutOfRange { c, n });
    }
    let points = points.as_standard_layout();

    // Partial Fisher-Yates draw of c distinct starting points.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for t in 0..c {
        let pick = t + rng.gen_range(0..n - t);
        indices.swap(t, pick);
    }
    let mut centers = Array2::zeros((c, m));
    for (center, &idx) in indices[..c].iter().enumerate() {
        centers.row_mut(center).assign(&points.row(idx));
    }

    let mut assignment = vec![usize::MAX; n];
    for _ in 0..KMEANS_MAX_ITER {
        // Assignment step; strict < keeps the lowest center index on ties.
        let next: Vec<usize> = (0..n)
            .map(|i| {
                let p = points.row(i);
                let p = p.as_slice().expect("standard layout");
                let mut best = 0usize;
                let mut best_dist = f64::INFINITY;
                for center in 0..c {
                    let cr = centers.row(center);
                    let dist = squared_distance(p, cr.as_slice().expect("standard layout"));
                    if dist < best_dist {
                        best_dist = dist;
                        best = center;
                    }
                }
                best
            })
            .collect();

        let mut next = next;
        // Re-seed empty clusters deterministically.
        let mut sizes = vec![0usize; c];
        for &a in &next {
            sizes[a] += 1;
        }
        let mut reseeded: Vec<usize> = Vec::new();
        for center in 0..c {
            if sizes[center] > 0 {
                continue;
            }
            let mut far_idx = usize::MAX;
            let mut far_dist = -1.0;
            for i in 0..n {
                if reseeded.contains(&i) || sizes[next[i]] <= 1 {
                    continue;
                }
                let p = points.row(i);
                let cr = centers.row(next[i]);
                let dist = squared_distance(
                    p.as_slice().expect("standard layout"),
                    cr.as_slice().expect("standard layout"),
                );
                if dist > far_dist {
                    far_dist = dist;
                    far_idx = i;
                }
            }
            if far_idx != usize::MAX {
                sizes[next[far_idx]] -= 1;
                next[far_idx] = center;
                sizes[center] += 1;
                reseeded.push(far_idx);
            }
        }

        let stable = next == assignment;
        assignment = next;
        if stable {
            break;
        }

        // Center update.
        centers.fill(0.0);
        let mut counts = vec![0usize; c];
        for (i, &a) in assignment.iter().enumerate() {
            counts[a] += 1;
            centers.row_mut(a).scaled_add(1.0, &points.row(i));
        }
        for (center, &count) in counts.iter().enumerate() {
            if count > 0 {
                centers
                    .row_mut(center)
                    .mapv_inplace(|v| v / count as f64);
            }
        }
    }

    let inertia = assignment
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            squared_distance(
                points.row(i).as_slice().expect("standard layout"),
                centers.row(a).as_slice().expect("standard layout"),
            )
        })
        .sum();

    Ok(ClusteringRun {
        predicted: assignment,
        seed,
        inertia,
    })
}

/// Maps arbitrary label values to dense 0-based ids in first-occurrence
/// order, returning the id vector and the number of distinct labels.
fn densify(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut map = std::collections::HashMap::new();
    let ids = labels
        .iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect();
    let count = map.len();
    (ids, count)
}

/// Minimum-cost assignment on a square cost matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column assigned to each row.
fn min_cost_assignment(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // row matched to each column, 1-based
    let mut way = vec![0usize; n + 1];

    for row in 1..=n {
        matched_row[0] = row;
        let mut j0 = 0usize;
        let mut min_slack = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if matched_row[j] > 0 {
            row_to_col[matched_row[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Clustering accuracy under the best one-to-one cluster-to-class mapping.
///
/// Builds the contingency matrix, zero-pads it square, and maximizes the
/// matched count with the Kuhn-Munkres assignment.
pub fn hungarian_acc(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let n = predicted.len();
    let (pred_ids, c_pred) = densify(predicted);
    let (true_ids, c_true) = densify(truth);
    let size = c_pred.max(c_true);

    let mut counts = vec![vec![0i64; size]; size];
    for (&p, &t) in pred_ids.iter().zip(&true_ids) {
        counts[p][t] += 1;
    }

    // Maximize matches = minimize negated counts.
    let cost: Vec<Vec<i64>> = counts
        .iter()
        .map(|row| row.iter().map(|&v| -v).collect())
        .collect();
    let assignment = min_cost_assignment(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(row, &col)| counts[row][col])
        .sum();
    Ok(matched as f64 / n as f64)
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information with the arithmetic-mean normalizer.
pub fn nmi(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    nmi_with(predicted, truth, NmiNormalization::Arithmetic)
}

/// NMI with an explicit normalizer.
///
/// Natural logs throughout. Two single-cluster partitions are identical up
/// to relabeling and score 1; a single-cluster partition against a split one
/// has zero mutual information and scores 0.
pub fn nmi_with(
    predicted: &[usize],
    truth: &[usize],
    normalization: NmiNormalization,
) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: truth.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let n = predicted.len() as f64;
    let (pred_ids, c_pred) = densify(predicted);
    let (true_ids, c_true) = densify(truth);
    // Densified ids canonicalize partitions, so equality here means the
    // partitions are identical up to relabeling.
    if pred_ids == true_ids {
        return Ok(1.0);
    }

    let mut pred_counts = vec![0usize; c_pred];
    let mut true_counts = vec![0usize; c_true];
    let mut joint = vec![vec![0usize; c_true]; c_pred];
    for (&p, &t) in pred_ids.iter().zip(&true_ids) {
        pred_counts[p] += 1;
        true_counts[t] += 1;
        joint[p][t] += 1;
    }

    let mut mi = 0.0;
    for p in 0..c_pred {
        for t in 0..c_true {
            let c = joint[p][t];
            if c == 0 {
                continue;
            }
            let p_joint = c as f64 / n;
            let p_pred = pred_counts[p] as f64 / n;
            let p_true = true_counts[t] as f64 / n;
            mi += p_joint * (p_joint / (p_pred * p_true)).ln();
        }
    }
    let mi = mi.max(0.0);

    let h_pred = entropy(&pred_counts, n);
    let h_true = entropy(&true_counts, n);
    let normalizer = match normalization {
        NmiNormalization::Arithmetic => 0.5 * (h_pred + h_true),
        NmiNormalization::Geometric => (h_pred * h_true).sqrt(),
    };
    if normalizer <= 0.0 || mi == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / normalizer).clamp(0.0, 1.0))
}

fn mean_and_population_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Runs k-means `repeats` times with seeds base_seed..base_seed+repeats-1 on
/// the selected feature rows and aggregates ACC/NMI in percent.
pub fn evaluate_subset(
    x: &DataMatrix,
    selected: &[usize],
    truth: &[usize],
    c: usize,
    repeats: usize,
    base_seed: u64,
) -> Result<SubsetStats> {
    evaluate_subset_with(
        x,
        selected,
        truth,
        c,
        repeats,
        base_seed,
        NmiNormalization::Arithmetic,
    )
}

pub fn evaluate_subset_with(
    x: &DataMatrix,
    selected: &[usize],
    truth: &[usize],
    c: usize,
    repeats: usize,
    base_seed: u64,
    normalization: NmiNormalization,
) -> Result<SubsetStats> {
    if repeats == 0 {
        return Err(Error::ZeroRepeats);
    }
    if truth.len() != x.instance_count() {
        return Err(Error::LabelLengthMismatch {
            got: truth.len(),
            instances: x.instance_count(),
        });
    }
    let restricted = x.restrict(selected)?;
    let points = restricted
        .values()
        .t()
        .as_standard_layout()
        .to_owned();

    let runs: Result<Vec<(f64, f64)>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let run = kmeans(&points, c, base_seed + r as u64)?;
            let acc = hungarian_acc(&run.predicted, truth)?;
            let nmi_val = nmi_with(&run.predicted, truth, normalization)?;
            Ok((acc, nmi_val))
        })
        .collect();
    let runs = runs?;

    let accs: Vec<f64> = runs.iter().map(|(a, _)| a * 100.0).collect();
    let nmis: Vec<f64> = runs.iter().map(|(_, m)| m * 100.0).collect();
    let (acc_mean, acc_std) = mean_and_population_std(&accs);
    let (nmi_mean, nmi_std) = mean_and_population_std(&nmis);
    Ok(SubsetStats {
        acc_mean,
        acc_std,
        nmi_mean,
        nmi_std,
    })
}

/// Runs selection once, then evaluates ranking prefixes at each feature
/// count. The cluster count is the dataset's class count.
#[allow(clippy::too_many_arguments)]
pub fn benchmark_sweep(
    dataset: &LabeledDataset,
    variant: Variant,
    feature_counts: &[usize],
    params: &PipelineParams,
    solver: &SolverConfig,
    repeats: usize,
    base_seed: u64,
    normalization: NmiNormalization,
) -> Result<EvalReport> {
    let truth = dataset.label_ids().ok_or(Error::MissingLabels)?;
    let c = dataset.class_count().ok_or(Error::MissingLabels)?;
    let x = &dataset.data;
    let d = x.feature_count();
    if feature_counts.is_empty() {
        return Err(Error::EmptySelection);
    }
    for &count in feature_counts {
        if count == 0 || count > d {
            return Err(Error::CountExceedsFeatures { count, d });
        }
    }
    let max_count = *feature_counts.iter().max().unwrap();

    let stages = select::PipelineStages::build(x, params)?;
    let (result_min, result_max) = match variant {
        Variant::MinP => (Some(stages.solve_min(x, solver, max_count)?.result), None),
        Variant::MaxP => (None, Some(stages.solve_max(x, solver, max_count)?.result)),
        Variant::Inter => (
            Some(stages.solve_min(x, solver, max_count)?.result),
            Some(stages.solve_max(x, solver, max_count)?.result),
        ),
    };

    let mut rows = Vec::with_capacity(feature_counts.len());
    for &count in feature_counts {
        let selection: SelectionResult = match variant {
            Variant::MinP => result_min.as_ref().unwrap().with_s(count)?,
            Variant::MaxP => result_max.as_ref().unwrap().with_s(count)?,
            Variant::Inter => {
                let rmin = result_min.as_ref().unwrap().with_s(count)?;
                let rmax = result_max.as_ref().unwrap().with_s(count)?;
                select::select_inter(&rmin, &rmax, count)?
            }
        };
        let stats = evaluate_subset_with(
            x,
            &selection.selected,
            &truth,
            c,
            repeats,
            base_seed,
            normalization,
        )?;
        rows.push(SweepRow {
            feature_count: count,
            stats,
        });
    }

    Ok(EvalReport {
        variant,
        repeats,
        rows,
    })
}
