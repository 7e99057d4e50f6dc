//! The three selection algorithms: run the structure pipeline, rank features
//! by the row norms of the fitted projection, and produce selected subsets.

use std::collections::HashSet;
use std::io::Write;
use std::str::FromStr;

use ndarray::Array2;
use serde::Serialize;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::markov::{
    self, Denominator, ReachabilityMatrix, Template, TransitionModel,
};
use crate::solver::{self, SolverConfig, SolverState};

/// Selection algorithm variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Rank ascending: drop features that preserve the loose structure.
    #[serde(rename = "minP")]
    MinP,
    /// Rank descending: keep features that preserve the compact structure.
    #[serde(rename = "maxP")]
    MaxP,
    /// Intersection-first combination of the two rankings.
    #[serde(rename = "inter")]
    Inter,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Variant::MinP => "minP",
            Variant::MaxP => "maxP",
            Variant::Inter => "inter",
        };
        f.write_str(name)
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "minp" => Ok(Variant::MinP),
            "maxp" => Ok(Variant::MaxP),
            "inter" => Ok(Variant::Inter),
            other => Err(format!(
                "unknown variant {other:?}; expected minP, maxP, or inter"
            )),
        }
    }
}

/// Graph-side parameters of the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineParams {
    /// Neighbor count for the kNN graph.
    pub k: usize,
    /// Distance smoothing constant in the one-step weights.
    pub alpha: f64,
    /// Step horizon n for the reachability fold.
    pub n_steps: usize,
    pub denominator: Denominator,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            k: 5,
            alpha: 1e-6,
            n_steps: 10,
            denominator: Denominator::Neighbors,
        }
    }
}

/// Ranked feature indices with scores and the selected prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub variant: Variant,
    pub s: usize,
    /// First s entries of the ranking.
    pub selected: Vec<usize>,
    /// Full ranking over all d features (not serialized; `selected` is its
    /// prefix).
    #[serde(skip)]
    pub ranking: Vec<usize>,
    /// Row norm of W per feature; for the inter variant these are the maxP
    /// scores its internal ordering uses.
    pub scores: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl SelectionResult {
    /// Ranks scores for a min or max variant and takes the first s features.
    pub fn from_scores(
        variant: Variant,
        scores: Vec<f64>,
        feature_names: Vec<String>,
        s: usize,
    ) -> Result<Self> {
        let d = scores.len();
        if s < 1 || s > d {
            return Err(Error::SOutOfRange { s, d });
        }
        if feature_names.len() != d {
            return Err(Error::FeatureNameCount {
                got: feature_names.len(),
                d,
            });
        }
        if !scores.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::NonFinite {
                context: "feature scores",
            });
        }
        let ascending = match variant {
            Variant::MinP => true,
            Variant::MaxP => false,
            Variant::Inter => {
                return Err(Error::SelectionMismatch {
                    reason: "inter results are built by select_inter".to_string(),
                })
            }
        };
        let ranking = rank_by_score(&scores, ascending);
        let selected = ranking[..s].to_vec();
        Ok(Self {
            variant,
            s,
            selected,
            ranking,
            scores,
            feature_names,
        })
    }

    /// The same ranking truncated to a different subset size.
    pub fn with_s(&self, s: usize) -> Result<Self> {
        let d = self.scores.len();
        if s < 1 || s > d {
            return Err(Error::SOutOfRange { s, d });
        }
        let mut out = self.clone();
        out.s = s;
        out.selected = out.ranking[..s].to_vec();
        Ok(out)
    }

    /// Names of the selected features, in rank order.
    pub fn selected_names(&self) -> Vec<&str> {
        self.selected
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection result serializes")
    }

    /// Two-column CSV of the selected features: rank, feature name.
    pub fn write_rank_csv(&self, mut writer: impl Write) -> Result<()> {
        let io_err = |source: std::io::Error| Error::Io {
            path: "<writer>".to_string(),
            source,
        };
        writeln!(writer, "rank,feature_name").map_err(io_err)?;
        for (rank, &idx) in self.selected.iter().enumerate() {
            writeln!(writer, "{},{}", rank + 1, self.feature_names[idx]).map_err(io_err)?;
        }
        Ok(())
    }
}

/// Indices 0..d sorted by score (ascending or descending), ties broken by
/// ascending index.
fn rank_by_score(scores: &[f64], ascending: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let cmp = scores[a].partial_cmp(&scores[b]).expect("finite scores");
        let cmp = if ascending { cmp } else { cmp.reverse() };
        cmp.then(a.cmp(&b))
    });
    order
}

/// Euclidean norm of each row of W.
pub fn feature_scores(w: &Array2<f64>) -> Vec<f64> {
    w.rows()
        .into_iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect()
}

/// The shared stages of a pipeline run: transition model plus both
/// normalized reachability matrices, kept around for inspection dumps.
#[derive(Debug, Clone)]
pub struct PipelineStages {
    pub model: TransitionModel,
    pub reach_min: ReachabilityMatrix,
    pub reach_max: ReachabilityMatrix,
    /// Rows of V1/V2 that were all-zero before normalization.
    pub zero_rows_min: Vec<usize>,
    pub zero_rows_max: Vec<usize>,
}

/// One variant's solve: the solver state and the resulting selection.
#[derive(Debug, Clone)]
pub struct VariantRun {
    pub state: SolverState,
    pub result: SelectionResult,
}

impl PipelineStages {
    /// Distances, kNN graph, one-step transition, reachability fold, and row
    /// normalization. Both reachability variants come from one fold pass.
    pub fn build(x: &DataMatrix, params: &PipelineParams) -> Result<Self> {
        let model = TransitionModel::build(x, params.k, params.alpha, params.denominator)?;
        Self::from_model(model, params.n_steps)
    }

    /// Folds reachability over an already-built transition model; lets a
    /// caller sweep the step horizon without rebuilding the graph.
    pub fn from_model(model: TransitionModel, n_steps: usize) -> Result<Self> {
        let (v1, v2) = markov::reachability_pair(&model.transition, n_steps)?;
        let (reach_min, zero_rows_min) = markov::row_normalize(&v1);
        let (reach_max, zero_rows_max) = markov::row_normalize(&v2);
        Ok(Self {
            model,
            reach_min,
            reach_max,
            zero_rows_min,
            zero_rows_max,
        })
    }

    fn solve(
        &self,
        x: &DataMatrix,
        reach: &ReachabilityMatrix,
        variant: Variant,
        config: &SolverConfig,
        s: usize,
    ) -> Result<VariantRun> {
        let template: Template = markov::build_template(reach, x)?;
        let state = solver::solve_irls(x, &template, config)?;
        let scores = feature_scores(&state.w);
        let result =
            SelectionResult::from_scores(variant, scores, x.feature_names().to_vec(), s)?;
        Ok(VariantRun { state, result })
    }

    /// Fit against the min-reachability template and rank ascending.
    pub fn solve_min(&self, x: &DataMatrix, config: &SolverConfig, s: usize) -> Result<VariantRun> {
        self.solve(x, &self.reach_min, Variant::MinP, config, s)
    }

    /// Fit against the max-reachability template and rank descending.
    pub fn solve_max(&self, x: &DataMatrix, config: &SolverConfig, s: usize) -> Result<VariantRun> {
        self.solve(x, &self.reach_max, Variant::MaxP, config, s)
    }
}

/// Full min-probability pipeline; features that best preserve the loose
/// structure rank last, so the ascending prefix drops them.
pub fn select_min_p(
    x: &DataMatrix,
    params: &PipelineParams,
    config: &SolverConfig,
    s: usize,
) -> Result<SelectionResult> {
    let stages = PipelineStages::build(x, params)?;
    Ok(stages.solve_min(x, config, s)?.result)
}

/// Full max-probability pipeline; ranking is descending.
pub fn select_max_p(
    x: &DataMatrix,
    params: &PipelineParams,
    config: &SolverConfig,
    s: usize,
) -> Result<SelectionResult> {
    let stages = PipelineStages::build(x, params)?;
    Ok(stages.solve_max(x, config, s)?.result)
}

/// Combines a min and a max selection of the same size.
///
/// The intersection of the two selected sets comes first, ordered by maxP
/// score descending. When it falls short of s, the remainder alternates
/// between the two full rankings starting with maxP, skipping features
/// already chosen, which gives maxP the ceiling of an odd split.
pub fn select_inter(
    result_min: &SelectionResult,
    result_max: &SelectionResult,
    s: usize,
) -> Result<SelectionResult> {
    let d = result_max.scores.len();
    if result_min.scores.len() != d || result_min.feature_names != result_max.feature_names {
        return Err(Error::SelectionMismatch {
            reason: "min and max results describe different feature sets".to_string(),
        });
    }
    if result_min.variant != Variant::MinP || result_max.variant != Variant::MaxP {
        return Err(Error::SelectionMismatch {
            reason: "select_inter expects a minP result and a maxP result".to_string(),
        });
    }
    if result_min.s != s || result_max.s != s {
        return Err(Error::SelectionMismatch {
            reason: format!(
                "both inputs must have s = {s}, got {} and {}",
                result_min.s, result_max.s
            ),
        });
    }
    if s < 1 || s > d {
        return Err(Error::SOutOfRange { s, d });
    }

    let min_set: HashSet<usize> = result_min.selected.iter().copied().collect();
    // Intersection in maxP order: result_max.selected is already sorted by
    // score descending with index tie-breaks.
    let intersection: Vec<usize> = result_max
        .selected
        .iter()
        .copied()
        .filter(|idx| min_set.contains(idx))
        .collect();

    let mut selected: Vec<usize>;
    if intersection.len() >= s {
        selected = intersection[..s].to_vec();
    } else {
        selected = intersection.clone();
        let mut chosen: HashSet<usize> = selected.iter().copied().collect();
        let mut max_cursor = 0usize;
        let mut min_cursor = 0usize;
        let mut from_max = true;
        while selected.len() < s {
            let (ranking, cursor) = if from_max {
                (&result_max.ranking, &mut max_cursor)
            } else {
                (&result_min.ranking, &mut min_cursor)
            };
            while chosen.contains(&ranking[*cursor]) {
                *cursor += 1;
            }
            let feature = ranking[*cursor];
            chosen.insert(feature);
            selected.push(feature);
            from_max = !from_max;
        }
    }

    // Ranking: the selection in pick order, then the rest by maxP order.
    let chosen: HashSet<usize> = selected.iter().copied().collect();
    let mut ranking = selected.clone();
    ranking.extend(
        result_max
            .ranking
            .iter()
            .copied()
            .filter(|idx| !chosen.contains(idx)),
    );

    Ok(SelectionResult {
        variant: Variant::Inter,
        s,
        selected,
        ranking,
        scores: result_max.scores.clone(),
        feature_names: result_max.feature_names.clone(),
    })
}
