//! The two-stage anomaly-ranking procedure.
//!
//! Stage 1 turns the unsupervised problem into a two-sample one: draw a
//! synthetic negative sample (uniform on the cube, or the dilated radial law
//! enclosing the data), label it 0 against the observed points' 1, and train
//! scorers across a grid of penalty weights, keeping the one with the highest
//! two-sample rank statistic on the training pool. Stage 2 scores a test
//! sample and flags the `n_lowest` worst-scored points as anomalies.

use crate::datagen::{
    compute_rad, dilate, make_train_set, sample_radlaw, sample_uniform_cube, RadLawParams, Sample,
    LABEL_NORMAL, LABEL_OUTLIER,
};
use crate::error::{Error, Result};
use crate::model::{train, EpochTrace, EvalHook, MlpScorer, TrainConfig};
use crate::rankstats::ScoredPair;
use crate::rng::split_seed;
use crate::scoregen::ScoreGen;

/// How stage 1 generates its synthetic negative sample.
#[derive(Debug, Clone, PartialEq)]
pub enum NegativeSampler {
    /// Uniform on [0,1]^d (the theory setting).
    UniformCube,
    /// Radial Beta law dilated by (rad + epsilon), rad being the largest
    /// norm among the observed points (the experiment setting).
    DilatedRadLaw { params: RadLawParams, epsilon: f64 },
}

/// Stage-1 hyperparameters: the training grid and everything shared by the
/// per-lambda runs.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub sampler: NegativeSampler,
    pub lambda_grid: Vec<f64>,
    pub phi: ScoreGen,
    pub epochs: usize,
    pub learning_rate: f64,
}

/// One trained model of the lambda grid.
#[derive(Debug, Clone)]
pub struct LambdaRun {
    pub lambda: f64,
    pub model: MlpScorer,
    pub traces: Vec<EpochTrace>,
    /// The true rank statistic of the trained model on the training pool.
    pub w_phi: f64,
    /// Exactly tied score pairs in the pooled training scores. Ties violate
    /// the continuity assumption behind the rank statistic (the ≤-counting
    /// rank of every member of a tied group is inflated to the group's top),
    /// so a nonzero count marks `w_phi` as untrustworthy.
    pub pooled_ties: u64,
}

/// Everything stage 1 produced: the per-lambda runs, which one was selected,
/// and the synthetic negatives (kept for downstream curve estimation).
#[derive(Debug, Clone)]
pub struct Stage1Fit {
    pub runs: Vec<LambdaRun>,
    pub selected: usize,
    pub negatives: Sample,
}

impl Stage1Fit {
    pub fn selected_run(&self) -> &LambdaRun {
        &self.runs[self.selected]
    }
}

/// A test sample ordered by ascending score, with the `n_lowest` worst
/// flagged as anomalies.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedTestSet {
    indices: Vec<usize>,
    scores: Vec<f64>,
    n_lowest: usize,
}

impl RankedTestSet {
    /// Test indices sorted by ascending score (ties by original index).
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Scores in the same (ascending) order as [`Self::indices`].
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// The flagged (worst-scored) test indices.
    pub fn flagged(&self) -> &[usize] {
        &self.indices[..self.n_lowest]
    }

    pub fn n_lowest(&self) -> usize {
        self.n_lowest
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Indices of `scores` in ascending score order, ties broken by index.
pub fn rank_indices(scores: &[f64]) -> Result<Vec<usize>> {
    if scores.iter().any(|v| v.is_nan()) {
        return Err(Error::domain("scores must not contain NaN"));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| {
        scores[i]
            .partial_cmp(&scores[j])
            .expect("no NaN scores")
            .then(i.cmp(&j))
    });
    Ok(idx)
}

fn validate_normals(normals: &Sample) -> Result<()> {
    if normals.is_empty() {
        return Err(Error::params("stage 1 needs a nonempty observed sample"));
    }
    if let Some(labels) = normals.labels() {
        if labels.iter().any(|&l| l != LABEL_NORMAL) {
            return Err(Error::params(
                "stage 1 expects unlabeled observations (or all labeled 1)",
            ));
        }
    }
    Ok(())
}

/// Draw the synthetic negative sample for a given observed sample.
pub fn draw_negatives(
    normals: &Sample,
    m: usize,
    sampler: &NegativeSampler,
    seed: u64,
) -> Result<Sample> {
    match sampler {
        NegativeSampler::UniformCube => sample_uniform_cube(m, normals.dim(), seed),
        NegativeSampler::DilatedRadLaw { params, epsilon } => {
            if !(epsilon.is_finite() && *epsilon >= 0.0) {
                return Err(Error::params(format!(
                    "dilation epsilon must be nonnegative, got {epsilon}"
                )));
            }
            let rad = compute_rad(normals)?;
            dilate(&sample_radlaw(m, normals.dim(), *params, seed)?, rad + epsilon)
        }
    }
}

/// Train one model per lambda on an already-labeled training set and select
/// the one with the highest rank statistic on the training pool.
///
/// All runs share the training seed, hence the initialization and shuffle
/// order: grid entries differ only in the penalty, which keeps per-lambda
/// comparisons paired. The optional hook is forwarded to every run for
/// per-epoch evaluation. Returns the runs and the selected index.
pub fn fit_grid(
    train_set: &Sample,
    cfg: &FitConfig,
    train_seed: u64,
    eval_hook: Option<EvalHook<'_>>,
) -> Result<(Vec<LambdaRun>, usize)> {
    let labels = train_set
        .labels()
        .ok_or_else(|| Error::params("grid fitting needs labeled data"))?;
    let n = labels.iter().filter(|&&y| y == LABEL_NORMAL).count();
    if n == 0 || n == labels.len() {
        return Err(Error::params(
            "grid fitting needs both observed (1) and negative (0) points",
        ));
    }
    if cfg.lambda_grid.is_empty() {
        return Err(Error::params("the lambda grid must be nonempty"));
    }
    let mut runs = Vec::with_capacity(cfg.lambda_grid.len());
    for &lambda in &cfg.lambda_grid {
        let tc = TrainConfig {
            epochs: cfg.epochs,
            lambda,
            phi: cfg.phi,
            learning_rate: cfg.learning_rate,
            seed: train_seed,
        };
        let (model, traces) = train(train_set, &tc, eval_hook)?;
        let scores = model.score_sample(train_set)?;
        let (mut observed, mut negative) = (Vec::with_capacity(n), Vec::new());
        for (&s, &y) in scores.iter().zip(labels) {
            if y == LABEL_NORMAL {
                observed.push(s);
            } else {
                negative.push(s);
            }
        }
        let pair = ScoredPair::new(observed, negative)?;
        let pooled_ties = pair.tie_count();
        let w_phi = pair.w_phi_stat(&cfg.phi)?;
        runs.push(LambdaRun { lambda, model, traces, w_phi, pooled_ties });
    }
    let selected = select_run(&runs);
    Ok((runs, selected))
}

/// Argmax of the rank statistic over the grid runs; the first maximizer wins
/// on exact ties.
///
/// Runs whose pooled training scores contain exact ties are disqualified:
/// groups of tied scores all take the group's highest ≤-rank, so a scorer
/// that collapses (e.g. saturates every input to one clamped value) would
/// report a statistic above the untied maximum and hijack the selection while
/// ranking nothing. If every run is tied, the plain argmax decides.
fn select_run(runs: &[LambdaRun]) -> usize {
    let argmax = |rs: &mut dyn Iterator<Item = (usize, &LambdaRun)>| {
        rs.max_by(|(i, a), (j, b)| {
            a.w_phi
                .partial_cmp(&b.w_phi)
                .expect("rank statistics are finite")
                .then(j.cmp(i))
        })
        .map(|(i, _)| i)
    };
    if let Some(i) = argmax(&mut runs.iter().enumerate().filter(|(_, r)| r.pooled_ties == 0)) {
        return i;
    }
    log::warn!(
        "every lambda run has tied pooled scores; selecting on inflated rank statistics"
    );
    argmax(&mut runs.iter().enumerate()).expect("nonempty grid")
}

/// Stage 1 in full: generate negatives, fit the lambda grid, report the
/// selection and the negatives used.
pub fn stage1_fit_full(
    normals: &Sample,
    m: usize,
    cfg: &FitConfig,
    seed: u64,
    eval_hook: Option<EvalHook<'_>>,
) -> Result<Stage1Fit> {
    validate_normals(normals)?;
    if m == 0 {
        return Err(Error::params("stage 1 needs at least one synthetic negative"));
    }
    let negatives = draw_negatives(normals, m, &cfg.sampler, split_seed(seed, 0))?;
    let train_set = make_train_set(normals, &negatives)?;
    let (runs, selected) = fit_grid(&train_set, cfg, split_seed(seed, 1), eval_hook)?;
    Ok(Stage1Fit { runs, selected, negatives })
}

/// Stage 1, returning just the selected scorer.
pub fn stage1_fit(normals: &Sample, m: usize, cfg: &FitConfig, seed: u64) -> Result<MlpScorer> {
    Ok(stage1_fit_full(normals, m, cfg, seed, None)?
        .selected_run()
        .model
        .clone())
}

/// Stage 2: score the test sample, order it ascending, flag the worst
/// `n_lowest` points.
pub fn stage2_rank(model: &MlpScorer, test: &Sample, n_lowest: usize) -> Result<RankedTestSet> {
    if n_lowest == 0 || n_lowest > test.len() {
        return Err(Error::params(format!(
            "n_lowest must lie in [1, {}], got {n_lowest}",
            test.len()
        )));
    }
    let raw = model.score_sample(test)?;
    let indices = rank_indices(&raw)?;
    let scores = indices.iter().map(|&i| raw[i]).collect();
    Ok(RankedTestSet { indices, scores, n_lowest })
}

/// Fraction of true outliers (label 0) among the `n_lowest` worst-scored
/// test points.
pub fn accuracy_at(ranked: &RankedTestSet, test: &Sample, n_lowest: usize) -> Result<f64> {
    let labels = test
        .labels()
        .ok_or_else(|| Error::params("accuracy needs a labeled test sample"))?;
    if ranked.len() != test.len() {
        return Err(Error::params(format!(
            "ranked set covers {} points but the test sample has {}",
            ranked.len(),
            test.len()
        )));
    }
    if n_lowest == 0 || n_lowest > ranked.len() {
        return Err(Error::params(format!(
            "n_lowest must lie in [1, {}], got {n_lowest}",
            ranked.len()
        )));
    }
    let hits = ranked.indices[..n_lowest]
        .iter()
        .filter(|&&i| labels[i] == LABEL_OUTLIER)
        .count();
    Ok(hits as f64 / n_lowest as f64)
}
