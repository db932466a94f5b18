//! The experiment pipeline behind the command-line subcommands.
//!
//! Four entry points mirror the pipeline stages: `cmd_generate` materializes
//! one train/test dataset pair, `cmd_train` fits the lambda grid on a data
//! file, `cmd_evaluate` ranks a labeled test file with a saved model, and
//! `cmd_reproduce` repeats the whole pipeline `repetitions` times with split
//! seeds and writes the aggregated artifacts (accuracy summary, averaged MV
//! curve, score heatmap, per-epoch traces).
//!
//! Everything is deterministic in the config seed; repetitions may run in
//! parallel and are aggregated in index order, so outputs are byte-identical
//! across thread counts and reruns.

use crate::config::ExperimentConfig;
use crate::datagen::{
    compute_rad, dilate, make_train_set, sample_gaussian, sample_radlaw, sample_uniform_cube,
    RadLawParams, Sample, LABEL_NORMAL,
};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{mlp_new, EpochTrace, MlpScorer};
use crate::mvcurve::{mv_curve_mc, MVCurve};
use crate::procedure::{accuracy_at, fit_grid, stage2_rank, FitConfig, NegativeSampler};
use crate::rankstats::ScoredPair;
use crate::rng::{split_seed, RNG_ALGORITHM};
use rayon::prelude::*;
use std::path::Path;

/// Uniform reference points per MV-curve estimate.
pub const MV_REFERENCE_SIZE: usize = 10_000;
/// Evaluation points of the dense MV-curve grid.
pub const CURVE_GRID: usize = 200;
/// Heatmap resolution per axis.
pub const HEATMAP_GRID: usize = 200;
/// Flagging budget of the per-epoch accuracy trace.
pub const TRACE_N_LOWEST: usize = 75;

// Seed-stream tags, fixed so artifacts stay reproducible across versions.
const STREAM_TRAIN_NORMALS: u64 = 10;
const STREAM_TRAIN_OUTLIERS: u64 = 11;
const STREAM_TEST_NORMALS: u64 = 12;
const STREAM_TEST_OUTLIERS: u64 = 13;
const STREAM_FIT: u64 = 20;
const STREAM_UNTRAINED: u64 = 30;
const STREAM_MV_REFERENCE: u64 = 40;

/// The data of one repetition: a labeled train set (observed normals first,
/// dilated radial-law negatives after), a labeled test set, and the largest
/// observed norm `rad` (the test outliers reuse it for their dilation).
#[derive(Debug, Clone)]
pub struct Datasets {
    pub train: Sample,
    pub test: Sample,
    pub rad: f64,
}

/// Generate the train/test pair for one repetition seed.
pub fn generate_datasets(cfg: &ExperimentConfig, seed: u64) -> Result<Datasets> {
    let normals = sample_gaussian(
        cfg.n,
        cfg.d,
        cfg.variance_scale,
        split_seed(seed, STREAM_TRAIN_NORMALS),
    )?;
    let rad = compute_rad(&normals)?;
    let factor = rad + cfg.epsilon;
    let params = RadLawParams::new(cfg.alpha, cfg.beta)?;
    let outliers = dilate(
        &sample_radlaw(cfg.m, cfg.d, params, split_seed(seed, STREAM_TRAIN_OUTLIERS))?,
        factor,
    )?;
    let train = make_train_set(&normals, &outliers)?;

    let test_normals = sample_gaussian(
        cfg.n_t,
        cfg.d,
        cfg.variance_scale,
        split_seed(seed, STREAM_TEST_NORMALS),
    )?;
    let params_t = RadLawParams::new(cfg.alpha_t, cfg.beta_t)?;
    // The test outliers are dilated by the factor computed on the *training*
    // normals, so both samples live in the same enclosing ball.
    let test_outliers = dilate(
        &sample_radlaw(cfg.m_t, cfg.d, params_t, split_seed(seed, STREAM_TEST_OUTLIERS))?,
        factor,
    )?;
    let test = make_train_set(&test_normals, &test_outliers)?;
    Ok(Datasets { train, test, rad })
}

fn fit_config(cfg: &ExperimentConfig) -> Result<FitConfig> {
    Ok(FitConfig {
        sampler: NegativeSampler::DilatedRadLaw {
            params: RadLawParams::new(cfg.alpha, cfg.beta)?,
            epsilon: cfg.epsilon,
        },
        lambda_grid: cfg.lambda_grid.clone(),
        phi: cfg.phi,
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
    })
}

/// Empirical MV curve of a model over the data's enclosing cube
/// [-(rad+eps), rad+eps]^d: observed mass from the scores of the label-1
/// training points, volume from a uniform reference sample over the cube,
/// scaled back to the cube's true measure.
fn mv_curve_of_model(
    model: &MlpScorer,
    train: &Sample,
    half_width: f64,
    seed: u64,
) -> Result<MVCurve> {
    let labels = train.labels().ok_or_else(|| Error::params("MV estimation needs labels"))?;
    let scores = model.score_sample(train)?;
    let observed: Vec<f64> = scores
        .iter()
        .zip(labels)
        .filter(|(_, &y)| y == LABEL_NORMAL)
        .map(|(&s, _)| s)
        .collect();
    let d = train.dim();
    let unit = sample_uniform_cube(MV_REFERENCE_SIZE, d, seed)?;
    let cube = Sample::from_flat(
        unit.coords().iter().map(|u| (2.0 * u - 1.0) * half_width).collect(),
        d,
        None,
    )?;
    let reference = model.score_sample(&cube)?;
    let curve = mv_curve_mc(&ScoredPair::new(observed, reference)?)?;
    curve.scale_volumes((2.0 * half_width).powi(d as i32))
}

/// Everything produced by one repetition of the pipeline.
#[derive(Debug, Clone)]
pub struct RepetitionOutcome {
    pub rep: usize,
    pub seed: u64,
    pub selected_index: usize,
    pub selected_lambda: f64,
    /// Rank statistic of each trained model, in lambda-grid order.
    pub w_phi: Vec<f64>,
    /// Accuracy of the selected model per n_lowest-grid entry.
    pub acc: Vec<f64>,
    /// Final-model accuracy at the trace budget, per lambda-grid entry.
    pub acc75_per_lambda: Vec<f64>,
    /// Area under the selected model's MV curve, and a fresh untrained
    /// model's for comparison.
    pub auc_selected: f64,
    pub auc_untrained: f64,
    /// The selected model's MV curve on the dense alpha grid.
    pub curve_grid: Vec<f64>,
    pub selected_model: MlpScorer,
    /// Per-epoch traces of every lambda run.
    pub traces: Vec<(f64, Vec<EpochTrace>)>,
}

/// Run one full repetition: generate data, fit the lambda grid, rank the
/// test set, and estimate MV curves.
pub fn run_repetition(cfg: &ExperimentConfig, rep: usize) -> Result<RepetitionOutcome> {
    let rep_seed = split_seed(cfg.seed, rep as u64);
    let data = generate_datasets(cfg, rep_seed)?;
    let test = &data.test;
    let trace_budget = TRACE_N_LOWEST.min(test.len());
    let hook = |model: &MlpScorer| -> Result<f64> {
        let ranked = stage2_rank(model, test, trace_budget)?;
        accuracy_at(&ranked, test, trace_budget)
    };
    let (runs, selected_index) = fit_grid(
        &data.train,
        &fit_config(cfg)?,
        split_seed(rep_seed, STREAM_FIT),
        Some(&hook),
    )?;

    let selected = &runs[selected_index];
    let k_max = *cfg.n_lowest_grid.iter().max().expect("nonempty grid");
    let ranked = stage2_rank(&selected.model, test, k_max)?;
    let acc = cfg
        .n_lowest_grid
        .iter()
        .map(|&k| accuracy_at(&ranked, test, k))
        .collect::<Result<Vec<_>>>()?;
    let acc75_per_lambda = runs
        .iter()
        .map(|run| hook(&run.model))
        .collect::<Result<Vec<_>>>()?;

    let half_width = data.rad + cfg.epsilon;
    let mv_seed = split_seed(rep_seed, STREAM_MV_REFERENCE);
    let curve = mv_curve_of_model(&selected.model, &data.train, half_width, mv_seed)?;
    let untrained = mlp_new(cfg.d, split_seed(rep_seed, STREAM_UNTRAINED))?;
    let untrained_curve = mv_curve_of_model(&untrained, &data.train, half_width, mv_seed)?;
    let curve_grid = (0..CURVE_GRID)
        .map(|i| curve.eval((i as f64 + 0.5) / CURVE_GRID as f64))
        .collect::<Result<Vec<_>>>()?;

    Ok(RepetitionOutcome {
        rep,
        seed: rep_seed,
        selected_index,
        selected_lambda: selected.lambda,
        w_phi: runs.iter().map(|r| r.w_phi).collect(),
        acc,
        acc75_per_lambda,
        auc_selected: curve.auc(),
        auc_untrained: untrained_curve.auc(),
        curve_grid,
        selected_model: selected.model.clone(),
        traces: runs.iter().map(|r| (r.lambda, r.traces.clone())).collect(),
    })
}

/// All repetitions of the pipeline, run in parallel over the current rayon
/// pool. The result vector is indexed by repetition; failed repetitions
/// carry their error text instead of aborting the batch.
pub fn run_reproduction(cfg: &ExperimentConfig) -> Result<Vec<std::result::Result<RepetitionOutcome, String>>> {
    cfg.validate()?;
    Ok((0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| run_repetition(cfg, rep).map_err(|e| e.to_string()))
        .collect())
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Write train.csv and test.csv for the config's first repetition seed.
pub fn cmd_generate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let data = generate_datasets(cfg, split_seed(cfg.seed, 0))?;
    io::write_sample(&out_dir.join("train.csv"), &data.train)?;
    io::write_sample(&out_dir.join("test.csv"), &data.test)?;
    log::info!(
        "wrote {} train and {} test rows to {}",
        data.train.len(),
        data.test.len(),
        out_dir.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct ModelReport {
    index: usize,
    lambda: f64,
    w_phi: f64,
    pooled_ties: u64,
    file: String,
}

#[derive(serde::Serialize)]
struct SelectedReport {
    rng_algorithm: &'static str,
    selected_index: usize,
    selected_lambda: f64,
    selected_file: String,
    models: Vec<ModelReport>,
}

/// Fit the lambda grid on a labeled data file; write per-lambda models,
/// epoch traces, and the selection report.
pub fn cmd_train(cfg: &ExperimentConfig, data_path: &Path, out_dir: &Path) -> Result<()> {
    cfg.validate()?;
    ensure_dir(out_dir)?;
    let train_set = io::read_sample(data_path)?;
    let train_seed = split_seed(split_seed(cfg.seed, 0), STREAM_FIT);
    let (runs, selected) = fit_grid(&train_set, &fit_config(cfg)?, train_seed, None)?;

    let trace_rows: Vec<(f64, &[EpochTrace])> =
        runs.iter().map(|r| (r.lambda, r.traces.as_slice())).collect();
    io::write_traces(&out_dir.join("traces.csv"), &trace_rows)?;

    let mut models = Vec::with_capacity(runs.len());
    for (i, run) in runs.iter().enumerate() {
        let file = format!("model_{i}.json");
        io::write_model(&out_dir.join(&file), &run.model)?;
        models.push(ModelReport {
            index: i,
            lambda: run.lambda,
            w_phi: run.w_phi,
            pooled_ties: run.pooled_ties,
            file,
        });
    }
    let report = SelectedReport {
        rng_algorithm: RNG_ALGORITHM,
        selected_index: selected,
        selected_lambda: runs[selected].lambda,
        selected_file: models[selected].file.clone(),
        models,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    io::write_text(&out_dir.join("selected.json"), &json)?;
    Ok(())
}

/// Rank a labeled test file with a saved model; write the accuracy table
/// and the full ranking.
pub fn cmd_evaluate(
    model_path: &Path,
    test_path: &Path,
    cfg: &ExperimentConfig,
    out_dir: &Path,
) -> Result<()> {
    ensure_dir(out_dir)?;
    let model = io::read_model(model_path)?;
    let test = io::read_sample(test_path)?;
    if test.labels().is_none() {
        return Err(Error::params(format!(
            "evaluation needs a labeled test file (no label column in {})",
            test_path.display()
        )));
    }
    let k_max = *cfg
        .n_lowest_grid
        .iter()
        .max()
        .ok_or_else(|| Error::Config("n_lowest_grid must be nonempty".into()))?;
    if k_max > test.len() {
        return Err(Error::params(format!(
            "n_lowest {} exceeds the test size {}",
            k_max,
            test.len()
        )));
    }
    let ranked = stage2_rank(&model, &test, k_max)?;
    let rows = cfg
        .n_lowest_grid
        .iter()
        .map(|&k| accuracy_at(&ranked, &test, k).map(|a| (k, a)))
        .collect::<Result<Vec<_>>>()?;
    io::write_accuracy(&out_dir.join("accuracy.csv"), &rows)?;
    io::write_ranked(&out_dir.join("ranked.csv"), &ranked, test.labels())?;
    Ok(())
}

#[derive(serde::Serialize)]
struct FailureReport {
    rep: usize,
    error: String,
}

#[derive(serde::Serialize)]
struct RunReport<'a> {
    rng_algorithm: &'static str,
    repetitions: usize,
    completed: usize,
    failures: Vec<FailureReport>,
    config: &'a ExperimentConfig,
}

fn mean_and_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64;
    (Some(mean), Some(var.sqrt()))
}

/// Repeat the pipeline `cfg.repetitions` times and write every aggregated
/// artifact: `summary.csv` (accuracy mean/std per n_lowest), `mv_curve.csv`
/// (pointwise curve mean/std), `repetitions.csv` (per-repetition records),
/// `traces.csv` (first repetition), `heatmap.csv` (first repetition's
/// selected model on the train bounding box, 2-d only), and `run.json`.
pub fn cmd_reproduce(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    ensure_dir(out_dir)?;
    let outcomes = run_reproduction(cfg)?;
    let successes: Vec<&RepetitionOutcome> =
        outcomes.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failures: Vec<FailureReport> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(rep, r)| {
            r.as_ref()
                .err()
                .map(|e| FailureReport { rep, error: e.clone() })
        })
        .collect();
    for f in &failures {
        log::error!("repetition {} failed: {}", f.rep, f.error);
    }

    // Accuracy summary per n_lowest.
    let summary: Vec<io::SummaryRow> = cfg
        .n_lowest_grid
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let accs: Vec<f64> = successes.iter().map(|o| o.acc[i]).collect();
            let (mean_acc, std_acc) = mean_and_std(&accs);
            io::SummaryRow { n_lowest: k, mean_acc, std_acc, repetitions: accs.len() }
        })
        .collect();
    io::write_summary(&out_dir.join("summary.csv"), &summary)?;

    // Pointwise MV-curve aggregate.
    let curve_rows: Vec<Vec<String>> = (0..CURVE_GRID)
        .map(|i| {
            let alpha = (i as f64 + 0.5) / CURVE_GRID as f64;
            let vols: Vec<f64> = successes.iter().map(|o| o.curve_grid[i]).collect();
            let (mean, std) = mean_and_std(&vols);
            vec![
                io::fmt_float(alpha),
                mean.map(io::fmt_float).unwrap_or_default(),
                std.map(io::fmt_float).unwrap_or_default(),
            ]
        })
        .collect();
    io::write_csv(
        &out_dir.join("mv_curve.csv"),
        &["alpha", "mean_volume", "std_volume"],
        &curve_rows,
    )?;

    // Per-repetition records.
    let mut header: Vec<String> = vec![
        "rep".into(),
        "seed".into(),
        "selected_lambda".into(),
        "auc_mv".into(),
        "auc_mv_untrained".into(),
    ];
    for &k in &cfg.n_lowest_grid {
        header.push(format!("acc{k}"));
    }
    for &l in &cfg.lambda_grid {
        header.push(format!("w_phi_lambda_{l}"));
    }
    for &l in &cfg.lambda_grid {
        header.push(format!("acc{TRACE_N_LOWEST}_lambda_{l}"));
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rep_rows: Vec<Vec<String>> = successes
        .iter()
        .map(|o| {
            let mut row = vec![
                o.rep.to_string(),
                o.seed.to_string(),
                io::fmt_float(o.selected_lambda),
                io::fmt_float(o.auc_selected),
                io::fmt_float(o.auc_untrained),
            ];
            row.extend(o.acc.iter().map(|&a| io::fmt_float(a)));
            row.extend(o.w_phi.iter().map(|&w| io::fmt_float(w)));
            row.extend(o.acc75_per_lambda.iter().map(|&a| io::fmt_float(a)));
            row
        })
        .collect();
    io::write_csv(&out_dir.join("repetitions.csv"), &header_refs, &rep_rows)?;

    // Traces and heatmap from the first completed repetition.
    if let Some(first) = successes.first() {
        let trace_rows: Vec<(f64, &[EpochTrace])> =
            first.traces.iter().map(|(l, t)| (*l, t.as_slice())).collect();
        io::write_traces(&out_dir.join("traces.csv"), &trace_rows)?;
        write_heatmap(cfg, first, &out_dir.join("heatmap.csv"))?;
    }

    let report = RunReport {
        rng_algorithm: RNG_ALGORITHM,
        repetitions: cfg.repetitions,
        completed: successes.len(),
        failures,
        config: cfg,
    };
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    io::write_text(&out_dir.join("run.json"), &json)?;
    Ok(())
}

/// Score the selected model on a regular grid over the repetition's train
/// bounding box (planar data only).
fn write_heatmap(cfg: &ExperimentConfig, outcome: &RepetitionOutcome, path: &Path) -> Result<()> {
    if cfg.d != 2 {
        log::warn!("skipping the heatmap: defined for 2-d data, config has d = {}", cfg.d);
        return Ok(());
    }
    let data = generate_datasets(cfg, outcome.seed)?;
    let bounds = data.train.bounding_box()?;
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (HEATMAP_GRID - 1) as f64;
    let mut rows = Vec::with_capacity(HEATMAP_GRID * HEATMAP_GRID);
    for iy in 0..HEATMAP_GRID {
        let y = step(bounds[1].0, bounds[1].1, iy);
        for ix in 0..HEATMAP_GRID {
            let x = step(bounds[0].0, bounds[0].1, ix);
            let score = outcome.selected_model.forward(&[x, y])?;
            rows.push(vec![io::fmt_float(x), io::fmt_float(y), io::fmt_float(score)]);
        }
    }
    io::write_csv(path, &["x", "y", "score"], &rows)
}
