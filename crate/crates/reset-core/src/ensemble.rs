//! The semi-supervised rescoring engine: feature screening, an initial
//! positive set, cross-validated model selection over a classifier grid,
//! and two-pass rescoring.
//!
//! This module only ever sees pseudo labels L̃ — the interface carries no
//! original labels, so nothing here can leak whether a pseudo target was a
//! real target or a held-out decoy. That isolation is what makes the
//! rescored values usable by the downstream filters without breaking their
//! error guarantees.

use crate::classifiers::{
    plan_feature_basis, solve_spd, train, ClassifierError, ClassifierKind, ClassifierSpec,
    FeatureBasis, TrainedScorer,
};
use crate::filters::{seqstep, RankedLabels};
use crate::model::{ErrorMode, FilterParams, Matrix, SeedSpec, Stream};
use crate::numerics::{betainc_reg, NumericTolerances};
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("no training decoys: the rescoring engine has nothing to train against")]
    NoTrainingDecoys,
    #[error("no pseudo targets: every hypothesis was assigned to the training set")]
    NoPseudoTargets,
    #[error("input has {scores} scores, {labels} pseudo labels, {rows} side-info rows")]
    ShapeMismatch {
        scores: usize,
        labels: usize,
        rows: usize,
    },
    #[error("invalid ensemble configuration: {0}")]
    InvalidConfig(String),
}

/// Assignment of every hypothesis to the training set I (pseudo label −1)
/// or the pseudo-target set J (pseudo label +1). Training members are
/// always original decoys; pseudo targets mix true targets with the decoys
/// that were held out.
#[derive(Debug, Clone)]
pub struct PseudoLabeling {
    /// L̃ per hypothesis: −1 on I, +1 on J.
    pub labels: Vec<i8>,
    /// I: indices of training decoys.
    pub training: Vec<usize>,
    /// J: indices of pseudo targets.
    pub pseudo_targets: Vec<usize>,
}

/// What the rescoring engine is allowed to see: scores, side information,
/// and pseudo labels for the hypotheses under analysis, plus the side
/// information of zero-score hypotheses that were removed upstream (used
/// only by the screening heuristics). Original labels are deliberately
/// absent from this type.
#[derive(Debug, Clone)]
pub struct EnsembleInput {
    pub scores: Vec<f64>,
    pub pseudo_labels: Vec<i8>,
    pub side_info: Matrix,
    /// Side info of hypotheses removed for having score 0; may be empty.
    pub zero_side_info: Matrix,
}

impl EnsembleInput {
    fn validate(&self) -> Result<(), EnsembleError> {
        if self.scores.len() != self.pseudo_labels.len()
            || self.side_info.rows() != self.scores.len()
        {
            return Err(EnsembleError::ShapeMismatch {
                scores: self.scores.len(),
                labels: self.pseudo_labels.len(),
                rows: self.side_info.rows(),
            });
        }
        Ok(())
    }

    fn training_decoys(&self) -> Vec<usize> {
        (0..self.pseudo_labels.len())
            .filter(|&i| self.pseudo_labels[i] == -1)
            .collect()
    }

    fn pseudo_target_count(&self) -> usize {
        self.pseudo_labels.iter().filter(|&&l| l == 1).count()
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    /// Cross-validation folds K.
    pub folds: usize,
    /// Repetitions r of the full K-fold pass.
    pub repetitions: usize,
    /// Level used for model selection and positive-set refinement.
    pub alpha: f64,
    /// Initial level for carving out the positive set.
    pub alpha0: f64,
    /// Escalate the positive-set level until this many members (or all
    /// pseudo targets) are included.
    pub min_positive: usize,
    /// Neighbor count for the zero-score-density feature.
    pub knn: usize,
    /// Side-info columns are kept when their fit p-value is below this.
    pub side_info_p_cutoff: f64,
    /// The success probability used by the internal filter on pseudo
    /// labels, normally 1 − s(1−c₀). Tightening or loosening it trades
    /// selection bias against power but does not affect error control,
    /// which rests solely on the downstream filter.
    pub pseudo_c: f64,
    pub grid: Vec<ClassifierSpec>,
}

impl EnsembleConfig {
    /// The standard grid: a random forest, the spline additive model, and
    /// nine neural nets (decay-major order).
    pub fn standard(alpha: f64, pseudo_c: f64) -> Self {
        EnsembleConfig {
            folds: 3,
            repetitions: 10,
            alpha,
            alpha0: 0.5,
            min_positive: 50,
            knn: 20,
            side_info_p_cutoff: 0.01,
            pseudo_c,
            grid: Self::default_grid(),
        }
    }

    pub fn default_grid() -> Vec<ClassifierSpec> {
        let mut grid = vec![
            ClassifierSpec::random_forest(),
            ClassifierSpec::spline_additive(),
        ];
        for decay in [0.0, 0.1, 1.0] {
            for hidden in [2, 5, 10] {
                grid.push(ClassifierSpec::neural_net(decay, hidden));
            }
        }
        grid
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.folds < 2 {
            return Err(EnsembleError::InvalidConfig("need at least 2 folds".into()));
        }
        if self.repetitions < 1 {
            return Err(EnsembleError::InvalidConfig(
                "need at least 1 repetition".into(),
            ));
        }
        if self.min_positive < 1 {
            return Err(EnsembleError::InvalidConfig(
                "min_positive must be ≥ 1".into(),
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EnsembleError::InvalidConfig(
                "alpha must lie in (0,1)".into(),
            ));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(EnsembleError::InvalidConfig(
                "alpha0 must lie in (0,1]".into(),
            ));
        }
        if !(self.pseudo_c > 0.0 && self.pseudo_c < 1.0) {
            return Err(EnsembleError::InvalidConfig(
                "pseudo_c must lie in (0,1)".into(),
            ));
        }
        if self.grid.is_empty() {
            return Err(EnsembleError::InvalidConfig(
                "classifier grid is empty".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    /// Final rescored values W̃, aligned with the input rows.
    pub rescored: Vec<f64>,
    pub winner: ClassifierSpec,
    pub first_pass_winner: ClassifierSpec,
    /// Side-info columns retained by the screening step.
    pub retained_side_info: Vec<usize>,
    /// Size of the refined positive set used in the second pass.
    pub positive_set_size: usize,
    pub warnings: Vec<String>,
}

/// Pack a task coordinate into a substream index. Distinct streams
/// (fold assignment / classifier init / tie break) may share indices.
fn substream(pass: u32, model: u32, rep: u32, fold: u32) -> u64 {
    (u64::from(pass) << 28) | (u64::from(model) << 20) | (u64::from(rep) << 8) | u64::from(fold)
}

/// Pass ids 0 and 1 are the two evaluation passes; 2 and 3 key the
/// positive-set and refinement tie-break streams.
const PASS_INITIAL_POSITIVE: u32 = 2;
const PASS_REFINE_POSITIVE: u32 = 3;

fn pseudo_filter(alpha: f64, c: f64) -> FilterParams {
    FilterParams::new(alpha, 0.5, c, ErrorMode::Fdr)
        .expect("internal filter parameters are validated with the config")
}

// ───────────────────── zero-score density feature ─────────────────────

/// For each retained (nonzero-score) hypothesis, the number of zero-score
/// hypotheses among its `knn` nearest neighbors in side-info Euclidean
/// distance, neighbors drawn from all hypotheses (both groups, self
/// excluded). Distance ties resolve by group then row order, so the
/// feature is deterministic.
pub fn knn_zero_feature(zero_side: &Matrix, nonzero_side: &Matrix, knn: usize) -> Vec<f64> {
    let n = nonzero_side.rows();
    if zero_side.rows() == 0 || knn == 0 {
        return vec![0.0; n];
    }
    let dim = nonzero_side.cols();
    assert_eq!(
        zero_side.cols(),
        dim,
        "side-info dimensions differ between groups"
    );
    let mut out = Vec::with_capacity(n);
    let mut candidates: Vec<(f64, usize, bool)> = Vec::with_capacity(n + zero_side.rows());
    for i in 0..n {
        let here = nonzero_side.row(i);
        candidates.clear();
        for j in 0..n {
            if j == i {
                continue;
            }
            candidates.push((euclidean2(here, nonzero_side.row(j)), j, false));
        }
        for z in 0..zero_side.rows() {
            candidates.push((euclidean2(here, zero_side.row(z)), n + z, true));
        }
        let keep = knn.min(candidates.len());
        if keep < candidates.len() {
            candidates.select_nth_unstable_by(keep, |a, b| {
                a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1))
            });
        }
        let zeros = candidates[..keep].iter().filter(|c| c.2).count();
        out.push(zeros as f64);
    }
    out
}

fn euclidean2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

// ───────────────────── side-information screening ─────────────────────

/// Degrees of freedom of the per-column screening spline.
const SCREEN_SPLINE_DF: usize = 5;

/// Screen side-info columns: regress the signed score W·L̃ (zero rows
/// contribute response 0) on each column through a natural cubic spline,
/// falling back to a straight line when the spline fit fails, and retain
/// columns whose overall F-test p-value is below `cutoff`.
pub fn select_side_info(input: &EnsembleInput, cutoff: f64) -> Vec<usize> {
    let n = input.scores.len();
    let z = input.zero_side_info.rows();
    if input.side_info.cols() == 0 {
        return Vec::new();
    }
    let mut response = Vec::with_capacity(n + z);
    for i in 0..n {
        response.push(input.scores[i] * f64::from(input.pseudo_labels[i]));
    }
    response.resize(n + z, 0.0);
    let mut retained = Vec::new();
    for j in 0..input.side_info.cols() {
        let mut col = input.side_info.column(j);
        if z > 0 {
            col.extend(input.zero_side_info.column(j));
        }
        if column_pvalue(&col, &response) < cutoff {
            retained.push(j);
        }
    }
    retained
}

fn column_pvalue(col: &[f64], response: &[f64]) -> f64 {
    let basis = plan_feature_basis(col, SCREEN_SPLINE_DF);
    match basis {
        FeatureBasis::Dropped => 1.0,
        FeatureBasis::Linear => ols_f_pvalue(col, &FeatureBasis::Linear, response).unwrap_or(1.0),
        natural => ols_f_pvalue(col, &natural, response)
            .or_else(|| ols_f_pvalue(col, &FeatureBasis::Linear, response))
            .unwrap_or(1.0),
    }
}

/// Overall F-test p-value of an ordinary least-squares fit of `response`
/// on an intercept plus the basis expansion of `col`; None when the fit is
/// numerically unusable.
fn ols_f_pvalue(col: &[f64], basis: &FeatureBasis, response: &[f64]) -> Option<f64> {
    let n = col.len();
    let width = basis.width();
    if width == 0 || n < width + 2 {
        return None;
    }
    let p = width + 1;
    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut row = Vec::with_capacity(p);
    let mut rows = Vec::with_capacity(n * p);
    for (&x, &y) in col.iter().zip(response) {
        row.clear();
        row.push(1.0);
        basis.eval(x, &mut row);
        for a in 0..p {
            xty[a] += row[a] * y;
            for b in a..p {
                xtx[a * p + b] += row[a] * row[b];
            }
        }
        rows.extend_from_slice(&row);
    }
    for a in 0..p {
        for b in 0..a {
            xtx[a * p + b] = xtx[b * p + a];
        }
    }
    let beta = solve_spd(&mut xtx, &xty, p)?;
    if beta.iter().any(|b| !b.is_finite()) {
        return None;
    }
    let mean = response.iter().sum::<f64>() / n as f64;
    let mut rss0 = 0.0;
    let mut rss1 = 0.0;
    for (i, &y) in response.iter().enumerate() {
        let fit: f64 = rows[i * p..(i + 1) * p]
            .iter()
            .zip(&beta)
            .map(|(x, b)| x * b)
            .sum();
        rss0 += (y - mean) * (y - mean);
        rss1 += (y - fit) * (y - fit);
    }
    if !(rss0.is_finite() && rss1.is_finite()) {
        return None;
    }
    if rss0 <= 0.0 {
        return Some(1.0);
    }
    let df1 = width as f64;
    let df2 = (n - p) as f64;
    if rss1 <= rss0 * 1e-12 {
        return Some(0.0);
    }
    let f = ((rss0 - rss1).max(0.0) / df1) / (rss1 / df2);
    let x = df2 / (df2 + df1 * f);
    betainc_reg(df2 / 2.0, df1 / 2.0, x, &NumericTolerances::default()).ok()
}

// ───────────────────── initial positive set ─────────────────────

/// Choose the ordering feature (among the assembled feature columns, the
/// score first) whose ranking yields the most pseudo discoveries at
/// `config.alpha`, then take the pseudo targets it discovers at
/// `config.alpha0`, escalating the level by 0.01 until the positive set
/// reaches min_positive or holds every pseudo target.
pub fn initial_positive_set(
    features: &Matrix,
    pseudo_labels: &[i8],
    config: &EnsembleConfig,
    seed: &SeedSpec,
) -> Vec<usize> {
    let mut best: Option<(usize, RankedLabels)> = None;
    let mut best_count = 0usize;
    for f in 0..features.cols() {
        let col = features.column(f);
        let mut tie = seed.stream_indexed(
            Stream::TieBreak,
            substream(PASS_INITIAL_POSITIVE, 0, f as u32, 0),
        );
        let ranked = RankedLabels::new(&col, pseudo_labels, &mut tie);
        let count = seqstep(
            &ranked,
            &pseudo_filter(config.alpha, config.pseudo_c),
            false,
        )
        .indices
        .len();
        if best.is_none() || count > best_count {
            best_count = count;
            best = Some((f, ranked));
        }
    }
    let (_, ranked) = best.expect("feature matrix always has at least the score column");
    escalate_positive_set(&ranked, pseudo_labels, config.alpha0, config)
}

/// Discoveries at the starting level, escalating by 0.01 until the set
/// reaches min(min_positive, #pseudo targets); if the level would leave
/// (0,1), every pseudo target is taken.
fn escalate_positive_set(
    ranked: &RankedLabels,
    pseudo_labels: &[i8],
    start_level: f64,
    config: &EnsembleConfig,
) -> Vec<usize> {
    let total_pseudo = pseudo_labels.iter().filter(|&&l| l == 1).count();
    let goal = config.min_positive.min(total_pseudo);
    for step in 0.. {
        let level = start_level + f64::from(step) * 0.01;
        if level >= 1.0 - 1e-12 {
            break;
        }
        let found = seqstep(ranked, &pseudo_filter(level, config.pseudo_c), false).indices;
        if found.len() >= goal {
            return found;
        }
    }
    (0..pseudo_labels.len())
        .filter(|&i| pseudo_labels[i] == 1)
        .collect()
}

// ───────────────────── model evaluation and rescoring ─────────────────────

#[derive(Debug, Clone)]
pub struct ModelEvaluation {
    /// Summed pseudo-discovery counts per grid entry.
    pub counts: Vec<u64>,
    pub warnings: Vec<String>,
}

struct RepetitionOutcome {
    discoveries: u64,
    scores: Vec<f64>,
    warnings: Vec<String>,
}

/// One repetition of one model: a fresh K-fold split of all hypotheses,
/// training on the positive/negative sets outside each fold, scoring the
/// fold, and counting its pseudo discoveries. Every source of randomness
/// is keyed by (pass, model, repetition, fold), so the same coordinates
/// always replay the same models — rescoring the winner reproduces the
/// evaluation's scores exactly.
#[allow(clippy::too_many_arguments)]
fn run_model_repetition(
    features: &Matrix,
    pseudo_labels: &[i8],
    positive_set: &[usize],
    training_decoys: &[usize],
    spec: &ClassifierSpec,
    pass: u32,
    model_index: usize,
    rep: usize,
    config: &EnsembleConfig,
    seed: &SeedSpec,
) -> RepetitionOutcome {
    let n = features.rows();
    let k_folds = config.folds;
    let code = |fold: u32| substream(pass, model_index as u32, rep as u32, fold);
    let mut fold_rng = seed.stream_indexed(Stream::FoldAssignment, code(0));
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rand::Rng::gen_range(&mut fold_rng, 0..=i);
        perm.swap(i, j);
    }
    let mut fold_of = vec![0u8; n];
    for (position, &row) in perm.iter().enumerate() {
        fold_of[row] = (position % k_folds) as u8;
    }

    let mut scores = vec![0.0; n];
    let mut discoveries = 0u64;
    let mut warnings = Vec::new();
    let params = pseudo_filter(config.alpha, config.pseudo_c);
    let mut train_rows: Vec<usize> = Vec::new();
    let mut train_labels: Vec<i8> = Vec::new();
    for k in 0..k_folds {
        train_rows.clear();
        train_labels.clear();
        for &i in positive_set {
            if fold_of[i] != k as u8 {
                train_rows.push(i);
                train_labels.push(1);
            }
        }
        for &i in training_decoys {
            if fold_of[i] != k as u8 {
                train_rows.push(i);
                train_labels.push(-1);
            }
        }
        let test_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == k as u8).collect();
        if test_rows.is_empty() {
            continue;
        }
        let mut init_rng = seed.stream_indexed(Stream::ClassifierInit, code(k as u32 + 1));
        let trained = fit_with_fallback(
            spec,
            &features.select_rows(&train_rows),
            &train_labels,
            &mut init_rng,
            &mut warnings,
        );
        let Some(model) = trained else { continue };
        let fold_scores = model
            .score(&features.select_rows(&test_rows))
            .expect("fold features share the training dimension");
        for (&row, &s) in test_rows.iter().zip(&fold_scores) {
            scores[row] = s;
        }
        let fold_labels: Vec<i8> = test_rows.iter().map(|&i| pseudo_labels[i]).collect();
        let mut tie_rng = seed.stream_indexed(Stream::TieBreak, code(k as u32 + 1));
        let ranked = RankedLabels::new(&fold_scores, &fold_labels, &mut tie_rng);
        discoveries += seqstep(&ranked, &params, false).indices.len() as u64;
    }
    RepetitionOutcome {
        discoveries,
        scores,
        warnings,
    }
}

/// Train `spec`; a numerically failed spline additive fit retries as a
/// random forest, any other failure scores the fold as zero discoveries.
fn fit_with_fallback(
    spec: &ClassifierSpec,
    features: &Matrix,
    labels: &[i8],
    rng: &mut rand_chacha::ChaCha12Rng,
    warnings: &mut Vec<String>,
) -> Option<TrainedScorer> {
    match train(spec, features, labels, rng) {
        Ok(model) => {
            warnings.extend(model.warnings.iter().cloned());
            Some(model)
        }
        Err(ClassifierError::NumericalFailure(message))
            if spec.kind == ClassifierKind::SplineAdditive =>
        {
            warnings.push(format!(
                "spline additive fit failed ({message}); falling back to a random forest"
            ));
            let rf = ClassifierSpec {
                kind: ClassifierKind::RandomForest,
                ..spec.clone()
            };
            match train(&rf, features, labels, rng) {
                Ok(model) => Some(model),
                Err(error) => {
                    warnings.push(format!("fallback forest also failed: {error}"));
                    None
                }
            }
        }
        Err(error) => {
            warnings.push(format!("{} training failed: {error}", spec.describe()));
            None
        }
    }
}

/// Total pseudo-discovery count per grid model over r repetitions × K test
/// folds. Tasks run in parallel; results reduce in (model, repetition)
/// order so the outcome is independent of scheduling.
pub fn evaluate_models(
    features: &Matrix,
    pseudo_labels: &[i8],
    positive_set: &[usize],
    training_decoys: &[usize],
    config: &EnsembleConfig,
    seed: &SeedSpec,
    pass: u32,
) -> ModelEvaluation {
    let tasks: Vec<(usize, usize)> = (0..config.grid.len())
        .flat_map(|g| (0..config.repetitions).map(move |t| (g, t)))
        .collect();
    let outcomes: Vec<RepetitionOutcome> = tasks
        .par_iter()
        .map(|&(g, t)| {
            run_model_repetition(
                features,
                pseudo_labels,
                positive_set,
                training_decoys,
                &config.grid[g],
                pass,
                g,
                t,
                config,
                seed,
            )
        })
        .collect();
    let mut counts = vec![0u64; config.grid.len()];
    let mut warnings = Vec::new();
    for ((g, _), outcome) in tasks.iter().zip(outcomes) {
        counts[*g] += outcome.discoveries;
        warnings.extend(outcome.warnings);
    }
    ModelEvaluation { counts, warnings }
}

/// Average decision value per hypothesis over the winner's r repetitions
/// (one test-fold score each), replaying the exact models evaluated for
/// the winner at this pass.
#[allow(clippy::too_many_arguments)]
pub fn rescore(
    features: &Matrix,
    pseudo_labels: &[i8],
    winner_index: usize,
    positive_set: &[usize],
    training_decoys: &[usize],
    config: &EnsembleConfig,
    seed: &SeedSpec,
    pass: u32,
) -> Vec<f64> {
    let outcomes: Vec<RepetitionOutcome> = (0..config.repetitions)
        .into_par_iter()
        .map(|t| {
            run_model_repetition(
                features,
                pseudo_labels,
                positive_set,
                training_decoys,
                &config.grid[winner_index],
                pass,
                winner_index,
                t,
                config,
                seed,
            )
        })
        .collect();
    let n = features.rows();
    let mut mean = vec![0.0; n];
    for outcome in &outcomes {
        for (m, s) in mean.iter_mut().zip(&outcome.scores) {
            *m += s;
        }
    }
    for m in mean.iter_mut() {
        *m /= config.repetitions as f64;
    }
    mean
}

// ───────────────────── full pipeline ─────────────────────

/// The whole engine: assemble features (score, screened side info, and the
/// zero-score density column), carve out an initial positive set, select
/// and rescore the best model, refine the positive set from the first
/// rescoring, then select and rescore again. Returns the second-pass W̃.
pub fn run_ensemble(
    input: &EnsembleInput,
    config: &EnsembleConfig,
    seed: &SeedSpec,
) -> Result<EnsembleOutput, EnsembleError> {
    input.validate()?;
    config.validate()?;
    let training_decoys = input.training_decoys();
    if training_decoys.is_empty() {
        return Err(EnsembleError::NoTrainingDecoys);
    }
    if input.pseudo_target_count() == 0 {
        return Err(EnsembleError::NoPseudoTargets);
    }

    let retained = select_side_info(input, config.side_info_p_cutoff);
    let mut features = Matrix::new(input.scores.len(), 1, input.scores.clone());
    if !retained.is_empty() {
        features = features.hstack(&input.side_info.select_cols(&retained));
    }
    if input.zero_side_info.rows() > 0 && input.side_info.cols() > 0 {
        let density = knn_zero_feature(&input.zero_side_info, &input.side_info, config.knn);
        features = features.hstack(&Matrix::new(density.len(), 1, density));
    }

    let positive = initial_positive_set(&features, &input.pseudo_labels, config, seed);
    let first = evaluate_models(
        &features,
        &input.pseudo_labels,
        &positive,
        &training_decoys,
        config,
        seed,
        0,
    );
    let first_winner = argmax_first(&first.counts);
    let first_scores = rescore(
        &features,
        &input.pseudo_labels,
        first_winner,
        &positive,
        &training_decoys,
        config,
        seed,
        0,
    );

    let mut tie_rng =
        seed.stream_indexed(Stream::TieBreak, substream(PASS_REFINE_POSITIVE, 0, 0, 0));
    let ranked = RankedLabels::new(&first_scores, &input.pseudo_labels, &mut tie_rng);
    let refined = escalate_positive_set(&ranked, &input.pseudo_labels, config.alpha, config);

    let second = evaluate_models(
        &features,
        &input.pseudo_labels,
        &refined,
        &training_decoys,
        config,
        seed,
        1,
    );
    let second_winner = argmax_first(&second.counts);
    let rescored = rescore(
        &features,
        &input.pseudo_labels,
        second_winner,
        &refined,
        &training_decoys,
        config,
        seed,
        1,
    );

    let mut warnings = first.warnings;
    warnings.extend(second.warnings);
    warnings.sort();
    warnings.dedup();
    Ok(EnsembleOutput {
        rescored,
        winner: config.grid[second_winner].clone(),
        first_pass_winner: config.grid[first_winner].clone(),
        retained_side_info: retained,
        positive_set_size: refined.len(),
        warnings,
    })
}

fn argmax_first(counts: &[u64]) -> usize {
    let mut best = 0usize;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}
