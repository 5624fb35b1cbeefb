//! The rescoring wrapper: hold out a random share of the decoys as
//! training material, hand the rescoring engine a label-blind view of the
//! data, then run the finite-sample filter on the pseudo targets with
//! their original labels revealed and the success probability adjusted for
//! the decoys that were removed.

use crate::classifiers::ClassifierSpec;
use crate::ensemble::{run_ensemble, EnsembleConfig, EnsembleError, EnsembleInput, PseudoLabeling};
use crate::filters::{fdp_sd, fdp_sd_delta_at, seqstep, RankedLabels};
use crate::model::{
    DiscoveryList, ErrorMode, FilterParams, HypothesisTable, ModelError, SeedSpec, Stream,
};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ResetError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
}

/// Success probability for the filter on pseudo targets: a true null is a
/// target with probability at most c₀, and surviving the training split
/// rescales that to c₀ / (1 − s(1−c₀)).
pub fn adjust_c(c0: f64, s: f64) -> f64 {
    c0 / (1.0 - s * (1.0 - c0))
}

/// Probability that a true null ends up a pseudo target at all: targets
/// always do, decoys with probability 1−s, giving 1 − s(1−c₀). This is the
/// success probability the rescoring engine's internal filter uses.
pub fn pseudo_c(c0: f64, s: f64) -> f64 {
    1.0 - s * (1.0 - c0)
}

#[derive(Debug, Clone)]
pub struct ResetConfig {
    /// Probability that a decoy joins the training set.
    pub s: f64,
    /// Bound on the probability that a true null scores as a target.
    pub c0: f64,
    pub mode: ErrorMode,
    pub alpha: f64,
    /// Confidence parameter for FDP mode (unused under FDR).
    pub gamma: f64,
    pub ensemble: EnsembleConfig,
    pub seed: SeedSpec,
    /// Use the deterministic FDP bound instead of the coinflip variant in
    /// FDP mode (ignored under FDR).
    pub deterministic_fdp: bool,
}

impl ResetConfig {
    /// Defaults: s = c₀ = 1/2, the standard classifier grid, and the
    /// derived success probabilities wired through.
    pub fn standard(alpha: f64, gamma: f64, mode: ErrorMode, seed: SeedSpec) -> Self {
        let (s, c0) = (0.5, 0.5);
        ResetConfig {
            s,
            c0,
            mode,
            alpha,
            gamma,
            ensemble: EnsembleConfig::standard(alpha, pseudo_c(c0, s)),
            seed,
            deterministic_fdp: false,
        }
    }

    /// The success probability handed to the final filter.
    pub fn filter_c(&self) -> f64 {
        adjust_c(self.c0, self.s)
    }

    pub fn validate(&self) -> Result<(), ResetError> {
        if !(0.0..1.0).contains(&self.s) {
            return Err(ResetError::InvalidConfig("s must lie in [0,1)".into()));
        }
        if !(self.c0 > 0.0 && self.c0 < 1.0) {
            return Err(ResetError::InvalidConfig("c0 must lie in (0,1)".into()));
        }
        let c = self.filter_c();
        if !(c > 0.0 && c < 1.0) {
            return Err(ResetError::InvalidConfig(format!(
                "derived success probability {c} leaves (0,1)"
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(ResetError::InvalidConfig("alpha must lie in (0,1)".into()));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(ResetError::InvalidConfig("gamma must lie in (0,1)".into()));
        }
        Ok(())
    }
}

/// Split the decoys into training material: each decoy joins I with
/// probability s. One uniform is drawn per hypothesis regardless of its
/// label, so any single hypothesis's assignment is unaffected by the
/// labels of the others — the property that makes the label-isolation
/// argument (and its test) exact.
pub fn split_decoys(table: &HypothesisTable, s: f64, rng: &mut impl Rng) -> PseudoLabeling {
    let mut labels = Vec::with_capacity(table.len());
    let mut training = Vec::new();
    let mut pseudo_targets = Vec::new();
    for i in 0..table.len() {
        let u: f64 = rng.gen();
        if table.labels()[i] == -1 && u < s {
            labels.push(-1);
            training.push(i);
        } else {
            labels.push(1);
            pseudo_targets.push(i);
        }
    }
    PseudoLabeling {
        labels,
        training,
        pseudo_targets,
    }
}

#[derive(Debug, Clone)]
pub struct ResetOutcome {
    pub discoveries: DiscoveryList,
    /// The classifier that produced the final rescoring, when the engine ran.
    pub winner: Option<ClassifierSpec>,
    pub n_training_decoys: usize,
    pub n_pseudo_targets: usize,
    /// Hypotheses removed for having score exactly 0.
    pub n_zero_dropped: usize,
    pub warnings: Vec<String>,
}

/// Tie-break substream index for the final filter's ranking; the rescoring
/// engine keeps its own indices below this.
const FINAL_FILTER_TIE_INDEX: u64 = 4 << 28;

/// The full wrapper. Hypotheses with score exactly 0 carry no ordering
/// information and are removed up front (their side information still
/// feeds the screening heuristics). With no training decoys — s = 0 or an
/// all-target table — the engine is skipped and the original scores pass
/// through, so the procedure degenerates to the plain filter.
pub fn run_reset(
    table: &HypothesisTable,
    config: &ResetConfig,
) -> Result<ResetOutcome, ResetError> {
    config.validate()?;

    let keep: Vec<usize> = (0..table.len())
        .filter(|&i| table.scores()[i] != 0.0)
        .collect();
    let dropped: Vec<usize> = (0..table.len())
        .filter(|&i| table.scores()[i] == 0.0)
        .collect();

    let mut split_rng = config.seed.stream(Stream::DecoySplit);
    let pseudo = split_decoys(table, config.s, &mut split_rng);

    let scores: Vec<f64> = keep.iter().map(|&i| table.scores()[i]).collect();
    let pseudo_labels: Vec<i8> = keep.iter().map(|&i| pseudo.labels[i]).collect();
    let input = EnsembleInput {
        scores: scores.clone(),
        pseudo_labels: pseudo_labels.clone(),
        side_info: table.side_info().select_rows(&keep),
        zero_side_info: table.side_info().select_rows(&dropped),
    };

    let n_training = pseudo_labels.iter().filter(|&&l| l == -1).count();
    let mut warnings = Vec::new();
    let (rescored, winner) = if n_training == 0 {
        warnings.push(
            "no training decoys; skipping the rescoring engine and keeping the original scores"
                .to_string(),
        );
        (scores.clone(), None)
    } else if pseudo_labels.iter().all(|&l| l == -1) {
        // Every retained hypothesis went to training; nothing to filter.
        (Vec::new(), None)
    } else {
        config.ensemble.validate()?;
        let out = run_ensemble(&input, &config.ensemble, &config.seed)?;
        warnings.extend(out.warnings.iter().cloned());
        (out.rescored, Some(out.winner))
    };

    // Pseudo targets, with their original labels revealed.
    let pseudo_rows: Vec<usize> = (0..keep.len()).filter(|&r| pseudo_labels[r] == 1).collect();
    let final_scores: Vec<f64> = pseudo_rows.iter().map(|&r| rescored[r]).collect();
    let final_labels: Vec<i8> = pseudo_rows
        .iter()
        .map(|&r| table.labels()[keep[r]])
        .collect();

    let discoveries = if pseudo_rows.is_empty() {
        DiscoveryList {
            indices: Vec::new(),
            rescored: Vec::new(),
            cutoff: 0,
        }
    } else {
        let params = FilterParams::new(config.alpha, config.gamma, config.filter_c(), config.mode)?;
        let mut tie_rng = config
            .seed
            .stream_indexed(Stream::TieBreak, FINAL_FILTER_TIE_INDEX);
        let ranked = RankedLabels::new(&final_scores, &final_labels, &mut tie_rng);
        let local = match config.mode {
            ErrorMode::Fdr => seqstep(&ranked, &params, true),
            ErrorMode::Fdp => {
                let mut coin_rng = config.seed.stream(Stream::Coinflip);
                fdp_sd(&ranked, &params, &mut coin_rng, config.deterministic_fdp)
            }
        };
        DiscoveryList {
            indices: local
                .indices
                .iter()
                .map(|&r| keep[pseudo_rows[r]])
                .collect(),
            rescored: pseudo_rows
                .iter()
                .zip(&final_scores)
                .map(|(&r, &w)| (keep[r], w))
                .collect(),
            cutoff: local.cutoff,
        }
    };

    Ok(ResetOutcome {
        discoveries,
        winner,
        n_training_decoys: n_training,
        n_pseudo_targets: pseudo_rows.len(),
        n_zero_dropped: dropped.len(),
        warnings,
    })
}

/// One row of the bound-comparison table.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundComparison {
    pub index: usize,
    /// Decoy bound of the direct procedure (None below its first testable index).
    pub direct_bound: Option<u64>,
    /// Twice the bound of the rescoring procedure, which competes each
    /// hypothesis against one decoy instead of entering all of them.
    pub doubled_rescoring_bound: Option<u64>,
    pub ratio: Option<f64>,
}

/// Side-by-side decoy bounds: the direct procedure at `c_direct` against
/// the doubled bounds of the rescoring procedure at `c_rescoring`, for the
/// requested indices. Doubling makes the two comparable because the
/// rescoring procedure only retains roughly half the hypotheses.
pub fn compare_bounds(
    alpha: f64,
    gamma: f64,
    c_direct: f64,
    c_rescoring: f64,
    indices: &[usize],
) -> Result<Vec<BoundComparison>, ResetError> {
    let direct_params = FilterParams::new(alpha, gamma, c_direct, ErrorMode::Fdp)?;
    let rescoring_params = FilterParams::new(alpha, gamma, c_rescoring, ErrorMode::Fdp)?;
    Ok(indices
        .iter()
        .map(|&i| {
            // The pointwise evaluator reports a bound wherever one exists,
            // even below the conservative first-testable index the running
            // procedure starts from.
            let direct_bound = fdp_sd_delta_at(i, &direct_params);
            let doubled = fdp_sd_delta_at(i, &rescoring_params).map(|d| 2 * d);
            let ratio = match (direct_bound, doubled) {
                (Some(a), Some(b)) if a > 0 => Some(b as f64 / a as f64),
                _ => None,
            };
            BoundComparison {
                index: i,
                direct_bound,
                doubled_rescoring_bound: doubled,
                ratio,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Matrix;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn adjusted_success_probability() {
        assert_relative_eq!(adjust_c(0.5, 0.5), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(adjust_c(0.4, 0.0), 0.4, max_relative = 1e-15);
        assert_relative_eq!(adjust_c(1.0 / 3.0, 0.5), 0.5, max_relative = 1e-15);
        assert_relative_eq!(pseudo_c(0.5, 0.5), 0.75, max_relative = 1e-15);
        assert_relative_eq!(pseudo_c(1.0 / 3.0, 0.5), 2.0 / 3.0, max_relative = 1e-15);
    }

    fn random_table(m: usize, seed: u64) -> HypothesisTable {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let labels: Vec<i8> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
            .collect();
        let scores: Vec<f64> = (0..m)
            .map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal).abs() + 0.01)
            .collect();
        HypothesisTable::with_default_ids(labels, scores, Matrix::zeros(m, 0)).unwrap()
    }

    #[test]
    fn split_extremes() {
        let table = random_table(100, 1);
        let decoys = table.labels().iter().filter(|&&l| l == -1).count();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let none = split_decoys(&table, 0.0, &mut rng);
        assert!(none.training.is_empty());
        assert_eq!(none.pseudo_targets.len(), 100);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let all = split_decoys(&table, 1.0 - 1e-12, &mut rng);
        assert_eq!(all.training.len(), decoys);
    }

    #[test]
    fn split_rate_concentrates() {
        use rand::Rng;
        let m = 20_000;
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let labels: Vec<i8> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
            .collect();
        let scores = vec![1.0; m];
        let table = HypothesisTable::with_default_ids(labels, scores, Matrix::zeros(m, 0)).unwrap();
        let decoys = table.labels().iter().filter(|&&l| l == -1).count();
        let split = split_decoys(&table, 0.5, &mut rng);
        let rate = split.training.len() as f64 / decoys as f64;
        assert!((rate - 0.5).abs() <= 0.015, "training rate {rate}");
    }

    #[test]
    fn split_members_are_always_decoys() {
        let table = random_table(500, 5);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let split = split_decoys(&table, 0.7, &mut rng);
        for &i in &split.training {
            assert_eq!(table.labels()[i], -1);
            assert_eq!(split.labels[i], -1);
        }
        for &i in &split.pseudo_targets {
            assert_eq!(split.labels[i], 1);
        }
    }

    fn fast_config(alpha: f64, mode: ErrorMode, seed: u64) -> ResetConfig {
        let mut config = ResetConfig::standard(alpha, 0.1, mode, SeedSpec::new(seed));
        config.ensemble.grid = vec![
            ClassifierSpec::random_forest(),
            ClassifierSpec::neural_net(0.1, 2),
        ];
        config.ensemble.repetitions = 2;
        config.ensemble.min_positive = 10;
        config
    }

    #[test]
    fn no_training_split_degenerates_to_plain_filter() {
        let table = random_table(120, 7);
        let mut config = fast_config(0.2, ErrorMode::Fdr, 11);
        config.s = 0.0;
        config.ensemble.pseudo_c = pseudo_c(config.c0, config.s);
        let outcome = run_reset(&table, &config).unwrap();

        let params = FilterParams::new(0.2, 0.1, config.c0, ErrorMode::Fdr).unwrap();
        let mut tie_rng = ChaCha12Rng::seed_from_u64(999);
        let ranked = RankedLabels::from_table(&table, &mut tie_rng);
        let oracle = seqstep(&ranked, &params, true);

        let mut got = outcome.discoveries.indices.clone();
        got.sort_unstable();
        let mut expected = oracle.indices.clone();
        expected.sort_unstable();
        assert_eq!(got, expected);
        assert!(outcome.winner.is_none());
    }

    #[test]
    fn empty_pseudo_target_set_gives_empty_discoveries() {
        let labels = vec![-1i8; 50];
        let scores = vec![1.0; 50];
        let table =
            HypothesisTable::with_default_ids(labels, scores, Matrix::zeros(50, 0)).unwrap();
        let mut config = fast_config(0.1, ErrorMode::Fdr, 13);
        config.s = 1.0 - 1e-12;
        let outcome = run_reset(&table, &config).unwrap();
        assert!(outcome.discoveries.indices.is_empty());
        assert_eq!(outcome.n_pseudo_targets, 0);
    }

    #[test]
    fn discoveries_are_always_original_targets() {
        for seed in 0..5 {
            let table = random_table(200, 100 + seed);
            let config = fast_config(0.3, ErrorMode::Fdr, 200 + seed);
            let outcome = run_reset(&table, &config).unwrap();
            for &i in &outcome.discoveries.indices {
                assert_eq!(
                    table.labels()[i],
                    1,
                    "seed {seed}: discovery {i} is a decoy"
                );
            }
        }
    }

    #[test]
    fn zero_scores_are_dropped_from_analysis() {
        use rand::Rng;
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let m = 150;
        let labels: Vec<i8> = (0..m)
            .map(|_| if rng.gen_bool(0.5) { 1 } else { -1 })
            .collect();
        let scores: Vec<f64> = (0..m)
            .map(|i| {
                if i % 5 == 0 {
                    0.0
                } else {
                    rng.gen_range(0.1..3.0)
                }
            })
            .collect();
        let side_rows: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let table = HypothesisTable::with_default_ids(
            labels,
            scores.clone(),
            Matrix::from_rows(&side_rows),
        )
        .unwrap();
        let config = fast_config(0.2, ErrorMode::Fdr, 23);
        let outcome = run_reset(&table, &config).unwrap();
        assert_eq!(outcome.n_zero_dropped, 30);
        for &(i, _) in &outcome.discoveries.rescored {
            assert_ne!(scores[i], 0.0);
        }
        for &i in &outcome.discoveries.indices {
            assert_ne!(scores[i], 0.0);
        }
    }

    #[test]
    fn rescoring_is_blind_to_pseudo_target_labels() {
        // Flipping the original label of held-out decoys (pseudo targets)
        // cannot change the rescored values: the engine never sees those
        // labels, and the split draws one uniform per hypothesis so the
        // training set is unchanged too. Only the final filter, which
        // reveals the labels, may react.
        let table = random_table(160, 31);
        let config = fast_config(0.2, ErrorMode::Fdr, 37);
        let mut split_rng = config.seed.stream(Stream::DecoySplit);
        let split = split_decoys(&table, config.s, &mut split_rng);

        let flipped_labels: Vec<i8> = (0..table.len())
            .map(|i| {
                if table.labels()[i] == -1 && split.labels[i] == 1 {
                    1
                } else {
                    table.labels()[i]
                }
            })
            .collect();
        assert_ne!(flipped_labels, table.labels());
        let flipped = HypothesisTable::with_default_ids(
            flipped_labels,
            table.scores().to_vec(),
            table.side_info().clone(),
        )
        .unwrap();

        let a = run_reset(&table, &config).unwrap();
        let b = run_reset(&flipped, &config).unwrap();
        assert_eq!(a.discoveries.rescored, b.discoveries.rescored);
    }

    #[test]
    fn outcome_is_deterministic_per_seed() {
        let table = random_table(150, 41);
        let config = fast_config(0.15, ErrorMode::Fdp, 43);
        let a = run_reset(&table, &config).unwrap();
        let b = run_reset(&table, &config).unwrap();
        assert_eq!(a.discoveries, b.discoveries);
    }

    #[test]
    fn bound_comparison_matches_pointwise_bounds() {
        let indices = [500usize, 1000, 2000];
        let rows = compare_bounds(0.01, 0.1, 0.5, 2.0 / 3.0, &indices).unwrap();
        assert_eq!(rows.len(), 3);
        let direct_params = FilterParams::new(0.01, 0.1, 0.5, ErrorMode::Fdp).unwrap();
        let rescoring_params = FilterParams::new(0.01, 0.1, 2.0 / 3.0, ErrorMode::Fdp).unwrap();
        for row in &rows {
            assert_eq!(row.direct_bound, fdp_sd_delta_at(row.index, &direct_params));
            assert_eq!(
                row.doubled_rescoring_bound,
                fdp_sd_delta_at(row.index, &rescoring_params).map(|d| 2 * d)
            );
            match (row.direct_bound, row.doubled_rescoring_bound) {
                (Some(a), Some(b)) if a > 0 => {
                    assert_relative_eq!(
                        row.ratio.unwrap(),
                        b as f64 / a as f64,
                        max_relative = 1e-15
                    );
                }
                _ => assert_eq!(row.ratio, None),
            }
        }
    }

    #[test]
    fn fdp_mode_runs_end_to_end() {
        let table = random_table(400, 51);
        let config = fast_config(0.3, ErrorMode::Fdp, 53);
        let outcome = run_reset(&table, &config).unwrap();
        for &i in &outcome.discoveries.indices {
            assert_eq!(table.labels()[i], 1);
        }
    }
}
