//! Core data model shared by all modules: hypotheses, labels, scores, side
//! information, and run configuration.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; operations are pure functions of their inputs and a named RNG
//! stream, which is what makes whole-pipeline runs bit-reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("label at index {index} is {value}; labels must be +1 or -1")]
    InvalidLabel { index: usize, value: i32 },
    #[error("score at index {index} is {value}; scores must be finite")]
    NonFiniteScore { index: usize, value: f64 },
    #[error("p-value at index {index} is {value}; p-values must lie in [0,1]")]
    InvalidPValue { index: usize, value: f64 },
    #[error("side_info has {rows} rows but the table has {expected} hypotheses")]
    SideInfoShape { rows: usize, expected: usize },
    #[error("ids has {got} entries but the table has {expected} hypotheses")]
    IdCount { got: usize, expected: usize },
    #[error("{field} = {value} is outside its valid range {range}")]
    InvalidParam {
        field: &'static str,
        value: f64,
        range: &'static str,
    },
}

/// Dense row-major matrix of side information, one row per hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Matrix { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows in matrix");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    /// New matrix keeping only the listed rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// New matrix keeping only the listed columns, in the given order.
    pub fn select_cols(&self, columns: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.rows * columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            for &j in columns {
                data.push(row[j]);
            }
        }
        Matrix {
            rows: self.rows,
            cols: columns.len(),
            data,
        }
    }

    /// New matrix with `extra`'s columns appended on the right.
    pub fn hstack(&self, extra: &Matrix) -> Matrix {
        assert_eq!(self.rows, extra.rows, "row count mismatch in hstack");
        let cols = self.cols + extra.cols;
        let mut data = Vec::with_capacity(self.rows * cols);
        for i in 0..self.rows {
            data.extend_from_slice(self.row(i));
            data.extend_from_slice(extra.row(i));
        }
        Matrix {
            rows: self.rows,
            cols,
            data,
        }
    }
}

/// Per-hypothesis competition data: a ±1 label L, a winning score W, and a
/// row of side information x.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisTable {
    labels: Vec<i8>,
    scores: Vec<f64>,
    side_info: Matrix,
    ids: Vec<String>,
}

impl HypothesisTable {
    pub fn new(
        labels: Vec<i8>,
        scores: Vec<f64>,
        side_info: Matrix,
        ids: Vec<String>,
    ) -> Result<Self, ModelError> {
        for (index, &l) in labels.iter().enumerate() {
            if l != 1 && l != -1 {
                return Err(ModelError::InvalidLabel {
                    index,
                    value: l as i32,
                });
            }
        }
        if scores.len() != labels.len() {
            return Err(ModelError::SideInfoShape {
                rows: scores.len(),
                expected: labels.len(),
            });
        }
        for (index, &w) in scores.iter().enumerate() {
            if !w.is_finite() {
                return Err(ModelError::NonFiniteScore { index, value: w });
            }
        }
        if side_info.rows() != labels.len() {
            return Err(ModelError::SideInfoShape {
                rows: side_info.rows(),
                expected: labels.len(),
            });
        }
        if ids.len() != labels.len() {
            return Err(ModelError::IdCount {
                got: ids.len(),
                expected: labels.len(),
            });
        }
        Ok(HypothesisTable {
            labels,
            scores,
            side_info,
            ids,
        })
    }

    /// Convenience constructor that numbers hypotheses "0", "1", ….
    pub fn with_default_ids(
        labels: Vec<i8>,
        scores: Vec<f64>,
        side_info: Matrix,
    ) -> Result<Self, ModelError> {
        let ids = (0..labels.len()).map(|i| i.to_string()).collect();
        HypothesisTable::new(labels, scores, side_info, ids)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn side_info(&self) -> &Matrix {
        &self.side_info
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Raw p-value data prior to conversion into competition form.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTable {
    pvalues: Vec<f64>,
    side_info: Matrix,
    ids: Vec<String>,
}

impl PValueTable {
    pub fn new(pvalues: Vec<f64>, side_info: Matrix, ids: Vec<String>) -> Result<Self, ModelError> {
        for (index, &p) in pvalues.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(ModelError::InvalidPValue { index, value: p });
            }
        }
        if side_info.rows() != pvalues.len() {
            return Err(ModelError::SideInfoShape {
                rows: side_info.rows(),
                expected: pvalues.len(),
            });
        }
        if ids.len() != pvalues.len() {
            return Err(ModelError::IdCount {
                got: ids.len(),
                expected: pvalues.len(),
            });
        }
        Ok(PValueTable {
            pvalues,
            side_info,
            ids,
        })
    }

    pub fn with_default_ids(pvalues: Vec<f64>, side_info: Matrix) -> Result<Self, ModelError> {
        let ids = (0..pvalues.len()).map(|i| i.to_string()).collect();
        PValueTable::new(pvalues, side_info, ids)
    }

    pub fn len(&self) -> usize {
        self.pvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pvalues.is_empty()
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    pub fn side_info(&self) -> &Matrix {
        &self.side_info
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }
}

/// Whether the filter controls the false discovery rate in expectation or
/// bounds the realized false discovery proportion with high confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ErrorMode {
    Fdr,
    Fdp,
}

/// Filter thresholds: α (target level), γ (confidence complement for FDP
/// mode), and c (the probability a true null wins as a positive label).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterParams {
    pub alpha: f64,
    pub gamma: f64,
    pub c: f64,
    pub mode: ErrorMode,
}

impl FilterParams {
    pub fn new(alpha: f64, gamma: f64, c: f64, mode: ErrorMode) -> Result<Self, ModelError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ModelError::InvalidParam {
                field: "alpha",
                value: alpha,
                range: "(0,1)",
            });
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(ModelError::InvalidParam {
                field: "gamma",
                value: gamma,
                range: "(0,1)",
            });
        }
        if !(c > 0.0 && c < 1.0) {
            return Err(ModelError::InvalidParam {
                field: "c",
                value: c,
                range: "(0,1)",
            });
        }
        Ok(FilterParams {
            alpha,
            gamma,
            c,
            mode,
        })
    }
}

/// Named random streams derived from one master seed.
///
/// Each consumer owns a dedicated stream so that, e.g., breaking score ties
/// never shifts the draws used for fold assignment. Streams are ChaCha
/// counters keyed by (master seed, stream id, index), so they can be handed
/// out to parallel workers in any order without losing reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SeedSpec {
    pub master_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    DecoySplit,
    FoldAssignment,
    TieBreak,
    Coinflip,
    ClassifierInit,
    Simulation,
}

impl Stream {
    fn id(self) -> u64 {
        match self {
            Stream::DecoySplit => 1,
            Stream::FoldAssignment => 2,
            Stream::TieBreak => 3,
            Stream::Coinflip => 4,
            Stream::ClassifierInit => 5,
            Stream::Simulation => 6,
        }
    }
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        SeedSpec { master_seed }
    }

    /// The RNG for a named stream. Calling twice returns identical
    /// generators; hold one instance when consecutive draws must differ.
    pub fn stream(&self, stream: Stream) -> ChaCha12Rng {
        self.stream_indexed(stream, 0)
    }

    /// An independent RNG for the `index`-th parallel task on a stream.
    pub fn stream_indexed(&self, stream: Stream, index: u64) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream((stream.id() << 32) | index);
        rng
    }
}

/// Output of a filter or a full rescoring run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscoveryList {
    /// Indices (into the original table) of the discovered hypotheses.
    pub indices: Vec<usize>,
    /// Rescored values W̃ for every pseudo target, as (index, score) pairs.
    pub rescored: Vec<(usize, f64)>,
    /// Number of top-ranked hypotheses the filter accepted.
    pub cutoff: usize,
}

/// Permutation ordering `table`'s scores descending; equal scores are
/// shuffled uniformly using draws from `tie_rng`.
pub fn sort_by_score_desc(table: &HypothesisTable, tie_rng: &mut impl Rng) -> Vec<usize> {
    sort_scores_desc(table.scores(), tie_rng)
}

/// Same ordering applied to a bare score slice.
pub fn sort_scores_desc(scores: &[f64], tie_rng: &mut impl Rng) -> Vec<usize> {
    // One random key per element: ties resolve by key, which is a uniform
    // shuffle of each tie group, and the stream advances by exactly n draws
    // regardless of how many ties there are.
    let keys: Vec<u64> = (0..scores.len()).map(|_| tie_rng.gen()).collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("scores are finite by construction")
            .then_with(|| keys[a].cmp(&keys[b]))
    });
    order
}
