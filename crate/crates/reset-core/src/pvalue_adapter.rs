//! Conversion of p-values into competition (label, score) pairs.
//!
//! Small p-values become positive labels and large ones become negative
//! labels via an asymmetric mirror: a p-value in the decoy region (b₁, b₂]
//! is reflected onto the target region [0, a) before the normal quantile is
//! applied, so both labels live on the same score scale. Everything outside
//! the two regions is dropped. The implied probability that a true null
//! lands on the positive side, c₀ = a/(a + b₂ − b₁), is what the downstream
//! filters need to stay calibrated.

use crate::model::{HypothesisTable, Matrix, ModelError, PValueTable};
use crate::numerics;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("invalid conversion regions a={a}, b1={b1}, b2={b2}: need 0 < a ≤ 1/2 ≤ b1 < b2 ≤ 1")]
    InvalidRegions { a: f64, b1: f64, b2: f64 },
    #[error("no hypotheses fall inside the target or decoy regions")]
    NothingKept,
    #[error("all scores are non-finite; cannot pick a replacement maximum")]
    AllScoresInfinite,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
}

/// Target region [0, a) and decoy region (b₁, b₂] for the conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConversionRegions {
    pub a: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Default for ConversionRegions {
    fn default() -> Self {
        ConversionRegions {
            a: 0.5,
            b1: 0.5,
            b2: 1.0,
        }
    }
}

impl ConversionRegions {
    pub fn new(a: f64, b1: f64, b2: f64) -> Result<Self, AdapterError> {
        let regions = ConversionRegions { a, b1, b2 };
        regions.validate()?;
        Ok(regions)
    }

    /// Valid whenever 0 < a ≤ b₁ < b₂ ≤ 1: the target region must sit left
    /// of (and not overlap) the decoy region, which is all the mirror-map
    /// argument behind the null win probability needs. The textbook choice
    /// keeps a ≤ 1/2 ≤ b₁, but asymmetric regions such as [0, 0.3) with
    /// (0.3, 0.9] are legitimate and useful when p-values pile up near 1.
    pub fn validate(&self) -> Result<(), AdapterError> {
        let ConversionRegions { a, b1, b2 } = *self;
        if a > 0.0 && a <= b1 && b1 < b2 && b2 <= 1.0 {
            Ok(())
        } else {
            Err(AdapterError::InvalidRegions { a, b1, b2 })
        }
    }
}

/// Probability that a true null ends up with a positive label: a/(a+b₂−b₁).
pub fn null_win_prob(regions: &ConversionRegions) -> f64 {
    regions.a / (regions.a + regions.b2 - regions.b1)
}

/// Convert p-values to labeled scores.
///
/// A p-value in [0, a) becomes (+1, |Φ⁻¹(p)|); one in (b₁, b₂] becomes
/// (−1, |Φ⁻¹((b₂−p)·a/(b₂−b₁))|); anything else is dropped. The returned
/// index map records, for each kept hypothesis, its position in the input
/// table. Infinite scores (from p = 0 or p = b₂) are replaced by the
/// maximum finite score before the table is built.
pub fn convert_pvalues(
    pt: &PValueTable,
    regions: &ConversionRegions,
) -> Result<(HypothesisTable, Vec<usize>), AdapterError> {
    regions.validate()?;
    let ConversionRegions { a, b1, b2 } = *regions;
    let mut labels = Vec::new();
    let mut scores = Vec::new();
    let mut kept = Vec::new();
    for (i, &p) in pt.pvalues().iter().enumerate() {
        let (label, quantile_arg) = if p < a {
            (1i8, p)
        } else if p > b1 && p <= b2 {
            (-1i8, (b2 - p) * a / (b2 - b1))
        } else {
            continue;
        };
        labels.push(label);
        scores.push(numerics::normal_quantile(quantile_arg)?.abs());
        kept.push(i);
    }
    if kept.is_empty() {
        return Err(AdapterError::NothingKept);
    }
    replace_infinite_scores(&mut scores)?;
    let side_info = pt.side_info().select_rows(&kept);
    let ids = kept.iter().map(|&i| pt.ids()[i].clone()).collect();
    let table = HypothesisTable::new(labels, scores, side_info, ids)?;
    Ok((table, kept))
}

/// Replace every non-finite score with the maximum finite score present.
pub fn replace_infinite_scores(scores: &mut [f64]) -> Result<(), AdapterError> {
    let max_finite = scores
        .iter()
        .copied()
        .filter(|w| w.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max_finite.is_finite() {
        return Err(AdapterError::AllScoresInfinite);
    }
    for w in scores.iter_mut() {
        if !w.is_finite() {
            *w = max_finite;
        }
    }
    Ok(())
}

/// Build a side-information-free conversion straight from raw p-values;
/// convenience for filters that only need (L, W).
pub fn convert_raw(
    pvalues: &[f64],
    regions: &ConversionRegions,
) -> Result<(HypothesisTable, Vec<usize>), AdapterError> {
    let pt = PValueTable::with_default_ids(pvalues.to_vec(), Matrix::zeros(pvalues.len(), 0))?;
    convert_pvalues(&pt, regions)
}
