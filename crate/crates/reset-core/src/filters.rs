//! Error-controlling selection procedures over label/score competitions:
//! Selective SeqStep and SeqStep+, the FDP-stepdown procedure with its
//! coinflip-randomized bounds, the Guo–Romano stepdown, and a
//! Benjamini–Hochberg baseline for p-value input.
//!
//! SeqStep+ walks the ranked labels and keeps the longest prefix whose
//! estimated false discovery rate stays under α; FDP-stepdown instead
//! precomputes binomial confidence bounds δ_i on the number of decoy wins
//! tolerable in the top i scores and stops at the first violation, which
//! yields a high-confidence bound on the realized false discovery
//! proportion rather than on its expectation.

use crate::model::{sort_scores_desc, DiscoveryList, FilterParams, HypothesisTable};
use crate::numerics::{beta_quantile, binom_cdf};
use rand::Rng;

/// Labels arranged by descending score, with cumulative decoy counts.
#[derive(Debug, Clone)]
pub struct RankedLabels {
    /// Permutation position → original index.
    order: Vec<usize>,
    /// Labels in ranked order.
    labels: Vec<i8>,
    /// decoys[k] = number of −1 labels among ranks 1..=k+1.
    decoys: Vec<u64>,
}

impl RankedLabels {
    /// Rank a (scores, labels) pairing, breaking score ties uniformly at
    /// random from `tie_rng`.
    pub fn new(scores: &[f64], labels: &[i8], tie_rng: &mut impl Rng) -> Self {
        assert_eq!(scores.len(), labels.len());
        let order = sort_scores_desc(scores, tie_rng);
        Self::from_order(order, labels)
    }

    pub fn from_table(table: &HypothesisTable, tie_rng: &mut impl Rng) -> Self {
        Self::new(table.scores(), table.labels(), tie_rng)
    }

    /// Adopt an existing descending-score permutation.
    pub fn from_order(order: Vec<usize>, labels: &[i8]) -> Self {
        let ranked: Vec<i8> = order.iter().map(|&i| labels[i]).collect();
        let mut decoys = Vec::with_capacity(ranked.len());
        let mut running = 0u64;
        for &l in &ranked {
            if l == -1 {
                running += 1;
            }
            decoys.push(running);
        }
        RankedLabels {
            order,
            labels: ranked,
            decoys,
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// D_k: decoy wins among the top k ranks (k is 1-based).
    pub fn decoy_count(&self, k: usize) -> u64 {
        if k == 0 {
            0
        } else {
            self.decoys[k - 1]
        }
    }

    /// T_k: target wins among the top k ranks.
    pub fn target_count(&self, k: usize) -> u64 {
        k as u64 - self.decoy_count(k)
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    /// Positively labeled hypotheses among the top k ranks, as original
    /// indices in rank order.
    fn positives_in_top(&self, k: usize) -> Vec<usize> {
        (0..k)
            .filter(|&r| self.labels[r] == 1)
            .map(|r| self.order[r])
            .collect()
    }

    fn to_discoveries(&self, cutoff: usize) -> DiscoveryList {
        DiscoveryList {
            indices: self.positives_in_top(cutoff),
            rescored: Vec::new(),
            cutoff,
        }
    }
}

/// Selective SeqStep (+). Finds k₀ = max{k : (D_k [+1])/(T_k ∨ 1) · c/(1−c) ≤ α}
/// and reports the positive labels in the top k₀ ranks. `plus` adds the +1
/// correction that buys finite-sample FDR control.
pub fn seqstep(ranked: &RankedLabels, params: &FilterParams, plus: bool) -> DiscoveryList {
    let ratio = params.c / (1.0 - params.c);
    let mut k0 = 0usize;
    for k in 1..=ranked.len() {
        let d = ranked.decoy_count(k) + if plus { 1 } else { 0 };
        let t = ranked.target_count(k).max(1);
        if d as f64 / t as f64 * ratio <= params.alpha {
            k0 = k;
        }
    }
    ranked.to_discoveries(k0)
}

/// Decoy-count confidence bounds for the FDP-stepdown procedure.
///
/// δ_i is the largest number of decoy wins tolerable in the top i scores
/// while keeping the binomial tail below γ: the largest d with
/// BinomCDF(d; n(i,d), R) ≤ γ where n(i,d) = ⌊(i−d)α⌋ + 1 + d. Indices
/// below i₀ admit no valid bound at all.
#[derive(Debug, Clone)]
pub struct FdpSdBounds {
    /// First testable index.
    pub i0: usize,
    /// Probability that a true null is a decoy win (λ = 1 − c).
    pub lambda: f64,
    /// Binomial rate for the bound search; equals λ in this single-decoy
    /// competition setting.
    pub r: f64,
    /// delta[j] = δ_{i₀+j}, for i₀ ≤ i ≤ m.
    pub delta: Vec<u64>,
}

impl FdpSdBounds {
    pub fn delta_at(&self, i: usize) -> Option<u64> {
        if i < self.i0 {
            None
        } else {
            self.delta.get(i - self.i0).copied()
        }
    }
}

fn fdp_sd_rate(params: &FilterParams) -> f64 {
    1.0 - params.c
}

fn fdp_sd_i0(params: &FilterParams, r: f64) -> usize {
    let inner = params.gamma.ln() / (1.0 - r).ln();
    let i0 = (inner.ceil() / params.alpha).ceil();
    (i0 as usize).max(1)
}

/// Trial count n(i,d) = ⌊(i−d)α⌋ + 1 + d for the bound at index i, count d.
fn trial_count(i: u64, d: u64, alpha: f64) -> u64 {
    ((i - d) as f64 * alpha).floor() as u64 + 1 + d
}

/// Incremental scanner for δ_i. Along i the bounds never decrease, and for
/// fixed i the binomial tail is non-decreasing in d (raising d by one adds
/// at most one trial, and {X ≤ d} ⊆ {X + B ≤ d + 1} for any extra Bernoulli
/// trial B), so each δ_i is found by resuming the scan from δ_{i−1}.
struct BoundScanner {
    alpha: f64,
    gamma: f64,
    r: f64,
    d: u64,
}

impl BoundScanner {
    fn new(params: &FilterParams, r: f64) -> Self {
        BoundScanner {
            alpha: params.alpha,
            gamma: params.gamma,
            r,
            d: 0,
        }
    }

    fn passes(&self, i: u64, d: u64) -> bool {
        binom_cdf(d, trial_count(i, d, self.alpha), self.r)
            .expect("rate is a probability by construction")
            <= self.gamma
    }

    /// δ_i for the next index (callers advance i one at a time, starting at i₀).
    fn delta(&mut self, i: u64) -> u64 {
        debug_assert!(self.passes(i, self.d), "index below i0 has no valid bound");
        while self.d < i && self.passes(i, self.d + 1) {
            self.d += 1;
        }
        self.d
    }
}

/// Materialize the FDP-stepdown bounds δ_{i₀}..δ_m.
pub fn fdp_sd_bounds(m: usize, params: &FilterParams) -> FdpSdBounds {
    let r = fdp_sd_rate(params);
    let i0 = fdp_sd_i0(params, r);
    let mut scanner = BoundScanner::new(params, r);
    let delta = (i0..=m).map(|i| scanner.delta(i as u64)).collect();
    FdpSdBounds {
        i0,
        lambda: 1.0 - params.c,
        r,
        delta,
    }
}

/// Pointwise bound δ_i at an arbitrary index, including indices below the
/// walk's conservative start i₀. Returns None when even d = 0 fails the
/// tail condition — such an index is untestable.
pub fn fdp_sd_delta_at(i: usize, params: &FilterParams) -> Option<u64> {
    let r = fdp_sd_rate(params);
    let scanner = BoundScanner::new(params, r);
    if !scanner.passes(i as u64, 0) {
        return None;
    }
    let mut d = 0;
    while d < i as u64 && scanner.passes(i as u64, d + 1) {
        d += 1;
    }
    Some(d)
}

/// Per-index coefficients of the coinflip randomization: the probability
/// w_i with which the bound stays at δ_i rather than being raised to δ_i+1.
///
/// p₀ and p₁ are the bound checks at index i for decoy counts δ_i and
/// δ_i+1 — the passing bound and the first failing one — so the blended
/// rejection probability w·p₀ + (1−w)·p₁ equals γ exactly and w always
/// lands in (0, 1].
fn coinflip_weight(i: u64, delta: u64, alpha: f64, gamma: f64, r: f64) -> f64 {
    let k0 = ((i - delta) as f64 * alpha).floor() as u64 + 1;
    let k1 = ((i - delta - 1) as f64 * alpha).floor() as u64 + 1;
    let p0 = binom_cdf(delta, k0 + delta, r).expect("valid rate");
    let p1 = binom_cdf(delta + 1, k1 + delta + 1, r).expect("valid rate");
    (p1 - gamma) / (p1 - p0)
}

/// FDP-stepdown: walk the ranked labels from i₀ upward and stop at the
/// first index whose decoy count exceeds the (randomized) bound δ̄_i.
///
/// The coinflip randomization raises each bound to δ_i + 1 with probability
/// 1 − w′, recovering the confidence budget that the discreteness of the
/// binomial would otherwise waste; once raised, a bound stays raised until
/// the deterministic bound catches up. With `deterministic` set, δ̄_i = δ_i
/// throughout, which never discovers more than the randomized walk on the
/// same input.
pub fn fdp_sd(
    ranked: &RankedLabels,
    params: &FilterParams,
    coin_rng: &mut impl Rng,
    deterministic: bool,
) -> DiscoveryList {
    let m = ranked.len();
    let r = fdp_sd_rate(params);
    let i0 = fdp_sd_i0(params, r);
    if m < i0 {
        return ranked.to_discoveries(0);
    }
    let mut scanner = BoundScanner::new(params, r);
    let mut delta_prev: i64 = -1;
    let mut w_prev = 1.0;
    let mut bar_prev: u64 = 0;
    let mut accepted_i0 = false;
    let mut i = i0;
    while i <= m {
        let delta = scanner.delta(i as u64);
        let bar = if deterministic {
            delta
        } else if delta >= i as u64 {
            // Degenerate corner (only reachable at extreme γ): every decoy
            // count passes at this index, so no confidence is spent and no
            // coinflip is needed.
            delta
        } else if bar_prev == delta + 1 {
            // The elevated bound from an earlier coinflip carries forward.
            bar_prev
        } else {
            let w_i = coinflip_weight(i as u64, delta, params.alpha, params.gamma, r);
            let w_prime = if delta as i64 > delta_prev {
                w_i
            } else {
                w_i / w_prev
            };
            let w_prime = w_prime.clamp(0.0, 1.0);
            w_prev = w_i;
            if coin_rng.gen::<f64>() < w_prime {
                delta
            } else {
                delta + 1
            }
        };
        if ranked.decoy_count(i) > bar {
            break;
        }
        if i == i0 {
            accepted_i0 = true;
        }
        delta_prev = delta as i64;
        bar_prev = bar;
        i += 1;
    }
    let k_fdp = if accepted_i0 { i - 1 } else { 0 };
    ranked.to_discoveries(k_fdp)
}

/// Guo–Romano stepdown on raw p-values: k_GR is the longest prefix of the
/// ascending p-values with p_(j) ≤ δ_j for every j, where δ_j is the
/// γ-quantile of a Beta(⌊αj⌋+1, m−j+1) distribution.
pub fn gr_sd(pvalues: &[f64], alpha: f64, gamma: f64) -> DiscoveryList {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut k_gr = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        let i = rank + 1;
        let k_i = (alpha * i as f64).floor() + 1.0;
        let delta = beta_quantile(k_i, (m - i + 1) as f64, gamma)
            .expect("Beta parameters are positive and gamma lies in (0,1)");
        if pvalues[idx] <= delta {
            k_gr = i;
        } else {
            break;
        }
    }
    DiscoveryList {
        indices: order[..k_gr].to_vec(),
        rescored: Vec::new(),
        cutoff: k_gr,
    }
}

/// Benjamini–Hochberg step-up: reject the i* smallest p-values where
/// i* = max{i : p_(i) ≤ iα/m}.
pub fn bh(pvalues: &[f64], alpha: f64) -> DiscoveryList {
    let m = pvalues.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| pvalues[a].total_cmp(&pvalues[b]));
    let mut i_star = 0usize;
    for (rank, &idx) in order.iter().enumerate() {
        let i = rank + 1;
        if pvalues[idx] <= i as f64 * alpha / m as f64 {
            i_star = i;
        }
    }
    DiscoveryList {
        indices: order[..i_star].to_vec(),
        rescored: Vec::new(),
        cutoff: i_star,
    }
}
