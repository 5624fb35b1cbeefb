//! Synthetic data generators and a Monte Carlo validator.
//!
//! Three generators cover the experimental settings used throughout the test
//! suite:
//!
//! * [`simulate_geometric`] — p-values from one-sided normal tests on a 50x50
//!   lattice, where the false nulls occupy a geometric region of the square
//!   and the lattice coordinates serve as two-dimensional side information.
//! * [`simulate_beta_mixture`] — p-values from a two-group beta mixture whose
//!   mixing proportion and alternative shape are driven by the first two of
//!   one hundred uniform side-information coordinates.
//! * [`simulate_competition`] — label/score pairs built by direct competition
//!   between an observed score and i.i.d. null draws, so that true-null labels
//!   are exactly i.i.d. uniform on {-1, +1} independent of scores and side
//!   information.
//!
//! [`monte_carlo_validate`] repeatedly runs a caller-supplied procedure on
//! freshly generated data and aggregates false discovery proportion and power
//! against the known ground truth.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{HypothesisTable, Matrix, ModelError, PValueTable};
use crate::numerics::normal_cdf;

/// Errors produced by the generators and the Monte Carlo validator.
#[derive(Debug, Error)]
pub enum SimError {
    /// `monte_carlo_validate` was asked for zero runs.
    #[error("monte carlo validation requires at least one run")]
    NoRuns,
    /// The intercept bisection failed to reach the requested tolerance.
    #[error("intercept bisection did not converge within {iterations} iterations")]
    BisectionFailed { iterations: usize },
    /// A generated table violated a model-layer invariant.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which hypotheses are false nulls in a generated data set.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    /// `false_nulls[i]` is true when hypothesis `i` carries real signal.
    pub false_nulls: Vec<bool>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.false_nulls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.false_nulls.is_empty()
    }

    pub fn false_null_count(&self) -> usize {
        self.false_nulls.iter().filter(|&&f| f).count()
    }

    pub fn true_null_count(&self) -> usize {
        self.len() - self.false_null_count()
    }

    /// False discovery proportion of a discovery set: the fraction of
    /// discoveries that are true nulls, with the empty set scored as 0.
    pub fn fdp(&self, discoveries: &[usize]) -> f64 {
        if discoveries.is_empty() {
            return 0.0;
        }
        let false_discoveries = discoveries
            .iter()
            .filter(|&&i| !self.false_nulls[i])
            .count();
        false_discoveries as f64 / discoveries.len() as f64
    }

    /// Fraction of false nulls that were discovered; 0 when there are none.
    pub fn power(&self, discoveries: &[usize]) -> f64 {
        let total = self.false_null_count();
        if total == 0 {
            return 0.0;
        }
        let hits = discoveries.iter().filter(|&&i| self.false_nulls[i]).count();
        hits as f64 / total as f64
    }
}

// ---------------------------------------------------------------------------
// Geometric lattice simulation
// ---------------------------------------------------------------------------

/// Shape of the false-null region on the lattice square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometricScenario {
    /// Disk of radius 30 centered at the origin.
    CircleCenter,
    /// Disk of radius 30 centered at (65, 65).
    CircleCorner,
    /// Axis-aligned ellipse centered at the origin with semi-axes (60, 20).
    Ellipse,
}

/// Configuration for the lattice simulation: 2500 hypotheses on a 50x50
/// equally spaced grid over [-100, 100]^2, with z-scores drawn N(mean, 1)
/// inside the scenario region and N(0, 1) outside, and p = 1 - Phi(z).
#[derive(Debug, Clone)]
pub struct GeometricSimSpec {
    pub scenario: GeometricScenario,
    /// Mean shift of false-null z-scores (2.0 in the standard setting).
    pub signal_mean: f64,
}

impl GeometricSimSpec {
    pub const GRID_SIDE: usize = 50;

    pub fn new(scenario: GeometricScenario) -> Self {
        GeometricSimSpec {
            scenario,
            signal_mean: 2.0,
        }
    }

    /// Total number of hypotheses (one per lattice point).
    pub fn m(&self) -> usize {
        Self::GRID_SIDE * Self::GRID_SIDE
    }

    /// The lattice points in row-major order: 50 equally spaced values per
    /// axis including both endpoints of [-100, 100].
    pub fn lattice() -> Vec<(f64, f64)> {
        let side = Self::GRID_SIDE;
        let coord = |j: usize| -100.0 + 200.0 * j as f64 / (side - 1) as f64;
        let mut points = Vec::with_capacity(side * side);
        for jy in 0..side {
            for jx in 0..side {
                points.push((coord(jx), coord(jy)));
            }
        }
        points
    }

    /// Whether a lattice point lies inside the scenario's false-null region.
    pub fn in_region(&self, x: f64, y: f64) -> bool {
        match self.scenario {
            GeometricScenario::CircleCenter => x * x + y * y <= 900.0,
            GeometricScenario::CircleCorner => {
                let dx = x - 65.0;
                let dy = y - 65.0;
                dx * dx + dy * dy <= 900.0
            }
            GeometricScenario::Ellipse => {
                let ax = x / 60.0;
                let ay = y / 20.0;
                ax * ax + ay * ay <= 1.0
            }
        }
    }
}

/// Draws one lattice data set: p-values with the lattice coordinates as
/// side information, plus the ground-truth false-null indicator.
pub fn simulate_geometric(
    spec: &GeometricSimSpec,
    rng: &mut impl Rng,
) -> Result<(PValueTable, GroundTruth), SimError> {
    let points = GeometricSimSpec::lattice();
    let m = points.len();
    let mut pvalues = Vec::with_capacity(m);
    let mut false_nulls = Vec::with_capacity(m);
    let mut side = Matrix::zeros(m, 2);
    for (i, &(x, y)) in points.iter().enumerate() {
        let signal = spec.in_region(x, y);
        let mean = if signal { spec.signal_mean } else { 0.0 };
        let noise: f64 = StandardNormal.sample(rng);
        let z = mean + noise;
        pvalues.push(1.0 - normal_cdf(z));
        false_nulls.push(signal);
        side.set(i, 0, x);
        side.set(i, 1, y);
    }
    let table = PValueTable::with_default_ids(pvalues, side)?;
    Ok((table, GroundTruth { false_nulls }))
}

// ---------------------------------------------------------------------------
// Beta mixture simulation
// ---------------------------------------------------------------------------

/// Configuration for the two-group beta mixture: each hypothesis gets `d`
/// i.i.d. U[0, 1] side-information coordinates; it is a false null with
/// probability pi(x) = logistic(theta0 + x'theta), and false-null p-values
/// follow Beta(1/mu(x), 1) with mu(x) = max(x'beta, 1). The intercept theta0
/// is solved at generation time so that the realized mean of pi equals
/// `target_pi_mean`.
#[derive(Debug, Clone)]
pub struct BetaMixtureSpec {
    pub m: usize,
    pub d: usize,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub target_pi_mean: f64,
}

impl BetaMixtureSpec {
    /// The standard setting: m = 2000, d = 100, theta = (3, 3, 0, ...),
    /// beta = (2, 2, 0, ...), mean false-null proportion 0.3.
    pub fn standard() -> Self {
        let d = 100;
        let mut theta = vec![0.0; d];
        theta[0] = 3.0;
        theta[1] = 3.0;
        let mut beta = vec![0.0; d];
        beta[0] = 2.0;
        beta[1] = 2.0;
        BetaMixtureSpec {
            m: 2000,
            d,
            theta,
            beta,
            target_pi_mean: 0.3,
        }
    }

    /// Mixing proportion pi(x) = logistic(theta0 + x'theta).
    pub fn pi(&self, theta0: f64, x: &[f64]) -> f64 {
        let t: f64 = x.iter().zip(&self.theta).map(|(a, b)| a * b).sum();
        1.0 / (1.0 + (-(theta0 + t)).exp())
    }

    /// Alternative shape mu(x) = max(x'beta, 1).
    pub fn mu(&self, x: &[f64]) -> f64 {
        let t: f64 = x.iter().zip(&self.beta).map(|(a, b)| a * b).sum();
        t.max(1.0)
    }

    /// Solves theta0 by bisection so that the mean of pi over the given rows
    /// is within 1e-7 of `target_pi_mean`. The mean is strictly increasing
    /// in theta0, so bisection on [-60, 60] converges in well under the
    /// 200-iteration budget.
    pub fn solve_theta0(&self, xs: &Matrix) -> Result<f64, SimError> {
        const MAX_ITERATIONS: usize = 200;
        const TOLERANCE: f64 = 1e-7;
        let mean_pi = |theta0: f64| -> f64 {
            let total: f64 = (0..xs.rows()).map(|i| self.pi(theta0, xs.row(i))).sum();
            total / xs.rows() as f64
        };
        let mut lo = -60.0;
        let mut hi = 60.0;
        for _ in 0..MAX_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let mean = mean_pi(mid);
            if (mean - self.target_pi_mean).abs() <= TOLERANCE {
                return Ok(mid);
            }
            if mean < self.target_pi_mean {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Err(SimError::BisectionFailed {
            iterations: MAX_ITERATIONS,
        })
    }
}

/// One draw from the beta mixture, together with the solved intercept.
#[derive(Debug, Clone)]
pub struct BetaMixtureSample {
    pub table: PValueTable,
    pub truth: GroundTruth,
    pub theta0: f64,
}

/// Draws one beta-mixture data set. Side information is drawn first, the
/// intercept is solved against the realized draws, each hypothesis is then
/// labeled false-null with probability pi(x_i), and p-values are drawn as
/// U[0, 1] under the null and Beta(1/mu(x_i), 1) under the alternative via
/// inverse-CDF sampling (p = u^{mu}, since the Beta(1/mu, 1) CDF is
/// t -> t^{1/mu}).
pub fn simulate_beta_mixture(
    spec: &BetaMixtureSpec,
    rng: &mut impl Rng,
) -> Result<BetaMixtureSample, SimError> {
    let mut side = Matrix::zeros(spec.m, spec.d);
    for i in 0..spec.m {
        for j in 0..spec.d {
            side.set(i, j, rng.gen::<f64>());
        }
    }
    let theta0 = spec.solve_theta0(&side)?;
    let mut pvalues = Vec::with_capacity(spec.m);
    let mut false_nulls = Vec::with_capacity(spec.m);
    for i in 0..spec.m {
        let x = side.row(i);
        let signal = rng.gen::<f64>() < spec.pi(theta0, x);
        let u = rng.gen::<f64>();
        let p = if signal { u.powf(spec.mu(x)) } else { u };
        pvalues.push(p);
        false_nulls.push(signal);
    }
    let table = PValueTable::with_default_ids(pvalues, side)?;
    Ok(BetaMixtureSample {
        table,
        truth: GroundTruth { false_nulls },
        theta0,
    })
}

// ---------------------------------------------------------------------------
// Competition simulation
// ---------------------------------------------------------------------------

/// How side information relates to false-null status in the competition
/// generator.
#[derive(Debug, Clone, Copy)]
pub enum CompetitionSideInfo {
    /// No side-information columns at all.
    None,
    /// `dim` standard-normal coordinates for every hypothesis, carrying no
    /// information about false-null status.
    Uninformative { dim: usize },
    /// Two coordinates drawn N(mu, I): mu = (0, 0) for true nulls and
    /// mu = +-(offset, offset) for false nulls, the common sign drawn
    /// uniformly per hypothesis.
    ClassConditional { offset: f64 },
}

/// Configuration for direct score competition. Each hypothesis owns an
/// observed score `Z` (standard normal under the null, mean-shifted for
/// false nulls) and `decoys_per_hypothesis` i.i.d. standard-normal decoy
/// scores. The reported score is the maximum of all draws and the label is
/// +1 exactly when the observed score wins, so true-null labels are i.i.d.
/// with P(L = +1) = 1/(decoys + 1) independent of everything else.
#[derive(Debug, Clone)]
pub struct CompetitionSimSpec {
    pub m: usize,
    /// Fraction of hypotheses that are false nulls; the realized count is
    /// `round(m * fraction)` placed at uniformly random positions.
    pub false_null_fraction: f64,
    pub decoys_per_hypothesis: usize,
    /// Mean of the false-null observed score.
    pub alternative_shift: f64,
    pub side_info: CompetitionSideInfo,
}

impl CompetitionSimSpec {
    /// Pure-null data with two uninformative side-information columns.
    pub fn all_null(m: usize) -> Self {
        CompetitionSimSpec {
            m,
            false_null_fraction: 0.0,
            decoys_per_hypothesis: 1,
            alternative_shift: 3.0,
            side_info: CompetitionSideInfo::Uninformative { dim: 2 },
        }
    }

    /// Signal-bearing data with class-conditional side information at
    /// offset 2.
    pub fn with_signal(m: usize, false_null_fraction: f64, alternative_shift: f64) -> Self {
        CompetitionSimSpec {
            m,
            false_null_fraction,
            decoys_per_hypothesis: 1,
            alternative_shift,
            side_info: CompetitionSideInfo::ClassConditional { offset: 2.0 },
        }
    }

    /// Probability that a true null is labeled +1.
    pub fn c0(&self) -> f64 {
        1.0 / (self.decoys_per_hypothesis as f64 + 1.0)
    }
}

/// Draws one competition data set: labels, winning scores, side information,
/// and the ground-truth false-null indicator.
pub fn simulate_competition(
    spec: &CompetitionSimSpec,
    rng: &mut impl Rng,
) -> Result<(HypothesisTable, GroundTruth), SimError> {
    let m = spec.m;
    let n_false = (m as f64 * spec.false_null_fraction).round() as usize;
    let mut false_nulls = vec![false; m];
    for i in sample(rng, m, n_false.min(m)) {
        false_nulls[i] = true;
    }

    let side_dim = match spec.side_info {
        CompetitionSideInfo::None => 0,
        CompetitionSideInfo::Uninformative { dim } => dim,
        CompetitionSideInfo::ClassConditional { .. } => 2,
    };
    let mut labels = Vec::with_capacity(m);
    let mut scores = Vec::with_capacity(m);
    let mut side = Matrix::zeros(m, side_dim);
    for (i, &is_false_null) in false_nulls.iter().enumerate() {
        let shift = if is_false_null {
            spec.alternative_shift
        } else {
            0.0
        };
        let noise: f64 = StandardNormal.sample(rng);
        let observed = shift + noise;
        let mut best_decoy = f64::NEG_INFINITY;
        for _ in 0..spec.decoys_per_hypothesis {
            let d: f64 = StandardNormal.sample(rng);
            best_decoy = best_decoy.max(d);
        }
        scores.push(observed.max(best_decoy));
        let label = if observed > best_decoy {
            1
        } else if observed < best_decoy {
            -1
        } else if rng.gen_bool(0.5) {
            1
        } else {
            -1
        };
        labels.push(label);
        match spec.side_info {
            CompetitionSideInfo::None => {}
            CompetitionSideInfo::Uninformative { dim } => {
                for j in 0..dim {
                    let v: f64 = StandardNormal.sample(rng);
                    side.set(i, j, v);
                }
            }
            CompetitionSideInfo::ClassConditional { offset } => {
                let mean = if is_false_null {
                    if rng.gen_bool(0.5) {
                        offset
                    } else {
                        -offset
                    }
                } else {
                    0.0
                };
                for j in 0..2 {
                    let noise: f64 = StandardNormal.sample(rng);
                    side.set(i, j, mean + noise);
                }
            }
        }
    }
    let table = HypothesisTable::with_default_ids(labels, scores, side)?;
    Ok((table, GroundTruth { false_nulls }))
}

// ---------------------------------------------------------------------------
// Monte Carlo validation
// ---------------------------------------------------------------------------

/// Aggregated error-control and power estimates over repeated runs.
#[derive(Debug, Clone)]
pub struct MonteCarloReport {
    pub runs: usize,
    /// Mean false discovery proportion across runs.
    pub fdr: f64,
    pub fdr_se: f64,
    /// Fraction of runs whose FDP strictly exceeded the evaluation level.
    pub fdp_exceed_rate: f64,
    pub fdp_exceed_se: f64,
    /// Mean fraction of false nulls discovered.
    pub mean_power: f64,
    pub power_se: f64,
    /// Mean number of discoveries per run.
    pub mean_discoveries: f64,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `run_once(run_index)` for each of `runs` independent replicates and
/// aggregates FDP (against `exceed_level` for the exceedance rate) and power.
/// Each call must generate its own data and return the discovery indices
/// together with the matching ground truth; deriving the run's randomness
/// from the supplied index keeps replicates independent and the whole
/// validation reproducible. Runs execute in parallel; aggregation order is
/// fixed by run index.
pub fn monte_carlo_validate<F>(
    runs: usize,
    exceed_level: f64,
    run_once: F,
) -> Result<MonteCarloReport, SimError>
where
    F: Fn(u64) -> (Vec<usize>, GroundTruth) + Sync,
{
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    let per_run: Vec<(f64, f64, f64)> = (0..runs as u64)
        .into_par_iter()
        .map(|run| {
            let (discoveries, truth) = run_once(run);
            (
                truth.fdp(&discoveries),
                truth.power(&discoveries),
                discoveries.len() as f64,
            )
        })
        .collect();
    let fdps: Vec<f64> = per_run.iter().map(|r| r.0).collect();
    let powers: Vec<f64> = per_run.iter().map(|r| r.1).collect();
    let counts: Vec<f64> = per_run.iter().map(|r| r.2).collect();
    let exceeds: Vec<f64> = fdps
        .iter()
        .map(|&f| if f > exceed_level { 1.0 } else { 0.0 })
        .collect();
    let (fdr, fdr_se) = mean_and_se(&fdps);
    let (fdp_exceed_rate, fdp_exceed_se) = mean_and_se(&exceeds);
    let (mean_power, power_se) = mean_and_se(&powers);
    let (mean_discoveries, _) = mean_and_se(&counts);
    Ok(MonteCarloReport {
        runs,
        fdr,
        fdr_se,
        fdp_exceed_rate,
        fdp_exceed_se,
        mean_power,
        power_se,
        mean_discoveries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filters::{bh, seqstep, RankedLabels};
    use crate::model::{ErrorMode, FilterParams, SeedSpec, Stream};
    use crate::numerics::normal_quantile;

    fn rng_for(seed: u64, run: u64) -> rand_chacha::ChaCha12Rng {
        SeedSpec::new(seed).stream_indexed(Stream::Simulation, run)
    }

    /// Kolmogorov-Smirnov distance between a sample and the uniform CDF.
    fn ks_uniform(sample: &mut [f64]) -> f64 {
        sample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = sample.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &p) in sample.iter().enumerate() {
            let hi = (i as f64 + 1.0) / n - p;
            let lo = p - i as f64 / n;
            d = d.max(hi).max(lo);
        }
        d
    }

    #[test]
    fn geometric_lattice_is_unique_and_m_is_2500() {
        let points = GeometricSimSpec::lattice();
        assert_eq!(points.len(), 2500);
        let mut seen: Vec<(i64, i64)> = points
            .iter()
            .map(|&(x, y)| ((x * 1e6).round() as i64, (y * 1e6).round() as i64))
            .collect();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 2500);
        assert_eq!(points[0], (-100.0, -100.0));
        assert_eq!(points[2499], (100.0, 100.0));
    }

    #[test]
    fn geometric_regions_match_direct_geometry() {
        // The false-null set must be exactly the lattice points inside the
        // region, and each scenario's region is nonempty and a strict subset.
        for scenario in [
            GeometricScenario::CircleCenter,
            GeometricScenario::CircleCorner,
            GeometricScenario::Ellipse,
        ] {
            let spec = GeometricSimSpec::new(scenario);
            let mut rng = rng_for(11, 0);
            let (_, truth) = simulate_geometric(&spec, &mut rng).unwrap();
            let points = GeometricSimSpec::lattice();
            for (i, &(x, y)) in points.iter().enumerate() {
                assert_eq!(truth.false_nulls[i], spec.in_region(x, y));
            }
            let k = truth.false_null_count();
            assert!(k > 0 && k < 2500);
        }
        // Spot checks: the near-origin lattice point (-2.0408..., -2.0408...)
        // sits inside the center circle; the corner point (-100, -100) does
        // not.
        let spec = GeometricSimSpec::new(GeometricScenario::CircleCenter);
        assert!(spec.in_region(-100.0 + 200.0 * 24.0 / 49.0, -100.0 + 200.0 * 24.0 / 49.0));
        assert!(!spec.in_region(-100.0, -100.0));
    }

    #[test]
    fn geometric_true_null_pvalues_are_uniform() {
        // Pool the true-null p-values from five runs; with ~2300 nulls per
        // run the pooled sample has n > 11000, and the level-0.01 KS critical
        // value is 1.628 / sqrt(n).
        let spec = GeometricSimSpec::new(GeometricScenario::CircleCenter);
        let mut pooled = Vec::new();
        for run in 0..5 {
            let mut rng = rng_for(23, run);
            let (table, truth) = simulate_geometric(&spec, &mut rng).unwrap();
            for i in 0..table.len() {
                if !truth.false_nulls[i] {
                    pooled.push(table.pvalues()[i]);
                }
            }
        }
        let n = pooled.len() as f64;
        let d = ks_uniform(&mut pooled);
        assert!(d < 1.628 / n.sqrt(), "KS distance {d} at n = {n}");
    }

    #[test]
    fn geometric_false_null_z_mean_is_two() {
        // Recover z = Phi^{-1}(1 - p) and average over all false nulls in
        // 100 runs; the mean must sit within 3 SE of 2.
        let spec = GeometricSimSpec::new(GeometricScenario::CircleCenter);
        let mut zs = Vec::new();
        for run in 0..100 {
            let mut rng = rng_for(29, run);
            let (table, truth) = simulate_geometric(&spec, &mut rng).unwrap();
            for i in 0..table.len() {
                if truth.false_nulls[i] {
                    zs.push(normal_quantile(1.0 - table.pvalues()[i]).unwrap());
                }
            }
        }
        let (mean, se) = mean_and_se(&zs);
        assert!((mean - 2.0).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn beta_mixture_theta0_hits_target_mean() {
        let spec = BetaMixtureSpec::standard();
        let mut rng = rng_for(31, 0);
        let sample = simulate_beta_mixture(&spec, &mut rng).unwrap();
        assert_eq!(sample.table.len(), 2000);
        assert_eq!(sample.table.side_info().cols(), 100);
        let side = sample.table.side_info();
        let mean: f64 = (0..side.rows())
            .map(|i| spec.pi(sample.theta0, side.row(i)))
            .sum::<f64>()
            / side.rows() as f64;
        assert!((mean - 0.3).abs() <= 1e-6, "mean pi {mean}");
    }

    #[test]
    fn beta_mixture_ignores_noise_coordinates() {
        // theta and beta are supported on the first two coordinates, so
        // permuting coordinates 3..100 changes neither pi nor mu.
        let spec = BetaMixtureSpec::standard();
        let mut rng = rng_for(37, 0);
        let x: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
        let mut permuted = x.clone();
        permuted[2..].reverse();
        permuted[2..].rotate_left(17);
        assert_eq!(spec.pi(-1.3, &x), spec.pi(-1.3, &permuted));
        assert_eq!(spec.mu(&x), spec.mu(&permuted));
    }

    #[test]
    fn beta_mixture_false_null_pvalues_match_beta_cdf() {
        // Probability integral transform: if p ~ Beta(1/mu, 1) then p^{1/mu}
        // is U[0, 1]. Pooling the transformed false-null p-values across runs
        // must pass the KS test; as a closed-form spot check, mu = 2 gives
        // P(p <= 0.25) = 0.25^{1/2} = 0.5.
        let spec = BetaMixtureSpec::standard();
        let mut transformed = Vec::new();
        let mut below_quarter = 0usize;
        let mut mu_two = 0usize;
        for run in 0..20 {
            let mut rng = rng_for(41, run);
            let sample = simulate_beta_mixture(&spec, &mut rng).unwrap();
            let side = sample.table.side_info();
            for i in 0..sample.table.len() {
                if sample.truth.false_nulls[i] {
                    let mu = spec.mu(side.row(i));
                    let p = sample.table.pvalues()[i];
                    transformed.push(p.powf(1.0 / mu));
                    if (mu - 2.0).abs() < 0.05 {
                        mu_two += 1;
                        if p <= 0.25 {
                            below_quarter += 1;
                        }
                    }
                }
            }
        }
        let n = transformed.len() as f64;
        let d = ks_uniform(&mut transformed);
        assert!(d < 1.628 / n.sqrt(), "KS distance {d} at n = {n}");
        // Binomial(mu_two, ~0.5) concentration: allow 3 standard deviations.
        let rate = below_quarter as f64 / mu_two as f64;
        let expected = 0.25f64.sqrt();
        let se = (expected * (1.0 - expected) / mu_two as f64).sqrt();
        assert!(
            (rate - expected).abs() <= 3.0 * se,
            "rate {rate} over {mu_two}"
        );
    }

    #[test]
    fn competition_null_labels_are_symmetric_coin_flips() {
        // 10^5 pure-null hypotheses: the label mean must be within 3 SE of 0
        // (SE = 1/sqrt(n) for +-1 flips), and labels must be uncorrelated
        // with the winning scores.
        let spec = CompetitionSimSpec::all_null(100_000);
        let mut rng = rng_for(43, 0);
        let (table, truth) = simulate_competition(&spec, &mut rng).unwrap();
        assert_eq!(truth.false_null_count(), 0);
        let labels: Vec<f64> = table.labels().iter().map(|&l| l as f64).collect();
        let (label_mean, _) = mean_and_se(&labels);
        let n = labels.len() as f64;
        assert!(
            label_mean.abs() <= 3.0 / n.sqrt(),
            "label mean {label_mean}"
        );

        let scores = table.scores();
        let (score_mean, _) = mean_and_se(scores);
        let mut cov = 0.0;
        let mut var_l = 0.0;
        let mut var_w = 0.0;
        for i in 0..scores.len() {
            let dl = labels[i] - label_mean;
            let dw = scores[i] - score_mean;
            cov += dl * dw;
            var_l += dl * dl;
            var_w += dw * dw;
        }
        let corr = cov / (var_l.sqrt() * var_w.sqrt());
        assert!(
            corr.abs() <= 3.0 / n.sqrt(),
            "label/score correlation {corr}"
        );
    }

    #[test]
    fn competition_with_extra_decoys_shrinks_null_win_rate() {
        // Two decoys per hypothesis: the observed score wins with probability
        // 1/3 under the null. 30000 draws give SE = sqrt(2/9)/sqrt(n).
        let spec = CompetitionSimSpec {
            m: 30_000,
            false_null_fraction: 0.0,
            decoys_per_hypothesis: 2,
            alternative_shift: 3.0,
            side_info: CompetitionSideInfo::None,
        };
        assert_eq!(spec.c0(), 1.0 / 3.0);
        let mut rng = rng_for(47, 0);
        let (table, _) = simulate_competition(&spec, &mut rng).unwrap();
        let wins = table.labels().iter().filter(|&&l| l == 1).count() as f64;
        let rate = wins / spec.m as f64;
        let se = (2.0 / 9.0 / spec.m as f64).sqrt();
        assert!((rate - 1.0 / 3.0).abs() <= 3.0 * se, "win rate {rate}");
    }

    #[test]
    fn competition_class_conditional_side_info_separates_classes() {
        // False nulls draw side info at mean +-(2, 2) with a shared sign, so
        // E[x1 * x2] = 4 for false nulls versus 0 for true nulls, and
        // E[x1^2] = 5 versus 1.
        let spec = CompetitionSimSpec::with_signal(20_000, 0.5, 3.0);
        let mut rng = rng_for(53, 0);
        let (table, truth) = simulate_competition(&spec, &mut rng).unwrap();
        assert_eq!(truth.false_null_count(), 10_000);
        let side = table.side_info();
        let mut cross_false = 0.0;
        let mut cross_true = 0.0;
        let mut square_false = 0.0;
        let mut square_true = 0.0;
        for i in 0..table.len() {
            let x1 = side.get(i, 0);
            let x2 = side.get(i, 1);
            if truth.false_nulls[i] {
                cross_false += x1 * x2;
                square_false += x1 * x1;
            } else {
                cross_true += x1 * x2;
                square_true += x1 * x1;
            }
        }
        cross_false /= 10_000.0;
        cross_true /= 10_000.0;
        square_false /= 10_000.0;
        square_true /= 10_000.0;
        assert!(
            (cross_false - 4.0).abs() < 0.5,
            "false-null cross moment {cross_false}"
        );
        assert!(
            cross_true.abs() < 0.2,
            "true-null cross moment {cross_true}"
        );
        assert!(
            (square_false - 5.0).abs() < 0.5,
            "false-null square {square_false}"
        );
        assert!(
            (square_true - 1.0).abs() < 0.2,
            "true-null square {square_true}"
        );
    }

    #[test]
    fn competition_false_nulls_score_higher_on_average() {
        let spec = CompetitionSimSpec::with_signal(10_000, 0.2, 3.0);
        let mut rng = rng_for(59, 0);
        let (table, truth) = simulate_competition(&spec, &mut rng).unwrap();
        let mut signal = Vec::new();
        let mut null = Vec::new();
        for i in 0..table.len() {
            if truth.false_nulls[i] {
                signal.push(table.scores()[i]);
            } else {
                null.push(table.scores()[i]);
            }
        }
        let (signal_mean, _) = mean_and_se(&signal);
        let (null_mean, _) = mean_and_se(&null);
        assert!(
            signal_mean > null_mean + 1.0,
            "{signal_mean} vs {null_mean}"
        );
        // Almost every false null should out-score its decoy: P(N(3,1) >
        // N(0,1)) = Phi(3/sqrt(2)) ~ 0.983.
        let plus = (0..table.len())
            .filter(|&i| truth.false_nulls[i] && table.labels()[i] == 1)
            .count() as f64;
        assert!(plus / truth.false_null_count() as f64 > 0.95);
    }

    #[test]
    fn generators_are_deterministic_in_the_seed() {
        let geo = GeometricSimSpec::new(GeometricScenario::Ellipse);
        let (ta, _) = simulate_geometric(&geo, &mut rng_for(61, 7)).unwrap();
        let (tb, _) = simulate_geometric(&geo, &mut rng_for(61, 7)).unwrap();
        assert_eq!(ta.pvalues(), tb.pvalues());

        let beta = BetaMixtureSpec::standard();
        let sa = simulate_beta_mixture(&beta, &mut rng_for(61, 8)).unwrap();
        let sb = simulate_beta_mixture(&beta, &mut rng_for(61, 8)).unwrap();
        assert_eq!(sa.table.pvalues(), sb.table.pvalues());
        assert_eq!(sa.theta0, sb.theta0);

        let comp = CompetitionSimSpec::with_signal(500, 0.1, 3.0);
        let (ca, _) = simulate_competition(&comp, &mut rng_for(61, 9)).unwrap();
        let (cb, _) = simulate_competition(&comp, &mut rng_for(61, 9)).unwrap();
        assert_eq!(ca.scores(), cb.scores());
        assert_eq!(ca.labels(), cb.labels());
    }

    #[test]
    fn monte_carlo_rejects_zero_runs() {
        let result = monte_carlo_validate(0, 0.1, |_| {
            (
                vec![],
                GroundTruth {
                    false_nulls: vec![],
                },
            )
        });
        assert!(matches!(result, Err(SimError::NoRuns)));
    }

    #[test]
    fn monte_carlo_discover_everything_recovers_null_fraction() {
        // Discovering all 10 hypotheses with 3 false nulls gives FDP = 7/10
        // in every run, so FDR = 0.7 exactly with zero variance, and power 1.
        let truth_template = vec![
            true, false, false, true, false, false, false, true, false, false,
        ];
        let report = monte_carlo_validate(25, 0.1, |_| {
            (
                (0..10).collect(),
                GroundTruth {
                    false_nulls: truth_template.clone(),
                },
            )
        })
        .unwrap();
        assert_eq!(report.runs, 25);
        assert!((report.fdr - 0.7).abs() < 1e-12);
        assert!(report.fdr_se < 1e-12);
        assert_eq!(report.mean_power, 1.0);
        assert_eq!(report.fdp_exceed_rate, 1.0);
        assert_eq!(report.mean_discoveries, 10.0);
    }

    #[test]
    fn monte_carlo_bh_on_all_null_uniforms_controls_fdr() {
        // Classical guarantee as oracle: BH at alpha = 0.1 on 100 uniform
        // p-values keeps FDR <= 0.1; 2000 runs must stay within 3 SE.
        let report = monte_carlo_validate(2000, 0.1, |run| {
            let mut rng = rng_for(67, run);
            let pvalues: Vec<f64> = (0..100).map(|_| rng.gen::<f64>()).collect();
            let discoveries = bh(&pvalues, 0.1);
            (
                discoveries.indices,
                GroundTruth {
                    false_nulls: vec![false; 100],
                },
            )
        })
        .unwrap();
        assert!(
            report.fdr <= 0.1 + 3.0 * report.fdr_se,
            "fdr {} se {}",
            report.fdr,
            report.fdr_se
        );
    }

    #[test]
    fn monte_carlo_seqstep_plus_on_all_null_competition_controls_fdr() {
        // Finite-sample guarantee on competition data with zero false nulls:
        // SeqStep+ at alpha = 0.05, c = 1/2 keeps FDR <= 0.05 over 2000 runs.
        let spec = CompetitionSimSpec::all_null(200);
        let params = FilterParams::new(0.05, 0.1, 0.5, ErrorMode::Fdr).unwrap();
        let report = monte_carlo_validate(2000, 0.05, |run| {
            let mut rng = rng_for(71, run);
            let (table, truth) = simulate_competition(&spec, &mut rng).unwrap();
            let mut tie_rng = rng_for(72, run);
            let ranked = RankedLabels::from_table(&table, &mut tie_rng);
            let discoveries = seqstep(&ranked, &params, true);
            (discoveries.indices, truth)
        })
        .unwrap();
        assert!(
            report.fdr <= 0.05 + 3.0 * report.fdr_se,
            "fdr {} se {}",
            report.fdr,
            report.fdr_se
        );
    }
}
