//! The three classifier families behind the rescoring engine — random
//! forest, small feedforward neural networks, and a spline additive model —
//! behind a single train/score contract.
//!
//! All three are trained from scratch here rather than wrapped from a
//! library: the ensemble trains hundreds of models per run inside Monte
//! Carlo loops, so the implementations favor tight inner loops and
//! allocation reuse, and every source of randomness comes from the caller's
//! RNG so runs replay bit-identically.

use crate::model::Matrix;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("training labels contain a single class; need both +1 and -1")]
    SingleClass,
    #[error("feature matrix has {rows} rows but {labels} labels")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("scoring features have {got} columns but the model was trained on {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("{0}")]
    NumericalFailure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    RandomForest,
    SplineAdditive,
    NeuralNet,
    /// Scores every input 0.5 regardless of features — a degenerate
    /// baseline for diagnostics and for exercising the rescoring pipeline's
    /// tie handling.
    Constant,
}

/// Configuration of one classifier in the ensemble grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierSpec {
    pub kind: ClassifierKind,
    /// Hidden units h for the neural net.
    pub nn_hidden: usize,
    /// Weight-decay penalty λ for the neural net.
    pub nn_decay: f64,
    pub rf_trees: usize,
    pub spline_df: usize,
}

impl ClassifierSpec {
    pub fn random_forest() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::RandomForest,
            nn_hidden: 0,
            nn_decay: 0.0,
            rf_trees: 500,
            spline_df: 5,
        }
    }

    pub fn spline_additive() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::SplineAdditive,
            ..Self::random_forest()
        }
    }

    pub fn neural_net(decay: f64, hidden: usize) -> Self {
        ClassifierSpec {
            kind: ClassifierKind::NeuralNet,
            nn_hidden: hidden,
            nn_decay: decay,
            ..Self::random_forest()
        }
    }

    pub fn constant() -> Self {
        ClassifierSpec {
            kind: ClassifierKind::Constant,
            ..Self::random_forest()
        }
    }

    pub fn describe(&self) -> String {
        match self.kind {
            ClassifierKind::RandomForest => format!("rf[trees={}]", self.rf_trees),
            ClassifierKind::SplineAdditive => format!("spline[df={}]", self.spline_df),
            ClassifierKind::NeuralNet => {
                format!("nn[decay={},hidden={}]", self.nn_decay, self.nn_hidden)
            }
            ClassifierKind::Constant => "constant".to_string(),
        }
    }
}

/// A fitted model plus whatever the fit had to say for itself.
#[derive(Debug, Clone)]
pub struct TrainedScorer {
    model: FittedModel,
    n_features: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
enum FittedModel {
    Forest(Forest),
    Net(Net),
    Spline(SplineModel),
    Constant,
}

/// Train a classifier on ±1 labels. Higher scores mean stronger evidence
/// for the positive class.
pub fn train(
    spec: &ClassifierSpec,
    features: &Matrix,
    labels: &[i8],
    rng: &mut impl Rng,
) -> Result<TrainedScorer, ClassifierError> {
    if features.rows() != labels.len() {
        return Err(ClassifierError::ShapeMismatch {
            rows: features.rows(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(ClassifierError::EmptyTrainingSet);
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == labels.len() {
        return Err(ClassifierError::SingleClass);
    }
    let mut warnings = Vec::new();
    let model = match spec.kind {
        ClassifierKind::RandomForest => {
            FittedModel::Forest(Forest::fit(features, labels, spec.rf_trees, rng))
        }
        ClassifierKind::NeuralNet => FittedModel::Net(Net::fit(
            features,
            labels,
            spec.nn_hidden,
            spec.nn_decay,
            rng,
            &mut warnings,
        )?),
        ClassifierKind::SplineAdditive => FittedModel::Spline(SplineModel::fit(
            features,
            labels,
            spec.spline_df,
            &mut warnings,
        )?),
        ClassifierKind::Constant => FittedModel::Constant,
    };
    Ok(TrainedScorer {
        model,
        n_features: features.cols(),
        warnings,
    })
}

impl TrainedScorer {
    /// Decision values for each row; RF gives the fraction of trees voting
    /// positive, the other models a positive-class probability.
    pub fn score(&self, features: &Matrix) -> Result<Vec<f64>, ClassifierError> {
        if features.cols() != self.n_features {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features,
                got: features.cols(),
            });
        }
        Ok(match &self.model {
            FittedModel::Forest(f) => f.score(features),
            FittedModel::Net(n) => n.score(features),
            FittedModel::Spline(s) => s.score(features),
            FittedModel::Constant => vec![0.5; features.rows()],
        })
    }
}

// ───────────────────────── random forest ─────────────────────────

/// Bagged Gini decision trees: each tree is grown on a bootstrap sample to
/// purity (minimum node size 1), trying ⌈√d⌉ features per split, and votes
/// its leaf's majority class. Splits at value midpoints make the scores
/// invariant to strictly monotone transformations of any feature.
#[derive(Debug, Clone)]
struct Forest {
    trees: Vec<Tree>,
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<TreeNode>,
}

const LEAF: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct TreeNode {
    /// Feature index, or LEAF (threshold then carries the vote).
    feature: u32,
    threshold: f64,
    /// Index of the left child; the right child is left + 1 is not implied —
    /// children are stored explicitly because subtree sizes vary.
    left: u32,
    right: u32,
}

struct TreeBuilder<'a> {
    features: &'a Matrix,
    labels: &'a [i8],
    mtry: usize,
    nodes: Vec<TreeNode>,
    /// Scratch: (value, positive) pairs for the split scan.
    scan: Vec<(f64, bool)>,
    /// Scratch: feature ids for the per-node subsample.
    feature_ids: Vec<u32>,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, samples: &mut [u32], rng: &mut impl Rng) -> u32 {
        let n = samples.len();
        let pos = samples
            .iter()
            .filter(|&&i| self.labels[i as usize] == 1)
            .count();
        if pos == 0 || pos == n || n < 2 {
            return self.push_leaf(pos, n, rng);
        }
        let d = self.features.cols();
        let (mut best_feature, mut best_threshold, mut best_score) = (usize::MAX, 0.0, f64::MIN);
        // Partial Fisher–Yates over the feature ids; skipped when every
        // feature is tried anyway so the RNG stream stays lean.
        self.feature_ids.clear();
        self.feature_ids.extend(0..d as u32);
        for slot in 0..self.mtry {
            if self.mtry < d {
                let pick = rng.gen_range(slot..d);
                self.feature_ids.swap(slot, pick);
            }
            let f = self.feature_ids[slot] as usize;
            self.scan.clear();
            for &i in samples.iter() {
                self.scan.push((
                    self.features.get(i as usize, f),
                    self.labels[i as usize] == 1,
                ));
            }
            self.scan.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
            let (mut lp, mut ln) = (0u32, 0u32);
            let total_pos = pos as f64;
            let total_neg = (n - pos) as f64;
            for k in 0..n - 1 {
                if self.scan[k].1 {
                    lp += 1;
                } else {
                    ln += 1;
                }
                if self.scan[k].0 == self.scan[k + 1].0 {
                    continue;
                }
                // Gini minimization rewritten as maximizing the sum of
                // squared class counts over node sizes.
                let (lpf, lnf) = (lp as f64, ln as f64);
                let (rpf, rnf) = (total_pos - lpf, total_neg - lnf);
                let nl = lpf + lnf;
                let nr = rpf + rnf;
                let score = (lpf * lpf + lnf * lnf) / nl + (rpf * rpf + rnf * rnf) / nr;
                if score > best_score {
                    best_score = score;
                    best_feature = f;
                    best_threshold = 0.5 * (self.scan[k].0 + self.scan[k + 1].0);
                }
            }
        }
        if best_feature == usize::MAX {
            // Every tried feature was constant across the node.
            return self.push_leaf(pos, n, rng);
        }
        let split = partition(samples, |i| {
            self.features.get(i as usize, best_feature) <= best_threshold
        });
        if split == 0 || split == n {
            return self.push_leaf(pos, n, rng);
        }
        let node_id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            feature: best_feature as u32,
            threshold: best_threshold,
            left: 0,
            right: 0,
        });
        let (left_samples, right_samples) = samples.split_at_mut(split);
        let left = self.build(left_samples, rng);
        let right = self.build(right_samples, rng);
        self.nodes[node_id as usize].left = left;
        self.nodes[node_id as usize].right = right;
        node_id
    }

    /// Leaf vote: majority class, exact ties broken by a coin flip (the
    /// tie pattern is invariant to monotone feature transforms, so the
    /// flip does not break score invariance).
    fn push_leaf(&mut self, pos: usize, n: usize, rng: &mut impl Rng) -> u32 {
        let vote_positive = match (2 * pos).cmp(&n) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => rng.gen_bool(0.5),
        };
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode {
            feature: LEAF,
            threshold: if vote_positive { 1.0 } else { 0.0 },
            left: 0,
            right: 0,
        });
        id
    }
}

fn partition(samples: &mut [u32], mut goes_left: impl FnMut(u32) -> bool) -> usize {
    let mut store = 0usize;
    for i in 0..samples.len() {
        if goes_left(samples[i]) {
            samples.swap(store, i);
            store += 1;
        }
    }
    store
}

impl Forest {
    fn fit(features: &Matrix, labels: &[i8], n_trees: usize, rng: &mut impl Rng) -> Self {
        let n = features.rows();
        let d = features.cols();
        let mtry = if d == 0 {
            0
        } else {
            (d as f64).sqrt().ceil() as usize
        };
        let mut builder = TreeBuilder {
            features,
            labels,
            mtry,
            nodes: Vec::new(),
            scan: Vec::with_capacity(n),
            feature_ids: Vec::with_capacity(d),
        };
        let mut bootstrap = vec![0u32; n];
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            for slot in bootstrap.iter_mut() {
                *slot = rng.gen_range(0..n) as u32;
            }
            builder.nodes = Vec::new();
            if d == 0 {
                let pos = bootstrap
                    .iter()
                    .filter(|&&i| labels[i as usize] == 1)
                    .count();
                builder.push_leaf(pos, n, rng);
            } else {
                builder.build(&mut bootstrap, rng);
            }
            trees.push(Tree {
                nodes: std::mem::take(&mut builder.nodes),
            });
        }
        Forest { trees }
    }

    fn score(&self, features: &Matrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(features.rows());
        for i in 0..features.rows() {
            let row = features.row(i);
            let mut votes = 0usize;
            for tree in &self.trees {
                // The root is wherever build() placed it: leaf-only trees
                // have it at 0, otherwise the first pushed internal node.
                let mut node = &tree.nodes[0];
                // Internal nodes are pushed before their children, so index 0
                // is always the root.
                while node.feature != LEAF {
                    node = if row[node.feature as usize] <= node.threshold {
                        &tree.nodes[node.left as usize]
                    } else {
                        &tree.nodes[node.right as usize]
                    };
                }
                if node.threshold == 1.0 {
                    votes += 1;
                }
            }
            out.push(votes as f64 / self.trees.len() as f64);
        }
        out
    }
}

// ───────────────────────── neural network ─────────────────────────

/// One hidden layer of logistic units and a logistic output, trained by
/// full-batch BFGS on cross-entropy plus an L2 weight penalty. Features are
/// standardized to mean 0 / sd 1 first; zero-variance columns are dropped.
#[derive(Debug, Clone)]
struct Net {
    hidden: usize,
    params: Vec<f64>,
    kept: Vec<usize>,
    means: Vec<f64>,
    sds: Vec<f64>,
}

const NN_GRAD_TOL: f64 = 1e-5;
const NN_MAX_ITER: usize = 500;

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Parameter layout: hidden weights (h×d, row per unit), hidden biases (h),
/// output weights (h), output bias.
pub fn nn_param_count(d: usize, hidden: usize) -> usize {
    hidden * d + hidden + hidden + 1
}

/// Penalized cross-entropy loss and its analytic gradient for the two-layer
/// network; exposed so the gradient can be checked against finite
/// differences.
pub fn nn_loss_and_grad(
    params: &[f64],
    features: &Matrix,
    targets01: &[f64],
    hidden: usize,
    decay: f64,
) -> (f64, Vec<f64>) {
    let d = features.cols();
    let n = features.rows();
    assert_eq!(params.len(), nn_param_count(d, hidden));
    assert_eq!(targets01.len(), n);
    let (w1, rest) = params.split_at(hidden * d);
    let (b1, rest) = rest.split_at(hidden);
    let (w2, b2) = rest.split_at(hidden);
    let b2 = b2[0];

    let mut grad = vec![0.0; params.len()];
    let mut loss = 0.0;
    let mut act = vec![0.0; hidden];
    for (i, &y) in targets01.iter().enumerate() {
        let row = features.row(i);
        let mut out_z = b2;
        for (u, a) in act.iter_mut().enumerate() {
            let mut z = b1[u];
            let w_row = &w1[u * d..(u + 1) * d];
            for (wij, xj) in w_row.iter().zip(row) {
                z += wij * xj;
            }
            *a = sigmoid(z);
            out_z += w2[u] * *a;
        }
        let p = sigmoid(out_z);
        // Clamped log keeps the loss finite when the net saturates.
        loss -= y * p.max(1e-300).ln() + (1.0 - y) * (1.0 - p).max(1e-300).ln();
        let delta_out = p - y;
        let (gw1, rest) = grad.split_at_mut(hidden * d);
        let (gb1, rest) = rest.split_at_mut(hidden);
        let (gw2, gb2) = rest.split_at_mut(hidden);
        gb2[0] += delta_out;
        for u in 0..hidden {
            gw2[u] += delta_out * act[u];
            let delta_hidden = delta_out * w2[u] * act[u] * (1.0 - act[u]);
            gb1[u] += delta_hidden;
            let g_row = &mut gw1[u * d..(u + 1) * d];
            for (gij, xj) in g_row.iter_mut().zip(row) {
                *gij += delta_hidden * xj;
            }
        }
    }
    for (g, w) in grad.iter_mut().zip(params) {
        loss += decay * w * w;
        *g += 2.0 * decay * w;
    }
    (loss, grad)
}

impl Net {
    fn fit(
        features: &Matrix,
        labels: &[i8],
        hidden: usize,
        decay: f64,
        rng: &mut impl Rng,
        warnings: &mut Vec<String>,
    ) -> Result<Self, ClassifierError> {
        let (kept, means, sds) = standardization_plan(features, warnings, "nn");
        let x = standardize(features, &kept, &means, &sds);
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { 0.0 })
            .collect();
        let d = x.cols();
        let mut params: Vec<f64> = (0..nn_param_count(d, hidden))
            .map(|_| rng.gen_range(-0.5..0.5))
            .collect();
        bfgs(&mut params, |p| {
            nn_loss_and_grad(p, &x, &targets, hidden, decay)
        });
        if params.iter().any(|p| !p.is_finite()) {
            return Err(ClassifierError::NumericalFailure(
                "network weights diverged during training".into(),
            ));
        }
        Ok(Net {
            hidden,
            params,
            kept,
            means,
            sds,
        })
    }

    fn score(&self, features: &Matrix) -> Vec<f64> {
        let x = standardize(features, &self.kept, &self.means, &self.sds);
        let d = x.cols();
        let (w1, rest) = self.params.split_at(self.hidden * d);
        let (b1, rest) = rest.split_at(self.hidden);
        let (w2, b2) = rest.split_at(self.hidden);
        (0..x.rows())
            .map(|i| {
                let row = x.row(i);
                let mut out_z = b2[0];
                for u in 0..self.hidden {
                    let mut z = b1[u];
                    for (wij, xj) in w1[u * d..(u + 1) * d].iter().zip(row) {
                        z += wij * xj;
                    }
                    out_z += w2[u] * sigmoid(z);
                }
                sigmoid(out_z)
            })
            .collect()
    }
}

fn standardization_plan(
    features: &Matrix,
    warnings: &mut Vec<String>,
    model: &str,
) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = features.rows().max(1) as f64;
    let mut kept = Vec::new();
    let mut means = Vec::new();
    let mut sds = Vec::new();
    for j in 0..features.cols() {
        let col = features.column(j);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        if var <= 0.0 {
            warnings.push(format!("{model}: dropped zero-variance feature column {j}"));
            continue;
        }
        kept.push(j);
        means.push(mean);
        sds.push(var.sqrt());
    }
    (kept, means, sds)
}

fn standardize(features: &Matrix, kept: &[usize], means: &[f64], sds: &[f64]) -> Matrix {
    let mut out = Matrix::zeros(features.rows(), kept.len());
    for i in 0..features.rows() {
        for (slot, &j) in kept.iter().enumerate() {
            out.set(i, slot, (features.get(i, j) - means[slot]) / sds[slot]);
        }
    }
    out
}

/// Full-batch BFGS with Armijo backtracking. Stops at gradient norm below
/// 1e−5, after 500 iterations, or when the line search can make no
/// further progress.
fn bfgs(params: &mut [f64], mut objective: impl FnMut(&[f64]) -> (f64, Vec<f64>)) {
    let p = params.len();
    let mut h = vec![0.0; p * p];
    for i in 0..p {
        h[i * p + i] = 1.0;
    }
    let (mut f, mut g) = objective(params);
    let mut direction = vec![0.0; p];
    let mut trial = vec![0.0; p];
    for _ in 0..NN_MAX_ITER {
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if gnorm < NN_GRAD_TOL {
            break;
        }
        for i in 0..p {
            let mut acc = 0.0;
            for j in 0..p {
                acc += h[i * p + j] * g[j];
            }
            direction[i] = -acc;
        }
        let mut slope: f64 = direction.iter().zip(&g).map(|(d, g)| d * g).sum();
        if slope >= 0.0 {
            // Curvature updates went bad; restart from steepest descent.
            for i in 0..p {
                for j in 0..p {
                    h[i * p + j] = if i == j { 1.0 } else { 0.0 };
                }
            }
            for (dir, gi) in direction.iter_mut().zip(&g) {
                *dir = -gi;
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            for i in 0..p {
                trial[i] = params[i] + step * direction[i];
            }
            let (f_trial, g_trial) = objective(&trial);
            if f_trial.is_finite() && f_trial <= f + 1e-4 * step * slope {
                let mut s = vec![0.0; p];
                let mut yv = vec![0.0; p];
                for i in 0..p {
                    s[i] = trial[i] - params[i];
                    yv[i] = g_trial[i] - g[i];
                }
                let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
                if sy > 1e-12 {
                    bfgs_update(&mut h, &s, &yv, sy);
                }
                params.copy_from_slice(&trial);
                f = f_trial;
                g = g_trial;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
}

fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let p = s.len();
    // H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ with ρ = 1/sᵀy.
    let rho = 1.0 / sy;
    let mut hy = vec![0.0; p];
    for i in 0..p {
        let mut acc = 0.0;
        for j in 0..p {
            acc += h[i * p + j] * y[j];
        }
        hy[i] = acc;
    }
    let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
    for i in 0..p {
        for j in 0..p {
            h[i * p + j] += rho * rho * yhy * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j])
                + rho * s[i] * s[j];
        }
    }
}

// ───────────────────────── spline additive model ─────────────────────────

/// Logistic additive model over a natural cubic spline basis per feature,
/// fit by iteratively reweighted least squares. Features without enough
/// distinct values for the spline knots degrade to a plain linear term;
/// zero-variance features are dropped.
#[derive(Debug, Clone)]
struct SplineModel {
    bases: Vec<FeatureBasis>,
    beta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum FeatureBasis {
    /// Natural cubic spline on the given ascending knots.
    Natural {
        knots: Vec<f64>,
    },
    Linear,
    Dropped,
}

impl FeatureBasis {
    pub fn width(&self) -> usize {
        match self {
            FeatureBasis::Natural { knots } => knots.len() - 1,
            FeatureBasis::Linear => 1,
            FeatureBasis::Dropped => 0,
        }
    }

    /// Evaluate the basis functions at x, appending to `out`.
    pub fn eval(&self, x: f64, out: &mut Vec<f64>) {
        match self {
            FeatureBasis::Natural { knots } => natural_spline_eval(knots, x, out),
            FeatureBasis::Linear => out.push(x),
            FeatureBasis::Dropped => {}
        }
    }
}

/// Plan a 5-df (or `df`-df) natural cubic spline for one feature: boundary
/// knots at the extremes and df−1 internal knots at quantiles. Features
/// with too few distinct values fall back to a linear term or are dropped.
pub fn plan_feature_basis(values: &[f64], df: usize) -> FeatureBasis {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    if sorted.len() < 2 {
        return FeatureBasis::Dropped;
    }
    if sorted.len() <= df {
        return FeatureBasis::Linear;
    }
    let mut knots = Vec::with_capacity(df + 1);
    knots.push(sorted[0]);
    for k in 1..df {
        let q = k as f64 / df as f64;
        let pos = q * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        let v = if lo + 1 < sorted.len() {
            sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
        } else {
            sorted[lo]
        };
        knots.push(v);
    }
    knots.push(*sorted.last().unwrap());
    knots.dedup_by(|a, b| a == b);
    if knots.len() < 3 {
        FeatureBasis::Linear
    } else {
        FeatureBasis::Natural { knots }
    }
}

/// Natural cubic spline basis with K knots spans K dimensions including the
/// intercept; the K−1 non-constant functions used here are x itself and the
/// truncated-cubic differences that enforce linearity beyond the boundaries.
fn natural_spline_eval(knots: &[f64], x: f64, out: &mut Vec<f64>) {
    let k = knots.len();
    let last = knots[k - 1];
    let cube = |t: f64| if t > 0.0 { t * t * t } else { 0.0 };
    let d = |j: usize| (cube(x - knots[j]) - cube(x - last)) / (last - knots[j]);
    out.push(x);
    let d_last = d(k - 2);
    for j in 0..k - 2 {
        out.push(d(j) - d_last);
    }
}

impl SplineModel {
    fn fit(
        features: &Matrix,
        labels: &[i8],
        df: usize,
        warnings: &mut Vec<String>,
    ) -> Result<Self, ClassifierError> {
        let mut bases = Vec::with_capacity(features.cols());
        for j in 0..features.cols() {
            let basis = plan_feature_basis(&features.column(j), df);
            if matches!(basis, FeatureBasis::Dropped) {
                warnings.push(format!("spline: dropped zero-variance feature column {j}"));
            }
            bases.push(basis);
        }
        let design = build_design(features, &bases);
        let targets: Vec<f64> = labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { 0.0 })
            .collect();
        let beta = logistic_irls(&design, &targets)?;
        Ok(SplineModel { bases, beta })
    }

    fn score(&self, features: &Matrix) -> Vec<f64> {
        let design = build_design(features, &self.bases);
        (0..design.rows())
            .map(|i| {
                let eta: f64 = design
                    .row(i)
                    .iter()
                    .zip(&self.beta)
                    .map(|(x, b)| x * b)
                    .sum();
                sigmoid(eta)
            })
            .collect()
    }
}

/// Design matrix with a leading intercept column.
pub fn build_design(features: &Matrix, bases: &[FeatureBasis]) -> Matrix {
    let width = 1 + bases.iter().map(FeatureBasis::width).sum::<usize>();
    let mut data = Vec::with_capacity(features.rows() * width);
    let mut row_buf = Vec::with_capacity(width);
    for i in 0..features.rows() {
        row_buf.clear();
        row_buf.push(1.0);
        for (j, basis) in bases.iter().enumerate() {
            basis.eval(features.get(i, j), &mut row_buf);
        }
        data.extend_from_slice(&row_buf);
    }
    Matrix::new(features.rows(), width, data)
}

fn logistic_irls(design: &Matrix, targets: &[f64]) -> Result<Vec<f64>, ClassifierError> {
    let p = design.cols();
    let mut beta = vec![0.0; p];
    let mut deviance = f64::INFINITY;
    for _ in 0..30 {
        let mut xtwx = vec![0.0; p * p];
        let mut xtwz = vec![0.0; p];
        let mut new_deviance = 0.0;
        for (i, &y) in targets.iter().enumerate() {
            let row = design.row(i);
            let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = sigmoid(eta);
            new_deviance -=
                2.0 * (y * mu.max(1e-300).ln() + (1.0 - y) * (1.0 - mu).max(1e-300).ln());
            let w = (mu * (1.0 - mu)).max(1e-10);
            let z = eta + (y - mu) / w;
            for a in 0..p {
                xtwz[a] += w * row[a] * z;
                let wxa = w * row[a];
                for b in a..p {
                    xtwx[a * p + b] += wxa * row[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[a * p + b] = xtwx[b * p + a];
            }
        }
        beta = solve_spd(&mut xtwx, &xtwz, p).ok_or_else(|| {
            ClassifierError::NumericalFailure("singular system in the additive-model fit".into())
        })?;
        if beta.iter().any(|b| !b.is_finite()) {
            return Err(ClassifierError::NumericalFailure(
                "additive-model coefficients diverged".into(),
            ));
        }
        if (deviance - new_deviance).abs() < 1e-8 * (new_deviance.abs() + 1.0) {
            return Ok(beta);
        }
        deviance = new_deviance;
    }
    Ok(beta)
}

/// Cholesky solve of a symmetric positive-definite system, with escalating
/// ridge jitter before giving up.
pub(crate) fn solve_spd(a: &mut [f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    for &jitter in &[0.0, 1e-10, 1e-6] {
        let mut l = a.to_vec();
        for i in 0..p {
            l[i * p + i] += jitter;
        }
        if let Some(x) = cholesky_solve(&mut l, b, p) {
            return Some(x);
        }
    }
    None
}

fn cholesky_solve(a: &mut [f64], b: &[f64], p: usize) -> Option<Vec<f64>> {
    // In-place LLᵀ factorization.
    for i in 0..p {
        for j in 0..=i {
            let mut sum = a[i * p + j];
            for k in 0..j {
                sum -= a[i * p + k] * a[j * p + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                a[i * p + j] = sum.sqrt();
            } else {
                a[i * p + j] = sum / a[j * p + j];
            }
        }
    }
    let mut x = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            x[i] -= a[i * p + k] * x[k];
        }
        x[i] /= a[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            x[i] -= a[k * p + i] * x[k];
        }
        x[i] /= a[i * p + i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SeedSpec, Stream};
    use rand::SeedableRng;

    fn blobs(n_per_class: usize, margin: f64, seed: u64) -> (Matrix, Vec<i8>) {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in [1i8, -1i8] {
            let center = if class == 1 { margin } else { -margin };
            for _ in 0..n_per_class {
                rows.push(vec![
                    center + rng.gen_range(-0.8..0.8),
                    -center + rng.gen_range(-0.8..0.8),
                ]);
                labels.push(class);
            }
        }
        (Matrix::from_rows(&rows), labels)
    }

    fn accuracy(scores: &[f64], labels: &[i8]) -> f64 {
        let hits = scores
            .iter()
            .zip(labels)
            .filter(|&(&s, &l)| (s > 0.5) == (l == 1))
            .count();
        hits as f64 / labels.len() as f64
    }

    #[test]
    fn all_three_separate_blobs() {
        let (x, y) = blobs(100, 2.0, 42);
        for spec in [
            ClassifierSpec::random_forest(),
            ClassifierSpec::spline_additive(),
            ClassifierSpec::neural_net(0.0, 5),
        ] {
            let mut rng = SeedSpec::new(1).stream(Stream::ClassifierInit);
            let model = train(&spec, &x, &y, &mut rng).unwrap();
            let scores = model.score(&x).unwrap();
            let acc = accuracy(&scores, &y);
            assert!(acc >= 0.95, "{} accuracy {acc}", spec.describe());
        }
    }

    #[test]
    fn separable_positives_rank_above_negatives() {
        let (x, y) = blobs(50, 3.0, 7);
        let mut rng = SeedSpec::new(2).stream(Stream::ClassifierInit);
        let model = train(&ClassifierSpec::neural_net(0.1, 10), &x, &y, &mut rng).unwrap();
        let scores = model.score(&x).unwrap();
        let min_pos = scores
            .iter()
            .zip(&y)
            .filter(|&(_, &l)| l == 1)
            .map(|(&s, _)| s)
            .fold(f64::INFINITY, f64::min);
        let max_neg = scores
            .iter()
            .zip(&y)
            .filter(|&(_, &l)| l == -1)
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(
            min_pos > max_neg,
            "positives {min_pos} vs negatives {max_neg}"
        );
    }

    #[test]
    fn constant_features_give_base_rate() {
        // Balanced labels: the forest's bootstrap-majority vote is a fair
        // coin here, so the vote fraction concentrates on the base rate;
        // the other two models fit an intercept-only posterior exactly.
        let n = 200;
        let x = Matrix::zeros(n, 2);
        let y: Vec<i8> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let base = 0.5;
        for spec in [
            ClassifierSpec::random_forest(),
            ClassifierSpec::spline_additive(),
            ClassifierSpec::neural_net(0.1, 2),
        ] {
            let mut rng = SeedSpec::new(4).stream(Stream::ClassifierInit);
            let model = train(&spec, &x, &y, &mut rng).unwrap();
            let scores = model.score(&x).unwrap();
            for &s in &scores {
                assert!(
                    (s - base).abs() <= 0.05,
                    "{}: score {s} vs base rate {base}",
                    spec.describe()
                );
            }
        }
    }

    #[test]
    fn training_is_deterministic_per_seed() {
        let (x, y) = blobs(60, 1.0, 9);
        for spec in [
            ClassifierSpec::random_forest(),
            ClassifierSpec::spline_additive(),
            ClassifierSpec::neural_net(0.1, 5),
        ] {
            let spec_seed = SeedSpec::new(11);
            let mut rng_a = spec_seed.stream(Stream::ClassifierInit);
            let mut rng_b = spec_seed.stream(Stream::ClassifierInit);
            let a = train(&spec, &x, &y, &mut rng_a).unwrap().score(&x).unwrap();
            let b = train(&spec, &x, &y, &mut rng_b).unwrap().score(&x).unwrap();
            assert_eq!(a, b, "{}", spec.describe());
        }
    }

    #[test]
    fn single_class_labels_rejected() {
        let x = Matrix::zeros(10, 1);
        let mut rng = SeedSpec::new(5).stream(Stream::ClassifierInit);
        assert!(matches!(
            train(&ClassifierSpec::random_forest(), &x, &[1; 10], &mut rng),
            Err(ClassifierError::SingleClass)
        ));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let (x, y) = blobs(20, 2.0, 1);
        let mut rng = SeedSpec::new(6).stream(Stream::ClassifierInit);
        let model = train(&ClassifierSpec::random_forest(), &x, &y, &mut rng).unwrap();
        assert!(matches!(
            model.score(&Matrix::zeros(5, 3)),
            Err(ClassifierError::DimensionMismatch {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn empty_scoring_input_gives_empty_vector() {
        let (x, y) = blobs(20, 2.0, 2);
        let mut rng = SeedSpec::new(7).stream(Stream::ClassifierInit);
        let model = train(&ClassifierSpec::spline_additive(), &x, &y, &mut rng).unwrap();
        assert!(model.score(&Matrix::zeros(0, 2)).unwrap().is_empty());
    }

    #[test]
    fn forest_invariant_to_monotone_feature_transform() {
        let (x, y) = blobs(80, 1.5, 13);
        let transformed_rows: Vec<Vec<f64>> = (0..x.rows())
            .map(|i| vec![(x.get(i, 0) * 0.5).exp(), x.get(i, 1).powi(3)])
            .collect();
        let xt = Matrix::from_rows(&transformed_rows);
        let seed = SeedSpec::new(21);
        let mut rng_a = seed.stream(Stream::ClassifierInit);
        let mut rng_b = seed.stream(Stream::ClassifierInit);
        let plain = train(&ClassifierSpec::random_forest(), &x, &y, &mut rng_a)
            .unwrap()
            .score(&x)
            .unwrap();
        let warped = train(&ClassifierSpec::random_forest(), &xt, &y, &mut rng_b)
            .unwrap()
            .score(&xt)
            .unwrap();
        assert_eq!(plain, warped);
    }

    #[test]
    fn forest_scores_are_probabilities() {
        let (x, y) = blobs(50, 0.1, 17);
        let mut rng = SeedSpec::new(22).stream(Stream::ClassifierInit);
        let scores = train(&ClassifierSpec::random_forest(), &x, &y, &mut rng)
            .unwrap()
            .score(&x)
            .unwrap();
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
    }

    #[test]
    fn nn_gradient_matches_finite_differences() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(31);
        for &(n, d, hidden, decay) in &[
            (12usize, 3usize, 2usize, 0.0f64),
            (20, 2, 5, 0.1),
            (15, 4, 3, 1.0),
        ] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
                .collect();
            let x = Matrix::from_rows(&rows);
            let y: Vec<f64> = (0..n)
                .map(|_| if rng.gen_bool(0.5) { 1.0 } else { 0.0 })
                .collect();
            let params: Vec<f64> = (0..nn_param_count(d, hidden))
                .map(|_| rng.gen_range(-0.8..0.8))
                .collect();
            let (_, analytic) = nn_loss_and_grad(&params, &x, &y, hidden, decay);
            let eps = 1e-5;
            for k in 0..params.len() {
                let mut plus = params.clone();
                plus[k] += eps;
                let mut minus = params.clone();
                minus[k] -= eps;
                let (fp, _) = nn_loss_and_grad(&plus, &x, &y, hidden, decay);
                let (fm, _) = nn_loss_and_grad(&minus, &x, &y, hidden, decay);
                let numeric = (fp - fm) / (2.0 * eps);
                let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(1e-8);
                assert!(
                    rel < 1e-4,
                    "param {k}: analytic {} vs numeric {numeric} (rel {rel})",
                    analytic[k]
                );
            }
        }
    }

    #[test]
    fn zero_variance_feature_dropped_with_warning() {
        let (x, y) = blobs(40, 2.0, 19);
        let with_constant: Vec<Vec<f64>> = (0..x.rows())
            .map(|i| vec![x.get(i, 0), 7.0, x.get(i, 1)])
            .collect();
        let xc = Matrix::from_rows(&with_constant);
        for spec in [
            ClassifierSpec::neural_net(0.1, 2),
            ClassifierSpec::spline_additive(),
        ] {
            let mut rng = SeedSpec::new(23).stream(Stream::ClassifierInit);
            let model = train(&spec, &xc, &y, &mut rng).unwrap();
            assert_eq!(model.warnings.len(), 1, "{}", spec.describe());
            assert!(model.warnings[0].contains("column 1"));
            let acc = accuracy(&model.score(&xc).unwrap(), &y);
            assert!(acc >= 0.95);
        }
    }

    #[test]
    fn spline_monotone_signal_tracks_feature() {
        use rand::Rng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(37);
        let n = 300;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(-3.0..3.0)]).collect();
        let y: Vec<i8> = rows
            .iter()
            .map(|r| {
                if rng.gen_bool(sigmoid(2.0 * r[0])) {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let x = Matrix::from_rows(&rows);
        let mut train_rng = SeedSpec::new(29).stream(Stream::ClassifierInit);
        let model = train(&ClassifierSpec::spline_additive(), &x, &y, &mut train_rng).unwrap();
        let scores = model.score(&x).unwrap();
        let feature: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let rho = spearman(&feature, &scores);
        assert!(rho >= 0.9, "Spearman {rho}");
    }

    #[test]
    fn binary_feature_degrades_to_linear_logistic() {
        // With a single two-valued feature the spline collapses to a linear
        // term, so the model is plain logistic regression: fitted
        // probabilities must match the per-group empirical rates.
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|i| vec![if i % 2 == 0 { 0.0 } else { 1.0 }])
            .collect();
        let y: Vec<i8> = (0..100)
            .map(|i| {
                if (i % 2 == 0 && i % 10 < 3) || (i % 2 == 1 && i % 10 < 8) {
                    1
                } else {
                    -1
                }
            })
            .collect();
        let x = Matrix::from_rows(&rows);
        let mut rng = SeedSpec::new(41).stream(Stream::ClassifierInit);
        let model = train(&ClassifierSpec::spline_additive(), &x, &y, &mut rng).unwrap();
        let scores = model.score(&x).unwrap();
        let rate = |parity: usize| {
            let num = (0..100).filter(|i| i % 2 == parity && y[*i] == 1).count() as f64;
            num / 50.0
        };
        for (i, &score) in scores.iter().enumerate() {
            let expected = rate(i % 2);
            assert!(
                (score - expected).abs() < 1e-4,
                "row {i}: {score} vs {expected}"
            );
        }
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut out = vec![0.0; v.len()];
            let mut i = 0;
            while i < idx.len() {
                let mut j = i;
                while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                    j += 1;
                }
                let avg = (i + j) as f64 / 2.0;
                for k in i..=j {
                    out[idx[k]] = avg;
                }
                i = j + 1;
            }
            out
        }
        let ra = ranks(a);
        let rb = ranks(b);
        let n = a.len() as f64;
        let mean = (n - 1.0) / 2.0;
        let mut cov = 0.0;
        let mut var_a = 0.0;
        let mut var_b = 0.0;
        for i in 0..a.len() {
            cov += (ra[i] - mean) * (rb[i] - mean);
            var_a += (ra[i] - mean) * (ra[i] - mean);
            var_b += (rb[i] - mean) * (rb[i] - mean);
        }
        cov / (var_a.sqrt() * var_b.sqrt())
    }
}
