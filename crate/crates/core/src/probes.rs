//! Linear probes on frozen embeddings: per-variable linear regression scored
//! by R², and style classification under leave-one-game-per-style-out folds.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{SampleMetadata, StyleLabel, TargetTable};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::cholesky_solve;
use crate::matrix::FeatureMatrix;
use crate::rng::{SplitMix64, Stream};

/// Variance below which a target is skipped instead of scored.
pub const MIN_TARGET_VARIANCE: f64 = 1e-12;

const REFINEMENT_STEPS: usize = 2;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub enum Ridge {
    /// `λ = 1e-6 · trace(XᵀX) / D` on the centered design, followed by two
    /// refinement steps toward the least-squares solution.
    #[default]
    Stabilizer,
    /// Plain least squares.
    Off,
    Fixed(f64),
}

impl Ridge {
    fn lambda(self, gram: &Array2<f64>) -> f64 {
        match self {
            Ridge::Stabilizer => 1e-6 * gram.diag().sum() / gram.nrows() as f64,
            Ridge::Off => 0.0,
            Ridge::Fixed(l) => l,
        }
    }
}

/// Weights (D×V) and intercepts (V) of a multi-output linear model.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    pub weights: Array2<f64>,
    pub intercepts: Array1<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        x.dot(&self.weights) + self.intercepts.view().insert_axis(Axis(0))
    }
}

/// Fits every column of `y` on `x` with an unpenalized intercept:
/// minimizes `|Xw + b − y|² + λ|w|²` through the centered normal equations.
pub fn fit_linear_regression_multi(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    ridge: Ridge,
) -> Result<LinearModel> {
    let n = x.nrows();
    if n == 0 {
        return Err(Error::InvalidConfig("regression needs at least one training row".into()));
    }
    if y.nrows() != n {
        return Err(Error::LengthMismatch { left: n, right: y.nrows() });
    }
    let x_mean = x.mean_axis(Axis(0)).expect("non-empty");
    let y_mean = y.mean_axis(Axis(0)).expect("non-empty");
    let xc = &x - &x_mean.view().insert_axis(Axis(0));
    let yc = &y - &y_mean.view().insert_axis(Axis(0));
    let mut gram = xc.t().dot(&xc);
    let lambda = ridge.lambda(&gram);
    gram.diag_mut().mapv_inplace(|v| v + lambda);
    let rhs = xc.t().dot(&yc);
    let weights = if gram.diag().iter().all(|v| *v == 0.0) {
        // every column is constant; the mean is the best predictor
        Array2::zeros(rhs.dim())
    } else {
        let mut w = cholesky_solve(&gram, &rhs)?;
        if ridge == Ridge::Stabilizer {
            // Iterated Tikhonov: each step shrinks the ridge bias along a
            // direction with eigenvalue e by λ/(e+λ), so well-conditioned
            // fits match least squares while near-null directions stay damped.
            for _ in 0..REFINEMENT_STEPS {
                w = cholesky_solve(&gram, &(&rhs + &(&w * lambda)))?;
            }
        }
        w
    };
    let intercepts = &y_mean - &x_mean.dot(&weights);
    Ok(LinearModel { weights, intercepts })
}

/// Single-target convenience wrapper; returns `(w, b)`.
pub fn fit_linear_regression(
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    ridge: Ridge,
) -> Result<(Array1<f64>, f64)> {
    let model = fit_linear_regression_multi(x, y.insert_axis(Axis(1)), ridge)?;
    Ok((model.weights.column(0).to_owned(), model.intercepts[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum R2 {
    Score(f64),
    /// Target variance below [`MIN_TARGET_VARIANCE`].
    Skipped,
}

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<R2> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    let n = y_true.len();
    if n < 2 {
        return Err(Error::InvalidConfig(format!("R² needs at least 2 samples, got {n}")));
    }
    let mean = y_true.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot / (n as f64) < MIN_TARGET_VARIANCE {
        return Ok(R2::Skipped);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(R2::Score(1.0 - ss_res / ss_tot))
}

/// Disjoint train/test row sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl RowSplit {
    pub fn new(mut train: Vec<usize>, mut test: Vec<usize>, n_rows: usize) -> Result<Self> {
        train.sort_unstable();
        test.sort_unstable();
        if let Some(&bad) = train.iter().chain(&test).find(|&&r| r >= n_rows) {
            return Err(dim_mismatch(format!("row {bad} out of range for {n_rows} rows")));
        }
        if train.windows(2).any(|w| w[0] == w[1]) || test.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("duplicate rows in split".into()));
        }
        if let Some(r) = train.iter().find(|r| test.binary_search(r).is_ok()) {
            return Err(Error::InvalidConfig(format!("row {r} is in both train and test")));
        }
        if train.is_empty() || test.is_empty() {
            return Err(Error::InvalidConfig("train and test sets must be non-empty".into()));
        }
        Ok(Self { train, test })
    }

    /// Seeded random hold-out of `round(fraction · N)` rows.
    pub fn by_fraction(n_rows: usize, test_fraction: f64, seed: u64) -> Result<Self> {
        if !(test_fraction > 0.0 && test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!("test fraction {test_fraction} not in (0, 1)")));
        }
        let n_test = ((n_rows as f64) * test_fraction).round() as usize;
        let all: Vec<usize> = (0..n_rows).collect();
        let test = SplitMix64::derive(seed, Stream::RowSplit).sample_without_replacement(&all, n_test.min(n_rows));
        let held: BTreeSet<usize> = test.iter().copied().collect();
        let train = all.into_iter().filter(|r| !held.contains(r)).collect();
        Self::new(train, test, n_rows)
    }

    /// All rows of the listed games form the test set.
    pub fn by_games<S: AsRef<str>>(metadata: &[SampleMetadata], test_games: &[S]) -> Result<Self> {
        let wanted: BTreeSet<&str> = test_games.iter().map(AsRef::as_ref).collect();
        if let Some(missing) = wanted.iter().find(|g| !metadata.iter().any(|m| m.game_id == **g)) {
            return Err(Error::InvalidConfig(format!("test game `{missing}` not in data")));
        }
        let (test, train): (Vec<usize>, Vec<usize>) =
            (0..metadata.len()).partition(|&i| wanted.contains(metadata[i].game_id.as_str()));
        Self::new(train, test, metadata.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionProbeReport {
    pub embedding_name: String,
    /// Scored variables in table order.
    pub per_variable_r2: Vec<(String, f64)>,
    pub skipped: Vec<String>,
    pub mean_r2: f64,
    pub n_train: usize,
    pub n_test: usize,
}

/// One regression per target column fit on the train rows and scored on the
/// test rows; the mean runs over non-skipped variables.
pub fn regression_probe(
    embedding: &FeatureMatrix,
    targets: &TargetTable,
    split: &RowSplit,
    embedding_name: &str,
    ridge: Ridge,
) -> Result<RegressionProbeReport> {
    if targets.n_rows() != embedding.n_rows() {
        return Err(Error::LengthMismatch { left: embedding.n_rows(), right: targets.n_rows() });
    }
    let n = embedding.n_rows();
    RowSplit::new(split.train.clone(), split.test.clone(), n)?;
    let x = embedding.as_array();
    let y = targets.values().as_array();
    let (x_train, y_train) = (x.select(Axis(0), &split.train), y.select(Axis(0), &split.train));
    let (x_test, y_test) = (x.select(Axis(0), &split.test), y.select(Axis(0), &split.test));
    let model = fit_linear_regression_multi(x_train.view(), y_train.view(), ridge)?;
    let predicted = model.predict(x_test.view());

    let mut per_variable_r2 = Vec::new();
    let mut skipped = Vec::new();
    for (v, name) in targets.names().iter().enumerate() {
        let truth = y_test.column(v).to_vec();
        let pred = predicted.column(v).to_vec();
        match r2_score(&truth, &pred)? {
            R2::Score(r2) => per_variable_r2.push((name.clone(), r2)),
            R2::Skipped => skipped.push(name.clone()),
        }
    }
    let mean_r2 = if per_variable_r2.is_empty() {
        f64::NAN
    } else {
        per_variable_r2.iter().map(|(_, r)| r).sum::<f64>() / per_variable_r2.len() as f64
    };
    Ok(RegressionProbeReport {
        embedding_name: embedding_name.to_owned(),
        per_variable_r2,
        skipped,
        mean_r2,
        n_train: split.train.len(),
        n_test: split.test.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub fold_id: usize,
    /// One game per present style label, in label order.
    pub test_games: Vec<String>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

pub const DEFAULT_FOLDS: usize = 10;

/// Leave-three-games-out folds for one genre: every fold holds out one
/// uniformly drawn game per style label. Folds draw independently, so a game
/// may be held out in several folds.
pub fn make_folds(metadata: &[SampleMetadata], n_folds: usize, seed: u64) -> Result<Vec<FoldSpec>> {
    if n_folds == 0 {
        return Err(Error::InvalidConfig("need at least one fold".into()));
    }
    if let Some(row) = metadata.iter().position(|m| m.style_label == StyleLabel::Unknown) {
        return Err(Error::UnknownStyleLabel { row });
    }
    let mut games_by_style: BTreeMap<StyleLabel, BTreeSet<&str>> = BTreeMap::new();
    for m in metadata {
        games_by_style.entry(m.style_label).or_default().insert(&m.game_id);
    }
    if let Some((style, games)) = games_by_style.iter().find(|(_, g)| g.len() < 2) {
        return Err(Error::InsufficientGames(format!("style `{style}` has {} game(s); need at least 2", games.len())));
    }
    let mut rng = SplitMix64::derive(seed, Stream::Folds);
    (0..n_folds)
        .map(|fold_id| {
            let test_games: Vec<String> = games_by_style
                .values()
                .map(|games| {
                    let games: Vec<&str> = games.iter().copied().collect();
                    games[rng.below(games.len())].to_owned()
                })
                .collect();
            let (test_rows, train_rows): (Vec<usize>, Vec<usize>) =
                (0..metadata.len()).partition(|&i| test_games.contains(&metadata[i].game_id));
            Ok(FoldSpec { fold_id, test_games, train_rows, test_rows })
        })
        .collect()
}

/// Full-batch gradient descent settings for the multinomial logistic probe.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub l2: f64,
    /// Z-score features with train-row statistics before fitting.
    pub standardize: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self { learning_rate: 0.1, iterations: 500, l2: 1e-3, standardize: true }
    }
}

/// Multinomial logistic regression; classes are `0..n_classes`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftmaxClassifier {
    weights: Array2<f64>,
    bias: Array1<f64>,
    shift: Array1<f64>,
    scale: Array1<f64>,
}

impl SoftmaxClassifier {
    /// Zero-initialized, minimizes mean cross-entropy `+ (l2/2)|W|²`.
    pub fn fit(x: ArrayView2<'_, f64>, labels: &[usize], n_classes: usize, config: &LogisticConfig) -> Result<Self> {
        let (n, d) = x.dim();
        if labels.len() != n {
            return Err(Error::LengthMismatch { left: n, right: labels.len() });
        }
        if n == 0 {
            return Err(Error::InvalidConfig("classifier needs training rows".into()));
        }
        let (shift, scale) = if config.standardize {
            let mean = x.mean_axis(Axis(0)).expect("non-empty");
            let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 0.0 { s } else { 1.0 });
            (mean, std)
        } else {
            (Array1::zeros(d), Array1::ones(d))
        };
        let xs = (&x - &shift.view().insert_axis(Axis(0))) / scale.view().insert_axis(Axis(0));
        let mut onehot = Array2::<f64>::zeros((n, n_classes));
        for (i, &c) in labels.iter().enumerate() {
            onehot[[i, c]] = 1.0;
        }
        let mut weights = Array2::<f64>::zeros((d, n_classes));
        let mut bias = Array1::<f64>::zeros(n_classes);
        for _ in 0..config.iterations {
            let mut probs = xs.dot(&weights) + bias.view().insert_axis(Axis(0));
            softmax_rows(&mut probs);
            let residual = (probs - &onehot) / n as f64;
            let grad_w = xs.t().dot(&residual) + &weights * config.l2;
            let grad_b = residual.sum_axis(Axis(0));
            weights.scaled_add(-config.learning_rate, &grad_w);
            bias.scaled_add(-config.learning_rate, &grad_b);
        }
        Ok(Self { weights, bias, shift, scale })
    }

    /// Arg-max class per row (lowest class on ties).
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        let xs = (&x - &self.shift.view().insert_axis(Axis(0))) / self.scale.view().insert_axis(Axis(0));
        let logits = xs.dot(&self.weights) + self.bias.view().insert_axis(Axis(0));
        logits.axis_iter(Axis(0)).map(|row| argmax(row.iter().copied())).collect()
    }
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let total = row.sum();
        row /= total;
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationProbeReport {
    pub embedding_name: String,
    pub per_fold_accuracy: Vec<f64>,
    pub per_fold_baseline: Vec<f64>,
    pub mean_accuracy: f64,
    /// Mean over folds of the majority-label accuracy.
    pub baseline_accuracy: f64,
    pub n_folds: usize,
}

/// Majority label of `train` (lowest label on ties).
pub fn majority_label(train: &[StyleLabel]) -> Option<StyleLabel> {
    let mut counts = [0usize; 4];
    for l in train {
        counts[l.index()] += 1;
    }
    let best = argmax(counts.iter().map(|&c| c as f64));
    (counts[best] > 0)
        .then(|| [StyleLabel::Retro, StyleLabel::Modern, StyleLabel::Photoreal, StyleLabel::Unknown][best])
}

fn accuracy(pred: impl Iterator<Item = StyleLabel>, truth: &[StyleLabel]) -> f64 {
    let hits = pred.zip(truth).filter(|(p, t)| p == *t).count();
    hits as f64 / truth.len() as f64
}

/// Style classification per fold with a majority-vote baseline computed on
/// each fold's training rows.
pub fn classification_probe(
    embedding: &FeatureMatrix,
    labels: &[StyleLabel],
    folds: &[FoldSpec],
    embedding_name: &str,
    config: &LogisticConfig,
) -> Result<ClassificationProbeReport> {
    if labels.len() != embedding.n_rows() {
        return Err(Error::LengthMismatch { left: embedding.n_rows(), right: labels.len() });
    }
    if let Some(row) = labels.iter().position(|l| *l == StyleLabel::Unknown) {
        return Err(Error::UnknownStyleLabel { row });
    }
    if folds.is_empty() {
        return Err(Error::InvalidConfig("no folds".into()));
    }
    let x = embedding.as_array();
    let classes = StyleLabel::KNOWN;
    let results = folds
        .par_iter()
        .map(|fold| {
            RowSplit::new(fold.train_rows.clone(), fold.test_rows.clone(), labels.len())?;
            let train_labels: Vec<StyleLabel> = fold.train_rows.iter().map(|&i| labels[i]).collect();
            let test_labels: Vec<StyleLabel> = fold.test_rows.iter().map(|&i| labels[i]).collect();
            let y: Vec<usize> = train_labels.iter().map(|l| l.index()).collect();
            let model = SoftmaxClassifier::fit(x.select(Axis(0), &fold.train_rows).view(), &y, classes.len(), config)?;
            let predicted = model.predict(x.select(Axis(0), &fold.test_rows).view());
            let acc = accuracy(predicted.into_iter().map(|c| classes[c]), &test_labels);
            let majority = majority_label(&train_labels).expect("non-empty train set");
            let baseline = accuracy(std::iter::repeat(majority), &test_labels);
            Ok((acc, baseline))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_fold_accuracy, per_fold_baseline): (Vec<f64>, Vec<f64>) = results.into_iter().unzip();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(ClassificationProbeReport {
        embedding_name: embedding_name.to_owned(),
        mean_accuracy: mean(&per_fold_accuracy),
        baseline_accuracy: mean(&per_fold_baseline),
        n_folds: folds.len(),
        per_fold_accuracy,
        per_fold_baseline,
    })
}
