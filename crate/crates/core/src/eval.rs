//! Experiment harness: a small logistic regression, seeded partitions and the
//! relabeling threshold sweep.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::DataTable;
use crate::error::EvalError;
use crate::metrics::{accuracy, average_odds_difference, balanced_accuracy, demographic_parity, GroupConfusion};
use crate::relabel::{self, RNG_NAME};
use crate::tree::{Criterion, FairTree, TreeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Fraction of the largest step that still guarantees descent.
    pub learning_rate: f64,
    pub seed: u64,
    /// Feed the sensitive attribute to the model as an ordinary feature.
    pub include_sensitive: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 300, learning_rate: 1.0, seed: 0, include_sensitive: true }
    }
}

/// Logistic regression over a one-hot encoding of the categorical columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub config: TrainConfig,
    /// Encoded columns with the offset of their first indicator.
    pub columns: Vec<(usize, usize)>,
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Mean log loss before each epoch's update, plus the final loss.
    pub loss_history: Vec<f64>,
    fingerprint: String,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl LinearModel {
    pub fn train(table: &DataTable, config: TrainConfig) -> Result<Self, EvalError> {
        if let Some(name) = table.undiscretized_columns().into_iter().next() {
            return Err(EvalError::Config(format!("column `{name}` must be discretized before training")));
        }
        let counts = table.total_counts();
        if table.n_rows() < 2 || counts.positives() == 0 || counts.negatives() == 0 {
            return Err(EvalError::Training(format!(
                "training data needs both classes and at least two rows (got {} positive, {} negative)",
                counts.positives(),
                counts.negatives()
            )));
        }
        let mut cols = table.feature_indices();
        if config.include_sensitive {
            cols.push(table.sensitive_index());
            cols.sort_unstable();
        }
        let mut columns = Vec::with_capacity(cols.len());
        let mut width = 0;
        for c in cols {
            columns.push((c, width));
            width += table.schema().columns[c].outcomes.len();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut model = Self {
            config,
            columns,
            weights: (0..width).map(|_| rng.gen_range(-0.01..0.01)).collect(),
            bias: 0.0,
            loss_history: Vec::with_capacity(config.epochs + 1),
            fingerprint: table.schema().fingerprint(),
        };
        let rows: Vec<Vec<u32>> = (0..table.n_rows()).map(|r| model.encode(table, r)).collect();
        let labels = table.labels();
        // Each row has `columns + 1` active inputs, which bounds the
        // curvature of the mean log loss by (columns + 1) / 4.
        let step = config.learning_rate * 4.0 / (model.columns.len() + 1) as f64;
        let n = rows.len() as f64;
        let mut grad = vec![0.0; width];
        for _ in 0..config.epochs {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let mut grad_b = 0.0;
            let mut loss = 0.0;
            for (x, &y) in rows.iter().zip(&labels) {
                let z = model.score_encoded(x);
                loss += if y { softplus(-z) } else { softplus(z) };
                let err = sigmoid(z) - f64::from(u8::from(y));
                for &i in x {
                    grad[i as usize] += err;
                }
                grad_b += err;
            }
            model.loss_history.push(loss / n);
            for (w, g) in model.weights.iter_mut().zip(&grad) {
                *w -= step * g / n;
            }
            model.bias -= step * grad_b / n;
        }
        let final_loss = rows
            .iter()
            .zip(&labels)
            .map(|(x, &y)| {
                let z = model.score_encoded(x);
                if y { softplus(-z) } else { softplus(z) }
            })
            .sum::<f64>()
            / n;
        model.loss_history.push(final_loss);
        Ok(model)
    }

    fn encode(&self, table: &DataTable, row: usize) -> Vec<u32> {
        self.columns
            .iter()
            .map(|&(c, offset)| (offset + table.codes(c)[row] as usize) as u32)
            .collect()
    }

    fn score_encoded(&self, x: &[u32]) -> f64 {
        self.bias + x.iter().map(|&i| self.weights[i as usize]).sum::<f64>()
    }

    fn check(&self, table: &DataTable) -> Result<(), EvalError> {
        if table.schema().fingerprint() != self.fingerprint {
            return Err(EvalError::Config("table schema differs from the training schema".into()));
        }
        Ok(())
    }

    /// Positive-class probability of every row.
    pub fn predict_proba(&self, table: &DataTable) -> Result<Vec<f64>, EvalError> {
        self.check(table)?;
        Ok((0..table.n_rows()).map(|r| sigmoid(self.score_encoded(&self.encode(table, r)))).collect())
    }

    pub fn predict(&self, table: &DataTable) -> Result<Vec<bool>, EvalError> {
        Ok(self.predict_proba(table)?.into_iter().map(|p| p >= 0.5).collect())
    }
}

fn shuffled(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    idx
}

/// Seeded (train, test) row indices; the test part has `round(n·fraction)`
/// rows. Both lists are ascending.
pub fn split(n_rows: usize, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>), EvalError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::Config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let idx = shuffled(n_rows, seed);
    let n_test = (n_rows as f64 * test_fraction).round() as usize;
    let (mut test, mut train) = (idx[..n_test].to_vec(), idx[n_test..].to_vec());
    test.sort_unstable();
    train.sort_unstable();
    Ok((train, test))
}

/// Seeded partition of `0..n_rows` into `k` folds whose sizes differ by at
/// most one. Each fold is ascending.
pub fn kfold(n_rows: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 || k > n_rows {
        return Err(EvalError::Config(format!("fold count must lie in [2, {n_rows}], got {k}")));
    }
    let idx = shuffled(n_rows, seed);
    Ok((0..k)
        .map(|i| {
            let mut fold = idx[i * n_rows / k..(i + 1) * n_rows / k].to_vec();
            fold.sort_unstable();
            fold
        })
        .collect())
}

/// Which labels the test metrics compare predictions against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Classifier trained on raw data, evaluated on raw test labels.
    Baseline,
    RawTest,
    RelabeledTest,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::RawTest => "raw-test",
            Variant::RelabeledTest => "relabeled-test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub criterion: Criterion,
    pub sigmas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub folds: usize,
    pub train: TrainConfig,
    pub tree: TreeConfig,
}

impl SweepConfig {
    pub fn new(criterion: Criterion, sigmas: Vec<f64>) -> Self {
        Self { criterion, sigmas, seeds: vec![0], folds: 10, train: TrainConfig::default(), tree: TreeConfig::default() }
    }
}

/// Metrics of one fold; `None` where the metric is undefined on that fold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldMetrics {
    pub dp: Option<f64>,
    pub aod: Option<f64>,
    pub ba: Option<f64>,
    pub acc: Option<f64>,
    pub relabeled: usize,
}

impl FoldMetrics {
    pub fn compute(labels: &[bool], preds: &[bool], favored: &[bool], relabeled: usize) -> Self {
        let aod = GroupConfusion::new(labels, preds, favored)
            .ok()
            .and_then(|gc| average_odds_difference(&gc).ok());
        Self {
            dp: demographic_parity(preds, favored).ok(),
            aod,
            ba: balanced_accuracy(labels, preds).ok(),
            acc: accuracy(labels, preds).ok(),
            relabeled,
        }
    }

    fn complete(&self) -> bool {
        self.dp.is_some() && self.aod.is_some() && self.ba.is_some() && self.acc.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub n: usize,
}

impl Stat {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().collect();
        let n = v.len();
        if n == 0 {
            return Self { mean: f64::NAN, std: f64::NAN, n };
        }
        let mean = v.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std, n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variant: Variant,
    /// `None` for the baseline row.
    pub sigma: Option<f64>,
    pub runs: usize,
    /// Runs on which at least one metric was undefined.
    pub undefined: usize,
    pub dp: Stat,
    pub aod: Stat,
    pub ba: Stat,
    pub acc: Stat,
    /// Mean number of training labels flipped.
    pub relabeled: f64,
}

impl SweepRow {
    fn aggregate(variant: Variant, sigma: Option<f64>, runs: &[FoldMetrics]) -> Self {
        Self {
            variant,
            sigma,
            runs: runs.len(),
            undefined: runs.iter().filter(|m| !m.complete()).count(),
            dp: Stat::of(runs.iter().filter_map(|m| m.dp)),
            aod: Stat::of(runs.iter().filter_map(|m| m.aod)),
            ba: Stat::of(runs.iter().filter_map(|m| m.ba)),
            acc: Stat::of(runs.iter().filter_map(|m| m.acc)),
            relabeled: runs.iter().map(|m| m.relabeled as f64).sum::<f64>() / runs.len().max(1) as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub baseline: SweepRow,
    /// Sigma-major, raw-test row before relabeled-test row.
    pub rows: Vec<SweepRow>,
}

fn fmt_f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

impl SweepResult {
    pub const CSV_HEADER: &'static str = "variant,sigma,runs,undefined,dp_mean,dp_std,aod_mean,aod_std,\
ba_mean,ba_std,acc_mean,acc_std,relabeled_mean";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in std::iter::once(&self.baseline).chain(&self.rows) {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.variant.name(),
                r.sigma.map(fmt_f).unwrap_or_default(),
                r.runs,
                r.undefined,
                fmt_f(r.dp.mean),
                fmt_f(r.dp.std),
                fmt_f(r.aod.mean),
                fmt_f(r.aod.std),
                fmt_f(r.ba.mean),
                fmt_f(r.ba.std),
                fmt_f(r.acc.mean),
                fmt_f(r.acc.std),
                r.relabeled,
            ));
        }
        s
    }

    pub fn rows_for(&self, variant: Variant) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.variant == variant)
    }

    /// Row with the smallest `|mean dp|` among the given variant.
    pub fn best_dp(&self, variant: Variant) -> Option<&SweepRow> {
        self.rows_for(variant)
            .filter(|r| !r.dp.mean.is_nan())
            .min_by(|a, b| a.dp.mean.abs().total_cmp(&b.dp.mean.abs()))
    }
}

/// Run manifest written next to the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub format: String,
    pub version: u32,
    pub config: SweepConfig,
    pub rng: String,
    pub dataset_digest: String,
    pub schema_fingerprint: String,
    pub rows: usize,
}

impl SweepManifest {
    pub fn new(config: &SweepConfig, table: &DataTable) -> Self {
        Self {
            format: "fairtree-sweep".into(),
            version: 1,
            config: config.clone(),
            rng: RNG_NAME.into(),
            dataset_digest: table.digest(),
            schema_fingerprint: table.schema().fingerprint(),
            rows: table.n_rows(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Everything measured on one (seed, fold) pair.
struct FoldOutcome {
    baseline: FoldMetrics,
    /// Per sigma: raw-test and relabeled-test metrics.
    per_sigma: Vec<(FoldMetrics, FoldMetrics)>,
}

fn run_fold(table: &DataTable, config: &SweepConfig, seed: u64, test_rows: &[usize]) -> Result<FoldOutcome, EvalError> {
    let mut in_test = vec![false; table.n_rows()];
    test_rows.iter().for_each(|&r| in_test[r] = true);
    let train_rows: Vec<usize> = (0..table.n_rows()).filter(|&r| !in_test[r]).collect();
    let train = table.subset(&train_rows);
    let test = table.subset(test_rows);
    let favored = test.favored_mask();
    let raw_labels = test.labels();
    let train_cfg = TrainConfig { seed, ..config.train };

    let baseline_preds = LinearModel::train(&train, train_cfg)?.predict(&test)?;
    let baseline = FoldMetrics::compute(&raw_labels, &baseline_preds, &favored, 0);

    let tree = FairTree::build(&train, config.criterion, config.tree)?;
    // Plans at nearby sigmas often select the same leaves; the relabeled
    // training set, and so the model, is then identical.
    let mut cache: HashMap<Vec<usize>, (Vec<bool>, usize)> = HashMap::new();
    cache.insert(Vec::new(), (baseline_preds, 0));
    let mut per_sigma = Vec::with_capacity(config.sigmas.len());
    for &sigma in &config.sigmas {
        let plan = relabel::plan(&tree, &train, sigma, seed)?;
        let key = plan.leaf_ids();
        if !cache.contains_key(&key) {
            let relabeled = plan.apply(&train)?.table;
            let preds = LinearModel::train(&relabeled, train_cfg)?.predict(&test)?;
            cache.insert(key.clone(), (preds, plan.relabeled_count()));
        }
        let (preds, flipped) = &cache[&key];
        let test_plan = relabel::plan(&tree, &test, sigma, seed)?;
        let test_labels = test_plan.apply(&test)?.table.labels();
        per_sigma.push((
            FoldMetrics::compute(&raw_labels, preds, &favored, *flipped),
            FoldMetrics::compute(&test_labels, preds, &favored, *flipped),
        ));
    }
    Ok(FoldOutcome { baseline, per_sigma })
}

/// k-fold sweep over the relabeling threshold, repeated for every seed.
/// Each fold builds one tree on its training part; every sigma relabels that
/// training part, fits the classifier and scores the held-out fold against
/// both its raw labels and its labels relabeled through the same tree.
pub fn sweep(table: &DataTable, config: &SweepConfig) -> Result<SweepResult, EvalError> {
    for &s in &config.sigmas {
        relabel::check_sigma(s)?;
    }
    if config.seeds.is_empty() {
        return Err(EvalError::Config("at least one seed is required".into()));
    }
    let mut jobs = Vec::new();
    for &seed in &config.seeds {
        for fold in kfold(table.n_rows(), config.folds, seed)? {
            jobs.push((seed, fold));
        }
    }
    let outcomes: Vec<FoldOutcome> = jobs
        .par_iter()
        .map(|(seed, fold)| run_fold(table, config, *seed, fold))
        .collect::<Result<_, _>>()?;
    let baseline: Vec<FoldMetrics> = outcomes.iter().map(|o| o.baseline).collect();
    let mut rows = Vec::with_capacity(2 * config.sigmas.len());
    for (i, &sigma) in config.sigmas.iter().enumerate() {
        let raw: Vec<FoldMetrics> = outcomes.iter().map(|o| o.per_sigma[i].0).collect();
        let rel: Vec<FoldMetrics> = outcomes.iter().map(|o| o.per_sigma[i].1).collect();
        rows.push(SweepRow::aggregate(Variant::RawTest, Some(sigma), &raw));
        rows.push(SweepRow::aggregate(Variant::RelabeledTest, Some(sigma), &rel));
    }
    Ok(SweepResult {
        config: config.clone(),
        baseline: SweepRow::aggregate(Variant::Baseline, None, &baseline),
        rows,
    })
}

/// Parses a sigma grid: `start:stop:step` (inclusive) or a comma list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, EvalError> {
    let bad = |m: &str| EvalError::Config(format!("sigma grid `{spec}`: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(&format!("`{}` is not a number", s.trim())));
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected start:stop:step"));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad("step must be positive and stop ≥ start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        // Rounded to 12 decimals so 0.1-steps print as 0.3 rather than 0.30000000000000004.
        (0..=n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_, _>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty grid"));
    }
    for &s in &grid {
        if !(0.0..=2.0).contains(&s) {
            return Err(bad(&format!("{s} lies outside [0, 2]")));
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelSpec, SensitiveSpec};

    fn table(rows: &[&str]) -> DataTable {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        std::fs::write(&p, format!("a,b,s,y\n{}\n", rows.join("\n"))).unwrap();
        DataTable::load_csv(&p, &LabelSpec::new("y", "+").with_negative("-"), &SensitiveSpec::new("s", "F").with_deprived("D"))
            .unwrap()
    }

    #[test]
    fn separable_toy_is_fit() {
        let t = table(&["x,u,F,+", "x,v,D,+", "z,u,F,-", "z,v,D,-"]);
        let m = LinearModel::train(&t, TrainConfig::default()).unwrap();
        assert_eq!(m.predict(&t).unwrap(), t.labels());
        assert!(m.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn uninformative_features_predict_majority() {
        let t = table(&["x,u,F,+", "x,u,D,+", "x,u,F,+", "x,u,D,-", "x,u,F,+"]);
        let cfg = TrainConfig { include_sensitive: false, ..TrainConfig::default() };
        let m = LinearModel::train(&t, cfg).unwrap();
        assert!(m.predict(&t).unwrap().iter().all(|&p| p));
    }

    #[test]
    fn training_is_deterministic_and_rejects_one_class() {
        let t = table(&["x,u,F,+", "x,v,D,-", "z,u,F,-", "z,v,D,+", "x,u,D,+"]);
        let a = LinearModel::train(&t, TrainConfig { seed: 3, ..Default::default() }).unwrap();
        let b = LinearModel::train(&t, TrainConfig { seed: 3, ..Default::default() }).unwrap();
        assert_eq!(a, b);
        let one = table(&["x,u,F,+", "x,v,D,+"]);
        assert!(matches!(LinearModel::train(&one, TrainConfig::default()), Err(EvalError::Training(_))));
    }

    #[test]
    fn partitions() {
        let folds = kfold(8, 4, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..8).collect::<Vec<_>>());
        assert_eq!(folds, kfold(8, 4, 1).unwrap());
        assert!(kfold(3, 4, 0).is_err());
        let (train, test) = split(1000, 0.25, 9).unwrap();
        assert_eq!((train.len(), test.len()), (750, 250));
        assert_eq!(split(1000, 0.25, 9).unwrap().1, test);
        assert!(split(10, 1.0, 0).is_err());
    }

    #[test]
    fn grid_parsing() {
        let g = parse_grid("0:2:0.1").unwrap();
        assert_eq!(g.len(), 21);
        assert_eq!(g[3], 0.3);
        assert_eq!(*g.last().unwrap(), 2.0);
        assert_eq!(parse_grid("0.5, 1,2").unwrap(), vec![0.5, 1.0, 2.0]);
        assert!(parse_grid("0:3:1").is_err());
        assert!(parse_grid("a:b").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }

    #[test]
    fn stat_uses_sample_std() {
        let s = Stat::of([1.0, 3.0]);
        assert_eq!((s.mean, s.std, s.n), (2.0, 2f64.sqrt(), 2));
        assert_eq!(Stat::of([5.0]).std, 0.0);
    }
}
