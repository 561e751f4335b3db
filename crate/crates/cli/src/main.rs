//! `fairtree` command-line front end: build, relabel, audit, report, sweep.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fairtree::eval::{self, SweepManifest};
use fairtree::metrics::{self, FairnessReport};
use fairtree::relabel::{self, RelabelPlan};
use fairtree::{
    BinStrategy, Criterion, DataTable, ErrorCategory, FairTree, LabelSpec, LinearModel, SensitiveSpec, SweepConfig,
    TrainConfig, TreeConfig,
};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "fairtree", version, about = "Discrimination-aware tree building and leaf relabeling")]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "FAIRTREE_OUT", default_value = "fairtree-out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Discretize a CSV file and build a tree; writes tree.json and stats.json.
    Build {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "kl")]
        criterion: Criterion,
        /// Let an attribute be tested again below the node that consumed it.
        #[arg(long)]
        reuse_attributes: bool,
        /// Do not split nodes with fewer rows than this.
        #[arg(long, default_value_t = 1)]
        min_rows: usize,
    },
    /// Relabel leaves whose discrimination is at least sigma; writes plan.json,
    /// relabeled.csv and relabel.json.
    Relabel {
        #[arg(long)]
        tree: PathBuf,
        /// CSV with the columns the tree was built on (raw or discretized).
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the plan only and leave the data untouched.
        #[arg(long, conflicts_with = "plan")]
        plan_only: bool,
        /// Apply a previously written plan instead of computing one.
        #[arg(long)]
        plan: Option<PathBuf>,
    },
    /// Fairness and accuracy of predictions; writes report.json (and roc.csv).
    Audit {
        #[command(flatten)]
        data: DataArgs,
        /// Column holding predictions: the positive label value, `1` or `true`
        /// count as positive. Without it a built-in logistic regression is
        /// trained on a 75/25 split and audited on the held-out rows.
        #[arg(long)]
        predictions: Option<String>,
        /// Numeric score column for the ROC curves; defaults to the built-in
        /// model's probabilities.
        #[arg(long)]
        scores: Option<String>,
        /// Also write per-group ROC points.
        #[arg(long)]
        roc: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Discriminatory subgroups of a tree; writes subgroups.csv.
    Report {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        min_disc: f64,
        #[arg(long)]
        top_k: Option<usize>,
    },
    /// Cross-validated sweep over sigma; writes sweep.csv and sweep.json.
    Sweep {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "kl")]
        criterion: Criterion,
        /// `start:stop:step` or a comma-separated list.
        #[arg(long, default_value = "0:2:0.1")]
        grid: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long, value_delimiter = ',', default_value = "0")]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = 300)]
        epochs: usize,
        #[arg(long, default_value_t = 1.0)]
        learning_rate: f64,
    },
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Class label column.
    #[arg(long)]
    label: String,
    /// Desired (positive) label value.
    #[arg(long)]
    positive: String,
    /// Negative label value, if the column has more than two values.
    #[arg(long)]
    negative: Option<String>,
    /// Sensitive attribute column.
    #[arg(long)]
    sensitive: String,
    /// Favored value of the sensitive attribute.
    #[arg(long)]
    favored: String,
    #[arg(long)]
    deprived: Option<String>,
    /// Ranges per numeric column.
    #[arg(long, default_value_t = 4)]
    bins: usize,
    #[arg(long, default_value = "equal-frequency")]
    binning: BinStrategy,
}

impl DataArgs {
    fn specs(&self) -> (LabelSpec, SensitiveSpec) {
        let mut label = LabelSpec::new(&self.label, &self.positive);
        if let Some(n) = &self.negative {
            label = label.with_negative(n);
        }
        let mut sensitive = SensitiveSpec::new(&self.sensitive, &self.favored);
        if let Some(d) = &self.deprived {
            sensitive = sensitive.with_deprived(d);
        }
        (label, sensitive)
    }

    fn load_raw(&self) -> Result<DataTable, Failure> {
        let (label, sensitive) = self.specs();
        DataTable::load_csv(&self.data, &label, &sensitive)
            .map_err(|e| fail(e.category(), format!("{}: {e}", self.data.display())))
    }

    fn load(&self) -> Result<DataTable, Failure> {
        let raw = self.load_raw()?;
        let (table, warnings) = raw.discretize_all(self.binning, self.bins)?;
        for w in warnings {
            eprintln!("warning: {w}");
        }
        Ok(table)
    }
}

struct Failure {
    category: ErrorCategory,
    message: String,
}

fn fail(category: ErrorCategory, e: impl std::fmt::Display) -> Failure {
    Failure { category, message: e.to_string() }
}

fn config(msg: impl std::fmt::Display) -> Failure {
    fail(ErrorCategory::Config, msg)
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    let category = match e.kind() {
        std::io::ErrorKind::NotFound => ErrorCategory::Config,
        _ => ErrorCategory::Data,
    };
    fail(category, format!("{}: {e}", path.display()))
}

macro_rules! categorized {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                fail(e.category(), e)
            }
        }
    )*};
}
categorized!(fairtree::DataError, fairtree::TreeError, fairtree::RelabelError, fairtree::EvalError);

impl From<fairtree::MetricError> for Failure {
    fn from(e: fairtree::MetricError) -> Self {
        fail(ErrorCategory::Data, e)
    }
}

/// Exclusive hold on the output directory for the life of one command.
struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    fn acquire(dir: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join(".fairtree.lock");
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(config(format!(
                "output directory {} is locked by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(io(&path, e)),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    let path = dir.join(name);
    let mut f = File::create(&path).map_err(|e| io(&path, e))?;
    f.write_all(contents.as_bytes()).map_err(|e| io(&path, e))?;
    Ok(path)
}

fn json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io(path, e))
}

fn load_tree(path: &Path) -> Result<FairTree, Failure> {
    Ok(FairTree::from_document(&read(path)?)?)
}

#[derive(Serialize)]
struct BuildStats {
    format: &'static str,
    version: u32,
    criterion: Criterion,
    rows: usize,
    leaves: usize,
    node_count: usize,
    sparsity: usize,
    depth: usize,
    tree_digest: String,
    dataset_digest: String,
}

#[derive(Serialize)]
struct RelabelManifest {
    format: &'static str,
    version: u32,
    seed: u64,
    sigma: f64,
    rng: String,
    tree_digest: String,
    source_digest: String,
    plan_digest: String,
    leaves_relabeled: usize,
    labels_flipped: usize,
}

fn build(out: &Path, data: &DataArgs, criterion: Criterion, tree_config: TreeConfig) -> Result<(), Failure> {
    let table = data.load()?;
    let tree = FairTree::build(&table, criterion, tree_config)?;
    let stats = tree.stats();
    write(out, "tree.json", &tree.to_document())?;
    let summary = BuildStats {
        format: "fairtree-stats",
        version: 1,
        criterion,
        rows: table.n_rows(),
        leaves: tree.n_leaves(),
        node_count: stats.node_count,
        sparsity: stats.sparsity,
        depth: stats.depth,
        tree_digest: tree.digest(),
        dataset_digest: table.digest(),
    };
    write(out, "stats.json", &json(&summary))?;
    println!("nodes {} leaves {} depth {}", stats.node_count, stats.sparsity, stats.depth);
    Ok(())
}

fn relabel_cmd(
    out: &Path,
    tree_path: &Path,
    data: &Path,
    sigma: f64,
    seed: u64,
    plan_only: bool,
    plan_path: Option<&Path>,
) -> Result<(), Failure> {
    relabel::check_sigma(sigma)?;
    let tree = load_tree(tree_path)?;
    let table = DataTable::load_conforming(data, tree.schema())
        .map_err(|e| fail(e.category(), format!("{}: {e}", data.display())))?;
    let plan = match plan_path {
        Some(p) => {
            let plan = RelabelPlan::from_document(&read(p)?)?;
            if plan.tree_digest != tree.digest() {
                return Err(config("plan was built from a different tree"));
            }
            if plan.sigma != sigma || plan.seed != seed {
                return Err(config(format!(
                    "plan was made with sigma {} and seed {}; pass the same values",
                    plan.sigma, plan.seed
                )));
            }
            plan
        }
        None => relabel::plan(&tree, &table, sigma, seed)?,
    };
    write(out, "plan.json", &plan.to_document())?;
    println!("{} leaves selected, {} labels to flip", plan.actions.len(), plan.relabeled_count());
    if plan_only {
        return Ok(());
    }
    let relabeled = plan.apply(&table)?;
    let csv_path = out.join("relabeled.csv");
    relabeled.table.write_csv(&csv_path)?;
    let manifest = RelabelManifest {
        format: "fairtree-relabel",
        version: 1,
        seed,
        sigma,
        rng: plan.rng.clone(),
        tree_digest: plan.tree_digest.clone(),
        source_digest: relabeled.provenance.source_digest,
        plan_digest: relabeled.provenance.plan_digest,
        leaves_relabeled: plan.actions.len(),
        labels_flipped: plan.relabeled_count(),
    };
    write(out, "relabel.json", &json(&manifest))?;
    Ok(())
}

fn column(table: &DataTable, name: &str) -> Result<usize, Failure> {
    table
        .schema()
        .column_index(name)
        .ok_or_else(|| config(format!("column `{name}` not found")))
}

fn audit(
    out: &Path,
    data: &DataArgs,
    predictions: Option<&str>,
    scores: Option<&str>,
    roc: bool,
    seed: u64,
) -> Result<(), Failure> {
    let (labels, preds, favored, score_values, deprived) = match predictions {
        Some(col) => {
            let table = data.load_raw()?;
            let idx = column(&table, col)?;
            let preds: Vec<bool> = (0..table.n_rows())
                .map(|r| {
                    let v = table.cell(r, idx);
                    v == data.positive || v == "1" || v.eq_ignore_ascii_case("true")
                })
                .collect();
            let score_values = match scores {
                Some(s) => Some(score_column(&table, s)?),
                None => None,
            };
            (table.labels(), preds, table.favored_mask(), score_values, deprived_name(&table))
        }
        None => {
            let table = data.load()?;
            let (train, test) = eval::split(table.n_rows(), 0.25, seed)?;
            let (train, test) = (table.subset(&train), table.subset(&test));
            let model = LinearModel::train(&train, TrainConfig { seed, ..TrainConfig::default() })?;
            let score_values = match scores {
                Some(s) => score_column(&test, s)?,
                None => model.predict_proba(&test)?,
            };
            (test.labels(), model.predict(&test)?, test.favored_mask(), Some(score_values), deprived_name(&test))
        }
    };
    let report = FairnessReport::compute(&labels, &preds, &favored)?;
    write(out, "report.json", &report.to_json())?;
    println!("{}\n{}", FairnessReport::CSV_HEADER, report.csv_row());
    if roc {
        let s = score_values.ok_or_else(|| config("--roc needs --scores when --predictions is given"))?;
        let series = metrics::roc_points(&s, &labels, &favored, &data.favored, &deprived)?;
        write(out, "roc.csv", &metrics::roc_csv(&series))?;
    }
    Ok(())
}

fn deprived_name(table: &DataTable) -> String {
    table.schema().sensitive.deprived.clone().unwrap_or_else(|| "deprived".into())
}

fn score_column(table: &DataTable, name: &str) -> Result<Vec<f64>, Failure> {
    let idx = column(table, name)?;
    let values = table
        .raw_values(idx)
        .ok_or_else(|| config(format!("score column `{name}` is not numeric")))?;
    values
        .iter()
        .enumerate()
        .map(|(r, v)| v.ok_or_else(|| fail(ErrorCategory::Data, format!("row {}: missing score", r + 1))))
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn report(out: &Path, tree_path: &Path, min_disc: f64, top_k: Option<usize>) -> Result<(), Failure> {
    if !(0.0..=2.0).contains(&min_disc) {
        return Err(config(format!("--min-disc must lie in [0, 2], got {min_disc}")));
    }
    let tree = load_tree(tree_path)?;
    let groups = tree.extract_subgroups(min_disc, top_k);
    let mut csv = String::from("leaf,disc,rule,favored_pos_neg,deprived_pos_neg,rows\n");
    for g in &groups {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            g.leaf_id,
            g.disc,
            csv_field(&g.rule()),
            g.favored_tally(),
            g.deprived_tally(),
            g.counts.total()
        ));
    }
    write(out, "subgroups.csv", &csv)?;
    let sensitive = &tree.schema().sensitive;
    let (fav, dep) = (sensitive.favored.as_str(), sensitive.deprived.as_deref().unwrap_or("deprived"));
    println!("{:>6}  {:>7}  {:>9}  {:>9}  rule", "leaf", "disc", fav, dep);
    for g in &groups {
        println!(
            "{:>6}  {:>7.4}  {:>9}  {:>9}  {}",
            g.leaf_id,
            g.disc,
            g.favored_tally(),
            g.deprived_tally(),
            g.rule()
        );
    }
    Ok(())
}

fn sweep(out: &Path, data: &DataArgs, config_in: SweepConfig) -> Result<(), Failure> {
    let table = data.load()?;
    let result = eval::sweep(&table, &config_in)?;
    write(out, "sweep.csv", &result.to_csv())?;
    write(out, "sweep.json", &SweepManifest::new(&config_in, &table).to_json())?;
    print!("{}", result.to_csv());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    let _lock = OutputLock::acquire(&cli.out)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Build { data, criterion, reuse_attributes, min_rows } => {
            build(out, &data, criterion, TreeConfig { min_rows, reuse_attributes })
        }
        Command::Relabel { tree, data, sigma, seed, plan_only, plan } => {
            relabel_cmd(out, &tree, &data, sigma, seed, plan_only, plan.as_deref())
        }
        Command::Audit { data, predictions, scores, roc, seed } => {
            audit(out, &data, predictions.as_deref(), scores.as_deref(), roc, seed)
        }
        Command::Report { tree, min_disc, top_k } => report(out, &tree, min_disc, top_k),
        Command::Sweep { data, criterion, grid, folds, seeds, epochs, learning_rate } => {
            let sigmas = eval::parse_grid(&grid)?;
            if seeds.is_empty() {
                return Err(config("--seeds needs at least one value"));
            }
            let mut cfg = SweepConfig::new(criterion, sigmas);
            cfg.folds = folds;
            cfg.seeds = seeds;
            cfg.train.epochs = epochs;
            cfg.train.learning_rate = learning_rate;
            sweep(out, &data, cfg)
        }
    }
}

fn main() -> ExitCode {
    // clap reports usage errors with exit code 2 on its own.
    let cli = Cli::parse();
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(cli))) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(match f.category {
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Internal => 4,
            })
        }
        Err(_) => {
            eprintln!("error: internal invariant violated");
            ExitCode::from(4)
        }
    }
}
