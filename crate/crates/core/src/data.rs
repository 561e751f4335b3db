//! Tabular data: CSV ingest, schema, discretization of numeric columns and
//! favored/deprived group counting.
//!
//! A [`DataTable`] stores every column as a vector of category codes indexing
//! the column's ordered outcome list. Numeric columns are kept as raw values
//! until [`DataTable::discretize`] replaces them by range categories. The label
//! and sensitive columns are binary with fixed code order: code 0 is the
//! positive label / favored group, code 1 the negative label / deprived group.

use std::collections::BTreeSet;
use std::fmt;
use std::ops::{Add, AddAssign};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::DataError;

/// Category used for empty or `?` fields.
pub const MISSING: &str = "\u{2400}missing";

const SCHEMA_VERSION: &str = "fairtree-schema/1";

fn is_missing_token(s: &str) -> bool {
    s.is_empty() || s == "?"
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeKind {
    Categorical,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
    /// Ordered category codes. Empty for a numeric column that has not been
    /// discretized yet.
    pub outcomes: Vec<String>,
    /// Strictly increasing bin boundaries of a discretized numeric column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_points: Option<Vec<f64>>,
}

impl AttributeSpec {
    pub fn is_discretized(&self) -> bool {
        self.kind == AttributeKind::Categorical || self.cut_points.is_some()
    }

    pub fn outcome_code(&self, value: &str) -> Option<u32> {
        self.outcomes.iter().position(|o| o == value).map(|i| i as u32)
    }
}

/// Label column with its positive value. `negative` is inferred from the data
/// when left empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpec {
    pub column: String,
    pub positive: String,
    pub negative: Option<String>,
}

impl LabelSpec {
    pub fn new(column: impl Into<String>, positive: impl Into<String>) -> Self {
        Self { column: column.into(), positive: positive.into(), negative: None }
    }

    pub fn with_negative(mut self, negative: impl Into<String>) -> Self {
        self.negative = Some(negative.into());
        self
    }
}

/// Sensitive column with its favored value. `deprived` is inferred from the
/// data when left empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensitiveSpec {
    pub column: String,
    pub favored: String,
    pub deprived: Option<String>,
}

impl SensitiveSpec {
    pub fn new(column: impl Into<String>, favored: impl Into<String>) -> Self {
        Self { column: column.into(), favored: favored.into(), deprived: None }
    }

    pub fn with_deprived(mut self, deprived: impl Into<String>) -> Self {
        self.deprived = Some(deprived.into());
        self
    }
}

/// Column layout plus the resolved label and sensitive specs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub columns: Vec<AttributeSpec>,
    pub label: LabelSpec,
    pub sensitive: SensitiveSpec,
}

impl Schema {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// SHA-256 over the canonical JSON encoding of the schema.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        hex(&Sha256::digest(&bytes))
    }

    pub fn to_sidecar(&self) -> String {
        let doc = SidecarDoc {
            version: SCHEMA_VERSION.to_string(),
            fingerprint: self.fingerprint(),
            schema: self.clone(),
        };
        toml::to_string_pretty(&doc).expect("schema sidecar serializes")
    }

    pub fn from_sidecar(text: &str) -> Result<Self, DataError> {
        let doc: SidecarDoc =
            toml::from_str(text).map_err(|e| DataError::Sidecar(e.to_string()))?;
        if doc.version != SCHEMA_VERSION {
            return Err(DataError::Sidecar(format!("unsupported version `{}`", doc.version)));
        }
        if doc.schema.fingerprint() != doc.fingerprint {
            return Err(DataError::Sidecar("fingerprint does not match schema".into()));
        }
        Ok(doc.schema)
    }
}

#[derive(Serialize, Deserialize)]
struct SidecarDoc {
    version: String,
    fingerprint: String,
    schema: Schema,
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
enum ColumnData {
    Codes(Vec<u32>),
    Raw(Vec<Option<f64>>),
}

/// Class tallies of the two groups at a node, leaf or row subset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GroupCounts {
    pub fav_pos: u64,
    pub fav_neg: u64,
    pub dep_pos: u64,
    pub dep_neg: u64,
}

impl GroupCounts {
    pub const fn new(fav_pos: u64, fav_neg: u64, dep_pos: u64, dep_neg: u64) -> Self {
        Self { fav_pos, fav_neg, dep_pos, dep_neg }
    }

    pub fn favored(&self) -> u64 {
        self.fav_pos + self.fav_neg
    }

    pub fn deprived(&self) -> u64 {
        self.dep_pos + self.dep_neg
    }

    pub fn total(&self) -> u64 {
        self.favored() + self.deprived()
    }

    pub fn positives(&self) -> u64 {
        self.fav_pos + self.dep_pos
    }

    pub fn negatives(&self) -> u64 {
        self.fav_neg + self.dep_neg
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Both groups have at least one row.
    pub fn has_both_groups(&self) -> bool {
        self.favored() > 0 && self.deprived() > 0
    }

    pub fn record(&mut self, favored: bool, positive: bool) {
        match (favored, positive) {
            (true, true) => self.fav_pos += 1,
            (true, false) => self.fav_neg += 1,
            (false, true) => self.dep_pos += 1,
            (false, false) => self.dep_neg += 1,
        }
    }

    /// Counts with the favored and deprived roles exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.dep_pos, self.dep_neg, self.fav_pos, self.fav_neg)
    }
}

impl Add for GroupCounts {
    type Output = GroupCounts;

    fn add(self, o: GroupCounts) -> GroupCounts {
        GroupCounts::new(
            self.fav_pos + o.fav_pos,
            self.fav_neg + o.fav_neg,
            self.dep_pos + o.dep_pos,
            self.dep_neg + o.dep_neg,
        )
    }
}

impl AddAssign for GroupCounts {
    fn add_assign(&mut self, o: GroupCounts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for GroupCounts {
    fn sum<I: Iterator<Item = GroupCounts>>(iter: I) -> Self {
        iter.fold(GroupCounts::default(), |a, b| a + b)
    }
}

impl fmt::Display for GroupCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {}, {})", self.fav_pos, self.fav_neg, self.dep_pos, self.dep_neg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BinStrategy {
    EqualFrequency,
    EqualWidth,
}

impl std::str::FromStr for BinStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "equal-frequency" => Ok(BinStrategy::EqualFrequency),
            "equal-width" => Ok(BinStrategy::EqualWidth),
            other => Err(format!("unknown binning strategy `{other}`")),
        }
    }
}

/// How a numeric column is cut into ranges. `cut_points` is filled in by
/// [`DiscretizationRule::fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizationRule {
    pub column: String,
    pub strategy: BinStrategy,
    pub bin_count: usize,
    pub cut_points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataWarning {
    /// Every observed value is identical; one bin was emitted.
    ConstantColumn { column: String },
    /// Fewer distinct ranges than requested could be formed.
    ReducedBins { column: String, requested: usize, produced: usize },
}

impl fmt::Display for DataWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataWarning::ConstantColumn { column } => {
                write!(f, "column `{column}` is constant; emitted a single bin")
            }
            DataWarning::ReducedBins { column, requested, produced } => write!(
                f,
                "column `{column}`: requested {requested} bins, only {produced} non-empty bins exist"
            ),
        }
    }
}

impl DiscretizationRule {
    pub fn new(column: impl Into<String>, strategy: BinStrategy, bin_count: usize) -> Self {
        Self { column: column.into(), strategy, bin_count, cut_points: Vec::new() }
    }

    /// Default rule: equal-frequency, 4 bins.
    pub fn default_for(column: impl Into<String>) -> Self {
        Self::new(column, BinStrategy::EqualFrequency, 4)
    }

    /// Computes cut points from the observed values. Every resulting bin is
    /// non-empty; the cut points depend only on the multiset of values.
    pub fn fit(&mut self, values: &[f64]) -> Result<Option<DataWarning>, DataError> {
        if self.bin_count < 2 {
            return Err(DataError::Config(format!(
                "column `{}`: bin count must be at least 2, got {}",
                self.column, self.bin_count
            )));
        }
        let mut sorted: Vec<f64> = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        if n == 0 || sorted[0] == sorted[n - 1] {
            self.cut_points.clear();
            return Ok(Some(DataWarning::ConstantColumn { column: self.column.clone() }));
        }
        let candidates: Vec<f64> = match self.strategy {
            BinStrategy::EqualFrequency => (1..self.bin_count)
                .filter_map(|i| {
                    let k = (i * n + self.bin_count / 2) / self.bin_count;
                    if k == 0 || k >= n {
                        return None;
                    }
                    let (lo, hi) = (sorted[k - 1], sorted[k]);
                    Some(if lo < hi { lo + (hi - lo) / 2.0 } else { lo })
                })
                .collect(),
            BinStrategy::EqualWidth => {
                let (min, max) = (sorted[0], sorted[n - 1]);
                let width = (max - min) / self.bin_count as f64;
                (1..self.bin_count).map(|i| min + width * i as f64).collect()
            }
        };
        let mut cuts: Vec<f64> = Vec::new();
        let mut below_prev = 0usize;
        for c in candidates {
            if cuts.last().is_some_and(|&last| c <= last) {
                continue;
            }
            let below = sorted.partition_point(|&v| v <= c);
            if below > below_prev && below < n {
                cuts.push(c);
                below_prev = below;
            }
        }
        self.cut_points = cuts;
        let produced = self.cut_points.len() + 1;
        Ok((produced < self.bin_count).then(|| DataWarning::ReducedBins {
            column: self.column.clone(),
            requested: self.bin_count,
            produced,
        }))
    }

    /// Range labels, one per bin: `<=c1`, `c1-c2`, ..., `>ck`.
    pub fn bin_labels(cut_points: &[f64]) -> Vec<String> {
        if cut_points.is_empty() {
            return vec!["all".to_string()];
        }
        let mut labels = Vec::with_capacity(cut_points.len() + 1);
        labels.push(format!("<={}", cut_points[0]));
        for w in cut_points.windows(2) {
            labels.push(format!("{}-{}", w[0], w[1]));
        }
        labels.push(format!(">{}", cut_points[cut_points.len() - 1]));
        labels
    }

    /// Bin index of `value`: the number of cut points strictly below it.
    pub fn bin_of(cut_points: &[f64], value: f64) -> usize {
        cut_points.partition_point(|&c| c < value)
    }
}

/// Immutable table of records over a finalized or raw schema.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    schema: Schema,
    columns: Vec<ColumnData>,
    label_idx: usize,
    sensitive_idx: usize,
    n_rows: usize,
}

struct RawCsv {
    headers: Vec<String>,
    records: Vec<Vec<String>>,
}

fn read_raw_csv(path: &Path) -> Result<RawCsv, DataError> {
    let file = std::fs::File::open(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| DataError::MalformedRow { row: 0, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut records = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| DataError::MalformedRow { row: i + 1, message: e.to_string() })?;
        records.push(rec.iter().map(str::to_string).collect());
    }
    Ok(RawCsv { headers, records })
}

fn resolve_binary(
    column: &str,
    values: &[String],
    primary: &str,
    secondary: Option<&str>,
) -> Result<String, DataError> {
    let schema_err = |message: String| DataError::Schema { column: column.to_string(), message };
    let distinct: BTreeSet<&str> = values.iter().map(String::as_str).collect();
    let other = match secondary {
        Some(s) => {
            if s == primary {
                return Err(schema_err(format!("both declared values are `{s}`")));
            }
            s.to_string()
        }
        None => {
            let others: Vec<&str> = distinct.iter().copied().filter(|v| *v != primary).collect();
            match others.as_slice() {
                [one] => one.to_string(),
                [] => {
                    return Err(schema_err(format!(
                        "cannot infer the second value: only `{primary}` occurs"
                    )))
                }
                many => {
                    return Err(schema_err(format!(
                        "expected 2 distinct values, found {}",
                        many.len() + usize::from(distinct.contains(primary))
                    )))
                }
            }
        }
    };
    if let Some(bad) = distinct.iter().find(|v| **v != primary && **v != other) {
        return Err(schema_err(format!(
            "value `{bad}` is neither `{primary}` nor `{other}`"
        )));
    }
    Ok(other)
}

impl DataTable {
    /// Reads a CSV file and infers a schema: columns whose non-missing values
    /// all parse as finite numbers become raw numeric columns; everything else
    /// is categorical with lexicographically ordered outcomes (missing last).
    pub fn load_csv(
        path: impl AsRef<Path>,
        label: &LabelSpec,
        sensitive: &SensitiveSpec,
    ) -> Result<Self, DataError> {
        let raw = read_raw_csv(path.as_ref())?;
        Self::from_raw(raw, label, sensitive)
    }

    /// Builds a table from in-memory records with the same inference rules as
    /// [`DataTable::load_csv`].
    pub fn from_records(
        headers: Vec<String>,
        records: Vec<Vec<String>>,
        label: &LabelSpec,
        sensitive: &SensitiveSpec,
    ) -> Result<Self, DataError> {
        if let Some(i) = records.iter().position(|r| r.len() != headers.len()) {
            return Err(DataError::MalformedRow {
                row: i + 1,
                message: format!("expected {} fields, found {}", headers.len(), records[i].len()),
            });
        }
        Self::from_raw(RawCsv { headers, records }, label, sensitive)
    }

    /// Reads a CSV file written by [`DataTable::write_csv`] together with its
    /// schema sidecar, restoring the exact schema.
    pub fn read_with_sidecar(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(sidecar_path(path))?;
        let schema = Schema::from_sidecar(&text)?;
        Self::load_conforming(path, &schema)
    }

    /// Reads a CSV file and maps it onto an existing schema. Raw numbers in
    /// discretized columns are binned with the schema's cut points.
    pub fn load_conforming(path: impl AsRef<Path>, schema: &Schema) -> Result<Self, DataError> {
        let raw = read_raw_csv(path.as_ref())?;
        Self::conform_raw(raw, schema)
    }

    fn column_values(raw: &RawCsv, idx: usize) -> Vec<String> {
        raw.records.iter().map(|r| r[idx].clone()).collect()
    }

    fn from_raw(raw: RawCsv, label: &LabelSpec, sensitive: &SensitiveSpec) -> Result<Self, DataError> {
        let find = |name: &str| {
            raw.headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| DataError::MissingColumn(name.to_string()))
        };
        let label_idx = find(&label.column)?;
        let sensitive_idx = find(&sensitive.column)?;
        if label_idx == sensitive_idx {
            return Err(DataError::Config("label and sensitive columns must differ".into()));
        }
        let n_rows = raw.records.len();

        let label_values = Self::column_values(&raw, label_idx);
        let negative =
            resolve_binary(&label.column, &label_values, &label.positive, label.negative.as_deref())?;
        let sens_values = Self::column_values(&raw, sensitive_idx);
        let deprived = resolve_binary(
            &sensitive.column,
            &sens_values,
            &sensitive.favored,
            sensitive.deprived.as_deref(),
        )?;
        let label = LabelSpec {
            column: label.column.clone(),
            positive: label.positive.clone(),
            negative: Some(negative.clone()),
        };
        let sensitive = SensitiveSpec {
            column: sensitive.column.clone(),
            favored: sensitive.favored.clone(),
            deprived: Some(deprived.clone()),
        };

        let mut specs = Vec::with_capacity(raw.headers.len());
        let mut columns = Vec::with_capacity(raw.headers.len());
        for (j, name) in raw.headers.iter().enumerate() {
            let values = Self::column_values(&raw, j);
            if j == label_idx || j == sensitive_idx {
                let (first, second) = if j == label_idx {
                    (label.positive.clone(), negative.clone())
                } else {
                    (sensitive.favored.clone(), deprived.clone())
                };
                let codes = values.iter().map(|v| u32::from(*v != first)).collect();
                specs.push(AttributeSpec {
                    name: name.clone(),
                    kind: AttributeKind::Categorical,
                    outcomes: vec![first, second],
                    cut_points: None,
                });
                columns.push(ColumnData::Codes(codes));
                continue;
            }
            let parsed: Option<Vec<Option<f64>>> = values
                .iter()
                .map(|v| {
                    if is_missing_token(v) {
                        Some(None)
                    } else {
                        v.trim().parse::<f64>().ok().filter(|x| x.is_finite()).map(Some)
                    }
                })
                .collect();
            match parsed {
                Some(nums) if nums.iter().any(Option::is_some) => {
                    specs.push(AttributeSpec {
                        name: name.clone(),
                        kind: AttributeKind::Numeric,
                        outcomes: Vec::new(),
                        cut_points: None,
                    });
                    columns.push(ColumnData::Raw(nums));
                }
                _ => {
                    let mut has_missing = false;
                    let mut distinct = BTreeSet::new();
                    for v in &values {
                        if is_missing_token(v) {
                            has_missing = true;
                        } else {
                            distinct.insert(v.as_str());
                        }
                    }
                    let mut outcomes: Vec<String> = distinct.into_iter().map(str::to_string).collect();
                    if has_missing {
                        outcomes.push(MISSING.to_string());
                    }
                    let codes = values
                        .iter()
                        .map(|v| {
                            let key = if is_missing_token(v) { MISSING } else { v.as_str() };
                            outcomes.iter().position(|o| o == key).unwrap() as u32
                        })
                        .collect();
                    specs.push(AttributeSpec {
                        name: name.clone(),
                        kind: AttributeKind::Categorical,
                        outcomes,
                        cut_points: None,
                    });
                    columns.push(ColumnData::Codes(codes));
                }
            }
        }
        Ok(Self {
            schema: Schema { columns: specs, label, sensitive },
            columns,
            label_idx,
            sensitive_idx,
            n_rows,
        })
    }

    fn conform_raw(raw: RawCsv, schema: &Schema) -> Result<Self, DataError> {
        let headers: Vec<&str> = raw.headers.iter().map(String::as_str).collect();
        let expected: Vec<&str> = schema.columns.iter().map(|c| c.name.as_str()).collect();
        if headers != expected {
            for name in &expected {
                if !headers.contains(name) {
                    return Err(DataError::MissingColumn(name.to_string()));
                }
            }
            return Err(DataError::Config(format!(
                "column layout differs from schema: expected {expected:?}, found {headers:?}"
            )));
        }
        let label_idx = schema
            .column_index(&schema.label.column)
            .ok_or_else(|| DataError::MissingColumn(schema.label.column.clone()))?;
        let sensitive_idx = schema
            .column_index(&schema.sensitive.column)
            .ok_or_else(|| DataError::MissingColumn(schema.sensitive.column.clone()))?;
        let mut columns = Vec::with_capacity(schema.columns.len());
        for (j, spec) in schema.columns.iter().enumerate() {
            let bad = |row: usize, v: &str| DataError::MalformedRow {
                row: row + 1,
                message: format!("column `{}`: value `{v}` is not in the schema", spec.name),
            };
            match (spec.kind, &spec.cut_points) {
                (AttributeKind::Numeric, None) => {
                    let mut nums = Vec::with_capacity(raw.records.len());
                    for (i, r) in raw.records.iter().enumerate() {
                        let v = &r[j];
                        if is_missing_token(v) {
                            nums.push(None);
                        } else {
                            let x = v.trim().parse::<f64>().map_err(|_| bad(i, v))?;
                            nums.push(Some(x));
                        }
                    }
                    columns.push(ColumnData::Raw(nums));
                }
                (kind, cuts) => {
                    let mut codes = Vec::with_capacity(raw.records.len());
                    for (i, r) in raw.records.iter().enumerate() {
                        let v = &r[j];
                        let key = if is_missing_token(v) { MISSING } else { v.as_str() };
                        let code = match spec.outcome_code(key) {
                            Some(c) => c,
                            None => match (kind, cuts) {
                                (AttributeKind::Numeric, Some(cuts)) => {
                                    let x = v.trim().parse::<f64>().map_err(|_| bad(i, v))?;
                                    DiscretizationRule::bin_of(cuts, x) as u32
                                }
                                _ => return Err(bad(i, v)),
                            },
                        };
                        codes.push(code);
                    }
                    columns.push(ColumnData::Codes(codes));
                }
            }
        }
        Ok(Self {
            schema: schema.clone(),
            columns,
            label_idx,
            sensitive_idx,
            n_rows: raw.records.len(),
        })
    }

    /// Writes the table as CSV plus a schema sidecar next to it.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let path = path.as_ref();
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| DataError::Io(csv_to_io(e)))?;
        let io = |e: csv::Error| DataError::Io(csv_to_io(e));
        w.write_record(self.schema.columns.iter().map(|c| c.name.as_str())).map_err(io)?;
        let mut record: Vec<String> = Vec::with_capacity(self.columns.len());
        for row in 0..self.n_rows {
            record.clear();
            for (spec, data) in self.schema.columns.iter().zip(&self.columns) {
                record.push(match data {
                    ColumnData::Codes(codes) => {
                        let o = &spec.outcomes[codes[row] as usize];
                        if o == MISSING { String::new() } else { o.clone() }
                    }
                    ColumnData::Raw(vals) => vals[row].map(|x| x.to_string()).unwrap_or_default(),
                });
            }
            w.write_record(&record).map_err(io)?;
        }
        w.flush()?;
        std::fs::write(sidecar_path(path), self.schema.to_sidecar())?;
        Ok(())
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn label_index(&self) -> usize {
        self.label_idx
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_idx
    }

    /// Indices of the non-sensitive attribute columns (everything except the
    /// label and sensitive columns), in declaration order.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.columns.len()).filter(|&j| j != self.label_idx && j != self.sensitive_idx).collect()
    }

    /// Names of raw numeric columns that still need discretization.
    pub fn undiscretized_columns(&self) -> Vec<String> {
        self.schema
            .columns
            .iter()
            .zip(&self.columns)
            .filter(|(_, d)| matches!(d, ColumnData::Raw(_)))
            .map(|(s, _)| s.name.clone())
            .collect()
    }

    pub fn is_finalized(&self) -> bool {
        self.columns.iter().all(|c| matches!(c, ColumnData::Codes(_)))
    }

    /// Category codes of a finalized column. Panics for raw numeric columns.
    pub fn codes(&self, column: usize) -> &[u32] {
        match &self.columns[column] {
            ColumnData::Codes(c) => c,
            ColumnData::Raw(_) => panic!("column `{}` is not discretized", self.schema.columns[column].name),
        }
    }

    /// Raw numeric values of a column that has not been discretized.
    pub fn raw_values(&self, column: usize) -> Option<&[Option<f64>]> {
        match &self.columns[column] {
            ColumnData::Raw(v) => Some(v),
            ColumnData::Codes(_) => None,
        }
    }

    /// Cell text as it would be written to CSV.
    pub fn cell(&self, row: usize, column: usize) -> String {
        match &self.columns[column] {
            ColumnData::Codes(c) => self.schema.columns[column].outcomes[c[row] as usize].clone(),
            ColumnData::Raw(v) => v[row].map(|x| x.to_string()).unwrap_or_default(),
        }
    }

    pub fn is_positive(&self, row: usize) -> bool {
        self.codes(self.label_idx)[row] == 0
    }

    pub fn is_favored(&self, row: usize) -> bool {
        self.codes(self.sensitive_idx)[row] == 0
    }

    pub fn labels(&self) -> Vec<bool> {
        self.codes(self.label_idx).iter().map(|&c| c == 0).collect()
    }

    pub fn favored_mask(&self) -> Vec<bool> {
        self.codes(self.sensitive_idx).iter().map(|&c| c == 0).collect()
    }

    /// Exact (favored, deprived) × (positive, negative) tallies over `rows`.
    pub fn group_counts<I>(&self, rows: I) -> GroupCounts
    where
        I: IntoIterator<Item = usize>,
    {
        let labels = self.codes(self.label_idx);
        let groups = self.codes(self.sensitive_idx);
        let mut counts = GroupCounts::default();
        for r in rows {
            counts.record(groups[r] == 0, labels[r] == 0);
        }
        counts
    }

    pub fn total_counts(&self) -> GroupCounts {
        self.group_counts(0..self.n_rows)
    }

    /// Rows `rows` (in the given order) over the same schema.
    pub fn subset(&self, rows: &[usize]) -> DataTable {
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                ColumnData::Codes(v) => ColumnData::Codes(rows.iter().map(|&r| v[r]).collect()),
                ColumnData::Raw(v) => ColumnData::Raw(rows.iter().map(|&r| v[r]).collect()),
            })
            .collect();
        DataTable {
            schema: self.schema.clone(),
            columns,
            label_idx: self.label_idx,
            sensitive_idx: self.sensitive_idx,
            n_rows: rows.len(),
        }
    }

    /// Copy of the table with the label of each listed row set to `positive`.
    pub fn with_labels_set(&self, rows: &[usize], positive: bool) -> DataTable {
        let mut out = self.clone();
        if let ColumnData::Codes(codes) = &mut out.columns[out.label_idx] {
            for &r in rows {
                codes[r] = u32::from(!positive);
            }
        }
        out
    }

    /// Copy of the table with favored and deprived roles exchanged.
    pub fn with_groups_swapped(&self) -> DataTable {
        let mut out = self.clone();
        let s = &mut out.schema.sensitive;
        let favored = s.favored.clone();
        s.favored = s.deprived.clone().expect("resolved sensitive spec");
        s.deprived = Some(favored);
        out.schema.columns[out.sensitive_idx].outcomes.swap(0, 1);
        if let ColumnData::Codes(codes) = &mut out.columns[out.sensitive_idx] {
            for c in codes.iter_mut() {
                *c = 1 - *c;
            }
        }
        out
    }

    /// SHA-256 over the schema fingerprint and every cell.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.schema.fingerprint().as_bytes());
        h.update((self.n_rows as u64).to_le_bytes());
        for c in &self.columns {
            match c {
                ColumnData::Codes(v) => {
                    h.update([0u8]);
                    for x in v {
                        h.update(x.to_le_bytes());
                    }
                }
                ColumnData::Raw(v) => {
                    h.update([1u8]);
                    for x in v {
                        match x {
                            Some(x) => h.update(x.to_bits().to_le_bytes()),
                            None => h.update([0xff; 8]),
                        }
                    }
                }
            }
        }
        hex(&h.finalize())
    }

    /// Replaces a raw numeric column by range categories. Cut points are fit
    /// on the favored and deprived rows combined.
    pub fn discretize(
        &self,
        rule: &DiscretizationRule,
    ) -> Result<(DataTable, DiscretizationRule, Option<DataWarning>), DataError> {
        let idx = self
            .schema
            .column_index(&rule.column)
            .ok_or_else(|| DataError::MissingColumn(rule.column.clone()))?;
        let values = match &self.columns[idx] {
            ColumnData::Raw(v) => v,
            ColumnData::Codes(_) => {
                return Err(DataError::Config(format!(
                    "column `{}` is not a raw numeric column",
                    rule.column
                )))
            }
        };
        let observed: Vec<f64> = values.iter().flatten().copied().collect();
        let mut fitted = rule.clone();
        let warning = fitted.fit(&observed)?;
        let mut outcomes = DiscretizationRule::bin_labels(&fitted.cut_points);
        let missing_code = outcomes.len() as u32;
        if values.iter().any(Option::is_none) {
            outcomes.push(MISSING.to_string());
        }
        let codes = values
            .iter()
            .map(|v| match v {
                Some(x) => DiscretizationRule::bin_of(&fitted.cut_points, *x) as u32,
                None => missing_code,
            })
            .collect();
        let mut out = self.clone();
        out.schema.columns[idx] = AttributeSpec {
            name: rule.column.clone(),
            kind: AttributeKind::Numeric,
            outcomes,
            cut_points: Some(fitted.cut_points.clone()),
        };
        out.columns[idx] = ColumnData::Codes(codes);
        Ok((out, fitted, warning))
    }

    /// Discretizes every remaining raw numeric column with one strategy.
    pub fn discretize_all(
        &self,
        strategy: BinStrategy,
        bin_count: usize,
    ) -> Result<(DataTable, Vec<DataWarning>), DataError> {
        let mut table = self.clone();
        let mut warnings = Vec::new();
        for name in self.undiscretized_columns() {
            let rule = DiscretizationRule::new(name, strategy, bin_count);
            let (t, _, w) = table.discretize(&rule)?;
            table = t;
            warnings.extend(w);
        }
        Ok((table, warnings))
    }
}

fn csv_to_io(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

/// Location of the schema sidecar for a CSV path: `foo.csv` → `foo.schema.toml`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.toml")
}
