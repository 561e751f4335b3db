#![allow(dead_code)]

pub mod equivalence;
pub mod oracle;
pub mod props;

use std::path::PathBuf;

use fairtree::{BinStrategy, DataTable, LabelSpec, SensitiveSpec};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn load(name: &str, label: LabelSpec, sensitive: SensitiveSpec) -> DataTable {
    let raw = DataTable::load_csv(data_path(name), &label, &sensitive).expect("dataset loads");
    raw.discretize_all(BinStrategy::EqualFrequency, 4).expect("dataset discretizes").0
}

pub fn german() -> DataTable {
    load("german.csv", LabelSpec::new("credit", "good"), SensitiveSpec::new("age", ">25"))
}

pub fn compas() -> DataTable {
    load("compas.csv", LabelSpec::new("two_year_recid", "no"), SensitiveSpec::new("race", "Caucasian"))
}

pub fn adult() -> DataTable {
    load("adult.csv", LabelSpec::new("income", ">50K"), SensitiveSpec::new("gender", "Male"))
}

/// Table over attributes `x0..` plus `s` (F/D) and `y` (+/-).
pub fn table_of(rows: &[oracle::Row], n_attrs: usize) -> DataTable {
    let mut headers: Vec<String> = (0..n_attrs).map(|j| format!("x{j}")).collect();
    headers.push("s".into());
    headers.push("y".into());
    let records = rows
        .iter()
        .map(|r| {
            let mut rec: Vec<String> = r.x.iter().map(|v| format!("v{v}")).collect();
            rec.push(if r.favored { "F" } else { "D" }.into());
            rec.push(if r.positive { "+" } else { "-" }.into());
            rec
        })
        .collect();
    DataTable::from_records(
        headers,
        records,
        &LabelSpec::new("y", "+").with_negative("-"),
        &SensitiveSpec::new("s", "F").with_deprived("D"),
    )
    .expect("synthetic table")
}
