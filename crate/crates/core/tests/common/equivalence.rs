//! Library split scoring versus the row-level oracle on enumerated and
//! randomly drawn small datasets.

use fairtree::tree::{evaluate_splits, TreeNode};
use fairtree::{Criterion, FairTree, TreeConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::{self, Row};
use super::table_of;

const TOL: f64 = 1e-10;

#[derive(Debug, Default)]
pub struct Summary {
    pub datasets: usize,
    pub comparisons: usize,
    /// Root choices skipped because a comparison sits at its tolerance.
    pub near_ties: usize,
    pub max_error: f64,
}

/// Every row type over attribute domains `domains`, crossed with group and
/// label.
fn row_types(domains: &[u8]) -> Vec<Row> {
    let mut out = vec![Vec::new()];
    for &d in domains {
        out = out
            .into_iter()
            .flat_map(|x: Vec<u8>| (0..d).map(move |v| [x.clone(), vec![v]].concat()))
            .collect();
    }
    out.into_iter()
        .flat_map(|x| {
            [(true, true), (true, false), (false, true), (false, false)]
                .into_iter()
                .map(move |(favored, positive)| Row { x: x.clone(), favored, positive })
        })
        .collect()
}

/// All multisets of `types` with 1..=max_rows elements.
fn multisets(types: &[Row], max_rows: usize, visit: &mut dyn FnMut(&[Row])) {
    fn rec(types: &[Row], start: usize, left: usize, cur: &mut Vec<Row>, visit: &mut dyn FnMut(&[Row])) {
        if !cur.is_empty() {
            visit(cur);
        }
        if left == 0 {
            return;
        }
        for i in start..types.len() {
            cur.push(types[i].clone());
            rec(types, i, left - 1, cur, visit);
            cur.pop();
        }
    }
    rec(types, 0, max_rows, &mut Vec::new(), visit);
}

fn compare(rows: &[Row], n_attrs: usize, summary: &mut Summary) -> Result<(), String> {
    let table = table_of(rows, n_attrs);
    let all: Vec<usize> = (0..rows.len()).collect();
    let attrs: Vec<usize> = (0..n_attrs).collect();
    summary.datasets += 1;
    for (criterion, kl) in [(Criterion::KlRatio, true), (Criterion::EuclidRatio, false)] {
        let evals = evaluate_splits(&table, &all, &attrs, criterion).map_err(|e| e.to_string())?;
        for (a, e) in evals.iter().enumerate() {
            let o = oracle::score(rows, a, kl);
            let err = (e.raw_gain - o.gain).abs().max((e.normalizer - o.normalizer).abs());
            summary.max_error = summary.max_error.max(err);
            summary.comparisons += 1;
            if err > TOL {
                return Err(format!(
                    "{criterion:?} attribute x{a}: library gain {} / normalizer {} vs oracle {} / {} on {rows:?}",
                    e.raw_gain, e.normalizer, o.gain, o.normalizer
                ));
            }
        }
        let (expected, fragile) = oracle::choose(rows, n_attrs, kl);
        if fragile {
            summary.near_ties += 1;
            continue;
        }
        let tree = FairTree::build(&table, criterion, TreeConfig::default()).map_err(|e| e.to_string())?;
        let chosen = match &tree.root {
            TreeNode::Internal { column, .. } => Some(*column),
            TreeNode::Leaf(_) => None,
        };
        if chosen != expected {
            return Err(format!("{criterion:?}: root split {chosen:?}, brute force {expected:?} on {rows:?}"));
        }
    }
    Ok(())
}

/// Exhaustive enumeration for 2 binary attributes up to `max_rows_2` rows and
/// 3 binary attributes up to `max_rows_3` rows, plus `random` seeded datasets
/// of 8 to 10 rows over 2 or 3 attributes with up to 3 outcomes each.
pub fn run(max_rows_2: usize, max_rows_3: usize, random: usize) -> Result<Summary, String> {
    let mut summary = Summary::default();
    let mut failure = None;
    for (domains, max_rows) in [(vec![2u8, 2], max_rows_2), (vec![2u8, 2, 2], max_rows_3)] {
        let types = row_types(&domains);
        multisets(&types, max_rows, &mut |rows| {
            if failure.is_none() {
                if let Err(e) = compare(rows, domains.len(), &mut summary) {
                    failure = Some(e);
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..random {
        let n_attrs = rng.gen_range(2..=3);
        let domains: Vec<u8> = (0..n_attrs).map(|_| rng.gen_range(2..=3)).collect();
        let n_rows = rng.gen_range(8..=10);
        let rows: Vec<Row> = (0..n_rows)
            .map(|_| Row {
                x: domains.iter().map(|&d| rng.gen_range(0..d)).collect(),
                favored: rng.gen(),
                positive: rng.gen(),
            })
            .collect();
        compare(&rows, n_attrs, &mut summary)?;
    }
    Ok(summary)
}
