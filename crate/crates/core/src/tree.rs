//! Fairness-aware uplift tree.
//!
//! Splits are chosen to maximize the divergence between the favored and
//! deprived class distributions, normalized against high-branching and
//! group-separating tests. Trees grow to full depth; each categorical
//! attribute is consumed once along a path. Leaves carry the discrimination
//! score `disc = (P^F(+) − P^D(+)) + (P^D(−) − P^F(−))` over raw frequencies.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::Digest;

use crate::data::{DataTable, GroupCounts, Schema};
use crate::divergence::{
    divergence_gain, e_normalizer, fallback_gain, gain_ratio, kl_normalizer, Measure,
};
use crate::error::TreeError;

const TREE_FORMAT: &str = "fairtree-tree";
const TREE_VERSION: u32 = 1;

/// Ratios closer than this are considered tied.
const TIE_EPS: f64 = 1e-12;

/// Rows at a node above which candidate attributes are scored in parallel.
const PARALLEL_ROWS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Criterion {
    KlRatio,
    EuclidRatio,
}

impl Criterion {
    pub fn measure(self) -> Measure {
        match self {
            Criterion::KlRatio => Measure::Kl,
            Criterion::EuclidRatio => Measure::Euclid,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Criterion::KlRatio => "kl-ratio",
            Criterion::EuclidRatio => "euclid-ratio",
        }
    }
}

impl std::str::FromStr for Criterion {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "kl" | "kl-ratio" => Ok(Criterion::KlRatio),
            "euclid" | "euclid-ratio" => Ok(Criterion::EuclidRatio),
            other => Err(format!("unknown criterion `{other}` (expected `kl` or `euclid`)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    /// Nodes with fewer rows become leaves.
    pub min_rows: usize,
    /// Keep an attribute available below a node that split on it. A reused
    /// categorical attribute has a single outcome and is never chosen again.
    pub reuse_attributes: bool,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self { min_rows: 1, reuse_attributes: false }
    }
}

/// Score of one candidate attribute at a node.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitEvaluation {
    pub attribute: String,
    pub column: usize,
    pub raw_gain: f64,
    pub normalizer: f64,
    pub ratio: f64,
    pub eligible: bool,
    /// One group was empty at the node and the classical entropy / Gini gain
    /// was used.
    pub fallback: bool,
    /// Group tallies per observed outcome code, in code order.
    pub children: Vec<(u32, GroupCounts)>,
}

fn children_counts(table: &DataTable, rows: &[usize], column: usize) -> Vec<(u32, GroupCounts)> {
    let n_outcomes = table.schema().columns[column].outcomes.len();
    let codes = table.codes(column);
    let labels = table.codes(table.label_index());
    let groups = table.codes(table.sensitive_index());
    let mut counts = vec![GroupCounts::default(); n_outcomes];
    for &r in rows {
        counts[codes[r] as usize].record(groups[r] == 0, labels[r] == 0);
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_empty())
        .map(|(code, c)| (code as u32, c))
        .collect()
}

/// Scores every candidate column at a node over `rows`. A candidate is
/// eligible when its raw gain is at least the mean raw gain of all
/// candidates. Output order follows `candidates`.
pub fn evaluate_splits(
    table: &DataTable,
    rows: &[usize],
    candidates: &[usize],
    criterion: Criterion,
) -> Result<Vec<SplitEvaluation>, TreeError> {
    let parent = table.group_counts(rows.iter().copied());
    let measure = criterion.measure();
    let score = |&column: &usize| -> Result<SplitEvaluation, TreeError> {
        let children = children_counts(table, rows, column);
        let tallies: Vec<GroupCounts> = children.iter().map(|(_, c)| *c).collect();
        let fallback = !parent.has_both_groups();
        let raw_gain = if fallback {
            fallback_gain(&parent, &tallies, measure)?
        } else {
            divergence_gain(&parent, &tallies, measure, measure.uses_laplace())?
        };
        let normalizer = match measure {
            Measure::Kl => kl_normalizer(&parent, &tallies),
            Measure::Euclid => e_normalizer(&parent, &tallies),
        };
        Ok(SplitEvaluation {
            attribute: table.schema().columns[column].name.clone(),
            column,
            raw_gain,
            normalizer,
            ratio: gain_ratio(raw_gain, normalizer),
            eligible: false,
            fallback,
            children,
        })
    };
    let mut evals: Vec<SplitEvaluation> = if rows.len() >= PARALLEL_ROWS {
        candidates.par_iter().map(score).collect::<Result<_, _>>()?
    } else {
        candidates.iter().map(score).collect::<Result<_, _>>()?
    };
    if evals.is_empty() {
        return Ok(evals);
    }
    let mean = evals.iter().map(|e| e.raw_gain).sum::<f64>() / evals.len() as f64;
    let slack = TIE_EPS * mean.abs().max(1.0);
    for e in &mut evals {
        e.eligible = e.raw_gain >= mean - slack;
    }
    Ok(evals)
}

/// Index of the eligible evaluation with the largest positive ratio. Ratios
/// up to 1e-12 count as zero, so rounding noise on a mathematically neutral
/// test never triggers a split. Ties within 1e-12 go to the earliest entry.
pub fn choose_split(evaluations: &[SplitEvaluation]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, e) in evaluations.iter().enumerate() {
        if !e.eligible || e.ratio.is_nan() || e.ratio <= TIE_EPS || !e.ratio.is_finite() {
            continue;
        }
        match best {
            Some((_, r)) if e.ratio <= r + TIE_EPS => {}
            _ => best = Some((i, e.ratio)),
        }
    }
    best.map(|(i, _)| i)
}

/// Discrimination of a leaf from raw frequencies; 0 when either group is
/// empty.
pub fn leaf_disc(counts: &GroupCounts) -> f64 {
    if !counts.has_both_groups() {
        return 0.0;
    }
    let nf = counts.favored() as f64;
    let nd = counts.deprived() as f64;
    let (f_pos, f_neg) = (counts.fav_pos as f64 / nf, counts.fav_neg as f64 / nf);
    let (d_pos, d_neg) = (counts.dep_pos as f64 / nd, counts.dep_neg as f64 / nd);
    (f_pos - d_pos) + (d_neg - f_neg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub id: usize,
    pub counts: GroupCounts,
    pub disc: f64,
    /// Positive when positives ≥ negatives.
    pub majority_positive: bool,
    pub depth: usize,
}

impl Leaf {
    fn new(id: usize, counts: GroupCounts, depth: usize) -> Self {
        Self {
            id,
            counts,
            disc: leaf_disc(&counts),
            majority_positive: counts.positives() >= counts.negatives(),
            depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub code: u32,
    pub node: TreeNode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        attribute: String,
        column: usize,
        counts: GroupCounts,
        /// Outcome code with the most training rows; rows with an unseen
        /// outcome follow it.
        fallback: u32,
        children: Vec<Branch>,
    },
    Leaf(Leaf),
}

impl TreeNode {
    pub fn counts(&self) -> GroupCounts {
        match self {
            TreeNode::Internal { counts, .. } => *counts,
            TreeNode::Leaf(l) => l.counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterpretabilityStats {
    /// Internal nodes plus leaves.
    pub node_count: usize,
    /// Number of leaves.
    pub sparsity: usize,
    /// Longest root-to-leaf path in edges.
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub attribute: String,
    pub outcome: String,
}

/// A leaf described by the conjunction of tests on its root path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupDescriptor {
    pub leaf_id: usize,
    pub path: Vec<Condition>,
    pub counts: GroupCounts,
    pub disc: f64,
}

impl SubgroupDescriptor {
    pub fn rule(&self) -> String {
        self.path
            .iter()
            .map(|c| format!("{}={}", c.attribute, c.outcome))
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    /// `f⁺ : f⁻` tally of the favored group.
    pub fn favored_tally(&self) -> String {
        format!("{} : {}", self.counts.fav_pos, self.counts.fav_neg)
    }

    /// `d⁺ : d⁻` tally of the deprived group.
    pub fn deprived_tally(&self) -> String {
        format!("{} : {}", self.counts.dep_pos, self.counts.dep_neg)
    }
}

/// A fitted tree together with the schema it routes over.
#[derive(Debug, Clone, PartialEq)]
pub struct FairTree {
    pub root: TreeNode,
    pub criterion: Criterion,
    pub config: TreeConfig,
    schema: Schema,
    fingerprint: String,
    n_leaves: usize,
}

struct Builder<'a> {
    table: &'a DataTable,
    criterion: Criterion,
    config: TreeConfig,
    next_leaf: usize,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, available: &[usize], depth: usize) -> Result<TreeNode, TreeError> {
        let counts = self.table.group_counts(rows.iter().copied());
        if rows.len() < self.config.min_rows.max(1) || available.is_empty() {
            return Ok(self.leaf(counts, depth));
        }
        let evals = evaluate_splits(self.table, &rows, available, self.criterion)?;
        let Some(best) = choose_split(&evals) else {
            return Ok(self.leaf(counts, depth));
        };
        let chosen = &evals[best];
        let column = chosen.column;
        let fallback = chosen
            .children
            .iter()
            .max_by(|a, b| a.1.total().cmp(&b.1.total()).then(b.0.cmp(&a.0)))
            .map(|(code, _)| *code)
            .expect("a chosen split has outcomes");
        let codes = self.table.codes(column);
        let outcome_codes: Vec<u32> = chosen.children.iter().map(|(c, _)| *c).collect();
        let mut parts: Vec<Vec<usize>> = vec![Vec::new(); outcome_codes.len()];
        for r in rows {
            let slot = outcome_codes.binary_search(&codes[r]).expect("observed outcome");
            parts[slot].push(r);
        }
        let remaining: Vec<usize> = if self.config.reuse_attributes {
            available.to_vec()
        } else {
            available.iter().copied().filter(|&c| c != column).collect()
        };
        let attribute = chosen.attribute.clone();
        let mut children = Vec::with_capacity(parts.len());
        for (code, part) in outcome_codes.into_iter().zip(parts) {
            let node = self.grow(part, &remaining, depth + 1)?;
            children.push(Branch { code, node });
        }
        Ok(TreeNode::Internal { attribute, column, counts, fallback, children })
    }

    fn leaf(&mut self, counts: GroupCounts, depth: usize) -> TreeNode {
        let id = self.next_leaf;
        self.next_leaf += 1;
        TreeNode::Leaf(Leaf::new(id, counts, depth))
    }
}

impl FairTree {
    /// Grows a tree to full depth over every non-sensitive attribute.
    pub fn build(table: &DataTable, criterion: Criterion, config: TreeConfig) -> Result<Self, TreeError> {
        if table.n_rows() == 0 {
            return Err(TreeError::EmptyTable);
        }
        if let Some(name) = table.undiscretized_columns().into_iter().next() {
            return Err(TreeError::NotDiscretized(name));
        }
        let mut builder = Builder { table, criterion, config, next_leaf: 0 };
        let root = builder.grow((0..table.n_rows()).collect(), &table.feature_indices(), 0)?;
        let schema = table.schema().clone();
        Ok(Self {
            root,
            criterion,
            config,
            fingerprint: schema.fingerprint(),
            schema,
            n_leaves: builder.next_leaf,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// SHA-256 of the tree document.
    pub fn digest(&self) -> String {
        crate::data::hex(&sha2::Sha256::digest(self.to_document().as_bytes()))
    }

    pub fn n_leaves(&self) -> usize {
        self.n_leaves
    }

    pub fn check_compatible(&self, table: &DataTable) -> Result<(), TreeError> {
        let found = table.schema().fingerprint();
        if found != self.fingerprint {
            return Err(TreeError::FingerprintMismatch { expected: self.fingerprint.clone(), found });
        }
        Ok(())
    }

    /// Routes a row, given a lookup from column index to category code.
    pub fn route(&self, code_of: impl Fn(usize) -> u32) -> &Leaf {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf(leaf) => return leaf,
                TreeNode::Internal { column, fallback, children, .. } => {
                    let code = code_of(*column);
                    node = match children.iter().find(|b| b.code == code) {
                        Some(b) => &b.node,
                        None => &children.iter().find(|b| b.code == *fallback).expect("fallback child").node,
                    };
                }
            }
        }
    }

    /// Leaf id of a table row. The table must share the tree's schema.
    pub fn assign(&self, table: &DataTable, row: usize) -> usize {
        self.route(|c| table.codes(c)[row]).id
    }

    /// Leaf id of every row of `table`.
    pub fn assign_all(&self, table: &DataTable) -> Result<Vec<usize>, TreeError> {
        self.check_compatible(table)?;
        Ok((0..table.n_rows()).map(|r| self.assign(table, r)).collect())
    }

    /// Leaves in id order (depth-first, children in outcome order).
    pub fn leaves(&self) -> Vec<&Leaf> {
        let mut out = Vec::with_capacity(self.n_leaves);
        fn walk<'a>(n: &'a TreeNode, out: &mut Vec<&'a Leaf>) {
            match n {
                TreeNode::Leaf(l) => out.push(l),
                TreeNode::Internal { children, .. } => children.iter().for_each(|b| walk(&b.node, out)),
            }
        }
        walk(&self.root, &mut out);
        out
    }

    pub fn stats(&self) -> InterpretabilityStats {
        fn walk(n: &TreeNode, depth: usize, s: &mut InterpretabilityStats) {
            s.node_count += 1;
            match n {
                TreeNode::Leaf(_) => {
                    s.sparsity += 1;
                    s.depth = s.depth.max(depth);
                }
                TreeNode::Internal { children, .. } => {
                    children.iter().for_each(|b| walk(&b.node, depth + 1, s))
                }
            }
        }
        let mut s = InterpretabilityStats { node_count: 0, sparsity: 0, depth: 0 };
        walk(&self.root, 0, &mut s);
        s
    }

    /// Root-to-leaf conditions for every leaf, in leaf id order.
    pub fn subgroups(&self) -> Vec<SubgroupDescriptor> {
        let mut out = Vec::with_capacity(self.n_leaves);
        let mut path = Vec::new();
        self.collect_paths(&self.root, &mut path, &mut out);
        out
    }

    fn collect_paths(&self, n: &TreeNode, path: &mut Vec<Condition>, out: &mut Vec<SubgroupDescriptor>) {
        match n {
            TreeNode::Leaf(l) => out.push(SubgroupDescriptor {
                leaf_id: l.id,
                path: path.clone(),
                counts: l.counts,
                disc: l.disc,
            }),
            TreeNode::Internal { attribute, column, children, .. } => {
                for b in children {
                    path.push(Condition {
                        attribute: attribute.clone(),
                        outcome: self.schema.columns[*column].outcomes[b.code as usize].clone(),
                    });
                    self.collect_paths(&b.node, path, out);
                    path.pop();
                }
            }
        }
    }

    /// Discriminatory leaves (`disc > 0`) with `disc ≥ min_disc`, most
    /// discriminatory first, larger leaves first among equal scores.
    pub fn extract_subgroups(&self, min_disc: f64, top_k: Option<usize>) -> Vec<SubgroupDescriptor> {
        let mut groups: Vec<SubgroupDescriptor> = self
            .subgroups()
            .into_iter()
            .filter(|g| g.disc > 0.0 && g.disc >= min_disc)
            .collect();
        groups.sort_by(|a, b| {
            b.disc
                .total_cmp(&a.disc)
                .then(b.counts.total().cmp(&a.counts.total()))
                .then(a.leaf_id.cmp(&b.leaf_id))
        });
        if let Some(k) = top_k {
            groups.truncate(k);
        }
        groups
    }

    /// Versioned JSON document with stable key order.
    pub fn to_document(&self) -> String {
        let doc = TreeDocument {
            format: TREE_FORMAT.to_string(),
            version: TREE_VERSION,
            criterion: self.criterion,
            config: self.config,
            schema_fingerprint: self.fingerprint.clone(),
            schema: self.schema.clone(),
            root: self.node_doc(&self.root),
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("tree document serializes");
        s.push('\n');
        s
    }

    fn node_doc(&self, n: &TreeNode) -> NodeDoc {
        match n {
            TreeNode::Leaf(l) => NodeDoc::Leaf {
                id: l.id,
                depth: l.depth,
                counts: l.counts,
                disc: l.disc,
                majority: if l.majority_positive { Majority::Positive } else { Majority::Negative },
            },
            TreeNode::Internal { attribute, column, counts, fallback, children } => {
                let outcomes = &self.schema.columns[*column].outcomes;
                NodeDoc::Internal {
                    attribute: attribute.clone(),
                    counts: *counts,
                    fallback_outcome: outcomes[*fallback as usize].clone(),
                    children: children
                        .iter()
                        .map(|b| ChildDoc { outcome: outcomes[b.code as usize].clone(), node: self.node_doc(&b.node) })
                        .collect(),
                }
            }
        }
    }

    /// Parses and validates a tree document. Leaf scores are recomputed from
    /// the stored counts and must agree within 1e-9.
    pub fn from_document(text: &str) -> Result<Self, TreeError> {
        let doc: TreeDocument = serde_json::from_str(text).map_err(|e| TreeError::Document(e.to_string()))?;
        if doc.format != TREE_FORMAT || doc.version != TREE_VERSION {
            return Err(TreeError::Document(format!(
                "unsupported format `{}` version {}",
                doc.format, doc.version
            )));
        }
        let fingerprint = doc.schema.fingerprint();
        if fingerprint != doc.schema_fingerprint {
            return Err(TreeError::FingerprintMismatch { expected: doc.schema_fingerprint, found: fingerprint });
        }
        let mut ids = BTreeSet::new();
        let root = node_from_doc(&doc.schema, &doc.root, 0, &mut ids)?;
        let n_leaves = ids.len();
        if ids.iter().copied().ne(0..n_leaves) {
            return Err(TreeError::Document("leaf ids must be 0..n without gaps".into()));
        }
        Ok(Self {
            root,
            criterion: doc.criterion,
            config: doc.config,
            schema: doc.schema,
            fingerprint,
            n_leaves,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Majority {
    Positive,
    Negative,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDocument {
    format: String,
    version: u32,
    criterion: Criterion,
    config: TreeConfig,
    schema_fingerprint: String,
    schema: Schema,
    root: NodeDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum NodeDoc {
    Internal {
        attribute: String,
        counts: GroupCounts,
        fallback_outcome: String,
        children: Vec<ChildDoc>,
    },
    Leaf {
        id: usize,
        depth: usize,
        counts: GroupCounts,
        disc: f64,
        majority: Majority,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChildDoc {
    outcome: String,
    node: NodeDoc,
}

fn node_from_doc(
    schema: &Schema,
    doc: &NodeDoc,
    depth: usize,
    ids: &mut BTreeSet<usize>,
) -> Result<TreeNode, TreeError> {
    let bad = |m: String| TreeError::Document(m);
    match doc {
        NodeDoc::Leaf { id, depth: d, counts, disc, majority } => {
            if *d != depth {
                return Err(bad(format!("leaf {id}: depth {d} does not match its position ({depth})")));
            }
            if !ids.insert(*id) {
                return Err(bad(format!("duplicate leaf id {id}")));
            }
            let leaf = Leaf::new(*id, *counts, depth);
            if (leaf.disc - disc).abs() > 1e-9 || !disc.is_finite() {
                return Err(bad(format!(
                    "leaf {id}: stored disc {disc} disagrees with {} recomputed from counts {counts}",
                    leaf.disc
                )));
            }
            if leaf.majority_positive != (*majority == Majority::Positive) {
                return Err(bad(format!("leaf {id}: majority class does not match counts")));
            }
            Ok(TreeNode::Leaf(leaf))
        }
        NodeDoc::Internal { attribute, counts, fallback_outcome, children } => {
            let column = schema
                .column_index(attribute)
                .ok_or_else(|| bad(format!("unknown attribute `{attribute}`")))?;
            if attribute == &schema.label.column || attribute == &schema.sensitive.column {
                return Err(bad(format!("attribute `{attribute}` cannot be a split test")));
            }
            let spec = &schema.columns[column];
            let code_of = |o: &str| {
                spec.outcome_code(o)
                    .ok_or_else(|| bad(format!("attribute `{attribute}` has no outcome `{o}`")))
            };
            if children.is_empty() {
                return Err(bad(format!("split on `{attribute}` has no children")));
            }
            let fallback = code_of(fallback_outcome)?;
            let mut branches = Vec::with_capacity(children.len());
            for child in children {
                let code = code_of(&child.outcome)?;
                if branches.iter().any(|b: &Branch| b.code >= code) {
                    return Err(bad(format!("children of `{attribute}` must be in outcome order")));
                }
                branches.push(Branch { code, node: node_from_doc(schema, &child.node, depth + 1, ids)? });
            }
            if !branches.iter().any(|b| b.code == fallback) {
                return Err(bad(format!("fallback outcome `{fallback_outcome}` is not a child")));
            }
            let sum: GroupCounts = branches.iter().map(|b| b.node.counts()).sum();
            if sum != *counts {
                return Err(bad(format!("counts of `{attribute}` node do not equal the sum of its children")));
            }
            Ok(TreeNode::Internal { attribute: attribute.clone(), column, counts: *counts, fallback, children: branches })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabelSpec, SensitiveSpec};

    pub(crate) fn table_from(rows: &[&str], header: &str) -> DataTable {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut body = format!("{header}\n");
        for r in rows {
            body.push_str(r);
            body.push('\n');
        }
        std::fs::write(&p, body).unwrap();
        DataTable::load_csv(
            &p,
            &LabelSpec::new("y", "+").with_negative("-"),
            &SensitiveSpec::new("s", "F").with_deprived("D"),
        )
        .unwrap()
    }

    fn eval(attribute: &str, raw_gain: f64, ratio: f64, eligible: bool) -> SplitEvaluation {
        SplitEvaluation {
            attribute: attribute.into(),
            column: 0,
            raw_gain,
            normalizer: 1.0,
            ratio,
            eligible,
            fallback: false,
            children: vec![],
        }
    }

    #[test]
    fn leaf_disc_reference_values() {
        assert_eq!(leaf_disc(&GroupCounts::new(6, 0, 0, 1)), 2.0);
        assert!((leaf_disc(&GroupCounts::new(11, 9, 0, 2)) - 1.1).abs() < 1e-9);
        assert_eq!(leaf_disc(&GroupCounts::new(3, 1, 6, 2)), 0.0);
        assert_eq!(leaf_disc(&GroupCounts::new(3, 1, 0, 0)), 0.0);
    }

    #[test]
    fn choose_split_rules() {
        assert_eq!(choose_split(&[eval("a", -0.1, -0.2, true), eval("b", 0.0, 0.0, true)]), None);
        assert_eq!(choose_split(&[eval("a", 0.1, 0.3, false), eval("b", 0.2, 0.1, true)]), Some(1));
        let tied = [eval("a", 0.2, 0.5, true), eval("b", 0.2, 0.5 + 1e-13, true)];
        assert_eq!(choose_split(&tied), Some(0));
        assert_eq!(choose_split(&[eval("a", 0.2, f64::NEG_INFINITY, true)]), None);
    }

    #[test]
    fn single_candidate_is_eligible() {
        let t = table_from(&["x,F,+", "y,D,-", "x,D,+", "y,F,-"], "a,s,y");
        let evals = evaluate_splits(&t, &[0, 1, 2, 3], &[0], Criterion::KlRatio).unwrap();
        assert!(evals[0].eligible);
    }

    #[test]
    fn mean_gain_guard() {
        // `a` separates a favored-positive block from a deprived-negative block,
        // `b` is independent of everything.
        let t = table_from(
            &["p,u,F,+", "p,v,F,+", "p,u,D,-", "p,v,D,-", "q,u,F,+", "q,v,F,-", "q,u,D,+", "q,v,D,-"],
            "a,b,s,y",
        );
        let rows: Vec<usize> = (0..8).collect();
        let evals = evaluate_splits(&t, &rows, &[0, 1], Criterion::EuclidRatio).unwrap();
        assert!(evals[0].raw_gain > evals[1].raw_gain);
        assert!(evals[0].eligible && !evals[1].eligible);
    }

    #[test]
    fn group_separating_test_is_penalized() {
        // `g` puts all favored rows in one branch and all deprived rows in the
        // other; `h` splits both groups evenly with the same class pattern.
        let t = table_from(
            &[
                "g1,h1,F,+", "g1,h2,F,+", "g1,h1,F,-", "g1,h2,F,+",
                "g2,h1,D,-", "g2,h2,D,+", "g2,h1,D,-", "g2,h2,D,-",
            ],
            "g,h,s,y",
        );
        let rows: Vec<usize> = (0..8).collect();
        for criterion in [Criterion::KlRatio, Criterion::EuclidRatio] {
            let evals = evaluate_splits(&t, &rows, &[0, 1], criterion).unwrap();
            let (g, h) = (&evals[0], &evals[1]);
            assert!(g.normalizer > h.normalizer, "{criterion:?}: {g:?} vs {h:?}");
        }
    }

    #[test]
    fn identical_group_distributions_give_single_leaf() {
        let t = table_from(
            &["x,F,+", "x,D,+", "y,F,-", "y,D,-", "x,F,-", "x,D,-", "y,F,+", "y,D,+"],
            "a,s,y",
        );
        for criterion in [Criterion::KlRatio, Criterion::EuclidRatio] {
            let tree = FairTree::build(&t, criterion, TreeConfig::default()).unwrap();
            assert_eq!(tree.stats(), InterpretabilityStats { node_count: 1, sparsity: 1, depth: 0 });
            assert_eq!(tree.leaves()[0].disc, 0.0);
        }
    }

    #[test]
    fn build_rejects_empty_and_raw_tables() {
        let t = table_from(&["x,F,+", "y,D,-"], "a,s,y");
        assert!(matches!(FairTree::build(&t.subset(&[]), Criterion::KlRatio, TreeConfig::default()), Err(TreeError::EmptyTable)));
        let t = table_from(&["1.5,F,+", "2,D,-"], "n,s,y");
        assert!(matches!(FairTree::build(&t, Criterion::KlRatio, TreeConfig::default()), Err(TreeError::NotDiscretized(_))));
    }

    #[test]
    fn stats_of_three_way_root() {
        let t = table_from(&["a,F,+", "a,D,-", "b,F,-", "b,D,+", "c,F,+", "c,D,-", "c,F,+"], "k,s,y");
        let tree = FairTree::build(&t, Criterion::EuclidRatio, TreeConfig::default()).unwrap();
        assert_eq!(tree.stats(), InterpretabilityStats { node_count: 4, sparsity: 3, depth: 1 });
    }

    #[test]
    fn unseen_outcome_follows_fallback() {
        let t = table_from(
            &["a,F,+", "a,D,-", "a,F,+", "a,D,-", "b,F,-", "b,D,+", "z,F,+"],
            "k,s,y",
        );
        let tree = FairTree::build(&t, Criterion::EuclidRatio, TreeConfig::default()).unwrap();
        let TreeNode::Internal { fallback, children, .. } = &tree.root else { panic!("expected a split") };
        assert_eq!(*fallback, 0);
        assert_eq!(children.len(), 3);
        // Pretend a row carries outcome code 7, which no branch has.
        let leaf = tree.route(|_| 7);
        assert_eq!(leaf.id, tree.route(|_| 0).id);
        for r in 0..t.n_rows() {
            assert_eq!(tree.assign(&t, r), tree.assign(&t, r));
        }
    }

    #[test]
    fn document_round_trip_and_integrity() {
        let t = table_from(
            &["a,x,F,+", "a,y,D,-", "b,x,F,-", "b,y,D,+", "a,x,D,-", "b,y,F,+", "a,y,F,+"],
            "k,m,s,y",
        );
        let tree = FairTree::build(&t, Criterion::KlRatio, TreeConfig::default()).unwrap();
        let doc = tree.to_document();
        assert_eq!(FairTree::from_document(&doc).unwrap(), tree);

        let err = FairTree::from_document(&doc.replace("\"kl-ratio\"", "\"gini-ratio\"")).unwrap_err();
        assert!(err.to_string().contains("gini-ratio"), "{err}");

        let mut v: serde_json::Value = serde_json::from_str(&doc).unwrap();
        fn corrupt(n: &mut serde_json::Value) -> bool {
            if n["type"] == "leaf" {
                n["disc"] = serde_json::json!(n["disc"].as_f64().unwrap() + 0.5);
                return true;
            }
            n["children"].as_array_mut().unwrap().iter_mut().any(|c| corrupt(&mut c["node"]))
        }
        assert!(corrupt(&mut v["root"]));
        let err = FairTree::from_document(&v.to_string()).unwrap_err();
        assert!(err.to_string().contains("disagrees"), "{err}");

        let tampered = doc.replacen("\"k\"", "\"kk\"", 1);
        assert!(FairTree::from_document(&tampered).is_err());
    }

    #[test]
    fn subgroups_trace_paths() {
        let t = table_from(
            &["a,x,F,+", "a,x,D,-", "a,y,F,+", "a,y,D,+", "b,x,F,-", "b,x,D,-", "b,y,F,+", "b,y,D,-"],
            "k,m,s,y",
        );
        let tree = FairTree::build(&t, Criterion::EuclidRatio, TreeConfig::default()).unwrap();
        let all = tree.subgroups();
        assert_eq!(all.len(), tree.n_leaves());
        for g in &all {
            let rows: Vec<usize> = (0..t.n_rows())
                .filter(|&r| {
                    g.path.iter().all(|c| {
                        let j = t.schema().column_index(&c.attribute).unwrap();
                        t.cell(r, j) == c.outcome
                    })
                })
                .collect();
            assert_eq!(t.group_counts(rows), g.counts);
        }
        assert!(tree.extract_subgroups(2.1, None).is_empty());
        let disc: Vec<_> = tree.extract_subgroups(0.0, None);
        assert!(disc.iter().all(|g| g.disc > 0.0));
        assert!(disc.windows(2).all(|w| w[0].disc >= w[1].disc));
    }
}
