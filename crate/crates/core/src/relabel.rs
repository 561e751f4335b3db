//! Leaf relabeling.
//!
//! Leaves whose discrimination reaches the threshold `sigma` get their
//! labels adjusted toward equal positive rates across groups. A leaf whose
//! majority is positive promotes deprived negatives; otherwise favored
//! positives are demoted. Rows are drawn uniformly without replacement from a
//! ChaCha8 generator seeded with `seed`, one stream per leaf, so a plan can be
//! replayed exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{hex, DataTable, GroupCounts};
use crate::error::RelabelError;
use crate::tree::FairTree;

const PLAN_FORMAT: &str = "fairtree-plan";
const PLAN_VERSION: u32 = 1;

/// Name recorded in every plan for the row sampler.
pub const RNG_NAME: &str = "chacha8/stream-per-leaf/rand-0.8-index-sample";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Action {
    Promote,
    Demote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeafAction {
    pub leaf: usize,
    pub action: Action,
    /// Tree-side discrimination that put the leaf in the plan.
    pub disc: f64,
    /// Tallies of the table rows routed into the leaf.
    pub counts: GroupCounts,
    pub p: u64,
    /// Table row indices whose label flips, ascending.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelabelPlan {
    pub format: String,
    pub version: u32,
    pub sigma: f64,
    pub seed: u64,
    pub rng: String,
    pub tree_digest: String,
    pub table_digest: String,
    pub actions: Vec<LeafAction>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_digest: String,
    pub plan_digest: String,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RelabeledTable {
    pub table: DataTable,
    pub provenance: Provenance,
}

/// `num / den` rounded half away from zero, for `den > 0`.
fn round_div(num: i128, den: i128) -> i128 {
    if num >= 0 {
        (2 * num + den) / (2 * den)
    } else {
        -((-2 * num + den) / (2 * den))
    }
}

/// Deprived negatives to promote so the deprived positive rate lands as
/// close as possible to the favored one: `round(n_d·n_f⁺/n_f − n_d⁺)`,
/// clamped to `[0, n_d⁻]`. Zero when either group is empty.
pub fn promote_count(c: &GroupCounts) -> u64 {
    if !c.has_both_groups() {
        return 0;
    }
    let (nf, nd) = (c.favored() as i128, c.deprived() as i128);
    let p = round_div(nd * c.fav_pos as i128 - c.dep_pos as i128 * nf, nf);
    p.clamp(0, c.dep_neg as i128) as u64
}

/// Favored positives to demote so the favored negative rate approaches the
/// deprived one: `round(n_f·n_d⁻/n_d − n_f⁻)`, clamped to `[0, n_f⁺]`.
pub fn demote_count(c: &GroupCounts) -> u64 {
    if !c.has_both_groups() {
        return 0;
    }
    let (nf, nd) = (c.favored() as i128, c.deprived() as i128);
    let p = round_div(nf * c.dep_neg as i128 - c.fav_neg as i128 * nd, nd);
    p.clamp(0, c.fav_pos as i128) as u64
}

/// Tallies after relabeling `p` rows of a leaf.
pub fn counts_after(c: &GroupCounts, action: Action, p: u64) -> GroupCounts {
    match action {
        Action::Promote => GroupCounts::new(c.fav_pos, c.fav_neg, c.dep_pos + p, c.dep_neg - p),
        Action::Demote => GroupCounts::new(c.fav_pos - p, c.fav_neg + p, c.dep_pos, c.dep_neg),
    }
}

pub fn check_sigma(sigma: f64) -> Result<(), RelabelError> {
    if (0.0..=2.0).contains(&sigma) {
        Ok(())
    } else {
        Err(RelabelError::SigmaOutOfRange(sigma))
    }
}

/// Plans relabeling of `table` through `tree`.
///
/// Leaf selection and the promote/demote decision come from the tree's own
/// leaf statistics; `p` and the candidate rows come from the table rows
/// routed into each leaf. For the training table both agree. For a held-out
/// table the rate targets are recomputed on its own rows.
pub fn plan(tree: &FairTree, table: &DataTable, sigma: f64, seed: u64) -> Result<RelabelPlan, RelabelError> {
    check_sigma(sigma)?;
    let assignment = tree.assign_all(table)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); tree.n_leaves()];
    for (row, &leaf) in assignment.iter().enumerate() {
        members[leaf].push(row);
    }
    let mut actions = Vec::new();
    for leaf in tree.leaves() {
        if !(leaf.disc > 0.0 && leaf.disc >= sigma) {
            continue;
        }
        let rows = &members[leaf.id];
        let counts = table.group_counts(rows.iter().copied());
        let (action, p) = if leaf.majority_positive {
            (Action::Promote, promote_count(&counts))
        } else {
            (Action::Demote, demote_count(&counts))
        };
        let candidates: Vec<usize> = rows
            .iter()
            .copied()
            .filter(|&r| match action {
                Action::Promote => !table.is_favored(r) && !table.is_positive(r),
                Action::Demote => table.is_favored(r) && table.is_positive(r),
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(leaf.id as u64);
        let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, candidates.len(), p as usize)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        picked.sort_unstable();
        actions.push(LeafAction { leaf: leaf.id, action, disc: leaf.disc, counts, p, rows: picked });
    }
    Ok(RelabelPlan {
        format: PLAN_FORMAT.to_string(),
        version: PLAN_VERSION,
        sigma,
        seed,
        rng: RNG_NAME.to_string(),
        tree_digest: tree.digest(),
        table_digest: table.digest(),
        actions,
    })
}

impl RelabelPlan {
    pub fn promote_rows(&self) -> Vec<usize> {
        self.rows_of(Action::Promote)
    }

    pub fn demote_rows(&self) -> Vec<usize> {
        self.rows_of(Action::Demote)
    }

    fn rows_of(&self, action: Action) -> Vec<usize> {
        let mut rows: Vec<usize> = self
            .actions
            .iter()
            .filter(|a| a.action == action)
            .flat_map(|a| a.rows.iter().copied())
            .collect();
        rows.sort_unstable();
        rows
    }

    pub fn leaf_ids(&self) -> Vec<usize> {
        self.actions.iter().map(|a| a.leaf).collect()
    }

    pub fn relabeled_count(&self) -> usize {
        self.actions.iter().map(|a| a.rows.len()).sum()
    }

    pub fn to_document(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plan serializes");
        s.push('\n');
        s
    }

    pub fn digest(&self) -> String {
        hex(&Sha256::digest(self.to_document().as_bytes()))
    }

    pub fn from_document(text: &str) -> Result<Self, RelabelError> {
        let plan: RelabelPlan = serde_json::from_str(text).map_err(|e| RelabelError::Document(e.to_string()))?;
        if plan.format != PLAN_FORMAT || plan.version != PLAN_VERSION {
            return Err(RelabelError::Document(format!(
                "unsupported format `{}` version {}",
                plan.format, plan.version
            )));
        }
        check_sigma(plan.sigma)?;
        for a in &plan.actions {
            if a.rows.len() as u64 != a.p {
                return Err(RelabelError::Document(format!(
                    "leaf {}: {} rows listed for p = {}",
                    a.leaf,
                    a.rows.len(),
                    a.p
                )));
            }
        }
        Ok(plan)
    }

    /// Flips the selected labels. Refuses a table other than the one the
    /// plan was built from, and any row that is not a valid candidate.
    pub fn apply(&self, table: &DataTable) -> Result<RelabeledTable, RelabelError> {
        let found = table.digest();
        if found != self.table_digest {
            return Err(RelabelError::TableMismatch { expected: self.table_digest.clone(), found });
        }
        let mut seen = vec![false; table.n_rows()];
        for a in &self.actions {
            for &r in &a.rows {
                let valid = r < table.n_rows()
                    && !std::mem::replace(&mut seen[r], true)
                    && match a.action {
                        Action::Promote => !table.is_favored(r) && !table.is_positive(r),
                        Action::Demote => table.is_favored(r) && table.is_positive(r),
                    };
                if !valid {
                    return Err(RelabelError::Document(format!(
                        "leaf {}: row {r} is not a candidate for {:?}",
                        a.leaf, a.action
                    )));
                }
            }
        }
        let out = table
            .with_labels_set(&self.promote_rows(), true)
            .with_labels_set(&self.demote_rows(), false);
        Ok(RelabeledTable {
            table: out,
            provenance: Provenance { source_digest: found, plan_digest: self.digest(), seed: self.seed },
        })
    }
}
