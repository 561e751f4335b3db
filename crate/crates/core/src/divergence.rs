//! Information-theoretic kernels for split selection.
//!
//! All divergences compare the favored group's class distribution `P^F(Y)`
//! against the deprived group's `P^D(Y)`. Logarithms are base 2. In KL mode
//! class and outcome distributions are Laplace corrected (add one per class or
//! outcome); Euclid mode works on raw frequencies.

use serde::{Deserialize, Serialize};

use crate::data::GroupCounts;
use crate::error::DivergenceError;

/// Normalizers below this make a candidate ineligible.
pub const NORMALIZER_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Measure {
    Kl,
    Euclid,
}

impl Measure {
    /// KL needs smoothing to stay finite; Euclid does not.
    pub fn uses_laplace(self) -> bool {
        matches!(self, Measure::Kl)
    }
}

/// Binary class distribution of one group.
///
/// `support` is the number of rows the estimate is based on. A group with no
/// rows and no smoothing is represented by the uniform distribution with
/// `support == 0`, which is the reference that turns the divergence gain into
/// the classical entropy / Gini gain when one group is absent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDist {
    pub p_pos: f64,
    pub p_neg: f64,
    pub laplace_applied: bool,
    pub support: u64,
}

impl ClassDist {
    pub fn from_counts(pos: u64, neg: u64, laplace: bool) -> Self {
        let n = pos + neg;
        let (p_pos, p_neg) = if laplace {
            let d = (n + 2) as f64;
            ((pos + 1) as f64 / d, (neg + 1) as f64 / d)
        } else if n == 0 {
            (0.5, 0.5)
        } else {
            (pos as f64 / n as f64, neg as f64 / n as f64)
        };
        Self { p_pos, p_neg, laplace_applied: laplace, support: n }
    }

    pub fn new(p_pos: f64) -> Self {
        Self { p_pos, p_neg: 1.0 - p_pos, laplace_applied: false, support: 0 }
    }

    pub fn is_degenerate(&self) -> bool {
        self.support == 0 && !self.laplace_applied
    }

    fn probs(&self) -> [f64; 2] {
        [self.p_pos, self.p_neg]
    }
}

/// `Σ p_i log2(p_i / q_i)`.
pub fn kl(p: &ClassDist, q: &ClassDist) -> Result<f64, DivergenceError> {
    kl_terms(&p.probs(), &q.probs())
}

fn kl_terms(p: &[f64], q: &[f64]) -> Result<f64, DivergenceError> {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(DivergenceError::ZeroReference { p: pi });
            }
            total += pi * (pi / qi).log2();
        }
    }
    Ok(total)
}

/// `Σ (p_i − q_i)²`.
pub fn sq_euclid(p: &ClassDist, q: &ClassDist) -> f64 {
    sq_euclid_terms(&p.probs(), &q.probs())
}

fn sq_euclid_terms(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Favored and deprived class distributions at a node.
pub fn class_dists(counts: &GroupCounts, laplace: bool) -> (ClassDist, ClassDist) {
    (
        ClassDist::from_counts(counts.fav_pos, counts.fav_neg, laplace),
        ClassDist::from_counts(counts.dep_pos, counts.dep_neg, laplace),
    )
}

/// Divergence between the favored and deprived class distributions.
pub fn divergence(counts: &GroupCounts, measure: Measure, laplace: bool) -> Result<f64, DivergenceError> {
    let (f, d) = class_dists(counts, laplace);
    match measure {
        Measure::Kl => kl(&f, &d),
        Measure::Euclid => Ok(sq_euclid(&f, &d)),
    }
}

/// Divergence after a split: each outcome's divergence weighted by its share
/// of the rows (both groups combined).
pub fn conditional_divergence(
    children: &[GroupCounts],
    measure: Measure,
    laplace: bool,
) -> Result<f64, DivergenceError> {
    let n: u64 = children.iter().map(GroupCounts::total).sum();
    if n == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for child in children.iter().filter(|c| !c.is_empty()) {
        total += child.total() as f64 / n as f64 * divergence(child, measure, laplace)?;
    }
    Ok(total)
}

/// Increase in divergence produced by splitting `parent` into `children`.
/// Negative when the split makes the groups look more alike.
pub fn divergence_gain(
    parent: &GroupCounts,
    children: &[GroupCounts],
    measure: Measure,
    laplace: bool,
) -> Result<f64, DivergenceError> {
    Ok(conditional_divergence(children, measure, laplace)? - divergence(parent, measure, laplace)?)
}

/// Binary or multi-valued entropy in bits.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.log2()).sum::<f64>()
}

/// Gini impurity `1 − Σ p_i²`.
pub fn gini(probs: &[f64]) -> f64 {
    1.0 - probs.iter().map(|p| p * p).sum::<f64>()
}

/// Per-outcome distribution of one group's rows. With `laplace`, add one per
/// outcome; an empty group without smoothing yields all zeros.
fn outcome_dist(counts: impl Iterator<Item = u64>, laplace: bool) -> Vec<f64> {
    let counts: Vec<u64> = counts.collect();
    let k = counts.len() as u64;
    let n: u64 = counts.iter().sum();
    if laplace {
        let d = (n + k) as f64;
        counts.iter().map(|&c| (c + 1) as f64 / d).collect()
    } else if n == 0 {
        vec![0.0; counts.len()]
    } else {
        counts.iter().map(|&c| c as f64 / n as f64).collect()
    }
}

fn group_shares(parent: &GroupCounts) -> Option<(f64, f64)> {
    let n = parent.total();
    (n > 0).then(|| (parent.favored() as f64 / n as f64, parent.deprived() as f64 / n as f64))
}

/// Split normalizer for the KL gain: the group-balance entropy times the KL
/// divergence between the groups' outcome distributions, plus each group's
/// split information weighted by its share of the rows. Outcome
/// distributions are Laplace corrected.
pub fn kl_normalizer(parent: &GroupCounts, children: &[GroupCounts]) -> f64 {
    let Some((wf, wd)) = group_shares(parent) else {
        return 0.0;
    };
    let pf = outcome_dist(children.iter().map(GroupCounts::favored), true);
    let pd = outcome_dist(children.iter().map(GroupCounts::deprived), true);
    let balance = entropy(&[wf, wd]);
    let imbalance = if balance > 0.0 {
        kl_terms(&pf, &pd).expect("Laplace-corrected outcome distributions are positive")
    } else {
        0.0
    };
    balance * imbalance + (wf * entropy(&pf) + wd * entropy(&pd))
}

/// Split normalizer for the Euclidean gain: the KL normalizer's structure
/// with Gini impurity in place of entropy and raw frequencies throughout.
pub fn e_normalizer(parent: &GroupCounts, children: &[GroupCounts]) -> f64 {
    let Some((wf, wd)) = group_shares(parent) else {
        return 0.0;
    };
    let pf = outcome_dist(children.iter().map(GroupCounts::favored), false);
    let pd = outcome_dist(children.iter().map(GroupCounts::deprived), false);
    let balance = gini(&[wf, wd]);
    let imbalance = if balance > 0.0 { sq_euclid_terms(&pf, &pd) } else { 0.0 };
    let split_f = if parent.favored() > 0 { gini(&pf) } else { 0.0 };
    let split_d = if parent.deprived() > 0 { gini(&pd) } else { 0.0 };
    // Grouped so that exchanging the two groups gives a bit-identical value.
    balance * imbalance + (wf * split_f + wd * split_d)
}

/// `raw_gain / normalizer`, or `-∞` when the normalizer is below
/// [`NORMALIZER_EPS`].
pub fn gain_ratio(raw_gain: f64, normalizer: f64) -> f64 {
    if normalizer < NORMALIZER_EPS {
        f64::NEG_INFINITY
    } else {
        raw_gain / normalizer
    }
}

/// Classical entropy gain (KL mode) or Gini gain (Euclid mode) over the
/// class labels of the only non-empty group.
pub fn fallback_gain(
    parent: &GroupCounts,
    children: &[GroupCounts],
    measure: Measure,
) -> Result<f64, DivergenceError> {
    let (nf, nd) = (parent.favored(), parent.deprived());
    if (nf == 0) == (nd == 0) {
        return Err(DivergenceError::FallbackPrecondition { favored: nf, deprived: nd });
    }
    let tally = |c: &GroupCounts| if nf > 0 { (c.fav_pos, c.fav_neg) } else { (c.dep_pos, c.dep_neg) };
    let impurity = |(pos, neg): (u64, u64)| {
        let n = (pos + neg) as f64;
        let probs = [pos as f64 / n, neg as f64 / n];
        match measure {
            Measure::Kl => entropy(&probs),
            Measure::Euclid => gini(&probs),
        }
    };
    let n = nf.max(nd) as f64;
    let mut after = 0.0;
    for child in children {
        let t = tally(child);
        if t.0 + t.1 > 0 {
            after += (t.0 + t.1) as f64 / n * impurity(t);
        }
    }
    Ok(impurity(tally(parent)) - after)
}
