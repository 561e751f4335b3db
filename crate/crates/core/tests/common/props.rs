//! Checks behind the divergence properties, shared by the property suite and
//! the acceptance run. Each returns `Err` with a description on violation.

use fairtree::divergence::{
    conditional_divergence, divergence_gain, fallback_gain, Measure,
};
use fairtree::GroupCounts;
use proptest::prelude::*;

fn sum(children: &[GroupCounts]) -> GroupCounts {
    children.iter().copied().sum()
}

fn entropy_bits(pos: u64, neg: u64) -> f64 {
    let n = (pos + neg) as f64;
    [pos, neg]
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn gini_of(pos: u64, neg: u64) -> f64 {
    let n = (pos + neg) as f64;
    let (p, q) = (pos as f64 / n, neg as f64 / n);
    1.0 - p * p - q * q
}

/// Classical impurity gain over (pos, neg) tallies of one group.
fn impurity_gain(children: &[(u64, u64)], f: fn(u64, u64) -> f64) -> f64 {
    let (pos, neg) = children.iter().fold((0, 0), |a, c| (a.0 + c.0, a.1 + c.1));
    let n = (pos + neg) as f64;
    let after: f64 = children
        .iter()
        .filter(|c| c.0 + c.1 > 0)
        .map(|&(p, q)| (p + q) as f64 / n * f(p, q))
        .sum();
    f(pos, neg) - after
}

/// Children whose favored and deprived class distributions are equal within
/// every child and at the parent: child `a` holds `(α·p_a, α·q_a)` favored and
/// `(β·p_a, β·q_a)` deprived rows.
pub fn identical_children() -> impl Strategy<Value = Vec<GroupCounts>> {
    (1u64..4, 1u64..4, prop::collection::vec((0u64..6, 0u64..6), 2..5)).prop_filter_map(
        "non-empty children",
        |(alpha, beta, shapes)| {
            let children: Vec<GroupCounts> = shapes
                .into_iter()
                .filter(|(p, q)| p + q > 0)
                .map(|(p, q)| GroupCounts::new(alpha * p, alpha * q, beta * p, beta * q))
                .collect();
            (children.len() >= 2).then_some(children)
        },
    )
}

/// Children in which both class distributions match the parent's:
/// child `a` holds `α_a·(p, q)` favored and `β_a·(r, s)` deprived rows.
pub fn independent_children() -> impl Strategy<Value = Vec<GroupCounts>> {
    ((1u64..6, 1u64..6), (1u64..6, 1u64..6), prop::collection::vec((1u64..4, 1u64..4), 2..5)).prop_map(
        |((p, q), (r, s), scales)| {
            scales
                .into_iter()
                .map(|(a, b)| GroupCounts::new(a * p, a * q, b * r, b * s))
                .collect()
        },
    )
}

pub fn any_children() -> impl Strategy<Value = Vec<GroupCounts>> {
    prop::collection::vec((0u64..8, 0u64..8, 0u64..8, 0u64..8), 2..5).prop_filter_map(
        "non-empty children",
        |cells| {
            let children: Vec<GroupCounts> = cells
                .into_iter()
                .map(|(a, b, c, d)| GroupCounts::new(a, b, c, d))
                .filter(|c| !c.is_empty())
                .collect();
            (children.len() >= 2).then_some(children)
        },
    )
}

/// One group only: tallies `(pos, neg)` per child.
pub fn single_group_children() -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((0u64..10, 0u64..10), 2..6).prop_filter_map("non-empty children", |c| {
        let c: Vec<(u64, u64)> = c.into_iter().filter(|(p, q)| p + q > 0).collect();
        (c.len() >= 2).then_some(c)
    })
}

/// Identical group distributions everywhere give zero gain, which is the
/// smallest conditional divergence possible.
pub fn prop_identical_zero_gain(children: &[GroupCounts]) -> Result<(), String> {
    let parent = sum(children);
    for measure in [Measure::Kl, Measure::Euclid] {
        let g = divergence_gain(&parent, children, measure, false).map_err(|e| e.to_string())?;
        if g.abs() > 1e-12 {
            return Err(format!("{measure:?}: gain {g} for identical distributions {children:?}"));
        }
        let c = conditional_divergence(children, measure, false).map_err(|e| e.to_string())?;
        if c.abs() > 1e-12 {
            return Err(format!("{measure:?}: conditional divergence {c} for {children:?}"));
        }
    }
    Ok(())
}

/// A child with both groups present and different raw class distributions
/// makes the conditional divergence strictly positive.
pub fn prop_unequal_positive(children: &[GroupCounts]) -> Result<(), String> {
    let differs = children.iter().any(|c| {
        c.has_both_groups() && c.fav_pos * c.deprived() != c.dep_pos * c.favored()
    });
    if !differs {
        return Ok(());
    }
    let e = conditional_divergence(children, Measure::Euclid, false).map_err(|e| e.to_string())?;
    if e.is_nan() || e <= 0.0 {
        return Err(format!("Euclid conditional divergence {e} for {children:?}"));
    }
    if children.iter().all(|c| c.dep_pos > 0 && c.dep_neg > 0) {
        let k = conditional_divergence(children, Measure::Kl, false).map_err(|e| e.to_string())?;
        if k.is_nan() || k <= 0.0 {
            return Err(format!("KL conditional divergence {k} for {children:?}"));
        }
    }
    Ok(())
}

/// A test independent of the class in both groups has zero gain.
pub fn prop_independent_zero_gain(children: &[GroupCounts]) -> Result<(), String> {
    let parent = sum(children);
    for measure in [Measure::Kl, Measure::Euclid] {
        let g = divergence_gain(&parent, children, measure, false).map_err(|e| e.to_string())?;
        if g.abs() > 1e-9 {
            return Err(format!("{measure:?}: gain {g} for independent split {children:?}"));
        }
    }
    Ok(())
}

/// Without deprived rows the KL gain is the entropy gain of the favored
/// labels, both through the fallback and through the divergence itself.
pub fn prop_kl_entropy(children: &[(u64, u64)]) -> Result<(), String> {
    let expected = impurity_gain(children, entropy_bits);
    let counts: Vec<GroupCounts> = children.iter().map(|&(p, q)| GroupCounts::new(p, q, 0, 0)).collect();
    let parent = sum(&counts);
    let fb = fallback_gain(&parent, &counts, Measure::Kl).map_err(|e| e.to_string())?;
    let direct = divergence_gain(&parent, &counts, Measure::Kl, false).map_err(|e| e.to_string())?;
    for (what, v) in [("fallback", fb), ("divergence", direct)] {
        if (v - expected).abs() > 1e-10 {
            return Err(format!("{what} KL gain {v} vs entropy gain {expected} for {children:?}"));
        }
    }
    Ok(())
}

/// With either group missing the Euclidean gain is the Gini gain.
pub fn prop_euclid_gini(children: &[(u64, u64)]) -> Result<(), String> {
    let expected = impurity_gain(children, gini_of);
    for favored_only in [true, false] {
        let counts: Vec<GroupCounts> = children
            .iter()
            .map(|&(p, q)| if favored_only { GroupCounts::new(p, q, 0, 0) } else { GroupCounts::new(0, 0, p, q) })
            .collect();
        let parent = sum(&counts);
        let fb = fallback_gain(&parent, &counts, Measure::Euclid).map_err(|e| e.to_string())?;
        let direct = divergence_gain(&parent, &counts, Measure::Euclid, false).map_err(|e| e.to_string())?;
        for (what, v) in [("fallback", fb), ("divergence", direct)] {
            if (v - expected).abs() > 1e-10 {
                return Err(format!(
                    "{what} Euclid gain {v} vs Gini gain {expected} (favored only: {favored_only}) for {children:?}"
                ));
            }
        }
    }
    Ok(())
}
