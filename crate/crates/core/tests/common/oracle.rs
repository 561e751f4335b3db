//! Direct row-level evaluation of the split criteria, written independently
//! of the library: probabilities are counted from rows each time they are
//! needed and every sum is spelled out term by term.

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Row {
    pub x: Vec<u8>,
    pub favored: bool,
    pub positive: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub gain: f64,
    pub normalizer: f64,
    pub ratio: f64,
}

fn log2(x: f64) -> f64 {
    x.ln() / std::f64::consts::LN_2
}

fn count(rows: &[&Row], pred: impl Fn(&Row) -> bool) -> f64 {
    rows.iter().filter(|r| pred(r)).count() as f64
}

/// P(y | group) over `rows`: add-one smoothed when `kl`, raw otherwise, and
/// 1/2 for an empty group without smoothing.
fn p_class(rows: &[&Row], favored: bool, positive: bool, kl: bool) -> f64 {
    let n = count(rows, |r| r.favored == favored);
    let c = count(rows, |r| r.favored == favored && r.positive == positive);
    if kl {
        (c + 1.0) / (n + 2.0)
    } else if n == 0.0 {
        0.5
    } else {
        c / n
    }
}

/// D(P^F(Y) : P^D(Y)) over `rows`.
fn div(rows: &[&Row], kl: bool) -> f64 {
    let mut total = 0.0;
    for y in [true, false] {
        let f = p_class(rows, true, y, kl);
        let d = p_class(rows, false, y, kl);
        total += if kl { f * log2(f / d) } else { (f - d) * (f - d) };
    }
    total
}

fn impurity(rows: &[&Row], kl: bool) -> f64 {
    let n = rows.len() as f64;
    let mut h = if kl { 0.0 } else { 1.0 };
    for y in [true, false] {
        let p = count(rows, |r| r.positive == y) / n;
        if kl {
            if p > 0.0 {
                h -= p * log2(p);
            }
        } else {
            h -= p * p;
        }
    }
    h
}

fn outcomes(rows: &[&Row], attr: usize) -> Vec<u8> {
    let mut v: Vec<u8> = rows.iter().map(|r| r.x[attr]).collect();
    v.sort_unstable();
    v.dedup();
    v
}

pub fn score(rows: &[Row], attr: usize, kl: bool) -> Score {
    let all: Vec<&Row> = rows.iter().collect();
    let n = all.len() as f64;
    let nf = count(&all, |r| r.favored);
    let nd = n - nf;
    let values = outcomes(&all, attr);
    let part = |v: u8| -> Vec<&Row> { all.iter().copied().filter(|r| r.x[attr] == v).collect() };

    let gain = if nf > 0.0 && nd > 0.0 {
        let mut after = 0.0;
        for &v in &values {
            let sub = part(v);
            after += sub.len() as f64 / n * div(&sub, kl);
        }
        after - div(&all, kl)
    } else {
        let mut after = 0.0;
        for &v in &values {
            let sub = part(v);
            after += sub.len() as f64 / n * impurity(&sub, kl);
        }
        impurity(&all, kl) - after
    };

    let k = values.len() as f64;
    let share = |fav: bool, v: u8| -> f64 {
        let group = if fav { nf } else { nd };
        let c = count(&all, |r| r.favored == fav && r.x[attr] == v);
        if kl {
            (c + 1.0) / (group + k)
        } else if group == 0.0 {
            0.0
        } else {
            c / group
        }
    };
    let (wf, wd) = (nf / n, nd / n);
    let normalizer = if kl {
        let mut balance = 0.0;
        for w in [wf, wd] {
            if w > 0.0 {
                balance -= w * log2(w);
            }
        }
        let (mut cross, mut hf, mut hd) = (0.0, 0.0, 0.0);
        for &v in &values {
            let (pf, pd) = (share(true, v), share(false, v));
            cross += pf * log2(pf / pd);
            hf -= pf * log2(pf);
            hd -= pd * log2(pd);
        }
        balance * cross + wf * hf + wd * hd
    } else {
        let balance = 1.0 - wf * wf - wd * wd;
        let (mut cross, mut gf, mut gd) = (0.0, 1.0, 1.0);
        for &v in &values {
            let (pf, pd) = (share(true, v), share(false, v));
            cross += (pf - pd) * (pf - pd);
            gf -= pf * pf;
            gd -= pd * pd;
        }
        balance * cross + wf * gf + wd * gd
    };
    let ratio = if normalizer < 1e-9 { f64::NEG_INFINITY } else { gain / normalizer };
    Score { gain, normalizer, ratio }
}

/// Brute-force root choice: the eligible attribute (gain at least the mean
/// gain, with 1e-12 slack) with the largest ratio above 1e-12; ties within
/// 1e-12 go to the earliest attribute. Also reports whether any of these
/// comparisons lands near its 1e-12 tolerance, where rounding differences
/// between two correct implementations could flip the outcome.
pub fn choose(rows: &[Row], n_attrs: usize, kl: bool) -> (Option<usize>, bool) {
    const EPS: f64 = 1e-12;
    // Distance to a decision boundary small enough for rounding to matter.
    let near = |d: f64| d.abs() < 1e-14;
    let scores: Vec<Score> = (0..n_attrs).map(|a| score(rows, a, kl)).collect();
    let mean = scores.iter().map(|s| s.gain).sum::<f64>() / n_attrs as f64;
    let slack = EPS * mean.abs().max(1.0);
    let mut fragile = false;
    let mut best: Option<(usize, f64)> = None;
    for (a, s) in scores.iter().enumerate() {
        fragile |= near(s.gain - mean + slack) || (s.ratio.is_finite() && near(s.ratio - EPS));
        if s.gain < mean - slack || s.ratio.is_nan() || s.ratio <= EPS || !s.ratio.is_finite() {
            continue;
        }
        match best {
            Some((_, r)) => {
                fragile |= near(s.ratio - r - EPS);
                if s.ratio > r + EPS {
                    best = Some((a, s.ratio));
                }
            }
            None => best = Some((a, s.ratio)),
        }
    }
    (best.map(|(a, _)| a), fragile)
}
