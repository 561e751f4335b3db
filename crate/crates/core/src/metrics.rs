//! Group fairness and predictive performance metrics.
//!
//! Group differences are signed favored minus deprived. Rates with a zero
//! denominator are errors rather than zeros.

use serde::{Deserialize, Serialize};

use crate::error::MetricError;

pub const SIGN_CONVENTION: &str = "favored_minus_deprived";

fn check_lengths(a: usize, b: usize, what: &str) -> Result<(), MetricError> {
    if a == b {
        Ok(())
    } else {
        Err(MetricError::Length(format!("{what}: {a} vs {b}")))
    }
}

fn rate(num: u64, den: u64, what: impl FnOnce() -> String) -> Result<f64, MetricError> {
    if den == 0 {
        Err(MetricError::Undefined(what()))
    } else {
        Ok(num as f64 / den as f64)
    }
}

/// `P(Ŷ=+ | favored) − P(Ŷ=+ | deprived)`.
pub fn demographic_parity(preds: &[bool], favored: &[bool]) -> Result<f64, MetricError> {
    check_lengths(preds.len(), favored.len(), "predictions and groups")?;
    let (mut f, mut fp, mut d, mut dp) = (0u64, 0u64, 0u64, 0u64);
    for (&y, &g) in preds.iter().zip(favored) {
        if g {
            f += 1;
            fp += u64::from(y);
        } else {
            d += 1;
            dp += u64::from(y);
        }
    }
    let rf = rate(fp, f, || "favored group is empty".into())?;
    let rd = rate(dp, d, || "deprived group is empty".into())?;
    Ok(rf - rd)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl Confusion {
    pub fn from_pairs(labels: &[bool], preds: &[bool]) -> Result<Self, MetricError> {
        check_lengths(labels.len(), preds.len(), "labels and predictions")?;
        let mut c = Confusion::default();
        labels.iter().zip(preds).for_each(|(&y, &p)| c.record(y, p));
        Ok(c)
    }

    pub fn record(&mut self, label: bool, pred: bool) {
        match (label, pred) {
            (true, true) => self.tp += 1,
            (true, false) => self.fn_ += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn tpr(&self) -> Option<f64> {
        (self.tp + self.fn_ > 0).then(|| self.tp as f64 / (self.tp + self.fn_) as f64)
    }

    pub fn fpr(&self) -> Option<f64> {
        (self.fp + self.tn > 0).then(|| self.fp as f64 / (self.fp + self.tn) as f64)
    }

    pub fn tnr(&self) -> Option<f64> {
        (self.fp + self.tn > 0).then(|| self.tn as f64 / (self.fp + self.tn) as f64)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupConfusion {
    pub favored: Confusion,
    pub deprived: Confusion,
}

impl GroupConfusion {
    pub fn new(labels: &[bool], preds: &[bool], favored: &[bool]) -> Result<Self, MetricError> {
        check_lengths(labels.len(), preds.len(), "labels and predictions")?;
        check_lengths(labels.len(), favored.len(), "labels and groups")?;
        let mut gc = GroupConfusion::default();
        for i in 0..labels.len() {
            let c = if favored[i] { &mut gc.favored } else { &mut gc.deprived };
            c.record(labels[i], preds[i]);
        }
        Ok(gc)
    }

    pub fn overall(&self) -> Confusion {
        let (f, d) = (self.favored, self.deprived);
        Confusion { tp: f.tp + d.tp, fp: f.fp + d.fp, tn: f.tn + d.tn, fn_: f.fn_ + d.fn_ }
    }
}

/// `((TPR_F − TPR_D) + (FPR_F − FPR_D)) / 2`.
pub fn average_odds_difference(gc: &GroupConfusion) -> Result<f64, MetricError> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| MetricError::Undefined(what.to_string()));
    let tpr_f = need(gc.favored.tpr(), "TPR of favored group (no positive labels)")?;
    let tpr_d = need(gc.deprived.tpr(), "TPR of deprived group (no positive labels)")?;
    let fpr_f = need(gc.favored.fpr(), "FPR of favored group (no negative labels)")?;
    let fpr_d = need(gc.deprived.fpr(), "FPR of deprived group (no negative labels)")?;
    Ok(((tpr_f - tpr_d) + (fpr_f - fpr_d)) / 2.0)
}

/// `(TPR + TNR) / 2` over all rows.
pub fn balanced_accuracy(labels: &[bool], preds: &[bool]) -> Result<f64, MetricError> {
    balanced_from(&Confusion::from_pairs(labels, preds)?)
}

fn balanced_from(c: &Confusion) -> Result<f64, MetricError> {
    let tpr = c.tpr().ok_or_else(|| MetricError::Undefined("no positive labels".into()))?;
    let tnr = c.tnr().ok_or_else(|| MetricError::Undefined("no negative labels".into()))?;
    Ok((tpr + tnr) / 2.0)
}

pub fn accuracy(labels: &[bool], preds: &[bool]) -> Result<f64, MetricError> {
    check_lengths(labels.len(), preds.len(), "labels and predictions")?;
    let hits = labels.iter().zip(preds).filter(|(a, b)| a == b).count();
    rate(hits as u64, labels.len() as u64, || "no rows".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub dp: f64,
    pub aod: f64,
    pub ba: f64,
    pub acc: f64,
    pub confusion: GroupConfusion,
    pub sign_convention: String,
}

impl FairnessReport {
    pub const CSV_HEADER: &'static str = "dp,aod,ba,acc";

    pub fn compute(labels: &[bool], preds: &[bool], favored: &[bool]) -> Result<Self, MetricError> {
        let confusion = GroupConfusion::new(labels, preds, favored)?;
        Ok(Self {
            dp: demographic_parity(preds, favored)?,
            aod: average_odds_difference(&confusion)?,
            ba: balanced_from(&confusion.overall())?,
            acc: accuracy(labels, preds)?,
            confusion,
            sign_convention: SIGN_CONVENTION.to_string(),
        })
    }

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{}", self.dp, self.aod, self.ba, self.acc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Rows with `score ≥ threshold` are predicted positive.
    pub threshold: f64,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocSeries {
    pub group: String,
    pub points: Vec<RocPoint>,
    /// The group lacks one of the classes, so one of the rates is undefined.
    pub single_class: bool,
}

/// ROC staircase of one set of scores: thresholds `+∞`, each distinct score
/// in descending order, then `−∞`. Consecutive thresholds that give the same
/// point are collapsed to the lowest one.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, MetricError> {
    check_lengths(scores.len(), labels.len(), "scores and labels")?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(MetricError::Undefined("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let pos = labels.iter().filter(|&&y| y).count() as u64;
    let neg = labels.len() as u64 - pos;
    let point = |threshold, tp: u64, fp: u64| RocPoint {
        threshold,
        tpr: (pos > 0).then(|| tp as f64 / pos as f64),
        fpr: (neg > 0).then(|| fp as f64 / neg as f64),
    };
    let mut points = vec![point(f64::INFINITY, 0, 0)];
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(point(s, tp, fp));
    }
    points.push(point(f64::NEG_INFINITY, pos, neg));
    let mut out: Vec<RocPoint> = Vec::with_capacity(points.len());
    for p in points {
        let n = out.len();
        match out.last_mut() {
            Some(last) if n > 1 && last.tpr == p.tpr && last.fpr == p.fpr => *last = p,
            _ => out.push(p),
        }
    }
    Ok(out)
}

/// ROC series for the favored group, the deprived group and all rows.
pub fn roc_points(
    scores: &[f64],
    labels: &[bool],
    favored: &[bool],
    favored_name: &str,
    deprived_name: &str,
) -> Result<Vec<RocSeries>, MetricError> {
    check_lengths(scores.len(), labels.len(), "scores and labels")?;
    check_lengths(scores.len(), favored.len(), "scores and groups")?;
    let pick = |keep: &dyn Fn(usize) -> bool| -> (Vec<f64>, Vec<bool>) {
        (0..scores.len()).filter(|&i| keep(i)).map(|i| (scores[i], labels[i])).unzip()
    };
    let mut out = Vec::with_capacity(3);
    for (group, keep) in [
        (favored_name, &(|i: usize| favored[i]) as &dyn Fn(usize) -> bool),
        (deprived_name, &|i: usize| !favored[i]),
        ("all", &|_| true),
    ] {
        let (s, y) = pick(keep);
        let single_class = y.iter().all(|&v| v) || y.iter().all(|&v| !v);
        out.push(RocSeries { group: group.to_string(), points: roc_curve(&s, &y)?, single_class });
    }
    Ok(out)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_threshold(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        t.to_string()
    }
}

/// `group,threshold,tpr,fpr` rows; undefined rates are left empty.
pub fn roc_csv(series: &[RocSeries]) -> String {
    let mut s = String::from("group,threshold,tpr,fpr\n");
    for g in series {
        for p in &g.points {
            s.push_str(&format!("{},{},{},{}\n", g.group, fmt_threshold(p.threshold), fmt_opt(p.tpr), fmt_opt(p.fpr)));
        }
    }
    s
}
