//! Discrimination metrics for right-censored outcomes: Uno's IPCW
//! C-statistic and the time-integrated incident/dynamic AUC.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-continuous Kaplan-Meier step function.
#[derive(Debug, Clone, PartialEq)]
pub struct KmCurve {
    /// Distinct times with at least one event, ascending.
    pub times: Vec<f64>,
    /// Survival just after each time in `times`.
    pub surv: Vec<f64>,
}

impl KmCurve {
    /// `S(t)`.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            k => self.surv[k - 1],
        }
    }

    /// `S(t-)`.
    pub fn left(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s < t) {
            0 => 1.0,
            k => self.surv[k - 1],
        }
    }
}

/// Kaplan-Meier estimate of the distribution of times flagged by `event`.
pub fn kaplan_meier(time: &[f64], event: &[bool]) -> KmCurve {
    let mut idx: Vec<usize> = (0..time.len()).collect();
    idx.sort_by(|&a, &b| time[a].total_cmp(&time[b]));
    let mut at_risk = time.len() as f64;
    let mut s = 1.0;
    let mut times = Vec::new();
    let mut surv = Vec::new();
    let mut k = 0;
    while k < idx.len() {
        let t = time[idx[k]];
        let mut d = 0.0;
        let mut m = 0.0;
        while k < idx.len() && time[idx[k]] == t {
            if event[idx[k]] {
                d += 1.0;
            }
            m += 1.0;
            k += 1;
        }
        if d > 0.0 {
            s *= 1.0 - d / at_risk;
            times.push(t);
            surv.push(s);
        }
        at_risk -= m;
    }
    KmCurve { times, surv }
}

/// Kaplan-Meier estimate of the censoring survivor function `G`.
pub fn km_censoring(time: &[f64], status: &[bool]) -> KmCurve {
    let flipped: Vec<bool> = status.iter().map(|s| !s).collect();
    kaplan_meier(time, &flipped)
}

/// Sample quantile with linear interpolation between order statistics
/// (the default definition in R and NumPy).
pub fn quantile(values: &[f64], prob: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * prob.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Default truncation point of the C-statistic: the 70th percentile of the
/// observed times.
pub fn default_c_horizon(time: &[f64]) -> f64 {
    quantile(time, 0.7)
}

/// Default upper limit of the AUC integral: 90% of the largest observed time.
pub fn default_auc_horizon(time: &[f64]) -> f64 {
    0.9 * time.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn check(time: &[f64], status: &[bool], risk: &[f64]) -> Result<()> {
    if time.len() != status.len() || time.len() != risk.len() {
        return Err(Error::DimensionMismatch(format!(
            "time {} / status {} / risk {}",
            time.len(),
            status.len(),
            risk.len()
        )));
    }
    if time.iter().chain(risk).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("metric input"));
    }
    Ok(())
}

/// Uno's C-statistic truncated at `horizon` (default: 70th percentile of
/// the times). Pairs `(i, j)` with `T_i < T_j`, `T_i < horizon` and an
/// event at `T_i` are weighted by `G(T_i-)^-2`; ties in risk count zero.
pub fn c_statistic(time: &[f64], status: &[bool], risk: &[f64], horizon: Option<f64>) -> Result<f64> {
    check(time, status, risk)?;
    let tau = horizon.unwrap_or_else(|| default_c_horizon(time));
    let g = km_censoring(time, status);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..time.len() {
        if !status[i] || !(time[i] < tau) {
            continue;
        }
        let gi = g.left(time[i]);
        if !(gi > 0.0) {
            continue;
        }
        let w = 1.0 / (gi * gi);
        for j in 0..time.len() {
            if time[i] < time[j] {
                den += w;
                if risk[i] > risk[j] {
                    num += w;
                }
            }
        }
    }
    if !(den > 0.0) {
        return Err(Error::NoComparablePairs);
    }
    Ok(num / den)
}

/// Incident/dynamic AUC at `t`: cases fail at `t`, controls survive past
/// `t`. Returns `None` when either group is empty.
pub fn auc_at(time: &[f64], status: &[bool], risk: &[f64], t: f64) -> Option<f64> {
    let cases: Vec<f64> = (0..time.len()).filter(|&i| status[i] && time[i] == t).map(|i| risk[i]).collect();
    let controls: Vec<f64> = (0..time.len()).filter(|&i| time[i] > t).map(|i| risk[i]).collect();
    if cases.is_empty() || controls.is_empty() {
        return None;
    }
    let mut s = 0.0;
    for c in &cases {
        for d in &controls {
            if c > d {
                s += 1.0;
            } else if c == d {
                s += 0.5;
            }
        }
    }
    Some(s / (cases.len() * controls.len()) as f64)
}

/// Incident/dynamic AUC integrated over event times up to `horizon`
/// (default: 0.9 times the largest time). Each event time gets the mass
/// `S(t-)^2 - S(t)^2` of the Kaplan-Meier estimate, renormalized over the
/// event times that have controls.
pub fn auc_integrated(time: &[f64], status: &[bool], risk: &[f64], horizon: Option<f64>) -> Result<f64> {
    check(time, status, risk)?;
    let tau = horizon.unwrap_or_else(|| default_auc_horizon(time));
    let events_before = (0..time.len()).filter(|&i| status[i] && time[i] <= tau).count();
    if events_before < 2 {
        return Err(Error::InsufficientEvents);
    }
    let km = kaplan_meier(time, status);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut prev = 1.0;
    for (&t, &s) in km.times.iter().zip(&km.surv) {
        let w = prev * prev - s * s;
        prev = s;
        if t > tau {
            break;
        }
        if let Some(a) = auc_at(time, status, risk, t) {
            num += w * a;
            den += w;
        }
    }
    if !(den > 0.0) {
        return Err(Error::NoComparablePairs);
    }
    Ok(num / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub c_statistic: f64,
    pub c_horizon: f64,
    pub auc: f64,
    pub auc_horizon: f64,
    pub cvpl: Option<f64>,
    pub n: usize,
    pub n_events: usize,
    /// Comparable pairs entering the C-statistic denominator.
    pub usable_pairs: usize,
}

/// Number of pairs with an event at `T_i < horizon` and `T_i < T_j`.
pub fn comparable_pairs(time: &[f64], status: &[bool], horizon: f64) -> usize {
    let mut count = 0;
    for i in 0..time.len() {
        if status[i] && time[i] < horizon {
            count += time.iter().filter(|&&tj| time[i] < tj).count();
        }
    }
    count
}

/// Both metrics at their default (or supplied) horizons.
pub fn evaluate(
    time: &[f64],
    status: &[bool],
    risk: &[f64],
    c_horizon: Option<f64>,
    auc_horizon: Option<f64>,
) -> Result<EvalReport> {
    let c_h = c_horizon.unwrap_or_else(|| default_c_horizon(time));
    let a_h = auc_horizon.unwrap_or_else(|| default_auc_horizon(time));
    Ok(EvalReport {
        c_statistic: c_statistic(time, status, risk, Some(c_h))?,
        c_horizon: c_h,
        auc: auc_integrated(time, status, risk, Some(a_h))?,
        auc_horizon: a_h,
        cvpl: None,
        n: time.len(),
        n_events: status.iter().filter(|s| **s).count(),
        usable_pairs: comparable_pairs(time, status, c_h),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn km_hand_values() {
        // times 1,2,3,4 with the second censored
        let km = kaplan_meier(&[1.0, 2.0, 3.0, 4.0], &[true, false, true, true]);
        assert_eq!(km.times, vec![1.0, 3.0, 4.0]);
        assert!((km.at(1.0) - 0.75).abs() < 1e-15);
        assert!((km.at(3.0) - 0.375).abs() < 1e-15);
        assert_eq!(km.left(1.0), 1.0);
        assert!((km.left(3.5) - 0.375).abs() < 1e-15);
        assert_eq!(km.at(4.0), 0.0);
    }

    #[test]
    fn censoring_km_flips_status() {
        let g = km_censoring(&[1.0, 2.0, 3.0], &[true, false, true]);
        assert_eq!(g.times, vec![2.0]);
        assert!((g.at(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quantile_type7() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), 2.5);
        assert!((quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.7) - 3.8).abs() < 1e-12);
    }

    #[test]
    fn hand_auc_with_one_swap() {
        // scores (1,5,4,3,2) on times 1..5: per-time fractions 0, 1, 1, 1
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        let s = [true; 5];
        let r = [1.0, 5.0, 4.0, 3.0, 2.0];
        // S drops by 1/5 at each time: weights (1 - 16/25), (16/25 - 9/25), ...
        let w = [9.0 / 25.0, 7.0 / 25.0, 5.0 / 25.0, 3.0 / 25.0];
        let expect = (w[1] + w[2] + w[3]) / w.iter().sum::<f64>();
        assert!((auc_integrated(&t, &s, &r, Some(10.0)).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn perfect_and_reversed_scores() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let s = [true; 6];
        let r: Vec<f64> = t.iter().map(|v| -v).collect();
        assert_eq!(c_statistic(&t, &s, &r, Some(10.0)).unwrap(), 1.0);
        assert_eq!(auc_integrated(&t, &s, &r, Some(10.0)).unwrap(), 1.0);
        let rev: Vec<f64> = t.to_vec();
        assert_eq!(c_statistic(&t, &s, &rev, Some(10.0)).unwrap(), 0.0);
        assert_eq!(auc_integrated(&t, &s, &rev, Some(10.0)).unwrap(), 0.0);
    }

    #[test]
    fn tied_scores_count_zero_in_c_half_in_auc() {
        let t = [1.0, 2.0, 3.0];
        let s = [true; 3];
        let r = [0.0; 3];
        assert_eq!(c_statistic(&t, &s, &r, Some(10.0)).unwrap(), 0.0);
        assert_eq!(auc_integrated(&t, &s, &r, Some(10.0)).unwrap(), 0.5);
    }

    #[test]
    fn no_events_has_no_pairs() {
        let t = [1.0, 2.0];
        let s = [false, false];
        assert!(matches!(c_statistic(&t, &s, &[0.0, 1.0], None), Err(Error::NoComparablePairs)));
        assert!(matches!(auc_integrated(&t, &s, &[0.0, 1.0], None), Err(Error::InsufficientEvents)));
    }
}
