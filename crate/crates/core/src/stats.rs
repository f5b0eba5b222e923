//! Monitors over critical events and snapshots.
//!
//! Verdicts separate hard invariants (violated means a bug) from asymptotic
//! bands, which may be missed at small scale and are reported, not enforced.

use serde::Serialize;

use crate::box_store::{BoxClass, BoxStore};
use crate::engine::{CriticalEvent, RunSummary, StatSnapshot};
use crate::error::{Error, Result};
use crate::appendix::survival_prediction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonitorConfig {
    /// Slack below `1 - 1/gamma` tolerated by the LRP monitor.
    pub delta: f64,
    /// Slack used by the normal-area and endpoint-area monitors.
    pub eps: f64,
}

impl Default for MonitorConfig {
    fn default() -> Self {
        MonitorConfig { delta: 0.05, eps: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LrpReport {
    pub threshold: f64,
    pub start_t: f64,
    pub checked: usize,
    pub min_ratio: Option<f64>,
    pub violations: Vec<u64>,
    pub pass: bool,
}

/// `S_LRP/S_com > 1 - 1/gamma - delta` at every critical time after `start_t`.
pub fn monitor_lrp_ratio(events: &[CriticalEvent], gamma: f64, start_t: f64, delta: f64) -> LrpReport {
    let threshold = 1.0 - 1.0 / gamma - delta;
    let tail: Vec<&CriticalEvent> = events.iter().filter(|e| e.t as f64 > start_t).collect();
    let violations: Vec<u64> = tail.iter().filter(|e| e.ratio <= threshold).map(|e| e.t).collect();
    LrpReport {
        threshold,
        start_t,
        checked: tail.len(),
        min_ratio: tail.iter().map(|e| e.ratio).reduce(f64::min),
        pass: violations.is_empty(),
        violations,
    }
}

/// Mean LRP ratio over critical times in `(t_end/10, t_end]`.
pub fn last_decade_mean(events: &[CriticalEvent], t_end: u64) -> Option<f64> {
    let lo = t_end as f64 / 10.0;
    let v: Vec<f64> = events.iter().filter(|e| e.t as f64 > lo && e.t <= t_end).map(|e| e.ratio).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapeBoundReport {
    pub one_plus_sigma: f64,
    pub sigma_hat: f64,
    pub max_shape: Option<f64>,
    pub checked: usize,
    /// Snapshot times with a live normal box above `(1+sigma) h^gamma`.
    pub violations: Vec<u64>,
    pub creation_bound_violations: u64,
    pub pass: bool,
}

/// `w(B) <= (1+sigma) h(B)^gamma` over live normal boxes at every snapshot,
/// plus the creation-time bound `h^gamma <= w` counted by the engine.
pub fn monitor_shape_bound(snapshots: &[StatSnapshot], creation_bound_violations: u64) -> Result<ShapeBoundReport> {
    let ops = snapshots
        .iter()
        .rev()
        .find_map(|s| s.one_plus_sigma)
        .ok_or_else(|| Error::NotReady("the first stripe has not been completed".into()))?;
    let mut max_shape: Option<f64> = None;
    let mut violations = Vec::new();
    let mut checked = 0;
    for s in snapshots {
        let Some(m) = s.max_shape_norm else { continue };
        if s.one_plus_sigma.is_none() {
            continue;
        }
        checked += 1;
        max_shape = Some(max_shape.map_or(m, |x| x.max(m)));
        if m > ops {
            violations.push(s.t);
        }
    }
    Ok(ShapeBoundReport {
        one_plus_sigma: ops,
        sigma_hat: ops - 1.0,
        max_shape,
        checked,
        pass: violations.is_empty() && creation_bound_violations == 0,
        violations,
        creation_bound_violations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ep2RatioReport {
    pub reference: f64,
    /// `(t, mean h/w over live Ep2 / ln t)`.
    pub series: Vec<(u64, f64)>,
    pub last: Option<f64>,
}

/// Mean second-kind endpoint aspect ratio divided by `ln t`, for snapshots after `t_min`.
pub fn monitor_ep2_ratio(snapshots: &[StatSnapshot], gamma: f64, t_min: u64) -> Ep2RatioReport {
    let series: Vec<(u64, f64)> = snapshots
        .iter()
        .filter(|s| s.t > t_min)
        .filter_map(|s| s.ep2_mean_hw.map(|m| (s.t, m / (s.t as f64).ln())))
        .collect();
    Ep2RatioReport { reference: gamma * gamma - 1.0, last: series.last().map(|x| x.1), series }
}

/// Series values sampled at the last snapshot at or before each decade `10^k`.
pub fn decade_samples(series: &[(u64, f64)]) -> Vec<(u64, f64)> {
    log_grid_samples(series, 1)
}

/// Series values sampled at the last snapshot at or before each grid point
/// `10^(k/per_decade)`, `k >= 1`, plus the final point.
pub fn log_grid_samples(series: &[(u64, f64)], per_decade: u32) -> Vec<(u64, f64)> {
    let mut out: Vec<(u64, f64)> = Vec::new();
    let Some(&(t_last, v_last)) = series.last() else { return out };
    let step = 1.0 / per_decade.max(1) as f64;
    for k in 1.. {
        let p = 10f64.powf(k as f64 * step).round();
        if p > t_last as f64 {
            break;
        }
        let p = p as u64;
        if let Some(&x) = series.iter().rev().find(|x| x.0 <= p) {
            if out.last().is_none_or(|l| l.0 != x.0) {
                out.push(x);
            }
        }
    }
    if out.last().is_none_or(|l| l.0 != t_last) {
        out.push((t_last, v_last));
    }
    out
}

/// Whether `|v - target|` is non-increasing along `values`.
pub fn approaches_monotonically(values: &[f64], target: f64) -> bool {
    values.windows(2).all(|w| (w[1] - target).abs() <= (w[0] - target).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurvivalBin {
    pub n_lo: f64,
    pub n_hi: f64,
    pub count: u64,
    /// Count predicted by `n^(1/gamma+1)/t`, scaled to the same total.
    pub predicted: f64,
}

/// Live second-kind endpoints bucketed by creation time over `[t^(1/gamma), t]`
/// in `bins` log-spaced bins.
pub fn ep2_survival_histogram(store: &BoxStore, gamma: f64, t: u64, bins: usize) -> Vec<SurvivalBin> {
    let bins = bins.max(1);
    let tf = t as f64;
    let (lo, hi) = (tf.ln() / gamma, tf.ln());
    let edge = |k: usize| (lo + (hi - lo) * k as f64 / bins as f64).exp();
    let mut counts = vec![0u64; bins];
    for b in store.iter().filter(|b| b.class == BoxClass::Ep2) {
        let s = (b.created_at as f64).ln();
        if s < lo || s > hi {
            continue;
        }
        let k = (((s - lo) / (hi - lo)) * bins as f64) as usize;
        counts[k.min(bins - 1)] += 1;
    }
    // Integral of n^(1/gamma+1)/t over each bin.
    let p = 1.0 / gamma + 2.0;
    let mass: Vec<f64> = (0..bins)
        .map(|k| (edge(k + 1) * survival_prediction(gamma, edge(k + 1), tf) - edge(k) * survival_prediction(gamma, edge(k), tf)) / p)
        .collect();
    let total_mass: f64 = mass.iter().sum();
    let total: u64 = counts.iter().sum();
    (0..bins)
        .map(|k| SurvivalBin {
            n_lo: edge(k),
            n_hi: edge(k + 1),
            count: counts[k],
            predicted: if total_mass > 0.0 { total as f64 * mass[k] / total_mass } else { 0.0 },
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct T0K0Report {
    pub k0: Option<u64>,
    pub k0_bound: u64,
    pub k0_ok: Option<bool>,
    pub t0: Option<u64>,
    pub n0_pow_gamma: f64,
    pub t0_ratio: Option<f64>,
    /// `t0/n0^gamma` within `[1/(1+sigma), 1+eps]`.
    pub t0_in_band: Option<bool>,
}

/// `k0 >= floor(sqrt(n0)) - 1` and `t0/n0^gamma` in `[1/(1+sigma), 1+eps]`.
/// `None` fields mean the marker was not reached within the run.
pub fn check_t0_k0(summary: &RunSummary, n0: u64, gamma: f64, eps: f64) -> T0K0Report {
    let k0_bound = n0.isqrt().saturating_sub(1);
    let n0g = (gamma * (n0 as f64).ln()).exp();
    let t0_ratio = summary.t0.map(|t| t as f64 / n0g);
    let t0_in_band = match (t0_ratio, summary.one_plus_sigma) {
        (Some(r), Some(ops)) => Some(r >= 1.0 / ops && r <= 1.0 + eps),
        _ => None,
    };
    T0K0Report {
        k0: summary.k0,
        k0_bound,
        k0_ok: summary.k0.map(|k| k >= k0_bound),
        t0: summary.t0,
        n0_pow_gamma: n0g,
        t0_ratio,
        t0_in_band,
    }
}

/// Critical times after `start_t` with `S_norm/S_com >= 1/gamma + eps`.
pub fn main_inequality_violations(events: &[CriticalEvent], gamma: f64, start_t: f64, eps: f64) -> Vec<u64> {
    events
        .iter()
        .filter(|e| e.t as f64 > start_t && (e.s_norm1 + e.s_norm2) / e.s_com >= 1.0 / gamma + eps)
        .map(|e| e.t)
        .collect()
}

/// Critical times after `start_t` with `S_ep1/S_com >= eps`.
pub fn ep1_violations(events: &[CriticalEvent], start_t: f64, eps: f64) -> Vec<u64> {
    events.iter().filter(|e| e.t as f64 > start_t && e.s_ep1 / e.s_com >= eps).map(|e| e.t).collect()
}

/// `(t, S_ep2 t^(2-1/gamma) / ln t)` at every critical time; bounded along a healthy run.
pub fn ep2_decay_series(events: &[CriticalEvent], gamma: f64) -> Vec<(u64, f64)> {
    events
        .iter()
        .filter(|e| e.t > 1)
        .map(|e| {
            let t = e.t as f64;
            (e.t, e.s_ep2 * ((2.0 - 1.0 / gamma) * t.ln()).exp() / t.ln())
        })
        .collect()
}

/// Largest `|ratio_lrp + ratio_norm + ratio_ep1 + ratio_ep2 - 1|` over snapshots.
pub fn max_partition_error(snapshots: &[StatSnapshot]) -> f64 {
    snapshots
        .iter()
        .map(|s| (s.ratio_lrp + s.ratio_norm + s.ratio_ep1 + s.ratio_ep2 - 1.0).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::box_store::BoxSpec;
    use crate::engine::SnapshotKind;

    fn ev(t: u64, ratio: f64) -> CriticalEvent {
        CriticalEvent {
            t,
            s_lrp: ratio,
            s_norm1: 0.3,
            s_norm2: 0.2,
            s_ep1: 0.01,
            s_ep2: 0.0,
            s_com: 1.0,
            ratio,
            max_w: 0.0,
            stripe_ep_height_sum: 0.0,
        }
    }

    fn snap(t: u64, shape: f64, ep2: Option<f64>) -> StatSnapshot {
        StatSnapshot {
            t,
            kind: SnapshotKind::Stride,
            ratio_lrp: 0.25,
            ratio_norm: 0.5,
            ratio_ep1: 0.05,
            ratio_ep2: 0.2,
            max_shape_norm: Some(shape),
            ep2_mean_hw: ep2,
            ep2_count: 1,
            one_plus_sigma: Some(1.5),
            s_com: 1.0,
            area_residual: 0.0,
        }
    }

    #[test]
    fn lrp_threshold_for_four_thirds() {
        let r = monitor_lrp_ratio(&[ev(10, 0.1), ev(100, 0.26), ev(200, 0.19)], 4.0 / 3.0, 50.0, 0.05);
        assert!((r.threshold - 0.2).abs() < 1e-15);
        assert!((1.0 - 3.0 / 4.0f64 - 0.25).abs() < 1e-15);
        assert_eq!(r.checked, 2);
        assert_eq!(r.violations, vec![200]);
        assert!(!r.pass);
        assert_eq!(last_decade_mean(&[ev(10, 0.1), ev(100, 0.26), ev(200, 0.20)], 200), Some(0.23));
    }

    #[test]
    fn t0_markers_at_reference_scale() {
        let n0g = |n0: f64| (4.0 / 3.0 * n0.ln()).exp();
        assert!((n0g(250_000.0) / 1.5749e7 - 1.0).abs() < 1e-4);
        assert!((n0g(1e6) / 1e8 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_bound_verdicts() {
        let s = [snap(1, 1.2, None), snap(2, 1.5, None), snap(3, 1.6, None)];
        let r = monitor_shape_bound(&s, 0).unwrap();
        assert_eq!(r.violations, vec![3]);
        assert_eq!(r.max_shape, Some(1.6));
        assert!(monitor_shape_bound(&s[..2], 0).unwrap().pass);
        assert!(!monitor_shape_bound(&s[..2], 1).unwrap().pass);
        let none = StatSnapshot { one_plus_sigma: None, ..s[0] };
        assert!(matches!(monitor_shape_bound(&[none], 0), Err(Error::NotReady(_))));
    }

    #[test]
    fn ep2_ratio_constant_mean() {
        let s: Vec<StatSnapshot> = [100u64, 1000, 10_000].iter().map(|&t| snap(t, 1.0, Some(3.0))).collect();
        let r = monitor_ep2_ratio(&s, 10.0 / 7.0, 50);
        assert!((r.reference - 51.0 / 49.0).abs() < 1e-15);
        for (t, v) in r.series {
            assert!((v - 3.0 / (t as f64).ln()).abs() < 1e-15);
        }
        assert!((monitor_ep2_ratio(&s, 4.0 / 3.0, 0).reference - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn decades_and_trend() {
        let series: Vec<(u64, f64)> = (1..=50).map(|k| (k * 1000, k as f64)).collect();
        let d = decade_samples(&series);
        assert_eq!(d.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1000, 10_000, 50_000]);
        let h = log_grid_samples(&series, 2);
        assert_eq!(h.iter().map(|x| x.0).collect::<Vec<_>>(), vec![1000, 3000, 10_000, 31_000, 50_000]);
        assert!(approaches_monotonically(&[0.5, 0.6, 0.7], 0.78));
        assert!(!approaches_monotonically(&[0.5, 0.7, 0.6], 0.78));
        assert!(approaches_monotonically(&[0.9, 0.7], 0.78));
    }

    #[test]
    fn survival_histogram_counts_ep2_only() {
        let mut st = BoxStore::new();
        let t = 1_000_000u64;
        for n in [40_000u64, 100_000, 500_000, 900_000] {
            st.insert(BoxSpec::from_sides(1e-7, 1e-6, BoxClass::Ep2, n, n)).unwrap();
        }
        st.insert(BoxSpec::from_sides(1e-7, 1e-6, BoxClass::Ep1, 500_000, 500_000)).unwrap();
        let h = ep2_survival_histogram(&st, 4.0 / 3.0, t, 4);
        assert_eq!(h.iter().map(|b| b.count).sum::<u64>(), 4);
        assert!((h[0].n_lo - 1e6f64.powf(0.75)).abs() < 1e-6);
        let total: f64 = h.iter().map(|b| b.predicted).sum();
        assert!((total - 4.0).abs() < 1e-9);
        assert!(h.windows(2).all(|w| w[1].predicted > w[0].predicted));
    }

    #[test]
    fn survival_prediction_vanishes_at_lower_edge() {
        let m = crate::appendix::MixtureModel::new(4.0 / 3.0, 1e6).unwrap();
        assert!(m.survival_fraction(m.n_min()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn k0_bound_for_ten_thousand() {
        let s = crate::engine::run(crate::engine::EngineConfig::new(
            crate::detail::DetailKind::Square,
            34,
            crate::detail::Gamma::new(10, 7).unwrap(),
            83,
        ))
        .unwrap()
        .summary;
        let r = check_t0_k0(&s, 34, 10.0 / 7.0, 0.05);
        assert_eq!(r.k0_bound, 4);
        assert_eq!(r.k0_ok, Some(true));
        assert!((r.t0_ratio.unwrap() - 115.0 / 34f64.powf(10.0 / 7.0)).abs() < 1e-12);
        assert_eq!(check_t0_k0(&s, 10_000, 4.0 / 3.0, 0.05).k0_bound, 99);
    }

    #[test]
    fn area_monitors() {
        let e = [ev(10, 0.25), ev(100, 0.25)];
        assert!(main_inequality_violations(&e, 4.0 / 3.0, 0.0, 0.05).is_empty());
        assert_eq!(main_inequality_violations(&e, 2.0, 50.0, 0.0), vec![100]);
        assert_eq!(ep1_violations(&e, 0.0, 0.005), vec![10, 100]);
        assert_eq!(ep2_decay_series(&e, 4.0 / 3.0).len(), 2);
        assert!(max_partition_error(&[snap(1, 1.0, None)]) < 1e-15);
    }
}
