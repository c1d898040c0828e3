//! Right-continuous step survival functions and the Kaplan-Meier estimator.

use serde::{Deserialize, Serialize};

/// A non-increasing right-continuous step function equal to 1 before `times[0]`.
///
/// Invariants: `times` strictly increasing, `values` non-increasing in [0, 1],
/// same length; `t_max >= times.last()` is the largest time seen in the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepSurvival {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub t_max: f64,
}

impl StepSurvival {
    pub fn new(times: Vec<f64>, values: Vec<f64>, t_max: f64) -> Self {
        debug_assert_eq!(times.len(), values.len());
        debug_assert!(times.windows(2).all(|w| w[0] < w[1]));
        StepSurvival { times, values, t_max }
    }

    /// Number of jump points at or before `t`.
    fn count_le(&self, t: f64) -> usize {
        self.times.partition_point(|&x| x <= t)
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => 1.0,
            i => self.values[i - 1],
        }
    }

    /// `S(t-)`.
    pub fn left_value(&self, t: f64) -> f64 {
        match self.times.partition_point(|&x| x < t) {
            0 => 1.0,
            i => self.values[i - 1],
        }
    }

    pub fn jump_at(&self, t: f64) -> f64 {
        self.left_value(t) - self.value(t)
    }

    pub fn last_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// Slope of the piecewise-linear interpolant through `(0, 1)` and the jump
    /// points; the segment `(t_{j-1}, t_j]` owns its right endpoint, and the slope
    /// is zero beyond the last jump.
    pub fn slope(&self, t: f64) -> f64 {
        let j = self.times.partition_point(|&x| x < t);
        if j >= self.times.len() {
            return 0.0;
        }
        let (t0, v0) = if j == 0 { (0.0, 1.0) } else { (self.times[j - 1], self.values[j - 1]) };
        let dt = self.times[j] - t0;
        if dt <= 0.0 {
            return 0.0;
        }
        (self.values[j] - v0) / dt
    }

    /// Jump points with positive mass, as `(time, mass, mid_value)` where
    /// `mid_value = (S(t-) + S(t)) / 2`.
    pub fn atoms(&self) -> Vec<(f64, f64, f64)> {
        let mut prev = 1.0;
        let mut out = Vec::with_capacity(self.times.len());
        for (&t, &v) in self.times.iter().zip(&self.values) {
            if prev > v {
                out.push((t, prev - v, 0.5 * (prev + v)));
            }
            prev = v;
        }
        out
    }

    /// Time-rescaled copy: `S'(g(t)) = S(t)` for increasing `g`.
    pub fn map_time(&self, g: impl Fn(f64) -> f64) -> StepSurvival {
        StepSurvival {
            times: self.times.iter().map(|&t| g(t)).collect(),
            values: self.values.clone(),
            t_max: g(self.t_max),
        }
    }
}

/// Kaplan-Meier product-limit estimator. Censorings tied with events are at risk.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> StepSurvival {
    assert_eq!(times.len(), events.len());
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let n = times.len();
    let t_max = times.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let mut out_t = Vec::new();
    let mut out_v = Vec::new();
    let mut s = 1.0;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let at_risk = n - i;
        let mut deaths = 0usize;
        let mut j = i;
        while j < n && times[order[j]] == t {
            if events[order[j]] {
                deaths += 1;
            }
            j += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            out_t.push(t);
            out_v.push(s);
        }
        i = j;
    }
    StepSurvival::new(out_t, out_v, t_max)
}

/// Nearest-rank (type 1) empirical quantile; commutes with increasing maps.
pub fn nearest_rank_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

/// Linearly interpolated (type 7) empirical quantile.
pub fn interpolated_quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
