//! Concordance estimating equation for the association between an intermediate
//! event and the terminal event.
//!
//! A pair is comparable for event `k` when the earlier of the two event-`k` times
//! is an observed event no later than the earlier follow-up time, and that earlier
//! follow-up ends in an observed death. For such pairs the sign of
//! `(T_ik - T_jk)(Y_i - Y_j)` agrees with the latent one, and under the copula the
//! concordance probability is `g / (g + 1)` with `g` the cross-ratio evaluated at the
//! joint survival of the pair minimum. Pairs tied on either coordinate are skipped.

use serde::{Deserialize, Serialize};

use crate::copula::{tau_from_theta, theta_from_tau, ArchimedeanCopula, Family};
use crate::error::EstimationError;
use crate::record::Dataset;
use crate::survival::{nearest_rank_quantile, StepSurvival};

/// Bracket on the Kendall scale searched for the root.
pub const TAU_BRACKET: (f64, f64) = (0.001, 0.99);
const TAU_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PairWeight {
    #[default]
    Unit,
    /// Down-weights pairs in the sparse upper tail via the inverse at-risk fraction.
    Dampened,
}

/// Where the root of the estimating equation was found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RootStatus {
    Interior,
    /// No sign change: the equation is already negative at the lower end.
    LowerBound,
    /// No sign change: the equation is still positive at the upper end.
    UpperBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseAssociation {
    pub k: usize,
    pub theta: f64,
    pub tau: f64,
    pub weight: PairWeight,
    pub status: RootStatus,
    pub comparable_pairs: usize,
}

#[derive(Debug, Clone, Copy)]
struct ComparablePair {
    concordant: bool,
    weight: f64,
    /// Estimated joint survival at the pair minimum.
    s: f64,
}

/// The estimating function for one event with all data-dependent pieces cached.
#[derive(Debug, Clone)]
pub struct ConcordanceEquation {
    k: usize,
    family: Family,
    weight: PairWeight,
    pairs: Vec<ComparablePair>,
    norm: f64,
}

impl ConcordanceEquation {
    pub fn build(
        data: &Dataset,
        k: usize,
        family: Family,
        weight: PairWeight,
        censoring: &StepSurvival,
    ) -> Self {
        let recs = data.records();
        let n = recs.len();
        let t: Vec<f64> = recs.iter().map(|r| r.times[k]).collect();
        let y: Vec<f64> = recs.iter().map(|r| r.followup).collect();

        let mut raw = Vec::new();
        for i in 0..n {
            for j in 0..i {
                if t[i] == t[j] || y[i] == y[j] {
                    continue;
                }
                let m = if y[i] < y[j] { i } else { j };
                let a = if t[i] < t[j] { i } else { j };
                if !recs[m].death || !recs[a].events[k] || t[a] > y[m] {
                    continue;
                }
                let concordant = (t[i] - t[j]) * (y[i] - y[j]) > 0.0;
                raw.push((concordant, t[a], y[m]));
            }
        }

        let points: Vec<(f64, f64)> = t.iter().cloned().zip(y.iter().cloned()).collect();
        let queries: Vec<(f64, f64)> = raw.iter().map(|&(_, x, yy)| (x, yy)).collect();
        let at_risk = count_dominating(&points, &queries, true);
        let weights = match weight {
            PairWeight::Unit => vec![1.0; raw.len()],
            PairWeight::Dampened => {
                let qa = nearest_rank_quantile(&t, 0.9);
                let qb = nearest_rank_quantile(&y, 0.9);
                let q: Vec<(f64, f64)> = queries.iter().map(|&(x, yy)| (qa.min(x), qb.min(yy))).collect();
                count_dominating(&points, &q, false)
                    .into_iter()
                    .map(|c| n as f64 / c as f64)
                    .collect()
            }
        };

        let mut pairs = Vec::with_capacity(raw.len());
        for (idx, &(concordant, _, yy)) in raw.iter().enumerate() {
            let sc = censoring.value(yy);
            if sc <= 0.0 {
                continue;
            }
            let s = at_risk[idx] as f64 / (n as f64 * sc);
            pairs.push(ComparablePair { concordant, weight: weights[idx], s });
        }
        let norm = (n as f64) * (n as f64 - 1.0) / 2.0;
        ConcordanceEquation { k, family, weight, pairs, norm }
    }

    pub fn comparable_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// `U_k(theta)`, decreasing in `theta`.
    pub fn value(&self, copula: &ArchimedeanCopula) -> f64 {
        let mut acc = 0.0;
        for p in &self.pairs {
            let g = copula.cross_ratio(p.s);
            let expected = g / (g + 1.0);
            let observed = if p.concordant { 1.0 } else { 0.0 };
            acc += p.weight * (observed - expected);
        }
        acc / self.norm
    }

    fn value_at_tau(&self, tau: f64) -> Result<f64, EstimationError> {
        let c = ArchimedeanCopula::new(self.family, theta_from_tau(self.family, tau)?)?;
        Ok(self.value(&c))
    }

    /// Root of the equation by bisection on the Kendall scale.
    pub fn solve(&self) -> Result<PairwiseAssociation, EstimationError> {
        if self.pairs.is_empty() {
            return Err(EstimationError::NoComparablePairs { k: self.k });
        }
        let (mut lo, mut hi) = TAU_BRACKET;
        let u_lo = self.value_at_tau(lo)?;
        let u_hi = self.value_at_tau(hi)?;
        let (tau, status) = if u_lo <= 0.0 {
            (lo, RootStatus::LowerBound)
        } else if u_hi >= 0.0 {
            (hi, RootStatus::UpperBound)
        } else {
            while hi - lo > TAU_TOL {
                let mid = 0.5 * (lo + hi);
                if self.value_at_tau(mid)? > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            (0.5 * (lo + hi), RootStatus::Interior)
        };
        // tau is reported as the image of theta so the pair round-trips exactly
        let theta = theta_from_tau(self.family, tau)?;
        Ok(PairwiseAssociation {
            k: self.k,
            theta,
            tau: tau_from_theta(self.family, theta)?,
            weight: self.weight,
            status,
            comparable_pairs: self.pairs.len(),
        })
    }
}

/// Solves the concordance estimating equation for event `k`.
pub fn solve_theta(
    data: &Dataset,
    k: usize,
    family: Family,
    weight: PairWeight,
    censoring: &StepSurvival,
) -> Result<PairwiseAssociation, EstimationError> {
    ConcordanceEquation::build(data, k, family, weight, censoring).solve()
}

/// For each query `(x, y)`, the number of points with `a > x && b > y` (strict) or
/// `a >= x && b >= y` (non-strict). Offline sweep with a Fenwick tree.
fn count_dominating(points: &[(f64, f64)], queries: &[(f64, f64)], strict: bool) -> Vec<usize> {
    let mut ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let mut tree = vec![0usize; ys.len() + 1];
    let add = |tree: &mut Vec<usize>, rank: usize| {
        let mut i = rank + 1;
        while i < tree.len() {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    };
    let prefix = |tree: &Vec<usize>, count: usize| {
        let mut i = count;
        let mut s = 0;
        while i > 0 {
            s += tree[i];
            i -= i & i.wrapping_neg();
        }
        s
    };

    let mut pts: Vec<usize> = (0..points.len()).collect();
    pts.sort_by(|&a, &b| points[b].0.total_cmp(&points[a].0));
    let mut qs: Vec<usize> = (0..queries.len()).collect();
    qs.sort_by(|&a, &b| queries[b].0.total_cmp(&queries[a].0));

    let mut out = vec![0usize; queries.len()];
    let mut inserted = 0usize;
    let mut next = 0usize;
    for &q in &qs {
        let (x, y) = queries[q];
        while next < pts.len() {
            let a = points[pts[next]].0;
            let admit = if strict { a > x } else { a >= x };
            if !admit {
                break;
            }
            let rank = ys.partition_point(|&v| v < points[pts[next]].1);
            add(&mut tree, rank);
            inserted += 1;
            next += 1;
        }
        let below = if strict {
            ys.partition_point(|&v| v <= y)
        } else {
            ys.partition_point(|&v| v < y)
        };
        out[q] = inserted - prefix(&tree, below);
    }
    out
}
