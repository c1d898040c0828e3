//! Predictive accuracy: point errors of CMST/CQST, Brier score and its integral,
//! time-dependent AUC, interval coverage, and cross-validation.
//!
//! Censored outcomes are handled by inverse probability of censoring weights built
//! from a Kaplan-Meier estimate of the censoring law. Simulations know the true
//! terminal times; point errors and coverage then use them with unit weights, while
//! the Brier score and AUC stay on the observed follow-up.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::JointComponents;
use crate::copula::Family;
use crate::error::EstimationError;
use crate::fit::{fit_joint_model, FitSettings};
use crate::prediction::{Method, PredictionQuery, Predictor, SurvivalPrediction};
use crate::record::{Dataset, ObservedRecord};
use crate::rng::{stream_rng, streams};
use crate::survival::StepSurvival;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricConfig {
    /// Restriction time for CMST/CQST and the metric grids; `None` uses the
    /// model's follow-up horizon.
    #[serde(default)]
    pub restriction: Option<f64>,
    #[serde(default = "default_level")]
    pub quantile_level: f64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_true")]
    pub ipcw: bool,
}

fn default_level() -> f64 {
    0.5
}
fn default_grid() -> usize {
    100
}
fn default_true() -> bool {
    true
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig { restriction: None, quantile_level: 0.5, grid_points: 100, ipcw: true }
    }
}

impl MetricConfig {
    /// `j * restriction / grid_points` for `j = 1..=grid_points`.
    pub fn grid(&self, restriction: f64) -> Vec<f64> {
        (1..=self.grid_points).map(|j| j as f64 * restriction / self.grid_points as f64).collect()
    }
}

/// Check function `u (level - I(u < 0))`.
pub fn check_loss(u: f64, level: f64) -> f64 {
    u * (level - if u < 0.0 { 1.0 } else { 0.0 })
}

/// Per-subject outcomes and the censoring law used for weighting.
#[derive(Debug, Clone)]
pub struct Outcomes {
    pub time: Vec<f64>,
    pub dead: Vec<bool>,
    pub landmark: Vec<f64>,
    /// `None` switches weighting off: every outcome counts as observed with weight 1.
    pub censoring: Option<StepSurvival>,
    /// True terminal times, when known; point errors and coverage then use them
    /// with unit weights.
    pub oracle: Option<Vec<f64>>,
}

impl Outcomes {
    pub fn observed(records: &[ObservedRecord], censoring: &StepSurvival, ipcw: bool) -> Self {
        Outcomes {
            time: records.iter().map(|r| r.followup).collect(),
            dead: records.iter().map(|r| r.death).collect(),
            landmark: records.iter().map(|r| r.landmark()).collect(),
            censoring: ipcw.then(|| censoring.clone()),
            oracle: None,
        }
    }

    pub fn with_oracle(mut self, deaths: &[f64]) -> Self {
        assert_eq!(deaths.len(), self.time.len());
        self.oracle = Some(deaths.to_vec());
        self
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    fn inverse_left(&self, t: f64) -> f64 {
        match &self.censoring {
            None => 1.0,
            Some(c) => {
                let s = c.left_value(t);
                if s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            }
        }
    }

    fn inverse_at(&self, t: f64) -> f64 {
        match &self.censoring {
            None => 1.0,
            Some(c) => {
                let s = c.value(t);
                if s > 0.0 {
                    1.0 / s
                } else {
                    0.0
                }
            }
        }
    }

    /// Restricted truths `min(time, restriction)` and their weights
    /// `I(known) / S_C(min(Y, restriction)-)`.
    pub fn point_truths(&self, restriction: f64) -> (Vec<f64>, Vec<f64>) {
        if let Some(d) = &self.oracle {
            return (d.iter().map(|&t| t.min(restriction)).collect(), vec![1.0; d.len()]);
        }
        let truth: Vec<f64> = self.time.iter().map(|&t| t.min(restriction)).collect();
        let weight = (0..self.len())
            .map(|i| {
                let known = self.censoring.is_none() || self.dead[i] || self.time[i] >= restriction;
                if known {
                    self.inverse_left(truth[i])
                } else {
                    0.0
                }
            })
            .collect();
        (truth, weight)
    }

    /// Brier weights `dead I(Y <= t) / S_C(Y-) + I(Y > t) / S_C(t)`.
    fn brier_weight(&self, i: usize, t: f64) -> f64 {
        if self.time[i] <= t {
            if self.dead[i] || self.censoring.is_none() {
                self.inverse_left(self.time[i])
            } else {
                0.0
            }
        } else {
            self.inverse_at(t)
        }
    }
}

/// `sum w (truth - pred)^2 / n`.
pub fn mspe(truth: &[f64], pred: &[f64], weight: &[f64]) -> f64 {
    let n = truth.len() as f64;
    truth.iter().zip(pred).zip(weight).map(|((t, p), w)| w * (t - p).powi(2)).sum::<f64>() / n
}

/// `sum w rho_level(truth - pred) / n`.
pub fn qpe(truth: &[f64], pred: &[f64], weight: &[f64], level: f64) -> f64 {
    let n = truth.len() as f64;
    truth.iter().zip(pred).zip(weight).map(|((t, p), w)| w * check_loss(t - p, level)).sum::<f64>() / n
}

/// Weighted Brier score at `t`, averaged over all subjects; subjects whose
/// landmark is not before `t` contribute zero.
pub fn brier(outcomes: &Outcomes, survival_at_t: &[f64], t: f64) -> f64 {
    let n = outcomes.len() as f64;
    (0..outcomes.len())
        .filter(|&i| t > outcomes.landmark[i])
        .map(|i| {
            let alive = if outcomes.time[i] > t { 1.0 } else { 0.0 };
            outcomes.brier_weight(i, t) * (alive - survival_at_t[i]).powi(2)
        })
        .sum::<f64>()
        / n
}

/// Trapezoid integral of a curve sampled on `times`.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times.windows(2).zip(values.windows(2)).map(|(t, v)| 0.5 * (v[0] + v[1]) * (t[1] - t[0])).sum()
}

/// Weighted cumulative/dynamic AUC at `t`: cases die by `t`, controls survive past
/// it, and a lower predicted survival for the case counts as concordant (ties ½).
pub fn auc(outcomes: &Outcomes, survival_at_t: &[f64], t: f64) -> Option<f64> {
    let mut cases = Vec::new();
    let mut controls = Vec::new();
    for i in 0..outcomes.len() {
        if t <= outcomes.landmark[i] {
            continue;
        }
        let w = outcomes.brier_weight(i, t);
        if w <= 0.0 {
            continue;
        }
        if outcomes.time[i] <= t {
            cases.push((survival_at_t[i], w));
        } else {
            controls.push((survival_at_t[i], w));
        }
    }
    if cases.is_empty() || controls.is_empty() {
        return None;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &(si, wi) in &cases {
        for &(sj, wj) in &controls {
            let w = wi * wj;
            den += w;
            if si < sj {
                num += w;
            } else if si == sj {
                num += 0.5 * w;
            }
        }
    }
    Some(num / den)
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Coverage (weighted share of truths inside) and median width.
pub fn interval_metrics(truth: &[f64], weight: &[f64], intervals: &[(f64, f64)]) -> (f64, f64) {
    let total: f64 = weight.iter().sum();
    let hit: f64 = truth
        .iter()
        .zip(weight)
        .zip(intervals)
        .filter(|((t, _), (lo, hi))| lo <= *t && *t <= hi)
        .map(|((_, w), _)| w)
        .sum();
    let widths: Vec<f64> = intervals.iter().map(|(lo, hi)| hi - lo).collect();
    (hit / total, median(&widths))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeAccuracy {
    pub mspe: f64,
    pub qpe: f64,
    pub ibs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodMetrics {
    pub method: Method,
    pub mspe: f64,
    pub qpe: f64,
    pub ibs: f64,
    pub mean_auc: Option<f64>,
    pub cp: f64,
    pub mid: f64,
    pub brier: Vec<f64>,
    pub auc: Vec<Option<f64>>,
    /// Intervals whose upper end was set to the restriction time.
    pub flagged_intervals: usize,
    /// Quantile predictions not identified and replaced by the restriction time.
    pub flagged_quantiles: usize,
    /// Single-event baselines that fell back to `P0` for lack of the event.
    pub fallbacks: usize,
    /// Subjects with no prediction (scored as certain death at the landmark).
    pub failures: usize,
    /// DP metric divided by this method's metric.
    pub relative: Option<RelativeAccuracy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub restriction: f64,
    pub times: Vec<f64>,
    pub subjects: usize,
    pub zero_weight_subjects: usize,
    pub methods: Vec<MethodMetrics>,
}

impl EvaluationReport {
    pub fn method(&self, m: Method) -> Option<&MethodMetrics> {
        self.methods.iter().find(|x| x.method == m)
    }
}

/// A prediction that dies with certainty at `at` (used for failed predictions and
/// as an oracle hook).
pub fn point_mass(id: &str, method: Method, landmark: f64, at: f64) -> SurvivalPrediction {
    let at = at.max(landmark);
    SurvivalPrediction {
        id: id.to_string(),
        method,
        landmark,
        times: vec![landmark, at, at],
        values: vec![1.0, 1.0, 0.0],
    }
}

/// Scores one method's predictions (one per subject, in outcome order).
pub fn score_predictions(
    method: Method,
    predictions: &[SurvivalPrediction],
    outcomes: &Outcomes,
    config: &MetricConfig,
    restriction: f64,
) -> MethodMetrics {
    let (truth, weight) = outcomes.point_truths(restriction);
    let cmst: Vec<f64> = predictions.iter().map(|p| p.cmst(restriction)).collect();
    let mut flagged_quantiles = 0;
    let cqst: Vec<f64> = predictions
        .iter()
        .map(|p| {
            p.cqst(config.quantile_level).unwrap_or_else(|_| {
                flagged_quantiles += 1;
                restriction
            })
        })
        .collect();
    let mut flagged_intervals = 0;
    let intervals: Vec<(f64, f64)> = predictions
        .iter()
        .map(|p| match p.interval(restriction) {
            Ok(iv) => {
                flagged_intervals += usize::from(iv.upper_censored);
                (iv.lower, iv.upper)
            }
            Err(_) => {
                flagged_intervals += 1;
                (p.landmark, restriction)
            }
        })
        .collect();
    let times = config.grid(restriction);
    let brier_curve: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s: Vec<f64> = predictions.iter().map(|p| p.value_at(t)).collect();
            brier(outcomes, &s, t)
        })
        .collect();
    let auc_curve: Vec<Option<f64>> = times
        .iter()
        .map(|&t| {
            let s: Vec<f64> = predictions.iter().map(|p| p.value_at(t)).collect();
            auc(outcomes, &s, t)
        })
        .collect();
    let defined: Vec<f64> = auc_curve.iter().flatten().copied().collect();
    let (cp, mid) = interval_metrics(&truth, &weight, &intervals);
    MethodMetrics {
        method,
        mspe: mspe(&truth, &cmst, &weight),
        qpe: qpe(&truth, &cqst, &weight, config.quantile_level),
        ibs: trapezoid(&times, &brier_curve),
        mean_auc: (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64),
        cp,
        mid,
        brier: brier_curve,
        auc: auc_curve,
        flagged_intervals,
        flagged_quantiles,
        fallbacks: 0,
        failures: 0,
        relative: None,
    }
}

fn fill_relative(methods: &mut [MethodMetrics]) {
    let Some(dp) = methods.iter().find(|m| m.method == Method::Dp).cloned() else {
        return;
    };
    for m in methods.iter_mut() {
        m.relative = Some(RelativeAccuracy { mspe: dp.mspe / m.mspe, qpe: dp.qpe / m.qpe, ibs: dp.ibs / m.ibs });
    }
}

/// Predicts every record's terminal survival from its own history under each
/// method and scores the result.
pub fn evaluate<C: JointComponents>(
    predictor: &Predictor<C>,
    records: &[ObservedRecord],
    outcomes: &Outcomes,
    methods: &[Method],
    config: &MetricConfig,
) -> EvaluationReport {
    let restriction = config.restriction.unwrap_or_else(|| predictor.horizon());
    let (_, weight) = outcomes.point_truths(restriction);
    let mut out = Vec::with_capacity(methods.len());
    for &method in methods {
        let results: Vec<(SurvivalPrediction, bool, bool)> = records
            .par_iter()
            .map(|rec| {
                let q = PredictionQuery::from_record(rec);
                match predictor.predict_or_p0(&q, method, Some(restriction)) {
                    Ok((p, fallback)) => (p, fallback, false),
                    Err(_) => {
                        let l = q.landmark();
                        (point_mass(&q.id, method, l, l), false, true)
                    }
                }
            })
            .collect();
        let preds: Vec<SurvivalPrediction> = results.iter().map(|r| r.0.clone()).collect();
        let mut metrics = score_predictions(method, &preds, outcomes, config, restriction);
        metrics.fallbacks = results.iter().filter(|r| r.1).count();
        metrics.failures = results.iter().filter(|r| r.2).count();
        out.push(metrics);
    }
    fill_relative(&mut out);
    EvaluationReport {
        restriction,
        times: config.grid(restriction),
        subjects: records.len(),
        zero_weight_subjects: weight.iter().filter(|&&w| w == 0.0).count(),
        methods: out,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case", deny_unknown_fields)]
pub enum CvScheme {
    KFold { folds: usize, repeats: usize },
    Random { test_fraction: f64, repeats: usize },
}

impl CvScheme {
    pub fn num_splits(&self) -> usize {
        match *self {
            CvScheme::KFold { folds, repeats } => folds * repeats,
            CvScheme::Random { repeats, .. } => repeats,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), EstimationError> {
        match *self {
            CvScheme::KFold { folds, repeats } => {
                if folds < 2 || folds > n {
                    return Err(EstimationError::InvalidSetting(format!("crossval.folds: {folds} must be in [2, {n}]")));
                }
                if repeats == 0 {
                    return Err(EstimationError::InvalidSetting("crossval.repeats: must be positive".into()));
                }
            }
            CvScheme::Random { test_fraction, repeats } => {
                if !(test_fraction > 0.0 && test_fraction < 1.0) {
                    return Err(EstimationError::InvalidSetting(format!(
                        "crossval.test_fraction: {test_fraction} must be in (0, 1)"
                    )));
                }
                if repeats == 0 {
                    return Err(EstimationError::InvalidSetting("crossval.repeats: must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Strata by terminal status and whether any intermediate event was observed.
fn strata(data: &Dataset) -> Vec<Vec<usize>> {
    let mut s = vec![Vec::new(); 4];
    for (i, r) in data.records().iter().enumerate() {
        s[2 * usize::from(r.death) + usize::from(r.num_observed() > 0)].push(i);
    }
    s.retain(|v| !v.is_empty());
    s
}

/// `(train, test)` index pairs; deterministic given the seed.
pub fn cv_splits(data: &Dataset, scheme: &CvScheme, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let n = data.len();
    let groups = strata(data);
    let mut out = Vec::new();
    let complement = |test: &[usize]| {
        let mut mark = vec![false; n];
        for &i in test {
            mark[i] = true;
        }
        (0..n).filter(|&i| !mark[i]).collect::<Vec<_>>()
    };
    match *scheme {
        CvScheme::KFold { folds, repeats } => {
            for r in 0..repeats {
                let mut rng = stream_rng(seed, streams::SPLITS + r as u64);
                let mut assign = vec![Vec::new(); folds];
                let mut next = 0;
                for g in &groups {
                    let mut g = g.clone();
                    g.shuffle(&mut rng);
                    for i in g {
                        assign[next % folds].push(i);
                        next += 1;
                    }
                }
                for mut test in assign {
                    test.sort_unstable();
                    out.push((complement(&test), test));
                }
            }
        }
        CvScheme::Random { test_fraction, repeats } => {
            for r in 0..repeats {
                let mut rng = stream_rng(seed, streams::SPLITS + r as u64);
                let mut test = Vec::new();
                for g in &groups {
                    let mut g = g.clone();
                    g.shuffle(&mut rng);
                    let take = ((g.len() as f64) * test_fraction).round() as usize;
                    test.extend_from_slice(&g[..take.min(g.len())]);
                }
                test.sort_unstable();
                out.push((complement(&test), test));
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(xs: &[f64]) -> MeanSd {
        let xs: Vec<f64> = xs.iter().copied().filter(|x| x.is_finite()).collect();
        let n = xs.len() as f64;
        if xs.is_empty() {
            return MeanSd { mean: f64::NAN, sd: f64::NAN };
        }
        let mean = xs.iter().sum::<f64>() / n;
        let sd = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvMethodSummary {
    pub method: Method,
    pub mspe: MeanSd,
    pub qpe: MeanSd,
    pub ibs: MeanSd,
    pub mean_auc: MeanSd,
    pub cp: MeanSd,
    pub mid: MeanSd,
    pub relative_mspe: MeanSd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub scheme: CvScheme,
    pub splits: usize,
    pub failed: usize,
    pub methods: Vec<CvMethodSummary>,
}

/// Fits on each training part and evaluates on the held-out part with censoring
/// weights from the training data. Fails when more than 20% of splits fail.
pub fn cross_validate(
    data: &Dataset,
    family: Family,
    settings: &FitSettings,
    scheme: &CvScheme,
    methods: &[Method],
    config: &MetricConfig,
    seed: u64,
) -> Result<CvReport, EstimationError> {
    scheme.validate(data.len())?;
    let splits = cv_splits(data, scheme, seed);
    let reports: Vec<Option<EvaluationReport>> = splits
        .par_iter()
        .map(|(train, test)| {
            let model = fit_joint_model(&data.subset(train), family, settings).ok()?;
            let predictor = Predictor::from_model(&model);
            let test = data.subset(test);
            let outcomes = Outcomes::observed(test.records(), &model.censoring, config.ipcw);
            Some(evaluate(&predictor, test.records(), &outcomes, methods, config))
        })
        .collect();
    let failed = reports.iter().filter(|r| r.is_none()).count();
    if failed * 5 > splits.len() {
        return Err(EstimationError::SplitFailure { failed, total: splits.len() });
    }
    let ok: Vec<EvaluationReport> = reports.into_iter().flatten().collect();
    let summary = methods
        .iter()
        .map(|&m| {
            let pick = |f: &dyn Fn(&MethodMetrics) -> f64| {
                let xs: Vec<f64> = ok.iter().filter_map(|r| r.method(m)).map(f).collect();
                MeanSd::of(&xs)
            };
            CvMethodSummary {
                method: m,
                mspe: pick(&|x| x.mspe),
                qpe: pick(&|x| x.qpe),
                ibs: pick(&|x| x.ibs),
                mean_auc: pick(&|x| x.mean_auc.unwrap_or(f64::NAN)),
                cp: pick(&|x| x.cp),
                mid: pick(&|x| x.mid),
                relative_mspe: pick(&|x| x.relative.map_or(f64::NAN, |r| r.mspe)),
            }
        })
        .collect();
    Ok(CvReport { scheme: *scheme, splits: splits.len(), failed, methods: summary })
}
