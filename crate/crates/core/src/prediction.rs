//! Dynamic prediction of terminal-event survival from an intermediate-event history.
//!
//! For a subject alive at the landmark `L` (the latest observed intermediate time)
//! with `m` observed events, the conditional survival `S*(t) = Pr(D > t | history)`
//! is
//!
//! * `m = 0`: `S_D(t) / S_D(L)`;
//! * `m = 1`: `H1(S_l(t_l), S_D(t)) / H1(S_l(t_l), S_D(t_l))`;
//! * `m >= 2`: the ratio of Stieltjes sums of `Q_m` over terminal atoms after `t` and
//!   after `L`, where `Q_m(t) = |psi^{(m)}(sum phi(G_k))| prod (-phi'(G_k)) (-G_k')`
//!   with `G_k = G_k(t_k; t)`.
//!
//! The baselines reuse the same pieces: `P0` ignores the history, `Pk` conditions on
//! event `k` alone at its own time, `Pkm` conditions on event `k` at the landmark.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::components::{FittedComponents, JointComponents};
use crate::copula::{log_sum_exp, ArchimedeanCopula, MAX_DERIVATIVE_ORDER};
use crate::error::PredictionError;
use crate::fit::FittedJointModel;
use crate::record::ObservedRecord;

/// Number of equally spaced points added to the terminal jump times.
pub const GRID_POINTS: usize = 200;

/// An exactly observed intermediate-event history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionQuery {
    pub id: String,
    /// `(event index, time)` pairs with distinct indices.
    pub events: Vec<(usize, f64)>,
}

impl PredictionQuery {
    pub fn new(id: impl Into<String>, events: Vec<(usize, f64)>) -> Self {
        PredictionQuery { id: id.into(), events }
    }

    /// History of a record: its observed intermediate events.
    pub fn from_record(rec: &ObservedRecord) -> Self {
        PredictionQuery { id: rec.id.clone(), events: rec.history() }
    }

    pub fn num_observed(&self) -> usize {
        self.events.len()
    }

    pub fn landmark(&self) -> f64 {
        self.events.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn event_time(&self, k: usize) -> Option<f64> {
        self.events.iter().find(|e| e.0 == k).map(|e| e.1)
    }

    pub fn validate(&self, num_events: usize) -> Result<(), PredictionError> {
        for (i, &(k, t)) in self.events.iter().enumerate() {
            if k >= num_events {
                return Err(PredictionError::EventOutOfRange { k: k + 1, num_events });
            }
            if !(t.is_finite() && t >= 0.0) {
                return Err(PredictionError::InvalidArgument(format!(
                    "query {}: event {} time {t} must be finite and non-negative",
                    self.id,
                    k + 1
                )));
            }
            if self.events[..i].iter().any(|e| e.0 == k) {
                return Err(PredictionError::InvalidArgument(format!(
                    "query {}: event {} listed twice",
                    self.id,
                    k + 1
                )));
            }
        }
        Ok(())
    }
}

/// Which predictor to use. Event indices are zero-based; the serialized form is
/// the display label (`DP`, `P0`, `P2`, `P2m`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Method {
    Dp,
    P0,
    Pk(usize),
    Pkm(usize),
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for Method {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        Method::parse(&s).ok_or_else(|| format!("unknown method '{s}'"))
    }
}

impl Method {
    /// Accepts `dp`, `p0`, `p<k>` and `p<k>m` with one-based `k`.
    pub fn parse(s: &str) -> Option<Method> {
        let s = s.trim().to_ascii_lowercase();
        match s.as_str() {
            "dp" => return Some(Method::Dp),
            "p0" => return Some(Method::P0),
            _ => {}
        }
        let rest = s.strip_prefix('p')?;
        let (digits, landmark) = match rest.strip_suffix('m') {
            Some(d) => (d, true),
            None => (rest, false),
        };
        let k: usize = digits.parse().ok()?;
        if k == 0 {
            return None;
        }
        Some(if landmark { Method::Pkm(k - 1) } else { Method::Pk(k - 1) })
    }

    /// DP, P0, every Pk and every Pkm.
    pub fn all(num_events: usize) -> Vec<Method> {
        let mut out = vec![Method::Dp, Method::P0];
        out.extend((0..num_events).map(Method::Pk));
        out.extend((0..num_events).map(Method::Pkm));
        out
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Dp => write!(f, "DP"),
            Method::P0 => write!(f, "P0"),
            Method::Pk(k) => write!(f, "P{}", k + 1),
            Method::Pkm(k) => write!(f, "P{}m", k + 1),
        }
    }
}

/// `S*(t)` as a function of `t`; equal to 1 up to the landmark.
#[derive(Debug, Clone)]
pub enum ConditionalCurve {
    /// `S_D(t) / base`.
    Terminal { landmark: f64, base: f64 },
    /// `H1(u, S_D(t)) / base`.
    SingleEvent { landmark: f64, copula: ArchimedeanCopula, u: f64, base: f64 },
    /// Normalised suffix sums over atoms; `suffix[i]` is the share of atoms `i..`.
    Mixture { landmark: f64, times: Vec<f64>, tail: Vec<bool>, suffix: Vec<f64> },
}

impl ConditionalCurve {
    pub fn landmark(&self) -> f64 {
        match self {
            ConditionalCurve::Terminal { landmark, .. }
            | ConditionalCurve::SingleEvent { landmark, .. }
            | ConditionalCurve::Mixture { landmark, .. } => *landmark,
        }
    }

    pub fn value<C: JointComponents + ?Sized>(&self, comp: &C, t: f64) -> f64 {
        if t <= self.landmark() {
            return 1.0;
        }
        let v = match self {
            ConditionalCurve::Terminal { base, .. } => comp.terminal_survival(t) / base,
            ConditionalCurve::SingleEvent { copula, u, base, .. } => {
                copula.h1(*u, comp.terminal_survival(t)) / base
            }
            ConditionalCurve::Mixture { times, tail, suffix, .. } => {
                let i = times
                    .iter()
                    .zip(tail)
                    .position(|(&a, &is_tail)| is_tail || a > t)
                    .unwrap_or(times.len());
                suffix.get(i).copied().unwrap_or(0.0)
            }
        };
        v.clamp(0.0, 1.0)
    }
}

/// `ln Q_m` at terminal survival value `v` for the given history.
pub fn ln_q_m<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    events: &[(usize, f64)],
    v: f64,
) -> Result<f64, PredictionError> {
    let mut arg = 0.0;
    let mut ln = 0.0;
    for &(k, t) in events {
        let g = comp.conditional_survival(k, t, v);
        arg += alpha.phi(g);
        ln += alpha.ln_neg_phi_d1(g) + comp.ln_neg_conditional_slope(k, t, v);
    }
    Ok(ln + alpha.ln_abs_psi_deriv(arg, events.len())?)
}

/// A fitted model (or oracle components) ready to answer queries.
#[derive(Debug, Clone)]
pub struct Predictor<C> {
    comp: C,
    alpha: Option<ArchimedeanCopula>,
}

impl Predictor<FittedComponents> {
    pub fn from_model(model: &FittedJointModel) -> Self {
        Predictor { comp: model.components(), alpha: model.alpha_copula() }
    }
}

impl<C: JointComponents> Predictor<C> {
    pub fn new(comp: C, alpha: Option<ArchimedeanCopula>) -> Self {
        Predictor { comp, alpha }
    }

    pub fn components(&self) -> &C {
        &self.comp
    }

    pub fn horizon(&self) -> f64 {
        self.comp.horizon()
    }

    fn check_landmark(&self, landmark: f64) -> Result<(), PredictionError> {
        let horizon = self.comp.horizon();
        if landmark >= horizon {
            return Err(PredictionError::LandmarkBeyondHorizon { landmark, horizon });
        }
        Ok(())
    }

    fn terminal_curve(&self, landmark: f64) -> Result<ConditionalCurve, PredictionError> {
        self.check_landmark(landmark)?;
        let base = self.comp.terminal_survival(landmark);
        if !(base > 0.0) {
            return Err(PredictionError::ZeroDenominator);
        }
        Ok(ConditionalCurve::Terminal { landmark, base })
    }

    fn single_curve(&self, k: usize, t_k: f64, landmark: f64) -> Result<ConditionalCurve, PredictionError> {
        self.check_landmark(landmark)?;
        let copula = *self.comp.theta_copula(k);
        let u = self.comp.marginal_survival(k, t_k);
        let base = copula.h1(u, self.comp.terminal_survival(landmark));
        if !(base > 0.0 && base.is_finite()) {
            return Err(PredictionError::ZeroDenominator);
        }
        Ok(ConditionalCurve::SingleEvent { landmark, copula, u, base })
    }

    fn mixture_curve(&self, query: &PredictionQuery) -> Result<ConditionalCurve, PredictionError> {
        let m = query.num_observed();
        if m > MAX_DERIVATIVE_ORDER {
            return Err(crate::error::CopulaError::UnsupportedOrder { order: m, max: MAX_DERIVATIVE_ORDER }.into());
        }
        let alpha = self.alpha.as_ref().ok_or(PredictionError::MissingAssociation { m })?;
        let landmark = query.landmark();
        self.check_landmark(landmark)?;
        let mut times = Vec::new();
        let mut tail = Vec::new();
        let mut ln_w = Vec::new();
        for atom in self.comp.terminal_atoms().iter().filter(|a| a.after(landmark)) {
            // the marginal slopes are atom-free and cancel in the ratio
            let mut arg = 0.0;
            let mut ln = atom.mass.ln();
            for &(k, t) in &query.events {
                let c = self.comp.theta_copula(k);
                let u = self.comp.marginal_survival(k, t);
                let g = self.comp.conditional_survival(k, t, atom.value);
                arg += alpha.phi(g);
                ln += alpha.ln_neg_phi_d1(g) + c.ln_h12(u, atom.value);
            }
            ln += alpha.ln_abs_psi_deriv(arg, m)?;
            times.push(atom.time);
            tail.push(atom.tail);
            ln_w.push(if ln.is_nan() { f64::NEG_INFINITY } else { ln });
        }
        let total = log_sum_exp(&ln_w);
        if !total.is_finite() {
            return Err(PredictionError::ZeroDenominator);
        }
        let mut suffix = vec![0.0; ln_w.len()];
        let mut acc = 0.0;
        for i in (0..ln_w.len()).rev() {
            acc += (ln_w[i] - total).exp();
            suffix[i] = acc.min(1.0);
        }
        Ok(ConditionalCurve::Mixture { landmark, times, tail, suffix })
    }

    /// Conditional survival curve for a query under a method.
    pub fn curve(&self, query: &PredictionQuery, method: Method) -> Result<ConditionalCurve, PredictionError> {
        query.validate(self.comp.num_events())?;
        match method {
            Method::Dp => match query.events.as_slice() {
                [] => self.terminal_curve(0.0),
                [(k, t)] => self.single_curve(*k, *t, *t),
                _ => self.mixture_curve(query),
            },
            Method::P0 => self.terminal_curve(query.landmark()),
            Method::Pk(k) | Method::Pkm(k) => {
                if k >= self.comp.num_events() {
                    return Err(PredictionError::EventOutOfRange { k: k + 1, num_events: self.comp.num_events() });
                }
                let t_k = query.event_time(k).ok_or(PredictionError::EventNotObserved { k: k + 1 })?;
                let landmark = if matches!(method, Method::Pk(_)) { t_k } else { query.landmark() };
                self.single_curve(k, t_k, landmark)
            }
        }
    }

    /// Evaluation grid: landmark, terminal jump times in `(landmark, horizon]`,
    /// `GRID_POINTS` equally spaced points on the same interval, and the
    /// restriction time when it falls inside.
    pub fn grid(&self, landmark: f64, restriction: Option<f64>) -> Vec<f64> {
        let horizon = self.comp.horizon();
        let mut g = vec![landmark];
        g.extend(
            self.comp
                .terminal_atoms()
                .iter()
                .filter(|a| !a.tail && a.time > landmark && a.time <= horizon)
                .map(|a| a.time),
        );
        let step = (horizon - landmark) / GRID_POINTS as f64;
        g.extend((1..=GRID_POINTS).map(|j| landmark + j as f64 * step));
        if let Some(r) = restriction {
            if r > landmark && r < horizon {
                g.push(r);
            }
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    }

    pub fn predict(
        &self,
        query: &PredictionQuery,
        method: Method,
        restriction: Option<f64>,
    ) -> Result<SurvivalPrediction, PredictionError> {
        let curve = self.curve(query, method)?;
        let landmark = curve.landmark();
        let times = self.grid(landmark, restriction);
        let mut values: Vec<f64> = times.iter().map(|&t| curve.value(&self.comp, t)).collect();
        // guard rounding in the ratio forms
        for i in 1..values.len() {
            values[i] = values[i].min(values[i - 1]);
        }
        Ok(SurvivalPrediction { id: query.id.clone(), method, landmark, times, values })
    }

    /// `predict`, falling back to `P0` when a single-event baseline names an event
    /// missing from the history. Returns whether the fallback was used.
    pub fn predict_or_p0(
        &self,
        query: &PredictionQuery,
        method: Method,
        restriction: Option<f64>,
    ) -> Result<(SurvivalPrediction, bool), PredictionError> {
        match self.predict(query, method, restriction) {
            Err(PredictionError::EventNotObserved { .. }) => {
                let mut p = self.predict(query, Method::P0, restriction)?;
                p.method = method;
                Ok((p, true))
            }
            other => other.map(|p| (p, false)),
        }
    }
}

/// `S*` on a grid starting at the landmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalPrediction {
    pub id: String,
    pub method: Method,
    pub landmark: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionInterval {
    pub lower: f64,
    pub upper: f64,
    /// The upper quantile was not identified and `upper` is the restriction time.
    pub upper_censored: bool,
}

impl PredictionInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lower <= t && t <= self.upper
    }
}

impl SurvivalPrediction {
    /// Right-continuous step reading of the grid values; 0 past the grid end.
    pub fn value_at(&self, t: f64) -> f64 {
        if t <= self.landmark {
            return 1.0;
        }
        let i = self.times.partition_point(|&x| x <= t);
        if i == self.times.len() && t > *self.times.last().unwrap_or(&self.landmark) {
            return 0.0;
        }
        self.values[i.saturating_sub(1)]
    }

    /// Survival at the last grid time.
    pub fn tail_value(&self) -> f64 {
        self.values.last().copied().unwrap_or(1.0)
    }

    /// Conditional restricted mean survival time: landmark plus the trapezoid
    /// integral of `S*` up to `restriction` (`S* = 0` past the grid end).
    pub fn cmst(&self, restriction: f64) -> f64 {
        let mut total = self.landmark;
        for w in 0..self.times.len().saturating_sub(1) {
            let (a, b) = (self.times[w], self.times[w + 1]);
            if a >= restriction {
                break;
            }
            let (fa, fb) = (self.values[w], self.values[w + 1]);
            if b <= restriction {
                total += 0.5 * (fa + fb) * (b - a);
            } else {
                let fr = fa + (fb - fa) * (restriction - a) / (b - a);
                total += 0.5 * (fa + fr) * (restriction - a);
            }
        }
        total
    }

    /// Conditional quantile survival time: the first grid time with
    /// `S* <= 1 - level`.
    pub fn cqst(&self, level: f64) -> Result<f64, PredictionError> {
        if !(level > 0.0 && level < 1.0) {
            return Err(PredictionError::InvalidArgument(format!("quantile level {level} must be in (0, 1)")));
        }
        let tail = self.tail_value();
        if level >= 1.0 - tail {
            return Err(PredictionError::NotIdentified { level, tail });
        }
        let target = 1.0 - level;
        let i = self.values.iter().position(|&v| v <= target).expect("identified level");
        Ok(self.times[i])
    }

    /// `[CQST(0.025), CQST(0.975)]`, with the upper end replaced by `restriction`
    /// when not identified.
    pub fn interval(&self, restriction: f64) -> Result<PredictionInterval, PredictionError> {
        let lower = self.cqst(0.025)?;
        match self.cqst(0.975) {
            Ok(upper) => Ok(PredictionInterval { lower, upper, upper_censored: false }),
            Err(PredictionError::NotIdentified { .. }) => {
                Ok(PredictionInterval { lower, upper: restriction.max(lower), upper_censored: true })
            }
            Err(e) => Err(e),
        }
    }

    pub fn summary(&self, restriction: f64) -> PredictionSummary {
        PredictionSummary {
            id: self.id.clone(),
            method: self.method,
            landmark: self.landmark,
            cmst: self.cmst(restriction),
            cqst_lower: self.cqst(0.025).ok(),
            cqst_median: self.cqst(0.5).ok(),
            cqst_upper: self.cqst(0.975).ok(),
            interval: self.interval(restriction).ok(),
        }
    }
}

/// Residual-lifetime functionals of one prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub id: String,
    pub method: Method,
    pub landmark: f64,
    pub cmst: f64,
    pub cqst_lower: Option<f64>,
    pub cqst_median: Option<f64>,
    pub cqst_upper: Option<f64>,
    pub interval: Option<PredictionInterval>,
}
