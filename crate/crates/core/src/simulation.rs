//! Data generation from the nested copula model.
//!
//! Per subject: draw the terminal time `D`, exchangeable uniforms `U_k` through the
//! association copula, and set `T_k` to the solution of `G_k(T_k; D) = U_k`. When
//! `U_k < G_k(D; D)` the event falls after `D` and is never observed. An optional
//! lower-wedge association replaces the pairwise copula for that unobservable part,
//! rescaling `U_k` so the law of `T_k` on `[0, D]` is unchanged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{sample_exchangeable_uniforms, ArchimedeanCopula, Family};
use crate::error::EstimationError;
use crate::record::{Dataset, ObservedRecord};
use crate::rng::{exp1, open_uniform, stream_rng, streams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub family: Family,
    pub tau_alpha: f64,
    /// Kendall's tau between each intermediate event and the terminal event.
    pub tau_thetas: Vec<f64>,
    /// Kendall's tau used beyond the terminal event (same for every k); `None`
    /// continues the pairwise copula.
    #[serde(default)]
    pub tau_lower: Option<f64>,
    pub event_rates: Vec<f64>,
    pub terminal_rate: f64,
    /// Censoring is uniform on `[0, censor_upper]`.
    pub censor_upper: f64,
    pub n_train: usize,
    #[serde(default)]
    pub n_test: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Association with the terminal event decreasing linearly from 0.8 to 0.2.
    Ex1,
    /// All associations with the terminal event equal to 0.5.
    Ex2,
    /// Seven events with a separate association beyond the terminal event.
    Ex3,
}

impl Scenario {
    pub fn parse(s: &str) -> Option<Scenario> {
        match s.to_ascii_lowercase().as_str() {
            "ex1" => Some(Scenario::Ex1),
            "ex2" => Some(Scenario::Ex2),
            "ex3" => Some(Scenario::Ex3),
            _ => None,
        }
    }
}

impl SimulationConfig {
    /// Preset with exponential margins (rate 1 for events, 0.6 for death) and
    /// uniform censoring. Ex3 overrides `k` with 7, all rates with 1, and censoring
    /// with `[0, 10]`.
    pub fn preset(scenario: Scenario, k: usize, tau_alpha: f64, censor_upper: f64, n_train: usize, seed: u64) -> Self {
        match scenario {
            Scenario::Ex1 => {
                let tau_thetas = (0..k)
                    .map(|j| if k == 1 { 0.8 } else { 0.8 - 0.6 * j as f64 / (k - 1) as f64 })
                    .collect();
                SimulationConfig {
                    family: Family::Frank,
                    tau_alpha,
                    tau_thetas,
                    tau_lower: None,
                    event_rates: vec![1.0; k],
                    terminal_rate: 0.6,
                    censor_upper,
                    n_train,
                    n_test: 50,
                    seed,
                }
            }
            Scenario::Ex2 => SimulationConfig {
                tau_thetas: vec![0.5; k],
                ..SimulationConfig::preset(Scenario::Ex1, k, tau_alpha, censor_upper, n_train, seed)
            },
            Scenario::Ex3 => SimulationConfig {
                family: Family::Frank,
                tau_alpha,
                tau_thetas: vec![0.5; 7],
                tau_lower: Some(0.5),
                event_rates: vec![1.0; 7],
                terminal_rate: 1.0,
                censor_upper: 10.0,
                n_train,
                n_test: 0,
                seed,
            },
        }
    }

    pub fn num_events(&self) -> usize {
        self.tau_thetas.len()
    }

    pub fn alpha_copula(&self) -> Result<ArchimedeanCopula, EstimationError> {
        ArchimedeanCopula::from_tau(self.family, self.tau_alpha)
            .map_err(|e| EstimationError::InvalidSetting(format!("simulation.tau_alpha: {e}")))
    }

    pub fn theta_copulas(&self) -> Result<Vec<ArchimedeanCopula>, EstimationError> {
        self.tau_thetas
            .iter()
            .map(|&t| {
                ArchimedeanCopula::from_tau(self.family, t)
                    .map_err(|e| EstimationError::InvalidSetting(format!("simulation.tau_thetas: {e}")))
            })
            .collect()
    }

    pub fn lower_copula(&self) -> Result<Option<ArchimedeanCopula>, EstimationError> {
        self.tau_lower
            .map(|t| {
                ArchimedeanCopula::from_tau(self.family, t)
                    .map_err(|e| EstimationError::InvalidSetting(format!("simulation.tau_lower: {e}")))
            })
            .transpose()
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |key: &str, msg: String| Err(EstimationError::InvalidSetting(format!("simulation.{key}: {msg}")));
        if self.tau_thetas.is_empty() {
            return bad("tau_thetas", "at least one intermediate event is required".into());
        }
        if self.event_rates.len() != self.tau_thetas.len() {
            return bad("event_rates", format!("expected {} rates, found {}", self.tau_thetas.len(), self.event_rates.len()));
        }
        if self.event_rates.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return bad("event_rates", "rates must be positive".into());
        }
        if !(self.terminal_rate > 0.0 && self.terminal_rate.is_finite()) {
            return bad("terminal_rate", "rate must be positive".into());
        }
        if !(self.censor_upper > 0.0) {
            return bad("censor_upper", "must be positive (use a large value for light censoring)".into());
        }
        if self.n_train == 0 {
            return bad("n_train", "must be positive".into());
        }
        if self.tau_thetas.len() >= 2 {
            self.alpha_copula()?;
        }
        self.theta_copulas()?;
        self.lower_copula()?;
        Ok(())
    }
}

/// Latent event times of a simulated subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentTruth {
    pub id: String,
    pub death: f64,
    /// Intermediate-event times; `+inf` marks an event that never occurs.
    pub events: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub train: Dataset,
    pub test: Dataset,
    pub train_latent: Vec<LatentTruth>,
    pub test_latent: Vec<LatentTruth>,
}

struct Generator {
    alpha: Option<ArchimedeanCopula>,
    thetas: Vec<ArchimedeanCopula>,
    lower: Option<ArchimedeanCopula>,
    rates: Vec<f64>,
    terminal_rate: f64,
    censor_upper: f64,
}

/// Smallest `t` in `[lo, hi]` with `f(t) <= target` for decreasing `f`, to 1e-10.
fn invert_decreasing(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    if f(hi) > target {
        return hi;
    }
    while hi - lo > 1e-10 * (1.0 + hi) {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

impl Generator {
    fn new(config: &SimulationConfig) -> Result<Self, EstimationError> {
        config.validate()?;
        Ok(Generator {
            alpha: if config.num_events() >= 2 { Some(config.alpha_copula()?) } else { None },
            thetas: config.theta_copulas()?,
            lower: config.lower_copula()?,
            rates: config.event_rates.clone(),
            terminal_rate: config.terminal_rate,
            censor_upper: config.censor_upper,
        })
    }

    /// Event time with conditional survival `u` given death at `d`.
    fn event_time(&self, k: usize, u: f64, d: f64) -> f64 {
        let rate = self.rates[k];
        let v = (-self.terminal_rate * d).exp();
        let upper = &self.thetas[k];
        let g = |c: &ArchimedeanCopula, t: f64| c.h2((-rate * t).exp(), v);
        let at_death = g(upper, d);
        let t_far = -(1e-9f64).ln() / rate;
        if u >= at_death {
            return invert_decreasing(|t| g(upper, t), u, 0.0, d);
        }
        let hi = t_far.max(d);
        match &self.lower {
            None => invert_decreasing(|t| g(upper, t), u, d, hi),
            Some(lower) => {
                let base = g(lower, d);
                let target = u / at_death;
                invert_decreasing(|t| g(lower, t) / base, target, d, hi)
            }
        }
    }

    fn subject(&self, id: String, seed: u64, index: u64) -> (ObservedRecord, LatentTruth) {
        let mut rng = stream_rng(seed, streams::SUBJECTS + index);
        let k = self.thetas.len();
        let death = exp1(&mut rng) / self.terminal_rate;
        let uniforms = match &self.alpha {
            Some(a) => sample_exchangeable_uniforms(a, k, &mut rng),
            None => vec![open_uniform(&mut rng)],
        };
        let censor = self.censor_upper * open_uniform(&mut rng);
        let events: Vec<f64> = (0..k).map(|j| self.event_time(j, uniforms[j], death)).collect();
        let followup = death.min(censor);
        let times: Vec<f64> = events.iter().map(|&t| t.min(followup)).collect();
        let flags: Vec<bool> = events.iter().map(|&t| t <= followup).collect();
        let record = ObservedRecord { id: id.clone(), times, events: flags, followup, death: death <= censor };
        (record, LatentTruth { id, death, events })
    }
}

pub fn simulate_dataset(config: &SimulationConfig) -> Result<SimulatedData, EstimationError> {
    let gen = Generator::new(config)?;
    let total = config.n_train + config.n_test;
    let subjects: Vec<(ObservedRecord, LatentTruth)> = (0..total)
        .into_par_iter()
        .map(|i| gen.subject(format!("{}", i + 1), config.seed, i as u64))
        .collect();
    let (train, test) = subjects.split_at(config.n_train);
    let split = |s: &[(ObservedRecord, LatentTruth)]| {
        let recs: Vec<ObservedRecord> = s.iter().map(|x| x.0.clone()).collect();
        let lat: Vec<LatentTruth> = s.iter().map(|x| x.1.clone()).collect();
        (recs, lat)
    };
    let (train_recs, train_latent) = split(train);
    let (test_recs, test_latent) = split(test);
    let test = if test_recs.is_empty() {
        Dataset::new(train_recs.clone()).map(|d| d.subset(&[]))
    } else {
        Dataset::new(test_recs)
    }?;
    Ok(SimulatedData { train: Dataset::new(train_recs)?, test, train_latent, test_latent })
}

/// Kendall's tau-b between every pair of columns.
pub fn pairwise_kendall(columns: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = columns.len();
    let mut out = vec![vec![1.0; m]; m];
    for a in 0..m {
        for b in 0..a {
            let t = kendall_tau_b(&columns[a], &columns[b]);
            out[a][b] = t;
            out[b][a] = t;
        }
    }
    out
}

fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len());
    let (mut conc, mut disc, mut tx, mut ty) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..n {
        for j in 0..i {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            let sx = if dx == 0.0 || dx.is_nan() { 0.0 } else { dx.signum() };
            let sy = if dy == 0.0 || dy.is_nan() { 0.0 } else { dy.signum() };
            match (sx == 0.0, sy == 0.0) {
                (true, true) => {}
                (true, false) => tx += 1.0,
                (false, true) => ty += 1.0,
                (false, false) => {
                    if sx == sy {
                        conc += 1.0
                    } else {
                        disc += 1.0
                    }
                }
            }
        }
    }
    let denom = ((conc + disc + tx) * (conc + disc + ty)).sqrt();
    if denom == 0.0 {
        f64::NAN
    } else {
        (conc - disc) / denom
    }
}
