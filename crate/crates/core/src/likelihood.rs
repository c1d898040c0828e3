//! Pseudo-likelihood for the association among intermediate events.
//!
//! With the pairwise copulas and all marginals fixed at their stage-one
//! estimates, the contribution of a subject whose death is observed is
//!
//! ```text
//! dS_D(Y) |psi^{(d)}(sum_k phi(G_k))| prod_{observed k} (-phi'(G_k)) (-G_k')
//! ```
//!
//! with `G_k = G_k(T_k; Y)` and `d` the number of observed intermediate events.
//! A subject still alive at `Y` contributes a Stieltjes sum over terminal atoms
//! after `Y`. For each subset `s` of its censored events, the events in `s`
//! happen in `(Y, t]` and the rest after `t`; the subset terms are expectations
//! over the frailty and are evaluated by Monte Carlo with common draws
//! ([`LikelihoodMethod::FrailtyMc`]). The subsets partition the event "censored
//! events later than `Y`", so their sum equals
//!
//! ```text
//! sum_t dS_D(t) prod_{observed k} (-phi'(G_k)) (-G_k') |psi^{(d)}(sum_obs phi(G_k(T_k; t)) + sum_cens phi(G_k(Y; t)))|
//! ```
//!
//! which [`LikelihoodMethod::Exact`] evaluates in closed form.

use serde::{Deserialize, Serialize};

use crate::components::{JointComponents, TerminalAtom};
use crate::copula::{
    log_sum_exp, theta_from_tau, ArchimedeanCopula, Family, FrailtyBase, FrailtySample,
};
use crate::error::EstimationError;
use crate::optimize::brent_minimize;
use crate::record::{Dataset, ObservedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMethod {
    #[default]
    Exact,
    FrailtyMc,
}

/// Copula evaluations at one terminal atom for one alive subject.
#[derive(Debug, Clone)]
struct AtomTerms {
    /// `ln mass + sum_obs ln(-G_k')`.
    ln_const: f64,
    g_obs: Vec<f64>,
    /// `G_k(Y; t)` for censored events.
    g_at_followup: Vec<f64>,
    /// `G_k(t; t)` for censored events.
    g_at_atom: Vec<f64>,
}

#[derive(Debug, Clone)]
enum RecordTerms {
    Death { d: usize, ln_const: f64, g_obs: Vec<f64>, g_cens: Vec<f64> },
    Alive { d: usize, atoms: Vec<AtomTerms> },
}

fn death_terms<C: JointComponents + ?Sized>(comp: &C, rec: &ObservedRecord) -> RecordTerms {
    let (v, mass) = comp.terminal_at_death(rec.followup);
    let mut ln_const = mass.ln();
    let mut g_obs = Vec::new();
    let mut g_cens = Vec::new();
    for k in 0..rec.num_events() {
        let g = comp.conditional_survival(k, rec.times[k], v);
        if rec.events[k] {
            ln_const += comp.ln_neg_conditional_slope(k, rec.times[k], v);
            g_obs.push(g);
        } else {
            g_cens.push(g);
        }
    }
    RecordTerms::Death { d: g_obs.len(), ln_const, g_obs, g_cens }
}

fn atom_terms<C: JointComponents + ?Sized>(comp: &C, rec: &ObservedRecord, atom: &TerminalAtom) -> AtomTerms {
    let v = atom.value;
    let mut ln_const = atom.mass.ln();
    let mut g_obs = Vec::new();
    let mut g_at_followup = Vec::new();
    let mut g_at_atom = Vec::new();
    for k in 0..rec.num_events() {
        if rec.events[k] {
            ln_const += comp.ln_neg_conditional_slope(k, rec.times[k], v);
            g_obs.push(comp.conditional_survival(k, rec.times[k], v));
        } else {
            g_at_followup.push(comp.conditional_survival(k, rec.followup, v));
            g_at_atom.push(comp.conditional_survival(k, atom.time.max(rec.followup), v));
        }
    }
    AtomTerms { ln_const, g_obs, g_at_followup, g_at_atom }
}

fn record_terms<C: JointComponents + ?Sized>(comp: &C, rec: &ObservedRecord) -> RecordTerms {
    if rec.death {
        death_terms(comp, rec)
    } else {
        let atoms = comp
            .terminal_atoms()
            .iter()
            .filter(|a| a.after(rec.followup))
            .map(|a| atom_terms(comp, rec, a))
            .collect();
        RecordTerms::Alive { d: rec.num_observed(), atoms }
    }
}

/// `sum_obs ln(-phi'(G)) + ln|psi^{(d)}(sum phi(G))|`.
fn exact_kernel(alpha: &ArchimedeanCopula, d: usize, g_obs: &[f64], g_rest: &[f64]) -> f64 {
    let mut arg = 0.0;
    let mut ln = 0.0;
    for &g in g_obs {
        arg += alpha.phi(g);
        ln += alpha.ln_neg_phi_d1(g);
    }
    for &g in g_rest {
        arg += alpha.phi(g);
    }
    match alpha.ln_abs_psi_deriv(arg, d) {
        Ok(v) => ln + v,
        Err(_) => f64::NAN,
    }
}

/// Log contribution of a subject with observed death.
pub fn loglik_death_observed<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    rec: &ObservedRecord,
) -> f64 {
    assert!(rec.death, "record must have an observed death");
    match death_terms(comp, rec) {
        RecordTerms::Death { d, ln_const, g_obs, g_cens } => {
            ln_const + exact_kernel(alpha, d, &g_obs, &g_cens)
        }
        RecordTerms::Alive { .. } => unreachable!(),
    }
}

/// Per-draw frailty factors at one atom: `x^d e^{-x sum_obs phi}` and, for each
/// censored event, `e^{-x phi(G(Y; t))}` and `e^{-x phi(G(t; t))}`.
fn frailty_factors(
    alpha: &ArchimedeanCopula,
    x: f64,
    d: usize,
    atom: &AtomTerms,
    ea: &mut Vec<f64>,
    eb: &mut Vec<f64>,
) -> f64 {
    let a: f64 = atom.g_obs.iter().map(|&g| alpha.phi(g)).sum();
    ea.clear();
    eb.clear();
    for (&gy, &gt) in atom.g_at_followup.iter().zip(&atom.g_at_atom) {
        ea.push((-x * alpha.phi(gy)).exp());
        eb.push((-x * alpha.phi(gt)).exp());
    }
    (d as f64 * x.ln() - x * a).exp()
}

/// Integrand of the subset term for `mask` (bit `i` = `i`-th censored event in the subset).
fn subset_product(common: f64, ea: &[f64], eb: &[f64], mask: usize) -> f64 {
    let mut p = common;
    for i in 0..ea.len() {
        if mask >> i & 1 == 1 {
            p *= ea[i] - eb[i];
        } else {
            p *= eb[i];
        }
    }
    p
}

fn atom_prefactor(alpha: &ArchimedeanCopula, atom: &AtomTerms) -> f64 {
    atom.ln_const + atom.g_obs.iter().map(|&g| alpha.ln_neg_phi_d1(g)).sum::<f64>()
}

/// Monte Carlo subset term `J^s` (not logged) for an alive subject.
pub fn j_term<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    rec: &ObservedRecord,
    mask: usize,
    frailty: &FrailtySample,
) -> f64 {
    ln_j_term(comp, alpha, rec, mask, frailty).exp()
}

fn ln_j_term<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    rec: &ObservedRecord,
    mask: usize,
    frailty: &FrailtySample,
) -> f64 {
    assert!(!rec.death, "record must be alive at follow-up");
    let RecordTerms::Alive { d, atoms } = record_terms(comp, rec) else { unreachable!() };
    let n = frailty.values.len() as f64;
    let mut ea = Vec::new();
    let mut eb = Vec::new();
    let terms: Vec<f64> = atoms
        .iter()
        .map(|atom| {
            let mut sum = 0.0;
            for &x in &frailty.values {
                let common = frailty_factors(alpha, x, d, atom, &mut ea, &mut eb);
                sum += subset_product(common, &ea, &eb, mask);
            }
            atom_prefactor(alpha, atom) + (sum / n).max(0.0).ln()
        })
        .collect();
    log_sum_exp(&terms)
}

/// Log contribution of an alive subject, summing every subset term one at a time.
pub fn loglik_alive_by_subsets<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    rec: &ObservedRecord,
    frailty: &FrailtySample,
) -> f64 {
    let c = rec.num_events() - rec.num_observed();
    let per_subset: Vec<f64> =
        (0..1usize << c).map(|mask| ln_j_term(comp, alpha, rec, mask, frailty)).collect();
    log_sum_exp(&per_subset)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
struct AliveOutcome {
    ln: f64,
    negative: bool,
}

fn alive_mc(alpha: &ArchimedeanCopula, d: usize, atoms: &[AtomTerms], frailty: &FrailtySample) -> AliveOutcome {
    let c = atoms.first().map_or(0, |a| a.g_at_followup.len());
    let subsets = 1usize << c;
    let n = frailty.values.len() as f64;
    let mut per_subset = vec![Vec::with_capacity(atoms.len()); subsets];
    let mut sums = vec![0.0; subsets];
    let mut ea = Vec::new();
    let mut eb = Vec::new();
    let mut negative = false;
    for atom in atoms {
        sums.iter_mut().for_each(|s| *s = 0.0);
        for &x in &frailty.values {
            let common = frailty_factors(alpha, x, d, atom, &mut ea, &mut eb);
            for (mask, s) in sums.iter_mut().enumerate() {
                *s += subset_product(common, &ea, &eb, mask);
            }
        }
        let pre = atom_prefactor(alpha, atom);
        for (mask, &s) in sums.iter().enumerate() {
            negative |= s < 0.0;
            per_subset[mask].push(pre + (s / n).max(0.0).ln());
        }
    }
    let totals: Vec<f64> = per_subset.iter().map(|t| log_sum_exp(t)).collect();
    AliveOutcome { ln: log_sum_exp(&totals), negative }
}

fn alive_exact(alpha: &ArchimedeanCopula, d: usize, atoms: &[AtomTerms]) -> f64 {
    let terms: Vec<f64> = atoms
        .iter()
        .map(|a| a.ln_const + exact_kernel(alpha, d, &a.g_obs, &a.g_at_followup))
        .collect();
    log_sum_exp(&terms)
}

/// Log contribution of an alive subject. The Monte Carlo method evaluates all
/// subset terms jointly, sharing the frailty factors across subsets.
pub fn loglik_alive<C: JointComponents + ?Sized>(
    comp: &C,
    alpha: &ArchimedeanCopula,
    rec: &ObservedRecord,
    method: LikelihoodMethod,
    frailty: Option<&FrailtySample>,
) -> f64 {
    assert!(!rec.death, "record must be alive at follow-up");
    let RecordTerms::Alive { d, atoms } = record_terms(comp, rec) else { unreachable!() };
    match method {
        LikelihoodMethod::Exact => alive_exact(alpha, d, &atoms),
        LikelihoodMethod::FrailtyMc => {
            alive_mc(alpha, d, &atoms, frailty.expect("frailty draws required")).ln
        }
    }
}

/// Alpha-free copula evaluations for every record of a dataset.
#[derive(Debug, Clone)]
pub struct LikelihoodWorkspace {
    records: Vec<RecordTerms>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileValue {
    pub loglik: f64,
    /// Records with a non-finite contribution, left out of `loglik`.
    pub skipped: usize,
    /// Records where a Monte Carlo subset term came out negative.
    pub negative: usize,
}

impl LikelihoodWorkspace {
    pub fn new<C: JointComponents + ?Sized>(comp: &C, data: &Dataset) -> Self {
        LikelihoodWorkspace { records: data.records().iter().map(|r| record_terms(comp, r)).collect() }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn profile_loglik(
        &self,
        alpha: &ArchimedeanCopula,
        method: LikelihoodMethod,
        frailty: Option<&FrailtySample>,
    ) -> ProfileValue {
        let mut out = ProfileValue { loglik: 0.0, skipped: 0, negative: 0 };
        for terms in &self.records {
            let ln = match terms {
                RecordTerms::Death { d, ln_const, g_obs, g_cens } => {
                    ln_const + exact_kernel(alpha, *d, g_obs, g_cens)
                }
                RecordTerms::Alive { d, atoms } => match method {
                    LikelihoodMethod::Exact => alive_exact(alpha, *d, atoms),
                    LikelihoodMethod::FrailtyMc => {
                        let o = alive_mc(alpha, *d, atoms, frailty.expect("frailty draws required"));
                        out.negative += o.negative as usize;
                        o.ln
                    }
                },
            };
            if ln.is_finite() {
                out.loglik += ln;
            } else {
                out.skipped += 1;
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSettings {
    pub method: LikelihoodMethod,
    pub mc_draws: usize,
    pub mc_seed: u64,
    pub tau_lower: f64,
    pub tau_upper: f64,
    pub tol: f64,
    /// Points of the coarse scan that brackets the Brent search.
    pub scan_points: usize,
}

impl Default for AlphaSettings {
    fn default() -> Self {
        AlphaSettings {
            method: LikelihoodMethod::Exact,
            mc_draws: 500,
            mc_seed: 1,
            tau_lower: 0.01,
            tau_upper: 0.95,
            tol: 1e-4,
            scan_points: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub theta: f64,
    pub tau: f64,
    pub loglik: f64,
    pub at_boundary: bool,
    pub evaluations: usize,
    pub skipped_records: usize,
    pub negative_contributions: usize,
}

/// Profile objective on the Kendall scale.
pub struct AlphaProfile<'a> {
    workspace: &'a LikelihoodWorkspace,
    family: Family,
    method: LikelihoodMethod,
    base: Option<FrailtyBase>,
}

impl<'a> AlphaProfile<'a> {
    pub fn new(workspace: &'a LikelihoodWorkspace, family: Family, settings: &AlphaSettings) -> Self {
        let base = match settings.method {
            LikelihoodMethod::Exact => None,
            LikelihoodMethod::FrailtyMc => Some(FrailtyBase::new(settings.mc_draws, settings.mc_seed)),
        };
        AlphaProfile { workspace, family, method: settings.method, base }
    }

    pub fn at_tau(&self, tau: f64) -> Result<ProfileValue, EstimationError> {
        let alpha = ArchimedeanCopula::new(self.family, theta_from_tau(self.family, tau)?)?;
        let frailty = self.base.as_ref().map(|b| b.realize(&alpha));
        Ok(self.workspace.profile_loglik(&alpha, self.method, frailty.as_ref()))
    }
}

/// Maximises the profile pseudo-likelihood over the association parameter.
pub fn maximize_alpha(
    workspace: &LikelihoodWorkspace,
    family: Family,
    settings: &AlphaSettings,
) -> Result<AlphaEstimate, EstimationError> {
    let (lo, hi) = (settings.tau_lower, settings.tau_upper);
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(EstimationError::InvalidSetting(format!("alpha tau bounds [{lo}, {hi}]")));
    }
    let profile = AlphaProfile::new(workspace, family, settings);
    let objective = |tau: f64| profile.at_tau(tau).map(|p| -p.loglik).unwrap_or(f64::INFINITY);

    let m = settings.scan_points.max(3);
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let values: Vec<f64> = grid.iter().map(|&t| objective(t)).collect();
    let best = (0..m)
        .filter(|&i| values[i].is_finite())
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .ok_or(EstimationError::NonFiniteLikelihood)?;
    let a = grid[best.saturating_sub(1)];
    let b = grid[(best + 1).min(m - 1)];
    let found = brent_minimize(objective, a, b, settings.tol);
    let (tau, evaluations) = if found.fx <= values[best] {
        (found.x, found.evaluations + m)
    } else {
        (grid[best], found.evaluations + m)
    };
    let value = profile.at_tau(tau)?;
    let at_boundary = tau - lo < 2.0 * settings.tol || hi - tau < 2.0 * settings.tol;
    Ok(AlphaEstimate {
        theta: theta_from_tau(family, tau)?,
        tau,
        loglik: value.loglik,
        at_boundary,
        evaluations: evaluations + 1,
        skipped_records: value.skipped,
        negative_contributions: value.negative,
    })
}
