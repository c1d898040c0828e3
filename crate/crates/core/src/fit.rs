//! Two-stage fit of the joint model and its bootstrap.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::components::FittedComponents;
use crate::copula::{ArchimedeanCopula, Family};
use crate::error::EstimationError;
use crate::likelihood::{maximize_alpha, AlphaEstimate, AlphaSettings, LikelihoodWorkspace};
use crate::marginal::{
    self_consistent_marginal, solve_theta, PairWeight, PairwiseAssociation, RootStatus,
    SelfConsistencyOptions,
};
use crate::record::Dataset;
use crate::rng::{stream_rng, streams};
use crate::survival::{interpolated_quantile, kaplan_meier, StepSurvival};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FitSettings {
    pub weight: PairWeight,
    pub self_consistency: SelfConsistencyOptions,
    pub alpha: AlphaSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalSummary {
    pub survival: StepSurvival,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct FitDiagnostics {
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileInterval {
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub replicates: usize,
    pub failed: usize,
    pub tau_alpha: Option<PercentileInterval>,
    pub tau_thetas: Vec<PercentileInterval>,
    /// One entry per successful replicate.
    pub draws: Vec<BootstrapDraw>,
}

/// Kendall's tau estimates of one bootstrap replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDraw {
    pub tau_alpha: Option<f64>,
    pub tau_thetas: Vec<f64>,
}

/// Everything needed to predict: copula parameters, step-function marginals and
/// the terminal and censoring Kaplan-Meier curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedJointModel {
    pub family: Family,
    pub num_events: usize,
    pub num_subjects: usize,
    pub alpha: Option<AlphaEstimate>,
    pub associations: Vec<PairwiseAssociation>,
    pub marginals: Vec<MarginalSummary>,
    pub terminal: StepSurvival,
    pub censoring: StepSurvival,
    /// Largest follow-up time in the training data.
    pub horizon: f64,
    pub loglik: f64,
    pub aic: f64,
    pub settings: FitSettings,
    pub diagnostics: FitDiagnostics,
    pub bootstrap: Option<BootstrapSummary>,
}

impl FittedJointModel {
    pub fn alpha_copula(&self) -> Option<ArchimedeanCopula> {
        self.alpha.as_ref().map(|a| {
            ArchimedeanCopula::new(self.family, a.theta).expect("validated during fitting")
        })
    }

    pub fn theta_copulas(&self) -> Vec<ArchimedeanCopula> {
        self.associations
            .iter()
            .map(|a| ArchimedeanCopula::new(self.family, a.theta).expect("validated during fitting"))
            .collect()
    }

    pub fn components(&self) -> FittedComponents {
        FittedComponents::new(
            self.theta_copulas(),
            self.marginals.iter().map(|m| m.survival.clone()).collect(),
            self.terminal.clone(),
            self.horizon,
        )
    }

    pub fn num_parameters(&self) -> usize {
        self.num_events + usize::from(self.alpha.is_some())
    }
}

pub fn aic(loglik: f64, num_parameters: usize) -> f64 {
    -2.0 * loglik + 2.0 * num_parameters as f64
}

/// Fits the joint model: Kaplan-Meier curves, pairwise associations by the
/// concordance equation, self-consistent marginals, then the association among
/// intermediate events by pseudo-likelihood (only when there are at least two).
pub fn fit_joint_model(
    data: &Dataset,
    family: Family,
    settings: &FitSettings,
) -> Result<FittedJointModel, EstimationError> {
    let y = data.followups();
    let deaths = data.deaths();
    let terminal = kaplan_meier(&y, &deaths);
    let alive: Vec<bool> = deaths.iter().map(|d| !d).collect();
    let censoring = kaplan_meier(&y, &alive);
    let horizon = data.horizon();
    let mut diagnostics = FitDiagnostics::default();

    let k = data.num_events();
    let mut associations = Vec::with_capacity(k);
    for j in 0..k {
        let a = solve_theta(data, j, family, settings.weight, &censoring)?;
        if a.status != RootStatus::Interior {
            diagnostics.warnings.push(format!(
                "event {}: concordance equation has no sign change, tau set to {:?} bound {}",
                j + 1,
                a.status,
                a.tau
            ));
        }
        associations.push(a);
    }

    let mut marginals = Vec::with_capacity(k);
    for (j, a) in associations.iter().enumerate() {
        let c = ArchimedeanCopula::new(family, a.theta)?;
        let fit = self_consistent_marginal(data, j, &c, &terminal, &settings.self_consistency);
        if !fit.converged {
            diagnostics.warnings.push(format!(
                "event {}: self-consistency stopped after {} iterations (change {:.2e})",
                j + 1,
                fit.iterations,
                fit.change
            ));
        }
        marginals.push(MarginalSummary {
            survival: fit.survival,
            iterations: fit.iterations,
            converged: fit.converged,
        });
    }

    let mut model = FittedJointModel {
        family,
        num_events: k,
        num_subjects: data.len(),
        alpha: None,
        associations,
        marginals,
        terminal,
        censoring,
        horizon,
        loglik: f64::NAN,
        aic: f64::NAN,
        settings: *settings,
        diagnostics,
        bootstrap: None,
    };
    let components = model.components();
    let workspace = LikelihoodWorkspace::new(&components, data);
    let loglik = if k >= 2 {
        let est = maximize_alpha(&workspace, family, &settings.alpha)?;
        if est.at_boundary {
            model.diagnostics.warnings.push(format!("alpha estimate at search bound (tau = {:.4})", est.tau));
        }
        let ll = est.loglik;
        let skipped = est.skipped_records;
        model.alpha = Some(est);
        if skipped > 0 {
            model.diagnostics.warnings.push(format!("{skipped} records with non-finite likelihood skipped"));
        }
        ll
    } else {
        // a single intermediate event leaves the association copula vacuous
        let indep = ArchimedeanCopula::independence(Family::Gumbel);
        workspace.profile_loglik(&indep, settings.alpha.method, None).loglik
    };
    model.loglik = loglik;
    model.aic = aic(loglik, model.num_parameters());
    Ok(model)
}

/// Indices of a bootstrap resample; replicate `b` draws from its own stream.
pub fn resample_indices(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = stream_rng(seed, streams::BOOTSTRAP + b as u64);
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Nonparametric bootstrap of the association parameters on the Kendall scale,
/// with 2.5% / 97.5% percentile intervals. Fails when more than 20% of the
/// replicates fail.
pub fn bootstrap(
    data: &Dataset,
    family: Family,
    settings: &FitSettings,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapSummary, EstimationError> {
    bootstrap_with(data, family, settings, replicates, |b| resample_indices(data.len(), seed, b))
}

/// Bootstrap with an explicit resampling rule (used to test the identity resample).
pub fn bootstrap_with(
    data: &Dataset,
    family: Family,
    settings: &FitSettings,
    replicates: usize,
    resample: impl Fn(usize) -> Vec<usize> + Sync,
) -> Result<BootstrapSummary, EstimationError> {
    let results: Vec<Option<BootstrapDraw>> = (0..replicates)
        .into_par_iter()
        .map(|b| {
            let sub = data.subset(&resample(b));
            fit_joint_model(&sub, family, settings).ok().map(|m| BootstrapDraw {
                tau_alpha: m.alpha.as_ref().map(|a| a.tau),
                tau_thetas: m.associations.iter().map(|a| a.tau).collect(),
            })
        })
        .collect();
    let failed = results.iter().filter(|r| r.is_none()).count();
    if failed * 5 > replicates {
        return Err(EstimationError::BootstrapFailure { failed, total: replicates });
    }
    let draws: Vec<BootstrapDraw> = results.into_iter().flatten().collect();
    let interval = |xs: Vec<f64>| {
        (!xs.is_empty()).then(|| PercentileInterval {
            lower: interpolated_quantile(&xs, 0.025),
            upper: interpolated_quantile(&xs, 0.975),
        })
    };
    let k = data.num_events();
    Ok(BootstrapSummary {
        replicates,
        failed,
        tau_alpha: interval(draws.iter().filter_map(|d| d.tau_alpha).collect()),
        tau_thetas: (0..k).filter_map(|j| interval(draws.iter().map(|d| d.tau_thetas[j]).collect())).collect(),
        draws,
    })
}
