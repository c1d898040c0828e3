//! Stage-one estimation: terminal and censoring Kaplan-Meier curves, pairwise
//! association parameters, and copula-adjusted intermediate-event marginals.

mod concordance;
mod self_consistency;

pub use concordance::{
    solve_theta, ConcordanceEquation, PairWeight, PairwiseAssociation, RootStatus, TAU_BRACKET,
};
pub use self_consistency::{
    self_consistent_marginal, terminal_value_at_death, MarginalFit, SelfConsistencyOptions,
};
