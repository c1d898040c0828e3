//! Plug-in ingredients shared by the pseudo-likelihood and the predictors.
//!
//! Both consumers need the pairwise copulas, the intermediate-event marginals and
//! their slopes, and the terminal-event law as a discrete measure (atoms) for
//! Stieltjes sums. [`FittedComponents`] supplies step-function estimates;
//! [`SmoothComponents`] supplies exact exponential margins with known parameters
//! and a fine discretisation of the terminal law.

use crate::copula::ArchimedeanCopula;
use crate::marginal::terminal_value_at_death;
use crate::survival::StepSurvival;

/// One point mass of the terminal-event measure.
///
/// `value` is the terminal survival plugged into the copula at this atom. The tail
/// atom carries the mass not resolved before the horizon and sorts after every time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalAtom {
    pub time: f64,
    pub mass: f64,
    pub value: f64,
    pub tail: bool,
}

impl TerminalAtom {
    /// Whether the atom lies strictly after `t`.
    pub fn after(&self, t: f64) -> bool {
        self.tail || self.time > t
    }
}

pub trait JointComponents: Sync {
    fn num_events(&self) -> usize;
    fn theta_copula(&self, k: usize) -> &ArchimedeanCopula;
    fn marginal_survival(&self, k: usize, t: f64) -> f64;
    /// Derivative (or its step-function surrogate) of the marginal survival.
    fn marginal_slope(&self, k: usize, t: f64) -> f64;
    fn terminal_survival(&self, t: f64) -> f64;
    /// For an observed death at `y`: copula value of the terminal survival and the
    /// terminal mass (jump or density) at `y`.
    fn terminal_at_death(&self, y: f64) -> (f64, f64);
    /// Terminal atoms in increasing time order, tail atom (if any) last.
    fn terminal_atoms(&self) -> &[TerminalAtom];
    /// Largest follow-up time covered by the terminal law.
    fn horizon(&self) -> f64;

    /// `G_k(t_k; t) = H2(S_k(t_k), v)` with `v` the terminal survival at `t`.
    fn conditional_survival(&self, k: usize, t_k: f64, v: f64) -> f64 {
        self.theta_copula(k).h2(self.marginal_survival(k, t_k), v)
    }

    /// `ln(-dG_k/dt_k) = ln H12 + ln(-S_k')`.
    fn ln_neg_conditional_slope(&self, k: usize, t_k: f64, v: f64) -> f64 {
        let slope = self.marginal_slope(k, t_k);
        self.theta_copula(k).ln_h12(self.marginal_survival(k, t_k), v) + (-slope).ln()
    }
}

/// Step-function components from a fitted model.
#[derive(Debug, Clone)]
pub struct FittedComponents {
    pub thetas: Vec<ArchimedeanCopula>,
    pub marginals: Vec<StepSurvival>,
    pub terminal: StepSurvival,
    pub horizon: f64,
    atoms: Vec<TerminalAtom>,
}

impl FittedComponents {
    pub fn new(
        thetas: Vec<ArchimedeanCopula>,
        marginals: Vec<StepSurvival>,
        terminal: StepSurvival,
        horizon: f64,
    ) -> Self {
        assert_eq!(thetas.len(), marginals.len());
        let mut atoms: Vec<TerminalAtom> = terminal
            .atoms()
            .into_iter()
            .map(|(time, mass, value)| TerminalAtom { time, mass, value, tail: false })
            .collect();
        let rest = terminal.last_value();
        if rest > 0.0 {
            atoms.push(TerminalAtom { time: horizon, mass: rest, value: 0.5 * rest, tail: true });
        }
        FittedComponents { thetas, marginals, terminal, horizon, atoms }
    }
}

impl JointComponents for FittedComponents {
    fn num_events(&self) -> usize {
        self.thetas.len()
    }

    fn theta_copula(&self, k: usize) -> &ArchimedeanCopula {
        &self.thetas[k]
    }

    fn marginal_survival(&self, k: usize, t: f64) -> f64 {
        self.marginals[k].value(t)
    }

    fn marginal_slope(&self, k: usize, t: f64) -> f64 {
        self.marginals[k].slope(t)
    }

    fn terminal_survival(&self, t: f64) -> f64 {
        self.terminal.value(t)
    }

    fn terminal_at_death(&self, y: f64) -> (f64, f64) {
        (terminal_value_at_death(&self.terminal, y), self.terminal.jump_at(y))
    }

    fn terminal_atoms(&self) -> &[TerminalAtom] {
        &self.atoms
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Exponential margins with known rates and a midpoint discretisation of the
/// terminal law on `[0, horizon]`.
#[derive(Debug, Clone)]
pub struct SmoothComponents {
    pub thetas: Vec<ArchimedeanCopula>,
    pub rates: Vec<f64>,
    pub terminal_rate: f64,
    pub horizon: f64,
    atoms: Vec<TerminalAtom>,
}

impl SmoothComponents {
    pub fn new(
        thetas: Vec<ArchimedeanCopula>,
        rates: Vec<f64>,
        terminal_rate: f64,
        horizon: f64,
        cells: usize,
    ) -> Self {
        assert_eq!(thetas.len(), rates.len());
        let s = |t: f64| (-terminal_rate * t).exp();
        let h = horizon / cells as f64;
        let mut atoms: Vec<TerminalAtom> = (0..cells)
            .map(|i| {
                let a = i as f64 * h;
                let b = a + h;
                let mid = a + 0.5 * h;
                TerminalAtom { time: mid, mass: s(a) - s(b), value: s(mid), tail: false }
            })
            .collect();
        let rest = s(horizon);
        atoms.push(TerminalAtom { time: horizon, mass: rest, value: 0.5 * rest, tail: true });
        SmoothComponents { thetas, rates, terminal_rate, horizon, atoms }
    }
}

impl JointComponents for SmoothComponents {
    fn num_events(&self) -> usize {
        self.thetas.len()
    }

    fn theta_copula(&self, k: usize) -> &ArchimedeanCopula {
        &self.thetas[k]
    }

    fn marginal_survival(&self, k: usize, t: f64) -> f64 {
        (-self.rates[k] * t).exp()
    }

    fn marginal_slope(&self, k: usize, t: f64) -> f64 {
        -self.rates[k] * (-self.rates[k] * t).exp()
    }

    fn terminal_survival(&self, t: f64) -> f64 {
        (-self.terminal_rate * t).exp()
    }

    fn terminal_at_death(&self, y: f64) -> (f64, f64) {
        let s = self.terminal_survival(y);
        (s, self.terminal_rate * s)
    }

    fn terminal_atoms(&self) -> &[TerminalAtom] {
        &self.atoms
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copula::Family;

    #[test]
    fn fitted_atoms_add_up_to_one() {
        let terminal = StepSurvival::new(vec![1.0, 2.0], vec![0.7, 0.4], 3.0);
        let c = ArchimedeanCopula::from_tau(Family::Frank, 0.3).unwrap();
        let m = StepSurvival::new(vec![0.5], vec![0.5], 3.0);
        let comp = FittedComponents::new(vec![c], vec![m], terminal, 3.0);
        let total: f64 = comp.terminal_atoms().iter().map(|a| a.mass).sum();
        assert!((total - 1.0).abs() < 1e-15);
        let tail = comp.terminal_atoms().last().unwrap();
        assert!(tail.tail && tail.after(3.0) && (tail.mass - 0.4).abs() < 1e-15);
    }

    #[test]
    fn conditional_survival_bounds() {
        let c = ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap();
        let comp = SmoothComponents::new(vec![c], vec![1.0], 0.6, 20.0, 100);
        // G(0; t) = 1 and G decreases in t_k
        assert!((comp.conditional_survival(0, 0.0, 0.5) - 1.0).abs() < 1e-9);
        let a = comp.conditional_survival(0, 0.5, 0.5);
        let b = comp.conditional_survival(0, 1.0, 0.5);
        assert!(b < a && a < 1.0);
        // slope matches a finite difference of G
        let h = 1e-6;
        let fd = (comp.conditional_survival(0, 0.7 + h, 0.5) - comp.conditional_survival(0, 0.7 - h, 0.5)) / (2.0 * h);
        let an = -comp.ln_neg_conditional_slope(0, 0.7, 0.5).exp();
        assert!((fd - an).abs() < 1e-7);
    }
}
