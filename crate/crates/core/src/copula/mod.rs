//! One-parameter Archimedean copulas (Frank, Clayton, Gumbel).
//!
//! Convention: `phi` is the generator, `psi = phi^{-1}` is completely monotone
//! for the parameter ranges accepted by [`ArchimedeanCopula::new`] (Frank also
//! admits negative dependence, where `psi` is only a valid 2-copula generator).
//! All probabilities entering the generator are clamped below at [`PROB_FLOOR`].

mod frailty;
mod kendall;

pub use frailty::{
    frailty_from_uniforms, sample_exchangeable_uniforms, sample_frailty, FrailtyBase,
    FrailtySample,
};
pub use kendall::{debye1, tau_from_theta, theta_from_tau};

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::CopulaError;

/// Lower clamp applied to probabilities before they enter a generator.
pub const PROB_FLOOR: f64 = 1e-12;

/// Highest derivative order of `psi` that [`ArchimedeanCopula::psi_deriv`] supports.
pub const MAX_DERIVATIVE_ORDER: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Frank,
    Clayton,
    Gumbel,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::Frank, Family::Clayton, Family::Gumbel];

    pub fn name(self) -> &'static str {
        match self {
            Family::Frank => "frank",
            Family::Clayton => "clayton",
            Family::Gumbel => "gumbel",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        match s.to_ascii_lowercase().as_str() {
            "frank" => Some(Family::Frank),
            "clayton" => Some(Family::Clayton),
            "gumbel" => Some(Family::Gumbel),
            _ => None,
        }
    }

    /// Whether `theta` lies in the admissible parameter range.
    pub fn accepts(self, theta: f64) -> bool {
        if !theta.is_finite() {
            return false;
        }
        match self {
            Family::Frank => theta != 0.0,
            Family::Clayton => theta > 0.0,
            Family::Gumbel => theta >= 1.0,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// First and mixed partial derivatives of `H(u, v) = psi(phi(u) + phi(v))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partials {
    pub h: f64,
    /// dH/du, in [0, 1].
    pub h1: f64,
    /// dH/dv, in [0, 1].
    pub h2: f64,
    /// d2H/(du dv), non-negative for positive dependence.
    pub h12: f64,
    /// Set when an argument had to be clamped into [PROB_FLOOR, 1 - PROB_FLOOR].
    pub clamped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArchimedeanCopula {
    family: Family,
    theta: f64,
}

impl ArchimedeanCopula {
    pub fn new(family: Family, theta: f64) -> Result<Self, CopulaError> {
        if !family.accepts(theta) {
            return Err(CopulaError::InvalidParameter { family: family.name(), theta });
        }
        Ok(ArchimedeanCopula { family, theta })
    }

    pub fn from_tau(family: Family, tau: f64) -> Result<Self, CopulaError> {
        let theta = theta_from_tau(family, tau)?;
        ArchimedeanCopula::new(family, theta)
    }

    /// The member of `family` that is (or best approximates) the independence copula.
    pub fn independence(family: Family) -> Self {
        let theta = match family {
            Family::Gumbel => 1.0,
            Family::Frank | Family::Clayton => 1e-9,
        };
        ArchimedeanCopula { family, theta }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn tau(&self) -> f64 {
        tau_from_theta(self.family, self.theta).expect("parameter validated at construction")
    }

    /// Generator `phi(u)`, decreasing from `phi(0+) = inf` to `phi(1) = 0`.
    pub fn phi(&self, u: f64) -> f64 {
        let u = u.max(PROB_FLOOR);
        let th = self.theta;
        match self.family {
            Family::Clayton => (-th * u.ln()).exp_m1() / th,
            Family::Frank if th > 0.0 => ln_one_minus_exp(th) - ln_one_minus_exp(th * u),
            Family::Frank => -((-th * u).exp_m1() / (-th).exp_m1()).ln(),
            Family::Gumbel => (-u.ln()).powf(th),
        }
    }

    /// `ln(-phi'(u))`.
    pub fn ln_neg_phi_d1(&self, u: f64) -> f64 {
        let u = u.max(PROB_FLOOR);
        let th = self.theta;
        match self.family {
            Family::Clayton => -(th + 1.0) * u.ln(),
            Family::Frank => {
                // -phi'(u) = theta / (e^{theta u} - 1), positive for either sign of theta
                if th > 0.0 {
                    th.ln() - ln_expm1(th * u)
                } else {
                    (-th).ln() - (-(th * u).exp_m1()).ln()
                }
            }
            Family::Gumbel => {
                let l = -u.ln();
                th.ln() + (th - 1.0) * l.ln() - u.ln()
            }
        }
    }

    pub fn phi_d1(&self, u: f64) -> f64 {
        -self.ln_neg_phi_d1(u).exp()
    }

    pub fn phi_d2(&self, u: f64) -> f64 {
        let u = u.max(PROB_FLOOR);
        let th = self.theta;
        match self.family {
            Family::Clayton => (1.0 + th) * u.powf(-th - 2.0),
            Family::Frank => th * th / ((th * u).exp_m1() * (-(-th * u).exp_m1())),
            Family::Gumbel => {
                let l = -u.ln();
                th * l.powf(th - 2.0) * ((th - 1.0) + l) / (u * u)
            }
        }
    }

    /// Inverse generator `psi(t)` for `t >= 0`.
    pub fn psi(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        let th = self.theta;
        match self.family {
            Family::Clayton => (-(th * t).ln_1p() / th).exp(),
            Family::Frank if th > 0.0 => -(-(-t).exp_m1() + (-th - t).exp()).ln() / th,
            Family::Frank => {
                let z = frank_c(th) * (-t).exp();
                -(-z).ln_1p() / th
            }
            Family::Gumbel => (-t.powf(1.0 / th)).exp(),
        }
    }

    /// `d^d psi / dt^d` at `t`.
    pub fn psi_deriv(&self, t: f64, d: usize) -> Result<f64, CopulaError> {
        if d == 0 {
            return Ok(self.psi(t));
        }
        let (ln_abs, sign) = self.ln_abs_psi_deriv_signed(t, d)?;
        Ok(sign * ln_abs.exp())
    }

    /// `ln |psi^{(d)}(t)|`; the sign of a completely monotone `psi^{(d)}` is `(-1)^d`.
    pub fn ln_abs_psi_deriv(&self, t: f64, d: usize) -> Result<f64, CopulaError> {
        Ok(self.ln_abs_psi_deriv_signed(t, d)?.0)
    }

    fn ln_abs_psi_deriv_signed(&self, t: f64, d: usize) -> Result<(f64, f64), CopulaError> {
        if d > MAX_DERIVATIVE_ORDER {
            return Err(CopulaError::UnsupportedOrder { order: d, max: MAX_DERIVATIVE_ORDER });
        }
        let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
        if d == 0 {
            let p = self.psi(t);
            return Ok((p.ln(), 1.0));
        }
        let t = t.max(0.0);
        let th = self.theta;
        match self.family {
            Family::Clayton => {
                let mut ln = 0.0;
                for j in 0..d {
                    ln += (1.0 + j as f64 * th).ln();
                }
                ln -= (1.0 / th + d as f64) * (th * t).ln_1p();
                Ok((ln, alt))
            }
            Family::Frank => frank_ln_abs_deriv(th, t, d),
            Family::Gumbel => {
                let t = t.max(f64::MIN_POSITIVE);
                let a = 1.0 / th;
                let x = t.powf(a);
                let coef = gumbel_poly(a, d);
                // (-1)^d P_d(x) has non-negative coefficients
                let mut acc = 0.0;
                for (j, c) in coef.iter().enumerate() {
                    acc += alt * c * x.powi(j as i32);
                }
                Ok((-x - d as f64 * t.ln() + acc.ln(), alt))
            }
        }
    }

    /// Clayton-Oakes cross-ratio `-s phi''(s) / phi'(s)` at joint survival value `s`.
    pub fn cross_ratio(&self, s: f64) -> f64 {
        let s = s.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let th = self.theta;
        match self.family {
            Family::Clayton => 1.0 + th,
            Family::Frank => th * s / (-(-th * s).exp_m1()),
            Family::Gumbel => 1.0 + (th - 1.0) / (-s.ln()),
        }
    }

    /// `H(u, v) = psi(phi(u) + phi(v))`.
    pub fn joint(&self, u: f64, v: f64) -> f64 {
        self.psi(self.phi(u) + self.phi(v))
    }

    pub fn partials(&self, u: f64, v: f64) -> Partials {
        let lo = PROB_FLOOR;
        let hi = 1.0 - PROB_FLOOR;
        let clamped = !(lo..=hi).contains(&u) || !(lo..=hi).contains(&v);
        let u = u.clamp(lo, hi);
        let v = v.clamp(lo, hi);
        let s = self.phi(u) + self.phi(v);
        let lu = self.ln_neg_phi_d1(u);
        let lv = self.ln_neg_phi_d1(v);
        let l1 = self.ln_abs_psi_deriv(s, 1).expect("order 1 supported");
        let l2 = self.ln_abs_psi_deriv(s, 2).expect("order 2 supported");
        Partials {
            h: self.psi(s),
            h1: (l1 + lu).exp().min(1.0),
            h2: (l1 + lv).exp().min(1.0),
            h12: (l2 + lu + lv).exp(),
            clamped,
        }
    }

    /// `dH/dv`, the conditional survival of the first coordinate given the second.
    pub fn h2(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let v = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let s = self.phi(u) + self.phi(v);
        let l1 = self.ln_abs_psi_deriv(s, 1).expect("order 1 supported");
        (l1 + self.ln_neg_phi_d1(v)).exp().min(1.0)
    }

    /// `dH/du`.
    pub fn h1(&self, u: f64, v: f64) -> f64 {
        self.h2(v, u)
    }

    /// `ln d2H/(du dv)`.
    pub fn ln_h12(&self, u: f64, v: f64) -> f64 {
        let u = u.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let v = v.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        let s = self.phi(u) + self.phi(v);
        let l2 = self.ln_abs_psi_deriv(s, 2).expect("order 2 supported");
        l2 + self.ln_neg_phi_d1(u) + self.ln_neg_phi_d1(v)
    }
}

/// `1 - e^{-theta}`; negative for negative `theta`.
fn frank_c(theta: f64) -> f64 {
    -(-theta).exp_m1()
}

/// `ln(1 - e^{-x})` for `x > 0`.
fn ln_one_minus_exp(x: f64) -> f64 {
    if x < std::f64::consts::LN_2 {
        (-(-x).exp_m1()).ln()
    } else {
        (-(-x).exp()).ln_1p()
    }
}

fn ln_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

/// `k! S(n+1, k+1)` for `n, k <= MAX_DERIVATIVE_ORDER`, so that
/// `sum_{j>=1} j^n z^j = sum_k c[n][k] (z / (1 - z))^{k+1}`.
fn polylog_coefficients() -> &'static Vec<Vec<f64>> {
    static TABLE: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let m = MAX_DERIVATIVE_ORDER + 2;
        let mut stirling = vec![vec![0.0f64; m + 1]; m + 1];
        stirling[0][0] = 1.0;
        for n in 1..=m {
            for k in 1..=n {
                stirling[n][k] = k as f64 * stirling[n - 1][k] + stirling[n - 1][k - 1];
            }
        }
        (0..MAX_DERIVATIVE_ORDER)
            .map(|n| {
                let mut fact = 1.0;
                (0..=n)
                    .map(|k| {
                        if k > 0 {
                            fact *= k as f64;
                        }
                        fact * stirling[n + 1][k + 1]
                    })
                    .collect()
            })
            .collect()
    })
}

/// Frank: `psi^{(d)}(t) = (-1)^d / theta * sum_j j^{d-1} z^j` with `z = (1 - e^{-theta}) e^{-t}`.
fn frank_ln_abs_deriv(theta: f64, t: f64, d: usize) -> Result<(f64, f64), CopulaError> {
    let alt = if d % 2 == 0 { 1.0 } else { -1.0 };
    let coef = &polylog_coefficients()[d - 1];
    if theta > 0.0 {
        // 1 - z = (1 - e^{-t}) + e^{-theta - t}, kept exact near t = 0
        let one_minus_z = -(-t).exp_m1() + (-theta - t).exp();
        let ln_z = (-(-theta).exp_m1()).ln() - t;
        let ln_w = ln_z - one_minus_z.ln();
        let terms: Vec<f64> = coef
            .iter()
            .enumerate()
            .map(|(k, c)| c.ln() + (k as f64 + 1.0) * ln_w)
            .collect();
        Ok((log_sum_exp(&terms) - theta.ln(), alt))
    } else {
        let z = frank_c(theta) * (-t).exp();
        let w = z / (1.0 - z);
        let mut acc = 0.0;
        let mut wp = w;
        for c in coef {
            acc += c * wp;
            wp *= w;
        }
        let val = alt * acc / theta;
        Ok((val.abs().ln(), val.signum()))
    }
}

/// Coefficients of `P_d` in `psi^{(d)}(t) = e^{-x} t^{-d} P_d(x)`, `x = t^a`, for the
/// Gumbel inverse generator `exp(-t^a)`. `P_{n+1} = a x P_n' - (a x + n) P_n`.
fn gumbel_poly(a: f64, d: usize) -> Vec<f64> {
    let mut p = vec![1.0];
    for n in 0..d {
        let mut next = vec![0.0; p.len() + 1];
        for (j, &c) in p.iter().enumerate() {
            // a x P' contributes a j c x^j; -(a x + n) P contributes -a c x^{j+1} - n c x^j
            next[j] += a * j as f64 * c - n as f64 * c;
            next[j + 1] -= a * c;
        }
        p = next;
    }
    p
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
