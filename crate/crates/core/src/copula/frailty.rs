//! Frailty laws whose Laplace transform is the inverse generator.
//!
//! Clayton: gamma(1/theta, scale theta). Gumbel: positive stable of index
//! 1/theta (Kanter's representation). Frank: logarithmic series on {1, 2, ...}
//! with parameter 1 - e^{-theta} (Kemp's algorithm). Every law is realised as a
//! deterministic map of two open uniforms so that a fixed base of uniforms gives
//! common random numbers across parameter values.

use std::f64::consts::PI;

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Gamma};

use super::{ArchimedeanCopula, Family, MAX_DERIVATIVE_ORDER};
use crate::error::CopulaError;
use crate::rng::{exp1, open_uniform, stream_rng};

/// Frailty value for the uniform pair `(u1, u2)`, both in (0, 1).
pub fn frailty_from_uniforms(copula: &ArchimedeanCopula, u1: f64, u2: f64) -> f64 {
    let th = copula.theta();
    match copula.family() {
        Family::Clayton => {
            let g = Gamma::new(1.0 / th, 1.0 / th).expect("positive shape and rate");
            g.inverse_cdf(u1).max(f64::MIN_POSITIVE)
        }
        Family::Gumbel => {
            let a = 1.0 / th;
            if a >= 1.0 {
                return 1.0;
            }
            let w = PI * u1;
            let e = -u2.ln();
            let lead = (a * w).sin() / w.sin().powf(1.0 / a);
            lead * ((1.0 - a) * w).sin().powf((1.0 - a) / a) * e.powf(-(1.0 - a) / a)
        }
        Family::Frank => {
            assert!(th > 0.0, "Frank frailty requires positive theta");
            let p = -(-th).exp_m1();
            if u2 > p {
                return 1.0;
            }
            // q = 1 - (1 - p)^{u1}
            let q = -(-th * u1).exp_m1();
            if u2 < q * q {
                let ln_q = q.ln();
                if ln_q == 0.0 {
                    return f64::MAX;
                }
                (1.0 + u2.ln() / ln_q).floor()
            } else if u2 > q {
                1.0
            } else {
                2.0
            }
        }
    }
}

pub fn sample_frailty<R: Rng + ?Sized>(copula: &ArchimedeanCopula, rng: &mut R) -> f64 {
    let u1 = open_uniform(rng);
    let u2 = open_uniform(rng);
    frailty_from_uniforms(copula, u1, u2)
}

/// Exchangeable uniforms `psi(E_k / V)` with a shared frailty `V`.
pub fn sample_exchangeable_uniforms<R: Rng + ?Sized>(
    copula: &ArchimedeanCopula,
    k: usize,
    rng: &mut R,
) -> Vec<f64> {
    let v = sample_frailty(copula, rng);
    (0..k).map(|_| copula.psi(exp1(rng) / v)).collect()
}

/// Fixed uniform pairs reused for every association parameter within one fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FrailtyBase {
    pairs: Vec<(f64, f64)>,
}

impl FrailtyBase {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut rng = stream_rng(seed, crate::rng::streams::FRAILTY_BASE);
        let pairs = (0..n).map(|_| (open_uniform(&mut rng), open_uniform(&mut rng))).collect();
        FrailtyBase { pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn realize(&self, copula: &ArchimedeanCopula) -> FrailtySample {
        FrailtySample {
            values: self.pairs.iter().map(|&(a, b)| frailty_from_uniforms(copula, a, b)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrailtySample {
    pub values: Vec<f64>,
}

impl FrailtySample {
    /// Monte Carlo `psi^{(d)}(t) = E[(-V)^d e^{-t V}]`.
    pub fn psi_deriv(&self, t: f64, d: usize) -> Result<f64, CopulaError> {
        if d > MAX_DERIVATIVE_ORDER {
            return Err(CopulaError::UnsupportedOrder { order: d, max: MAX_DERIVATIVE_ORDER });
        }
        let sign = if d % 2 == 0 { 1.0 } else { -1.0 };
        let sum: f64 = self.values.iter().map(|&v| v.powi(d as i32) * (-t * v).exp()).sum();
        Ok(sign * sum / self.values.len() as f64)
    }
}
