use std::f64::consts::PI;

use super::Family;
use crate::error::CopulaError;

/// Kendall's tau implied by `theta`.
pub fn tau_from_theta(family: Family, theta: f64) -> Result<f64, CopulaError> {
    if !family.accepts(theta) {
        return Err(CopulaError::InvalidParameter { family: family.name(), theta });
    }
    Ok(match family {
        Family::Clayton => theta / (theta + 2.0),
        Family::Gumbel => 1.0 - 1.0 / theta,
        Family::Frank => theta.signum() * frank_tau(theta.abs()),
    })
}

/// Parameter with Kendall's tau equal to `tau`; inverse of [`tau_from_theta`].
pub fn theta_from_tau(family: Family, tau: f64) -> Result<f64, CopulaError> {
    let invalid = CopulaError::InvalidTau { family: family.name(), tau };
    if !tau.is_finite() || tau >= 1.0 {
        return Err(invalid);
    }
    match family {
        Family::Clayton if tau > 0.0 => Ok(2.0 * tau / (1.0 - tau)),
        Family::Gumbel if tau >= 0.0 => Ok(1.0 / (1.0 - tau)),
        Family::Frank if tau != 0.0 && tau > -1.0 => {
            Ok(tau.signum() * invert_frank(tau.abs()))
        }
        _ => Err(invalid),
    }
}

fn frank_tau(theta: f64) -> f64 {
    if theta < 1e-4 {
        theta / 9.0 - theta.powi(3) / 900.0
    } else {
        1.0 + 4.0 * (debye1(theta) - 1.0) / theta
    }
}

fn invert_frank(tau: f64) -> f64 {
    let mut hi = 1.0;
    while frank_tau(hi) < tau {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if frank_tau(mid) < tau {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

// Bernoulli numbers B_0..B_20 with B_1 = -1/2.
const BERNOULLI: [f64; 21] = [
    1.0,
    -0.5,
    1.0 / 6.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    1.0 / 42.0,
    0.0,
    -1.0 / 30.0,
    0.0,
    5.0 / 66.0,
    0.0,
    -691.0 / 2730.0,
    0.0,
    7.0 / 6.0,
    0.0,
    -3617.0 / 510.0,
    0.0,
    43867.0 / 798.0,
    0.0,
    -174611.0 / 330.0,
];

/// Debye function of order one, `x^{-1} int_0^x t / (e^t - 1) dt`, for `x > 0`.
pub fn debye1(x: f64) -> f64 {
    if x < 2.0 {
        // sum_n B_n x^n / (n + 1)!
        let mut term_scale = 1.0; // x^n / (n+1)!
        let mut sum = 0.0;
        for (n, b) in BERNOULLI.iter().enumerate() {
            if n > 0 {
                term_scale *= x / (n as f64 + 1.0);
            }
            sum += b * term_scale;
        }
        sum
    } else {
        let mut tail = 0.0;
        let mut k = 1.0;
        loop {
            let e = (-k * x).exp();
            let term = e * (x / k + 1.0 / (k * k));
            tail += term;
            if term < 1e-18 * (PI * PI / 6.0) {
                break;
            }
            k += 1.0;
        }
        (PI * PI / 6.0 - tail) / x
    }
}
