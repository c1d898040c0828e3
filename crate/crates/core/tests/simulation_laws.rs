//! Distributional checks of the generator against its defining laws.

use dynsurv::copula::{ArchimedeanCopula, Family};
use dynsurv::simulation::{pairwise_kendall, simulate_dataset, Scenario, SimulatedData, SimulationConfig};

/// One-sample Kolmogorov-Smirnov statistic against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Critical value of the KS statistic at level 0.01.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn simulate(scenario: Scenario, k: usize, censor_upper: f64, n: usize, seed: u64) -> SimulatedData {
    let mut c = SimulationConfig::preset(scenario, k, 0.5, censor_upper, n, seed);
    c.n_test = 0;
    simulate_dataset(&c).unwrap()
}

#[test]
fn terminal_censoring_rates() {
    // P(C < D) for D ~ Exp(0.6), C ~ U[0, c] is (1 - e^{-0.6c}) / (0.6c)
    for (c, analytic) in [(20.0, 0.0833), (5.0, 0.3167)] {
        let sim = simulate(Scenario::Ex1, 1, c, 100_000, 1);
        let rate = sim.train.deaths().iter().filter(|d| !**d).count() as f64 / 1e5;
        assert!((rate - analytic).abs() < 0.005, "censor_upper {c}: {rate}");
    }
}

#[test]
fn latent_event_times_keep_their_margins() {
    let sim = simulate(Scenario::Ex1, 3, 20.0, 100_000, 2);
    for k in 0..3 {
        let t: Vec<f64> = sim.train_latent.iter().map(|l| l.events[k]).collect();
        let d = ks(t, |x| 1.0 - (-x).exp());
        assert!(d < ks_critical(100_000), "event {k}: KS {d}");
    }
    let d: Vec<f64> = sim.train_latent.iter().map(|l| l.death).collect();
    assert!(ks(d, |x| 1.0 - (-0.6 * x).exp()) < ks_critical(100_000));
}

#[test]
fn upper_wedge_conditional_ranks_are_uniform() {
    let cfg = SimulationConfig::preset(Scenario::Ex1, 3, 0.5, 20.0, 50_000, 3);
    let sim = simulate_dataset(&cfg).unwrap();
    let thetas = cfg.theta_copulas().unwrap();
    for (k, c) in thetas.iter().enumerate() {
        let g = |t: f64, d: f64| c.h2((-t).exp(), (-0.6 * d).exp());
        let ranks: Vec<f64> = sim
            .train_latent
            .iter()
            .filter(|l| l.events[k] <= l.death)
            .map(|l| {
                let floor = g(l.death, l.death);
                (g(l.events[k], l.death) - floor) / (1.0 - floor)
            })
            .collect();
        let n = ranks.len();
        let d = ks(ranks, |u| u.clamp(0.0, 1.0));
        assert!(d < ks_critical(n), "event {k}: KS {d} over {n}");
    }
}

#[test]
fn latent_kendall_matches_the_association() {
    let cfg = SimulationConfig {
        family: Family::Clayton,
        tau_thetas: vec![0.5],
        ..SimulationConfig::preset(Scenario::Ex1, 1, 0.5, 20.0, 5000, 4)
    };
    let sim = simulate_dataset(&cfg).unwrap();
    let t: Vec<f64> = sim.train_latent.iter().map(|l| l.events[0]).collect();
    let d: Vec<f64> = sim.train_latent.iter().map(|l| l.death).collect();
    let tau = pairwise_kendall(&[t, d])[0][1];
    assert!((tau - 0.5).abs() < 0.03, "{tau}");
    // sanity on the copula itself
    assert!((ArchimedeanCopula::from_tau(Family::Clayton, 0.5).unwrap().theta() - 2.0).abs() < 1e-12);
}

#[test]
fn ex1_pairwise_dependence_is_heterogeneous() {
    let cfg = SimulationConfig::preset(Scenario::Ex1, 7, 0.5, 20.0, 2000, 5);
    let sim = simulate_dataset(&cfg).unwrap();
    let columns: Vec<Vec<f64>> = (0..7).map(|k| sim.train_latent.iter().map(|l| l.events[k]).collect()).collect();
    let m = pairwise_kendall(&columns);
    let off: Vec<f64> = (0..7).flat_map(|a| (0..a).map(move |b| (a, b))).map(|(a, b)| m[a][b]).collect();
    let spread = off.iter().cloned().fold(f64::MIN, f64::max) - off.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread > 0.1, "pairwise taus {off:?}");
}
