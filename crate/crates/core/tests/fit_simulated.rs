use dynsurv::simulation::{simulate_dataset, Scenario, SimulationConfig};
use dynsurv::{fit_joint_model, FitSettings};

#[test]
fn ex2_fit_recovers_associations() {
    let c = SimulationConfig::preset(Scenario::Ex2, 3, 0.5, 20.0, 200, 3);
    let sim = simulate_dataset(&c).unwrap();
    let m = fit_joint_model(&sim.train, c.family, &FitSettings::default()).unwrap();
    // three replicate SDs of the alpha estimate at this design
    let a = m.alpha.as_ref().unwrap();
    assert!((a.tau - 0.5).abs() < 3.0 * 0.037, "{}", a.tau);
    for s in &m.associations {
        assert!((s.tau - 0.5).abs() < 0.2, "{}", s.tau);
    }
    assert!(m.diagnostics.warnings.is_empty(), "{:?}", m.diagnostics.warnings);
}
