use fourport::experiments::{
    run_amplifier_gain, run_bell_decay, run_tmsv_separability, AmplifierParams, BellDecayParams, Grid, SweepConfig,
    Table, TmsvParams,
};
use fourport::par::Execution;

fn config(json: &str) -> SweepConfig {
    SweepConfig::from_json_str(json).unwrap()
}

fn both<P: Clone>(p: &P, set: impl Fn(&mut P, Execution), run: impl Fn(&P) -> Table) -> (Table, Table) {
    let (mut seq, mut par) = (p.clone(), p.clone());
    set(&mut seq, Execution::Sequential);
    set(&mut par, Execution::Parallel);
    (run(&seq), run(&par))
}

#[test]
fn execution_mode_does_not_change_results() {
    let bell = BellDecayParams::from_config(&config(r#"{"grid": {"start": 0.0, "stop": 1.0, "steps": 5}}"#)).unwrap();
    let (a, b) = both(&bell, |p, e| p.execution = e, |p| run_bell_decay(p).unwrap());
    assert_eq!(a, b);

    let tmsv = TmsvParams::from_config(&config(r#"{"zeta": 0.7, "n_th": 0.5}"#)).unwrap();
    let (a, b) = both(&tmsv, |p, e| p.execution = e, |p| run_tmsv_separability(p).unwrap());
    assert_eq!(a, b);

    let amp = AmplifierParams::from_config(&config(r#"{"zeta": 0.4, "n_th": 0.1}"#)).unwrap();
    let (a, b) = both(&amp, |p, e| p.execution = e, |p| run_amplifier_gain(p).unwrap());
    assert_eq!(a, b);
}

#[test]
fn bell_decay_orders_the_families() {
    let mut p = BellDecayParams::from_config(&config(r#"{"grid": {"start": 0.0, "stop": 2.0, "steps": 9}}"#)).unwrap();
    p.verify = true;
    let t = run_bell_decay(&p).unwrap();
    let (psi, phi) = (t.column("E_psi").unwrap(), t.column("E_phi").unwrap());
    assert!((psi[0] - 2f64.ln()).abs() < 1e-6 && (phi[0] - 2f64.ln()).abs() < 1e-6);
    for k in 1..psi.len() {
        assert!(psi[k] > phi[k], "row {k}");
        assert!(psi[k] <= psi[k - 1] + 1e-9 && phi[k] <= phi[k - 1] + 1e-9);
    }
    let bits = t.column("E_psi_ln2").unwrap();
    assert!((bits[3] - psi[3] / 2f64.ln()).abs() < 1e-15);
}

#[test]
fn tmsv_crossing_matches_the_closed_form() {
    for (zeta, n_th) in [(0.3, 0.2), (1.0, 1.0), (2.0, 5.0)] {
        let mut p = TmsvParams::from_config(&SweepConfig::default()).unwrap();
        p.zeta = zeta;
        p.n_th = n_th;
        p.grid = Grid::new(0.0, 3.0, 301).unwrap();
        let t = run_tmsv_separability(&p).unwrap();
        let crossing = t.summary["crossing_l_over_L"].as_f64().unwrap();
        let expect = 0.5 * (1.0 + (1.0 - (-2.0 * zeta).exp()) / (2.0 * n_th)).ln();
        assert!((crossing - expect).abs() < 1e-6, "ζ = {zeta}, n = {n_th}: {crossing} vs {expect}");
        let entangled = t.column("entangled").unwrap();
        let l = t.column("l_over_L").unwrap();
        for (e, x) in entangled.iter().zip(&l) {
            if (x - expect).abs() > 0.02 {
                assert_eq!(*e == 1.0, *x < expect, "l/L = {x}");
            }
        }
    }
}

#[test]
fn amplifier_crossing_matches_the_closed_form() {
    for zeta in [0.2, 0.8, 2.0] {
        let mut p = AmplifierParams::from_config(&SweepConfig::default()).unwrap();
        p.zeta = zeta;
        p.grid = Grid::new(1.0, 2.0, 101).unwrap();
        let t = run_amplifier_gain(&p).unwrap();
        let crossing = t.summary["crossing_T_sq"].as_f64().unwrap();
        assert!((crossing - 2.0 / (1.0 + (-2.0 * zeta).exp())).abs() < 1e-6);
    }
}

#[test]
fn sweeps_reject_bad_parameters() {
    assert!(TmsvParams::from_config(&config(r#"{"n_th": 0.0}"#)).is_err());
    assert!(AmplifierParams::from_config(&config(r#"{"sigma": 1}"#)).is_err());
    assert!(BellDecayParams::from_config(&config(r#"{"grid": {"start": -1.0, "stop": 1.0, "steps": 3}}"#)).is_err());
    assert!(Grid::new(1.0, 0.0, 3).is_err());
    assert!(SweepConfig::from_json_str(r#"{"cutoff": 3}"#).is_err());
}
