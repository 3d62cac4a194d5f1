use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinmu::dynamics::TransferProblem;
use spinmu::experiment::{run_sensitivity_study, sensitivity_study, ExperimentConfig};
use spinmu::lft::{absorb_controller, build_plant, output_matrix, GMatrix};
use spinmu::linalg::CMat;
use spinmu::network::{build_hamiltonian, coupling_structure, BiasField, SpinNetworkSpec};
use spinmu::ssv::{mu_brute_force, robust_performance_mu, Block, BlockStructure, MuOptions};
use spinmu::synthesis::{synthesize, ControllerEnsemble, SynthesisOptions};
use spinmu::ExecMode;

fn ring11_config(count: usize) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{"network":{{"n":11,"topology":"ring","coupling":"xx"}},
            "transfer":{{"in":1,"out":3}},
            "synthesis":{{"count":{count}}},
            "structures":["coupling(5,6)"],
            "seed":42}}"#
    ))
    .unwrap()
}

#[test]
fn ring11_ensemble_spans_fidelities() {
    let ens = ring11_config(100).synthesize(ExecMode::available()).unwrap();
    assert_eq!(ens.len(), 100);
    assert!(ens.controllers[0].p_tf >= 0.99);
    assert!(ens.controllers[99].p_tf <= 0.95);
}

#[test]
fn sequential_and_parallel_ensembles_are_identical() {
    let spec = SpinNetworkSpec::ring(7).unwrap();
    let prob = TransferProblem::new(7, 2, 5).unwrap();
    let opts = SynthesisOptions::default();
    let a = synthesize(&spec, &prob, 12, 9, &opts, ExecMode::Sequential).unwrap();
    let b = synthesize(&spec, &prob, 12, 9, &opts, ExecMode::Parallel).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
}

#[test]
fn ensemble_file_round_trip_and_mismatch() {
    let cfg = ring11_config(4);
    let ens = cfg.synthesize(ExecMode::Sequential).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ens.json");
    std::fs::write(&path, ens.to_json().unwrap()).unwrap();
    let back = cfg.load_ensemble(Some(&path)).unwrap();
    assert_eq!(back, ens);

    let mut other = cfg.clone();
    other.transfer = TransferProblem::new(11, 1, 4).unwrap();
    assert!(other.load_ensemble(Some(&path)).is_err());
    assert!(cfg.load_ensemble(None).is_err());

    let mut tampered: serde_json::Value = serde_json::from_str(&ens.to_json().unwrap()).unwrap();
    tampered["controllers"][0]["p_tf"] = serde_json::json!(0.123);
    assert!(ControllerEnsemble::from_json(&tampered.to_string()).is_err());
}

#[test]
fn sensitivity_study_crossover_on_ring11() {
    let cfg = ring11_config(100);
    let ens = cfg.synthesize(ExecMode::available()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let study = run_sensitivity_study(&cfg, &ens, dir.path(), ExecMode::available()).unwrap();
    let rows = std::fs::read_to_string(dir.path().join("sensitivity_coupling_5_6.csv")).unwrap();
    assert_eq!(rows.lines().count(), 101);
    let sep = study.crossover.separation().expect("both events occur");
    assert!(sep <= 15, "crossover ranks {:?}", study.crossover);
}

#[test]
fn toy_chain_sensitivity_column_is_monotone() {
    let cfg = ExperimentConfig::from_json(
        r#"{"network":{"n":2,"topology":"chain","coupling":"xx"},"transfer":{"in":1,"out":2},
            "synthesis":{"count":5},"structures":["coupling(1,2)","leakage(1)"],"seed":1}"#,
    )
    .unwrap();
    let ens = cfg.synthesize(ExecMode::Sequential).unwrap();
    let study = sensitivity_study(&cfg, &ens, ExecMode::Sequential).unwrap();
    assert!(study.records.windows(2).all(|w| w[0].p_tf >= w[1].p_tf));
    assert_eq!(study.per_structure.len(), 2);
}

#[test]
fn robust_performance_matches_brute_force_on_two_spins() {
    let spec = SpinNetworkSpec::chain(2).unwrap();
    let h = build_hamiltonian(&spec).unwrap();
    let prob = TransferProblem::new(2, 1, 2).unwrap();
    let s = coupling_structure(&spec, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for k in 0..4 {
        let s0 = Complex64::new(rng.random_range(0.3..1.5), rng.random_range(-0.5..0.5));
        let d = if k == 0 {
            BiasField::zeros(2)
        } else {
            BiasField::new(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).unwrap()
        };
        let plant = build_plant(&h, &output_matrix(&prob), std::slice::from_ref(&s), s0).unwrap();
        let g = absorb_controller(&plant, &d).unwrap();
        let r = robust_performance_mu(&g, &g.uncertainty_structure(), &MuOptions::default()).unwrap();
        let full = BlockStructure::new(vec![Block::RepeatedScalar { dim: 2 }, Block::FullComplex { rows: 2, cols: 2 }]);
        let bf = mu_brute_force(&g.assemble(), &full, &Default::default()).unwrap();
        assert!(r.lower <= r.upper + 1e-9);
        assert!((r.lower - bf).abs() <= 1e-2 * bf.max(1.0), "lower {} brute {bf}", r.lower);
        assert!(r.upper.is_finite());
    }
}

#[test]
fn zero_g_has_zero_mu() {
    let z = CMat::zeros(3, 3);
    let g = GMatrix {
        g11: z.clone(),
        g12: z.clone(),
        g21: z.clone(),
        g22: z,
        s0: Complex64::new(0.0, 0.0),
        channels: Vec::new(),
    };
    let unc = BlockStructure::new(vec![Block::RepeatedScalar { dim: 3 }]);
    let r = robust_performance_mu(&g, &unc, &MuOptions::default()).unwrap();
    assert_eq!((r.lower, r.upper), (0.0, 0.0));
    assert!(r.witness.is_none());
}

#[test]
fn ring11_best_controller_mu_is_finite() {
    let cfg = ring11_config(5);
    let ens = cfg.synthesize(ExecMode::available()).unwrap();
    let best = &ens.controllers[ens.avg_order()[0]];
    let spec = cfg.network;
    let h = build_hamiltonian(&spec).unwrap();
    let plant = build_plant(
        &h,
        &output_matrix(&cfg.transfer),
        &[coupling_structure(&spec, 5).unwrap()],
        Complex64::new(0.0, 0.0),
    )
    .unwrap();
    let g = absorb_controller(&plant, &best.d).unwrap();
    let r = robust_performance_mu(&g, &g.uncertainty_structure(), &MuOptions::default()).unwrap();
    assert!(r.lower.is_finite() && r.upper.is_finite());
    assert!(r.lower <= r.upper + 1e-9);
    assert_eq!(g.assemble().nrows(), 22);
}
