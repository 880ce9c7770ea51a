//! End-to-end runs through the experiment runner: bundles, warm starts,
//! comparison reports and trash-state export.

use std::fs;
use std::path::{Path, PathBuf};

use qae_core::ansatz::{AnsatzSpec, FeatureVector, ParameterVector};
use qae_core::cost::averaged_cost;
use qae_core::experiment::{
    build_datasets, compare_runs, export_trash_density, run_experiment, trash_density, ExperimentConfig, Probe,
    RunSummary, Thresholds, FIDELITIES_FILE, RECONSTRUCTED_FILE, THETA_FILE, TRACE_FILE, TRASH_DENSITY_FILE,
};
use qae_core::ising::{ground_state, IsingSpec};
use qae_core::statevector::StateVector;
use qae_core::QaeError;
use tempfile::TempDir;

fn run(dir: &Path, name: &str, pairs: &[(&str, &str)]) -> qae_core::Result<RunSummary> {
    let out = dir.join(name);
    let mut all: Vec<(&str, &str)> = pairs.to_vec();
    let out_str = out.to_str().unwrap().to_string();
    all.push(("out", &out_str));
    run_experiment(&ExperimentConfig::from_pairs(&all)?)
}

fn quick(dir: &Path, name: &str, extra: &[(&str, &str)]) -> RunSummary {
    let mut pairs = vec![("max_evals", "400"), ("restarts", "2")];
    pairs.extend_from_slice(extra);
    run(dir, name, &pairs).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn same_config_gives_identical_bundles() {
    let dir = TempDir::new().unwrap();
    quick(dir.path(), "a", &[("mode", "ef_qae"), ("seed", "3")]);
    quick(dir.path(), "b", &[("mode", "ef_qae"), ("seed", "3")]);
    for f in [TRACE_FILE, THETA_FILE, FIDELITIES_FILE, TRASH_DENSITY_FILE] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert!(a == b, "{f} differs between identical runs");
    }
    let c = quick(dir.path(), "c", &[("mode", "ef_qae"), ("seed", "4")]);
    assert_ne!(
        fs::read(dir.path().join("a").join(THETA_FILE)).unwrap(),
        fs::read(dir.path().join("c").join(THETA_FILE)).unwrap()
    );
    assert_eq!(c.theta.seed, 4);
}

#[test]
fn theta_file_rebuilds_the_circuit() {
    let dir = TempDir::new().unwrap();
    let s = quick(dir.path(), "r", &[("mode", "ef_qae")]);
    let text = fs::read_to_string(dir.path().join("r").join(THETA_FILE)).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(json["mode"], "ef_qae");
    let spec: AnsatzSpec = serde_json::from_value(json["spec"].clone()).unwrap();
    spec.validate().unwrap();
    let theta: Vec<f64> = serde_json::from_value(json["theta"].clone()).unwrap();
    assert_eq!(theta, s.theta.theta);
    let data = build_datasets(6, &s.theta.dataset).unwrap();
    let again = averaged_cost(&spec, &ParameterVector(theta), &data.train)
        .unwrap()
        .averaged_cost;
    assert_eq!(again.to_bits(), s.theta.final_cost.to_bits());
}

#[test]
fn ising_bundle_contents() {
    let dir = TempDir::new().unwrap();
    let s = quick(dir.path(), "r", &[("mode", "qae")]);
    let bundle = dir.path().join("r");
    assert_eq!(
        files(&bundle),
        [
            "cost_report.csv",
            "fidelities.csv",
            "theta_opt.json",
            "trace.csv",
            "trash_density.csv"
        ]
    );
    let trace = fs::read_to_string(bundle.join(TRACE_FILE)).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("evaluation,cost"));
    let indices: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(indices[0], 1);
    assert!(indices.windows(2).all(|w| w[0] < w[1]));
    assert!(s.theta.final_cost < s.theta.initial_cost);

    let fid = fs::read_to_string(bundle.join(FIDELITIES_FILE)).unwrap();
    assert!(fid.starts_with("tag,set,feature,fidelity\n"));
    assert_eq!(fid.lines().filter(|l| l.contains(",train,")).count(), 20);
    assert_eq!(fid.lines().filter(|l| l.contains(",test,")).count(), 60);

    let rho = fs::read_to_string(bundle.join(TRASH_DENSITY_FILE)).unwrap();
    assert_eq!(rho.lines().count(), 1 + 2 * 16);
    assert!(rho.lines().nth(1).unwrap().starts_with("lambda=0.60,0,0,"));
    assert!(rho.lines().nth(17).unwrap().starts_with("lambda=0.75,0,0,"));
}

#[test]
fn digits_bundle_contents() {
    let dir = TempDir::new().unwrap();
    let s = quick(dir.path(), "d", &[("workload", "digits"), ("mode", "ef_qae")]);
    assert_eq!(s.theta.spec.n_layers(), 4);
    let bundle = dir.path().join("d");
    assert!(bundle.join(RECONSTRUCTED_FILE).is_file());
    assert_eq!(s.fidelities.iter().filter(|r| r.set == "train").count(), 20);
    assert_eq!(s.fidelities.iter().filter(|r| r.set == "test").count(), 60);
    let probes: Vec<&str> = s.trash_densities.iter().map(|(p, _)| p.as_str()).collect();
    assert_eq!(probes, ["zero-00", "one-30"]);

    let rec = fs::read_to_string(bundle.join(RECONSTRUCTED_FILE)).unwrap();
    assert_eq!(rec.lines().count(), 1 + 80 * 16);
    let first_input: Vec<&str> = rec.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&first_input[..4], ["zero-00", "train", "input", "0"]);
    assert_eq!(first_input.len(), 12);
}

#[test]
fn warm_start_begins_at_the_qae_optimum() {
    let dir = TempDir::new().unwrap();
    let qae = quick(dir.path(), "qae", &[("mode", "qae")]);
    let warm = dir.path().join("qae");
    let star = run(
        dir.path(),
        "star",
        &[
            ("mode", "ef_qae_star"),
            ("max_evals", "400"),
            ("warm_start", warm.to_str().unwrap()),
        ],
    )
    .unwrap();
    assert_eq!(star.trace.records[0].cost.to_bits(), qae.theta.final_cost.to_bits());
    assert!(star.theta.final_cost <= qae.theta.final_cost);
    assert_eq!(star.theta.restarts, 1);

    // the theta file itself is accepted too
    let via_file = warm.join(THETA_FILE);
    run(
        dir.path(),
        "star2",
        &[
            ("mode", "ef_qae_star"),
            ("max_evals", "50"),
            ("warm_start", via_file.to_str().unwrap()),
        ],
    )
    .unwrap();
}

#[test]
fn warm_start_errors_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nowhere");
    let err = run(
        dir.path(),
        "s",
        &[("mode", "ef_qae_star"), ("warm_start", missing.to_str().unwrap())],
    )
    .unwrap_err();
    assert!(matches!(err, QaeError::Config(_)), "{err:?}");
    assert!(!dir.path().join("s").exists());

    let ef = dir.path().join("ef");
    quick(dir.path(), "ef", &[("mode", "ef_qae")]);
    let err = run(
        dir.path(),
        "s",
        &[("mode", "ef_qae_star"), ("warm_start", ef.to_str().unwrap())],
    )
    .unwrap_err();
    assert!(matches!(err, QaeError::Config(_)));

    let digits = dir.path().join("dq");
    quick(
        dir.path(),
        "dq",
        &[("workload", "digits"), ("mode", "qae"), ("max_evals", "50")],
    );
    let err = run(
        dir.path(),
        "s",
        &[("mode", "ef_qae_star"), ("warm_start", digits.to_str().unwrap())],
    )
    .unwrap_err();
    assert!(matches!(err, QaeError::Config(_)));
}

#[test]
fn bundles_are_all_or_nothing() {
    let dir = TempDir::new().unwrap();
    let foreign = dir.path().join("foreign");
    fs::create_dir(&foreign).unwrap();
    fs::write(foreign.join("notes.txt"), "keep me").unwrap();
    let err = run(dir.path(), "foreign", &[("max_evals", "20"), ("restarts", "1")]).unwrap_err();
    assert!(matches!(err, QaeError::Config(_)));
    assert_eq!(files(&foreign), ["notes.txt"]);

    // a previous bundle is replaced whole
    quick(dir.path(), "again", &[("mode", "qae")]);
    let s = quick(dir.path(), "again", &[("mode", "ef_qae")]);
    assert_eq!(s.theta.spec.feature_dim(), 1);
    let text = fs::read_to_string(dir.path().join("again").join(THETA_FILE)).unwrap();
    assert!(text.contains("\"ef_qae\""));

    // parent is a regular file: nothing can be written
    let blocker = dir.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let err = run(&blocker, "r", &[("max_evals", "20"), ("restarts", "1")]).unwrap_err();
    assert_eq!(err.exit_code(), 3, "{err:?}");

    let leftovers: Vec<String> = files(dir.path())
        .into_iter()
        .filter(|f| f.starts_with(".qae"))
        .collect();
    assert!(leftovers.is_empty(), "staging directories left behind: {leftovers:?}");
}

#[test]
fn compare_reports() {
    let dir = TempDir::new().unwrap();
    quick(dir.path(), "a", &[("mode", "ef_qae")]);
    quick(dir.path(), "b", &[("mode", "qae")]);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));

    let same = compare_runs(&a, &a, &Thresholds::default()).unwrap();
    assert_eq!(same.cost_ratio, 1.0);
    assert!(same.fidelity_deltas.iter().all(|d| d.delta == 0.0));
    assert_eq!(same.fidelity_deltas.len(), 80);

    let ab = compare_runs(&a, &b, &Thresholds::default()).unwrap();
    assert_eq!(ab.cost_ratio, ab.run_a.final_cost / ab.run_b.final_cost);
    assert_eq!(ab.run_a.mode, "ef_qae");
    let strict = Thresholds {
        max_cost_ratio: 0.0,
        min_mean_test_fidelity_delta: 0.0,
    };
    assert!(!compare_runs(&a, &b, &strict).unwrap().passed);

    quick(
        dir.path(),
        "d",
        &[("workload", "digits"), ("mode", "qae"), ("max_evals", "50")],
    );
    let err = compare_runs(&a, &dir.path().join("d"), &Thresholds::default()).unwrap_err();
    assert!(matches!(err, QaeError::Report(_)));

    let broken = dir.path().join("broken");
    fs::create_dir(&broken).unwrap();
    fs::copy(a.join(THETA_FILE), broken.join(THETA_FILE)).unwrap();
    fs::write(broken.join(FIDELITIES_FILE), "name,value\nx,1\n").unwrap();
    assert!(matches!(
        compare_runs(&a, &broken, &Thresholds::default()),
        Err(QaeError::Report(_))
    ));
    assert!(matches!(
        compare_runs(&a, &dir.path().join("none"), &Thresholds::default()),
        Err(QaeError::Report(_))
    ));
}

#[test]
fn export_matches_the_bundle_and_checks_the_domain() {
    let dir = TempDir::new().unwrap();
    let s = quick(dir.path(), "r", &[("mode", "ef_qae")]);
    let bundle: PathBuf = dir.path().join("r");
    let (tag, rho) = export_trash_density(&bundle, Probe::Lambda(0.60)).unwrap();
    assert_eq!(tag, "lambda=0.60");
    assert_eq!(&rho, s.trash_density("lambda=0.60").unwrap());
    assert!(matches!(
        export_trash_density(&bundle, Probe::Lambda(1.2)),
        Err(QaeError::InvalidArgument(_))
    ));
    assert!(matches!(
        export_trash_density(&bundle, Probe::TestDigit(0)),
        Err(QaeError::InvalidArgument(_))
    ));

    let d = quick(
        dir.path(),
        "d",
        &[("workload", "digits"), ("mode", "qae"), ("max_evals", "50")],
    );
    let (tag, rho) = export_trash_density(&dir.path().join("d"), Probe::TestDigit(30)).unwrap();
    assert_eq!(tag, "one-30");
    assert_eq!(&rho, d.trash_density("one-30").unwrap());
    assert!(matches!(
        export_trash_density(&dir.path().join("d"), Probe::TestDigit(60)),
        Err(QaeError::InvalidArgument(_))
    ));
}

#[test]
fn trash_density_examples() {
    // trash already |00⟩ and the identity circuit: a pure |00⟩⟨00|
    let spec = AnsatzSpec::qae(6, 2, 3).unwrap();
    let rest = StateVector::random(4, &mut <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(5)).unwrap();
    let input = StateVector::zero(2).unwrap().tensor(&rest).unwrap();
    let rho = trash_density(&spec, &ParameterVector::zeros(20), &FeatureVector::empty(), &input).unwrap();
    for r in 0..4 {
        for c in 0..4 {
            let expected = if (r, c) == (0, 0) { 1.0 } else { 0.0 };
            assert!((rho.get(r, c).re - expected).abs() < 1e-12 && rho.get(r, c).im.abs() < 1e-12);
        }
    }

    let gs = ground_state(&IsingSpec::open(6, 0.60)).unwrap();
    let rho = trash_density(&spec, &ParameterVector::zeros(20), &FeatureVector::empty(), &gs.state).unwrap();
    assert!(rho.hermiticity_error() < 1e-14);
    assert!((rho.trace().re - 1.0).abs() < 1e-12);
}

#[test]
fn training_improves_the_probe_fidelity() {
    let dir = TempDir::new().unwrap();
    let s = quick(dir.path(), "r", &[("mode", "ef_qae")]);
    let untrained = qae_core::training::init_parameters(
        &s.theta.spec,
        s.theta.seed + s.theta.best_restart as u64,
        &qae_core::training::InitStrategy::RandomUniform,
    )
    .unwrap();
    let gs = ground_state(&IsingSpec::open(6, 0.60)).unwrap();
    let x = FeatureVector::scalar(0.60);
    let before = qae_core::ansatz::reconstruct(&s.theta.spec, &untrained, &x, &gs.state)
        .unwrap()
        .fidelity;
    let after = qae_core::ansatz::reconstruct(&s.theta.spec, &ParameterVector(s.theta.theta.clone()), &x, &gs.state)
        .unwrap()
        .fidelity;
    assert!(after > before, "trained {after} vs untrained {before}");
}

/// Among test states whose costs differ by more than 0.1, the cheaper one
/// reconstructs at least as well in at least 90% of ordered pairs.
#[test]
fn fidelity_tracks_cost() {
    let dir = TempDir::new().unwrap();
    let mut informative = 0;
    for (i, (mode, evals)) in [("qae", "100"), ("ef_qae", "200"), ("ef_qae", "2000")]
        .iter()
        .enumerate()
    {
        let name = format!("r{i}");
        let s = run(
            dir.path(),
            &name,
            &[("mode", mode), ("max_evals", evals), ("restarts", "1")],
        )
        .unwrap();
        let data = build_datasets(6, &s.theta.dataset).unwrap();
        let costs = averaged_cost(&s.theta.spec, &ParameterVector(s.theta.theta.clone()), &data.test)
            .unwrap()
            .per_state_costs;
        let fid: Vec<f64> = s
            .fidelities
            .iter()
            .filter(|r| r.set == "test")
            .map(|r| r.fidelity)
            .collect();
        let (mut pairs, mut agree) = (0, 0);
        for a in 0..costs.len() {
            for b in 0..costs.len() {
                if costs[b] > costs[a] + 0.1 {
                    pairs += 1;
                    agree += usize::from(fid[a] >= fid[b]);
                }
            }
        }
        if pairs > 0 {
            informative += 1;
            assert!(agree as f64 >= 0.9 * pairs as f64, "{mode}/{evals}: {agree} of {pairs}");
        }
    }
    assert!(informative >= 1);
}
