use ssk_core::lab::{load_report, run_experiment, write_run, ExperimentKind, RunManifest};

fn small_clt() -> RunManifest {
    let mut m = RunManifest::default_for(ExperimentKind::OverlapClt);
    m.ns = vec![40, 80];
    m.seeds = vec![0, 1];
    m.pairs = 400;
    m.tol = 1e-6;
    m
}

#[test]
fn in_memory_runs_are_identical() {
    let m = small_clt();
    let (ra, ta) = run_experiment(&m).unwrap();
    let (rb, tb) = run_experiment(&m).unwrap();
    assert_eq!(ta.len(), tb.len());
    for (a, b) in ta.iter().zip(&tb) {
        assert_eq!(a.name, b.name);
        assert_eq!(a.to_bytes().unwrap(), b.to_bytes().unwrap());
    }
    assert_eq!(ra.verdicts.len(), rb.verdicts.len());
    for name in ["gaussianity", "mgf-pointwise", "uniform-control"] {
        assert!(ra.verdict(name).is_some(), "{name}");
    }
    assert_eq!(ra.aggregates["sigma2_theorem_claim"], 2.0);
    assert_eq!(ra.aggregates["sigma2_rederived"], 1.0);
}

#[test]
fn report_round_trips_through_json() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = RunManifest::default_for(ExperimentKind::Rigidity);
    m.ns = vec![120];
    m.seeds = vec![0, 1];
    let rep = write_run(&m, dir.path()).unwrap();
    let back = load_report(dir.path()).unwrap();
    assert_eq!(back.verdicts.len(), rep.verdicts.len());
    assert!(back.rows.iter().all(|r| r.beta.is_none()));
    let names: Vec<_> = back.verdicts.iter().map(|v| v.name.as_str()).collect();
    assert!(names.contains(&"rigidity:n120"));
    assert!(dir.path().join("plots").read_dir().unwrap().count() >= 1);
}

#[test]
fn invalid_manifest_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = small_clt();
    m.tol = 0.5;
    assert!(write_run(&m, dir.path()).is_err());
    // validation fails first, so nothing at all is written
    assert!(!dir.path().join("manifest.json").exists());
    let mut m = small_clt();
    m.ns = vec![40];
    m.seeds = vec![3];
    write_run(&m, dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("manifest.json")).unwrap();
    let back: RunManifest = serde_json::from_str(&text).unwrap();
    assert_eq!(back.ns, vec![40]);
    assert!(back.created_unix.is_some());
}
