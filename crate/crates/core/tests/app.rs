use std::fs;

use chns::app::*;
use chns::femspace::VectorField;
use chns::scenarios::ScenarioKind;
use chns::scheme::ChnsState;

fn tiny_config(dir: &std::path::Path, format: SnapshotFormat) -> RunConfig {
    RunConfig {
        scenario: ScenarioKind::Spinodal,
        nx: Some(4),
        ny: Some(4),
        dt: Some(1e-3),
        t_final: Some(5e-3),
        seed: Some(3),
        output: OutputConfig {
            dir: dir.to_path_buf(),
            snapshot_every: 2,
            format,
            snapshot_times: None,
        },
        ..RunConfig::default()
    }
}

#[test]
fn run_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let summary = run(&tiny_config(&out, SnapshotFormat::Csv)).unwrap();
    assert_eq!(summary.metadata.status, "completed");
    assert_eq!(summary.metadata.steps_completed, 5);
    // steps 0, 2, 4 and the final step
    assert_eq!(
        summary.metadata.snapshots,
        vec!["snapshot_000000.csv", "snapshot_000002.csv", "snapshot_000004.csv", "snapshot_000005.csv"]
    );
    let text = fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    assert!(text.starts_with("t,energy,mass,phi_min,phi_max,newton_iters,linsolve_resid\n"));
    let rows = read_diagnostics(&out.join("diagnostics.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    assert_eq!(rows[0][0], 0.0);
    assert!((rows[5][0] - 5e-3).abs() < 1e-15);
    for r in &rows[1..] {
        assert!(r[5] >= 1.0);
    }
    // run.json round trip
    let meta: RunMetadata = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(meta.seed, 3);
    assert_eq!(meta.scenario, ScenarioKind::Spinodal);
    let again = RunConfig::from_str_any(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    assert_eq!(again, meta.config);
    assert_eq!(again.resolved().unwrap(), again);
}

#[test]
fn rerun_from_metadata_is_bitwise_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run(&tiny_config(&tmp.path().join("a"), SnapshotFormat::Csv)).unwrap();
    let mut cfg = RunConfig::load(&tmp.path().join("a/run.json")).unwrap();
    cfg.output.dir = tmp.path().join("b");
    let b = run(&cfg).unwrap();
    assert_eq!(a.final_state, b.final_state);
    assert_eq!(
        fs::read(tmp.path().join("a/diagnostics.csv")).unwrap(),
        fs::read(tmp.path().join("b/diagnostics.csv")).unwrap()
    );
}

#[test]
fn csv_snapshot_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("csv");
    let s = run(&tiny_config(&out, SnapshotFormat::Csv)).unwrap();
    let rows = read_csv_snapshot(&out.join("snapshot_000005.csv")).unwrap();
    let st = &s.final_state;
    assert_eq!(rows.len(), st.phi.len());
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[2], st.phi[i]);
        assert_eq!(r[3], st.u.x[i]);
        assert_eq!(r[4], st.u.y[i]);
    }
}

#[test]
fn vtk_snapshot_layout() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("vtk");
    run(&tiny_config(&out, SnapshotFormat::Vtk)).unwrap();
    let text = fs::read_to_string(out.join("snapshot_000000.vtk")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "# vtk DataFile Version 3.0");
    assert_eq!(lines[2], "ASCII");
    assert_eq!(lines[3], "DATASET STRUCTURED_GRID");
    // Q2 on 4x4 cells: 9 x 9 lattice
    assert_eq!(lines[4], "DIMENSIONS 9 9 1");
    assert_eq!(lines[5], "POINTS 81 double");
    assert!(lines.contains(&"POINT_DATA 81"));
    assert!(lines.contains(&"SCALARS phi double 1"));
    assert!(lines.contains(&"SCALARS p double 1"));
    assert!(lines.contains(&"VECTORS u double"));
    // header 6 + points 81 + POINT_DATA 1 + 2 scalars (2 + 81) + vectors (1 + 81)
    assert_eq!(lines.len(), 6 + 81 + 1 + 2 * 83 + 82);
}

#[test]
fn zero_state_snapshot() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), SnapshotFormat::Csv);
    let (stepper, _) = cfg.spec().unwrap().build().unwrap();
    let ops = stepper.ops();
    let n = ops.n();
    let s = ChnsState::initial(vec![0.0; n], VectorField::zeros(n), vec![0.0; ops.pressure.dim()], 0.0).unwrap();
    let path = tmp.path().join("zero.csv");
    write_snapshot(ops, &s, &path, SnapshotFormat::Csv).unwrap();
    let rows = read_csv_snapshot(&path).unwrap();
    assert_eq!(rows.len(), n);
    assert!(rows.iter().all(|r| r[2..].iter().all(|&v| v == 0.0)));
    assert_eq!(rows[0][..2], [0.0, 0.0]);
    assert_eq!(rows[n - 1][..2], [1.0, 1.0]);
}

#[test]
fn invalid_config_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bad");
    let mut cfg = tiny_config(&out, SnapshotFormat::Vtk);
    cfg.params.theta_c = Some(0.8);
    assert!(run(&cfg).is_err());
    assert!(validate(&cfg).is_err());
    assert!(!out.exists());
}

#[test]
fn config_parsing() {
    let cfg = RunConfig::from_str_any(
        r#"
scenario = "rayleigh-taylor"
nx = 8
dt = 0.01
[output]
format = "csv"
"#,
    )
    .unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::RayleighTaylor);
    let spec = cfg.spec().unwrap();
    // aspect ratio 4
    assert_eq!((spec.nx, spec.ny), (8, 32));
    assert_eq!(cfg.output.format, SnapshotFormat::Csv);
    assert!(RunConfig::from_str_any("bogus_key = 1").is_err());
    assert!("vtk".parse::<SnapshotFormat>().is_ok());
    assert!("hdf5".parse::<SnapshotFormat>().is_err());
    for k in ScenarioKind::ALL {
        assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
    }
}

#[test]
fn cli_overrides_take_precedence() {
    let mut cfg = RunConfig::from_str_any("nx = 8\nseed = 1").unwrap();
    cfg.apply(&CliOverrides {
        nx: Some(16),
        seed: Some(9),
        format: Some(SnapshotFormat::Csv),
        ..CliOverrides::default()
    });
    assert_eq!(cfg.nx, Some(16));
    assert_eq!(cfg.seed, Some(9));
    assert_eq!(cfg.output.format, SnapshotFormat::Csv);
    assert!(validate(&cfg).unwrap().starts_with("spinodal: 16x16 Q2"));
}

#[test]
fn rate_of_cubic_decay() {
    assert!((convergence_rate(8e-3, 1e-3, 0.25, 0.125) - 3.0).abs() < 1e-14);
    let t = ConvergenceTable::new("1/h", &[(8.0, 8e-3, 4e-3, 1.6e-2), (16.0, 1e-3, 1e-3, 1e-3)]);
    assert_eq!(t.rows[0].rate_u, None);
    assert!((t.rates_u()[0] - 3.0).abs() < 1e-14);
    assert!((t.rates_p()[0] - 2.0).abs() < 1e-14);
    assert!((t.rates_phi()[0] - 4.0).abs() < 1e-14);
    let csv = t.to_csv();
    assert!(csv.starts_with("1/h,e_u,rate_u,e_p,rate_p,e_phi,rate_phi\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn single_entry_table_has_no_rates() {
    let t = ConvergenceTable::new("1/dt", &[(8.0, 1.0, 2.0, 3.0)]);
    assert!(t.rates_u().is_empty());
    assert!(t.rates_p().is_empty());
    assert!(t.rates_phi().is_empty());
    let shown = t.to_string();
    assert_eq!(shown.lines().count(), 2);
    assert!(shown.contains("1.0000E0"));
}
