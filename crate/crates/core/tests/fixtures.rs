use std::path::{Path, PathBuf};

use cmut::geometry::CALIBRATED_OVERLAP_RADIUS_UM;
use cmut::sweep::{calibrate_overlap_radius, reference_points, Table, HOLDOUT_FLAG};
use cmut::{builtin_db, default_cell, Device, GapPolicy, UM};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn device(membrane: &str) -> Device {
    let db = builtin_db();
    Device::new(
        default_cell(),
        db.get(membrane).unwrap().clone(),
        db.get("SiO2").unwrap().clone(),
    )
}

#[test]
fn fixtures_parse_and_reemit() {
    for name in [
        "capacitance_vs_cavity_radius.csv",
        "capacitance_vs_gap_height.csv",
        "frequency_vs_cavity_radius.csv",
        "displacement_vs_voltage.csv",
    ] {
        let t = Table::read(fixture(name)).unwrap();
        assert!(!t.rows.is_empty(), "{name}");
        let again = Table::from_csv(&t.to_csv(), Path::new(name)).unwrap();
        assert_eq!(again, t, "{name}");
    }
}

#[test]
fn holdout_rows_are_skipped() {
    let t = Table::read(fixture("capacitance_vs_cavity_radius.csv")).unwrap();
    assert_eq!(
        t.rows
            .iter()
            .filter(|r| r.flags.iter().any(|f| f == HOLDOUT_FLAG))
            .count(),
        2
    );
    let pts = reference_points(&t, "Si3N4").unwrap();
    assert_eq!(pts.len(), 4);
    assert!((pts[3].cavity_radius - 25.0 * UM).abs() < 1e-15);
    assert!(reference_points(&t, "GaN").is_err());
}

#[test]
fn shipped_overlap_radius_is_the_fit() {
    let t = Table::read(fixture("capacitance_vs_cavity_radius.csv")).unwrap();
    let pts = reference_points(&t, "Si3N4").unwrap();
    let cal = calibrate_overlap_radius(&pts, &device("Si3N4"), GapPolicy::SeriesMembrane).unwrap();
    let fitted = cal.overlap_radius / UM;
    assert!((fitted - CALIBRATED_OVERLAP_RADIUS_UM).abs() < 1e-3, "fit {fitted}");
    for r in &cal.residuals {
        assert!(r.relative_error.abs() < 0.01, "{r:?}");
    }
}

#[test]
fn gap_only_fit_is_not_bracketed() {
    let t = Table::read(fixture("capacitance_vs_cavity_radius.csv")).unwrap();
    let pts = reference_points(&t, "Si3N4").unwrap();
    let e = calibrate_overlap_radius(&pts, &device("Si3N4"), GapPolicy::GapOnly).unwrap_err();
    assert!(e.to_string().contains("not bracketed"), "{e}");
}

#[test]
fn sic_column_fit_is_consistent() {
    let t = Table::read(fixture("capacitance_vs_cavity_radius.csv")).unwrap();
    let pts = reference_points(&t, "SiC").unwrap();
    let cal = calibrate_overlap_radius(&pts, &device("SiC"), GapPolicy::SeriesMembrane).unwrap();
    assert!((cal.overlap_radius / UM - CALIBRATED_OVERLAP_RADIUS_UM).abs() < 0.1);
}
