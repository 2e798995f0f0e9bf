//! Record file export and import.

use std::fs;

use dsdistimator::engine::{generate_records, run};
use dsdistimator::records::{
    export_records, import_records, meta_path_for, RecordMeta, RECORD_SCHEMA_VERSION,
};
use dsdistimator::{BellDiagonalState, Error, RunSummary, TripletRecord};

fn meta(n: u64) -> RecordMeta {
    RecordMeta {
        n,
        master_seed: Some(11),
        q: Some([0.62, 0.15, 0.05, 0.18]),
        schema_version: RECORD_SCHEMA_VERSION,
    }
}

#[test]
fn export_import_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let state = BellDiagonalState::new([0.62, 0.15, 0.05, 0.18]).unwrap();
    let records = generate_records(&state, 5000, 11).unwrap();
    export_records(&path, &records, &meta(5000)).unwrap();
    assert!(meta_path_for(&path).exists());

    let (back, m) = import_records(&path).unwrap();
    assert_eq!(back, records);
    assert_eq!(m, Some(meta(5000)));
    assert_eq!(
        RunSummary::from_records(&back, Some(11)).unwrap(),
        run(&state, 5000, 11).unwrap()
    );
}

#[test]
fn truncated_file_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let records = vec![
        TripletRecord {
            z_coincide: true,
            x_coincide: false,
        };
        10
    ];
    export_records(&path, &records, &meta(10)).unwrap();
    let text = fs::read_to_string(&path).unwrap();

    // Whole lines missing: the count no longer matches the side file.
    let short: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
    fs::write(&path, short).unwrap();
    assert!(matches!(import_records(&path), Err(Error::Parse { .. })));

    // Cut mid-line.
    fs::write(&path, &text[..text.len() - 3]).unwrap();
    assert!(matches!(import_records(&path), Err(Error::Parse { .. })));
}

#[test]
fn external_file_without_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.csv");
    fs::write(&path, "index,z_coincide,x_coincide\n0,1,1\n1,0,1\n2,1,0\n3,1,1\n").unwrap();
    let (recs, m) = import_records(&path).unwrap();
    assert!(m.is_none());
    let s = RunSummary::from_records(&recs, None).unwrap();
    assert_eq!((s.n, s.count_z, s.count_x, s.count_xz), (4, 3, 3, 2));
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    for text in [
        "",
        "i,z,x\n0,1,1\n",
        "index,z_coincide,x_coincide\n",
        "index,z_coincide,x_coincide\n0,1,2\n",
        "index,z_coincide,x_coincide\n0,1\n",
        "index,z_coincide,x_coincide\n1,1,1\n",
    ] {
        fs::write(&path, text).unwrap();
        assert!(
            matches!(import_records(&path), Err(Error::Parse { .. })),
            "accepted {text:?}"
        );
    }
}

#[test]
fn unknown_schema_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    fs::write(&path, "index,z_coincide,x_coincide\n0,1,1\n").unwrap();
    fs::write(meta_path_for(&path), r#"{"n": 1, "schema_version": 99}"#).unwrap();
    assert!(matches!(
        import_records(&path),
        Err(Error::VersionMismatch { found: 99, .. })
    ));
}
