use std::fs;
use std::path::Path;

use locfuse::io::{self, gap_warnings};
use locfuse::Error;
use locfuse_core::optimizer::FlpFix;
use locfuse_core::{InertialTrajectory, PositionSeries, Vec2};

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn well_formed_files_load() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "t,speed,heading\n0,0,0\n0.5,0.6,1.5\n1.0, 0.6 ,1.6\n");
    let traj = io::read_trajectory(&t).unwrap();
    assert_eq!(traj.len(), 3);
    assert_eq!(traj.speeds()[2], 0.6);
    let f = write(dir.path(), "f.csv", "t,x,y,accuracy\n0,1,2,10\n60,3,4,0\n");
    let fixes = io::read_fixes(&f).unwrap();
    assert_eq!(fixes[1].position, Vec2::new(3.0, 4.0));
    let p = write(dir.path(), "p.csv", "t,x,y\n0,1,2\n");
    assert_eq!(io::read_positions(&p).unwrap().positions, [Vec2::new(1.0, 2.0)]);
}

#[test]
fn non_monotonic_timestamp_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let t = write(dir.path(), "t.csv", "t,speed,heading\n0,0,0\n1,1,0\n1,1,0\n2,1,0\n");
    match io::read_trajectory(&t) {
        Err(Error::Schema { line, .. }) => assert_eq!(line, 4),
        other => panic!("{other:?}"),
    }
}

#[test]
fn negative_accuracy_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "f.csv", "t,x,y,accuracy\n0,1,2,10\n60,3,4,-1\n");
    match io::read_fixes(&f) {
        Err(Error::Schema { line, message, .. }) => {
            assert_eq!(line, 3);
            assert!(message.contains("accuracy"));
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn schema_violations() {
    let dir = tempfile::tempdir().unwrap();
    let header = write(dir.path(), "h.csv", "time,speed,heading\n0,0,0\n");
    assert!(matches!(io::read_trajectory(&header), Err(Error::Schema { line: 1, .. })));
    let text = write(dir.path(), "x.csv", "t,speed,heading\n0,0,0\n1,fast,0\n");
    assert!(matches!(io::read_trajectory(&text), Err(Error::Schema { line: 3, .. })));
    let neg = write(dir.path(), "n.csv", "t,speed,heading\n0,-1,0\n");
    assert!(matches!(io::read_trajectory(&neg), Err(Error::Schema { line: 2, .. })));
    let nan = write(dir.path(), "nan.csv", "t,x,y\n0,NaN,0\n");
    assert!(matches!(io::read_positions(&nan), Err(Error::Schema { line: 2, .. })));
    let empty = write(dir.path(), "e.csv", "t,x,y,accuracy\n");
    assert!(io::read_fixes(&empty).is_err());
    assert!(matches!(io::read_fixes(&dir.path().join("missing.csv")), Err(Error::Io { .. })));
}

#[test]
fn long_gaps_warn() {
    assert!(gap_warnings(&[0.0, 0.5, 1.5]).is_empty());
    let w = gap_warnings(&[0.0, 0.5, 2.0, 2.1]);
    assert_eq!(w.len(), 1);
    assert!(w[0].contains("frame 1"));
}

#[test]
fn round_trips_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let traj = InertialTrajectory::new(vec![0.0, 0.02, 0.04], vec![0.0, 0.1 / 3.0, 1e-17], vec![-3.1, 0.7, 2.0]).unwrap();
    io::write_trajectory(&dir.path().join("t.csv"), &traj).unwrap();
    assert_eq!(io::read_trajectory(&dir.path().join("t.csv")).unwrap(), traj);

    let series = PositionSeries::new(vec![0.0, 1.0], vec![Vec2::new(1.0 / 7.0, -2.5e3), Vec2::new(0.0, 1e-300)]).unwrap();
    io::write_positions(&dir.path().join("p.csv"), &series).unwrap();
    assert_eq!(io::read_positions(&dir.path().join("p.csv")).unwrap(), series);

    let fixes = vec![FlpFix {
        t: 3.0,
        position: Vec2::new(0.1, 0.2),
        accuracy: 10.0,
    }];
    io::write_fixes(&dir.path().join("nested/f.csv"), &fixes).unwrap();
    assert_eq!(io::read_fixes(&dir.path().join("nested/f.csv")).unwrap(), fixes);
}

#[test]
fn atomic_write_leaves_no_temporaries() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.json");
    io::write_json(&p, &[1, 2, 3]).unwrap();
    io::write_json(&p, &[4]).unwrap();
    let names: Vec<_> = fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(names.len(), 1);
    let back: Vec<i32> = io::read_json(&p).unwrap();
    assert_eq!(back, [4]);
}
