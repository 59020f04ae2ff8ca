use std::fs;
use std::thread;
use std::time::Duration;

use locfuse::backend::{ExternalFlow, Recording};
use locfuse::exchange::{self, Header, HEADER_LEN, MAGIC};
use locfuse_core::pipeline::{FlowBackend, OracleFlow};
use locfuse_core::raster::{self, FlowField, SegmentSample, CROP, PLANE};
use locfuse_core::synth::{self, CorridorGrid, TrainingOptions};
use locfuse_core::{GeoRegistration, PositionSeries, Vec2};
use proptest::prelude::*;

fn reg() -> GeoRegistration {
    GeoRegistration::new(Vec2::ZERO, 2.5, 0.0, false).unwrap()
}

fn series() -> PositionSeries {
    PositionSeries::new(
        (0..300).map(|i| i as f64 * 0.5).collect(),
        (0..300).map(|i| Vec2::new(20.0 + 0.1 * i as f64, 30.0 + 0.05 * i as f64)).collect(),
    )
    .unwrap()
}

fn samples() -> Vec<SegmentSample> {
    let grid = CorridorGrid {
        width_m: 150.0,
        height_m: 150.0,
        ..CorridorGrid::default()
    };
    let mut plan = grid.render(2.5, 0).unwrap();
    plan.registration = reg();
    raster::build_samples(&series(), &plan).unwrap()
}

#[test]
fn header_layout() {
    let dir = tempfile::tempdir().unwrap();
    let s = &samples()[0];
    exchange::write_input(dir.path(), 0, s).unwrap();
    let bytes = fs::read(exchange::input_path(dir.path(), 0)).unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 4 * 6 * PLANE);
    let head: serde_json::Value = serde_json::from_slice(bytes[..HEADER_LEN].trim_ascii_end()).unwrap();
    assert_eq!(head["magic"], MAGIC);
    assert_eq!(head["frame_range"][0], s.frame_range.start);
    assert_eq!(head["frame_range"][1], s.frame_range.end - 1);
    assert_eq!(head["crop_offset"][0], s.crop_offset.0);
    assert_eq!(head["span_s"], s.span);
    // Channel-major little-endian payload.
    let first = f32::from_le_bytes(bytes[HEADER_LEN..HEADER_LEN + 4].try_into().unwrap());
    assert_eq!(first, s.image[0]);
    let (h, data) = exchange::read_tensor(&exchange::input_path(dir.path(), 0)).unwrap();
    assert_eq!(h, Header::for_sample(s, 6));
    assert_eq!(data, s.image);
}

#[test]
fn malformed_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let s = &samples()[0];
    let path = exchange::flow_path(dir.path(), 0);
    exchange::write_flow(&path, s, &FlowField::zeros()).unwrap();
    let mut bytes = fs::read(&path).unwrap();
    bytes.pop();
    fs::write(&path, &bytes).unwrap();
    assert!(exchange::read_flow(&path).is_err());

    let mut bad_mask = exchange::flow_tensor(&FlowField::zeros());
    bad_mask[2 * PLANE] = 0.5;
    exchange::write_tensor(&path, &Header::for_sample(s, 3), &bad_mask).unwrap();
    assert!(exchange::read_flow(&path).is_err());

    let mut head = Header::for_sample(s, 3);
    head.magic = "NOPE1".into();
    exchange::write_tensor(&path, &head, &exchange::flow_tensor(&FlowField::zeros())).unwrap();
    assert!(exchange::read_flow(&path).is_err());

    let input = Header::for_sample(s, 6);
    exchange::write_tensor(&path, &input, &s.image).unwrap();
    assert!(exchange::read_flow(&path).is_err());
    assert!(exchange::write_tensor(&path, &input, &[0.0; 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn flow_round_trip_is_lossless(values in proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 64), stride in 1usize..5000) {
        let dir = tempfile::tempdir().unwrap();
        let s = &samples()[0];
        let mut flow = FlowField::zeros();
        for (i, v) in values.iter().enumerate() {
            let idx = (i * stride) % (2 * PLANE);
            flow.flow[idx] = *v;
            flow.mask[idx % PLANE] = true;
        }
        let path = exchange::flow_path(dir.path(), 3);
        exchange::write_flow(&path, s, &flow).unwrap();
        let (head, back) = exchange::read_flow(&path).unwrap();
        prop_assert_eq!(head.frame_range, [s.frame_range.start, s.frame_range.end - 1]);
        prop_assert_eq!(back.flow.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), flow.flow.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(back.mask, flow.mask);
    }
}

#[test]
fn training_samples_write_inputs_and_targets() {
    let dir = tempfile::tempdir().unwrap();
    let grid = CorridorGrid::default();
    let w = grid.random_walk(300.0, 1).unwrap();
    let t = synth::generate_spline_trajectory(&w, 1.2, 10.0).unwrap();
    let plan = grid.render(2.5, 1).unwrap();
    let s = synth::make_training_samples(&t.inertial, &t.ground_truth, &plan, 3, 1, &TrainingOptions::default()).unwrap();
    exchange::write_training_samples(dir.path(), &s).unwrap();
    for (k, sample) in s.iter().enumerate() {
        let (_, input) = exchange::read_tensor(&exchange::input_path(dir.path(), k)).unwrap();
        assert_eq!(input, sample.input.image);
        let (_, target) = exchange::read_flow(&exchange::target_path(dir.path(), k)).unwrap();
        assert_eq!(target, sample.target);
    }
}

/// A stand-in for the flow network: answers every input with a uniform flow.
fn answer_all(dir: &std::path::Path, flow: Vec2) {
    let mut k = 0;
    while let Ok((head, data)) = exchange::read_tensor(&exchange::input_path(dir, k)) {
        let mask: Vec<bool> = (0..PLANE).map(|i| (3..6).any(|c| data[c * PLANE + i] != 0.0)).collect();
        let field = FlowField::uniform(flow, mask);
        exchange::write_tensor(&exchange::flow_path(dir, k), &Header { channels: 3, ..head }, &exchange::flow_tensor(&field)).unwrap();
        k += 1;
    }
}

#[test]
fn polling_backend_reads_flows_written_by_another_process() {
    let dir = tempfile::tempdir().unwrap();
    let samples = samples();
    let mut ext = ExternalFlow::new(dir.path().to_path_buf());
    ext.poll_interval = Duration::from_millis(10);
    ext.timeout = Duration::from_secs(20);
    let iter_dir = ext.iteration_dir(0);
    let n = samples.len();
    let worker = thread::spawn(move || loop {
        if (0..n).all(|k| exchange::input_path(&iter_dir, k).exists()) {
            answer_all(&iter_dir, Vec2::new(5.0, 0.0));
            return;
        }
        thread::sleep(Duration::from_millis(5));
    });
    let flows = ext.predict(0, &samples, &series()).unwrap();
    worker.join().unwrap();
    assert_eq!(flows.len(), n);
    for (s, f) in samples.iter().zip(&flows) {
        assert_eq!(f.mask, s.trajectory_mask());
        for c in raster::apply_flow(s, f, &reg()).unwrap() {
            assert!(c.distance(Vec2::new(2.0, 0.0)) < 1e-9);
        }
    }
}

#[test]
fn polling_backend_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let mut ext = ExternalFlow::new(dir.path().to_path_buf());
    ext.timeout = Duration::from_millis(50);
    ext.poll_interval = Duration::from_millis(10);
    let err = ext.predict(1, &samples(), &series()).unwrap_err();
    assert!(matches!(err, locfuse_core::Error::Backend(_)));
    assert!(exchange::input_path(&dir.path().join("iter_2"), 0).exists());
}

#[test]
fn failing_or_missing_command_is_a_backend_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut ext = ExternalFlow::new(dir.path().to_path_buf());
    ext.command = vec!["false".into()];
    assert!(matches!(ext.predict(0, &samples(), &series()), Err(locfuse_core::Error::Backend(_))));
    ext.command = vec!["/nonexistent/flow-net".into()];
    assert!(matches!(ext.predict(0, &samples(), &series()), Err(locfuse_core::Error::Backend(_))));
    // Succeeds but writes nothing.
    ext.command = vec!["true".into()];
    assert!(matches!(ext.predict(0, &samples(), &series()), Err(locfuse_core::Error::Backend(_))));
}

#[test]
fn command_backend_substitutes_the_directory() {
    let dir = tempfile::tempdir().unwrap();
    let samples = samples();
    // Copy pre-computed flows into place from a shell command.
    let staged = dir.path().join("staged");
    for (k, s) in samples.iter().enumerate() {
        exchange::write_flow(&exchange::flow_path(&staged, k), s, &FlowField::uniform(Vec2::new(0.0, 2.5), s.trajectory_mask())).unwrap();
    }
    let mut ext = ExternalFlow::new(dir.path().join("x"));
    ext.command = vec!["sh".into(), "-c".into(), format!("cp {}/*_flow.bin {{dir}}/", staged.display())];
    let flows = ext.predict(0, &samples, &series()).unwrap();
    let c = raster::apply_flow(&samples[0], &flows[0], &reg()).unwrap();
    assert!(c[0].distance(Vec2::new(0.0, 1.0)) < 1e-9);
}

#[test]
fn recording_saves_oracle_exchange() {
    let dir = tempfile::tempdir().unwrap();
    let s = samples();
    let truth = series().displaced(&vec![Vec2::new(1.0, -1.0); 300]).unwrap();
    let mut rec = Recording {
        inner: OracleFlow::new(truth, reg()),
        root: dir.path().to_path_buf(),
    };
    let flows = rec.predict(0, &s, &series()).unwrap();
    let (_, back) = exchange::read_flow(&exchange::flow_path(&dir.path().join("iter_1"), 0)).unwrap();
    assert_eq!(back, flows[0]);
    assert_eq!(back.flow.len(), 2 * CROP * CROP);
}
