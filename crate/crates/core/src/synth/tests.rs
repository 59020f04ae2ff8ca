use super::*;
use alloc::vec;
use core::f64::consts::FRAC_PI_2;

fn straight(len: f64, speed: f64, rate: f64) -> SyntheticTrajectory {
    let w = [Vec2::new(0.0, 0.0), Vec2::new(len / 2.0, 0.0), Vec2::new(len, 0.0)];
    generate_spline_trajectory(&w, speed, rate).unwrap()
}

#[test]
fn straight_line_has_constant_steps() {
    let s = straight(10.0, 1.2, 50.0);
    let inertial = &s.inertial;
    for k in 1..inertial.len() {
        assert!((inertial.speeds()[k] - 0.024).abs() < 1e-9);
        assert!(inertial.headings()[k].abs() < 1e-9);
    }
    assert!((inertial.timestamps()[1] - 0.02).abs() < 1e-15);
    let last = *s.ground_truth.positions.last().unwrap();
    assert!((last.x - 0.024 * (inertial.len() - 1) as f64).abs() < 1e-9);
}

#[test]
fn closed_square_returns_home() {
    let w = [
        Vec2::new(0.0, 0.0),
        Vec2::new(10.0, 0.0),
        Vec2::new(10.0, 10.0),
        Vec2::new(0.0, 10.0),
        Vec2::new(0.0, 0.001),
    ];
    let s = generate_spline_trajectory(&w, 1.0, 10.0).unwrap();
    let end = *s.ground_truth.positions.last().unwrap();
    assert!(end.norm() < 0.01 * s.inertial.path_length());
}

#[test]
fn dead_reckoning_reproduces_ground_truth() {
    let w = CorridorGrid::default().random_walk(300.0, 9).unwrap();
    let s = generate_spline_trajectory(&w, 1.2, 50.0).unwrap();
    let mut p = CorrectionParams::identity(&s.inertial, 100.0, 20.0);
    p.start_offset = s.start;
    let again = integrate(&s.inertial, &p).unwrap();
    for (a, b) in again.positions.iter().zip(&s.ground_truth.positions) {
        assert!(a.distance(*b) < 1e-6);
    }
    assert_eq!(s.start, w[0]);
}

#[test]
fn zero_corruption_is_identity() {
    let s = straight(20.0, 1.0, 10.0);
    let c = corrupt(&s.inertial, &CorruptionSpec::default()).unwrap();
    assert_eq!(c, s.inertial);
}

#[test]
fn pure_drift_rotates_heading_linearly() {
    let t: Vec<f64> = (0..=600).map(f64::from).collect();
    let traj = InertialTrajectory::new(t.clone(), vec![1.0; t.len()], vec![0.0; t.len()]).unwrap();
    let spec = CorruptionSpec {
        heading_drift_rate: 0.5f64.to_radians(),
        ..CorruptionSpec::default()
    };
    let c = corrupt(&traj, &spec).unwrap();
    let end = *c.headings().last().unwrap();
    assert!((end - 300f64.to_radians()).abs() < 1e-12);
    assert_eq!(c.speeds(), traj.speeds());
}

#[test]
fn scale_multiplies_speeds() {
    let s = straight(20.0, 1.0, 10.0);
    let spec = CorruptionSpec {
        scale_factor: 1.15,
        ..CorruptionSpec::default()
    };
    let c = corrupt(&s.inertial, &spec).unwrap();
    for (a, b) in c.speeds().iter().zip(s.inertial.speeds()) {
        assert!((a - 1.15 * b).abs() < 1e-15);
    }
    assert_eq!(c.headings(), s.inertial.headings());
    assert!(corrupt(&s.inertial, &CorruptionSpec { scale_factor: 0.0, ..spec }).is_err());
}

#[test]
fn random_spec_stays_in_range() {
    for seed in 0..200 {
        let s = CorruptionSpec::random(seed);
        assert!(s.heading_drift_rate.abs() <= 1f64.to_radians() + 1e-15);
        assert!((0.85..=1.2).contains(&s.scale_factor));
    }
}

fn dense_line(duration: f64) -> PositionSeries {
    let n = duration as usize + 1;
    PositionSeries::new(
        (0..n).map(|i| i as f64).collect(),
        (0..n).map(|i| Vec2::new(i as f64, 0.0)).collect(),
    )
    .unwrap()
}

#[test]
fn fixes_are_counted_inclusively() {
    let gt = dense_line(600.0);
    let f = simulate_flp(&gt, 60.0, 0.0, 0.0, 1).unwrap();
    assert_eq!(f.len(), 11);
    assert_eq!(f[10].t, 600.0);
    assert!(f.iter().all(|x| x.position == gt.position_at(x.t)));
    assert!(simulate_flp(&gt, 0.0, 0.0, 0.0, 1).is_err());
}

#[test]
fn fix_noise_is_unbiased() {
    let gt = dense_line(10_000.0);
    let f = simulate_flp(&gt, 1.0, 5.0, 10.0, 3).unwrap();
    assert!(f.len() >= 10_000);
    let n = f.len() as f64;
    let mut mean = Vec2::ZERO;
    let mut var = 0.0;
    for x in &f {
        let e = x.position - gt.position_at(x.t);
        mean += e * (1.0 / n);
        var += e.dot(e) / (2.0 * n);
        assert_eq!(x.accuracy, 10.0);
    }
    // Standard error of the mean is 5/√10⁴ = 0.05.
    assert!(mean.norm() < 0.2, "{mean:?}");
    assert!((libm::sqrt(var) - 5.0).abs() < 0.2);
}

#[test]
fn seeds_are_reproducible() {
    let gt = dense_line(600.0);
    assert_eq!(simulate_flp(&gt, 60.0, 5.0, 10.0, 4), simulate_flp(&gt, 60.0, 5.0, 10.0, 4));
    assert_ne!(simulate_flp(&gt, 60.0, 5.0, 10.0, 4), simulate_flp(&gt, 60.0, 5.0, 10.0, 5));
}

#[test]
fn grid_registration_and_walk() {
    let g = CorridorGrid::default();
    let reg = g.registration(2.5);
    assert_eq!(reg.world_to_pixel(Vec2::new(0.0, 250.0)), Vec2::ZERO);
    assert_eq!(reg.world_to_pixel(Vec2::new(0.0, 0.0)), Vec2::new(0.0, 625.0));
    let plan = g.render(2.5, 0).unwrap();
    let w = g.random_walk(500.0, 2).unwrap();
    let mut length = 0.0;
    for pair in w.windows(2) {
        length += pair[0].distance(pair[1]);
        // Consecutive waypoints share a corridor line.
        assert!((pair[0].x - pair[1].x).abs() < 1e-9 || (pair[0].y - pair[1].y).abs() < 1e-9);
    }
    assert!(length >= 500.0);
    for p in &w {
        let px = reg.world_to_pixel(*p);
        assert!(plan.class_at(px.x as usize, px.y as usize).is_walkable());
    }
}

struct Fixture {
    synth: SyntheticTrajectory,
    plan: FloorplanRaster,
}

fn fixture() -> Fixture {
    let grid = CorridorGrid::default();
    let w = grid.random_walk(400.0, 11).unwrap();
    Fixture {
        synth: generate_spline_trajectory(&w, 1.2, 10.0).unwrap(),
        plan: grid.render(2.5, 11).unwrap(),
    }
}

fn clean_options() -> TrainingOptions {
    TrainingOptions {
        perturb_std_px: 0.0,
        augmentation: Augmentation::Fixed { flip: false, rotation: 0.0 },
        ..TrainingOptions::default()
    }
}

#[test]
fn clean_samples_have_zero_flow() {
    let f = fixture();
    let s = make_training_samples(&f.synth.inertial, &f.synth.ground_truth, &f.plan, 5, 1, &clean_options()).unwrap();
    assert_eq!(s.len(), 5);
    for sample in &s {
        assert!(sample.frame_targets.iter().all(|d| d.norm() < 1e-6));
        assert!(sample.target.flow.iter().all(|v| v.abs() < 1e-6));
        assert!(sample.frame_targets.len() >= 10);
    }
}

#[test]
fn default_count_and_channel_shapes() {
    let f = fixture();
    let corrupted = corrupt(&f.synth.inertial, &CorruptionSpec::random(3)).unwrap();
    let s = make_training_samples(
        &corrupted,
        &f.synth.ground_truth,
        &f.plan,
        DEFAULT_SAMPLES_PER_TRAJECTORY,
        3,
        &TrainingOptions::default(),
    )
    .unwrap();
    assert_eq!(s.len(), 20);
    for sample in &s {
        assert_eq!(sample.input.image.len(), 6 * raster::PLANE);
        assert_eq!(sample.target.flow.len(), 2 * raster::PLANE);
        assert_eq!(sample.target.mask, sample.input.trajectory_mask());
    }
}

#[test]
fn targets_recover_truth() {
    let f = fixture();
    let corrupted = corrupt(&f.synth.inertial, &CorruptionSpec::random(8)).unwrap();
    let s = make_training_samples(&corrupted, &f.synth.ground_truth, &f.plan, 10, 8, &TrainingOptions::default())
        .unwrap();
    for sample in &s {
        for ((p, d), t) in sample.input.frame_pixels.iter().zip(&sample.frame_targets).zip(&sample.frame_truth) {
            assert!((*p + *d).distance(*t) < 1e-9);
        }
        // The last frame is painted last, so its own pixel holds its target.
        let p = *sample.input.frame_pixels.last().unwrap();
        let d = *sample.frame_targets.last().unwrap();
        let read = sample.target.at(libm::floor(p.x) as usize, libm::floor(p.y) as usize);
        assert!(read.distance(d) < 1e-3 * (1.0 + d.norm()));
    }
}

#[test]
fn flip_negates_horizontal_flow() {
    let f = fixture();
    let corrupted = corrupt(&f.synth.inertial, &CorruptionSpec::random(5)).unwrap();
    let plain = TrainingOptions {
        augmentation: Augmentation::Fixed { flip: false, rotation: 0.0 },
        ..TrainingOptions::default()
    };
    let flipped = TrainingOptions {
        augmentation: Augmentation::Fixed { flip: true, rotation: 0.0 },
        ..plain
    };
    let a = make_training_samples(&corrupted, &f.synth.ground_truth, &f.plan, 4, 5, &plain).unwrap();
    let b = make_training_samples(&corrupted, &f.synth.ground_truth, &f.plan, 4, 5, &flipped).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert!(y.flipped && !x.flipped);
        let n = x.frame_targets.len().min(y.frame_targets.len());
        for (p, q) in x.frame_targets[..n].iter().zip(&y.frame_targets[..n]) {
            assert!((p.x + q.x).abs() < 1e-9 && (p.y - q.y).abs() < 1e-9);
        }
    }
}

#[test]
fn rotation_turns_flow() {
    let f = fixture();
    let corrupted = corrupt(&f.synth.inertial, &CorruptionSpec::random(6)).unwrap();
    let opts = |rotation| TrainingOptions {
        augmentation: Augmentation::Fixed { flip: false, rotation },
        ..TrainingOptions::default()
    };
    let a = make_training_samples(&corrupted, &f.synth.ground_truth, &f.plan, 3, 6, &opts(0.0)).unwrap();
    let b = make_training_samples(&corrupted, &f.synth.ground_truth, &f.plan, 3, 6, &opts(FRAC_PI_2)).unwrap();
    for (x, y) in a.iter().zip(&b) {
        let n = x.frame_targets.len().min(y.frame_targets.len());
        for (p, q) in x.frame_targets[..n].iter().zip(&y.frame_targets[..n]) {
            assert!(p.rotate(FRAC_PI_2).distance(*q) < 1e-9);
        }
    }
}

#[test]
fn samples_are_deterministic() {
    let f = fixture();
    let run = || {
        make_training_samples(&f.synth.inertial, &f.synth.ground_truth, &f.plan, 3, 42, &TrainingOptions::default())
            .unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn mismatched_ground_truth_is_rejected() {
    let f = fixture();
    let short = f.synth.truncated(10.0).unwrap();
    assert!(make_training_samples(&f.synth.inertial, &short.ground_truth, &f.plan, 1, 0, &clean_options()).is_err());
    assert!(make_training_samples(&f.synth.inertial, &f.synth.ground_truth, &f.plan, 0, 0, &clean_options()).is_err());
}
