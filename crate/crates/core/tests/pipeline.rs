//! End-to-end: simulate, store a bundle, fuse from disk, write and read back
//! the navigation log, evaluate.

use flownav::eval::{evaluate, TrackPoint, Window};
use flownav::fusion::{run_fusion, FusionConfig, SensorTimeline};
use flownav::io::{read_bundle, read_track, write_bundle, write_navlog_csv, TRUTH_FILE};
use flownav::sim::{generate, ScenarioConfig, TrajectoryConfig};

fn short_hover(seed: u64) -> ScenarioConfig {
    let mut config = ScenarioConfig::hover();
    config.seed = seed;
    if let TrajectoryConfig::Hover(h) = &mut config.trajectory {
        h.duration = 15.0;
    }
    config
}

#[test]
fn bundle_fuse_and_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = generate(&short_hover(4)).unwrap();
    let hash = write_bundle(dir.path(), &scenario).unwrap();

    let bundle = read_bundle(dir.path()).unwrap();
    assert_eq!(bundle.config, scenario.config);
    assert_eq!(bundle.config_hash, hash);
    assert_eq!(bundle.samples, scenario.samples);

    let timeline = SensorTimeline::from_samples(bundle.samples.clone()).unwrap();
    let fused = |use_flow| {
        let config = FusionConfig::for_scenario(&bundle.config, use_flow).unwrap();
        run_fusion(&timeline, &bundle.frames, &config).unwrap()
    };
    let (without, with) = (fused(false), fused(true));
    assert!(with.flow.updates > 0);
    assert_eq!(without.flow.updates, 0);
    assert_eq!(without.records.len(), with.records.len());

    let navlog = dir.path().join("navlog.csv");
    write_navlog_csv(&navlog, &hash, &with.records).unwrap();
    let (est, est_hash) = read_track(&navlog).unwrap();
    assert_eq!(est_hash.as_deref(), Some(hash.as_str()));
    let direct: Vec<TrackPoint> = with.records.iter().map(TrackPoint::from).collect();
    assert_eq!(est, direct);

    let (truth, truth_hash) = read_track(dir.path().join(TRUTH_FILE)).unwrap();
    assert_eq!(truth_hash.as_deref(), Some(hash.as_str()));
    let path = bundle.config.reference_path();
    let m = evaluate("flow", Some(4), &truth, &est, &path, &Window::default()).unwrap();
    assert!(m.samples > 0);
    // a hovering vehicle fused with GPS stays within a few metres
    assert!(m.box_half_width < 5.0, "{m:?}");
    let rmse = [m.rmse_north, m.rmse_east, m.rmse_down];
    assert!(rmse.iter().all(|r| r.is_finite() && *r < 3.0), "{m:?}");
}

#[test]
fn same_seed_same_log_different_seed_different_log() {
    let run = |seed| {
        let scenario = generate(&short_hover(seed)).unwrap();
        let timeline = SensorTimeline::from_samples(scenario.samples.clone()).unwrap();
        let config = FusionConfig::for_scenario(&scenario.config, true).unwrap();
        run_fusion(&timeline, &scenario.frames[..], &config).unwrap()
    };
    let (a, b, c) = (run(1), run(1), run(2));
    assert_eq!(a, b);
    assert_ne!(a.records, c.records);
}
