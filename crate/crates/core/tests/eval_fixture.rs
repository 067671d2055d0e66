use std::fs;
use std::path::PathBuf;

use osreid::cli::{ConfigArgs, ConfigFile};
use osreid::eval::{judge, report, EvalError, GroundTruth, MetricsReport};
use osreid::wire::read_events;
use osreid::{run_stream, DetectionEvent};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/metrics12").join(name)
}

fn load() -> (Vec<DetectionEvent>, osreid::ValidatedConfig) {
    let (header, events) = read_events(fs::read(fixture("events.jsonl")).unwrap().as_slice()).unwrap();
    let args = ConfigArgs { config: Some(fixture("config.toml")), ..Default::default() };
    let cfg: ConfigFile = args.resolve().unwrap().file;
    assert_eq!(cfg.system.d, header.d);
    (events, cfg.system.validate().unwrap())
}

#[test]
fn twelve_event_fixture_gives_hand_computed_metrics() {
    let (events, cfg) = load();
    assert_eq!(events.len(), 12);
    let (outcomes, _) = run_stream(&events, &cfg).unwrap();
    let got = report(&judge(&outcomes, &GroundTruth::from_events(&events)).unwrap());
    let want: MetricsReport =
        serde_json::from_str(&fs::read_to_string(fixture("expected.json")).unwrap()).unwrap();
    assert_eq!(got, want);
    assert_eq!((got.n_t, got.n_nt, got.n_t2t, got.n_nt2t), (5, 4, 3, 1));
    assert_eq!(got.ttr, Some(0.6));
    assert_eq!(got.ftr, Some(0.25));
}

#[test]
fn echoed_labels_agree_with_event_labels() {
    let (events, cfg) = load();
    let (outcomes, _) = run_stream(&events, &cfg).unwrap();
    assert_eq!(
        judge(&outcomes, &GroundTruth::from_outcomes(&outcomes)).unwrap(),
        judge(&outcomes, &GroundTruth::from_events(&events)).unwrap()
    );
}

#[test]
fn perfect_run_has_unit_ttr() {
    // One person seen three times in one place: first probe enrolls, the rest match.
    let (events, cfg) = load();
    let solo: Vec<DetectionEvent> = events[..3].to_vec();
    let (outcomes, _) = run_stream(&solo, &cfg).unwrap();
    let r = report(&judge(&outcomes, &GroundTruth::from_events(&solo)).unwrap());
    assert_eq!(r.ttr, Some(1.0));
    assert_eq!(r.ftr, Some(0.0));
}

#[test]
fn empty_run_reports_absent_ratios() {
    let r = report(&judge(&[], &GroundTruth::from_labels(Vec::<String>::new())).unwrap());
    assert_eq!((r.n_t, r.n_nt), (0, 0));
    assert!(r.ttr.is_none() && r.ftr.is_none() && r.precision.is_none() && r.accuracy.is_none());
}

#[test]
fn shifted_ground_truth_is_rejected() {
    let (events, cfg) = load();
    let (outcomes, _) = run_stream(&events, &cfg).unwrap();
    let shifted = GroundTruth::from_events(&events[1..]);
    assert!(matches!(judge(&outcomes, &shifted), Err(EvalError::LengthMismatch { .. })));
    let mut swapped = events.clone();
    swapped.swap(0, 1);
    assert!(matches!(
        judge(&outcomes, &GroundTruth::from_events(&swapped)),
        Err(EvalError::Misaligned { index: 0 })
    ));
}
