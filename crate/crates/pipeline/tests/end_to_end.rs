//! Full pipeline run over a hand-built multi-day event stream.

use chrono::{DateTime, TimeZone, Utc};

use modechoice_core::choice_data::{load_dataset, Mode, PersonProfile, Source};
use modechoice_pipeline::events::{EventKind, GpsEvent};
use modechoice_pipeline::providers::{SyntheticRouting, SyntheticWeather};
use modechoice_pipeline::run::{run_pipeline, PipelineConfig};

const HOME: (f64, f64) = (43.7000, -79.4000);
const WORK: (f64, f64) = (43.6500, -79.3800);

fn at(day: u32, h: u32, m: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2025, 3, day, h, m, 0).unwrap()
}

fn ev(pid: &str, ts: DateTime<Utc>, pos: (f64, f64), kind: EventKind, mode: Option<&str>) -> GpsEvent {
    GpsEvent {
        person_id: pid.to_string(),
        timestamp: ts,
        latitude: pos.0,
        longitude: pos.1,
        kind,
        mode_label: mode.map(|s| s.to_string()),
    }
}

fn lerp(a: (f64, f64), b: (f64, f64), f: f64) -> (f64, f64) {
    (a.0 + (b.0 - a.0) * f, a.1 + (b.1 - a.1) * f)
}

/// A commuting person: home overnight, a morning trip to work (varied mode),
/// an evening trip home, every day for ten days.
fn commuter(pid: &str, mode: &str) -> Vec<GpsEvent> {
    let mut events = Vec::new();
    for day in 3..=12u32 {
        // Overnight stay at home (covers the night window).
        events.push(ev(pid, at(day, 0, 0), HOME, EventKind::Stay, None));
        events.push(ev(pid, at(day, 6, 55), HOME, EventKind::Stay, None));
        // Morning commute: sampled track positions between home and work.
        for (i, f) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            events.push(ev(
                pid,
                at(day, 8, (i * 6) as u32),
                lerp(HOME, WORK, *f),
                EventKind::Track,
                Some(mode),
            ));
        }
        // Workday stay.
        events.push(ev(pid, at(day, 9, 0), WORK, EventKind::Stay, None));
        events.push(ev(pid, at(day, 16, 55), WORK, EventKind::Stay, None));
        // Evening commute home.
        for (i, f) in [0.0, 0.25, 0.5, 0.75, 1.0].iter().enumerate() {
            events.push(ev(
                pid,
                at(day, 17, (i * 6) as u32),
                lerp(WORK, HOME, *f),
                EventKind::Track,
                Some(mode),
            ));
        }
        // Late-evening stay back at home.
        events.push(ev(pid, at(day, 22, 0), HOME, EventKind::Stay, None));
        events.push(ev(pid, at(day, 23, 55), HOME, EventKind::Stay, None));
    }
    events
}

fn survey_person(pid: &str, car: bool, bike: bool) -> PersonProfile {
    PersonProfile {
        person_id: pid.to_string(),
        migrant: pid.ends_with('m'),
        full_time: true,
        student: false,
        child_0_10: false,
        safe: true,
        cycling_friendly: true,
        car_owned: car,
        car_observed: false,
        bike_owned: bike,
        integration_raw: if pid.ends_with('m') { 6.7 } else { 8.5 },
        integration_centred: 0.0,
    }
}

#[test]
fn pipeline_produces_loadable_estimation_files() {
    let mut events = commuter("p-car", "car");
    events.extend(commuter("p-bus-m", "bus"));
    let survey = vec![survey_person("p-car", true, false), survey_person("p-bus-m", false, true)];

    let routing = SyntheticRouting::new(7);
    let weather = SyntheticWeather::new(7);
    let (observations, persons, report) =
        run_pipeline(&events, &survey, &routing, &weather, &PipelineConfig::default()).unwrap();

    assert_eq!(report.persons_out, 2);
    // Ten days x two trips each.
    assert_eq!(report.trips_detected, 40);
    assert!(report.observations_out > 0);
    assert!(report.sp_eligible > 0, "commute trips must trigger the SP gate");
    assert!(observations.iter().all(|o| o.source == Source::Rp));

    // Observed car use flows into the persons table.
    let car_person = persons.iter().find(|p| p.person_id == "p-car").unwrap();
    assert!(car_person.car_observed);

    // Bus trips carry a decomposed chosen alternative; purpose marks the
    // commute.
    let bus_obs: Vec<_> = observations.iter().filter(|o| o.chosen == Mode::Bus).collect();
    assert!(!bus_obs.is_empty());
    assert!(bus_obs.iter().all(|o| o.purpose_work_study));

    // Files round-trip through the standard loader.
    let dir = tempfile::tempdir().unwrap();
    let obs_path = dir.path().join("observations.csv");
    let persons_path = dir.path().join("persons.csv");
    modechoice_core::choice_data::write_observations(&obs_path, &observations).unwrap();
    modechoice_core::choice_data::write_persons(&persons_path, &persons).unwrap();
    let dataset = load_dataset(&obs_path, &persons_path).unwrap();
    assert_eq!(dataset.n_observations(), observations.len());
    assert_eq!(dataset.n_persons(), 2);
    // Centred integration: raw values 8.5 and 6.7 centre at the mean.
    let migrant_idx = dataset.person_index("p-bus-m").unwrap();
    assert!((dataset.person(migrant_idx).integration_centred + 0.9).abs() < 1e-9);
}

#[test]
fn pipeline_is_deterministic_given_the_same_inputs() {
    let events = commuter("p-car", "car");
    let survey = vec![survey_person("p-car", true, false)];
    let routing = SyntheticRouting::new(7);
    let weather = SyntheticWeather::new(7);
    let (a, _, _) =
        run_pipeline(&events, &survey, &routing, &weather, &PipelineConfig::default()).unwrap();
    let (b, _, _) =
        run_pipeline(&events, &survey, &routing, &weather, &PipelineConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn absorbed_transfer_walks_never_become_independent_observations() {
    // Ten days of walk -> bus -> walk journeys: the access and egress walks
    // absorb into the bus trip's decomposition and must not surface as
    // separate walk observations.
    let stop = (43.6980, -79.3990);
    let alight = (43.6520, -79.3810);
    let mut events = Vec::new();
    for day in 3..=12u32 {
        events.push(ev("p", at(day, 0, 0), HOME, EventKind::Stay, None));
        events.push(ev("p", at(day, 6, 55), HOME, EventKind::Stay, None));
        // Access walk home -> stop.
        events.push(ev("p", at(day, 7, 50), HOME, EventKind::Track, Some("walk")));
        events.push(ev("p", at(day, 7, 56), stop, EventKind::Track, Some("walk")));
        // Bus leg stop -> alighting point.
        events.push(ev("p", at(day, 7, 58), stop, EventKind::Track, Some("bus")));
        events.push(ev("p", at(day, 8, 20), alight, EventKind::Track, Some("bus")));
        // Egress walk alighting point -> work.
        events.push(ev("p", at(day, 8, 22), alight, EventKind::Track, Some("walk")));
        events.push(ev("p", at(day, 8, 29), WORK, EventKind::Track, Some("walk")));
        events.push(ev("p", at(day, 9, 0), WORK, EventKind::Stay, None));
        events.push(ev("p", at(day, 22, 0), HOME, EventKind::Stay, None));
        events.push(ev("p", at(day, 23, 55), HOME, EventKind::Stay, None));
    }
    let survey = vec![survey_person("p", false, false)];
    let routing = SyntheticRouting::new(7);
    let weather = SyntheticWeather::new(7);
    let (observations, _, report) =
        run_pipeline(&events, &survey, &routing, &weather, &PipelineConfig::default()).unwrap();
    assert_eq!(report.absorbed_walks, 20, "two walks absorbed per day");
    assert!(
        observations.iter().all(|o| o.chosen == Mode::Bus),
        "only the bus journeys remain as observations"
    );
    // The chosen bus alternative carries the decomposed out-of-vehicle time.
    for obs in &observations {
        let bus = obs.attributes(Mode::Bus).unwrap();
        assert!(bus.walk_access > 0.0, "decomposed access+egress walk expected");
    }
}

#[test]
fn fraudulent_person_is_screened_out_entirely() {
    let mut events = commuter("p-car", "car");
    // Zero-variance "trips": identical coordinates repeated.
    for i in 0..6 {
        events.push(ev(
            "fraud",
            at(3, 10, i * 7),
            (43.6, -79.3),
            EventKind::Track,
            Some("car"),
        ));
    }
    let survey = vec![survey_person("p-car", true, false), survey_person("fraud", true, false)];
    let routing = SyntheticRouting::new(7);
    let weather = SyntheticWeather::new(7);
    let (observations, persons, report) =
        run_pipeline(&events, &survey, &routing, &weather, &PipelineConfig::default()).unwrap();
    assert!(report.screening.per_person["fraud"].rejected_entirely);
    assert!(persons.iter().all(|p| p.person_id != "fraud"));
    assert!(observations.iter().all(|o| o.person_id != "fraud"));
}
