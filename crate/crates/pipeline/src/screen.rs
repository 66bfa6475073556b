//! Trajectory screening: impossible speeds, zero-variance coordinate runs,
//! and wholly failing persons.

use std::collections::BTreeMap;

use crate::events::{implied_speed_ms, GpsEvent};

/// 250 km/h in m/s; above intercity rail speeds in the study regions.
pub const MAX_PLAUSIBLE_SPEED_MS: f64 = 69.4;
/// Minimum run of identical coordinates that counts as zero-variance.
pub const ZERO_VARIANCE_MIN_RUN: usize = 3;

/// Screening outcome for one person.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PersonScreenReport {
    pub impossible_speed: usize,
    pub zero_variance: usize,
    pub kept: usize,
    pub rejected_entirely: bool,
}

/// Full screening report keyed by person.
#[derive(Debug, Clone, Default)]
pub struct ScreenReport {
    pub per_person: BTreeMap<String, PersonScreenReport>,
}

impl ScreenReport {
    pub fn total_flagged(&self) -> usize {
        self.per_person.values().map(|r| r.impossible_speed + r.zero_variance).sum()
    }
}

/// Screen one person's time-ordered events.
///
/// An event is dropped when the segment arriving at it implies a speed above
/// the plausibility threshold, or when it belongs to a trip-like run of
/// three or more identical coordinates. Stationary stays naturally repeat a
/// coordinate, so the zero-variance rule only looks at waypoint and track
/// events. A person whose entire record fails is rejected.
pub fn screen_person(events: &[GpsEvent]) -> (Vec<GpsEvent>, PersonScreenReport) {
    use crate::events::EventKind;
    let mut report = PersonScreenReport::default();
    let n = events.len();
    let mut drop = vec![false; n];

    // Zero-variance runs of identical coordinates among trip-like events.
    let mut run_start = 0;
    for i in 1..=n {
        let same = i < n
            && events[i].kind != EventKind::Stay
            && events[run_start].kind != EventKind::Stay
            && events[i].latitude == events[run_start].latitude
            && events[i].longitude == events[run_start].longitude;
        if !same {
            if events[run_start].kind != EventKind::Stay && i - run_start >= ZERO_VARIANCE_MIN_RUN
            {
                for flag in drop.iter_mut().take(i).skip(run_start) {
                    *flag = true;
                }
                report.zero_variance += i - run_start;
            }
            run_start = i;
        }
    }

    // Impossible speeds between consecutive surviving events.
    let mut prev: Option<usize> = None;
    for i in 0..n {
        if drop[i] {
            continue;
        }
        if let Some(p) = prev {
            if implied_speed_ms(&events[p], &events[i]) > MAX_PLAUSIBLE_SPEED_MS {
                drop[i] = true;
                report.impossible_speed += 1;
                continue;
            }
        }
        prev = Some(i);
    }

    let kept: Vec<GpsEvent> =
        events.iter().zip(&drop).filter(|(_, &d)| !d).map(|(e, _)| e.clone()).collect();
    report.kept = kept.len();
    report.rejected_entirely = kept.is_empty() && !events.is_empty();
    (kept, report)
}

/// Screen a multi-person event stream (events grouped or interleaved by
/// person; per-person time order required). Persons whose entire record
/// fails are removed.
pub fn screen_trajectories(events: &[GpsEvent]) -> (Vec<GpsEvent>, ScreenReport) {
    let mut by_person: BTreeMap<String, Vec<GpsEvent>> = BTreeMap::new();
    for e in events {
        by_person.entry(e.person_id.clone()).or_default().push(e.clone());
    }
    let mut clean = Vec::with_capacity(events.len());
    let mut report = ScreenReport::default();
    for (pid, person_events) in by_person {
        let (kept, person_report) = screen_person(&person_events);
        if !person_report.rejected_entirely {
            clean.extend(kept);
        }
        report.per_person.insert(pid, person_report);
    }
    (clean, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::EventKind;
    use chrono::{TimeZone, Utc};

    fn ev(pid: &str, seconds: i64, lat: f64, lon: f64) -> GpsEvent {
        GpsEvent {
            person_id: pid.to_string(),
            timestamp: Utc.with_ymd_and_hms(2025, 3, 10, 8, 0, 0).unwrap()
                + chrono::Duration::seconds(seconds),
            latitude: lat,
            longitude: lon,
            kind: EventKind::Waypoint,
            mode_label: None,
        }
    }

    #[test]
    fn hundred_km_in_a_minute_is_flagged() {
        // ~100 km apart, 60 s apart: roughly 1,667 m/s.
        let events = vec![ev("p", 0, 43.65, -79.38), ev("p", 60, 44.55, -79.38)];
        let (kept, report) = screen_person(&events);
        assert_eq!(report.impossible_speed, 1);
        assert_eq!(kept.len(), 1);
    }

    #[test]
    fn five_identical_coordinates_are_flagged_as_zero_variance() {
        let events: Vec<GpsEvent> =
            (0..5).map(|i| ev("p", i * 600, 43.65, -79.38)).collect();
        let (kept, report) = screen_person(&events);
        assert_eq!(report.zero_variance, 5);
        assert!(kept.is_empty());
        assert!(report.rejected_entirely);
    }

    #[test]
    fn ordinary_urban_track_passes() {
        // ~30 km/h: 500 m per minute.
        let events: Vec<GpsEvent> = (0..10)
            .map(|i| ev("p", i * 60, 43.65 + 0.0045 * i as f64, -79.38))
            .collect();
        let (kept, report) = screen_person(&events);
        assert_eq!(kept.len(), 10);
        assert_eq!(report.impossible_speed + report.zero_variance, 0);
    }

    #[test]
    fn short_identical_pairs_survive() {
        let events = vec![
            ev("p", 0, 43.65, -79.38),
            ev("p", 60, 43.65, -79.38),
            ev("p", 120, 43.66, -79.38),
        ];
        let (kept, report) = screen_person(&events);
        assert_eq!(report.zero_variance, 0);
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn rejected_person_is_dropped_from_the_stream() {
        let mut events: Vec<GpsEvent> =
            (0..4).map(|i| ev("fraud", i * 600, 43.65, -79.38)).collect();
        events.push(ev("ok", 0, 43.65, -79.38));
        events.push(ev("ok", 60, 43.651, -79.38));
        let (clean, report) = screen_trajectories(&events);
        assert!(clean.iter().all(|e| e.person_id == "ok"));
        assert!(report.per_person["fraud"].rejected_entirely);
        assert!(!report.per_person["ok"].rejected_entirely);
    }
}
