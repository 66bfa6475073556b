//! Transit journey decomposition.
//!
//! Starting from a matched transit track, the event sequence is searched
//! backward for contiguous access walking legs and stationary platform
//! waits, and forward for egress walking legs. Each linkage must satisfy
//! spatial continuity (gap of at most 250 m) and temporal plausibility (gap
//! of at most 25 min); a violation terminates the scan. Linked walks are
//! recorded so they are never double-counted as independent trips.

use crate::error::{PipelineError, Result};
use crate::events::{haversine_m, Episode, EventKind};
use crate::screen::MAX_PLAUSIBLE_SPEED_MS;

/// Maximum spatial gap between linked legs, metres.
pub const MAX_LINK_DISTANCE_M: f64 = 250.0;
/// Maximum temporal gap between linked legs, minutes.
pub const MAX_LINK_GAP_MIN: f64 = 25.0;

/// Decomposed out-of-vehicle and in-vehicle components, minutes.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitDecomposition {
    pub access_walk: f64,
    pub platform_wait: f64,
    pub in_vehicle: f64,
    pub egress_walk: f64,
    pub teleport_detected: bool,
    /// Episode indices of walk legs absorbed into access/egress.
    pub absorbed_walk_ids: Vec<usize>,
}

impl TransitDecomposition {
    /// Total journey time covered by the components.
    pub fn total(&self) -> f64 {
        self.access_walk + self.platform_wait + self.in_vehicle + self.egress_walk
    }
}

fn is_walk(episode: &Episode) -> bool {
    episode.kind == EventKind::Track
        && episode.mode_label.as_deref().map(|m| m.eq_ignore_ascii_case("walk")).unwrap_or(false)
}

/// Gap between two adjacent episodes (from `a`'s end to `b`'s start):
/// distance in metres, elapsed minutes, and implied speed over the gap.
fn transition(a: &Episode, b: &Episode) -> (f64, f64, f64) {
    let d = haversine_m(a.end_lat, a.end_lon, b.start_lat, b.start_lon);
    let dt_min = (b.start - a.end).num_milliseconds() as f64 / 60_000.0;
    let speed = if dt_min <= 0.0 {
        if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        d / (dt_min * 60.0)
    };
    (d, dt_min, speed)
}

/// Decompose the journey around the transit episode at `transit_index`.
pub fn decompose_transit_journey(
    episodes: &[Episode],
    transit_index: usize,
) -> Result<TransitDecomposition> {
    let transit = episodes.get(transit_index).ok_or(PipelineError::EmptyInput(
        "transit episode index out of range",
    ))?;
    if transit.kind != EventKind::Track {
        return Err(PipelineError::EmptyInput("transit episode is not a track"));
    }

    let mut out = TransitDecomposition {
        access_walk: 0.0,
        platform_wait: 0.0,
        in_vehicle: transit.duration_min(),
        egress_walk: 0.0,
        teleport_detected: false,
        absorbed_walk_ids: Vec::new(),
    };

    // Backward scan from the boarding point: walks and stationary waits.
    let mut cursor = transit_index;
    while cursor > 0 {
        let candidate = &episodes[cursor - 1];
        if candidate.person_id != transit.person_id {
            break;
        }
        let (gap_m, gap_min, speed) = transition(candidate, &episodes[cursor]);
        if speed > MAX_PLAUSIBLE_SPEED_MS {
            out.teleport_detected = true;
            break;
        }
        if gap_m > MAX_LINK_DISTANCE_M || gap_min > MAX_LINK_GAP_MIN || gap_min < 0.0 {
            break;
        }
        if is_walk(candidate) {
            out.access_walk += candidate.duration_min();
            out.absorbed_walk_ids.push(cursor - 1);
        } else if candidate.kind == EventKind::Stay {
            out.platform_wait += candidate.duration_min();
        } else {
            break;
        }
        cursor -= 1;
    }

    // Forward scan from the alighting point: egress walks only.
    let mut cursor = transit_index;
    while cursor + 1 < episodes.len() {
        let candidate = &episodes[cursor + 1];
        if candidate.person_id != transit.person_id {
            break;
        }
        let (gap_m, gap_min, speed) = transition(&episodes[cursor], candidate);
        if speed > MAX_PLAUSIBLE_SPEED_MS {
            out.teleport_detected = true;
            break;
        }
        if gap_m > MAX_LINK_DISTANCE_M || gap_min > MAX_LINK_GAP_MIN || gap_min < 0.0 {
            break;
        }
        if is_walk(candidate) {
            out.egress_walk += candidate.duration_min();
            out.absorbed_walk_ids.push(cursor + 1);
        } else {
            break;
        }
        cursor += 1;
    }

    out.absorbed_walk_ids.sort_unstable();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{DateTime, TimeZone, Utc};

    fn t(seconds: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2025, 3, 10, 8, 0, 0).unwrap() + chrono::Duration::seconds(seconds)
    }

    fn episode(
        kind: EventKind,
        mode: Option<&str>,
        start_s: i64,
        end_s: i64,
        start_pos: (f64, f64),
        end_pos: (f64, f64),
    ) -> Episode {
        Episode {
            person_id: "p".to_string(),
            kind,
            mode_label: mode.map(|m| m.to_string()),
            start: t(start_s),
            end: t(end_s),
            start_lat: start_pos.0,
            start_lon: start_pos.1,
            end_lat: end_pos.0,
            end_lon: end_pos.1,
            event_indices: vec![],
        }
    }

    use crate::fixtures::worked_bus_journey as worked_example;

    #[test]
    fn worked_example_recovers_the_published_components() {
        let (episodes, transit) = worked_example();
        let out = decompose_transit_journey(&episodes, transit).unwrap();
        assert!((out.access_walk - 4.3).abs() < 0.05, "access {}", out.access_walk);
        assert!((out.platform_wait - 3.7).abs() < 0.05, "wait {}", out.platform_wait);
        assert!((out.egress_walk - 5.6).abs() < 0.05, "egress {}", out.egress_walk);
        assert!((out.in_vehicle - 14.0).abs() < 0.05);
        assert!(!out.teleport_detected);
        assert_eq!(out.absorbed_walk_ids, vec![0, 3]);
        // Components are nonnegative and account for the journey span minus
        // the transition gaps (90 s here), within the stated tolerance.
        let span_min = (episodes[3].end - episodes[0].start).num_milliseconds() as f64 / 60_000.0;
        assert!(out.total() <= span_min + 0.1);
        assert!((span_min - out.total() - 1.5).abs() < 0.1);
    }

    #[test]
    fn walk_ending_too_far_from_the_stop_is_not_linked() {
        let (mut episodes, transit) = worked_example();
        // Move the access walk's end ~300 m away from the wait location.
        episodes[0].end_lat = 43.6473;
        episodes[0].end_lon = -79.3800;
        let out = decompose_transit_journey(&episodes, transit).unwrap();
        assert!((out.platform_wait - 3.7).abs() < 0.05);
        assert_eq!(out.access_walk, 0.0, "access walk must not link across 300 m");
        assert_eq!(out.absorbed_walk_ids, vec![3]);
    }

    #[test]
    fn gap_beyond_25_minutes_is_not_linked() {
        let (mut episodes, transit) = worked_example();
        // Delay the wait + bus by shifting the walk 26 minutes earlier.
        episodes[0].start = t(-1560 - 258);
        episodes[0].end = t(-1560);
        let out = decompose_transit_journey(&episodes, transit).unwrap();
        assert_eq!(out.access_walk, 0.0);
        assert!((out.platform_wait - 3.7).abs() < 0.05);
    }

    #[test]
    fn no_surrounding_walks_means_zero_out_of_vehicle_components() {
        let stop = (43.6500, -79.3800);
        let alight = (43.6700, -79.3600);
        let episodes =
            vec![episode(EventKind::Track, Some("subway"), 0, 900, stop, alight)];
        let out = decompose_transit_journey(&episodes, 0).unwrap();
        assert_eq!(out.access_walk, 0.0);
        assert_eq!(out.platform_wait, 0.0);
        assert_eq!(out.egress_walk, 0.0);
        assert!((out.total() - out.in_vehicle).abs() < 1e-12);
    }

    #[test]
    fn teleport_truncates_the_scan_and_sets_the_flag() {
        let (mut episodes, transit) = worked_example();
        // Access walk ends 200 m away but only one second before the wait:
        // implied speed far above the threshold.
        episodes[0].end_lat = 43.64825;
        episodes[0].end_lon = -79.3800;
        episodes[0].end = t(287);
        let out = decompose_transit_journey(&episodes, transit).unwrap();
        assert!(out.teleport_detected);
        assert_eq!(out.access_walk, 0.0);
    }

    #[test]
    fn components_are_nonnegative_and_sum_consistently() {
        let (episodes, transit) = worked_example();
        let out = decompose_transit_journey(&episodes, transit).unwrap();
        for part in [out.access_walk, out.platform_wait, out.in_vehicle, out.egress_walk] {
            assert!(part >= 0.0);
        }
        let sum = out.access_walk + out.platform_wait + out.in_vehicle + out.egress_walk;
        assert!((out.total() - sum).abs() < 0.1);
    }
}
