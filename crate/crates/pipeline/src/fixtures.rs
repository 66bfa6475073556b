//! Hand-built event-stream fixtures used by tests and the acceptance suite.

use chrono::{DateTime, TimeZone, Utc};

use crate::events::{Episode, EventKind};

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
        person_id: "fixture".to_string(),
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

/// A single observed bus trip with its surrounding out-of-vehicle legs:
/// a 4.3-minute access walk ending near the stop, a 3.7-minute platform
/// wait, the bus leg, and a 5.6-minute egress walk. Every transition
/// satisfies the 250 m / 25 min linkage constraints.
///
/// Returns the episode sequence and the index of the transit episode.
pub fn worked_bus_journey() -> (Vec<Episode>, usize) {
    let stop = (43.6500, -79.3800);
    let alight = (43.6700, -79.3600);
    let episodes = vec![
        episode(
            EventKind::Track,
            Some("walk"),
            0,
            258, // 4.3 min
            (43.6460, -79.3830),
            (43.64947, -79.38005),
        ),
        episode(EventKind::Stay, None, 288, 510, stop, stop), // 3.7 min
        episode(EventKind::Track, Some("bus"), 540, 1380, stop, alight),
        episode(
            EventKind::Track,
            Some("walk"),
            1410,
            1746, // 5.6 min
            (43.67035, -79.36004),
            (43.6730, -79.3570),
        ),
    ];
    (episodes, 2)
}
