//! Home and work anchor inference from stay episodes.
//!
//! Stays are density-clustered (150 m radius, at least 3 stays), then scored.
//! Home combines night-presence share, distinct-nights share, and the share
//! of days where the cluster is the first or last stop (weights 0.5/0.3/0.2).
//! Work, among non-home clusters, combines weekday daytime hours, distinct
//! workdays, and arrival-time regularity with the same weights. All numeric
//! choices are conventions, overridable through [`AnchorConfig`].

use chrono::{Datelike, Timelike};

use crate::error::{PipelineError, Result};
use crate::events::{haversine_m, Episode, EventKind};

#[derive(Debug, Clone)]
pub struct AnchorConfig {
    pub cluster_radius_m: f64,
    pub min_stays_per_cluster: usize,
    /// Minimum distinct days of stays required before inference runs.
    pub min_days: usize,
    /// Night window for home scoring, local hours [start, end).
    pub night_start_hour: u32,
    pub night_end_hour: u32,
    /// Weekday daytime window for work scoring.
    pub day_start_hour: u32,
    pub day_end_hour: u32,
    /// Score weights: presence duration, distinct days, pattern consistency.
    pub weights: [f64; 3],
}

impl Default for AnchorConfig {
    fn default() -> Self {
        AnchorConfig {
            cluster_radius_m: 150.0,
            min_stays_per_cluster: 3,
            min_days: 7,
            night_start_hour: 22,
            night_end_hour: 7,
            day_start_hour: 8,
            day_end_hour: 18,
            weights: [0.5, 0.3, 0.2],
        }
    }
}

/// An inferred anchor location with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub lat: f64,
    pub lon: f64,
    pub score: f64,
    pub n_stays: usize,
}

/// Inference output; either anchor may be undefined.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Anchors {
    pub home: Option<Anchor>,
    pub work: Option<Anchor>,
}

struct StayCluster {
    lat: f64,
    lon: f64,
    members: Vec<usize>,
}

/// Greedy density clustering: each stay joins the first cluster whose
/// centroid lies within the radius, else starts a new cluster. Deterministic
/// given input order.
fn cluster_stays(stays: &[&Episode], radius_m: f64) -> Vec<StayCluster> {
    let mut clusters: Vec<StayCluster> = Vec::new();
    for (i, stay) in stays.iter().enumerate() {
        let mut joined = false;
        for cluster in clusters.iter_mut() {
            if haversine_m(cluster.lat, cluster.lon, stay.start_lat, stay.start_lon) <= radius_m {
                // Running centroid update.
                let n = cluster.members.len() as f64;
                cluster.lat = (cluster.lat * n + stay.start_lat) / (n + 1.0);
                cluster.lon = (cluster.lon * n + stay.start_lon) / (n + 1.0);
                cluster.members.push(i);
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(StayCluster {
                lat: stay.start_lat,
                lon: stay.start_lon,
                members: vec![i],
            });
        }
    }
    clusters
}

/// Hours of a stay overlapping the wrap-around night window.
fn night_hours(stay: &Episode, start_hour: u32, end_hour: u32) -> f64 {
    // Hour-resolution overlap accumulated over the stay.
    let mut hours = 0.0;
    let mut t = stay.start;
    while t < stay.end {
        let h = t.hour();
        let in_night =
            if start_hour > end_hour { h >= start_hour || h < end_hour } else { (start_hour..end_hour).contains(&h) };
        let next = (t + chrono::Duration::hours(1))
            .with_minute(0)
            .and_then(|x| x.with_second(0))
            .unwrap_or(t + chrono::Duration::hours(1));
        let slice_end = next.min(stay.end);
        if in_night {
            hours += (slice_end - t).num_milliseconds() as f64 / 3_600_000.0;
        }
        t = slice_end;
    }
    hours
}

fn day_hours(stay: &Episode, start_hour: u32, end_hour: u32, weekdays_only: bool) -> f64 {
    let mut hours = 0.0;
    let mut t = stay.start;
    while t < stay.end {
        let weekday_ok = !weekdays_only || t.weekday().number_from_monday() <= 5;
        let h = t.hour();
        let in_day = (start_hour..end_hour).contains(&h);
        let next = (t + chrono::Duration::hours(1))
            .with_minute(0)
            .and_then(|x| x.with_second(0))
            .unwrap_or(t + chrono::Duration::hours(1));
        let slice_end = next.min(stay.end);
        if weekday_ok && in_day {
            hours += (slice_end - t).num_milliseconds() as f64 / 3_600_000.0;
        }
        t = slice_end;
    }
    hours
}

/// Infer home and work anchors from one person's episodes.
pub fn infer_anchors(episodes: &[Episode], config: &AnchorConfig) -> Result<Anchors> {
    let stays: Vec<&Episode> = episodes.iter().filter(|e| e.kind == EventKind::Stay).collect();
    if stays.is_empty() {
        return Err(PipelineError::InsufficientStays {
            person_id: episodes.first().map(|e| e.person_id.clone()).unwrap_or_default(),
            required: config.min_days,
        });
    }
    let distinct_days: std::collections::BTreeSet<_> =
        stays.iter().map(|s| s.start.date_naive()).collect();
    if distinct_days.len() < config.min_days {
        return Err(PipelineError::InsufficientStays {
            person_id: stays[0].person_id.clone(),
            required: config.min_days,
        });
    }

    let clusters: Vec<StayCluster> = cluster_stays(&stays, config.cluster_radius_m)
        .into_iter()
        .filter(|c| c.members.len() >= config.min_stays_per_cluster)
        .collect();
    if clusters.is_empty() {
        return Ok(Anchors::default());
    }

    // First/last stop of each day, over all stays.
    let mut day_ends: std::collections::BTreeMap<chrono::NaiveDate, (usize, usize)> =
        std::collections::BTreeMap::new();
    for (i, stay) in stays.iter().enumerate() {
        let date = stay.start.date_naive();
        day_ends
            .entry(date)
            .and_modify(|(first, last)| {
                if stays[*first].start > stay.start {
                    *first = i;
                }
                if stays[*last].start < stay.start {
                    *last = i;
                }
            })
            .or_insert((i, i));
    }
    let n_days = day_ends.len() as f64;

    // Home scores.
    let [w_presence, w_days, w_pattern] = config.weights;
    let total_night: f64 = stays
        .iter()
        .map(|s| night_hours(s, config.night_start_hour, config.night_end_hour))
        .sum();
    let mut home_scores = Vec::with_capacity(clusters.len());
    for cluster in &clusters {
        let member_set: std::collections::HashSet<usize> =
            cluster.members.iter().cloned().collect();
        let night: f64 = cluster
            .members
            .iter()
            .map(|&i| night_hours(stays[i], config.night_start_hour, config.night_end_hour))
            .sum();
        let nights: std::collections::BTreeSet<_> = cluster
            .members
            .iter()
            .filter(|&&i| night_hours(stays[i], config.night_start_hour, config.night_end_hour) > 0.0)
            .map(|&i| stays[i].start.date_naive())
            .collect();
        let first_last = day_ends
            .values()
            .filter(|(first, last)| member_set.contains(first) || member_set.contains(last))
            .count() as f64;
        let score = w_presence * if total_night > 0.0 { night / total_night } else { 0.0 }
            + w_days * nights.len() as f64 / n_days
            + w_pattern * first_last / n_days;
        home_scores.push(score);
    }
    let home_idx = home_scores
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i);
    let home = home_idx.filter(|&i| home_scores[i] > 0.0).map(|i| Anchor {
        lat: clusters[i].lat,
        lon: clusters[i].lon,
        score: home_scores[i],
        n_stays: clusters[i].members.len(),
    });

    // Work scores among non-home clusters.
    let weekdays: std::collections::BTreeSet<_> = day_ends
        .keys()
        .filter(|d| d.weekday().number_from_monday() <= 5)
        .cloned()
        .collect();
    let n_weekdays = weekdays.len().max(1) as f64;
    let total_day: f64 = stays
        .iter()
        .map(|s| day_hours(s, config.day_start_hour, config.day_end_hour, true))
        .sum();
    let mut work: Option<Anchor> = None;
    for (i, cluster) in clusters.iter().enumerate() {
        if Some(i) == home_idx {
            continue;
        }
        let day: f64 = cluster
            .members
            .iter()
            .map(|&j| day_hours(stays[j], config.day_start_hour, config.day_end_hour, true))
            .sum();
        if day <= 0.0 {
            continue;
        }
        let workdays: std::collections::BTreeSet<_> = cluster
            .members
            .iter()
            .filter(|&&j| day_hours(stays[j], config.day_start_hour, config.day_end_hour, true) > 0.0)
            .map(|&j| stays[j].start.date_naive())
            .collect();
        // Arrival regularity: 1 at zero spread, decaying to 0 at two hours.
        let arrivals: Vec<f64> = cluster
            .members
            .iter()
            .filter(|&&j| stays[j].start.weekday().number_from_monday() <= 5)
            .map(|&j| stays[j].start.hour() as f64 * 60.0 + stays[j].start.minute() as f64)
            .collect();
        let regularity = if arrivals.len() > 1 {
            let mean = arrivals.iter().sum::<f64>() / arrivals.len() as f64;
            let sd = (arrivals.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
                / arrivals.len() as f64)
                .sqrt();
            (1.0 - sd / 120.0).max(0.0)
        } else {
            0.0
        };
        let score = w_presence * if total_day > 0.0 { day / total_day } else { 0.0 }
            + w_days * workdays.len() as f64 / n_weekdays
            + w_pattern * regularity;
        if work.as_ref().map(|w| score > w.score).unwrap_or(true) {
            work = Some(Anchor {
                lat: cluster.lat,
                lon: cluster.lon,
                score,
                n_stays: cluster.members.len(),
            });
        }
    }

    Ok(Anchors { home, work })
}
