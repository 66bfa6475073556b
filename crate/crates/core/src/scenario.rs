//! Counterfactual scenario engine: fare and access-time sweeps and the
//! integration gradient, evaluated with closed-form fixed-coefficient
//! probabilities on a calibrated representative trip.

use serde::{Deserialize, Serialize};

use crate::choice_data::{
    AlternativeAttributes, ChoiceObservation, Mode, Period, PersonProfile, Season, Source, Weather,
};
use crate::error::Result;
use crate::mnl::observation_probabilities;
use crate::model_spec::{ModelSpec, ParameterVector};

/// A fully specified work commute for a representative immigrant, with the
/// transit fare and access time exposed as policy levers.
///
/// The default profile is calibrated, not observed: per-mode times were
/// chosen once so that the baseline combined transit probability at mean
/// integration falls inside [0.72, 0.83]. The calibrated values are
/// documented in `fixtures/representative_trip.toml`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentativeTrip {
    pub migrant: bool,
    pub full_time: bool,
    pub work_trip: bool,
    pub distance_km: f64,
    pub car_cost: f64,
    pub car_ivtt: f64,
    pub bus_ivtt: f64,
    pub subway_ivtt: f64,
    pub train_ivtt: f64,
    /// Baseline one-way transit fare, CAD.
    pub baseline_fare: f64,
    /// Baseline walk-to-stop access time, minutes.
    pub baseline_access: f64,
    /// One standard deviation of the integration index, in index points.
    pub integration_sd: f64,
}

impl Default for RepresentativeTrip {
    fn default() -> Self {
        RepresentativeTrip {
            migrant: true,
            full_time: true,
            work_trip: true,
            distance_km: 10.0,
            car_cost: 13.90,
            car_ivtt: 18.0,
            bus_ivtt: 40.0,
            subway_ivtt: 38.0,
            train_ivtt: 25.0,
            baseline_fare: 3.25,
            baseline_access: 15.0,
            integration_sd: 0.7,
        }
    }
}

impl RepresentativeTrip {
    /// The calibrated default profile.
    pub fn calibrated() -> RepresentativeTrip {
        RepresentativeTrip::default()
    }

    pub fn from_toml_str(text: &str) -> Result<RepresentativeTrip> {
        toml::from_str(text)
            .map_err(|e| crate::error::CoreError::SpecFile(format!("representative trip: {e}")))
    }

    /// The synthetic traveller behind the trip, at a given integration level
    /// (in standard deviations from the mean).
    pub fn person(&self, integration_level_sd: f64) -> PersonProfile {
        PersonProfile {
            person_id: "representative".to_string(),
            migrant: self.migrant,
            full_time: self.full_time,
            student: false,
            child_0_10: false,
            safe: false,
            cycling_friendly: false,
            car_owned: true,
            car_observed: true,
            bike_owned: false,
            integration_raw: 7.0,
            integration_centred: integration_level_sd * self.integration_sd,
        }
    }

    /// The choice occasion at given lever values. Walk and bicycle are not
    /// viable for the 10 km commute and e-mobility exists only in stated
    /// scenarios, so the choice set is car plus the three transit modes.
    pub fn observation(&self, fare: f64, access_min: f64) -> ChoiceObservation {
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(AlternativeAttributes {
            cost: self.car_cost,
            ivtt: self.car_ivtt,
            walk_access: 0.0,
            distance: self.distance_km,
            available: true,
        });
        for (mode, ivtt) in [
            (Mode::Bus, self.bus_ivtt),
            (Mode::Subway, self.subway_ivtt),
            (Mode::Train, self.train_ivtt),
        ] {
            slots[mode.index()] = Some(AlternativeAttributes {
                cost: fare,
                ivtt,
                walk_access: access_min,
                distance: self.distance_km,
                available: true,
            });
        }
        ChoiceObservation::new(
            "representative-commute",
            "representative",
            Source::Rp,
            Mode::Car,
            slots,
            self.work_trip,
            false,
            Weather::Sunny,
            Season::Fall,
            Period::AmPeak,
            false,
        )
        .expect("representative trip is a valid observation")
    }
}

/// Default integration levels, in SD units: one below the mean, the mean,
/// one above.
pub const DEFAULT_INTEGRATION_LEVELS: [f64; 3] = [-1.0, 0.0, 1.0];

/// One sweep table: per lever value, the combined transit probability (in
/// percent) at each integration level, plus the gain row.
#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub lever: String,
    pub integration_levels: Vec<f64>,
    /// (lever value, transit probability percent per integration level)
    pub rows: Vec<(f64, Vec<f64>)>,
    /// `P(last lever value) - P(first lever value)` per level, percentage points.
    pub gains_pp: Vec<f64>,
}

fn mode_probabilities(
    trip: &RepresentativeTrip,
    params: &ParameterVector,
    spec: &ModelSpec,
    fare: f64,
    access: f64,
    level_sd: f64,
) -> Result<Vec<(Mode, f64)>> {
    let person = trip.person(level_sd);
    let obs = trip.observation(fare, access);
    observation_probabilities(&obs, &person, params, spec)
}

fn transit_percent(probs: &[(Mode, f64)]) -> f64 {
    100.0 * probs.iter().filter(|(m, _)| m.is_transit()).map(|(_, p)| p).sum::<f64>()
}

/// Transit probability under a fare sweep, access held at its baseline.
pub fn sweep_fare(
    trip: &RepresentativeTrip,
    params: &ParameterVector,
    spec: &ModelSpec,
    fare_grid: &[f64],
    integration_levels: &[f64],
) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(fare_grid.len());
    for &fare in fare_grid {
        let mut cells = Vec::with_capacity(integration_levels.len());
        for &level in integration_levels {
            let probs =
                mode_probabilities(trip, params, spec, fare, trip.baseline_access, level)?;
            cells.push(transit_percent(&probs));
        }
        rows.push((fare, cells));
    }
    let gains = gains_row(&rows);
    Ok(SweepTable {
        lever: "fare".to_string(),
        integration_levels: integration_levels.to_vec(),
        rows,
        gains_pp: gains,
    })
}

/// Transit probability under an access-time sweep, fare held at its baseline.
pub fn sweep_access(
    trip: &RepresentativeTrip,
    params: &ParameterVector,
    spec: &ModelSpec,
    access_grid: &[f64],
    integration_levels: &[f64],
) -> Result<SweepTable> {
    let mut rows = Vec::with_capacity(access_grid.len());
    for &access in access_grid {
        let mut cells = Vec::with_capacity(integration_levels.len());
        for &level in integration_levels {
            let probs =
                mode_probabilities(trip, params, spec, trip.baseline_fare, access, level)?;
            cells.push(transit_percent(&probs));
        }
        rows.push((access, cells));
    }
    let gains = gains_row(&rows);
    Ok(SweepTable {
        lever: "access".to_string(),
        integration_levels: integration_levels.to_vec(),
        rows,
        gains_pp: gains,
    })
}

fn gains_row(rows: &[(f64, Vec<f64>)]) -> Vec<f64> {
    match (rows.first(), rows.last()) {
        (Some((_, first)), Some((_, last))) => {
            first.iter().zip(last).map(|(f, l)| l - f).collect()
        }
        _ => vec![],
    }
}

/// One point of the integration gradient: per-mode probabilities in percent.
#[derive(Debug, Clone, Serialize)]
pub struct GradientPoint {
    pub level_sd: f64,
    pub probabilities: Vec<(String, f64)>,
    pub transit_percent: f64,
    pub car_percent: f64,
}

/// Mode probabilities along the integration axis at baseline levers.
pub fn integration_gradient(
    trip: &RepresentativeTrip,
    params: &ParameterVector,
    spec: &ModelSpec,
    from_sd: f64,
    to_sd: f64,
    steps: usize,
) -> Result<Vec<GradientPoint>> {
    let steps = steps.max(2);
    let mut points = Vec::with_capacity(steps);
    for i in 0..steps {
        let level = from_sd + (to_sd - from_sd) * i as f64 / (steps - 1) as f64;
        let probs = mode_probabilities(
            trip,
            params,
            spec,
            trip.baseline_fare,
            trip.baseline_access,
            level,
        )?;
        let transit = transit_percent(&probs);
        let car = 100.0
            * probs
                .iter()
                .filter(|(m, _)| *m == Mode::Car)
                .map(|(_, p)| p)
                .sum::<f64>();
        points.push(GradientPoint {
            level_sd: level,
            probabilities: probs
                .iter()
                .map(|(m, p)| (m.name().to_string(), 100.0 * p))
                .collect(),
            transit_percent: transit,
            car_percent: car,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_spec::{ModelKind, Param};
    use crate::presets;

    fn m3() -> (ModelSpec, ParameterVector) {
        (ModelSpec::for_kind(ModelKind::MnlRpSp), presets::m3_estimates())
    }

    #[test]
    fn baseline_transit_probability_sits_in_the_calibration_band() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let probs = mode_probabilities(
            &trip,
            &params,
            &spec,
            trip.baseline_fare,
            trip.baseline_access,
            0.0,
        )
        .unwrap();
        let transit = transit_percent(&probs) / 100.0;
        assert!(
            (0.72..=0.83).contains(&transit),
            "baseline transit probability {transit:.4} outside [0.72, 0.83]"
        );
        let total: f64 = probs.iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unchanged_lever_has_exactly_zero_gain() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let table = sweep_fare(
            &trip,
            &params,
            &spec,
            &[trip.baseline_fare, trip.baseline_fare],
            &DEFAULT_INTEGRATION_LEVELS,
        )
        .unwrap();
        for gain in table.gains_pp {
            assert_eq!(gain, 0.0);
        }
    }

    #[test]
    fn transit_probability_rises_monotonically_as_fare_falls() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let table = sweep_fare(
            &trip,
            &params,
            &spec,
            &[3.25, 2.50, 1.50, 0.50, 0.0],
            &DEFAULT_INTEGRATION_LEVELS,
        )
        .unwrap();
        for level in 0..3 {
            for pair in table.rows.windows(2) {
                assert!(
                    pair[1].1[level] >= pair[0].1[level],
                    "fare drop must not reduce transit probability"
                );
            }
        }
    }

    #[test]
    fn transit_probability_rises_monotonically_as_access_falls() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let table = sweep_access(
            &trip,
            &params,
            &spec,
            &[15.0, 10.0, 5.0, 2.0, 0.0],
            &DEFAULT_INTEGRATION_LEVELS,
        )
        .unwrap();
        for level in 0..3 {
            for pair in table.rows.windows(2) {
                assert!(pair[1].1[level] >= pair[0].1[level]);
            }
        }
    }

    #[test]
    fn zero_integration_slope_flattens_the_gradient() {
        let (spec, mut params) = m3();
        params.set(Param::IntegPt, 0.0);
        let trip = RepresentativeTrip::calibrated();
        let curve = integration_gradient(&trip, &params, &spec, -1.0, 1.0, 5).unwrap();
        let first = curve[0].transit_percent;
        for point in &curve {
            assert!((point.transit_percent - first).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_integration_slope_makes_transit_decline() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let curve = integration_gradient(&trip, &params, &spec, -1.0, 1.0, 9).unwrap();
        for pair in curve.windows(2) {
            assert!(pair[1].transit_percent < pair[0].transit_percent);
        }
    }

    #[test]
    fn gradient_rows_sum_to_one_hundred_percent() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let curve = integration_gradient(&trip, &params, &spec, -1.0, 1.0, 5).unwrap();
        for point in curve {
            let sum: f64 = point.probabilities.iter().map(|(_, p)| p).sum();
            assert!((sum - 100.0).abs() < 0.01);
        }
    }

    #[test]
    fn integration_gap_persists_at_free_fare_and_zero_access() {
        let (spec, params) = m3();
        let trip = RepresentativeTrip::calibrated();
        let low = mode_probabilities(&trip, &params, &spec, 0.0, 0.0, -1.0).unwrap();
        let high = mode_probabilities(&trip, &params, &spec, 0.0, 0.0, 1.0).unwrap();
        assert!(transit_percent(&low) > transit_percent(&high));
    }

    #[test]
    fn toml_round_trip() {
        let trip = RepresentativeTrip::calibrated();
        let text = toml::to_string(&trip).unwrap();
        let back = RepresentativeTrip::from_toml_str(&text).unwrap();
        assert_eq!(back, trip);
    }
}
