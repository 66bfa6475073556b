//! Shared fixtures for unit tests.

use crate::choice_data::{
    AlternativeAttributes, ChoiceObservation, Mode, Period, PersonProfile, Season, Source, Weather,
};

pub fn fixture_person(id: &str) -> PersonProfile {
    PersonProfile {
        person_id: id.to_string(),
        migrant: false,
        full_time: true,
        student: false,
        child_0_10: false,
        safe: true,
        cycling_friendly: true,
        car_owned: true,
        car_observed: true,
        bike_owned: true,
        integration_raw: 7.6,
        integration_centred: 0.0,
    }
}

pub fn attrs(cost: f64, ivtt: f64, walk: f64, dist: f64, available: bool) -> AlternativeAttributes {
    AlternativeAttributes { cost, ivtt, walk_access: walk, distance: dist, available }
}

/// A minimal valid two-alternative observation (car chosen unless told otherwise).
pub fn simple_obs(obs_id: &str, person_id: &str, chosen: Mode) -> ChoiceObservation {
    let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
    slots[Mode::Car.index()] = Some(attrs(8.0, 20.0, 0.0, 10.0, true));
    slots[Mode::Bus.index()] = Some(attrs(3.25, 35.0, 6.0, 9.0, true));
    if chosen != Mode::Car && chosen != Mode::Bus {
        slots[chosen.index()] = Some(attrs(0.0, 30.0, 0.0, 2.0, true));
    }
    ChoiceObservation::new(
        obs_id,
        person_id,
        Source::Rp,
        chosen,
        slots,
        false,
        false,
        Weather::Sunny,
        Season::Summer,
        Period::Midday,
        false,
    )
    .expect("fixture observation is valid")
}

pub fn obs_with_attrs(
    obs_id: &str,
    person_id: &str,
    chosen: Mode,
    slots: [Option<AlternativeAttributes>; Mode::COUNT],
    work: bool,
) -> ChoiceObservation {
    ChoiceObservation::new(
        obs_id,
        person_id,
        Source::Rp,
        chosen,
        slots,
        work,
        false,
        Weather::Sunny,
        Season::Summer,
        Period::AmPeak,
        false,
    )
    .expect("fixture observation is valid")
}

pub fn sp_obs_with_attrs(
    obs_id: &str,
    person_id: &str,
    chosen: Mode,
    slots: [Option<AlternativeAttributes>; Mode::COUNT],
) -> ChoiceObservation {
    ChoiceObservation::new(
        obs_id,
        person_id,
        Source::Sp,
        chosen,
        slots,
        false,
        false,
        Weather::Sunny,
        Season::Summer,
        Period::AmPeak,
        false,
    )
    .expect("fixture observation is valid")
}
