//! Domain model for estimation-ready choice data.
//!
//! One [`ChoiceObservation`] is a single choice occasion: the per-alternative
//! level-of-service attributes, availability flags, the chosen alternative,
//! and trip context. Observations are grouped by person in a [`Dataset`],
//! which is immutable after load and safe to share across threads.

mod load;

pub use load::{
    load_dataset, read_observations, read_persons, write_observations, write_persons,
    write_persons_with_dims,
};

use crate::error::{CoreError, Result};

/// Travel mode alternatives in fixed order.
///
/// The order is load-bearing: prediction ties break toward the earlier
/// alternative, and e-mobility is listed last because it exists only in
/// stated-preference scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Car,
    Bus,
    Subway,
    Train,
    Walk,
    Bicycle,
    EMobility,
}

impl Mode {
    pub const COUNT: usize = 7;
    pub const ALL: [Mode; Mode::COUNT] = [
        Mode::Car,
        Mode::Bus,
        Mode::Subway,
        Mode::Train,
        Mode::Walk,
        Mode::Bicycle,
        Mode::EMobility,
    ];
    /// The six modes observable in revealed-preference data.
    pub const RP_MODES: [Mode; 6] =
        [Mode::Car, Mode::Bus, Mode::Subway, Mode::Train, Mode::Walk, Mode::Bicycle];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Bus => "bus",
            Mode::Subway => "subway",
            Mode::Train => "train",
            Mode::Walk => "walk",
            Mode::Bicycle => "bicycle",
            Mode::EMobility => "emobility",
        }
    }

    pub fn from_name(name: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Bus, subway, or train.
    pub fn is_transit(self) -> bool {
        matches!(self, Mode::Bus | Mode::Subway | Mode::Train)
    }

    /// Walk or bicycle.
    pub fn is_active(self) -> bool {
        matches!(self, Mode::Walk | Mode::Bicycle)
    }
}

/// Data source of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Rp,
    Sp,
}

impl Source {
    pub fn name(self) -> &'static str {
        match self {
            Source::Rp => "RP",
            Source::Sp => "SP",
        }
    }

    pub fn from_name(name: &str) -> Option<Source> {
        match name.to_ascii_uppercase().as_str() {
            "RP" => Some(Source::Rp),
            "SP" => Some(Source::Sp),
            _ => None,
        }
    }
}

/// Weather category attached to a trip. `Unknown` marks provider failures;
/// it never sets the snow flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Weather {
    Sunny,
    Cloudy,
    Rainy,
    Snowy,
    Unknown,
}

impl Weather {
    pub fn name(self) -> &'static str {
        match self {
            Weather::Sunny => "sunny",
            Weather::Cloudy => "cloudy",
            Weather::Rainy => "rainy",
            Weather::Snowy => "snowy",
            Weather::Unknown => "unknown",
        }
    }

    pub fn from_name(name: &str) -> Option<Weather> {
        [Weather::Sunny, Weather::Cloudy, Weather::Rainy, Weather::Snowy, Weather::Unknown]
            .into_iter()
            .find(|w| w.name() == name)
    }
}

/// Meteorological season.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Fall,
}

impl Season {
    pub fn name(self) -> &'static str {
        match self {
            Season::Winter => "winter",
            Season::Spring => "spring",
            Season::Summer => "summer",
            Season::Fall => "fall",
        }
    }

    pub fn from_name(name: &str) -> Option<Season> {
        [Season::Winter, Season::Spring, Season::Summer, Season::Fall]
            .into_iter()
            .find(|s| s.name() == name)
    }

    /// December-February winter, March-May spring, June-August summer,
    /// September-November fall.
    pub fn from_month(month: u32) -> Option<Season> {
        match month {
            12 | 1 | 2 => Some(Season::Winter),
            3..=5 => Some(Season::Spring),
            6..=8 => Some(Season::Summer),
            9..=11 => Some(Season::Fall),
            _ => None,
        }
    }
}

/// Departure-time period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Period {
    Night,
    AmPeak,
    Midday,
    PmPeak,
    Evening,
}

impl Period {
    pub fn name(self) -> &'static str {
        match self {
            Period::Night => "night",
            Period::AmPeak => "am_peak",
            Period::Midday => "midday",
            Period::PmPeak => "pm_peak",
            Period::Evening => "evening",
        }
    }

    pub fn from_name(name: &str) -> Option<Period> {
        [Period::Night, Period::AmPeak, Period::Midday, Period::PmPeak, Period::Evening]
            .into_iter()
            .find(|p| p.name() == name)
    }
}

/// Level-of-service attributes of one alternative on one choice occasion.
///
/// All raw units: cost in CAD, times in minutes, distance in kilometres.
/// `ivtt` stores total travel time for walk and bicycle. `walk_access` is
/// zero for non-transit modes; the associated coefficient is only attached
/// to transit modes so the zero is inert.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlternativeAttributes {
    pub cost: f64,
    pub ivtt: f64,
    pub walk_access: f64,
    pub distance: f64,
    pub available: bool,
}

impl AlternativeAttributes {
    pub fn validate(&self, mode: Mode) -> Result<()> {
        for (value, what) in [
            (self.cost, "cost"),
            (self.ivtt, "ivtt"),
            (self.walk_access, "walk_access"),
            (self.distance, "distance"),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(CoreError::OutOfRange {
                    what,
                    value,
                    expected: "finite and nonnegative",
                });
            }
        }
        if mode.is_active() && self.cost != 0.0 {
            return Err(CoreError::OutOfRange {
                what: "cost",
                value: self.cost,
                expected: "zero for walk and bicycle",
            });
        }
        Ok(())
    }
}

/// Attributes after estimation scaling: cost and times divided by 10,
/// distance by 1,000.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledAttributes {
    pub cost: f64,
    pub ivtt: f64,
    pub walk_access: f64,
    pub distance: f64,
}

/// Scale raw attributes for estimation.
pub fn scale_attributes(raw: &AlternativeAttributes) -> ScaledAttributes {
    ScaledAttributes {
        cost: raw.cost / 10.0,
        ivtt: raw.ivtt / 10.0,
        walk_access: raw.walk_access / 10.0,
        distance: raw.distance / 1000.0,
    }
}

/// Invert [`scale_attributes`].
pub fn unscale_attributes(scaled: &ScaledAttributes, available: bool) -> AlternativeAttributes {
    AlternativeAttributes {
        cost: scaled.cost * 10.0,
        ivtt: scaled.ivtt * 10.0,
        walk_access: scaled.walk_access * 10.0,
        distance: scaled.distance * 1000.0,
        available,
    }
}

/// One choice occasion.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceObservation {
    pub obs_id: String,
    pub person_id: String,
    pub source: Source,
    pub chosen: Mode,
    attributes: [Option<AlternativeAttributes>; Mode::COUNT],
    /// Trip purpose is work or study.
    pub purpose_work_study: bool,
    /// Snow conditions during the trip.
    pub snow: bool,
    pub weather: Weather,
    pub season: Season,
    pub period: Period,
    /// On RP rows: this trip triggered an SP scenario (linkage flag).
    pub sp_trigger: bool,
}

impl ChoiceObservation {
    /// Build and validate an observation from per-mode attributes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs_id: impl Into<String>,
        person_id: impl Into<String>,
        source: Source,
        chosen: Mode,
        attributes: [Option<AlternativeAttributes>; Mode::COUNT],
        purpose_work_study: bool,
        snow: bool,
        weather: Weather,
        season: Season,
        period: Period,
        sp_trigger: bool,
    ) -> Result<ChoiceObservation> {
        let obs = ChoiceObservation {
            obs_id: obs_id.into(),
            person_id: person_id.into(),
            source,
            chosen,
            attributes,
            purpose_work_study,
            snow,
            weather,
            season,
            period,
            sp_trigger,
        };
        obs.validate()?;
        Ok(obs)
    }

    fn validate(&self) -> Result<()> {
        for mode in Mode::ALL {
            if let Some(attrs) = &self.attributes[mode.index()] {
                attrs.validate(mode)?;
            }
        }
        if self.source == Source::Rp && self.attributes[Mode::EMobility.index()].is_some() {
            return Err(CoreError::EMobilityOnRp { obs_id: self.obs_id.clone() });
        }
        match self.attributes[self.chosen.index()] {
            Some(attrs) if attrs.available => {}
            _ => {
                return Err(CoreError::ChosenUnavailable {
                    obs_id: self.obs_id.clone(),
                    alt: self.chosen.name().to_string(),
                })
            }
        }
        let available = self.available_modes().count();
        if available < 2 {
            return Err(CoreError::TooFewAlternatives { obs_id: self.obs_id.clone(), available });
        }
        Ok(())
    }

    #[inline]
    pub fn attributes(&self, mode: Mode) -> Option<&AlternativeAttributes> {
        self.attributes[mode.index()].as_ref()
    }

    #[inline]
    pub fn is_available(&self, mode: Mode) -> bool {
        self.attributes[mode.index()].map(|a| a.available).unwrap_or(false)
    }

    /// Modes available on this occasion, in canonical order.
    pub fn available_modes(&self) -> impl Iterator<Item = Mode> + '_ {
        Mode::ALL.into_iter().filter(move |m| self.is_available(*m))
    }

    pub fn n_available(&self) -> usize {
        self.available_modes().count()
    }
}

/// Person-level covariates and the integration index.
#[derive(Debug, Clone, PartialEq)]
pub struct PersonProfile {
    pub person_id: String,
    /// First-generation foreign-born.
    pub migrant: bool,
    pub full_time: bool,
    pub student: bool,
    /// Has children aged 0-10.
    pub child_0_10: bool,
    /// Perceives the neighbourhood as safe.
    pub safe: bool,
    /// Perceives the area as cycling-friendly.
    pub cycling_friendly: bool,
    pub car_owned: bool,
    /// Observed using a car during the study (precomputed upstream).
    pub car_observed: bool,
    pub bike_owned: bool,
    /// Composite integration index on the 1-10 scale.
    pub integration_raw: f64,
    /// Integration index centred at the sample mean over persons.
    pub integration_centred: f64,
}

/// Centre raw integration indices at their mean.
///
/// The mean is taken over the supplied person-level values (one per person,
/// not one per observation). The output means to zero within 1e-9.
pub fn center_integration(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.is_empty() {
        return Err(CoreError::EmptyInput("integration indices"));
    }
    for &v in raw {
        if !(1.0..=10.0).contains(&v) {
            return Err(CoreError::OutOfRange {
                what: "integration_raw",
                value: v,
                expected: "within [1, 10]",
            });
        }
    }
    let mean = raw.iter().sum::<f64>() / raw.len() as f64;
    Ok(raw.iter().map(|v| v - mean).collect())
}

/// Per-mode routing presence used to construct availability flags.
#[derive(Debug, Clone, Copy, Default)]
pub struct RoutedPresence {
    pub car: bool,
    pub bus: bool,
    pub subway: bool,
    pub train: bool,
    pub walk: bool,
}

/// Construct availability flags for the six RP modes.
///
/// Car requires stated ownership or observed use plus a routed car itinerary;
/// bicycle requires stated ownership; each transit sub-mode requires a viable
/// routed itinerary; walk is available whenever a walk route exists.
pub fn build_availability(person: &PersonProfile, routed: &RoutedPresence) -> Result<[bool; 6]> {
    let flags = [
        (person.car_owned || person.car_observed) && routed.car,
        routed.bus,
        routed.subway,
        routed.train,
        routed.walk,
        person.bike_owned,
    ];
    if flags.iter().all(|&f| !f) {
        return Err(CoreError::EmptyChoiceSet);
    }
    Ok(flags)
}

/// A validated estimation dataset: persons plus observations grouped by person.
#[derive(Debug, Clone)]
pub struct Dataset {
    persons: Vec<PersonProfile>,
    /// Observations sorted so that each person's block is contiguous.
    observations: Vec<ChoiceObservation>,
    /// Person index -> range into `observations`.
    ranges: Vec<std::ops::Range<usize>>,
}

impl Dataset {
    /// Assemble a dataset from parts, grouping observations by person and
    /// enforcing the cross-record invariants.
    ///
    /// `persons` must already carry centred integration values; use
    /// [`Dataset::from_raw_parts`] when centring still has to happen.
    pub fn new(
        persons: Vec<PersonProfile>,
        mut observations: Vec<ChoiceObservation>,
    ) -> Result<Dataset> {
        if persons.is_empty() {
            return Err(CoreError::EmptyInput("persons"));
        }
        let mut index_of = std::collections::HashMap::with_capacity(persons.len());
        for (i, p) in persons.iter().enumerate() {
            index_of.insert(p.person_id.clone(), i);
        }
        for (row, obs) in observations.iter().enumerate() {
            if !index_of.contains_key(&obs.person_id) {
                return Err(CoreError::UnknownPerson {
                    row: row as u64,
                    person_id: obs.person_id.clone(),
                });
            }
        }
        // Stable sort keeps each person's occasions in input order.
        observations.sort_by_key(|o| index_of[&o.person_id]);
        let mut ranges = vec![0..0; persons.len()];
        let mut start = 0usize;
        while start < observations.len() {
            let pid = index_of[&observations[start].person_id];
            let mut end = start;
            while end < observations.len() && index_of[&observations[end].person_id] == pid {
                end += 1;
            }
            ranges[pid] = start..end;
            start = end;
        }
        let dataset = Dataset { persons, observations, ranges };
        for (i, p) in dataset.persons.iter().enumerate() {
            if dataset.ranges[i].is_empty() {
                return Err(CoreError::EmptyInput("person without observations"))
                    .map_err(|_| CoreError::MalformedRow {
                        row: 0,
                        message: format!("person '{}' has no observations", p.person_id),
                    });
            }
        }
        Ok(dataset)
    }

    /// Like [`Dataset::new`] but computes the centred integration index from
    /// the raw values first.
    pub fn from_raw_parts(
        mut persons: Vec<PersonProfile>,
        observations: Vec<ChoiceObservation>,
    ) -> Result<Dataset> {
        let raw: Vec<f64> = persons.iter().map(|p| p.integration_raw).collect();
        let centred = center_integration(&raw)?;
        for (p, c) in persons.iter_mut().zip(centred) {
            p.integration_centred = c;
        }
        Dataset::new(persons, observations)
    }

    pub fn n_persons(&self) -> usize {
        self.persons.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn persons(&self) -> &[PersonProfile] {
        &self.persons
    }

    pub fn person(&self, index: usize) -> &PersonProfile {
        &self.persons[index]
    }

    pub fn person_index(&self, person_id: &str) -> Option<usize> {
        self.persons.iter().position(|p| p.person_id == person_id)
    }

    pub fn observations(&self) -> &[ChoiceObservation] {
        &self.observations
    }

    /// All observations of one person.
    pub fn person_observations(&self, index: usize) -> &[ChoiceObservation] {
        &self.observations[self.ranges[index].clone()]
    }

    /// Number of choice occasions for one person.
    pub fn t_n(&self, index: usize) -> usize {
        self.ranges[index].len()
    }

    pub fn count_by_source(&self) -> (usize, usize) {
        let rp = self.observations.iter().filter(|o| o.source == Source::Rp).count();
        (rp, self.observations.len() - rp)
    }

    /// Rebuild the dataset keeping only observations passing `keep`.
    /// Persons left without observations are dropped.
    pub fn filter_observations(&self, keep: impl Fn(&ChoiceObservation) -> bool) -> Result<Dataset> {
        let observations: Vec<ChoiceObservation> =
            self.observations.iter().filter(|o| keep(o)).cloned().collect();
        let kept_ids: std::collections::HashSet<&str> =
            observations.iter().map(|o| o.person_id.as_str()).collect();
        let persons: Vec<PersonProfile> = self
            .persons
            .iter()
            .filter(|p| kept_ids.contains(p.person_id.as_str()))
            .cloned()
            .collect();
        if persons.is_empty() {
            return Err(CoreError::EmptyInput("no observations left after filtering"));
        }
        Dataset::new(persons, observations)
    }

    /// Restrict to revealed-preference observations.
    pub fn rp_only(&self) -> Result<Dataset> {
        self.filter_observations(|o| o.source == Source::Rp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{attrs, fixture_person, simple_obs};
    use proptest::prelude::*;

    #[test]
    fn scaling_matches_published_units() {
        let raw = AlternativeAttributes {
            cost: 13.90,
            ivtt: 20.7,
            walk_access: 6.0,
            distance: 32.6,
            available: true,
        };
        let s = scale_attributes(&raw);
        assert!((s.cost - 1.390).abs() < 1e-12);
        assert!((s.distance - 0.0326).abs() < 1e-12);
        assert!((s.ivtt - 2.07).abs() < 1e-12);
        assert!((s.walk_access - 0.6).abs() < 1e-12);
    }

    #[test]
    fn zero_attributes_scale_to_zero() {
        let s = scale_attributes(&AlternativeAttributes::default());
        assert_eq!((s.cost, s.ivtt, s.walk_access, s.distance), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn centring_handles_constant_symmetric_and_published_inputs() {
        assert_eq!(center_integration(&[7.0, 7.0, 7.0]).unwrap(), vec![0.0, 0.0, 0.0]);
        let c = center_integration(&[8.5, 6.7]).unwrap();
        assert!((c[0] - 0.9).abs() < 1e-12 && (c[1] + 0.9).abs() < 1e-12);
        let c = center_integration(&[1.0, 10.0]).unwrap();
        assert!((c[0] + 4.5).abs() < 1e-12 && (c[1] - 4.5).abs() < 1e-12);
    }

    #[test]
    fn centring_rejects_empty_and_out_of_scale_input() {
        assert!(center_integration(&[]).is_err());
        assert!(center_integration(&[0.5]).is_err());
        assert!(center_integration(&[10.5]).is_err());
    }

    #[test]
    fn centring_is_idempotent_on_centred_output_shifted_back_into_scale() {
        let c = center_integration(&[6.0, 8.0, 7.0]).unwrap();
        // A mean-zero input is a fixed point of centring (values re-expressed
        // on the raw scale around 7).
        let shifted: Vec<f64> = c.iter().map(|v| v + 7.0).collect();
        let twice = center_integration(&shifted).unwrap();
        for (a, b) in twice.iter().zip(c.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn bicycle_needs_ownership_regardless_of_routing() {
        let mut person = fixture_person("p1");
        person.bike_owned = false;
        let routed =
            RoutedPresence { car: true, bus: true, subway: true, train: true, walk: true };
        let flags = build_availability(&person, &routed).unwrap();
        assert!(!flags[5]);
    }

    #[test]
    fn car_needs_ownership_or_observed_use() {
        let mut person = fixture_person("p1");
        person.car_owned = false;
        person.car_observed = false;
        let routed =
            RoutedPresence { car: true, bus: true, subway: true, train: true, walk: true };
        let flags = build_availability(&person, &routed).unwrap();
        assert!(!flags[0]);
        person.car_observed = true;
        let flags = build_availability(&person, &routed).unwrap();
        assert!(flags[0]);
    }

    #[test]
    fn all_owned_and_routed_yields_all_six_modes() {
        let mut person = fixture_person("p1");
        person.car_owned = true;
        person.bike_owned = true;
        let routed =
            RoutedPresence { car: true, bus: true, subway: true, train: true, walk: true };
        assert_eq!(build_availability(&person, &routed).unwrap(), [true; 6]);
    }

    #[test]
    fn empty_choice_set_is_an_error() {
        let mut person = fixture_person("p1");
        person.car_owned = false;
        person.car_observed = false;
        person.bike_owned = false;
        assert!(matches!(
            build_availability(&person, &RoutedPresence::default()),
            Err(CoreError::EmptyChoiceSet)
        ));
    }

    #[test]
    fn chosen_unavailable_is_rejected() {
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(attrs(10.0, 20.0, 0.0, 10.0, false));
        slots[Mode::Bus.index()] = Some(attrs(3.25, 30.0, 5.0, 10.0, true));
        slots[Mode::Walk.index()] = Some(attrs(0.0, 90.0, 0.0, 8.0, true));
        let err = ChoiceObservation::new(
            "o1",
            "p1",
            Source::Rp,
            Mode::Car,
            slots,
            false,
            false,
            Weather::Sunny,
            Season::Summer,
            Period::Midday,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::ChosenUnavailable { .. }));
    }

    #[test]
    fn emobility_on_rp_observation_is_rejected() {
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(attrs(10.0, 20.0, 0.0, 10.0, true));
        slots[Mode::EMobility.index()] = Some(attrs(4.0, 15.0, 3.0, 10.0, true));
        let err = ChoiceObservation::new(
            "o1",
            "p1",
            Source::Rp,
            Mode::Car,
            slots,
            false,
            false,
            Weather::Sunny,
            Season::Summer,
            Period::Midday,
            false,
        )
        .unwrap_err();
        assert!(matches!(err, CoreError::EMobilityOnRp { .. }));
    }

    #[test]
    fn dataset_groups_by_person_and_counts_occasions() {
        let persons = vec![fixture_person("a"), fixture_person("b")];
        let observations = vec![
            simple_obs("o1", "a", Mode::Car),
            simple_obs("o2", "b", Mode::Bus),
            simple_obs("o3", "a", Mode::Bus),
        ];
        let ds = Dataset::new(persons, observations).unwrap();
        assert_eq!(ds.t_n(0), 2);
        assert_eq!(ds.t_n(1), 1);
        assert_eq!(ds.person_observations(0)[0].obs_id, "o1");
        assert_eq!(ds.person_observations(0)[1].obs_id, "o3");
    }

    #[test]
    fn dataset_rejects_unknown_person() {
        let persons = vec![fixture_person("a")];
        let observations = vec![simple_obs("o1", "ghost", Mode::Car)];
        assert!(matches!(
            Dataset::new(persons, observations),
            Err(CoreError::UnknownPerson { .. })
        ));
    }

    proptest! {
        #[test]
        fn scale_unscale_round_trips(
            cost in 0.0..500.0f64,
            ivtt in 0.0..500.0f64,
            walk in 0.0..120.0f64,
            dist in 0.0..200.0f64,
        ) {
            let raw = AlternativeAttributes {
                cost, ivtt, walk_access: walk, distance: dist, available: true,
            };
            let back = unscale_attributes(&scale_attributes(&raw), true);
            prop_assert!((back.cost - raw.cost).abs() < 1e-12);
            prop_assert!((back.ivtt - raw.ivtt).abs() < 1e-12);
            prop_assert!((back.walk_access - raw.walk_access).abs() < 1e-12);
            prop_assert!((back.distance - raw.distance).abs() < 1e-12);
        }

        #[test]
        fn centred_values_mean_to_zero(values in proptest::collection::vec(1.0..10.0f64, 1..80)) {
            let centred = center_integration(&values).unwrap();
            let mean = centred.iter().sum::<f64>() / centred.len() as f64;
            prop_assert!(mean.abs() < 1e-9);
        }
    }
}
