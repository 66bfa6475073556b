//! Model parameters and the four estimation specifications.
//!
//! The toolkit estimates a 2x2 family of models: fixed-coefficient (MNL) or
//! random-coefficient (mixed logit) utilities, on revealed-preference data
//! alone or pooled with stated-preference data. Which coefficients enter
//! which specification is data, not code: [`ModelSpec`] carries an explicit
//! inclusion mask and the four bundled specs can be loaded from TOML files.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Every named coefficient the toolkit knows about.
///
/// Car and train are reference alternatives and carry no constant; their
/// implicit ASCs are identically zero and never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    AscBus,
    AscSubway,
    AscWalk,
    AscBicycle,
    AscEmobility,
    /// Generic cost coefficient (fixed models only; random in mixed models).
    Cost,
    /// Generic in-vehicle / total travel time coefficient.
    Ivtt,
    /// Walk/access time to stop or station (transit modes and e-mobility).
    WalkAccess,
    DistCar,
    DistPt,
    DistTrain,
    DistActive,
    /// Work/study trip purpose, enters car utility.
    WorkStudyCar,
    /// Young children in household, enters bus and subway utilities.
    ChildPt,
    /// First-generation immigrant, enters subway utility (MNL specs only).
    MigrantSubway,
    /// Full-time employment, enters subway utility.
    FulltimeSubway,
    /// Student status, enters train utility.
    StudentTrain,
    /// Student status, enters walk utility.
    StudentWalk,
    /// Perceived neighbourhood safety, enters subway utility (joint MNL only).
    SafeSubway,
    /// Perceived cycling-friendliness, enters bicycle utility.
    CycleFriendlyBicycle,
    /// Centred integration index, enters public transit utilities.
    IntegPt,
    /// Centred integration index, enters active-mode utilities (MNL only).
    IntegActive,
    /// Snow conditions, enters active-mode utilities (MNL only).
    SnowActive,
    /// Mean of the random in-vehicle time coefficient.
    MuIvtt,
    /// Standard deviation of the random in-vehicle time coefficient.
    SigmaIvtt,
    /// Immigrant shift on the mean of the random time coefficient.
    DeltaMigrantIvtt,
    /// Log-mean of the negative lognormal cost coefficient.
    MuCost,
    /// Log-standard-deviation of the negative lognormal cost coefficient.
    SigmaCost,
    /// Scale applied to stated-preference utilities.
    MuSp,
}

impl Param {
    pub const COUNT: usize = 29;

    /// All parameters in canonical (reporting) order.
    pub const ALL: [Param; Param::COUNT] = [
        Param::MuSp,
        Param::AscBus,
        Param::AscSubway,
        Param::AscWalk,
        Param::AscBicycle,
        Param::AscEmobility,
        Param::MuIvtt,
        Param::SigmaIvtt,
        Param::DeltaMigrantIvtt,
        Param::MuCost,
        Param::SigmaCost,
        Param::Cost,
        Param::Ivtt,
        Param::WalkAccess,
        Param::DistCar,
        Param::DistPt,
        Param::DistTrain,
        Param::DistActive,
        Param::WorkStudyCar,
        Param::ChildPt,
        Param::MigrantSubway,
        Param::FulltimeSubway,
        Param::StudentTrain,
        Param::StudentWalk,
        Param::SafeSubway,
        Param::CycleFriendlyBicycle,
        Param::IntegPt,
        Param::IntegActive,
        Param::SnowActive,
    ];

    /// Dense storage index.
    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// Stable identifier used in spec files, result files, and reports.
    pub fn name(self) -> &'static str {
        match self {
            Param::AscBus => "asc_bus",
            Param::AscSubway => "asc_subway",
            Param::AscWalk => "asc_walk",
            Param::AscBicycle => "asc_bicycle",
            Param::AscEmobility => "asc_emobility",
            Param::Cost => "b_cost",
            Param::Ivtt => "b_ivtt",
            Param::WalkAccess => "b_walk_access",
            Param::DistCar => "b_dist_car",
            Param::DistPt => "b_dist_pt",
            Param::DistTrain => "b_dist_train",
            Param::DistActive => "b_dist_active",
            Param::WorkStudyCar => "b_workstudy_car",
            Param::ChildPt => "b_child_pt",
            Param::MigrantSubway => "b_migrant_subway",
            Param::FulltimeSubway => "b_fulltime_subway",
            Param::StudentTrain => "b_student_train",
            Param::StudentWalk => "b_student_walk",
            Param::SafeSubway => "b_safe_subway",
            Param::CycleFriendlyBicycle => "b_cyclefriendly_bicycle",
            Param::IntegPt => "b_integ_pt",
            Param::IntegActive => "b_integ_active",
            Param::SnowActive => "b_snow_active",
            Param::MuIvtt => "mu_ivtt",
            Param::SigmaIvtt => "sigma_ivtt",
            Param::DeltaMigrantIvtt => "delta_migrant_ivtt",
            Param::MuCost => "mu_cost",
            Param::SigmaCost => "sigma_cost",
            Param::MuSp => "mu_sp",
        }
    }

    /// Human-readable label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Param::AscBus => "ASC (Bus)",
            Param::AscSubway => "ASC (Subway)",
            Param::AscWalk => "ASC (Walk)",
            Param::AscBicycle => "ASC (Bicycle)",
            Param::AscEmobility => "ASC (E-mobility)",
            Param::Cost => "Cost",
            Param::Ivtt => "IVTT",
            Param::WalkAccess => "Walk time",
            Param::DistCar => "Dist. Car",
            Param::DistPt => "Dist. PT",
            Param::DistTrain => "Dist. Train",
            Param::DistActive => "Dist. Active",
            Param::WorkStudyCar => "Work/study -> Car",
            Param::ChildPt => "Child -> PT",
            Param::MigrantSubway => "Immigrant -> Subway",
            Param::FulltimeSubway => "Full-time -> Subway",
            Param::StudentTrain => "Student -> Train",
            Param::StudentWalk => "Student -> Walk",
            Param::SafeSubway => "Safe -> Subway",
            Param::CycleFriendlyBicycle => "Cycle-friendly -> Bicycle",
            Param::IntegPt => "Integration -> PT",
            Param::IntegActive => "Integration -> Active",
            Param::SnowActive => "Snow -> Active",
            Param::MuIvtt => "IVTT mean",
            Param::SigmaIvtt => "IVTT s.d.",
            Param::DeltaMigrantIvtt => "Immigrant shift (IVTT)",
            Param::MuCost => "Cost log-mean",
            Param::SigmaCost => "Cost log-s.d.",
            Param::MuSp => "SP scale",
        }
    }

    /// Parse a stable identifier back into a parameter.
    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }

    /// Parameters optimized on a log scale to enforce positivity.
    pub fn is_log_transformed(self) -> bool {
        matches!(self, Param::SigmaIvtt | Param::SigmaCost | Param::MuSp)
    }
}

/// Dense vector of coefficient values with per-parameter frozen flags.
///
/// Values of parameters outside a model's inclusion mask must stay at their
/// defaults (0.0, or 1.0 for the SP scale); evaluation entry points check
/// this and raise [`CoreError::VariableNotInSpec`] otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterVector {
    values: [f64; Param::COUNT],
    frozen: [bool; Param::COUNT],
}

impl Default for ParameterVector {
    fn default() -> Self {
        let mut values = [0.0; Param::COUNT];
        values[Param::MuSp.index()] = 1.0;
        ParameterVector { values, frozen: [false; Param::COUNT] }
    }
}

impl ParameterVector {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn get(&self, p: Param) -> f64 {
        self.values[p.index()]
    }

    pub fn set(&mut self, p: Param, value: f64) -> &mut Self {
        self.values[p.index()] = value;
        self
    }

    /// Builder-style `set`.
    pub fn with(mut self, p: Param, value: f64) -> Self {
        self.set(p, value);
        self
    }

    pub fn is_frozen(&self, p: Param) -> bool {
        self.frozen[p.index()]
    }

    /// Freeze a parameter at its current value; the optimizer will not move
    /// it and it contributes no gradient entry.
    pub fn freeze(&mut self, p: Param) -> &mut Self {
        self.frozen[p.index()] = true;
        self
    }

    pub fn unfreeze(&mut self, p: Param) -> &mut Self {
        self.frozen[p.index()] = false;
        self
    }

    /// Neutral value a parameter outside the mask must hold.
    pub fn neutral_value(p: Param) -> f64 {
        if p == Param::MuSp {
            1.0
        } else {
            0.0
        }
    }

    /// Iterate over (parameter, value) pairs in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (Param, f64)> + '_ {
        Param::ALL.into_iter().map(move |p| (p, self.get(p)))
    }
}

/// The four bundled estimation specifications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// M1: fixed coefficients, revealed preference only.
    MnlRp,
    /// M2: random coefficients, revealed preference only.
    MxlRp,
    /// M3: fixed coefficients, joint RP-SP.
    MnlRpSp,
    /// M4: random coefficients, joint RP-SP.
    MxlRpSp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] =
        [ModelKind::MnlRp, ModelKind::MxlRp, ModelKind::MnlRpSp, ModelKind::MxlRpSp];

    pub fn id(self) -> &'static str {
        match self {
            ModelKind::MnlRp => "m1",
            ModelKind::MxlRp => "m2",
            ModelKind::MnlRpSp => "m3",
            ModelKind::MxlRpSp => "m4",
        }
    }

    pub fn from_id(id: &str) -> Option<ModelKind> {
        ModelKind::ALL.into_iter().find(|k| k.id() == id.to_ascii_lowercase())
    }

    pub fn describe(self) -> &'static str {
        match self {
            ModelKind::MnlRp => "MNL RP",
            ModelKind::MxlRp => "MXL RP",
            ModelKind::MnlRpSp => "MNL RP-SP",
            ModelKind::MxlRpSp => "MXL RP-SP",
        }
    }

    /// Random-coefficient (mixed logit) specification?
    pub fn is_mixed(self) -> bool {
        matches!(self, ModelKind::MxlRp | ModelKind::MxlRpSp)
    }

    /// Pools stated-preference observations and estimates the SP scale?
    pub fn uses_sp(self) -> bool {
        matches!(self, ModelKind::MnlRpSp | ModelKind::MxlRpSp)
    }
}

/// Default number of quasi-random draws for mixed logit estimation.
pub const DEFAULT_DRAWS: usize = 500;
/// Default per-person trip cap applied before mixed logit estimation.
pub const DEFAULT_TRIP_CAP: usize = 300;

/// A declarative model specification: which parameters exist, how the random
/// coefficients are simulated, and how stated-preference data is handled.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    included: [bool; Param::COUNT],
    /// Draw count for the mixing integral (mixed specs only).
    pub draws: usize,
    /// Per-person RP trip cap applied before estimation (mixed specs only).
    pub trip_cap: Option<usize>,
}

impl ModelSpec {
    /// Construct the bundled specification for one of the four models.
    pub fn for_kind(kind: ModelKind) -> ModelSpec {
        use Param::*;
        let mut params: Vec<Param> = vec![AscBus, AscSubway, AscWalk, AscBicycle];
        if kind.is_mixed() {
            params.extend([MuIvtt, SigmaIvtt, DeltaMigrantIvtt, MuCost, SigmaCost]);
            params.extend([WalkAccess, DistCar, DistPt, DistTrain, DistActive]);
            params.extend([FulltimeSubway, StudentWalk, IntegPt]);
        } else {
            params.extend([Cost, Ivtt, WalkAccess]);
            params.extend([DistCar, DistPt, DistTrain, DistActive]);
            params.extend([
                WorkStudyCar,
                ChildPt,
                MigrantSubway,
                FulltimeSubway,
                StudentTrain,
                StudentWalk,
                CycleFriendlyBicycle,
                IntegPt,
                IntegActive,
                SnowActive,
            ]);
        }
        if kind.uses_sp() {
            params.extend([MuSp, AscEmobility]);
            if !kind.is_mixed() {
                params.push(SafeSubway);
            }
        }
        let mut included = [false; Param::COUNT];
        for p in params {
            included[p.index()] = true;
        }
        ModelSpec {
            kind,
            included,
            draws: if kind.is_mixed() { DEFAULT_DRAWS } else { 0 },
            trip_cap: if kind.is_mixed() { Some(DEFAULT_TRIP_CAP) } else { None },
        }
    }

    #[inline]
    pub fn includes(&self, p: Param) -> bool {
        self.included[p.index()]
    }

    /// Parameters of this specification in canonical order.
    pub fn params(&self) -> Vec<Param> {
        Param::ALL.into_iter().filter(|p| self.includes(*p)).collect()
    }

    /// Number of parameters in the specification (frozen or not).
    pub fn n_params(&self) -> usize {
        self.included.iter().filter(|&&b| b).count()
    }

    /// Number of random coefficient dimensions (0 for fixed models, 2 for mixed).
    pub fn n_random_dims(&self) -> usize {
        if self.kind.is_mixed() {
            2
        } else {
            0
        }
    }

    /// Check that every parameter outside the mask sits at its neutral value.
    pub fn validate_params(&self, params: &ParameterVector) -> Result<()> {
        for p in Param::ALL {
            if !self.includes(p) && params.get(p) != ParameterVector::neutral_value(p) {
                return Err(CoreError::VariableNotInSpec(p));
            }
        }
        Ok(())
    }

    /// Parse a declarative spec file.
    pub fn from_toml_str(text: &str) -> Result<ModelSpec> {
        let raw: SpecFile =
            toml::from_str(text).map_err(|e| CoreError::SpecFile(e.to_string()))?;
        let kind = match (raw.structure.as_str(), raw.data.as_str()) {
            ("mnl", "rp") => ModelKind::MnlRp,
            ("mxl", "rp") => ModelKind::MxlRp,
            ("mnl", "rp_sp") => ModelKind::MnlRpSp,
            ("mxl", "rp_sp") => ModelKind::MxlRpSp,
            (s, d) => {
                return Err(CoreError::SpecFile(format!(
                    "unknown structure/data combination '{s}'/'{d}'"
                )))
            }
        };
        let mut included = [false; Param::COUNT];
        for name in &raw.params {
            let p = Param::from_name(name)
                .ok_or_else(|| CoreError::SpecFile(format!("unknown parameter '{name}'")))?;
            if included[p.index()] {
                return Err(CoreError::SpecFile(format!("duplicate parameter '{name}'")));
            }
            included[p.index()] = true;
        }
        Ok(ModelSpec {
            kind,
            included,
            draws: raw.draws.unwrap_or(if kind.is_mixed() { DEFAULT_DRAWS } else { 0 }),
            trip_cap: if kind.is_mixed() {
                Some(raw.trip_cap.unwrap_or(DEFAULT_TRIP_CAP))
            } else {
                raw.trip_cap
            },
        })
    }

    /// Serialize to the declarative spec file format.
    pub fn to_toml_string(&self) -> String {
        let (structure, data) = match self.kind {
            ModelKind::MnlRp => ("mnl", "rp"),
            ModelKind::MxlRp => ("mxl", "rp"),
            ModelKind::MnlRpSp => ("mnl", "rp_sp"),
            ModelKind::MxlRpSp => ("mxl", "rp_sp"),
        };
        let raw = SpecFile {
            id: self.kind.id().to_string(),
            structure: structure.to_string(),
            data: data.to_string(),
            draws: if self.kind.is_mixed() { Some(self.draws) } else { None },
            trip_cap: self.trip_cap,
            params: self.params().iter().map(|p| p.name().to_string()).collect(),
        };
        toml::to_string(&raw).expect("spec serialization cannot fail")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    id: String,
    structure: String,
    data: String,
    #[serde(default)]
    draws: Option<usize>,
    #[serde(default)]
    trip_cap: Option<usize>,
    params: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_parameter_counts_match_model_framework() {
        assert_eq!(ModelSpec::for_kind(ModelKind::MnlRp).n_params(), 21);
        assert_eq!(ModelSpec::for_kind(ModelKind::MxlRp).n_params(), 17);
        assert_eq!(ModelSpec::for_kind(ModelKind::MnlRpSp).n_params(), 24);
        assert_eq!(ModelSpec::for_kind(ModelKind::MxlRpSp).n_params(), 19);
    }

    #[test]
    fn mnl_only_terms_are_excluded_from_mixed_specs() {
        for kind in [ModelKind::MxlRp, ModelKind::MxlRpSp] {
            let spec = ModelSpec::for_kind(kind);
            for p in [
                Param::MigrantSubway,
                Param::SnowActive,
                Param::IntegActive,
                Param::SafeSubway,
                Param::Cost,
                Param::Ivtt,
            ] {
                assert!(!spec.includes(p), "{p:?} must not be in {kind:?}");
            }
        }
    }

    #[test]
    fn sp_terms_only_in_joint_specs() {
        for kind in [ModelKind::MnlRp, ModelKind::MxlRp] {
            let spec = ModelSpec::for_kind(kind);
            assert!(!spec.includes(Param::MuSp));
            assert!(!spec.includes(Param::AscEmobility));
        }
        for kind in [ModelKind::MnlRpSp, ModelKind::MxlRpSp] {
            let spec = ModelSpec::for_kind(kind);
            assert!(spec.includes(Param::MuSp));
            assert!(spec.includes(Param::AscEmobility));
        }
        assert!(ModelSpec::for_kind(ModelKind::MnlRpSp).includes(Param::SafeSubway));
        assert!(!ModelSpec::for_kind(ModelKind::MnlRp).includes(Param::SafeSubway));
    }

    #[test]
    fn validate_rejects_out_of_spec_values() {
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let mut params = ParameterVector::new();
        spec.validate_params(&params).unwrap();
        params.set(Param::MigrantSubway, -0.7);
        assert!(matches!(
            spec.validate_params(&params),
            Err(CoreError::VariableNotInSpec(Param::MigrantSubway))
        ));
    }

    #[test]
    fn toml_round_trip_preserves_spec() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::for_kind(kind);
            let text = spec.to_toml_string();
            let parsed = ModelSpec::from_toml_str(&text).unwrap();
            assert_eq!(parsed, spec);
        }
    }

    #[test]
    fn unknown_parameter_name_is_rejected() {
        let text = "id = \"m1\"\nstructure = \"mnl\"\ndata = \"rp\"\nparams = [\"b_bogus\"]\n";
        assert!(ModelSpec::from_toml_str(text).is_err());
    }

    #[test]
    fn param_names_round_trip() {
        for p in Param::ALL {
            assert_eq!(Param::from_name(p.name()), Some(p));
        }
    }
}
