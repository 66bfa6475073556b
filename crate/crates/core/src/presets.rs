//! Bundled reference estimates for the four model configurations.
//!
//! These are the parameter values the toolkit ships for scenario analysis
//! and as sensible true-parameter defaults for synthetic experiments. Use
//! them wherever a fully specified, behaviourally plausible parameter vector
//! is needed without estimating one first.

use crate::model_spec::{Param, ParameterVector};

/// Reference estimates for the fixed-coefficient RP model (M1).
pub fn m1_estimates() -> ParameterVector {
    ParameterVector::new()
        .with(Param::AscBus, -0.271)
        .with(Param::AscSubway, 2.211)
        .with(Param::AscWalk, 0.965)
        .with(Param::AscBicycle, -2.234)
        .with(Param::Cost, -0.766)
        .with(Param::Ivtt, -0.361)
        .with(Param::WalkAccess, -0.461)
        .with(Param::DistCar, 0.356)
        .with(Param::DistPt, 0.106)
        .with(Param::DistTrain, 0.311)
        .with(Param::DistActive, -0.581)
        .with(Param::WorkStudyCar, -0.291)
        .with(Param::ChildPt, 0.426)
        .with(Param::MigrantSubway, -0.708)
        .with(Param::FulltimeSubway, -0.306)
        .with(Param::StudentTrain, -1.562)
        .with(Param::StudentWalk, 0.574)
        .with(Param::CycleFriendlyBicycle, 0.704)
        .with(Param::IntegPt, -0.179)
        .with(Param::IntegActive, -0.259)
        .with(Param::SnowActive, -0.622)
}

/// Reference estimates for the random-coefficient RP model (M2).
pub fn m2_estimates() -> ParameterVector {
    ParameterVector::new()
        .with(Param::AscBus, -0.396)
        .with(Param::AscSubway, 2.107)
        .with(Param::AscWalk, 1.088)
        .with(Param::AscBicycle, -1.713)
        .with(Param::MuIvtt, -0.848)
        .with(Param::SigmaIvtt, 0.713)
        .with(Param::DeltaMigrantIvtt, 0.556)
        .with(Param::MuCost, -2.130)
        .with(Param::SigmaCost, 1.724)
        .with(Param::WalkAccess, -0.448)
        .with(Param::DistCar, 0.394)
        .with(Param::DistPt, 0.110)
        .with(Param::DistTrain, 0.276)
        .with(Param::DistActive, -0.864)
        .with(Param::FulltimeSubway, -0.684)
        .with(Param::StudentWalk, 0.559)
        .with(Param::IntegPt, -0.095)
}

/// Reference estimates for the fixed-coefficient joint RP-SP model (M3).
pub fn m3_estimates() -> ParameterVector {
    ParameterVector::new()
        .with(Param::MuSp, 0.298)
        .with(Param::AscBus, -0.310)
        .with(Param::AscSubway, 1.873)
        .with(Param::AscWalk, 0.888)
        .with(Param::AscBicycle, -2.314)
        .with(Param::AscEmobility, -1.294)
        .with(Param::Cost, -0.801)
        .with(Param::Ivtt, -0.347)
        .with(Param::WalkAccess, -0.455)
        .with(Param::DistCar, 0.353)
        .with(Param::DistPt, 0.108)
        .with(Param::DistTrain, 0.302)
        .with(Param::DistActive, -0.575)
        .with(Param::WorkStudyCar, -0.252)
        .with(Param::ChildPt, 0.355)
        .with(Param::MigrantSubway, -0.653)
        .with(Param::FulltimeSubway, -0.246)
        .with(Param::StudentTrain, -1.534)
        .with(Param::StudentWalk, 0.577)
        .with(Param::SafeSubway, 0.278)
        .with(Param::CycleFriendlyBicycle, 0.720)
        .with(Param::IntegPt, -0.213)
        .with(Param::IntegActive, -0.273)
        .with(Param::SnowActive, -0.660)
}

/// Reference estimates for the random-coefficient joint RP-SP model (M4).
pub fn m4_estimates() -> ParameterVector {
    ParameterVector::new()
        .with(Param::MuSp, 0.281)
        .with(Param::AscBus, -0.519)
        .with(Param::AscSubway, 2.016)
        .with(Param::AscWalk, 0.834)
        .with(Param::AscBicycle, -1.869)
        .with(Param::AscEmobility, -0.810)
        .with(Param::MuIvtt, -0.798)
        .with(Param::SigmaIvtt, 0.706)
        .with(Param::DeltaMigrantIvtt, 0.525)
        .with(Param::MuCost, -2.039)
        .with(Param::SigmaCost, 1.697)
        .with(Param::WalkAccess, -0.531)
        .with(Param::DistCar, 0.382)
        .with(Param::DistPt, 0.107)
        .with(Param::DistTrain, 0.251)
        .with(Param::DistActive, -0.846)
        .with(Param::FulltimeSubway, -0.673)
        .with(Param::StudentWalk, 0.656)
        .with(Param::IntegPt, -0.106)
}
