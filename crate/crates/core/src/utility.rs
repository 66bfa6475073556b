//! Systematic utility evaluation.
//!
//! The term structure lives in one place: [`attribute_terms`] lists, for a
//! given observation, person, specification, and alternative, every
//! (parameter, attribute) pair that enters the utility. Everything else —
//! direct evaluation, analytic scores, the mixed logit draw loop — is a dot
//! product over those rows, so the fixed- and random-coefficient paths can
//! never diverge.
//!
//! Cost and in-vehicle time are structural: their rows are always emitted
//! for the modes that carry them, and their effective coefficients are
//! injected by the caller (estimates for fixed models, per-draw realizations
//! for mixed models).

use crate::choice_data::{scale_attributes, ChoiceObservation, Mode, PersonProfile, Source};
use crate::error::{CoreError, Result};
use crate::model_spec::{ModelSpec, Param, ParameterVector};

/// One (parameter, attribute value) pair of a utility function.
pub type Term = (Param, f64);

fn push_if_included(terms: &mut Vec<Term>, spec: &ModelSpec, param: Param, value: f64) {
    if spec.includes(param) && value != 0.0 {
        terms.push((param, value));
    }
}

/// List the utility terms for `mode` on this choice occasion.
///
/// Cost and time rows carry [`Param::Cost`] and [`Param::Ivtt`] regardless of
/// the specification; all other rows appear only when the specification
/// includes the parameter. The returned attribute values are already scaled.
pub fn attribute_terms(
    obs: &ChoiceObservation,
    person: &PersonProfile,
    spec: &ModelSpec,
    mode: Mode,
) -> Result<Vec<Term>> {
    let attrs = obs
        .attributes(mode)
        .ok_or_else(|| CoreError::ChosenUnavailable {
            obs_id: obs.obs_id.clone(),
            alt: mode.name().to_string(),
        })?;
    if mode == Mode::EMobility && obs.source == Source::Rp {
        return Err(CoreError::EMobilityOnRp { obs_id: obs.obs_id.clone() });
    }
    let s = scale_attributes(attrs);
    let integ = person.integration_centred;
    let mut terms = Vec::with_capacity(8);

    match mode {
        Mode::Car => {
            terms.push((Param::Cost, s.cost));
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::DistCar, s.distance);
            push_if_included(&mut terms, spec, Param::WorkStudyCar, bool_attr(obs.purpose_work_study));
        }
        Mode::Bus => {
            push_if_included(&mut terms, spec, Param::AscBus, 1.0);
            terms.push((Param::Cost, s.cost));
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::WalkAccess, s.walk_access);
            push_if_included(&mut terms, spec, Param::DistPt, s.distance);
            push_if_included(&mut terms, spec, Param::ChildPt, bool_attr(person.child_0_10));
            push_if_included(&mut terms, spec, Param::IntegPt, integ);
        }
        Mode::Subway => {
            push_if_included(&mut terms, spec, Param::AscSubway, 1.0);
            terms.push((Param::Cost, s.cost));
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::WalkAccess, s.walk_access);
            push_if_included(&mut terms, spec, Param::FulltimeSubway, bool_attr(person.full_time));
            push_if_included(&mut terms, spec, Param::SafeSubway, bool_attr(person.safe));
            push_if_included(&mut terms, spec, Param::ChildPt, bool_attr(person.child_0_10));
            push_if_included(&mut terms, spec, Param::MigrantSubway, bool_attr(person.migrant));
            push_if_included(&mut terms, spec, Param::IntegPt, integ);
        }
        Mode::Train => {
            terms.push((Param::Cost, s.cost));
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::WalkAccess, s.walk_access);
            push_if_included(&mut terms, spec, Param::StudentTrain, bool_attr(person.student));
            push_if_included(&mut terms, spec, Param::DistTrain, s.distance);
            push_if_included(&mut terms, spec, Param::IntegPt, integ);
        }
        Mode::Walk => {
            push_if_included(&mut terms, spec, Param::AscWalk, 1.0);
            // Total walking time under the generic time coefficient; no
            // access term for walk itself.
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::StudentWalk, bool_attr(person.student));
            push_if_included(&mut terms, spec, Param::DistActive, s.distance);
            push_if_included(&mut terms, spec, Param::IntegActive, integ);
            push_if_included(&mut terms, spec, Param::SnowActive, bool_attr(obs.snow));
        }
        Mode::Bicycle => {
            push_if_included(&mut terms, spec, Param::AscBicycle, 1.0);
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(
                &mut terms,
                spec,
                Param::CycleFriendlyBicycle,
                bool_attr(person.cycling_friendly),
            );
            push_if_included(&mut terms, spec, Param::DistActive, s.distance);
            push_if_included(&mut terms, spec, Param::IntegActive, integ);
            push_if_included(&mut terms, spec, Param::SnowActive, bool_attr(obs.snow));
        }
        Mode::EMobility => {
            push_if_included(&mut terms, spec, Param::AscEmobility, 1.0);
            terms.push((Param::Cost, s.cost));
            terms.push((Param::Ivtt, s.ivtt));
            push_if_included(&mut terms, spec, Param::WalkAccess, s.walk_access);
            push_if_included(&mut terms, spec, Param::DistActive, s.distance);
        }
    }
    Ok(terms)
}

fn bool_attr(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Evaluate the systematic utility of `mode` with injected effective cost and
/// time coefficients. Fixed models pass the estimates; mixed models pass the
/// per-draw realizations. The result is pre-scale: apply [`apply_sp_scale`]
/// for stated-preference observations.
pub fn systematic_utility(
    obs: &ChoiceObservation,
    person: &PersonProfile,
    params: &ParameterVector,
    beta_ivtt_effective: f64,
    beta_cost_effective: f64,
    spec: &ModelSpec,
    mode: Mode,
) -> Result<f64> {
    spec.validate_params(params)?;
    let terms = attribute_terms(obs, person, spec, mode)?;
    Ok(utility_from_terms(&terms, params, beta_ivtt_effective, beta_cost_effective))
}

/// Dot product of precomputed terms with the parameter vector, substituting
/// the injected effective coefficients for cost and time.
#[inline]
pub fn utility_from_terms(
    terms: &[Term],
    params: &ParameterVector,
    beta_ivtt_effective: f64,
    beta_cost_effective: f64,
) -> f64 {
    let mut v = 0.0;
    for &(param, x) in terms {
        let beta = match param {
            Param::Ivtt => beta_ivtt_effective,
            Param::Cost => beta_cost_effective,
            p => params.get(p),
        };
        v += beta * x;
    }
    v
}

/// Fixed-terms part of the utility (everything except the injected cost and
/// time rows). The full utility is then `fixed + bt*x_ivtt + bc*x_cost`.
#[inline]
pub fn split_terms(terms: &[Term], params: &ParameterVector) -> (f64, f64, f64) {
    let mut fixed = 0.0;
    let mut x_ivtt = 0.0;
    let mut x_cost = 0.0;
    for &(param, x) in terms {
        match param {
            Param::Ivtt => x_ivtt += x,
            Param::Cost => x_cost += x,
            p => fixed += params.get(p) * x,
        }
    }
    (fixed, x_ivtt, x_cost)
}

/// Scale a systematic utility for its data source: revealed-preference
/// utilities pass through, stated-preference utilities are multiplied by the
/// SP scale.
#[inline]
pub fn apply_sp_scale(v: f64, source: Source, mu_sp: f64) -> f64 {
    match source {
        Source::Rp => v,
        Source::Sp => mu_sp * v,
    }
}
