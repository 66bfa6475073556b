//! Behavioural quantities derived from estimates: value of travel time,
//! population-mean coefficients, and person-level conditional parameters.

use crate::choice_data::{Dataset, Mode};
use crate::error::{CoreError, Result};
use crate::mnl::choice_probabilities;
use crate::model_spec::{ModelSpec, Param, ParameterVector};
use crate::mxl::{realize_random_params, DrawMatrix};
use crate::utility::{apply_sp_scale, systematic_utility};

/// Value of travel time from fixed coefficients, in CAD per hour.
///
/// Returns (in-vehicle VOT, walk/access VOT). Time and cost share the same
/// /10 scaling, so the scales cancel in the ratio; for joint models the SP
/// scale cancels as well.
pub fn vot_mnl(beta_ivtt: f64, beta_walk: f64, beta_cost: f64) -> Result<(f64, f64)> {
    if beta_cost == 0.0 {
        return Err(CoreError::DivisionByZero("cost coefficient"));
    }
    Ok((beta_ivtt / beta_cost * 60.0, beta_walk / beta_cost * 60.0))
}

/// Immigrant-to-nonimmigrant VOT ratio implied by the random time
/// coefficient's mean shift: `(mu + delta) / mu`.
pub fn vot_ratio_mxl(mu_ivtt: f64, delta_migrant: f64) -> Result<f64> {
    if mu_ivtt == 0.0 {
        return Err(CoreError::DivisionByZero("time coefficient mean"));
    }
    Ok((mu_ivtt + delta_migrant) / mu_ivtt)
}

/// Population mean of the negative lognormal cost coefficient:
/// `-exp(mu + sigma^2 / 2)`. Strictly negative for all finite inputs.
pub fn population_mean_cost(mu_cost: f64, sigma_cost: f64) -> f64 {
    -(mu_cost + 0.5 * sigma_cost * sigma_cost).exp()
}

/// Population-mean time coefficient for a person: `mu + delta * MIG`.
pub fn population_mean_ivtt(params: &ParameterVector, migrant: bool) -> f64 {
    params.get(Param::MuIvtt)
        + if migrant { params.get(Param::DeltaMigrantIvtt) } else { 0.0 }
}

/// Posterior mean of a person's random coefficients given their observed
/// choice sequence, using the person's block of the draw matrix.
pub fn conditional_parameters(
    dataset: &Dataset,
    person_index: usize,
    params: &ParameterVector,
    draws: &DrawMatrix,
    spec: &ModelSpec,
) -> Result<(f64, f64)> {
    conditional_parameters_for(
        dataset.person(person_index),
        dataset.person_observations(person_index),
        person_index,
        params,
        draws,
        spec,
    )
}

/// [`conditional_parameters`] over an explicit observation slice.
///
/// Draws are weighted by the person's panel likelihood at each draw. An
/// empty slice has a flat likelihood, so the posterior mean reduces to the
/// prior (unweighted) draw average.
pub fn conditional_parameters_for(
    person: &crate::choice_data::PersonProfile,
    observations: &[crate::choice_data::ChoiceObservation],
    person_index: usize,
    params: &ParameterVector,
    draws: &DrawMatrix,
    spec: &ModelSpec,
) -> Result<(f64, f64)> {
    spec.validate_params(params)?;
    let mu_sp = params.get(Param::MuSp);
    let n_draws = draws.n_draws();

    let mut log_like = vec![0.0; n_draws];
    let mut beta_t = vec![0.0; n_draws];
    let mut beta_c = vec![0.0; n_draws];
    for r in 0..n_draws {
        let z_t = draws.value(person_index, r, 0);
        let z_c = draws.value(person_index, r, 1);
        let (bt, bc) = realize_random_params(z_t, z_c, person, params);
        beta_t[r] = bt;
        beta_c[r] = bc;
        for obs in observations {
            let modes: Vec<Mode> = obs.available_modes().collect();
            let mut utilities = Vec::with_capacity(modes.len());
            for &mode in &modes {
                let v = systematic_utility(obs, person, params, bt, bc, spec, mode)?;
                utilities.push(apply_sp_scale(v, obs.source, mu_sp));
            }
            let probs = choice_probabilities(&utilities, &vec![true; modes.len()])?;
            let chosen = modes.iter().position(|&m| m == obs.chosen).expect("chosen available");
            log_like[r] += probs[chosen].ln();
        }
    }

    let max_ll = log_like.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_like.iter().map(|&l| (l - max_ll).exp()).collect();
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(CoreError::ConditionalUnderflow {
            person_id: person.person_id.clone(),
        });
    }
    let mean_t = beta_t.iter().zip(&weights).map(|(b, w)| b * w).sum::<f64>() / total;
    let mean_c = beta_c.iter().zip(&weights).map(|(b, w)| b * w).sum::<f64>() / total;
    Ok((mean_t, mean_c))
}
