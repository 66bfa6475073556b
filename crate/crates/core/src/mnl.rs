//! Multinomial logit: choice probabilities, log-likelihood, analytic
//! gradient, and the null log-likelihood.
//!
//! Every probability evaluation subtracts the maximum utility before
//! exponentiating, so arbitrary utility offsets cannot overflow.

use rayon::prelude::*;

use crate::choice_data::{ChoiceObservation, Dataset, Mode, PersonProfile, Source};
use crate::error::{CoreError, Result};
use crate::model_spec::{ModelSpec, Param, ParameterVector};
use crate::utility::{apply_sp_scale, attribute_terms, utility_from_terms, Term};

/// Logit probabilities over a choice set, computed with a max-shift.
///
/// `utilities[i]` is used only where `available[i]`; unavailable slots get
/// probability exactly zero. At least two alternatives must be available.
pub fn choice_probabilities(utilities: &[f64], available: &[bool]) -> Result<Vec<f64>> {
    if utilities.len() != available.len() {
        return Err(CoreError::LengthMismatch {
            what: "utilities vs availability",
            left: utilities.len(),
            right: available.len(),
        });
    }
    let n_avail = available.iter().filter(|&&a| a).count();
    if n_avail < 2 {
        return Err(CoreError::TooFewAlternatives {
            obs_id: String::new(),
            available: n_avail,
        });
    }
    let max_v = utilities
        .iter()
        .zip(available)
        .filter(|(_, &a)| a)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut probs = vec![0.0; utilities.len()];
    let mut denom = 0.0;
    for i in 0..utilities.len() {
        if available[i] {
            let e = (utilities[i] - max_v).exp();
            probs[i] = e;
            denom += e;
        }
    }
    for p in &mut probs {
        *p /= denom;
    }
    Ok(probs)
}

/// Everything the likelihood needs about one choice occasion, resolved once.
/// Rows are aligned with the occasion's available modes in canonical order.
pub(crate) struct ObsDesign {
    pub terms: Vec<Vec<Term>>,
    pub chosen_pos: usize,
    pub source: Source,
    pub obs_id: String,
}

impl ObsDesign {
    pub fn build(obs: &ChoiceObservation, person: &PersonProfile, spec: &ModelSpec) -> Result<ObsDesign> {
        let modes: Vec<Mode> = obs.available_modes().collect();
        let mut terms = Vec::with_capacity(modes.len());
        for &mode in &modes {
            terms.push(attribute_terms(obs, person, spec, mode)?);
        }
        let chosen_pos = modes
            .iter()
            .position(|&m| m == obs.chosen)
            .expect("chosen alternative is available by dataset invariant");
        Ok(ObsDesign { terms, chosen_pos, source: obs.source, obs_id: obs.obs_id.clone() })
    }
}

/// Per-person design shared by the fixed and mixed engines.
pub(crate) struct PersonDesign {
    pub person_index: usize,
    pub person_id: String,
    pub migrant: bool,
    pub obs: Vec<ObsDesign>,
}

pub(crate) fn build_designs(dataset: &Dataset, spec: &ModelSpec) -> Result<Vec<PersonDesign>> {
    (0..dataset.n_persons())
        .map(|i| {
            let person = dataset.person(i);
            let obs = dataset
                .person_observations(i)
                .iter()
                .map(|o| ObsDesign::build(o, person, spec))
                .collect::<Result<Vec<_>>>()?;
            Ok(PersonDesign {
                person_index: i,
                person_id: person.person_id.clone(),
                migrant: person.migrant,
                obs,
            })
        })
        .collect()
}

/// Free (non-frozen) parameters of a spec, in canonical order.
pub(crate) fn free_params(spec: &ModelSpec, params: &ParameterVector) -> Vec<Param> {
    spec.params().into_iter().filter(|&p| !params.is_frozen(p)).collect()
}

struct PersonContribution {
    ll: f64,
    score: Vec<f64>,
    failed: Option<String>,
}

/// MNL log-likelihood with its analytic gradient over the free parameters.
///
/// Stated-preference utilities are scaled by the current SP scale; the scale
/// parameter's own gradient entry is assembled from the unscaled utilities.
pub fn log_likelihood(
    dataset: &Dataset,
    params: &ParameterVector,
    spec: &ModelSpec,
) -> Result<(f64, Vec<f64>)> {
    spec.validate_params(params)?;
    let designs = build_designs(dataset, spec)?;
    let free = free_params(spec, params);
    let (ll, grad, _) = ll_grad_scores(&designs, params, spec, &free, false)?;
    Ok((ll, grad))
}

/// Like [`log_likelihood`] but also returns per-person score vectors for
/// clustered covariance estimation.
pub fn log_likelihood_with_scores(
    dataset: &Dataset,
    params: &ParameterVector,
    spec: &ModelSpec,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    spec.validate_params(params)?;
    let designs = build_designs(dataset, spec)?;
    let free = free_params(spec, params);
    ll_grad_scores(&designs, params, spec, &free, true)
}

pub(crate) fn ll_grad_scores(
    designs: &[PersonDesign],
    params: &ParameterVector,
    _spec: &ModelSpec,
    free: &[Param],
    keep_scores: bool,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let mu_sp = params.get(Param::MuSp);
    let bt = params.get(Param::Ivtt);
    let bc = params.get(Param::Cost);
    let k = free.len();
    let mut pos_of = [usize::MAX; Param::COUNT];
    for (j, &p) in free.iter().enumerate() {
        pos_of[p.index()] = j;
    }
    let mu_sp_pos = pos_of[Param::MuSp.index()];

    // Parallel map in person order, sequential reduction: contributions are
    // summed in a fixed order so repeated runs are bit-identical.
    let contributions: Vec<PersonContribution> = designs
        .par_iter()
        .map(|design| {
            let mut ll = 0.0;
            let mut score = vec![0.0; k];
            for od in &design.obs {
                let scale = match od.source {
                    Source::Rp => 1.0,
                    Source::Sp => mu_sp,
                };
                let raw: Vec<f64> =
                    od.terms.iter().map(|t| utility_from_terms(t, params, bt, bc)).collect();
                let scaled: Vec<f64> =
                    raw.iter().map(|&v| apply_sp_scale(v, od.source, mu_sp)).collect();
                let max_v = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = scaled.iter().map(|&v| (v - max_v).exp()).collect();
                let denom: f64 = exps.iter().sum();
                let p_chosen = exps[od.chosen_pos] / denom;
                if p_chosen <= 0.0 {
                    return PersonContribution {
                        ll: f64::NEG_INFINITY,
                        score,
                        failed: Some(od.obs_id.clone()),
                    };
                }
                ll += p_chosen.ln();
                // Score: x_chosen - sum_j P_j x_j, with coefficient rows
                // scaled by mu on SP occasions and the scale row carrying the
                // raw utility.
                for (j, terms) in od.terms.iter().enumerate() {
                    let weight = if j == od.chosen_pos { 1.0 - exps[j] / denom } else { -exps[j] / denom };
                    if weight == 0.0 {
                        continue;
                    }
                    for &(param, x) in terms {
                        let pos = pos_of[param.index()];
                        if pos != usize::MAX {
                            score[pos] += weight * scale * x;
                        }
                    }
                    if od.source == Source::Sp && mu_sp_pos != usize::MAX {
                        score[mu_sp_pos] += weight * raw[j];
                    }
                }
            }
            PersonContribution { ll, score, failed: None }
        })
        .collect();

    let mut ll = 0.0;
    let mut grad = vec![0.0; k];
    let mut scores = Vec::with_capacity(if keep_scores { contributions.len() } else { 0 });
    for c in contributions {
        if let Some(obs_id) = c.failed {
            return Err(CoreError::ZeroProbability { obs_id });
        }
        ll += c.ll;
        for (g, s) in grad.iter_mut().zip(&c.score) {
            *g += s;
        }
        if keep_scores {
            scores.push(c.score);
        }
    }
    Ok((ll, grad, scores))
}

/// Log-likelihood of the zero-parameter reference model: each observation
/// contributes `ln(1/J)` for its `J` available alternatives.
pub fn null_loglikelihood(dataset: &Dataset) -> f64 {
    dataset
        .observations()
        .iter()
        .map(|obs| -( obs.n_available() as f64).ln())
        .sum()
}

/// Probabilities for a single observation under fixed coefficients, aligned
/// with the observation's available modes (in canonical mode order).
pub fn observation_probabilities(
    obs: &ChoiceObservation,
    person: &PersonProfile,
    params: &ParameterVector,
    spec: &ModelSpec,
) -> Result<Vec<(Mode, f64)>> {
    spec.validate_params(params)?;
    let mu_sp = params.get(Param::MuSp);
    let bt = params.get(Param::Ivtt);
    let bc = params.get(Param::Cost);
    let modes: Vec<Mode> = obs.available_modes().collect();
    let mut utilities = Vec::with_capacity(modes.len());
    for &mode in &modes {
        let terms = attribute_terms(obs, person, spec, mode)?;
        utilities.push(apply_sp_scale(
            utility_from_terms(&terms, params, bt, bc),
            obs.source,
            mu_sp,
        ));
    }
    let probs = choice_probabilities(&utilities, &vec![true; modes.len()])?;
    Ok(modes.into_iter().zip(probs).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_spec::ModelKind;
    use crate::presets;
    use crate::testutil::{fixture_person, simple_obs};
    use crate::choice_data::Dataset;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_utilities_split_evenly() {
        let p = choice_probabilities(&[1.0, 1.0], &[true, true]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn log_two_utility_gap_gives_two_thirds() {
        let p = choice_probabilities(&[2.0f64.ln(), 0.0], &[true, true]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn unavailable_alternatives_get_exactly_zero() {
        let p = choice_probabilities(&[5.0, 5.0, 5.0], &[true, true, false]).unwrap();
        assert_eq!(p[2], 0.0);
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one_and_survive_huge_offsets() {
        let base = [1.3, -0.4, 0.9, 2.2];
        let avail = [true, true, false, true];
        let p0 = choice_probabilities(&base, &avail).unwrap();
        assert!((p0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = base.iter().map(|v| v + 700.0).collect();
        let p1 = choice_probabilities(&shifted, &avail).unwrap();
        for (a, b) in p0.iter().zip(&p1) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn singleton_choice_set_is_rejected() {
        assert!(choice_probabilities(&[1.0, 2.0], &[true, false]).is_err());
        assert!(choice_probabilities(&[], &[]).is_err());
    }

    fn two_person_dataset() -> Dataset {
        let persons = vec![fixture_person("a"), fixture_person("b")];
        let observations = vec![
            simple_obs("o1", "a", Mode::Car),
            simple_obs("o2", "a", Mode::Bus),
            simple_obs("o3", "b", Mode::Car),
        ];
        Dataset::new(persons, observations).unwrap()
    }

    #[test]
    fn zero_parameters_reproduce_the_uniform_likelihood() {
        let ds = two_person_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let params = ParameterVector::new();
        let (ll, _) = log_likelihood(&ds, &params, &spec).unwrap();
        let expected: f64 = ds
            .observations()
            .iter()
            .map(|o| -(o.n_available() as f64).ln())
            .sum();
        assert!((ll - expected).abs() < 1e-10);
        assert!((ll - null_loglikelihood(&ds)).abs() < 1e-10);
    }

    #[test]
    fn null_ll_counts_availability() {
        let ds = two_person_dataset();
        // Every fixture observation has two available alternatives.
        assert!((null_loglikelihood(&ds) - 3.0 * (0.5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn null_ll_handles_mixed_choice_set_sizes() {
        use crate::choice_data::AlternativeAttributes;
        use crate::testutil::{attrs, obs_with_attrs};
        let mut two: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        two[Mode::Car.index()] = Some(attrs(8.0, 20.0, 0.0, 10.0, true));
        two[Mode::Bus.index()] = Some(attrs(3.25, 30.0, 5.0, 9.0, true));
        let mut three = two;
        three[Mode::Walk.index()] = Some(attrs(0.0, 80.0, 0.0, 6.0, true));
        let ds = Dataset::new(
            vec![fixture_person("a")],
            vec![
                obs_with_attrs("o1", "a", Mode::Car, two, false),
                obs_with_attrs("o2", "a", Mode::Car, three, false),
            ],
        )
        .unwrap();
        let expected = (1.0f64 / 2.0).ln() + (1.0f64 / 3.0).ln();
        assert!((null_loglikelihood(&ds) - expected).abs() < 1e-12);
    }

    #[test]
    fn ll_is_nonpositive_at_preset_estimates() {
        let ds = two_person_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let (ll, _) = log_likelihood(&ds, &presets::m1_estimates(), &spec).unwrap();
        assert!(ll <= 0.0);
    }

    /// Central finite differences of the log-likelihood: the independent
    /// oracle for the analytic gradient.
    pub(crate) fn fd_gradient(
        ds: &Dataset,
        params: &ParameterVector,
        spec: &ModelSpec,
        free: &[Param],
        h: f64,
    ) -> Vec<f64> {
        free.iter()
            .map(|&p| {
                let mut plus = params.clone();
                plus.set(p, params.get(p) + h);
                let mut minus = params.clone();
                minus.set(p, params.get(p) - h);
                let (ll_p, _) = log_likelihood(ds, &plus, spec).unwrap();
                let (ll_m, _) = log_likelihood(ds, &minus, spec).unwrap();
                (ll_p - ll_m) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let persons = vec![fixture_person("a"), fixture_person("b"), fixture_person("c")];
        let mut observations = Vec::new();
        for i in 0..30 {
            let pid = ["a", "b", "c"][i % 3];
            let chosen = if rng.gen_bool(0.5) { Mode::Car } else { Mode::Bus };
            observations.push(simple_obs(&format!("o{i}"), pid, chosen));
        }
        let ds = Dataset::new(persons, observations).unwrap();
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        for trial in 0..5 {
            let mut params = ParameterVector::new();
            for p in spec.params() {
                params.set(p, rng.gen_range(-0.4..0.4));
            }
            let (_, grad) = log_likelihood(&ds, &params, &spec).unwrap();
            let free = free_params(&spec, &params);
            let fd = fd_gradient(&ds, &params, &spec, &free, 1e-5);
            for (j, (&a, &b)) in grad.iter().zip(&fd).enumerate() {
                assert!(
                    (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                    "trial {trial} param {:?}: analytic {a} vs fd {b}",
                    free[j]
                );
            }
        }
    }

    #[test]
    fn sp_scale_gradient_matches_finite_differences() {
        use crate::choice_data::AlternativeAttributes;
        use crate::testutil::sp_obs_with_attrs;
        let persons = vec![fixture_person("a")];
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(AlternativeAttributes {
            cost: 9.0,
            ivtt: 25.0,
            walk_access: 0.0,
            distance: 9.0,
            available: true,
        });
        slots[Mode::Bus.index()] = Some(AlternativeAttributes {
            cost: 3.25,
            ivtt: 40.0,
            walk_access: 7.0,
            distance: 9.0,
            available: true,
        });
        let observations = vec![
            simple_obs("r1", "a", Mode::Car),
            sp_obs_with_attrs("s1", "a", Mode::Bus, slots),
        ];
        let ds = Dataset::new(persons, observations).unwrap();
        let spec = ModelSpec::for_kind(ModelKind::MnlRpSp);
        let mut params = presets::m3_estimates();
        params.set(Param::MuSp, 0.45);
        let (_, grad) = log_likelihood(&ds, &params, &spec).unwrap();
        let free = free_params(&spec, &params);
        let fd = fd_gradient(&ds, &params, &spec, &free, 1e-6);
        for (j, (&a, &b)) in grad.iter().zip(&fd).enumerate() {
            assert!(
                (a - b).abs() <= 1e-6 * a.abs().max(1.0),
                "param {:?}: analytic {a} vs fd {b}",
                free[j]
            );
        }
    }

    #[test]
    fn chosen_probability_underflow_is_reported_with_the_observation() {
        // A utility gap beyond ~745 makes exp underflow to exactly zero
        // even after the max-shift.
        let ds = two_person_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let params = ParameterVector::new().with(Param::Cost, -1e4);
        let err = log_likelihood(&ds, &params, &spec).unwrap_err();
        assert!(matches!(err, crate::error::CoreError::ZeroProbability { ref obs_id } if !obs_id.is_empty()));
    }

    #[test]
    fn frozen_parameters_contribute_no_gradient_entries() {
        let ds = two_person_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let mut params = presets::m1_estimates();
        params.freeze(Param::Cost);
        let (_, grad) = log_likelihood(&ds, &params, &spec).unwrap();
        assert_eq!(grad.len(), spec.n_params() - 1);
    }
}
