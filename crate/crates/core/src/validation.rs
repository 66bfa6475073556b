//! Five-fold observation-level cross-validation.
//!
//! Within each person, RP observations are randomly permuted under a seeded
//! generator and dealt round-robin to folds, so every person contributes to
//! every fold once they have at least k occasions. SP observations are never
//! held out. Prediction is the highest systematic utility, with
//! model-specific substitution of population-mean coefficients for mixed
//! models.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{population_mean_cost, population_mean_ivtt};
use crate::choice_data::{ChoiceObservation, Dataset, Mode, PersonProfile, Source};
use crate::error::{CoreError, Result};
use crate::estimate::{fit, fit_prepared, EstimationResult, FitOptions};
use crate::model_spec::{ModelSpec, Param, ParameterVector};
use crate::mxl::{derive_seed, DrawMatrix, DEFAULT_DISCARD};
use crate::utility::systematic_utility;

/// Fold labels for every observation of a dataset; SP observations carry
/// `None` (never held out).
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    pub k: usize,
    /// Parallel to `dataset.observations()`.
    pub fold_of: Vec<Option<usize>>,
}

impl FoldAssignment {
    /// Observation indices of one fold's held-out test set.
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.fold_of
            .iter()
            .enumerate()
            .filter(|(_, f)| **f == Some(fold))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Assign each person's RP observations to folds: seeded shuffle within
/// person, then round-robin deal.
pub fn make_folds(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(CoreError::BadFoldCount(k));
    }
    let mut fold_of = vec![None; dataset.n_observations()];
    let mut offset = 0;
    for person in 0..dataset.n_persons() {
        let observations = dataset.person_observations(person);
        let rp_local: Vec<usize> = observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.source == Source::Rp)
            .map(|(i, _)| i)
            .collect();
        if rp_local.is_empty() {
            return Err(CoreError::EmptyInput("person without RP observations"));
        }
        let mut order = rp_local.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, person as u64));
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for (deal, &local) in order.iter().enumerate() {
            fold_of[offset + local] = Some(deal % k);
        }
        offset += observations.len();
    }
    Ok(FoldAssignment { k, fold_of })
}

/// Predict the chosen mode as the availability-restricted utility argmax.
///
/// Mixed models substitute the population means: `mu (+ delta for
/// immigrants)` for time and `-exp(mu + sigma^2/2)` for cost. Joint models
/// evaluate at scale one (prediction targets RP observations). Ties break
/// toward the earlier mode in canonical order.
pub fn predict_mode(
    obs: &ChoiceObservation,
    person: &PersonProfile,
    params: &ParameterVector,
    spec: &ModelSpec,
) -> Result<Mode> {
    let (beta_ivtt, beta_cost) = if spec.kind.is_mixed() {
        (
            population_mean_ivtt(params, person.migrant),
            population_mean_cost(params.get(Param::MuCost), params.get(Param::SigmaCost)),
        )
    } else {
        (params.get(Param::Ivtt), params.get(Param::Cost))
    };
    let mut best: Option<(Mode, f64)> = None;
    for mode in obs.available_modes() {
        let v = systematic_utility(obs, person, params, beta_ivtt, beta_cost, spec, mode)?;
        match best {
            Some((_, best_v)) if v <= best_v => {}
            _ => best = Some((mode, v)),
        }
    }
    Ok(best.expect("at least two available modes").0)
}

/// Cross-validation output.
#[derive(Debug, Clone)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Per-fold held-out accuracy; `None` where estimation failed.
    pub fold_accuracy: Vec<Option<f64>>,
    /// Per-fold estimation failures, as (fold, message).
    pub failures: Vec<(usize, String)>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    /// Per-fold estimates for stability reporting.
    pub fold_results: Vec<Option<EstimationResult>>,
}

/// Run k-fold cross-validation of a specification.
///
/// Each fold re-estimates on the training RP observations (plus all SP
/// observations for joint specs) starting from the full-sample estimates,
/// then scores held-out RP accuracy. Estimation failures are reported per
/// fold and the run continues.
pub fn cross_validate(
    dataset: &Dataset,
    spec: &ModelSpec,
    k: usize,
    seed: u64,
    options: &FitOptions,
) -> Result<CvReport> {
    let estimation_set =
        if spec.kind.uses_sp() { dataset.clone() } else { dataset.rp_only()? };
    let folds = make_folds(&estimation_set, k, seed)?;

    // Full-sample fit provides warm starts for every fold; folds only need
    // point estimates for prediction, so covariance work is skipped.
    let options = FitOptions { compute_inference: false, ..options.clone() };
    let full = fit(&estimation_set, spec, &options)?;

    // Mixed specs reuse one full-sample draw matrix, restricted per fold.
    let full_draws = if spec.kind.is_mixed() {
        let n_draws = options.draws.unwrap_or(spec.draws);
        Some(DrawMatrix::halton(
            estimation_set.n_persons(),
            2,
            n_draws,
            DEFAULT_DISCARD,
            options.seed,
        )?)
    } else {
        None
    };

    let mut fold_accuracy = Vec::with_capacity(k);
    let mut fold_results = Vec::with_capacity(k);
    let mut failures = Vec::new();

    for fold in 0..k {
        let test_idx = folds.test_indices(fold);
        let test_set: std::collections::HashSet<usize> = test_idx.iter().cloned().collect();
        let observations = estimation_set.observations();

        let train_obs: Vec<ChoiceObservation> = observations
            .iter()
            .enumerate()
            .filter(|(i, _)| !test_set.contains(i))
            .map(|(_, o)| o.clone())
            .collect();
        let train_ids: std::collections::HashSet<&str> =
            train_obs.iter().map(|o| o.person_id.as_str()).collect();
        let train_persons: Vec<PersonProfile> = estimation_set
            .persons()
            .iter()
            .filter(|p| train_ids.contains(p.person_id.as_str()))
            .cloned()
            .collect();
        let kept_indices: Vec<usize> = estimation_set
            .persons()
            .iter()
            .enumerate()
            .filter(|(_, p)| train_ids.contains(p.person_id.as_str()))
            .map(|(i, _)| i)
            .collect();
        let train = Dataset::new(train_persons, train_obs)?;

        let fold_options = FitOptions { start: Some(full.params.clone()), ..options.clone() };
        let fitted = match &full_draws {
            Some(d) => {
                let restricted = d.restrict(&kept_indices);
                fit_prepared(&train, spec, Some(&restricted), &fold_options)
            }
            None => fit_prepared(&train, spec, None, &fold_options),
        };

        match fitted {
            Ok(result) => {
                let mut hits = 0usize;
                let mut total = 0usize;
                for &i in &test_idx {
                    let obs = &observations[i];
                    let person_idx = estimation_set
                        .person_index(&obs.person_id)
                        .expect("person exists");
                    let person = estimation_set.person(person_idx);
                    let predicted = predict_mode(obs, person, &result.params, spec)?;
                    if predicted == obs.chosen {
                        hits += 1;
                    }
                    total += 1;
                }
                let accuracy = hits as f64 / total.max(1) as f64;
                fold_accuracy.push(Some(accuracy));
                fold_results.push(Some(result));
            }
            Err(e) => {
                failures.push((fold, e.to_string()));
                fold_accuracy.push(None);
                fold_results.push(None);
            }
        }
    }

    let finished: Vec<f64> = fold_accuracy.iter().flatten().cloned().collect();
    let mean = if finished.is_empty() {
        f64::NAN
    } else {
        finished.iter().sum::<f64>() / finished.len() as f64
    };
    let sd = if finished.len() > 1 {
        let var = finished.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>()
            / (finished.len() - 1) as f64;
        var.sqrt()
    } else {
        0.0
    };

    Ok(CvReport {
        k,
        seed,
        fold_accuracy,
        failures,
        mean_accuracy: mean,
        sd_accuracy: sd,
        fold_results,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_spec::ModelKind;
    use crate::presets;
    use crate::testutil::{attrs, fixture_person, obs_with_attrs, simple_obs};
    use crate::choice_data::AlternativeAttributes;

    fn n_obs_dataset(counts: &[(&str, usize)]) -> Dataset {
        let persons = counts.iter().map(|(pid, _)| fixture_person(pid)).collect();
        let mut observations = Vec::new();
        for (pid, n) in counts {
            for i in 0..*n {
                observations.push(simple_obs(&format!("{pid}-{i}"), pid, Mode::Car));
            }
        }
        Dataset::new(persons, observations).unwrap()
    }

    #[test]
    fn ten_observations_split_two_per_fold() {
        let ds = n_obs_dataset(&[("a", 10)]);
        let folds = make_folds(&ds, 5, 3).unwrap();
        for fold in 0..5 {
            assert_eq!(folds.test_indices(fold).len(), 2);
        }
    }

    #[test]
    fn three_observations_reach_three_distinct_folds() {
        let ds = n_obs_dataset(&[("a", 3)]);
        let folds = make_folds(&ds, 5, 3).unwrap();
        let sizes: Vec<usize> = (0..5).map(|f| folds.test_indices(f).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 3);
        assert_eq!(sizes.iter().filter(|&&s| s == 1).count(), 3);
    }

    #[test]
    fn folds_partition_rp_observations() {
        let ds = n_obs_dataset(&[("a", 13), ("b", 7), ("c", 5)]);
        let folds = make_folds(&ds, 5, 9).unwrap();
        let mut seen = vec![false; ds.n_observations()];
        for fold in 0..5 {
            for i in folds.test_indices(fold) {
                assert!(!seen[i], "observation {i} in two folds");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn every_person_with_enough_occasions_touches_every_fold() {
        let ds = n_obs_dataset(&[("a", 5), ("b", 9), ("c", 23)]);
        let folds = make_folds(&ds, 5, 1).unwrap();
        for fold in 0..5 {
            let idx = folds.test_indices(fold);
            for pid in ["a", "b", "c"] {
                assert!(
                    idx.iter().any(|&i| ds.observations()[i].person_id == pid),
                    "person {pid} missing from fold {fold}"
                );
            }
        }
    }

    #[test]
    fn fold_assignment_is_deterministic_given_seed() {
        let ds = n_obs_dataset(&[("a", 12), ("b", 8)]);
        let a = make_folds(&ds, 5, 42).unwrap();
        let b = make_folds(&ds, 5, 42).unwrap();
        assert_eq!(a.fold_of, b.fold_of);
        let c = make_folds(&ds, 5, 43).unwrap();
        assert_ne!(a.fold_of, c.fold_of);
    }

    #[test]
    fn fewer_than_two_folds_is_rejected() {
        let ds = n_obs_dataset(&[("a", 4)]);
        assert!(matches!(make_folds(&ds, 1, 0), Err(CoreError::BadFoldCount(1))));
    }

    #[test]
    fn prediction_takes_the_argmax_and_breaks_ties_toward_car() {
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let person = fixture_person("p");
        // Identical attributes on car and train: both carry no constant and
        // no covariate applies, so utilities tie exactly; car wins by order.
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(attrs(5.0, 20.0, 0.0, 0.0, true));
        slots[Mode::Train.index()] = Some(attrs(5.0, 20.0, 0.0, 0.0, true));
        let obs = obs_with_attrs("o", "p", Mode::Train, slots, false);
        let mut params = presets::m1_estimates();
        params.set(Param::DistCar, 0.0);
        params.set(Param::DistTrain, 0.0);
        params.set(Param::WorkStudyCar, 0.0);
        params.set(Param::StudentTrain, 0.0);
        params.set(Param::WalkAccess, 0.0);
        assert_eq!(predict_mode(&obs, &person, &params, &spec).unwrap(), Mode::Car);
    }

    #[test]
    fn prediction_is_invariant_to_common_utility_shifts() {
        // Adding a constant to every alternative cannot change the argmax;
        // exercised through a shared cost increase under a generic cost
        // coefficient.
        let spec = ModelSpec::for_kind(ModelKind::MnlRp);
        let person = fixture_person("p");
        let params = presets::m1_estimates();
        let build = |extra: f64| {
            let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
            slots[Mode::Car.index()] = Some(attrs(6.0 + extra, 25.0, 0.0, 8.0, true));
            slots[Mode::Bus.index()] = Some(attrs(3.25 + extra, 40.0, 6.0, 8.0, true));
            slots[Mode::Subway.index()] = Some(attrs(3.25 + extra, 30.0, 8.0, 8.0, true));
            obs_with_attrs("o", "p", Mode::Car, slots, false)
        };
        let before = predict_mode(&build(0.0), &person, &params, &spec).unwrap();
        let after = predict_mode(&build(7.0), &person, &params, &spec).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn mixed_prediction_uses_population_means() {
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let mut person = fixture_person("p");
        person.migrant = true;
        let params = presets::m2_estimates();
        let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
        slots[Mode::Car.index()] = Some(attrs(6.0, 25.0, 0.0, 8.0, true));
        slots[Mode::Bus.index()] = Some(attrs(3.25, 40.0, 6.0, 8.0, true));
        let obs = obs_with_attrs("o", "p", Mode::Car, slots, false);
        let predicted = predict_mode(&obs, &person, &params, &spec).unwrap();
        // Manual argmax with substituted means.
        let bt = population_mean_ivtt(&params, true);
        let bc = population_mean_cost(params.get(Param::MuCost), params.get(Param::SigmaCost));
        let v_car =
            systematic_utility(&obs, &person, &params, bt, bc, &spec, Mode::Car).unwrap();
        let v_bus =
            systematic_utility(&obs, &person, &params, bt, bc, &spec, Mode::Bus).unwrap();
        let manual = if v_car >= v_bus { Mode::Car } else { Mode::Bus };
        assert_eq!(predicted, manual);
    }
}
