//! Mixed logit: draw generation, random-coefficient realization, trip
//! capping, and the panel simulated log-likelihood.
//!
//! Two coefficients are random. In-vehicle time is normal with an
//! immigrant-linked mean shift; cost is negative lognormal so its sign is
//! correct for every draw. The mixing integral is simulated with Halton
//! draws mapped through the inverse normal CDF, and each person's panel
//! product is computed in the log domain with a max-shift across draws.

use rayon::prelude::*;

use crate::choice_data::{Dataset, ChoiceObservation, PersonProfile, Source, Weather};
use crate::error::{CoreError, Result};
use crate::halton::{halton_element, inverse_normal_cdf, PRIME_BASES};
use crate::mnl::{build_designs, free_params, PersonDesign};
use crate::model_spec::{ModelSpec, Param, ParameterVector};
use crate::utility::split_terms;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 step; used to derive independent per-entity seeds.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// How a draw matrix was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DrawGenerator {
    Halton,
    PseudoRandom,
}

/// Standard-normal draws per person, draw, and random dimension, fixed before
/// optimization and immutable afterwards.
#[derive(Debug, Clone)]
pub struct DrawMatrix {
    n_persons: usize,
    n_draws: usize,
    n_dims: usize,
    values: Vec<f64>,
    pub generator: DrawGenerator,
    pub bases: Vec<u64>,
    pub discard: u64,
    pub seed: u64,
}

/// Number of leading Halton points dropped as burn-in by default.
pub const DEFAULT_DISCARD: u64 = 10;

impl DrawMatrix {
    /// Halton draws: one long sequence per dimension (prime bases 2, 3, ...),
    /// the first `discard` points dropped, points partitioned consecutively
    /// across persons, then mapped through the inverse normal CDF.
    ///
    /// The sequence itself is deterministic; `seed` is recorded for run
    /// manifests and ignored by the generator.
    pub fn halton(
        n_persons: usize,
        n_dims: usize,
        n_draws: usize,
        discard: u64,
        seed: u64,
    ) -> Result<DrawMatrix> {
        if n_draws == 0 {
            return Err(CoreError::NoDraws);
        }
        if n_dims > PRIME_BASES.len() {
            return Err(CoreError::TooManyDimensions {
                requested: n_dims,
                available: PRIME_BASES.len(),
            });
        }
        let bases: Vec<u64> = PRIME_BASES[..n_dims].to_vec();
        let mut values = vec![0.0; n_persons * n_draws * n_dims];
        for (dim, &base) in bases.iter().enumerate() {
            for person in 0..n_persons {
                for r in 0..n_draws {
                    let k = discard + (person * n_draws + r) as u64 + 1;
                    let u = halton_element(k, base);
                    values[(person * n_draws + r) * n_dims + dim] = inverse_normal_cdf(u);
                }
            }
        }
        Ok(DrawMatrix {
            n_persons,
            n_draws,
            n_dims,
            values,
            generator: DrawGenerator::Halton,
            bases,
            discard,
            seed,
        })
    }

    /// Seeded pseudo-random standard normals, for simulation-error studies.
    pub fn pseudo_random(
        n_persons: usize,
        n_dims: usize,
        n_draws: usize,
        seed: u64,
    ) -> Result<DrawMatrix> {
        if n_draws == 0 {
            return Err(CoreError::NoDraws);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values = vec![0.0; n_persons * n_draws * n_dims];
        for v in &mut values {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            *v = inverse_normal_cdf(u);
        }
        Ok(DrawMatrix {
            n_persons,
            n_draws,
            n_dims,
            values,
            generator: DrawGenerator::PseudoRandom,
            bases: Vec::new(),
            discard: 0,
            seed,
        })
    }

    pub fn n_persons(&self) -> usize {
        self.n_persons
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    /// Draws of one person: `n_draws` rows of `n_dims` values.
    #[inline]
    pub fn person_draws(&self, person: usize) -> &[f64] {
        let stride = self.n_draws * self.n_dims;
        &self.values[person * stride..(person + 1) * stride]
    }

    #[inline]
    pub fn value(&self, person: usize, draw: usize, dim: usize) -> f64 {
        self.values[(person * self.n_draws + draw) * self.n_dims + dim]
    }

    /// Keep only the listed persons (in the given order); used to reuse a
    /// full-sample matrix on training subsets.
    pub fn restrict(&self, person_indices: &[usize]) -> DrawMatrix {
        let stride = self.n_draws * self.n_dims;
        let mut values = Vec::with_capacity(person_indices.len() * stride);
        for &p in person_indices {
            values.extend_from_slice(self.person_draws(p));
        }
        DrawMatrix {
            n_persons: person_indices.len(),
            n_draws: self.n_draws,
            n_dims: self.n_dims,
            values,
            generator: self.generator,
            bases: self.bases.clone(),
            discard: self.discard,
            seed: self.seed,
        }
    }
}

/// Realize the random coefficients for one person at one draw.
///
/// Time: `(mu + delta*MIG) + sigma*z`. Cost: `-exp(mu + sigma*z)`, negative
/// for every draw and every hyperparameter value.
#[inline]
pub fn realize_random_params(
    z_ivtt: f64,
    z_cost: f64,
    person: &PersonProfile,
    params: &ParameterVector,
) -> (f64, f64) {
    let mig = if person.migrant { 1.0 } else { 0.0 };
    let beta_t = params.get(Param::MuIvtt)
        + params.get(Param::DeltaMigrantIvtt) * mig
        + params.get(Param::SigmaIvtt) * z_ivtt;
    let beta_c = -(params.get(Param::MuCost) + params.get(Param::SigmaCost) * z_cost).exp();
    (beta_t, beta_c)
}

/// Stratified per-person trip cap.
///
/// Strata are (chosen mode, work/study purpose, weather). When a person's RP
/// trips exceed `cap`, each stratum keeps a share proportional to its size
/// (largest-remainder rounding), sampled without replacement under a seeded
/// permutation. SP observations are always retained.
pub fn cap_trips(
    observations: &[ChoiceObservation],
    cap: usize,
    seed: u64,
) -> Vec<ChoiceObservation> {
    assert!(cap >= 1, "trip cap must be at least 1");
    let rp_indices: Vec<usize> = observations
        .iter()
        .enumerate()
        .filter(|(_, o)| o.source == Source::Rp)
        .map(|(i, _)| i)
        .collect();
    if rp_indices.len() <= cap {
        return observations.to_vec();
    }

    type Stratum = (usize, bool, Weather);
    let mut strata: std::collections::BTreeMap<Stratum, Vec<usize>> =
        std::collections::BTreeMap::new();
    for &i in &rp_indices {
        let o = &observations[i];
        strata
            .entry((o.chosen.index(), o.purpose_work_study, o.weather))
            .or_default()
            .push(i);
    }

    let total = rp_indices.len();
    let mut quotas: Vec<(Stratum, usize, f64)> = strata
        .iter()
        .map(|(&key, members)| {
            let exact = cap as f64 * members.len() as f64 / total as f64;
            (key, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = quotas.iter().map(|(_, q, _)| q).sum();
    let mut remainder = cap - assigned;
    // Largest remainder first; ties broken by stratum key order.
    let mut order: Vec<usize> = (0..quotas.len()).collect();
    order.sort_by(|&a, &b| {
        quotas[b].2.partial_cmp(&quotas[a].2).unwrap().then(quotas[a].0.cmp(&quotas[b].0))
    });
    for idx in order {
        if remainder == 0 {
            break;
        }
        quotas[idx].1 += 1;
        remainder -= 1;
    }

    let mut keep: Vec<usize> = Vec::with_capacity(cap);
    for ((key, quota, _), members) in quotas.iter().zip(strata.values()) {
        let mut members = members.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
            seed,
            (key.0 as u64) << 32 | (key.1 as u64) << 16 | key.2 as u64,
        ));
        // Fisher-Yates on the stratum, then take the quota.
        for i in (1..members.len()).rev() {
            let j = rng.gen_range(0..=i);
            members.swap(i, j);
        }
        keep.extend_from_slice(&members[..(*quota).min(members.len())]);
    }
    keep.extend(
        observations
            .iter()
            .enumerate()
            .filter(|(_, o)| o.source == Source::Sp)
            .map(|(i, _)| i),
    );
    keep.sort_unstable();
    keep.into_iter().map(|i| observations[i].clone()).collect()
}

/// Apply [`cap_trips`] to every person of a dataset, deriving one sub-seed
/// per person.
pub fn cap_dataset(dataset: &Dataset, cap: usize, seed: u64) -> Result<Dataset> {
    let mut observations = Vec::new();
    for i in 0..dataset.n_persons() {
        let capped = cap_trips(dataset.person_observations(i), cap, derive_seed(seed, i as u64));
        observations.extend(capped);
    }
    Dataset::new(dataset.persons().to_vec(), observations)
}

/// Panel simulated log-likelihood of the dataset.
pub fn panel_simulated_loglikelihood(
    dataset: &Dataset,
    params: &ParameterVector,
    draws: &DrawMatrix,
    spec: &ModelSpec,
) -> Result<f64> {
    spec.validate_params(params)?;
    let designs = build_designs(dataset, spec)?;
    let free = free_params(spec, params);
    let (sll, _, _) = sll_grad_scores(&designs, params, draws, spec, &free, false)?;
    Ok(sll)
}

/// Simulated log-likelihood with its analytic gradient and per-person scores.
pub fn sll_with_scores(
    dataset: &Dataset,
    params: &ParameterVector,
    draws: &DrawMatrix,
    spec: &ModelSpec,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    spec.validate_params(params)?;
    let designs = build_designs(dataset, spec)?;
    let free = free_params(spec, params);
    sll_grad_scores(&designs, params, draws, spec, &free, true)
}

struct PersonSll {
    log_p: f64,
    score: Vec<f64>,
    underflow: bool,
}

/// Core simulated-likelihood loop.
///
/// For each person and draw, the per-draw panel log-probability is the sum of
/// per-occasion log MNL probabilities at the realized coefficients; draws are
/// combined with a max-shift before averaging. The analytic score weights
/// per-draw score vectors by the normalized draw likelihoods and chains the
/// cost/time attribute rows into the five hyperparameters.
pub(crate) fn sll_grad_scores(
    designs: &[PersonDesign],
    params: &ParameterVector,
    draws: &DrawMatrix,
    _spec: &ModelSpec,
    free: &[Param],
    want_grad: bool,
) -> Result<(f64, Vec<f64>, Vec<Vec<f64>>)> {
    let persons: Vec<&PersonDesign> = designs.iter().collect();
    if draws.n_persons() < persons.len() {
        return Err(CoreError::LengthMismatch {
            what: "draw matrix persons vs dataset persons",
            left: draws.n_persons(),
            right: persons.len(),
        });
    }
    if draws.n_dims() < 2 {
        return Err(CoreError::TooManyDimensions { requested: 2, available: draws.n_dims() });
    }
    let k = free.len();
    let mut pos_of = [usize::MAX; Param::COUNT];
    for (j, &p) in free.iter().enumerate() {
        pos_of[p.index()] = j;
    }
    let mu_sp = params.get(Param::MuSp);

    let results: Vec<PersonSll> = persons
        .par_iter()
        .map(|design| person_sll(design, params, draws, &pos_of, k, mu_sp, want_grad))
        .collect();

    let mut sll = 0.0;
    let mut grad = vec![0.0; k];
    let mut scores = Vec::with_capacity(if want_grad { results.len() } else { 0 });
    for (design, r) in designs.iter().zip(results) {
        if r.underflow {
            return Err(CoreError::SimulatedUnderflow { person_id: design.person_id.clone() });
        }
        sll += r.log_p;
        for (g, s) in grad.iter_mut().zip(&r.score) {
            *g += s;
        }
        if want_grad {
            scores.push(r.score);
        }
    }
    Ok((sll, grad, scores))
}

#[allow(clippy::too_many_arguments)]
fn person_sll(
    design: &PersonDesign,
    params: &ParameterVector,
    draws: &DrawMatrix,
    pos_of: &[usize; Param::COUNT],
    k: usize,
    mu_sp: f64,
    want_grad: bool,
) -> PersonSll {
    let n_draws = draws.n_draws();
    let person_z = draws.person_draws(design.person_index);
    let n_dims = draws.n_dims();
    let migrant = design.migrant;

    // Per-obs, per-alt static pieces for the current fixed parameters:
    // (fixed part, time attribute, cost attribute, SP scale).
    let mut fixed_parts: Vec<Vec<(f64, f64, f64)>> = Vec::with_capacity(design.obs.len());
    let mut scales: Vec<f64> = Vec::with_capacity(design.obs.len());
    for od in &design.obs {
        let mut per_alt = Vec::with_capacity(od.terms.len());
        for terms in &od.terms {
            per_alt.push(split_terms(terms, params));
        }
        fixed_parts.push(per_alt);
        scales.push(match od.source {
            Source::Rp => 1.0,
            Source::Sp => mu_sp,
        });
    }

    let mut log_s = vec![0.0; n_draws];
    // Per-draw score vectors, only materialized when the gradient is wanted.
    let mut draw_scores = if want_grad { vec![0.0; n_draws * k] } else { Vec::new() };
    let mut utilities: Vec<f64> = Vec::new();
    let mut exps: Vec<f64> = Vec::new();

    let pos_mu_t = pos_of[Param::MuIvtt.index()];
    let pos_sig_t = pos_of[Param::SigmaIvtt.index()];
    let pos_delta = pos_of[Param::DeltaMigrantIvtt.index()];
    let pos_mu_c = pos_of[Param::MuCost.index()];
    let pos_sig_c = pos_of[Param::SigmaCost.index()];
    let pos_mu_sp = pos_of[Param::MuSp.index()];

    for r in 0..n_draws {
        let z_t = person_z[r * n_dims];
        let z_c = person_z[r * n_dims + 1];
        let mig = if migrant { 1.0 } else { 0.0 };
        let beta_t = params.get(Param::MuIvtt)
            + params.get(Param::DeltaMigrantIvtt) * mig
            + params.get(Param::SigmaIvtt) * z_t;
        let beta_c = -(params.get(Param::MuCost) + params.get(Param::SigmaCost) * z_c).exp();

        let mut log_prob = 0.0;
        let mut k_time = 0.0;
        let mut k_cost = 0.0;

        for (t, od) in design.obs.iter().enumerate() {
            let scale = scales[t];
            let per_alt = &fixed_parts[t];
            utilities.clear();
            exps.clear();
            let mut max_v = f64::NEG_INFINITY;
            for &(fixed, x_t, x_c) in per_alt {
                let v = scale * (fixed + beta_t * x_t + beta_c * x_c);
                utilities.push(v);
                if v > max_v {
                    max_v = v;
                }
            }
            let mut denom = 0.0;
            for &v in utilities.iter() {
                let e = (v - max_v).exp();
                exps.push(e);
                denom += e;
            }
            let p_chosen = exps[od.chosen_pos] / denom;
            log_prob += p_chosen.ln();

            if want_grad {
                let row = &mut draw_scores[r * k..(r + 1) * k];
                for (j, terms) in od.terms.iter().enumerate() {
                    let weight =
                        if j == od.chosen_pos { 1.0 - exps[j] / denom } else { -exps[j] / denom };
                    if weight == 0.0 {
                        continue;
                    }
                    let (_, x_t, x_c) = per_alt[j];
                    k_time += weight * scale * x_t;
                    k_cost += weight * scale * x_c;
                    for &(param, x) in terms {
                        if matches!(param, Param::Ivtt | Param::Cost) {
                            continue;
                        }
                        let pos = pos_of[param.index()];
                        if pos != usize::MAX {
                            row[pos] += weight * scale * x;
                        }
                    }
                    if od.source == Source::Sp && pos_mu_sp != usize::MAX {
                        let raw_v = utilities[j] / mu_sp;
                        row[pos_mu_sp] += weight * raw_v;
                    }
                }
            }
        }
        log_s[r] = log_prob;
        if want_grad {
            let row = &mut draw_scores[r * k..(r + 1) * k];
            if pos_mu_t != usize::MAX {
                row[pos_mu_t] += k_time;
            }
            if pos_delta != usize::MAX {
                row[pos_delta] += mig * k_time;
            }
            if pos_sig_t != usize::MAX {
                row[pos_sig_t] += z_t * k_time;
            }
            if pos_mu_c != usize::MAX {
                row[pos_mu_c] += beta_c * k_cost;
            }
            if pos_sig_c != usize::MAX {
                row[pos_sig_c] += beta_c * z_c * k_cost;
            }
        }
    }

    // Max-shift across draws, then average.
    let m = log_s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return PersonSll { log_p: f64::NEG_INFINITY, score: vec![0.0; k], underflow: true };
    }
    let mut sum_w = 0.0;
    let mut weights = vec![0.0; n_draws];
    for r in 0..n_draws {
        let w = (log_s[r] - m).exp();
        weights[r] = w;
        sum_w += w;
    }
    if sum_w <= 0.0 || !sum_w.is_finite() {
        return PersonSll { log_p: f64::NEG_INFINITY, score: vec![0.0; k], underflow: true };
    }
    let log_p = m + (sum_w / n_draws as f64).ln();

    let mut score = vec![0.0; k];
    if want_grad {
        for r in 0..n_draws {
            let w = weights[r] / sum_w;
            if w == 0.0 {
                continue;
            }
            let row = &draw_scores[r * k..(r + 1) * k];
            for (s, g) in score.iter_mut().zip(row) {
                *s += w * g;
            }
        }
    }
    PersonSll { log_p, score, underflow: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choice_data::Mode;
    use crate::model_spec::ModelKind;
    use crate::testutil::{fixture_person, simple_obs};

    #[test]
    fn halton_uniforms_before_transform_match_known_prefixes() {
        // Rebuilt here from the radical inverse directly.
        assert_eq!(halton_element(1, 2), 0.5);
        assert_eq!(halton_element(2, 2), 0.25);
        assert_eq!(halton_element(3, 2), 0.75);
        assert_eq!(halton_element(1, 3), 1.0 / 3.0);
        assert_eq!(halton_element(2, 3), 2.0 / 3.0);
        assert_eq!(halton_element(3, 3), 1.0 / 9.0);
        assert_eq!(inverse_normal_cdf(0.5), 0.0);
    }

    #[test]
    fn draw_matrix_is_deterministic_and_partitioned() {
        let a = DrawMatrix::halton(3, 2, 50, DEFAULT_DISCARD, 1).unwrap();
        let b = DrawMatrix::halton(3, 2, 50, DEFAULT_DISCARD, 99).unwrap();
        // Seed is metadata only for Halton generation.
        assert_eq!(a.values, b.values);
        // Person 1's first draw continues the sequence after person 0's last.
        let direct = inverse_normal_cdf(halton_element(DEFAULT_DISCARD + 51, 2));
        assert_eq!(a.value(1, 0, 0), direct);
    }

    #[test]
    fn draw_moments_are_close_to_standard_normal_at_500_draws() {
        let draws = DrawMatrix::halton(4, 2, 500, DEFAULT_DISCARD, 0).unwrap();
        for person in 0..4 {
            for dim in 0..2 {
                let vals: Vec<f64> =
                    (0..500).map(|r| draws.value(person, r, dim)).collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                let var =
                    vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
                assert!(mean.abs() < 0.05, "person {person} dim {dim}: mean {mean}");
                assert!((var - 1.0).abs() < 0.05, "person {person} dim {dim}: var {var}");
            }
        }
    }

    #[test]
    fn zero_draw_count_is_rejected() {
        assert!(matches!(DrawMatrix::halton(1, 2, 0, 0, 0), Err(CoreError::NoDraws)));
    }

    #[test]
    fn realization_reproduces_published_means() {
        let mut params = ParameterVector::new();
        params.set(Param::MuIvtt, -0.848);
        params.set(Param::DeltaMigrantIvtt, 0.556);
        params.set(Param::MuCost, -2.130);
        let mut migrant = fixture_person("m");
        migrant.migrant = true;
        let mut born_here = fixture_person("c");
        born_here.migrant = false;

        let (bt, bc) = realize_random_params(0.0, 0.0, &migrant, &params);
        assert!((bt - (-0.292)).abs() < 1e-12);
        assert!((bc - (-(-2.130f64).exp())).abs() < 1e-12);
        assert!((bc + 0.118_8).abs() < 1e-4);
        let (bt, _) = realize_random_params(0.0, 0.0, &born_here, &params);
        assert!((bt + 0.848).abs() < 1e-12);
    }

    #[test]
    fn realized_cost_coefficient_is_always_negative() {
        let mut params = ParameterVector::new();
        params.set(Param::MuCost, 3.0);
        params.set(Param::SigmaCost, 2.5);
        let person = fixture_person("p");
        for z in [-4.0, -1.0, 0.0, 1.0, 4.0] {
            let (_, bc) = realize_random_params(0.0, z, &person, &params);
            assert!(bc < 0.0);
        }
    }

    fn person_obs(n: usize, pid: &str) -> Vec<ChoiceObservation> {
        (0..n)
            .map(|i| {
                simple_obs(&format!("{pid}-{i}"), pid, if i % 3 == 0 { Mode::Bus } else { Mode::Car })
            })
            .collect()
    }

    #[test]
    fn capping_keeps_everything_under_the_cap() {
        let obs = person_obs(120, "a");
        let kept = cap_trips(&obs, 300, 7);
        assert_eq!(kept.len(), 120);
    }

    #[test]
    fn capping_a_single_stratum_keeps_exactly_the_cap() {
        let obs: Vec<ChoiceObservation> =
            (0..600).map(|i| simple_obs(&format!("o{i}"), "a", Mode::Car)).collect();
        let kept = cap_trips(&obs, 300, 7);
        assert_eq!(kept.len(), 300);
        assert!(kept.iter().all(|o| o.chosen == Mode::Car));
    }

    #[test]
    fn capping_allocates_proportionally_across_strata() {
        let mut obs: Vec<ChoiceObservation> =
            (0..400).map(|i| simple_obs(&format!("c{i}"), "a", Mode::Car)).collect();
        obs.extend((0..200).map(|i| simple_obs(&format!("b{i}"), "a", Mode::Bus)));
        let kept = cap_trips(&obs, 300, 11);
        let cars = kept.iter().filter(|o| o.chosen == Mode::Car).count();
        let buses = kept.iter().filter(|o| o.chosen == Mode::Bus).count();
        assert_eq!((cars, buses), (200, 100));
    }

    #[test]
    fn capping_retains_all_sp_observations() {
        use crate::choice_data::AlternativeAttributes;
        use crate::testutil::sp_obs_with_attrs;
        let mut obs: Vec<ChoiceObservation> =
            (0..500).map(|i| simple_obs(&format!("o{i}"), "a", Mode::Car)).collect();
        for i in 0..20 {
            let mut slots: [Option<AlternativeAttributes>; Mode::COUNT] = Default::default();
            slots[Mode::Car.index()] = Some(AlternativeAttributes {
                cost: 8.0,
                ivtt: 20.0,
                walk_access: 0.0,
                distance: 10.0,
                available: true,
            });
            slots[Mode::Bus.index()] = Some(AlternativeAttributes {
                cost: 3.25,
                ivtt: 35.0,
                walk_access: 6.0,
                distance: 9.0,
                available: true,
            });
            obs.push(sp_obs_with_attrs(&format!("s{i}"), "a", Mode::Bus, slots));
        }
        let kept = cap_trips(&obs, 100, 3);
        let sp = kept.iter().filter(|o| o.source == Source::Sp).count();
        let rp = kept.iter().filter(|o| o.source == Source::Rp).count();
        assert_eq!(sp, 20);
        assert_eq!(rp, 100);
    }

    #[test]
    fn capping_is_deterministic_given_seed() {
        let obs = person_obs(500, "a");
        let a = cap_trips(&obs, 100, 42);
        let b = cap_trips(&obs, 100, 42);
        assert_eq!(a, b);
        let c = cap_trips(&obs, 100, 43);
        assert_ne!(a, c);
    }

    fn toy_dataset() -> Dataset {
        let mut persons = Vec::new();
        let mut observations = Vec::new();
        for (i, pid) in ["a", "b", "c"].iter().enumerate() {
            let mut p = fixture_person(pid);
            p.migrant = i == 1;
            persons.push(p);
            observations.extend(person_obs(2, pid));
        }
        Dataset::new(persons, observations).unwrap()
    }

    fn mxl_params() -> ParameterVector {
        ParameterVector::new()
            .with(Param::AscBus, -0.3)
            .with(Param::AscSubway, 1.5)
            .with(Param::AscWalk, 0.9)
            .with(Param::AscBicycle, -1.7)
            .with(Param::MuIvtt, -0.8)
            .with(Param::SigmaIvtt, 0.6)
            .with(Param::DeltaMigrantIvtt, 0.5)
            .with(Param::MuCost, -1.8)
            .with(Param::SigmaCost, 1.2)
            .with(Param::WalkAccess, -0.45)
            .with(Param::DistCar, 0.35)
            .with(Param::DistPt, 0.1)
            .with(Param::DistTrain, 0.28)
            .with(Param::DistActive, -0.6)
            .with(Param::FulltimeSubway, -0.3)
            .with(Param::StudentWalk, 0.55)
            .with(Param::IntegPt, -0.1)
    }

    #[test]
    fn degenerate_sigmas_reduce_to_the_fixed_kernel() {
        use crate::utility::{apply_sp_scale, systematic_utility};
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let mut params = mxl_params();
        params.set(Param::SigmaIvtt, 0.0);
        params.set(Param::SigmaCost, 0.0);
        let draws = DrawMatrix::halton(ds.n_persons(), 2, 25, DEFAULT_DISCARD, 0).unwrap();
        let sll = panel_simulated_loglikelihood(&ds, &params, &draws, &spec).unwrap();

        // Reference: per-observation fixed-coefficient kernel at the
        // realized point-mass coefficients.
        let mut reference = 0.0;
        for i in 0..ds.n_persons() {
            let person = ds.person(i);
            let (bt, bc) = realize_random_params(0.0, 0.0, person, &params);
            for obs in ds.person_observations(i) {
                let modes: Vec<Mode> = obs.available_modes().collect();
                let vs: Vec<f64> = modes
                    .iter()
                    .map(|&m| {
                        apply_sp_scale(
                            systematic_utility(obs, person, &params, bt, bc, &spec, m).unwrap(),
                            obs.source,
                            params.get(Param::MuSp),
                        )
                    })
                    .collect();
                let probs = crate::mnl::choice_probabilities(&vs, &vec![true; vs.len()]).unwrap();
                let chosen_pos = modes.iter().position(|&m| m == obs.chosen).unwrap();
                reference += probs[chosen_pos].ln();
            }
        }
        assert!((sll - reference).abs() < 1e-10, "sll {sll} vs reference {reference}");
    }

    #[test]
    fn single_draw_reduces_to_the_kernel_at_that_draw() {
        use crate::utility::{apply_sp_scale, systematic_utility};
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let params = mxl_params();
        let draws = DrawMatrix::halton(ds.n_persons(), 2, 1, 3, 0).unwrap();
        let sll = panel_simulated_loglikelihood(&ds, &params, &draws, &spec).unwrap();

        let mut reference = 0.0;
        for i in 0..ds.n_persons() {
            let person = ds.person(i);
            let (bt, bc) =
                realize_random_params(draws.value(i, 0, 0), draws.value(i, 0, 1), person, &params);
            for obs in ds.person_observations(i) {
                let modes: Vec<Mode> = obs.available_modes().collect();
                let vs: Vec<f64> = modes
                    .iter()
                    .map(|&m| {
                        apply_sp_scale(
                            systematic_utility(obs, person, &params, bt, bc, &spec, m).unwrap(),
                            obs.source,
                            params.get(Param::MuSp),
                        )
                    })
                    .collect();
                let probs = crate::mnl::choice_probabilities(&vs, &vec![true; vs.len()]).unwrap();
                let chosen_pos = modes.iter().position(|&m| m == obs.chosen).unwrap();
                reference += probs[chosen_pos].ln();
            }
        }
        assert!((sll - reference).abs() < 1e-12);
    }

    #[test]
    fn simulated_likelihood_is_bit_identical_across_evaluations() {
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let params = mxl_params();
        let draws = DrawMatrix::halton(ds.n_persons(), 2, 100, DEFAULT_DISCARD, 0).unwrap();
        let a = panel_simulated_loglikelihood(&ds, &params, &draws, &spec).unwrap();
        let b = panel_simulated_loglikelihood(&ds, &params, &draws, &spec).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn draw_refinement_changes_the_sll_by_less_than_half_a_percent() {
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let params = mxl_params();
        let d500 = DrawMatrix::halton(ds.n_persons(), 2, 500, DEFAULT_DISCARD, 0).unwrap();
        let d2000 = DrawMatrix::halton(ds.n_persons(), 2, 2000, DEFAULT_DISCARD, 0).unwrap();
        let a = panel_simulated_loglikelihood(&ds, &params, &d500, &spec).unwrap();
        let b = panel_simulated_loglikelihood(&ds, &params, &d2000, &spec).unwrap();
        assert!((a - b).abs() < 0.005 * a.abs(), "sll500 {a} vs sll2000 {b}");
    }

    #[test]
    fn migrant_shift_does_not_touch_nonmigrants() {
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let params = mxl_params();
        let mut zeroed = params.clone();
        zeroed.set(Param::DeltaMigrantIvtt, 0.0);
        let draws = DrawMatrix::halton(ds.n_persons(), 2, 50, DEFAULT_DISCARD, 0).unwrap();
        let designs = build_designs(&ds, &spec).unwrap();
        let free = free_params(&spec, &params);
        for (i, design) in designs.iter().enumerate() {
            let with = person_sll(design, &params, &draws, &{
                let mut pos = [usize::MAX; Param::COUNT];
                for (j, &p) in free.iter().enumerate() {
                    pos[p.index()] = j;
                }
                pos
            }, free.len(), 1.0, false);
            let without = person_sll(design, &zeroed, &draws, &{
                let mut pos = [usize::MAX; Param::COUNT];
                for (j, &p) in free.iter().enumerate() {
                    pos[p.index()] = j;
                }
                pos
            }, free.len(), 1.0, false);
            if ds.person(i).migrant {
                assert_ne!(with.log_p, without.log_p);
            } else {
                assert_eq!(with.log_p, without.log_p);
            }
        }
    }

    #[test]
    fn analytic_sll_gradient_matches_finite_differences() {
        let ds = toy_dataset();
        let spec = ModelSpec::for_kind(ModelKind::MxlRp);
        let params = mxl_params();
        let draws = DrawMatrix::halton(ds.n_persons(), 2, 40, DEFAULT_DISCARD, 0).unwrap();
        let (_, grad, _) = sll_with_scores(&ds, &params, &draws, &spec).unwrap();
        let free = free_params(&spec, &params);
        let h = 1e-5;
        for (j, &p) in free.iter().enumerate() {
            let mut plus = params.clone();
            plus.set(p, params.get(p) + h);
            let mut minus = params.clone();
            minus.set(p, params.get(p) - h);
            let lp = panel_simulated_loglikelihood(&ds, &plus, &draws, &spec).unwrap();
            let lm = panel_simulated_loglikelihood(&ds, &minus, &draws, &spec).unwrap();
            let fd = (lp - lm) / (2.0 * h);
            assert!(
                (grad[j] - fd).abs() <= 1e-6 * grad[j].abs().max(1.0),
                "param {p:?}: analytic {} vs fd {fd}",
                grad[j]
            );
        }
    }
}
