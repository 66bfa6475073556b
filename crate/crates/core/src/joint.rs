//! Pooling revealed- and stated-preference data for joint estimation.
//!
//! RP and SP observations share taste parameters; SP systematic utilities
//! are multiplied by the SP scale at evaluation time. The balanced-subsample
//! protocol keeps only RP trips that triggered an SP scenario, bringing the
//! RP:SP ratio to roughly one.

use std::collections::HashMap;

use crate::choice_data::{Dataset, PersonProfile, Source};
use crate::error::{CoreError, Result};

/// Summary of a pooling operation.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolReport {
    pub n_rp: usize,
    pub n_sp: usize,
    /// RP:SP observation ratio; infinite when there is no SP data.
    pub rp_sp_ratio: f64,
    /// False when the SP side is empty, leaving the SP scale unidentified.
    pub mu_sp_identified: bool,
}

/// Merge an RP dataset and an SP dataset over a shared person-id space.
///
/// Persons may appear in either or both inputs; profiles for persons present
/// in both must agree. Source tags are preserved, so per-person occasion
/// counts are `T_rp + T_sp` and SP rows pick up the scale at evaluation time.
pub fn pool_rp_sp(rp: &Dataset, sp: &Dataset) -> Result<(Dataset, PoolReport)> {
    let mut persons: Vec<PersonProfile> = rp.persons().to_vec();
    let mut seen: HashMap<String, usize> =
        persons.iter().enumerate().map(|(i, p)| (p.person_id.clone(), i)).collect();
    for p in sp.persons() {
        match seen.get(&p.person_id) {
            Some(&i) => {
                if persons[i] != *p {
                    return Err(CoreError::ParamNameMismatch(format!(
                        "person '{}' has conflicting profiles in the RP and SP inputs",
                        p.person_id
                    )));
                }
            }
            None => {
                seen.insert(p.person_id.clone(), persons.len());
                persons.push(p.clone());
            }
        }
    }
    let mut observations = rp.observations().to_vec();
    observations.extend(sp.observations().iter().cloned());
    let n_rp = rp.n_observations();
    let n_sp = sp.n_observations();
    let pooled = Dataset::new(persons, observations)?;
    let report = PoolReport {
        n_rp,
        n_sp,
        rp_sp_ratio: if n_sp == 0 { f64::INFINITY } else { n_rp as f64 / n_sp as f64 },
        mu_sp_identified: n_sp > 0,
    };
    Ok((pooled, report))
}

/// Keep all SP observations and only the RP observations that triggered an
/// SP scenario.
pub fn balanced_subsample(joint: &Dataset) -> Result<Dataset> {
    let any_linked =
        joint.observations().iter().any(|o| o.source == Source::Rp && o.sp_trigger);
    if !any_linked {
        return Err(CoreError::NoLinkedRp);
    }
    joint.filter_observations(|o| o.source == Source::Sp || o.sp_trigger)
}
