//! Composite integration index.
//!
//! Four dimension scores (economic, social, civic, health) on a 1-10 scale
//! combine into a single index with fixed weights 0.4 / 0.3 / 0.2 / 0.1.
//! Within a dimension, indicator responses may be aggregated first, weighted
//! by the respondent's own importance ratings.

use crate::error::{CoreError, Result};

/// Fixed dimension weights (economic, social, civic, health). They sum to 1.
pub const DIMENSION_WEIGHTS: [f64; 4] = [0.4, 0.3, 0.2, 0.1];

/// Dimension scores for one respondent, each on the 1-10 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationDimensions {
    pub economic: f64,
    pub social: f64,
    pub civic: f64,
    pub health: f64,
}

impl IntegrationDimensions {
    fn validate(&self) -> Result<()> {
        for (value, what) in [
            (self.economic, "economic dimension"),
            (self.social, "social dimension"),
            (self.civic, "civic dimension"),
            (self.health, "health dimension"),
        ] {
            if !(1.0..=10.0).contains(&value) {
                return Err(CoreError::OutOfRange { what, value, expected: "within [1, 10]" });
            }
        }
        Ok(())
    }
}

/// Aggregate indicator values into a dimension score, weighting each value by
/// the respondent's self-rated importance. Returns `sum(w*v) / sum(w)`.
pub fn dimension_score(indicator_values: &[f64], importance_weights: &[f64]) -> Result<f64> {
    if indicator_values.is_empty() {
        return Err(CoreError::EmptyInput("indicator values"));
    }
    if indicator_values.len() != importance_weights.len() {
        return Err(CoreError::LengthMismatch {
            what: "indicator values vs importance weights",
            left: indicator_values.len(),
            right: importance_weights.len(),
        });
    }
    let mut weighted = 0.0;
    let mut total = 0.0;
    for (&v, &w) in indicator_values.iter().zip(importance_weights) {
        if !(1.0..=10.0).contains(&v) {
            return Err(CoreError::OutOfRange {
                what: "indicator value",
                value: v,
                expected: "within [1, 10]",
            });
        }
        if w < 0.0 || !w.is_finite() {
            return Err(CoreError::OutOfRange {
                what: "importance weight",
                value: w,
                expected: "finite and nonnegative",
            });
        }
        weighted += w * v;
        total += w;
    }
    if total == 0.0 {
        return Err(CoreError::AllZeroWeights);
    }
    Ok(weighted / total)
}

/// Combine the four dimension scores into the composite index.
///
/// Computed as `(4e + 3s + 2c + 1h) / 10` so the convex combination is exact
/// in floating point; the result stays within [1, 10].
pub fn composite_index(dims: &IntegrationDimensions) -> Result<f64> {
    dims.validate()?;
    Ok((4.0 * dims.economic + 3.0 * dims.social + 2.0 * dims.civic + dims.health) / 10.0)
}

/// Composite index when some dimensions are missing: the remaining weights
/// are renormalized proportionally. Returns the index and whether any
/// reweighting happened, so the record can be flagged.
pub fn composite_index_partial(
    economic: Option<f64>,
    social: Option<f64>,
    civic: Option<f64>,
    health: Option<f64>,
) -> Result<(f64, bool)> {
    let scores = [economic, social, civic, health];
    let mut weighted = 0.0;
    let mut total = 0.0;
    let mut missing = 0;
    for (score, weight) in scores.iter().zip(DIMENSION_WEIGHTS) {
        match score {
            Some(v) => {
                if !(1.0..=10.0).contains(v) {
                    return Err(CoreError::OutOfRange {
                        what: "dimension score",
                        value: *v,
                        expected: "within [1, 10]",
                    });
                }
                weighted += weight * v;
                total += weight;
            }
            None => missing += 1,
        }
    }
    if total == 0.0 {
        return Err(CoreError::EmptyInput("all integration dimensions missing"));
    }
    Ok((weighted / total, missing > 0))
}
