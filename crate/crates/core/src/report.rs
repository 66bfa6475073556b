//! Result-file serialization and fixed-width text rendering.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::estimate::{EstimationResult, ParamEstimate};
use crate::model_spec::Param;
use crate::scenario::{GradientPoint, SweepTable};
use crate::validation::CvReport;

/// Structured estimation result document (TOML).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub model: String,
    pub description: String,
    pub n_obs: usize,
    pub n_persons: usize,
    pub n_params: usize,
    pub ll0: f64,
    pub ll_final: f64,
    pub adj_rho2: f64,
    pub aic: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
    #[serde(default)]
    pub warnings: Vec<String>,
    pub estimates: Vec<ParamEstimate>,
}

impl ResultFile {
    pub fn from_result(result: &EstimationResult) -> ResultFile {
        ResultFile {
            model: result.kind.id().to_string(),
            description: result.kind.describe().to_string(),
            n_obs: result.n_obs,
            n_persons: result.n_persons,
            n_params: result.n_params,
            ll0: result.ll0,
            ll_final: result.ll_final,
            adj_rho2: result.adj_rho2,
            aic: result.aic,
            converged: result.converged,
            iterations: result.iterations,
            gradient_norm: result.gradient_norm,
            warnings: result.warnings.clone(),
            estimates: result.estimates.clone(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CoreError::SpecFile(e.to_string()))
    }

    pub fn from_toml_str(text: &str) -> Result<ResultFile> {
        toml::from_str(text).map_err(|e| CoreError::SpecFile(e.to_string()))
    }
}

fn param_label(name: &str) -> String {
    match Param::from_name(name) {
        Some(p) => format!("{} ({})", name, p.label()),
        None => name.to_string(),
    }
}

/// Fixed-width parameter table: name, estimate, robust t.
pub fn render_parameter_table(result: &ResultFile) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Model {} ({})\n",
        result.model.to_uppercase(),
        result.description
    ));
    out.push_str(&format!(
        "{:<42} {:>10} {:>10}\n",
        "Parameter", "Estimate", "Rob. t"
    ));
    out.push_str(&format!("{}\n", "-".repeat(64)));
    for est in &result.estimates {
        let t = if est.frozen {
            "(fixed)".to_string()
        } else if est.robust_t.is_finite() {
            format!("({:.2})", est.robust_t)
        } else {
            "(n/a)".to_string()
        };
        out.push_str(&format!(
            "{:<42} {:>10.3} {:>10}\n",
            param_label(&est.name),
            est.estimate,
            t
        ));
    }
    out.push_str(&format!("{}\n", "-".repeat(64)));
    out.push_str(&format!(
        "LL(0) {:.1}   LL(final) {:.1}   Adj rho2 {:.3}   AIC {:.0}\n",
        result.ll0, result.ll_final, result.adj_rho2, result.aic
    ));
    out.push_str(&format!(
        "Observations {}   Persons {}   Parameters {}   Converged {}\n",
        result.n_obs, result.n_persons, result.n_params, result.converged
    ));
    out
}

/// Model-fit comparison table over several results.
pub fn render_fit_comparison(results: &[ResultFile]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:>8} {:>10} {:>12} {:>10} {:>10}\n",
        "Model", "Params", "Obs", "LL(final)", "Adj rho2", "AIC"
    ));
    out.push_str(&format!("{}\n", "-".repeat(70)));
    for r in results {
        out.push_str(&format!(
            "{:<16} {:>8} {:>10} {:>12.1} {:>10.3} {:>10.0}\n",
            r.description, r.n_params, r.n_obs, r.ll_final, r.adj_rho2, r.aic
        ));
    }
    out
}

/// Value-of-travel-time summary rows.
#[derive(Debug, Clone, Serialize)]
pub struct VotRow {
    pub model: String,
    pub population: String,
    pub vot_ivtt: Option<f64>,
    pub vot_walk: Option<f64>,
    pub ratio: Option<f64>,
}

pub fn render_vot_table(rows: &[VotRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<16} {:<24} {:>12} {:>12} {:>8}\n",
        "Model", "Population", "VOT ivtt", "VOT walk", "Ratio"
    ));
    out.push_str(&format!("{}\n", "-".repeat(76)));
    let fmt = |v: Option<f64>| match v {
        Some(x) => format!("{x:.1}"),
        None => "-".to_string(),
    };
    let fmt_ratio = |v: Option<f64>| match v {
        Some(x) => format!("{x:.2}"),
        None => "-".to_string(),
    };
    for r in rows {
        out.push_str(&format!(
            "{:<16} {:<24} {:>12} {:>12} {:>8}\n",
            r.model,
            r.population,
            fmt(r.vot_ivtt),
            fmt(r.vot_walk),
            fmt_ratio(r.ratio)
        ));
    }
    out
}

/// Scenario sweep table, percentages with one decimal and a gain row.
pub fn render_sweep_table(table: &SweepTable, lever_header: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<18}", lever_header));
    for level in &table.integration_levels {
        let label = if *level < 0.0 {
            format!("{level:+.0} SD")
        } else if *level == 0.0 {
            "Mean".to_string()
        } else {
            format!("{level:+.0} SD")
        };
        out.push_str(&format!(" {label:>10}"));
    }
    out.push('\n');
    out.push_str(&format!("{}\n", "-".repeat(18 + 11 * table.integration_levels.len())));
    for (value, cells) in &table.rows {
        out.push_str(&format!("{value:<18.2}"));
        for cell in cells {
            out.push_str(&format!(" {cell:>10.1}"));
        }
        out.push('\n');
    }
    out.push_str(&format!("{:<18}", "Gain (pp)"));
    for gain in &table.gains_pp {
        out.push_str(&format!(" {gain:>+10.1}"));
    }
    out.push('\n');
    out
}

/// Plot-ready series for the integration gradient: step, mode, probability.
pub fn gradient_series_csv(points: &[GradientPoint]) -> String {
    let mut out = String::from("level_sd,mode,probability_percent\n");
    for p in points {
        for (mode, prob) in &p.probabilities {
            out.push_str(&format!("{:.4},{},{:.4}\n", p.level_sd, mode, prob));
        }
    }
    out
}

/// Cross-validation report document.
#[derive(Debug, Clone, Serialize)]
pub struct CvFile {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub fold_accuracy: Vec<Option<f64>>,
    pub failures: Vec<String>,
    pub fold_estimates: Vec<Vec<ParamEstimate>>,
}

impl CvFile {
    pub fn from_report(model: &str, report: &CvReport) -> CvFile {
        CvFile {
            model: model.to_string(),
            k: report.k,
            seed: report.seed,
            mean_accuracy: report.mean_accuracy,
            sd_accuracy: report.sd_accuracy,
            fold_accuracy: report.fold_accuracy.clone(),
            failures: report.failures.iter().map(|(f, m)| format!("fold {f}: {m}")).collect(),
            fold_estimates: report
                .fold_results
                .iter()
                .flatten()
                .map(|r| r.estimates.clone())
                .collect(),
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CoreError::SpecFile(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result_fixture() -> ResultFile {
        ResultFile {
            model: "m1".to_string(),
            description: "MNL RP".to_string(),
            n_obs: 100,
            n_persons: 10,
            n_params: 2,
            ll0: -138.6,
            ll_final: -100.0,
            adj_rho2: 0.27,
            aic: 204.0,
            converged: true,
            iterations: 12,
            gradient_norm: 1e-6,
            warnings: vec![],
            estimates: vec![
                ParamEstimate {
                    name: "b_cost".to_string(),
                    estimate: -0.766,
                    robust_se: 0.051,
                    robust_t: -15.02,
                    classical_se: 0.05,
                    frozen: false,
                },
                ParamEstimate {
                    name: "b_ivtt".to_string(),
                    estimate: -0.361,
                    robust_se: 0.036,
                    robust_t: -9.94,
                    classical_se: 0.036,
                    frozen: false,
                },
            ],
        }
    }

    #[test]
    fn parameter_table_shows_estimate_and_robust_t() {
        let text = render_parameter_table(&result_fixture());
        assert!(text.contains("b_cost"));
        assert!(text.contains("-0.766"));
        assert!(text.contains("(-15.02)"));
    }

    #[test]
    fn result_file_round_trips_through_toml() {
        let file = result_fixture();
        let text = file.to_toml_string().unwrap();
        let back = ResultFile::from_toml_str(&text).unwrap();
        assert_eq!(back.estimates.len(), 2);
        assert_eq!(back.model, "m1");
        assert!((back.ll_final - file.ll_final).abs() < 1e-12);
    }

    #[test]
    fn empty_estimate_list_still_renders_a_header() {
        let mut file = result_fixture();
        file.estimates.clear();
        let text = render_parameter_table(&file);
        assert!(text.contains("Parameter"));
    }
}
