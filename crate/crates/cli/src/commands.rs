//! Subcommand implementations.

use std::path::{Path, PathBuf};

use anyhow::Context;

use modechoice_core::analysis::{vot_mnl, vot_ratio_mxl};
use modechoice_core::choice_data::{load_dataset, write_observations, write_persons_with_dims};
use modechoice_core::estimate::{fit, FitOptions, Tolerances};
use modechoice_core::model_spec::{ModelKind, ModelSpec, Param, ParameterVector};
use modechoice_core::presets;
use modechoice_core::report::{
    gradient_series_csv, render_fit_comparison, render_parameter_table, render_sweep_table,
    render_vot_table, CvFile, ResultFile, VotRow,
};
use modechoice_core::scenario::{
    integration_gradient, sweep_access, sweep_fare, RepresentativeTrip,
    DEFAULT_INTEGRATION_LEVELS,
};
use modechoice_core::synth::{
    generate_population, recovery_report, simulate_choices, CovariateMarginals, SimOptions,
};
use modechoice_core::validation::cross_validate;
use modechoice_pipeline::providers::{SyntheticRouting, SyntheticWeather};
use modechoice_pipeline::run::{run_pipeline_files, PipelineConfig};

use crate::config::{config_hash, resolve_spec, Config};

/// Common state resolved before any command runs.
pub struct RunContext {
    pub config: Config,
    pub config_bytes: Vec<u8>,
    pub out_dir: PathBuf,
    pub command: String,
}

impl RunContext {
    pub fn prepare(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.out_dir)
            .with_context(|| format!("cannot create output dir '{}'", self.out_dir.display()))?;
        Ok(())
    }

    /// Write the reproducibility manifest: config hash, the resolved config
    /// itself, seeds, versions, and the command line.
    pub fn write_manifest(&self, extra_seeds: &[(&str, u64)]) -> anyhow::Result<()> {
        let mut seeds = String::new();
        for (name, value) in extra_seeds {
            seeds.push_str(&format!("{name} = {value}\n"));
        }
        let manifest = format!(
            "command = {:?}\nconfig_hash = \"{:016x}\"\ncrate_version = {:?}\n\n[seeds]\n{}\n[config]\n{}",
            self.command,
            config_hash(&self.config_bytes),
            env!("CARGO_PKG_VERSION"),
            seeds,
            indent_toml(&toml::to_string(&self.config)?),
        );
        std::fs::write(self.out_dir.join("manifest.toml"), manifest)?;
        Ok(())
    }
}

fn indent_toml(body: &str) -> String {
    // Nest the resolved config under [config] by prefixing table headers.
    body.lines()
        .map(|line| {
            if line.starts_with('[') {
                format!("[config.{}", &line[1..])
            } else {
                line.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn fit_options(config: &Config) -> FitOptions {
    FitOptions {
        tolerances: Tolerances {
            max_iterations: config.estimation.max_iterations,
            ..Tolerances::default()
        },
        seed: config.estimation.seed,
        draws: config.estimation.draws,
        trip_cap: config.estimation.trip_cap,
        start: None,
        fd_gradient: false,
        compute_inference: true,
    }
}

fn load_config_dataset(config: &Config) -> anyhow::Result<modechoice_core::choice_data::Dataset> {
    let observations = config.data.observations.as_ref().expect("validated");
    let persons = config.data.persons.as_ref().expect("validated");
    Ok(load_dataset(observations, persons)?)
}

fn spec_from_config(config: &Config) -> anyhow::Result<ModelSpec> {
    resolve_spec(config.model.spec.as_ref().expect("validated"))
}

pub fn estimate(ctx: &RunContext) -> anyhow::Result<()> {
    let dataset = load_config_dataset(&ctx.config)?;
    let spec = spec_from_config(&ctx.config)?;
    let options = fit_options(&ctx.config);
    let result = fit(&dataset, &spec, &options)?;
    let file = ResultFile::from_result(&result);
    std::fs::write(ctx.out_dir.join("result.toml"), file.to_toml_string()?)?;
    let table = render_parameter_table(&file);
    std::fs::write(ctx.out_dir.join("result.txt"), &table)?;
    println!("{table}");
    ctx.write_manifest(&[("estimation", ctx.config.estimation.seed)])?;
    Ok(())
}

pub fn cv(ctx: &RunContext) -> anyhow::Result<()> {
    let dataset = load_config_dataset(&ctx.config)?;
    let spec = spec_from_config(&ctx.config)?;
    let options = fit_options(&ctx.config);
    let report = cross_validate(&dataset, &spec, ctx.config.cv.k, ctx.config.cv.seed, &options)?;
    let file = CvFile::from_report(spec.kind.id(), &report);
    std::fs::write(ctx.out_dir.join("cv.toml"), file.to_toml_string()?)?;
    println!(
        "{}-fold CV, model {}: accuracy {:.1}% +/- {:.1}% over {} finished folds",
        report.k,
        spec.kind.id().to_uppercase(),
        100.0 * report.mean_accuracy,
        100.0 * report.sd_accuracy,
        report.fold_accuracy.iter().flatten().count(),
    );
    for (fold, accuracy) in report.fold_accuracy.iter().enumerate() {
        match accuracy {
            Some(a) => println!("  fold {fold}: {:.2}%", 100.0 * a),
            None => println!("  fold {fold}: estimation failed"),
        }
    }
    for (fold, message) in &report.failures {
        eprintln!("fold {fold} failed: {message}");
    }
    ctx.write_manifest(&[("cv", ctx.config.cv.seed), ("estimation", ctx.config.estimation.seed)])?;
    Ok(())
}

fn scenario_params(config: &Config) -> anyhow::Result<ParameterVector> {
    match &config.scenario.params_from {
        None => Ok(presets::m3_estimates()),
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let file = ResultFile::from_toml_str(&text)?;
            let mut params = ParameterVector::new();
            for est in &file.estimates {
                let param = Param::from_name(&est.name)
                    .ok_or_else(|| anyhow::anyhow!("unknown parameter '{}' in result", est.name))?;
                params.set(param, est.estimate);
            }
            Ok(params)
        }
    }
}

pub fn scenario(ctx: &RunContext) -> anyhow::Result<()> {
    let trip = match &ctx.config.scenario.profile {
        None => RepresentativeTrip::calibrated(),
        Some(path) => RepresentativeTrip::from_toml_str(&std::fs::read_to_string(path)?)?,
    };
    let params = scenario_params(&ctx.config)?;
    let spec = ModelSpec::for_kind(ModelKind::MnlRpSp);

    let fare = sweep_fare(
        &trip,
        &params,
        &spec,
        &ctx.config.scenario.fare_grid,
        &DEFAULT_INTEGRATION_LEVELS,
    )?;
    let access = sweep_access(
        &trip,
        &params,
        &spec,
        &ctx.config.scenario.access_grid,
        &DEFAULT_INTEGRATION_LEVELS,
    )?;
    let gradient =
        integration_gradient(&trip, &params, &spec, -1.0, 1.0, ctx.config.scenario.gradient_steps)?;

    let fare_text = render_sweep_table(&fare, "Fare (CAD)");
    let access_text = render_sweep_table(&access, "Access (min)");
    println!("Transit probability under fare reduction (%)\n{fare_text}");
    println!("Transit probability under access time reduction (%)\n{access_text}");
    std::fs::write(ctx.out_dir.join("fare_sweep.txt"), &fare_text)?;
    std::fs::write(ctx.out_dir.join("access_sweep.txt"), &access_text)?;
    std::fs::write(ctx.out_dir.join("gradient_series.csv"), gradient_series_csv(&gradient))?;

    let drop = gradient.first().zip(gradient.last()).map(|(a, b)| a.transit_percent - b.transit_percent);
    if let Some(pp) = drop {
        println!(
            "Integration gradient: transit probability falls {pp:.1} pp across a 2-SD swing"
        );
    }
    ctx.write_manifest(&[])?;
    Ok(())
}

pub fn synth(ctx: &RunContext) -> anyhow::Result<()> {
    let config = &ctx.config.synth;
    let kind = ModelKind::from_id(&config.truth).expect("validated");
    let spec = ModelSpec::for_kind(kind);
    let truth = match kind {
        ModelKind::MnlRp => presets::m1_estimates(),
        ModelKind::MxlRp => presets::m2_estimates(),
        ModelKind::MnlRpSp => presets::m3_estimates(),
        ModelKind::MxlRpSp => presets::m4_estimates(),
    };
    let persons = generate_population(config.n_persons, &CovariateMarginals::default(), config.seed);
    let options = SimOptions {
        n_obs_per_person: config.n_obs_per_person,
        n_sp_per_person: config.n_sp_per_person,
        noise: true,
    };
    let dataset = simulate_choices(&persons, &truth, &spec, &options, config.seed ^ 0x51f7)?;
    write_observations(ctx.out_dir.join("observations.csv"), dataset.observations())?;
    write_persons_with_dims(ctx.out_dir.join("persons.csv"), dataset.persons(), None)?;

    // Truth file for downstream recovery checks.
    let mut truth_text = String::from("# generating parameters\n");
    for p in spec.params() {
        truth_text.push_str(&format!("{} = {}\n", p.name(), truth.get(p)));
    }
    std::fs::write(ctx.out_dir.join("truth.toml"), truth_text)?;
    println!(
        "synthetic dataset: {} persons, {} observations ({} model)",
        dataset.n_persons(),
        dataset.n_observations(),
        kind.id().to_uppercase()
    );

    if config.recover {
        let options = fit_options(&ctx.config);
        let result = fit(&dataset, &spec, &options)?;
        let file = ResultFile::from_result(&result);
        std::fs::write(ctx.out_dir.join("result.toml"), file.to_toml_string()?)?;
        let report = recovery_report(&truth, &result)?;
        let mut text = format!(
            "{:<24} {:>10} {:>10} {:>10} {:>8}  flag\n",
            "parameter", "truth", "estimate", "bias", "|z|"
        );
        for row in &report.rows {
            text.push_str(&format!(
                "{:<24} {:>10.4} {:>10.4} {:>10.4} {:>8.2}  {}\n",
                row.name,
                row.truth,
                row.estimate,
                row.bias,
                row.z,
                if row.flagged { "FLAG" } else { "" }
            ));
        }
        std::fs::write(ctx.out_dir.join("recovery.txt"), &text)?;
        println!("{text}");
        println!(
            "recovery: {} of {} parameters within 3 robust SE",
            report.rows.len() - report.n_flagged(),
            report.rows.len()
        );
    }
    ctx.write_manifest(&[("synth", config.seed)])?;
    Ok(())
}

pub fn pipeline(ctx: &RunContext) -> anyhow::Result<()> {
    let section = &ctx.config.pipeline;
    let routing = SyntheticRouting::new(section.routing_seed);
    let weather = SyntheticWeather::new(section.weather_seed);
    let mut pipeline_config = PipelineConfig::default();
    if let Some(path) = &section.wmo_table {
        pipeline_config.wmo_table_toml = Some(std::fs::read_to_string(path)?);
    }
    if let Some(path) = &section.routing_cache {
        pipeline_config.routing_cache_csv = Some(std::fs::read_to_string(path)?);
    }
    if let Some(path) = &section.weather_cache {
        pipeline_config.weather_cache_csv = Some(std::fs::read_to_string(path)?);
    }
    let observations_out = ctx.out_dir.join("observations.csv");
    let persons_out = ctx.out_dir.join("persons.csv");
    let report = run_pipeline_files(
        section.gps_events.as_ref().expect("validated"),
        section.survey.as_ref().expect("validated"),
        &observations_out,
        &persons_out,
        &routing,
        &weather,
        &pipeline_config,
    )?;
    println!(
        "pipeline: {} trips detected, {} observations written, {} persons kept",
        report.trips_detected, report.observations_out, report.persons_out
    );
    println!(
        "  absorbed transfer walks {}, skipped trips {}, SP-eligible {}, routing clusters {}",
        report.absorbed_walks, report.skipped_trips, report.sp_eligible, report.routing_clusters
    );
    let mut screen_text = String::from("person,impossible_speed,zero_variance,kept,rejected\n");
    for (pid, person) in &report.screening.per_person {
        screen_text.push_str(&format!(
            "{pid},{},{},{},{}\n",
            person.impossible_speed,
            person.zero_variance,
            person.kept,
            if person.rejected_entirely { 1 } else { 0 }
        ));
    }
    std::fs::write(ctx.out_dir.join("screening.csv"), screen_text)?;
    ctx.write_manifest(&[
        ("routing", section.routing_seed),
        ("weather", section.weather_seed),
    ])?;
    Ok(())
}

/// Render tables from previously written result files.
pub fn report(ctx: &RunContext, result_paths: &[PathBuf]) -> anyhow::Result<()> {
    let mut results = Vec::new();
    for path in result_paths {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read result '{}'", path.display()))?;
        results.push(ResultFile::from_toml_str(&text)?);
    }

    for file in &results {
        println!("{}", render_parameter_table(file));
    }
    let comparison = render_fit_comparison(&results);
    println!("Model fit comparison\n{comparison}");
    std::fs::write(ctx.out_dir.join("fit_comparison.txt"), &comparison)?;

    let mut vot_rows = Vec::new();
    for file in &results {
        let get = |name: &str| {
            file.estimates.iter().find(|e| e.name == name).map(|e| e.estimate)
        };
        let is_mixed = get("mu_ivtt").is_some();
        if is_mixed {
            if let (Some(mu), Some(delta)) = (get("mu_ivtt"), get("delta_migrant_ivtt")) {
                vot_rows.push(VotRow {
                    model: file.description.clone(),
                    population: "Ratio (immigrant/nonimmigrant)".to_string(),
                    vot_ivtt: None,
                    vot_walk: None,
                    ratio: vot_ratio_mxl(mu, delta).ok(),
                });
            }
        } else if let (Some(bt), Some(ba), Some(bc)) =
            (get("b_ivtt"), get("b_walk_access"), get("b_cost"))
        {
            if let Ok((ivtt, walk)) = vot_mnl(bt, ba, bc) {
                vot_rows.push(VotRow {
                    model: file.description.clone(),
                    population: "All".to_string(),
                    vot_ivtt: Some(ivtt),
                    vot_walk: Some(walk),
                    ratio: None,
                });
            }
        }
    }
    let vot_table = render_vot_table(&vot_rows);
    println!("Value of travel time (CAD/hr)\n{vot_table}");
    std::fs::write(ctx.out_dir.join("vot.txt"), &vot_table)?;
    ctx.write_manifest(&[])?;
    Ok(())
}

/// Ensure later estimation paths see the requested worker count.
pub fn configure_workers(workers: Option<usize>) {
    if let Some(n) = workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Write a machine-readable error record and return the exit code.
pub fn emit_error_record(out_dir: Option<&Path>, command: &str, errors: &[String]) -> i32 {
    let record = serde_json::json!({
        "command": command,
        "errors": errors,
    });
    eprintln!("{record}");
    if let Some(dir) = out_dir {
        if std::fs::create_dir_all(dir).is_ok() {
            let _ = std::fs::write(
                dir.join("error.json"),
                serde_json::to_string_pretty(&record).unwrap_or_default(),
            );
        }
    }
    2
}
