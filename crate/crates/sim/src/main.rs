//! Command-line front end: simulate scenarios, check model assumptions,
//! evaluate the asymptotic covariance, and compare estimators.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cirfe_core::analysis;
use cirfe_core::estimator::WeightSchedule;
use cirfe_sim::compare::compare_estimators;
use cirfe_sim::report;
use cirfe_sim::runner::run_monte_carlo;
use cirfe_sim::scenario::{load_scenario, EstimatorKind, ScenarioConfig};
use cirfe_sim::Error;

/// Exit status signalling failed model checks rather than an I/O or usage
/// error.
const CHECKS_FAILED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "cirfe",
    about = "Distributed interest-set field estimation: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOverrides {
    /// Built-in scenario name (ring10, line10, line30, fivenode,
    /// fivenode_bad) or a JSON config path.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Innovation gain override (applies to every estimator in a compare).
    #[arg(long)]
    gain: Option<f64>,
    /// Consensus gain override.
    #[arg(long)]
    beta0: Option<f64>,
}

impl RunOverrides {
    fn apply(&self, mut config: ScenarioConfig) -> Result<ScenarioConfig, Error> {
        if let Some(t) = self.trials {
            config.trials = t;
        }
        if let Some(h) = self.horizon {
            config.horizon = h;
        }
        if let Some(s) = self.seed {
            config.seed = s;
        }
        if self.gain.is_some() || self.beta0.is_some() {
            let schedule = WeightSchedule::new(
                self.gain.unwrap_or(config.schedule.a()),
                self.beta0.unwrap_or(config.schedule.beta0()),
                config.schedule.delta1(),
            )
            .map_err(Error::Core)?;
            config.schedule = schedule;
        }
        config.validate()?;
        Ok(config)
    }
}

fn parse_estimator(s: &str) -> Result<EstimatorKind, String> {
    s.parse::<EstimatorKind>().map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write errors.csv + report.json.
    Simulate {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Estimator kind: cirfe, classical, cirfe_identity_weight,
        /// cirfe_plugin_covariance.
        #[arg(long, value_parser = parse_estimator)]
        estimator: Option<EstimatorKind>,
        #[arg(long)]
        out: PathBuf,
        /// Run even if the innovation gain is below the sufficient floor.
        #[arg(long)]
        no_gain_check: bool,
    },
    /// Evaluate all model checks and print the report.
    Check {
        #[arg(long)]
        scenario: String,
    },
    /// Print the asymptotic covariance of the scaled error for a gain.
    Covariance {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        gain: f64,
    },
    /// Run the censored estimator and the baseline on common random numbers
    /// and write comparison.csv.
    Compare {
        #[command(flatten)]
        overrides: RunOverrides,
        /// Comma-separated 1-based tracked components (defaults to the
        /// scenario's).
        #[arg(long, value_delimiter = ',')]
        components: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::ModelChecksFailed { .. } | Error::GainBelowFloor { .. } => {
                    ExitCode::from(CHECKS_FAILED)
                }
                _ => ExitCode::FAILURE,
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Simulate {
            overrides,
            estimator,
            out,
            no_gain_check,
        } => {
            let mut config = overrides.apply(load_scenario(&overrides.scenario)?)?;
            if let Some(kind) = estimator {
                config.estimator = kind;
            }
            if no_gain_check {
                config.enforce_gain_floor = false;
            }
            let result = run_monte_carlo(&config)?;
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            report::write_run_outputs(&out, &config, &result)?;
            let last = result.log_points.len() - 1;
            let max_err = result.mean_normalized_errors[last]
                .iter()
                .cloned()
                .fold(0.0f64, f64::max);
            println!(
                "{}: {} trials, horizon {}, max agent error at horizon {:.6} \
                 ({:.2}s); outputs in {}",
                config.name,
                config.trials,
                config.horizon,
                max_err,
                result.wall_time_s,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Check { scenario } => {
            let config = load_scenario(&scenario)?;
            let model = config.resolve_model()?;
            let checks = cirfe_sim::checks::run_checks(&model, &config)?;
            println!("{}", serde_json::to_string_pretty(&checks)?);
            let statuses = [
                ("global observability", checks.global_observability.full_rank),
                ("interest consistency", checks.interest_consistency),
                ("mean connectivity", checks.mean_connectivity.connected),
                (
                    "structural observability",
                    checks.structural.as_ref().map(|s| s.pass).unwrap_or(false),
                ),
                ("subspace ellipticity", checks.subspace_ellipticity.holds),
            ];
            for (name, ok) in statuses {
                eprintln!("{name}: {}", if ok { "pass" } else { "FAIL" });
            }
            if checks.all_pass {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(CHECKS_FAILED))
            }
        }
        Command::Covariance { scenario, gain } => {
            let config = load_scenario(&scenario)?;
            let model = config.resolve_model()?;
            let checks = cirfe_sim::checks::run_checks(&model, &config)?;
            if !checks.required_pass {
                return Err(Error::ModelChecksFailed {
                    reasons: checks.required_failures(),
                });
            }
            let cov = analysis::asymptotic_covariance(&model, gain).map_err(Error::Core)?;
            let n = model.node_count();
            let diag: Vec<f64> = (0..n).map(|i| cov.s_r[(i, i)]).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| cov.s_r[(i, j)]).collect())
                .collect();
            let lambda: Vec<f64> = cov.lambda.iter().copied().collect();
            let out = serde_json::json!({
                "gain": gain,
                "scaled_eigenvalues": lambda,
                "diagonal": diag,
                "s_r": rows,
            });
            println!("{}", serde_json::to_string_pretty(&out)?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare {
            overrides,
            components,
            out,
        } => {
            let mut base = overrides.apply(load_scenario(&overrides.scenario)?)?;
            if let Some(components) = components {
                base.tracked_components = components;
            }
            let cirfe_config = ScenarioConfig {
                estimator: EstimatorKind::Cirfe,
                ..base.clone()
            };
            let classical_config = ScenarioConfig {
                estimator: EstimatorKind::Classical,
                ..base
            };
            let (table, results) = compare_estimators(&[cirfe_config, classical_config])?;
            std::fs::create_dir_all(&out)?;
            let mut file = std::fs::File::create(out.join("comparison.csv"))?;
            report::write_comparison_csv(&mut file, &table)?;
            for result in &results {
                for warning in &result.warnings {
                    eprintln!("warning: {warning}");
                }
            }
            for &component in &table.components {
                let cirfe = table.final_error(component, "cirfe").unwrap_or(f64::NAN);
                let classical = table.final_error(component, "classical").unwrap_or(f64::NAN);
                let classical_d = table
                    .final_error(component, "classical_d")
                    .unwrap_or(f64::NAN);
                println!(
                    "component {component}: cirfe {cirfe:.5}, classical {classical:.5}, \
                     classical_d {classical_d:.5}"
                );
            }
            println!(
                "comparison written to {}",
                out.join("comparison.csv").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}
