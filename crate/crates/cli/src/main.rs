use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bandit_inference::engine::count_steps;
use bandit_inference::inference::{
    calibrate_critical_values, ipw_estimate_steps, mle_estimate, BayesFactorForm, Bounds, Estimate,
};
use bandit_inference::io::{
    self, read_calibration, read_table, read_trial_logs, write_calibration,
};
use bandit_inference::sweep::{run_config, ResolvedTest, RunConfig};
use bandit_inference::{EnvSpec, PolicySpec};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(
    name = "bandit-inference",
    version,
    about = "Simulate and analyse two-arm adaptive experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of a JSON sweep configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `base_seed` from the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `workers` from the config.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the null distribution of the Wald statistic and write critical values.
    Calibrate {
        #[arg(long)]
        p0: f64,
        #[arg(long)]
        n: usize,
        /// Policy spec, e.g. `ts`, `ts:alpha=0.5,beta=0.5`, `eg:eps=0.1`, `ur`.
        #[arg(long)]
        policy: PolicySpec,
        #[arg(long)]
        sims: usize,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate and test every trial in a trial-log CSV.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        calibration: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the tables of a finished run with rounded display columns.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            seed,
            workers,
            out,
        } => run(&config, seed, workers, &out),
        Command::Calibrate {
            p0,
            n,
            policy,
            sims,
            alpha,
            seed,
            out,
        } => calibrate(p0, n, &policy, sims, alpha, seed, &out),
        Command::Analyze {
            log,
            calibration,
            out,
        } => analyze(&log, calibration.as_deref(), &out),
        Command::Report { input, format } => report(&input, format),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(
    config_path: &Path,
    seed: Option<u64>,
    workers: Option<usize>,
    out: &Path,
) -> Result<ExitCode> {
    let mut config = RunConfig::load(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    let workers = workers.or(config.workers).unwrap_or(1);
    if workers == 0 {
        bail!("--workers must be at least 1");
    }
    let config_dir = config_path.parent().unwrap_or(Path::new("."));
    let report = run_config(&config, config_dir, out, workers)?;
    eprintln!(
        "{} of {} cells completed; tables in {}",
        report.summaries.len(),
        config.cells.len(),
        out.display()
    );
    if report.failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    for failure in &report.failures {
        eprintln!("error: {failure}");
    }
    Ok(ExitCode::from(1))
}

fn calibrate(
    p0: f64,
    n: usize,
    policy: &PolicySpec,
    sims: usize,
    alpha: f64,
    seed: u64,
    out: &Path,
) -> Result<ExitCode> {
    let env = EnvSpec::new(p0, p0, n)?;
    let calibration = calibrate_critical_values(&env, policy, sims, alpha, seed)?;
    write_calibration(out, &calibration)?;
    eprintln!(
        "critical values [{:.4}, {:.4}] from {} null trials ({} undefined excluded)",
        calibration.lower, calibration.upper, calibration.n_sims, calibration.undefined_excluded
    );
    Ok(ExitCode::SUCCESS)
}

fn estimate_json(est: &Estimate) -> Value {
    let value = |v: Option<f64>| v.map_or(json!("NA"), Value::from);
    json!({"method": est.method.label(), "p1": value(est.p1_hat), "p2": value(est.p2_hat)})
}

fn analyze(log: &Path, calibration: Option<&Path>, out: &Path) -> Result<ExitCode> {
    let file = fs::File::open(log).with_context(|| format!("opening {}", log.display()))?;
    let trials = read_trial_logs(file).with_context(|| format!("reading {}", log.display()))?;

    let mut tests = vec![
        ResolvedTest::Wald {
            bounds: Bounds::NORMAL_5PCT,
        },
        ResolvedTest::IpwWald {
            bounds: Bounds::NORMAL_5PCT,
        },
        ResolvedTest::Welch { alpha: 0.05 },
    ];
    for cutoff in [0.4, 1.0, 3.0] {
        tests.push(ResolvedTest::BayesFactor {
            cutoff,
            prior_alpha: 1.0,
            prior_beta: 1.0,
            form: BayesFactorForm::default(),
        });
    }
    if let Some(path) = calibration {
        tests.push(ResolvedTest::InducedWald {
            calibration: read_calibration(path)?,
        });
    }

    let mut reports = Vec::with_capacity(trials.len());
    for (sim_id, steps) in &trials {
        let counts = count_steps(steps);
        let mle = mle_estimate(&counts);
        let ipw = ipw_estimate_steps(steps).with_context(|| format!("sim_id {sim_id}"))?;
        let outcomes: Vec<Value> = tests
            .iter()
            .map(|test| {
                let mut outcome = serde_json::to_value(test.apply(&counts, &mle, &ipw))
                    .expect("outcome serializes");
                if outcome["statistic"].is_null() {
                    outcome["statistic"] = json!("NA");
                }
                outcome["params"] = json!(test.params());
                outcome
            })
            .collect();
        reports.push(json!({
            "sim_id": sim_id,
            "n": steps.len(),
            "counts": {"n1": counts.n1, "s1": counts.s1, "n2": counts.n2, "s2": counts.s2},
            "estimates": [estimate_json(&mle), estimate_json(&ipw)],
            "tests": outcomes,
        }));
    }
    let doc = json!({"log": log.display().to_string(), "trials": reports});
    fs::write(out, serde_json::to_string_pretty(&doc)? + "\n")?;
    eprintln!("analyzed {} trial(s) into {}", trials.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

/// `13.4 % (0.5)` style display of a rate and its standard error.
fn display_rate(rate: &str, se: &str) -> Result<String> {
    let rate: f64 = rate.parse().context("reject_rate")?;
    let se: f64 = se.parse().context("se")?;
    Ok(format!("{:.1} % ({:.1})", 100.0 * rate, 100.0 * se))
}

fn report(dir: &Path, format: Format) -> Result<ExitCode> {
    let (mut header, mut rows) = read_table(&dir.join(io::SUMMARY_FILE))
        .with_context(|| format!("reading summary in {}", dir.display()))?;
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("no `{name}` column"))
    };
    let (rate_col, se_col) = (column("reject_rate")?, column("se")?);
    for row in &mut rows {
        let display = display_rate(&row[rate_col], &row[se_col])?;
        row.push(display);
    }
    header.push("display".into());

    match format {
        Format::Csv => {
            let mut writer = csv::Writer::from_writer(std::io::stdout().lock());
            writer.write_record(&header)?;
            for row in &rows {
                writer.write_record(row)?;
            }
            writer.flush()?;
        }
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("summary".into(), table_json(&header, &rows));
            for name in [io::DIAGNOSTICS_FILE, io::ASSIGNMENT_FILE, io::REWARD_FILE] {
                let path = dir.join(name);
                if path.exists() {
                    let (h, r) = read_table(&path)?;
                    doc.insert(name.trim_end_matches(".csv").into(), table_json(&h, &r));
                }
            }
            println!("{}", serde_json::to_string_pretty(&Value::Object(doc))?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn table_json(header: &[String], rows: &[Vec<String>]) -> Value {
    rows.iter()
        .map(|row| {
            header
                .iter()
                .zip(row)
                .map(|(h, v)| (h.clone(), Value::String(v.clone())))
                .collect::<Map<_, _>>()
        })
        .map(Value::Object)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use bandit_inference::metrics::proportion_se;

    #[test]
    fn display_rounds_percentages() {
        assert_eq!(display_rate("0.134", "0.00482").unwrap(), "13.4 % (0.5)");
        assert_eq!(display_rate("0.05", "0.003").unwrap(), "5.0 % (0.3)");
        assert!(display_rate("x", "0.1").is_err());
    }

    #[test]
    fn standard_error_matches_display_convention() {
        // 5000 UR trials at a 5% rate
        let se = proportion_se(0.05, 5000);
        assert_eq!(
            display_rate("0.05", &se.to_string()).unwrap(),
            "5.0 % (0.3)"
        );
    }
}
