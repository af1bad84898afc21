//! `tklab` command-line front end.
//!
//! Exit codes: 0 every claim passed, 1 some claim failed, 2 the scenario lies
//! outside the framework of a requested claim, 3 parse or runtime error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tklab::analysis::{ClaimId, ClaimVerdict};
use tklab::experiments::{monte_carlo, run_scenario, Experiment, ScenarioRun, VerificationReport};
use tklab::io::{
    load_scenario, parse_override, write_plot_svg, write_report_json, write_tcs_csv,
    write_trajectory_csv, CsvTable, RunConfig,
};
use tklab::par::{map_slice, Execution};
use tklab::Error;

#[derive(Parser)]
#[command(
    name = "tklab",
    version,
    about = "Thermodynamic Kuramoto scenarios and claim checks"
)]
struct Cli {
    /// Repeat for more output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    scenario: PathBuf,
    /// Override a scenario field, e.g. `--set model.kappa1=2`.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_kv)]
    overrides: Vec<(String, String)>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a scenario, check its claims and write CSV, JSON and SVG.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Skip the SVG plot.
        #[arg(long)]
        no_plot: bool,
    },
    /// Check a chosen list of claims and print one line per verdict.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', required = true)]
        claims: Vec<ClaimId>,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run one scenario per value of a field.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Dotted field path, e.g. `model.kappa2`.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Write the per-value reports as a JSON array.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Randomized campaign inside the framework of a claim.
    Montecarlo {
        experiment: Experiment,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        sequential: bool,
    },
    /// Plot trajectory CSV columns against time.
    Plot {
        csv: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        channels: Vec<String>,
        /// Log-scale y axis.
        #[arg(long)]
        log: bool,
        /// Defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    parse_override(s).map_err(|e| e.to_string())
}

enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn of(pass: bool) -> Self {
        if pass {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn print_verdict(v: &ClaimVerdict) {
    println!(
        "{:<5} {:<28} measured={:<12.4e} bound={:<12.4e} margin={:.4e}{}",
        if v.pass { "PASS" } else { "FAIL" },
        v.claim_id,
        v.measured,
        v.bound,
        v.margin,
        if v.notes.is_empty() {
            String::new()
        } else {
            format!("  ({})", v.notes)
        }
    );
}

fn print_report(r: &VerificationReport, verbosity: u8) {
    println!("scenario {} [{}]", r.scenario, &r.scenario_hash[..12]);
    r.verdicts.iter().for_each(print_verdict);
    if verbosity > 0 {
        for (k, v) in &r.bounds {
            println!("bound {k} = {v:.6e}");
        }
        for rate in &r.rates {
            match &rate.fitted {
                Some(f) => println!(
                    "rate {} fitted={:.6e} bound={:.6e} r2={:.4}",
                    rate.name, f.rate, rate.bound, f.r_squared
                ),
                None => println!("rate {} not fitted, bound={:.6e}", rate.name, rate.bound),
            }
        }
    }
}

fn write_outputs(run: &ScenarioRun, cfg: &RunConfig) -> tklab::Result<()> {
    let out = &cfg.out_dir;
    write_report_json(&run.report, &out.join("report.json"))?;
    write_report_json(&run.report.verdicts, &out.join("verdicts.json"))?;
    if let Some(t) = &run.tcs_trajectory {
        write_tcs_csv(t, &out.join("trajectory_tcs.csv"))?;
    }
    if let Some(t) = &run.trajectory {
        let csv = out.join("trajectory.csv");
        write_trajectory_csv(t, &csv)?;
        if cfg.plot {
            let table = CsvTable::read(&csv)?;
            let decay = ["phase_diameter", "temp_diameter"].map(String::from);
            write_plot_svg(&table, &decay, true, &out.join("decay.svg"))?;
        }
    }
    Ok(())
}

fn cmd_run(cfg: RunConfig) -> tklab::Result<Outcome> {
    let scenario = load_scenario(&cfg.scenario_path, &cfg.overrides)?;
    let run = run_scenario(&scenario)?;
    write_outputs(&run, &cfg)?;
    print_report(&run.report, cfg.verbosity);
    if cfg.verbosity > 0 {
        println!("wrote {}", cfg.out_dir.display());
    }
    Ok(Outcome::of(run.report.pass))
}

fn cmd_verify(
    args: ScenarioArgs,
    claims: Vec<ClaimId>,
    report: Option<PathBuf>,
    verbosity: u8,
) -> tklab::Result<Outcome> {
    let mut scenario = load_scenario(&args.scenario, &args.overrides)?;
    scenario.claims = claims;
    let run = run_scenario(&scenario)?;
    print_report(&run.report, verbosity);
    if let Some(path) = report {
        write_report_json(&run.report, &path)?;
    }
    Ok(Outcome::of(run.report.pass))
}

fn cmd_sweep(
    args: ScenarioArgs,
    param: &str,
    values: &[String],
    report: Option<PathBuf>,
    exec: Execution,
    verbosity: u8,
) -> tklab::Result<Outcome> {
    let scenarios = values
        .iter()
        .map(|v| {
            let mut o = args.overrides.clone();
            o.push((param.to_string(), v.clone()));
            load_scenario(&args.scenario, &o)
        })
        .collect::<tklab::Result<Vec<_>>>()?;
    let runs = map_slice(&scenarios, exec, |s| run_scenario(s).map(|r| r.report));
    let mut reports = Vec::new();
    let mut worst: Option<Error> = None;
    for (value, run) in values.iter().zip(runs) {
        match run {
            Ok(r) => {
                println!("{param}={value}: {}", if r.pass { "PASS" } else { "FAIL" });
                if verbosity > 0 {
                    r.verdicts.iter().for_each(print_verdict);
                }
                reports.push(r);
            }
            Err(e) => {
                println!("{param}={value}: {e}");
                let replace = match &worst {
                    None => true,
                    Some(w) => exit_code(w) < exit_code(&e),
                };
                if replace {
                    worst = Some(e);
                }
            }
        }
    }
    if let Some(path) = report {
        write_report_json(&reports, &path)?;
    }
    match worst {
        Some(e) => Err(e),
        None => Ok(Outcome::of(reports.iter().all(|r| r.pass))),
    }
}

fn cmd_montecarlo(
    exp: Experiment,
    trials: usize,
    seed: u64,
    report: Option<PathBuf>,
    exec: Execution,
    verbosity: u8,
) -> tklab::Result<Outcome> {
    let r = monte_carlo(exp, trials, seed, exec);
    println!(
        "{exp}: {}/{} trials passed (seed {seed})",
        r.passed, r.n_trials
    );
    for (id, m) in &r.worst_margins {
        println!("worst margin {id:<28} {m:.4e}");
    }
    for t in r.trials.iter().filter(|t| verbosity > 0 || !t.pass) {
        let status = if t.pass { "pass" } else { "FAIL" };
        match &t.error {
            Some(e) => println!(
                "trial {:>4} {status} [{}] {e}",
                t.index,
                &t.scenario_hash[..12]
            ),
            None => println!(
                "trial {:>4} {status} [{}] margin {:.4e}",
                t.index,
                &t.scenario_hash[..12],
                t.worst_margin
            ),
        }
    }
    if let Some(path) = report {
        write_report_json(&r, &path)?;
    }
    Ok(Outcome::of(r.passed == r.n_trials))
}

fn cmd_plot(
    csv: &Path,
    channels: &[String],
    log: bool,
    out: Option<PathBuf>,
) -> tklab::Result<Outcome> {
    let table = CsvTable::read(csv)?;
    let out = out.unwrap_or_else(|| csv.with_extension("svg"));
    write_plot_svg(&table, channels, log, &out)?;
    println!("wrote {}", out.display());
    Ok(Outcome::Pass)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Infeasible(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let v = cli.verbose;
    let result = match cli.command {
        Command::Run {
            scenario,
            out,
            no_plot,
        } => cmd_run(RunConfig {
            scenario_path: scenario.scenario,
            out_dir: out,
            overrides: scenario.overrides,
            plot: !no_plot,
            verbosity: v,
        }),
        Command::Verify {
            scenario,
            claims,
            report,
        } => cmd_verify(scenario, claims, report, v),
        Command::Sweep {
            scenario,
            param,
            values,
            report,
            sequential,
        } => cmd_sweep(scenario, &param, &values, report, execution(sequential), v),
        Command::Montecarlo {
            experiment,
            trials,
            seed,
            report,
            sequential,
        } => cmd_montecarlo(experiment, trials, seed, report, execution(sequential), v),
        Command::Plot {
            csv,
            channels,
            log,
            out,
        } => cmd_plot(&csv, &channels, log, out),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
