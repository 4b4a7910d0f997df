use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use lsts::baselines::Algo;
use lsts::graph::{compile, to_dot, to_plain};
use lsts::harness::{
    read_curves, read_trials, run_experiment, summarize, time_to_threshold, welch_t_test, write_all, AlgoSummary,
    ConfigError, ExperimentConfig, TrialRecord,
};
use lsts::spec::parse_spec;

#[derive(Parser)]
#[command(name = "lsts", version, about = "Specification-guided task sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment; flags override the config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',')]
        algo: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Exit with status 3 if any trial ends without converging.
        #[arg(long)]
        require_convergence: bool,
    },
    /// Summarize a finished run and test two algorithms against each other.
    Compare {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        algos: Vec<String>,
        #[arg(long, default_value_t = 0.9)]
        threshold: f64,
    },
    /// Compile a spec and print its task graph.
    Graph {
        #[arg(long)]
        spec: PathBuf,
        /// Also write Graphviz output here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Budget(String),
    Other(String),
}

impl Failure {
    fn other(e: impl std::fmt::Display) -> Self {
        Failure::Other(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error: {e}"))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, algo, seeds, budget, out, require_convergence } => {
            run(&config, &algo, seeds, budget, out, require_convergence)
        }
        Command::Compare { input, algos, threshold } => compare(&input, &algos, threshold),
        Command::Graph { spec, dot } => graph(&spec, dot.as_deref()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
        Err(Failure::Budget(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(3)
        }
        Err(Failure::Other(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(
    config: &Path,
    algo: &[String],
    seeds: Vec<u64>,
    budget: Option<u64>,
    out: Option<PathBuf>,
    require_convergence: bool,
) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(config)?;
    if !algo.is_empty() {
        cfg.algos = algo
            .iter()
            .map(|a| Algo::parse(a).ok_or_else(|| ConfigError::new("--algo", format!("unknown algorithm `{a}`"))))
            .collect::<Result<_, _>>()?;
    }
    if !seeds.is_empty() {
        cfg.seeds = seeds;
    }
    if let Some(b) = budget {
        cfg.budget = b;
    }
    if let Some(o) = out {
        cfg.out = o;
    }
    cfg.check()?;

    let trials = run_experiment(&cfg).map_err(Failure::other)?;
    let records: Vec<TrialRecord> = trials.iter().map(|t| t.record.clone()).collect();
    let runs: Vec<_> = trials.iter().map(|t| (t.record.algo.as_str(), t.record.seed, &t.result)).collect();
    write_all(&cfg.out, &records, &runs).map_err(Failure::other)?;
    print_summary(&summarize(&records));
    println!("wrote {}", cfg.out.display());

    let unconverged: Vec<String> =
        records.iter().filter(|r| !r.converged).map(|r| format!("{}/{}", r.algo, r.seed)).collect();
    if require_convergence && !unconverged.is_empty() {
        return Err(Failure::Budget(format!("budget exhausted without convergence: {}", unconverged.join(" "))));
    }
    Ok(())
}

fn print_summary(rows: &[AlgoSummary]) {
    println!("{:<8} {:>6} {:>9} {:>24} {:>18}", "algo", "trials", "converged", "interactions", "success");
    for s in rows {
        println!(
            "{:<8} {:>6} {:>9} {:>24} {:>18}",
            s.algo,
            s.trials,
            s.converged,
            format!("{:.0} ± {:.0}", s.interactions.0, s.interactions.1),
            format!("{:.3} ± {:.3}", s.success.0, s.success.1),
        );
    }
}

fn compare(input: &Path, algos: &[String], threshold: f64) -> Result<(), Failure> {
    let open = |name: &str| std::fs::File::open(input.join(name)).map_err(|e| Failure::Config(format!("{name}: {e}")));
    let records = read_trials(open("trials.csv")?).map_err(Failure::other)?;
    let curves = read_curves(open("curves.csv")?).map_err(Failure::other)?;
    let chosen: Vec<TrialRecord> = if algos.is_empty() {
        records
    } else {
        for a in algos {
            if !records.iter().any(|r| &r.algo == a) {
                return Err(Failure::Config(format!("no trials for `{a}` in {}", input.display())));
            }
        }
        records.into_iter().filter(|r| algos.contains(&r.algo)).collect()
    };
    if chosen.is_empty() {
        return Err(Failure::Config(format!("no trials in {}", input.display())));
    }
    print_summary(&summarize(&chosen));

    println!("\ninteractions to composed success >= {threshold}:");
    for s in summarize(&chosen) {
        let times: Vec<f64> = chosen
            .iter()
            .filter(|r| r.algo == s.algo)
            .filter_map(|r| time_to_threshold(&curves, &r.algo, r.seed, threshold))
            .map(|t| t as f64)
            .collect();
        if times.is_empty() {
            println!("  {:<8} never reached", s.algo);
        } else {
            let (m, sd) = lsts::harness::mean_sd(&times);
            println!("  {:<8} {:.0} ± {:.0} ({} of {} trials)", s.algo, m, sd, times.len(), s.trials);
        }
    }

    if let [a, b] = algos {
        let xs = |name: &str| -> Vec<f64> {
            chosen.iter().filter(|r| r.algo == name).map(|r| r.total_interactions as f64).collect()
        };
        match welch_t_test(&xs(a), &xs(b)) {
            Ok(w) => println!("\nWelch t-test on interactions, {a} vs {b}: t = {:.3}, df = {:.2}, p = {:.4}", w.t, w.df, w.p),
            Err(e) => println!("\nWelch t-test on interactions, {a} vs {b}: {e}"),
        }
    }
    Ok(())
}

fn graph(spec: &Path, dot: Option<&Path>) -> Result<(), Failure> {
    let text = std::fs::read_to_string(spec).map_err(|e| Failure::Config(format!("{}: {e}", spec.display())))?;
    let ast = parse_spec(&text).map_err(|e| Failure::Config(format!("{}: {e}", spec.display())))?;
    let g = compile(&ast).map_err(Failure::other)?;
    print!("{}", to_plain(&g));
    if let Some(path) = dot {
        std::fs::write(path, to_dot(&g)).map_err(Failure::other)?;
    }
    Ok(())
}
