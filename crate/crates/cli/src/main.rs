use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use prismdg_cli::bench::{layout_bench, scaling_bench};
use prismdg_cli::checks::{checks_csv, run_suite, SUITES};
use prismdg_cli::run::run;
use prismdg_cli::{output_dir, CliError, RunConfig};
use prismdg_core::scenario::ScenarioKind;

#[derive(Parser)]
#[command(name = "prismdg", version, about = "Layered-prismatic DG coastal ocean model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `ranks` from the config.
        #[arg(long)]
        ranks: Option<usize>,
    },
    /// Run a verification suite (oracles, conservation, consistency,
    /// convergence, partition, layout) or `all`.
    Verify { suite: String },
    /// Measure layouts or rank scaling.
    Bench {
        kind: BenchKind,
        /// Columns for the layout bench.
        #[arg(long, default_value_t = 1000)]
        columns: usize,
        /// Layers per column for the layout bench.
        #[arg(long, default_value_t = 32)]
        layers: usize,
        /// Rank counts for the scaling bench.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1, 2, 4])]
        ranks: Vec<usize>,
        /// Basin cells per side for the scaling bench.
        #[arg(long, default_value_t = 16)]
        nx: usize,
        /// Internal steps per rank count.
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchKind {
    Layout,
    Scaling,
}

fn write_out(dir: &PathBuf, name: &str, text: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io { path: dir.clone(), source: e })?;
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
    Ok(path)
}

fn main_inner(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config, ranks } => {
            let text = std::fs::read_to_string(&config).map_err(|e| CliError::Io { path: config.clone(), source: e })?;
            let mut cfg = RunConfig::parse(&text)?;
            if let Some(p) = ranks {
                cfg.ranks = p;
            }
            let dir = output_dir(cfg.output_dir.clone());
            let out = run(&cfg, &dir)?;
            let d = out.final_diagnostics;
            println!(
                "{}: {} steps of {:.4} s on {} rank(s); volume {:.6e}, energy {:.6e}, eta in [{:.3e}, {:.3e}]; outputs in {}",
                cfg.scenario.name(),
                out.steps,
                out.dt,
                cfg.ranks,
                d.volume,
                d.energy,
                d.eta_min,
                d.eta_max,
                dir.display()
            );
            Ok(true)
        }
        Command::Verify { suite } => {
            let names: Vec<&str> = if suite == "all" { SUITES.iter().map(|(s, _)| *s).collect() } else { vec![suite.as_str()] };
            let mut csv = String::new();
            let mut all_ok = true;
            for name in names {
                let checks = run_suite(name).ok_or_else(|| {
                    CliError::Usage(format!("unknown suite `{name}`; expected one of {} or all", SUITES.map(|(s, _)| s).join(", ")))
                })?;
                for c in &checks {
                    println!("{}", c.line());
                    all_ok &= c.passed;
                }
                let part = checks_csv(name, &checks);
                csv.push_str(if csv.is_empty() { &part } else { part.split_once('\n').map_or("", |(_, rest)| rest) });
            }
            let path = write_out(&output_dir(PathBuf::from("prismdg-out")), &format!("verify_{suite}.csv"), &csv)?;
            println!("report: {}", path.display());
            Ok(all_ok)
        }
        Command::Bench { kind, columns, layers, ranks, nx, steps } => {
            let dir = output_dir(PathBuf::from("prismdg-out"));
            match kind {
                BenchKind::Layout => {
                    let csv = layout_bench(columns, layers, &[2, 8, 128], 5)?;
                    print!("{csv}");
                    write_out(&dir, "bench_layout.csv", &csv)?;
                }
                BenchKind::Scaling => {
                    let kind = ScenarioKind::LockExchange;
                    let basin = prismdg_core::scenario::BasinConfig { nx, ny: nx, lx: 1000.0 * nx as f64, ly: 1000.0 * nx as f64, ..kind.default_basin() };
                    let (csv, fit) = scaling_bench(kind, &basin, &ranks, steps)?;
                    print!("{csv}");
                    if let Some(f) = fit {
                        println!("fit: T(P) = {:.6} + {:.6} / P s, R^2 = {:.4}", f.a, f.b, f.r2);
                    }
                    write_out(&dir, "bench_scaling.csv", &csv)?;
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
