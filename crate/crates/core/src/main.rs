use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use biocluster::cli::{self, CliError};

#[derive(Parser)]
#[command(
    name = "biocluster",
    version,
    about = "Interest-cluster self-organisation simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its metrics
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep nodes-per-subject and record time to form
    Sweep {
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the elected cluster points against a brute-force oracle
    Verify {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run {
            scenario,
            out,
            seed,
        } => cli::cmd_run(&scenario, &out, seed).map(|r| {
            for (subject, n, time) in r.metrics.formation_rows() {
                let time = time.map_or_else(|| "none".into(), |t| t.to_string());
                println!("{subject}\tn={n}\ttime_to_form={time}");
            }
        }),
        Command::Sweep { spec, out } => cli::cmd_sweep(&spec, &out).map(|r| {
            for (n, m) in &r.medians {
                println!("n={n}\tmedian_time_to_form={m}");
            }
            let (xs, ys): (Vec<f64>, Vec<f64>) =
                r.medians.iter().map(|&(n, m)| (f64::from(n), m)).unzip();
            if xs.len() > 1 {
                println!("spearman={:.4}", cli::spearman(&xs, &ys));
            }
        }),
        Command::Verify { scenario, seed } => cli::cmd_verify(&scenario, seed).map(|r| {
            println!(
                "ok: {} component(s), {} node(s) verified",
                r.components, r.nodes_checked
            );
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Mismatch(report) = &e {
                for m in &report.mismatches {
                    eprintln!(
                        "  subject={} component={} node={} expected={} actual={}",
                        m.subject, m.component, m.node, m.expected, m.actual
                    );
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
