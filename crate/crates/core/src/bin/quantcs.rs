use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::json;

use quantcs::error::{Error, Result};
use quantcs::harness::config::{
    load, DesignFileConfig, ExperimentConfig, SeFileConfig, SweepConfig,
};
use quantcs::harness::experiment::{reconstruct, run_design, run_experiment, run_se};
use quantcs::harness::sweep::{emit_rate_sweep, plot_script};

#[derive(Parser)]
#[command(
    name = "quantcs",
    version,
    about = "Quantizer design and relaxed BP for quantized compressed sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize quantizer boundaries over a β grid.
    Design,
    /// State-evolution trace for one quantizer.
    Se,
    /// Reconstruct a single instance.
    Reconstruct,
    /// Multi-trial experiment.
    Experiment,
    /// Rate sweep with CSV and plot script.
    Sweep,
}

fn config_or_default<T: DeserializeOwned + Default>(path: &Option<PathBuf>) -> Result<T> {
    match path {
        Some(p) => load(p),
        None => Ok(T::default()),
    }
}

fn write(dir: &Path, name: &str, contents: &str, written: &mut Vec<String>) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, contents)?;
    written.push(p.display().to_string());
    Ok(())
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {w} workers: {e}")))?;
    }
    fs::create_dir_all(&cli.out)?;
    let mut written = Vec::new();
    match cli.command {
        Command::Design => {
            let mut c: DesignFileConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                c.optimizer.seed = s;
            }
            let r = run_design(&c)?;
            write(
                &cli.out,
                "design.json",
                &(serde_json::to_string_pretty(&r)? + "\n"),
                &mut written,
            )?;
            write(
                &cli.out,
                "boundaries.csv",
                &r.boundaries_csv(),
                &mut written,
            )?;
            write(
                &cli.out,
                "quantizer.json",
                &(serde_json::to_string_pretty(&r.quantizer)? + "\n"),
                &mut written,
            )?;
        }
        Command::Se => {
            let mut c: SeFileConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                c.design.seed = s;
            }
            let tr = run_se(&c)?;
            write(&cli.out, "se_trace.csv", &tr.to_csv(), &mut written)?;
        }
        Command::Reconstruct | Command::Experiment => {
            let mut c: ExperimentConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            if cli.workers.is_some() {
                c.workers = None;
            }
            if matches!(cli.command, Command::Experiment) {
                let r = run_experiment(&c)?;
                write(&cli.out, "report.json", &r.to_json()?, &mut written)?;
            } else {
                let (r, inst) = reconstruct(&c)?;
                write(&cli.out, "reconstruct.json", &r.to_json()?, &mut written)?;
                if let Some(inst) = inst {
                    let mut csv = String::from("index,x,xhat\n");
                    for (i, (x, xh)) in inst.truth.iter().zip(&inst.estimate).enumerate() {
                        csv.push_str(&format!("{i},{x:.12e},{xh:.12e}\n"));
                    }
                    write(&cli.out, "estimate.csv", &csv, &mut written)?;
                }
            }
        }
        Command::Sweep => {
            let mut c: SweepConfig = config_or_default(&cli.config)?;
            if let Some(s) = cli.seed {
                c.seed = s;
            }
            let out = emit_rate_sweep(&c)?;
            write(&cli.out, "rate_sweep.csv", &out.to_csv(), &mut written)?;
            write(
                &cli.out,
                "rate_sweep.json",
                &(serde_json::to_string_pretty(&out)? + "\n"),
                &mut written,
            )?;
            write(
                &cli.out,
                "plot_rate_sweep.py",
                &plot_script("rate_sweep.csv"),
                &mut written,
            )?;
        }
    }
    Ok(written)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": "usage", "message": e.to_string().trim_end()}})
            );
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(written) => {
            println!("{}", json!({"status": "ok", "outputs": written}));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!(
                "{}",
                json!({"error": {"kind": e.kind(), "message": e.to_string()}})
            );
            ExitCode::FAILURE
        }
    }
}
