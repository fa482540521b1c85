use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use shellvi_core::experiments::{run_batch1, run_batch2, run_batch3, Batch, ExperimentConfig};

#[derive(Parser)]
#[command(name = "shellvi", version, about = "Runs the shell obstacle experiment batches")]
struct Cli {
    #[command(subcommand)]
    batch: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Halve κ on a fixed mesh until the Cauchy error is below the stop tolerance
    Batch1(Flags),
    /// Refine nested meshes with κ = h^q_exp until the Cauchy error is below the stop tolerance
    Batch2(Flags),
    /// Contact area and deformed surfaces for a list of indentation loads
    Batch3(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat key=value file; flags given on the command line take precedence
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mesh_level: Option<usize>,
    #[arg(long)]
    kappa0: Option<f64>,
    #[arg(long)]
    shrink: Option<f64>,
    #[arg(long)]
    stop_tol: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    q_exp: Option<f64>,
    #[arg(long)]
    min_level: Option<usize>,
    #[arg(long)]
    max_level: Option<usize>,
    /// Load indices, comma separated
    #[arg(long, value_delimiter = ',')]
    ell: Option<Vec<u32>>,
    /// Gap at or below which a point counts as in contact
    #[arg(long)]
    contact_tol: Option<f64>,
    #[arg(long)]
    newton_tol: Option<f64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Flags {
    fn resolve(self, batch: Batch) -> shellvi_core::Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::new(batch);
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        macro_rules! apply {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { cfg.$field = v; })*
            };
        }
        apply!(mesh_level, kappa0, shrink, stop_tol, max_steps, q_exp, min_level, max_level, ell, newton_tol, out);
        if let Some(t) = self.contact_tol {
            cfg.contact_tol = Some(t);
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> shellvi_core::Result<()> {
    match cli.batch {
        Command::Batch1(f) => {
            let cfg = f.resolve(Batch::Kappa)?;
            let out = run_batch1(&cfg)?;
            for r in &out.rows {
                println!("kappa {:.6e}  cauchy error {:.6e}  newton {}", r.kappa, r.cauchy_error, r.newton_iters);
            }
            let status = if out.reached_tol { "reached" } else { "not reached" };
            println!("h = {:.6e}, stop tolerance {status}, table in {}", out.h, out.csv.display());
        }
        Command::Batch2(f) => {
            let cfg = f.resolve(Batch::Refinement)?;
            let out = run_batch2(&cfg)?;
            for r in &out.rows {
                println!(
                    "h {:.4e} -> {:.4e}  cauchy error {:.6e}  newton {}",
                    r.h_coarse, r.h_fine, r.cauchy_error, r.newton_iters
                );
            }
            let status = if out.reached_tol { "reached" } else { "not reached" };
            println!("{} refinement iterations, stop tolerance {status}, table in {}", out.iterations, out.csv.display());
        }
        Command::Batch3(f) => {
            let cfg = f.resolve(Batch::Indentation)?;
            let out = run_batch3(&cfg)?;
            for r in &out.rows {
                println!("ell {:>3}  contact area {:.6e}  min gap {:.6e}", r.ell, r.contact_area, r.min_gap);
            }
            println!("table in {}", out.csv.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
