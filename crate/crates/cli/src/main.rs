use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use holofocus::diagnostics::selftest;
use holofocus::pipeline::{
    compare, format_compare_table, optimize, reconstruct_file, write_optimize_outputs, write_reconstruction,
    write_targets,
};
use holofocus::RunConfig;

#[derive(Parser)]
#[command(name = "holofocus", version, about = "Multiplane phase-only hologram optimization")]
struct Cli {
    /// Worker threads (defaults to one per core).
    #[arg(long, global = true, env = "RAYON_NUM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a hologram per wavelength and write it with its focal stack and report.
    Optimize(RunArgs),
    /// Write per-plane target, mask and blurred-reference previews.
    Target(RunArgs),
    /// Re-simulate an exported hologram from its PNG and sidecar.
    Reconstruct {
        /// Hologram PNG; its `.json` sidecar must sit next to it.
        hologram: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every solver with both targeting modes and print a metrics table.
    Compare(RunArgs),
    /// Run the invariant checks.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Override any config field, e.g. `--set solver.regime=far`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_file(p).with_context(|| format!("reading {}", p.display()))?,
            None => RunConfig::default(),
        };
        for o in &self.overrides {
            cfg.set(o)?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        if let Some(n) = self.iterations {
            cfg.solver.iterations = n;
        }
        if let Some(lr) = self.lr {
            cfg.solver.learning_rate = lr;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn has_config(&self) -> bool {
        self.config.is_some() || !self.overrides.is_empty()
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Optimize(args) => {
            let cfg = args.resolve()?;
            let results = optimize(&cfg)?;
            let paths = write_optimize_outputs(&cfg, &results, &cfg.output_dir)?;
            for (res, path) in results.iter().zip(&paths) {
                println!(
                    "{:.0} nm: loss {:.4e} -> {:.4e} in {:.2}s, wrote {}",
                    res.optics.wavelength * 1e9,
                    res.trace.initial_loss(),
                    res.trace.final_loss(),
                    res.trace.wall_time.as_secs_f64(),
                    path.display()
                );
                for p in &res.report.planes {
                    let db = |v: Option<holofocus::metrics::Psnr>| v.map_or("n/a".to_string(), |p| p.to_string());
                    println!(
                        "  {:+.2} mm: in-focus {}, out-of-focus {}, ssim {:.3}",
                        p.offset * 1e3,
                        db(p.psnr_in_focus),
                        db(p.psnr_out_of_focus),
                        p.ssim
                    );
                }
            }
        }
        Command::Target(args) => {
            let cfg = args.resolve()?;
            let written = write_targets(&cfg, &cfg.output_dir)?;
            println!("wrote {} previews to {}", written.len(), cfg.output_dir.display());
        }
        Command::Reconstruct { hologram, run } => {
            let cfg = run.resolve()?;
            let rec = reconstruct_file(&hologram, run.has_config().then_some(&cfg))?;
            write_reconstruction(&rec, &cfg.output_dir)?;
            println!(
                "reconstructed {} planes into {}",
                rec.stack.planes.len(),
                cfg.output_dir.display()
            );
            if let Some(metrics) = &rec.metrics {
                for p in metrics {
                    let db = p.psnr_in_focus.map_or("n/a".to_string(), |v| v.to_string());
                    println!("  {:+.2} mm: in-focus {}, ssim {:.3}", p.offset * 1e3, db, p.ssim);
                }
            }
        }
        Command::Compare(args) => {
            let cfg = args.resolve()?;
            let rows = compare(&cfg)?;
            let table = format_compare_table(&rows);
            print!("{table}");
            std::fs::create_dir_all(&cfg.output_dir)?;
            std::fs::write(cfg.output_dir.join("compare.txt"), &table)?;
            holofocus::io::write_json(&rows, &cfg.output_dir.join("compare.json"))?;
        }
        Command::Selftest { seed } => {
            let results = selftest(seed);
            let mut ok = true;
            for r in &results {
                println!("{} {:<26} {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
                ok &= r.passed;
            }
            if !ok {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
