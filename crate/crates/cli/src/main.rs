//! `flatlens` command line: one subcommand per pipeline stage.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical error
//! (instability, non-convergence, degenerate pattern), 4 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use flatlens::config::{PipelineConfig, ValidatedConfig};
use flatlens::pipeline::{self, MaterialSource, StageReport};
use flatlens::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "flatlens", version, about = "Flattened Luneburg lens design and 2D verification pipeline")]
struct Cli {
    /// Pipeline configuration (TOML). Defaults reproduce the reference lens.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output root; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for independent simulations (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Accepted for interface stability; every stage is deterministic.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Source {
    Continuous,
    Discretized,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Transformed tensor, reduced and weighted permittivity maps.
    Material,
    /// Quantise the weighted profile into the layer stack.
    Discretize,
    /// Centred-feed simulation: phasors, convergence and far field.
    Simulate {
        #[arg(long, value_enum, default_value = "continuous")]
        source: Source,
    },
    /// Feed-offset sweep under the weighted lens.
    Scan,
    /// Feed-offset sweep with and without the weighting function.
    AbWeighting,
    /// Effective parameters from an S-parameter sweep CSV
    /// (`f_ghz,s11_re,s11_im,s21_re,s21_im,t_mm`).
    Retrieve {
        input: PathBuf,
        /// Force the branch index instead of resolving it from the first point.
        #[arg(long, allow_hyphen_values = true)]
        branch: Option<i32>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Validation => 2,
        ErrorKind::Numerical => 3,
        ErrorKind::Io => 4,
    }
}

fn load(cli: &Cli) -> Result<(ValidatedConfig, PathBuf), Error> {
    let raw = match &cli.config {
        Some(p) => {
            if !p.is_file() {
                return Err(Error::Config(format!("config file {} does not exist", p.display())));
            }
            PipelineConfig::load(p)?
        }
        None => PipelineConfig::default(),
    };
    let cfg = raw.validate()?;
    let out = cli.out.clone().unwrap_or_else(|| cfg.raw.output.directory.clone());
    Ok((cfg, out))
}

fn report(r: &StageReport) {
    println!("wrote {} files to {}", r.files.len(), r.dir.display());
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.2}"))
}

fn run(cli: &Cli) -> Result<(), Error> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Retrieve { input, branch } = &cli.command {
        if !input.is_file() {
            return Err(Error::Config(format!("input {} does not exist", input.display())));
        }
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
        let r = pipeline::cmd_retrieve(input, *branch, &out)?;
        report(&r);
        return Ok(());
    }
    let (cfg, out) = load(cli)?;
    let out: &Path = &out;
    match &cli.command {
        Command::Material => {
            let (r, s) = pipeline::cmd_material(&cfg, out)?;
            println!(
                "centre eps {:.4}, face eps {:.4} (unweighted {:.4})",
                s.center_eps, s.surface_eps, s.surface_eps_unweighted
            );
            report(&r);
        }
        Command::Discretize => {
            let (r, c) = pipeline::cmd_discretize(&cfg, out)?;
            println!(
                "{} of {} footprint pixels clamped ({:.2}%)",
                c.clamped,
                c.in_footprint,
                100.0 * c.fraction
            );
            report(&r);
        }
        Command::Simulate { source } => {
            let source = match source {
                Source::Continuous => MaterialSource::Continuous,
                Source::Discretized => MaterialSource::Discretized,
            };
            let (r, s) = pipeline::cmd_simulate(&cfg, source, out)?;
            let m = &s.metrics;
            println!(
                "converged after {} periods; peak {:.2} deg, HPBW {:.2} deg, SLL {} dB",
                s.convergence.periods,
                m.peak_deg,
                m.hpbw_deg,
                fmt_opt(m.sll_db)
            );
            report(&r);
        }
        Command::Scan => {
            let (r, entries) = pipeline::cmd_scan(&cfg, out)?;
            println!("offset_mm  peak_deg  hpbw_deg  sll_db  f2b_db  scan_loss_db");
            for e in &entries {
                let m = &e.metrics;
                println!(
                    "{:9.2} {:9.2} {:9.2} {:>7} {:7.2} {:>12}",
                    e.offset_mm,
                    m.peak_deg,
                    m.hpbw_deg,
                    fmt_opt(m.sll_db),
                    m.f2b_db,
                    fmt_opt(m.scan_loss_db)
                );
            }
            report(&r);
        }
        Command::AbWeighting => {
            let (r, rows) = pipeline::cmd_ab_weighting(&cfg, out)?;
            println!("offset_mm  peak_w  peak_u  sll_w  sll_u  f2b_w  f2b_u");
            for row in &rows {
                let (w, u) = (&row.weighted, &row.unweighted);
                println!(
                    "{:9.2} {:7.2} {:7.2} {:>6} {:>6} {:6.2} {:6.2}",
                    row.offset_mm,
                    w.peak_deg,
                    u.peak_deg,
                    fmt_opt(w.sll_db),
                    fmt_opt(u.sll_db),
                    w.f2b_db,
                    u.f2b_db
                );
            }
            report(&r);
        }
        Command::Retrieve { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
