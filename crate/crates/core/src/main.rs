use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use axivisc::experiment::{
    self, format_verdicts, load_config, read_snapshot, write_snapshot, ExperimentConfig, HarnessError,
};
use axivisc::norms::{lebesgue_norm, lorentz_norm, mixed_norm, LorentzIndex};

#[derive(Parser)]
#[command(name = "axivisc", version, about = "Axisymmetric vertical-viscosity vorticity solver and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its run directory.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run directory (overrides `output_dir` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue the run in the output directory from its checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Print Lorentz, Lebesgue and mixed norms of a snapshot.
    Norms {
        #[arg(long)]
        snapshot: PathBuf,
        /// Primary exponent (or horizontal exponent of the mixed norm); `inf` allowed.
        #[arg(long, value_parser = parse_exponent)]
        p: Option<f64>,
        /// Secondary exponent (or vertical exponent of the mixed norm); `inf` allowed.
        #[arg(long, value_parser = parse_exponent)]
        q: Option<f64>,
    },
    /// Write `u_r.bin` and `u_z.bin` reconstructed from an `ω` (or `q`) snapshot.
    Reconstruct {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        n_theta: usize,
    },
    /// Replay all diagnostics of a finished run directory.
    Check {
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_exponent(s: &str) -> Result<f64, String> {
    match s {
        "inf" | "infinity" | "∞" => Ok(f64::INFINITY),
        _ => s.parse::<f64>().map_err(|e| e.to_string()),
    }
}

const EXIT_CHECK: u8 = 1;
const EXIT_USAGE: u8 = 2;

fn init_threads() {
    if let Ok(v) = std::env::var("AXIVISC_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => log::warn!("ignoring AXIVISC_THREADS={v:?}"),
        }
    }
}

fn cmd_run(config: Option<&Path>, out: Option<&Path>, resume: bool) -> Result<ExitCode, String> {
    let mut c = match config {
        Some(p) => load_config(p).map_err(|e| format!("{}: {e}", p.display()))?,
        None if resume => {
            let dir = out.ok_or("--resume needs --out or --config")?;
            load_config(&dir.join(experiment::CONFIG_FILE)).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(o) = out {
        c.output_dir = o.to_path_buf();
    }
    let dir = c.output_dir.clone();
    let result = if resume {
        experiment::resume_experiment(&c, &dir)
    } else {
        experiment::run_experiment(&c, &dir)
    };
    match result {
        Ok(rep) => {
            let last = &rep.output.final_state;
            info!("t = {} after {} steps, {} diagnostics rows", last.t, last.step, rep.output.records.len());
            print!("{}", format_verdicts(&rep.verdicts));
            println!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(HarnessError::Aborted { t, error }) => {
            eprintln!("run aborted at t = {t}: {error}; partial output in {}", dir.display());
            Ok(ExitCode::from(EXIT_CHECK))
        }
        Err(HarnessError::Setup(e)) => Err(e.to_string()),
    }
}

fn cmd_norms(snapshot: &Path, p: Option<f64>, q: Option<f64>) -> Result<ExitCode, String> {
    let s = read_snapshot(snapshot).map_err(|e| e.to_string())?;
    let f = &s.field;
    println!("role = {}", f.role());
    println!("time = {}", s.time);
    let e = |e: axivisc::Error| e.to_string();
    match (p, q) {
        (None, None) => {
            for (p, q) in [(1.5, 1.0), (1.2, 1.0), (3.0, 1.0), (1.5, f64::INFINITY)] {
                let v = lorentz_norm(f, LorentzIndex::new(p, q).map_err(e)?).map_err(e)?;
                println!("L^({p},{q}) = {v:.16e}");
            }
            for p in [1.2, 1.5, 2.0, f64::INFINITY] {
                println!("L^{p} = {:.16e}", lebesgue_norm(f, p).map_err(e)?);
            }
        }
        (Some(p), q) => {
            let q = q.unwrap_or(p);
            let v = lorentz_norm(f, LorentzIndex::new(p, q).map_err(e)?).map_err(e)?;
            println!("L^({p},{q}) = {v:.16e}");
            if let Ok(m) = mixed_norm(f, p, q) {
                println!("L^{p}_h(L^{q}_v) = {m:.16e}");
            }
        }
        (None, Some(_)) => return Err("--q needs --p".into()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_reconstruct(snapshot: &Path, out: &Path, n_theta: usize) -> Result<ExitCode, String> {
    let (ur, uz, t) = experiment::reconstruct(snapshot, n_theta).map_err(|e| e.to_string())?;
    write_snapshot(&out.join("u_r.bin"), &ur, t, None).map_err(|e| e.to_string())?;
    write_snapshot(&out.join("u_z.bin"), &uz, t, None).map_err(|e| e.to_string())?;
    println!("wrote {} and {}", out.join("u_r.bin").display(), out.join("u_z.bin").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_check(dir: &Path) -> Result<ExitCode, String> {
    let verdicts = experiment::check_run_dir(dir).map_err(|e| e.to_string())?;
    print!("{}", format_verdicts(&verdicts));
    if verdicts.iter().all(|v| v.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(EXIT_CHECK))
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    init_threads();
    let result = match &cli.command {
        Command::Run { config, out, resume } => cmd_run(config.as_deref(), out.as_deref(), *resume),
        Command::Norms { snapshot, p, q } => cmd_norms(snapshot, *p, *q),
        Command::Reconstruct { snapshot, out, n_theta } => cmd_reconstruct(snapshot, out, *n_theta),
        Command::Check { out } => cmd_check(out),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
