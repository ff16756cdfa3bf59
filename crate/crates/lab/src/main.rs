use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use phase_pump_lab::config::{parse_config, Mode, RunConfig, Section};
use phase_pump_lab::figures;
use phase_pump_lab::sweep::run_sweep;

/// Runs a parameter sweep of one mode or reproduces a figure's data.
///
/// Exit status: 0 on success, 1 if any sweep point failed, 2 on a config or
/// usage error.
#[derive(Parser, Debug)]
#[command(name = "phase-pump-lab", version)]
struct Cli {
    /// classical, adiabatic, floquet, propagate, duffing, or a figure name
    /// (fig2, fig3a, fig3b, fig3c, fig3d, fig4, fig5, figS1).
    target: String,
    /// TOML config; required for modes, ignored for figures.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory; defaults to the config's `output` or `out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    if cli.workers == 0 {
        return config_error("--workers must be at least 1");
    }
    if figures::is_figure(&cli.target) {
        let out = cli.out.unwrap_or_else(|| PathBuf::from("out"));
        return match figures::reproduce_figure(&cli.target, &out, cli.workers) {
            Ok(b) => {
                for f in &b.files {
                    println!("{}", f.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(1)
            }
        };
    }
    let Some(mode) = Mode::parse(&cli.target) else {
        return config_error(format!("unknown mode or figure `{}`", cli.target));
    };
    let cfg = match &cli.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return config_error(format!("{}: {e}", path.display())),
            };
            match parse_config(&text) {
                Ok(c) => c,
                Err(e) => return config_error(format!("{}: {e}", path.display())),
            }
        }
        None => RunConfig::new(Section::default_for(mode)),
    };
    if cfg.mode() != mode {
        return config_error(format!("config is for mode `{}`, not `{mode}`", cfg.mode()));
    }
    let out = cli
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    match run_sweep(&cfg, cli.workers, &out) {
        Ok(s) => {
            println!("{}", s.csv.display());
            println!("{}", s.log.display());
            if s.failures > 0 {
                eprintln!("{} of {} points failed", s.failures, s.points);
            }
            ExitCode::from(s.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
