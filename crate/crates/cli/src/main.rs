//! `oscnet`: relaxation-oscillator network simulator.
//!
//! Exit codes: 0 success, 1 usage/validation error, 2 runtime failure. The
//! final stdout line is always a one-line JSON status.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use oscnet_cli::config::{RhsChoice, SimConfig};
use oscnet_cli::driver::{self, CircuitKind};
use oscnet_cli::output::json_escape;
use oscnet_core::Error;

#[derive(Debug, Parser)]
#[command(
    name = "oscnet",
    version,
    about = "Simulates 2-D networks of hysteretic relaxation oscillators",
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Args)]
struct Common {
    /// Config file (strict TOML; every key optional).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Step size [t0]; overrides the config.
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Run length [t0]; overrides the config.
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Right-hand-side model; overrides the config.
    #[arg(long, global = true, value_enum)]
    rhs: Option<RhsArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RhsArg {
    Ideal,
    Exact,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CircuitArg {
    Dd,
    Dr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum TemplateArg {
    Vortex,
    Wave,
    Life,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Self-oscillation diagnostics for the configured cell.
    Check {
        /// Circuit family to diagnose.
        #[arg(long, value_enum, default_value = "dd")]
        circuit: CircuitArg,
        /// Series resistance [R0] for --circuit dr (default 1).
        #[arg(long)]
        r_series: Option<f64>,
    },
    /// Run one isolated cell and write its trace.
    Cell,
    /// Run a plain resistively coupled grid.
    Grid {
        /// Grid size as WxH, e.g. 30x30; overrides the config.
        #[arg(long)]
        size: Option<String>,
    },
    /// Run a named experiment template.
    Scenario {
        /// Template; overrides the config.
        #[arg(long, value_enum)]
        template: Option<TemplateArg>,
        /// Grid size as WxH; overrides the config.
        #[arg(long)]
        size: Option<String>,
    },
    /// Compute the physical capacitance matching a target frequency.
    Calibrate {
        /// Physical value of R0 in ohms (default: units.r0_ohms).
        #[arg(long)]
        r0_ohms: Option<f64>,
        /// Target oscillation frequency in Hz.
        #[arg(long)]
        frequency: f64,
    },
}

fn parse_size(s: &str) -> Result<(u32, u32), Error> {
    let err = || Error::validation(format!("--size must look like 30x30, got \"{s}\""));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(err)?;
    let w: u32 = w.trim().parse().map_err(|_| err())?;
    let h: u32 = h.trim().parse().map_err(|_| err())?;
    if w == 0 || h == 0 {
        return Err(err());
    }
    Ok((w, h))
}

fn build_config(common: &Common, cmd: &Cmd) -> Result<SimConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::default(),
    };
    if let Some(dt) = common.dt {
        cfg.run.dt = dt;
    }
    if let Some(d) = common.duration {
        cfg.run.duration = d;
    }
    if let Some(out) = &common.out {
        cfg.run.out = out.display().to_string();
    }
    if let Some(rhs) = common.rhs {
        cfg.run.rhs = match rhs {
            RhsArg::Ideal => RhsChoice::Ideal,
            RhsArg::Exact => RhsChoice::Exact,
        };
    }
    let size = match cmd {
        Cmd::Grid { size } | Cmd::Scenario { size, .. } => size.clone(),
        _ => None,
    };
    if let Some(s) = size {
        let (w, h) = parse_size(&s)?;
        cfg.grid.width = w;
        cfg.grid.height = h;
    }
    if let Cmd::Scenario {
        template: Some(t), ..
    } = cmd
    {
        cfg.scenario.template = match t {
            TemplateArg::Vortex => "vortex",
            TemplateArg::Wave => "wave",
            TemplateArg::Life => "life",
        }
        .into();
    }
    cfg.validate()?;
    cfg.resolve()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<String, Error> {
    let cfg = build_config(&cli.common, &cli.cmd)?;
    let out = PathBuf::from(&cfg.run.out);
    match &cli.cmd {
        Cmd::Check { circuit, r_series } => {
            let kind = match circuit {
                CircuitArg::Dd => CircuitKind::Dd,
                CircuitArg::Dr => CircuitKind::Dr,
            };
            driver::run_check(&cfg, kind, *r_series)
        }
        Cmd::Cell => driver::run_cell(&cfg, &out),
        Cmd::Grid { .. } => driver::run_grid(&cfg, &out),
        Cmd::Scenario { .. } => driver::run_scenario_cmd(&cfg, &out),
        Cmd::Calibrate { r0_ohms, frequency } => driver::run_calibrate(&cfg, *r0_ohms, *frequency),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests are successes; everything else is a
            // usage error
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(status) => {
            println!("{status}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            println!(
                "{{\"status\":\"error\",\"exit_code\":{},\"message\":\"{}\"}}",
                e.exit_code(),
                json_escape(&e.to_string())
            );
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
