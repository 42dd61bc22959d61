//! Argument parsing and dispatch for the `nvreadout` binary.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::{self, Backend, ConfigSource, ScenarioConfig};
use crate::error::{AppError, Result};
use crate::runner::{self, Targets};
use crate::svg::{self, PlotKind};

/// Repetitive nuclear-spin-assisted readout of an NV center: simulate,
/// sweep, calibrate and plot.
///
/// Exit codes: 0 success, 1 I/O failure, 2 configuration or input error,
/// 3 numerical failure (fit or calibration).
#[derive(Debug, Parser)]
#[command(name = "nvreadout", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// Scenario file (TOML), applied on top of the preset if both are given.
    config: Option<PathBuf>,
    /// Built-in scenario: fig2b, fig3b, fig3c or fig4.
    #[arg(long)]
    preset: Option<String>,
    /// Parameter overlay, e.g. the output of `calibrate`.
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long, value_enum)]
    backend: Option<Backend>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario for both preparations and write traces and a summary.
    Run(ScenarioArgs),
    /// Evaluate a scenario over the values of its [sweep] section.
    Sweep(ScenarioArgs),
    /// Fit contrast, kappa and optionally A_es to targets; write a parameter overlay.
    Calibrate {
        /// Targets file; the built-in targets are used when omitted.
        targets: Option<PathBuf>,
        /// Base scenario file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Render a CSV written by `run` or `sweep` as SVG.
    Plot {
        csv: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Output file; defaults to `<csv stem>_<kind>.svg` in --out-dir or next to the CSV.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
}

fn load_scenario(a: &ScenarioArgs) -> Result<(ScenarioConfig, PathBuf)> {
    let mut cfg = config::load(&ConfigSource {
        preset: a.preset.as_deref(),
        file: a.config.as_deref(),
        params: a.params.as_deref(),
    })?;
    if let Some(s) = a.seed {
        cfg.simulation.seed = s;
    }
    if let Some(n) = a.shots {
        cfg.simulation.shots = n;
    }
    if let Some(b) = a.backend {
        cfg.simulation.backend = b;
    }
    cfg.validate()?;
    let dir = a.out_dir.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    Ok((cfg, dir))
}

fn show(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run_cmd(a: &ScenarioArgs) -> Result<()> {
    let (cfg, dir) = load_scenario(a)?;
    let out = runner::run(&cfg)?;
    for s in out.summary_rows() {
        let n1e = s.n_1e.map_or_else(|| "-".to_string(), |v| format!("{v:.0}"));
        println!(
            "{:<10} F_max={:.4} N_opt={} N_1e={} duration={:.3} us",
            s.variant, s.f_max, s.n_opt, n1e, s.duration_us
        );
    }
    show(&out.write(&dir)?);
    Ok(())
}

fn sweep_cmd(a: &ScenarioArgs) -> Result<()> {
    let (cfg, dir) = load_scenario(a)?;
    let rows = runner::sweep(&cfg)?;
    show(&[runner::write_sweep(&rows, &dir)?]);
    Ok(())
}

fn calibrate_cmd(
    targets: Option<&Path>,
    cfg_file: Option<&Path>,
    preset: Option<&str>,
    out_dir: Option<&Path>,
) -> Result<()> {
    let t = match targets {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| AppError::io_path(p, e))?;
            Targets::from_toml(&text, &p.display().to_string())?
        }
        None => Targets::from_toml(runner::DEFAULT_TARGETS, "built-in targets")?,
    };
    let base = config::load(&ConfigSource {
        preset,
        file: cfg_file,
        params: None,
    })?;
    let report = runner::calibrate(&base, &t)?;
    if let Some(c) = report.contrast {
        println!("contrast = {c:.6}");
    }
    if let (Some(k), Some(n)) = (report.kappa, report.n_1e) {
        println!("kappa = {k:.6} (fitted N_1e = {n:.1})");
    }
    if let Some(j) = &report.joint {
        println!(
            "joint: kappa = {:.6}, a_es = {:.5} GHz, plain F = {:.4} at N = {}, corrected F = {:.4} at N = {}",
            j.kappa,
            j.a_es,
            j.improvement.f_plain_max,
            j.improvement.n_plain_opt,
            j.improvement.f_ec_max,
            j.improvement.n_ec_opt
        );
    }
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from(&base.output.dir));
    std::fs::create_dir_all(&dir).map_err(|e| AppError::io_path(&dir, e))?;
    let path = dir.join("calibrated.toml");
    let text = format!(
        "# Written by `nvreadout calibrate`; pass with --params.\n\n{}",
        toml::to_string(&report.overlay(&t)).expect("overlay serializes")
    );
    crate::csvio::write_text(&path, &text)?;
    show(&[path]);
    Ok(())
}

fn plot_cmd(csv: &Path, kind: PlotKind, output: Option<&Path>, out_dir: Option<&Path>) -> Result<()> {
    let svg = svg::render_file(kind, csv)?;
    let path = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = csv
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let dir = out_dir
                .map(Path::to_path_buf)
                .or_else(|| csv.parent().map(Path::to_path_buf))
                .unwrap_or_default();
            dir.join(format!("{stem}_{}.svg", kind.as_str()))
        }
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AppError::io_path(parent, e))?;
    }
    crate::csvio::write_text(&path, &svg)?;
    show(&[path]);
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => run_cmd(&a),
        Command::Sweep(a) => sweep_cmd(&a),
        Command::Calibrate {
            targets,
            config,
            preset,
            out_dir,
        } => calibrate_cmd(
            targets.as_deref(),
            config.as_deref(),
            preset.as_deref(),
            out_dir.as_deref(),
        ),
        Command::Plot {
            csv,
            kind,
            output,
            out_dir,
        } => plot_cmd(&csv, kind, output.as_deref(), out_dir.as_deref()),
    }
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if let Some(g) = e.guidance() {
                eprintln!("hint: {g}");
            }
            e.exit_code()
        }
    }
}
