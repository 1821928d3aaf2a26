use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use transducer_cli::config::ScenarioConfig;
use transducer_cli::presets::{preset_config, preset_description, PRESET_NAMES};
use transducer_cli::runner::{run_scenario, run_sweep, summary_json, sweep_csv, trace_csv};
use transducer_cli::CliError;

/// Simulator for a four-mode optical-to-spin quantum transducer.
#[derive(Parser)]
#[command(name = "transducer", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// Directory the trace CSV and summary JSON are written into.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Override the integrator step.
    #[arg(long)]
    dt: Option<f64>,
    /// Override the sampling interval.
    #[arg(long)]
    sample_every: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named preset scenario.
    RunPreset {
        /// Preset name; see `list-presets`.
        name: String,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Run a scenario from a TOML config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Re-run a scenario for each value of one scalar parameter.
    Sweep {
        config: PathBuf,
        /// Dotted key path of the parameter, e.g. `channels.gamma_c`.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values, run in the order given.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// List the built-in presets.
    ListPresets,
}

fn apply_flags(config: &mut ScenarioConfig, flags: &RunFlags) {
    if let Some(dt) = flags.dt {
        config.integrator.dt = dt;
    }
    if let Some(sample_every) = flags.sample_every {
        config.output.sample_every = sample_every;
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    ScenarioConfig::from_toml_str(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn config_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into())
}

/// Runs one scenario and writes `<stem>_trace.csv` and `<stem>_summary.json`.
fn run_and_write(config: &ScenarioConfig, out_dir: &Path, stem: &str) -> Result<(), CliError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", out_dir.display())))?;
    let artifacts = run_scenario(config)?;
    let trace_path = out_dir.join(format!("{stem}_trace.csv"));
    let summary_path = out_dir.join(format!("{stem}_summary.json"));
    write_file(&trace_path, &trace_csv(&artifacts))?;
    write_file(&summary_path, &summary_json(&artifacts))?;

    let s = &artifacts.summary;
    println!("scenario {stem} ({}) finished:", s.protocol);
    println!("  duration: {} (1/g units), {} samples", s.total_duration, s.samples);
    if let (Some(peak), Some(t)) = (s.peak_fidelity, s.peak_fidelity_time) {
        println!("  peak fidelity: {peak:.6} at t = {t}");
    }
    if let Some(eff) = s.efficiency {
        println!("  transfer efficiency: {eff:.6}");
    }
    if let Some(conc) = s.final_concurrence_ad {
        println!("  final optical-NV concurrence: {conc:.6}");
    }
    println!("  max trace error: {:.3e}", s.max_trace_error);
    println!("  wrote {}", trace_path.display());
    println!("  wrote {}", summary_path.display());
    Ok(())
}

fn cmd_run_preset(name: &str, flags: &RunFlags) -> Result<(), CliError> {
    let mut config = preset_config(name).ok_or_else(|| {
        CliError::Invalid(format!(
            "unknown preset '{name}'; available: {}",
            PRESET_NAMES.join(", ")
        ))
    })?;
    apply_flags(&mut config, flags);
    run_and_write(&config, &flags.out, name)
}

fn cmd_run(path: &Path, flags: &RunFlags) -> Result<(), CliError> {
    let mut config = load_config(path)?;
    apply_flags(&mut config, flags);
    run_and_write(&config, &flags.out, &config_stem(path))
}

fn cmd_sweep(path: &Path, param: &str, values: &[f64], flags: &RunFlags) -> Result<(), CliError> {
    let mut config = load_config(path)?;
    apply_flags(&mut config, flags);
    fs::create_dir_all(&flags.out)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", flags.out.display())))?;
    let stem = config_stem(path);
    let (rows, runs) = run_sweep(&config, param, values)?;
    let table_path = flags.out.join(format!("{stem}_sweep.csv"));
    write_file(&table_path, &sweep_csv(&rows))?;
    for (i, artifacts) in runs.iter().enumerate() {
        let trace_path = flags.out.join(format!("{stem}_sweep_{i}_trace.csv"));
        write_file(&trace_path, &trace_csv(artifacts))?;
    }
    println!("swept {param} over {} values:", rows.len());
    for row in &rows {
        let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
        println!(
            "  {} = {}: peak fidelity {}, efficiency {}, final concurrence {}",
            param,
            row.value,
            fmt(row.peak_fidelity),
            fmt(row.efficiency),
            fmt(row.final_concurrence_ad)
        );
    }
    println!("  wrote {}", table_path.display());
    Ok(())
}

fn cmd_list_presets() {
    for name in PRESET_NAMES {
        println!("{name:<13} {}", preset_description(name));
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::RunPreset { name, flags } => cmd_run_preset(name, flags),
        Command::Run { config, flags } => cmd_run(config, flags),
        Command::Sweep {
            config,
            param,
            values,
            flags,
        } => cmd_sweep(config, param, values, flags),
        Command::ListPresets => {
            cmd_list_presets();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
