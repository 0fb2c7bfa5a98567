use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ftsmfc::plant_models::sample_count;
use ftsmfc::sim::harness::desired_trajectory;
use ftsmfc::sim::output::{compute_metrics, write_csv_file, write_metrics_file};
use ftsmfc::sim::sweep::{run_sweep, split_values};
use ftsmfc::sim::{run_closed_loop_partial, verify_suite, SimConfig, Suite};
use ftsmfc::Error;

#[derive(Parser)]
#[command(name = "ftsmfc", version, about = "Finite-time-stable model-free control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment; writes the CSV log and `<out>.metrics`.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the desired trajectory of a config as CSV (`t,x_d,theta_d`).
    GenerateTrajectory {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run property suites: lemma1, holder, gamma, rho, observer1, observer2,
    /// control, robustness, or `all` (comma-separated lists allowed).
    Verify {
        #[arg(long)]
        suite: String,
    },
    /// Re-run a config once per value of a dotted key, in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        param: String,
        /// Comma-separated TOML values, e.g. `1.0,1.5` or `"9/7","6/5"`.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn metrics_path(csv: &Path) -> PathBuf {
    let mut p = csv.as_os_str().to_owned();
    p.push(".metrics");
    PathBuf::from(p)
}

fn simulate(config: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = SimConfig::load(config)?;
    let out = out
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config("no output path: pass --out or set `output`".into()))?;
    let (log, failure) = run_closed_loop_partial(&cfg);
    // the partial log is still useful after a divergence
    write_csv_file(&log, &out)?;
    if let Some(e) = failure {
        return Err(e);
    }
    let metrics = compute_metrics(&log, cfg.settle_time.0, &cfg.band())?;
    write_metrics_file(&metrics, &metrics_path(&out))?;
    eprintln!("wrote {} records to {}", log.len(), out.display());
    Ok(())
}

fn generate_trajectory(config: &Path, out: &Path) -> Result<(), Error> {
    let cfg = SimConfig::load(config)?;
    let count = sample_count(cfg.t_final(), cfg.dt());
    let samples = desired_trajectory(&cfg, count)?;
    let n = cfg.output_dim();
    let header = if n == 2 {
        "t,x_d,theta_d".to_string()
    } else {
        std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("y_d{i}")))
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut text = header + "\n";
    for (k, y) in samples.iter().enumerate() {
        text.push_str(&format!("{:.16e}", k as f64 * cfg.dt()));
        for v in y.iter() {
            text.push_str(&format!(",{v:.16e}"));
        }
        text.push('\n');
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out, text)?;
    Ok(())
}

fn verify(selector: &str) -> Result<bool, Error> {
    let suites: Vec<Suite> = if selector == "all" {
        Suite::ALL.to_vec()
    } else {
        selector
            .split(',')
            .map(|s| s.trim().parse::<Suite>().map_err(Error::Config))
            .collect::<Result<_, _>>()?
    };
    let mut all_ok = true;
    for s in suites {
        let report = verify_suite(s);
        println!("{report}");
        all_ok &= report.passed();
    }
    Ok(all_ok)
}

fn sweep(config: &Path, param: &str, values: &str, out: &Path) -> Result<(), Error> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", config.display())))?;
    let base_dir = config.parent().unwrap_or(Path::new("."));
    let outcomes = run_sweep(&text, base_dir, param, &split_values(values), out)?;
    let mut first_err = None;
    for o in outcomes {
        match &o.error {
            None => println!("{param} = {}: ok -> {}", o.value, o.csv.display()),
            Some(e) => {
                println!("{param} = {}: {e}", o.value);
                first_err.get_or_insert(e.clone());
            }
        }
    }
    first_err.map_or(Ok(()), Err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => simulate(&config, out),
        Command::GenerateTrajectory { config, out } => generate_trajectory(&config, &out),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => sweep(&config, &param, &values, &out),
        Command::Verify { suite } => match verify(&suite) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(3),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
