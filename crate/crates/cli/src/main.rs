//! `dtqw` command-line driver.
//!
//! Exit codes: 0 success, 1 configuration error, 2 numerical failure,
//! 3 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtqw_core::harness::config::parse_angle;
use dtqw_core::harness::report::{self, distribution_csv};
use dtqw_core::harness::{
    emit_report, parse_values, plot_script, run_experiment, run_sweep, validate_truncation, ConfigBuilder,
    ExperimentConfig, OutputFormat, PlotKind, Report, SweepAxis, SweepSpec,
};
use dtqw_core::{run_ideal, CoinState, Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dtqw", version, about = "Coined quantum walk on a qutrit-cavity chain")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one configuration and score it against the ideal walk.
    Run(RunArgs),
    /// Simulate a grid of configurations.
    Sweep(SweepArgs),
    /// Per-site walker distribution next to the ideal one.
    Dist(DistArgs),
    /// Compare the truncated basis with the full tensor space.
    Validate(ValidateArgs),
    /// Print the ideal walk distribution only.
    Ideal(IdealArgs),
}

/// Settings shared by every simulating subcommand. Flags override the config
/// file; `--set key=value` accepts any config key.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Config file in `key = value` format.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n_steps: Option<String>,
    /// Coin angle in radians (`pi/4` style accepted).
    #[arg(long)]
    theta_rad: Option<String>,
    #[arg(long)]
    phi_rad: Option<String>,
    #[arg(long = "omega-over-2pi-mhz")]
    omega_over_2pi_mhz: Option<String>,
    #[arg(long = "g-over-2pi-mhz")]
    g_over_2pi_mhz: Option<String>,
    #[arg(long = "mu-over-2pi-mhz")]
    mu_over_2pi_mhz: Option<String>,
    /// zero | one | plus-i | re0,im0,re1,im1
    #[arg(long)]
    coin0: Option<String>,
    /// t0 | none
    #[arg(long)]
    decoherence: Option<String>,
    /// Lifetime multiplier (5 means five times longer lifetimes).
    #[arg(long)]
    scale: Option<String>,
    /// rk4 | expm
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    dt_max_us: Option<String>,
    #[arg(long)]
    min_steps_per_segment: Option<String>,
    #[arg(long)]
    richardson: Option<String>,
    #[arg(long)]
    tolerance: Option<String>,
    /// Score S on P_me rescaled to unit sum.
    #[arg(long)]
    renormalize: bool,
    #[arg(long)]
    allow_full_space: bool,
    /// Output file; format from --format or the extension.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// csv | json
    #[arg(long)]
    format: Option<String>,
    /// Extra `key=value` settings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl ConfigArgs {
    fn build(&self, defaults: &[(&str, &str)]) -> Result<ExperimentConfig> {
        let mut b = ConfigBuilder::new();
        for (k, v) in defaults {
            b.set(k, v)?;
        }
        if let Some(path) = &self.config {
            b.apply_file(path)?;
        }
        let flags = [
            ("n_steps", &self.n_steps),
            ("theta_rad", &self.theta_rad),
            ("phi_rad", &self.phi_rad),
            ("omega_over_2pi_MHz", &self.omega_over_2pi_mhz),
            ("g_over_2pi_MHz", &self.g_over_2pi_mhz),
            ("mu_over_2pi_MHz", &self.mu_over_2pi_mhz),
            ("coin0", &self.coin0),
            ("decoherence", &self.decoherence),
            ("scale", &self.scale),
            ("method", &self.method),
            ("dt_max_us", &self.dt_max_us),
            ("min_steps_per_segment", &self.min_steps_per_segment),
            ("richardson", &self.richardson),
            ("tolerance", &self.tolerance),
            ("format", &self.format),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                b.set(key, v)?;
            }
        }
        if self.renormalize {
            b.set("renormalize", "true")?;
        }
        if self.allow_full_space {
            b.set("allow_full_space", "true")?;
        }
        if let Some(path) = &self.output {
            b.set("output", &path.to_string_lossy())?;
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidParameter(format!("--set expects key=value, got `{kv}`")))?;
            b.set(k.trim(), v.trim())?;
        }
        b.build()
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// g | omega_rabi | n_steps | scale
    #[arg(long, default_value = "g")]
    axis: String,
    /// Comma list or inclusive start:stop:step; defaults to 10:60:5 for g.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    cross_axis: Option<String>,
    #[arg(long)]
    cross_values: Option<String>,
    /// Also write a gnuplot script for the output table.
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DistArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    plot_script: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Exit with status 2 when the distribution deviation exceeds this.
    #[arg(long, default_value_t = 1e-6)]
    max_deviation: f64,
}

#[derive(Args, Debug)]
struct IdealArgs {
    #[arg(long, default_value_t = 20)]
    n_steps: usize,
    #[arg(long, default_value = "pi/4")]
    theta_rad: String,
    #[arg(long, default_value = "plus-i")]
    coin0: String,
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn emit(reports: &[Report], cfg: &ExperimentConfig) -> Result<()> {
    match &cfg.output {
        Some(o) => emit_report(reports, &o.path, o.format),
        None => write_or_print(None, &report::to_csv_string(reports)?),
    }
}

fn summary(r: &Report) {
    match (&r.metrics, &r.error) {
        (Some(m), _) => eprintln!(
            "N={} coin0={} scale={}: S={:.6} S_renorm={:.6} trace_error={:.2e} ({:.0} ms)",
            r.config.device.n_steps, r.config.coin0, r.config.rates.scale, m.s, m.s_renorm, m.trace_error, m.wall_ms
        ),
        (None, Some(e)) => eprintln!("N={} failed: {e}", r.config.device.n_steps),
        (None, None) => {}
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.config.build(&[])?;
            let report = run_experiment(&cfg)?;
            summary(&report);
            emit(std::slice::from_ref(&report), &cfg)
        }
        Command::Sweep(args) => {
            let cfg = args.config.build(&[])?;
            let axis: SweepAxis = args.axis.parse()?;
            let mut spec = match (&args.values, axis) {
                (Some(v), _) => SweepSpec::new(axis, parse_values(v)?),
                (None, SweepAxis::G) => SweepSpec::default_g_grid(),
                (None, _) => return Err(Error::InvalidParameter(format!("--values is required for axis {axis}"))),
            };
            if let Some(cross) = &args.cross_axis {
                let values = args
                    .cross_values
                    .as_deref()
                    .ok_or_else(|| Error::InvalidParameter("--cross-values is required with --cross-axis".into()))?;
                spec = spec.crossed(cross.parse()?, parse_values(values)?);
            }
            let reports = run_sweep(&cfg, &spec)?;
            reports.iter().for_each(summary);
            emit(&reports, &cfg)?;
            if let Some(path) = &args.plot_script {
                let kind = if axis == SweepAxis::NSteps {
                    PlotKind::SimilarityVsSteps
                } else {
                    PlotKind::SimilarityVsG
                };
                let data = cfg
                    .output
                    .as_ref()
                    .map_or("sweep.csv".into(), |o| o.path.to_string_lossy().into_owned());
                write_or_print(Some(path), &plot_script(kind, &data))?;
            }
            Ok(())
        }
        Command::Dist(args) => {
            let cfg = args.config.build(&[("n_steps", "20")])?;
            let report = run_experiment(&cfg)?;
            summary(&report);
            let m = report
                .metrics
                .as_ref()
                .expect("run_experiment returns metrics on success");
            match &cfg.output {
                Some(o) if o.format == OutputFormat::Json => {
                    emit_report(std::slice::from_ref(&report), &o.path, o.format)?
                }
                Some(o) => write_or_print(Some(&o.path), &distribution_csv(&m.p_me, &m.p_id)?)?,
                None => write_or_print(None, &distribution_csv(&m.p_me, &m.p_id)?)?,
            }
            if let Some(path) = &args.plot_script {
                let data = cfg
                    .output
                    .as_ref()
                    .map_or("dist.csv".into(), |o| o.path.to_string_lossy().into_owned());
                write_or_print(Some(path), &plot_script(PlotKind::Distribution, &data))?;
            }
            Ok(())
        }
        Command::Validate(args) => {
            let cfg = args.config.build(&[("n_steps", "2")])?;
            let check = validate_truncation(&cfg)?;
            let text = serde_json::to_string_pretty(&check)?;
            write_or_print(cfg.output.as_ref().map(|o| o.path.as_path()), &(text + "\n"))?;
            eprintln!(
                "N={} dims {} vs {}: max site deviation {:.3e}, S deviation {:.3e}",
                check.n_steps, check.truncated_dim, check.full_dim, check.max_distribution_deviation, check.s_deviation
            );
            if check.max_distribution_deviation > args.max_deviation {
                return Err(Error::NonConvergence {
                    halvings: 0,
                    deviation: check.max_distribution_deviation,
                });
            }
            Ok(())
        }
        Command::Ideal(args) => {
            let theta = parse_angle(&args.theta_rad)?;
            let coin: CoinState = args.coin0.parse()?;
            let d = run_ideal(args.n_steps, theta, coin)?;
            let mut out = String::from("site,P_id\n");
            for (j, p) in d.p.iter().enumerate() {
                out.push_str(&format!("{},{}\n", j + 1, p));
            }
            write_or_print(None, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
