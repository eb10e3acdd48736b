//! Experiment configuration and its flat `key = value` text format.
//!
//! ```text
//! # comment
//! n_steps = 20
//! theta_rad = pi/4
//! g_over_2pi_MHz = 50        # also sets mu unless mu_over_2pi_MHz is given
//! omega_over_2pi_MHz = 100
//! decoherence = t0           # t0 | none
//! scale = 0.2                # lifetimes multiplied by this factor
//! coin0 = plus-i             # zero | one | plus-i | re0,im0,re1,im1
//! ```
//!
//! Frequencies are given as `f/2π` in MHz and lifetimes in µs; both are
//! converted once here to rad/µs and 1/µs. Later keys override earlier ones,
//! which is how command-line flags take precedence over a file.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idealwalk::CoinState;
use crate::lindblad::{DecoherenceRates, IntegratorConfig, Method};
use crate::statespace::{angular_to_mhz, mhz_to_angular, DeviceParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidParameter(format!("unknown output format `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: PathBuf,
    pub format: OutputFormat,
}

/// Everything needed for one simulation run. Fully deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub device: DeviceParams,
    pub rates: DecoherenceRates,
    pub coin0: CoinState,
    pub integrator: IntegratorConfig,
    /// Rescale `P_me` to unit sum before scoring the headline `S`.
    pub renormalize: bool,
    pub output: Option<OutputSpec>,
    /// Lift the full-tensor-space size guard for truncation checks.
    pub allow_full_space: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            device: DeviceParams::new(10),
            rates: DecoherenceRates::t0(),
            coin0: CoinState::plus_i(),
            integrator: IntegratorConfig::default(),
            renormalize: false,
            output: None,
            allow_full_space: false,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.rates.validate()?;
        self.integrator.validate()?;
        CoinState::new(self.coin0.c0, self.coin0.c1)?;
        Ok(())
    }

    /// Same configuration without any decoherence.
    pub fn without_decoherence(&self) -> Self {
        let mut c = self.clone();
        c.rates = DecoherenceRates::zero().with_scale(self.rates.scale);
        c
    }
}

/// Parses `pi/4`, `-pi/2`, `2pi`, `pi` or a plain number.
pub fn parse_angle(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let err = || Error::InvalidParameter(format!("cannot parse angle `{s}`"));
    if let Ok(v) = t.parse::<f64>() {
        return Ok(v);
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t.as_str()),
    };
    let (num, den) = match body.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim().parse::<f64>().map_err(|_| err())?),
        None => (body, 1.0),
    };
    let factor = match num.strip_suffix("pi") {
        Some("") => 1.0,
        Some(f) => f.trim_end_matches('*').parse::<f64>().map_err(|_| err())?,
        None => return Err(err()),
    };
    Ok(sign * factor * PI / den)
}

fn parse_bool(s: &str) -> Result<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(Error::InvalidParameter(format!("expected a boolean, got `{other}`"))),
    }
}

fn parse_num<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse::<T>()
        .map_err(|_| Error::InvalidParameter(format!("cannot parse `{s}` for {key}")))
}

/// Lifetime in µs to a rate in 1/µs; `inf` gives zero.
fn lifetime_to_rate(key: &str, s: &str) -> Result<f64> {
    let t: f64 = parse_num(key, s)?;
    if t.is_nan() || t <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "{key} must be a positive lifetime, got {t}"
        )));
    }
    Ok(1.0 / t)
}

/// Incrementally builds an [`ExperimentConfig`] from keyed values.
#[derive(Clone, Debug, Default)]
pub struct ConfigBuilder {
    config: ExperimentConfig,
    mu_explicit: bool,
    format_explicit: bool,
}

/// Keys understood by [`ConfigBuilder::set`].
pub const CONFIG_KEYS: &[&str] = &[
    "n_steps",
    "theta_rad",
    "phi_rad",
    "omega_over_2pi_MHz",
    "g_over_2pi_MHz",
    "mu_over_2pi_MHz",
    "coin_duration_us",
    "cavity_over_2pi_MHz",
    "eg_over_2pi_MHz",
    "fe_over_2pi_MHz",
    "coin0",
    "decoherence",
    "scale",
    "t_cavity_us",
    "t_ge_us",
    "t_ef_us",
    "t_gf_us",
    "t_e_phi_us",
    "t_f_phi_us",
    "method",
    "dt_max_us",
    "min_steps_per_segment",
    "richardson",
    "tolerance",
    "max_halvings",
    "renormalize",
    "output",
    "format",
    "allow_full_space",
];

impl ConfigBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_config(config: ExperimentConfig) -> Self {
        ConfigBuilder {
            config,
            mu_explicit: true,
            format_explicit: true,
        }
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.config;
        let d = &mut c.device;
        match key {
            "n_steps" => d.n_steps = parse_num(key, value)?,
            "theta_rad" => d.theta = parse_angle(value)?,
            "phi_rad" => d.phi = parse_angle(value)?,
            "omega_over_2pi_MHz" => d.omega_rabi = mhz_to_angular(parse_num(key, value)?),
            "g_over_2pi_MHz" => {
                d.g = mhz_to_angular(parse_num(key, value)?);
                if !self.mu_explicit {
                    d.mu = d.g;
                }
            }
            "mu_over_2pi_MHz" => {
                d.mu = mhz_to_angular(parse_num(key, value)?);
                self.mu_explicit = true;
            }
            "coin_duration_us" => d.coin_duration = Some(parse_num(key, value)?),
            "cavity_over_2pi_MHz" => d.omega_c = Some(mhz_to_angular(parse_num(key, value)?)),
            "eg_over_2pi_MHz" => d.omega_eg = Some(mhz_to_angular(parse_num(key, value)?)),
            "fe_over_2pi_MHz" => d.omega_fe = Some(mhz_to_angular(parse_num(key, value)?)),
            "coin0" => c.coin0 = value.parse()?,
            "decoherence" => {
                let scale = c.rates.scale;
                c.rates = match value.trim() {
                    "t0" | "T0" => DecoherenceRates::t0(),
                    "none" | "zero" => DecoherenceRates::zero(),
                    other => return Err(Error::InvalidParameter(format!("unknown decoherence preset `{other}`"))),
                }
                .with_scale(scale);
            }
            "scale" => c.rates.scale = parse_num(key, value)?,
            "t_cavity_us" => c.rates.kappa = lifetime_to_rate(key, value)?,
            "t_ge_us" => c.rates.gamma_ge = lifetime_to_rate(key, value)?,
            "t_ef_us" => c.rates.gamma_ef = lifetime_to_rate(key, value)?,
            "t_gf_us" => c.rates.gamma_gf = lifetime_to_rate(key, value)?,
            "t_e_phi_us" => c.rates.gamma_e_phi = lifetime_to_rate(key, value)?,
            "t_f_phi_us" => c.rates.gamma_f_phi = lifetime_to_rate(key, value)?,
            "method" => {
                c.integrator.method = match value.trim() {
                    "rk4" => Method::Rk4,
                    "expm" | "superoperator-expm" => Method::SuperoperatorExpm,
                    other => return Err(Error::InvalidParameter(format!("unknown method `{other}`"))),
                }
            }
            "dt_max_us" => c.integrator.dt_max = parse_num(key, value)?,
            "min_steps_per_segment" => c.integrator.min_steps_per_segment = parse_num(key, value)?,
            "richardson" => c.integrator.richardson_check = parse_bool(value)?,
            "tolerance" => c.integrator.tolerance = parse_num(key, value)?,
            "max_halvings" => c.integrator.max_halvings = parse_num(key, value)?,
            "renormalize" => c.renormalize = parse_bool(value)?,
            "output" => {
                let path = PathBuf::from(value.trim());
                let format = match (&c.output, self.format_explicit) {
                    (Some(o), true) => o.format,
                    _ => match path.extension().and_then(|e| e.to_str()) {
                        Some("json") => OutputFormat::Json,
                        _ => OutputFormat::Csv,
                    },
                };
                c.output = Some(OutputSpec { path, format });
            }
            "format" => {
                let format: OutputFormat = value.parse()?;
                self.format_explicit = true;
                match &mut c.output {
                    Some(o) => o.format = format,
                    None => {
                        c.output = Some(OutputSpec {
                            path: PathBuf::new(),
                            format,
                        })
                    }
                }
            }
            "allow_full_space" => c.allow_full_space = parse_bool(value)?,
            other => {
                return Err(Error::InvalidParameter(format!("unknown configuration key `{other}`")));
            }
        }
        Ok(())
    }

    /// Applies every setting of a config text; errors carry the line number.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(key.trim(), value.trim()).map_err(|e| Error::Config {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn build(self) -> Result<ExperimentConfig> {
        let mut config = self.config;
        if let Some(o) = &config.output {
            if o.path.as_os_str().is_empty() {
                config.output = None;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut b = ConfigBuilder::new();
        b.apply_text(text)?;
        b.build()
    }
}

impl fmt::Display for ExperimentConfig {
    /// Renders the config in the keyed text format.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let d = &self.device;
        let r = &self.rates;
        let life = |rate: f64| if rate == 0.0 { f64::INFINITY } else { 1.0 / rate };
        writeln!(f, "n_steps = {}", d.n_steps)?;
        writeln!(f, "theta_rad = {}", d.theta)?;
        writeln!(f, "phi_rad = {}", d.phi)?;
        writeln!(f, "omega_over_2pi_MHz = {}", angular_to_mhz(d.omega_rabi))?;
        writeln!(f, "g_over_2pi_MHz = {}", angular_to_mhz(d.g))?;
        writeln!(f, "mu_over_2pi_MHz = {}", angular_to_mhz(d.mu))?;
        if let Some(t) = d.coin_duration {
            writeln!(f, "coin_duration_us = {t}")?;
        }
        writeln!(f, "coin0 = {}", self.coin0)?;
        writeln!(f, "scale = {}", r.scale)?;
        writeln!(f, "t_cavity_us = {}", life(r.kappa))?;
        writeln!(f, "t_ge_us = {}", life(r.gamma_ge))?;
        writeln!(f, "t_ef_us = {}", life(r.gamma_ef))?;
        writeln!(f, "t_gf_us = {}", life(r.gamma_gf))?;
        writeln!(f, "t_e_phi_us = {}", life(r.gamma_e_phi))?;
        writeln!(f, "t_f_phi_us = {}", life(r.gamma_f_phi))?;
        let method = match self.integrator.method {
            Method::Rk4 => "rk4",
            Method::SuperoperatorExpm => "expm",
        };
        writeln!(f, "method = {method}")?;
        writeln!(f, "dt_max_us = {}", self.integrator.dt_max)?;
        writeln!(f, "min_steps_per_segment = {}", self.integrator.min_steps_per_segment)?;
        writeln!(f, "richardson = {}", self.integrator.richardson_check)?;
        writeln!(f, "tolerance = {}", self.integrator.tolerance)?;
        writeln!(f, "max_halvings = {}", self.integrator.max_halvings)?;
        writeln!(f, "renormalize = {}", self.renormalize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi/4").unwrap(), PI / 4.0);
        assert_eq!(parse_angle("-pi/2").unwrap(), -PI / 2.0);
        assert_eq!(parse_angle("2pi").unwrap(), 2.0 * PI);
        assert_eq!(parse_angle("0.3").unwrap(), 0.3);
        assert!(parse_angle("tau").is_err());
    }

    #[test]
    fn parses_keyed_text_with_unit_conversion() {
        let cfg: ExperimentConfig = "
            # twenty steps, fast lifetimes
            n_steps = 20
            g_over_2pi_MHz = 40   # mu follows
            omega_over_2pi_MHz = 150
            scale = 0.2
            coin0 = one
            t_ge_us = inf
        "
        .parse()
        .unwrap();
        assert_eq!(cfg.device.n_steps, 20);
        assert!((cfg.device.g - 2.0 * PI * 40.0).abs() < 1e-12);
        assert_eq!(cfg.device.mu, cfg.device.g);
        assert!((cfg.device.omega_rabi - 2.0 * PI * 150.0).abs() < 1e-12);
        assert_eq!(cfg.rates.scale, 0.2);
        assert_eq!(cfg.rates.gamma_ge, 0.0);
        assert_eq!(cfg.rates.gamma_e_phi, 0.2);
        assert_eq!(cfg.coin0, CoinState::one());
    }

    #[test]
    fn explicit_mu_is_not_overridden_by_g() {
        let cfg: ExperimentConfig = "mu_over_2pi_MHz = 30\ng_over_2pi_MHz = 60".parse().unwrap();
        assert!((cfg.device.mu - 2.0 * PI * 30.0).abs() < 1e-12);
        assert!((cfg.device.g - 2.0 * PI * 60.0).abs() < 1e-12);
    }

    #[test]
    fn later_settings_override_earlier_ones() {
        let mut b = ConfigBuilder::new();
        b.apply_text("n_steps = 5\ncoin0 = zero").unwrap();
        b.set("n_steps", "7").unwrap();
        let cfg = b.build().unwrap();
        assert_eq!(cfg.device.n_steps, 7);
        assert_eq!(cfg.coin0, CoinState::zero());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = "n_steps = 3\nbogus = 1".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { line: 2, .. }));
        let err = "n_steps 3".parse::<ExperimentConfig>().unwrap_err();
        assert!(matches!(err, Error::Config { line: 1, .. }));
        assert!("theta_rad = 2".parse::<ExperimentConfig>().is_err());
        assert!("scale = 0".parse::<ExperimentConfig>().is_err());
        assert!("t_ge_us = -3".parse::<ExperimentConfig>().is_err());
    }

    #[test]
    fn output_format_from_extension_or_key() {
        let cfg: ExperimentConfig = "output = out/run.json".parse().unwrap();
        assert_eq!(cfg.output.unwrap().format, OutputFormat::Json);
        let cfg: ExperimentConfig = "format = json\noutput = out/run.txt".parse().unwrap();
        assert_eq!(cfg.output.unwrap().format, OutputFormat::Json);
        let cfg: ExperimentConfig = "format = csv".parse().unwrap();
        assert!(cfg.output.is_none());
    }

    #[test]
    fn display_round_trips() {
        let mut cfg = ExperimentConfig::default();
        cfg.device.n_steps = 4;
        cfg.rates.scale = 5.0;
        cfg.coin0 = CoinState::zero();
        cfg.renormalize = true;
        let back: ExperimentConfig = cfg.to_string().parse().unwrap();
        assert_eq!(back.device.n_steps, 4);
        assert_eq!(back.coin0, cfg.coin0);
        assert_eq!(back.rates.scale, 5.0);
        assert!(back.renormalize);
        assert!((back.device.g - cfg.device.g).abs() < 1e-9);
        assert!((back.rates.gamma_f_phi - cfg.rates.gamma_f_phi).abs() < 1e-15);
    }

    #[test]
    fn every_documented_key_is_accepted() {
        let sample = |k: &str| match k {
            "coin0" => "plus-i",
            "decoherence" => "t0",
            "method" => "rk4",
            "richardson" | "renormalize" | "allow_full_space" => "false",
            "format" => "csv",
            "output" => "x.csv",
            "n_steps" | "min_steps_per_segment" | "max_halvings" => "3",
            "theta_rad" => "0.5",
            _ => "1",
        };
        for key in CONFIG_KEYS {
            ConfigBuilder::new().set(key, sample(key)).unwrap();
        }
    }
}
