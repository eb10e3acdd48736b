//! Single runs, parameter sweeps and the truncation cross-check.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::report::{Report, RunMetrics};
use crate::error::{Error, Result};
use crate::idealwalk::{run_ideal, Distribution};
use crate::lindblad::{build_collapse_set, evolve_schedule, DensityMatrix, Evolution};
use crate::metrics::{extract_distribution, similarity};
use crate::protocol::build_schedule;
use crate::statespace::{mhz_to_angular, BasisLabel, Level, SpaceMode, StateSpace, DEFAULT_FOCK_CUTOFF};

/// Initial state: qutrit 1 carries the coin (`|0⟩_c = |f⟩`, `|1⟩_c = |e⟩`),
/// everything else in the ground state.
pub fn initial_state(space: &StateSpace, cfg: &ExperimentConfig) -> Result<DensityMatrix> {
    let psi = space.state_vector(&[
        (
            BasisLabel::QutritExc {
                qutrit: 1,
                level: Level::F,
            },
            cfg.coin0.c0,
        ),
        (
            BasisLabel::QutritExc {
                qutrit: 1,
                level: Level::E,
            },
            cfg.coin0.c1,
        ),
    ])?;
    Ok(DensityMatrix::pure(&psi))
}

/// Simulates `cfg` in the given space and returns the evolution together with
/// the extracted walker distribution.
pub fn simulate(
    cfg: &ExperimentConfig,
    space: &StateSpace,
    record_snapshots: bool,
) -> Result<(Evolution, Distribution)> {
    cfg.validate()?;
    let schedule = build_schedule(space, &cfg.device)?;
    let collapses = build_collapse_set(space, &cfg.rates)?;
    let rho0 = initial_state(space, cfg)?;
    let evolution = evolve_schedule(&rho0, &schedule, &collapses, &cfg.integrator, record_snapshots)?;
    let dist = extract_distribution(&evolution.state, space)?;
    Ok((evolution, dist))
}

/// Runs one experiment in the truncated basis and scores it.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    let started = Instant::now();
    let space = StateSpace::truncated(cfg.device.n_steps)?;
    let (evolution, p_me) = simulate(cfg, &space, false)?;
    let p_id = run_ideal(cfg.device.n_steps, cfg.device.theta, cfg.coin0)?;
    let headline = similarity(&p_me, &p_id, cfg.renormalize)?;
    let s_renorm = if p_me.site_total() > 0.0 {
        similarity(&p_me, &p_id, true)?.s
    } else {
        0.0
    };
    let metrics = RunMetrics {
        s: headline.s,
        s_renorm,
        p_me,
        p_id: p_id.p,
        trace_error: evolution.state.trace_error(),
        hermiticity_drift: evolution.max_hermiticity_drift(),
        min_eigenvalue: evolution.state.min_eigenvalue(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    Ok(Report::success(cfg.clone(), metrics))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepAxis {
    /// `g/2π` in MHz; `μ` follows `g`.
    G,
    /// `Ω/2π` in MHz.
    OmegaRabi,
    NSteps,
    /// Lifetime scale factor.
    Scale,
}

impl SweepAxis {
    fn apply(self, cfg: &mut ExperimentConfig, value: f64) {
        match self {
            SweepAxis::G => {
                cfg.device.g = mhz_to_angular(value);
                cfg.device.mu = cfg.device.g;
            }
            SweepAxis::OmegaRabi => cfg.device.omega_rabi = mhz_to_angular(value),
            SweepAxis::NSteps => cfg.device.n_steps = value as usize,
            SweepAxis::Scale => cfg.rates.scale = value,
        }
    }

    fn check(self, values: &[f64]) -> Result<()> {
        if values.is_empty() {
            return Err(Error::InvalidParameter(format!("sweep axis {self} has no values")));
        }
        for &v in values {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "sweep axis {self}: value {v} is not positive"
                )));
            }
            if self == SweepAxis::NSteps && v.fract() != 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "n_steps sweep value {v} is not an integer"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::G => "g",
            SweepAxis::OmegaRabi => "omega_rabi",
            SweepAxis::NSteps => "n_steps",
            SweepAxis::Scale => "scale",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "g" => Ok(SweepAxis::G),
            "omega_rabi" | "omega" => Ok(SweepAxis::OmegaRabi),
            "n_steps" | "n" => Ok(SweepAxis::NSteps),
            "scale" => Ok(SweepAxis::Scale),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis `{other}`"))),
        }
    }
}

/// Parses `a,b,c` or an inclusive range `start:stop:step`.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("cannot parse sweep values `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (start, stop, step) = (nums[0], nums[1], nums[2]);
        if step.is_nan() || step <= 0.0 || stop < start {
            return Err(bad());
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| start + step * i as f64).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// Grid of parameter values; `cross` adds a second, inner axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub cross: Option<(SweepAxis, Vec<f64>)>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, values: Vec<f64>) -> Self {
        SweepSpec {
            axis,
            values,
            cross: None,
        }
    }

    pub fn crossed(mut self, axis: SweepAxis, values: Vec<f64>) -> Self {
        self.cross = Some((axis, values));
        self
    }

    /// Default coupling grid, 10–60 MHz in 5 MHz steps.
    pub fn default_g_grid() -> Self {
        SweepSpec::new(SweepAxis::G, (0..=10).map(|i| 10.0 + 5.0 * i as f64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.axis.check(&self.values)?;
        if let Some((axis, values)) = &self.cross {
            axis.check(values)?;
            if *axis == self.axis {
                return Err(Error::InvalidParameter("cross axis repeats the main axis".into()));
            }
        }
        Ok(())
    }

    /// Configurations of every grid point, main axis outermost.
    pub fn points(&self, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
        let mut out = Vec::new();
        for &v in &self.values {
            let mut cfg = base.clone();
            self.axis.apply(&mut cfg, v);
            match &self.cross {
                None => out.push(cfg),
                Some((axis, values)) => {
                    for &w in values {
                        let mut inner = cfg.clone();
                        axis.apply(&mut inner, w);
                        out.push(inner);
                    }
                }
            }
        }
        out
    }
}

/// Runs every grid point, concurrently, returning reports in grid order.
/// A failing point yields an error row instead of aborting the sweep.
pub fn run_sweep(cfg: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<Report>> {
    sweep.validate()?;
    Ok(sweep
        .points(cfg)
        .into_par_iter()
        .map(|point| run_experiment(&point).unwrap_or_else(|e| Report::failure(point, &e)))
        .collect())
}

/// Outcome of comparing the truncated basis against the full tensor space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationCheck {
    pub n_steps: usize,
    pub full_dim: usize,
    pub truncated_dim: usize,
    pub p_truncated: Distribution,
    pub p_full: Distribution,
    /// Largest per-site deviation between the two walker distributions.
    pub max_distribution_deviation: f64,
    /// Largest deviation between residual populations.
    pub max_residual_deviation: f64,
    pub s_truncated: f64,
    pub s_full: f64,
    pub s_deviation: f64,
    /// Population the full-space run puts on states with two or more excitations.
    pub multi_excitation_population: f64,
}

/// Runs `cfg` in both bases and compares the results. Limited to two steps
/// unless `allow_full_space` is set.
pub fn validate_truncation(cfg: &ExperimentConfig) -> Result<TruncationCheck> {
    let n = cfg.device.n_steps;
    let mode = SpaceMode::Full {
        fock_cutoff: DEFAULT_FOCK_CUTOFF,
    };
    let full_space = if cfg.allow_full_space {
        StateSpace::build_unguarded(n, mode)?
    } else if n <= 2 {
        StateSpace::build(n, mode)?
    } else {
        return Err(Error::ResourceGuard(format!(
            "truncation check at n_steps = {n} needs allow_full_space"
        )));
    };
    let truncated_space = StateSpace::truncated(n)?;

    let (_, p_truncated) = simulate(cfg, &truncated_space, false)?;
    let (full_evolution, p_full) = simulate(cfg, &full_space, false)?;
    let p_id = run_ideal(n, cfg.device.theta, cfg.coin0)?;
    let s_truncated = similarity(&p_truncated, &p_id, cfg.renormalize)?.s;
    let s_full = similarity(&p_full, &p_id, cfg.renormalize)?.s;

    let max_distribution_deviation = p_truncated
        .p
        .iter()
        .zip(&p_full.p)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_residual_deviation = (p_truncated.residual_vacuum - p_full.residual_vacuum)
        .abs()
        .max((p_truncated.residual_cavity - p_full.residual_cavity).abs());
    let multi_excitation_population = (0..full_space.dim())
        .filter(|&i| full_space.configuration(i).excitations() >= 2)
        .map(|i| full_evolution.state.population(i).abs())
        .sum();

    Ok(TruncationCheck {
        n_steps: n,
        full_dim: full_space.dim(),
        truncated_dim: truncated_space.dim(),
        p_truncated,
        p_full,
        max_distribution_deviation,
        max_residual_deviation,
        s_truncated,
        s_full,
        s_deviation: (s_truncated - s_full).abs(),
        multi_excitation_population,
    })
}
