//! Piecewise-constant Hamiltonian schedule of the walk.
//!
//! Each walk step is three constant-Hamiltonian segments, all written in the
//! interaction picture:
//!
//! 1. coin toss: a resonant `e ↔ f` pulse on every qutrit for `θ / Ω`;
//! 2. every qutrit `j ≤ N` swaps its `e` excitation into cavity `j` (`π / 2g`);
//! 3. every cavity `j` swaps its photon into qutrit `j + 1` (`π / 2μ`).
//!
//! Segments 2 and 3 together move `e` one site to the right with phase `-1`
//! and leave `f` in place, which with the coin pulse realizes one step of the
//! stay/step-right walk.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::statespace::{DeviceParams, Level, Operator, StateSpace};

/// Which part of a walk step a segment implements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SegmentKind {
    /// Coin pulse on every qutrit.
    CoinToss,
    /// Qutrit `j` to cavity `j` swap.
    LoadCavity,
    /// Cavity `j` to qutrit `j + 1` swap.
    UnloadCavity,
}

#[derive(Clone, Debug)]
pub struct Segment {
    pub hamiltonian: Arc<Operator>,
    /// Duration in µs.
    pub duration: f64,
    pub kind: SegmentKind,
    /// Walk step this segment belongs to, 1-based.
    pub step: usize,
}

#[derive(Clone, Debug)]
pub struct Schedule {
    pub segments: Vec<Segment>,
    pub device: DeviceParams,
}

impl Schedule {
    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Schedule with no segments; evolving through it is the identity.
    pub fn empty(device: DeviceParams) -> Self {
        Schedule {
            segments: Vec::new(),
            device,
        }
    }
}

fn checked_rate(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

/// Coin-pulse Hamiltonian `Σ_j Ω (e^{iφ} |e⟩_j⟨f| + e^{-iφ} |f⟩_j⟨e|)`.
pub fn h_coin(space: &StateSpace, omega_rabi: f64, phi: f64) -> Result<Operator> {
    checked_rate("omega_rabi", omega_rabi)?;
    let phase = Complex64::from_polar(omega_rabi, phi);
    let mut h = Operator::zeros(space.dim());
    for j in 1..=space.n_qutrits() {
        let raise = space.qutrit_transition(j, Level::F, Level::E)?;
        h = h.plus(&raise.scaled(phase)).plus(&raise.dagger().scaled(phase.conj()));
    }
    Ok(h)
}

/// Qutrit `j` to cavity `j` exchange, `Σ_j g (a_j |e⟩_j⟨g| + h.c.)`, `j = 1..=N`.
pub fn h_load(space: &StateSpace, g: f64) -> Result<Operator> {
    checked_rate("g", g)?;
    exchange_hamiltonian(space, g, 0)
}

/// Cavity `j` to qutrit `j + 1` exchange, `Σ_j μ (a_j |e⟩_{j+1}⟨g| + h.c.)`.
pub fn h_unload(space: &StateSpace, mu: f64) -> Result<Operator> {
    checked_rate("mu", mu)?;
    exchange_hamiltonian(space, mu, 1)
}

fn exchange_hamiltonian(space: &StateSpace, coupling: f64, qutrit_offset: usize) -> Result<Operator> {
    let mut h = Operator::zeros(space.dim());
    for j in 1..=space.n_cavities() {
        let absorb = space.photon_absorption(j + qutrit_offset, j)?;
        h = h.plus(&absorb).plus(&absorb.dagger());
    }
    Ok(h.scaled(C64::new(coupling, 0.0)))
}

/// Builds the `3N` segments of an `N`-step walk.
pub fn build_schedule(space: &StateSpace, device: &DeviceParams) -> Result<Schedule> {
    device.validate()?;
    if device.n_steps != space.n_steps() {
        return Err(Error::InvalidParameter(format!(
            "device has n_steps = {} but the state space was built for {}",
            device.n_steps,
            space.n_steps()
        )));
    }
    let coin = Arc::new(h_coin(space, device.omega_rabi, device.phi)?);
    let load = Arc::new(h_load(space, device.g)?);
    let unload = Arc::new(h_unload(space, device.mu)?);
    let parts = [
        (SegmentKind::CoinToss, coin, device.t_coin()),
        (SegmentKind::LoadCavity, load, device.t_swap_in()),
        (SegmentKind::UnloadCavity, unload, device.t_swap_out()),
    ];

    let mut segments = Vec::with_capacity(3 * device.n_steps);
    for step in 1..=device.n_steps {
        for (kind, h, duration) in &parts {
            segments.push(Segment {
                hamiltonian: Arc::clone(h),
                duration: *duration,
                kind: *kind,
                step,
            });
        }
    }
    Ok(Schedule {
        segments,
        device: device.clone(),
    })
}

/// Closed-form single-qutrit coin pulse `exp(-i H t)` in the `(e, f)` basis,
/// as `[[⟨e|U|e⟩, ⟨e|U|f⟩], [⟨f|U|e⟩, ⟨f|U|f⟩]]`.
pub fn coin_pulse_unitary(omega_rabi: f64, phi: f64, t: f64) -> [[C64; 2]; 2] {
    let (s, c) = (omega_rabi * t).sin_cos();
    let minus_i = C64::new(0.0, -1.0);
    [
        [C64::new(c, 0.0), minus_i * C64::from_polar(s, phi)],
        [minus_i * C64::from_polar(s, -phi), C64::new(c, 0.0)],
    ]
}
