//! Master-equation evolution through a piecewise-constant schedule.
//!
//! The generator is
//!
//! ```text
//! dρ/dt = -i[H, ρ] + Σ_k γ_k (Λ_k ρ Λ_k† − ½ Λ_k†Λ_k ρ − ½ ρ Λ_k†Λ_k)
//! ```
//!
//! with rates kept as prefactors and the collapse operators `Λ_k` unscaled.
//! Two integrators are provided: fixed-step RK4 with a step-doubling check,
//! and the exact exponential of the superoperator for small spaces.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};
use crate::protocol::{Schedule, Segment};
use crate::statespace::{Level, Operator, StateSpace};

/// Largest Hilbert-space dimension accepted by the superoperator backend.
pub const SUPEROPERATOR_MAX_DIM: usize = 40;

/// Density matrix of the chain.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: Array2<C64>,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(DensityMatrix { matrix })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(psi: &Array1<C64>) -> Self {
        let n = psi.len();
        DensityMatrix {
            matrix: Array2::from_shape_fn((n, n), |(i, j)| psi[i] * psi[j].conj()),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.matrix
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `|tr ρ − 1|`.
    pub fn trace_error(&self) -> f64 {
        (self.trace() - C64::new(1.0, 0.0)).norm()
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        linalg::min_hermitian_eigenvalue(&self.matrix)
    }

    pub fn population(&self, idx: usize) -> f64 {
        self.matrix[[idx, idx]].re
    }

    /// `ρ ← (ρ + ρ†)/2`.
    pub fn symmetrize(&mut self) {
        let n = self.dim();
        for i in 0..n {
            self.matrix[[i, i]].im = 0.0;
            for j in i + 1..n {
                let avg = (self.matrix[[i, j]] + self.matrix[[j, i]].conj()) * 0.5;
                self.matrix[[i, j]] = avg;
                self.matrix[[j, i]] = avg.conj();
            }
        }
    }
}

/// Decay and dephasing rates in 1/µs, before lifetime scaling.
///
/// `scale` multiplies every lifetime, so the effective rates are the stored
/// rates divided by `scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoherenceRates {
    pub kappa: f64,
    pub gamma_ef: f64,
    pub gamma_gf: f64,
    pub gamma_ge: f64,
    pub gamma_e_phi: f64,
    pub gamma_f_phi: f64,
    pub scale: f64,
}

impl DecoherenceRates {
    /// Reference lifetimes: 10 µs cavity decay and qutrit relaxation on every
    /// path, 5 µs dephasing of `e` and `f`.
    pub fn t0() -> Self {
        DecoherenceRates {
            kappa: 1.0 / 10.0,
            gamma_ef: 1.0 / 10.0,
            gamma_gf: 1.0 / 10.0,
            gamma_ge: 1.0 / 10.0,
            gamma_e_phi: 1.0 / 5.0,
            gamma_f_phi: 1.0 / 5.0,
            scale: 1.0,
        }
    }

    pub fn zero() -> Self {
        DecoherenceRates {
            kappa: 0.0,
            gamma_ef: 0.0,
            gamma_gf: 0.0,
            gamma_ge: 0.0,
            gamma_e_phi: 0.0,
            gamma_f_phi: 0.0,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.named_rates() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "rate {name} must be non-negative, got {v}"
                )));
            }
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }

    fn named_rates(&self) -> [(&'static str, f64); 6] {
        [
            ("kappa", self.kappa),
            ("gamma_ef", self.gamma_ef),
            ("gamma_gf", self.gamma_gf),
            ("gamma_ge", self.gamma_ge),
            ("gamma_e_phi", self.gamma_e_phi),
            ("gamma_f_phi", self.gamma_f_phi),
        ]
    }

    pub fn is_zero(&self) -> bool {
        self.named_rates().iter().all(|(_, v)| *v == 0.0)
    }
}

/// Physical origin of a collapse operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    CavityDecay { cavity: usize },
    RelaxFToE { qutrit: usize },
    RelaxFToG { qutrit: usize },
    RelaxEToG { qutrit: usize },
    DephaseE { qutrit: usize },
    DephaseF { qutrit: usize },
}

#[derive(Clone, Debug)]
pub struct Collapse {
    pub channel: Channel,
    /// Effective rate in 1/µs, lifetime scaling already applied.
    pub rate: f64,
    pub operator: Operator,
}

#[derive(Clone, Debug, Default)]
pub struct CollapseSet {
    pub entries: Vec<Collapse>,
}

impl CollapseSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn single(channel: Channel, rate: f64, operator: Operator) -> Self {
        CollapseSet {
            entries: vec![Collapse {
                channel,
                rate,
                operator,
            }],
        }
    }
}

/// One collapse operator per channel and subsystem; channels with zero rate
/// are left out.
pub fn build_collapse_set(space: &StateSpace, rates: &DecoherenceRates) -> Result<CollapseSet> {
    rates.validate()?;
    let s = rates.scale;
    let mut entries = Vec::new();
    let mut push = |channel: Channel, rate: f64, operator: Operator| {
        if rate > 0.0 {
            entries.push(Collapse {
                channel,
                rate: rate / s,
                operator,
            });
        }
    };
    for j in 1..=space.n_cavities() {
        push(
            Channel::CavityDecay { cavity: j },
            rates.kappa,
            space.cavity_annihilation(j)?,
        );
    }
    for j in 1..=space.n_qutrits() {
        let t = |from, to| space.qutrit_transition(j, from, to);
        push(Channel::RelaxFToE { qutrit: j }, rates.gamma_ef, t(Level::F, Level::E)?);
        push(Channel::RelaxFToG { qutrit: j }, rates.gamma_gf, t(Level::F, Level::G)?);
        push(Channel::RelaxEToG { qutrit: j }, rates.gamma_ge, t(Level::E, Level::G)?);
        push(
            Channel::DephaseE { qutrit: j },
            rates.gamma_e_phi,
            t(Level::E, Level::E)?,
        );
        push(
            Channel::DephaseF { qutrit: j },
            rates.gamma_f_phi,
            t(Level::F, Level::F)?,
        );
    }
    Ok(CollapseSet { entries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// Fixed-step classical Runge–Kutta.
    Rk4,
    /// Exponential of the dense superoperator over each segment.
    SuperoperatorExpm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Upper bound on the RK4 step, µs.
    pub dt_max: f64,
    /// Lower bound on the number of RK4 steps per segment.
    pub min_steps_per_segment: usize,
    /// Re-run every segment at half the step and compare.
    pub richardson_check: bool,
    /// Largest accepted elementwise deviation between step sizes.
    pub tolerance: f64,
    /// Step halvings allowed before giving up.
    pub max_halvings: u32,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4,
            dt_max: 1e-3,
            min_steps_per_segment: 1000,
            richardson_check: true,
            tolerance: 1e-9,
            max_halvings: 6,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_max.is_finite() && self.dt_max > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dt_max must be positive, got {}",
                self.dt_max
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.min_steps_per_segment == 0 {
            return Err(Error::InvalidParameter(
                "min_steps_per_segment must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// RK4 step count for a segment of length `duration`.
    pub fn steps_for(&self, duration: f64) -> usize {
        let by_dt = (duration / self.dt_max).ceil() as usize;
        by_dt.max(self.min_steps_per_segment)
    }
}

/// `dρ/dt` evaluated directly from dense products.
pub fn liouvillian_apply(h: &Operator, collapses: &CollapseSet, rho: &Array2<C64>) -> Result<Array2<C64>> {
    let d = h.dim();
    if rho.nrows() != d || rho.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: rho.nrows(),
        });
    }
    let hm = h.matrix();
    let minus_i = C64::new(0.0, -1.0);
    let mut out = (hm.dot(rho) - rho.dot(hm)).mapv(|z| z * minus_i);
    for c in &collapses.entries {
        c.operator.check_dim(d)?;
        let l = c.operator.matrix();
        let ld = linalg::dagger(l);
        let ldl = ld.dot(l);
        let term = l.dot(rho).dot(&ld) - (ldl.dot(rho) + rho.dot(&ldl)).mapv(|z| z * 0.5);
        out.scaled_add(C64::new(c.rate, 0.0), &term);
    }
    Ok(out)
}

type Entries = Vec<(usize, usize, C64)>;

/// Sparse compiled form of the generator used by the integrators:
/// `dρ/dt = K ρ + ρ K† + Σ_k γ_k Λ_k ρ Λ_k†` with `K = −iH − ½ Σ_k γ_k Λ_k†Λ_k`.
#[derive(Clone, Debug)]
pub struct Generator {
    dim: usize,
    k: Entries,
    jumps: Vec<(f64, Entries)>,
}

impl Generator {
    pub fn new(h: &Operator, collapses: &CollapseSet) -> Result<Self> {
        let d = h.dim();
        let mut k = h.matrix().mapv(|z| z * C64::new(0.0, -1.0));
        let mut jumps = Vec::with_capacity(collapses.len());
        for c in &collapses.entries {
            c.operator.check_dim(d)?;
            let l = c.operator.matrix();
            let ldl = linalg::dagger(l).dot(l);
            k.scaled_add(C64::new(-0.5 * c.rate, 0.0), &ldl);
            jumps.push((c.rate, c.operator.nonzeros()));
        }
        let k = Operator::from_matrix(k)?.nonzeros();
        Ok(Generator { dim: d, k, jumps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes `L(ρ)` into `out`; both are row-major `dim × dim` buffers.
    pub fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        out.fill(C64::new(0.0, 0.0));
        for &(i, k, v) in &self.k {
            // (Kρ)[i, :] += v ρ[k, :]
            let src = &rho[k * d..(k + 1) * d];
            let dst = &mut out[i * d..(i + 1) * d];
            for (o, r) in dst.iter_mut().zip(src) {
                *o += v * r;
            }
            // (ρK†)[:, i] += ρ[:, k] conj(v)
            let vc = v.conj();
            for r in 0..d {
                out[r * d + i] += rho[r * d + k] * vc;
            }
        }
        for (rate, entries) in &self.jumps {
            for &(a, b, v) in entries {
                let rv = v * *rate;
                for &(c, e, w) in entries {
                    out[a * d + c] += rv * w.conj() * rho[b * d + e];
                }
            }
        }
    }

    /// Dense `d² × d²` superoperator acting on row-major `vec(ρ)`.
    pub fn superoperator(&self) -> Array2<C64> {
        let d2 = self.dim * self.dim;
        let mut s = Array2::<C64>::zeros((d2, d2));
        let mut basis = vec![C64::new(0.0, 0.0); d2];
        let mut out = vec![C64::new(0.0, 0.0); d2];
        for col in 0..d2 {
            basis[col] = C64::new(1.0, 0.0);
            self.apply(&basis, &mut out);
            basis[col] = C64::new(0.0, 0.0);
            for (row, v) in out.iter().enumerate() {
                s[[row, col]] = *v;
            }
        }
        s
    }
}

struct Rk4Workspace {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Rk4Workspace {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }
}

fn rk4_integrate(gen: &Generator, rho: &[C64], duration: f64, steps: usize) -> Vec<C64> {
    let h = duration / steps as f64;
    let mut y = rho.to_vec();
    let mut ws = Rk4Workspace::new(y.len());
    for _ in 0..steps {
        gen.apply(&y, &mut ws.k1);
        for ((t, y), k) in ws.tmp.iter_mut().zip(&y).zip(&ws.k1) {
            *t = y + k * (0.5 * h);
        }
        gen.apply(&ws.tmp, &mut ws.k2);
        for ((t, y), k) in ws.tmp.iter_mut().zip(&y).zip(&ws.k2) {
            *t = y + k * (0.5 * h);
        }
        gen.apply(&ws.tmp, &mut ws.k3);
        for ((t, y), k) in ws.tmp.iter_mut().zip(&y).zip(&ws.k3) {
            *t = y + k * h;
        }
        gen.apply(&ws.tmp, &mut ws.k4);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += (ws.k1[i] + (ws.k2[i] + ws.k3[i]) * 2.0 + ws.k4[i]) * (h / 6.0);
        }
    }
    y
}

fn max_abs_diff_slices(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Per-segment integration statistics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    /// RK4 steps in the accepted integration (0 for the exponential backend).
    pub steps: usize,
    /// Deviation measured by the step-doubling check, if run.
    pub richardson_deviation: Option<f64>,
    /// `‖ρ − ρ†‖_max` before re-symmetrization.
    pub hermiticity_drift: f64,
}

fn to_flat(rho: &DensityMatrix) -> Vec<C64> {
    rho.matrix.iter().copied().collect()
}

fn from_flat(d: usize, v: Vec<C64>) -> DensityMatrix {
    DensityMatrix {
        matrix: Array2::from_shape_vec((d, d), v).expect("buffer has d² entries"),
    }
}

fn finish(d: usize, flat: Vec<C64>, mut stats: SegmentStats) -> (DensityMatrix, SegmentStats) {
    let mut rho = from_flat(d, flat);
    stats.hermiticity_drift = rho.hermiticity_error();
    rho.symmetrize();
    (rho, stats)
}

fn rk4_segment(
    rho: &DensityMatrix,
    gen: &Generator,
    duration: f64,
    cfg: &IntegratorConfig,
) -> Result<(DensityMatrix, SegmentStats)> {
    let d = rho.dim();
    let start = to_flat(rho);
    let mut steps = cfg.steps_for(duration);
    let mut coarse = rk4_integrate(gen, &start, duration, steps);
    if !cfg.richardson_check {
        let stats = SegmentStats {
            steps,
            ..Default::default()
        };
        return Ok(finish(d, coarse, stats));
    }
    let mut deviation = f64::INFINITY;
    for _ in 0..=cfg.max_halvings {
        let fine = rk4_integrate(gen, &start, duration, 2 * steps);
        deviation = max_abs_diff_slices(&coarse, &fine);
        if deviation <= cfg.tolerance {
            let stats = SegmentStats {
                steps: 2 * steps,
                richardson_deviation: Some(deviation),
                hermiticity_drift: 0.0,
            };
            return Ok(finish(d, fine, stats));
        }
        coarse = fine;
        steps *= 2;
    }
    Err(Error::NonConvergence {
        halvings: cfg.max_halvings,
        deviation,
    })
}

fn superoperator_propagator(gen: &Generator, duration: f64) -> Result<Array2<C64>> {
    if gen.dim() > SUPEROPERATOR_MAX_DIM {
        return Err(Error::ResourceGuard(format!(
            "superoperator backend limited to dimension {SUPEROPERATOR_MAX_DIM}, got {}",
            gen.dim()
        )));
    }
    Ok(linalg::expm(&gen.superoperator().mapv(|z| z * duration)))
}

fn apply_propagator(rho: &DensityMatrix, propagator: &Array2<C64>) -> (DensityMatrix, SegmentStats) {
    let v = Array1::from(to_flat(rho));
    let out = propagator.dot(&v);
    finish(rho.dim(), out.to_vec(), SegmentStats::default())
}

fn check_segment(rho: &DensityMatrix, seg: &Segment, cfg: &IntegratorConfig) -> Result<()> {
    cfg.validate()?;
    seg.hamiltonian.check_dim(rho.dim())?;
    if !(seg.duration.is_finite() && seg.duration >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "segment duration must be non-negative, got {}",
            seg.duration
        )));
    }
    Ok(())
}

/// Evolves `rho` through one constant-Hamiltonian segment.
pub fn evolve_segment(
    rho: &DensityMatrix,
    seg: &Segment,
    collapses: &CollapseSet,
    cfg: &IntegratorConfig,
) -> Result<DensityMatrix> {
    evolve_segment_with_stats(rho, seg, collapses, cfg).map(|(r, _)| r)
}

/// Like [`evolve_segment`], also returning integration statistics.
pub fn evolve_segment_with_stats(
    rho: &DensityMatrix,
    seg: &Segment,
    collapses: &CollapseSet,
    cfg: &IntegratorConfig,
) -> Result<(DensityMatrix, SegmentStats)> {
    check_segment(rho, seg, cfg)?;
    let gen = Generator::new(&seg.hamiltonian, collapses)?;
    match cfg.method {
        Method::Rk4 => rk4_segment(rho, &gen, seg.duration, cfg),
        Method::SuperoperatorExpm => {
            let p = superoperator_propagator(&gen, seg.duration)?;
            Ok(apply_propagator(rho, &p))
        }
    }
}

/// Compiled generator and, for the exponential backend, its propagator.
type CompiledSegment = (Generator, Option<Array2<C64>>);

/// Result of evolving through a whole schedule.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub state: DensityMatrix,
    /// State after each completed walk step, when requested.
    pub snapshots: Vec<DensityMatrix>,
    pub segment_stats: Vec<SegmentStats>,
}

impl Evolution {
    pub fn max_hermiticity_drift(&self) -> f64 {
        self.segment_stats
            .iter()
            .map(|s| s.hermiticity_drift)
            .fold(0.0, f64::max)
    }
}

/// Evolves `rho0` through every segment of `schedule` in order.
///
/// With `record_snapshots`, the state after each completed coin/load/unload
/// triple is kept.
pub fn evolve_schedule(
    rho0: &DensityMatrix,
    schedule: &Schedule,
    collapses: &CollapseSet,
    cfg: &IntegratorConfig,
    record_snapshots: bool,
) -> Result<Evolution> {
    cfg.validate()?;
    let mut rho = rho0.clone();
    let mut snapshots = Vec::new();
    let mut segment_stats = Vec::with_capacity(schedule.segments.len());
    // Segments share Hamiltonians across steps; compile each distinct one once.
    let mut generators: HashMap<(*const Operator, u64), CompiledSegment> = HashMap::new();

    for (i, seg) in schedule.segments.iter().enumerate() {
        check_segment(&rho, seg, cfg)?;
        let key = (Arc::as_ptr(&seg.hamiltonian), seg.duration.to_bits());
        let (gen, prop) = match generators.entry(key) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => {
                let gen = Generator::new(&seg.hamiltonian, collapses)?;
                let prop = match cfg.method {
                    Method::Rk4 => None,
                    Method::SuperoperatorExpm => Some(superoperator_propagator(&gen, seg.duration)?),
                };
                e.insert((gen, prop))
            }
        };
        let (next, stats) = match prop {
            Some(p) => apply_propagator(&rho, p),
            None => rk4_segment(&rho, gen, seg.duration, cfg)?,
        };
        rho = next;
        segment_stats.push(stats);

        let completes_step = schedule.segments.get(i + 1).is_none_or(|next| next.step != seg.step);
        if record_snapshots && completes_step {
            snapshots.push(rho.clone());
        }
    }
    Ok(Evolution {
        state: rho,
        snapshots,
        segment_stats,
    })
}

/// Writes snapshots as consecutive records of a little-endian `u64` dimension
/// followed by `dim²` row-major `(re, im)` pairs of little-endian `f64`.
pub fn write_snapshots(path: &Path, snapshots: &[DensityMatrix]) -> Result<()> {
    let mut buf = Vec::new();
    for rho in snapshots {
        buf.extend_from_slice(&(rho.dim() as u64).to_le_bytes());
        for z in rho.matrix.iter() {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

/// Reads the layout produced by [`write_snapshots`].
pub fn read_snapshots(path: &Path) -> Result<Vec<DensityMatrix>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let truncated = || Error::InvalidParameter(format!("snapshot file {} is truncated", path.display()));
    let mut out = Vec::new();
    let mut pos = 0;
    let take8 = |pos: &mut usize| -> Result<[u8; 8]> {
        let chunk = bytes.get(*pos..*pos + 8).ok_or_else(truncated)?;
        *pos += 8;
        Ok(chunk.try_into().expect("eight bytes"))
    };
    while pos < bytes.len() {
        let d = u64::from_le_bytes(take8(&mut pos)?) as usize;
        let mut data = Vec::with_capacity(d * d);
        for _ in 0..d * d {
            let re = f64::from_le_bytes(take8(&mut pos)?);
            let im = f64::from_le_bytes(take8(&mut pos)?);
            data.push(C64::new(re, im));
        }
        out.push(from_flat(d, data));
    }
    Ok(out)
}
