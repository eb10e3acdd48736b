//! Basis enumeration and operator construction for the qutrit/cavity chain.
//!
//! The chain has `N + 1` qutrits (levels g, e, f) and `N` cavities. Cavity `j`
//! sits between qutrit `j` and qutrit `j + 1`.
//!
//! Two representations are supported:
//!
//! * **Truncated**: vacuum plus every state with exactly one excitation,
//!   dimension `3N + 3`. Ordering is vacuum first, then qutrit excitations by
//!   `(qutrit, level)` with `e < f`, then cavity photons by cavity index.
//! * **Full**: the tensor product of all qutrits and all cavities (Fock space
//!   truncated at `fock_cutoff` levels). Factors are ordered qutrit `1..=N+1`
//!   then cavity `1..=N`, the first factor being the most significant digit.
//!
//! Every operator is built from its action on product configurations and then
//! restricted to the space, so a truncated operator is exactly the projection
//! of its full-space counterpart.

use std::f64::consts::PI;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, C64};

/// Largest `N` allowed in full mode unless explicitly overridden.
pub const FULL_MODE_MAX_STEPS: usize = 3;

/// Default Fock cutoff for full mode. Photon number never exceeds one under
/// the walk protocol, so two levels are already exact.
pub const DEFAULT_FOCK_CUTOFF: usize = 2;

/// Qutrit energy level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    G,
    E,
    F,
}

impl Level {
    fn digit(self) -> usize {
        match self {
            Level::G => 0,
            Level::E => 1,
            Level::F => 2,
        }
    }

    fn from_digit(d: usize) -> Level {
        match d {
            0 => Level::G,
            1 => Level::E,
            _ => Level::F,
        }
    }
}

/// Label of a truncated-basis state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisLabel {
    /// Every qutrit in `g`, every cavity empty.
    Vacuum,
    /// Qutrit `qutrit` (1-based) in `level` (`E` or `F`), everything else ground.
    QutritExc { qutrit: usize, level: Level },
    /// One photon in cavity `cavity` (1-based), everything else ground.
    CavityPhoton { cavity: usize },
}

/// Which basis a [`StateSpace`] enumerates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceMode {
    Truncated,
    Full { fock_cutoff: usize },
}

/// Occupation of every subsystem in a product basis state.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub qutrits: Vec<Level>,
    pub photons: Vec<usize>,
}

impl Configuration {
    pub fn ground(n_steps: usize) -> Self {
        Configuration {
            qutrits: vec![Level::G; n_steps + 1],
            photons: vec![0; n_steps],
        }
    }

    /// Total excitation number (qutrit levels e and f each count once).
    pub fn excitations(&self) -> usize {
        self.qutrits.iter().filter(|&&l| l != Level::G).count() + self.photons.iter().sum::<usize>()
    }
}

/// Enumerated basis of the chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpace {
    n_steps: usize,
    mode: SpaceMode,
    dim: usize,
}

impl StateSpace {
    /// Builds the basis for an `n_steps`-step walk. Full mode is refused for
    /// `n_steps > FULL_MODE_MAX_STEPS`; see [`StateSpace::build_unguarded`].
    pub fn build(n_steps: usize, mode: SpaceMode) -> Result<Self> {
        Self::build_inner(n_steps, mode, false)
    }

    /// Like [`StateSpace::build`] but without the full-mode size guard.
    pub fn build_unguarded(n_steps: usize, mode: SpaceMode) -> Result<Self> {
        Self::build_inner(n_steps, mode, true)
    }

    pub fn truncated(n_steps: usize) -> Result<Self> {
        Self::build(n_steps, SpaceMode::Truncated)
    }

    fn build_inner(n_steps: usize, mode: SpaceMode, allow_large: bool) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
        }
        let dim = match mode {
            SpaceMode::Truncated => 3 * n_steps + 3,
            SpaceMode::Full { fock_cutoff } => {
                if fock_cutoff < 2 {
                    return Err(Error::InvalidParameter(format!(
                        "fock_cutoff must be at least 2, got {fock_cutoff}"
                    )));
                }
                if n_steps > FULL_MODE_MAX_STEPS && !allow_large {
                    return Err(Error::ResourceGuard(format!(
                        "full tensor space requested for n_steps = {n_steps} (limit {FULL_MODE_MAX_STEPS})"
                    )));
                }
                let q = 3usize.checked_pow((n_steps + 1) as u32);
                let c = fock_cutoff.checked_pow(n_steps as u32);
                q.zip(c)
                    .and_then(|(q, c)| q.checked_mul(c))
                    .ok_or_else(|| Error::ResourceGuard("full tensor space dimension overflows".into()))?
            }
        };
        Ok(StateSpace { n_steps, mode, dim })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_qutrits(&self) -> usize {
        self.n_steps + 1
    }

    pub fn n_cavities(&self) -> usize {
        self.n_steps
    }

    pub fn mode(&self) -> SpaceMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_truncated(&self) -> bool {
        self.mode == SpaceMode::Truncated
    }

    fn check_qutrit(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n_qutrits() {
            return Err(Error::IndexOutOfRange {
                what: "qutrit",
                index: j,
                max: self.n_qutrits(),
            });
        }
        Ok(())
    }

    fn check_cavity(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.n_cavities() {
            return Err(Error::IndexOutOfRange {
                what: "cavity",
                index: j,
                max: self.n_cavities(),
            });
        }
        Ok(())
    }

    /// Product configuration represented by a label.
    pub fn label_configuration(&self, label: BasisLabel) -> Result<Configuration> {
        let mut c = Configuration::ground(self.n_steps);
        match label {
            BasisLabel::Vacuum => {}
            BasisLabel::QutritExc { qutrit, level } => {
                self.check_qutrit(qutrit)?;
                if level == Level::G {
                    return Err(Error::InvalidParameter(
                        "a qutrit excitation label needs level e or f".into(),
                    ));
                }
                c.qutrits[qutrit - 1] = level;
            }
            BasisLabel::CavityPhoton { cavity } => {
                self.check_cavity(cavity)?;
                c.photons[cavity - 1] = 1;
            }
        }
        Ok(c)
    }

    /// Dense index of a label, in either mode.
    pub fn index_of(&self, label: BasisLabel) -> Result<usize> {
        let config = self.label_configuration(label)?;
        Ok(self
            .index_of_configuration(&config)
            .expect("single-excitation labels exist in every mode"))
    }

    /// Dense index of a product configuration, or `None` when the
    /// configuration lies outside this space.
    pub fn index_of_configuration(&self, c: &Configuration) -> Option<usize> {
        match self.mode {
            SpaceMode::Truncated => {
                let mut found = None;
                for (q, &level) in c.qutrits.iter().enumerate() {
                    if level != Level::G {
                        if found.is_some() {
                            return None;
                        }
                        found = Some(1 + 2 * q + usize::from(level == Level::F));
                    }
                }
                for (k, &n) in c.photons.iter().enumerate() {
                    match n {
                        0 => {}
                        1 if found.is_none() => found = Some(1 + 2 * self.n_qutrits() + k),
                        _ => return None,
                    }
                }
                Some(found.unwrap_or(0))
            }
            SpaceMode::Full { fock_cutoff } => {
                let mut idx = 0usize;
                for &level in &c.qutrits {
                    idx = idx * 3 + level.digit();
                }
                for &n in &c.photons {
                    if n >= fock_cutoff {
                        return None;
                    }
                    idx = idx * fock_cutoff + n;
                }
                Some(idx)
            }
        }
    }

    /// Product configuration of basis state `idx`.
    pub fn configuration(&self, idx: usize) -> Configuration {
        assert!(idx < self.dim, "basis index {idx} out of range");
        let mut c = Configuration::ground(self.n_steps);
        match self.mode {
            SpaceMode::Truncated => {
                if let Some(label) = self.label(idx) {
                    c = self.label_configuration(label).expect("enumerated label is valid");
                }
            }
            SpaceMode::Full { fock_cutoff } => {
                let mut rest = idx;
                for k in (0..self.n_cavities()).rev() {
                    c.photons[k] = rest % fock_cutoff;
                    rest /= fock_cutoff;
                }
                for q in (0..self.n_qutrits()).rev() {
                    c.qutrits[q] = Level::from_digit(rest % 3);
                    rest /= 3;
                }
            }
        }
        c
    }

    /// Label of basis state `idx`; in full mode only states with at most one
    /// excitation carry a label.
    pub fn label(&self, idx: usize) -> Option<BasisLabel> {
        if idx >= self.dim {
            return None;
        }
        match self.mode {
            SpaceMode::Truncated => {
                let nq = self.n_qutrits();
                Some(if idx == 0 {
                    BasisLabel::Vacuum
                } else if idx <= 2 * nq {
                    let k = idx - 1;
                    BasisLabel::QutritExc {
                        qutrit: k / 2 + 1,
                        level: if k.is_multiple_of(2) { Level::E } else { Level::F },
                    }
                } else {
                    BasisLabel::CavityPhoton { cavity: idx - 2 * nq }
                })
            }
            SpaceMode::Full { .. } => {
                let c = self.configuration(idx);
                match c.excitations() {
                    0 => Some(BasisLabel::Vacuum),
                    1 => {
                        if let Some(q) = c.qutrits.iter().position(|&l| l != Level::G) {
                            Some(BasisLabel::QutritExc {
                                qutrit: q + 1,
                                level: c.qutrits[q],
                            })
                        } else {
                            let k = c.photons.iter().position(|&n| n == 1)?;
                            Some(BasisLabel::CavityPhoton { cavity: k + 1 })
                        }
                    }
                    _ => None,
                }
            }
        }
    }

    /// All truncated-basis labels in index order.
    pub fn truncated_labels(&self) -> Vec<BasisLabel> {
        let probe = StateSpace {
            n_steps: self.n_steps,
            mode: SpaceMode::Truncated,
            dim: 3 * self.n_steps + 3,
        };
        (0..probe.dim).filter_map(|i| probe.label(i)).collect()
    }

    /// Builds an operator column by column from its action on product
    /// configurations. Images outside the space are dropped.
    fn operator_from_action<F>(&self, action: F) -> Operator
    where
        F: Fn(&Configuration) -> Option<(Configuration, f64)>,
    {
        let mut m = Array2::<C64>::zeros((self.dim, self.dim));
        for col in 0..self.dim {
            let c = self.configuration(col);
            if let Some((image, amp)) = action(&c) {
                if let Some(row) = self.index_of_configuration(&image) {
                    m[[row, col]] += C64::new(amp, 0.0);
                }
            }
        }
        Operator { matrix: m }
    }

    /// `|to⟩_j⟨from|` on qutrit `j` (1-based).
    pub fn qutrit_transition(&self, j: usize, from: Level, to: Level) -> Result<Operator> {
        self.check_qutrit(j)?;
        Ok(self.operator_from_action(|c| {
            (c.qutrits[j - 1] == from).then(|| {
                let mut image = c.clone();
                image.qutrits[j - 1] = to;
                (image, 1.0)
            })
        }))
    }

    /// Annihilation operator `a_j` of cavity `j` (1-based).
    pub fn cavity_annihilation(&self, j: usize) -> Result<Operator> {
        self.check_cavity(j)?;
        Ok(self.operator_from_action(|c| {
            let n = c.photons[j - 1];
            (n > 0).then(|| {
                let mut image = c.clone();
                image.photons[j - 1] = n - 1;
                (image, (n as f64).sqrt())
            })
        }))
    }

    /// `a_c |e⟩_q⟨g|`: cavity `c` gives its photon to qutrit `q`.
    pub fn photon_absorption(&self, qutrit: usize, cavity: usize) -> Result<Operator> {
        self.check_qutrit(qutrit)?;
        self.check_cavity(cavity)?;
        Ok(self.operator_from_action(|c| {
            let n = c.photons[cavity - 1];
            (n > 0 && c.qutrits[qutrit - 1] == Level::G).then(|| {
                let mut image = c.clone();
                image.photons[cavity - 1] = n - 1;
                image.qutrits[qutrit - 1] = Level::E;
                (image, (n as f64).sqrt())
            })
        }))
    }

    /// Total excitation number, diagonal in the product basis.
    pub fn excitation_number(&self) -> Operator {
        self.operator_from_action(|c| Some((c.clone(), c.excitations() as f64)))
    }

    /// Projector onto a single basis label.
    pub fn projector(&self, label: BasisLabel) -> Result<Operator> {
        let i = self.index_of(label)?;
        let mut m = Array2::<C64>::zeros((self.dim, self.dim));
        m[[i, i]] = C64::new(1.0, 0.0);
        Ok(Operator { matrix: m })
    }

    /// Normalized pure state vector with the given amplitudes on labels.
    pub fn state_vector(&self, amplitudes: &[(BasisLabel, C64)]) -> Result<ndarray::Array1<C64>> {
        let mut v = ndarray::Array1::<C64>::zeros(self.dim);
        for &(label, amp) in amplitudes {
            v[self.index_of(label)?] += amp;
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidParameter("state vector has zero norm".into()));
        }
        Ok(v.mapv(|z| z / norm))
    }
}

/// Dense complex square matrix acting on a [`StateSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    matrix: Array2<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        Operator {
            matrix: Array2::zeros((dim, dim)),
        }
    }

    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        Ok(Operator { matrix })
    }

    /// Like [`Operator::from_matrix`], additionally requiring Hermiticity within 1e-12.
    pub fn hermitian(matrix: Array2<C64>) -> Result<Self> {
        let op = Self::from_matrix(matrix)?;
        let err = op.hermiticity_error();
        if err > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "operator is not Hermitian (deviation {err:e})"
            )));
        }
        Ok(op)
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

    pub fn dagger(&self) -> Operator {
        Operator {
            matrix: linalg::dagger(&self.matrix),
        }
    }

    pub fn hermiticity_error(&self) -> f64 {
        linalg::hermiticity_error(&self.matrix)
    }

    pub fn dot(&self, other: &Operator) -> Operator {
        Operator {
            matrix: self.matrix.dot(&other.matrix),
        }
    }

    pub fn scaled(&self, factor: C64) -> Operator {
        Operator {
            matrix: self.matrix.mapv(|z| z * factor),
        }
    }

    pub fn plus(&self, other: &Operator) -> Operator {
        Operator {
            matrix: &self.matrix + &other.matrix,
        }
    }

    /// `exp(-i H t)`.
    pub fn propagator(&self, t: f64) -> Operator {
        Operator {
            matrix: linalg::expm(&self.matrix.mapv(|z| z * C64::new(0.0, -t))),
        }
    }

    /// Nonzero entries as `(row, col, value)`, row-major order.
    pub fn nonzeros(&self) -> Vec<(usize, usize, C64)> {
        self.matrix
            .indexed_iter()
            .filter(|(_, z)| **z != C64::new(0.0, 0.0))
            .map(|((r, c), z)| (r, c, *z))
            .collect()
    }

    pub fn check_dim(&self, dim: usize) -> Result<()> {
        if self.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: self.dim(),
            });
        }
        Ok(())
    }
}

/// Converts `f / 2π` in MHz to an angular frequency in rad/µs.
pub fn mhz_to_angular(f_mhz: f64) -> f64 {
    2.0 * PI * f_mhz
}

/// Converts an angular frequency in rad/µs back to `f / 2π` in MHz.
pub fn angular_to_mhz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Physical parameters of the device and walk.
///
/// Angular frequencies are in rad/µs, times in µs. `omega_c`, `omega_eg` and
/// `omega_fe` never enter the interaction-picture dynamics and are kept only
/// for bookkeeping; when both `omega_c` and `omega_eg` are given they must be
/// equal (resonant cavities).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams {
    pub n_steps: usize,
    pub omega_rabi: f64,
    pub phi: f64,
    pub theta: f64,
    pub g: f64,
    pub mu: f64,
    /// Coin pulse duration; `theta / omega_rabi` when unset.
    pub coin_duration: Option<f64>,
    pub omega_c: Option<f64>,
    pub omega_eg: Option<f64>,
    pub omega_fe: Option<f64>,
}

impl DeviceParams {
    /// Hadamard coin, Ω/2π = 100 MHz, g/2π = μ/2π = 50 MHz, φ = −π/2.
    pub fn new(n_steps: usize) -> Self {
        DeviceParams {
            n_steps,
            omega_rabi: mhz_to_angular(100.0),
            phi: -PI / 2.0,
            theta: PI / 4.0,
            g: mhz_to_angular(50.0),
            mu: mhz_to_angular(50.0),
            coin_duration: None,
            omega_c: None,
            omega_eg: None,
            omega_fe: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.n_steps == 0 {
            return bad("n_steps must be at least 1".into());
        }
        for (name, v) in [("omega_rabi", self.omega_rabi), ("g", self.g), ("mu", self.mu)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.theta > 0.0 && self.theta < PI / 2.0) {
            return bad(format!("theta must lie in (0, pi/2), got {}", self.theta));
        }
        if !self.phi.is_finite() {
            return bad("phi must be finite".into());
        }
        if let Some(t) = self.coin_duration {
            if !(t.is_finite() && t > 0.0) {
                return bad(format!("coin_duration must be positive, got {t}"));
            }
        }
        if let (Some(c), Some(eg)) = (self.omega_c, self.omega_eg) {
            if c != eg {
                return bad(format!("cavity frequency {c} is not resonant with omega_eg {eg}"));
            }
        }
        Ok(())
    }

    /// Coin pulse duration `t_I`.
    pub fn t_coin(&self) -> f64 {
        self.coin_duration.unwrap_or(self.theta / self.omega_rabi)
    }

    /// Qutrit-to-cavity swap duration `π / 2g`.
    pub fn t_swap_in(&self) -> f64 {
        PI / (2.0 * self.g)
    }

    /// Cavity-to-next-qutrit swap duration `π / 2μ`.
    pub fn t_swap_out(&self) -> f64 {
        PI / (2.0 * self.mu)
    }
}
