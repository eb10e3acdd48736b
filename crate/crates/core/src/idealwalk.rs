//! Exact coined walk used as the reference distribution.
//!
//! The walk lives on sites `1..=N+1`. Each step applies the coin
//! `C = [[cos θ, sin θ], [sin θ, −cos θ]]` (basis `|0⟩_c, |1⟩_c`) and then the
//! shift that keeps coin-0 amplitude in place and moves coin-1 amplitude one
//! site to the right. This is the walk the qutrit chain realizes, with site `j`
//! being qutrit `j`, `|0⟩_c = |f⟩` and `|1⟩_c = |e⟩`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use ndarray::{array, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::C64;

/// Coin state `c0 |0⟩_c + c1 |1⟩_c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoinState {
    pub c0: C64,
    pub c1: C64,
}

impl CoinState {
    pub fn new(c0: C64, c1: C64) -> Result<Self> {
        let norm = c0.norm_sqr() + c1.norm_sqr();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "coin state must be normalized, |c0|^2 + |c1|^2 = {norm}"
            )));
        }
        Ok(CoinState { c0, c1 })
    }

    /// `|0⟩_c`, i.e. the walker starts in `|f⟩`.
    pub fn zero() -> Self {
        CoinState {
            c0: C64::new(1.0, 0.0),
            c1: C64::new(0.0, 0.0),
        }
    }

    /// `|1⟩_c`, i.e. the walker starts in `|e⟩`.
    pub fn one() -> Self {
        CoinState {
            c0: C64::new(0.0, 0.0),
            c1: C64::new(1.0, 0.0),
        }
    }

    /// `(|0⟩_c + i|1⟩_c)/√2`.
    pub fn plus_i() -> Self {
        CoinState {
            c0: C64::new(FRAC_1_SQRT_2, 0.0),
            c1: C64::new(0.0, FRAC_1_SQRT_2),
        }
    }

    /// Preset name, or `None` for an arbitrary state.
    pub fn preset_name(&self) -> Option<&'static str> {
        [("zero", Self::zero()), ("one", Self::one()), ("plus-i", Self::plus_i())]
            .into_iter()
            .find(|(_, c)| c == self)
            .map(|(name, _)| name)
    }
}

impl fmt::Display for CoinState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.preset_name() {
            Some(name) => f.write_str(name),
            None => write!(f, "{},{},{},{}", self.c0.re, self.c0.im, self.c1.re, self.c1.im),
        }
    }
}

impl FromStr for CoinState {
    type Err = Error;

    /// Accepts `zero`, `one`, `plus-i`, or four comma-separated reals
    /// `re0,im0,re1,im1`.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" | "0" => Ok(Self::zero()),
            "one" | "1" => Ok(Self::one()),
            "plus-i" => Ok(Self::plus_i()),
            other => {
                let parts: Vec<f64> = other
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::InvalidParameter(format!("unrecognized coin state `{other}`")))?;
                if parts.len() != 4 {
                    return Err(Error::InvalidParameter(format!(
                        "coin state needs four reals re0,im0,re1,im1, got `{other}`"
                    )));
                }
                Self::new(C64::new(parts[0], parts[1]), C64::new(parts[2], parts[3]))
            }
        }
    }
}

/// Walker distribution over sites `1..=N+1`, plus population that is not on
/// any qutrit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    /// `p[j - 1]` is the probability of finding the walker on site `j`.
    pub p: Vec<f64>,
    /// Population with every qutrit and cavity in the ground state.
    pub residual_vacuum: f64,
    /// Population held by cavity photons.
    pub residual_cavity: f64,
}

impl Distribution {
    pub fn from_sites(p: Vec<f64>) -> Self {
        Distribution {
            p,
            residual_vacuum: 0.0,
            residual_cavity: 0.0,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.p.len()
    }

    pub fn site_total(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn total(&self) -> f64 {
        self.site_total() + self.residual_vacuum + self.residual_cavity
    }
}

/// Walk amplitudes, `amps[j - 1] = [coin 0, coin 1]` on site `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkState {
    amps: Vec<[C64; 2]>,
    steps_taken: usize,
}

impl WalkState {
    /// Walker localized on `site` (1-based) with coin `coin`, on a line of `n_sites`.
    pub fn localized(n_sites: usize, site: usize, coin: CoinState) -> Result<Self> {
        if site == 0 || site > n_sites {
            return Err(Error::IndexOutOfRange {
                what: "site",
                index: site,
                max: n_sites,
            });
        }
        let mut amps = vec![[C64::new(0.0, 0.0); 2]; n_sites];
        amps[site - 1] = [coin.c0, coin.c1];
        Ok(WalkState { amps, steps_taken: 0 })
    }

    pub fn from_amplitudes(amps: Vec<[C64; 2]>) -> Self {
        WalkState { amps, steps_taken: 0 }
    }

    pub fn amplitudes(&self) -> &[[C64; 2]] {
        &self.amps
    }

    pub fn n_sites(&self) -> usize {
        self.amps.len()
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|[a, b]| a.norm_sqr() + b.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|[a, b]| a.norm_sqr() + b.norm_sqr()).collect()
    }
}

/// Coin operator in the `(|0⟩_c, |1⟩_c)` basis.
pub fn coin_matrix(theta: f64) -> Result<Array2<C64>> {
    check_theta(theta)?;
    let (s, c) = theta.sin_cos();
    Ok(array![
        [C64::new(c, 0.0), C64::new(s, 0.0)],
        [C64::new(s, 0.0), C64::new(-c, 0.0)]
    ])
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < PI / 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "theta must lie in (0, pi/2), got {theta}"
        )))
    }
}

/// One walk step: coin on every site, then coin-1 amplitude moves right.
pub fn step(state: &WalkState, theta: f64) -> Result<WalkState> {
    check_theta(theta)?;
    let (s, c) = theta.sin_cos();
    let n = state.amps.len();
    let mut next = vec![[C64::new(0.0, 0.0); 2]; n];
    for (j, &[a0, a1]) in state.amps.iter().enumerate() {
        let stay = a0 * c + a1 * s;
        let hop = a0 * s - a1 * c;
        next[j][0] += stay;
        if hop != C64::new(0.0, 0.0) {
            if j + 1 == n {
                return Err(Error::WalkOverflow { last_site: n });
            }
            next[j + 1][1] += hop;
        }
    }
    Ok(WalkState {
        amps: next,
        steps_taken: state.steps_taken + 1,
    })
}

/// Distribution after `n_steps` steps from site 1, on sites `1..=n_steps+1`.
pub fn run_ideal(n_steps: usize, theta: f64, coin0: CoinState) -> Result<Distribution> {
    check_theta(theta)?;
    let mut state = WalkState::localized(n_steps + 1, 1, coin0)?;
    for _ in 0..n_steps {
        state = step(&state, theta)?;
    }
    Ok(Distribution::from_sites(state.probabilities()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_4;

    use proptest::prelude::*;

    use super::*;
    use crate::linalg::max_abs_diff;

    #[test]
    fn hadamard_coin() {
        let c = coin_matrix(FRAC_PI_4).unwrap();
        let h = FRAC_1_SQRT_2;
        let expected = array![
            [C64::new(h, 0.0), C64::new(h, 0.0)],
            [C64::new(h, 0.0), C64::new(-h, 0.0)]
        ];
        assert!(max_abs_diff(&c, &expected) < 1e-15);
    }

    #[test]
    fn coin_domain_is_open_interval() {
        assert!(coin_matrix(0.0).is_err());
        assert!(coin_matrix(PI / 2.0).is_err());
        assert!(coin_matrix(-0.1).is_err());
        assert!(run_ideal(3, 2.0, CoinState::one()).is_err());
    }

    #[test]
    fn single_step_from_coin_one() {
        let s0 = WalkState::localized(2, 1, CoinState::one()).unwrap();
        let s1 = step(&s0, FRAC_PI_4).unwrap();
        let a = s1.amplitudes();
        assert!((a[0][0] - C64::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!(a[0][1].norm() < 1e-15);
        assert!(a[1][0].norm() < 1e-15);
        assert!((a[1][1] - C64::new(-FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn single_step_from_coin_zero() {
        for &theta in &[0.2, FRAC_PI_4, 1.3] {
            let d = run_ideal(1, theta, CoinState::zero()).unwrap();
            assert!((d.p[0] - theta.cos().powi(2)).abs() < 1e-15);
            assert!((d.p[1] - theta.sin().powi(2)).abs() < 1e-15);
        }
    }

    #[test]
    fn two_steps_and_zero_steps() {
        let d = run_ideal(2, FRAC_PI_4, CoinState::one()).unwrap();
        for (got, want) in d.p.iter().zip([0.25, 0.5, 0.25]) {
            assert!((got - want).abs() < 1e-12);
        }
        let d0 = run_ideal(0, FRAC_PI_4, CoinState::plus_i()).unwrap();
        assert_eq!(d0.p.len(), 1);
        assert!((d0.p[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stepping_past_last_site_fails() {
        let s = WalkState::localized(2, 2, CoinState::zero()).unwrap();
        assert!(matches!(step(&s, FRAC_PI_4), Err(Error::WalkOverflow { last_site: 2 })));
    }

    #[test]
    fn coin_state_parsing() {
        assert_eq!("plus-i".parse::<CoinState>().unwrap(), CoinState::plus_i());
        assert_eq!("one".parse::<CoinState>().unwrap().to_string(), "one");
        let c: CoinState = "0.6,0,0,0.8".parse().unwrap();
        assert_eq!(c.preset_name(), None);
        assert!("0.6,0,0,0.9".parse::<CoinState>().is_err());
        assert!("sideways".parse::<CoinState>().is_err());
    }

    /// Dense `(2(n_sites)) × (2 n_sites)` matrix of one step, index `2(j-1) + coin`.
    fn dense_step_matrix(n_sites: usize, theta: f64) -> Array2<C64> {
        let coin = coin_matrix(theta).unwrap();
        let d = 2 * n_sites;
        let mut coin_full = Array2::<C64>::zeros((d, d));
        let mut shift = Array2::<C64>::zeros((d, d));
        for j in 0..n_sites {
            for r in 0..2 {
                for c in 0..2 {
                    coin_full[[2 * j + r, 2 * j + c]] = coin[[r, c]];
                }
            }
            shift[[2 * j, 2 * j]] = C64::new(1.0, 0.0);
            if j + 1 < n_sites {
                shift[[2 * (j + 1) + 1, 2 * j + 1]] = C64::new(1.0, 0.0);
            }
        }
        shift.dot(&coin_full)
    }

    #[test]
    fn matches_dense_brute_force() {
        let n_sites = 20;
        for coin in [CoinState::zero(), CoinState::one(), CoinState::plus_i()] {
            for n in [1usize, 2, 5, 12, 19] {
                let u = dense_step_matrix(n_sites, 0.6);
                let mut v = ndarray::Array1::<C64>::zeros(2 * n_sites);
                v[0] = coin.c0;
                v[1] = coin.c1;
                for _ in 0..n {
                    v = u.dot(&v);
                }
                let d = run_ideal(n, 0.6, coin).unwrap();
                for j in 0..n_sites {
                    let want = v[2 * j].norm_sqr() + v[2 * j + 1].norm_sqr();
                    let got = d.p.get(j).copied().unwrap_or(0.0);
                    assert!((got - want).abs() < 1e-13, "n={n} site={}", j + 1);
                }
            }
        }
    }

    /// Symmetric walk: coin 0 moves right, coin 1 moves left, on displacements
    /// `-n..=n`. Returns probabilities indexed by `x + n`.
    fn symmetric_walk(n: usize, theta: f64, coin: CoinState) -> Vec<f64> {
        let c = coin_matrix(theta).unwrap();
        let width = 2 * n + 1;
        let mut amps = vec![[C64::new(0.0, 0.0); 2]; width];
        amps[n] = [coin.c0, coin.c1];
        for _ in 0..n {
            let mut next = vec![[C64::new(0.0, 0.0); 2]; width];
            for (x, &[a0, a1]) in amps.iter().enumerate() {
                let b0 = c[[0, 0]] * a0 + c[[0, 1]] * a1;
                let b1 = c[[1, 0]] * a0 + c[[1, 1]] * a1;
                if b0.norm() > 0.0 {
                    next[x + 1][0] += b0;
                }
                if b1.norm() > 0.0 {
                    next[x - 1][1] += b1;
                }
            }
            amps = next;
        }
        amps.iter().map(|[a, b]| a.norm_sqr() + b.norm_sqr()).collect()
    }

    #[test]
    fn relabels_onto_symmetric_walk() {
        // Site j of the stay/right walk corresponds to displacement N − 2(j − 1).
        for n in 1..=6 {
            for coin in [CoinState::zero(), CoinState::one(), CoinState::plus_i()] {
                let theta = 0.5;
                let ours = run_ideal(n, theta, coin).unwrap();
                let sym = symmetric_walk(n, theta, coin);
                for j in 1..=n + 1 {
                    let x = n as i64 - 2 * (j as i64 - 1);
                    let idx = (x + n as i64) as usize;
                    assert!((ours.p[j - 1] - sym[idx]).abs() < 1e-13);
                }
                let mass: f64 = (1..=n + 1).map(|j| sym[2 * n + 2 - 2 * j]).sum();
                assert!((mass - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn step_preserves_norm(
            raw in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0), 6),
            theta in 0.01f64..1.56,
        ) {
            let mut amps: Vec<[C64; 2]> = raw
                .iter()
                .map(|&(a, b, c, d)| [C64::new(a, b), C64::new(c, d)])
                .collect();
            amps.push([C64::new(0.0, 0.0); 2]);
            let s = WalkState::from_amplitudes(amps);
            let before = s.norm_sqr();
            let after = step(&s, theta).unwrap().norm_sqr();
            prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }

        #[test]
        fn probability_conserved_with_bounded_support(n in 0usize..=50, theta in 0.01f64..1.56) {
            for coin in [CoinState::zero(), CoinState::one(), CoinState::plus_i()] {
                let d = run_ideal(n, theta, coin).unwrap();
                prop_assert_eq!(d.p.len(), n + 1);
                prop_assert!((d.site_total() - 1.0).abs() < 1e-12);
                prop_assert!(d.p.iter().all(|&p| p >= 0.0));
            }
        }
    }
}
