//! Walker-distribution readout and the similarity score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idealwalk::Distribution;
use crate::lindblad::DensityMatrix;
use crate::statespace::{Level, StateSpace};

/// Entries this far below zero are rounding noise and read as zero.
const NEGATIVE_NOISE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityResult {
    pub s: f64,
    pub p_me: Distribution,
    pub p_id: Distribution,
    pub renormalized: bool,
}

/// Reads the walker distribution off the diagonal of `rho`.
///
/// Site `j` collects the population of qutrit `j` in `e` or `f`. Population
/// with every qutrit in `g` goes to `residual_vacuum` if no cavity holds a
/// photon and to `residual_cavity` otherwise.
pub fn extract_distribution(rho: &DensityMatrix, space: &StateSpace) -> Result<Distribution> {
    if rho.dim() != space.dim() {
        return Err(Error::DimensionMismatch {
            expected: space.dim(),
            actual: rho.dim(),
        });
    }
    let mut p = vec![0.0; space.n_qutrits()];
    let mut residual_vacuum = 0.0;
    let mut residual_cavity = 0.0;
    for idx in 0..space.dim() {
        let pop = rho.population(idx);
        let config = space.configuration(idx);
        let mut on_qutrit = false;
        for (q, &level) in config.qutrits.iter().enumerate() {
            if level != Level::G {
                p[q] += pop;
                on_qutrit = true;
            }
        }
        if !on_qutrit {
            if config.photons.iter().any(|&n| n > 0) {
                residual_cavity += pop;
            } else {
                residual_vacuum += pop;
            }
        }
    }
    Ok(Distribution {
        p,
        residual_vacuum,
        residual_cavity,
    })
}

fn cleaned(p: &[f64], which: &str) -> Result<Vec<f64>> {
    p.iter()
        .map(|&x| {
            if x >= 0.0 {
                Ok(x)
            } else if x >= -NEGATIVE_NOISE {
                Ok(0.0)
            } else {
                Err(Error::InvalidParameter(format!("{which} has a negative entry {x}")))
            }
        })
        .collect()
}

/// `S = (Σ_j √(P_me(j) P_id(j)))²`, optionally after rescaling `P_me` to unit sum.
pub fn similarity(p_me: &Distribution, p_id: &Distribution, renormalize: bool) -> Result<SimilarityResult> {
    if p_me.n_sites() != p_id.n_sites() {
        return Err(Error::DimensionMismatch {
            expected: p_id.n_sites(),
            actual: p_me.n_sites(),
        });
    }
    let mut me = cleaned(&p_me.p, "P_me")?;
    let id = cleaned(&p_id.p, "P_id")?;
    if renormalize {
        let total: f64 = me.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter(
                "cannot renormalize a distribution with zero total".into(),
            ));
        }
        me.iter_mut().for_each(|x| *x /= total);
    }
    let overlap: f64 = me.iter().zip(&id).map(|(a, b)| (a * b).sqrt()).sum();
    Ok(SimilarityResult {
        s: overlap * overlap,
        p_me: p_me.clone(),
        p_id: p_id.clone(),
        renormalized: renormalize,
    })
}
