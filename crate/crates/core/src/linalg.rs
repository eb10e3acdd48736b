//! Small dense linear-algebra helpers on complex matrices.

use ndarray::{Array2, Zip};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Conjugate transpose.
pub fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    Zip::from(a).and(b).fold(0.0_f64, |acc, x, y| acc.max((x - y).norm()))
}

/// Largest elementwise modulus of `m - m†`.
pub fn hermiticity_error(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &Array2<C64>) -> C64 {
    m.diag().sum()
}

/// Maximum absolute row sum.
fn norm_inf(m: &Array2<C64>) -> f64 {
    m.rows()
        .into_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
///
/// The argument is scaled to infinity-norm at most 1/2, where the series is
/// summed until the next term no longer changes the partial sum.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    assert_eq!(a.nrows(), a.ncols(), "expm needs a square matrix");
    let n = a.nrows();
    let norm = norm_inf(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a.mapv(|z| z / 2f64.powi(squarings));

    let mut result = Array2::<C64>::eye(n);
    let mut term = Array2::<C64>::eye(n);
    for k in 1..=40 {
        term = term.dot(&scaled).mapv(|z| z / k as f64);
        let term_norm = norm_inf(&term);
        result += &term;
        if term_norm <= f64::EPSILON * norm_inf(&result) * 1e-3 {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.dot(&result);
    }
    result
}

/// Smallest eigenvalue of a Hermitian matrix (only the Hermitian part is used).
pub fn min_hermitian_eigenvalue(m: &Array2<C64>) -> f64 {
    let n = m.nrows();
    let h = nalgebra::DMatrix::from_fn(n, n, |i, j| (m[[i, j]] + m[[j, i]].conj()) * 0.5);
    h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn expm_of_pauli_x_rotation_matches_closed_form() {
        // exp(-i a X) = cos a I - i sin a X
        for &a in &[0.1, 1.0, 3.0, 17.0] {
            let x = array![
                [C64::new(0.0, 0.0), C64::new(0.0, -a)],
                [C64::new(0.0, -a), C64::new(0.0, 0.0)]
            ];
            let u = expm(&x);
            let expected = array![
                [C64::new(a.cos(), 0.0), C64::new(0.0, -a.sin())],
                [C64::new(0.0, -a.sin()), C64::new(a.cos(), 0.0)]
            ];
            assert!(max_abs_diff(&u, &expected) < 1e-13, "a = {a}");
        }
    }

    #[test]
    fn expm_of_diagonal_is_elementwise_exp() {
        let d = array![
            [C64::new(-2.0, 0.5), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(1.5, -3.0)]
        ];
        let e = expm(&d);
        assert!((e[[0, 0]] - d[[0, 0]].exp()).norm() < 1e-13);
        assert!((e[[1, 1]] - d[[1, 1]].exp()).norm() < 1e-12);
        assert!(e[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn min_eigenvalue_of_projector_mixture() {
        let m = array![
            [C64::new(0.75, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-0.25, 0.0)]
        ];
        assert!((min_hermitian_eigenvalue(&m) + 0.25).abs() < 1e-14);
    }
}
