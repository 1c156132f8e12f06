//! Outcome bases, expectation values, and readout-window averaging.
//!
//! Both solvers report results against the same measurement model: each oscillator is
//! read out by the sign of its x-quadrature, which distinguishes the two coherent
//! lobes. In the cat basis that measurement is a per-site Hadamard rotation, so the
//! outcome kets are `prod_j (|even>_j + s_j |odd>_j)/sqrt(2)` with `s_j = +1` for the
//! `+` outcome. In the Fock representation the same kets are built from truncated,
//! renormalized cat states, which keeps the outcome family exactly orthonormal even
//! at small amplitude (where raw coherent states overlap strongly).
//!
//! Population outside the cat manifold ("leakage") is reported separately, and the
//! in-manifold probabilities are renormalized so they always sum to one. This keeps
//! outcome statistics comparable between the spin model (no leakage by construction)
//! and the Fock model (small but nonzero leakage during the ramp).

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fock::{self, Parity};
use crate::linalg::SparseOp;
use crate::C64;

/// Sign labels for every joint outcome, site 0 leftmost, `+` before `-` within each
/// site. Index `k` encodes site `j`'s sign in bit `n - 1 - j` (0 means `+`).
pub fn outcome_labels(n_kpos: usize) -> Vec<String> {
    let mut labels = Vec::with_capacity(1 << n_kpos);
    for k in 0..(1usize << n_kpos) {
        let mut s = String::with_capacity(n_kpos);
        for j in 0..n_kpos {
            let bit = (k >> (n_kpos - 1 - j)) & 1;
            s.push(if bit == 0 { '+' } else { '-' });
        }
        labels.push(s);
    }
    labels
}

fn sign_of(k: usize, j: usize, n_kpos: usize) -> f64 {
    if (k >> (n_kpos - 1 - j)) & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Measurement kets in the cat basis, one per outcome of [`outcome_labels`], each a
/// `2^n` vector over the basis ordered site-0-outermost with the even state first.
pub fn spin_outcome_kets(n_kpos: usize) -> Vec<Array1<C64>> {
    let dim = 1usize << n_kpos;
    let norm = 1.0 / (dim as f64).sqrt();
    (0..dim)
        .map(|k| {
            Array1::from_shape_fn(dim, |b| {
                // basis index b: bit n-1-j is 1 when site j is in the odd state
                let mut amp = norm;
                for j in 0..n_kpos {
                    if (b >> (n_kpos - 1 - j)) & 1 == 1 {
                        amp *= sign_of(k, j, n_kpos);
                    }
                }
                C64::new(amp, 0.0)
            })
        })
        .collect()
}

/// Measurement kets in the truncated Fock representation, one per outcome, built as
/// products of `(|even(alpha_j)> + s_j |odd(alpha_j)>)/sqrt(2)`. The truncated cat
/// states are renormalized within the truncation, so the family is exactly
/// orthonormal for any `dims`.
pub fn fock_outcome_kets(alphas: &[f64], dims: &[usize]) -> Result<Vec<Array1<C64>>> {
    if alphas.len() != dims.len() {
        return Err(Error::InvalidDimension(format!(
            "{} amplitudes for {} oscillators",
            alphas.len(),
            dims.len()
        )));
    }
    let n = alphas.len();
    let mut evens = Vec::with_capacity(n);
    let mut odds = Vec::with_capacity(n);
    for (&alpha, &d) in alphas.iter().zip(dims) {
        evens.push(fock::cat_state_truncated(alpha, Parity::Even, d)?);
        odds.push(fock::cat_state_truncated(alpha, Parity::Odd, d)?);
    }
    let total: usize = dims.iter().product();
    let mut kets = Vec::with_capacity(1 << n);
    for k in 0..(1usize << n) {
        let mut ket = Array1::from_elem(1, C64::new(1.0, 0.0));
        for j in 0..n {
            let s = sign_of(k, j, n);
            let site: Array1<C64> = evens[j]
                .iter()
                .zip(&odds[j])
                .map(|(&e, &o)| (e + s * o) * std::f64::consts::FRAC_1_SQRT_2)
                .collect();
            let mut next = Array1::zeros(ket.len() * site.len());
            for (i, &a) in ket.iter().enumerate() {
                for (l, &b) in site.iter().enumerate() {
                    next[i * site.len() + l] = a * b;
                }
            }
            ket = next;
        }
        debug_assert_eq!(ket.len(), total);
        kets.push(ket);
    }
    Ok(kets)
}

/// Outcome probabilities of a density matrix: `p_k ~ <k|rho|k>`, renormalized over
/// the outcome family, along with the leftover population (leakage).
pub fn outcome_probabilities(kets: &[Array1<C64>], rho: &Array2<C64>) -> (Vec<f64>, f64) {
    let raw: Vec<f64> = kets
        .iter()
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (i, &ki) in k.iter().enumerate() {
                let mut row = C64::new(0.0, 0.0);
                for (j, &kj) in k.iter().enumerate() {
                    row += rho[[i, j]] * kj;
                }
                acc += ki.conj() * row;
            }
            acc.re.max(0.0)
        })
        .collect();
    normalize_with_leakage(raw)
}

/// Outcome probabilities of a (possibly unnormalized) pure state.
pub fn outcome_probabilities_pure(kets: &[Array1<C64>], psi: &[C64]) -> (Vec<f64>, f64) {
    let norm_sq: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    let raw: Vec<f64> = kets
        .iter()
        .map(|k| {
            let mut acc = C64::new(0.0, 0.0);
            for (ki, &pi) in k.iter().zip(psi) {
                acc += ki.conj() * pi;
            }
            acc.norm_sqr() / norm_sq
        })
        .collect();
    normalize_with_leakage(raw)
}

fn normalize_with_leakage(raw: Vec<f64>) -> (Vec<f64>, f64) {
    let coverage: f64 = raw.iter().sum();
    let leakage = (1.0 - coverage).max(0.0);
    if coverage <= 0.0 {
        // nothing in the manifold: report a flat distribution rather than NaNs
        let flat = 1.0 / raw.len() as f64;
        return (vec![flat; raw.len()], 1.0);
    }
    (raw.iter().map(|p| p / coverage).collect(), leakage)
}

/// `<psi| op |psi> / <psi|psi>` for a sparse operator.
pub fn expectation_sparse(op: &SparseOp, psi: &[C64]) -> C64 {
    let mut scratch = vec![C64::new(0.0, 0.0); op.nrows()];
    op.apply_vec(psi, &mut scratch, C64::new(1.0, 0.0));
    let mut acc = C64::new(0.0, 0.0);
    let mut norm = 0.0;
    for (p, s) in psi.iter().zip(&scratch) {
        acc += p.conj() * s;
        norm += p.norm_sqr();
    }
    acc / norm
}

/// `tr(op rho)` for dense operator and density matrix.
pub fn expectation_dense(op: &Array2<C64>, rho: &Array2<C64>) -> C64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..op.nrows() {
        for j in 0..op.ncols() {
            acc += op[[i, j]] * rho[[j, i]];
        }
    }
    acc
}

/// `tr(op rho)` for a sparse operator against a density matrix.
pub fn expectation_sparse_density(op: &SparseOp, rho: &Array2<C64>) -> C64 {
    // tr(S rho) = sum_i (S rho)_ii; with CSR access go row by row
    let mut acc = C64::new(0.0, 0.0);
    let dense = op.to_dense();
    for i in 0..dense.nrows() {
        for j in 0..dense.ncols() {
            acc += dense[[i, j]] * rho[[j, i]];
        }
    }
    acc
}

/// Time average of a sampled series over `window = (start, end)` using the trapezoid
/// rule on the actual (possibly nonuniform) sample times. At least two samples must
/// fall inside the window.
pub fn readout_average(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<f64> {
    if times.len() != values.len() {
        return Err(Error::InvalidDimension(format!(
            "{} sample times for {} values",
            times.len(),
            values.len()
        )));
    }
    let slack = 1e-9 * window.1.abs().max(1.0);
    let lo = window.0 - slack;
    let hi = window.1 + slack;
    let idx: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= lo && times[i] <= hi)
        .collect();
    if idx.len() < 2 {
        return Err(Error::InvalidParameter(format!(
            "readout window [{}, {}] contains {} sample(s); need at least 2",
            window.0,
            window.1,
            idx.len()
        )));
    }
    let mut integral = 0.0;
    let mut span = 0.0;
    for pair in idx.windows(2) {
        let (i, j) = (pair[0], pair[1]);
        let dt = times[j] - times[i];
        if dt <= 0.0 {
            return Err(Error::InvalidParameter(
                "sample times must be strictly increasing".to_string(),
            ));
        }
        integral += 0.5 * (values[i] + values[j]) * dt;
        span += dt;
    }
    Ok(integral / span)
}
