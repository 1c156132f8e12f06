//! Monte-Carlo wave-function unraveling of the Fock-space model.
//!
//! Each trajectory integrates the non-Hermitian effective Schroedinger equation
//! `d psi = -i (H(t) - i/2 sum_k r_k C_k^dag C_k - E_ref) psi`; the squared norm then
//! decays by exactly the accumulated jump probability. A jump fires when the norm
//! crosses a uniform draw, is located by bisection on the integrator's dense output,
//! and applies one collapse operator chosen in proportion to `r_k |C_k psi|^2`.
//! Averaged over trajectories this reproduces the Lindblad density matrix, at vector
//! rather than matrix cost per sample.
//!
//! `E_ref` is a scalar gauge shift tracking `Re <H_eff>`, re-estimated after each
//! accepted step from the derivative the integrator already holds. It removes the
//! fast global phase (thousands of rad/us at annealing pump levels -- a factor ~30 in
//! step count), and changing it between steps never alters any observable since it
//! multiplies the state by a pure phase.
//!
//! Reproducibility: trajectory `k` draws from `ChaCha8` seeded with the ensemble seed
//! on stream `k`, so results are bit-identical for a given `(seed, n_traj, grid)`
//! regardless of how rayon schedules the work.

use std::cell::Cell;
use std::rc::Rc;

use ndarray::{Array1, Array2, Ix1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::SparseOp;
use crate::model::{self, FockTerm, NetworkSpec};
use crate::C64;

use super::rk::{Dopri5, StepControl};

/// Shared, read-only operator set for the effective evolution: Hamiltonian terms with
/// scheduled coefficients, collapse channels, and per-site number operators for
/// recording occupations. One instance serves every trajectory in the ensemble.
pub struct FockEffective {
    network: NetworkSpec,
    dim: usize,
    terms: Vec<FockTerm>,
    channels: Vec<Channel>,
    numbers: Vec<SparseOp>,
    quadratures: Vec<SparseOp>,
}

struct Channel {
    c: SparseOp,
    cdc: SparseOp,
    rate: f64,
}

impl FockEffective {
    pub fn new(network: &NetworkSpec, dims: &[usize]) -> Result<Self> {
        let terms = model::fock_terms(network, dims)?;
        let channels = model::collapse_operators_fock(network, dims)?
            .into_iter()
            .map(|(c, rate)| {
                let cdc = c.dagger().matmul(&c);
                Channel { c, cdc, rate }
            })
            .collect();
        let numbers = (0..network.n_kpos())
            .map(|j| {
                let n_local = SparseOp::from_dense(&crate::fock::number_op(dims[j])?);
                Ok(model::sparse_embed(&[(j, n_local)], dims))
            })
            .collect::<Result<Vec<_>>>()?;
        let quadratures = (0..network.n_kpos())
            .map(|j| {
                let a = crate::fock::annihilator(dims[j])?;
                let x_local = SparseOp::from_dense(&(&a + &crate::linalg::dagger(&a)));
                Ok(model::sparse_embed(&[(j, x_local)], dims))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FockEffective {
            network: network.clone(),
            dim: dims.iter().product(),
            terms,
            channels,
            numbers,
            quadratures,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `out = -i H(t) psi - 1/2 sum_k r_k C_k^dag C_k psi + i e_ref psi`
    fn apply(&self, t: f64, e_ref: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        out.fill(C64::new(0.0, 0.0));
        for term in &self.terms {
            let c = self.network.term_coeff_value(&term.coeff, t)?;
            if c != 0.0 {
                term.op.apply_vec(psi, out, C64::new(0.0, -c));
            }
        }
        for ch in &self.channels {
            ch.cdc.apply_vec(psi, out, C64::new(-0.5 * ch.rate, 0.0));
        }
        if e_ref != 0.0 {
            let shift = C64::new(0.0, e_ref);
            for (o, p) in out.iter_mut().zip(psi) {
                *o += shift * p;
            }
        }
        Ok(())
    }
}

/// Ensemble configuration.
#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    pub control: StepControl,
    pub n_traj: usize,
    pub seed: u64,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions {
            control: StepControl::default(),
            n_traj: 400,
            seed: 1,
        }
    }
}

/// Per-trajectory record at every grid point. Outcome weights are raw (not
/// renormalized over the cat manifold), so ensemble means can be renormalized once,
/// consistently with how the master equation's density matrix is post-processed.
pub struct TrajectoryData {
    pub occupations: Array2<f64>,
    pub outcome_weights: Array2<f64>,
    /// Per-site `<a + a^dag>`: the sign is an alternative per-trajectory outcome
    /// diagnostic (each trajectory localizes in one coherent lobe once the drive
    /// breaks the symmetry), not the default readout.
    pub x_quadratures: Array2<f64>,
    pub leakage: Array1<f64>,
    pub jumps: usize,
}

/// Ensemble mean and standard error of every recorded quantity.
///
/// `mean_outcomes` rows are renormalized over the outcome family by the ensemble-mean
/// coverage, matching the density-matrix post-processing; the standard errors are the
/// raw-weight errors scaled by the same factor.
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub mean_occupations: Array2<f64>,
    pub se_occupations: Array2<f64>,
    pub mean_outcomes: Array2<f64>,
    pub se_outcomes: Array2<f64>,
    /// Fraction of trajectories with `<a_j + a_j^dag> > 0`, per grid row and site --
    /// the quadrature-sign readout diagnostic. Projector weights stay the default.
    pub plus_sign_fraction: Array2<f64>,
    pub mean_leakage: Array1<f64>,
    pub mean_jumps: f64,
    pub n_traj: usize,
}

/// Run `opts.n_traj` Monte-Carlo trajectories from the vacuum at `grid[0]` and reduce
/// them to ensemble statistics. `kets` is the outcome basis used for readout weights
/// (one ket per joint outcome, `2^n` of them, each of the full product dimension).
pub fn run_trajectories(
    network: &NetworkSpec,
    dims: &[usize],
    grid: &[f64],
    kets: &[Array1<C64>],
    opts: &EnsembleOptions,
) -> Result<EnsembleResult> {
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "output grid must be strictly ascending with at least two points".to_string(),
        ));
    }
    if opts.n_traj == 0 {
        return Err(Error::InvalidParameter(
            "ensemble needs at least one trajectory".to_string(),
        ));
    }
    let ops = FockEffective::new(network, dims)?;
    if kets.len() != 1 << network.n_kpos() {
        return Err(Error::InvalidDimension(format!(
            "{} outcome kets for {} oscillators",
            kets.len(),
            network.n_kpos()
        )));
    }
    for k in kets {
        if k.len() != ops.dim {
            return Err(Error::InvalidDimension(format!(
                "outcome ket has length {}, state space is {}",
                k.len(),
                ops.dim
            )));
        }
    }

    let data: Vec<TrajectoryData> = (0..opts.n_traj)
        .into_par_iter()
        .map(|k| run_single(&ops, grid, kets, &opts.control, opts.seed, k as u64))
        .collect::<Result<Vec<_>>>()?;

    Ok(reduce(grid, &data, opts.n_traj))
}

fn norm_sq(psi: &Array1<C64>) -> f64 {
    psi.iter().map(|z| z.norm_sqr()).sum()
}

type VecRhs<'a> = Box<dyn FnMut(f64, &Array1<C64>, &mut Array1<C64>) -> Result<()> + 'a>;

/// Re-estimate the reference energy from the derivative the stepper already holds:
/// for `k = -i (H_eff - E) psi`, `Im <psi|k> = -(Re <H_eff> - E |psi|^2)`, so the
/// fresh estimate costs one dot product. Only refreshes the FSAL stage when the
/// change is large enough to matter.
fn update_reference(stepper: &mut Dopri5<Ix1, VecRhs<'_>>, e_ref: &Cell<f64>) -> Result<()> {
    let mut dot = C64::new(0.0, 0.0);
    let mut n = 0.0;
    for (a, b) in stepper.y().iter().zip(stepper.derivative().iter()) {
        dot += a.conj() * b;
        n += a.norm_sqr();
    }
    if n <= 0.0 {
        return Err(Error::NumericalConsistency(
            "trajectory state norm vanished".to_string(),
        ));
    }
    let e_new = e_ref.get() - dot.im / n;
    if (e_new - e_ref.get()).abs() > 1e-3 * (1.0 + e_new.abs()) {
        e_ref.set(e_new);
        stepper.refresh_derivative()?;
    }
    Ok(())
}

/// Bisect the dense output for the time where the squared norm crosses `u`; leaves
/// the state at that time in `buf` and returns it.
fn locate_jump(stepper: &Dopri5<Ix1, VecRhs<'_>>, u: f64, buf: &mut Array1<C64>) -> f64 {
    let mut lo = stepper.t_prev();
    let mut hi = stepper.t();
    while hi - lo > 1e-12 * hi.abs().max(1.0) {
        let mid = 0.5 * (lo + hi);
        stepper.dense_at(mid, buf);
        if norm_sq(buf) > u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    stepper.dense_at(hi, buf);
    hi
}

/// Pick a collapse channel in proportion to `r_k |C_k psi|^2` and overwrite `psi`
/// with the normalized post-jump state.
fn apply_jump(
    ops: &FockEffective,
    psi: &mut Array1<C64>,
    scratch: &mut [C64],
    rng: &mut ChaCha8Rng,
    t: f64,
) -> Result<()> {
    let psl = psi.as_slice().expect("contiguous state");
    let mut weights = Vec::with_capacity(ops.channels.len());
    let mut total = 0.0;
    for ch in &ops.channels {
        scratch.fill(C64::new(0.0, 0.0));
        ch.c.apply_vec(psl, scratch, C64::new(1.0, 0.0));
        let w: f64 = ch.rate * scratch.iter().map(|z| z.norm_sqr()).sum::<f64>();
        weights.push(w);
        total += w;
    }
    if !(total > 0.0) {
        return Err(Error::NumericalConsistency(format!(
            "quantum jump triggered at t = {t} with zero total jump rate"
        )));
    }
    let mut pick = rng.gen::<f64>() * total;
    let mut chosen = ops.channels.len() - 1;
    for (i, w) in weights.iter().enumerate() {
        if pick < *w {
            chosen = i;
            break;
        }
        pick -= w;
    }
    scratch.fill(C64::new(0.0, 0.0));
    ops.channels[chosen]
        .c
        .apply_vec(psl, scratch, C64::new(1.0, 0.0));
    let norm = scratch.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for (p, s) in psi.iter_mut().zip(scratch.iter()) {
        *p = s / norm;
    }
    Ok(())
}

fn record(
    row: usize,
    psi: &Array1<C64>,
    ops: &FockEffective,
    kets: &[Array1<C64>],
    occupations: &mut Array2<f64>,
    outcome_weights: &mut Array2<f64>,
    x_quadratures: &mut Array2<f64>,
    leakage: &mut Array1<f64>,
) {
    let psl = psi.as_slice().expect("contiguous state");
    let n2 = norm_sq(psi);
    for (j, nop) in ops.numbers.iter().enumerate() {
        occupations[[row, j]] = super::observables::expectation_sparse(nop, psl).re;
    }
    for (j, xop) in ops.quadratures.iter().enumerate() {
        x_quadratures[[row, j]] = super::observables::expectation_sparse(xop, psl).re;
    }
    let mut coverage = 0.0;
    for (k, ket) in kets.iter().enumerate() {
        let mut dot = C64::new(0.0, 0.0);
        for (a, b) in ket.iter().zip(psl) {
            dot += a.conj() * b;
        }
        let w = dot.norm_sqr() / n2;
        outcome_weights[[row, k]] = w;
        coverage += w;
    }
    leakage[row] = (1.0 - coverage).max(0.0);
}

fn run_single(
    ops: &FockEffective,
    grid: &[f64],
    kets: &[Array1<C64>],
    ctrl: &StepControl,
    seed: u64,
    stream: u64,
) -> Result<TrajectoryData> {
    let dim = ops.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut u: f64 = rng.gen();

    let mut psi0: Array1<C64> = Array1::zeros(dim);
    psi0[0] = C64::new(1.0, 0.0);

    let e_ref = Rc::new(Cell::new(0.0));
    let eh = Rc::clone(&e_ref);
    let rhs: VecRhs<'_> = Box::new(move |t, y: &Array1<C64>, out: &mut Array1<C64>| {
        ops.apply(
            t,
            eh.get(),
            y.as_slice().expect("contiguous state"),
            out.as_slice_mut().expect("contiguous output"),
        )
    });
    // cap steps at the output span so the initial-step probe stays inside the
    // schedule's time domain
    let mut ctrl = ctrl.clone();
    let span = grid[grid.len() - 1] - grid[0];
    if span > 0.0 {
        ctrl.h_max = ctrl.h_max.min(span);
    }
    let mut stepper = Dopri5::new(rhs, grid[0], psi0, ctrl)?;
    update_reference(&mut stepper, &e_ref)?;

    let n_sites = ops.numbers.len();
    let mut occupations = Array2::zeros((grid.len(), n_sites));
    let mut outcome_weights = Array2::zeros((grid.len(), kets.len()));
    let mut x_quadratures = Array2::zeros((grid.len(), n_sites));
    let mut leakage = Array1::zeros(grid.len());
    let mut jumps = 0usize;
    record(
        0,
        stepper.y(),
        ops,
        kets,
        &mut occupations,
        &mut outcome_weights,
        &mut x_quadratures,
        &mut leakage,
    );

    let mut psi_buf: Array1<C64> = Array1::zeros(dim);
    let mut scratch = vec![C64::new(0.0, 0.0); dim];

    for (gi, &target) in grid.iter().enumerate().skip(1) {
        loop {
            let arrived = stepper.step_toward(target)?;
            if !ops.channels.is_empty() && norm_sq(stepper.y()) <= u {
                let t_jump = locate_jump(&stepper, u, &mut psi_buf);
                apply_jump(ops, &mut psi_buf, &mut scratch, &mut rng, t_jump)?;
                stepper.reset(t_jump, &psi_buf)?;
                jumps += 1;
                u = rng.gen();
                update_reference(&mut stepper, &e_ref)?;
                continue;
            }
            update_reference(&mut stepper, &e_ref)?;
            if arrived {
                break;
            }
        }
        record(
            gi,
            stepper.y(),
            ops,
            kets,
            &mut occupations,
            &mut outcome_weights,
            &mut x_quadratures,
            &mut leakage,
        );
    }

    Ok(TrajectoryData {
        occupations,
        outcome_weights,
        x_quadratures,
        leakage,
        jumps,
    })
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, (ss / (n * (n - 1.0))).sqrt())
}

fn reduce(grid: &[f64], data: &[TrajectoryData], n_traj: usize) -> EnsembleResult {
    let n_rows = grid.len();
    let n_sites = data[0].occupations.ncols();
    let n_out = data[0].outcome_weights.ncols();

    let mut mean_occupations = Array2::zeros((n_rows, n_sites));
    let mut se_occupations = Array2::zeros((n_rows, n_sites));
    let mut mean_outcomes = Array2::zeros((n_rows, n_out));
    let mut se_outcomes = Array2::zeros((n_rows, n_out));
    let mut plus_sign_fraction = Array2::zeros((n_rows, n_sites));
    let mut mean_leakage = Array1::zeros(n_rows);

    let mut column = Vec::with_capacity(n_traj);
    for row in 0..n_rows {
        for j in 0..n_sites {
            column.clear();
            column.extend(data.iter().map(|d| d.occupations[[row, j]]));
            let (m, se) = mean_and_se(&column);
            mean_occupations[[row, j]] = m;
            se_occupations[[row, j]] = se;
            let positives = data
                .iter()
                .filter(|d| d.x_quadratures[[row, j]] > 0.0)
                .count();
            plus_sign_fraction[[row, j]] = positives as f64 / n_traj as f64;
        }
        let mut coverage = 0.0;
        for k in 0..n_out {
            column.clear();
            column.extend(data.iter().map(|d| d.outcome_weights[[row, k]]));
            let (m, se) = mean_and_se(&column);
            mean_outcomes[[row, k]] = m;
            se_outcomes[[row, k]] = se;
            coverage += m;
        }
        if coverage > 0.0 {
            for k in 0..n_out {
                mean_outcomes[[row, k]] /= coverage;
                se_outcomes[[row, k]] /= coverage;
            }
        }
        column.clear();
        column.extend(data.iter().map(|d| d.leakage[row]));
        mean_leakage[row] = mean_and_se(&column).0;
    }
    let mean_jumps = data.iter().map(|d| d.jumps as f64).sum::<f64>() / n_traj as f64;

    EnsembleResult {
        times: grid.to_vec(),
        mean_occupations,
        se_occupations,
        mean_outcomes,
        se_outcomes,
        plus_sign_fraction,
        mean_leakage,
        mean_jumps,
        n_traj,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{KpoSpec, ScheduleSpec};
    use crate::solvers::master::{evolve_master, FockLindblad, LindbladOptions};
    use crate::solvers::observables::fock_outcome_kets;
    use std::f64::consts::TAU;

    fn lone_network(pump_mhz: f64, loss_mhz: f64, dephasing_khz: f64) -> NetworkSpec {
        NetworkSpec {
            kpos: vec![KpoSpec {
                kerr: -12.6 * TAU,
                pump_final: pump_mhz * TAU,
                drive_final_rescaled: 0.0,
                photon_loss: loss_mhz * TAU,
            }],
            couplings: vec![],
            dephasing: dephasing_khz * 1e-3 * TAU,
            schedule: ScheduleSpec {
                t_s: 0.4,
                t_sp: 0.1,
                t_rd: 0.6,
                t_r: 0.4,
                delta_initial: -20.0 * TAU,
                pump_exponent: 2.5,
                drive_exponent: 1.0,
                grid_points: 20,
            },
        }
    }

    fn grid(t0: f64, t1: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| t0 + (t1 - t0) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn master_reference(
        network: &NetworkSpec,
        dims: &[usize],
        times: &[f64],
        kets: &[Array1<C64>],
    ) -> (Array2<f64>, Array2<f64>) {
        let dim: usize = dims.iter().product();
        let mut rho0 = Array2::zeros((dim, dim));
        rho0[[0, 0]] = C64::new(1.0, 0.0);
        let mut rhs = FockLindblad::new(network, dims).unwrap();
        let numbers: Vec<SparseOp> = (0..network.n_kpos())
            .map(|j| {
                let n_local = SparseOp::from_dense(&crate::fock::number_op(dims[j]).unwrap());
                model::sparse_embed(&[(j, n_local)], dims)
            })
            .collect();
        let mut occ = Array2::zeros((times.len(), numbers.len()));
        let mut probs = Array2::zeros((times.len(), kets.len()));
        evolve_master(
            &mut rhs,
            rho0,
            times,
            &LindbladOptions::default(),
            |row, _, rho| {
                for (j, nop) in numbers.iter().enumerate() {
                    occ[[row, j]] =
                        crate::solvers::observables::expectation_sparse_density(nop, rho).re;
                }
                let (p, _) = crate::solvers::observables::outcome_probabilities(kets, rho);
                for (k, v) in p.iter().enumerate() {
                    probs[[row, k]] = *v;
                }
                Ok(())
            },
        )
        .unwrap();
        (occ, probs)
    }

    #[test]
    fn lossless_ensemble_collapses_to_a_single_schroedinger_solution() {
        let network = lone_network(6.0, 0.0, 0.0);
        let dims = [12usize];
        let times = grid(0.0, 0.5, 11);
        let alpha = network.alpha_analytic_at(0, 0.5).unwrap();
        let kets = fock_outcome_kets(&[alpha], &dims).unwrap();

        let opts = EnsembleOptions {
            n_traj: 3,
            seed: 7,
            ..Default::default()
        };
        let res = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();

        // no channels, no randomness: the three trajectories are bitwise identical,
        // so the spread is at most mean-roundoff ulps
        assert!(res.se_occupations.iter().all(|&s| s < 1e-12));
        assert!(res.se_outcomes.iter().all(|&s| s < 1e-12));
        assert_eq!(res.mean_jumps, 0.0);

        // and the pure-state evolution matches the closed master equation
        let (occ, probs) = master_reference(&network, &dims, &times, &kets);
        for row in 0..times.len() {
            assert!(
                (res.mean_occupations[[row, 0]] - occ[[row, 0]]).abs() < 1e-6,
                "row {row}: {} vs {}",
                res.mean_occupations[[row, 0]],
                occ[[row, 0]]
            );
            for k in 0..kets.len() {
                assert!((res.mean_outcomes[[row, k]] - probs[[row, k]]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn lossy_ensemble_agrees_with_the_master_equation_within_errors() {
        let network = lone_network(6.0, 1.1, 7.7);
        let dims = [12usize];
        let total = network.schedule.total_time();
        let times = grid(0.0, total, 15);
        let alpha = network.alpha_analytic_at(0, total).unwrap();
        let kets = fock_outcome_kets(&[alpha], &dims).unwrap();

        let opts = EnsembleOptions {
            n_traj: 1000,
            seed: 11,
            ..Default::default()
        };
        let res = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();
        let (occ, probs) = master_reference(&network, &dims, &times, &kets);

        // 4 standard errors per row (45 fixed-seed comparisons, 3 would flag ordinary
        // fluctuations) plus a rare-event slack: early on, jumps are Poisson with a
        // handful of expected counts, and each missed jump shifts an occupation or a
        // probability by at most ~1, i.e. ~1/n_traj in the mean. The slack covers a
        // few such misses, where the Gaussian error bar is meaningless.
        let slack = 3.0 / opts.n_traj as f64;
        assert!(res.mean_jumps > 0.1, "mean jumps = {}", res.mean_jumps);
        for row in 0..times.len() {
            let se = res.se_occupations[[row, 0]];
            let dev = (res.mean_occupations[[row, 0]] - occ[[row, 0]]).abs();
            assert!(
                dev <= 4.0 * se + slack,
                "occupation row {row}: dev {dev:.2e} > 4 x {se:.2e} + {slack:.0e}"
            );
            for k in 0..kets.len() {
                let se = res.se_outcomes[[row, k]];
                let dev = (res.mean_outcomes[[row, k]] - probs[[row, k]]).abs();
                assert!(
                    dev <= 4.0 * se + slack,
                    "outcome {k} row {row}: dev {dev:.2e} > 4 x {se:.2e} + {slack:.0e}"
                );
            }
        }
    }

    #[test]
    fn coupled_pair_statistics_match_the_master_equation() {
        let network = NetworkSpec {
            kpos: vec![
                KpoSpec {
                    kerr: -12.6 * TAU,
                    pump_final: 6.0 * TAU,
                    drive_final_rescaled: 1.5 * TAU,
                    photon_loss: 1.1 * TAU,
                },
                KpoSpec {
                    kerr: -12.6 * TAU,
                    pump_final: 8.0 * TAU,
                    drive_final_rescaled: 0.0,
                    photon_loss: 1.3 * TAU,
                },
            ],
            couplings: vec![crate::model::CouplingSpec {
                kind: crate::model::CouplingKind::TwoBody,
                sites: vec![0, 1],
                strength: 2.0 * TAU,
            }],
            dephasing: 7.7e-3 * TAU,
            schedule: ScheduleSpec {
                t_s: 0.4,
                t_sp: 0.1,
                t_rd: 0.3,
                t_r: 0.2,
                delta_initial: -20.0 * TAU,
                pump_exponent: 2.5,
                drive_exponent: 1.0,
                grid_points: 10,
            },
        };
        let dims = [8usize, 9];
        let total = network.schedule.total_time();
        let times = grid(0.0, total, 9);
        let alphas = [
            network.alpha_analytic_at(0, total).unwrap(),
            network.alpha_analytic_at(1, total).unwrap(),
        ];
        let kets = fock_outcome_kets(&alphas, &dims).unwrap();

        let opts = EnsembleOptions {
            n_traj: 300,
            seed: 3,
            ..Default::default()
        };
        let res = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();
        let (occ, probs) = master_reference(&network, &dims, &times, &kets);

        // same error model as the single-KPO lossy test
        let slack = 3.0 / opts.n_traj as f64;
        for row in 0..times.len() {
            for j in 0..2 {
                let se = res.se_occupations[[row, j]];
                let dev = (res.mean_occupations[[row, j]] - occ[[row, j]]).abs();
                assert!(
                    dev <= 4.0 * se + slack,
                    "site {j} row {row}: dev {dev:.2e} > 4 x {se:.2e} + {slack:.0e}"
                );
            }
            for k in 0..4 {
                let se = res.se_outcomes[[row, k]];
                let dev = (res.mean_outcomes[[row, k]] - probs[[row, k]]).abs();
                assert!(
                    dev <= 4.0 * se + slack,
                    "outcome {k} row {row}: dev {dev:.2e} > 4 x {se:.2e} + {slack:.0e}"
                );
            }
        }

        // the quadrature-sign diagnostic names the same winner as the projector
        // readout for the driven site ("+x" = labels "++" and "+-")
        let last = times.len() - 1;
        let p_plus = res.mean_outcomes[[last, 0]] + res.mean_outcomes[[last, 1]];
        let frac = res.plus_sign_fraction[[last, 0]];
        assert_eq!(
            frac > 0.5,
            p_plus > 0.5,
            "sign fraction {frac:.3} vs projector marginal {p_plus:.3}"
        );
    }

    #[test]
    fn same_seed_reproduces_bitwise_and_other_seeds_differ() {
        let network = lone_network(6.0, 1.1, 7.7);
        let dims = [10usize];
        let times = grid(0.0, 0.6, 7);
        let alpha = network.alpha_analytic_at(0, 0.6).unwrap();
        let kets = fock_outcome_kets(&[alpha], &dims).unwrap();

        let opts = EnsembleOptions {
            n_traj: 12,
            seed: 42,
            ..Default::default()
        };
        let a = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();
        let b = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();
        assert_eq!(
            a.mean_occupations.as_slice().unwrap(),
            b.mean_occupations.as_slice().unwrap()
        );
        assert_eq!(
            a.mean_outcomes.as_slice().unwrap(),
            b.mean_outcomes.as_slice().unwrap()
        );

        let opts = EnsembleOptions {
            n_traj: 12,
            seed: 43,
            ..Default::default()
        };
        let c = run_trajectories(&network, &dims, &times, &kets, &opts).unwrap();
        assert!(a
            .mean_occupations
            .iter()
            .zip(c.mean_occupations.iter())
            .any(|(x, y)| x != y));
    }

    #[test]
    fn jump_with_zero_total_rate_is_an_error() {
        let network = lone_network(6.0, 1.1, 0.0);
        let ops = FockEffective::new(&network, &[8]).unwrap();
        let mut psi: Array1<C64> = Array1::zeros(8);
        psi[0] = C64::new(1.0, 0.0); // vacuum: photon loss has nothing to remove
        let mut scratch = vec![C64::new(0.0, 0.0); 8];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = apply_jump(&ops, &mut psi, &mut scratch, &mut rng, 0.3).unwrap_err();
        match err {
            Error::NumericalConsistency(msg) => {
                assert!(msg.contains("zero total jump rate"), "{msg}")
            }
            other => panic!("expected numerical-consistency error, got {other}"),
        }
    }
}
