//! Declarative description of a KPO network and construction of its time-dependent
//! Hamiltonians and collapse operators in both representations.
//!
//! All frequencies are angular (rad/µs) and all times are µs with ħ = 1; conversion
//! from the "value/2π in MHz" convention of config files happens at the config
//! boundary, not here. Kerr coefficients are negative, so the annealing protocol
//! tracks the *highest* eigenvalue and the vacuum is the unique maximal-energy state
//! at t = 0.
//!
//! The Fock Hamiltonian is kept as a list of sparse terms with scalar time-dependent
//! coefficients ([`fock_terms`]); the dense [`hamiltonian_fock`] accumulates them for
//! diagnostics and small problems, while the master-equation solver applies the sparse
//! terms directly.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fock;
use crate::linalg::{self, SparseOp};
use crate::spin::{self, SpinOperatorSet};
use crate::C64;

/// One Kerr parametric oscillator: its Kerr coefficient, final pump and drive
/// amplitudes, and photon-loss rate. Frequencies in rad/µs.
#[derive(Debug, Clone, PartialEq)]
pub struct KpoSpec {
    /// Kerr coefficient K (< 0 by convention).
    pub kerr: f64,
    /// Two-photon pump amplitude p at the end of the ramp (≥ 0).
    pub pump_final: f64,
    /// Final single-photon drive in the rescaled convention Ω̃ (any sign); the
    /// physical drive is recovered by [`rescale_drive`].
    pub drive_final_rescaled: f64,
    /// Photon-loss rate κ (≥ 0); enters the master equation with rate κ/2.
    pub photon_loss: f64,
}

/// Coupling topology: bilinear photon exchange or a four-body exchange term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingKind {
    TwoBody,
    FourBody,
}

/// One coupling term: g(â†_{s0} â_{s1} + h.c.) for two sites, or
/// g(â†_{s0} â†_{s1} â_{s2} â_{s3} + h.c.) for four.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingSpec {
    pub kind: CouplingKind,
    pub sites: Vec<usize>,
    /// Coupling strength g, rad/µs.
    pub strength: f64,
}

/// Annealing schedule: ramp durations, initial detuning, and the ramp shapes.
///
/// The protocol runs on [0, t_s + t_rd + t_r]:
///
/// * [0, t_s]: detuning rises linearly from `delta_initial` to 0; the pump grows as
///   (t/t_s)^pump_exponent and the drive as (t/t_s)^drive_exponent;
/// * [t_s, t_s + t_sp]: pump and detuning hold, drive plateaus at full strength;
/// * [t_s + t_sp, t_s + t_rd]: drive ramps linearly back to zero;
/// * [t_s + t_rd, t_s + t_rd + t_r]: readout window, drive off.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleSpec {
    pub t_s: f64,
    pub t_sp: f64,
    pub t_rd: f64,
    pub t_r: f64,
    /// Δ(0), rad/µs, < 0 and below −|g| of every coupling.
    pub delta_initial: f64,
    pub pump_exponent: f64,
    /// Drive ramp-up exponent, the protocol's shape parameter f.
    pub drive_exponent: f64,
    /// Target number of output grid points across the full protocol.
    pub grid_points: usize,
}

/// A complete network: oscillators, couplings, shared dephasing rate, schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub kpos: Vec<KpoSpec>,
    pub couplings: Vec<CouplingSpec>,
    /// Shared dephasing rate γ (≥ 0), rad/µs.
    pub dephasing: f64,
    pub schedule: ScheduleSpec,
}

/// Scheduled scalar selected by [`schedule_value`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleQuantity {
    Delta,
    PumpFraction,
    DriveFraction,
}

/// Absolute slack (µs) tolerated at the ends of the schedule, so integrator arithmetic
/// landing within rounding of a boundary is not rejected.
const TIME_SLACK: f64 = 1e-9;

/// Evaluates a scheduled quantity at time `t` ∈ [0, t_s + t_rd + t_r].
pub fn schedule_value(schedule: &ScheduleSpec, quantity: ScheduleQuantity, t: f64) -> Result<f64> {
    let total = schedule.total_time();
    if !(-TIME_SLACK..=total + TIME_SLACK).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "schedule evaluated at t = {t} outside [0, {total}]"
        )));
    }
    let t = t.clamp(0.0, total);
    let s = schedule;
    Ok(match quantity {
        ScheduleQuantity::Delta => {
            if t < s.t_s {
                s.delta_initial * (1.0 - t / s.t_s)
            } else {
                0.0
            }
        }
        ScheduleQuantity::PumpFraction => {
            if t < s.t_s {
                (t / s.t_s).powf(s.pump_exponent)
            } else {
                1.0
            }
        }
        ScheduleQuantity::DriveFraction => {
            if t <= s.t_s {
                (t / s.t_s).powf(s.drive_exponent)
            } else if t <= s.t_s + s.t_sp {
                1.0
            } else if t < s.t_s + s.t_rd {
                (s.t_s + s.t_rd - t) / (s.t_rd - s.t_sp)
            } else {
                0.0
            }
        }
    })
}

impl ScheduleSpec {
    /// Full protocol duration t_s + t_rd + t_r.
    pub fn total_time(&self) -> f64 {
        self.t_s + self.t_rd + self.t_r
    }

    /// The readout window [t_s + t_rd, total].
    pub fn readout_window(&self) -> (f64, f64) {
        (self.t_s + self.t_rd, self.total_time())
    }

    /// Times where a scheduled quantity changes segment (kinks or steps). Integrators
    /// must not step across these.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![
            0.0,
            self.t_s,
            self.t_s + self.t_sp,
            self.t_s + self.t_rd,
            self.total_time(),
        ];
        pts.dedup_by(|a, b| (*a - *b).abs() <= TIME_SLACK);
        pts
    }

    /// Output grid: `grid_points` uniform samples over the protocol with every
    /// breakpoint inserted, ascending and deduplicated.
    pub fn output_grid(&self) -> Vec<f64> {
        let total = self.total_time();
        let n = self.grid_points.max(2);
        let mut grid: Vec<f64> = (0..n)
            .map(|k| total * (k as f64) / ((n - 1) as f64))
            .collect();
        grid.extend(self.breakpoints());
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= TIME_SLACK);
        grid
    }
}

impl NetworkSpec {
    pub fn n_kpos(&self) -> usize {
        self.kpos.len()
    }

    /// Checks every structural invariant; all other constructors in this module assume
    /// a validated network.
    pub fn validate(&self) -> Result<()> {
        if self.kpos.is_empty() {
            return Err(Error::InvalidParameter("network has no KPOs".into()));
        }
        for (j, kpo) in self.kpos.iter().enumerate() {
            if kpo.kerr >= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "KPO {j}: Kerr coefficient must be negative, got {}",
                    kpo.kerr
                )));
            }
            if kpo.pump_final < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "KPO {j}: pump amplitude must be non-negative, got {}",
                    kpo.pump_final
                )));
            }
            if kpo.photon_loss < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "KPO {j}: photon-loss rate must be non-negative, got {}",
                    kpo.photon_loss
                )));
            }
        }
        if self.dephasing < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "dephasing rate must be non-negative, got {}",
                self.dephasing
            )));
        }
        for (k, c) in self.couplings.iter().enumerate() {
            let want = match c.kind {
                CouplingKind::TwoBody => 2,
                CouplingKind::FourBody => 4,
            };
            if c.sites.len() != want {
                return Err(Error::InvalidParameter(format!(
                    "coupling {k}: {:?} needs {want} sites, got {}",
                    c.kind,
                    c.sites.len()
                )));
            }
            for &s in &c.sites {
                if s >= self.kpos.len() {
                    return Err(Error::InvalidParameter(format!(
                        "coupling {k}: site {s} out of range for {} KPOs",
                        self.kpos.len()
                    )));
                }
            }
            let mut sorted = c.sites.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != c.sites.len() {
                return Err(Error::InvalidParameter(format!(
                    "coupling {k}: sites must be distinct, got {:?}",
                    c.sites
                )));
            }
        }
        let s = &self.schedule;
        for (name, v) in [("t_s", s.t_s), ("t_sp", s.t_sp), ("t_rd", s.t_rd), ("t_r", s.t_r)] {
            if v <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "schedule duration {name} must be positive, got {v}"
                )));
            }
        }
        if s.t_rd < s.t_sp {
            return Err(Error::InvalidParameter(format!(
                "drive ramp-down needs t_rd >= t_sp, got t_rd = {} < t_sp = {}",
                s.t_rd, s.t_sp
            )));
        }
        if s.pump_exponent <= 0.0 || s.drive_exponent <= 0.0 {
            return Err(Error::InvalidParameter(
                "schedule exponents must be positive".into(),
            ));
        }
        if s.grid_points < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid_points must be at least 2, got {}",
                s.grid_points
            )));
        }
        let g_max = self
            .couplings
            .iter()
            .map(|c| c.strength.abs())
            .fold(0.0f64, f64::max);
        if s.delta_initial >= -g_max || s.delta_initial >= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "initial detuning {} must lie below -|g| = {} for a unique vacuum start",
                s.delta_initial, -g_max
            )));
        }
        Ok(())
    }

    /// Δ(t).
    pub fn delta_at(&self, t: f64) -> Result<f64> {
        schedule_value(&self.schedule, ScheduleQuantity::Delta, t)
    }

    /// p_j(t) = pump_final · pump_fraction(t).
    pub fn pump_at(&self, j: usize, t: f64) -> Result<f64> {
        Ok(self.kpos[j].pump_final
            * schedule_value(&self.schedule, ScheduleQuantity::PumpFraction, t)?)
    }

    /// Ω_j(t): the rescaled drive mapped to its physical value, times the drive ramp.
    pub fn drive_at(&self, j: usize, t: f64) -> Result<f64> {
        let full = rescale_drive(self, j)?;
        Ok(full * schedule_value(&self.schedule, ScheduleQuantity::DriveFraction, t)?)
    }

    /// Analytic per-KPO amplitude estimate at time t (pump and detuning from the
    /// schedule, Kerr from the KPO).
    pub fn alpha_analytic_at(&self, j: usize, t: f64) -> Result<f64> {
        spin::estimate_alpha_analytic(self.pump_at(j, t)?, self.delta_at(t)?, self.kpos[j].kerr)
    }
}

/// Physical drive amplitude Ω_j = Ω̃_j · Π_{l≠j} √(−p_l / K_l).
///
/// A zero rescaled drive is zero regardless of the other pumps; a nonzero one requires
/// every other pump to be nonzero, since the rescaling convention divides by them.
pub fn rescale_drive(network: &NetworkSpec, j: usize) -> Result<f64> {
    let tilde = network.kpos[j].drive_final_rescaled;
    if tilde == 0.0 {
        return Ok(0.0);
    }
    let mut omega = tilde;
    for (l, kpo) in network.kpos.iter().enumerate() {
        if l == j {
            continue;
        }
        if kpo.pump_final == 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drive rescaling for KPO {j} needs a nonzero pump on KPO {l}"
            )));
        }
        omega *= (-kpo.pump_final / kpo.kerr).sqrt();
    }
    Ok(omega)
}

/// Scalar coefficient attached to one sparse Hamiltonian term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TermCoeff {
    /// Time-independent value.
    Const(f64),
    /// Δ(t).
    Delta,
    /// p_j(t) / 2 for KPO j (the two-photon terms carry the conventional half).
    PumpHalf(usize),
    /// Ω_j(t) for KPO j.
    Drive(usize),
}

/// One term of the Fock Hamiltonian: H(t) = Σ coeff(t) · op.
///
/// The list is closed under conjugate transpose (non-Hermitian ops appear in
/// dagger pairs with equal coefficients), so the sum is Hermitian term by term.
#[derive(Debug, Clone)]
pub struct FockTerm {
    pub op: SparseOp,
    pub coeff: TermCoeff,
}

impl NetworkSpec {
    /// Evaluates a term coefficient at time t.
    pub fn term_coeff_value(&self, coeff: &TermCoeff, t: f64) -> Result<f64> {
        Ok(match coeff {
            TermCoeff::Const(c) => *c,
            TermCoeff::Delta => self.delta_at(t)?,
            TermCoeff::PumpHalf(j) => 0.5 * self.pump_at(*j, t)?,
            TermCoeff::Drive(j) => self.drive_at(*j, t)?,
        })
    }
}

fn check_dims(network: &NetworkSpec, dims: &[usize]) -> Result<()> {
    if dims.len() != network.n_kpos() {
        return Err(Error::InvalidDimension(format!(
            "{} Fock dimensions for {} KPOs",
            dims.len(),
            network.n_kpos()
        )));
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::InvalidDimension(format!(
            "every mode needs at least 2 levels, got {d}"
        )));
    }
    Ok(())
}

/// Kronecker-embeds single-site sparse factors (site index, local operator) into the
/// product space, identity on every unlisted site. Factors must be listed per site at
/// most once; sites of a product of single-site operators commute, so any operator of
/// that shape is representable this way.
pub fn sparse_embed(factors: &[(usize, SparseOp)], dims: &[usize]) -> SparseOp {
    let mut out: Option<SparseOp> = None;
    for (site, &d) in dims.iter().enumerate() {
        let local = factors
            .iter()
            .find(|(s, _)| *s == site)
            .map(|(_, op)| op.clone())
            .unwrap_or_else(|| SparseOp::eye(d));
        out = Some(match out {
            None => local,
            Some(acc) => acc.kron(&local),
        });
    }
    out.expect("at least one site")
}

/// Builds the sparse term list of the Fock Hamiltonian for the given truncations.
///
/// Per KPO j: Kerr (K_j/2)·â†²â², detuning Δ(t)·n̂, two-photon pump
/// (p_j(t)/2)(â†² + â²), drive Ω_j(t)(â + â†). Per coupling: g times the photon
/// exchange (two-body) or pairwise exchange (four-body) plus conjugates.
pub fn fock_terms(network: &NetworkSpec, dims: &[usize]) -> Result<Vec<FockTerm>> {
    check_dims(network, dims)?;
    let mut terms = Vec::new();
    for (j, kpo) in network.kpos.iter().enumerate() {
        let d = dims[j];
        let a_dense = fock::annihilator(d)?;
        let a2_dense = a_dense.dot(&a_dense);
        let kerr_dense = linalg::dagger(&a2_dense).dot(&a2_dense);
        let a = SparseOp::from_dense(&a_dense);
        let ad = a.dagger();
        let n = SparseOp::from_dense(&fock::number_op(d)?);
        let a2 = SparseOp::from_dense(&a2_dense);
        let ad2 = a2.dagger();
        let kerr_local = SparseOp::from_dense(&kerr_dense);

        terms.push(FockTerm {
            op: sparse_embed(&[(j, kerr_local)], dims),
            coeff: TermCoeff::Const(0.5 * kpo.kerr),
        });
        terms.push(FockTerm {
            op: sparse_embed(&[(j, n)], dims),
            coeff: TermCoeff::Delta,
        });
        if kpo.pump_final != 0.0 {
            terms.push(FockTerm {
                op: sparse_embed(&[(j, ad2)], dims),
                coeff: TermCoeff::PumpHalf(j),
            });
            terms.push(FockTerm {
                op: sparse_embed(&[(j, a2)], dims),
                coeff: TermCoeff::PumpHalf(j),
            });
        }
        if kpo.drive_final_rescaled != 0.0 {
            terms.push(FockTerm {
                op: sparse_embed(&[(j, a)], dims),
                coeff: TermCoeff::Drive(j),
            });
            terms.push(FockTerm {
                op: sparse_embed(&[(j, ad)], dims),
                coeff: TermCoeff::Drive(j),
            });
        }
    }
    for coupling in &network.couplings {
        let factors: Vec<(usize, SparseOp)> = match coupling.kind {
            CouplingKind::TwoBody => {
                let (s0, s1) = (coupling.sites[0], coupling.sites[1]);
                vec![
                    (s0, SparseOp::from_dense(&fock::creator(dims[s0])?)),
                    (s1, SparseOp::from_dense(&fock::annihilator(dims[s1])?)),
                ]
            }
            CouplingKind::FourBody => {
                let s = &coupling.sites;
                vec![
                    (s[0], SparseOp::from_dense(&fock::creator(dims[s[0]])?)),
                    (s[1], SparseOp::from_dense(&fock::creator(dims[s[1]])?)),
                    (s[2], SparseOp::from_dense(&fock::annihilator(dims[s[2]])?)),
                    (s[3], SparseOp::from_dense(&fock::annihilator(dims[s[3]])?)),
                ]
            }
        };
        let op = sparse_embed(&factors, dims);
        let opd = op.dagger();
        terms.push(FockTerm {
            op,
            coeff: TermCoeff::Const(coupling.strength),
        });
        terms.push(FockTerm {
            op: opd,
            coeff: TermCoeff::Const(coupling.strength),
        });
    }
    Ok(terms)
}

/// Dense Fock Hamiltonian at time t. Intended for diagnostics and small networks; the
/// master-equation solver works from [`fock_terms`] directly and never materializes
/// this matrix.
pub fn hamiltonian_fock(network: &NetworkSpec, t: f64, dims: &[usize]) -> Result<Array2<C64>> {
    let terms = fock_terms(network, dims)?;
    let total: usize = dims.iter().product();
    let mut h = Array2::zeros((total, total));
    for term in &terms {
        let c = network.term_coeff_value(&term.coeff, t)?;
        if c != 0.0 {
            term.op.add_into_dense(&mut h, c);
        }
    }
    Ok(h)
}

/// Fock-space collapse operators with their rates: (â_j, κ_j/2) per lossy KPO and
/// (n̂_j, γ) per KPO under dephasing. Zero-rate channels are omitted.
pub fn collapse_operators_fock(
    network: &NetworkSpec,
    dims: &[usize],
) -> Result<Vec<(SparseOp, f64)>> {
    check_dims(network, dims)?;
    let mut ops = Vec::new();
    for (j, kpo) in network.kpos.iter().enumerate() {
        if kpo.photon_loss > 0.0 {
            let a = SparseOp::from_dense(&fock::annihilator(dims[j])?);
            ops.push((sparse_embed(&[(j, a)], dims), 0.5 * kpo.photon_loss));
        }
    }
    if network.dephasing > 0.0 {
        for j in 0..network.n_kpos() {
            let n = SparseOp::from_dense(&fock::number_op(dims[j])?);
            ops.push((sparse_embed(&[(j, n)], dims), network.dephasing));
        }
    }
    Ok(ops)
}

/// Dense single-site embedding into the 2^N spin space.
fn spin_embed(op: &Array2<C64>, site: usize, n_sites: usize) -> Array2<C64> {
    let eye = linalg::identity(2);
    let factors: Vec<&Array2<C64>> = (0..n_sites)
        .map(|s| if s == site { op } else { &eye })
        .collect();
    linalg::kron_chain(&factors)
}

/// Dense product of single-site 2x2 factors embedded into 2^N, identity elsewhere.
fn spin_embed_product(factors: &[(usize, Array2<C64>)], n_sites: usize) -> Array2<C64> {
    let eye = linalg::identity(2);
    let per_site: Vec<&Array2<C64>> = (0..n_sites)
        .map(|s| {
            factors
                .iter()
                .find(|(site, _)| *site == s)
                .map(|(_, op)| op)
                .unwrap_or(&eye)
        })
        .collect();
    linalg::kron_chain(&per_site)
}

fn check_alphas(network: &NetworkSpec, alphas: &[f64]) -> Result<()> {
    if alphas.len() != network.n_kpos() {
        return Err(Error::InvalidDimension(format!(
            "{} amplitudes for {} KPOs",
            alphas.len(),
            network.n_kpos()
        )));
    }
    Ok(())
}

/// Spin-projected Hamiltonian at time t, a 2^N × 2^N matrix in the per-site cat basis
/// (|+⟩, |−⟩).
///
/// Kerr and two-photon terms project to scalars; detuning contributes Δ(t)c_x σˣ_j
/// plus a scalar; the drive contributes Ω_j(t) times the cat flip; couplings are
/// tensor products of the projected single-site operators (exact, since the joint
/// projector factorizes). Scalars are kept — they cancel in commutators but shift the
/// spectrum, which the variational amplitude estimate maximizes over.
pub fn hamiltonian_spin(network: &NetworkSpec, alphas: &[f64], t: f64) -> Result<Array2<C64>> {
    check_alphas(network, alphas)?;
    let n = network.n_kpos();
    let dim = 1usize << n;
    let sets: Vec<SpinOperatorSet> = alphas.iter().map(|&a| spin::spin_operators(a)).collect();

    let mut h = Array2::<C64>::zeros((dim, dim));
    let mut scalar = 0.0;
    let delta = network.delta_at(t)?;
    for (j, set) in sets.iter().enumerate() {
        let kpo = &network.kpos[j];
        scalar += 0.5 * kpo.kerr * set.c_kerr;
        scalar += 0.5 * network.pump_at(j, t)? * set.c_two_photon;
        scalar += delta * set.c_id;
        // detuning: Δ c_x σˣ, diagonal in the cat basis
        let mut sx_part = Array2::<C64>::zeros((2, 2));
        sx_part[[0, 0]] = C64::new(delta * set.c_x, 0.0);
        sx_part[[1, 1]] = C64::new(-delta * set.c_x, 0.0);
        h += &spin_embed(&sx_part, j, n);
        let omega = network.drive_at(j, t)?;
        if omega != 0.0 {
            let drive = set.drive_matrix().mapv(|z| z * omega);
            h += &spin_embed(&drive, j, n);
        }
    }
    for coupling in &network.couplings {
        let factors: Vec<(usize, Array2<C64>)> = match coupling.kind {
            CouplingKind::TwoBody => {
                let (s0, s1) = (coupling.sites[0], coupling.sites[1]);
                vec![
                    (s0, linalg::dagger(&sets[s0].annihilator_matrix())),
                    (s1, sets[s1].annihilator_matrix()),
                ]
            }
            CouplingKind::FourBody => {
                let s = &coupling.sites;
                vec![
                    (s[0], linalg::dagger(&sets[s[0]].annihilator_matrix())),
                    (s[1], linalg::dagger(&sets[s[1]].annihilator_matrix())),
                    (s[2], sets[s[2]].annihilator_matrix()),
                    (s[3], sets[s[3]].annihilator_matrix()),
                ]
            }
        };
        let op = spin_embed_product(&factors, n);
        let opd = linalg::dagger(&op);
        let g = C64::new(coupling.strength, 0.0);
        h += &op.mapv(|z| z * g);
        h += &opd.mapv(|z| z * g);
    }
    for i in 0..dim {
        h[[i, i]] += C64::new(scalar, 0.0);
    }
    Ok(h)
}

/// Spin-projected collapse operators with rates: the projected annihilator per lossy
/// KPO at rate κ_j/2, and the traceless part of the projected number operator
/// (c_x σˣ_j) per KPO at rate γ. The identity part of n̂ is dropped — dissipators are
/// invariant under constant shifts of their operator.
pub fn collapse_operators_spin(
    network: &NetworkSpec,
    alphas: &[f64],
) -> Result<Vec<(Array2<C64>, f64)>> {
    check_alphas(network, alphas)?;
    let n = network.n_kpos();
    let mut ops = Vec::new();
    for (j, kpo) in network.kpos.iter().enumerate() {
        if kpo.photon_loss > 0.0 {
            let set = spin::spin_operators(alphas[j]);
            ops.push((
                spin_embed(&set.annihilator_matrix(), j, n),
                0.5 * kpo.photon_loss,
            ));
        }
    }
    if network.dephasing > 0.0 {
        for j in 0..n {
            let set = spin::spin_operators(alphas[j]);
            let mut sx = Array2::<C64>::zeros((2, 2));
            sx[[0, 0]] = C64::new(set.c_x, 0.0);
            sx[[1, 1]] = C64::new(-set.c_x, 0.0);
            ops.push((spin_embed(&sx, j, n), network.dephasing));
        }
    }
    Ok(ops)
}

/// Classical (coherent-product) energy of a sign configuration s⃗ at amplitudes α⃗:
/// Σ_couplings 2g Π_sites (α s) + Σ_j 2 Ω_j(t) α_j s_j.
///
/// Spin-independent contributions (Kerr, pump, detuning) are omitted; only energy
/// *differences* between configurations are meaningful here.
pub fn classical_energy(
    network: &NetworkSpec,
    signs: &[f64],
    alphas: &[f64],
    t: f64,
) -> Result<f64> {
    check_alphas(network, alphas)?;
    if signs.len() != network.n_kpos() {
        return Err(Error::InvalidDimension(format!(
            "{} signs for {} KPOs",
            signs.len(),
            network.n_kpos()
        )));
    }
    if let Some(&s) = signs.iter().find(|&&s| s.abs() != 1.0) {
        return Err(Error::InvalidParameter(format!(
            "spin signs must be exactly +1 or -1, got {s}"
        )));
    }
    let mut energy = 0.0;
    for coupling in &network.couplings {
        let mut prod = 2.0 * coupling.strength;
        for &site in &coupling.sites {
            prod *= alphas[site] * signs[site];
        }
        energy += prod;
    }
    for j in 0..network.n_kpos() {
        energy += 2.0 * network.drive_at(j, t)? * alphas[j] * signs[j];
    }
    Ok(energy)
}
