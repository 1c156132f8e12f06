//! Single-run execution and result serialization.
//!
//! A run takes one network through the full schedule with one of three methods and
//! produces a [`SimulationResult`]: per-site occupation series, outcome-probability
//! series over the sigma-z product configurations, leakage (Fock methods), and the
//! readout-window averages that downstream comparisons consume. The headline
//! `outcome_probabilities` are the time averages over the readout window; the
//! instantaneous end-of-run values are recorded alongside since the two genuinely
//! differ.
//!
//! Results serialize to a single CSV file with a commented metadata header; the loader
//! reverses it losslessly (floats are written in shortest round-trip form). Wall time
//! is recorded in the metadata but never participates in comparisons, so repeated runs
//! with one seed produce identical tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::fock;
use crate::linalg::SparseOp;
use crate::model::{self, NetworkSpec};
use crate::solvers::master::{evolve_master, FockLindblad, LindbladOptions, SpinLindblad};
use crate::solvers::observables::{
    fock_outcome_kets, outcome_labels, outcome_probabilities, readout_average, spin_outcome_kets,
};
use crate::solvers::rk::StepControl;
use crate::solvers::trajectories::{run_trajectories, EnsembleOptions};
use crate::spin::{self, build_alpha_trajectory, AlphaMethod};
use crate::C64;

use super::config::{resolve_dims, RunSpec};

/// Fraction of readout-window leakage above which the cat-subspace readout is flagged
/// as unreliable in the run metadata.
pub const LEAKAGE_WARNING_THRESHOLD: f64 = 0.2;

/// Which representation and evolution engine a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Projected spin-1/2 model, master equation in the 2^n cat basis.
    Spin,
    /// Truncated Fock space, dense Lindblad master equation.
    FockMaster,
    /// Truncated Fock space, Monte-Carlo wave-function ensemble.
    FockTrajectories,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Spin, Method::FockMaster, Method::FockTrajectories];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Spin => "spin",
            Method::FockMaster => "fock_master",
            Method::FockTrajectories => "fock_trajectories",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "spin" => Ok(Method::Spin),
            "fock_master" | "fock-master" => Ok(Method::FockMaster),
            "fock_trajectories" | "fock-trajectories" => Ok(Method::FockTrajectories),
            other => Err(format!(
                "unknown method \"{other}\" (expected spin, fock_master, or fock_trajectories)"
            )),
        }
    }
}

/// Everything recorded about a run besides the data itself.
#[derive(Debug, Clone)]
pub struct RunMetadata {
    pub seed: u64,
    pub rtol: f64,
    pub atol: f64,
    /// Ensemble size (trajectory runs only).
    pub n_traj: Option<usize>,
    /// Amplitude estimator (spin runs only).
    pub alpha_method: Option<AlphaMethod>,
    /// Fock levels per oscillator (Fock runs only).
    pub dims: Option<Vec<usize>>,
    pub readout_window: (f64, f64),
    /// Readout-window mean leakage (Fock runs only).
    pub mean_leakage: Option<f64>,
    /// Readout-window mean leakage exceeded [`LEAKAGE_WARNING_THRESHOLD`].
    pub leakage_warning: bool,
    pub wall_seconds: f64,
    /// Worst trace deviation over the run (master-equation runs).
    pub max_trace_dev: Option<f64>,
    /// Worst Hermiticity deviation over the run (master-equation runs).
    pub max_herm_dev: Option<f64>,
    /// Positivity certificate held at every sample (master-equation runs).
    pub positive_certified: Option<bool>,
    /// Ensemble mean jump count (trajectory runs).
    pub mean_jumps: Option<f64>,
}

/// Output of one (network, method) run over the full schedule.
#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub method: Method,
    /// Outcome labels, one per sigma-z product configuration, lexicographic.
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// Per-site occupation ⟨n̂_j⟩ series, rows aligned with `times`. Spin runs record
    /// the projected equivalent c_id(α_j) + c_x(α_j)·⟨σ̃ˣ_j⟩.
    pub occupations: Array2<f64>,
    /// Outcome-probability series, one column per label.
    pub outcome_series: Array2<f64>,
    /// Leakage outside the cat manifold per row (Fock runs only; the spin basis spans
    /// its whole space).
    pub leakage_series: Option<Vec<f64>>,
    /// Per-column standard errors of `outcome_series` (trajectory runs only).
    pub se_outcome_series: Option<Array2<f64>>,
    /// Readout-window averages, renormalized over the configurations.
    pub outcome_probabilities: BTreeMap<String, f64>,
    /// Instantaneous probabilities at the final grid point.
    pub final_probabilities: BTreeMap<String, f64>,
    /// Readout-window-averaged standard errors (trajectory runs only), conservative.
    pub outcome_se: Option<BTreeMap<String, f64>>,
    /// Argmax of `outcome_probabilities`; ties resolved to the lexicographically
    /// smallest label and flagged in `tie`.
    pub most_likely: String,
    pub tie: bool,
    pub metadata: RunMetadata,
}

fn step_control(spec: &RunSpec) -> StepControl {
    StepControl {
        rtol: spec.settings.rtol,
        atol: spec.settings.atol,
        ..StepControl::default()
    }
}

/// Argmax over a lexicographically ordered table; ties go to the smallest label.
fn most_likely_of(table: &BTreeMap<String, f64>) -> (String, bool) {
    let mut best: Option<(&str, f64)> = None;
    let mut tie = false;
    for (label, &p) in table {
        match best {
            None => best = Some((label, p)),
            Some((_, q)) => {
                if p > q + 1e-12 {
                    best = Some((label, p));
                    tie = false;
                } else if (p - q).abs() <= 1e-12 {
                    tie = true;
                }
            }
        }
    }
    let (label, _) = best.expect("nonempty outcome table");
    (label.to_string(), tie)
}

fn renormalized(labels: &[String], values: Vec<f64>) -> BTreeMap<String, f64> {
    let total: f64 = values.iter().sum();
    labels
        .iter()
        .cloned()
        .zip(values)
        .map(|(l, v)| (l, if total > 0.0 { v / total } else { v }))
        .collect()
}

/// Runs one method over the full schedule for an in-memory spec.
pub fn execute(spec: &RunSpec, method: Method) -> Result<SimulationResult> {
    let start = Instant::now();
    let network = &spec.network;
    network.validate()?;
    let n = network.n_kpos();
    let labels = outcome_labels(n);
    let times = network.schedule.output_grid();
    let window = network.schedule.readout_window();
    let n_rows = times.len();
    let n_out = labels.len();

    let mut occupations = Array2::zeros((n_rows, n));
    let mut outcome_series = Array2::zeros((n_rows, n_out));
    let mut leakage_series: Option<Vec<f64>> = None;
    let mut se_outcome_series: Option<Array2<f64>> = None;
    let mut metadata = RunMetadata {
        seed: spec.settings.seed,
        rtol: spec.settings.rtol,
        atol: spec.settings.atol,
        n_traj: None,
        alpha_method: None,
        dims: None,
        readout_window: window,
        mean_leakage: None,
        leakage_warning: false,
        wall_seconds: 0.0,
        max_trace_dev: None,
        max_herm_dev: None,
        positive_certified: None,
        mean_jumps: None,
    };

    let opts = LindbladOptions {
        control: step_control(spec),
        ..LindbladOptions::default()
    };

    match method {
        Method::Spin => {
            metadata.alpha_method = Some(spec.settings.alpha_method);
            let trajectory = build_alpha_trajectory_with(spec)?;
            let kets = spin_outcome_kets(n);
            let dim = 1usize << n;
            let mut rho0 = Array2::zeros((dim, dim));
            rho0[[0, 0]] = C64::new(1.0, 0.0);
            let mut alphas = vec![0.0; n];
            let traj_for_rows = trajectory.clone();
            let mut rhs = SpinLindblad::new(network, trajectory)?;
            let out = evolve_master(&mut rhs, rho0, &times, &opts, |row, t, rho| {
                let (p, _) = outcome_probabilities(&kets, rho);
                for (k, v) in p.iter().enumerate() {
                    outcome_series[[row, k]] = *v;
                }
                traj_for_rows.fill_at(t, &mut alphas);
                for j in 0..n {
                    occupations[[row, j]] = projected_occupation(rho, j, n, alphas[j]);
                }
                Ok(())
            })?;
            metadata.max_trace_dev = Some(out.integrity.max_trace_dev);
            metadata.max_herm_dev = Some(out.integrity.max_herm_dev);
            metadata.positive_certified = Some(out.integrity.all_positive_certified);
        }
        Method::FockMaster => {
            let dims = resolve_dims(spec)?;
            let kets = readout_kets(network, &dims)?;
            let numbers = number_operators(network, &dims)?;
            let dim: usize = dims.iter().product();
            let mut rho0 = Array2::zeros((dim, dim));
            rho0[[0, 0]] = C64::new(1.0, 0.0);
            let mut leakage = vec![0.0; n_rows];
            let mut rhs = FockLindblad::new(network, &dims)?;
            let out = evolve_master(&mut rhs, rho0, &times, &opts, |row, _, rho| {
                let (p, leak) = outcome_probabilities(&kets, rho);
                for (k, v) in p.iter().enumerate() {
                    outcome_series[[row, k]] = *v;
                }
                leakage[row] = leak;
                for (j, nop) in numbers.iter().enumerate() {
                    occupations[[row, j]] =
                        crate::solvers::observables::expectation_sparse_density(nop, rho).re;
                }
                Ok(())
            })?;
            metadata.dims = Some(dims);
            metadata.max_trace_dev = Some(out.integrity.max_trace_dev);
            metadata.max_herm_dev = Some(out.integrity.max_herm_dev);
            metadata.positive_certified = Some(out.integrity.all_positive_certified);
            leakage_series = Some(leakage);
        }
        Method::FockTrajectories => {
            let dims = resolve_dims(spec)?;
            let kets = readout_kets(network, &dims)?;
            let ens_opts = EnsembleOptions {
                control: step_control(spec),
                n_traj: spec.settings.n_traj,
                seed: spec.settings.seed,
            };
            let res = run_trajectories(network, &dims, &times, &kets, &ens_opts)?;
            occupations = res.mean_occupations;
            outcome_series = res.mean_outcomes;
            se_outcome_series = Some(res.se_outcomes);
            leakage_series = Some(res.mean_leakage.to_vec());
            metadata.dims = Some(dims);
            metadata.n_traj = Some(spec.settings.n_traj);
            metadata.mean_jumps = Some(res.mean_jumps);
        }
    }

    // readout-window averages: per-configuration trapezoids, renormalized
    let mut averaged = Vec::with_capacity(n_out);
    for k in 0..n_out {
        let column: Vec<f64> = (0..n_rows).map(|r| outcome_series[[r, k]]).collect();
        averaged.push(readout_average(&times, &column, window)?);
    }
    let outcome_probabilities = renormalized(&labels, averaged);
    let final_probabilities: BTreeMap<String, f64> = labels
        .iter()
        .cloned()
        .zip((0..n_out).map(|k| outcome_series[[n_rows - 1, k]]))
        .collect();
    let outcome_se = se_outcome_series.as_ref().map(|se| {
        labels
            .iter()
            .cloned()
            .zip((0..n_out).map(|k| {
                let column: Vec<f64> = (0..n_rows).map(|r| se[[r, k]]).collect();
                readout_average(&times, &column, window).unwrap_or(f64::NAN)
            }))
            .collect()
    });

    if let Some(leak) = &leakage_series {
        let mean_leak = readout_average(&times, leak, window)?;
        metadata.mean_leakage = Some(mean_leak);
        metadata.leakage_warning = mean_leak > LEAKAGE_WARNING_THRESHOLD;
    }

    let (most_likely, tie) = most_likely_of(&outcome_probabilities);
    metadata.wall_seconds = start.elapsed().as_secs_f64();

    Ok(SimulationResult {
        method,
        labels,
        times,
        occupations,
        outcome_series,
        leakage_series,
        se_outcome_series,
        outcome_probabilities,
        final_probabilities,
        outcome_se,
        most_likely,
        tie,
        metadata,
    })
}

/// Loads a config, runs one method, and optionally writes the result CSV.
pub fn run_single(config: &Path, method: Method, out: Option<&Path>) -> Result<SimulationResult> {
    let doc = super::config::load_config(config)?;
    let result = execute(&doc.spec, method)?;
    if let Some(path) = out {
        std::fs::write(path, result.to_csv())?;
    }
    Ok(result)
}

fn build_alpha_trajectory_with(spec: &RunSpec) -> Result<spin::AlphaTrajectory> {
    let mut network = spec.network.clone();
    network.schedule.grid_points = network.schedule.grid_points.max(spec.settings.alpha_grid_points);
    build_alpha_trajectory(&network, spec.settings.alpha_method)
}

/// Outcome kets at the readout amplitudes (the pump is flat after t_s, so the
/// analytic amplitude at the end of the schedule is the readout amplitude).
fn readout_kets(network: &NetworkSpec, dims: &[usize]) -> Result<Vec<Array1<C64>>> {
    let t_end = network.schedule.total_time();
    let alphas = (0..network.n_kpos())
        .map(|j| network.alpha_analytic_at(j, t_end))
        .collect::<Result<Vec<f64>>>()?;
    fock_outcome_kets(&alphas, dims)
}

fn number_operators(network: &NetworkSpec, dims: &[usize]) -> Result<Vec<SparseOp>> {
    (0..network.n_kpos())
        .map(|j| {
            let n_local = SparseOp::from_dense(&fock::number_op(dims[j])?);
            Ok(model::sparse_embed(&[(j, n_local)], dims))
        })
        .collect()
}

/// ⟨n̂_j⟩ through the projection: c_id + c_x·⟨σ̃ˣ_j⟩, where σ̃ˣ is diagonal in the
/// cat basis and ⟨σ̃ˣ_j⟩ is the population difference of site j's marginal.
fn projected_occupation(rho: &Array2<C64>, j: usize, n: usize, alpha: f64) -> f64 {
    let set = spin::spin_operators(alpha);
    let dim = 1usize << n;
    let mut balance = 0.0;
    for i in 0..dim {
        let bit = (i >> (n - 1 - j)) & 1;
        let sign = 1.0 - 2.0 * bit as f64;
        balance += sign * rho[[i, i]].re;
    }
    set.c_id + set.c_x * balance
}

// --- CSV serialization ---------------------------------------------------------

fn fmt_f64(x: f64) -> String {
    // shortest representation that round-trips exactly
    format!("{x}")
}

impl SimulationResult {
    /// Serializes the result to CSV with a commented metadata header.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str("# kpo-sim result v1\n");
        s.push_str(&format!("# method = {}\n", self.method));
        let m = &self.metadata;
        s.push_str(&format!("# seed = {}\n", m.seed));
        s.push_str(&format!("# rtol = {}\n", fmt_f64(m.rtol)));
        s.push_str(&format!("# atol = {}\n", fmt_f64(m.atol)));
        if let Some(n_traj) = m.n_traj {
            s.push_str(&format!("# n_traj = {n_traj}\n"));
        }
        if let Some(am) = m.alpha_method {
            let name = match am {
                AlphaMethod::Analytic => "analytic",
                AlphaMethod::Variational => "variational",
            };
            s.push_str(&format!("# alpha_method = {name}\n"));
        }
        if let Some(dims) = &m.dims {
            let joined: Vec<String> = dims.iter().map(|d| d.to_string()).collect();
            s.push_str(&format!("# dims = {}\n", joined.join(" ")));
        }
        s.push_str(&format!(
            "# readout_window = {} {}\n",
            fmt_f64(m.readout_window.0),
            fmt_f64(m.readout_window.1)
        ));
        if let Some(v) = m.mean_leakage {
            s.push_str(&format!("# mean_leakage = {}\n", fmt_f64(v)));
        }
        s.push_str(&format!("# leakage_warning = {}\n", m.leakage_warning));
        if let Some(v) = m.max_trace_dev {
            s.push_str(&format!("# max_trace_dev = {}\n", fmt_f64(v)));
        }
        if let Some(v) = m.max_herm_dev {
            s.push_str(&format!("# max_herm_dev = {}\n", fmt_f64(v)));
        }
        if let Some(v) = m.positive_certified {
            s.push_str(&format!("# positive_certified = {v}\n"));
        }
        if let Some(v) = m.mean_jumps {
            s.push_str(&format!("# mean_jumps = {}\n", fmt_f64(v)));
        }
        s.push_str(&format!("# wall_seconds = {}\n", fmt_f64(m.wall_seconds)));
        for (label, p) in &self.outcome_probabilities {
            s.push_str(&format!("# outcome {label} = {}\n", fmt_f64(*p)));
        }
        for (label, p) in &self.final_probabilities {
            s.push_str(&format!("# final {label} = {}\n", fmt_f64(*p)));
        }
        if let Some(se) = &self.outcome_se {
            for (label, v) in se {
                s.push_str(&format!("# outcome_se {label} = {}\n", fmt_f64(*v)));
            }
        }
        s.push_str(&format!("# most_likely = {}\n", self.most_likely));
        s.push_str(&format!("# tie = {}\n", self.tie));

        // column header
        let n = self.occupations.ncols();
        let mut cols = vec!["t".to_string()];
        cols.extend((0..n).map(|j| format!("n{j}")));
        cols.extend(self.labels.iter().map(|l| format!("p_{l}")));
        if self.leakage_series.is_some() {
            cols.push("leakage".to_string());
        }
        if self.se_outcome_series.is_some() {
            cols.extend(self.labels.iter().map(|l| format!("se_p_{l}")));
        }
        s.push_str(&cols.join(","));
        s.push('\n');

        for (row, &t) in self.times.iter().enumerate() {
            let mut fields = vec![fmt_f64(t)];
            for j in 0..n {
                fields.push(fmt_f64(self.occupations[[row, j]]));
            }
            for k in 0..self.labels.len() {
                fields.push(fmt_f64(self.outcome_series[[row, k]]));
            }
            if let Some(leak) = &self.leakage_series {
                fields.push(fmt_f64(leak[row]));
            }
            if let Some(se) = &self.se_outcome_series {
                for k in 0..self.labels.len() {
                    fields.push(fmt_f64(se[[row, k]]));
                }
            }
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    /// Parses a result CSV produced by [`SimulationResult::to_csv`].
    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |detail: &str| Error::ResultParse(detail.to_string());

        let mut meta: BTreeMap<String, String> = BTreeMap::new();
        let mut outcome_probabilities = BTreeMap::new();
        let mut final_probabilities = BTreeMap::new();
        let mut outcome_se_map: BTreeMap<String, f64> = BTreeMap::new();
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<Vec<f64>> = Vec::new();

        for line in text.lines() {
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.trim();
                if let Some((key, value)) = comment.split_once('=') {
                    let key = key.trim().to_string();
                    let value = value.trim().to_string();
                    if let Some(label) = key.strip_prefix("outcome_se ") {
                        outcome_se_map.insert(
                            label.to_string(),
                            value.parse().map_err(|_| bad("bad outcome_se value"))?,
                        );
                    } else if let Some(label) = key.strip_prefix("outcome ") {
                        outcome_probabilities.insert(
                            label.to_string(),
                            value.parse().map_err(|_| bad("bad outcome value"))?,
                        );
                    } else if let Some(label) = key.strip_prefix("final ") {
                        final_probabilities.insert(
                            label.to_string(),
                            value.parse().map_err(|_| bad("bad final value"))?,
                        );
                    } else {
                        meta.insert(key, value);
                    }
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                header = Some(line.split(',').map(|c| c.to_string()).collect());
                continue;
            }
            let row = line
                .split(',')
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|_| bad("non-numeric data row"))?;
            rows.push(row);
        }

        let header = header.ok_or_else(|| bad("missing column header"))?;
        let get = |key: &str| {
            meta.get(key)
                .ok_or_else(|| Error::ResultParse(format!("missing metadata key \"{key}\"")))
        };

        let method: Method = get("method")?.parse().map_err(Error::ResultParse)?;
        let labels: Vec<String> = header
            .iter()
            .filter_map(|c| c.strip_prefix("p_").map(|l| l.to_string()))
            .collect();
        if labels.is_empty() {
            return Err(bad("no outcome columns"));
        }
        let n = header.iter().filter(|c| {
            c.starts_with('n') && c[1..].chars().all(|ch| ch.is_ascii_digit()) && c.len() > 1
        }).count();
        let has_leakage = header.iter().any(|c| c == "leakage");
        let has_se = header.iter().any(|c| c.starts_with("se_p_"));
        let expect_cols =
            1 + n + labels.len() + usize::from(has_leakage) + if has_se { labels.len() } else { 0 };
        if header.len() != expect_cols {
            return Err(bad("unexpected column layout"));
        }

        let n_rows = rows.len();
        let mut times = Vec::with_capacity(n_rows);
        let mut occupations = Array2::zeros((n_rows, n));
        let mut outcome_series = Array2::zeros((n_rows, labels.len()));
        let mut leakage_series = has_leakage.then(|| vec![0.0; n_rows]);
        let mut se_outcome_series = has_se.then(|| Array2::zeros((n_rows, labels.len())));
        for (r, row) in rows.iter().enumerate() {
            if row.len() != expect_cols {
                return Err(bad("row width mismatch"));
            }
            let mut i = 0;
            times.push(row[i]);
            i += 1;
            for j in 0..n {
                occupations[[r, j]] = row[i];
                i += 1;
            }
            for k in 0..labels.len() {
                outcome_series[[r, k]] = row[i];
                i += 1;
            }
            if let Some(leak) = &mut leakage_series {
                leak[r] = row[i];
                i += 1;
            }
            if let Some(se) = &mut se_outcome_series {
                for k in 0..labels.len() {
                    se[[r, k]] = row[i];
                    i += 1;
                }
            }
        }

        let window_text = get("readout_window")?;
        let mut parts = window_text.split_whitespace();
        let readout_window = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (
                a.parse().map_err(|_| bad("bad readout_window"))?,
                b.parse().map_err(|_| bad("bad readout_window"))?,
            ),
            _ => return Err(bad("bad readout_window")),
        };

        let parse_opt_f64 = |key: &str| -> Result<Option<f64>> {
            meta.get(key)
                .map(|v| v.parse::<f64>().map_err(|_| bad("bad float metadata")))
                .transpose()
        };

        let metadata = RunMetadata {
            seed: get("seed")?.parse().map_err(|_| bad("bad seed"))?,
            rtol: get("rtol")?.parse().map_err(|_| bad("bad rtol"))?,
            atol: get("atol")?.parse().map_err(|_| bad("bad atol"))?,
            n_traj: meta
                .get("n_traj")
                .map(|v| v.parse().map_err(|_| bad("bad n_traj")))
                .transpose()?,
            alpha_method: meta
                .get("alpha_method")
                .map(|v| super::config::parse_alpha_method(v))
                .transpose()?,
            dims: meta
                .get("dims")
                .map(|v| {
                    v.split_whitespace()
                        .map(|d| d.parse().map_err(|_| bad("bad dims")))
                        .collect::<Result<Vec<usize>>>()
                })
                .transpose()?,
            readout_window,
            mean_leakage: parse_opt_f64("mean_leakage")?,
            leakage_warning: get("leakage_warning")?
                .parse()
                .map_err(|_| bad("bad leakage_warning"))?,
            wall_seconds: get("wall_seconds")?
                .parse()
                .map_err(|_| bad("bad wall_seconds"))?,
            max_trace_dev: parse_opt_f64("max_trace_dev")?,
            max_herm_dev: parse_opt_f64("max_herm_dev")?,
            positive_certified: meta
                .get("positive_certified")
                .map(|v| v.parse().map_err(|_| bad("bad positive_certified")))
                .transpose()?,
            mean_jumps: parse_opt_f64("mean_jumps")?,
        };

        Ok(SimulationResult {
            method,
            labels,
            times,
            occupations,
            outcome_series,
            leakage_series,
            se_outcome_series,
            outcome_probabilities,
            final_probabilities,
            outcome_se: (!outcome_se_map.is_empty()).then_some(outcome_se_map),
            most_likely: get("most_likely")?.clone(),
            tie: get("tie")?.parse().map_err(|_| bad("bad tie"))?,
            metadata,
        })
    }

    /// Loads a result CSV from disk.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::ResultParse(d) => Error::ResultParse(format!("{}: {d}", path.display())),
            other => other,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    const LONE: &str = r#"
[[kpos]]
kerr_mhz = -12.6
pump_mhz = 6.0

[schedule]
t_s_us = 0.4
t_sp_us = 0.1
t_rd_us = 0.3
t_r_us = 0.2
delta0_mhz = -20.0
grid_points = 40

[fock]
dims = [12]
"#;

    #[test]
    fn a_noiseless_symmetric_kpo_reads_out_half_half_with_tiny_leakage() {
        let doc = parse_config(LONE).unwrap();
        let res = execute(&doc.spec, Method::FockMaster).unwrap();

        // symmetric under sign flip of the field: the cat stays an even superposition
        let p_plus = res.outcome_probabilities["+"];
        let p_minus = res.outcome_probabilities["-"];
        assert!((p_plus - 0.5).abs() < 1e-3, "p(+) = {p_plus}");
        assert!((p_minus - 0.5).abs() < 1e-3, "p(-) = {p_minus}");
        assert!(res.tie, "an exact symmetry should flag the argmax tie");

        // the ramp is short enough that adiabatic following is imperfect; a few
        // tenths of a percent end up outside the instantaneous cat manifold
        let leak = res.leakage_series.as_ref().unwrap();
        assert!(
            (1e-6..1e-2).contains(leak.last().unwrap()),
            "final leakage = {}",
            leak.last().unwrap()
        );
        assert!(!res.metadata.leakage_warning);
        assert!(res.metadata.max_trace_dev.unwrap() < 1e-6);
    }

    #[test]
    fn spin_and_fock_master_agree_on_a_driven_pair() {
        // moderate pumps keep the Fock dimensions honest and the run fast; the
        // positive drive on site 0 plus a ferromagnetic coupling single out "++"
        let text = r#"
gamma_khz = 7.7

[[kpos]]
kerr_mhz = -12.6
pump_mhz = 12.0
drive_rescaled_mhz = 2.0
kappa_mhz = 1.1

[[kpos]]
kerr_mhz = -12.6
pump_mhz = 16.0
kappa_mhz = 1.3

[[couplings]]
kind = "two_body"
sites = [0, 1]
g_mhz = 2.0

[schedule]
t_s_us = 0.3
t_sp_us = 0.05
t_rd_us = 0.2
t_r_us = 0.1
delta0_mhz = -20.0
grid_points = 20

[fock]
dims = [9, 10]
"#;
        let doc = parse_config(text).unwrap();
        let spin = execute(&doc.spec, Method::Spin).unwrap();
        assert_eq!(spin.most_likely, "++");
        assert!(spin.leakage_series.is_none());
        assert!(!spin.tie);
        // probabilities sum to one by construction; the series rows do too
        let sum: f64 = spin.outcome_probabilities.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        let fock = execute(&doc.spec, Method::FockMaster).unwrap();
        assert_eq!(fock.most_likely, "++");
        assert!(fock.metadata.mean_leakage.is_some());
        assert_eq!(spin.labels, fock.labels);
    }

    #[test]
    fn trajectory_runs_carry_ensemble_diagnostics() {
        let text = LONE.replace("pump_mhz = 6.0", "pump_mhz = 6.0\nkappa_mhz = 1.1");
        let text = format!("{text}\n[solver]\nn_traj = 16\nseed = 5\n");
        let doc = parse_config(&text).unwrap();
        let res = execute(&doc.spec, Method::FockTrajectories).unwrap();
        assert_eq!(res.metadata.n_traj, Some(16));
        assert!(res.se_outcome_series.is_some());
        assert!(res.outcome_se.is_some());
        assert!(res.metadata.mean_jumps.is_some());
        let sum: f64 = res.outcome_probabilities.values().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn results_round_trip_through_the_csv_loader() {
        let text = LONE.replace("pump_mhz = 6.0", "pump_mhz = 6.0\nkappa_mhz = 1.1");
        let text = format!("{text}\n[solver]\nn_traj = 8\nseed = 9\n");
        let doc = parse_config(&text).unwrap();
        for method in [Method::FockMaster, Method::FockTrajectories, Method::Spin] {
            let res = execute(&doc.spec, method).unwrap();
            let csv = res.to_csv();
            let back = SimulationResult::from_csv(&csv).unwrap();

            assert_eq!(back.method, res.method);
            assert_eq!(back.labels, res.labels);
            assert_eq!(back.times, res.times);
            assert_eq!(back.occupations, res.occupations);
            assert_eq!(back.outcome_series, res.outcome_series);
            assert_eq!(back.leakage_series, res.leakage_series);
            assert_eq!(back.se_outcome_series, res.se_outcome_series);
            assert_eq!(back.outcome_probabilities, res.outcome_probabilities);
            assert_eq!(back.final_probabilities, res.final_probabilities);
            assert_eq!(back.outcome_se, res.outcome_se);
            assert_eq!(back.most_likely, res.most_likely);
            assert_eq!(back.tie, res.tie);
            assert_eq!(back.metadata.seed, res.metadata.seed);
            assert_eq!(back.metadata.dims, res.metadata.dims);
            assert_eq!(back.metadata.mean_leakage, res.metadata.mean_leakage);
            assert_eq!(back.metadata.wall_seconds, res.metadata.wall_seconds);
            assert_eq!(back.metadata.max_trace_dev, res.metadata.max_trace_dev);
            // serializing again is byte-identical
            assert_eq!(back.to_csv(), csv);
        }
    }

    #[test]
    fn readout_averages_differ_from_instantaneous_finals() {
        // with loss and a symmetry-breaking drive, the outcome distribution keeps
        // drifting through the readout window, so the window average and the final
        // snapshot must not coincide (an undriven KPO would stay at 1/2 exactly)
        let text = LONE.replace(
            "pump_mhz = 6.0",
            "pump_mhz = 6.0\nkappa_mhz = 1.1\ndrive_rescaled_mhz = 1.0",
        );
        let doc = parse_config(&text).unwrap();
        let res = execute(&doc.spec, Method::FockMaster).unwrap();
        let avg = res.outcome_probabilities["+"];
        let fin = res.final_probabilities["+"];
        assert!(
            (avg - fin).abs() > 1e-12,
            "window average {avg} vs final {fin}"
        );
    }
}
