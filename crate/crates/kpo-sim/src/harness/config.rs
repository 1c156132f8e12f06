//! Config-file ingestion and parameter-path resolution.
//!
//! Files are TOML. All frequency-like keys take cycles-based values as suffixed
//! (`*_mhz`, `*_khz`); the loader converts to the crate's angular rad/us convention.
//! Times are microseconds. Unknown keys are rejected so typos fail loudly, and a
//! missing required key is reported by name with the file path.
//!
//! Sweeps override scalar parameters through dotted paths that mirror the file
//! layout, e.g. `kpos[1].drive_rescaled_mhz` or `schedule.drive_exponent`; the same
//! cycles-to-angular conversion applies per key.

use std::f64::consts::TAU;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::fock;
use crate::model::{CouplingKind, CouplingSpec, KpoSpec, NetworkSpec, ScheduleSpec};
use crate::spin::AlphaMethod;

use super::runner::Method;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileKpo {
    kerr_mhz: f64,
    pump_mhz: f64,
    #[serde(default)]
    drive_rescaled_mhz: f64,
    #[serde(default)]
    kappa_mhz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileCoupling {
    kind: String,
    sites: Vec<usize>,
    g_mhz: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSchedule {
    t_s_us: f64,
    t_sp_us: f64,
    t_rd_us: f64,
    t_r_us: f64,
    delta0_mhz: f64,
    #[serde(default = "default_pump_exponent")]
    pump_exponent: f64,
    #[serde(default = "default_drive_exponent")]
    drive_exponent: f64,
    #[serde(default = "default_grid_points")]
    grid_points: usize,
}

fn default_pump_exponent() -> f64 {
    2.5
}
fn default_drive_exponent() -> f64 {
    1.0
}
fn default_grid_points() -> usize {
    200
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSolver {
    #[serde(default = "default_rtol")]
    rtol: f64,
    #[serde(default = "default_atol")]
    atol: f64,
    #[serde(default = "default_n_traj")]
    n_traj: usize,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_rtol() -> f64 {
    1e-8
}
fn default_atol() -> f64 {
    1e-10
}
fn default_n_traj() -> usize {
    400
}
fn default_seed() -> u64 {
    1
}

impl Default for FileSolver {
    fn default() -> Self {
        FileSolver {
            rtol: default_rtol(),
            atol: default_atol(),
            n_traj: default_n_traj(),
            seed: default_seed(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileFock {
    /// Fock levels per oscillator. Defaults to the truncation rule applied to the
    /// final amplitude of each KPO.
    dims: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAlpha {
    #[serde(default = "default_alpha_method")]
    method: String,
    #[serde(default = "default_alpha_grid")]
    grid_points: usize,
}

fn default_alpha_method() -> String {
    "variational".to_string()
}
fn default_alpha_grid() -> usize {
    256
}

impl Default for FileAlpha {
    fn default() -> Self {
        FileAlpha {
            method: default_alpha_method(),
            grid_points: default_alpha_grid(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSweepAxis {
    path: String,
    values: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSweep {
    axes: Vec<FileSweepAxis>,
    methods: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    kpos: Vec<FileKpo>,
    #[serde(default)]
    couplings: Vec<FileCoupling>,
    #[serde(default)]
    gamma_khz: f64,
    schedule: FileSchedule,
    #[serde(default)]
    solver: FileSolver,
    #[serde(default)]
    fock: FileFock,
    #[serde(default)]
    alpha: FileAlpha,
    sweep: Option<FileSweep>,
}

/// Settings that accompany a network through a run: integration tolerances, ensemble
/// size and seed, Fock truncation, and the amplitude-trajectory estimator.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub rtol: f64,
    pub atol: f64,
    pub n_traj: usize,
    pub seed: u64,
    /// Explicit Fock levels per KPO; `None` selects the truncation rule.
    pub dims: Option<Vec<usize>>,
    pub alpha_method: AlphaMethod,
    pub alpha_grid_points: usize,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            rtol: default_rtol(),
            atol: default_atol(),
            n_traj: default_n_traj(),
            seed: default_seed(),
            dims: None,
            alpha_method: AlphaMethod::Variational,
            alpha_grid_points: default_alpha_grid(),
        }
    }
}

/// One executable job description: the physical network plus run settings.
#[derive(Debug, Clone)]
pub struct RunSpec {
    pub network: NetworkSpec,
    pub settings: RunSettings,
}

/// Sweep section after validation: parameter paths plus the methods to run.
#[derive(Debug, Clone)]
pub struct SweepSection {
    pub axes: Vec<(String, Vec<f64>)>,
    pub methods: Vec<Method>,
}

/// A fully validated config document.
#[derive(Debug, Clone)]
pub struct ConfigDoc {
    pub spec: RunSpec,
    pub sweep: Option<SweepSection>,
}

fn config_err(path: &Path, detail: impl std::fmt::Display) -> Error {
    Error::Config(format!("{}: {detail}", path.display()))
}

/// Loads and validates a TOML config file.
pub fn load_config(path: &Path) -> Result<ConfigDoc> {
    let text =
        std::fs::read_to_string(path).map_err(|e| config_err(path, format!("read: {e}")))?;
    let file: FileConfig = toml::from_str(&text).map_err(|e| config_err(path, e.message()))?;
    build_doc(&file).map_err(|e| match e {
        Error::Config(detail) => config_err(path, detail),
        other => other,
    })
}

/// Parses a config from an in-memory TOML string (used by tests and fixtures).
pub fn parse_config(text: &str) -> Result<ConfigDoc> {
    let file: FileConfig =
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
    build_doc(&file)
}

fn build_doc(file: &FileConfig) -> Result<ConfigDoc> {
    if file.kpos.is_empty() {
        return Err(Error::Config("kpos: need at least one oscillator".into()));
    }
    let n = file.kpos.len();

    let mut kpos = Vec::with_capacity(n);
    for (j, k) in file.kpos.iter().enumerate() {
        if k.kerr_mhz >= 0.0 {
            return Err(Error::Config(format!(
                "kpos[{j}].kerr_mhz: must be negative, got {}",
                k.kerr_mhz
            )));
        }
        if k.pump_mhz < 0.0 {
            return Err(Error::Config(format!(
                "kpos[{j}].pump_mhz: must be non-negative, got {}",
                k.pump_mhz
            )));
        }
        if k.kappa_mhz < 0.0 {
            return Err(Error::Config(format!(
                "kpos[{j}].kappa_mhz: must be non-negative, got {}",
                k.kappa_mhz
            )));
        }
        kpos.push(KpoSpec {
            kerr: k.kerr_mhz * TAU,
            pump_final: k.pump_mhz * TAU,
            drive_final_rescaled: k.drive_rescaled_mhz * TAU,
            photon_loss: k.kappa_mhz * TAU,
        });
    }

    let mut couplings = Vec::with_capacity(file.couplings.len());
    for (i, c) in file.couplings.iter().enumerate() {
        let kind = match c.kind.as_str() {
            "two_body" => CouplingKind::TwoBody,
            "four_body" => CouplingKind::FourBody,
            other => {
                return Err(Error::Config(format!(
                    "couplings[{i}].kind: expected \"two_body\" or \"four_body\", got \"{other}\""
                )))
            }
        };
        let expect = match kind {
            CouplingKind::TwoBody => 2,
            CouplingKind::FourBody => 4,
        };
        if c.sites.len() != expect {
            return Err(Error::Config(format!(
                "couplings[{i}].sites: {} kind needs {expect} sites, got {}",
                c.kind,
                c.sites.len()
            )));
        }
        if let Some(&s) = c.sites.iter().find(|&&s| s >= n) {
            return Err(Error::Config(format!(
                "couplings[{i}].sites: site {s} out of range for {n} oscillators"
            )));
        }
        couplings.push(CouplingSpec {
            kind,
            sites: c.sites.clone(),
            strength: c.g_mhz * TAU,
        });
    }

    if file.gamma_khz < 0.0 {
        return Err(Error::Config(format!(
            "gamma_khz: must be non-negative, got {}",
            file.gamma_khz
        )));
    }

    let s = &file.schedule;
    for (key, value) in [
        ("schedule.t_s_us", s.t_s_us),
        ("schedule.t_rd_us", s.t_rd_us),
        ("schedule.t_r_us", s.t_r_us),
    ] {
        if value <= 0.0 {
            return Err(Error::Config(format!("{key}: must be positive, got {value}")));
        }
    }
    if s.t_sp_us < 0.0 {
        return Err(Error::Config(format!(
            "schedule.t_sp_us: must be non-negative, got {}",
            s.t_sp_us
        )));
    }
    if s.t_rd_us <= s.t_sp_us {
        return Err(Error::Config(format!(
            "schedule.t_rd_us: ramp-down end {} must exceed the plateau t_sp_us = {}",
            s.t_rd_us, s.t_sp_us
        )));
    }
    if s.pump_exponent <= 0.0 || s.drive_exponent <= 0.0 {
        return Err(Error::Config(format!(
            "schedule exponents must be positive (pump_exponent = {}, drive_exponent = {})",
            s.pump_exponent, s.drive_exponent
        )));
    }
    if s.grid_points < 2 {
        return Err(Error::Config(format!(
            "schedule.grid_points: need at least 2, got {}",
            s.grid_points
        )));
    }

    let network = NetworkSpec {
        kpos,
        couplings,
        dephasing: file.gamma_khz * 1e-3 * TAU,
        schedule: ScheduleSpec {
            t_s: s.t_s_us,
            t_sp: s.t_sp_us,
            t_rd: s.t_rd_us,
            t_r: s.t_r_us,
            delta_initial: s.delta0_mhz * TAU,
            pump_exponent: s.pump_exponent,
            drive_exponent: s.drive_exponent,
            grid_points: s.grid_points,
        },
    };

    if let Some(dims) = &file.fock.dims {
        if dims.len() != n {
            return Err(Error::Config(format!(
                "fock.dims: {} entries for {n} oscillators",
                dims.len()
            )));
        }
        if let Some(&d) = dims.iter().find(|&&d| d < 2) {
            return Err(Error::Config(format!(
                "fock.dims: every mode needs at least 2 levels, got {d}"
            )));
        }
    }

    let alpha_method = parse_alpha_method(&file.alpha.method)?;
    if file.alpha.grid_points < 2 {
        return Err(Error::Config(format!(
            "alpha.grid_points: need at least 2, got {}",
            file.alpha.grid_points
        )));
    }
    if file.solver.rtol <= 0.0 || file.solver.atol <= 0.0 {
        return Err(Error::Config(format!(
            "solver tolerances must be positive (rtol = {}, atol = {})",
            file.solver.rtol, file.solver.atol
        )));
    }
    if file.solver.n_traj == 0 {
        return Err(Error::Config("solver.n_traj: must be at least 1".into()));
    }

    let settings = RunSettings {
        rtol: file.solver.rtol,
        atol: file.solver.atol,
        n_traj: file.solver.n_traj,
        seed: file.solver.seed,
        dims: file.fock.dims.clone(),
        alpha_method,
        alpha_grid_points: file.alpha.grid_points,
    };

    let sweep = match &file.sweep {
        None => None,
        Some(sw) => {
            if sw.axes.is_empty() {
                return Err(Error::Config("sweep.axes: must not be empty".into()));
            }
            if sw.methods.is_empty() {
                return Err(Error::Config("sweep.methods: must not be empty".into()));
            }
            let mut methods = Vec::with_capacity(sw.methods.len());
            for m in &sw.methods {
                methods.push(m.parse::<Method>().map_err(Error::Config)?);
            }
            let mut axes = Vec::with_capacity(sw.axes.len());
            for (i, ax) in sw.axes.iter().enumerate() {
                if ax.values.len() < 2 {
                    return Err(Error::Config(format!(
                        "sweep.axes[{i}].values: need at least 2 values"
                    )));
                }
                // fail early on paths that do not resolve against this network
                let mut probe = network.clone();
                set_parameter(&mut probe, &ax.path, ax.values[0])?;
                axes.push((ax.path.clone(), ax.values.clone()));
            }
            Some(SweepSection { axes, methods })
        }
    };

    Ok(ConfigDoc {
        spec: RunSpec { network, settings },
        sweep,
    })
}

pub fn parse_alpha_method(s: &str) -> Result<AlphaMethod> {
    match s {
        "analytic" => Ok(AlphaMethod::Analytic),
        "variational" => Ok(AlphaMethod::Variational),
        other => Err(Error::Config(format!(
            "alpha.method: expected \"analytic\" or \"variational\", got \"{other}\""
        ))),
    }
}

/// Fock levels per oscillator: the explicit `[fock] dims` when given, otherwise the
/// truncation rule applied to each KPO's final amplitude.
pub fn resolve_dims(spec: &RunSpec) -> Result<Vec<usize>> {
    if let Some(dims) = &spec.settings.dims {
        return Ok(dims.clone());
    }
    let t_end = spec.network.schedule.total_time();
    (0..spec.network.n_kpos())
        .map(|j| {
            let alpha = spec.network.alpha_analytic_at(j, t_end)?;
            Ok(fock::adequate_dim(alpha))
        })
        .collect()
}

/// Sets one scalar parameter through its config-file path, converting units exactly as
/// the loader does. Supported paths: `kpos[j].{kerr_mhz, pump_mhz, drive_rescaled_mhz,
/// kappa_mhz}`, `couplings[i].g_mhz`, `gamma_khz`, and
/// `schedule.{t_s_us, t_sp_us, t_rd_us, t_r_us, delta0_mhz, pump_exponent,
/// drive_exponent}`.
pub fn set_parameter(network: &mut NetworkSpec, path: &str, value: f64) -> Result<()> {
    let bad = || Error::Config(format!("unknown parameter path \"{path}\""));

    if let Some(rest) = path.strip_prefix("kpos[") {
        let (idx, field) = split_indexed(rest).ok_or_else(bad)?;
        let kpo = network.kpos.get_mut(idx).ok_or_else(|| {
            Error::Config(format!(
                "parameter path \"{path}\": oscillator {idx} out of range"
            ))
        })?;
        match field {
            "kerr_mhz" => kpo.kerr = value * TAU,
            "pump_mhz" => kpo.pump_final = value * TAU,
            "drive_rescaled_mhz" => kpo.drive_final_rescaled = value * TAU,
            "kappa_mhz" => kpo.photon_loss = value * TAU,
            _ => return Err(bad()),
        }
        return Ok(());
    }
    if let Some(rest) = path.strip_prefix("couplings[") {
        let (idx, field) = split_indexed(rest).ok_or_else(bad)?;
        let coupling = network.couplings.get_mut(idx).ok_or_else(|| {
            Error::Config(format!(
                "parameter path \"{path}\": coupling {idx} out of range"
            ))
        })?;
        match field {
            "g_mhz" => coupling.strength = value * TAU,
            _ => return Err(bad()),
        }
        return Ok(());
    }
    if let Some(field) = path.strip_prefix("schedule.") {
        let s = &mut network.schedule;
        match field {
            "t_s_us" => s.t_s = value,
            "t_sp_us" => s.t_sp = value,
            "t_rd_us" => s.t_rd = value,
            "t_r_us" => s.t_r = value,
            "delta0_mhz" => s.delta_initial = value * TAU,
            "pump_exponent" => s.pump_exponent = value,
            "drive_exponent" => s.drive_exponent = value,
            _ => return Err(bad()),
        }
        return Ok(());
    }
    if path == "gamma_khz" {
        network.dephasing = value * 1e-3 * TAU;
        return Ok(());
    }
    Err(bad())
}

/// Splits `"3].field"` into `(3, "field")`.
fn split_indexed(rest: &str) -> Option<(usize, &str)> {
    let close = rest.find("].")?;
    let idx: usize = rest[..close].parse().ok()?;
    Some((idx, &rest[close + 2..]))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAIR: &str = r#"
gamma_khz = 7.7

[[kpos]]
kerr_mhz = -12.6
pump_mhz = 148.0
drive_rescaled_mhz = 9.0
kappa_mhz = 1.1

[[kpos]]
kerr_mhz = -12.6
pump_mhz = 169.0
kappa_mhz = 1.3

[[couplings]]
kind = "two_body"
sites = [0, 1]
g_mhz = 6.9

[schedule]
t_s_us = 0.4
t_sp_us = 0.1
t_rd_us = 0.6
t_r_us = 0.4
delta0_mhz = -20.0

[fock]
dims = [27, 30]
"#;

    #[test]
    fn the_reference_pair_config_loads_with_angular_units() {
        let doc = parse_config(PAIR).unwrap();
        let net = &doc.spec.network;
        assert_eq!(net.n_kpos(), 2);
        assert!((net.kpos[0].kerr + 12.6 * TAU).abs() < 1e-12);
        assert!((net.kpos[0].pump_final - 148.0 * TAU).abs() < 1e-12);
        assert!((net.kpos[0].drive_final_rescaled - 9.0 * TAU).abs() < 1e-12);
        assert!((net.kpos[1].drive_final_rescaled).abs() == 0.0); // default
        assert!((net.kpos[1].photon_loss - 1.3 * TAU).abs() < 1e-12);
        assert!((net.dephasing - 7.7e-3 * TAU).abs() < 1e-12);
        assert!((net.schedule.delta_initial + 20.0 * TAU).abs() < 1e-10);
        assert_eq!(net.schedule.pump_exponent, 2.5); // default
        assert_eq!(net.schedule.grid_points, 200); // default
        assert_eq!(doc.spec.settings.dims, Some(vec![27, 30]));
        assert_eq!(doc.spec.settings.n_traj, 400);
        assert!(doc.sweep.is_none());
    }

    #[test]
    fn a_missing_required_key_is_reported_by_name() {
        let text = PAIR.replace("t_s_us = 0.4\n", "");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("t_s_us"), "{msg}");
    }

    #[test]
    fn an_unknown_key_is_rejected() {
        let text = format!("{PAIR}\n[solver]\nrelative_tolerance = 1e-6\n");
        let err = parse_config(&text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("relative_tolerance"), "{msg}");
    }

    #[test]
    fn physical_sanity_is_enforced_with_key_paths() {
        let positive_kerr = PAIR.replace("kerr_mhz = -12.6", "kerr_mhz = 12.6");
        let msg = parse_config(&positive_kerr).unwrap_err().to_string();
        assert!(msg.contains("kerr_mhz"), "{msg}");

        let bad_sites = PAIR.replace("sites = [0, 1]", "sites = [0, 7]");
        let msg = parse_config(&bad_sites).unwrap_err().to_string();
        assert!(msg.contains("couplings[0].sites"), "{msg}");

        let four_body_two_sites = PAIR.replace("kind = \"two_body\"", "kind = \"four_body\"");
        let msg = parse_config(&four_body_two_sites).unwrap_err().to_string();
        assert!(msg.contains("needs 4 sites"), "{msg}");
    }

    #[test]
    fn parameter_paths_resolve_with_unit_conversion() {
        let doc = parse_config(PAIR).unwrap();
        let mut net = doc.spec.network.clone();

        set_parameter(&mut net, "kpos[1].drive_rescaled_mhz", -6.9).unwrap();
        assert!((net.kpos[1].drive_final_rescaled + 6.9 * TAU).abs() < 1e-12);

        set_parameter(&mut net, "schedule.drive_exponent", 1.34).unwrap();
        assert_eq!(net.schedule.drive_exponent, 1.34);

        set_parameter(&mut net, "gamma_khz", 0.0).unwrap();
        assert_eq!(net.dephasing, 0.0);

        set_parameter(&mut net, "couplings[0].g_mhz", 2.0).unwrap();
        assert!((net.couplings[0].strength - 2.0 * TAU).abs() < 1e-12);

        let msg = set_parameter(&mut net, "kpos[0].frequency", 1.0)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("kpos[0].frequency"), "{msg}");

        let msg = set_parameter(&mut net, "kpos[5].pump_mhz", 1.0)
            .unwrap_err()
            .to_string();
        assert!(msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn sweep_sections_validate_their_paths_and_methods() {
        let swept = format!(
            "{PAIR}\n[sweep]\nmethods = [\"spin\", \"fock_trajectories\"]\n\n\
             [[sweep.axes]]\npath = \"kpos[1].drive_rescaled_mhz\"\nvalues = [-9.0, -6.9, -4.0]\n"
        );
        let doc = parse_config(&swept).unwrap();
        let sweep = doc.sweep.unwrap();
        assert_eq!(sweep.methods, vec![Method::Spin, Method::FockTrajectories]);
        assert_eq!(sweep.axes[0].1.len(), 3);

        let bad_path = swept.replace("kpos[1].drive_rescaled_mhz", "kpos[1].detuning");
        let msg = parse_config(&bad_path).unwrap_err().to_string();
        assert!(msg.contains("kpos[1].detuning"), "{msg}");

        let bad_method = swept.replace("\"spin\"", "\"tensor_network\"");
        let msg = parse_config(&bad_method).unwrap_err().to_string();
        assert!(msg.contains("tensor_network"), "{msg}");
    }

    #[test]
    fn dims_default_to_the_truncation_rule() {
        let text = PAIR.replace("[fock]\ndims = [27, 30]\n", "");
        let doc = parse_config(&text).unwrap();
        assert_eq!(doc.spec.settings.dims, None);
        let dims = resolve_dims(&doc.spec).unwrap();
        // defaults come from the strict tail-mass rule at the readout amplitudes
        // (sqrt(p/|K|): 3.43 and 3.66), deliberately more conservative than the
        // hand-picked truncations a config may state explicitly
        let t_end = doc.spec.network.schedule.total_time();
        let expected: Vec<usize> = (0..2)
            .map(|j| {
                fock::adequate_dim(doc.spec.network.alpha_analytic_at(j, t_end).unwrap())
            })
            .collect();
        assert_eq!(dims, expected);
        assert!(dims[0] >= 35 && dims[0] <= 50, "dims = {dims:?}");
        assert!(dims[1] > dims[0], "dims = {dims:?}");
    }
}
