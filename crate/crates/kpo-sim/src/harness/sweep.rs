//! Parameter sweeps and cross-method comparison.
//!
//! A sweep runs every (grid point, method) pair of a row-major Cartesian grid and
//! reduces the results into a [`ComparisonReport`]: outcome tables per point and
//! method, per-point agreement of the most-likely states, and a transition estimate
//! for every 1-D slice along the last axis. Point failures are recorded in place and
//! never abort the rest of the grid.
//!
//! Determinism: every point gets a sub-seed derived from its grid index alone, jobs
//! are collected in task order by a single reducer, and all maps are ordered — so the
//! serialized report is byte-identical for a given plan and seed no matter how many
//! workers ran it.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::config::{set_parameter, ConfigDoc, RunSpec};
use super::runner::{execute, Method, SimulationResult};

/// One swept parameter: a settable path and the grid values along it, in the
/// config's surface units (MHz, kHz, µs — the same numbers the file would carry).
#[derive(Debug, Clone)]
pub struct SweepAxis {
    pub path: String,
    pub values: Vec<f64>,
}

/// A full sweep: base spec, axes (row-major, last axis fastest), methods to run at
/// every point, and an optional worker-pool size (`None` = the global pool).
#[derive(Debug, Clone)]
pub struct SweepPlan {
    pub base: RunSpec,
    pub axes: Vec<SweepAxis>,
    pub methods: Vec<Method>,
    pub jobs: Option<usize>,
}

impl SweepPlan {
    /// Builds the plan a config's `[sweep]` section describes; the section's absence
    /// is an error naming it.
    pub fn from_doc(doc: &ConfigDoc) -> Result<SweepPlan> {
        let section = doc.sweep.as_ref().ok_or_else(|| {
            Error::Config("config has no [sweep] section, which this operation requires".into())
        })?;
        Ok(SweepPlan {
            base: doc.spec.clone(),
            axes: section
                .axes
                .iter()
                .map(|(path, values)| SweepAxis {
                    path: path.clone(),
                    values: values.clone(),
                })
                .collect(),
            methods: section.methods.clone(),
            jobs: None,
        })
    }

    /// A degenerate plan with no axes: one grid point, several methods. This is what
    /// the `compare` operation runs.
    pub fn comparison(spec: &RunSpec, methods: &[Method]) -> SweepPlan {
        SweepPlan {
            base: spec.clone(),
            axes: Vec::new(),
            methods: methods.to_vec(),
            jobs: None,
        }
    }
}

/// Outcome table of one successful (point, method) run, reduced to what comparisons
/// need. Wall time is deliberately dropped so reports stay reproducible.
#[derive(Debug, Clone, PartialEq)]
pub struct PointOutcome {
    /// Readout-window-averaged probabilities per configuration label.
    pub probabilities: BTreeMap<String, f64>,
    /// Monte-Carlo standard errors where the method has them.
    pub se: Option<BTreeMap<String, f64>>,
    pub most_likely: String,
    pub tie: bool,
    /// Readout-window mean leakage (Fock methods).
    pub leakage: Option<f64>,
}

impl PointOutcome {
    fn from_result(res: &SimulationResult) -> PointOutcome {
        PointOutcome {
            probabilities: res.outcome_probabilities.clone(),
            se: res.outcome_se.clone(),
            most_likely: res.most_likely.clone(),
            tie: res.tie,
            leakage: res.metadata.mean_leakage,
        }
    }
}

/// One grid point of a comparison: coordinates in axis order, then per-method
/// outcomes or error messages.
#[derive(Debug, Clone)]
pub struct ComparisonPoint {
    /// Row-major grid index.
    pub index: usize,
    /// Axis values at this point, in axis order.
    pub coords: Vec<f64>,
    pub results: BTreeMap<Method, PointOutcome>,
    pub errors: BTreeMap<Method, String>,
    /// Whether all successful methods picked the same most-likely state; `None` when
    /// fewer than two methods succeeded. Argmax equality is symmetric, so this flag
    /// does not depend on method order.
    pub agreement: Option<bool>,
}

/// Where the most-likely state changes along the last axis of one slice.
#[derive(Debug, Clone)]
pub struct TransitionEstimate {
    pub method: Method,
    /// Path of the swept (last) axis.
    pub axis_path: String,
    /// Values of the remaining axes identifying the slice, in axis order.
    pub slice_coords: Vec<f64>,
    /// Most-likely state at the first point of the slice.
    pub from_label: String,
    /// Most-likely state at the last point of the slice.
    pub to_label: String,
    /// Interpolated crossing location, when one was identified. `None` with
    /// `from_label == to_label` means no transition; `None` with differing labels
    /// means the slice was too coarse or irregular to localize it.
    pub crossing: Option<f64>,
}

/// Everything a sweep produced. Serializes to one tidy CSV via
/// [`ComparisonReport::to_csv`].
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub axes: Vec<SweepAxis>,
    /// Methods actually run, sorted and deduplicated.
    pub methods: Vec<Method>,
    /// One entry per grid point, in row-major order.
    pub points: Vec<ComparisonPoint>,
    pub transitions: Vec<TransitionEstimate>,
    /// Number of (point, method) jobs that failed.
    pub n_failed: usize,
}

fn coords_of(idx: usize, axes: &[SweepAxis]) -> Vec<f64> {
    let mut rem = idx;
    let mut coords = vec![0.0; axes.len()];
    for (k, axis) in axes.iter().enumerate().rev() {
        let len = axis.values.len();
        coords[k] = axis.values[rem % len];
        rem /= len;
    }
    coords
}

fn point_spec(plan: &SweepPlan, idx: usize) -> Result<RunSpec> {
    let mut spec = plan.base.clone();
    for (axis, &value) in plan.axes.iter().zip(&coords_of(idx, &plan.axes)) {
        set_parameter(&mut spec.network, &axis.path, value)?;
    }
    spec.network.validate()?;
    spec.settings.seed = plan
        .base
        .settings
        .seed
        .wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    Ok(spec)
}

fn is_strictly_monotonic(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] > w[0]) || values.windows(2).all(|w| w[1] < w[0])
}

/// Locates the zero crossing of `p_a − p_b` over a 1-D slice by linear interpolation
/// between the two grid points bracketing the first sign change. Needs at least four
/// strictly monotonic points; a slice with no sign change returns `Ok(None)`.
pub fn estimate_transition(values: &[f64], p_a: &[f64], p_b: &[f64]) -> Result<Option<f64>> {
    if values.len() != p_a.len() || values.len() != p_b.len() {
        return Err(Error::InvalidParameter(format!(
            "transition slice lengths differ: {} values, {} and {} probabilities",
            values.len(),
            p_a.len(),
            p_b.len()
        )));
    }
    if values.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "transition estimation needs at least 4 slice points, got {}",
            values.len()
        )));
    }
    if !is_strictly_monotonic(values) {
        return Err(Error::InvalidParameter(
            "transition estimation needs strictly monotonic sweep values".into(),
        ));
    }
    let d: Vec<f64> = p_a.iter().zip(p_b).map(|(a, b)| a - b).collect();
    for i in 0..d.len() {
        if d[i] == 0.0 {
            return Ok(Some(values[i]));
        }
        if i + 1 < d.len() && d[i + 1] != 0.0 && (d[i] > 0.0) != (d[i + 1] > 0.0) {
            let x = values[i] + (values[i + 1] - values[i]) * d[i] / (d[i] - d[i + 1]);
            return Ok(Some(x));
        }
    }
    Ok(None)
}

fn collect_transitions(
    axes: &[SweepAxis],
    methods: &[Method],
    points: &[ComparisonPoint],
) -> Result<Vec<TransitionEstimate>> {
    let Some(last) = axes.last() else {
        return Ok(Vec::new());
    };
    let last_len = last.values.len();
    if last_len < 2 {
        return Ok(Vec::new());
    }
    let monotonic = is_strictly_monotonic(&last.values);
    let outer = points.len() / last_len;
    let mut out = Vec::new();
    for &method in methods {
        for s in 0..outer {
            let slice = &points[s * last_len..(s + 1) * last_len];
            if !slice.iter().all(|p| p.results.contains_key(&method)) {
                continue;
            }
            let from_label = slice[0].results[&method].most_likely.clone();
            let to_label = slice[last_len - 1].results[&method].most_likely.clone();
            let mut crossing = None;
            if from_label != to_label && last_len >= 4 && monotonic {
                let prob = |p: &ComparisonPoint, label: &str| {
                    p.results[&method]
                        .probabilities
                        .get(label)
                        .copied()
                        .unwrap_or(0.0)
                };
                let pa: Vec<f64> = slice.iter().map(|p| prob(p, &from_label)).collect();
                let pb: Vec<f64> = slice.iter().map(|p| prob(p, &to_label)).collect();
                crossing = estimate_transition(&last.values, &pa, &pb)?;
            }
            out.push(TransitionEstimate {
                method,
                axis_path: last.path.clone(),
                slice_coords: slice[0].coords[..axes.len() - 1].to_vec(),
                from_label,
                to_label,
                crossing,
            });
        }
    }
    Ok(out)
}

/// Runs the whole grid and reduces it. Failed (point, method) jobs land in
/// [`ComparisonPoint::errors`] and are counted in [`ComparisonReport::n_failed`];
/// only plan-level problems (bad axis path, empty method list) abort.
pub fn run_sweep(plan: &SweepPlan) -> Result<ComparisonReport> {
    if plan.methods.is_empty() {
        return Err(Error::Config("sweep has an empty method list".into()));
    }
    let mut methods = plan.methods.clone();
    methods.sort();
    methods.dedup();
    for axis in &plan.axes {
        if axis.values.is_empty() {
            return Err(Error::Config(format!(
                "sweep axis \"{}\" has no values",
                axis.path
            )));
        }
        // surface bad paths before any work is spent
        let mut probe = plan.base.network.clone();
        set_parameter(&mut probe, &axis.path, axis.values[0])?;
    }
    let total: usize = plan.axes.iter().map(|a| a.values.len()).product();

    let tasks: Vec<(usize, Method)> = (0..total)
        .flat_map(|idx| methods.iter().map(move |&m| (idx, m)))
        .collect();
    let run_task = |&(idx, method): &(usize, Method)| {
        let outcome = point_spec(plan, idx).and_then(|spec| execute(&spec, method));
        (idx, method, outcome.map_err(|e| e.to_string()))
    };
    type TaskOutcome = (usize, Method, std::result::Result<SimulationResult, String>);
    let outcomes: Vec<TaskOutcome> = match plan.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(|| tasks.par_iter().map(run_task).collect()),
        None => tasks.par_iter().map(run_task).collect(),
    };

    // single collector, task order
    let mut points: Vec<ComparisonPoint> = (0..total)
        .map(|idx| ComparisonPoint {
            index: idx,
            coords: coords_of(idx, &plan.axes),
            results: BTreeMap::new(),
            errors: BTreeMap::new(),
            agreement: None,
        })
        .collect();
    let mut n_failed = 0;
    for (idx, method, outcome) in outcomes {
        match outcome {
            Ok(res) => {
                points[idx].results.insert(method, PointOutcome::from_result(&res));
            }
            Err(message) => {
                n_failed += 1;
                points[idx].errors.insert(method, message);
            }
        }
    }
    for point in &mut points {
        if point.results.len() >= 2 {
            let mut winners = point.results.values().map(|o| o.most_likely.as_str());
            let first = winners.next().expect("len checked");
            point.agreement = Some(winners.all(|w| w == first));
        }
    }
    let transitions = collect_transitions(&plan.axes, &methods, &points)?;

    Ok(ComparisonReport {
        axes: plan.axes.clone(),
        methods,
        points,
        transitions,
        n_failed,
    })
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

impl ComparisonReport {
    /// Labels present in the first successful outcome (they are identical across the
    /// grid, which only varies scalars).
    fn labels(&self) -> Vec<String> {
        self.points
            .iter()
            .flat_map(|p| p.results.values().next())
            .next()
            .map(|o| o.probabilities.keys().cloned().collect())
            .unwrap_or_default()
    }

    /// Serializes the report as a tidy CSV: one row per successful (point, method)
    /// pair; transitions and failures as commented key = value lines.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# kpo-sim comparison v1\n");
        for axis in &self.axes {
            let values: Vec<String> = axis.values.iter().map(|v| fmt_f64(*v)).collect();
            s.push_str(&format!("# axis {} = {}\n", axis.path, values.join(" ")));
        }
        let names: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        s.push_str(&format!("# methods = {}\n", names.join(" ")));
        s.push_str(&format!("# n_failed = {}\n", self.n_failed));
        for tr in &self.transitions {
            let coords: Vec<String> = tr.slice_coords.iter().map(|v| fmt_f64(*v)).collect();
            let crossing = tr.crossing.map_or("none".to_string(), fmt_f64);
            s.push_str(&format!(
                "# transition = {}|{}|{}|{}|{}|{}\n",
                tr.method,
                tr.axis_path,
                coords.join(" "),
                tr.from_label,
                tr.to_label,
                crossing
            ));
        }
        for point in &self.points {
            for (method, message) in &point.errors {
                let clean = message.replace(['|', '\n'], " ");
                s.push_str(&format!("# error = {}|{}|{}\n", point.index, method, clean));
            }
        }

        let labels = self.labels();
        let any_se = self
            .points
            .iter()
            .any(|p| p.results.values().any(|o| o.se.is_some()));
        let any_leak = self
            .points
            .iter()
            .any(|p| p.results.values().any(|o| o.leakage.is_some()));
        let mut cols: Vec<String> = self.axes.iter().map(|a| a.path.clone()).collect();
        cols.extend(["method", "most_likely", "tie", "agreement"].map(String::from));
        if any_leak {
            cols.push("leakage".into());
        }
        cols.extend(labels.iter().map(|l| format!("p_{l}")));
        if any_se {
            cols.extend(labels.iter().map(|l| format!("se_p_{l}")));
        }
        s.push_str(&cols.join(","));
        s.push('\n');

        for point in &self.points {
            for (method, outcome) in &point.results {
                let mut fields: Vec<String> = point.coords.iter().map(|v| fmt_f64(*v)).collect();
                fields.push(method.to_string());
                fields.push(outcome.most_likely.clone());
                fields.push(outcome.tie.to_string());
                fields.push(point.agreement.map_or(String::new(), |a| a.to_string()));
                if any_leak {
                    fields.push(outcome.leakage.map_or(String::new(), fmt_f64));
                }
                for label in &labels {
                    fields.push(
                        outcome
                            .probabilities
                            .get(label)
                            .map_or(String::new(), |p| fmt_f64(*p)),
                    );
                }
                if any_se {
                    for label in &labels {
                        let v = outcome.se.as_ref().and_then(|se| se.get(label));
                        fields.push(v.map_or(String::new(), |p| fmt_f64(*p)));
                    }
                }
                s.push_str(&fields.join(","));
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn lone_config(extra: &str) -> ConfigDoc {
        let text = format!(
            r#"
[[kpos]]
kerr_mhz = -12.6
pump_mhz = 6.0

[schedule]
t_s_us = 0.3
t_sp_us = 0.05
t_rd_us = 0.2
t_r_us = 0.1
delta0_mhz = -20.0
grid_points = 24

[fock]
dims = [12]
{extra}
"#
        );
        parse_config(&text).unwrap()
    }

    #[test]
    fn estimate_transition_interpolates_and_enforces_preconditions() {
        let values = [0.0, 1.0, 2.0, 3.0];
        let pa = [0.1, 0.2, 0.6, 0.9];
        let pb = [0.9, 0.8, 0.4, 0.1];
        // d = [-0.8, -0.6, 0.2, 0.8]: crossing between 1 and 2 at 1 + 0.6/0.8
        let x = estimate_transition(&values, &pa, &pb).unwrap().unwrap();
        assert!((x - 1.75).abs() < 1e-12, "x = {x}");

        // exact zero lands on the grid point
        let x = estimate_transition(&values, &[0.5, 0.3, 0.2, 0.1], &[0.5, 0.6, 0.7, 0.8])
            .unwrap()
            .unwrap();
        assert_eq!(x, 0.0);

        // no sign change anywhere -> marker
        assert_eq!(
            estimate_transition(&values, &[0.9, 0.8, 0.7, 0.6], &[0.1, 0.2, 0.3, 0.4]).unwrap(),
            None
        );

        // fewer than four points, mismatched lengths, non-monotonic values: all errors
        assert!(estimate_transition(&[0.0, 1.0, 2.0], &[1.0, 0.5, 0.0], &[0.0, 0.5, 1.0]).is_err());
        assert!(estimate_transition(&values, &pa[..3], &pb).is_err());
        assert!(estimate_transition(&[0.0, 2.0, 1.0, 3.0], &pa, &pb).is_err());
    }

    #[test]
    fn a_two_axis_spin_sweep_locates_symmetric_crossings_per_slice() {
        let doc = lone_config(
            r#"
[sweep]
methods = ["spin"]

[[sweep.axes]]
path = "gamma_khz"
values = [0.0, 40.0]

[[sweep.axes]]
path = "kpos[0].drive_rescaled_mhz"
values = [-2.0, -1.0, 1.0, 2.0]
"#,
        );
        let plan = SweepPlan::from_doc(&doc).unwrap();
        let report = run_sweep(&plan).unwrap();

        assert_eq!(report.points.len(), 8);
        assert_eq!(report.n_failed, 0);
        // row-major: index 5 = gamma slice 1, drive position 1
        assert_eq!(report.points[5].coords, vec![40.0, -1.0]);
        // single method -> agreement undefined everywhere
        assert!(report.points.iter().all(|p| p.agreement.is_none()));

        // one transition per gamma slice; negative drive favors "-", positive "+",
        // and the symmetric grid pins the crossing at zero
        assert_eq!(report.transitions.len(), 2);
        for tr in &report.transitions {
            assert_eq!(tr.method, Method::Spin);
            assert_eq!(tr.axis_path, "kpos[0].drive_rescaled_mhz");
            assert_eq!(tr.from_label, "-");
            assert_eq!(tr.to_label, "+");
            let x = tr.crossing.expect("crossing located");
            assert!(x.abs() < 0.05, "crossing at {x}");
        }
        assert_eq!(report.transitions[0].slice_coords, vec![0.0]);
        assert_eq!(report.transitions[1].slice_coords, vec![40.0]);
    }

    #[test]
    fn partial_failures_are_recorded_per_point_without_aborting() {
        let doc = lone_config(
            r#"
[sweep]
methods = ["fock_master"]

[[sweep.axes]]
path = "kpos[0].kappa_mhz"
values = [1.1, -0.5]
"#,
        );
        let plan = SweepPlan::from_doc(&doc).unwrap();
        let report = run_sweep(&plan).unwrap();

        assert_eq!(report.n_failed, 1);
        assert!(report.points[0].results.contains_key(&Method::FockMaster));
        assert!(report.points[0].errors.is_empty());
        let message = &report.points[1].errors[&Method::FockMaster];
        assert!(
            message.contains("photon-loss"),
            "unexpected message: {message}"
        );
        // the failure shows up in the serialized report too
        let csv = report.to_csv();
        assert!(csv.contains("# n_failed = 1"));
        assert!(csv.contains("# error = 1|fock_master|"));
    }

    #[test]
    fn reports_are_deterministic_and_agreement_is_order_symmetric() {
        let doc = lone_config("");
        let axes = vec![SweepAxis {
            path: "kpos[0].drive_rescaled_mhz".into(),
            values: vec![-2.0, -1.2, 1.2, 2.0],
        }];
        let forward = SweepPlan {
            base: doc.spec.clone(),
            axes: axes.clone(),
            methods: vec![Method::Spin, Method::FockMaster],
            jobs: None,
        };
        let reversed = SweepPlan {
            base: doc.spec.clone(),
            axes,
            methods: vec![Method::FockMaster, Method::Spin],
            jobs: Some(3),
        };
        let a = run_sweep(&forward).unwrap();
        let b = run_sweep(&reversed).unwrap();

        // both methods pick the drive's sign at every point, whatever the order and
        // parallelism, and the serialized reports agree to the byte
        assert!(a.points.iter().all(|p| p.agreement == Some(true)));
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn a_single_point_comparison_reports_agreement() {
        let doc = lone_config("");
        let mut spec = doc.spec.clone();
        set_parameter(&mut spec.network, "kpos[0].drive_rescaled_mhz", 1.5).unwrap();
        let plan = SweepPlan::comparison(&spec, &[Method::Spin, Method::FockMaster]);
        let report = run_sweep(&plan).unwrap();

        assert_eq!(report.points.len(), 1);
        assert!(report.points[0].coords.is_empty());
        assert_eq!(report.points[0].agreement, Some(true));
        assert_eq!(report.points[0].results[&Method::Spin].most_likely, "+");
        assert!(report.transitions.is_empty());

        // missing [sweep] is named when a plan is demanded from a config
        let err = SweepPlan::from_doc(&doc).unwrap_err();
        assert!(err.to_string().contains("[sweep]"), "{err}");
    }
}
