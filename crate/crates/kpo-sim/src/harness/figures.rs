//! Figure-data export: tidy CSV tables, no rendering.
//!
//! Each figure id maps a config onto one table. `fig5` needs only the schedule;
//! `alpha` exports the amplitude trajectory; `fig2` renders a most-likely-state map
//! over the config's sweep grid; `fig3` and `fig4` share a tidy probability layout
//! (sweep value first, then the remaining axes, method, configuration label,
//! probability). Missing inputs — no `[sweep]` section, wrong method count — are
//! reported by name.
//!
//! [`Table`] is the common carrier: comment lines are kept verbatim and data cells
//! are kept as written, so any emitted file parses back and re-serializes to the
//! identical bytes.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{schedule_value, ScheduleQuantity};
use crate::spin::build_alpha_trajectory;

use super::config::ConfigDoc;
use super::sweep::{run_sweep, ComparisonReport, SweepPlan};

/// Which figure's data to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    /// Most-likely-state map over the sweep grid (single method).
    Fig2,
    /// Tidy outcome probabilities along a sweep, all methods.
    Fig3,
    /// Same layout as `fig3`; separate id for the four-KPO study.
    Fig4,
    /// Schedule traces: detuning, pump fraction, drive fraction.
    Fig5,
    /// Amplitude-trajectory export.
    Alpha,
}

impl FigureId {
    pub const ALL: [FigureId; 5] = [
        FigureId::Fig2,
        FigureId::Fig3,
        FigureId::Fig4,
        FigureId::Fig5,
        FigureId::Alpha,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            FigureId::Fig2 => "fig2",
            FigureId::Fig3 => "fig3",
            FigureId::Fig4 => "fig4",
            FigureId::Fig5 => "fig5",
            FigureId::Alpha => "alpha",
        }
    }
}

impl fmt::Display for FigureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FigureId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fig2" => Ok(FigureId::Fig2),
            "fig3" => Ok(FigureId::Fig3),
            "fig4" => Ok(FigureId::Fig4),
            "fig5" => Ok(FigureId::Fig5),
            "alpha" => Ok(FigureId::Alpha),
            other => Err(format!(
                "unknown figure \"{other}\" (expected fig2, fig3, fig4, fig5, or alpha)"
            )),
        }
    }
}

/// A parsed CSV table: leading `#` comment lines kept verbatim, a header row, and
/// string-valued data rows of matching width. Serializing a loaded table reproduces
/// the input byte for byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub comments: Vec<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Table {
        Table {
            comments: Vec::new(),
            header,
            rows: Vec::new(),
        }
    }

    /// Index of a named column.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for line in &self.comments {
            s.push_str(line);
            s.push('\n');
        }
        s.push_str(&self.header.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Table> {
        let mut comments = Vec::new();
        let mut header: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        for (k, line) in text.lines().enumerate() {
            if line.starts_with('#') {
                if header.is_some() {
                    return Err(Error::ResultParse(format!(
                        "line {}: comment after the header",
                        k + 1
                    )));
                }
                comments.push(line.to_string());
                continue;
            }
            let cells: Vec<String> = line.split(',').map(str::to_string).collect();
            match &header {
                None => header = Some(cells),
                Some(h) => {
                    if cells.len() != h.len() {
                        return Err(Error::ResultParse(format!(
                            "line {}: {} cells in a {}-column table",
                            k + 1,
                            cells.len(),
                            h.len()
                        )));
                    }
                    rows.push(cells);
                }
            }
        }
        Ok(Table {
            comments,
            header: header.ok_or_else(|| Error::ResultParse("empty table".into()))?,
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(&text).map_err(|e| match e {
            Error::ResultParse(d) => Error::ResultParse(format!("{}: {d}", path.display())),
            other => other,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// Short column name for a sweep-axis path, so emitted tables read like the plots
/// they feed (`kpos[1].drive_rescaled_mhz` → `omega1_mhz`, `schedule.drive_exponent`
/// → `f`). Unknown paths keep their full spelling.
fn short_axis_name(path: &str) -> String {
    if path == "schedule.drive_exponent" {
        return "f".into();
    }
    if let Some(rest) = path.strip_prefix("kpos[") {
        if let Some((idx, field)) = rest.split_once("].") {
            let stem = match field {
                "drive_rescaled_mhz" => "omega",
                "pump_mhz" => "pump",
                "kappa_mhz" => "kappa",
                "kerr_mhz" => "kerr",
                _ => return path.into(),
            };
            return format!("{stem}{idx}_mhz");
        }
    }
    if let Some(rest) = path.strip_prefix("couplings[") {
        if let Some((idx, "g_mhz")) = rest.split_once("].") {
            return format!("g{idx}_mhz");
        }
    }
    if let Some(rest) = path.strip_prefix("schedule.") {
        return rest.into();
    }
    path.into()
}

/// Emits one figure's data table. Sweep-backed figures (`fig2`, `fig3`, `fig4`) run
/// the config's `[sweep]` grid with `jobs` workers.
pub fn emit_figure(doc: &ConfigDoc, figure: FigureId, jobs: Option<usize>) -> Result<Table> {
    match figure {
        FigureId::Fig5 => emit_fig5(doc),
        FigureId::Alpha => emit_alpha(doc),
        FigureId::Fig2 => {
            let report = sweep_for(doc, figure, jobs)?;
            emit_fig2(&report)
        }
        FigureId::Fig3 | FigureId::Fig4 => {
            let report = sweep_for(doc, figure, jobs)?;
            emit_probability_table(&report, figure)
        }
    }
}

fn sweep_for(doc: &ConfigDoc, figure: FigureId, jobs: Option<usize>) -> Result<ComparisonReport> {
    let mut plan = SweepPlan::from_doc(doc).map_err(|e| match e {
        Error::Config(d) => Error::Config(format!("{figure}: {d}")),
        other => other,
    })?;
    if figure == FigureId::Fig2 && plan.methods.len() != 1 {
        return Err(Error::Config(format!(
            "fig2 needs exactly one method in [sweep], got {}",
            plan.methods.len()
        )));
    }
    plan.jobs = jobs;
    run_sweep(&plan)
}

fn emit_fig5(doc: &ConfigDoc) -> Result<Table> {
    let schedule = &doc.spec.network.schedule;
    let mut table = Table::new(
        ["t_us", "delta_mhz", "pump_fraction", "drive_fraction"]
            .map(String::from)
            .to_vec(),
    );
    table.comments.push("# kpo-sim fig5 v1".into());
    for t in schedule.output_grid() {
        let delta = schedule_value(schedule, ScheduleQuantity::Delta, t)? / TAU;
        let pump = schedule_value(schedule, ScheduleQuantity::PumpFraction, t)?;
        let drive = schedule_value(schedule, ScheduleQuantity::DriveFraction, t)?;
        table
            .rows
            .push(vec![fmt_f64(t), fmt_f64(delta), fmt_f64(pump), fmt_f64(drive)]);
    }
    Ok(table)
}

fn emit_alpha(doc: &ConfigDoc) -> Result<Table> {
    let spec = &doc.spec;
    let mut network = spec.network.clone();
    network.schedule.grid_points = network.schedule.grid_points.max(spec.settings.alpha_grid_points);
    let trajectory = build_alpha_trajectory(&network, spec.settings.alpha_method)?;
    let mut table = Table::from_csv(&trajectory.to_csv())?;
    table.comments.push("# kpo-sim alpha v1".into());
    table
        .comments
        .push(format!("# alpha_method = {:?}", spec.settings.alpha_method).to_lowercase());
    Ok(table)
}

fn emit_fig2(report: &ComparisonReport) -> Result<Table> {
    let method = report.methods[0];
    let mut header: Vec<String> = report
        .axes
        .iter()
        .map(|a| short_axis_name(&a.path))
        .collect();
    header.push("most_likely_state".into());
    let mut table = Table::new(header);
    table.comments.push("# kpo-sim fig2 v1".into());
    table.comments.push(format!("# method = {method}"));
    if report.n_failed > 0 {
        table
            .comments
            .push(format!("# n_failed = {}", report.n_failed));
    }
    for point in &report.points {
        let mut row: Vec<String> = point.coords.iter().map(|v| fmt_f64(*v)).collect();
        let winner = point
            .results
            .get(&method)
            .map(|o| o.most_likely.clone())
            .unwrap_or_default();
        row.push(winner);
        table.rows.push(row);
    }
    Ok(table)
}

/// Shared fig3/fig4 layout: the swept (last) axis leads, then the slower axes, then
/// method, configuration label, probability — one row per probability entry.
fn emit_probability_table(report: &ComparisonReport, figure: FigureId) -> Result<Table> {
    if report.axes.is_empty() {
        return Err(Error::Config(format!(
            "{figure} needs at least one sweep axis"
        )));
    }
    let n_axes = report.axes.len();
    let mut header = vec![short_axis_name(&report.axes[n_axes - 1].path)];
    header.extend(
        report.axes[..n_axes - 1]
            .iter()
            .map(|a| short_axis_name(&a.path)),
    );
    header.extend(["method", "config", "probability"].map(String::from));
    let mut table = Table::new(header);
    table.comments.push(format!("# kpo-sim {figure} v1"));
    if report.n_failed > 0 {
        table
            .comments
            .push(format!("# n_failed = {}", report.n_failed));
    }
    for point in &report.points {
        for (method, outcome) in &point.results {
            for (label, p) in &outcome.probabilities {
                let mut row = vec![fmt_f64(point.coords[n_axes - 1])];
                row.extend(point.coords[..n_axes - 1].iter().map(|v| fmt_f64(*v)));
                row.push(method.to_string());
                row.push(label.clone());
                row.push(fmt_f64(*p));
                table.rows.push(row);
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::parse_config;

    fn doc_with(extra: &str) -> ConfigDoc {
        let text = format!(
            r#"
[[kpos]]
kerr_mhz = -12.6
pump_mhz = 6.0

[schedule]
t_s_us = 0.4
t_sp_us = 0.1
t_rd_us = 0.3
t_r_us = 0.2
delta0_mhz = -20.0
grid_points = 25

[fock]
dims = [12]
{extra}
"#
        );
        parse_config(&text).unwrap()
    }

    const DRIVE_SWEEP: &str = r#"
[sweep]
methods = ["spin"]

[[sweep.axes]]
path = "schedule.drive_exponent"
values = [1.0, 1.34]

[[sweep.axes]]
path = "kpos[0].drive_rescaled_mhz"
values = [-2.0, -1.0, 1.0, 2.0]
"#;

    #[test]
    fn fig5_pump_trace_reaches_one_exactly_at_the_ramp_end() {
        let doc = doc_with("");
        let table = emit_figure(&doc, FigureId::Fig5, None).unwrap();
        assert_eq!(
            table.header,
            vec!["t_us", "delta_mhz", "pump_fraction", "drive_fraction"]
        );
        let t_col = table.column("t_us").unwrap();
        let p_col = table.column("pump_fraction").unwrap();
        let d_col = table.column("delta_mhz").unwrap();
        let at_ramp_end = table
            .rows
            .iter()
            .find(|r| r[t_col] == "0.4")
            .expect("breakpoint row present");
        assert_eq!(at_ramp_end[p_col], "1");
        assert_eq!(table.rows[0][d_col], "-20");
        for row in &table.rows {
            let p: f64 = row[p_col].parse().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn alpha_tables_round_trip_byte_for_byte() {
        let doc = doc_with("");
        let table = emit_figure(&doc, FigureId::Alpha, None).unwrap();
        assert_eq!(table.header, vec!["t_us", "alpha_0"]);
        assert!(table
            .comments
            .iter()
            .any(|c| c.contains("alpha_method = variational")));
        let csv = table.to_csv();
        let reloaded = Table::from_csv(&csv).unwrap();
        assert_eq!(reloaded, table);
        assert_eq!(reloaded.to_csv(), csv);
    }

    #[test]
    fn tidy_probability_tables_lead_with_the_sweep_value() {
        let doc = doc_with(DRIVE_SWEEP);
        let table = emit_figure(&doc, FigureId::Fig3, None).unwrap();
        assert_eq!(
            table.header,
            vec!["omega0_mhz", "f", "method", "config", "probability"]
        );
        // 2 exponents x 4 drives x 1 method x 2 configurations
        assert_eq!(table.rows.len(), 16);

        // per (point, method) the probabilities sum to one
        for pair in table.rows.chunks(2) {
            let total: f64 = pair.iter().map(|r| r[4].parse::<f64>().unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "sum {total}");
        }

        // repeat emission is byte-identical, and parsing it back loses nothing
        let again = emit_figure(&doc, FigureId::Fig3, Some(2)).unwrap();
        assert_eq!(again.to_csv(), table.to_csv());
        assert_eq!(Table::from_csv(&table.to_csv()).unwrap(), table);
    }

    #[test]
    fn fig2_maps_winners_and_insists_on_one_method() {
        let doc = doc_with(DRIVE_SWEEP);
        let table = emit_figure(&doc, FigureId::Fig2, None).unwrap();
        assert_eq!(table.header, vec!["f", "omega0_mhz", "most_likely_state"]);
        assert_eq!(table.rows.len(), 8);
        for row in &table.rows {
            let drive: f64 = row[1].parse().unwrap();
            assert_eq!(row[2], if drive > 0.0 { "+" } else { "-" });
        }

        let two = doc_with(&DRIVE_SWEEP.replace(
            r#"methods = ["spin"]"#,
            r#"methods = ["spin", "fock_master"]"#,
        ));
        let err = emit_figure(&two, FigureId::Fig2, None).unwrap_err();
        assert!(err.to_string().contains("exactly one method"), "{err}");

        // a config without [sweep] is named as the missing input
        let bare = doc_with("");
        let err = emit_figure(&bare, FigureId::Fig3, None).unwrap_err();
        assert!(err.to_string().contains("[sweep]"), "{err}");
    }

    #[test]
    fn comparison_reports_pass_through_the_table_loader_losslessly() {
        let doc = doc_with(DRIVE_SWEEP);
        let plan = SweepPlan::from_doc(&doc).unwrap();
        let report = run_sweep(&plan).unwrap();
        let csv = report.to_csv();
        let table = Table::from_csv(&csv).unwrap();
        assert_eq!(table.to_csv(), csv);
        assert!(table.comments.iter().any(|c| c.starts_with("# transition = ")));
    }

    #[test]
    fn ragged_tables_are_rejected_with_the_line_number() {
        let err = Table::from_csv("a,b\n1,2\n3\n").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        assert!(Table::from_csv("").is_err());
    }
}
