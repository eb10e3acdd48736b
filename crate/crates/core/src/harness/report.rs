//! Run records and their CSV/JSON renderings.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::error::{Error, Result};
use crate::idealwalk::Distribution;
use crate::statespace::angular_to_mhz;

/// Column order of the CSV rendering.
pub const CSV_COLUMNS: [&str; 13] = [
    "n_steps",
    "g_over_2pi_MHz",
    "omega_over_2pi_MHz",
    "mu_over_2pi_MHz",
    "theta_rad",
    "coin0",
    "scale",
    "S",
    "S_renorm",
    "residual_vacuum",
    "residual_cavity",
    "trace_error",
    "wall_ms",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    /// Similarity under the configured renormalization setting.
    pub s: f64,
    /// Similarity with `P_me` rescaled to unit sum.
    pub s_renorm: f64,
    #[serde(rename = "P_me")]
    pub p_me: Distribution,
    #[serde(rename = "P_id")]
    pub p_id: Vec<f64>,
    pub trace_error: f64,
    pub hermiticity_drift: f64,
    pub min_eigenvalue: f64,
    pub wall_ms: f64,
}

/// One row of output: the full configuration plus either metrics or the
/// error that stopped the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub metrics: Option<RunMetrics>,
    pub error: Option<String>,
}

impl Report {
    pub fn success(config: ExperimentConfig, metrics: RunMetrics) -> Self {
        Report {
            config,
            metrics: Some(metrics),
            error: None,
        }
    }

    pub fn failure(config: ExperimentConfig, error: &Error) -> Self {
        Report {
            config,
            metrics: None,
            error: Some(error.to_string()),
        }
    }

    fn csv_record(&self) -> Vec<String> {
        let d = &self.config.device;
        let mut row = vec![
            d.n_steps.to_string(),
            angular_to_mhz(d.g).to_string(),
            angular_to_mhz(d.omega_rabi).to_string(),
            angular_to_mhz(d.mu).to_string(),
            d.theta.to_string(),
            self.config.coin0.to_string(),
            self.config.rates.scale.to_string(),
        ];
        match &self.metrics {
            Some(m) => row.extend([
                m.s.to_string(),
                m.s_renorm.to_string(),
                m.p_me.residual_vacuum.to_string(),
                m.p_me.residual_cavity.to_string(),
                m.trace_error.to_string(),
                format!("{:.3}", m.wall_ms),
            ]),
            None => row.extend(std::iter::repeat_n(String::new(), 6)),
        }
        row
    }
}

pub fn write_csv<W: Write>(reports: &[Report], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::InvalidParameter(format!("csv: {e}"));
    w.write_record(CSV_COLUMNS).map_err(to_err)?;
    for r in reports {
        w.write_record(r.csv_record()).map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::InvalidParameter(format!("csv: {e}")))
}

pub fn to_csv_string(reports: &[Report]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

pub fn to_json_string(reports: &[Report]) -> Result<String> {
    Ok(serde_json::to_string_pretty(reports)?)
}

pub fn from_json_str(text: &str) -> Result<Vec<Report>> {
    Ok(serde_json::from_str(text)?)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `reports` to `path` in `format`.
pub fn emit_report(reports: &[Report], path: &Path, format: OutputFormat) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidParameter("no reports to write".into()));
    }
    let text = match format {
        OutputFormat::Csv => to_csv_string(reports)?,
        OutputFormat::Json => to_json_string(reports)?,
    };
    write_file(path, &text)
}

/// Per-site table `site,P_me,P_id`.
pub fn distribution_csv(p_me: &Distribution, p_id: &[f64]) -> Result<String> {
    if p_me.n_sites() != p_id.len() {
        return Err(Error::DimensionMismatch {
            expected: p_id.len(),
            actual: p_me.n_sites(),
        });
    }
    let mut out = String::from("site,P_me,P_id\n");
    for (j, (a, b)) in p_me.p.iter().zip(p_id).enumerate() {
        out.push_str(&format!("{},{},{}\n", j + 1, a, b));
    }
    Ok(out)
}

pub fn emit_distribution(report: &Report, path: &Path) -> Result<()> {
    let m = report
        .metrics
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("report has no metrics".into()))?;
    write_file(path, &distribution_csv(&m.p_me, &m.p_id)?)
}

/// Which plot a gnuplot script should draw.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlotKind {
    /// `S` against `g/2π`, one curve per distinct coin or Rabi frequency.
    SimilarityVsG,
    /// `S` against `N`, one curve per lifetime scale.
    SimilarityVsSteps,
    /// Paired bars of `P_me` and `P_id` per site.
    Distribution,
}

/// Gnuplot commands plotting `data_file` (as written by this module).
pub fn plot_script(kind: PlotKind, data_file: &str) -> String {
    let header = "set datafile separator ','\nset key autotitle columnhead\nset grid\n";
    let body = match kind {
        PlotKind::SimilarityVsG => format!(
            "set xlabel 'g/2pi (MHz)'\nset ylabel 'S'\n\
             plot '{data_file}' using 2:8:(stringcolumn(6).' Omega/2pi='.stringcolumn(3)) \
             with linespoints title 'S'\n"
        ),
        PlotKind::SimilarityVsSteps => format!(
            "set xlabel 'N'\nset ylabel 'S'\n\
             plot for [sc in '5 1 0.2'] '{data_file}' using ($7 == sc+0 ? $1 : 1/0):8 \
             with linespoints title 'scale '.sc\n"
        ),
        PlotKind::Distribution => format!(
            "set xlabel 'site j'\nset ylabel 'P(j)'\nset style data histograms\n\
             set style histogram clustered\nset style fill solid 0.6 border -1\n\
             plot '{data_file}' using 3:xtic(1) title 'P_id', '' using 2 title 'P_me' fill pattern 4\n"
        ),
    };
    format!("{header}{body}")
}
