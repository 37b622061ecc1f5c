use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sweep::{ShiftFit, SweepRow};
use super::SweepConfig;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Echo of the inputs; together with each row's seed it reproduces the run.
    pub config: SweepConfig,
    /// Ordered by decreasing `η`.
    pub rows: Vec<SweepRow>,
    pub fitted: Option<ShiftFit>,
    pub version: String,
}

/// Semicolon-separated list, so vectors fit in one CSV field.
pub fn format_list<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn floats(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.10e}")).collect::<Vec<_>>().join(";")
}

const COLUMNS: &[&str] = &[
    "eta",
    "epsilon",
    "epsilon_prime",
    "r_h",
    "big_r_h",
    "handle_count",
    "count_bound",
    "holes_skipped",
    "hole_volume_fraction",
    "vertices",
    "seed",
    "lambdas",
    "parities",
    "sigmas",
    "limit_sigmas",
    "relative_errors",
    "even_cluster",
    "odd_cluster",
    "odd_mean",
    "odd_angles",
    "c0",
    "max_residual",
    "seconds",
    "error",
];

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# format: 1\n");
        s.push_str(&COLUMNS.join(","));
        s.push('\n');
        for r in &self.rows {
            let parities: Vec<&str> = r.parities.iter().map(|p| p.label()).collect();
            let fields = [
                format!("{}", r.eta),
                format!("{:.10e}", r.epsilon),
                format!("{:.10e}", r.epsilon_prime),
                format!("{:.10e}", r.r_h),
                format!("{:.10e}", r.big_r_h),
                r.handle_count.to_string(),
                format!("{:.6}", r.count_bound),
                r.holes_skipped.to_string(),
                format!("{:.10e}", r.hole_volume_fraction),
                r.vertices.to_string(),
                r.seed.to_string(),
                floats(&r.lambdas),
                format_list(&parities),
                floats(&r.sigmas),
                floats(&r.limit_sigmas),
                floats(&r.relative_errors),
                floats(&r.even_cluster),
                floats(&r.odd_cluster),
                format!("{:.10e}", r.odd_mean),
                floats(&r.odd_angles),
                format!("{:.10e}", r.c0),
                format!("{:.3e}", r.max_residual),
                format!("{:.3}", r.seconds),
                r.error.as_deref().unwrap_or("").replace([',', '\n'], " "),
            ];
            s.push_str(&fields.join(","));
            s.push('\n');
        }
        s
    }

    /// Key-value summary; the first line is the format version.
    pub fn summary(&self) -> String {
        let mut s = String::from("format: 1\n");
        let _ = writeln!(s, "version: {}", self.version);
        let c = &self.config;
        let _ = writeln!(s, "alpha: {}\nlambda: {}\nconvention: {}", c.alpha, c.lambda, c.convention.label());
        let _ = writeln!(s, "eta_schedule: {}", format_list(&c.eta_schedule));
        let _ = writeln!(s, "seed: {}", c.seed);
        let _ = writeln!(s, "rows: {}", self.rows.len());
        let _ = writeln!(s, "failed_rows: {}", self.rows.iter().filter(|r| !r.ok()).count());
        for r in &self.rows {
            let _ = writeln!(
                s,
                "row eta={}: handles={} odd_mean={:.6} max_odd_angle={:.4e} hole_volume_fraction={:.4e} c0={:.4}",
                r.eta,
                r.handle_count,
                r.odd_mean,
                r.max_odd_angle(),
                r.hole_volume_fraction,
                r.c0
            );
        }
        match &self.fitted {
            Some(f) => {
                let _ = writeln!(
                    s,
                    "fitted_shift: {:.6}\nfitted_alpha_form: {:.6}\nfitted_alpha_paper: {:.6}\nfit_rows: {}",
                    f.shift, f.alpha_form, f.alpha_paper, f.rows_used
                );
            }
            None => s.push_str("fitted_shift: unresolved\n"),
        }
        s
    }

    /// Writes the CSV and summary to the configured paths, if any.
    pub fn write_outputs(&self) -> Result<()> {
        let write = |p: &Path, text: String| -> Result<()> { Ok(std::fs::write(p, text)?) };
        if let Some(p) = &self.config.output_paths.report {
            write(p, self.to_csv())?;
        }
        if let Some(p) = &self.config.output_paths.summary {
            write(p, self.summary())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_names_every_column() {
        let report = SweepReport {
            config: SweepConfig::default(),
            rows: vec![SweepRow { eta: 0.4, lambdas: vec![0.0, 2.0], error: Some("a, b".into()), ..Default::default() }],
            fitted: None,
            version: "0".into(),
        };
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# format: 1"));
        let header = lines.next().unwrap();
        let row = lines.next().unwrap();
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(report.summary().starts_with("format: 1\n"));
    }
}
