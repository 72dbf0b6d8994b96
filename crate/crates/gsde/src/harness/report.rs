//! Report rendering: CSV for tabular consumers, JSON for structured
//! ones, and a short human summary for the terminal.
//!
//! Output is part of the reproducibility contract, so floats are printed
//! with `{:.16e}` (17 significant digits, enough to round-trip any f64)
//! and JSON is rendered by hand in fixed key order. Non-finite values
//! appear in JSON as the quoted strings "nan", "inf", "-inf", since JSON
//! has no literals for them.

use std::fmt::Write as _;
use std::path::Path;

use crate::bounds::BoundSet;
use crate::error::{Error, Result};
use crate::harness::config::OutConfig;
use crate::harness::experiments::{
    BoundsReport, ConvergenceReport, IncrementReport, MomentReport, PathsReport,
};

/// Caveat attached to every Monte Carlo report: the empirical side of a
/// comparison can only undershoot the quantity the bound controls.
pub const ESTIMATOR_NOTE: &str = "empirical values are max-of-scenario-means over finitely many \
     paths and lower-bound the worst-case expectation";

/// Extra caveat on convergence reports, where the exact solution is
/// unavailable.
pub const REFERENCE_NOTE: &str =
    "errors are measured against a fine reference solve standing in for the exact solution";

/// Round-trip float formatting shared by CSV, JSON, and summaries.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:.16e}")
    }
}

fn json_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("\"{}\"", format_float(x))
    }
}

fn json_string(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn json_scenarios(scenarios: &[crate::gshock::ScenarioPolicy]) -> String {
    let names: Vec<String> = scenarios.iter().map(|s| json_string(s.name())).collect();
    names.join(", ")
}

fn bounds_json_fields(b: &BoundSet) -> String {
    format!(
        "\"moment_base\": {}, \"moment_rate\": {}, \"moment_bound\": {}, \
         \"increment_rate\": {}, \"ln_moment_bound\": {}, \"ln_increment_rate\": {}, \
         \"astronomically_loose\": {}",
        json_number(b.moment_base),
        json_number(b.moment_rate),
        json_number(b.moment_bound),
        json_number(b.increment_rate),
        json_number(b.ln_moment_bound),
        json_number(b.ln_increment_rate),
        b.astronomically_loose
    )
}

/// Everything a subcommand's result must be able to do: render both
/// formats and summarize itself for stdout.
pub trait Report {
    fn to_csv(&self) -> String;
    fn to_json(&self) -> String;
    fn summary(&self) -> String;
    /// False when the experiment observed a bound violation.
    fn passed(&self) -> bool {
        true
    }
}

impl Report for MomentReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("statistic,value,K,pass\n");
        let k = format_float(self.moment_bound);
        let _ = writeln!(
            out,
            "sup_of_moments,{},{},{}",
            format_float(self.sup_of_moments),
            k,
            self.sup_of_moments <= self.moment_bound
        );
        let _ = writeln!(
            out,
            "moment_of_sup,{},{},{}",
            format_float(self.moment_of_sup),
            k,
            self.moment_of_sup <= self.moment_bound
        );
        out
    }

    fn to_json(&self) -> String {
        let per_scenario: Vec<String> = self
            .per_scenario
            .iter()
            .map(|s| {
                format!(
                    "{{\"scenario\": {}, \"sup_of_moments\": {}, \"moment_of_sup\": {}}}",
                    json_string(s.scenario.name()),
                    json_number(s.sup_of_moments),
                    json_number(s.moment_of_sup)
                )
            })
            .collect();
        format!(
            "{{\"experiment\": \"moments\", \"problem\": {}, \"q\": {}, \"n_paths\": {}, \
             \"sup_of_moments\": {}, \"moment_of_sup\": {}, \"moment_bound\": {}, \
             \"pass\": {}, \"per_scenario\": [{}], \"bounds\": {{{}}}, \"notes\": [{}]}}\n",
            json_string(&self.problem_label),
            self.resolution,
            self.n_paths,
            json_number(self.sup_of_moments),
            json_number(self.moment_of_sup),
            json_number(self.moment_bound),
            self.pass,
            per_scenario.join(", "),
            bounds_json_fields(&self.bounds),
            json_string(ESTIMATOR_NOTE)
        )
    }

    fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "second-moment check: {} | q = {} | {} paths x {} scenarios",
            self.problem_label,
            self.resolution,
            self.n_paths,
            self.per_scenario.len()
        );
        let _ = writeln!(out, "K = {}", format_float(self.moment_bound));
        let _ = writeln!(
            out,
            "sup_of_moments = {} ({})",
            format_float(self.sup_of_moments),
            gap(self.sup_of_moments, self.moment_bound)
        );
        let _ = writeln!(
            out,
            "moment_of_sup  = {} ({})",
            format_float(self.moment_of_sup),
            gap(self.moment_of_sup, self.moment_bound)
        );
        let _ = writeln!(out, "note: {ESTIMATOR_NOTE}");
        let _ = write!(out, "{}", verdict(self.pass));
        out
    }

    fn passed(&self) -> bool {
        self.pass
    }
}

impl Report for IncrementReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("r,t,empirical,bound,pass\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                format_float(row.r),
                format_float(row.t),
                format_float(row.empirical),
                format_float(row.bound),
                row.pass
            );
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                format!(
                    "{{\"r\": {}, \"t\": {}, \"empirical\": {}, \"bound\": {}, \"pass\": {}}}",
                    json_number(row.r),
                    json_number(row.t),
                    json_number(row.empirical),
                    json_number(row.bound),
                    row.pass
                )
            })
            .collect();
        format!(
            "{{\"experiment\": \"increments\", \"problem\": {}, \"q\": {}, \"n_paths\": {}, \
             \"scenarios\": [{}], \"increment_rate\": {}, \"pass\": {}, \"rows\": [{}], \
             \"bounds\": {{{}}}, \"notes\": [{}]}}\n",
            json_string(&self.problem_label),
            self.resolution,
            self.n_paths,
            json_scenarios(&self.scenarios),
            json_number(self.increment_rate),
            self.pass,
            rows.join(", "),
            bounds_json_fields(&self.bounds),
            json_string(ESTIMATOR_NOTE)
        )
    }

    fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "increment check: {} | q = {} | {} paths | {} pairs",
            self.problem_label,
            self.resolution,
            self.n_paths,
            self.rows.len()
        );
        let _ = writeln!(out, "H1 = {}", format_float(self.increment_rate));
        let worst = self
            .rows
            .iter()
            .map(|row| {
                if row.bound > 0.0 {
                    row.empirical / row.bound
                } else if row.empirical == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(out, "worst empirical/bound ratio = {}", format_float(worst));
        let _ = writeln!(out, "note: {ESTIMATOR_NOTE}");
        let _ = write!(out, "{}", verdict(self.pass));
        out
    }

    fn passed(&self) -> bool {
        self.pass
    }
}

impl Report for ConvergenceReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("q,mse_empirical,stderr,bound,ratio\n");
        for row in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                row.resolution,
                format_float(row.mse_empirical),
                format_float(row.std_error),
                format_float(row.bound),
                format_float(row.ratio)
            );
        }
        out
    }

    fn to_json(&self) -> String {
        let rows: Vec<String> = self
            .rows
            .iter()
            .map(|row| {
                format!(
                    "{{\"q\": {}, \"mse_empirical\": {}, \"stderr\": {}, \"bound\": {}, \
                     \"ratio\": {}}}",
                    row.resolution,
                    json_number(row.mse_empirical),
                    json_number(row.std_error),
                    json_number(row.bound),
                    json_number(row.ratio)
                )
            })
            .collect();
        let slope = match self.slope {
            Some(s) => json_number(s),
            None => "null".into(),
        };
        format!(
            "{{\"experiment\": \"converge\", \"problem\": {}, \"q_ref\": {}, \"n_paths\": {}, \
             \"scenarios\": [{}], \"slope\": {}, \"pass\": {}, \"rows\": [{}], \
             \"bounds\": {{{}}}, \"notes\": [{}, {}]}}\n",
            json_string(&self.problem_label),
            self.reference_resolution,
            self.n_paths,
            json_scenarios(&self.scenarios),
            slope,
            self.pass,
            rows.join(", "),
            bounds_json_fields(&self.bounds),
            json_string(ESTIMATOR_NOTE),
            json_string(REFERENCE_NOTE)
        )
    }

    fn summary(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "strong-error check: {} | reference q = {} | {} paths",
            self.problem_label, self.reference_resolution, self.n_paths
        );
        for row in &self.rows {
            let _ = writeln!(
                out,
                "q = {:>6}: mse = {} (se {}) vs bound {} | ratio = {}",
                row.resolution,
                format_float(row.mse_empirical),
                format_float(row.std_error),
                format_float(row.bound),
                format_float(row.ratio)
            );
        }
        match self.slope {
            Some(s) => {
                let _ = writeln!(out, "fitted slope of ln(mse) vs ln(q) = {}", format_float(s));
            }
            None => {
                let _ = writeln!(
                    out,
                    "fitted slope undefined (an empirical mse is zero; the scheme \
                     solves this problem exactly)"
                );
            }
        }
        let _ = writeln!(out, "note: {ESTIMATOR_NOTE}");
        let _ = writeln!(out, "note: {REFERENCE_NOTE}");
        let _ = write!(out, "{}", verdict(self.pass));
        out
    }

    fn passed(&self) -> bool {
        self.pass
    }
}

impl Report for PathsReport {
    fn to_csv(&self) -> String {
        let mut out = String::from("path_id,scenario,t,W,QV\n");
        for trace in &self.paths {
            for ((t, w), qv) in self.grid.iter().zip(&trace.w).zip(&trace.qv) {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    trace.path_id,
                    trace.scenario.name(),
                    format_float(*t),
                    format_float(*w),
                    format_float(*qv)
                );
            }
        }
        out
    }

    fn to_json(&self) -> String {
        let grid: Vec<String> = self.grid.iter().map(|&t| json_number(t)).collect();
        let paths: Vec<String> = self
            .paths
            .iter()
            .map(|trace| {
                let w: Vec<String> = trace.w.iter().map(|&x| json_number(x)).collect();
                let qv: Vec<String> = trace.qv.iter().map(|&x| json_number(x)).collect();
                format!(
                    "{{\"path_id\": {}, \"scenario\": {}, \"W\": [{}], \"QV\": [{}]}}",
                    trace.path_id,
                    json_string(trace.scenario.name()),
                    w.join(", "),
                    qv.join(", ")
                )
            })
            .collect();
        format!(
            "{{\"experiment\": \"paths\", \"problem\": {}, \"q\": {}, \"n_paths\": {}, \
             \"grid\": [{}], \"paths\": [{}]}}\n",
            json_string(&self.problem_label),
            self.resolution,
            self.n_paths,
            grid.join(", "),
            paths.join(", ")
        )
    }

    fn summary(&self) -> String {
        format!(
            "sampled {} driver paths ({} per scenario) on {} grid points, q = {}",
            self.paths.len(),
            self.n_paths,
            self.grid.len(),
            self.resolution
        )
    }
}

impl Report for BoundsReport {
    fn to_csv(&self) -> String {
        let b = &self.bounds;
        let mut out = String::from("constant,value\n");
        let _ = writeln!(out, "G1,{}", format_float(b.moment_base));
        let _ = writeln!(out, "G2,{}", format_float(b.moment_rate));
        let _ = writeln!(out, "K,{}", format_float(b.moment_bound));
        let _ = writeln!(out, "H1,{}", format_float(b.increment_rate));
        let _ = writeln!(out, "ln_K,{}", format_float(b.ln_moment_bound));
        let _ = writeln!(out, "ln_H1,{}", format_float(b.ln_increment_rate));
        for (q, bound) in &self.table {
            let _ = writeln!(out, "error_bound_q{},{}", q, format_float(*bound));
        }
        out
    }

    fn to_json(&self) -> String {
        let table: Vec<String> = self
            .table
            .iter()
            .map(|(q, bound)| format!("{{\"q\": {}, \"bound\": {}}}", q, json_number(*bound)))
            .collect();
        format!(
            "{{\"experiment\": \"bounds\", \"problem\": {}, \"bounds\": {{{}}}, \
             \"error_bounds\": [{}]}}\n",
            json_string(&self.problem_label),
            bounds_json_fields(&self.bounds),
            table.join(", ")
        )
    }

    fn summary(&self) -> String {
        let b = &self.bounds;
        let mut out = String::new();
        let _ = writeln!(out, "explicit constants for {}:", self.problem_label);
        let _ = writeln!(out, "G1 = {}", format_float(b.moment_base));
        let _ = writeln!(out, "G2 = {}", format_float(b.moment_rate));
        let _ = writeln!(out, "K = {}", format_float(b.moment_bound));
        let _ = writeln!(out, "H1 = {}", format_float(b.increment_rate));
        if b.astronomically_loose {
            let _ = writeln!(
                out,
                "note: K overflows f64; ln(K) = {} (the bound holds but is \
                 astronomically loose)",
                format_float(b.ln_moment_bound)
            );
        }
        for (q, bound) in &self.table {
            let _ = writeln!(out, "error bound at q = {q}: {}", format_float(*bound));
        }
        out.pop();
        out
    }
}

fn gap(value: f64, bound: f64) -> String {
    if bound > 0.0 && value.is_finite() {
        format!("{:.1}% of bound", 100.0 * value / bound)
    } else {
        "bound degenerate".into()
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL: an estimate exceeded its bound"
    }
}

/// Writes the requested formats to disk; errors carry the path so the
/// caller can distinguish output failures from config problems.
pub fn write_outputs(report: &dyn Report, out: Option<&OutConfig>) -> Result<()> {
    let Some(out) = out else {
        return Ok(());
    };
    if let Some(path) = &out.csv {
        write_text(path, &report.to_csv())?;
    }
    if let Some(path) = &out.json {
        write_text(path, &report.to_json())?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
