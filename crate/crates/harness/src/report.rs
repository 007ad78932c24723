//! Result tables, CSV/JSON writers and the small statistics used to
//! summarize seeds.

use crate::error::{HarnessError, Stage};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// A parameter or cell value: numbers print with six significant digits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Param {
    Num(f64),
    Text(String),
}

impl From<f64> for Param {
    fn from(v: f64) -> Self {
        Param::Num(v)
    }
}

impl From<&str> for Param {
    fn from(v: &str) -> Self {
        Param::Text(v.to_string())
    }
}

impl Param {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Param::Num(v) => Some(*v),
            Param::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Param::Num(v) => sig6(*v),
            Param::Text(s) => s.clone(),
        }
    }
}

pub type Params = BTreeMap<String, Param>;

/// Six significant digits, without exponent noise for ordinary magnitudes.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    if v == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{v:.5e}").parse().unwrap();
    if rounded.abs() < 1e-4 || rounded.abs() >= 1e15 {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

/// Plain table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Param>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Param::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Param>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }
}

/// Builds a table whose leading columns are the (sorted) parameter names of
/// the first row followed by the metric columns in the given order.
pub fn params_table(metric_names: &[&str], rows: &[(Params, Vec<Param>)]) -> Table {
    let param_names: Vec<String> = rows.first().map(|r| r.0.keys().cloned().collect()).unwrap_or_default();
    let mut columns = param_names.clone();
    columns.extend(metric_names.iter().map(|s| s.to_string()));
    let rows = rows
        .iter()
        .map(|(p, m)| {
            let mut r: Vec<Param> = param_names.iter().map(|k| p[k].clone()).collect();
            r.extend(m.iter().cloned());
            r
        })
        .collect();
    Table { columns, rows }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| HarnessError::new(Stage::Output, format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| HarnessError::new(Stage::Output, format!("{}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::new(Stage::Output, e))?;
    text.push('\n');
    write_text(path, &text)
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); zero for a single value.
pub fn std_dev(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Ordinary least-squares line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Standard error of the slope; zero when the fit is exact.
    pub slope_se: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> LinearFit {
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    let slope_se = if n > 2.0 { (sse / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    LinearFit {
        slope,
        intercept,
        r2,
        slope_se,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(236117.4), "236117");
        assert_eq!(sig6(0.972414), "0.972414");
        assert_eq!(sig6(0.97241379), "0.972414");
        assert_eq!(sig6(10_000.0), "10000");
        assert_eq!(sig6(0.3), "0.3");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(-1234567.0), "-1234570");
        assert_eq!(sig6(f64::NAN), "NaN");
        assert_eq!(sig6(4.381714e-16), "4.38171e-16");
    }

    #[test]
    fn table_puts_sorted_params_first() {
        let mut p = Params::new();
        p.insert("tau".into(), 0.3.into());
        p.insert("beta".into(), 0.9.into());
        p.insert("formulation".into(), "box".into());
        let t = params_table(&["mean_cvar"], &[(p, vec![Param::Num(1.0 / 3.0)])]);
        assert_eq!(t.to_csv(), "beta,formulation,tau,mean_cvar\n0.9,box,0.3,0.333333\n");
    }

    #[test]
    fn fit_and_moments() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12 && f.slope_se.abs() < 1e-12);
        let flat = linear_fit(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]);
        assert_eq!((flat.slope, flat.r2), (0.0, 1.0));
        assert_eq!(std_dev(&[2.0]), 0.0);
        assert!((std_dev(&[1.0, 2.0, 3.0]) - 1.0).abs() < 1e-12);
    }
}
