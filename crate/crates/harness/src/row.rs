//! One line of experiment output, and the CSV and JSON writers.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    /// Name of the swept quantity and its value at this row.
    pub sweep: String,
    pub value: f64,
    pub strategy: String,
    /// `R_min / (N W)`.
    pub efficiency: f64,
    pub varsigma: f64,
    pub p_error: f64,
    pub feasible: bool,
    /// Predicted collision time in frame units (mean over frames for
    /// ergodic runs); absent when sensing errors make the prediction void.
    pub collision: Option<f64>,
    pub collision_se: Option<f64>,
    /// Collision measured on simulated traffic paths.
    pub realized: Option<f64>,
    pub realized_se: Option<f64>,
    /// Achieved `min(R1, R2) / (N W)`.
    pub rate: Option<f64>,
    /// Fractions per band, `;`-separated (frame sweep only).
    pub theta1: String,
    pub theta2: String,
    pub frames: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = crate::error::HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(crate::error::HarnessError::BadInput(format!("unknown format {other:?}"))),
        }
    }
}

/// Decimal rendering with nine significant digits.
pub fn sig9(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v == 0.0 { "0".into() } else { v.to_string() };
    }
    // Rounding happens once, in the scientific form; the digits are then
    // shifted into place.
    let sci = format!("{:.8e}", v.abs());
    let (mantissa, exp) = sci.split_once('e').expect("scientific form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let digits: String = mantissa.chars().filter(|c| *c != '.').collect();
    let body = if exp < 0 {
        format!("0.{}{}", "0".repeat((-exp - 1) as usize), digits)
    } else if (exp as usize) < digits.len() - 1 {
        let (int, frac) = digits.split_at(exp as usize + 1);
        format!("{int}.{frac}")
    } else {
        format!("{digits}{}", "0".repeat(exp as usize + 1 - digits.len()))
    };
    let body = if body.contains('.') {
        body.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        body
    };
    if v < 0.0 {
        format!("-{body}")
    } else {
        body
    }
}

fn theta_list(values: &[f64]) -> String {
    values.iter().map(|v| sig9(*v)).collect::<Vec<_>>().join(";")
}

impl ResultRow {
    pub(crate) fn format_thetas(theta1: &[f64], theta2: &[f64]) -> (String, String) {
        (theta_list(theta1), theta_list(theta2))
    }

    const HEADER: [&'static str; 16] = [
        "experiment",
        "sweep",
        "value",
        "strategy",
        "efficiency",
        "varsigma",
        "p_error",
        "feasible",
        "collision",
        "collision_se",
        "realized",
        "realized_se",
        "rate",
        "theta1",
        "theta2",
        "frames",
    ];

    fn record(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(sig9).unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.sweep.clone(),
            sig9(self.value),
            self.strategy.clone(),
            sig9(self.efficiency),
            sig9(self.varsigma),
            sig9(self.p_error),
            self.feasible.to_string(),
            opt(self.collision),
            opt(self.collision_se),
            opt(self.realized),
            opt(self.realized_se),
            opt(self.rate),
            self.theta1.clone(),
            self.theta2.clone(),
            self.frames.to_string(),
        ]
    }
}

/// Writes the rows as CSV with a header line.
pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(ResultRow::HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn to_json(rows: &[ResultRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

pub fn render(rows: &[ResultRow], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => Ok(to_json(rows)),
    }
}
