//! Output formatting and the record types of every CSV the tool writes.
//!
//! Each record type deserializes the matching CSV back, so emitted files
//! can be read by [`read_csv`].

use std::io::Read;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Significant digits of every emitted real number.
pub const SIGNIFICANT_DIGITS: usize = 15;

/// Format with [`SIGNIFICANT_DIGITS`] significant digits, trailing zeros
/// trimmed; scientific notation outside `[1e-5, 1e15)`.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "NaN".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..15).contains(&exp) {
        let s = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
        let (mantissa, e) = s.split_once('e').expect("exponent");
        return format!("{}e{e}", trim_zeros(mantissa));
    }
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// JSON number rounded like the CSV output.
pub fn json_num(x: f64) -> serde_json::Value {
    fmt_num(x)
        .parse::<f64>()
        .ok()
        .and_then(serde_json::Number::from_f64)
        .map_or(serde_json::Value::Null, serde_json::Value::Number)
}

pub fn read_csv<T: DeserializeOwned, R: Read>(reader: R) -> Result<Vec<T>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRecord {
    pub table: String,
    pub sided: String,
    pub p_value: f64,
    pub log_p_value: f64,
    pub offset_log_prob: f64,
    pub p_value_unclamped: f64,
    pub tables_total: String,
    pub tables_included: u64,
}

pub const PVALUE_HEADER: [&str; 8] = [
    "table",
    "sided",
    "p_value",
    "log_p_value",
    "offset_log_prob",
    "p_value_unclamped",
    "tables_total",
    "tables_included",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub s1: usize,
    pub f1: usize,
    pub s2: usize,
    pub f2: usize,
    #[serde(default)]
    pub two_sided: Option<f64>,
    #[serde(default)]
    pub one_sided: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimRecord {
    pub index: usize,
    pub table: String,
    #[serde(default)]
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRecord {
    pub alpha: f64,
    pub test: String,
    pub tpr: f64,
    pub fpr: f64,
}

pub const POWER_HEADER: [&str; 4] = ["alpha", "test", "tpr", "fpr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocRecord {
    pub test: String,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub rows: usize,
    pub marginals: String,
    pub tables: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub workload: String,
    pub sided: String,
    pub tables: String,
    pub p_value: f64,
    pub seconds: f64,
}

/// Any CSV with a `table` column, e.g. the output of `simulate`.
#[derive(Debug, Clone, Deserialize)]
pub struct TableColumn {
    pub table: String,
}
