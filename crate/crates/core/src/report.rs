//! Check rows and CSV output shared by every report.

use std::io::Write;

use serde::{Deserialize, Serialize};

/// One inequality check: `lhs <= rhs` (or whatever relation `id` names)
/// with the numerical error bar that went into the verdict.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub id: String,
    #[serde(with = "float")]
    pub lhs: f64,
    #[serde(with = "float")]
    pub rhs: f64,
    pub pass: bool,
    #[serde(with = "float")]
    pub error_bar: f64,
}

/// JSON has no infinities; non-finite values travel as the strings
/// `"inf"`, `"-inf"` and `"NaN"`.
pub mod float {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(&super::fmt_f64(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                _ => Err(de::Error::custom(format!("not a number: {t}"))),
            },
        }
    }
}

impl CheckRow {
    /// `lhs <= rhs + error_bar`.
    pub fn le(id: impl Into<String>, lhs: f64, rhs: f64, error_bar: f64) -> Self {
        CheckRow {
            id: id.into(),
            lhs,
            rhs,
            pass: lhs <= rhs + error_bar,
            error_bar,
        }
    }

    /// `lhs >= rhs - error_bar`.
    pub fn ge(id: impl Into<String>, lhs: f64, rhs: f64, error_bar: f64) -> Self {
        CheckRow {
            id: id.into(),
            lhs,
            rhs,
            pass: lhs >= rhs - error_bar,
            error_bar,
        }
    }

    /// `|lhs - rhs| <= error_bar`.
    pub fn close(id: impl Into<String>, lhs: f64, rhs: f64, error_bar: f64) -> Self {
        CheckRow {
            id: id.into(),
            lhs,
            rhs,
            pass: (lhs - rhs).abs() <= error_bar,
            error_bar,
        }
    }
}

pub fn all_pass(rows: &[CheckRow]) -> bool {
    rows.iter().all(|r| r.pass)
}

/// Shortest round-trip decimal; deterministic across runs.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:e}")
    }
}

/// Write rows as CSV (header `lemma_id,lhs,rhs,pass,error_bar`).
pub fn write_checks<W: Write>(out: W, rows: &[CheckRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lemma_id", "lhs", "rhs", "pass", "error_bar"])?;
    for r in rows {
        w.write_record([
            r.id.clone(),
            fmt_f64(r.lhs),
            fmt_f64(r.rhs),
            r.pass.to_string(),
            fmt_f64(r.error_bar),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table writer: header then string rows.
pub fn write_table<W: Write>(out: W, header: &[&str], rows: &[Vec<String>]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}
