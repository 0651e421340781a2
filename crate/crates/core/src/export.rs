//! Serialization helpers shared by every JSON and CSV writer.

use serde::{Serialize, Serializer};

/// A real number serialized with 17 significant digits.
///
/// Non-finite values are written as the strings `"inf"`, `"-inf"` or `"nan"`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Real(pub f64);

/// Formats `v` in scientific notation with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        }
    } else {
        format!("{v:.16e}")
    }
}

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_str(&fmt_real(self.0));
        }
        let n: serde_json::Number = fmt_real(self.0).parse().map_err(serde::ser::Error::custom)?;
        n.serialize(s)
    }
}

impl From<f64> for Real {
    fn from(v: f64) -> Self {
        Real(v)
    }
}

pub fn reals(v: &[f64]) -> Vec<Real> {
    v.iter().copied().map(Real).collect()
}

/// Serializes `value` as pretty JSON followed by a single LF.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = serde_json::to_string_pretty(value).expect("JSON serialization of plain data");
    out.push('\n');
    out
}

/// Builds CSV text with LF line endings. Cells are written verbatim.
pub fn csv<I, R>(header: &[&str], rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(1.0), "1.0000000000000000e0");
        let json = serde_json::to_string(&vec![Real(0.25), Real(f64::INFINITY)]).unwrap();
        assert_eq!(json, "[2.5000000000000000e-1,\"inf\"]");
    }

    #[test]
    fn round_trip_is_exact() {
        for v in [std::f64::consts::PI, 1e-300, 123456.789, -2.0f64.sqrt()] {
            assert_eq!(fmt_real(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_uses_lf() {
        let text = csv(&["a", "b"], vec![vec!["1".to_string(), "2".to_string()]]);
        assert_eq!(text, "a,b\n1,2\n");
    }

    #[test]
    fn compensation_helps() {
        let v = std::iter::repeat_n(0.1, 1_000_000);
        assert!((compensated_sum(v) - 100_000.0).abs() < 1e-9);
    }
}
