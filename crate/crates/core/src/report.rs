//! Reproducible JSON serialization: struct-declaration key order and every
//! float written with 17 significant digits, so identical runs produce
//! byte-identical report files.

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

use crate::error::{Error, Result};

struct FixedPrecision;

impl Formatter for FixedPrecision {
    fn write_f64<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        // 1 leading + 16 fractional digits = 17 significant digits
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + std::io::Write>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()> {
        write!(writer, "{value:.7e}")
    }
}

/// Serializes a report with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, FixedPrecision);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Serialize(e.to_string()))?;
    out.push(b'\n');
    String::from_utf8(out).map_err(|e| Error::Serialize(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        theta: f64,
        count: usize,
        label: String,
    }

    #[test]
    fn floats_carry_seventeen_significant_digits() {
        let s = Sample {
            theta: std::f64::consts::PI,
            count: 7,
            label: "x".into(),
        };
        let text = to_json_string(&s).unwrap();
        assert_eq!(
            text,
            "{\"theta\":3.1415926535897931e0,\"count\":7,\"label\":\"x\"}\n"
        );
        // parses back to the same bits
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["theta"].as_f64().unwrap(), std::f64::consts::PI);
    }
}
