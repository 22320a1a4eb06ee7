//! Float formatting for every file the crate writes.

use serde::Serializer;
use serde_json::value::RawValue;

/// 17 significant digits in scientific notation; parses back to the same
/// `f64` in any language.
pub fn f17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

/// Serde helper emitting an `f64` as a bare JSON number with 17 significant
/// digits. Non-finite values become `null`.
pub fn serialize_f17<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return s.serialize_none();
    }
    let raw = RawValue::from_string(f17(*x)).map_err(serde::ser::Error::custom)?;
    serde::Serialize::serialize(&raw, s)
}

pub fn serialize_f17_vec<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        seq.serialize_element(&F17(*x))?;
    }
    seq.end()
}

/// Wrapper that serializes through [`serialize_f17`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

impl serde::Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        serialize_f17(&self.0, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 123456789.0, 0.0] {
            let s = f17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(mantissa.len(), 17, "{s}");
        }
    }

    #[test]
    fn json_numbers_are_valid() {
        #[derive(serde::Serialize)]
        struct S {
            #[serde(serialize_with = "serialize_f17")]
            a: f64,
            #[serde(serialize_with = "serialize_f17_vec")]
            v: Vec<f64>,
        }
        let json = serde_json::to_string(&S { a: 0.5, v: vec![1.0, 0.25] }).unwrap();
        let back: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.5));
        assert_eq!(back["v"][1].as_f64(), Some(0.25));
    }
}
