//! Fixed-precision number output shared by every JSON and CSV writer.

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// `x` with 17 significant digits, e.g. `1.0000000000000000e0`.
pub fn sig17(x: f64) -> String {
    if x == 0.0 {
        // no negative zero in outputs
        return format!("{:.16e}", 0.0f64);
    }
    format!("{x:.16e}")
}

/// Serializes an `f64` as a JSON number with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig17(pub f64);

impl Serialize for Sig17 {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(S::Error::custom(format!("non-finite value {}", self.0)));
        }
        let raw = RawValue::from_string(sig17(self.0)).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

/// Serializes a decimal integer string as a bare JSON number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawInteger(pub String);

impl Serialize for RawInteger {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let raw = RawValue::from_string(self.0.clone()).map_err(S::Error::custom)?;
        raw.serialize(serializer)
    }
}

pub(crate) mod vec17 {
    use super::Sig17;
    use serde::ser::SerializeSeq;
    use serde::Serializer;

    pub fn serialize<S: Serializer>(v: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(v.len()))?;
        for &x in v {
            seq.serialize_element(&Sig17(x))?;
        }
        seq.end()
    }
}

pub(crate) mod f17 {
    use super::Sig17;
    use serde::{Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, serializer: S) -> Result<S::Ok, S::Error> {
        Sig17(*x).serialize(serializer)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678, std::f64::consts::PI] {
            let s = sig17(x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(sig17(-0.0), sig17(0.0));
    }

    #[test]
    fn json_numbers() {
        let s = serde_json::to_string(&vec![Sig17(0.5), Sig17(-1.0)]).unwrap();
        assert_eq!(s, "[5.0000000000000000e-1,-1.0000000000000000e0]");
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![0.5, -1.0]);
        assert!(serde_json::to_string(&Sig17(f64::NAN)).is_err());
        assert_eq!(serde_json::to_string(&RawInteger("123456789012345678901234567890".into())).unwrap(),
            "123456789012345678901234567890");
    }
}
