//! JSON description of a Gödel map.
//!
//! ```json
//! {"alphabet": ["#", "0", "1"], "spin": 1,
//!  "g": {"kind": "basis"},
//!  "p": {"kind": "line", "origin": [0,0,0], "dir": [1,0,0]}}
//! ```
//!
//! `g.kind` is one of `basis`, `unitary` (`"u"`: rows of `[re, im]`),
//! `gauge` (`"sites"`: list of `{"site", "u"}`) or `block`. The first three
//! accept `"assign"`, an explicit projection per symbol. `p.kind` is `line`
//! or `list` (`"sites"`).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GodelError, GodelMap, PathRule, SymbolEncoding};
use crate::lang::Alphabet;
use crate::qstate::{LatticeSite, QuditSpec, C64};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GodelMapConfig {
    pub alphabet: Alphabet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spin: Option<f64>,
    #[serde(default = "EncodingConfig::basis")]
    pub g: EncodingConfig,
    #[serde(default = "PathConfig::x_axis")]
    pub p: PathConfig,
}

pub type MatrixConfig = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeEntry {
    pub site: LatticeSite,
    pub u: MatrixConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EncodingConfig {
    Basis {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        assign: Option<Vec<f64>>,
    },
    Unitary {
        u: MatrixConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        assign: Option<Vec<f64>>,
    },
    Gauge {
        sites: Vec<GaugeEntry>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        assign: Option<Vec<f64>>,
    },
    Block,
}

impl EncodingConfig {
    fn basis() -> Self {
        EncodingConfig::Basis { assign: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PathConfig {
    Line { origin: LatticeSite, dir: LatticeSite },
    List { sites: Vec<LatticeSite> },
}

impl PathConfig {
    fn x_axis() -> Self {
        PathConfig::Line { origin: LatticeSite::ORIGIN, dir: LatticeSite::new(1, 0, 0) }
    }
}

pub fn matrix_from_config(rows: &MatrixConfig) -> Result<DMatrix<C64>, GodelError> {
    let n = rows.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(GodelError::MatrixShape { expected: n, rows: n, cols: bad.len() });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1])))
}

impl GodelMapConfig {
    pub fn build(&self) -> Result<GodelMap, GodelError> {
        let k = self.alphabet.len();
        let spec = match (self.spin, &self.g) {
            (Some(s), _) => QuditSpec::from_spin(s)?,
            // smallest integer spin with 2s ≥ k
            (None, EncodingConfig::Block) => QuditSpec::from_twice_spin((2 * k.div_ceil(2)) as u32)?,
            (None, _) => QuditSpec::for_alphabet_size(k)?,
        };
        let base = |assign: &Option<Vec<f64>>| match assign {
            Some(ms) => SymbolEncoding::with_projections(ms, spec),
            None => SymbolEncoding::canonical(k, spec),
        };
        let p = match &self.p {
            PathConfig::Line { origin, dir } => PathRule::line(*origin, *dir)?,
            PathConfig::List { sites } => PathRule::list(sites.clone())?,
        };
        let plain = |g| GodelMap::new(self.alphabet.clone(), spec, g, p.clone());
        match &self.g {
            EncodingConfig::Basis { assign } => plain(base(assign)?),
            EncodingConfig::Unitary { u, assign } => plain(base(assign)?)?.deform_unitary(matrix_from_config(u)?),
            EncodingConfig::Gauge { sites, assign } => {
                let mut gauge = BTreeMap::new();
                for entry in sites {
                    if gauge.insert(entry.site, matrix_from_config(&entry.u)?).is_some() {
                        return Err(GodelError::Config(format!("gauge site {} listed twice", entry.site)));
                    }
                }
                plain(base(assign)?)?.deform_gauge(gauge)
            }
            EncodingConfig::Block => plain(SymbolEncoding::block_default(k, spec)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::godel::EncodingKind;

    fn parse(text: &str) -> Result<GodelMapConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    #[test]
    fn minimal_config_is_canonical() {
        let c = parse(r##"{"alphabet": ["#", "0", "1"]}"##).unwrap();
        let g = c.build().unwrap();
        assert_eq!(g.kind(), EncodingKind::Basis);
        assert_eq!(g.spec().spin(), 1.0);
        let x = g.alphabet().parse("10").unwrap();
        assert_eq!(g.encode(&x).unwrap(), GodelMap::canonical(g.alphabet().clone()).unwrap().encode(&x).unwrap());
    }

    #[test]
    fn every_kind_builds() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let u = format!("[[[{h},0],[{h},0],[0,0]],[[{h},0],[-{h},0],[0,0]],[[0,0],[0,0],[1,0]]]");
        let cases = [
            (r#"{"kind":"basis","assign":[1,0,-1]}"#.to_string(), EncodingKind::Basis),
            (format!(r#"{{"kind":"unitary","u":{u}}}"#), EncodingKind::UnitaryDeformed),
            (format!(r#"{{"kind":"gauge","sites":[{{"site":[1,0,0],"u":{u}}}]}}"#), EncodingKind::SiteGauged),
            (r#"{"kind":"block"}"#.to_string(), EncodingKind::BlockEntangled),
        ];
        for (g, kind) in cases {
            let text = format!(r##"{{"alphabet":["#","0","1"],"g":{g},"p":{{"kind":"list","sites":[[0,0,0],[0,1,0],[0,2,0],[0,3,0]]}}}}"##);
            let map = parse(&text).unwrap().build().unwrap();
            assert_eq!(map.kind(), kind);
            let x = map.alphabet().parse("01").unwrap();
            assert_eq!(map.decode_exact(&map.encode(&x).unwrap()).unwrap(), x);
        }
    }

    #[test]
    fn block_default_spin() {
        let g = parse(r##"{"alphabet":["#","0","1"],"g":{"kind":"block"}}"##).unwrap().build().unwrap();
        assert_eq!(g.spec().spin(), 2.0);
        let g = parse(r##"{"alphabet":["#","0"],"g":{"kind":"block"}}"##).unwrap().build().unwrap();
        assert_eq!(g.spec().spin(), 1.0);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(parse(r##"{"alphabet":["#","0"],"colour":1}"##).is_err());
        assert!(parse(r##"{"alphabet":["#","0"],"g":{"kind":"basis","u":[]}}"##).is_err());
        assert!(parse(r##"{"alphabet":["#","0"],"p":{"kind":"spiral"}}"##).is_err());
        let bad_u = parse(r##"{"alphabet":["#","0"],"g":{"kind":"unitary","u":[[[1,0],[1,0]],[[0,0],[1,0]]]}}"##).unwrap();
        assert!(matches!(bad_u.build(), Err(GodelError::NonUnitary { .. })));
        let zero_dir = parse(r##"{"alphabet":["#","0"],"p":{"kind":"line","origin":[0,0,0],"dir":[0,0,0]}}"##).unwrap();
        assert_eq!(zero_dir.build().unwrap_err(), GodelError::ZeroDirection);
    }
}
