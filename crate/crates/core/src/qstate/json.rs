//! State files.
//!
//! Product: `{"spin": s, "sites": [{"site": [x,y,z], "amps": [[re,im], …]}, …]}`;
//! a factor spanning several sites uses `"sites": [[x,y,z], …]` instead of
//! `"site"`. Dense: `{"basis": [labels…], "amps": [[re,im], …]}`, plus
//! `"spin"` and `"sites"` when the basis labels are lattice configurations.

use serde::de::Error as _;
use serde::ser::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;

use super::{DenseState, Factor, LatticeFrame, LatticeSite, ProductState, QuditSpec, StateError, C64};
use crate::numfmt::Sig17;

struct SpinRepr(QuditSpec);

impl Serialize for SpinRepr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let t = self.0.twice_spin();
        let text = if t.is_multiple_of(2) { format!("{}", t / 2) } else { format!("{}.5", t / 2) };
        RawValue::from_string(text).map_err(S::Error::custom)?.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SpinRepr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = f64::deserialize(deserializer)?;
        QuditSpec::from_spin(s).map(SpinRepr).map_err(D::Error::custom)
    }
}

struct AmpRepr(C64);

impl Serialize for AmpRepr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [Sig17(self.0.re), Sig17(self.0.im)].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AmpRepr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(deserializer)?;
        Ok(AmpRepr(C64::new(re, im)))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    site: Option<LatticeSite>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sites: Option<Vec<LatticeSite>>,
    amps: Vec<AmpRepr>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductRepr {
    spin: SpinRepr,
    sites: Vec<FactorRepr>,
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    config_digest: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DenseRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spin: Option<SpinRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sites: Option<Vec<LatticeSite>>,
    basis: Vec<String>,
    amps: Vec<AmpRepr>,
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    config_digest: Option<String>,
}

impl Serialize for ProductState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let sites = self
            .factors()
            .iter()
            .map(|f| {
                let (site, sites) = match f.sites() {
                    [one] => (Some(*one), None),
                    many => (None, Some(many.to_vec())),
                };
                FactorRepr { site, sites, amps: f.amps().iter().map(|&a| AmpRepr(a)).collect() }
            })
            .collect();
        ProductRepr { spin: SpinRepr(self.spec()), sites, config_digest: None }.serialize(serializer)
    }
}

fn product_from_repr(repr: ProductRepr) -> Result<ProductState, StateError> {
    let spec = repr.spin.0;
    let factors = repr
        .sites
        .into_iter()
        .map(|f| {
            let sites = match (f.site, f.sites) {
                (Some(s), None) => vec![s],
                (None, Some(v)) => v,
                _ => return Err(StateError::Format("each factor needs exactly one of \"site\" or \"sites\"".into())),
            };
            Factor::new(spec, sites, f.amps.into_iter().map(|a| a.0).collect())
        })
        .collect::<Result<Vec<_>, _>>()?;
    ProductState::new(spec, factors)
}

impl<'de> Deserialize<'de> for ProductState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        product_from_repr(ProductRepr::deserialize(deserializer)?).map_err(D::Error::custom)
    }
}

impl Serialize for DenseState {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        DenseRepr {
            spin: self.frame().map(|f| SpinRepr(f.spec)),
            sites: self.frame().map(|f| f.sites.clone()),
            basis: self.basis().to_vec(),
            amps: self.amps().iter().map(|&a| AmpRepr(a)).collect(),
            config_digest: None,
        }
        .serialize(serializer)
    }
}

fn dense_from_repr(repr: DenseRepr) -> Result<DenseState, StateError> {
    let state = DenseState::new(repr.basis, repr.amps.into_iter().map(|a| a.0).collect())?;
    match (repr.spin, repr.sites) {
        (Some(spin), Some(sites)) => state.with_frame(LatticeFrame { spec: spin.0, sites }),
        (None, None) => Ok(state),
        _ => Err(StateError::Format("\"spin\" and \"sites\" must appear together".into())),
    }
}

impl<'de> Deserialize<'de> for DenseState {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        dense_from_repr(DenseRepr::deserialize(deserializer)?).map_err(D::Error::custom)
    }
}

/// Either kind of state file, told apart by the presence of `"basis"`.
#[derive(Debug, Clone, PartialEq)]
pub enum StateFile {
    Product(ProductState),
    Dense(DenseState),
}

impl StateFile {
    pub fn from_json(text: &str) -> Result<Self, StateError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| StateError::Format(e.to_string()))?;
        let is_dense = value.get("basis").is_some();
        let parsed = if is_dense {
            serde_json::from_str::<DenseState>(text).map(StateFile::Dense)
        } else {
            serde_json::from_str::<ProductState>(text).map(StateFile::Product)
        };
        parsed.map_err(|e| StateError::Format(e.to_string()))
    }
}

impl Serialize for StateFile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            StateFile::Product(p) => p.serialize(serializer),
            StateFile::Dense(d) => d.serialize(serializer),
        }
    }
}
