//! Run configuration: a JSON file, overridden by command-line flags.
//!
//! ```json
//! {
//!   "alphabet": "alphabet.json",
//!   "map": "map.json",
//!   "machine": {"lambda": 1.0, "lengths": "2..8", "m": 2, "a": 0, "horizon": 100, "target": "0110"},
//!   "reading": {"rule": "adversarial", "k": 2, "lengths": "2..10", "sites": [[0,0,0], [2,0,0]]},
//!   "seed": 1729,
//!   "draws": 100,
//!   "out_dir": "out"
//! }
//! ```
//!
//! Every key is optional. File paths are relative to the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::godel::{GodelMapConfig, EncodingConfig, PathConfig};
use crate::lang::Alphabet;
use crate::qstate::LatticeSite;

/// Seed used when neither the config nor `--seed` gives one.
pub const DEFAULT_SEED: u64 = 1729;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Lengths given as `"2..8"` (inclusive), `"2,3,5"`, or a JSON list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Lengths(pub Vec<usize>);

impl FromStr for Lengths {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        let bad = || format!("invalid lengths {s:?}: use \"2..8\" or \"2,3,5\"");
        let values: Vec<usize> = if let Some((lo, hi)) = s.split_once("..") {
            let lo: usize = lo.trim().parse().map_err(|_| bad())?;
            let hi: usize = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            (lo..=hi).collect()
        } else {
            s.split(',').map(|p| p.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        if values.is_empty() || values.contains(&0) {
            return Err(bad());
        }
        Ok(Lengths(values))
    }
}

impl<'de> Deserialize<'de> for Lengths {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            List(Vec<usize>),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Raw::List(v) if !v.is_empty() && !v.contains(&0) => Ok(Lengths(v)),
            Raw::List(_) => Err(serde::de::Error::custom("lengths must be a nonempty list of positive integers")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleName {
    Line,
    List,
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineParams {
    #[serde(default = "MachineParams::default_lambda")]
    pub lambda: f64,
    #[serde(default = "MachineParams::default_lengths")]
    pub lengths: Lengths,
    #[serde(default = "MachineParams::default_m")]
    pub m: u32,
    #[serde(default)]
    pub a: i64,
    /// Trace length for `simulate`; first horizon of the doubling for
    /// `tau-scaling`.
    #[serde(default)]
    pub horizon: Option<f64>,
    /// Target for `simulate`; fixed pattern for `tau-scaling` (absent means
    /// the maximum over all targets).
    #[serde(default)]
    pub target: Option<String>,
}

impl MachineParams {
    fn default_lambda() -> f64 {
        1.0
    }
    fn default_lengths() -> Lengths {
        Lengths((2..=8).collect())
    }
    fn default_m() -> u32 {
        2
    }
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            lambda: Self::default_lambda(),
            lengths: Self::default_lengths(),
            m: Self::default_m(),
            a: 0,
            horizon: None,
            target: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingParams {
    #[serde(default = "ReadingParams::default_rule")]
    pub rule: RuleName,
    #[serde(default = "ReadingParams::default_k")]
    pub k: usize,
    #[serde(default = "ReadingParams::default_lengths")]
    pub lengths: Lengths,
    #[serde(default)]
    pub sites: Option<Vec<LatticeSite>>,
}

impl ReadingParams {
    fn default_rule() -> RuleName {
        RuleName::Adversarial
    }
    fn default_k() -> usize {
        2
    }
    fn default_lengths() -> Lengths {
        Lengths((2..=10).collect())
    }
}

impl Default for ReadingParams {
    fn default() -> Self {
        Self { rule: Self::default_rule(), k: Self::default_k(), lengths: Self::default_lengths(), sites: None }
    }
}

/// The file as written.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub alphabet: Option<PathBuf>,
    #[serde(default)]
    pub map: Option<PathBuf>,
    #[serde(default)]
    pub machine: MachineParams,
    #[serde(default)]
    pub reading: ReadingParams,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub draws: Option<usize>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

/// Fully defaulted and checked configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub map: GodelMapConfig,
    pub machine: MachineParams,
    pub reading: ReadingParams,
    pub seed: u64,
    pub draws: usize,
    /// Command arguments that are not experiment parameters.
    pub inputs: BTreeMap<String, String>,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl RunConfig {
    /// SHA-256 of the configuration's JSON form (output directory excluded).
    pub fn digest(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {what} {}: {e}", path.display())))?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let at = e.path().to_string();
        let at = if at == "." { String::new() } else { format!(" at {at}") };
        ConfigError(format!("{what} {}{at}: {}", path.display(), e.inner()))
    })
}

/// Reads and schema-checks a config file. Relative paths inside it are
/// resolved against its directory.
pub fn load_config_file(path: &Path) -> Result<ConfigFile, ConfigError> {
    let mut file: ConfigFile = read_json(path, "config")?;
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut file.alphabet, &mut file.map, &mut file.out_dir].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(file)
}

fn canonical_map(alphabet: Alphabet) -> GodelMapConfig {
    GodelMapConfig {
        alphabet,
        spin: None,
        g: EncodingConfig::Basis { assign: None },
        p: PathConfig::Line { origin: LatticeSite::ORIGIN, dir: LatticeSite::new(1, 0, 0) },
    }
}

/// Fills defaults and checks values. `command` and `inputs` only feed the
/// digest.
pub fn normalize(
    file: ConfigFile,
    command: &str,
    inputs: BTreeMap<String, String>,
) -> Result<RunConfig, ConfigError> {
    let alphabet = match &file.alphabet {
        Some(path) => Some(read_json::<Alphabet>(path, "alphabet")?),
        None => None,
    };
    let map = match &file.map {
        Some(path) => {
            let map: GodelMapConfig = read_json(path, "map")?;
            if let Some(a) = &alphabet {
                if a != &map.alphabet {
                    return Err(ConfigError("alphabet file and map config disagree on the alphabet".into()));
                }
            }
            map
        }
        None => canonical_map(alphabet.unwrap_or_else(|| Alphabet::new(["#", "0", "1"]).expect("valid"))),
    };
    map.build().map_err(|e| ConfigError(format!("map: {e}")))?;
    let machine = file.machine;
    if !(machine.lambda > 0.0 && machine.lambda.is_finite()) {
        return Err(ConfigError(format!("machine.lambda must be positive, got {}", machine.lambda)));
    }
    if machine.m > 52 {
        return Err(ConfigError(format!("machine.m must be at most 52, got {}", machine.m)));
    }
    if let Some(h) = machine.horizon {
        if !(h > 0.0 && h.is_finite()) {
            return Err(ConfigError(format!("machine.horizon must be positive, got {h}")));
        }
    }
    if let Some(t) = &machine.target {
        let x = map.alphabet.parse(t).map_err(|e| ConfigError(format!("machine.target: {e}")))?;
        if x.is_empty() {
            return Err(ConfigError("machine.target is empty".into()));
        }
    }
    let reading = file.reading;
    if reading.k < 2 {
        return Err(ConfigError(format!("reading.k must be at least 2, got {}", reading.k)));
    }
    if reading.rule == RuleName::List {
        let sites = reading.sites.as_ref().ok_or_else(|| ConfigError("reading.rule \"list\" needs reading.sites".into()))?;
        crate::godel::PathRule::list(sites.clone()).map_err(|e| ConfigError(format!("reading.sites: {e}")))?;
        let longest = reading.lengths.0.iter().max().copied().unwrap_or(0);
        if longest > sites.len() {
            return Err(ConfigError(format!("reading.sites lists {} sites, lengths go up to {longest}", sites.len())));
        }
    }
    Ok(RunConfig {
        command: command.to_string(),
        map,
        machine,
        reading,
        seed: file.seed.unwrap_or(DEFAULT_SEED),
        draws: file.draws.unwrap_or(100),
        inputs,
        out_dir: file.out_dir.unwrap_or_else(|| PathBuf::from("out")),
    })
}

/// Loads, defaults and checks the config at `path`.
pub fn validate_config(path: &Path) -> Result<RunConfig, ConfigError> {
    normalize(load_config_file(path)?, "validate", BTreeMap::new())
}
