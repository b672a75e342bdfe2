//! Quantum states of finite collections of spin-s lattice qudits.
//!
//! Two representations are kept side by side. [`ProductState`] stores one
//! amplitude vector per factor (a factor is one site, or a few sites for
//! entangled symbol codes) and is what encoding produces. [`DenseState`]
//! stores a full amplitude vector over labelled basis configurations and is
//! what superposition and time evolution work on.
//!
//! Local basis convention: projection `m` of a spin-`s` qudit is stored at
//! index `m + s`.

mod evolve;
mod json;
pub mod random;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::Expression;

pub use evolve::{
    check_hermitian, evolve, evolve_crosscheck, expm_scaled, Propagator, DEFAULT_DIMENSION_CAP,
};
pub use json::StateFile;

pub type C64 = Complex64;

/// Unit-norm tolerance for freshly built states.
pub const STATE_TOL: f64 = 1e-10;
/// State comparison tolerance after time evolution.
pub const EVOLVED_TOL: f64 = 1e-8;
/// Largest `‖H − H†‖_max` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Norm tolerance for dense states.
pub const DENSE_NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("invalid spin {0}: must be a positive half-integer")]
    InvalidSpin(f64),
    #[error("projection {m} out of range for spin {spin}")]
    ProjectionOutOfRange { m: f64, spin: f64 },
    #[error("factor over {sites} site(s) needs {expected} amplitudes, got {got}")]
    FactorLength { sites: usize, expected: usize, got: usize },
    #[error("state has norm {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error("site {0} appears more than once in the support")]
    DuplicateSite(LatticeSite),
    #[error("states have different supports")]
    SupportMismatch,
    #[error("superposition vanishes")]
    ZeroVector,
    #[error("dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },
    #[error("operator is not Hermitian: max deviation {deviation:e}")]
    NotHermitian { deviation: f64 },
    #[error("operator dimension {got} does not match state dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("site {0} is outside the state support")]
    OutsideSupport(LatticeSite),
    #[error("projector factor cuts through an entangled state factor at {0}")]
    FactorSplit(LatticeSite),
    #[error("dense state has no lattice frame")]
    NoFrame,
    #[error("bad basis label {0:?}")]
    BadLabel(String),
    #[error("duplicate basis label {0:?}")]
    DuplicateLabel(String),
    #[error("state spins differ")]
    SpinMismatch,
    #[error("no terms to superpose")]
    NoTerms,
    #[error("malformed state file: {0}")]
    Format(String),
}

/// A point of the cubic lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[i64; 3]", into = "[i64; 3]")]
pub struct LatticeSite {
    pub x: i64,
    pub y: i64,
    pub z: i64,
}

impl LatticeSite {
    pub const ORIGIN: LatticeSite = LatticeSite { x: 0, y: 0, z: 0 };

    pub const fn new(x: i64, y: i64, z: i64) -> Self {
        Self { x, y, z }
    }

    pub fn offset(self, other: LatticeSite) -> LatticeSite {
        LatticeSite::new(self.x + other.x, self.y + other.y, self.z + other.z)
    }

    pub fn minus(self, other: LatticeSite) -> LatticeSite {
        LatticeSite::new(self.x - other.x, self.y - other.y, self.z - other.z)
    }

    pub fn scaled(self, k: i64) -> LatticeSite {
        LatticeSite::new(self.x * k, self.y * k, self.z * k)
    }

    pub fn manhattan(self, other: LatticeSite) -> u64 {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y) + self.z.abs_diff(other.z)
    }

    pub fn is_origin(self) -> bool {
        self == Self::ORIGIN
    }
}

impl From<[i64; 3]> for LatticeSite {
    fn from([x, y, z]: [i64; 3]) -> Self {
        Self { x, y, z }
    }
}

impl From<LatticeSite> for [i64; 3] {
    fn from(s: LatticeSite) -> Self {
        [s.x, s.y, s.z]
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.z)
    }
}

/// Spin-`s` qudit, `d = 2s + 1`. Stored as `2s` to keep half-integers exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuditSpec {
    twice_spin: u32,
}

impl QuditSpec {
    pub fn from_twice_spin(twice_spin: u32) -> Result<Self, StateError> {
        if twice_spin == 0 {
            return Err(StateError::InvalidSpin(0.0));
        }
        Ok(Self { twice_spin })
    }

    pub fn from_spin(s: f64) -> Result<Self, StateError> {
        let twice = 2.0 * s;
        if !twice.is_finite() || twice < 1.0 || twice.fract() != 0.0 || twice > 1e6 {
            return Err(StateError::InvalidSpin(s));
        }
        Self::from_twice_spin(twice as u32)
    }

    /// Smallest spin whose `2s + 1` levels hold `k` symbols.
    pub fn for_alphabet_size(k: usize) -> Result<Self, StateError> {
        Self::from_twice_spin(k.saturating_sub(1).max(1) as u32)
    }

    pub fn spin(&self) -> f64 {
        self.twice_spin as f64 / 2.0
    }

    pub fn twice_spin(&self) -> u32 {
        self.twice_spin
    }

    pub fn dim(&self) -> usize {
        self.twice_spin as usize + 1
    }

    pub fn is_integer_spin(&self) -> bool {
        self.twice_spin.is_multiple_of(2)
    }

    /// Local index `m + s` of projection `m`.
    pub fn index_of(&self, m: f64) -> Result<usize, StateError> {
        let shifted = m + self.spin();
        if !shifted.is_finite() || shifted.fract() != 0.0 || shifted < 0.0 || shifted > self.twice_spin as f64 {
            return Err(StateError::ProjectionOutOfRange { m, spin: self.spin() });
        }
        Ok(shifted as usize)
    }

    pub fn m_of(&self, index: usize) -> f64 {
        index as f64 - self.spin()
    }

    /// Index of `m = 0`, only for integer spin.
    pub fn zero_index(&self) -> Option<usize> {
        self.is_integer_spin().then_some(self.twice_spin as usize / 2)
    }

    /// `m` as text: `-1`, `0`, `1` for integer spin, `-1/2`, `3/2` otherwise.
    pub fn format_m(&self, index: usize) -> String {
        let twice_m = 2 * index as i64 - self.twice_spin as i64;
        if twice_m % 2 == 0 {
            format!("{}", twice_m / 2)
        } else {
            format!("{twice_m}/2")
        }
    }

    pub fn parse_m(&self, text: &str) -> Option<usize> {
        let twice_m: i64 = match text.split_once('/') {
            Some((num, "2")) => num.parse().ok()?,
            Some(_) => return None,
            None => 2 * text.parse::<i64>().ok()?,
        };
        let shifted = twice_m + self.twice_spin as i64;
        if shifted < 0 || shifted % 2 != 0 || shifted / 2 > self.twice_spin as i64 {
            return None;
        }
        Some((shifted / 2) as usize)
    }
}

/// Unit basis vector `|m⟩`.
pub fn basis_local(m: f64, spec: QuditSpec) -> Result<Vec<C64>, StateError> {
    let i = spec.index_of(m)?;
    let mut v = vec![C64::new(0.0, 0.0); spec.dim()];
    v[i] = C64::new(1.0, 0.0);
    Ok(v)
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

pub(crate) fn vdot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// One tensor factor of a product state: a normalized vector over the joint
/// local basis of `sites`, first site most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    sites: Vec<LatticeSite>,
    amps: Vec<C64>,
}

impl Factor {
    pub fn new(spec: QuditSpec, sites: Vec<LatticeSite>, amps: Vec<C64>) -> Result<Self, StateError> {
        let expected = spec.dim().pow(sites.len() as u32);
        if amps.len() != expected || sites.is_empty() {
            return Err(StateError::FactorLength { sites: sites.len(), expected, got: amps.len() });
        }
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(StateError::NotNormalized { norm });
        }
        Ok(Self { sites, amps })
    }

    pub fn single(spec: QuditSpec, site: LatticeSite, amps: Vec<C64>) -> Result<Self, StateError> {
        Self::new(spec, vec![site], amps)
    }

    pub fn sites(&self) -> &[LatticeSite] {
        &self.sites
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn overlap(&self, other: &Factor) -> Option<C64> {
        (self.sites == other.sites).then(|| vdot(&self.amps, &other.amps))
    }
}

/// Joint index of `locals` (first most significant).
fn joint_index(locals: impl IntoIterator<Item = usize>, d: usize) -> usize {
    locals.into_iter().fold(0, |acc, i| acc * d + i)
}

fn split_index(mut index: usize, d: usize, n: usize) -> Vec<usize> {
    let mut out = vec![0; n];
    for slot in out.iter_mut().rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

/// `⊗_j` of factors: the state `|X,[a,b]⟩` and its generalizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductState {
    spec: QuditSpec,
    factors: Vec<Factor>,
}

impl ProductState {
    pub fn new(spec: QuditSpec, factors: Vec<Factor>) -> Result<Self, StateError> {
        let mut seen = HashSet::new();
        for f in &factors {
            let expected = spec.dim().pow(f.sites.len() as u32);
            if f.amps.len() != expected {
                return Err(StateError::FactorLength { sites: f.sites.len(), expected, got: f.amps.len() });
            }
            for &s in &f.sites {
                if !seen.insert(s) {
                    return Err(StateError::DuplicateSite(s));
                }
            }
        }
        Ok(Self { spec, factors })
    }

    pub fn spec(&self) -> QuditSpec {
        self.spec
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn support(&self) -> Vec<LatticeSite> {
        self.factors.iter().flat_map(|f| f.sites.iter().copied()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.factors.iter().map(|f| vec_norm(&f.amps)).product()
    }

    /// `⟨a|b⟩`, the product of factor overlaps. Supports must agree site by
    /// site and factor by factor.
    pub fn inner_product(&self, other: &ProductState) -> Result<C64, StateError> {
        if self.spec != other.spec {
            return Err(StateError::SpinMismatch);
        }
        if self.factors.len() != other.factors.len() {
            return Err(StateError::SupportMismatch);
        }
        self.factors
            .iter()
            .zip(&other.factors)
            .try_fold(C64::new(1.0, 0.0), |acc, (a, b)| {
                a.overlap(b).map(|o| acc * o).ok_or(StateError::SupportMismatch)
            })
    }

    /// Nonzero configurations in the support's local basis.
    pub fn expand(&self, cap: usize) -> Result<Vec<(Vec<usize>, C64)>, StateError> {
        let d = self.spec.dim();
        let n = self.support().len();
        let dim = d.checked_pow(n as u32).unwrap_or(usize::MAX);
        if dim > cap {
            return Err(StateError::DimensionCap { dim, cap });
        }
        let mut out: Vec<(Vec<usize>, C64)> = vec![(Vec::with_capacity(n), C64::new(1.0, 0.0))];
        for f in &self.factors {
            let width = f.sites.len();
            let mut next = Vec::new();
            for (config, amp) in &out {
                for (i, a) in f.amps.iter().enumerate() {
                    if *a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let mut c = config.clone();
                    c.extend(split_index(i, d, width));
                    next.push((c, amp * a));
                }
            }
            out = next;
        }
        Ok(out)
    }

    /// `⟨ψ|P|ψ⟩` for the projector onto `⊗ code` (code factors cover the
    /// projector interval).
    pub fn expectation(&self, code: &[Factor]) -> Result<f64, StateError> {
        let d = self.spec.dim();
        let mut owner: HashMap<LatticeSite, usize> = HashMap::new();
        for (i, f) in self.factors.iter().enumerate() {
            for &s in &f.sites {
                owner.insert(s, i);
            }
        }
        let mut prob = 1.0;
        for c in code {
            let mut members: Vec<usize> = Vec::new();
            for s in &c.sites {
                let &i = owner.get(s).ok_or(StateError::OutsideSupport(*s))?;
                if !members.contains(&i) {
                    members.push(i);
                }
            }
            for &i in &members {
                if let Some(s) = self.factors[i].sites.iter().find(|s| !c.sites.contains(s)) {
                    return Err(StateError::FactorSplit(*s));
                }
            }
            let parts: Vec<&Factor> = members.iter().map(|&i| &self.factors[i]).collect();
            prob *= regroup(&parts, &c.sites, d).map(|v| vdot(&c.amps, &v).norm_sqr())?;
        }
        Ok(prob.clamp(0.0, 1.0))
    }
}

/// Tensor product of `parts` written in the site order of `sites`. The parts
/// must cover `sites` exactly.
pub(crate) fn regroup(parts: &[&Factor], sites: &[LatticeSite], d: usize) -> Result<Vec<C64>, StateError> {
    let covered: usize = parts.iter().map(|p| p.sites.len()).sum();
    if covered != sites.len() {
        return Err(StateError::SupportMismatch);
    }
    let mut slots: Vec<(usize, Vec<usize>)> = Vec::with_capacity(parts.len());
    for (pi, p) in parts.iter().enumerate() {
        let positions = p
            .sites
            .iter()
            .map(|s| sites.iter().position(|t| t == s).ok_or(StateError::SupportMismatch))
            .collect::<Result<Vec<_>, _>>()?;
        slots.push((pi, positions));
    }
    let dim = d.pow(sites.len() as u32);
    let mut out = Vec::with_capacity(dim);
    for idx in 0..dim {
        let locals = split_index(idx, d, sites.len());
        let mut amp = C64::new(1.0, 0.0);
        for (pi, positions) in &slots {
            amp *= parts[*pi].amps[joint_index(positions.iter().map(|&q| locals[q]), d)];
        }
        out.push(amp);
    }
    Ok(out)
}

/// Sites and spin underlying a dense lattice state; basis labels are then
/// comma-separated projections `m`, one per site.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFrame {
    pub spec: QuditSpec,
    pub sites: Vec<LatticeSite>,
}

impl LatticeFrame {
    pub fn label(&self, config: &[usize]) -> String {
        config.iter().map(|&i| self.spec.format_m(i)).collect::<Vec<_>>().join(",")
    }

    pub fn parse_label(&self, label: &str) -> Result<Vec<usize>, StateError> {
        let bad = || StateError::BadLabel(label.to_string());
        let config: Vec<usize> = if self.sites.is_empty() {
            if label.is_empty() { Vec::new() } else { return Err(bad()) }
        } else {
            label.split(',').map(|t| self.spec.parse_m(t).ok_or_else(bad)).collect::<Result<_, _>>()?
        };
        if config.len() != self.sites.len() {
            return Err(bad());
        }
        Ok(config)
    }
}

/// `ψ = Σ_s c_s |s⟩` over labelled basis configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    frame: Option<LatticeFrame>,
    basis: Vec<String>,
    amps: Vec<C64>,
}

impl DenseState {
    /// Builds a state from labels and amplitudes that are already normalized.
    pub fn new(basis: Vec<String>, amps: Vec<C64>) -> Result<Self, StateError> {
        let s = Self::unchecked(None, basis, amps)?;
        let norm = s.norm();
        if (norm - 1.0).abs() > DENSE_NORM_TOL {
            return Err(StateError::NotNormalized { norm });
        }
        Ok(s)
    }

    /// Builds a state and rescales it to unit norm.
    pub fn normalized(basis: Vec<String>, amps: Vec<C64>) -> Result<Self, StateError> {
        let mut s = Self::unchecked(None, basis, amps)?;
        s.normalize()?;
        Ok(s)
    }

    fn unchecked(frame: Option<LatticeFrame>, basis: Vec<String>, amps: Vec<C64>) -> Result<Self, StateError> {
        if basis.len() != amps.len() {
            return Err(StateError::DimensionMismatch { expected: basis.len(), got: amps.len() });
        }
        let mut seen = HashSet::new();
        for b in &basis {
            if !seen.insert(b.as_str()) {
                return Err(StateError::DuplicateLabel(b.clone()));
            }
        }
        if let Some(frame) = &frame {
            for b in &basis {
                frame.parse_label(b)?;
            }
        }
        Ok(Self { frame, basis, amps })
    }

    fn normalize(&mut self) -> Result<(), StateError> {
        let norm = self.norm();
        if !(norm > 1e-12) {
            return Err(StateError::ZeroVector);
        }
        for a in &mut self.amps {
            *a /= norm;
        }
        Ok(())
    }

    /// Attaches lattice sites; every label must parse as a configuration.
    pub fn with_frame(self, frame: LatticeFrame) -> Result<Self, StateError> {
        Self::unchecked(Some(frame), self.basis, self.amps)
    }

    pub fn frame(&self) -> Option<&LatticeFrame> {
        self.frame.as_ref()
    }

    pub fn basis(&self) -> &[String] {
        &self.basis
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amps)
    }

    pub fn amplitude(&self, label: &str) -> Option<C64> {
        self.basis.iter().position(|b| b == label).map(|i| self.amps[i])
    }

    /// Born probability of every basis label.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩` over a shared basis list.
    pub fn inner_product(&self, other: &DenseState) -> Result<C64, StateError> {
        if self.basis != other.basis {
            return Err(StateError::SupportMismatch);
        }
        Ok(vdot(&self.amps, &other.amps))
    }

    pub(crate) fn with_amps(&self, amps: Vec<C64>) -> DenseState {
        DenseState { frame: self.frame.clone(), basis: self.basis.clone(), amps }
    }

    /// Parsed configurations, one per basis entry.
    pub fn configurations(&self) -> Result<Vec<Vec<usize>>, StateError> {
        let frame = self.frame.as_ref().ok_or(StateError::NoFrame)?;
        self.basis.iter().map(|b| frame.parse_label(b)).collect()
    }

    /// `⟨ψ|P|ψ⟩` for the projector onto `⊗ code` on a lattice-framed state.
    pub fn expectation(&self, code: &[Factor]) -> Result<f64, StateError> {
        let frame = self.frame.as_ref().ok_or(StateError::NoFrame)?;
        let d = frame.spec.dim();
        let position = |s: &LatticeSite| {
            frame.sites.iter().position(|t| t == s).ok_or(StateError::OutsideSupport(*s))
        };
        let code_positions: Vec<Vec<usize>> = code
            .iter()
            .map(|c| c.sites.iter().map(position).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        let inside: HashSet<usize> = code_positions.iter().flatten().copied().collect();
        let mut groups: HashMap<Vec<usize>, C64> = HashMap::new();
        for (config, amp) in self.configurations()?.into_iter().zip(&self.amps) {
            let mut code_amp = C64::new(1.0, 0.0);
            for (c, positions) in code.iter().zip(&code_positions) {
                code_amp *= c.amps[joint_index(positions.iter().map(|&q| config[q]), d)];
            }
            let key: Vec<usize> = config
                .iter()
                .enumerate()
                .map(|(q, &i)| if inside.contains(&q) { usize::MAX } else { i })
                .collect();
            *groups.entry(key).or_default() += code_amp.conj() * amp;
        }
        Ok(groups.values().map(|a| a.norm_sqr()).sum::<f64>().clamp(0.0, 1.0))
    }
}

/// Projector `P_{X,[a,b]}` onto the code state of `target` laid on `interval`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    pub target: Expression,
    pub interval: Vec<LatticeSite>,
}

/// Normalized `Σ c_i |ψ_i⟩` of product states on a common support;
/// coincident configurations are merged.
pub fn superpose(terms: &[(C64, ProductState)]) -> Result<DenseState, StateError> {
    superpose_with_cap(terms, DEFAULT_DIMENSION_CAP)
}

pub fn superpose_with_cap(terms: &[(C64, ProductState)], cap: usize) -> Result<DenseState, StateError> {
    let (_, first) = terms.first().ok_or(StateError::NoTerms)?;
    let sites = first.support();
    let spec = first.spec();
    let mut merged: BTreeMap<Vec<usize>, C64> = BTreeMap::new();
    for (c, psi) in terms {
        if psi.spec() != spec {
            return Err(StateError::SpinMismatch);
        }
        if psi.support() != sites {
            return Err(StateError::SupportMismatch);
        }
        for (config, amp) in psi.expand(cap)? {
            *merged.entry(config).or_default() += c * amp;
        }
    }
    let frame = LatticeFrame { spec, sites };
    let (basis, amps): (Vec<String>, Vec<C64>) =
        merged.into_iter().map(|(config, amp)| (frame.label(&config), amp)).unzip();
    let mut state = DenseState::unchecked(Some(frame), basis, amps)?;
    state.normalize()?;
    Ok(state)
}

impl From<&ProductState> for DenseState {
    fn from(p: &ProductState) -> Self {
        superpose_with_cap(&[(C64::new(1.0, 0.0), p.clone())], usize::MAX)
            .expect("a normalized product state expands to a nonzero vector")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spin1() -> QuditSpec {
        QuditSpec::from_spin(1.0).unwrap()
    }

    fn basis_product(ms: &[f64]) -> ProductState {
        let spec = spin1();
        let factors = ms
            .iter()
            .enumerate()
            .map(|(j, &m)| Factor::single(spec, LatticeSite::new(j as i64, 0, 0), basis_local(m, spec).unwrap()).unwrap())
            .collect();
        ProductState::new(spec, factors).unwrap()
    }

    #[test]
    fn basis_local_examples() {
        let s = spin1();
        assert_eq!(basis_local(-1.0, s).unwrap()[0], C64::new(1.0, 0.0));
        assert_eq!(basis_local(1.0, s).unwrap()[2], C64::new(1.0, 0.0));
        assert!(matches!(basis_local(2.0, s), Err(StateError::ProjectionOutOfRange { .. })));
        assert!(basis_local(0.5, s).is_err());
        let half = QuditSpec::from_spin(0.5).unwrap();
        assert_eq!(half.dim(), 2);
        assert_eq!(basis_local(0.5, half).unwrap()[1], C64::new(1.0, 0.0));
    }

    #[test]
    fn spin_validation() {
        assert!(QuditSpec::from_spin(0.0).is_err());
        assert!(QuditSpec::from_spin(0.3).is_err());
        assert_eq!(QuditSpec::from_spin(1.5).unwrap().dim(), 4);
        assert_eq!(QuditSpec::for_alphabet_size(3).unwrap().spin(), 1.0);
        assert_eq!(QuditSpec::for_alphabet_size(2).unwrap().spin(), 0.5);
    }

    #[test]
    fn m_labels_round_trip() {
        for twice in 1..6 {
            let spec = QuditSpec::from_twice_spin(twice).unwrap();
            for i in 0..spec.dim() {
                assert_eq!(spec.parse_m(&spec.format_m(i)), Some(i));
                assert_eq!(spec.index_of(spec.m_of(i)).unwrap(), i);
            }
        }
        let half = QuditSpec::from_spin(1.5).unwrap();
        assert_eq!(half.format_m(0), "-3/2");
        assert_eq!(half.parse_m("1"), None);
        assert_eq!(spin1().parse_m("1/2"), None);
    }

    #[test]
    fn inner_products() {
        let a = basis_product(&[0.0, 1.0]);
        let b = basis_product(&[0.0, -1.0]);
        assert!((a.inner_product(&a).unwrap() - 1.0).norm() < 1e-15);
        assert_eq!(a.inner_product(&b).unwrap().norm(), 0.0);
        let c = basis_product(&[0.0]);
        assert_eq!(a.inner_product(&c), Err(StateError::SupportMismatch));
    }

    #[test]
    fn factor_validation() {
        let s = spin1();
        let o = LatticeSite::ORIGIN;
        assert!(matches!(Factor::single(s, o, vec![C64::new(1.0, 0.0); 2]), Err(StateError::FactorLength { .. })));
        assert!(matches!(Factor::single(s, o, vec![C64::new(1.0, 0.0); 3]), Err(StateError::NotNormalized { .. })));
        let f = Factor::single(s, o, basis_local(0.0, s).unwrap()).unwrap();
        assert!(matches!(ProductState::new(s, vec![f.clone(), f]), Err(StateError::DuplicateSite(_))));
    }

    #[test]
    fn superposition_examples() {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let zero = basis_product(&[0.0]);
        let one = basis_product(&[1.0]);
        let psi = superpose(&[(C64::new(r, 0.0), zero.clone()), (C64::new(r, 0.0), one.clone())]).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert_eq!(psi.dim(), 2);

        let terms: Vec<_> = [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]]
            .iter()
            .map(|ms| (C64::new(0.5, 0.0), basis_product(ms)))
            .collect();
        let psi = superpose(&terms).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert_eq!(psi.dim(), 4);

        let err = superpose(&[(C64::new(1.0, 0.0), zero.clone()), (C64::new(-1.0, 0.0), zero.clone())]);
        assert_eq!(err, Err(StateError::ZeroVector));
        let two_sites = basis_product(&[0.0, 0.0]);
        assert_eq!(
            superpose(&[(C64::new(1.0, 0.0), zero), (C64::new(1.0, 0.0), two_sites)]),
            Err(StateError::SupportMismatch)
        );
    }

    #[test]
    fn duplicates_merge() {
        let zero = basis_product(&[0.0]);
        let psi = superpose(&[(C64::new(1.0, 0.0), zero.clone()), (C64::new(2.0, 0.0), zero)]).unwrap();
        assert_eq!(psi.dim(), 1);
        assert!((psi.amps()[0] - 1.0).norm() < 1e-15);
    }

    #[test]
    fn expectations_on_both_forms() {
        let spec = spin1();
        let x = basis_product(&[0.0, 1.0]);
        let y = basis_product(&[1.0, 1.0]);
        let code: Vec<Factor> = x.factors().to_vec();
        assert_eq!(x.expectation(&code).unwrap(), 1.0);
        assert_eq!(y.expectation(&code).unwrap(), 0.0);

        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = superpose(&[(C64::new(r, 0.0), x.clone()), (C64::new(r, 0.0), y.clone())]).unwrap();
        assert!((psi.expectation(&code).unwrap() - 0.5).abs() < 1e-12);
        // projector on the second site only: both terms agree there
        assert!((psi.expectation(&code[1..]).unwrap() - 1.0).abs() < 1e-12);

        let far = Factor::single(spec, LatticeSite::new(9, 9, 9), basis_local(0.0, spec).unwrap()).unwrap();
        assert!(matches!(x.expectation(std::slice::from_ref(&far)), Err(StateError::OutsideSupport(_))));
        assert!(matches!(psi.expectation(&[far]), Err(StateError::OutsideSupport(_))));
    }

    #[test]
    fn regroup_reorders_sites() {
        let spec = spin1();
        let a = Factor::single(spec, LatticeSite::new(0, 0, 0), basis_local(-1.0, spec).unwrap()).unwrap();
        let b = Factor::single(spec, LatticeSite::new(1, 0, 0), basis_local(1.0, spec).unwrap()).unwrap();
        let v = regroup(&[&a, &b], &[LatticeSite::new(1, 0, 0), LatticeSite::new(0, 0, 0)], 3).unwrap();
        // |+1⟩ ⊗ |−1⟩ → joint index 2·3 + 0
        assert_eq!(v[6], C64::new(1.0, 0.0));
    }
}
