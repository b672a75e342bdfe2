//! Gödel maps `G = (g, p)` from expressions to lattice product states.
//!
//! `g` sends each symbol to a local state (a spin projection, optionally
//! rotated by a global unitary, by site-dependent unitaries, or replaced by
//! an entangled two-site code) and `p` places the j-th symbol on the
//! lattice. `G(X) = ⊗_j |g(X(j)), p(j)⟩`.

mod config;
mod numbering;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::lang::{Alphabet, Expression, LangError, LengthLex};
use crate::qstate::{
    regroup, vdot, DenseState, Factor, LatticeSite, ProductState, Projector, QuditSpec, StateError, C64,
};

pub use config::{EncodingConfig, GodelMapConfig, PathConfig};
pub use numbering::{godel_number, godel_unnumber};

/// Largest `‖u†u − I‖_max` accepted as unitary.
pub const UNITARY_TOL: f64 = 1e-12;
/// A local state is recognized as a code state when `1 − |⟨c|v⟩|² < 1e-8`.
pub const DECODE_TOL: f64 = 1e-8;
/// Largest number of expressions any exhaustive check will visit.
pub const EXHAUSTION_GUARD: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GodelError {
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("matrix is not unitary: max deviation {deviation:e}")]
    NonUnitary { deviation: f64 },
    #[error("unitary at site {site} is not unitary: max deviation {deviation:e}")]
    NonUnitaryAt { site: LatticeSite, deviation: f64 },
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    MatrixShape { expected: usize, rows: usize, cols: usize },
    #[error("{symbols} symbols do not fit the {capacity} available code states")]
    AlphabetTooLarge { symbols: usize, capacity: usize },
    #[error("symbol assignment has {got} entries for {expected} symbols")]
    AssignmentLength { expected: usize, got: usize },
    #[error("entangled block code needs integer spin")]
    HalfIntegerBlock,
    #[error("path rule has no site for position {position}")]
    PathTooShort { position: usize },
    #[error("straight-line path needs a nonzero direction")]
    ZeroDirection,
    #[error("positions {first} and {second} both land on site {site}")]
    SiteCollision { site: LatticeSite, first: usize, second: usize },
    #[error("symbol index {0} has no encoding")]
    Unencodable(usize),
    #[error("local state at symbol position {position} is not a code state")]
    Unrecognized { position: usize },
    #[error("local state at symbol position {position} matches several symbols {symbols:?}")]
    Ambiguous { position: usize, symbols: Vec<usize> },
    #[error("state support does not follow the path at symbol position {position}")]
    SupportMismatch { position: usize },
    #[error("exhaustive check over {count} expressions exceeds the guard of {limit}")]
    GuardExceeded { count: u128, limit: usize },
    #[error("state has no weight on code states")]
    NoCodeWeight,
    #[error("invalid map configuration: {0}")]
    Config(String),
}

/// A validated `d×d` unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(DMatrix<C64>);

fn unitarity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    (m.adjoint() * m - DMatrix::<C64>::identity(n, n)).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

impl Unitary {
    pub fn new(m: DMatrix<C64>) -> Result<Self, GodelError> {
        if !m.is_square() {
            return Err(GodelError::MatrixShape { expected: m.nrows(), rows: m.nrows(), cols: m.ncols() });
        }
        let deviation = unitarity_deviation(&m);
        if !(deviation < UNITARY_TOL) {
            return Err(GodelError::NonUnitary { deviation });
        }
        Ok(Self(m))
    }

    pub fn identity(d: usize) -> Self {
        Self(DMatrix::identity(d, d))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }
}

/// One deformation layer of `g`; later layers act after earlier ones.
#[derive(Debug, Clone, PartialEq)]
pub enum Deformation {
    Global(Unitary),
    Gauge(BTreeMap<LatticeSite, Unitary>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingKind {
    Basis,
    UnitaryDeformed,
    SiteGauged,
    BlockEntangled,
}

impl fmt::Display for EncodingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingKind::Basis => "basis",
            EncodingKind::UnitaryDeformed => "unitary-deformed",
            EncodingKind::SiteGauged => "site-gauged",
            EncodingKind::BlockEntangled => "block-entangled",
        })
    }
}

/// The symbol map `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolEncoding {
    /// Local index `m + s` assigned to each symbol.
    assign: Vec<usize>,
    block: bool,
    layers: Vec<Deformation>,
}

impl SymbolEncoding {
    /// Symbol `i` ↦ `m = i − s`; the spacer sits at `m = −s`.
    pub fn canonical(k: usize, spec: QuditSpec) -> Result<Self, GodelError> {
        if k > spec.dim() {
            return Err(GodelError::AlphabetTooLarge { symbols: k, capacity: spec.dim() });
        }
        Ok(Self { assign: (0..k).collect(), block: false, layers: Vec::new() })
    }

    /// Explicit projections per symbol. Only the range is checked here;
    /// whether the assignment is one-to-one is what [`GodelMap::is_injective`]
    /// reports.
    pub fn with_projections(ms: &[f64], spec: QuditSpec) -> Result<Self, GodelError> {
        let assign = ms.iter().map(|&m| spec.index_of(m)).collect::<Result<Vec<_>, _>>()?;
        Ok(Self { assign, block: false, layers: Vec::new() })
    }

    /// Two-site entangled code: the symbol assigned to a nonzero `m` becomes
    /// `(|m,0⟩ + |0,m⟩)/√2`. Symbols take the nonzero projections in
    /// increasing order, so `2s ≥ k` is required.
    pub fn block_default(k: usize, spec: QuditSpec) -> Result<Self, GodelError> {
        let zero = spec.zero_index().ok_or(GodelError::HalfIntegerBlock)?;
        let nonzero: Vec<usize> = (0..spec.dim()).filter(|&i| i != zero).collect();
        if k > nonzero.len() {
            return Err(GodelError::AlphabetTooLarge { symbols: k, capacity: nonzero.len() });
        }
        Ok(Self { assign: nonzero[..k].to_vec(), block: true, layers: Vec::new() })
    }

    pub fn kind(&self) -> EncodingKind {
        if self.block {
            EncodingKind::BlockEntangled
        } else if self.layers.iter().any(|l| matches!(l, Deformation::Gauge(_))) {
            EncodingKind::SiteGauged
        } else if !self.layers.is_empty() {
            EncodingKind::UnitaryDeformed
        } else {
            EncodingKind::Basis
        }
    }

    /// Sites per symbol.
    pub fn width(&self) -> usize {
        if self.block { 2 } else { 1 }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assign
    }

    pub fn layers(&self) -> &[Deformation] {
        &self.layers
    }

    fn base_vector(&self, symbol: usize, d: usize) -> Result<Vec<C64>, GodelError> {
        let &m = self.assign.get(symbol).ok_or(GodelError::Unencodable(symbol))?;
        let mut v = vec![C64::new(0.0, 0.0); d.pow(self.width() as u32)];
        if self.block {
            let zero = (d - 1) / 2;
            let r = std::f64::consts::FRAC_1_SQRT_2;
            v[m * d + zero] += C64::new(r, 0.0);
            v[zero * d + m] += C64::new(r, 0.0);
        } else {
            v[m] = C64::new(1.0, 0.0);
        }
        Ok(v)
    }

    /// Combined local unitary at `site`, if any layer acts there.
    fn site_unitary(&self, site: LatticeSite) -> Option<DMatrix<C64>> {
        let mut acc: Option<DMatrix<C64>> = None;
        for layer in &self.layers {
            let u = match layer {
                Deformation::Global(u) => Some(u),
                Deformation::Gauge(map) => map.get(&site),
            };
            if let Some(u) = u {
                acc = Some(match acc {
                    Some(a) => u.matrix() * a,
                    None => u.matrix().clone(),
                });
            }
        }
        acc
    }

    /// The code state of `symbol` laid on `sites` (one site, or two for
    /// block codes).
    pub fn symbol_factor(&self, symbol: usize, sites: &[LatticeSite], spec: QuditSpec) -> Result<Factor, GodelError> {
        let d = spec.dim();
        let mut v = self.base_vector(symbol, d)?;
        for (leg, &site) in sites.iter().enumerate() {
            if let Some(u) = self.site_unitary(site) {
                v = apply_leg(&v, &u, d, sites.len(), leg);
            }
        }
        Ok(Factor::new(spec, sites.to_vec(), v)?)
    }
}

/// Applies `u` to tensor leg `leg` of a `width`-site vector.
fn apply_leg(v: &[C64], u: &DMatrix<C64>, d: usize, width: usize, leg: usize) -> Vec<C64> {
    let stride = d.pow((width - leg - 1) as u32);
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    for (idx, slot) in out.iter_mut().enumerate() {
        let i = (idx / stride) % d;
        let base = idx - i * stride;
        for j in 0..d {
            *slot += u[(i, j)] * v[base + j * stride];
        }
    }
    out
}

type SiteFn = dyn Fn(&[usize], usize) -> LatticeSite + Send + Sync;

/// Position rule whose j-th site may depend on the symbols already read,
/// `p(X_[1,j−1], j)`.
#[derive(Clone)]
pub struct AdaptiveRule {
    name: String,
    f: Arc<SiteFn>,
}

impl AdaptiveRule {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[usize], usize) -> LatticeSite + Send + Sync + 'static,
    {
        Self { name: name.into(), f: Arc::new(f) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Site for 1-based position `j` after reading `prefix`.
    pub fn site(&self, prefix: &[usize], j: usize) -> LatticeSite {
        (self.f)(prefix, j)
    }
}

impl fmt::Debug for AdaptiveRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("AdaptiveRule").field("name", &self.name).finish()
    }
}

/// The position map `p`.
#[derive(Debug, Clone)]
pub enum PathRule {
    Line { origin: LatticeSite, dir: LatticeSite },
    List(Vec<LatticeSite>),
    Adaptive(AdaptiveRule),
}

impl PathRule {
    pub fn line(origin: LatticeSite, dir: LatticeSite) -> Result<Self, GodelError> {
        if dir.is_origin() {
            return Err(GodelError::ZeroDirection);
        }
        Ok(PathRule::Line { origin, dir })
    }

    /// Explicit site list; rejects repeated sites.
    pub fn list(sites: Vec<LatticeSite>) -> Result<Self, GodelError> {
        let mut seen: HashMap<LatticeSite, usize> = HashMap::new();
        for (i, &s) in sites.iter().enumerate() {
            if let Some(first) = seen.insert(s, i + 1) {
                return Err(GodelError::SiteCollision { site: s, first, second: i + 1 });
            }
        }
        Ok(PathRule::List(sites))
    }

    /// Site of 1-based lattice position `position`, given the symbols read
    /// so far (only adaptive rules look at them).
    pub fn site(&self, prefix: &[usize], position: usize) -> Result<LatticeSite, GodelError> {
        match self {
            PathRule::Line { origin, dir } => Ok(origin.offset(dir.scaled(position as i64 - 1))),
            PathRule::List(sites) => {
                sites.get(position.wrapping_sub(1)).copied().ok_or(GodelError::PathTooShort { position })
            }
            PathRule::Adaptive(rule) => Ok(rule.site(prefix, position)),
        }
    }
}

/// `G = (g, p)` together with its alphabet and qudit.
#[derive(Debug, Clone)]
pub struct GodelMap {
    alphabet: Alphabet,
    spec: QuditSpec,
    g: SymbolEncoding,
    p: PathRule,
}

/// Result of [`GodelMap::is_injective`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InjectivityReport {
    pub injective: bool,
    pub max_len: usize,
    /// Trimmed expressions compared.
    pub checked: usize,
    /// Expressions ending in a spacer, left out because under an all-spacer
    /// background they coincide with their trimmed form.
    pub excluded_by_trimming: usize,
    pub counterexample: Option<(Expression, Expression)>,
}

/// True when `x` and `y` differ only by trailing spacers.
pub fn background_equivalent(x: &Expression, y: &Expression) -> bool {
    x.trimmed() == y.trimmed()
}

impl GodelMap {
    pub fn new(alphabet: Alphabet, spec: QuditSpec, g: SymbolEncoding, p: PathRule) -> Result<Self, GodelError> {
        let k = alphabet.len();
        if g.assign.len() != k {
            return Err(GodelError::AssignmentLength { expected: k, got: g.assign.len() });
        }
        if let Some(&bad) = g.assign.iter().find(|&&i| i >= spec.dim()) {
            return Err(StateError::ProjectionOutOfRange { m: spec.m_of(bad), spin: spec.spin() }.into());
        }
        if g.block {
            let zero = spec.zero_index().ok_or(GodelError::HalfIntegerBlock)?;
            if g.assign.contains(&zero) {
                return Err(GodelError::Config("block code symbols need nonzero projections".into()));
            }
        }
        for layer in &g.layers {
            let check = |u: &Unitary| {
                if u.dim() != spec.dim() {
                    Err(GodelError::MatrixShape { expected: spec.dim(), rows: u.dim(), cols: u.dim() })
                } else {
                    Ok(())
                }
            };
            match layer {
                Deformation::Global(u) => check(u)?,
                Deformation::Gauge(map) => map.values().try_for_each(check)?,
            }
        }
        Ok(Self { alphabet, spec, g, p })
    }

    /// Smallest spin that fits the alphabet, `i ↦ m = i − s`, straight line
    /// from the origin along `+x`.
    pub fn canonical(alphabet: Alphabet) -> Result<Self, GodelError> {
        let spec = QuditSpec::for_alphabet_size(alphabet.len())?;
        Self::canonical_with_spin(alphabet, spec)
    }

    pub fn canonical_with_spin(alphabet: Alphabet, spec: QuditSpec) -> Result<Self, GodelError> {
        let g = SymbolEncoding::canonical(alphabet.len(), spec)?;
        let p = PathRule::line(LatticeSite::ORIGIN, LatticeSite::new(1, 0, 0))?;
        Self::new(alphabet, spec, g, p)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn spec(&self) -> QuditSpec {
        self.spec
    }

    pub fn encoding(&self) -> &SymbolEncoding {
        &self.g
    }

    pub fn path(&self) -> &PathRule {
        &self.p
    }

    pub fn kind(&self) -> EncodingKind {
        self.g.kind()
    }

    /// Same `g`, different `p`.
    pub fn with_path(&self, p: PathRule) -> GodelMap {
        GodelMap { p, ..self.clone() }
    }

    /// Same `p`, different `g`.
    pub fn with_encoding(&self, g: SymbolEncoding) -> Result<GodelMap, GodelError> {
        Self::new(self.alphabet.clone(), self.spec, g, self.p.clone())
    }

    /// Sites of symbol position `j` (1-based) after reading `prefix`.
    fn group_sites(&self, prefix: &[usize], j: usize) -> Result<Vec<LatticeSite>, GodelError> {
        let r = self.g.width();
        (r * (j - 1) + 1..=r * j).map(|pos| self.p.site(prefix, pos)).collect()
    }

    /// Sites used by every symbol of `x`, checked for collisions.
    pub fn sites_for(&self, x: &Expression) -> Result<Vec<Vec<LatticeSite>>, GodelError> {
        let mut seen: HashMap<LatticeSite, usize> = HashMap::new();
        let mut out = Vec::with_capacity(x.len());
        for j in 1..=x.len() {
            let group = self.group_sites(&x.symbols()[..j - 1], j)?;
            for &s in &group {
                if let Some(first) = seen.insert(s, j) {
                    return Err(GodelError::SiteCollision { site: s, first, second: j });
                }
            }
            out.push(group);
        }
        Ok(out)
    }

    /// `G(X)`.
    pub fn encode(&self, x: &Expression) -> Result<ProductState, GodelError> {
        if let Some(&bad) = x.symbols().iter().find(|&&s| s >= self.alphabet.len()) {
            return Err(GodelError::Unencodable(bad));
        }
        let groups = self.sites_for(x)?;
        let factors = x
            .symbols()
            .iter()
            .zip(&groups)
            .map(|(&s, sites)| self.g.symbol_factor(s, sites, self.spec))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ProductState::new(self.spec, factors)?)
    }

    /// Code factors of `target` laid on `interval`, consecutive groups of
    /// the code width.
    pub fn code_factors(&self, target: &Expression, interval: &[LatticeSite]) -> Result<Vec<Factor>, GodelError> {
        let r = self.g.width();
        if interval.len() != r * target.len() {
            return Err(GodelError::SupportMismatch { position: 0 });
        }
        target
            .symbols()
            .iter()
            .zip(interval.chunks(r))
            .map(|(&s, sites)| self.g.symbol_factor(s, sites, self.spec))
            .collect()
    }

    /// `⟨ψ|P_{X,[a,b]}|ψ⟩` for a product state.
    pub fn projector_expectation(&self, state: &ProductState, proj: &Projector) -> Result<f64, GodelError> {
        Ok(state.expectation(&self.code_factors(&proj.target, &proj.interval)?)?)
    }

    /// `⟨ψ|P_{X,[a,b]}|ψ⟩` for a dense lattice state.
    pub fn projector_expectation_dense(&self, state: &DenseState, proj: &Projector) -> Result<f64, GodelError> {
        Ok(state.expectation(&self.code_factors(&proj.target, &proj.interval)?)?)
    }

    /// Symbols whose code state on `sites` matches `v`.
    fn recognize(&self, v: &[C64], sites: &[LatticeSite]) -> Result<Vec<usize>, GodelError> {
        let mut hits = Vec::new();
        for s in 0..self.alphabet.len() {
            let code = self.g.symbol_factor(s, sites, self.spec)?;
            if 1.0 - vdot(code.amps(), v).norm_sqr() < DECODE_TOL {
                hits.push(s);
            }
        }
        Ok(hits)
    }

    /// Reads the state symbol by symbol along `p`, returning the expression
    /// and the sites visited in reading order.
    pub fn read_path(&self, state: &ProductState) -> Result<(Expression, Vec<LatticeSite>), GodelError> {
        if state.spec() != self.spec {
            return Err(StateError::SpinMismatch.into());
        }
        let d = self.spec.dim();
        let r = self.g.width();
        let mut owner: HashMap<LatticeSite, usize> = HashMap::new();
        for (i, f) in state.factors().iter().enumerate() {
            for &s in f.sites() {
                owner.insert(s, i);
            }
        }
        let total = owner.len();
        if !total.is_multiple_of(r) {
            return Err(GodelError::SupportMismatch { position: total / r + 1 });
        }
        let mut used: HashSet<LatticeSite> = HashSet::new();
        let mut out = Expression::empty();
        let mut visited = Vec::with_capacity(total);
        for j in 1..=total / r {
            let group = self.group_sites(out.symbols(), j)?;
            let mut parts: Vec<usize> = Vec::new();
            for s in &group {
                let &i = owner.get(s).ok_or(GodelError::SupportMismatch { position: j })?;
                if !used.insert(*s) {
                    return Err(GodelError::SupportMismatch { position: j });
                }
                if !parts.contains(&i) {
                    parts.push(i);
                }
            }
            let factors: Vec<&Factor> = parts.iter().map(|&i| &state.factors()[i]).collect();
            if factors.iter().any(|f| f.sites().iter().any(|s| !group.contains(s))) {
                return Err(GodelError::SupportMismatch { position: j });
            }
            let v = regroup(&factors, &group, d)?;
            match self.recognize(&v, &group)?.as_slice() {
                [] => return Err(GodelError::Unrecognized { position: j }),
                [s] => out.push(*s),
                many => return Err(GodelError::Ambiguous { position: j, symbols: many.to_vec() }),
            }
            visited.extend(group);
        }
        Ok((out, visited))
    }

    /// The unique `X` with `G(X) = state` (up to a phase per factor).
    pub fn decode_exact(&self, state: &ProductState) -> Result<Expression, GodelError> {
        self.read_path(state).map(|(x, _)| x)
    }

    /// Born-rule readout in the code basis, conditioned on the code space.
    /// Seeded and reproducible.
    pub fn decode_sample(&self, state: &DenseState, seed: u64, draws: usize) -> Result<Vec<Expression>, GodelError> {
        let (outcomes, weights) = self.code_distribution(state)?;
        let total: f64 = weights.iter().sum();
        if !(total > 1e-12) {
            return Err(GodelError::NoCodeWeight);
        }
        let dist = WeightedIndex::new(&weights).map_err(|_| GodelError::NoCodeWeight)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..draws).map(|_| outcomes[dist.sample(&mut rng)].clone()).collect())
    }

    /// `|⟨G(X)|ψ⟩|²` for every `X` whose support is the state's.
    pub fn code_distribution(&self, state: &DenseState) -> Result<(Vec<Expression>, Vec<f64>), GodelError> {
        let frame = state.frame().ok_or(StateError::NoFrame)?;
        if frame.spec != self.spec {
            return Err(StateError::SpinMismatch.into());
        }
        let r = self.g.width();
        if frame.sites.len() % r != 0 {
            return Err(GodelError::SupportMismatch { position: 0 });
        }
        let n = frame.sites.len() / r;
        let k = self.alphabet.len();
        let count = (k as u128).pow(n as u32);
        if count > EXHAUSTION_GUARD as u128 {
            return Err(GodelError::GuardExceeded { count, limit: EXHAUSTION_GUARD });
        }
        let support: HashSet<LatticeSite> = frame.sites.iter().copied().collect();
        let configs = state.configurations()?;
        let d = self.spec.dim();
        let mut outcomes = Vec::new();
        let mut weights = Vec::new();
        for x in LengthLex::of_length(k, n) {
            let groups = match self.sites_for(&x) {
                Ok(g) => g,
                Err(GodelError::SiteCollision { .. }) => continue,
                Err(e) => return Err(e),
            };
            if groups.iter().flatten().any(|s| !support.contains(s)) {
                continue;
            }
            let positions: Vec<Vec<usize>> = groups
                .iter()
                .map(|g| g.iter().map(|s| frame.sites.iter().position(|t| t == s).unwrap()).collect())
                .collect();
            let codes = x
                .symbols()
                .iter()
                .zip(&groups)
                .map(|(&s, g)| self.g.symbol_factor(s, g, self.spec))
                .collect::<Result<Vec<_>, _>>()?;
            let mut amp = C64::new(0.0, 0.0);
            for (config, a) in configs.iter().zip(state.amps()) {
                let mut c = C64::new(1.0, 0.0);
                for (code, pos) in codes.iter().zip(&positions) {
                    c *= code.amps()[pos.iter().fold(0, |acc, &q| acc * d + config[q])];
                }
                amp += c.conj() * a;
            }
            outcomes.push(x);
            weights.push(amp.norm_sqr());
        }
        if outcomes.is_empty() {
            return Err(GodelError::SupportMismatch { position: 1 });
        }
        Ok((outcomes, weights))
    }

    /// `G_u`: every local code state is rotated by `u`.
    pub fn deform_unitary(&self, u: DMatrix<C64>) -> Result<GodelMap, GodelError> {
        let u = Unitary::new(u)?;
        let mut g = self.g.clone();
        g.layers.push(Deformation::Global(u));
        self.with_encoding(g)
    }

    /// Site-dependent rotation `u_x`; sites absent from the map are left alone.
    pub fn deform_gauge(&self, gauge: BTreeMap<LatticeSite, DMatrix<C64>>) -> Result<GodelMap, GodelError> {
        let mut checked = BTreeMap::new();
        for (site, m) in gauge {
            let u = Unitary::new(m).map_err(|e| match e {
                GodelError::NonUnitary { deviation } => GodelError::NonUnitaryAt { site, deviation },
                other => other,
            })?;
            checked.insert(site, u);
        }
        let mut g = self.g.clone();
        g.layers.push(Deformation::Gauge(checked));
        self.with_encoding(g)
    }

    /// Checks that trimmed expressions up to `max_len` map to pairwise
    /// distinct `(support, state)` pairs, states compared up to phase.
    pub fn is_injective(&self, max_len: usize) -> Result<InjectivityReport, GodelError> {
        let k = self.alphabet.len();
        let count = (k as u128).checked_pow(max_len as u32).unwrap_or(u128::MAX);
        if count > EXHAUSTION_GUARD as u128 {
            return Err(GodelError::GuardExceeded { count, limit: EXHAUSTION_GUARD });
        }
        // Per group of sites, symbols are grouped into classes of equal code
        // states; a product state is then fixed by its (group, class) pairs.
        let mut classes: HashMap<Vec<LatticeSite>, Vec<usize>> = HashMap::new();
        let mut seen: HashMap<Vec<(Vec<LatticeSite>, usize)>, Expression> = HashMap::new();
        let mut report = InjectivityReport { injective: true, max_len, checked: 0, excluded_by_trimming: 0, counterexample: None };
        for x in LengthLex::new(k, max_len) {
            if !x.is_trimmed() {
                report.excluded_by_trimming += 1;
                continue;
            }
            report.checked += 1;
            let groups = self.sites_for(&x)?;
            let mut key = Vec::with_capacity(groups.len());
            for (&s, group) in x.symbols().iter().zip(groups) {
                if !classes.contains_key(&group) {
                    let ids = self.symbol_classes(&group)?;
                    classes.insert(group.clone(), ids);
                }
                let id = classes[&group][s];
                key.push((group, id));
            }
            key.sort();
            if let Some(prev) = seen.get(&key) {
                report.injective = false;
                report.counterexample = Some((prev.clone(), x));
                return Ok(report);
            }
            seen.insert(key, x);
        }
        Ok(report)
    }

    fn symbol_classes(&self, group: &[LatticeSite]) -> Result<Vec<usize>, GodelError> {
        let k = self.alphabet.len();
        let codes = (0..k).map(|s| self.g.symbol_factor(s, group, self.spec)).collect::<Result<Vec<_>, _>>()?;
        let mut ids = vec![0; k];
        for b in 0..k {
            ids[b] = (0..b)
                .find(|&a| 1.0 - vdot(codes[a].amps(), codes[b].amps()).norm_sqr() < 1e-10)
                .map_or(b, |a| ids[a]);
        }
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{basis_local, superpose};

    fn bits() -> Alphabet {
        Alphabet::new(["#", "0", "1"]).unwrap()
    }

    fn canonical() -> GodelMap {
        GodelMap::canonical(bits()).unwrap()
    }

    fn rotation_y(theta: f64) -> DMatrix<C64> {
        // real orthogonal rotation in the (|−1⟩, |+1⟩) plane
        let (c, s) = (theta.cos(), theta.sin());
        let z = C64::new(0.0, 0.0);
        let o = C64::new(1.0, 0.0);
        DMatrix::from_row_slice(3, 3, &[
            C64::new(c, 0.0), z, C64::new(-s, 0.0),
            z, o, z,
            C64::new(s, 0.0), z, C64::new(c, 0.0),
        ])
    }

    #[test]
    fn encode_single_spacer() {
        let g = canonical();
        let x = bits().parse("#").unwrap();
        let psi = g.encode(&x).unwrap();
        assert_eq!(psi.support(), vec![LatticeSite::ORIGIN]);
        assert_eq!(psi.factors()[0].amps(), basis_local(-1.0, g.spec()).unwrap().as_slice());
    }

    #[test]
    fn encode_two_symbols() {
        let g = canonical();
        let psi = g.encode(&bits().parse("01").unwrap()).unwrap();
        assert_eq!(psi.support(), vec![LatticeSite::new(0, 0, 0), LatticeSite::new(1, 0, 0)]);
        assert_eq!(psi.factors()[0].amps(), basis_local(0.0, g.spec()).unwrap().as_slice());
        assert_eq!(psi.factors()[1].amps(), basis_local(1.0, g.spec()).unwrap().as_slice());
    }

    #[test]
    fn unitary_deformed_symbol() {
        let u = rotation_y(0.4);
        let g = canonical().deform_unitary(u.clone()).unwrap();
        assert_eq!(g.kind(), EncodingKind::UnitaryDeformed);
        let psi = g.encode(&bits().parse("1").unwrap()).unwrap();
        let expected: Vec<C64> = u.column(2).iter().copied().collect();
        let amps = psi.factors()[0].amps();
        for (a, b) in amps.iter().zip(&expected) {
            assert!((a - b).norm() < 1e-15);
        }
        assert!((crate::qstate::vec_norm(amps) - 1.0).abs() < 1e-12);
        assert_eq!(g.decode_exact(&psi).unwrap(), bits().parse("1").unwrap());
    }

    #[test]
    fn identity_deformation_changes_nothing() {
        let g = canonical();
        let gi = g.deform_unitary(DMatrix::identity(3, 3)).unwrap();
        let x = bits().parse("0#1").unwrap();
        assert_eq!(g.encode(&x).unwrap(), gi.encode(&x).unwrap());
    }

    #[test]
    fn non_unitary_rejected() {
        let g = canonical();
        let mut m = DMatrix::<C64>::identity(3, 3);
        m[(0, 0)] = C64::new(1.0 + 1e-9, 0.0);
        assert!(matches!(g.deform_unitary(m.clone()), Err(GodelError::NonUnitary { .. })));
        let gauge = BTreeMap::from([(LatticeSite::ORIGIN, m)]);
        assert!(matches!(g.deform_gauge(gauge), Err(GodelError::NonUnitaryAt { .. })));
        assert!(matches!(
            g.deform_unitary(DMatrix::identity(2, 2)),
            Err(GodelError::MatrixShape { expected: 3, .. })
        ));
    }

    #[test]
    fn gauge_touches_one_site() {
        let g = canonical();
        let target = LatticeSite::new(1, 0, 0);
        let gauged = g.deform_gauge(BTreeMap::from([(target, rotation_y(0.9))])).unwrap();
        assert_eq!(gauged.kind(), EncodingKind::SiteGauged);
        // the rotation fixes m = 0, so the gauged site carries m = +1
        let x = bits().parse("010").unwrap();
        let (a, b) = (g.encode(&x).unwrap(), gauged.encode(&x).unwrap());
        assert_eq!(a.factors()[0], b.factors()[0]);
        assert_ne!(a.factors()[1], b.factors()[1]);
        assert_eq!(a.factors()[2], b.factors()[2]);
        assert_eq!(gauged.decode_exact(&b).unwrap(), x);
    }

    #[test]
    fn superposed_local_is_not_a_code_state() {
        let g = canonical();
        let spec = g.spec();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let mut v = vec![C64::new(0.0, 0.0); 3];
        v[0] = C64::new(r, 0.0);
        v[1] = C64::new(r, 0.0);
        let psi = ProductState::new(spec, vec![Factor::single(spec, LatticeSite::ORIGIN, v).unwrap()]).unwrap();
        assert_eq!(g.decode_exact(&psi), Err(GodelError::Unrecognized { position: 1 }));
    }

    #[test]
    fn decode_rejects_off_path_support() {
        let g = canonical();
        let spec = g.spec();
        let f = Factor::single(spec, LatticeSite::new(0, 5, 0), basis_local(0.0, spec).unwrap()).unwrap();
        let psi = ProductState::new(spec, vec![f]).unwrap();
        assert_eq!(g.decode_exact(&psi), Err(GodelError::SupportMismatch { position: 1 }));
    }

    #[test]
    fn block_code_construction() {
        let spec = QuditSpec::from_spin(1.0).unwrap();
        let two = Alphabet::new(["#", "A"]).unwrap();
        let enc = SymbolEncoding::block_default(2, spec).unwrap();
        // "A" takes m = +1
        let f = enc.symbol_factor(1, &[LatticeSite::new(0, 0, 0), LatticeSite::new(1, 0, 0)], spec).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((f.amps()[2 * 3 + 1] - r).norm() < 1e-15); // |+1,0⟩
        assert!((f.amps()[3 + 2] - r).norm() < 1e-15); // |0,+1⟩
        let g = GodelMap::canonical_with_spin(two.clone(), spec).unwrap().with_encoding(enc).unwrap();
        let x = two.parse("A").unwrap();
        assert_eq!(g.decode_exact(&g.encode(&x).unwrap()).unwrap(), x);
        assert!(matches!(
            SymbolEncoding::block_default(3, spec),
            Err(GodelError::AlphabetTooLarge { symbols: 3, capacity: 2 })
        ));
        assert_eq!(
            SymbolEncoding::block_default(2, QuditSpec::from_spin(1.5).unwrap()),
            Err(GodelError::HalfIntegerBlock)
        );
    }

    #[test]
    fn block_codes_orthogonal_and_entangled() {
        let spec = QuditSpec::from_spin(2.0).unwrap();
        let enc = SymbolEncoding::block_default(3, spec).unwrap();
        let sites = [LatticeSite::new(0, 0, 0), LatticeSite::new(1, 0, 0)];
        let codes: Vec<Factor> = (0..3).map(|s| enc.symbol_factor(s, &sites, spec).unwrap()).collect();
        for a in 0..3 {
            for b in 0..3 {
                let o = vdot(codes[a].amps(), codes[b].amps()).norm();
                assert!((o - if a == b { 1.0 } else { 0.0 }).abs() < 1e-15);
            }
            // Schmidt coefficients: singular values of the 5×5 amplitude matrix
            let m = DMatrix::from_row_slice(5, 5, codes[a].amps());
            let sv = m.singular_values();
            let nonzero: Vec<f64> = sv.iter().copied().filter(|&x| x > 1e-12).collect();
            assert_eq!(nonzero.len(), 2);
            for x in nonzero {
                assert!((x - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_assignment_is_not_injective() {
        let spec = QuditSpec::from_spin(1.0).unwrap();
        let g = canonical()
            .with_encoding(SymbolEncoding::with_projections(&[-1.0, 0.0, 0.0], spec).unwrap())
            .unwrap();
        let report = g.is_injective(3).unwrap();
        assert!(!report.injective);
        let (a, b) = report.counterexample.unwrap();
        assert_eq!((a.len(), b.len()), (1, 1));
        assert!(matches!(g.decode_exact(&g.encode(&b).unwrap()), Err(GodelError::Ambiguous { .. })));
    }

    #[test]
    fn canonical_is_injective_on_trimmed() {
        let report = canonical().is_injective(4).unwrap();
        assert!(report.injective);
        assert_eq!(report.checked + report.excluded_by_trimming, 121);
        assert_eq!(report.excluded_by_trimming, 1 + 3 + 9 + 27);
    }

    #[test]
    fn trailing_spacer_is_background_equivalent() {
        let a = bits();
        let (x, y) = (a.parse("0").unwrap(), a.parse("0#").unwrap());
        assert!(background_equivalent(&x, &y));
        assert!(!background_equivalent(&x, &a.parse("#0").unwrap()));
        assert!(!y.is_trimmed());
    }

    #[test]
    fn guard() {
        assert!(matches!(canonical().is_injective(11), Err(GodelError::GuardExceeded { .. })));
    }

    #[test]
    fn list_path_and_collisions() {
        let sites = vec![LatticeSite::new(0, 0, 0), LatticeSite::new(0, 2, 0)];
        let g = canonical().with_path(PathRule::list(sites.clone()).unwrap());
        let x = bits().parse("10").unwrap();
        assert_eq!(g.encode(&x).unwrap().support(), sites);
        assert_eq!(
            g.encode(&bits().parse("100").unwrap()),
            Err(GodelError::PathTooShort { position: 3 })
        );
        assert!(matches!(
            PathRule::list(vec![LatticeSite::ORIGIN, LatticeSite::ORIGIN]),
            Err(GodelError::SiteCollision { first: 1, second: 2, .. })
        ));
        assert_eq!(PathRule::line(LatticeSite::ORIGIN, LatticeSite::ORIGIN).unwrap_err(), GodelError::ZeroDirection);
    }

    #[test]
    fn adaptive_path_encodes_and_decodes() {
        // second symbol goes up when the first is "1", right otherwise
        let rule = AdaptiveRule::new("turn", |prefix: &[usize], j| match (j, prefix.first()) {
            (1, _) => LatticeSite::ORIGIN,
            (_, Some(2)) => LatticeSite::new(0, j as i64 - 1, 0),
            _ => LatticeSite::new(j as i64 - 1, 0, 0),
        });
        let g = canonical().with_path(PathRule::Adaptive(rule));
        for text in ["10", "00", "1#1"] {
            let x = bits().parse(text).unwrap();
            let (y, visited) = g.read_path(&g.encode(&x).unwrap()).unwrap();
            assert_eq!(y, x);
            assert_eq!(visited.len(), x.len());
        }
        let collide = AdaptiveRule::new("stuck", |_: &[usize], _| LatticeSite::ORIGIN);
        let g = canonical().with_path(PathRule::Adaptive(collide));
        assert!(matches!(g.encode(&bits().parse("01").unwrap()), Err(GodelError::SiteCollision { .. })));
    }

    #[test]
    fn projector_expectations() {
        let g = canonical();
        let a = bits();
        let (x, y) = (a.parse("01").unwrap(), a.parse("11").unwrap());
        let (px, py) = (g.encode(&x).unwrap(), g.encode(&y).unwrap());
        let proj = Projector { target: x.clone(), interval: px.support() };
        assert_eq!(g.projector_expectation(&px, &proj).unwrap(), 1.0);
        assert_eq!(g.projector_expectation(&py, &proj).unwrap(), 0.0);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = superpose(&[(C64::new(r, 0.0), px), (C64::new(r, 0.0), py)]).unwrap();
        assert!((g.projector_expectation_dense(&psi, &proj).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sampling_is_seeded() {
        let g = canonical();
        let a = bits();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let psi = superpose(&[
            (C64::new(r, 0.0), g.encode(&a.parse("0").unwrap()).unwrap()),
            (C64::new(r, 0.0), g.encode(&a.parse("1").unwrap()).unwrap()),
        ])
        .unwrap();
        let s1 = g.decode_sample(&psi, 42, 200).unwrap();
        let s2 = g.decode_sample(&psi, 42, 200).unwrap();
        assert_eq!(s1, s2);
        let pure = superpose(&[(C64::new(1.0, 0.0), g.encode(&a.parse("10").unwrap()).unwrap())]).unwrap();
        let s = g.decode_sample(&pure, 1, 50).unwrap();
        assert!(s.iter().all(|x| *x == a.parse("10").unwrap()));
    }

    #[test]
    fn sampling_needs_matching_support() {
        let g = canonical();
        let spec = g.spec();
        let f = Factor::single(spec, LatticeSite::new(3, 3, 3), basis_local(0.0, spec).unwrap()).unwrap();
        let psi = superpose(&[(C64::new(1.0, 0.0), ProductState::new(spec, vec![f]).unwrap())]).unwrap();
        assert!(matches!(g.decode_sample(&psi, 0, 10), Err(GodelError::SupportMismatch { .. })));
    }
}
