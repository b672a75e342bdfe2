//! A multistate head on a one-dimensional tape of qudits.
//!
//! A configuration is (head state, head position, tape). A deterministic,
//! reverse-deterministic rule table gives a step operator `T` on
//! configurations, and `H = λ(T + T†)` on the configurations reachable from
//! the start.

mod trace;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::godel::{GodelError, GodelMap, PathRule};
use crate::lang::{Alphabet, Expression, SPACER};
use crate::qstate::{LatticeSite, Projector, StateError, C64, DEFAULT_DIMENSION_CAP};
use crate::scaling::FitError;

pub use trace::{
    estimate_tau, limit_estimate, projector_trace, stabilized_tau, tau_for_length, tau_scaling, tau_scaling_with, time_grid, HorizonPolicy,
    ScalingReport, TauPoint, Trace, Trials, MIN_TAIL_POINTS,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HeadError {
    #[error("target expression is empty")]
    EmptyTarget,
    #[error("coupling must be positive, got {0}")]
    NonPositiveCoupling(f64),
    #[error("rule for (state {state}, symbol {read}) given twice")]
    Nondeterministic { state: usize, read: usize },
    #[error("rule refers to head state {0} outside the declared states")]
    BadState(usize),
    #[error("rule refers to symbol {0} outside the alphabet")]
    BadSymbol(usize),
    #[error("rule has shift {0}; shifts are -1, 0 or +1")]
    BadShift(i8),
    #[error("configuration {successor} has two predecessors {first} and {second}")]
    NotReversible { successor: String, first: String, second: String },
    #[error("initial configuration does not fit the machine: {0}")]
    BadInitial(String),
    #[error("reachable subspace exceeds the dimension cap of {cap}")]
    DimensionCap { cap: usize },
    #[error("time grid must be strictly increasing and finite")]
    BadGrid,
    #[error("trace has {got} points, need at least {need}")]
    TraceTooShort { got: usize, need: usize },
    #[error("criterion |pbar(t) - pbar(t')| < 2^-{m} not met within the first half of the horizon {horizon}")]
    HorizonTooShort { m: u32, horizon: f64 },
    #[error("tau did not stabilize before the cap of {steps} time steps")]
    StepCap { steps: usize },
    #[error("{count} targets exceed the guard of {limit}")]
    GuardExceeded { count: u128, limit: usize },
    #[error("targets of length {n} compile to different generators")]
    GeneratorsDiffer { n: usize },
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Godel(#[from] GodelError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

/// `(state, read) → (write, shift, next)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rule {
    pub state: usize,
    pub read: usize,
    pub write: usize,
    pub shift: i8,
    pub next: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub state: usize,
    /// Cell under the head; `cells` means past the right end.
    pub pos: usize,
    pub tape: Vec<usize>,
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tape: Vec<String> = self.tape.iter().map(|s| s.to_string()).collect();
        write!(f, "q{}@{}[{}]", self.state, self.pos, tape.join(","))
    }
}

#[derive(Debug, Clone)]
pub struct HeadMachineSpec {
    alphabet: Alphabet,
    cells: usize,
    head_states: usize,
    rules: BTreeMap<(usize, usize), Rule>,
    lambda: f64,
    /// x coordinate of tape cell 0.
    origin: i64,
}

impl HeadMachineSpec {
    pub fn new(
        alphabet: Alphabet,
        cells: usize,
        head_states: usize,
        rules: &[Rule],
        lambda: f64,
    ) -> Result<Self, HeadError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(HeadError::NonPositiveCoupling(lambda));
        }
        let mut table = BTreeMap::new();
        for r in rules {
            for q in [r.state, r.next] {
                if q >= head_states {
                    return Err(HeadError::BadState(q));
                }
            }
            for s in [r.read, r.write] {
                if s >= alphabet.len() {
                    return Err(HeadError::BadSymbol(s));
                }
            }
            if !(-1..=1).contains(&r.shift) {
                return Err(HeadError::BadShift(r.shift));
            }
            if table.insert((r.state, r.read), *r).is_some() {
                return Err(HeadError::Nondeterministic { state: r.state, read: r.read });
            }
        }
        Ok(Self { alphabet, cells, head_states, rules: table, lambda, origin: 0 })
    }

    /// Places tape cell 0 at `(a, 0, 0)`.
    pub fn at_origin(mut self, a: i64) -> Self {
        self.origin = a;
        self
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn head_states(&self) -> usize {
        self.head_states
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn origin(&self) -> i64 {
        self.origin
    }

    pub fn rules(&self) -> impl Iterator<Item = &Rule> {
        self.rules.values()
    }

    /// Head in state 0 on cell 0, tape all spacers.
    pub fn initial(&self) -> Configuration {
        Configuration { state: 0, pos: 0, tape: vec![SPACER; self.cells] }
    }

    /// Lattice sites of the tape cells.
    pub fn tape_sites(&self) -> Vec<LatticeSite> {
        (0..self.cells).map(|i| LatticeSite::new(self.origin + i as i64, 0, 0)).collect()
    }

    /// Canonical Gödel map laying the tape along `+x` from the tape origin.
    pub fn tape_map(&self) -> Result<GodelMap, HeadError> {
        let g = GodelMap::canonical(self.alphabet.clone())?;
        Ok(g.with_path(PathRule::line(LatticeSite::new(self.origin, 0, 0), LatticeSite::new(1, 0, 0))?))
    }

    pub fn successor(&self, c: &Configuration) -> Option<Configuration> {
        if c.pos >= self.cells {
            return None;
        }
        let rule = self.rules.get(&(c.state, c.tape[c.pos]))?;
        let pos = c.pos as i64 + rule.shift as i64;
        if pos < 0 || pos > self.cells as i64 {
            return None;
        }
        let mut tape = c.tape.clone();
        tape[c.pos] = rule.write;
        Some(Configuration { state: rule.next, pos: pos as usize, tape })
    }

    pub fn predecessors(&self, c: &Configuration) -> Vec<Configuration> {
        let mut out = Vec::new();
        for rule in self.rules.values() {
            if rule.next != c.state {
                continue;
            }
            let pos = c.pos as i64 - rule.shift as i64;
            if pos < 0 || pos >= self.cells as i64 {
                continue;
            }
            let pos = pos as usize;
            if c.tape[pos] != rule.write {
                continue;
            }
            let mut tape = c.tape.clone();
            tape[pos] = rule.read;
            out.push(Configuration { state: rule.state, pos, tape });
        }
        out
    }
}

/// Head that writes `target` left to right onto a blank tape:
/// `(q_j, #) → (target(j+1), +1, q_{j+1})`, halting past cell `n`.
pub fn build_transcription_machine(
    alphabet: &Alphabet,
    target: &Expression,
    lambda: f64,
) -> Result<HeadMachineSpec, HeadError> {
    let n = target.len();
    if n == 0 {
        return Err(HeadError::EmptyTarget);
    }
    let rules: Vec<Rule> = target
        .symbols()
        .iter()
        .enumerate()
        .map(|(j, &s)| Rule { state: j, read: SPACER, write: s, shift: 1, next: j + 1 })
        .collect();
    HeadMachineSpec::new(alphabet.clone(), n, n + 1, &rules, lambda)
}

/// Reachable configurations in BFS order and `H` on them.
#[derive(Debug, Clone)]
pub struct ConfigSubspace {
    spec: HeadMachineSpec,
    configs: Vec<Configuration>,
    h: DMatrix<C64>,
}

impl ConfigSubspace {
    pub fn spec(&self) -> &HeadMachineSpec {
        &self.spec
    }

    pub fn configurations(&self) -> &[Configuration] {
        &self.configs
    }

    pub fn generator(&self) -> &DMatrix<C64> {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.configs.len()
    }

    /// `⟨c|P|c⟩` for each configuration, the tape encoded by `spec.tape_map()`.
    pub fn projector_weights(&self, proj: &Projector) -> Result<Vec<f64>, HeadError> {
        let map = self.spec.tape_map()?;
        self.configs
            .iter()
            .map(|c| {
                let state = map.encode(&Expression::new(c.tape.clone()))?;
                Ok(map.projector_expectation(&state, proj)?)
            })
            .collect()
    }
}

pub fn reachable_subspace(spec: &HeadMachineSpec, initial: Configuration) -> Result<ConfigSubspace, HeadError> {
    reachable_subspace_with_cap(spec, initial, DEFAULT_DIMENSION_CAP)
}

pub fn reachable_subspace_with_cap(
    spec: &HeadMachineSpec,
    initial: Configuration,
    cap: usize,
) -> Result<ConfigSubspace, HeadError> {
    if initial.tape.len() != spec.cells
        || initial.pos > spec.cells
        || initial.state >= spec.head_states
        || initial.tape.iter().any(|&s| s >= spec.alphabet.len())
    {
        return Err(HeadError::BadInitial(initial.to_string()));
    }
    let mut index: HashMap<Configuration, usize> = HashMap::new();
    let mut configs = Vec::new();
    let mut edges = Vec::new();
    let mut queue = VecDeque::new();
    index.insert(initial.clone(), 0);
    configs.push(initial.clone());
    queue.push_back(initial);
    while let Some(c) = queue.pop_front() {
        let from = index[&c];
        let preds = spec.predecessors(&c);
        if preds.len() > 1 {
            return Err(HeadError::NotReversible {
                successor: c.to_string(),
                first: preds[0].to_string(),
                second: preds[1].to_string(),
            });
        }
        let next = spec.successor(&c);
        for (neighbour, forward) in next.into_iter().map(|n| (n, true)).chain(preds.into_iter().map(|p| (p, false))) {
            let to = match index.get(&neighbour) {
                Some(&i) => i,
                None => {
                    if configs.len() >= cap {
                        return Err(HeadError::DimensionCap { cap });
                    }
                    let i = configs.len();
                    index.insert(neighbour.clone(), i);
                    configs.push(neighbour.clone());
                    queue.push_back(neighbour);
                    i
                }
            };
            if forward {
                edges.push((from, to));
            }
        }
    }
    let dim = configs.len();
    let mut t = DMatrix::<C64>::zeros(dim, dim);
    for (from, to) in edges {
        t[(to, from)] = C64::new(1.0, 0.0);
    }
    let h = (&t + t.adjoint()).scale(spec.lambda);
    Ok(ConfigSubspace { spec: spec.clone(), configs, h })
}
