//! What it costs a head to read an encoded expression.
//!
//! The head starts at the lattice origin and walks to each site in reading
//! order. Travel is the summed Manhattan distance, turns count changes of
//! direction. Both are proxies; nothing here models the head's own dynamics.

use serde::Serialize;
use thiserror::Error;

use crate::godel::{AdaptiveRule, GodelError, GodelMap, PathRule, EXHAUSTION_GUARD};
use crate::lang::{Alphabet, Expression, LengthLex};
use crate::qstate::{LatticeSite, ProductState};
use crate::scaling::{fit_scaling, FitError, FitReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReadError {
    #[error(transparent)]
    Godel(#[from] GodelError),
    #[error("map does not use a straight-line path")]
    NotLinePath,
    #[error("support is not collinear and evenly spaced")]
    NotStraight,
    #[error("state support does not match the listed sites")]
    SupportMismatch,
    #[error("read back {got:?}, expected {expected:?}")]
    DecodeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("{count} inputs exceed the guard of {limit}")]
    GuardExceeded { count: u128, limit: usize },
    #[error(transparent)]
    Fit(#[from] FitError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CostReport {
    pub steps: usize,
    pub travel: u64,
    pub turns: usize,
    /// Distance walked before each read, the first leg starting at the origin.
    pub per_step: Vec<u64>,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

fn direction(d: LatticeSite) -> LatticeSite {
    let g = gcd(gcd(d.x, d.y), d.z);
    LatticeSite::new(d.x / g, d.y / g, d.z / g)
}

/// Cost of visiting `sites` in order from the origin.
pub fn walk_cost(sites: &[LatticeSite]) -> CostReport {
    let mut here = LatticeSite::ORIGIN;
    let mut heading: Option<LatticeSite> = None;
    let mut report = CostReport { steps: sites.len(), travel: 0, turns: 0, per_step: Vec::with_capacity(sites.len()) };
    for &s in sites {
        let d = here.manhattan(s);
        report.per_step.push(d);
        report.travel += d;
        if d > 0 {
            let dir = direction(s.minus(here));
            if heading.is_some_and(|h| h != dir) {
                report.turns += 1;
            }
            heading = Some(dir);
        }
        here = s;
    }
    report
}

fn is_straight(sites: &[LatticeSite]) -> bool {
    match sites {
        [] | [_] => true,
        [a, b, ..] => {
            let step = b.minus(*a);
            !step.is_origin() && sites.windows(2).all(|w| w[1].minus(w[0]) == step)
        }
    }
}

/// Reads a state laid along the map's straight-line path.
pub fn straight_line_read(state: &ProductState, g: &GodelMap) -> Result<(Expression, CostReport), ReadError> {
    if !matches!(g.path(), PathRule::Line { .. }) {
        return Err(ReadError::NotLinePath);
    }
    if !is_straight(&state.support()) {
        return Err(ReadError::NotStraight);
    }
    let (x, visited) = g.read_path(state)?;
    Ok((x, walk_cost(&visited)))
}

/// Reads a state whose support is exactly `sites`, in that order.
pub fn path_read(
    state: &ProductState,
    sites: &[LatticeSite],
    g: &GodelMap,
) -> Result<(Expression, CostReport), ReadError> {
    if state.support() != sites {
        return Err(ReadError::SupportMismatch);
    }
    let map = g.with_path(PathRule::list(sites.to_vec())?);
    let (x, visited) = map.read_path(state)?;
    Ok((x, walk_cost(&visited)))
}

/// Encodes `x` under `rule` and reads it back, each site chosen from the
/// symbols read so far.
pub fn adaptive_read(x: &Expression, rule: &AdaptiveRule, g: &GodelMap) -> Result<(Expression, CostReport), ReadError> {
    read_under(x, &PathRule::Adaptive(rule.clone()), g)
}

fn read_under(x: &Expression, rule: &PathRule, g: &GodelMap) -> Result<(Expression, CostReport), ReadError> {
    let map = g.with_path(rule.clone());
    let (y, visited) = map.read_path(&map.encode(x)?)?;
    if &y != x {
        return Err(ReadError::DecodeMismatch { expected: x.symbols().to_vec(), got: y.into_symbols() });
    }
    Ok((y, walk_cost(&visited)))
}

/// Straight line along `+x` starting one site away from the origin, so
/// reading `n` symbols walks exactly `n`.
pub fn straight_rule() -> PathRule {
    PathRule::Line { origin: LatticeSite::new(1, 0, 0), dir: LatticeSite::new(1, 0, 0) }
}

/// `p(prefix, j) = (value(prefix) + j, 0, 0)` with the prefix read as a
/// base-`k` number. Strictly increasing in `j`, so injective, and the far
/// end of an `n`-symbol input sits near `k^(n−1)`.
pub fn adversarial_rule(k: usize) -> AdaptiveRule {
    AdaptiveRule::new(format!("adversarial-k{k}"), move |prefix: &[usize], j| {
        let value = Expression::new(prefix.to_vec()).index_value(k).unwrap_or(u64::MAX);
        let x = i64::try_from(value).unwrap_or(i64::MAX).saturating_add(j as i64);
        LatticeSite::new(x, 0, 0)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub n: usize,
    pub worst_travel: u64,
    pub worst_turns: usize,
    /// First input (length-lex) attaining `worst_travel`.
    pub argmax: Vec<usize>,
    pub inputs: usize,
}

/// Largest travel (and turn count) over all `k^n` inputs of length `n`.
pub fn worst_case_cost(rule: &PathRule, n: usize, k: usize) -> Result<WorstCase, ReadError> {
    let count = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if count > EXHAUSTION_GUARD as u128 {
        return Err(ReadError::GuardExceeded { count, limit: EXHAUSTION_GUARD });
    }
    let g = GodelMap::canonical(Alphabet::canonical(k).map_err(GodelError::from)?)?;
    let mut worst = WorstCase { n, worst_travel: 0, worst_turns: 0, argmax: Vec::new(), inputs: 0 };
    for x in LengthLex::of_length(k, n) {
        let (_, cost) = read_under(&x, rule, &g)?;
        if worst.inputs == 0 || cost.travel > worst.worst_travel {
            worst.worst_travel = cost.travel;
            worst.argmax = x.symbols().to_vec();
        }
        worst.worst_turns = worst.worst_turns.max(cost.turns);
        worst.inputs += 1;
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostScaling {
    pub k: usize,
    pub points: Vec<WorstCase>,
    /// Successive `travel(n+1)/travel(n)`.
    #[serde(serialize_with = "crate::numfmt::vec17::serialize")]
    pub ratios: Vec<f64>,
    pub fit: FitReport,
}

impl CostScaling {
    /// `n,worst_travel,worst_turns` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,worst_travel,worst_turns\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n, p.worst_travel, p.worst_turns));
        }
        out
    }
}

/// Worst-case travel over `lengths` and its polynomial/exponential fits.
pub fn cost_scaling(rule: &PathRule, lengths: &[usize], k: usize) -> Result<CostScaling, ReadError> {
    let points = lengths.iter().map(|&n| worst_case_cost(rule, n, k)).collect::<Result<Vec<_>, _>>()?;
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let travel: Vec<f64> = points.iter().map(|p| p.worst_travel as f64).collect();
    let ratios = travel.windows(2).map(|w| w[1] / w[0]).collect();
    let fit = fit_scaling(&ns, &travel)?;
    Ok(CostScaling { k, points, ratios, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn site(x: i64, y: i64, z: i64) -> LatticeSite {
        LatticeSite::new(x, y, z)
    }

    fn binary() -> GodelMap {
        GodelMap::canonical(Alphabet::canonical(2).unwrap()).unwrap()
    }

    #[test]
    fn straight_line_costs() {
        let g = binary();
        for (n, travel) in [(5, 4), (1, 0)] {
            let x = Expression::new(vec![1; n]);
            let (y, cost) = straight_line_read(&g.encode(&x).unwrap(), &g).unwrap();
            assert_eq!(y, x);
            assert_eq!((cost.steps, cost.travel, cost.turns), (n, travel, 0));
        }
    }

    #[test]
    fn straight_line_rejects_bent_support() {
        let g = binary();
        let bent = g.with_path(PathRule::list(vec![site(0, 0, 0), site(1, 0, 0), site(1, 1, 0)]).unwrap());
        let state = bent.encode(&Expression::new(vec![0, 1, 1])).unwrap();
        assert_eq!(straight_line_read(&state, &g).unwrap_err(), ReadError::NotStraight);
        assert_eq!(straight_line_read(&state, &bent).unwrap_err(), ReadError::NotLinePath);
    }

    #[test]
    fn explicit_path() {
        let g = binary();
        let sites = vec![site(0, 0, 0), site(5, 0, 0), site(0, 3, 0)];
        let x = Expression::new(vec![1, 0, 1]);
        let state = g.with_path(PathRule::list(sites.clone()).unwrap()).encode(&x).unwrap();
        let (y, cost) = path_read(&state, &sites, &g).unwrap();
        assert_eq!(y, x);
        assert_eq!((cost.travel, cost.turns), (13, 1));
        assert_eq!(cost.per_step, vec![0, 5, 8]);
        let permuted = vec![sites[1], sites[0], sites[2]];
        assert_eq!(path_read(&state, &permuted, &g).unwrap_err(), ReadError::SupportMismatch);
    }

    #[test]
    fn list_along_line_matches_straight_read() {
        let g = binary();
        let x = Expression::new(vec![0, 1, 1, 0]);
        let state = g.encode(&x).unwrap();
        assert_eq!(path_read(&state, &state.support(), &g).unwrap(), straight_line_read(&state, &g).unwrap());
    }

    #[test]
    fn prefix_blind_rule_matches_path_read() {
        let g = binary();
        let sites = [site(0, 0, 0), site(0, 2, 0), site(3, 2, 0), site(3, 2, -1)];
        let rule = AdaptiveRule::new("fixed", move |_: &[usize], j| sites[j - 1]);
        let x = Expression::new(vec![1, 1, 0, 1]);
        let (y, cost) = adaptive_read(&x, &rule, &g).unwrap();
        let state = g.with_path(PathRule::list(sites.to_vec()).unwrap()).encode(&x).unwrap();
        assert_eq!((y, cost), path_read(&state, &sites, &g).unwrap());
    }

    #[test]
    fn adversarial_single_symbol() {
        let (_, cost) = adaptive_read(&Expression::new(vec![1]), &adversarial_rule(2), &binary()).unwrap();
        assert_eq!(cost.per_step, vec![1]);
    }

    #[test]
    fn adversarial_worst_case_closed_form() {
        let rule = PathRule::Adaptive(adversarial_rule(2));
        for n in 1..=10 {
            let w = worst_case_cost(&rule, n, 2).unwrap();
            assert_eq!(w.worst_travel, (1u64 << (n - 1)) + n as u64 - 1);
            assert_eq!(w.inputs, 1 << n);
        }
    }

    #[test]
    fn collision_is_reported() {
        let rule = AdaptiveRule::new("fold", |prefix: &[usize], j| {
            if prefix.first() == Some(&1) && j == 2 { LatticeSite::ORIGIN } else { LatticeSite::new(j as i64 - 1, 0, 0) }
        });
        let err = adaptive_read(&Expression::new(vec![1, 0]), &rule, &binary()).unwrap_err();
        assert!(matches!(err, ReadError::Godel(GodelError::SiteCollision { .. })));
        assert!(adaptive_read(&Expression::new(vec![0, 0]), &rule, &binary()).is_ok());
    }

    #[test]
    fn guard() {
        assert!(matches!(worst_case_cost(&straight_rule(), 17, 2), Err(ReadError::GuardExceeded { .. })));
    }

    #[test]
    fn turn_counting() {
        let c = walk_cost(&[site(1, 0, 0), site(3, 0, 0), site(3, 0, 0), site(3, 4, 0), site(2, 4, 0)]);
        assert_eq!(c.per_step, vec![1, 2, 0, 4, 1]);
        assert_eq!((c.travel, c.turns), (8, 2));
        // same heading after scaling is no turn
        assert_eq!(walk_cost(&[site(1, 1, 0), site(3, 3, 0)]).turns, 0);
    }

    #[test]
    fn scaling_csv() {
        let s = cost_scaling(&straight_rule(), &[2, 3, 4], 2).unwrap();
        assert_eq!(s.to_csv(), "n,worst_travel,worst_turns\n2,2,0\n3,3,0\n4,4,0\n");
        assert!((s.fit.ell - 1.0).abs() < 1e-12);
    }
}
