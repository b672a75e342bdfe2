//! Creation-probability traces and their stabilization time.
//!
//! A finite chain never settles pointwise, so the Cauchy criterion is
//! applied to the running mean `p̄`, which does converge.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{build_transcription_machine, reachable_subspace, ConfigSubspace, HeadError};
use crate::godel::EXHAUSTION_GUARD;
use crate::lang::{Alphabet, Expression, LengthLex};
use crate::numfmt::f17;
use crate::qstate::{Projector, Propagator, C64};
use crate::scaling::{fit_scaling, FitReport};

/// Fewest points [`limit_estimate`] accepts.
pub const MIN_TAIL_POINTS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub pbar: Vec<f64>,
}

fn check_grid(times: &[f64]) -> Result<(), HeadError> {
    if times.is_empty() || times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(HeadError::BadGrid);
    }
    Ok(())
}

impl Trace {
    /// Samples `p` and their running mean.
    pub fn new(times: Vec<f64>, p: Vec<f64>) -> Result<Self, HeadError> {
        check_grid(&times)?;
        if p.len() != times.len() {
            return Err(HeadError::BadGrid);
        }
        let mut pbar = Vec::with_capacity(p.len());
        let mut mean = 0.0;
        for (i, &x) in p.iter().enumerate() {
            mean += (x - mean) / (i + 1) as f64;
            pbar.push(mean);
        }
        Ok(Self { times, p, pbar })
    }

    /// Builds a trace from a prescribed running mean; `p` is recovered by
    /// differencing.
    pub fn from_running_mean(times: Vec<f64>, pbar: Vec<f64>) -> Result<Self, HeadError> {
        check_grid(&times)?;
        if pbar.len() != times.len() {
            return Err(HeadError::BadGrid);
        }
        let p = (0..pbar.len())
            .map(|i| if i == 0 { pbar[0] } else { (i + 1) as f64 * pbar[i] - i as f64 * pbar[i - 1] })
            .collect();
        Ok(Self { times, p, pbar })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// `t,p,pbar` rows, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,p,pbar\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                crate::numfmt::sig17(self.times[i]),
                crate::numfmt::sig17(self.p[i]),
                crate::numfmt::sig17(self.pbar[i])
            ));
        }
        out
    }
}

/// `0, Δt, 2Δt, …` up to `horizon`.
pub fn time_grid(dt: f64, horizon: f64) -> Vec<f64> {
    let steps = (horizon / dt + 1e-9).floor() as usize;
    (0..=steps).map(|i| i as f64 * dt).collect()
}

/// Evolution from the first configuration, diagonalized once.
pub(crate) struct Walk {
    prop: Propagator,
    coeffs: DVector<C64>,
}

impl Walk {
    pub(crate) fn new(h: &DMatrix<C64>) -> Result<Self, HeadError> {
        let prop = Propagator::new(h)?;
        let mut start = vec![C64::new(0.0, 0.0); prop.dim()];
        start[0] = C64::new(1.0, 0.0);
        let coeffs = prop.spectral_coefficients(&start)?;
        Ok(Self { prop, coeffs })
    }

    /// `Σ_c w_c |⟨c|ψ(t)⟩|²`.
    fn probability(&self, weights: &[f64], t: f64) -> f64 {
        let dim = self.prop.dim();
        let phased: Vec<C64> =
            (0..dim).map(|k| self.coeffs[k] * C64::from_polar(1.0, -self.prop.energies()[k] * t)).collect();
        let mut p = 0.0;
        for (row, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let mut amp = C64::new(0.0, 0.0);
            for (k, ph) in phased.iter().enumerate() {
                amp += self.prop.vectors()[(row, k)] * ph;
            }
            p += w * amp.norm_sqr();
        }
        // round-off can push a certain outcome a few ulps past 1
        p.clamp(0.0, 1.0)
    }

    fn trace(&self, weights: &[f64], grid: &[f64]) -> Result<Trace, HeadError> {
        check_grid(grid)?;
        Trace::new(grid.to_vec(), grid.iter().map(|&t| self.probability(weights, t)).collect())
    }
}

/// `p(t) = ⟨Ψ(t)|P|Ψ(t)⟩` from the first configuration of `sub`.
pub fn projector_trace(sub: &ConfigSubspace, proj: &Projector, grid: &[f64]) -> Result<Trace, HeadError> {
    let weights = sub.projector_weights(proj)?;
    Walk::new(sub.generator())?.trace(&weights, grid)
}

/// Mean of `p̄` over the second half of the trace.
pub fn limit_estimate(trace: &Trace) -> Result<f64, HeadError> {
    if trace.len() < MIN_TAIL_POINTS {
        return Err(HeadError::TraceTooShort { got: trace.len(), need: MIN_TAIL_POINTS });
    }
    let mut mean = 0.0;
    for (i, &x) in trace.pbar[trace.len() / 2..].iter().enumerate() {
        mean += (x - mean) / (i + 1) as f64;
    }
    Ok(mean)
}

/// Smallest grid time after which `p̄` varies by less than `2^-m`. The
/// answer must lie in the first half of the horizon.
pub fn estimate_tau(trace: &Trace, m: u32) -> Result<f64, HeadError> {
    let eps = 0.5f64.powi(m as i32);
    let n = trace.len();
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut first = n - 1;
    for i in (0..n).rev() {
        hi = hi.max(trace.pbar[i]);
        lo = lo.min(trace.pbar[i]);
        if hi - lo < eps {
            first = i;
        } else {
            break;
        }
    }
    let (t0, t_end) = (trace.times[0], trace.horizon());
    let tau = trace.times[first];
    if tau > t0 + 0.5 * (t_end - t0) {
        return Err(HeadError::HorizonTooShort { m, horizon: t_end });
    }
    Ok(tau)
}

/// Time grid and horizon doubling used for τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizonPolicy {
    pub dt: f64,
    pub initial_horizon: f64,
    pub max_steps: usize,
    /// Successive estimates within this relative distance count as stable.
    pub rel_tol: f64,
}

impl HorizonPolicy {
    /// `Δt = 0.1/λ`, first horizon `50/λ`, at most `10⁵` steps.
    pub fn for_coupling(lambda: f64) -> Self {
        Self { dt: 0.1 / lambda, initial_horizon: 50.0 / lambda, max_steps: 100_000, rel_tol: 0.1 }
    }
}

/// τ from traces over doubling horizons until two successive estimates
/// agree. Returns `(τ, final trace)`.
pub fn stabilized_tau(
    sub: &ConfigSubspace,
    weights: &[f64],
    m: u32,
    policy: HorizonPolicy,
) -> Result<(f64, Trace), HeadError> {
    stabilized_walk(&Walk::new(sub.generator())?, weights, m, policy)
}

fn stabilized_walk(walk: &Walk, weights: &[f64], m: u32, policy: HorizonPolicy) -> Result<(f64, Trace), HeadError> {
    let mut horizon = policy.initial_horizon;
    let mut previous: Option<f64> = None;
    loop {
        if horizon / policy.dt > policy.max_steps as f64 + 1e-9 {
            return Err(HeadError::StepCap { steps: policy.max_steps });
        }
        let trace = walk.trace(weights, &time_grid(policy.dt, horizon))?;
        match estimate_tau(&trace, m) {
            Ok(tau) => {
                if let Some(prev) = previous {
                    if (tau - prev).abs() <= policy.rel_tol * tau.max(prev) {
                        return Ok((tau, trace));
                    }
                }
                previous = Some(tau);
            }
            Err(HeadError::HorizonTooShort { .. }) => previous = None,
            Err(e) => return Err(e),
        }
        horizon *= 2.0;
    }
}

/// Which targets τ is taken over.
#[derive(Debug, Clone, PartialEq)]
pub enum Trials {
    /// Maximum over every expression of length `n`.
    AllTargets,
    /// One target per length: the pattern repeated to length `n`.
    Fixed(Expression),
}

impl Trials {
    fn targets(&self, k: usize, n: usize) -> Result<Vec<Expression>, HeadError> {
        match self {
            Trials::AllTargets => {
                let count = (k as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
                if count > EXHAUSTION_GUARD as u128 {
                    return Err(HeadError::GuardExceeded { count, limit: EXHAUSTION_GUARD });
                }
                Ok(LengthLex::of_length(k, n).collect())
            }
            Trials::Fixed(pattern) => {
                if pattern.is_empty() {
                    return Err(HeadError::EmptyTarget);
                }
                let s = pattern.symbols();
                Ok(vec![Expression::new((0..n).map(|i| s[i % s.len()]).collect())])
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauPoint {
    pub n: usize,
    #[serde(serialize_with = "f17::serialize")]
    pub tau: f64,
    /// Target attaining the maximum, rendered in the alphabet.
    pub target: String,
    #[serde(serialize_with = "f17::serialize")]
    pub horizon: f64,
    #[serde(serialize_with = "f17::serialize")]
    pub limit: f64,
    pub targets: usize,
    /// Targets with distinct projector weights on the chain; only these
    /// are simulated.
    pub distinct_weightings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub m: u32,
    pub a: i64,
    #[serde(serialize_with = "f17::serialize")]
    pub lambda: f64,
    pub points: Vec<TauPoint>,
    pub fit: FitReport,
}

/// τ for the transcription machine at one length.
pub fn tau_for_length(
    alphabet: &Alphabet,
    n: usize,
    m: u32,
    a: i64,
    trials: &Trials,
    lambda: f64,
    policy: HorizonPolicy,
) -> Result<TauPoint, HeadError> {
    let targets = trials.targets(alphabet.len(), n)?;
    let mut generator: Option<DMatrix<C64>> = None;
    let mut by_weights: BTreeMap<Vec<u64>, (Expression, Vec<f64>)> = BTreeMap::new();
    for x in &targets {
        let spec = build_transcription_machine(alphabet, x, lambda)?.at_origin(a);
        let sub = reachable_subspace(&spec, spec.initial())?;
        match &generator {
            None => generator = Some(sub.generator().clone()),
            Some(h) if h != sub.generator() => return Err(HeadError::GeneratorsDiffer { n }),
            Some(_) => {}
        }
        let weights = sub.projector_weights(&Projector { target: x.clone(), interval: spec.tape_sites() })?;
        let key = weights.iter().map(|w| w.to_bits()).collect();
        by_weights.entry(key).or_insert_with(|| (x.clone(), weights));
    }
    let walk = Walk::new(&generator.expect("at least one target"))?;
    let mut best: Option<(f64, &Expression, Trace)> = None;
    let mut firsts: Vec<_> = by_weights.values().collect();
    firsts.sort_by(|a, b| a.0.cmp(&b.0));
    for (x, weights) in firsts {
        let (tau, trace) = stabilized_walk(&walk, weights, m, policy)?;
        if best.as_ref().is_none_or(|b| tau > b.0) {
            best = Some((tau, x, trace));
        }
    }
    let (tau, x, trace) = best.expect("at least one target");
    Ok(TauPoint {
        n,
        tau,
        target: alphabet.render(x),
        horizon: trace.horizon(),
        limit: limit_estimate(&trace)?,
        targets: targets.len(),
        distinct_weightings: by_weights.len(),
    })
}

/// τ(m, a, n) over `lengths` and the polynomial/exponential fits.
pub fn tau_scaling(
    alphabet: &Alphabet,
    lengths: &[usize],
    m: u32,
    a: i64,
    trials: &Trials,
    lambda: f64,
) -> Result<ScalingReport, HeadError> {
    tau_scaling_with(alphabet, lengths, m, a, trials, lambda, HorizonPolicy::for_coupling(lambda))
}

/// [`tau_scaling`] with an explicit horizon schedule.
pub fn tau_scaling_with(
    alphabet: &Alphabet,
    lengths: &[usize],
    m: u32,
    a: i64,
    trials: &Trials,
    lambda: f64,
    policy: HorizonPolicy,
) -> Result<ScalingReport, HeadError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(HeadError::NonPositiveCoupling(lambda));
    }
    let points = lengths
        .iter()
        .map(|&n| tau_for_length(alphabet, n, m, a, trials, lambda, policy))
        .collect::<Result<Vec<_>, _>>()?;
    let ns: Vec<f64> = points.iter().map(|p| p.n as f64).collect();
    let taus: Vec<f64> = points.iter().map(|p| p.tau).collect();
    let fit = fit_scaling(&ns, &taus)?;
    Ok(ScalingReport { m, a, lambda, points, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits() -> Alphabet {
        Alphabet::new(["#", "0", "1"]).unwrap()
    }

    fn chain(target: &str, lambda: f64) -> (ConfigSubspace, Projector) {
        let a = bits();
        let x = a.parse(target).unwrap();
        let spec = build_transcription_machine(&a, &x, lambda).unwrap();
        let sub = reachable_subspace(&spec, spec.initial()).unwrap();
        (sub, Projector { target: x, interval: spec.tape_sites() })
    }

    #[test]
    fn starts_at_zero() {
        let (sub, proj) = chain("011", 1.0);
        let trace = projector_trace(&sub, &proj, &time_grid(0.1, 5.0)).unwrap();
        assert!(trace.p[0] < 1e-15);
        assert!(trace.p.iter().chain(&trace.pbar).all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn two_node_rabi() {
        let lambda = 1.3;
        let (sub, proj) = chain("1", lambda);
        let grid = time_grid(0.05, 40.0);
        let trace = projector_trace(&sub, &proj, &grid).unwrap();
        for (t, p) in trace.times.iter().zip(&trace.p) {
            assert!((p - (lambda * t).sin().powi(2)).abs() < 1e-12);
        }
        let long = projector_trace(&sub, &proj, &time_grid(0.1 / lambda, 1e4)).unwrap();
        assert!((limit_estimate(&long).unwrap() - 0.5).abs() < 1e-3);
    }

    #[test]
    fn grid_checks() {
        let (sub, proj) = chain("1", 1.0);
        assert_eq!(projector_trace(&sub, &proj, &[0.0, 1.0, 1.0]).unwrap_err(), HeadError::BadGrid);
        assert_eq!(projector_trace(&sub, &proj, &[]).unwrap_err(), HeadError::BadGrid);
    }

    #[test]
    fn constant_trace() {
        let times: Vec<f64> = (0..40).map(|i| 0.5 + i as f64).collect();
        let trace = Trace::new(times, vec![0.3; 40]).unwrap();
        assert_eq!(limit_estimate(&trace).unwrap(), 0.3);
        for m in [1, 5, 30] {
            assert_eq!(estimate_tau(&trace, m).unwrap(), 0.5);
        }
        let short = Trace::new(vec![0.0, 1.0], vec![0.3; 2]).unwrap();
        assert!(matches!(limit_estimate(&short), Err(HeadError::TraceTooShort { got: 2, .. })));
    }

    #[test]
    fn exponential_relaxation() {
        let dt = 0.01;
        let times = time_grid(dt, 20.0);
        let pbar = times.iter().map(|t| 1.0 - (-t).exp()).collect();
        let trace = Trace::from_running_mean(times, pbar).unwrap();
        let tau = estimate_tau(&trace, 3).unwrap();
        assert!((tau - 8f64.ln()).abs() <= dt, "{tau}");
    }

    #[test]
    fn short_horizon_is_reported() {
        let times = time_grid(0.01, 3.0);
        let pbar = times.iter().map(|t| 1.0 - (-t).exp()).collect();
        let trace = Trace::from_running_mean(times, pbar).unwrap();
        assert!(matches!(estimate_tau(&trace, 3), Err(HeadError::HorizonTooShort { m: 3, .. })));
    }

    #[test]
    fn single_cell_tau_exists() {
        let (sub, proj) = chain("0", 1.0);
        let weights = sub.projector_weights(&proj).unwrap();
        let (tau, trace) = stabilized_tau(&sub, &weights, 2, HorizonPolicy::for_coupling(1.0)).unwrap();
        assert!(tau.is_finite() && tau > 0.0 && tau <= trace.horizon() / 2.0);
    }

    #[test]
    fn step_cap() {
        let (sub, proj) = chain("0", 1.0);
        let weights = sub.projector_weights(&proj).unwrap();
        let policy = HorizonPolicy { max_steps: 100, ..HorizonPolicy::for_coupling(1.0) };
        assert_eq!(stabilized_tau(&sub, &weights, 30, policy).unwrap_err(), HeadError::StepCap { steps: 100 });
    }

    #[test]
    fn csv_layout() {
        let trace = Trace::new(vec![0.0, 0.1], vec![0.0, 1.0]).unwrap();
        assert_eq!(
            trace.to_csv(),
            "t,p,pbar\n0.0000000000000000e0,0.0000000000000000e0,0.0000000000000000e0\n\
             1.0000000000000001e-1,1.0000000000000000e0,5.0000000000000000e-1\n"
        );
    }

    #[test]
    fn fixed_pattern_repeats() {
        let a = bits();
        let t = Trials::Fixed(a.parse("01").unwrap()).targets(3, 5).unwrap();
        assert_eq!(a.render(&t[0]), "01010");
        assert!(matches!(Trials::AllTargets.targets(3, 11), Err(HeadError::GuardExceeded { .. })));
    }

    #[test]
    fn offset_is_inert() {
        let a = bits();
        let p0 = tau_for_length(&a, 3, 2, 0, &Trials::AllTargets, 1.0, HorizonPolicy::for_coupling(1.0)).unwrap();
        let p7 = tau_for_length(&a, 3, 2, -7, &Trials::AllTargets, 1.0, HorizonPolicy::for_coupling(1.0)).unwrap();
        assert_eq!(p0, p7);
        assert_eq!(p0.targets, 27);
        assert_eq!(p0.distinct_weightings, 4);
    }
}
