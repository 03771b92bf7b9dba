//! Ground-truth checkers: the exact offline optimum, brute-force stability
//! maxima, and executable forms of the structural guarantees the engine is
//! supposed to satisfy. Everything here runs in exponential time behind
//! size caps; it exists to certify the engine at desk scale, not to compete
//! with it.

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::engine::{EngineConfig, RunTrace};
use crate::model::{
    AllocationMap, AssignmentIntervalSet, EntityId, Horizon, Instance, PlayerId, TimeStep, Value,
    lambda_pairwise, nu_step, nu_sum,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("state space too large: {states} per-step states exceed the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },
    #[error("horizon of {tau} steps exceeds the offline cap of {cap}")]
    HorizonTooLong { tau: TimeStep, cap: TimeStep },
    #[error("stability window [{a}, {b}] exceeds the enumeration cap of {cap} steps")]
    WindowTooLong { a: TimeStep, b: TimeStep, cap: u32 },
    #[error(
        "trace was produced assuming rho = {assumed} but the solver declares {declared}; \
         cannot certify"
    )]
    RhoMismatch { assumed: String, declared: String },
}

/// Default cap on per-step allocation states for the offline optimum.
pub const OFFLINE_STATE_CAP: u128 = 100_000;
/// Default cap on horizon length for the offline optimum.
pub const OFFLINE_TAU_CAP: TimeStep = 12;
/// Cap on window length for brute-force stability enumeration.
pub const STABILITY_WINDOW_CAP: u32 = 10;

/// The exact offline optimum of a horizon: one objective-maximizing
/// allocation sequence with its components.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OfflineSolution {
    pub allocations: Vec<AllocationMap>,
    pub nu: Value,
    pub lambda: Value,
    pub total: Value,
}

/// All valid allocation maps for one instance, in lexicographic order over
/// per-entity choices (unassigned sorts before the allowed players in id
/// order, entities most-significant first).
fn step_states(inst: &Instance, entities: &[EntityId]) -> Vec<AllocationMap> {
    let choices: Vec<Vec<Option<PlayerId>>> = entities
        .iter()
        .map(|&e| {
            let mut c: Vec<Option<PlayerId>> = vec![None];
            c.extend(inst.allowed_players(e).map(Some));
            c
        })
        .collect();
    fn rec(
        t: TimeStep,
        entities: &[EntityId],
        choices: &[Vec<Option<PlayerId>>],
        picks: &mut Vec<Option<PlayerId>>,
        out: &mut Vec<AllocationMap>,
    ) {
        if picks.len() == entities.len() {
            let mut a = AllocationMap::empty(t);
            for (k, pick) in picks.iter().enumerate() {
                if let Some(p) = pick {
                    a.insert(entities[k], *p);
                }
            }
            out.push(a);
            return;
        }
        let k = picks.len();
        for &c in &choices[k] {
            picks.push(c);
            rec(t, entities, choices, picks, out);
            picks.pop();
        }
    }
    let mut out = Vec::new();
    let mut picks: Vec<Option<PlayerId>> = Vec::with_capacity(entities.len());
    rec(inst.t(), entities, &choices, &mut picks, &mut out);
    out
}

fn overlap(a: &AllocationMap, b: &AllocationMap) -> u64 {
    a.iter()
        .filter(|&(e, p)| b.player_of(e) == Some(p))
        .count() as u64
}

fn check_offline_caps(horizon: &Horizon) -> Result<(), OracleError> {
    let tau = horizon.tau();
    if tau > OFFLINE_TAU_CAP {
        return Err(OracleError::HorizonTooLong {
            tau,
            cap: OFFLINE_TAU_CAP,
        });
    }
    let n = horizon.player_count() as u128 + 1;
    let mut states: u128 = 1;
    for _ in 0..horizon.entity_count() {
        states = states.saturating_mul(n);
        if states > OFFLINE_STATE_CAP {
            return Err(OracleError::StateSpaceTooLarge {
                states,
                cap: OFFLINE_STATE_CAP,
            });
        }
    }
    Ok(())
}

/// Exact maximum of the horizon objective (maxmin sum plus pairwise
/// stability) by dynamic programming over time with one state per valid
/// allocation map. Among equal-value optima the lexicographically smallest
/// trajectory is returned, so outputs are stable.
pub fn offline_optimal(horizon: &Horizon) -> Result<OfflineSolution, OracleError> {
    check_offline_caps(horizon)?;
    let tau = horizon.tau();
    let n = horizon.player_count();
    let delta = horizon.delta();
    let entities: Vec<EntityId> = horizon.entity_ids().collect();
    if tau == 0 {
        return Ok(OfflineSolution {
            allocations: Vec::new(),
            nu: 0,
            lambda: 0,
            total: 0,
        });
    }

    let states: Vec<Vec<AllocationMap>> = (1..=tau)
        .map(|t| step_states(horizon.instance(t), &entities))
        .collect();
    let nu_of: Vec<Vec<Value>> = states
        .iter()
        .enumerate()
        .map(|(k, ss)| {
            ss.iter()
                .map(|s| {
                    nu_step(s, horizon.instance(k as TimeStep + 1), n)
                        .expect("enumerated states are valid")
                })
                .collect()
        })
        .collect();

    // suffix[k][i]: best objective of steps k.. given state i at step k.
    let mut suffix: Vec<Vec<Value>> = vec![Vec::new(); tau as usize];
    suffix[tau as usize - 1] = nu_of[tau as usize - 1].clone();
    for k in (0..tau as usize - 1).rev() {
        suffix[k] = states[k]
            .iter()
            .enumerate()
            .map(|(i, cur)| {
                let follow = states[k + 1]
                    .iter()
                    .enumerate()
                    .map(|(j, next)| delta * overlap(cur, next) + suffix[k + 1][j])
                    .max()
                    .unwrap_or(0);
                nu_of[k][i] + follow
            })
            .collect();
    }

    // Forward reconstruction, smallest state index first at every step.
    let total = *suffix[0].iter().max().expect("at least the empty state");
    let mut allocations = Vec::with_capacity(tau as usize);
    let mut cur = suffix[0]
        .iter()
        .position(|&v| v == total)
        .expect("argmax exists");
    allocations.push(states[0][cur].clone());
    for k in 1..tau as usize {
        let prev = &states[k - 1][cur];
        let remaining: Vec<Value> = states[k]
            .iter()
            .enumerate()
            .map(|(j, next)| delta * overlap(prev, next) + suffix[k][j])
            .collect();
        let best = *remaining.iter().max().expect("non-empty state set");
        cur = remaining
            .iter()
            .position(|&v| v == best)
            .expect("argmax exists");
        allocations.push(states[k][cur].clone());
    }

    let nu = nu_sum(&allocations, horizon, 1, tau).expect("trajectory is valid");
    let lambda = lambda_pairwise(&allocations, delta, 1, tau);
    debug_assert_eq!(nu + lambda, total);
    Ok(OfflineSolution {
        allocations,
        nu,
        lambda,
        total,
    })
}

/// Exhaustive enumeration of every allocation trajectory; the micro-scale
/// oracle that validates the dynamic program. Returns the same
/// lexicographically-smallest optimal trajectory.
pub fn offline_exhaustive(horizon: &Horizon) -> Result<OfflineSolution, OracleError> {
    check_offline_caps(horizon)?;
    let tau = horizon.tau();
    let n = horizon.player_count();
    let delta = horizon.delta();
    let entities: Vec<EntityId> = horizon.entity_ids().collect();
    if tau == 0 {
        return Ok(OfflineSolution {
            allocations: Vec::new(),
            nu: 0,
            lambda: 0,
            total: 0,
        });
    }
    let states: Vec<Vec<AllocationMap>> = (1..=tau)
        .map(|t| step_states(horizon.instance(t), &entities))
        .collect();

    struct Dfs<'a> {
        horizon: &'a Horizon,
        states: &'a [Vec<AllocationMap>],
        n: usize,
        delta: Value,
        path: Vec<usize>,
        best: Option<(Value, Vec<usize>)>,
    }
    impl Dfs<'_> {
        fn rec(&mut self, k: usize, value: Value) {
            if k == self.states.len() {
                if self.best.as_ref().is_none_or(|(b, _)| value > *b) {
                    self.best = Some((value, self.path.clone()));
                }
                return;
            }
            for i in 0..self.states[k].len() {
                let s = &self.states[k][i];
                let mut v = value
                    + nu_step(s, self.horizon.instance(k as TimeStep + 1), self.n)
                        .expect("enumerated states are valid");
                if k > 0 {
                    let prev = &self.states[k - 1][self.path[k - 1]];
                    v += self.delta * overlap(prev, s);
                }
                self.path.push(i);
                self.rec(k + 1, v);
                self.path.pop();
            }
        }
    }
    let mut dfs = Dfs {
        horizon,
        states: &states,
        n,
        delta,
        path: Vec::new(),
        best: None,
    };
    dfs.rec(0, 0);
    let (total, path) = dfs.best.expect("at least the all-empty trajectory");
    let allocations: Vec<AllocationMap> = path
        .iter()
        .enumerate()
        .map(|(k, &i)| states[k][i].clone())
        .collect();
    let nu = nu_sum(&allocations, horizon, 1, tau).expect("trajectory is valid");
    let lambda = lambda_pairwise(&allocations, delta, 1, tau);
    debug_assert_eq!(nu + lambda, total);
    Ok(OfflineSolution {
        allocations,
        nu,
        lambda,
        total,
    })
}

/// Maximum stability value one entity can earn over `[a, b]`, by exhaustive
/// enumeration of per-step player choices (including unassigned) compressed
/// into maximal runs.
pub fn brute_stability_optimum(
    entity: EntityId,
    a: TimeStep,
    b: TimeStep,
    window: &[Instance],
    delta: Value,
) -> Result<Value, OracleError> {
    Ok(*brute_stability_prefix_maxima(entity, a, b, window, delta)?
        .last()
        .expect("at least one prefix"))
}

/// Per-prefix maxima: entry `j` is the maximum stability value over
/// `[a, a+j]`. One tree walk covers every prefix because a partial choice
/// sequence is itself a valid plan for its prefix.
pub fn brute_stability_prefix_maxima(
    entity: EntityId,
    a: TimeStep,
    b: TimeStep,
    window: &[Instance],
    delta: Value,
) -> Result<Vec<Value>, OracleError> {
    assert!(a <= b);
    debug_assert_eq!(window[0].t(), a);
    if b - a > STABILITY_WINDOW_CAP {
        return Err(OracleError::WindowTooLong {
            a,
            b,
            cap: STABILITY_WINDOW_CAP,
        });
    }
    let len = (b - a + 1) as usize;
    let choices: Vec<Vec<Option<PlayerId>>> = (0..len)
        .map(|j| {
            let mut c: Vec<Option<PlayerId>> = vec![None];
            c.extend(window[j].allowed_players(entity).map(Some));
            c
        })
        .collect();
    fn rec(
        choices: &[Vec<Option<PlayerId>>],
        depth: usize,
        prev: Option<PlayerId>,
        matches: u64,
        best: &mut [u64],
    ) {
        if matches > best[depth - 1] {
            best[depth - 1] = matches;
        }
        if depth == choices.len() {
            return;
        }
        for &c in &choices[depth] {
            let m = matches + u64::from(c.is_some() && c == prev);
            rec(choices, depth + 1, c, m, best);
        }
    }
    let mut best = vec![0u64; len];
    for &c in &choices[0] {
        rec(&choices, 1, c, 0, &mut best);
    }
    Ok(best.iter().map(|&m| delta * m).collect())
}

/// Outcome of evaluating the greedy-dominance conditions on a pair of
/// interval sets for the same entity and window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DominanceCheck {
    /// All three structural conditions hold for (challenger, reference).
    pub conditions_hold: bool,
    /// The reference set's stability value dominates on every prefix.
    pub dominance_holds: bool,
}

/// Evaluates, for a challenger set `x` and a reference set `y` on `[a, b]`:
/// (i) `y`'s first interval starts no later than `x`'s, (ii) any `y` interval
/// whose start lies inside an `x` interval ends no earlier than it, and
/// (iii) `y` assigns wherever `x` does. Independently reports whether
/// `lambda(y)` dominates `lambda(x)` on every prefix `[a, a+j]`.
pub fn check_dominance_conditions(
    x: &AssignmentIntervalSet,
    y: &AssignmentIntervalSet,
    a: TimeStep,
    b: TimeStep,
) -> DominanceCheck {
    let conditions_hold = if x.is_empty() {
        true
    } else if y.is_empty() {
        false
    } else {
        let first = y.intervals()[0].start <= x.intervals()[0].start;
        let ends = y.intervals().iter().all(|j| match x.interval_at(j.start) {
            Some(jp) => j.end >= jp.end,
            None => true,
        });
        let coverage = (a..=b).all(|t| x.interval_at(t).is_none() || y.interval_at(t).is_some());
        first && ends && coverage
    };
    let dominance_holds =
        (0..=(b - a)).all(|j| x.lambda(a, a + j, 1) <= y.lambda(a, a + j, 1));
    DominanceCheck {
        conditions_hold,
        dominance_holds,
    }
}

/// Certifies the run's guarantee against the offline optimum:
///
/// `lambda(A) + nu(A) >= (w*c0^2/(w+1)) * lambda(O) + (1-c0) * rho * nu(O)`
///
/// evaluated in exact rational arithmetic. The enclosure endpoints are chosen
/// to maximize the right side, so `true` is a sound verdict. Interval-form
/// stability scores the engine side, matching the guarantee's statement.
pub fn check_guarantee_bound(
    trace: &RunTrace,
    offline: &OfflineSolution,
    config: &EngineConfig,
) -> Result<bool, OracleError> {
    let assumed = config.rho();
    if trace.rho != assumed {
        return Err(OracleError::RhoMismatch {
            assumed: assumed.to_string(),
            declared: trace.rho.to_string(),
        });
    }
    // A solver guaranteeing a better factor also guarantees the assumed one.
    let declared_ok = trace.solver_declared_rho.is_some_and(|d| {
        d.numer() as u128 * assumed.denom() as u128
            >= assumed.numer() as u128 * d.denom() as u128
    });
    if !declared_ok {
        return Err(OracleError::RhoMismatch {
            assumed: assumed.to_string(),
            declared: trace
                .solver_declared_rho
                .map_or("none".to_string(), |d| d.to_string()),
        });
    }

    let (lo, hi) = config.threshold().enclosure();
    let w = BigRational::from(BigInt::from(config.lookahead()));
    let wp1 = BigRational::from(BigInt::from(config.lookahead() + 1));
    let one = BigRational::from(BigInt::from(1));
    let rho = assumed.as_rational();
    let big = |v: Value| BigRational::from(BigInt::from(v));

    let lhs = big(trace.lambda_interval_total + trace.nu_total);
    let rhs = (&w / &wp1) * hi * hi * big(offline.lambda)
        + (&one - lo) * &rho * big(offline.nu);
    Ok(lhs >= rhs)
}

/// Final-plan endpoints must line up with the committed periods: every
/// planned interval's start is a period start and its end is a period end.
/// Interval starts seen mid-run inside the lookahead tail must become period
/// starts as well.
pub fn check_period_alignment(trace: &RunTrace) -> Result<(), String> {
    if trace.tau == 0 {
        return Ok(());
    }
    let starts: Vec<TimeStep> = trace.periods.iter().map(|p| p.start).collect();
    let ends: Vec<TimeStep> = trace.periods.iter().map(|p| p.end).collect();
    for plan in trace.final_plans() {
        for iv in plan.intervals() {
            if iv.start > trace.tau {
                return Err(format!(
                    "{}: interval [{}, {}] starts past the horizon",
                    plan.entity(),
                    iv.start,
                    iv.end
                ));
            }
            if !starts.contains(&iv.start) {
                return Err(format!(
                    "{}: interval start {} is not a period start",
                    plan.entity(),
                    iv.start
                ));
            }
            if !ends.contains(&iv.end.min(trace.tau)) {
                return Err(format!(
                    "{}: interval end {} is not a period end",
                    plan.entity(),
                    iv.end
                ));
            }
        }
    }
    for (snap, period) in trace.snapshots.iter().zip(&trace.periods) {
        let s = snap.period_start;
        let hi = (s + trace.lookahead).min(trace.tau);
        debug_assert_eq!(s, period.start);
        for plan in &snap.plans {
            for iv in plan.intervals() {
                if iv.start > s && iv.start <= hi && !starts.contains(&iv.start) {
                    return Err(format!(
                        "{}: planned start {} (seen at period {}) never became a period start",
                        plan.entity(),
                        iv.start,
                        s
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Replanning at a later period start must never rewrite intervals that
/// start before it: committed decisions are irrevocable.
pub fn check_snapshot_stability(trace: &RunTrace) -> Result<(), String> {
    for pair in trace.snapshots.windows(2) {
        let (prev, next) = (&pair[0], &pair[1]);
        let cut = next.period_start;
        for (a, b) in prev.plans.iter().zip(&next.plans) {
            let frozen_prev: Vec<_> = a.intervals().iter().filter(|iv| iv.start < cut).collect();
            let frozen_next: Vec<_> = b.intervals().iter().filter(|iv| iv.start < cut).collect();
            if frozen_prev != frozen_next {
                return Err(format!(
                    "{}: intervals before step {} changed between periods {} and {}",
                    a.entity(),
                    cut,
                    prev.period_start,
                    next.period_start
                ));
            }
        }
    }
    Ok(())
}
